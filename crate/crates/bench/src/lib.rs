//! Fixtures shared by the criterion benches.

use macgyver_core::geometry::PointCloud;
use macgyver_core::pipeline::EvaluatedState;
use macgyver_core::scoring::{AttachmentScore, ScoreBreakdown};
use macgyver_core::synth::{gen_part_cloud, gen_tool_cloud, PartKind, PartSpec, ToolPrototypeSpec};
use macgyver_core::Action;

pub fn tool(action: Action, seed: u64) -> PointCloud {
    gen_tool_cloud(action, &ToolPrototypeSpec::default_for(action), seed).expect("default spec is valid")
}

pub fn part(kind: PartKind, seed: u64) -> PointCloud {
    gen_part_cloud(kind, &PartSpec::default(), seed).expect("default spec is valid")
}

/// `n` constructions with scores spread over a small range, a few of
/// them unattachable.
pub fn states(n: usize) -> Vec<EvaluatedState> {
    (0..n)
        .map(|i| {
            let x = (i * 37 % 101) as f64 / 101.0;
            let att = if i % 17 == 3 {
                AttachmentScore::Unattachable
            } else {
                AttachmentScore::Score(-x)
            };
            EvaluatedState {
                index: i,
                key: format!("o{}+o{}", i / 10, i % 10),
                parts: vec![format!("o{}", i / 10), format!("o{}", i % 10)],
                scores: ScoreBreakdown::construction(1.0 - x, x, att),
                attach_type: None,
                closest_points: None,
                joint_shape: Some(x),
                value: None,
                rank: None,
            }
        })
        .collect()
}
