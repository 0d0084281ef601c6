use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{enumerate_for_mode, CandidateObject, EvaluatedState, PipelineError, QueryConfig, StateSpec};
use crate::action::Action;
use crate::geometry::{compute_esf, merge_clouds, pca_align, EsfDescriptor, Point, PointCloud};
use crate::models::ModelSet;
use crate::scoring::{
    grasp_sample, infer_attachment, normalize_attachments, shape_fit_independent, shape_fit_joint,
    shape_input, tuple_roles, AttachPart, AttachmentResult, MaterialAggregation, ScoreBreakdown,
    ScoringError,
};

/// Scored states in enumeration order, before arbitration.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub states: Vec<EvaluatedState>,
    pub reference_id: Option<String>,
}

struct Scored {
    shape: f64,
    material: f64,
    attachment: Option<AttachmentResult>,
    joint: Option<f64>,
}

/// Scores every state `config.mode` considers. Attachment scores are
/// normalized over all constructions of this query.
pub fn evaluate(
    objects: &[CandidateObject],
    action: Action,
    models: &ModelSet,
    config: &QueryConfig,
) -> Result<Evaluation, PipelineError> {
    if objects.is_empty() {
        return Err(PipelineError::NoObjects);
    }
    if config.m < 2 {
        return Err(PipelineError::InvalidM(config.m));
    }
    let ids: Vec<&str> = objects.iter().map(|o| o.id.as_str()).collect();
    let specs = enumerate_for_mode(&ids, config.m, config.mode);
    let any_subs = specs.iter().any(StateSpec::is_substitute);
    let any_cons = specs.iter().any(|s| !s.is_substitute());

    let material = models
        .material
        .get(&action)
        .ok_or_else(|| PipelineError::MissingModel(format!("material/{action}")))?;
    let joint = if any_subs || (any_cons && config.joint_constructions) {
        Some(
            models
                .joint_shape
                .get(&action)
                .ok_or_else(|| PipelineError::MissingModel(format!("joint-shape/{action}")))?,
        )
    } else {
        None
    };

    // Per-object work shared by every state.
    let esf: Vec<EsfDescriptor> = objects
        .par_iter()
        .map(|o| compute_esf(&o.cloud, config.esf_samples, config.seed))
        .collect::<Result<_, _>>()?;
    let mat: Vec<Option<f64>> = objects
        .iter()
        .map(|o| o.spectral.as_ref().map(|r| material.score(r.values())).transpose())
        .collect::<Result<_, _>>()?;
    let mat_of = |i: usize| -> Result<f64, PipelineError> {
        mat[i].ok_or_else(|| ScoringError::MissingSpectral(objects[i].id.clone()).into())
    };

    let mut reference: Option<&PointCloud> = None;
    let mut pierceable = vec![false; objects.len()];
    let mut grasps: BTreeMap<(usize, u64), Vec<Point>> = BTreeMap::new();
    if any_cons {
        let library = models
            .references
            .get(&action)
            .filter(|l| !l.is_empty())
            .ok_or_else(|| ScoringError::MissingReference(action.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        reference = Some(&library[rng.random_range(0..library.len())]);
        if objects.iter().any(|o| o.capabilities.pierce_tool) {
            let clf = models
                .pierce
                .as_ref()
                .ok_or_else(|| PipelineError::MissingModel("pierce".into()))?;
            for (i, o) in objects.iter().enumerate() {
                if let Some(r) = &o.spectral {
                    pierceable[i] = crate::scoring::pierceability(r, clf)?;
                }
            }
        }
        let widths: Vec<f64> = objects
            .iter()
            .filter(|o| o.capabilities.grasp_tool)
            .filter_map(|o| o.capabilities.gripper_width)
            .collect();
        for w in widths {
            for (i, o) in objects.iter().enumerate() {
                grasps
                    .entry((i, w.to_bits()))
                    .or_insert_with(|| grasp_sample(&o.cloud, w, config.seed));
            }
        }
    }

    let scored: Vec<Scored> = specs
        .par_iter()
        .map(|spec| -> Result<Scored, PipelineError> {
            if spec.is_substitute() {
                let i = spec.parts[0];
                let j = joint.expect("joint model loaded for substitutes");
                return Ok(Scored {
                    shape: j.score(&shape_input(&esf[i]))?,
                    material: mat_of(i)?,
                    attachment: None,
                    joint: None,
                });
            }
            let parts: Vec<PointCloud> = spec.parts.iter().map(|&i| objects[i].cloud.clone()).collect();
            let reference = reference.expect("reference sampled for constructions");
            let assembly = pca_align(&parts, reference, &tuple_roles(parts.len()))?;
            let descs: Vec<&EsfDescriptor> = spec.parts.iter().map(|&i| &esf[i]).collect();
            let shape = shape_fit_independent(&descs, action, &models.parts)?;
            let material = match config.material_aggregation {
                MaterialAggregation::ActionPart => mat_of(spec.parts[0])?,
                MaterialAggregation::MeanOverParts => {
                    let mut total = 0.0;
                    for &i in &spec.parts {
                        total += mat_of(i)?;
                    }
                    total / spec.parts.len() as f64
                }
            };
            let attach_parts: Vec<AttachPart<'_>> = spec
                .parts
                .iter()
                .map(|&i| AttachPart {
                    capabilities: &objects[i].capabilities,
                    pierceable: pierceable[i],
                })
                .collect();
            let attachment = infer_attachment(&config.attach_order, &attach_parts, &assembly, |k, w| {
                grasps.get(&(spec.parts[k], w.to_bits())).cloned().unwrap_or_default()
            })?;
            let joint = match (config.joint_constructions, joint) {
                (true, Some(j)) => {
                    let merged = merge_clouds(&assembly);
                    let d = compute_esf(&merged, config.esf_samples, config.seed)?;
                    Some(shape_fit_joint(&j.model, &j.embedding, &d)?)
                }
                _ => None,
            };
            Ok(Scored {
                shape,
                material,
                attachment: Some(attachment),
                joint,
            })
        })
        .collect::<Result<_, _>>()?;

    let batch: Vec<AttachmentResult> = scored.iter().filter_map(|s| s.attachment.clone()).collect();
    let normalized = if batch.is_empty() {
        Vec::new()
    } else {
        normalize_attachments(&batch)?
    };
    let mut norm_iter = normalized.into_iter();

    let states = specs
        .iter()
        .zip(scored)
        .enumerate()
        .map(|(index, (spec, s))| {
            let (scores, attach_type, closest_points) = match s.attachment {
                None => (ScoreBreakdown::substitute(s.shape, s.material), None, None),
                Some(r) => {
                    let att = norm_iter.next().expect("one normalized score per construction");
                    (
                        ScoreBreakdown::construction(s.shape, s.material, att),
                        Some(r.attach_type),
                        Some(r.closest_points),
                    )
                }
            };
            EvaluatedState {
                index,
                key: spec.key(&ids),
                parts: spec.parts.iter().map(|&i| ids[i].to_string()).collect(),
                scores,
                attach_type,
                closest_points,
                joint_shape: s.joint,
                value: None,
                rank: None,
            }
        })
        .collect();

    Ok(Evaluation {
        states,
        reference_id: reference.map(|r| r.id().to_string()),
    })
}
