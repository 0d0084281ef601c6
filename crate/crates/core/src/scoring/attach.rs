//! Attachment feasibility and cost for an aligned construction.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ScoringError;
use crate::geometry::{AlignedAssembly, Point};

/// Fixed cost of a pierce attachment.
pub const PIERCE_ALPHA: f64 = 0.5;
/// Grasp attachments carry no fixed cost.
pub const GRASP_ALPHA: f64 = 0.0;
/// Magnetic attachments carry no fixed cost.
pub const MAGNETIC_ALPHA: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttachType {
    Pierce,
    Grasp,
    Magnetic,
    None,
}

impl AttachType {
    /// Default order in which attachment types are tried.
    pub const PREFERENCE: [AttachType; 3] =
        [AttachType::Pierce, AttachType::Grasp, AttachType::Magnetic];

    pub fn alpha(self) -> f64 {
        match self {
            AttachType::Pierce => PIERCE_ALPHA,
            AttachType::Grasp => GRASP_ALPHA,
            AttachType::Magnetic => MAGNETIC_ALPHA,
            AttachType::None => 0.0,
        }
    }
}

impl fmt::Display for AttachType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            AttachType::Pierce => "pierce",
            AttachType::Grasp => "grasp",
            AttachType::Magnetic => "magnetic",
            AttachType::None => "none",
        })
    }
}

/// What an object can do for an attachment, declared a priori.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectCapabilities {
    #[serde(default)]
    pub pierce_tool: bool,
    #[serde(default)]
    pub grasp_tool: bool,
    /// Jaw opening in meters; required for grasp tools.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gripper_width: Option<f64>,
    /// Magnet positions in the object's own frame.
    #[serde(default)]
    pub magnets: Vec<[f64; 3]>,
}

impl ObjectCapabilities {
    pub fn validate(&self) -> Result<(), String> {
        if self.grasp_tool && !self.gripper_width.is_some_and(|w| w > 0.0 && w.is_finite()) {
            return Err("grasp tool needs a positive gripper_width".into());
        }
        if self.magnets.iter().flatten().any(|c| !c.is_finite()) {
            return Err("magnet coordinates must be finite".into());
        }
        Ok(())
    }

    pub fn magnet_points(&self) -> Vec<Point> {
        self.magnets.iter().map(|m| Point::new(m[0], m[1], m[2])).collect()
    }
}

/// Per-part attachment inputs, in tuple order.
#[derive(Debug, Clone)]
pub struct AttachPart<'a> {
    pub capabilities: &'a ObjectCapabilities,
    /// Output of the pierceability classifier for this object.
    pub pierceable: bool,
}

/// Raw attachment score for one construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttachmentResult {
    /// `α + Σ distances`, or `None` when the parts cannot be attached.
    pub raw_score: Option<f64>,
    /// One chosen attachment point per part; the targets `P` when unattachable.
    pub closest_points: Vec<[f64; 3]>,
    pub attach_type: AttachType,
    pub alpha: f64,
}

impl AttachmentResult {
    pub fn is_attachable(&self) -> bool {
        self.raw_score.is_some()
    }

    fn unattachable(attach_type: AttachType, targets: &[Point]) -> Self {
        Self {
            raw_score: None,
            closest_points: targets.iter().map(|p| [p.x, p.y, p.z]).collect(),
            attach_type,
            alpha: attach_type.alpha(),
        }
    }
}

/// Batch-normalized attachment score: in `[-1, 0]`, or unattachable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttachmentScore {
    Score(f64),
    Unattachable,
}

impl AttachmentScore {
    pub fn as_finite(self) -> Option<f64> {
        match self {
            AttachmentScore::Score(v) => Some(v),
            AttachmentScore::Unattachable => None,
        }
    }
}

impl Serialize for AttachmentScore {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            AttachmentScore::Score(v) => s.serialize_f64(*v),
            AttachmentScore::Unattachable => s.serialize_str("unattachable"),
        }
    }
}

impl<'de> Deserialize<'de> for AttachmentScore {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(AttachmentScore::Score(v)),
            Raw::Text(t) if t == "unattachable" => Ok(AttachmentScore::Unattachable),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("bad attachment score {t:?}"))),
        }
    }
}

/// The point of `candidates` nearest to any target, and that distance.
fn nearest_to_targets(candidates: &[Point], targets: &[Point]) -> Option<(Point, f64)> {
    let mut best: Option<(Point, f64)> = None;
    for a in candidates {
        for p in targets {
            let d = (a - p).norm();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((*a, d));
            }
        }
    }
    best
}

/// Scores one attachment type for an aligned tuple.
///
/// `grasp_points(k, width)` must return grasp locations on part `k` in that
/// object's own frame for a gripper of the given width; it is only called
/// for grasp attachments.
pub fn attachment_fit(
    attach_type: AttachType,
    parts: &[AttachPart<'_>],
    assembly: &AlignedAssembly,
    mut grasp_points: impl FnMut(usize, f64) -> Vec<Point>,
) -> Result<AttachmentResult, ScoringError> {
    if parts.len() != assembly.parts.len() {
        return Err(ScoringError::Mismatch(format!(
            "{} attachment inputs for {} aligned parts",
            parts.len(),
            assembly.parts.len()
        )));
    }
    let targets = &assembly.intersections;
    if targets.is_empty() {
        return Ok(AttachmentResult::unattachable(attach_type, targets));
    }

    // Candidate attachment points for every part, in the aligned frame.
    let per_part: Vec<Vec<Point>> = match attach_type {
        AttachType::Pierce => {
            let has_tool = parts.iter().any(|p| p.capabilities.pierce_tool);
            let targets_ok = parts
                .iter()
                .filter(|p| !p.capabilities.pierce_tool)
                .map(|p| p.pierceable)
                .collect::<Vec<_>>();
            if !has_tool || targets_ok.is_empty() || targets_ok.iter().any(|ok| !ok) {
                return Ok(AttachmentResult::unattachable(attach_type, targets));
            }
            vec![targets.clone(); parts.len()]
        }
        AttachType::Grasp => {
            let Some(tool) = parts.iter().position(|p| p.capabilities.grasp_tool) else {
                return Ok(AttachmentResult::unattachable(attach_type, targets));
            };
            let width = parts[tool]
                .capabilities
                .gripper_width
                .ok_or_else(|| ScoringError::Mismatch("grasp tool without gripper width".into()))?;
            let mut grasps = Vec::new();
            for k in (0..parts.len()).filter(|&k| k != tool) {
                let t = &assembly.parts[k].transform;
                grasps.extend(grasp_points(k, width).iter().map(|g| t.apply(g)));
            }
            if grasps.is_empty() {
                return Ok(AttachmentResult::unattachable(attach_type, targets));
            }
            // The grasp tool closes on the same location it grasps.
            vec![grasps; parts.len()]
        }
        AttachType::Magnetic => {
            let mut out = Vec::with_capacity(parts.len());
            for (k, p) in parts.iter().enumerate() {
                if p.capabilities.magnets.is_empty() {
                    return Ok(AttachmentResult::unattachable(attach_type, targets));
                }
                let t = &assembly.parts[k].transform;
                out.push(p.capabilities.magnet_points().iter().map(|m| t.apply(m)).collect());
            }
            out
        }
        AttachType::None => return Ok(AttachmentResult::unattachable(attach_type, targets)),
    };

    let alpha = attach_type.alpha();
    let mut raw = 0.0;
    let mut closest = Vec::with_capacity(parts.len());
    for candidates in &per_part {
        let (a, d) = nearest_to_targets(candidates, targets).expect("non-empty candidates");
        raw += d;
        closest.push([a.x, a.y, a.z]);
    }
    Ok(AttachmentResult {
        raw_score: Some(alpha + raw),
        closest_points: closest,
        attach_type,
        alpha,
    })
}

/// Tries each type in `order` and returns the first attachable result, or an
/// unattachable result of type `None` when nothing works.
pub fn infer_attachment(
    order: &[AttachType],
    parts: &[AttachPart<'_>],
    assembly: &AlignedAssembly,
    mut grasp_points: impl FnMut(usize, f64) -> Vec<Point>,
) -> Result<AttachmentResult, ScoringError> {
    for &t in order {
        let r = attachment_fit(t, parts, assembly, &mut grasp_points)?;
        if r.is_attachable() {
            return Ok(r);
        }
    }
    Ok(AttachmentResult::unattachable(
        AttachType::None,
        &assembly.intersections,
    ))
}

/// `−raw / max(raw)` over the attachable results of one query.
pub fn normalize_attachments(batch: &[AttachmentResult]) -> Result<Vec<AttachmentScore>, ScoringError> {
    if batch.is_empty() {
        return Err(ScoringError::EmptyBatch);
    }
    let max = batch
        .iter()
        .filter_map(|r| r.raw_score)
        .fold(0.0f64, f64::max);
    Ok(batch
        .iter()
        .map(|r| match r.raw_score {
            None => AttachmentScore::Unattachable,
            Some(_) if max == 0.0 => AttachmentScore::Score(0.0),
            Some(v) => AttachmentScore::Score(-v / max),
        })
        .collect())
}
