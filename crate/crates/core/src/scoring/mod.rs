//! Material, shape and attachment fitness of substitutes and constructions.

mod attach;
mod grasp;
mod material;
mod shape;

pub use attach::{
    attachment_fit, infer_attachment, normalize_attachments, AttachPart, AttachType,
    AttachmentResult, AttachmentScore, ObjectCapabilities, GRASP_ALPHA, MAGNETIC_ALPHA,
    PIERCE_ALPHA,
};
pub use grasp::{
    estimate_normals, grasp_sample, leader_clusters, ANTIPODAL_HALF_ANGLE_DEG, NORMAL_NEIGHBOURS,
};
pub use material::{material_fit, MaterialAggregation};
pub use shape::{
    aligned_descriptor, shape_fit_independent, shape_input, shape_fit_joint, tuple_roles, PartNetworks,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::nn::{BinaryClassifier, NnError};
use crate::spectral::SpectralReading;
use crate::value::Value;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("no spectral reading for {0}")]
    MissingSpectral(String),
    #[error("no part network for {0}")]
    MissingNetwork(String),
    #[error("no reference tool for {0}")]
    MissingReference(String),
    #[error("no trained model: {0}")]
    MissingModel(String),
    #[error("attachment batch is empty")]
    EmptyBatch,
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Pierceable iff the classifier's confidence is at least 0.5.
pub fn pierceability(reading: &SpectralReading, classifier: &BinaryClassifier) -> Result<bool, ScoringError> {
    Ok(classifier.predict(reading.values())? >= 0.5)
}

/// Component scores of one state and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub shape: f64,
    pub material: f64,
    /// Normalized attachment score; absent for substitutes.
    pub attachment: Option<AttachmentScore>,
    #[serde(rename = "final")]
    pub final_value: Value,
}

impl ScoreBreakdown {
    pub fn substitute(shape: f64, material: f64) -> Self {
        Self {
            shape,
            material,
            attachment: None,
            final_value: Value::finite(shape + material),
        }
    }

    pub fn construction(shape: f64, material: f64, attachment: AttachmentScore) -> Self {
        let final_value = match attachment {
            AttachmentScore::Score(a) => Value::finite(shape + material + a),
            AttachmentScore::Unattachable => Value::NegInfinity,
        };
        Self {
            shape,
            material,
            attachment: Some(attachment),
            final_value,
        }
    }
}
