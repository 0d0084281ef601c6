use serde::{Deserialize, Serialize};

use super::ScoringError;
use crate::nn::{DualNetworkModel, Embedding};
use crate::spectral::SpectralReading;

/// How a construction's material score is formed from its parts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaterialAggregation {
    /// Score the action part (first position) only.
    #[default]
    ActionPart,
    /// Mean of the per-part scores.
    MeanOverParts,
}

/// Similarity of each reading to the action embedding, aggregated over the
/// parts of a state. A substitute is a one-element slice.
pub fn material_fit(
    model: &DualNetworkModel,
    embedding: &Embedding,
    readings: &[Option<&SpectralReading>],
    aggregation: MaterialAggregation,
) -> Result<f64, ScoringError> {
    let used = match aggregation {
        MaterialAggregation::ActionPart => &readings[..readings.len().min(1)],
        MaterialAggregation::MeanOverParts => readings,
    };
    if used.is_empty() {
        return Err(ScoringError::MissingSpectral("<empty state>".into()));
    }
    let mut total = 0.0;
    for (k, r) in used.iter().enumerate() {
        let r = r.ok_or_else(|| ScoringError::MissingSpectral(format!("part {k}")))?;
        total += model.embedding_score(embedding, r.values())?;
    }
    Ok(total / used.len() as f64)
}
