use std::collections::BTreeMap;

use super::ScoringError;
use crate::action::Action;
use crate::geometry::{
    compute_esf, merge_clouds, pca_align, AlignedAssembly, EsfDescriptor, PartRole, PointCloud,
};
use crate::geometry::ESF_BINS;
use crate::nn::{BinaryClassifier, DualNetworkModel, Embedding};

/// Network input for a descriptor: histogram values rescaled so a flat
/// sub-histogram reads 1.0 per bin.
pub fn shape_input(esf: &EsfDescriptor) -> Vec<f64> {
    esf.values().iter().map(|v| v * ESF_BINS as f64).collect()
}

/// Roles for a tuple: the first position is the action part, the rest are
/// grasp parts.
pub fn tuple_roles(m: usize) -> Vec<PartRole> {
    (0..m)
        .map(|i| if i == 0 { PartRole::Action } else { PartRole::Handle })
        .collect()
}

/// Per-part suitability networks: one per action, plus the handle network.
#[derive(Debug, Clone, Default)]
pub struct PartNetworks {
    pub action: BTreeMap<Action, BinaryClassifier>,
    pub handle: Option<BinaryClassifier>,
}

impl PartNetworks {
    pub fn confidence(&self, action: Action, role: PartRole, esf: &EsfDescriptor) -> Result<f64, ScoringError> {
        let net = match role {
            PartRole::Handle => self
                .handle
                .as_ref()
                .ok_or(ScoringError::MissingNetwork("handle".into()))?,
            _ => self
                .action
                .get(&action)
                .ok_or_else(|| ScoringError::MissingNetwork(action.to_string()))?,
        };
        Ok(net.predict(&shape_input(esf))?)
    }
}

/// Product of action-network confidences over the action part and
/// handle-network confidences over the rest.
pub fn shape_fit_independent(
    descriptors: &[&EsfDescriptor],
    action: Action,
    nets: &PartNetworks,
) -> Result<f64, ScoringError> {
    let roles = tuple_roles(descriptors.len());
    let mut product = 1.0;
    for (d, role) in descriptors.iter().zip(roles) {
        product *= nets.confidence(action, role, d)?;
    }
    Ok(product)
}

/// `σ(w · |E − f(x)|² + β)` on one descriptor.
pub fn shape_fit_joint(
    model: &DualNetworkModel,
    embedding: &Embedding,
    descriptor: &EsfDescriptor,
) -> Result<f64, ScoringError> {
    Ok(model.embedding_score(embedding, &shape_input(descriptor))?)
}

/// Aligns tuple parts onto the reference and returns the assembly together
/// with the descriptor of the merged cloud.
pub fn aligned_descriptor(
    parts: &[PointCloud],
    reference: &PointCloud,
    esf_samples: usize,
    seed: u64,
) -> Result<(AlignedAssembly, EsfDescriptor), ScoringError> {
    let assembly = pca_align(parts, reference, &tuple_roles(parts.len()))?;
    let merged = merge_clouds(&assembly);
    let esf = compute_esf(&merged, esf_samples, seed)?;
    Ok((assembly, esf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, DenseLayer, DenseNetwork};

    fn constant_classifier(p: f64) -> BinaryClassifier {
        let mut layer = DenseLayer::zeros(crate::geometry::ESF_LEN, 1, Activation::Sigmoid);
        layer.bias[0] = (p / (1.0 - p)).ln();
        BinaryClassifier::from_network(DenseNetwork::new(vec![layer]).unwrap()).unwrap()
    }

    fn flat_descriptor() -> EsfDescriptor {
        EsfDescriptor::from_values(vec![1.0 / 64.0; crate::geometry::ESF_LEN]).unwrap()
    }

    #[test]
    fn product_of_part_confidences() {
        let mut nets = PartNetworks::default();
        nets.action.insert(Action::Hit, constant_classifier(0.9));
        nets.handle = Some(constant_classifier(0.8));
        let d = flat_descriptor();
        let s = shape_fit_independent(&[&d, &d], Action::Hit, &nets).unwrap();
        assert!((s - 0.72).abs() < 1e-12);
        // dividing out one factor and multiplying it back is lossless
        let head = nets.confidence(Action::Hit, PartRole::Action, &d).unwrap();
        assert!(((s / head) * head - s).abs() < 1e-12);
        assert!(matches!(
            shape_fit_independent(&[&d, &d], Action::Cut, &nets),
            Err(ScoringError::MissingNetwork(_))
        ));
    }

    #[test]
    fn roles_put_action_first() {
        assert_eq!(tuple_roles(2), vec![PartRole::Action, PartRole::Handle]);
        assert_eq!(tuple_roles(1), vec![PartRole::Action]);
    }
}
