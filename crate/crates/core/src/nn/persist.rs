//! JSON model documents. Floats are written in shortest round-trip form, so
//! save followed by load reproduces every parameter bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::binary::BinaryClassifier;
use super::dense::{DenseLayer, DenseNetwork};
use super::dual::{DualNetworkModel, Embedding, MetricExponent};
use super::{NnError, TrainingMeta};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dual,
    Binary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Head {
    w: Vec<f64>,
    beta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    kind: ModelKind,
    input_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metric_exponent: Option<MetricExponent>,
    layers: Vec<DenseLayer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    head: Option<Head>,
    #[serde(default)]
    training: Option<TrainingMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding: Option<Embedding>,
}

impl ModelDocument {
    fn parse(text: &str, kind: ModelKind) -> Result<(Self, DenseNetwork), NnError> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format_version != FORMAT_VERSION {
            return Err(NnError::Malformed(format!(
                "unsupported format version {}",
                doc.format_version
            )));
        }
        if doc.kind != kind {
            return Err(NnError::Malformed(format!(
                "expected a {kind:?} model, found {:?}",
                doc.kind
            )));
        }
        let net = DenseNetwork::new(doc.layers.clone())?;
        if net.input_dim() != doc.input_dim {
            return Err(NnError::Malformed(format!(
                "input_dim {} disagrees with first layer ({})",
                doc.input_dim,
                net.input_dim()
            )));
        }
        Ok((doc, net))
    }
}

pub fn save_dual(model: &DualNetworkModel, embedding: Option<&Embedding>) -> String {
    let doc = ModelDocument {
        format_version: FORMAT_VERSION,
        kind: ModelKind::Dual,
        input_dim: model.input_dim(),
        metric_exponent: Some(model.metric_exponent),
        layers: model.trunk.layers().to_vec(),
        head: Some(Head {
            w: model.head_weights.clone(),
            beta: model.head_bias,
        }),
        training: model.training.clone(),
        embedding: embedding.cloned(),
    };
    serde_json::to_string(&doc).expect("model serializes")
}

pub fn load_dual(text: &str) -> Result<(DualNetworkModel, Option<Embedding>), NnError> {
    let (doc, trunk) = ModelDocument::parse(text, ModelKind::Dual)?;
    let head = doc
        .head
        .ok_or_else(|| NnError::Malformed("dual model without head".into()))?;
    let exponent = doc
        .metric_exponent
        .ok_or_else(|| NnError::Malformed("dual model without metric_exponent".into()))?;
    let mut model = DualNetworkModel::from_parts(trunk, head.w, head.beta, exponent)?;
    model.training = doc.training;
    if let Some(e) = &doc.embedding {
        if e.values.len() != model.embedding_dim() || e.count == 0 {
            return Err(NnError::Malformed("embedding does not match trunk".into()));
        }
    }
    Ok((model, doc.embedding))
}

pub fn save_binary(model: &BinaryClassifier) -> String {
    let doc = ModelDocument {
        format_version: FORMAT_VERSION,
        kind: ModelKind::Binary,
        input_dim: model.input_dim(),
        metric_exponent: None,
        layers: model.network.layers().to_vec(),
        head: None,
        training: model.training.clone(),
        embedding: None,
    };
    serde_json::to_string(&doc).expect("model serializes")
}

pub fn load_binary(text: &str) -> Result<BinaryClassifier, NnError> {
    let (doc, net) = ModelDocument::parse(text, ModelKind::Binary)?;
    let mut clf = BinaryClassifier::from_network(net)?;
    clf.training = doc.training;
    Ok(clf)
}

pub fn write_dual(
    path: &Path,
    model: &DualNetworkModel,
    embedding: Option<&Embedding>,
) -> Result<(), NnError> {
    fs::write(path, save_dual(model, embedding))?;
    Ok(())
}

pub fn read_dual(path: &Path) -> Result<(DualNetworkModel, Option<Embedding>), NnError> {
    load_dual(&fs::read_to_string(path)?)
}

pub fn write_binary(path: &Path, model: &BinaryClassifier) -> Result<(), NnError> {
    fs::write(path, save_binary(model))?;
    Ok(())
}

pub fn read_binary(path: &Path) -> Result<BinaryClassifier, NnError> {
    load_binary(&fs::read_to_string(path)?)
}
