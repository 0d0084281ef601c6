//! The trained models a query needs, their training recipes, and on-disk layout.

mod train;

pub use train::{
    build_reference_library, split_by_object, train_joint_shape, train_material, train_part_networks,
    train_pierce, MaterialTrainingOptions, PierceTrainingOptions, ShapeCorpus, ShapeCorpusSpec, ShapeLabel, ShapeTrainingOptions,
};

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::action::Action;
use crate::geometry::{GeometryError, PointCloud};
use crate::nn::{
    read_binary, read_dual, write_binary, write_dual, BinaryClassifier, DualNetworkModel, Embedding,
    NnError,
};
use crate::scoring::PartNetworks;
use crate::spectral::SpectralError;
use crate::synth::SynthError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("model file {0} has no embedding")]
    MissingEmbedding(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A dual network with the action embedding it scores against.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedDual {
    pub model: DualNetworkModel,
    pub embedding: Embedding,
}

impl TrainedDual {
    pub fn score(&self, x: &[f64]) -> Result<f64, NnError> {
        self.model.embedding_score(&self.embedding, x)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ModelSet {
    pub material: BTreeMap<Action, TrainedDual>,
    pub joint_shape: BTreeMap<Action, TrainedDual>,
    pub parts: PartNetworks,
    pub pierce: Option<BinaryClassifier>,
    /// Prototype tools used as alignment references.
    pub references: BTreeMap<Action, Vec<PointCloud>>,
}

const MATERIAL_DIR: &str = "material";
const JOINT_DIR: &str = "joint-shape";
const PART_DIR: &str = "part-shape";
const REFERENCE_DIR: &str = "references";
const PIERCE_FILE: &str = "pierce.json";
const HANDLE_FILE: &str = "handle.json";

impl ModelSet {
    /// Writes every present model under `dir`:
    /// `material/<action>.json`, `joint-shape/<action>.json`,
    /// `part-shape/{<action>,handle}.json`, `pierce.json` and
    /// `references/<action>/<n>.xyz`.
    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        fs::create_dir_all(dir)?;
        for (sub, map) in [(MATERIAL_DIR, &self.material), (JOINT_DIR, &self.joint_shape)] {
            if map.is_empty() {
                continue;
            }
            fs::create_dir_all(dir.join(sub))?;
            for (action, t) in map {
                write_dual(&dir.join(sub).join(format!("{action}.json")), &t.model, Some(&t.embedding))?;
            }
        }
        if !self.parts.action.is_empty() || self.parts.handle.is_some() {
            fs::create_dir_all(dir.join(PART_DIR))?;
            for (action, net) in &self.parts.action {
                write_binary(&dir.join(PART_DIR).join(format!("{action}.json")), net)?;
            }
            if let Some(h) = &self.parts.handle {
                write_binary(&dir.join(PART_DIR).join(HANDLE_FILE), h)?;
            }
        }
        if let Some(p) = &self.pierce {
            write_binary(&dir.join(PIERCE_FILE), p)?;
        }
        for (action, clouds) in &self.references {
            let sub = dir.join(REFERENCE_DIR).join(action.as_str());
            fs::create_dir_all(&sub)?;
            for (i, c) in clouds.iter().enumerate() {
                fs::write(sub.join(format!("{i}.xyz")), c.to_ascii())?;
            }
        }
        Ok(())
    }

    /// Loads whatever models exist under `dir`; absent files are skipped.
    pub fn load(dir: &Path) -> Result<Self, ModelError> {
        let mut set = ModelSet::default();
        for action in Action::ALL {
            let file = format!("{action}.json");
            for (sub, map) in [
                (MATERIAL_DIR, &mut set.material),
                (JOINT_DIR, &mut set.joint_shape),
            ] {
                let path = dir.join(sub).join(&file);
                if path.is_file() {
                    let (model, embedding) = read_dual(&path)?;
                    let embedding =
                        embedding.ok_or_else(|| ModelError::MissingEmbedding(path.display().to_string()))?;
                    map.insert(action, TrainedDual { model, embedding });
                }
            }
            let path = dir.join(PART_DIR).join(&file);
            if path.is_file() {
                set.parts.action.insert(action, read_binary(&path)?);
            }
            let sub = dir.join(REFERENCE_DIR).join(action.as_str());
            if sub.is_dir() {
                let mut clouds = Vec::new();
                for i in 0.. {
                    let path = sub.join(format!("{i}.xyz"));
                    if !path.is_file() {
                        break;
                    }
                    let text = fs::read_to_string(&path)?;
                    clouds.push(PointCloud::from_ascii(format!("{action}-reference-{i}"), &text)?);
                }
                if !clouds.is_empty() {
                    set.references.insert(action, clouds);
                }
            }
        }
        let handle = dir.join(PART_DIR).join(HANDLE_FILE);
        if handle.is_file() {
            set.parts.handle = Some(read_binary(&handle)?);
        }
        let pierce = dir.join(PIERCE_FILE);
        if pierce.is_file() {
            set.pierce = Some(read_binary(&pierce)?);
        }
        Ok(set)
    }

    /// Merges `other` into `self`, replacing models that exist in both.
    pub fn absorb(&mut self, other: ModelSet) {
        self.material.extend(other.material);
        self.joint_shape.extend(other.joint_shape);
        self.parts.action.extend(other.parts.action);
        if other.parts.handle.is_some() {
            self.parts.handle = other.parts.handle;
        }
        if other.pierce.is_some() {
            self.pierce = other.pierce;
        }
        self.references.extend(other.references);
    }
}
