use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ModelError, TrainedDual};
use crate::action::Action;
use crate::geometry::{compute_esf, EsfDescriptor, PointCloud, DEFAULT_ESF_SAMPLES};
use crate::nn::{
    train_binary, train_dual, BinaryArchitecture, BinaryClassifier, DualArchitecture, TrainConfig,
    TrainLog, TrainingPair,
};
use crate::scoring::{shape_input, PartNetworks};
use crate::spectral::{balanced_pairs, ActionMaterialTable, MaterialClass, SpectralReading};
use crate::synth::{
    derive_seed, gen_part_cloud, gen_tool_cloud, PartKind, PartSpec, ToolPrototypeSpec,
};

/// Splits a labelled dataset by object: for every class the first
/// `train_objects` distinct object ids (in order of appearance) go to the
/// training side. Returns `(train, held_out)` indices.
pub fn split_by_object(dataset: &[(SpectralReading, MaterialClass)], train_objects: usize) -> (Vec<usize>, Vec<usize>) {
    let mut seen: BTreeMap<MaterialClass, Vec<&str>> = BTreeMap::new();
    let mut train = Vec::new();
    let mut held = Vec::new();
    for (i, (r, c)) in dataset.iter().enumerate() {
        let ids = seen.entry(*c).or_default();
        let pos = match ids.iter().position(|id| *id == r.object_id) {
            Some(p) => p,
            None => {
                ids.push(&r.object_id);
                ids.len() - 1
            }
        };
        if pos < train_objects {
            train.push(i);
        } else {
            held.push(i);
        }
    }
    (train, held)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialTrainingOptions {
    pub pair_count: usize,
    /// Objects per class used for training; the rest are held out.
    pub train_objects: usize,
    pub config: TrainConfig,
}

impl Default for MaterialTrainingOptions {
    fn default() -> Self {
        Self {
            pair_count: 4_000,
            train_objects: 9,
            config: TrainConfig {
                epochs: 8,
                dropout: 0.1,
                ..TrainConfig::default()
            },
        }
    }
}

/// Trains the material dual network for `action` on the training objects
/// and embeds the appropriate-material training readings.
pub fn train_material(
    dataset: &[(SpectralReading, MaterialClass)],
    table: &ActionMaterialTable,
    action: Action,
    options: &MaterialTrainingOptions,
) -> Result<(TrainedDual, TrainLog), ModelError> {
    let ok = table.get(action)?;
    let (train, _) = split_by_object(dataset, options.train_objects);
    let (pos, neg): (Vec<usize>, Vec<usize>) = train.iter().partition(|&&i| ok.contains(&dataset[i].1));
    let seed = derive_seed(options.config.seed, 0x3a7e, action as u64);
    let pairs = balanced_pairs(&pos, &neg, options.pair_count, seed)
        .ok_or_else(|| ModelError::InsufficientData(format!("no appropriate material for {action}")))?;
    let pairs: Vec<TrainingPair<'_>> = pairs
        .iter()
        .map(|&(a, b, _)| TrainingPair {
            first: dataset[a].0.values(),
            second: dataset[b].0.values(),
            label: ok.contains(&dataset[a].1) && ok.contains(&dataset[b].1),
        })
        .collect();
    let (model, log) = train_dual(&pairs, &DualArchitecture::material(), &options.config)?;
    let embedding = model.compute_embedding(action, pos.iter().map(|&i| dataset[i].0.values()))?;
    Ok((TrainedDual { model, embedding }, log))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PierceTrainingOptions {
    pub train_objects: usize,
    pub config: TrainConfig,
}

impl Default for PierceTrainingOptions {
    fn default() -> Self {
        Self {
            train_objects: 9,
            config: TrainConfig {
                epochs: 10,
                dropout: 0.0,
                ..TrainConfig::default()
            },
        }
    }
}

/// Pierceability classifier over the training objects; paper and foam are
/// the positive classes.
pub fn train_pierce(
    dataset: &[(SpectralReading, MaterialClass)],
    options: &PierceTrainingOptions,
) -> Result<(BinaryClassifier, TrainLog), ModelError> {
    let (train, _) = split_by_object(dataset, options.train_objects);
    let xs: Vec<&[f64]> = train.iter().map(|&i| dataset[i].0.values()).collect();
    let ys: Vec<bool> = train.iter().map(|&i| dataset[i].1.is_pierceable()).collect();
    Ok(train_binary(&xs, &ys, &BinaryArchitecture::pierce(), &options.config)?)
}

/// What a corpus descriptor was generated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ShapeLabel {
    Tool(Action),
    Part(PartKind),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeCorpusSpec {
    pub tools_per_action: usize,
    pub heads_per_action: usize,
    /// Per handle-like kind (rod, screwdriver, tongs).
    pub handles_per_kind: usize,
    pub distractors_per_kind: usize,
    pub esf_samples: usize,
    pub seed: u64,
}

impl Default for ShapeCorpusSpec {
    fn default() -> Self {
        Self {
            tools_per_action: 24,
            heads_per_action: 24,
            handles_per_kind: 12,
            distractors_per_kind: 12,
            esf_samples: DEFAULT_ESF_SAMPLES,
            seed: 0,
        }
    }
}

/// Labelled ESF descriptors of generated tools and parts.
#[derive(Debug, Clone)]
pub struct ShapeCorpus {
    pub items: Vec<(ShapeLabel, EsfDescriptor)>,
}

impl ShapeCorpus {
    pub fn generate(spec: &ShapeCorpusSpec) -> Result<Self, ModelError> {
        let mut jobs: Vec<(ShapeLabel, u64)> = Vec::new();
        for a in Action::ALL {
            for i in 0..spec.tools_per_action {
                jobs.push((ShapeLabel::Tool(a), i as u64));
            }
            for i in 0..spec.heads_per_action {
                jobs.push((ShapeLabel::Part(PartKind::Head(a)), i as u64));
            }
        }
        for k in [PartKind::Handle, PartKind::Screwdriver, PartKind::Tongs] {
            for i in 0..spec.handles_per_kind {
                jobs.push((ShapeLabel::Part(k), i as u64));
            }
        }
        for k in PartKind::DISTRACTORS {
            for i in 0..spec.distractors_per_kind {
                jobs.push((ShapeLabel::Part(k), i as u64));
            }
        }
        let items = jobs
            .par_iter()
            .map(|&(label, i)| {
                let (cloud, tag) = match label {
                    ShapeLabel::Tool(a) => {
                        let seed = derive_seed(spec.seed, 0x7001 + a as u64, i);
                        (gen_tool_cloud(a, &ToolPrototypeSpec::default_for(a), seed)?, seed)
                    }
                    ShapeLabel::Part(k) => {
                        let seed = derive_seed(spec.seed, 0x9a27 + part_tag(k), i);
                        (gen_part_cloud(k, &PartSpec::default(), seed)?, seed)
                    }
                };
                Ok((label, compute_esf(&cloud, spec.esf_samples, tag)?))
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        Ok(Self { items })
    }

    fn inputs(&self) -> Vec<Vec<f64>> {
        self.items.iter().map(|(_, d)| shape_input(d)).collect()
    }
}

fn part_tag(k: PartKind) -> u64 {
    match k {
        PartKind::Head(a) => a as u64,
        PartKind::Handle => 100,
        PartKind::Screwdriver => 101,
        PartKind::Tongs => 102,
        PartKind::Blob => 103,
        PartKind::Torus => 104,
        PartKind::Can => 105,
        PartKind::Ball => 106,
        PartKind::Brick => 107,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeTrainingOptions {
    pub pair_count: usize,
    pub dual: TrainConfig,
    pub part: TrainConfig,
}

impl Default for ShapeTrainingOptions {
    fn default() -> Self {
        Self {
            pair_count: 3_000,
            dual: TrainConfig {
                epochs: 15,
                ..TrainConfig::default()
            },
            part: TrainConfig {
                epochs: 40,
                dropout: 0.2,
                ..TrainConfig::default()
            },
        }
    }
}

/// Trains one binary classifier, oversampling the rarer label to balance.
fn balanced_binary(
    inputs: &[Vec<f64>],
    labels: &[bool],
    config: &TrainConfig,
) -> Result<(BinaryClassifier, TrainLog), ModelError> {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(ModelError::InsufficientData("need both positive and negative shapes".into()));
    }
    let n = pos.len().max(neg.len());
    let mut xs: Vec<&[f64]> = Vec::with_capacity(2 * n);
    let mut ys = Vec::with_capacity(2 * n);
    for i in 0..n {
        xs.push(&inputs[pos[i % pos.len()]]);
        ys.push(true);
        xs.push(&inputs[neg[i % neg.len()]]);
        ys.push(false);
    }
    Ok(train_binary(&xs, &ys, &BinaryArchitecture::part_shape(), config)?)
}

/// One action-part network per action (its heads against every other
/// isolated part) and a handle network (rods, screwdrivers and tongs
/// against heads and distractors).
pub fn train_part_networks(
    corpus: &ShapeCorpus,
    actions: &[Action],
    config: &TrainConfig,
) -> Result<PartNetworks, ModelError> {
    let parts: Vec<usize> = (0..corpus.items.len())
        .filter(|&i| matches!(corpus.items[i].0, ShapeLabel::Part(_)))
        .collect();
    let all = corpus.inputs();
    let inputs: Vec<Vec<f64>> = parts.iter().map(|&i| all[i].clone()).collect();
    let kinds: Vec<PartKind> = parts
        .iter()
        .map(|&i| match corpus.items[i].0 {
            ShapeLabel::Part(k) => k,
            ShapeLabel::Tool(_) => unreachable!(),
        })
        .collect();
    let mut nets = PartNetworks::default();
    for &a in actions {
        let labels: Vec<bool> = kinds.iter().map(|k| *k == PartKind::Head(a)).collect();
        let cfg = TrainConfig {
            seed: derive_seed(config.seed, 0x9e7, a as u64),
            ..config.clone()
        };
        nets.action.insert(a, balanced_binary(&inputs, &labels, &cfg)?.0);
    }
    let labels: Vec<bool> = kinds.iter().map(|k| k.is_handle_like()).collect();
    let cfg = TrainConfig {
        seed: derive_seed(config.seed, 0x9e7, 999),
        ..config.clone()
    };
    nets.handle = Some(balanced_binary(&inputs, &labels, &cfg)?.0);
    Ok(nets)
}

/// Dual network over whole-tool descriptors: tools for `action` against
/// tools for other actions and isolated parts.
pub fn train_joint_shape(
    corpus: &ShapeCorpus,
    action: Action,
    options: &ShapeTrainingOptions,
) -> Result<(TrainedDual, TrainLog), ModelError> {
    let inputs = corpus.inputs();
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..corpus.items.len())
        .filter(|&i| !matches!(corpus.items[i].0, ShapeLabel::Part(PartKind::Head(_))))
        .partition(|&i| corpus.items[i].0 == ShapeLabel::Tool(action));
    let seed = derive_seed(options.dual.seed, 0x5a9e, action as u64);
    let pairs = balanced_pairs(&pos, &neg, options.pair_count, seed)
        .ok_or_else(|| ModelError::InsufficientData(format!("no {action} tools in corpus")))?;
    let positive: BTreeSet<usize> = pos.iter().copied().collect();
    let pairs: Vec<TrainingPair<'_>> = pairs
        .iter()
        .map(|&(a, b, _)| TrainingPair {
            first: &inputs[a],
            second: &inputs[b],
            label: positive.contains(&a) && positive.contains(&b),
        })
        .collect();
    let cfg = TrainConfig {
        seed: options.dual.seed,
        ..options.dual.clone()
    };
    let (model, log) = train_dual(&pairs, &DualArchitecture::joint_shape(), &cfg)?;
    let embedding = model.compute_embedding(action, pos.iter().map(|&i| inputs[i].as_slice()))?;
    Ok((TrainedDual { model, embedding }, log))
}

/// A few prototype tools per action, from seeds disjoint from the corpus.
pub fn build_reference_library(
    actions: &[Action],
    per_action: usize,
    seed: u64,
) -> Result<BTreeMap<Action, Vec<PointCloud>>, ModelError> {
    let mut out = BTreeMap::new();
    for &a in actions {
        let mut clouds = Vec::with_capacity(per_action);
        for i in 0..per_action {
            let s = derive_seed(seed, 0x4ef0 + a as u64, i as u64);
            let cloud = gen_tool_cloud(a, &ToolPrototypeSpec::default_for(a), s)?;
            clouds.push(cloud.with_id(format!("{a}-reference-{i}")));
        }
        out.insert(a, clouds);
    }
    Ok(out)
}
