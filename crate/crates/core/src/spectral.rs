//! Spectral readings, material classes, and which materials suit which action.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::Action;

/// Channels in one spectrometer reading.
pub const SPECTRAL_LEN: usize = 331;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("reading has {0} channels, expected 331")]
    WrongLength(usize),
    #[error("reading has a non-finite value at channel {0}")]
    NonFinite(usize),
    #[error("action {0} has no entry in the material table")]
    UnknownAction(Action),
    #[error("material table entry for {0} is empty")]
    EmptyEntry(Action),
    #[error("unknown material class {0:?}")]
    UnknownMaterial(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReading {
    values: Vec<f64>,
    pub object_id: String,
    pub scan_location_id: u32,
}

impl SpectralReading {
    pub fn new(
        values: Vec<f64>,
        object_id: impl Into<String>,
        scan_location_id: u32,
    ) -> Result<Self, SpectralError> {
        if values.len() != SPECTRAL_LEN {
            return Err(SpectralError::WrongLength(values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite(i));
        }
        Ok(Self {
            values,
            object_id: object_id.into(),
            scan_location_id,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Parses one reading per line, 331 comma-separated reals. Readings are
/// tagged with `object_id` and their zero-based line number among readings.
pub fn parse_spectral_csv(text: &str, object_id: &str) -> Result<Vec<SpectralReading>, SpectralError> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| SpectralError::Parse {
                line: lineno + 1,
                reason: e.to_string(),
            })?;
        let reading = SpectralReading::new(values, object_id, out.len() as u32).map_err(|e| {
            SpectralError::Parse {
                line: lineno + 1,
                reason: e.to_string(),
            }
        })?;
        out.push(reading);
    }
    Ok(out)
}

pub fn to_spectral_csv<'a>(readings: impl IntoIterator<Item = &'a SpectralReading>) -> String {
    let mut out = String::new();
    for r in readings {
        let line: Vec<String> = r.values.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaterialClass {
    Metal,
    Wood,
    Plastic,
    Paper,
    Foam,
}

impl MaterialClass {
    pub const ALL: [MaterialClass; 5] = [
        MaterialClass::Metal,
        MaterialClass::Wood,
        MaterialClass::Plastic,
        MaterialClass::Paper,
        MaterialClass::Foam,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MaterialClass::Metal => "metal",
            MaterialClass::Wood => "wood",
            MaterialClass::Plastic => "plastic",
            MaterialClass::Paper => "paper",
            MaterialClass::Foam => "foam",
        }
    }

    /// Ground-truth pierceability label used to train the classifier.
    pub fn is_pierceable(self) -> bool {
        matches!(self, MaterialClass::Paper | MaterialClass::Foam)
    }
}

impl fmt::Display for MaterialClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MaterialClass {
    type Err = SpectralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MaterialClass::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| SpectralError::UnknownMaterial(s.to_owned()))
    }
}

/// Appropriate materials per action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<Action, BTreeSet<MaterialClass>>")]
#[serde(into = "BTreeMap<Action, BTreeSet<MaterialClass>>")]
pub struct ActionMaterialTable {
    entries: BTreeMap<Action, BTreeSet<MaterialClass>>,
}

impl TryFrom<BTreeMap<Action, BTreeSet<MaterialClass>>> for ActionMaterialTable {
    type Error = SpectralError;

    fn try_from(entries: BTreeMap<Action, BTreeSet<MaterialClass>>) -> Result<Self, Self::Error> {
        if let Some((action, _)) = entries.iter().find(|(_, v)| v.is_empty()) {
            return Err(SpectralError::EmptyEntry(*action));
        }
        Ok(Self { entries })
    }
}

impl From<ActionMaterialTable> for BTreeMap<Action, BTreeSet<MaterialClass>> {
    fn from(table: ActionMaterialTable) -> Self {
        table.entries
    }
}

impl Default for ActionMaterialTable {
    fn default() -> Self {
        use MaterialClass::*;
        let rows: [(Action, &[MaterialClass]); 8] = [
            (Action::Hit, &[Metal, Wood]),
            (Action::Cut, &[Metal]),
            (Action::Scoop, &[Metal, Plastic, Wood]),
            (Action::Flip, &[Metal, Plastic, Wood]),
            (Action::Poke, &[Metal, Wood, Plastic]),
            (Action::Rake, &[Metal, Wood, Plastic]),
            (Action::Screw, &[Metal]),
            (Action::Squeegee, &[Plastic, Foam]),
        ];
        Self {
            entries: rows
                .into_iter()
                .map(|(a, ms)| (a, ms.iter().copied().collect()))
                .collect(),
        }
    }
}

impl ActionMaterialTable {
    pub fn from_json(text: &str) -> Result<Self, SpectralError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn get(&self, action: Action) -> Result<&BTreeSet<MaterialClass>, SpectralError> {
        self.entries
            .get(&action)
            .ok_or(SpectralError::UnknownAction(action))
    }

    pub fn is_appropriate(&self, action: Action, material: MaterialClass) -> Result<bool, SpectralError> {
        Ok(self.get(action)?.contains(&material))
    }

    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        self.entries.keys().copied()
    }

    /// Replaces one row; rejects an empty set.
    pub fn set(&mut self, action: Action, materials: BTreeSet<MaterialClass>) -> Result<(), SpectralError> {
        if materials.is_empty() {
            return Err(SpectralError::EmptyEntry(action));
        }
        self.entries.insert(action, materials);
        Ok(())
    }
}

/// A pair is positive iff both materials suit the action.
pub fn is_pair_positive(
    action: Action,
    a: MaterialClass,
    b: MaterialClass,
    table: &ActionMaterialTable,
) -> Result<bool, SpectralError> {
    let ok = table.get(action)?;
    Ok(ok.contains(&a) && ok.contains(&b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub first: SpectralReading,
    pub second: SpectralReading,
    pub label: bool,
    pub action: Action,
}

/// Index pairs over a positive pool and a negative pool, half positive
/// (`(pos, pos)`) and half negative (one positive, one negative in random
/// order), drawn with replacement and shuffled. With an empty negative pool
/// every pair is positive. `None` when no positive pair can be formed.
pub fn balanced_pairs(
    positives: &[usize],
    negatives: &[usize],
    pair_count: usize,
    seed: u64,
) -> Option<Vec<(usize, usize, bool)>> {
    if positives.is_empty() || positives.len() + negatives.len() < 2 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_pos, n_neg) = if negatives.is_empty() {
        (pair_count, 0)
    } else {
        (pair_count.div_ceil(2), pair_count / 2)
    };
    let pick = |rng: &mut ChaCha8Rng, pool: &[usize]| pool[rng.random_range(0..pool.len())];
    let mut out = Vec::with_capacity(pair_count);
    for _ in 0..n_pos {
        let a = pick(&mut rng, positives);
        let b = loop {
            let b = pick(&mut rng, positives);
            if b != a || positives.len() == 1 {
                break b;
            }
        };
        out.push((a, b, true));
    }
    for _ in 0..n_neg {
        let p = pick(&mut rng, positives);
        let n = pick(&mut rng, negatives);
        if rng.random_bool(0.5) {
            out.push((p, n, false));
        } else {
            out.push((n, p, false));
        }
    }
    out.shuffle(&mut rng);
    Some(out)
}

pub fn make_training_pairs(
    dataset: &[(SpectralReading, MaterialClass)],
    action: Action,
    table: &ActionMaterialTable,
    pair_count: usize,
    seed: u64,
) -> Result<Vec<LabeledPair>, SpectralError> {
    let ok = table.get(action)?;
    if dataset.len() < 2 {
        return Err(SpectralError::InsufficientData(format!(
            "{} readings, need at least 2",
            dataset.len()
        )));
    }
    let (positives, negatives): (Vec<usize>, Vec<usize>) =
        (0..dataset.len()).partition(|&i| ok.contains(&dataset[i].1));
    let pairs = balanced_pairs(&positives, &negatives, pair_count, seed).ok_or_else(|| {
        SpectralError::InsufficientData(format!("no reading has a material appropriate for {action}"))
    })?;
    pairs
        .into_iter()
        .map(|(i, j, _)| {
            let label = is_pair_positive(action, dataset[i].1, dataset[j].1, table)?;
            Ok(LabeledPair {
                first: dataset[i].0.clone(),
                second: dataset[j].0.clone(),
                label,
                action,
            })
        })
        .collect()
}
