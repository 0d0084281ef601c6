//! On-disk dataset layout: `<root>/{clouds,spectra,manifests,tables}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::experiments::{build_experiment_set_with, ExperimentContext, ExperimentSet};
use super::spectra::{gen_spectral_dataset, OBJECTS_PER_CLASS, SAMPLES_PER_OBJECT};
use crate::action::Action;
use crate::pipeline::ExperimentKind;
use crate::spectral::{parse_spectral_csv, to_spectral_csv, ActionMaterialTable, MaterialClass, SpectralReading};

pub const MATERIAL_TABLE_FILE: &str = "tables/materials.json";
pub const TRAINING_SPECTRA_DIR: &str = "spectra/train";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub seed: u64,
    pub kinds: Vec<ExperimentKind>,
    pub sets_per_action: usize,
    pub n_objects: usize,
    pub objects_per_class: usize,
    pub samples_per_object: usize,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            kinds: ExperimentKind::ALL.to_vec(),
            sets_per_action: 5,
            n_objects: 10,
            objects_per_class: OBJECTS_PER_CLASS,
            samples_per_object: SAMPLES_PER_OBJECT,
        }
    }
}

/// Actions a benchmark kind runs over.
pub fn benchmark_actions(kind: ExperimentKind) -> &'static [Action] {
    match kind {
        ExperimentKind::Construction | ExperimentKind::Arbitration => &Action::CONSTRUCTION,
        ExperimentKind::Substitution => &Action::SUBSTITUTION,
    }
}

/// Seed of the `index`-th set for `action` in a dataset seeded with `seed`.
pub fn case_seed(seed: u64, index: usize) -> u64 {
    seed * 1000 + index as u64
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub manifests: usize,
    pub clouds: usize,
    pub spectral_files: usize,
    pub training_readings: usize,
}

/// Writes one generated set; returns the manifest path.
pub fn write_experiment_set(root: &Path, set: &ExperimentSet) -> std::io::Result<PathBuf> {
    let clouds = root.join("clouds").join(&set.name);
    let spectra = root.join("spectra").join(&set.name);
    let manifests = root.join("manifests");
    for d in [&clouds, &spectra, &manifests] {
        fs::create_dir_all(d)?;
    }
    for (c, r) in set.clouds.iter().zip(&set.readings) {
        fs::write(clouds.join(format!("{}.xyz", c.id())), c.to_ascii())?;
        fs::write(spectra.join(format!("{}.csv", c.id())), to_spectral_csv([r]))?;
    }
    let path = manifests.join(format!("{}.json", set.name));
    fs::write(&path, set.manifest.to_json())?;
    Ok(path)
}

/// Generates the full dataset under `root`, creating it if needed.
pub fn generate_dataset(
    root: &Path,
    spec: &DatasetSpec,
    ctx: &ExperimentContext,
) -> Result<DatasetSummary, super::SynthError> {
    let io = |e: std::io::Error| super::SynthError::InvalidSpec(format!("{}: {e}", root.display()));
    let mut summary = DatasetSummary::default();
    fs::create_dir_all(root.join("tables")).map_err(io)?;
    fs::write(root.join(MATERIAL_TABLE_FILE), ctx.table.to_json()).map_err(io)?;

    let train = root.join(TRAINING_SPECTRA_DIR);
    fs::create_dir_all(&train).map_err(io)?;
    let data = gen_spectral_dataset(&ctx.class_models, spec.objects_per_class, spec.samples_per_object, spec.seed)?;
    for chunk in data.chunk_by(|a, b| a.0.object_id == b.0.object_id) {
        let id = &chunk[0].0.object_id;
        fs::write(train.join(format!("{id}.csv")), to_spectral_csv(chunk.iter().map(|(r, _)| r))).map_err(io)?;
        summary.spectral_files += 1;
    }
    summary.training_readings = data.len();

    for &kind in &spec.kinds {
        for &action in benchmark_actions(kind) {
            for i in 0..spec.sets_per_action {
                let set = build_experiment_set_with(ctx, kind, action, spec.n_objects, case_seed(spec.seed, i))?;
                write_experiment_set(root, &set).map_err(io)?;
                summary.manifests += 1;
                summary.clouds += set.clouds.len();
                summary.spectral_files += set.readings.len();
            }
        }
    }
    Ok(summary)
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("{0}: {1}")]
    Invalid(PathBuf, String),
}

/// Reads `spectra/train/<class>-<n>.csv` files in name order, labelling
/// each by the class prefix of its file name.
pub fn load_training_spectra(root: &Path) -> Result<Vec<(SpectralReading, MaterialClass)>, DatasetError> {
    let dir = root.join(TRAINING_SPECTRA_DIR);
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| DatasetError::Io(dir.clone(), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for path in files {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let class: MaterialClass = stem
            .split('-')
            .next()
            .unwrap_or_default()
            .parse()
            .map_err(|e: crate::spectral::SpectralError| DatasetError::Invalid(path.clone(), e.to_string()))?;
        let text = fs::read_to_string(&path).map_err(|e| DatasetError::Io(path.clone(), e))?;
        let readings =
            parse_spectral_csv(&text, &stem).map_err(|e| DatasetError::Invalid(path.clone(), e.to_string()))?;
        out.extend(readings.into_iter().map(|r| (r, class)));
    }
    Ok(out)
}

pub fn load_material_table(root: &Path) -> Result<ActionMaterialTable, DatasetError> {
    let path = root.join(MATERIAL_TABLE_FILE);
    let text = fs::read_to_string(&path).map_err(|e| DatasetError::Io(path.clone(), e))?;
    ActionMaterialTable::from_json(&text).map_err(|e| DatasetError::Invalid(path, e.to_string()))
}

/// Manifest paths under `root/manifests` for `kind`, sorted by name.
pub fn list_manifests(root: &Path, kind: Option<ExperimentKind>) -> Result<Vec<PathBuf>, DatasetError> {
    let dir = root.join("manifests");
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| DatasetError::Io(dir.clone(), e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .filter(|p| {
            kind.is_none_or(|k| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with(&format!("{k}-")))
            })
        })
        .collect();
    files.sort();
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::load_manifest;

    #[test]
    fn small_dataset_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("data");
        let spec = DatasetSpec {
            kinds: vec![ExperimentKind::Construction],
            sets_per_action: 1,
            n_objects: 4,
            objects_per_class: 2,
            samples_per_object: 3,
            ..Default::default()
        };
        let summary = generate_dataset(&root, &spec, &ExperimentContext::default()).unwrap();
        assert_eq!(summary.manifests, 6);
        assert_eq!(summary.training_readings, 30);
        let train = load_training_spectra(&root).unwrap();
        assert_eq!(train.len(), 30);
        assert_eq!(train.iter().filter(|(_, c)| *c == MaterialClass::Foam).count(), 6);
        assert_eq!(load_material_table(&root).unwrap(), ActionMaterialTable::default());
        let manifests = list_manifests(&root, Some(ExperimentKind::Construction)).unwrap();
        assert_eq!(manifests.len(), 6);
        let (m, objects) = load_manifest(&manifests[0]).unwrap();
        assert_eq!(objects.len(), 4);
        assert!(objects.iter().all(|o| o.spectral.is_some()));
        assert!(m.construction_key().is_some());
    }
}
