use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::action::Action;
use crate::geometry::{PartRole, PointCloud};
use crate::scoring::ObjectCapabilities;
use crate::spectral::{parse_spectral_csv, MaterialClass, SpectralReading};

/// Which experiment a manifest encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Construction,
    Substitution,
    Arbitration,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 3] = [
        ExperimentKind::Construction,
        ExperimentKind::Substitution,
        ExperimentKind::Arbitration,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Construction => "construction",
            ExperimentKind::Substitution => "substitution",
            ExperimentKind::Arbitration => "arbitration",
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| PipelineError::Manifest(format!("unknown experiment kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestObject {
    pub id: String,
    /// Point-cloud file, relative to the manifest's directory.
    pub cloud: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral: Option<String>,
    #[serde(default)]
    pub pierce_tool: bool,
    #[serde(default)]
    pub grasp_tool: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gripper_width: Option<f64>,
    #[serde(default)]
    pub magnets: Vec<[f64; 3]>,
    /// Generator bookkeeping; never read by the scorers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<MaterialClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<PartRole>,
}

impl ManifestObject {
    pub fn capabilities(&self) -> ObjectCapabilities {
        ObjectCapabilities {
            pierce_tool: self.pierce_tool,
            grasp_tool: self.grasp_tool,
            gripper_width: self.gripper_width,
            magnets: self.magnets.clone(),
        }
    }
}

/// The option an arbitration case should pick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preferred {
    Substitute,
    Construction,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substitute_id: Option<String>,
    /// `[head_id, handle_id]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construction: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preferred: Option<Preferred>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSetManifest {
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    pub objects: Vec<ManifestObject>,
    #[serde(default)]
    pub ground_truth: GroundTruth,
    /// Success flag per state key: an id, or ids joined with `+`.
    #[serde(default)]
    pub oracle: BTreeMap<String, bool>,
}

impl ObjectSetManifest {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let m: Self = serde_json::from_str(text).map_err(|e| PipelineError::Manifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Unique ids, valid capabilities, ground truth naming known objects.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut ids = BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(o.id.as_str()) {
                return Err(PipelineError::Manifest(format!("duplicate object id {:?}", o.id)));
            }
            if o.id.contains('+') {
                return Err(PipelineError::Manifest(format!("object id {:?} contains '+'", o.id)));
            }
            o.capabilities()
                .validate()
                .map_err(|e| PipelineError::Manifest(format!("{}: {e}", o.id)))?;
        }
        let known = |id: &String| {
            if ids.contains(id.as_str()) {
                Ok(())
            } else {
                Err(PipelineError::Manifest(format!("ground truth names unknown object {id:?}")))
            }
        };
        if let Some(s) = &self.ground_truth.substitute_id {
            known(s)?;
        }
        if let Some(t) = &self.ground_truth.construction {
            if t.len() < 2 {
                return Err(PipelineError::Manifest("construction ground truth needs 2+ ids".into()));
            }
            t.iter().try_for_each(known)?;
        }
        Ok(())
    }

    /// Oracle key of the planted construction, if any.
    pub fn construction_key(&self) -> Option<String> {
        self.ground_truth.construction.as_ref().map(|t| t.join("+"))
    }
}

/// One object of a query set, with everything the scorers need.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateObject {
    pub id: String,
    pub cloud: PointCloud,
    pub capabilities: ObjectCapabilities,
    pub spectral: Option<SpectralReading>,
    pub role_hint: Option<PartRole>,
}

/// Reads a manifest and the files it references.
pub fn load_manifest(path: &Path) -> Result<(ObjectSetManifest, Vec<CandidateObject>), PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::Io(path.to_path_buf(), e))?;
    let manifest = ObjectSetManifest::from_json(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let objects = load_objects(&manifest, &base)?;
    Ok((manifest, objects))
}

/// Resolves object files relative to `base`.
pub fn load_objects(manifest: &ObjectSetManifest, base: &Path) -> Result<Vec<CandidateObject>, PipelineError> {
    manifest
        .objects
        .iter()
        .map(|o| {
            let cloud_path = base.join(&o.cloud);
            let cloud = PointCloud::from_ascii(o.id.clone(), &read(&cloud_path)?)
                .map_err(|e| PipelineError::Data(format!("{}: {e}", cloud_path.display())))?;
            let spectral = match &o.spectral {
                Some(p) => {
                    let path = base.join(p);
                    let readings = parse_spectral_csv(&read(&path)?, &o.id)
                        .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
                    Some(readings.into_iter().next().ok_or_else(|| {
                        PipelineError::Data(format!("{}: no readings", path.display()))
                    })?)
                }
                None => None,
            };
            Ok(CandidateObject {
                id: o.id.clone(),
                cloud,
                capabilities: o.capabilities(),
                spectral,
                role_hint: o.role,
            })
        })
        .collect()
}

fn read(path: &PathBuf) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| PipelineError::Io(path.clone(), e))
}
