//! Object sets with planted ground truth for the three benchmarks.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spectra::{default_class_models, SpectralClassModel};
use super::tools::{gen_part_cloud, gen_tool_cloud, magnet_sites, PartKind, PartSpec, ToolPrototypeSpec, TONGS_WIDTH};
use super::{derive_seed, SynthError};
use crate::action::Action;
use crate::geometry::{PartRole, Point, PointCloud};
use crate::pipeline::{CandidateObject, ExperimentKind, GroundTruth, ManifestObject, ObjectSetManifest, Preferred};
use crate::scoring::ObjectCapabilities;
use crate::spectral::{ActionMaterialTable, MaterialClass, SpectralReading};

/// A generated set: manifest plus the clouds and readings it refers to, in
/// manifest object order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSet {
    pub name: String,
    pub manifest: ObjectSetManifest,
    pub clouds: Vec<PointCloud>,
    pub readings: Vec<SpectralReading>,
}

impl ExperimentSet {
    /// The set as scorer inputs, without going through files.
    pub fn candidates(&self) -> Vec<CandidateObject> {
        self.manifest
            .objects
            .iter()
            .zip(self.clouds.iter().zip(&self.readings))
            .map(|(o, (c, r))| CandidateObject {
                id: o.id.clone(),
                cloud: c.clone(),
                capabilities: o.capabilities(),
                spectral: Some(r.clone()),
                role_hint: o.role,
            })
            .collect()
    }
}

/// Shared inputs of the set builders.
#[derive(Debug, Clone)]
pub struct ExperimentContext {
    pub table: ActionMaterialTable,
    pub class_models: Vec<SpectralClassModel>,
    pub part_spec: PartSpec,
}

impl Default for ExperimentContext {
    fn default() -> Self {
        Self {
            table: ActionMaterialTable::default(),
            class_models: default_class_models(),
            part_spec: PartSpec::default(),
        }
    }
}

/// The names under which a set's files live, relative to the dataset root.
pub fn set_name(kind: ExperimentKind, action: Action, seed: u64) -> String {
    format!("{kind}-{action}-{seed}")
}

struct Draft {
    cloud: PointCloud,
    material: MaterialClass,
    caps: ObjectCapabilities,
    role: Option<PartRole>,
    tag: Tag,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Tag {
    Other,
    PlantedHead,
    PlantedHandle,
    Substitute,
}

#[derive(Clone, Copy)]
enum Filler {
    WrongMaterialHead,
    WrongShapeHead,
    BareRod,
    Clutter,
    WrongMaterialTool,
    OtherTool,
}

struct Builder<'a> {
    ctx: &'a ExperimentContext,
    action: Action,
    seed: u64,
    rng: ChaCha8Rng,
    drafts: Vec<Draft>,
}

fn to_coords(points: &[Point]) -> Vec<[f64; 3]> {
    points.iter().map(|p| [p.x, p.y, p.z]).collect()
}

impl<'a> Builder<'a> {
    fn new(ctx: &'a ExperimentContext, action: Action, seed: u64) -> Self {
        Self {
            ctx,
            action,
            seed,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xe5e7, action as u64)),
            drafts: Vec::new(),
        }
    }

    fn next_seed(&mut self) -> u64 {
        derive_seed(self.seed, 0x0b1e + self.action as u64, self.drafts.len() as u64)
    }

    fn appropriate(&mut self, action: Action) -> Result<MaterialClass, SynthError> {
        let ok: Vec<MaterialClass> = self.ctx.table.get(action).map_err(table_err)?.iter().copied().collect();
        Ok(*ok.choose(&mut self.rng).expect("table entries are non-empty"))
    }

    fn inappropriate(&mut self, action: Action) -> Result<MaterialClass, SynthError> {
        let ok = self.ctx.table.get(action).map_err(table_err)?;
        let bad: Vec<MaterialClass> = MaterialClass::ALL.into_iter().filter(|m| !ok.contains(m)).collect();
        bad.choose(&mut self.rng)
            .copied()
            .ok_or_else(|| SynthError::InvalidSpec(format!("every material suits {action}")))
    }

    fn any_material(&mut self) -> MaterialClass {
        *MaterialClass::ALL.choose(&mut self.rng).expect("non-empty")
    }

    fn other_action(&mut self, pool: &[Action]) -> Action {
        let others: Vec<Action> = pool.iter().copied().filter(|a| *a != self.action).collect();
        *others.choose(&mut self.rng).expect("more than one action")
    }

    fn part(&mut self, kind: PartKind) -> Result<PointCloud, SynthError> {
        let seed = self.next_seed();
        gen_part_cloud(kind, &self.ctx.part_spec, seed)
    }

    fn tool(&mut self, action: Action) -> Result<PointCloud, SynthError> {
        let seed = self.next_seed();
        gen_tool_cloud(action, &ToolPrototypeSpec::default_for(action), seed)
    }

    fn push(&mut self, cloud: PointCloud, material: MaterialClass, caps: ObjectCapabilities, role: Option<PartRole>, tag: Tag) {
        self.drafts.push(Draft {
            cloud,
            material,
            caps,
            role,
            tag,
        });
    }

    fn magnets(cloud: &PointCloud, along: usize) -> ObjectCapabilities {
        ObjectCapabilities {
            magnets: to_coords(&magnet_sites(cloud, along)),
            ..Default::default()
        }
    }

    /// A head with magnets on its faces.
    fn head(&mut self, of: Action, material: MaterialClass, tag: Tag) -> Result<(), SynthError> {
        let cloud = self.part(PartKind::Head(of))?;
        let caps = Self::magnets(&cloud, 0);
        self.push(cloud, material, caps, Some(PartRole::Action), tag);
        Ok(())
    }

    /// A rod with magnets at its faces and along its length.
    fn magnetic_handle(&mut self, tag: Tag) -> Result<(), SynthError> {
        let cloud = self.part(PartKind::Handle)?;
        let caps = Self::magnets(&cloud, 5);
        let material = *[MaterialClass::Wood, MaterialClass::Plastic, MaterialClass::Metal]
            .choose(&mut self.rng)
            .expect("non-empty");
        self.push(cloud, material, caps, Some(PartRole::Handle), tag);
        Ok(())
    }

    /// The correct construction for the action: a canonical head plus a
    /// grasp part it can be attached to.
    fn planted_construction(&mut self) -> Result<(), SynthError> {
        let a = self.action;
        match a {
            Action::Squeegee => {
                let ok = self.ctx.table.get(a).map_err(table_err)?;
                let m = if ok.contains(&MaterialClass::Foam) {
                    MaterialClass::Foam
                } else {
                    self.appropriate(a)?
                };
                self.head(a, m, Tag::PlantedHead)?;
                let cloud = self.part(PartKind::Screwdriver)?;
                let caps = ObjectCapabilities {
                    pierce_tool: true,
                    ..Default::default()
                };
                self.push(cloud, MaterialClass::Metal, caps, Some(PartRole::Handle), Tag::PlantedHandle);
            }
            Action::Screw => {
                let m = self.appropriate(a)?;
                self.head(a, m, Tag::PlantedHead)?;
                let cloud = self.part(PartKind::Tongs)?;
                let caps = ObjectCapabilities {
                    grasp_tool: true,
                    gripper_width: Some(TONGS_WIDTH),
                    ..Default::default()
                };
                self.push(cloud, MaterialClass::Metal, caps, Some(PartRole::Handle), Tag::PlantedHandle);
            }
            _ => {
                let m = self.appropriate(a)?;
                self.head(a, m, Tag::PlantedHead)?;
                self.magnetic_handle(Tag::PlantedHandle)?;
            }
        }
        Ok(())
    }

    fn filler(&mut self, f: Filler) -> Result<(), SynthError> {
        let a = self.action;
        match f {
            Filler::WrongMaterialHead => {
                let m = self.inappropriate(a)?;
                self.head(a, m, Tag::Other)?;
            }
            Filler::WrongShapeHead => {
                let b = self.other_action(&Action::CONSTRUCTION);
                let m = self.appropriate(a)?;
                self.head(b, m, Tag::Other)?;
            }
            Filler::BareRod => {
                let cloud = self.part(PartKind::Handle)?;
                let m = self.any_material();
                self.push(cloud, m, ObjectCapabilities::default(), Some(PartRole::Handle), Tag::Other);
            }
            Filler::Clutter => {
                let kind = *PartKind::DISTRACTORS.choose(&mut self.rng).expect("non-empty");
                let cloud = self.part(kind)?;
                let caps = Self::magnets(&cloud, 0);
                let m = self.any_material();
                self.push(cloud, m, caps, None, Tag::Other);
            }
            Filler::WrongMaterialTool => {
                let cloud = self.tool(a)?;
                let m = self.inappropriate(a)?;
                self.push(cloud, m, ObjectCapabilities::default(), Some(PartRole::Whole), Tag::Other);
            }
            Filler::OtherTool => {
                let b = self.other_action(&Action::ALL);
                let cloud = self.tool(b)?;
                let m = self.any_material();
                self.push(cloud, m, ObjectCapabilities::default(), Some(PartRole::Whole), Tag::Other);
            }
        }
        Ok(())
    }

    fn fill(&mut self, n: usize, cycle: &[Filler]) -> Result<(), SynthError> {
        let mut k = 0;
        while self.drafts.len() < n {
            self.filler(cycle[k % cycle.len()])?;
            k += 1;
        }
        Ok(())
    }

    /// Shuffles, assigns ids, samples readings and writes the manifest.
    fn finish(mut self, kind: ExperimentKind, preferred: Option<Preferred>) -> Result<ExperimentSet, SynthError> {
        let name = set_name(kind, self.action, self.seed);
        let mut drafts = std::mem::take(&mut self.drafts);
        drafts.shuffle(&mut self.rng);
        let mut objects = Vec::with_capacity(drafts.len());
        let mut clouds = Vec::with_capacity(drafts.len());
        let mut readings = Vec::with_capacity(drafts.len());
        let (mut head, mut handle, mut substitute) = (None, None, None);
        for (i, d) in drafts.into_iter().enumerate() {
            let id = format!("obj{i:02}");
            let class = self
                .ctx
                .class_models
                .iter()
                .find(|m| m.class == d.material)
                .ok_or_else(|| SynthError::InvalidSpec(format!("no spectral model for {}", d.material)))?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, 0x5ec7 + self.action as u64, i as u64));
            let reading = class.sample_object(&id, 1, &mut rng).remove(0);
            match d.tag {
                Tag::PlantedHead => head = Some(id.clone()),
                Tag::PlantedHandle => handle = Some(id.clone()),
                Tag::Substitute => substitute = Some(id.clone()),
                Tag::Other => {}
            }
            objects.push(ManifestObject {
                id: id.clone(),
                cloud: format!("../clouds/{name}/{id}.xyz"),
                spectral: Some(format!("../spectra/{name}/{id}.csv")),
                pierce_tool: d.caps.pierce_tool,
                grasp_tool: d.caps.grasp_tool,
                gripper_width: d.caps.gripper_width,
                magnets: d.caps.magnets,
                material: Some(d.material),
                role: d.role,
            });
            clouds.push(d.cloud.with_id(id));
            readings.push(reading);
        }
        let construction = match (head, handle) {
            (Some(h), Some(g)) => Some(vec![h, g]),
            _ => None,
        };
        let mut oracle = BTreeMap::new();
        let ids: Vec<&str> = objects.iter().map(|o| o.id.as_str()).collect();
        for s in crate::pipeline::enumerate_states(&ids, 2) {
            oracle.insert(s.key(&ids), false);
        }
        if let Some(s) = &substitute {
            oracle.insert(s.clone(), true);
        }
        if let Some(t) = &construction {
            oracle.insert(t.join("+"), true);
        }
        let manifest = ObjectSetManifest {
            action: self.action,
            kind: Some(kind),
            objects,
            ground_truth: GroundTruth {
                substitute_id: substitute,
                construction,
                preferred,
            },
            oracle,
        };
        Ok(ExperimentSet {
            name,
            manifest,
            clouds,
            readings,
        })
    }
}

fn table_err(e: crate::spectral::SpectralError) -> SynthError {
    SynthError::InvalidSpec(e.to_string())
}

/// One benchmark case with default context.
pub fn build_experiment_set(
    kind: ExperimentKind,
    action: Action,
    n_objects: usize,
    seed: u64,
) -> Result<ExperimentSet, SynthError> {
    build_experiment_set_with(&ExperimentContext::default(), kind, action, n_objects, seed)
}

/// Construction sets plant one head+handle pair; substitution sets plant
/// one tool; arbitration sets plant one good and one poor option (a
/// non-canonical shape in an appropriate material), the good one chosen by
/// a seeded coin flip. Remaining slots are wrong-shape or wrong-material
/// distractors.
pub fn build_experiment_set_with(
    ctx: &ExperimentContext,
    kind: ExperimentKind,
    action: Action,
    n_objects: usize,
    seed: u64,
) -> Result<ExperimentSet, SynthError> {
    let needed = match kind {
        ExperimentKind::Construction => 3,
        ExperimentKind::Substitution => 2,
        ExperimentKind::Arbitration => 4,
    };
    if n_objects < needed {
        return Err(SynthError::InvalidSpec(format!(
            "{kind} sets need at least {needed} objects, got {n_objects}"
        )));
    }
    let mut b = Builder::new(ctx, action, seed);
    match kind {
        ExperimentKind::Construction => {
            b.planted_construction()?;
            b.fill(
                n_objects,
                &[Filler::WrongMaterialHead, Filler::WrongShapeHead, Filler::BareRod, Filler::Clutter],
            )?;
            b.finish(kind, None)
        }
        ExperimentKind::Substitution => {
            let m = b.appropriate(action)?;
            let cloud = b.tool(action)?;
            b.push(cloud, m, ObjectCapabilities::default(), Some(PartRole::Whole), Tag::Substitute);
            b.fill(
                n_objects,
                &[Filler::OtherTool, Filler::WrongMaterialTool, Filler::Clutter, Filler::OtherTool],
            )?;
            b.finish(kind, None)
        }
        ExperimentKind::Arbitration => {
            let prefer_construction = b.rng.random_bool(0.5);
            let m = b.appropriate(action)?;
            let cloud = if prefer_construction {
                let other = b.other_action(&Action::ALL);
                b.tool(other)?
            } else {
                b.tool(action)?
            };
            b.push(cloud, m, ObjectCapabilities::default(), Some(PartRole::Whole), Tag::Substitute);
            if prefer_construction {
                b.planted_construction()?;
            } else {
                let other = b.other_action(&Action::CONSTRUCTION);
                let m = b.appropriate(action)?;
                b.head(other, m, Tag::PlantedHead)?;
                b.magnetic_handle(Tag::PlantedHandle)?;
            }
            b.fill(
                n_objects,
                &[Filler::WrongMaterialHead, Filler::BareRod, Filler::Clutter, Filler::WrongMaterialTool],
            )?;
            let preferred = if prefer_construction {
                Preferred::Construction
            } else {
                Preferred::Substitute
            };
            b.finish(kind, Some(preferred))
        }
    }
}
