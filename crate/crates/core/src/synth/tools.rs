//! Parametric prototype tools and isolated candidate parts.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::shapes::{sample_composite, Placed, Primitive};
use super::SynthError;
use crate::action::Action;
use crate::geometry::{Point, PointCloud};

pub const DEFAULT_TOOL_POINTS: usize = 1_500;
pub const DEFAULT_PART_POINTS: usize = 1_000;

/// Dimensions of a whole tool: a handle along +z from the origin with an
/// action part at its far end. The meaning of `head` depends on the action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolPrototypeSpec {
    pub action: Action,
    pub head: [f64; 3],
    pub handle_length: f64,
    pub handle_radius: f64,
    /// Each dimension is scaled by `1 + jitter · U(−1, 1)`.
    pub jitter: f64,
    pub points: usize,
}

impl ToolPrototypeSpec {
    pub fn default_for(action: Action) -> Self {
        let (head, handle_length, handle_radius) = match action {
            // head box: length (x), width (y), height (z)
            Action::Hit => ([0.10, 0.035, 0.035], 0.28, 0.012),
            // bowl radius, wall thickness
            Action::Scoop => ([0.045, 0.006, 0.0], 0.20, 0.010),
            // plate width (x), thickness (y), length (z)
            Action::Flip => ([0.08, 0.004, 0.10], 0.20, 0.011),
            Action::Squeegee => ([0.25, 0.003, 0.045], 0.22, 0.012),
            // shaft length, tip width, shaft radius
            Action::Screw => ([0.10, 0.008, 0.003], 0.10, 0.016),
            // bar width, tooth length
            Action::Rake => ([0.20, 0.06, 0.0], 0.30, 0.011),
            // blade length, width, spine thickness
            Action::Cut => ([0.15, 0.03, 0.003], 0.11, 0.011),
            // spike length, tip radius
            Action::Poke => ([0.15, 0.001, 0.0], 0.10, 0.010),
        };
        Self {
            action,
            head,
            handle_length,
            handle_radius,
            jitter: 0.15,
            points: DEFAULT_TOOL_POINTS,
        }
    }

    /// Draws concrete dimensions for `seed`.
    pub fn realize(&self, seed: u64) -> ToolDims {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.realize_with(&mut rng)
    }

    fn realize_with(&self, rng: &mut ChaCha8Rng) -> ToolDims {
        let mut j = |v: f64| v * (1.0 + self.jitter * rng.random_range(-1.0..=1.0));
        ToolDims {
            action: self.action,
            head: [j(self.head[0]), j(self.head[1]), j(self.head[2])],
            handle_length: j(self.handle_length),
            handle_radius: j(self.handle_radius),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolDims {
    pub action: Action,
    pub head: [f64; 3],
    pub handle_length: f64,
    pub handle_radius: f64,
}

const RAKE_BAR: [f64; 2] = [0.012, 0.024];
const RAKE_TEETH: usize = 9;
const SCREW_TIP_LENGTH: f64 = 0.012;
/// Half-size of the square bar holding a squeegee blade.
const SQUEEGEE_HOLDER: f64 = 0.008;

impl ToolDims {
    /// The action part alone, centered near the origin.
    pub fn head_components(&self) -> Vec<Placed> {
        let [a, b, c] = self.head;
        let r = self.handle_radius;
        match self.action {
            Action::Hit => vec![Placed::at(
                Primitive::Cuboid {
                    half: Vector3::new(a, b, c) / 2.0,
                },
                Vector3::zeros(),
            )],
            Action::Scoop => vec![Placed::at(
                Primitive::Bowl {
                    radius: a,
                    thickness: b,
                },
                Vector3::zeros(),
            )
            .rotated(Vector3::y(), FRAC_PI_2)],
            Action::Flip => vec![Placed::at(
                Primitive::Cuboid {
                    half: Vector3::new(a, b, c) / 2.0,
                },
                Vector3::zeros(),
            )],
            Action::Squeegee => vec![
                Placed::at(
                    Primitive::Cuboid {
                        half: Vector3::new(a / 2.0, SQUEEGEE_HOLDER, SQUEEGEE_HOLDER),
                    },
                    Vector3::zeros(),
                ),
                Placed::at(
                    Primitive::Cuboid {
                        half: Vector3::new(a, b, c) / 2.0,
                    },
                    Vector3::new(0.0, 0.0, SQUEEGEE_HOLDER + c / 2.0),
                ),
            ],
            Action::Screw => {
                let tip = Primitive::Cuboid {
                    half: Vector3::new(b / 2.0, 0.0008, SCREW_TIP_LENGTH / 2.0),
                };
                let tip_z = a / 2.0;
                vec![
                    Placed::at(
                        Primitive::Cylinder {
                            radius: c,
                            length: a,
                        },
                        Vector3::zeros(),
                    ),
                    Placed::at(tip, Vector3::new(0.0, 0.0, tip_z)),
                    Placed::at(tip, Vector3::new(0.0, 0.0, tip_z)).rotated(Vector3::z(), FRAC_PI_2),
                ]
            }
            Action::Rake => {
                let [bar_y, bar_z] = RAKE_BAR;
                let mut parts = vec![Placed::at(
                    Primitive::Cuboid {
                        half: Vector3::new(a / 2.0, bar_y / 2.0, bar_z / 2.0),
                    },
                    Vector3::zeros(),
                )];
                for i in 0..RAKE_TEETH {
                    let x = -a / 2.0 + a * (i as f64 + 0.5) / RAKE_TEETH as f64;
                    parts.push(Placed::at(
                        Primitive::Cuboid {
                            half: Vector3::new(0.003, b / 2.0, 0.003),
                        },
                        Vector3::new(x, bar_y / 2.0 + b / 2.0, 0.0),
                    ));
                }
                parts
            }
            Action::Cut => vec![Placed::at(
                Primitive::Wedge {
                    length: a,
                    width: b,
                    thickness: c,
                },
                Vector3::zeros(),
            )],
            Action::Poke => vec![Placed::at(
                Primitive::Frustum {
                    bottom: 0.8 * r,
                    top: b,
                    length: a,
                },
                Vector3::zeros(),
            )],
        }
    }

    /// Offset of the head's local origin in the tool frame.
    fn head_offset(&self) -> Vector3<f64> {
        let [a, _, c] = self.head;
        let l = self.handle_length;
        let dz = match self.action {
            Action::Hit | Action::Rake => 0.0,
            Action::Scoop => a,
            Action::Flip => c / 2.0,
            Action::Squeegee => SQUEEGEE_HOLDER,
            Action::Screw | Action::Cut | Action::Poke => a / 2.0,
        };
        Vector3::new(0.0, 0.0, l + dz)
    }

    pub fn handle_component(&self) -> Placed {
        Placed::at(
            Primitive::Cylinder {
                radius: self.handle_radius,
                length: self.handle_length,
            },
            Vector3::new(0.0, 0.0, self.handle_length / 2.0),
        )
    }

    pub fn components(&self) -> Vec<Placed> {
        let offset = self.head_offset();
        let mut parts = vec![self.handle_component()];
        parts.extend(self.head_components().into_iter().map(|mut p| {
            p.offset += offset;
            p
        }));
        parts
    }

    /// Analytic bounding-box extent of the assembled tool.
    pub fn extent(&self) -> Vector3<f64> {
        let [a, b, c] = self.head;
        let l = self.handle_length;
        let d = 2.0 * self.handle_radius;
        match self.action {
            Action::Hit => Vector3::new(a.max(d), b.max(d), l + c / 2.0),
            Action::Scoop => Vector3::new(a + d / 2.0, (2.0 * a).max(d), l + 2.0 * a),
            Action::Flip => Vector3::new(a.max(d), b.max(d), l + c),
            Action::Squeegee => {
                let h = 2.0 * SQUEEGEE_HOLDER;
                Vector3::new(a.max(d), h.max(d), l + h + c)
            }
            Action::Screw => Vector3::new(d.max(b), d.max(b), l + a + SCREW_TIP_LENGTH / 2.0),
            Action::Rake => {
                let [bar_y, bar_z] = RAKE_BAR;
                let lo = (bar_y / 2.0).max(d / 2.0);
                Vector3::new(a.max(d), lo + bar_y / 2.0 + b, l + bar_z / 2.0)
            }
            Action::Cut => Vector3::new(c.max(d), b.max(d), l + a),
            Action::Poke => Vector3::new(d, d, l + a),
        }
    }
}

/// A whole prototype tool for `action`.
pub fn gen_tool_cloud(action: Action, spec: &ToolPrototypeSpec, seed: u64) -> Result<PointCloud, SynthError> {
    if spec.action != action {
        return Err(SynthError::InvalidSpec(format!(
            "spec is for {} but {} was requested",
            spec.action, action
        )));
    }
    validate_common(spec.points, spec.jitter)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = spec.realize_with(&mut rng);
    check_positive(&dims)?;
    let points = sample_composite(&dims.components(), spec.points, &mut rng);
    Ok(PointCloud::new(format!("{action}-tool-{seed}"), points)?)
}

fn validate_common(points: usize, jitter: f64) -> Result<(), SynthError> {
    if points < 10 {
        return Err(SynthError::InvalidSpec(format!("{points} points is too few")));
    }
    if !(0.0..1.0).contains(&jitter) {
        return Err(SynthError::InvalidSpec(format!("jitter {jitter} not in [0,1)")));
    }
    Ok(())
}

fn check_positive(dims: &ToolDims) -> Result<(), SynthError> {
    let ok = dims.handle_length > 0.0
        && dims.handle_radius > 0.0
        && dims.head.iter().all(|v| *v >= 0.0)
        && dims.head[0] > 0.0;
    if ok {
        Ok(())
    } else {
        Err(SynthError::InvalidSpec(format!("non-positive dimensions {dims:?}")))
    }
}

/// Isolated objects used as construction candidates and distractors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartKind {
    /// The action part of a tool for this action.
    Head(Action),
    /// Plain cylindrical rod.
    Handle,
    /// Rod with a pointed tip; can pierce soft material.
    Screwdriver,
    /// Two jaws joined at one end; can grasp things.
    Tongs,
    Blob,
    Torus,
    Can,
    Ball,
    Brick,
}

impl PartKind {
    pub const DISTRACTORS: [PartKind; 5] = [
        PartKind::Blob,
        PartKind::Torus,
        PartKind::Can,
        PartKind::Ball,
        PartKind::Brick,
    ];

    /// Kinds that work as the grasp part of a construction.
    pub fn is_handle_like(self) -> bool {
        matches!(self, PartKind::Handle | PartKind::Screwdriver | PartKind::Tongs)
    }
}

impl fmt::Display for PartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartKind::Head(a) => write!(f, "head-{a}"),
            PartKind::Handle => f.write_str("handle"),
            PartKind::Screwdriver => f.write_str("screwdriver"),
            PartKind::Tongs => f.write_str("tongs"),
            PartKind::Blob => f.write_str("distractor-blob"),
            PartKind::Torus => f.write_str("distractor-torus"),
            PartKind::Can => f.write_str("distractor-can"),
            PartKind::Ball => f.write_str("distractor-ball"),
            PartKind::Brick => f.write_str("distractor-brick"),
        }
    }
}

impl FromStr for PartKind {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "handle" | "rod" => PartKind::Handle,
            "screwdriver" => PartKind::Screwdriver,
            "tongs" => PartKind::Tongs,
            "distractor-blob" | "blob" => PartKind::Blob,
            "distractor-torus" | "torus" => PartKind::Torus,
            "distractor-can" | "can" => PartKind::Can,
            "distractor-ball" | "ball" => PartKind::Ball,
            "distractor-brick" | "brick" => PartKind::Brick,
            other => match other.strip_prefix("head-") {
                Some(a) => PartKind::Head(a.parse().map_err(|_| SynthError::UnknownKind(s.into()))?),
                None => return Err(SynthError::UnknownKind(s.into())),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSpec {
    pub jitter: f64,
    pub points: usize,
}

impl Default for PartSpec {
    fn default() -> Self {
        Self {
            jitter: 0.15,
            points: DEFAULT_PART_POINTS,
        }
    }
}

/// Jaw opening of generated tongs.
pub const TONGS_WIDTH: f64 = 0.05;

fn part_components(kind: PartKind, rng: &mut ChaCha8Rng, jitter: f64) -> Vec<Placed> {
    let mut j = |v: f64| v * (1.0 + jitter * rng.random_range(-1.0..=1.0));
    match kind {
        PartKind::Head(action) => {
            let mut spec = ToolPrototypeSpec::default_for(action);
            spec.jitter = jitter;
            let dims = ToolDims {
                action,
                head: spec.head.map(&mut j),
                handle_length: j(spec.handle_length),
                handle_radius: j(spec.handle_radius),
            };
            dims.head_components()
        }
        PartKind::Handle => vec![Placed::at(
            Primitive::Cylinder {
                radius: j(0.012),
                length: j(0.25),
            },
            Vector3::zeros(),
        )],
        PartKind::Screwdriver => {
            let (r, l) = (j(0.013), j(0.12));
            let (sr, sl) = (j(0.003), j(0.10));
            vec![
                Placed::at(Primitive::Cylinder { radius: r, length: l }, Vector3::zeros()),
                Placed::at(
                    Primitive::Frustum {
                        bottom: sr,
                        top: 0.0005,
                        length: sl,
                    },
                    Vector3::new(0.0, 0.0, (l + sl) / 2.0),
                ),
            ]
        }
        PartKind::Tongs => {
            let (len, bar) = (j(0.22), j(0.006));
            let jaw = Primitive::Cuboid {
                half: Vector3::new(bar / 2.0, 0.006, len / 2.0),
            };
            let gap = TONGS_WIDTH / 2.0 + bar / 2.0;
            vec![
                Placed::at(jaw, Vector3::new(-gap, 0.0, 0.0)),
                Placed::at(jaw, Vector3::new(gap, 0.0, 0.0)),
                Placed::at(
                    Primitive::Cuboid {
                        half: Vector3::new(gap + bar / 2.0, 0.006, bar / 2.0),
                    },
                    Vector3::new(0.0, 0.0, -len / 2.0),
                ),
            ]
        }
        PartKind::Blob => vec![Placed::at(
            Primitive::Ellipsoid {
                radii: Vector3::new(j(0.06), j(0.045), j(0.035)),
            },
            Vector3::zeros(),
        )],
        PartKind::Torus => vec![Placed::at(
            Primitive::Torus {
                major: j(0.05),
                minor: j(0.015),
            },
            Vector3::zeros(),
        )],
        PartKind::Can => vec![Placed::at(
            Primitive::Cylinder {
                radius: j(0.035),
                length: j(0.11),
            },
            Vector3::zeros(),
        )],
        PartKind::Ball => {
            let r = j(0.04);
            vec![Placed::at(
                Primitive::Ellipsoid {
                    radii: Vector3::repeat(r),
                },
                Vector3::zeros(),
            )]
        }
        PartKind::Brick => vec![Placed::at(
            Primitive::Cuboid {
                half: Vector3::new(j(0.05), j(0.04), j(0.012)),
            },
            Vector3::zeros(),
        )],
    }
}

/// One isolated object of the given kind.
pub fn gen_part_cloud(kind: PartKind, spec: &PartSpec, seed: u64) -> Result<PointCloud, SynthError> {
    validate_common(spec.points, spec.jitter)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = part_components(kind, &mut rng, spec.jitter);
    let points = sample_composite(&comps, spec.points, &mut rng);
    Ok(PointCloud::new(format!("{kind}-{seed}"), points)?)
}

/// Cloud points nearest to the centers of the six bounding-box faces, plus
/// evenly spaced points along the longest side; used as magnet sites.
pub fn magnet_sites(cloud: &PointCloud, along_axis: usize) -> Vec<Point> {
    let Some((lo, hi)) = cloud.bounds() else {
        return Vec::new();
    };
    let c = nalgebra::center(&lo, &hi);
    let ext = hi - lo;
    let mut targets = Vec::new();
    for k in 0..3 {
        for s in [-1.0, 1.0] {
            let mut t = c;
            t[k] += s * ext[k] / 2.0;
            targets.push(t);
        }
    }
    let long = (0..3).max_by(|&a, &b| ext[a].total_cmp(&ext[b])).unwrap_or(2);
    for i in 0..along_axis {
        let mut t = c;
        t[long] = lo[long] + ext[long] * (i as f64 + 0.5) / along_axis as f64;
        targets.push(t);
    }
    let mut sites: Vec<Point> = Vec::new();
    for t in targets {
        let nearest = cloud
            .points()
            .iter()
            .min_by(|a, b| (*a - t).norm_squared().total_cmp(&(*b - t).norm_squared()))
            .copied()
            .expect("non-empty cloud");
        if !sites.contains(&nearest) {
            sites.push(nearest);
        }
    }
    sites
}
