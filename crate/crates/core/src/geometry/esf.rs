//! Ensemble of Shape Functions descriptor.
//!
//! Random point triples are drawn from the normalized cloud. Every triple
//! contributes three pair distances (D2), three line occupancy ratios, one
//! angle (A3) and one triangle area (D3). Distances, angles and areas are
//! split by how the connecting lines cross a dilated 64³ occupancy grid:
//! entirely over occupied voxels (in), entirely over free space (out), or
//! both (mixed).

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Point, PointCloud, MIN_DESCRIPTOR_POINTS};

pub const ESF_BINS: usize = 64;
pub const ESF_HISTOGRAMS: usize = 10;
pub const ESF_LEN: usize = ESF_BINS * ESF_HISTOGRAMS;
pub const ESF_GRID: usize = 64;
pub const DEFAULT_ESF_SAMPLES: usize = 20_000;
pub const MIN_ESF_SAMPLES: usize = 1_000;

/// Sub-histogram order inside the 640-D vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsfHistogram {
    D2In = 0,
    D2Out,
    D2Mixed,
    D2Ratio,
    A3In,
    A3Out,
    A3Mixed,
    D3In,
    D3Out,
    D3Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsfDescriptor {
    values: Vec<f64>,
}

impl EsfDescriptor {
    pub fn from_values(values: Vec<f64>) -> Result<Self, GeometryError> {
        if values.len() != ESF_LEN {
            return Err(GeometryError::DescriptorLength(values.len()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn histogram(&self, which: EsfHistogram) -> &[f64] {
        let start = which as usize * ESF_BINS;
        &self.values[start..start + ESF_BINS]
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum LineClass {
    In,
    Out,
    Mixed,
}

impl LineClass {
    fn offset(self) -> usize {
        match self {
            LineClass::In => 0,
            LineClass::Out => 1,
            LineClass::Mixed => 2,
        }
    }
}

struct OccupancyGrid {
    cells: Vec<bool>,
}

impl OccupancyGrid {
    /// Marks each point's voxel and its 26 neighbours.
    fn from_grid_points(points: &[Vector3<f64>]) -> Self {
        let mut cells = vec![false; ESF_GRID * ESF_GRID * ESF_GRID];
        for p in points {
            let [x, y, z] = voxel_of(p);
            for dx in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dz in -1i64..=1 {
                        let (nx, ny, nz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                        let max = ESF_GRID as i64;
                        if (0..max).contains(&nx) && (0..max).contains(&ny) && (0..max).contains(&nz)
                        {
                            cells[index(nx as usize, ny as usize, nz as usize)] = true;
                        }
                    }
                }
            }
        }
        Self { cells }
    }

    fn occupied(&self, p: &Vector3<f64>) -> bool {
        let [x, y, z] = voxel_of(p);
        self.cells[index(x, y, z)]
    }

    /// Fraction of interior samples along `a → b` that fall in occupied
    /// voxels. Samples within `ENDPOINT_MARGIN` voxels of either end are
    /// skipped: the endpoints' own dilation would mark them occupied. Lines
    /// with no sample left count as fully occupied.
    fn line_ratio(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        let len = (b - a).norm();
        let steps = len.ceil() as usize;
        let (mut hits, mut total) = (0usize, 0usize);
        for k in 1..steps {
            let t = k as f64 / steps as f64;
            let d = len * t;
            if d < ENDPOINT_MARGIN || len - d < ENDPOINT_MARGIN {
                continue;
            }
            total += 1;
            if self.occupied(&(a + (b - a) * t)) {
                hits += 1;
            }
        }
        if total == 0 {
            1.0
        } else {
            hits as f64 / total as f64
        }
    }
}

/// Reach of a point's dilated voxel block, in voxels.
const ENDPOINT_MARGIN: f64 = 3.5;

fn index(x: usize, y: usize, z: usize) -> usize {
    (x * ESF_GRID + y) * ESF_GRID + z
}

fn voxel_of(p: &Vector3<f64>) -> [usize; 3] {
    let clamp = |v: f64| (v.floor().max(0.0) as usize).min(ESF_GRID - 1);
    [clamp(p.x), clamp(p.y), clamp(p.z)]
}

fn bin(value: f64, max: f64) -> usize {
    ((value / max * ESF_BINS as f64).floor().max(0.0) as usize).min(ESF_BINS - 1)
}

/// Centroid-centers the cloud and divides by the largest bounding-box side.
pub fn normalize_unit(points: &[Point]) -> Vec<Vector3<f64>> {
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let (lo, hi) = points.iter().fold(
        (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)),
        |(lo, hi), p| (lo.inf(&p.coords), hi.sup(&p.coords)),
    );
    let extent = (hi - lo).max();
    let scale = if extent > 0.0 { extent } else { 1.0 };
    points.iter().map(|p| (p.coords - centroid) / scale).collect()
}

pub fn compute_esf(
    cloud: &PointCloud,
    sample_count: usize,
    seed: u64,
) -> Result<EsfDescriptor, GeometryError> {
    if cloud.len() < MIN_DESCRIPTOR_POINTS {
        return Err(GeometryError::TooFewPoints {
            needed: MIN_DESCRIPTOR_POINTS,
            got: cloud.len(),
        });
    }
    if sample_count < MIN_ESF_SAMPLES {
        return Err(GeometryError::InvalidSampleCount(sample_count));
    }
    if let Some(index) = cloud
        .points()
        .iter()
        .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
    {
        return Err(GeometryError::NonFiniteInput { index });
    }

    let unit = normalize_unit(cloud.points());
    let lo = unit
        .iter()
        .fold(Vector3::repeat(f64::INFINITY), |lo, p| lo.inf(p));
    let grid_points: Vec<Vector3<f64>> = unit
        .iter()
        .map(|p| (p - lo) * ESF_GRID as f64)
        .collect();
    let grid = OccupancyGrid::from_grid_points(&grid_points);

    let max_distance = 3f64.sqrt();
    // Largest triangle that fits in a unit cube.
    let max_area = 3f64.sqrt() / 2.0;

    let mut hist = vec![0.0f64; ESF_LEN];
    let mut bump = |which: usize, b: usize| hist[which * ESF_BINS + b] += 1.0;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = unit.len();
    for _ in 0..sample_count {
        let (i, j, k) = loop {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            let k = rng.random_range(0..n);
            if i != j && j != k && i != k {
                break (i, j, k);
            }
        };
        let tri = [i, j, k];
        let mut classes = [LineClass::In; 3];
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            let distance = (unit[b] - unit[a]).norm();
            let ratio = grid.line_ratio(&grid_points[a], &grid_points[b]);
            let class = if ratio >= 1.0 {
                LineClass::In
            } else if ratio <= 0.0 {
                LineClass::Out
            } else {
                LineClass::Mixed
            };
            classes[e] = class;
            bump(EsfHistogram::D2In as usize + class.offset(), bin(distance, max_distance));
            bump(EsfHistogram::D2Ratio as usize, bin(ratio, 1.0));
        }

        // Angle at the first vertex, classified by the opposite edge (j, k).
        let u = unit[j] - unit[i];
        let v = unit[k] - unit[i];
        let (nu, nv) = (u.norm(), v.norm());
        if nu > 0.0 && nv > 0.0 {
            let cos = (u.dot(&v) / (nu * nv)).clamp(-1.0, 1.0);
            bump(
                EsfHistogram::A3In as usize + classes[1].offset(),
                bin(cos.acos(), std::f64::consts::PI),
            );
        }

        let area = 0.5 * u.cross(&v).norm();
        let inside = classes.iter().filter(|c| **c == LineClass::In).count();
        let outside = classes.iter().filter(|c| **c == LineClass::Out).count();
        let class = match (inside, outside) {
            (3, _) => LineClass::In,
            (_, 3) => LineClass::Out,
            _ => LineClass::Mixed,
        };
        bump(
            EsfHistogram::D3In as usize + class.offset(),
            bin((area / max_area).sqrt(), 1.0),
        );
    }

    // A sub-histogram nothing fell into is spread uniformly.
    for chunk in hist.chunks_mut(ESF_BINS) {
        let total: f64 = chunk.iter().sum();
        if total > 0.0 {
            chunk.iter_mut().for_each(|v| *v /= total);
        } else {
            chunk.fill(1.0 / ESF_BINS as f64);
        }
    }
    Ok(EsfDescriptor { values: hist })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_box(n: usize, size: [f64; 3], seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| {
                // points on the surface: pin one random axis to a face
                let mut c = [
                    rng.random_range(-0.5..0.5) * size[0],
                    rng.random_range(-0.5..0.5) * size[1],
                    rng.random_range(-0.5..0.5) * size[2],
                ];
                let axis = rng.random_range(0..3);
                c[axis] = if rng.random_bool(0.5) { 0.5 } else { -0.5 } * size[axis];
                Point::new(c[0], c[1], c[2])
            })
            .collect();
        PointCloud::new("box", pts).unwrap()
    }

    #[test]
    fn too_few_points() {
        let cloud = PointCloud::from_coords("t", &[[0.0; 3]; 9]).unwrap();
        assert!(matches!(
            compute_esf(&cloud, 2000, 0),
            Err(GeometryError::TooFewPoints { got: 9, .. })
        ));
    }

    #[test]
    fn sample_count_floor() {
        let cloud = random_box(100, [1.0, 1.0, 1.0], 1);
        assert!(matches!(
            compute_esf(&cloud, 999, 0),
            Err(GeometryError::InvalidSampleCount(999))
        ));
    }

    #[test]
    fn histograms_normalized() {
        let cloud = random_box(800, [1.0, 2.0, 0.5], 2);
        let esf = compute_esf(&cloud, 5000, 3).unwrap();
        for chunk in esf.values().chunks(ESF_BINS) {
            let total: f64 = chunk.iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
            assert!(chunk.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        // every triple contributes to the ratio histogram
        let ratio: f64 = esf.histogram(EsfHistogram::D2Ratio).iter().sum();
        assert!((ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn translation_and_scale_invariant() {
        let cloud = random_box(1000, [1.0, 1.0, 1.0], 4);
        let moved = cloud.map_points(|p| p + Vector3::new(5.0, 5.0, 5.0));
        let scaled = cloud.map_points(|p| Point::from(p.coords * 2.0));
        let base = compute_esf(&cloud, 4000, 9).unwrap();
        let a = compute_esf(&moved, 4000, 9).unwrap();
        let b = compute_esf(&scaled, 4000, 9).unwrap();
        assert!(base.l1_distance(&a) < 1e-9);
        assert!(base.l1_distance(&b) < 1e-9);
    }
}
