//! PCA alignment of candidate parts onto a prototype tool.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use super::{compute_intersections, GeometryError, Point, PointCloud};

/// Rotation followed by translation: `p' = R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Point) -> Point {
        Point::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        cloud.map_points(|p| self.apply(p))
    }

    /// Whether the rotation is orthonormal with determinant +1 within `tol`.
    pub fn is_proper(&self, tol: f64) -> bool {
        let r = &self.rotation;
        (r.transpose() * r - Matrix3::identity()).abs().max() <= tol
            && (r.determinant() - 1.0).abs() <= tol
    }
}

/// Which region of the reference tool a part is placed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartRole {
    /// The action end (head, blade, bowl).
    Action,
    /// The grasped end.
    Handle,
    /// The full reference.
    Whole,
}

/// Centroid and sign-normalized principal axes of a cloud.
#[derive(Debug, Clone, Copy)]
pub struct PcaFrame {
    pub centroid: Vector3<f64>,
    /// Columns are the principal axes, largest variance first; det = +1.
    pub axes: Matrix3<f64>,
    pub variances: Vector3<f64>,
    pub degenerate: bool,
}

impl PcaFrame {
    pub fn of_points(points: &[Point]) -> Option<Self> {
        if points.is_empty() {
            return None;
        }
        let n = points.len() as f64;
        let centroid = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
        let mut cov = Matrix3::zeros();
        for p in points {
            let d = p.coords - centroid;
            cov += d * d.transpose();
        }
        cov /= n;

        let eig = SymmetricEigen::new(cov);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let variances = Vector3::new(
            eig.eigenvalues[order[0]].max(0.0),
            eig.eigenvalues[order[1]].max(0.0),
            eig.eigenvalues[order[2]].max(0.0),
        );
        // Rank ≤ 1: collinear or coincident points.
        let degenerate = variances[0] <= f64::MIN_POSITIVE || variances[1] <= 1e-12 * variances[0];
        if degenerate {
            return Some(Self {
                centroid,
                axes: Matrix3::identity(),
                variances,
                degenerate,
            });
        }

        let mut first = eig.eigenvectors.column(order[0]).into_owned();
        let mut second = eig.eigenvectors.column(order[1]).into_owned();
        orient_axis(&mut first, points, &centroid, variances[0]);
        orient_axis(&mut second, points, &centroid, variances[1]);
        let third = first.cross(&second).normalize();
        Some(Self {
            centroid,
            axes: Matrix3::from_columns(&[first, second, third]),
            variances,
            degenerate,
        })
    }
}

/// Flips `axis` so the projected third moment is non-negative; a vanishing
/// moment makes the largest-magnitude component positive.
fn orient_axis(axis: &mut Vector3<f64>, points: &[Point], centroid: &Vector3<f64>, variance: f64) {
    let n = points.len() as f64;
    let third: f64 = points
        .iter()
        .map(|p| (p.coords - centroid).dot(axis).powi(3))
        .sum::<f64>()
        / n;
    let tol = 1e-9 * variance.powf(1.5);
    let flip = if third.abs() > tol {
        third < 0.0
    } else {
        let idx = axis.iamax();
        axis[idx] < 0.0
    };
    if flip {
        *axis = -*axis;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedPart {
    pub id: String,
    pub role: PartRole,
    pub cloud: PointCloud,
    pub transform: RigidTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedAssembly {
    pub parts: Vec<AlignedPart>,
    pub reference_tool_id: String,
    /// Target attachment locations, one per unordered part pair.
    pub intersections: Vec<Point>,
    /// Set when some part fell back to an identity rotation.
    pub degenerate: bool,
}

/// The action and handle halves of a reference, split at its centroid along
/// the first principal axis. The action half is the one whose points sit
/// farther from that axis on average; ties go to the positive half.
pub fn split_reference(reference: &PointCloud) -> Result<[Vec<Point>; 2], GeometryError> {
    let frame = PcaFrame::of_points(reference.points()).ok_or(GeometryError::EmptyCloud)?;
    let axis = frame.axes.column(0).into_owned();
    let (mut positive, mut negative) = (Vec::new(), Vec::new());
    for p in reference.points() {
        if (p.coords - frame.centroid).dot(&axis) >= 0.0 {
            positive.push(*p);
        } else {
            negative.push(*p);
        }
    }
    if positive.is_empty() || negative.is_empty() {
        return Ok([reference.points().to_vec(), reference.points().to_vec()]);
    }
    let spread = |half: &[Point]| {
        let c = half.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / half.len() as f64;
        half.iter()
            .map(|p| {
                let d = p.coords - c;
                (d - axis * d.dot(&axis)).norm()
            })
            .sum::<f64>()
            / half.len() as f64
    };
    let (sp, sn) = (spread(&positive), spread(&negative));
    let scale = frame.variances[0].sqrt().max(f64::MIN_POSITIVE);
    if sn > sp + 1e-9 * scale {
        Ok([negative, positive])
    } else {
        Ok([positive, negative])
    }
}

/// Rigidly places every part on the reference region named by its role.
pub fn pca_align(
    parts: &[PointCloud],
    reference: &PointCloud,
    roles: &[PartRole],
) -> Result<AlignedAssembly, GeometryError> {
    if parts.is_empty() {
        return Err(GeometryError::NoParts);
    }
    if parts.len() != roles.len() {
        return Err(GeometryError::RoleMismatch {
            parts: parts.len(),
            roles: roles.len(),
        });
    }
    if reference.is_empty() || parts.iter().any(PointCloud::is_empty) {
        return Err(GeometryError::EmptyCloud);
    }

    let needs_split = roles.iter().any(|r| *r != PartRole::Whole);
    let halves = if needs_split {
        Some(split_reference(reference)?)
    } else {
        None
    };
    let whole = PcaFrame::of_points(reference.points()).ok_or(GeometryError::EmptyCloud)?;
    let target_frame = |role: PartRole| -> PcaFrame {
        match (role, &halves) {
            (PartRole::Action, Some(h)) => PcaFrame::of_points(&h[0]).unwrap_or(whole),
            (PartRole::Handle, Some(h)) => PcaFrame::of_points(&h[1]).unwrap_or(whole),
            _ => whole,
        }
    };

    let mut degenerate = false;
    let mut aligned = Vec::with_capacity(parts.len());
    for (part, &role) in parts.iter().zip(roles) {
        let source = PcaFrame::of_points(part.points()).ok_or(GeometryError::EmptyCloud)?;
        let target = target_frame(role);
        let rotation = if source.degenerate || target.degenerate {
            degenerate = true;
            Matrix3::identity()
        } else {
            target.axes * source.axes.transpose()
        };
        let transform = RigidTransform {
            rotation,
            translation: target.centroid - rotation * source.centroid,
        };
        aligned.push(AlignedPart {
            id: part.id().to_owned(),
            role,
            cloud: transform.apply_cloud(part),
            transform,
        });
    }

    let intersections = if aligned.len() >= 2 {
        let clouds: Vec<&PointCloud> = aligned.iter().map(|p| &p.cloud).collect();
        compute_intersections(&clouds)?
    } else {
        Vec::new()
    };
    Ok(AlignedAssembly {
        parts: aligned,
        reference_tool_id: reference.id().to_owned(),
        intersections,
        degenerate,
    })
}

/// All transformed part clouds concatenated in part order.
pub fn merge_clouds(assembly: &AlignedAssembly) -> PointCloud {
    let id = assembly
        .parts
        .iter()
        .map(|p| p.id.as_str())
        .collect::<Vec<_>>()
        .join("+");
    super::concat_clouds(id, assembly.parts.iter().map(|p| &p.cloud))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn skewed_cloud(seed: u64) -> PointCloud {
        // an anisotropic box with an extra lump so every third moment is non-zero
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts: Vec<Point> = (0..600)
            .map(|_| {
                Point::new(
                    rng.random_range(-1.5..1.5),
                    rng.random_range(-0.6..0.6),
                    rng.random_range(-0.2..0.2),
                )
            })
            .collect();
        pts.extend((0..150).map(|_| {
            Point::new(
                rng.random_range(1.0..1.5),
                rng.random_range(0.2..0.6),
                rng.random_range(0.0..0.2),
            )
        }));
        PointCloud::new("skewed", pts).unwrap()
    }

    fn rms(a: &PointCloud, b: &PointCloud) -> f64 {
        let sum: f64 = a
            .points()
            .iter()
            .zip(b.points())
            .map(|(p, q)| (p - q).norm_squared())
            .sum();
        (sum / a.len() as f64).sqrt()
    }

    #[test]
    fn frame_is_proper_rotation() {
        let frame = PcaFrame::of_points(skewed_cloud(1).points()).unwrap();
        let t = RigidTransform {
            rotation: frame.axes,
            translation: Vector3::zeros(),
        };
        assert!(t.is_proper(1e-9));
        assert!(frame.variances[0] >= frame.variances[1]);
        assert!(frame.variances[1] >= frame.variances[2]);
    }

    #[test]
    fn identical_part_gets_identity() {
        let cloud = skewed_cloud(2);
        let asm = pca_align(&[cloud.clone()], &cloud, &[PartRole::Whole]).unwrap();
        let part = &asm.parts[0];
        assert!((part.transform.rotation - Matrix3::identity()).abs().max() < 1e-9);
        assert!(rms(&part.cloud, &cloud) < 1e-6);
        assert!(asm.intersections.is_empty());
        assert!(!asm.degenerate);
    }

    #[test]
    fn collinear_part_falls_back_to_identity() {
        let line = PointCloud::from_coords(
            "line",
            &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, 0.0, 0.0]],
        )
        .unwrap();
        let asm = pca_align(&[line], &skewed_cloud(3), &[PartRole::Whole]).unwrap();
        assert!(asm.degenerate);
        assert_eq!(asm.parts[0].transform.rotation, Matrix3::identity());
    }

    #[test]
    fn argument_errors() {
        let c = skewed_cloud(4);
        assert!(matches!(
            pca_align(&[], &c, &[]),
            Err(GeometryError::NoParts)
        ));
        assert!(matches!(
            pca_align(&[c.clone()], &c, &[PartRole::Action, PartRole::Handle]),
            Err(GeometryError::RoleMismatch { .. })
        ));
    }

    #[test]
    fn merge_keeps_every_point() {
        let a = skewed_cloud(5);
        let b = skewed_cloud(6).with_id("b");
        let asm = pca_align(
            &[a.clone(), b.clone()],
            &skewed_cloud(7),
            &[PartRole::Action, PartRole::Handle],
        )
        .unwrap();
        let merged = merge_clouds(&asm);
        assert_eq!(merged.len(), a.len() + b.len());
        assert_eq!(merged.id(), "skewed+b");
        assert_eq!(asm.intersections.len(), 1);
    }
}
