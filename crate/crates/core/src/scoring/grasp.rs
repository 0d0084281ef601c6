//! Geometry-only antipodal grasp sampling for two-finger grippers.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Point, PointCloud, MIN_DESCRIPTOR_POINTS};

/// Neighbours used for normal estimation.
pub const NORMAL_NEIGHBOURS: usize = 10;
/// Surface normals must lie within this angle of the closing direction.
pub const ANTIPODAL_HALF_ANGLE_DEG: f64 = 30.0;
const MAX_POINTS: usize = 1_500;
const MAX_ANCHORS: usize = 400;

/// Unoriented normals from the smallest principal direction of each point's
/// `k` nearest neighbours.
pub fn estimate_normals(points: &[Point], k: usize) -> Vec<Vector3<f64>> {
    let k = k.min(points.len().saturating_sub(1)).max(1);
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(points.len());
    points
        .iter()
        .map(|p| {
            dists.clear();
            dists.extend(points.iter().enumerate().map(|(j, q)| ((p - q).norm_squared(), j)));
            let nth = k.min(dists.len() - 1);
            dists.select_nth_unstable_by(nth, |a, b| a.0.total_cmp(&b.0));
            let hood = &dists[..=nth];
            let c = hood.iter().fold(Vector3::zeros(), |acc, &(_, j)| acc + points[j].coords)
                / hood.len() as f64;
            let mut cov = Matrix3::zeros();
            for &(_, j) in hood {
                let d = points[j].coords - c;
                cov += d * d.transpose();
            }
            let eig = SymmetricEigen::new(cov);
            let (imin, _) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("3 eigenvalues");
            eig.eigenvectors.column(imin).normalize()
        })
        .collect()
}

/// Centroids of clustered antipodal grasp midpoints that fit in a gripper of
/// `gripper_width`. Empty when nothing fits.
pub fn grasp_sample(cloud: &PointCloud, gripper_width: f64, seed: u64) -> Vec<Point> {
    if cloud.len() < MIN_DESCRIPTOR_POINTS || gripper_width <= 0.0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Point> = if cloud.len() > MAX_POINTS {
        let mut idx = sample(&mut rng, cloud.len(), MAX_POINTS).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| cloud.points()[i]).collect()
    } else {
        cloud.points().to_vec()
    };
    let normals = estimate_normals(&points, NORMAL_NEIGHBOURS);
    let anchors: Vec<usize> = if points.len() > MAX_ANCHORS {
        sample(&mut rng, points.len(), MAX_ANCHORS).into_vec()
    } else {
        (0..points.len()).collect()
    };

    let cos_limit = ANTIPODAL_HALF_ANGLE_DEG.to_radians().cos();
    let mut midpoints = Vec::new();
    for &i in &anchors {
        for j in 0..points.len() {
            if j == i {
                continue;
            }
            let v = points[j] - points[i];
            let d = v.norm();
            if d == 0.0 || d > gripper_width {
                continue;
            }
            let u = v / d;
            if normals[i].dot(&u).abs() >= cos_limit && normals[j].dot(&u).abs() >= cos_limit {
                midpoints.push(nalgebra::center(&points[i], &points[j]));
            }
        }
    }
    leader_clusters(&midpoints, gripper_width / 2.0)
}

/// Greedy clustering: each point joins the first cluster whose leader is
/// within `radius`, else starts a new one. Returns member centroids.
pub fn leader_clusters(points: &[Point], radius: f64) -> Vec<Point> {
    let mut leaders: Vec<Point> = Vec::new();
    let mut sums: Vec<(Vector3<f64>, usize)> = Vec::new();
    for p in points {
        match leaders.iter().position(|l| (l - p).norm() <= radius) {
            Some(c) => {
                sums[c].0 += p.coords;
                sums[c].1 += 1;
            }
            None => {
                leaders.push(*p);
                sums.push((p.coords, 1));
            }
        }
    }
    sums.into_iter()
        .map(|(s, n)| Point::from(s / n as f64))
        .collect()
}
