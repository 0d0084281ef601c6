use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GeometryError, Point, PointCloud};

/// Above this many points a cloud is uniformly subsampled before the
/// exhaustive closest-pair search.
pub const CLOSEST_PAIR_LIMIT: usize = 2_000;
const SUBSAMPLE_SEED: u64 = 0x1c7e_55ec;

/// Exhaustive closest pair; the first minimum in `(i, j)` order wins ties.
pub fn closest_pair(a: &[Point], b: &[Point]) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            let d = (p - q).norm_squared();
            if best.is_none_or(|(_, _, bd)| d < bd) {
                best = Some((i, j, d));
            }
        }
    }
    best.map(|(i, j, d)| (i, j, d.sqrt()))
}

fn bounded(cloud: &PointCloud) -> Vec<Point> {
    if cloud.len() <= CLOSEST_PAIR_LIMIT {
        return cloud.points().to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SUBSAMPLE_SEED);
    let mut picked = sample(&mut rng, cloud.len(), CLOSEST_PAIR_LIMIT).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| cloud.points()[i]).collect()
}

/// Midpoint of the closest point pair for every unordered pair of parts,
/// in `(0,1), (0,2), …, (1,2), …` order.
pub fn compute_intersections(parts: &[&PointCloud]) -> Result<Vec<Point>, GeometryError> {
    if parts.len() < 2 {
        return Err(GeometryError::NoParts);
    }
    if parts.iter().any(|c| c.is_empty()) {
        return Err(GeometryError::EmptyCloud);
    }
    let sampled: Vec<Vec<Point>> = parts.iter().map(|c| bounded(c)).collect();
    let mut out = Vec::with_capacity(parts.len() * (parts.len() - 1) / 2);
    for i in 0..sampled.len() {
        for j in i + 1..sampled.len() {
            let (a, b, _) = closest_pair(&sampled[i], &sampled[j]).expect("non-empty clouds");
            out.push(nalgebra::center(&sampled[i][a], &sampled[j][b]));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points() {
        let a = PointCloud::from_coords("a", &[[0.0, 0.0, 0.0]]).unwrap();
        let b = PointCloud::from_coords("b", &[[1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(
            compute_intersections(&[&a, &b]).unwrap(),
            vec![Point::new(0.5, 0.0, 0.0)]
        );
    }

    #[test]
    fn identical_points() {
        let a = PointCloud::from_coords("a", &[[2.0, 3.0, 4.0]]).unwrap();
        assert_eq!(
            compute_intersections(&[&a, &a.clone()]).unwrap(),
            vec![Point::new(2.0, 3.0, 4.0)]
        );
    }

    #[test]
    fn three_parts_give_three_pairs() {
        let a = PointCloud::from_coords("a", &[[0.0, 0.0, 0.0]]).unwrap();
        let b = PointCloud::from_coords("b", &[[2.0, 0.0, 0.0]]).unwrap();
        let c = PointCloud::from_coords("c", &[[0.0, 4.0, 0.0]]).unwrap();
        let p = compute_intersections(&[&a, &b, &c]).unwrap();
        assert_eq!(
            p,
            vec![
                Point::new(1.0, 0.0, 0.0),
                Point::new(0.0, 2.0, 0.0),
                Point::new(1.0, 2.0, 0.0)
            ]
        );
    }

    #[test]
    fn preconditions() {
        let a = PointCloud::from_coords("a", &[[0.0, 0.0, 0.0]]).unwrap();
        let empty = PointCloud::new("e", vec![]).unwrap();
        assert!(compute_intersections(&[&a]).is_err());
        assert!(matches!(
            compute_intersections(&[&a, &empty]),
            Err(GeometryError::EmptyCloud)
        ));
    }
}
