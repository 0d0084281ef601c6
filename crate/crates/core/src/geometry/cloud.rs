use std::fmt::Write as _;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

pub type Point = Point3<f64>;

/// Minimum number of points needed before a shape descriptor is computed.
pub const MIN_DESCRIPTOR_POINTS: usize = 10;

/// A labelled set of 3-D points in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    id: String,
    points: Vec<Point>,
}

impl PointCloud {
    pub fn new(id: impl Into<String>, points: Vec<Point>) -> Result<Self, GeometryError> {
        if let Some(index) = points
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(GeometryError::NonFiniteInput { index });
        }
        Ok(Self {
            id: id.into(),
            points,
        })
    }

    pub fn from_coords(id: impl Into<String>, coords: &[[f64; 3]]) -> Result<Self, GeometryError> {
        Self::new(id, coords.iter().map(|c| Point::new(c[0], c[1], c[2])).collect())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn centroid(&self) -> Option<Point> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self
            .points
            .iter()
            .fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point::from(sum / self.points.len() as f64))
    }

    /// Axis-aligned bounds as `(min, max)`.
    pub fn bounds(&self) -> Option<(Point, Point)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (
                Point::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z)),
                Point::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z)),
            )
        }))
    }

    /// Applies `f` to every point, keeping the id.
    pub fn map_points(&self, f: impl Fn(&Point) -> Point) -> Self {
        Self {
            id: self.id.clone(),
            points: self.points.iter().map(f).collect(),
        }
    }

    /// Parses the ASCII point format: three whitespace-separated reals per
    /// line, `#` comments and blank lines ignored.
    pub fn from_ascii(id: impl Into<String>, text: &str) -> Result<Self, GeometryError> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let mut coord = [0.0; 3];
            for slot in coord.iter_mut() {
                let field = fields.next().ok_or(GeometryError::Parse {
                    line: lineno + 1,
                    reason: "expected three coordinates".into(),
                })?;
                *slot = field.parse().map_err(|_| GeometryError::Parse {
                    line: lineno + 1,
                    reason: format!("invalid number {field:?}"),
                })?;
            }
            if fields.next().is_some() {
                return Err(GeometryError::Parse {
                    line: lineno + 1,
                    reason: "more than three fields".into(),
                });
            }
            points.push(Point::new(coord[0], coord[1], coord[2]));
        }
        Self::new(id, points)
    }

    /// Shortest round-trip decimal encoding, so `from_ascii(to_ascii())` is exact.
    pub fn to_ascii(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 48);
        let _ = writeln!(out, "# {}", self.id);
        for p in &self.points {
            let _ = writeln!(out, "{:?} {:?} {:?}", p.x, p.y, p.z);
        }
        out
    }
}

/// Concatenates clouds under a new id.
pub fn concat_clouds<'a>(
    id: impl Into<String>,
    clouds: impl IntoIterator<Item = &'a PointCloud>,
) -> PointCloud {
    let mut points = Vec::new();
    for cloud in clouds {
        points.extend_from_slice(cloud.points());
    }
    PointCloud {
        id: id.into(),
        points,
    }
}
