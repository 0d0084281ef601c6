//! Surface samplers for the primitives that synthetic objects are built from.

use std::f64::consts::{PI, TAU};

use nalgebra::{Rotation3, Unit, Vector3};
use rand::Rng;

use crate::geometry::Point;

/// A primitive in its local frame. Axis-symmetric shapes run along local z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    /// Box centered at the origin with the given half extents.
    Cuboid { half: Vector3<f64> },
    /// Closed cylinder spanning `z ∈ [-length/2, length/2]`.
    Cylinder { radius: f64, length: f64 },
    /// Cone frustum from `bottom` radius at `-length/2` to `top` at `+length/2`.
    Frustum { bottom: f64, top: f64, length: f64 },
    /// Hemispherical shell opening toward +z, rim at z = 0.
    Bowl { radius: f64, thickness: f64 },
    Ellipsoid { radii: Vector3<f64> },
    /// Torus around local z.
    Torus { major: f64, minor: f64 },
    /// Blade: triangular section in x–y (spine of `thickness` at
    /// `y = width/2`, edge at `y = -width/2`), extruded along z.
    Wedge { length: f64, width: f64, thickness: f64 },
}

impl Primitive {
    pub fn area(&self) -> f64 {
        match *self {
            Primitive::Cuboid { half } => {
                8.0 * (half.x * half.y + half.y * half.z + half.x * half.z)
            }
            Primitive::Cylinder { radius, length } => TAU * radius * (length + radius),
            Primitive::Frustum { bottom, top, length } => {
                let slant = (length * length + (bottom - top).powi(2)).sqrt();
                PI * (bottom + top) * slant + PI * (bottom * bottom + top * top)
            }
            Primitive::Bowl { radius, thickness } => {
                let inner = (radius - thickness).max(0.0);
                TAU * (radius * radius + inner * inner) + PI * (radius * radius - inner * inner)
            }
            Primitive::Ellipsoid { radii } => {
                // Knud Thomsen's approximation
                let p = 1.6075;
                let (a, b, c) = (radii.x.powf(p), radii.y.powf(p), radii.z.powf(p));
                4.0 * PI * ((a * b + a * c + b * c) / 3.0).powf(1.0 / p)
            }
            Primitive::Torus { major, minor } => 4.0 * PI * PI * major * minor,
            Primitive::Wedge {
                length,
                width,
                thickness,
            } => {
                let side = (width * width + thickness * thickness / 4.0).sqrt();
                length * (2.0 * side + thickness) + width * thickness
            }
        }
    }

    /// `n` points distributed uniformly (by area) over the surface.
    pub fn sample(&self, rng: &mut impl Rng, n: usize) -> Vec<Point> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    fn sample_one(&self, rng: &mut impl Rng) -> Point {
        match *self {
            Primitive::Cuboid { half } => {
                let faces = [
                    half.y * half.z,
                    half.y * half.z,
                    half.x * half.z,
                    half.x * half.z,
                    half.x * half.y,
                    half.x * half.y,
                ];
                let f = pick_weighted(rng, &faces);
                let u = rng.random_range(-1.0..=1.0);
                let v = rng.random_range(-1.0..=1.0);
                let s = if f % 2 == 0 { 1.0 } else { -1.0 };
                match f / 2 {
                    0 => Point::new(s * half.x, u * half.y, v * half.z),
                    1 => Point::new(u * half.x, s * half.y, v * half.z),
                    _ => Point::new(u * half.x, v * half.y, s * half.z),
                }
            }
            Primitive::Cylinder { radius, length } => {
                let parts = [TAU * radius * length, PI * radius * radius, PI * radius * radius];
                let t = rng.random_range(0.0..TAU);
                match pick_weighted(rng, &parts) {
                    0 => Point::new(
                        radius * t.cos(),
                        radius * t.sin(),
                        rng.random_range(-length / 2.0..=length / 2.0),
                    ),
                    k => {
                        let r = radius * rng.random::<f64>().sqrt();
                        let z = if k == 1 { length / 2.0 } else { -length / 2.0 };
                        Point::new(r * t.cos(), r * t.sin(), z)
                    }
                }
            }
            Primitive::Frustum {
                bottom,
                top,
                length,
            } => {
                let slant = (length * length + (bottom - top).powi(2)).sqrt();
                let parts = [PI * (bottom + top) * slant, PI * bottom * bottom, PI * top * top];
                let t = rng.random_range(0.0..TAU);
                match pick_weighted(rng, &parts) {
                    0 => {
                        // radius varies linearly; area density ∝ radius
                        let s = sample_linear_density(rng, bottom, top);
                        let r = bottom + (top - bottom) * s;
                        Point::new(r * t.cos(), r * t.sin(), -length / 2.0 + s * length)
                    }
                    k => {
                        let (r, z) = if k == 1 {
                            (bottom, -length / 2.0)
                        } else {
                            (top, length / 2.0)
                        };
                        let r = r * rng.random::<f64>().sqrt();
                        Point::new(r * t.cos(), r * t.sin(), z)
                    }
                }
            }
            Primitive::Bowl { radius, thickness } => {
                let inner = (radius - thickness).max(0.0);
                let parts = [
                    TAU * radius * radius,
                    TAU * inner * inner,
                    PI * (radius * radius - inner * inner),
                ];
                match pick_weighted(rng, &parts) {
                    k @ (0 | 1) => {
                        let r = if k == 0 { radius } else { inner };
                        let mut d = unit_vector(rng);
                        d.z = -d.z.abs();
                        Point::from(d * r)
                    }
                    _ => {
                        let t = rng.random_range(0.0..TAU);
                        let r = (inner * inner
                            + rng.random::<f64>() * (radius * radius - inner * inner))
                            .sqrt();
                        Point::new(r * t.cos(), r * t.sin(), 0.0)
                    }
                }
            }
            Primitive::Ellipsoid { radii } => {
                // Rejection on the area element keeps the density uniform.
                loop {
                    let d = unit_vector(rng);
                    let p = d.component_mul(&radii);
                    let g = d.component_div(&radii);
                    if rng.random::<f64>() <= g.norm() * radii.min() {
                        return Point::from(p);
                    }
                }
            }
            Primitive::Torus { major, minor } => loop {
                let u = rng.random_range(0.0..TAU);
                let v = rng.random_range(0.0..TAU);
                let w = (major + minor * v.cos()) / (major + minor);
                if rng.random::<f64>() <= w {
                    let r = major + minor * v.cos();
                    return Point::new(r * u.cos(), r * u.sin(), minor * v.sin());
                }
            },
            Primitive::Wedge {
                length,
                width,
                thickness,
            } => {
                let side = (width * width + thickness * thickness / 4.0).sqrt();
                let parts = [
                    length * side,
                    length * side,
                    length * thickness,
                    width * thickness / 2.0,
                    width * thickness / 2.0,
                ];
                let z = rng.random_range(-length / 2.0..=length / 2.0);
                let spine = width / 2.0;
                match pick_weighted(rng, &parts) {
                    k @ (0 | 1) => {
                        let s = rng.random::<f64>();
                        let sign = if k == 0 { 1.0 } else { -1.0 };
                        Point::new(sign * thickness / 2.0 * (1.0 - s), spine - s * width, z)
                    }
                    2 => Point::new(
                        rng.random_range(-thickness / 2.0..=thickness / 2.0),
                        spine,
                        z,
                    ),
                    k => {
                        // uniform point in the triangular end cap
                        let (mut a, mut b) = (rng.random::<f64>(), rng.random::<f64>());
                        if a + b > 1.0 {
                            a = 1.0 - a;
                            b = 1.0 - b;
                        }
                        let p0 = (-thickness / 2.0, spine);
                        let p1 = (thickness / 2.0, spine);
                        let p2 = (0.0, -spine);
                        let x = p0.0 + a * (p1.0 - p0.0) + b * (p2.0 - p0.0);
                        let y = p0.1 + a * (p1.1 - p0.1) + b * (p2.1 - p0.1);
                        let zc = if k == 3 { length / 2.0 } else { -length / 2.0 };
                        Point::new(x, y, zc)
                    }
                }
            }
        }
    }
}

fn unit_vector(rng: &mut impl Rng) -> Vector3<f64> {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let t = rng.random_range(0.0..TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vector3::new(r * t.cos(), r * t.sin(), z)
}

/// `s ∈ [0,1]` with density proportional to `a + (b − a) s`.
fn sample_linear_density(rng: &mut impl Rng, a: f64, b: f64) -> f64 {
    let u: f64 = rng.random();
    if (b - a).abs() < 1e-12 * (a + b).max(1e-300) {
        return u;
    }
    // inverse CDF of the normalized linear density
    let (a2, b2) = (a * a, b * b);
    ((a2 + u * (b2 - a2)).sqrt() - a) / (b - a)
}

fn pick_weighted(rng: &mut impl Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

/// A primitive with a rigid placement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placed {
    pub primitive: Primitive,
    pub rotation: Rotation3<f64>,
    pub offset: Vector3<f64>,
}

impl Placed {
    pub fn at(primitive: Primitive, offset: Vector3<f64>) -> Self {
        Self {
            primitive,
            rotation: Rotation3::identity(),
            offset,
        }
    }

    /// Rotated by `angle` about `axis` (applied before the offset).
    pub fn rotated(mut self, axis: Vector3<f64>, angle: f64) -> Self {
        self.rotation = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle) * self.rotation;
        self
    }
}

/// Samples `n` points over several placed primitives, split by surface area.
pub fn sample_composite(parts: &[Placed], n: usize, rng: &mut impl Rng) -> Vec<Point> {
    let areas: Vec<f64> = parts.iter().map(|p| p.primitive.area()).collect();
    let total: f64 = areas.iter().sum();
    let mut counts: Vec<usize> = areas
        .iter()
        .map(|a| ((a / total) * n as f64).floor() as usize)
        .collect();
    // hand the rounding remainder to the largest parts
    let mut order: Vec<usize> = (0..parts.len()).collect();
    order.sort_by(|&a, &b| areas[b].total_cmp(&areas[a]));
    let mut missing = n - counts.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if missing == 0 {
            break;
        }
        counts[i] += 1;
        missing -= 1;
    }
    let mut out = Vec::with_capacity(n);
    for (p, &c) in parts.iter().zip(&counts) {
        for q in p.primitive.sample(rng, c) {
            out.push(Point::from(p.rotation * q.coords + p.offset));
        }
    }
    out
}
