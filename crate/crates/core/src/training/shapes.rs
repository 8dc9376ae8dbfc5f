//! Synthetic solids standing in for a real shape corpus.
//!
//! Each shape is one or two analytic primitives with a rigid pose that keeps
//! it inside `[-0.95, 0.95]^3`. Surface samples are uniform by area and the
//! observation is a binary orthographic silhouette seen along `-z`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

type Vec3 = [f64; 3];
type Mat3 = [[f64; 3]; 3];

const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
const WORLD_LIMIT: f64 = 0.95;

fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn mat_t_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Mat3 {
    let mut q = [0.0f64; 4];
    let n = loop {
        for v in q.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-9 {
            break n;
        }
    };
    let [w, x, y, z] = q.map(|v| v / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Ellipsoid {
        axes: Vec3,
    },
    Box {
        half: Vec3,
    },
    /// Axis along local `z`.
    Cylinder {
        radius: f64,
        half_height: f64,
    },
}

impl Primitive {
    /// Largest distance from the local origin to the surface.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Primitive::Ellipsoid { axes } => axes.iter().copied().fold(0.0, f64::max),
            Primitive::Box { half } => half.iter().map(|h| h * h).sum::<f64>().sqrt(),
            Primitive::Cylinder { radius, half_height } => radius.hypot(half_height),
        }
    }

    fn scaled(&self, s: f64) -> Primitive {
        match *self {
            Primitive::Ellipsoid { axes } => Primitive::Ellipsoid { axes: axes.map(|a| a * s) },
            Primitive::Box { half } => Primitive::Box { half: half.map(|h| h * s) },
            Primitive::Cylinder { radius, half_height } => {
                Primitive::Cylinder { radius: radius * s, half_height: half_height * s }
            }
        }
    }

    pub fn surface_area(&self) -> f64 {
        match *self {
            Primitive::Ellipsoid { axes: [a, b, c] } => {
                // area = ∫ over the unit sphere of the local area stretch
                // dΩ = dz dφ on the unit sphere
                let (nz, np) = (400, 400);
                let mut s = 0.0;
                for i in 0..nz {
                    let z = -1.0 + (i as f64 + 0.5) * 2.0 / nz as f64;
                    let rho = (1.0 - z * z).sqrt();
                    for j in 0..np {
                        let ph = (j as f64 + 0.5) * 2.0 * PI / np as f64;
                        s += ellipsoid_stretch([a, b, c], [rho * ph.cos(), rho * ph.sin(), z]);
                    }
                }
                s * (2.0 / nz as f64) * (2.0 * PI / np as f64)
            }
            Primitive::Box { half: [x, y, z] } => 8.0 * (x * y + y * z + x * z),
            Primitive::Cylinder { radius, half_height } => {
                2.0 * PI * radius * 2.0 * half_height + 2.0 * PI * radius * radius
            }
        }
    }

    /// Strict interior test in the local frame.
    pub fn contains_strict(&self, p: Vec3) -> bool {
        match *self {
            Primitive::Ellipsoid { axes } => (0..3).map(|i| (p[i] / axes[i]).powi(2)).sum::<f64>() < 1.0 - 1e-12,
            Primitive::Box { half } => (0..3).all(|i| p[i].abs() < half[i] * (1.0 - 1e-12)),
            Primitive::Cylinder { radius, half_height } => {
                p[0] * p[0] + p[1] * p[1] < radius * radius * (1.0 - 1e-12) && p[2].abs() < half_height * (1.0 - 1e-12)
            }
        }
    }

    /// Zero on the surface (local frame), scaled to be dimensionless.
    pub fn surface_residual(&self, p: Vec3) -> f64 {
        match *self {
            Primitive::Ellipsoid { axes } => (0..3).map(|i| (p[i] / axes[i]).powi(2)).sum::<f64>() - 1.0,
            Primitive::Box { half } => (0..3).map(|i| p[i].abs() / half[i]).fold(0.0, f64::max) - 1.0,
            Primitive::Cylinder { radius, half_height } => {
                let radial = (p[0] * p[0] + p[1] * p[1]).sqrt() / radius;
                radial.max(p[2].abs() / half_height) - 1.0
            }
        }
    }

    /// Uniform-by-area surface point in the local frame.
    pub fn sample_surface<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        match *self {
            Primitive::Ellipsoid { axes } => {
                // map a sphere point and accept with probability ∝ local stretch
                let [a, b, c] = axes;
                let max = (b * c).max(a * c).max(a * b);
                loop {
                    let u = unit_vector(rng);
                    if rng.random::<f64>() * max <= ellipsoid_stretch(axes, u) {
                        return [a * u[0], b * u[1], c * u[2]];
                    }
                }
            }
            Primitive::Box { half: [x, y, z] } => {
                let areas = [y * z, x * z, x * y];
                let total: f64 = areas.iter().sum();
                let mut r = rng.random::<f64>() * total;
                let mut axis = 2;
                for (i, a) in areas.iter().enumerate() {
                    if r < *a {
                        axis = i;
                        break;
                    }
                    r -= a;
                }
                let half = [x, y, z];
                let mut p = [0.0; 3];
                for (i, v) in p.iter_mut().enumerate() {
                    *v = rng.random_range(-half[i]..half[i]);
                }
                p[axis] = if rng.random::<bool>() { half[axis] } else { -half[axis] };
                p
            }
            Primitive::Cylinder { radius, half_height } => {
                let side = 2.0 * PI * radius * 2.0 * half_height;
                let cap = PI * radius * radius;
                let r = rng.random::<f64>() * (side + 2.0 * cap);
                if r < side {
                    let ang = rng.random_range(0.0..2.0 * PI);
                    [radius * ang.cos(), radius * ang.sin(), rng.random_range(-half_height..half_height)]
                } else {
                    let rho = radius * rng.random::<f64>().sqrt();
                    let ang = rng.random_range(0.0..2.0 * PI);
                    let z = if r < side + cap { half_height } else { -half_height };
                    [rho * ang.cos(), rho * ang.sin(), z]
                }
            }
        }
    }

    /// Whether the line `p + t d` (local frame) meets the solid.
    fn line_hits(&self, p: Vec3, d: Vec3) -> bool {
        match *self {
            Primitive::Ellipsoid { axes } => {
                let ps = [p[0] / axes[0], p[1] / axes[1], p[2] / axes[2]];
                let ds = [d[0] / axes[0], d[1] / axes[1], d[2] / axes[2]];
                let a: f64 = ds.iter().map(|v| v * v).sum();
                let b: f64 = 2.0 * (0..3).map(|i| ps[i] * ds[i]).sum::<f64>();
                let c: f64 = ps.iter().map(|v| v * v).sum::<f64>() - 1.0;
                b * b - 4.0 * a * c >= 0.0
            }
            Primitive::Box { half } => {
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                for i in 0..3 {
                    if !slab(p[i], d[i], -half[i], half[i], &mut lo, &mut hi) {
                        return false;
                    }
                }
                lo <= hi
            }
            Primitive::Cylinder { radius, half_height } => {
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                if !slab(p[2], d[2], -half_height, half_height, &mut lo, &mut hi) {
                    return false;
                }
                let a = d[0] * d[0] + d[1] * d[1];
                let c = p[0] * p[0] + p[1] * p[1] - radius * radius;
                if a < 1e-15 {
                    return c <= 0.0 && lo <= hi;
                }
                let b = 2.0 * (p[0] * d[0] + p[1] * d[1]);
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    return false;
                }
                let s = disc.sqrt();
                let (t0, t1) = ((-b - s) / (2.0 * a), (-b + s) / (2.0 * a));
                lo.max(t0) <= hi.min(t1)
            }
        }
    }
}

fn slab(p: f64, d: f64, lo_b: f64, hi_b: f64, lo: &mut f64, hi: &mut f64) -> bool {
    if d.abs() < 1e-15 {
        return (lo_b..=hi_b).contains(&p);
    }
    let (t0, t1) = ((lo_b - p) / d, (hi_b - p) / d);
    *lo = lo.max(t0.min(t1));
    *hi = hi.min(t0.max(t1));
    true
}

fn ellipsoid_stretch([a, b, c]: Vec3, u: Vec3) -> f64 {
    ((b * c * u[0]).powi(2) + (a * c * u[1]).powi(2) + (a * b * u[2]).powi(2)).sqrt()
}

fn unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v: Vec3 = [StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-12 {
            return v.map(|x| x / n);
        }
    }
}

/// A primitive placed in the world by `world = rotation * local + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosedPrimitive {
    pub primitive: Primitive,
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl PosedPrimitive {
    pub fn identity(primitive: Primitive) -> Self {
        PosedPrimitive { primitive, rotation: IDENTITY, translation: [0.0; 3] }
    }

    pub fn to_world(&self, p: Vec3) -> Vec3 {
        let r = mat_vec(&self.rotation, p);
        [r[0] + self.translation[0], r[1] + self.translation[1], r[2] + self.translation[2]]
    }

    pub fn to_local(&self, p: Vec3) -> Vec3 {
        mat_t_vec(&self.rotation, [p[0] - self.translation[0], p[1] - self.translation[1], p[2] - self.translation[2]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Ellipsoid,
    Box,
    Cylinder,
    TwoPrimitiveUnion,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] =
        [ShapeKind::Ellipsoid, ShapeKind::Box, ShapeKind::Cylinder, ShapeKind::TwoPrimitiveUnion];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Ellipsoid => "ellipsoid",
            ShapeKind::Box => "box",
            ShapeKind::Cylinder => "cylinder",
            ShapeKind::TwoPrimitiveUnion => "two_primitive_union",
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ShapeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown shape kind {s:?}")))
    }
}

/// A posed synthetic solid.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthShape {
    pub kind: ShapeKind,
    pub parts: Vec<PosedPrimitive>,
    pub seed: u64,
}

fn random_primitive<R: Rng + ?Sized>(rng: &mut R, which: usize) -> Primitive {
    match which {
        0 => Primitive::Ellipsoid {
            axes: [rng.random_range(0.25..0.7), rng.random_range(0.25..0.7), rng.random_range(0.25..0.7)],
        },
        1 => Primitive::Box {
            half: [rng.random_range(0.2..0.55), rng.random_range(0.2..0.55), rng.random_range(0.2..0.55)],
        },
        _ => Primitive::Cylinder { radius: rng.random_range(0.2..0.5), half_height: rng.random_range(0.25..0.7) },
    }
}

fn fit(p: Primitive, max_radius: f64) -> Primitive {
    let r = p.bounding_radius();
    if r > max_radius {
        p.scaled(max_radius / r)
    } else {
        p
    }
}

impl SynthShape {
    /// A single primitive at the origin with no rotation.
    pub fn unposed(primitive: Primitive) -> Self {
        let kind = match primitive {
            Primitive::Ellipsoid { .. } => ShapeKind::Ellipsoid,
            Primitive::Box { .. } => ShapeKind::Box,
            Primitive::Cylinder { .. } => ShapeKind::Cylinder,
        };
        SynthShape { kind, parts: vec![PosedPrimitive::identity(primitive)], seed: 0 }
    }

    /// Random shape of `kind`, deterministic in `seed`.
    pub fn random(kind: ShapeKind, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let parts = match kind {
            ShapeKind::TwoPrimitiveUnion => {
                let u = unit_vector(&mut rng);
                let sep = rng.random_range(0.15..0.3);
                let mut parts = Vec::with_capacity(2);
                let mut extent: f64 = 0.0;
                for sign in [-1.0, 1.0] {
                    let which = rng.random_range(0..3usize);
                    let prim = fit(random_primitive(&mut rng, which), 0.45);
                    let rotation = random_rotation(&mut rng);
                    let translation = u.map(|c| c * sign * sep);
                    extent = extent.max(sep + prim.bounding_radius());
                    parts.push(PosedPrimitive { primitive: prim, rotation, translation });
                }
                let global = random_rotation(&mut rng);
                let room = WORLD_LIMIT - extent;
                let shift: Vec3 = std::array::from_fn(|_| rng.random_range(-room..room));
                for p in parts.iter_mut() {
                    p.rotation = mat_mul(&global, &p.rotation);
                    let t = mat_vec(&global, p.translation);
                    p.translation = [t[0] + shift[0], t[1] + shift[1], t[2] + shift[2]];
                }
                parts
            }
            _ => {
                let which = match kind {
                    ShapeKind::Ellipsoid => 0,
                    ShapeKind::Box => 1,
                    _ => 2,
                };
                let prim = fit(random_primitive(&mut rng, which), 0.8);
                let rotation = random_rotation(&mut rng);
                let room = WORLD_LIMIT - prim.bounding_radius();
                let translation: Vec3 = std::array::from_fn(|_| rng.random_range(-room..room));
                vec![PosedPrimitive { primitive: prim, rotation, translation }]
            }
        };
        SynthShape { kind, parts, seed }
    }

    fn inside_other(&self, part: usize, world: Vec3) -> bool {
        self.parts.iter().enumerate().any(|(j, p)| j != part && p.primitive.contains_strict(p.to_local(world)))
    }

    /// `count` points uniform over the surface of the union of parts.
    pub fn sample_surface<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> PointCloud {
        let areas: Vec<f64> = self.parts.iter().map(|p| p.primitive.surface_area()).collect();
        let total: f64 = areas.iter().sum();
        let mut coords = Vec::with_capacity(count * 3);
        while coords.len() < count * 3 {
            let mut r = rng.random::<f64>() * total;
            let mut part = self.parts.len() - 1;
            for (i, a) in areas.iter().enumerate() {
                if r < *a {
                    part = i;
                    break;
                }
                r -= a;
            }
            let posed = &self.parts[part];
            let w = posed.to_world(posed.primitive.sample_surface(rng));
            if self.inside_other(part, w) {
                continue;
            }
            coords.extend_from_slice(&w);
        }
        PointCloud::new(3, coords).expect("finite surface points")
    }

    /// Binary `side x side` silhouette, row-major with row 0 at `y = +1`,
    /// projected orthographically along `z`.
    pub fn silhouette(&self, side: usize) -> Vec<f64> {
        let step = 2.0 / side as f64;
        let mut out = vec![0.0; side * side];
        for r in 0..side {
            let y = 1.0 - (r as f64 + 0.5) * step;
            for c in 0..side {
                let x = -1.0 + (c as f64 + 0.5) * step;
                let hit = self.parts.iter().any(|p| {
                    let o = p.to_local([x, y, 0.0]);
                    let d = mat_t_vec(&p.rotation, [0.0, 0.0, 1.0]);
                    p.primitive.line_hits(o, d)
                });
                if hit {
                    out[r * side + c] = 1.0;
                }
            }
        }
        out
    }

    pub fn describe(&self) -> String {
        format!("{} seed={}", self.kind, self.seed)
    }
}

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(42)
    }

    #[test]
    fn sphere_points_at_radius() {
        let s = SynthShape::unposed(Primitive::Ellipsoid { axes: [0.5; 3] });
        let c = s.sample_surface(&mut rng(), 2000);
        for p in c.iter() {
            let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((n - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn unposed_samples_lie_on_surface() {
        for prim in [
            Primitive::Ellipsoid { axes: [0.3, 0.5, 0.7] },
            Primitive::Box { half: [0.2, 0.4, 0.5] },
            Primitive::Cylinder { radius: 0.3, half_height: 0.6 },
        ] {
            let mut r = rng();
            for _ in 0..2000 {
                let p = prim.sample_surface(&mut r);
                assert!(prim.surface_residual(p).abs() < 1e-9, "{prim:?} {p:?}");
            }
        }
    }

    #[test]
    fn ellipsoid_area_quadrature() {
        let sphere = Primitive::Ellipsoid { axes: [0.5; 3] };
        assert!((sphere.surface_area() - 4.0 * PI * 0.25).abs() < 1e-9);
        // prolate spheroid, closed form
        let (a, c) = (0.3f64, 0.6f64);
        let e = (1.0 - a * a / (c * c)).sqrt();
        let exact = 2.0 * PI * a * a * (1.0 + c / (a * e) * e.asin());
        let got = Primitive::Ellipsoid { axes: [a, a, c] }.surface_area();
        assert!((got - exact).abs() / exact < 1e-5, "{got} vs {exact}");
    }

    #[test]
    fn posed_shapes_stay_in_world_box() {
        for seed in 0..40 {
            for kind in ShapeKind::ALL {
                let s = SynthShape::random(kind, seed);
                let c = s.sample_surface(&mut rng(), 300);
                assert!(c.coords().iter().all(|v| v.abs() <= WORLD_LIMIT + 1e-12), "{kind} {seed}");
            }
        }
    }

    #[test]
    fn union_samples_avoid_interiors() {
        let s = SynthShape::random(ShapeKind::TwoPrimitiveUnion, 3);
        let c = s.sample_surface(&mut rng(), 1000);
        for p in c.iter() {
            let w = [p[0], p[1], p[2]];
            assert!(s.parts.iter().all(|q| !q.primitive.contains_strict(q.to_local(w))));
        }
    }

    #[test]
    fn box_silhouette_area() {
        // projected square of side 0.6 covers 0.6/0.0625 = 9.6 pixels per side
        let s = SynthShape::unposed(Primitive::Box { half: [0.3; 3] });
        let img = s.silhouette(32);
        let on = img.iter().filter(|&&v| v == 1.0).count() as f64;
        let expect = 0.09 * 1024.0;
        assert!(on >= (9.6f64 - 2.0).powi(2) && on <= (9.6f64 + 2.0).powi(2), "{on} vs {expect}");
        assert_eq!(on, 100.0);
    }

    #[test]
    fn silhouette_contains_projected_samples() {
        for kind in ShapeKind::ALL {
            let s = SynthShape::random(kind, 17);
            let img = s.silhouette(32);
            let c = s.sample_surface(&mut rng(), 500);
            for p in c.iter() {
                let col = ((p[0] + 1.0) * 16.0).floor() as usize;
                let row = ((1.0 - p[1]) * 16.0).floor() as usize;
                // a sample's pixel, or one of its neighbors, must be lit
                let lit = (row.saturating_sub(1)..=(row + 1).min(31))
                    .any(|r| (col.saturating_sub(1)..=(col + 1).min(31)).any(|cc| img[r * 32 + cc] == 1.0));
                assert!(lit, "{kind}: {p:?}");
            }
        }
    }

    #[test]
    fn rotated_cylinder_silhouette_matches_brute_force() {
        let s = SynthShape::random(ShapeKind::Cylinder, 5);
        let img = s.silhouette(16);
        // march each pixel ray through z and test containment
        for r in 0..16 {
            for c in 0..16 {
                let x = -1.0 + (c as f64 + 0.5) / 8.0;
                let y = 1.0 - (r as f64 + 0.5) / 8.0;
                let marched = (0..4000).any(|k| {
                    let z = -1.0 + k as f64 * 0.0005;
                    let p = &s.parts[0];
                    p.primitive.contains_strict(p.to_local([x, y, z]))
                });
                if marched {
                    assert_eq!(img[r * 16 + c], 1.0, "pixel {r},{c}");
                }
            }
        }
    }
}
