//! Synthetic disk-type surfaces for tests, benchmarks and demos.
//!
//! Every mesh here is built on the same concentric-ring triangulation of the
//! unit disk: a centre vertex plus `rings` rings, ring `k` holding `6k`
//! vertices, so `V = 1 + 3·rings·(rings + 1)`.

use std::f64::consts::TAU;

use nalgebra::{Rotation3, Unit, UnitQuaternion};
use num_complex::Complex64 as Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{TriMesh, Vec3};

/// Vertex count of a ring mesh with `rings` rings.
pub fn ring_vertex_count(rings: usize) -> usize {
    1 + 3 * rings * (rings + 1)
}

/// Unit-disk parameter points and counterclockwise faces of the ring mesh.
pub fn ring_disk(rings: usize) -> (Vec<(f64, f64)>, Vec<[usize; 3]>) {
    assert!(rings >= 1, "ring mesh needs at least one ring");
    let mut params = vec![(0.0, 0.0)];
    let mut start = vec![0usize];
    for k in 1..=rings {
        start.push(params.len());
        let r = k as f64 / rings as f64;
        // hexagonal lattice ring blended towards a circle near the rim
        let blend = r * r;
        for i in 0..6 * k {
            let (side, s) = (i / k, i % k);
            let c0 = Complex::from_polar(r, TAU * side as f64 / 6.0);
            let c1 = Complex::from_polar(r, TAU * (side + 1) as f64 / 6.0);
            let hex = c0 + (c1 - c0) * (s as f64 / k as f64);
            let p = hex * (1.0 - blend + blend * r / hex.norm());
            params.push((p.re, p.im));
        }
    }
    let mut faces = Vec::new();
    for i in 0..6 {
        faces.push([0, start[1] + i, start[1] + (i + 1) % 6]);
    }
    for k in 1..rings {
        let (ni, no) = (6 * k, 6 * (k + 1));
        let inner = |i: usize| start[k] + i % ni;
        let outer = |j: usize| start[k + 1] + j % no;
        // fractional position along each ring; on ties (hexagon corners) the inner ring advances
        let a = |i: usize| i as f64 / ni as f64;
        let b = |j: usize| j as f64 / no as f64;
        let (mut i, mut j) = (0usize, 0usize);
        while i < ni || j < no {
            let ai = if i < ni { a(i + 1) } else { f64::INFINITY };
            let bj = if j < no { b(j + 1) } else { f64::INFINITY };
            if ai <= bj {
                faces.push([inner(i), outer(j), inner(i + 1)]);
                i += 1;
            } else {
                faces.push([inner(i), outer(j), outer(j + 1)]);
                j += 1;
            }
        }
    }
    (params, faces)
}

/// The graph `z = height(x, y)` over the ring mesh of the unit disk.
pub fn disk_mesh(rings: usize, height: impl Fn(f64, f64) -> f64, id: &str) -> TriMesh {
    let (params, faces) = ring_disk(rings);
    let verts = params.iter().map(|&(x, y)| Vec3::new(x, y, height(x, y))).collect();
    TriMesh::new(verts, faces, id).expect("ring mesh is a valid disk")
}

/// A cap of the unit sphere of the given height, parameterized by geodesic
/// polar coordinates over the ring mesh.
pub fn spherical_cap(rings: usize, cap_height: f64, id: &str) -> TriMesh {
    let (params, faces) = ring_disk(rings);
    let max_polar = (1.0 - cap_height).acos();
    let verts = params
        .iter()
        .map(|&(x, y)| {
            let r = (x * x + y * y).sqrt();
            let t = y.atan2(x);
            let p = r * max_polar;
            Vec3::new(p.sin() * t.cos(), p.sin() * t.sin(), p.cos())
        })
        .collect();
    TriMesh::new(verts, faces, id).expect("cap mesh is a valid disk")
}

/// A Gaussian bump `height · exp(−|x − centre|² / width²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: (f64, f64),
    pub height: f64,
    pub width: f64,
}

impl Bump {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        self.height * (-(dx * dx + dy * dy) / (self.width * self.width)).exp()
    }
}

pub fn bump_height(bumps: &[Bump], x: f64, y: f64) -> f64 {
    bumps.iter().map(|b| b.eval(x, y)).sum()
}

pub fn bump_surface(rings: usize, bumps: &[Bump], id: &str) -> TriMesh {
    disk_mesh(rings, |x, y| bump_height(bumps, x, y), id)
}

/// Number of built-in shape families.
pub const FAMILIES: usize = 3;

/// Base bump layout of a family: one, two or three bumps.
pub fn family_base(family: usize) -> Vec<Bump> {
    let b = |x: f64, y: f64, h: f64, w: f64| Bump { center: (x, y), height: h, width: w };
    match family % FAMILIES {
        0 => vec![b(0.12, 0.05, 0.55, 0.32)],
        1 => vec![b(-0.38, 0.0, 0.45, 0.26), b(0.4, 0.06, 0.3, 0.24)],
        _ => {
            let r = 0.45;
            (0..3)
                .map(|k| {
                    let a = TAU * k as f64 / 3.0 + 0.3;
                    b(r * a.cos(), r * a.sin(), 0.32 + 0.06 * k as f64, 0.22)
                })
                .collect()
        }
    }
}

/// Seeded perturbation of a family's layout; `level = 0` is the base shape.
pub fn family_member(family: usize, level: usize, seed: u64) -> Vec<Bump> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((family as u64) << 32) ^ level as u64);
    let s = level as f64;
    family_base(family)
        .into_iter()
        .map(|b| Bump {
            center: (
                b.center.0 + 0.03 * s * rng.gen_range(-1.0..1.0),
                b.center.1 + 0.03 * s * rng.gen_range(-1.0..1.0),
            ),
            height: b.height * (1.0 + 0.06 * s * rng.gen_range(-1.0..1.0)),
            width: b.width * (1.0 + 0.04 * s * rng.gen_range(-1.0..1.0)),
        })
        .collect()
}

/// `families × levels` labelled meshes with ids `f{family}_l{level}`.
pub fn corpus(rings: usize, families: usize, levels: usize, seed: u64) -> Vec<(TriMesh, String)> {
    let mut out = Vec::with_capacity(families * levels);
    for f in 0..families {
        for l in 0..levels {
            let id = format!("f{f}_l{l}");
            out.push((bump_surface(rings, &family_member(f, l, seed), &id), format!("family{f}")));
        }
    }
    out
}

/// A uniformly random proper rotation and a translation with entries in `[-1, 1]`.
pub fn random_rigid_motion(rng: &mut impl Rng) -> (Rotation3<f64>, Vec3) {
    let axis = loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            break v;
        }
    };
    let angle = rng.gen_range(0.0..std::f64::consts::PI);
    let rot = UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle).to_rotation_matrix();
    let t = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    (rot, t)
}

/// Applies `x -> R x + t` to every vertex.
pub fn apply_rigid(mesh: &TriMesh, rot: &Rotation3<f64>, t: &Vec3) -> TriMesh {
    mesh.map_vertices(|v| rot * v + t).expect("rigid motion keeps the mesh valid")
}

/// A smooth ambient deformation with the given amplitude; connectivity is
/// unchanged, so vertex `i` of the output corresponds to vertex `i` of the input.
pub fn smooth_deform(mesh: &TriMesh, amplitude: f64) -> TriMesh {
    mesh.map_vertices(|v| {
        Vec3::new(
            v.x + amplitude * (1.3 * v.y + 0.4).sin(),
            v.y + amplitude * (1.1 * v.x - 0.2).sin(),
            v.z * (1.0 + 0.5 * amplitude * (v.x + v.y).cos()),
        )
    })
    .expect("small deformation keeps the mesh valid")
}
