//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use morphodist::mesh::{TriMesh, Vec3};
use morphodist::FlatMap;
use nalgebra::{Rotation3, Vector3};

/// Minimum of `Σ c[i][σ(i)]` over all permutations `σ`, by enumeration.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == cost.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..cost.len() {
            if !used[j] {
                used[j] = true;
                go(cost, row + 1, used, acc + cost[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
    best
}

/// Mean and max over all face corners of the absolute difference between
/// the 3D angle and the angle of the flattened triangle.
pub fn angle_distortion(mesh: &TriMesh, flat: &FlatMap) -> (f64, f64) {
    let z = flat.disk_coords();
    let v = mesh.vertices();
    let (mut sum, mut max, mut count) = (0.0, 0.0f64, 0usize);
    for f in mesh.faces() {
        for k in 0..3 {
            let (o, i, j) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
            let a3 = (v[i] - v[o]).angle(&(v[j] - v[o]));
            let a2 = ((z[i] - z[o]).conj() * (z[j] - z[o])).arg().abs();
            let d = (a3 - a2).abs();
            sum += d;
            max = max.max(d);
            count += 1;
        }
    }
    (sum / count as f64, max)
}

/// Two-sided Kolmogorov–Smirnov statistic of `xs` against Uniform(0, 1).
pub fn ks_uniform_statistic(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the KS statistic `d` for sample size `n`, with
/// Stephens' small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let x = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-2.0 * (k * k) as f64 * x * x).exp();
        p += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// A point on a mesh face.
#[derive(Debug, Clone, Copy)]
pub struct FacePoint {
    pub face: usize,
    pub bary: [f64; 3],
}

pub fn face_point_position(mesh: &TriMesh, p: &FacePoint) -> Vec3 {
    let f = mesh.faces()[p.face];
    let v = mesh.vertices();
    v[f[0]] * p.bary[0] + v[f[1]] * p.bary[1] + v[f[2]] * p.bary[2]
}

/// Approximate geodesic distance between two surface points: shortest
/// path in the graph whose nodes are the vertices, `steiner` evenly spaced
/// points on every edge and the two query points, with straight segments
/// between any two nodes on the boundary (or inside) of a common face.
/// Converges to the exact geodesic distance from above as `steiner` grows.
pub fn geodesic_distance(mesh: &TriMesh, a: &FacePoint, b: &FacePoint, steiner: usize) -> f64 {
    let v = mesh.vertices();
    let mut pos: Vec<Vec3> = v.to_vec();
    let mut edge_nodes: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let mut face_nodes: Vec<Vec<usize>> = Vec::with_capacity(mesh.num_faces());
    for f in mesh.faces() {
        let mut nodes = vec![f[0], f[1], f[2]];
        for k in 0..3 {
            let (i, j) = (f[k].min(f[(k + 1) % 3]), f[k].max(f[(k + 1) % 3]));
            let ids = edge_nodes.entry((i, j)).or_insert_with(|| {
                (1..=steiner)
                    .map(|s| {
                        let t = s as f64 / (steiner + 1) as f64;
                        pos.push(v[i] * (1.0 - t) + v[j] * t);
                        pos.len() - 1
                    })
                    .collect()
            });
            nodes.extend(ids.iter().copied());
        }
        face_nodes.push(nodes);
    }
    let src = pos.len();
    pos.push(face_point_position(mesh, a));
    let dst = pos.len();
    pos.push(face_point_position(mesh, b));
    face_nodes[a.face].push(src);
    face_nodes[b.face].push(dst);
    if a.face == b.face {
        return (pos[src] - pos[dst]).norm();
    }

    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); pos.len()];
    for (fi, nodes) in face_nodes.iter().enumerate() {
        for &n in nodes {
            adj[n].push(fi);
        }
    }
    let mut dist = vec![f64::INFINITY; pos.len()];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push((Reverse(Ordered(0.0)), src));
    while let Some((Reverse(Ordered(d)), u)) = heap.pop() {
        if u == dst {
            return d;
        }
        if d > dist[u] {
            continue;
        }
        for &fi in &adj[u] {
            for &w in &face_nodes[fi] {
                let nd = d + (pos[u] - pos[w]).norm();
                if nd < dist[w] {
                    dist[w] = nd;
                    heap.push((Reverse(Ordered(nd)), w));
                }
            }
        }
    }
    f64::INFINITY
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Ordered(f64);

impl Eq for Ordered {}

impl PartialOrd for Ordered {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Weighted rigid-alignment residual minimized by brute force over a grid
/// of rotations (axis on a sphere grid, angle grid) with the optimal
/// translation for each, followed by coordinate refinement of the best.
pub fn rotation_grid_residual(x: &[Vec3], y: &[Vec3], w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    let centroid = |p: &[Vec3]| p.iter().zip(w).map(|(p, w)| p * *w).sum::<Vec3>() / total;
    let (cx, cy) = (centroid(x), centroid(y));
    let cost = |r: &Rotation3<f64>| -> f64 {
        x.iter()
            .zip(y)
            .zip(w)
            .map(|((p, q), w)| w * (r * (p - cx) - (q - cy)).norm_squared())
            .sum()
    };
    let mut best = (f64::INFINITY, Vector3::zeros());
    let steps = 24;
    for i in 0..steps {
        for j in 0..2 * steps {
            for k in 0..=steps {
                let theta = std::f64::consts::PI * i as f64 / steps as f64;
                let phi = std::f64::consts::PI * j as f64 / steps as f64;
                let angle = std::f64::consts::PI * k as f64 / steps as f64;
                let axis = Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
                let rv = axis * angle;
                let c = cost(&Rotation3::new(rv));
                if c < best.0 {
                    best = (c, rv);
                }
            }
        }
    }
    let mut step = std::f64::consts::PI / steps as f64;
    while step > 1e-10 {
        let mut improved = false;
        for d in 0..3 {
            for s in [-1.0, 1.0] {
                let mut rv = best.1;
                rv[d] += s * step;
                let c = cost(&Rotation3::new(rv));
                if c < best.0 {
                    best = (c, rv);
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best.0
}
