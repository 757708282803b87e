//! Area-preserving correction of a disk-to-surface map by iterated local
//! mass diffusion (a discrete Moser flow).
//!
//! The map is stored as target-disk images of the source vertices. Each
//! iteration solves a Neumann Poisson problem on the source triangulation
//! for the mismatch between image area and source area, and precomposes
//! the map with the resulting flow, so image points drift from over- to
//! under-covered regions.

use num_complex::Complex64 as Complex;
use rayon::prelude::*;

use crate::error::Result;
use crate::flatten::FlatMap;
use crate::linalg::{conjugate_gradient, CsrMatrix};
use crate::locate::{signed_area, PlanarTriangulation};
use crate::mesh::TriMesh;

/// Residual tolerance at which the correction stops.
pub const DEFAULT_TOLERANCE: f64 = 0.05;
pub const DEFAULT_MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionParams {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CorrectionParams {
    fn default() -> Self {
        Self { tolerance: DEFAULT_TOLERANCE, max_iterations: DEFAULT_MAX_ITERATIONS }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaCorrection {
    /// Target-disk images of the source vertices.
    pub images: Vec<Complex>,
    pub residual: f64,
    pub initial_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Residual after every accepted iteration, starting with the initial one.
    pub history: Vec<f64>,
}

/// The source side of the problem: a triangulated disk with 3D face areas.
pub struct SourceDomain<'a> {
    pub coords: &'a [Complex],
    pub faces: &'a [[usize; 3]],
    pub boundary: &'a [bool],
    pub face_areas: Vec<f64>,
}

impl<'a> SourceDomain<'a> {
    pub fn from_flat(mesh: &TriMesh, flat: &'a FlatMap) -> Self {
        Self {
            coords: flat.disk_coords(),
            faces: flat.faces(),
            boundary: flat.boundary_mask(),
            face_areas: mesh.face_areas(),
        }
    }
}

/// Target surface area covered by a triangle of the target disk.
pub trait PushedArea: Sync {
    fn pushed_area(&self, tri: [Complex; 3]) -> f64;
}

/// Per-face area ratios `image share / source share`, `None` if any image
/// triangle is flipped in the target disk.
fn face_ratios(src: &SourceDomain, images: &[Complex], target: &impl PushedArea) -> Option<Vec<f64>> {
    let tris: Vec<[Complex; 3]> = src.faces.iter().map(|f| [images[f[0]], images[f[1]], images[f[2]]]).collect();
    if !tris.iter().all(|t| signed_area(t[0], t[1], t[2]) > 0.0) {
        return None;
    }
    let img: Vec<f64> = tris.par_iter().map(|&t| target.pushed_area(t)).collect();
    let si: f64 = img.iter().sum();
    let ss: f64 = src.face_areas.iter().sum();
    if !(si > 0.0) {
        return None;
    }
    Some(img.iter().zip(&src.face_areas).map(|(a, s)| (a / si) / (s / ss)).collect())
}

fn max_dev(ratios: &[f64]) -> f64 {
    ratios.iter().fold(0.0, |m, r| m.max((r - 1.0).abs()))
}

fn rms_dev(ratios: &[f64], weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    (ratios.iter().zip(weights).map(|(r, w)| w * (r - 1.0) * (r - 1.0)).sum::<f64>() / s).sqrt()
}

/// Area-distortion residual of a map given by vertex images; infinite if
/// the image triangulation folds.
pub fn area_residual(src: &SourceDomain, images: &[Complex], target: &impl PushedArea) -> f64 {
    face_ratios(src, images, target).map_or(f64::INFINITY, |r| max_dev(&r))
}

fn cotan_laplacian(coords: &[Complex], faces: &[[usize; 3]]) -> CsrMatrix {
    let mut trip = Vec::with_capacity(faces.len() * 12);
    for f in faces {
        let area2 = 2.0 * signed_area(coords[f[0]], coords[f[1]], coords[f[2]]);
        for k in 0..3 {
            let (i, j, o) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
            let (a, b) = (coords[i] - coords[o], coords[j] - coords[o]);
            let w = 0.5 * (a.re * b.re + a.im * b.im) / area2;
            trip.push((i, i, w));
            trip.push((j, j, w));
            trip.push((i, j, -w));
            trip.push((j, i, -w));
        }
    }
    CsrMatrix::from_triplets(coords.len(), trip)
}

/// Reduces the area distortion of the map `images` (target-disk images of
/// the source vertices) until the residual drops below the tolerance, no
/// improving step exists, or the iteration cap is reached. The residual is
/// non-increasing over iterations and no accepted step folds the image.
pub fn area_preserving_correction(
    src: &SourceDomain,
    images: &[Complex],
    target: &impl PushedArea,
    params: &CorrectionParams,
) -> Result<AreaCorrection> {
    let n = src.coords.len();
    let mut cur = images.to_vec();
    let Some(mut ratios) = face_ratios(src, &cur, target) else {
        return Ok(AreaCorrection {
            images: cur,
            residual: f64::INFINITY,
            initial_residual: f64::INFINITY,
            iterations: 0,
            converged: false,
            history: vec![f64::INFINITY],
        });
    };
    let initial = max_dev(&ratios);
    let mut residual = initial;
    let mut history = vec![initial];
    let planar: Vec<f64> = src.faces.iter().map(|f| signed_area(src.coords[f[0]], src.coords[f[1]], src.coords[f[2]])).collect();
    let ss: f64 = src.face_areas.iter().sum();
    let shares: Vec<f64> = src.face_areas.iter().map(|a| a / ss).collect();
    let mut rms = rms_dev(&ratios, &shares);
    let lap = cotan_laplacian(src.coords, src.faces);
    let locator = PlanarTriangulation::new(src.coords.to_vec(), src.faces.to_vec(), &boundary_loop_of(src));
    let mut iterations = 0;

    while residual >= params.tolerance && iterations < params.max_iterations {
        iterations += 1;
        // lumped image-minus-source mass
        let mut rhs = vec![0.0; n];
        for (fi, f) in src.faces.iter().enumerate() {
            let d = shares[fi] * (ratios[fi] - 1.0) / 3.0;
            for &v in f {
                rhs[v] += d;
            }
        }
        let mean = rhs.iter().sum::<f64>() / n as f64;
        rhs.iter_mut().for_each(|r| *r -= mean);
        let mut u = vec![0.0; n];
        conjugate_gradient(&lap, &rhs, &mut u, 1e-10, 20 * n + 1000, true)?;

        // velocity ∇u / (image density), averaged from faces to vertices
        let mut vel = vec![Complex::new(0.0, 0.0); n];
        let mut wsum = vec![0.0; n];
        for (fi, f) in src.faces.iter().enumerate() {
            let (a, b, c) = (src.coords[f[0]], src.coords[f[1]], src.coords[f[2]]);
            let a2 = 2.0 * planar[fi];
            let rot = |e: Complex| Complex::new(-e.im, e.re);
            let grad = (rot(c - b) * u[f[0]] + rot(a - c) * u[f[1]] + rot(b - a) * u[f[2]]) / a2;
            let density = shares[fi] * ratios[fi] / planar[fi];
            let v = grad / density.max(1e-12);
            for &k in f {
                vel[k] += v * planar[fi];
                wsum[k] += planar[fi];
            }
        }
        let mut vmax: f64 = 0.0;
        for k in 0..n {
            vel[k] /= wsum[k];
            vmax = vmax.max(vel[k].norm());
        }
        if !(vmax > 0.0) {
            break;
        }
        let mut step = (1.0f64).min(0.05 / vmax);
        let mut accepted = false;
        for _ in 0..10 {
            let cand: Vec<Complex> = (0..n)
                .map(|k| {
                    let mut x = src.coords[k] + vel[k] * step;
                    if src.boundary[k] {
                        x /= x.norm();
                    } else if x.norm() >= 1.0 {
                        x *= (1.0 - 1e-9) / x.norm();
                    }
                    let loc = locator.locate_clamped(x);
                    let f = src.faces[loc.face];
                    let mut y = cur[f[0]] * loc.bary[0] + cur[f[1]] * loc.bary[1] + cur[f[2]] * loc.bary[2];
                    if src.boundary[k] {
                        y /= y.norm();
                    }
                    y
                })
                .collect();
            if let Some(r) = face_ratios(src, &cand, target) {
                let (m, q) = (max_dev(&r), rms_dev(&r, &shares));
                if m <= residual && q < rms {
                    cur = cand;
                    ratios = r;
                    residual = m;
                    rms = q;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        history.push(residual);
    }
    Ok(AreaCorrection {
        images: cur,
        residual,
        initial_residual: initial,
        iterations,
        converged: residual < params.tolerance,
        history,
    })
}

fn boundary_loop_of(src: &SourceDomain) -> Vec<usize> {
    // directed boundary half-edges, chained into a loop
    let mut next = std::collections::HashMap::new();
    let mut count = std::collections::HashMap::new();
    for f in src.faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    for f in src.faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            if count[&(a.min(b), a.max(b))] == 1 {
                next.insert(a, b);
            }
        }
    }
    let Some(&start) = next.keys().min() else { return Vec::new() };
    let mut out = vec![start];
    let mut v = next[&start];
    while v != start && out.len() <= next.len() {
        out.push(v);
        v = next[&v];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flatten::flat_map_from_coords;
    use crate::synth;

    struct FlatLift;
    impl PushedArea for FlatLift {
        fn pushed_area(&self, tri: [Complex; 3]) -> f64 {
            signed_area(tri[0], tri[1], tri[2])
        }
    }

    fn flat_disk(rings: usize) -> TriMesh {
        synth::disk_mesh(rings, |_, _| 0.0, "disk")
    }

    #[test]
    fn identity_is_fixed_point() {
        let mesh = flat_disk(6);
        let z: Vec<Complex> = mesh.vertices().iter().map(|v| Complex::new(v.x, v.y)).collect();
        let flat = flat_map_from_coords(&mesh, z.clone()).unwrap();
        let src = SourceDomain::from_flat(&mesh, &flat);
        let out = area_preserving_correction(&src, &z, &FlatLift, &CorrectionParams::default()).unwrap();
        assert_eq!(out.images, z);
        assert_eq!(out.iterations, 0);
        assert!(out.residual < 1e-12 && out.converged);
    }

    #[test]
    fn radial_distortion_is_removed() {
        let mesh = flat_disk(16);
        let z: Vec<Complex> = mesh.vertices().iter().map(|v| Complex::new(v.x, v.y)).collect();
        let flat = flat_map_from_coords(&mesh, z.clone()).unwrap();
        let src = SourceDomain::from_flat(&mesh, &flat);
        // area ratio about 2 at the centre relative to the rim
        let warped: Vec<Complex> = z.iter().map(|&w| w * (1.0 + 0.25 * (1.0 - w.norm_sqr()))).collect();
        let out = area_preserving_correction(&src, &warped, &FlatLift, &CorrectionParams::default()).unwrap();
        assert!(out.initial_residual > 0.5, "{}", out.initial_residual);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.converged, "residual {} after {} iterations", out.residual, out.iterations);
    }
}
