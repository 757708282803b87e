//! The continuous Procrustes distance.
//!
//! For every pair of density peaks `(p, p')` and every rotation angle, the
//! Möbius map taking `p` to `p'` is combined with a smooth deformation `ρ`
//! aligning the remaining peaks. The candidate maps are scored by the
//! weighted rigid-alignment residual of farthest-point samples; the best
//! one is made area preserving by `χ` and rescored on all vertices.

use std::f64::consts::TAU;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use num_complex::Complex64 as Complex;
use rayon::prelude::*;

use super::correct::{area_preserving_correction, CorrectionParams, SourceDomain};
use super::correspondence::{CorrespondenceMap, MapMethod};
use super::deform::{align_peak_deformation, match_peaks, PeakDeformation};
use super::peaks::{detect_peaks, MAX_PEAKS};
use super::rigid::{rigid_align_with, RigidMotion};
use super::sampling::sample_surface;
use super::MeshLift;
use crate::error::{Error, Result};
use crate::flatten::FlatMap;
use crate::hyperbolic::{mobius_family_fixing, MobiusTransform};
use crate::mesh::{vertex_areas, TriMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpParams {
    pub samples: usize,
    pub rotations: usize,
    pub max_peaks: usize,
    pub k_ring: usize,
    /// Minimum peak prominence as a fraction of the range of `f̂`.
    pub peak_prominence: f64,
    pub correction: CorrectionParams,
    pub allow_reflection: bool,
    /// Nelder–Mead iterations polishing the best grid candidate (0 disables).
    pub refine_iterations: u64,
    /// Leading peak pairs whose best candidate is corrected and rescored.
    pub finalists: usize,
}

impl Default for CpParams {
    fn default() -> Self {
        Self {
            samples: 256,
            rotations: 64,
            max_peaks: MAX_PEAKS,
            k_ring: 2,
            peak_prominence: 0.05,
            correction: CorrectionParams::default(),
            allow_reflection: false,
            refine_iterations: 120,
            finalists: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpResult {
    pub value: f64,
    pub motion: RigidMotion,
    pub map: CorrespondenceMap,
    /// Sampled residual of the best search candidate `ρ ∘ m`.
    pub search_value: f64,
    pub mobius: MobiusTransform,
    /// Indices of the peak pair and rotation of the best candidate.
    pub best_candidate: (usize, usize, usize),
    pub correction_iterations: usize,
}

/// Peak positions, or the `f`-mass centroid when there is no peak.
fn peak_positions(flat: &FlatMap, params: &CpParams) -> Vec<Complex> {
    let peaks = detect_peaks(flat, params.k_ring, params.peak_prominence, params.max_peaks);
    if peaks.is_empty() {
        let mass = flat.vertex_mass();
        let total: f64 = mass.iter().sum();
        let c: Complex = flat.disk_coords().iter().zip(&mass).map(|(z, m)| z * m).sum::<Complex>() / total;
        vec![c]
    } else {
        peaks.iter().map(|p| p.position).collect()
    }
}

struct Candidate {
    mobius: MobiusTransform,
    rho: PeakDeformation,
}

struct Finalist {
    job: (usize, usize, usize),
    cand: Candidate,
    search_value: f64,
    corrected: super::correct::AreaCorrection,
    locs: Vec<crate::locate::Location>,
    motion: RigidMotion,
    value: f64,
}

/// Continuous Procrustes distance between unit-area meshes `a` and `b`.
pub fn cp_distance(mesh_a: &TriMesh, mesh_b: &TriMesh, flat_a: &FlatMap, flat_b: &FlatMap, params: &CpParams) -> Result<CpResult> {
    for m in [mesh_a, mesh_b] {
        if (m.total_area() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "mesh '{}' has area {}; cP expects unit-area meshes",
                m.specimen_id(),
                m.total_area()
            )));
        }
    }
    if flat_a.num_vertices() != mesh_a.num_vertices() || flat_b.num_vertices() != mesh_b.num_vertices() {
        return Err(Error::DimensionMismatch("flat map does not belong to its mesh".into()));
    }
    if params.rotations == 0 {
        return Err(Error::InvalidArgument("rotation grid is empty".into()));
    }
    let peaks_a = peak_positions(flat_a, params);
    let peaks_b = peak_positions(flat_b, params);
    let n = params.samples.min(mesh_a.num_interior());
    let samples = sample_surface(flat_a, mesh_a, n)?;
    let za = samples.disk_points(flat_a);
    let xa: Vec<Vec3> = samples.vertices.iter().map(|&v| mesh_a.vertices()[v]).collect();
    let lift_b = MeshLift::new(flat_b, mesh_b);

    let candidate = |a: usize, b: usize, t: usize| -> Candidate {
        let theta = TAU * (t as f64 / params.rotations as f64);
        let mobius = mobius_family_fixing(peaks_a[a], peaks_b[b], theta);
        let moved: Vec<Complex> = peaks_a.iter().map(|&p| mobius.apply(p)).collect();
        let pairs = match_peaks(&moved, &peaks_b, Some((a, b)));
        Candidate { mobius, rho: align_peak_deformation(&moved, &peaks_b, &pairs) }
    };
    let score = |c: &Candidate| -> f64 {
        let y: Vec<Vec3> = za.iter().map(|&z| lift_b.lift_point(c.rho.apply(c.mobius.apply(z)))).collect();
        rigid_align_with(&xa, &y, &samples.weights, params.allow_reflection).map_or(f64::INFINITY, |(_, r)| r)
    };

    let jobs: Vec<(usize, usize, usize)> = (0..peaks_a.len())
        .flat_map(|a| (0..peaks_b.len()).flat_map(move |b| (0..params.rotations).map(move |t| (a, b, t))))
        .collect();
    let scores: Vec<f64> = jobs.par_iter().map(|&(a, b, t)| score(&candidate(a, b, t))).collect();
    let mut order: Vec<usize> = (0..jobs.len()).filter(|&i| scores[i].is_finite()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]).then(jobs[i].cmp(&jobs[j])));
    if order.is_empty() {
        return Err(Error::Degenerate("no candidate map admits a rigid alignment".into()));
    }
    // the best candidate of each of the leading peak pairs
    let mut shortlist: Vec<usize> = Vec::new();
    for &i in &order {
        if shortlist.len() >= params.finalists.max(1) {
            break;
        }
        if shortlist.iter().all(|&k| (jobs[k].0, jobs[k].1) != (jobs[i].0, jobs[i].1)) {
            shortlist.push(i);
        }
    }
    let src = SourceDomain::from_flat(mesh_a, flat_a);
    let areas = vertex_areas(mesh_a);
    let finish = |idx: usize| -> Result<Finalist> {
        let (a, b, t) = jobs[idx];
        let mut cand = candidate(a, b, t);
        let mut search_value = scores[idx];
        if params.refine_iterations > 0 {
            let step = std::f64::consts::PI / params.rotations as f64;
            if let Some((g, v)) = refine(&|g: &MobiusTransform| {
                score(&Candidate { mobius: g.compose(&cand.mobius), rho: cand.rho.clone() })
            }, step, params.refine_iterations)
            {
                if v < search_value {
                    cand.mobius = g.compose(&cand.mobius);
                    search_value = v;
                }
            }
        }
        // the candidate on every vertex, then the area correction
        let images: Vec<Complex> = flat_a
            .disk_coords()
            .iter()
            .zip(flat_a.boundary_mask())
            .map(|(&z, &on_rim)| {
                let y = cand.rho.apply(cand.mobius.apply(z));
                if on_rim {
                    y / y.norm()
                } else {
                    y
                }
            })
            .collect();
        let corrected = area_preserving_correction(&src, &images, &lift_b, &params.correction)?;
        let locs: Vec<_> = corrected.images.iter().map(|&w| lift_b.locate(w)).collect();
        let targets: Vec<Vec3> = locs.iter().map(|l| lift_b.point(l)).collect();
        let (motion, value) = rigid_align_with(mesh_a.vertices(), &targets, &areas, params.allow_reflection)?;
        Ok(Finalist { job: jobs[idx], cand, search_value, corrected, locs, motion, value })
    };
    let finalists: Vec<Finalist> = shortlist.par_iter().map(|&i| finish(i)).collect::<Result<_>>()?;
    let best = finalists
        .into_iter()
        .min_by(|x, y| x.value.total_cmp(&y.value).then(x.job.cmp(&y.job)))
        .expect("nonempty shortlist");
    let Finalist { job: (a, b, t), cand, search_value, corrected, locs, motion, value } = best;
    let map = CorrespondenceMap {
        source_id: mesh_a.specimen_id().to_string(),
        target_id: mesh_b.specimen_id().to_string(),
        method: MapMethod::Cp,
        images: locs.iter().map(|l| (l.face, l.bary)).collect(),
        residual: corrected.residual,
        converged: corrected.converged,
        motion,
        distance: value,
    };
    Ok(CpResult {
        value,
        motion,
        map,
        search_value,
        mobius: cand.mobius,
        best_candidate: (a, b, t),
        correction_iterations: corrected.iterations,
    })
}

struct Polish<'a, F: Fn(&MobiusTransform) -> f64> {
    score: &'a F,
}

fn params_to_mobius(p: &[f64]) -> Option<MobiusTransform> {
    MobiusTransform::new(p[0], Complex::new(p[1], p[2])).ok()
}

impl<F: Fn(&MobiusTransform) -> f64> CostFunction for Polish<'_, F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(params_to_mobius(p).map_or(f64::INFINITY, |m| (self.score)(&m)))
    }
}

/// Nelder–Mead over a small Möbius map `(θ, α)` applied after the best
/// grid candidate. Returns the map and its score.
fn refine<F: Fn(&MobiusTransform) -> f64>(score: &F, theta_step: f64, iterations: u64) -> Option<(MobiusTransform, f64)> {
    let da = 0.02;
    let simplex = vec![vec![0.0, 0.0, 0.0], vec![theta_step, 0.0, 0.0], vec![0.0, da, 0.0], vec![0.0, 0.0, da]];
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-12).ok()?;
    let res = Executor::new(Polish { score }, solver)
        .configure(|state| state.max_iters(iterations))
        .run()
        .ok()?;
    let best = res.state().get_best_param()?.clone();
    Some((params_to_mobius(&best)?, res.state().get_best_cost()))
}

impl MeshLift<'_> {
    fn lift_point(&self, w: Complex) -> Vec3 {
        self.point(&self.locate(w))
    }
}
