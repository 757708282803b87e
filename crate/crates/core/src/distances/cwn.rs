//! The conformal Wasserstein neighbourhood dissimilarity distance.
//!
//! Each sample point carries the landscape of `f̂` over its hyperbolic
//! neighbourhood `N(z, R)`, sampled on a fixed polar grid carried to `z`.
//! Two points are compared by the best rotation of one landscape against
//! the other; one transport problem over these costs gives the distance.
//!
//! Landscapes are taken in the base coordinates of each flattening, so the
//! cost is exactly invariant under recentring either surface.

use num_complex::Complex64 as Complex;
use rayon::prelude::*;

use super::correspondence::{CorrespondenceMap, MapMethod};
use super::rigid::RigidMotion;
use super::sampling::SampleSet;
use crate::error::{Error, Result};
use crate::flatten::FlatMap;
use crate::hyperbolic::{MobiusTransform, NeighborhoodGrid};
use crate::mesh::{triangle_area, TriMesh, Vec3};
use crate::transport::{plan_as_soft_correspondence, solve_kantorovich, CostMatrix, DiscreteMeasure, TransportPlan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CwnParams {
    /// Hyperbolic radius `R` of the neighbourhoods.
    pub radius: f64,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    /// Rotation angles tried per pair; must divide `angular_nodes`.
    pub rotations: usize,
    pub samples: usize,
}

impl Default for CwnParams {
    fn default() -> Self {
        Self { radius: 0.5, radial_nodes: 16, angular_nodes: 32, rotations: 32, samples: 256 }
    }
}

impl CwnParams {
    pub fn grid(&self) -> Result<NeighborhoodGrid> {
        if self.rotations == 0 || self.angular_nodes % self.rotations != 0 {
            return Err(Error::InvalidArgument(format!(
                "rotation count {} must divide the angular node count {}",
                self.rotations, self.angular_nodes
            )));
        }
        NeighborhoodGrid::new(self.radius, self.radial_nodes, self.angular_nodes)
    }
}

/// `f̂` sampled over `N(z, R)` for a point given in base coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodLandscape(pub Vec<f64>);

impl NeighborhoodLandscape {
    pub fn at_base(flat: &FlatMap, base_point: Complex, grid: &NeighborhoodGrid) -> Self {
        let t = MobiusTransform::from_origin(base_point);
        Self(grid.points().iter().map(|&u| flat.hyper_factor_at_base(t.apply(u))).collect())
    }

    /// Landscape around a point in the flat map's current coordinates.
    pub fn at(flat: &FlatMap, z: Complex, grid: &NeighborhoodGrid) -> Self {
        Self::at_base(flat, flat.frame().inverse().apply(z), grid)
    }
}

/// Each ring of `b` written twice in a row, so a rotated ring is a
/// contiguous slice.
fn doubled(b: &[f64], grid: &NeighborhoodGrid) -> Vec<f64> {
    b.chunks(grid.angular()).flat_map(|ring| ring.iter().chain(ring).copied()).collect()
}

/// `min_s Σ_k w_k |a_k − b_{rot(k, s)}|` over the rotation shifts, with `b`
/// given in [`doubled`] form.
fn landscape_cost_doubled(a: &[f64], b2: &[f64], grid: &NeighborhoodGrid, rotations: usize) -> f64 {
    let ang = grid.angular();
    let step = ang / rotations;
    let w = grid.weights();
    let mut best = f64::INFINITY;
    for r in 0..rotations {
        let shift = r * step;
        let mut total = 0.0;
        for ring in 0..grid.radial() {
            let ra = &a[ring * ang..(ring + 1) * ang];
            let rb = &b2[2 * ring * ang + shift..2 * ring * ang + shift + ang];
            let s: f64 = ra.iter().zip(rb).map(|(x, y)| (x - y).abs()).sum();
            total += w[ring * ang] * s;
        }
        best = best.min(total);
    }
    best
}

fn landscape_cost(a: &[f64], b: &[f64], grid: &NeighborhoodGrid, rotations: usize) -> f64 {
    landscape_cost_doubled(a, &doubled(b, grid), grid, rotations)
}

/// The neighbourhood dissimilarity of `z_a` on A and `z_b` on B (points in
/// the current coordinates of each flat map), minimized over the
/// one-parameter family of Möbius maps taking `z_a` to `z_b`.
pub fn cwn_cost(z_a: Complex, z_b: Complex, flat_a: &FlatMap, flat_b: &FlatMap, params: &CwnParams) -> Result<f64> {
    if !(z_a.norm() < 1.0 && z_b.norm() < 1.0) {
        return Err(Error::InvalidArgument("neighbourhood centres must lie inside the disk".into()));
    }
    let grid = params.grid()?;
    let a = NeighborhoodLandscape::at(flat_a, z_a, &grid);
    let b = NeighborhoodLandscape::at(flat_b, z_b, &grid);
    Ok(landscape_cost(&a.0, &b.0, &grid, params.rotations))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CwnResult {
    pub value: f64,
    pub plan: TransportPlan,
}

fn landscapes(flat: &FlatMap, samples: &SampleSet, grid: &NeighborhoodGrid) -> Vec<NeighborhoodLandscape> {
    samples
        .vertices
        .par_iter()
        .map(|&v| NeighborhoodLandscape::at_base(flat, flat.base().coords()[v], grid))
        .collect()
}

/// Builds the sample-to-sample neighbourhood cost matrix and solves one
/// Kantorovich problem with the samples' `f̂·dη` masses as marginals.
pub fn cwn_distance(
    flat_a: &FlatMap,
    samples_a: &SampleSet,
    flat_b: &FlatMap,
    samples_b: &SampleSet,
    params: &CwnParams,
) -> Result<CwnResult> {
    let grid = params.grid()?;
    let la = landscapes(flat_a, samples_a, &grid);
    let lb = landscapes(flat_b, samples_b, &grid);
    let lb: Vec<Vec<f64>> = lb.iter().map(|l| doubled(&l.0, &grid)).collect();
    let (m, n) = (la.len(), lb.len());
    let data: Vec<f64> = (0..m * n)
        .into_par_iter()
        .map(|k| landscape_cost_doubled(&la[k / n].0, &lb[k % n], &grid, params.rotations))
        .collect();
    let cost = CostMatrix::new(m, n, data)?;
    let mu = DiscreteMeasure::new((0..m).collect(), samples_a.weights.clone())?;
    let nu = DiscreteMeasure::new((0..n).collect(), samples_b.weights.clone())?;
    let plan = solve_kantorovich(&mu, &nu, &cost)?;
    Ok(CwnResult { value: plan.total_cost, plan })
}

/// A coarse correspondence from a cWn plan: every source vertex maps to the
/// vertex of the target sample receiving most of its Voronoi site's mass.
pub fn cwn_correspondence(
    mesh_a: &TriMesh,
    samples_a: &SampleSet,
    mesh_b: &TriMesh,
    samples_b: &SampleSet,
    result: &CwnResult,
) -> CorrespondenceMap {
    let target_of_site = plan_as_soft_correspondence(&result.plan);
    let vf = mesh_b.vertex_faces();
    let images: Vec<(usize, [f64; 3])> = (0..mesh_a.num_vertices())
        .map(|v| {
            let tv = samples_b.vertices[target_of_site[samples_a.cell[v]]];
            let face = vf[tv][0];
            let f = mesh_b.faces()[face];
            let mut bary = [0.0; 3];
            bary[f.iter().position(|&x| x == tv).expect("vertex in its face")] = 1.0;
            (face, bary)
        })
        .collect();
    let v = mesh_b.vertices();
    let pts: Vec<Vec3> = images
        .iter()
        .map(|&(fi, b)| {
            let f = mesh_b.faces()[fi];
            v[f[0]] * b[0] + v[f[1]] * b[1] + v[f[2]] * b[2]
        })
        .collect();
    let img: Vec<f64> = mesh_a.faces().iter().map(|f| triangle_area(&pts[f[0]], &pts[f[1]], &pts[f[2]])).collect();
    let src = mesh_a.face_areas();
    let (si, ss) = (img.iter().sum::<f64>(), src.iter().sum::<f64>());
    let residual = if si > 0.0 {
        img.iter().zip(&src).map(|(a, s)| ((a / si) / (s / ss) - 1.0).abs()).fold(0.0, f64::max)
    } else {
        1.0
    };
    CorrespondenceMap {
        source_id: mesh_a.specimen_id().to_string(),
        target_id: mesh_b.specimen_id().to_string(),
        method: MapMethod::CwnArgmax,
        images,
        residual,
        converged: false,
        motion: RigidMotion::identity(),
        distance: result.value,
    }
}
