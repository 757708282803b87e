//! Conformal flattening of disk-type meshes onto the unit disk.
//!
//! The flattening is a discrete harmonic map with clamped cotangent weights
//! and the boundary pinned to the unit circle by cumulative arc length,
//! followed by a canonical Möbius recentring that puts the area centroid of
//! the conformal factor at the origin.
//!
//! Per-vertex quadrature uses *interior lumping*: the area of each face is
//! shared equally among its interior corners, so boundary vertices (where the
//! hyperbolic measure diverges) carry zero weight and the identities
//! `Σ f·dA = 1` and `Σ f̂·dη = Σ f·dA` hold exactly on the discrete level.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64 as Complex;

use crate::error::{Error, Result};
use crate::hyperbolic::MobiusTransform;
use crate::linalg::{conjugate_gradient, CsrMatrix};
use crate::locate::{signed_area, PlanarTriangulation};
use crate::mesh::{TriMesh, Vec3};

/// Relative residual for the harmonic solve.
pub const SOLVER_TOL: f64 = 1e-10;

/// A flattened surface: disk coordinates, the normalized conformal factor
/// `f` and the hyperbolic density `f̂ = (1 − |z|²)² f`.
///
/// The flattening is stored as a fixed *base* embedding plus a Möbius
/// `frame`; `disk_coords = frame(base)`. Densities evaluated away from
/// vertices are interpolated on the base triangulation, which makes the
/// pushed-forward density exactly `f̂ ∘ frame⁻¹`.
#[derive(Debug, Clone)]
pub struct FlatMap {
    source_id: String,
    base: Arc<PlanarTriangulation>,
    is_boundary: Arc<Vec<bool>>,
    frame: MobiusTransform,
    disk_coords: Vec<Complex>,
    factor: Vec<f64>,
    hyper_factor: Vec<f64>,
    planar_area: Vec<f64>,
    clamped_weights: usize,
}

impl FlatMap {
    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn disk_coords(&self) -> &[Complex] {
        &self.disk_coords
    }

    pub fn factor(&self) -> &[f64] {
        &self.factor
    }

    pub fn hyper_factor(&self) -> &[f64] {
        &self.hyper_factor
    }

    /// Planar quadrature weight of each vertex (zero on the boundary).
    pub fn planar_area(&self) -> &[f64] {
        &self.planar_area
    }

    /// `f_i · planar_area_i`: the normalized surface-area mass of each vertex.
    pub fn vertex_mass(&self) -> Vec<f64> {
        self.factor.iter().zip(&self.planar_area).map(|(f, a)| f * a).collect()
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.is_boundary
    }

    pub fn frame(&self) -> MobiusTransform {
        self.frame
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        self.base.faces()
    }

    pub fn num_vertices(&self) -> usize {
        self.disk_coords.len()
    }

    /// Number of negative cotangent weights clamped to zero (mesh quality).
    pub fn clamped_weights(&self) -> usize {
        self.clamped_weights
    }

    pub fn base(&self) -> &PlanarTriangulation {
        &self.base
    }

    /// `f̂` at an arbitrary disk point; 0 outside the flattened mesh.
    pub fn hyper_factor_at(&self, w: Complex) -> f64 {
        let b = self.frame.inverse().apply(w);
        self.base.interpolate(&self.hyper_factor, b).unwrap_or(0.0)
    }

    /// Same as [`hyper_factor_at`](Self::hyper_factor_at) for a point given in base coordinates.
    pub(crate) fn hyper_factor_at_base(&self, b: Complex) -> f64 {
        self.base.interpolate(&self.hyper_factor, b).unwrap_or(0.0)
    }

    /// Surface location (face, barycentric) of a disk point; points outside
    /// the flattened polygon are clamped to its boundary.
    pub fn locate(&self, w: Complex) -> crate::locate::Location {
        self.base.locate_clamped(self.frame.inverse().apply(w))
    }

    /// Writes `vertex,re,im,factor,hyper_factor`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["vertex", "re", "im", "factor", "hyper_factor"])?;
        for i in 0..self.num_vertices() {
            w.write_record([
                i.to_string(),
                format!("{:.16e}", self.disk_coords[i].re),
                format!("{:.16e}", self.disk_coords[i].im),
                format!("{:.16e}", self.factor[i]),
                format!("{:.16e}", self.hyper_factor[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per face, the vertices receiving its area and their shares. Faces with
/// no interior corner hand their area to the interior corners of the nearest
/// face (breadth-first over edge adjacency) that has some.
fn interior_lumping(mesh: &TriMesh) -> Vec<Vec<(usize, f64)>> {
    let faces = mesh.faces();
    let interior_of = |f: &[usize; 3]| -> Vec<usize> { f.iter().copied().filter(|&v| !mesh.is_boundary(v)).collect() };
    let mut adjacency: Option<Vec<Vec<usize>>> = None;
    faces
        .iter()
        .enumerate()
        .map(|(fi, f)| {
            let mut inner = interior_of(f);
            if inner.is_empty() {
                let adj = adjacency.get_or_insert_with(|| face_adjacency(mesh));
                let mut seen = vec![false; faces.len()];
                let mut queue = std::collections::VecDeque::from([fi]);
                seen[fi] = true;
                while let Some(g) = queue.pop_front() {
                    let cand = interior_of(&faces[g]);
                    if !cand.is_empty() {
                        inner = cand;
                        break;
                    }
                    for &h in &adj[g] {
                        if !seen[h] {
                            seen[h] = true;
                            queue.push_back(h);
                        }
                    }
                }
            }
            let share = 1.0 / inner.len() as f64;
            inner.into_iter().map(|v| (v, share)).collect()
        })
        .collect()
}

fn face_adjacency(mesh: &TriMesh) -> Vec<Vec<usize>> {
    let mut by_edge: std::collections::HashMap<(usize, usize), Vec<usize>> = std::collections::HashMap::new();
    for (fi, f) in mesh.faces().iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            by_edge.entry((a.min(b), a.max(b))).or_default().push(fi);
        }
    }
    let mut adj = vec![Vec::new(); mesh.num_faces()];
    for fs in by_edge.values() {
        if fs.len() == 2 {
            adj[fs[0]].push(fs[1]);
            adj[fs[1]].push(fs[0]);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    adj
}

/// Interior-lumped per-vertex sums of the given per-face areas.
fn lump(lumping: &[Vec<(usize, f64)>], face_values: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (shares, &a) in lumping.iter().zip(face_values) {
        for &(v, s) in shares {
            out[v] += a * s;
        }
    }
    out
}

/// Normalized conformal factor of the flattening `disk_coords` of `mesh`:
/// interior vertices get `(surface area) / (planar area)` under interior
/// lumping, boundary vertices the same ratio over their one-ring; then
/// `f` is scaled so that `Σ f_i · planar_area_i = 1`.
pub fn conformal_factor(mesh: &TriMesh, disk_coords: &[Complex]) -> Result<Vec<f64>> {
    let (factor, _) = factor_and_planar_area(mesh, disk_coords, &interior_lumping(mesh))?;
    Ok(factor)
}

fn factor_and_planar_area(
    mesh: &TriMesh,
    disk_coords: &[Complex],
    lumping: &[Vec<(usize, f64)>],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if disk_coords.len() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch(format!(
            "{} disk coordinates for {} vertices",
            disk_coords.len(),
            mesh.num_vertices()
        )));
    }
    let n = mesh.num_vertices();
    let surf: Vec<f64> = mesh.face_areas();
    let planar: Vec<f64> = mesh
        .faces()
        .iter()
        .map(|f| signed_area(disk_coords[f[0]], disk_coords[f[1]], disk_coords[f[2]]).max(0.0))
        .collect();
    let s_lumped = lump(lumping, &surf, n);
    let p_lumped = lump(lumping, &planar, n);

    let mut ring_s = vec![0.0; n];
    let mut ring_p = vec![0.0; n];
    for (fi, f) in mesh.faces().iter().enumerate() {
        for &v in f {
            ring_s[v] += surf[fi];
            ring_p[v] += planar[fi];
        }
    }
    let mut factor = vec![0.0; n];
    for v in 0..n {
        if mesh.is_boundary(v) {
            factor[v] = if ring_p[v] > 0.0 { ring_s[v] / ring_p[v] } else { 0.0 };
        } else if p_lumped[v] > 0.0 {
            factor[v] = s_lumped[v] / p_lumped[v];
        } else {
            return Err(Error::Degenerate(format!("zero planar area at vertex {v}")));
        }
    }
    let total: f64 = factor.iter().zip(&p_lumped).map(|(f, p)| f * p).sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("conformal factor has zero mass".into()));
    }
    factor.iter_mut().for_each(|f| *f /= total);
    Ok((factor, p_lumped))
}

/// Cotangent weights `w_ij = (cot α + cot β) / 2` per undirected edge, with
/// negative values clamped to zero. Returns the weights and the clamp count.
fn cotangent_weights(mesh: &TriMesh) -> (std::collections::BTreeMap<(usize, usize), f64>, usize) {
    let v = mesh.vertices();
    let mut w: std::collections::BTreeMap<(usize, usize), f64> = std::collections::BTreeMap::new();
    for f in mesh.faces() {
        for k in 0..3 {
            let (i, j, o) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
            let a: Vec3 = v[i] - v[o];
            let b: Vec3 = v[j] - v[o];
            let cot = a.dot(&b) / a.cross(&b).norm();
            *w.entry((i.min(j), i.max(j))).or_insert(0.0) += 0.5 * cot;
        }
    }
    let mut clamped = 0;
    for val in w.values_mut() {
        if *val < 0.0 {
            *val = 0.0;
            clamped += 1;
        }
    }
    (w, clamped)
}

/// Harmonic disk coordinates with the boundary on the unit circle by
/// cumulative arc length, starting at the smallest-index boundary vertex.
fn harmonic_disk_map(mesh: &TriMesh) -> Result<(Vec<Complex>, usize)> {
    let n = mesh.num_vertices();
    let bl = mesh.boundary_loop();
    let start = bl.iter().enumerate().min_by_key(|(_, &v)| v).map(|(k, _)| k).unwrap_or(0);
    let ordered: Vec<usize> = bl[start..].iter().chain(&bl[..start]).copied().collect();
    let verts = mesh.vertices();
    let mut cumulative = Vec::with_capacity(ordered.len());
    let mut len = 0.0;
    for k in 0..ordered.len() {
        cumulative.push(len);
        len += (verts[ordered[(k + 1) % ordered.len()]] - verts[ordered[k]]).norm();
    }
    let mut z = vec![Complex::new(0.0, 0.0); n];
    for (k, &v) in ordered.iter().enumerate() {
        z[v] = Complex::from_polar(1.0, std::f64::consts::TAU * cumulative[k] / len);
    }

    let (weights, clamped) = cotangent_weights(mesh);
    let mut index = vec![usize::MAX; n];
    let mut interior = Vec::new();
    for v in 0..n {
        if !mesh.is_boundary(v) {
            index[v] = interior.len();
            interior.push(v);
        }
    }
    if interior.is_empty() {
        return Err(Error::Degenerate("mesh has no interior vertices to flatten".into()));
    }
    let m = interior.len();
    let mut trip = Vec::with_capacity(weights.len() * 4);
    let mut rhs_x = vec![0.0; m];
    let mut rhs_y = vec![0.0; m];
    for (&(a, b), &wab) in &weights {
        for (p, q) in [(a, b), (b, a)] {
            if index[p] == usize::MAX {
                continue;
            }
            let ip = index[p];
            trip.push((ip, ip, wab));
            if index[q] == usize::MAX {
                rhs_x[ip] += wab * z[q].re;
                rhs_y[ip] += wab * z[q].im;
            } else {
                trip.push((ip, index[q], -wab));
            }
        }
    }
    let lap = CsrMatrix::from_triplets(m, trip);
    if lap.diagonal().iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Solver("interior vertex with no positive cotangent weight".into()));
    }
    let max_iter = 20 * m + 1000;
    let mut x = vec![0.0; m];
    let mut y = vec![0.0; m];
    conjugate_gradient(&lap, &rhs_x, &mut x, SOLVER_TOL, max_iter, false)?;
    conjugate_gradient(&lap, &rhs_y, &mut y, SOLVER_TOL, max_iter, false)?;
    for (k, &v) in interior.iter().enumerate() {
        z[v] = Complex::new(x[k], y[k]);
    }
    Ok((z, clamped))
}

fn count_flipped(faces: &[[usize; 3]], z: &[Complex]) -> usize {
    faces.iter().filter(|f| !(signed_area(z[f[0]], z[f[1]], z[f[2]]) > 0.0)).count()
}

/// Conformally flattens `mesh` onto the unit disk.
pub fn flatten(mesh: &TriMesh) -> Result<FlatMap> {
    let (mut z, clamped) = harmonic_disk_map(mesh)?;
    let flipped = count_flipped(mesh.faces(), &z);
    if flipped > 0 {
        return Err(Error::Flipped(flipped));
    }
    for w in z.iter_mut() {
        if w.norm() >= 1.0 {
            *w /= w.norm();
        }
    }
    let lumping = interior_lumping(mesh);

    // canonical recentring: move the f-mass centroid to the origin
    let (factor, planar) = factor_and_planar_area(mesh, &z, &lumping)?;
    let mass: Vec<f64> = factor.iter().zip(&planar).map(|(f, p)| f * p).collect();
    for _ in 0..200 {
        let c: Complex = z.iter().zip(&mass).map(|(z, m)| z * m).sum();
        if c.norm() < 1e-13 {
            break;
        }
        let m = MobiusTransform::to_origin(c);
        for (w, &b) in z.iter_mut().zip(mesh.boundary_mask()) {
            *w = m.apply(*w);
            if b {
                *w /= w.norm();
            }
        }
    }
    let flipped = count_flipped(mesh.faces(), &z);
    if flipped > 0 {
        return Err(Error::Flipped(flipped));
    }
    let (factor, planar_area) = factor_and_planar_area(mesh, &z, &lumping)?;
    let hyper_factor = hyper(&z, &factor);
    let base = PlanarTriangulation::new(z.clone(), mesh.faces().to_vec(), mesh.boundary_loop());
    Ok(FlatMap {
        source_id: mesh.specimen_id().to_string(),
        base: Arc::new(base),
        is_boundary: Arc::new(mesh.boundary_mask().to_vec()),
        frame: MobiusTransform::identity(),
        disk_coords: z,
        factor,
        hyper_factor,
        planar_area,
        clamped_weights: clamped,
    })
}

/// Builds a [`FlatMap`] from caller-supplied disk coordinates (e.g. an
/// already-flat mesh); the coordinates must be an orientation-preserving
/// embedding in the closed unit disk.
pub fn flat_map_from_coords(mesh: &TriMesh, disk_coords: Vec<Complex>) -> Result<FlatMap> {
    if disk_coords.iter().any(|z| z.norm() > 1.0 + 1e-9) {
        return Err(Error::InvalidArgument("disk coordinates outside the unit disk".into()));
    }
    let flipped = count_flipped(mesh.faces(), &disk_coords);
    if flipped > 0 {
        return Err(Error::Flipped(flipped));
    }
    let lumping = interior_lumping(mesh);
    let (factor, planar_area) = factor_and_planar_area(mesh, &disk_coords, &lumping)?;
    let hyper_factor = hyper(&disk_coords, &factor);
    let base = PlanarTriangulation::new(disk_coords.clone(), mesh.faces().to_vec(), mesh.boundary_loop());
    Ok(FlatMap {
        source_id: mesh.specimen_id().to_string(),
        base: Arc::new(base),
        is_boundary: Arc::new(mesh.boundary_mask().to_vec()),
        frame: MobiusTransform::identity(),
        disk_coords,
        factor,
        hyper_factor,
        planar_area,
        clamped_weights: 0,
    })
}

fn hyper(z: &[Complex], f: &[f64]) -> Vec<f64> {
    z.iter()
        .zip(f)
        .map(|(z, f)| {
            let s = 1.0 - z.norm_sqr();
            s * s * f
        })
        .collect()
}

/// Pushes a flat map forward by `m`: coordinates become `m(z)`, the density
/// `f` is divided by the Jacobian `|m'(z)|²` and the planar quadrature
/// weights multiplied by it, so the total mass is unchanged and `f̂` is
/// carried along vertex trajectories.
pub fn recentre(flat: &FlatMap, m: &MobiusTransform) -> FlatMap {
    let mut out = flat.clone();
    out.frame = m.compose(&flat.frame);
    for i in 0..flat.num_vertices() {
        let z = flat.disk_coords[i];
        let jac = m.derivative_norm(z).powi(2);
        let w = m.apply(z);
        out.disk_coords[i] = w;
        out.factor[i] = flat.factor[i] / jac;
        out.planar_area[i] = flat.planar_area[i] * jac;
        let s = 1.0 - w.norm_sqr();
        out.hyper_factor[i] = s * s * out.factor[i];
    }
    out
}

/// Interior-lumped planar vertex areas of the triangulation `coords`
/// (used to re-derive quadrature weights from moved coordinates).
pub fn lumped_planar_areas(mesh: &TriMesh, coords: &[Complex]) -> Vec<f64> {
    let planar: Vec<f64> = mesh
        .faces()
        .iter()
        .map(|f| signed_area(coords[f[0]], coords[f[1]], coords[f[2]]))
        .collect();
    lump(&interior_lumping(mesh), &planar, mesh.num_vertices())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn flat_disk_factor_is_constant() {
        let mesh = synth::disk_mesh(10, |_, _| 0.0, "disk");
        let z: Vec<Complex> = mesh.vertices().iter().map(|v| Complex::new(v.x, v.y)).collect();
        let f = conformal_factor(&mesh, &z).unwrap();
        let polygon_area: f64 = mesh.total_area();
        for (v, &fv) in f.iter().enumerate() {
            if !mesh.is_boundary(v) {
                assert!((fv - 1.0 / polygon_area).abs() < 1e-12, "{fv}");
            }
        }
    }

    #[test]
    fn masses_sum_to_one_and_boundary_is_on_circle() {
        let mesh = synth::disk_mesh(8, |x, y| 0.3 * (-(x * x + y * y) * 4.0).exp(), "bump");
        let flat = flatten(&mesh).unwrap();
        let total: f64 = flat.vertex_mass().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (z, &b) in flat.disk_coords().iter().zip(flat.boundary_mask()) {
            if b {
                assert!((z.norm() - 1.0).abs() < 1e-9);
            } else {
                assert!(z.norm() < 1.0);
            }
        }
        assert_eq!(count_flipped(mesh.faces(), flat.disk_coords()), 0);
    }

    #[test]
    fn single_triangle_cannot_be_flattened() {
        let mesh = TriMesh::new(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
            "t",
        )
        .unwrap();
        assert!(matches!(flatten(&mesh), Err(Error::Degenerate(_))));
    }

    #[test]
    fn recentre_identity_and_inverse() {
        let mesh = synth::disk_mesh(6, |x, y| 0.2 * x * y, "saddle");
        let flat = flatten(&mesh).unwrap();
        let same = recentre(&flat, &MobiusTransform::identity());
        for i in 0..flat.num_vertices() {
            assert!((same.disk_coords()[i] - flat.disk_coords()[i]).norm() < 1e-12);
            assert!((same.factor()[i] - flat.factor()[i]).abs() < 1e-12);
        }
        let m = MobiusTransform::new(1.1, Complex::new(0.3, -0.4)).unwrap();
        let moved = recentre(&flat, &m);
        let back = recentre(&moved, &m.inverse());
        for i in 0..flat.num_vertices() {
            assert!((back.disk_coords()[i] - flat.disk_coords()[i]).norm() < 1e-9);
            assert!((back.factor()[i] - flat.factor()[i]).abs() < 1e-9);
            assert!((moved.hyper_factor()[i] - flat.hyper_factor()[i]).abs() < 1e-9);
        }
        let total: f64 = moved.vertex_mass().iter().sum();
        assert!((total - 1.0).abs() < 1e-6);
    }
}
