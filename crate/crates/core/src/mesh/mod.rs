//! Disk-type triangle meshes: construction, validation, measurement and
//! landmark storage.

mod io;
mod landmarks;
mod topology;

pub use io::{load_mesh, load_mesh_file, parse_raw_mesh, write_off, write_ply_ascii, MeshFormat, RawMesh};
pub use landmarks::{
    landmark_to_point, nearest_surface_point, read_landmarks_csv, write_landmarks_csv, Landmark,
    LandmarkSet, SurfacePoint,
};
pub use topology::{validate_disk_topology, TopologyReport};

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Relative tolerance (times the bounding-box diagonal) below which two
/// vertices count as duplicates.
pub const DUPLICATE_VERTEX_TOL: f64 = 1e-9;
/// Relative tolerance (times the squared bounding-box diagonal) below which a
/// face counts as degenerate.
pub const DEGENERATE_AREA_TOL: f64 = 1e-14;

/// A triangulated surface with the topology of a closed disk.
///
/// Instances are immutable once built; every constructor re-runs the full
/// validation.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    specimen_id: String,
    boundary_loop: Vec<usize>,
    is_boundary: Vec<bool>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, specimen_id: impl Into<String>) -> Result<Self> {
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::Parse("non-finite vertex coordinate".into()));
        }
        let report = validate_disk_topology(vertices.len(), &faces);
        if report.out_of_range_indices > 0 {
            return Err(Error::IndexOutOfRange(format!(
                "{} face indices exceed vertex count {}",
                report.out_of_range_indices,
                vertices.len()
            )));
        }
        if !report.pass {
            return Err(Error::Topology(report.failure_reason().unwrap_or_default()));
        }
        let diag = bbox_diagonal(&vertices);
        let area_tol = DEGENERATE_AREA_TOL * diag * diag;
        for (fi, f) in faces.iter().enumerate() {
            let a = triangle_area(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]);
            if a <= area_tol {
                return Err(Error::Degenerate(format!("face {fi} has area {a:e}")));
            }
        }
        if let Some((i, j)) = find_duplicate_vertices(&vertices, DUPLICATE_VERTEX_TOL * diag) {
            return Err(Error::Degenerate(format!("vertices {i} and {j} coincide")));
        }
        let boundary_loop = report.boundary_loop.expect("validated mesh has one boundary loop");
        let mut is_boundary = vec![false; vertices.len()];
        for &v in &boundary_loop {
            is_boundary[v] = true;
        }
        Ok(Self {
            vertices,
            faces,
            specimen_id: specimen_id.into(),
            boundary_loop,
            is_boundary,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn specimen_id(&self) -> &str {
        &self.specimen_id
    }

    /// Boundary vertices in order, with the surface on the left.
    pub fn boundary_loop(&self) -> &[usize] {
        &self.boundary_loop
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.is_boundary[v]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.is_boundary
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_interior(&self) -> usize {
        self.vertices.len() - self.boundary_loop.len()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.specimen_id = id.into();
        self
    }

    /// Applies `f` to every vertex and revalidates.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<TriMesh> {
        let vertices = self.vertices.iter().map(f).collect();
        TriMesh::new(vertices, self.faces.clone(), self.specimen_id.clone())
    }

    pub fn face_area(&self, fi: usize) -> f64 {
        let f = self.faces[fi];
        triangle_area(&self.vertices[f[0]], &self.vertices[f[1]], &self.vertices[f[2]])
    }

    pub fn face_areas(&self) -> Vec<f64> {
        (0..self.faces.len()).map(|f| self.face_area(f)).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.face_areas().iter().sum()
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        bbox_diagonal(&self.vertices)
    }

    /// Largest Euclidean distance between two vertices.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                best = best.max((a - b).norm_squared());
            }
        }
        best.sqrt()
    }

    /// Sorted one-ring neighbours of every vertex.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb: Vec<Vec<usize>> = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                nb[a].push(b);
                nb[b].push(a);
            }
        }
        for list in &mut nb {
            list.sort_unstable();
            list.dedup();
        }
        nb
    }

    /// Faces incident to each vertex, in increasing face order.
    pub fn vertex_faces(&self) -> Vec<Vec<usize>> {
        let mut vf: Vec<Vec<usize>> = vec![Vec::new(); self.vertices.len()];
        for (fi, f) in self.faces.iter().enumerate() {
            for &v in f {
                vf[v].push(fi);
            }
        }
        vf
    }

    /// Undirected edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|f| (0..3).map(move |k| (f[k].min(f[(k + 1) % 3]), f[k].max(f[(k + 1) % 3]))))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Area-weighted centroid of the surface.
    pub fn area_centroid(&self) -> Vec3 {
        let mut c = Vec3::zeros();
        let mut total = 0.0;
        for (fi, f) in self.faces.iter().enumerate() {
            let a = self.face_area(fi);
            c += a * (self.vertices[f[0]] + self.vertices[f[1]] + self.vertices[f[2]]) / 3.0;
            total += a;
        }
        c / total
    }
}

pub fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

fn bbox_diagonal(vertices: &[Vec3]) -> f64 {
    if vertices.is_empty() {
        return 0.0;
    }
    let mut lo = vertices[0];
    let mut hi = vertices[0];
    for v in vertices {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    (hi - lo).norm()
}

fn find_duplicate_vertices(vertices: &[Vec3], tol: f64) -> Option<(usize, usize)> {
    if vertices.len() < 2 {
        return None;
    }
    // sweep along the axis of largest extent
    let mut lo = vertices[0];
    let mut hi = vertices[0];
    for v in vertices {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    let axis = (hi - lo).imax();
    let mut order: Vec<usize> = (0..vertices.len()).collect();
    order.sort_by(|&i, &j| vertices[i][axis].total_cmp(&vertices[j][axis]).then(i.cmp(&j)));
    let tol2 = tol * tol;
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if vertices[j][axis] - vertices[i][axis] > tol {
                break;
            }
            if (vertices[i] - vertices[j]).norm_squared() <= tol2 {
                return Some((i.min(j), i.max(j)));
            }
        }
    }
    None
}

/// Barycentrically lumped vertex areas: each vertex receives one third of the
/// area of every incident face.
pub fn vertex_areas(mesh: &TriMesh) -> Vec<f64> {
    let mut w = vec![0.0; mesh.num_vertices()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let a = mesh.face_area(fi) / 3.0;
        for &v in f {
            w[v] += a;
        }
    }
    w
}

/// Translates the area-weighted centroid to the origin and scales to unit
/// total surface area.
pub fn normalize_mesh(mesh: &TriMesh) -> Result<TriMesh> {
    let area = mesh.total_area();
    if !(area > 0.0) || !area.is_finite() {
        return Err(Error::Degenerate("mesh has zero surface area".into()));
    }
    let c = mesh.area_centroid();
    let s = 1.0 / area.sqrt();
    mesh.map_vertices(|v| (v - c) * s)
}

/// The similarity transform `x -> scale * (x - center)` applied by [`normalize_mesh`].
pub fn normalization_transform(mesh: &TriMesh) -> (Vec3, f64) {
    (mesh.area_centroid(), 1.0 / mesh.total_area().sqrt())
}
