//! Distances between flattened surfaces: the conformal Wasserstein distance
//! `cW`, the neighbourhood dissimilarity distance `cWn`, the continuous
//! Procrustes distance `cP`, and the discrete landmark Procrustes distance.

mod correct;
mod correspondence;
mod cp;
mod cw;
mod cwn;
mod deform;
mod peaks;
mod rigid;
mod sampling;

pub use correct::{area_preserving_correction, area_residual, AreaCorrection, CorrectionParams, PushedArea, SourceDomain};
pub use correspondence::{read_correspondence_csv, write_correspondence_csv, CorrespondenceMap, MapMethod};
pub use cp::{cp_distance, CpParams, CpResult};
pub use cw::{cw_distance, CwResult, MobiusGrid};
pub use cwn::{cwn_correspondence, cwn_cost, cwn_distance, CwnParams, CwnResult, NeighborhoodLandscape};
pub use deform::{align_peak_deformation, match_peaks, PeakDeformation};
pub use peaks::{detect_peaks, prominences, Peak, MAX_PEAKS};
pub use rigid::{discrete_procrustes, rigid_align, rigid_align_with, weighted_residual, RigidMotion};
pub use sampling::{graph_distances, sample_surface, SampleSet};

use num_complex::Complex64 as Complex;

use crate::flatten::FlatMap;
use crate::locate::{signed_area, Location};
use crate::mesh::{TriMesh, Vec3};

/// Lifts disk points of a flattening back onto its surface by piecewise
/// linear interpolation; points outside are clamped to the boundary.
#[derive(Clone)]
pub struct MeshLift<'a> {
    pub flat: &'a FlatMap,
    pub mesh: &'a TriMesh,
    /// Surface area per unit area of each face in base disk coordinates.
    density: Vec<f64>,
}

impl<'a> MeshLift<'a> {
    pub fn new(flat: &'a FlatMap, mesh: &'a TriMesh) -> Self {
        let z = flat.base().coords();
        let density = mesh
            .faces()
            .iter()
            .zip(mesh.face_areas())
            .map(|(f, a)| a / signed_area(z[f[0]], z[f[1]], z[f[2]]))
            .collect();
        Self { flat, mesh, density }
    }

    pub fn locate(&self, w: Complex) -> Location {
        self.flat.locate(w)
    }

    pub fn point(&self, loc: &Location) -> Vec3 {
        let f = self.mesh.faces()[loc.face];
        let v = self.mesh.vertices();
        v[f[0]] * loc.bary[0] + v[f[1]] * loc.bary[1] + v[f[2]] * loc.bary[2]
    }
}

impl PushedArea for MeshLift<'_> {
    /// Exact integral of the face-wise density over the triangle in base
    /// coordinates; any part outside the flattened polygon takes the density
    /// of the nearest face.
    fn pushed_area(&self, tri: [Complex; 3]) -> f64 {
        let unframe = self.flat.frame().inverse();
        let t = tri.map(|w| unframe.apply(w));
        let base = self.flat.base();
        let whole = signed_area(t[0], t[1], t[2]);
        if let Some((f, _)) = base.locate((t[0] + t[1] + t[2]) / 3.0) {
            if t.iter().all(|&w| base.barycentric(f, w).iter().all(|&b| b >= 0.0)) {
                return whole * self.density[f];
            }
        }
        let (mut area, mut covered) = (0.0, 0.0);
        base.overlaps(t, |f, a| {
            area += self.density[f] * a;
            covered += a;
        });
        let rest = whole - covered;
        if rest > 0.0 {
            area += rest * self.density[base.locate_clamped((t[0] + t[1] + t[2]) / 3.0).face];
        }
        area
    }
}
