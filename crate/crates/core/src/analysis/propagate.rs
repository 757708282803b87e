//! Carrying landmarks across surfaces through correspondence maps.

use crate::distances::CorrespondenceMap;
use crate::error::{Error, Result};
use crate::mesh::{nearest_surface_point, triangle_area, Landmark, LandmarkSet, TriMesh};

/// Relative area (against the mean image face) below which an image
/// triangle counts as degenerate.
const DEGENERATE_IMAGE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub landmarks: LandmarkSet,
    /// `(label, reason)` for every landmark that could not be carried.
    pub failures: Vec<(String, String)>,
}

fn check_ids(map: &CorrespondenceMap, source: &TriMesh, target: &TriMesh) -> Result<()> {
    if map.source_id != source.specimen_id() || map.target_id != target.specimen_id() {
        return Err(Error::IdMismatch(format!(
            "map {} -> {} applied to {} -> {}",
            map.source_id,
            map.target_id,
            source.specimen_id(),
            target.specimen_id()
        )));
    }
    map.check_meshes(source, target)
}

/// Interpolates the images of the landmark's face corners and snaps the
/// result to the nearest point of the target surface.
pub fn propagate_landmarks(map: &CorrespondenceMap, landmarks: &LandmarkSet, source: &TriMesh, target: &TriMesh) -> Result<Propagation> {
    check_ids(map, source, target)?;
    landmarks.check_mesh(source)?;
    let images = map.image_points(target)?;
    let mean_area = source
        .faces()
        .iter()
        .map(|f| triangle_area(&images[f[0]], &images[f[1]], &images[f[2]]))
        .sum::<f64>()
        / source.num_faces() as f64;
    let mut out = Vec::with_capacity(landmarks.len());
    let mut failures = Vec::new();
    for lm in landmarks.entries() {
        let f = source.faces()[lm.face];
        let (a, b, c) = (images[f[0]], images[f[1]], images[f[2]]);
        let at_vertex = lm.bary.iter().any(|&w| w == 1.0);
        if !at_vertex && !(triangle_area(&a, &b, &c) > DEGENERATE_IMAGE * mean_area) {
            failures.push((lm.label.clone(), format!("image of face {} is degenerate", lm.face)));
            continue;
        }
        let p = a * lm.bary[0] + b * lm.bary[1] + c * lm.bary[2];
        let sp = nearest_surface_point(target, &p);
        out.push(Landmark { label: lm.label.clone(), face: sp.face, bary: sp.bary });
    }
    Ok(Propagation { landmarks: LandmarkSet::new(out)?, failures })
}

/// Propagates through a chain of maps; `meshes[k]` is the source of
/// `maps[k]` and `meshes[k + 1]` its target. Landmarks failing at any step
/// are dropped from later steps and reported.
pub fn propagate_along_path(maps: &[CorrespondenceMap], meshes: &[&TriMesh], landmarks: &LandmarkSet) -> Result<Propagation> {
    if maps.is_empty() || meshes.len() != maps.len() + 1 {
        return Err(Error::InvalidArgument(format!("{} maps need {} meshes, got {}", maps.len(), maps.len() + 1, meshes.len())));
    }
    for w in maps.windows(2) {
        if w[0].target_id != w[1].source_id {
            return Err(Error::IdMismatch(format!("path breaks between {} and {}", w[0].target_id, w[1].source_id)));
        }
    }
    let mut current = landmarks.clone();
    let mut failures = Vec::new();
    for (k, map) in maps.iter().enumerate() {
        let step = propagate_landmarks(map, &current, meshes[k], meshes[k + 1])?;
        current = step.landmarks;
        failures.extend(step.failures);
    }
    Ok(Propagation { landmarks: current, failures })
}
