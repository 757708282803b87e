//! Landmarks stored intrinsically as a face index plus barycentric weights.

use std::collections::HashSet;
use std::io::{Read, Write};

use super::{TriMesh, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Landmark {
    pub label: String,
    pub face: usize,
    pub bary: [f64; 3],
}

/// An ordered set of uniquely labelled landmarks on one mesh.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LandmarkSet {
    entries: Vec<Landmark>,
}

impl LandmarkSet {
    pub fn new(entries: Vec<Landmark>) -> Result<Self> {
        let mut seen = HashSet::new();
        for lm in &entries {
            if !seen.insert(lm.label.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate landmark label {:?}", lm.label)));
            }
            let sum: f64 = lm.bary.iter().sum();
            if (sum - 1.0).abs() > 1e-12 || lm.bary.iter().any(|&b| b < -1e-12 || !b.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "landmark {:?} has invalid barycentric coordinates {:?}",
                    lm.label, lm.bary
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Checks every face index against `mesh`.
    pub fn check_mesh(&self, mesh: &TriMesh) -> Result<()> {
        for lm in &self.entries {
            if lm.face >= mesh.num_faces() {
                return Err(Error::IndexOutOfRange(format!(
                    "landmark {:?} references face {} of {}",
                    lm.label,
                    lm.face,
                    mesh.num_faces()
                )));
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[Landmark] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.entries.iter().map(|l| l.label.as_str()).collect()
    }

    pub fn positions(&self, mesh: &TriMesh) -> Result<Vec<Vec3>> {
        self.entries.iter().map(|l| landmark_to_point(mesh, l)).collect()
    }
}

/// Barycentric combination of the landmark's face corners.
pub fn landmark_to_point(mesh: &TriMesh, lm: &Landmark) -> Result<Vec3> {
    let f = mesh
        .faces()
        .get(lm.face)
        .ok_or_else(|| Error::IndexOutOfRange(format!("face {} of {}", lm.face, mesh.num_faces())))?;
    let v = mesh.vertices();
    Ok(v[f[0]] * lm.bary[0] + v[f[1]] * lm.bary[1] + v[f[2]] * lm.bary[2])
}

/// A point on a mesh surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub face: usize,
    pub bary: [f64; 3],
    pub position: Vec3,
    pub distance: f64,
}

/// Closest point on triangle `abc` to `p`, with its barycentric coordinates.
pub(crate) fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

/// Nearest point of the surface to `p` by exhaustive search over faces;
/// ties go to the smallest face index.
pub fn nearest_surface_point(mesh: &TriMesh, p: &Vec3) -> SurfacePoint {
    let v = mesh.vertices();
    let mut best: Option<SurfacePoint> = None;
    for (fi, f) in mesh.faces().iter().enumerate() {
        let (q, bary) = closest_point_on_triangle(p, &v[f[0]], &v[f[1]], &v[f[2]]);
        let d = (q - p).norm();
        if best.map_or(true, |b| d < b.distance) {
            best = Some(SurfacePoint { face: fi, bary, position: q, distance: d });
        }
    }
    best.expect("mesh has at least one face")
}

/// Reads a landmark CSV with header `label,face,b0,b1,b2`, or
/// `label,x,y,z` in which case each point is snapped to the nearest surface
/// point of `mesh`.
pub fn read_landmarks_csv(source: impl Read, mesh: &TriMesh) -> Result<LandmarkSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers: Vec<String> = rdr.headers()?.iter().map(|s| s.to_ascii_lowercase()).collect();
    let intrinsic = headers == ["label", "face", "b0", "b1", "b2"];
    let snap = headers == ["label", "x", "y", "z"];
    if !intrinsic && !snap {
        return Err(Error::Parse(format!(
            "landmark header must be label,face,b0,b1,b2 or label,x,y,z; found {}",
            headers.join(",")
        )));
    }
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let label = rec[0].to_string();
        let num = |i: usize| -> Result<f64> { parse_field(&rec[i]) };
        if intrinsic {
            let face: usize = rec[1]
                .parse()
                .map_err(|_| Error::Parse(format!("invalid face index {:?}", &rec[1])))?;
            entries.push(Landmark { label, face, bary: [num(2)?, num(3)?, num(4)?] });
        } else {
            let sp = nearest_surface_point(mesh, &Vec3::new(num(1)?, num(2)?, num(3)?));
            entries.push(Landmark { label, face: sp.face, bary: sp.bary });
        }
    }
    let set = LandmarkSet::new(entries)?;
    set.check_mesh(mesh)?;
    Ok(set)
}

fn parse_field(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse(format!("invalid number {s:?}")))
}

/// Writes the intrinsic `label,face,b0,b1,b2` form.
pub fn write_landmarks_csv(set: &LandmarkSet, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "face", "b0", "b1", "b2"])?;
    for lm in set.entries() {
        w.write_record([
            lm.label.clone(),
            lm.face.to_string(),
            format!("{:.16e}", lm.bary[0]),
            format!("{:.16e}", lm.bary[1]),
            format!("{:.16e}", lm.bary[2]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> TriMesh {
        TriMesh::new(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
            "t",
        )
        .unwrap()
    }

    #[test]
    fn corner_and_centroid() {
        let m = tri();
        let lm = Landmark { label: "a".into(), face: 0, bary: [1.0, 0.0, 0.0] };
        assert_eq!(landmark_to_point(&m, &lm).unwrap(), Vec3::zeros());
        let c = Landmark { label: "c".into(), face: 0, bary: [1.0 / 3.0; 3] };
        let p = landmark_to_point(&m, &c).unwrap();
        assert!((p - Vec3::new(1.0 / 3.0, 1.0 / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn out_of_range_face() {
        let lm = Landmark { label: "a".into(), face: 3, bary: [1.0, 0.0, 0.0] };
        assert!(matches!(landmark_to_point(&tri(), &lm), Err(Error::IndexOutOfRange(_))));
    }

    #[test]
    fn invalid_sets() {
        let a = Landmark { label: "a".into(), face: 0, bary: [0.5, 0.5, 0.0] };
        assert!(LandmarkSet::new(vec![a.clone(), a.clone()]).is_err());
        let bad = Landmark { label: "b".into(), face: 0, bary: [0.5, 0.6, 0.0] };
        assert!(LandmarkSet::new(vec![bad]).is_err());
    }

    #[test]
    fn csv_both_headers() {
        let m = tri();
        let set = read_landmarks_csv("label,face,b0,b1,b2\ntip,0,0.2,0.3,0.5\n".as_bytes(), &m).unwrap();
        assert_eq!(set.entries()[0].bary, [0.2, 0.3, 0.5]);
        let snapped = read_landmarks_csv("label,x,y,z\ntip,0.25,0.25,1.0\n".as_bytes(), &m).unwrap();
        let p = landmark_to_point(&m, &snapped.entries()[0]).unwrap();
        assert!((p - Vec3::new(0.25, 0.25, 0.0)).norm() < 1e-12);
        let mut buf = Vec::new();
        write_landmarks_csv(&set, &mut buf).unwrap();
        let back = read_landmarks_csv(buf.as_slice(), &m).unwrap();
        assert_eq!(back, set);
    }
}
