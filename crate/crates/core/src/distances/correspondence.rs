//! Piecewise-linear surface correspondences and their CSV form.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use super::rigid::RigidMotion;
use crate::error::{Error, Result};
use crate::mesh::{TriMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapMethod {
    #[serde(rename = "cP")]
    Cp,
    #[serde(rename = "cWn-argmax")]
    CwnArgmax,
    #[serde(rename = "identity")]
    Identity,
}

/// A map from the vertices of a source mesh to points of a target mesh,
/// extended linearly over source faces.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceMap {
    pub source_id: String,
    pub target_id: String,
    pub method: MapMethod,
    /// Image of every source vertex: target face and barycentric coordinates.
    pub images: Vec<(usize, [f64; 3])>,
    /// Max over source faces of `|image area share / source area share − 1|`.
    pub residual: f64,
    /// Whether the area correction reached its tolerance.
    pub converged: bool,
    pub motion: RigidMotion,
    pub distance: f64,
}

impl CorrespondenceMap {
    /// The identity map of a mesh onto itself.
    pub fn identity(mesh: &TriMesh) -> Self {
        let vf = mesh.vertex_faces();
        let images = (0..mesh.num_vertices())
            .map(|v| {
                let face = vf[v][0];
                let mut bary = [0.0; 3];
                bary[mesh.faces()[face].iter().position(|&x| x == v).expect("vertex in its face")] = 1.0;
                (face, bary)
            })
            .collect();
        Self {
            source_id: mesh.specimen_id().to_string(),
            target_id: mesh.specimen_id().to_string(),
            method: MapMethod::Identity,
            images,
            residual: 0.0,
            converged: true,
            motion: RigidMotion::identity(),
            distance: 0.0,
        }
    }

    /// 3D image of every source vertex.
    pub fn image_points(&self, target: &TriMesh) -> Result<Vec<Vec3>> {
        let v = target.vertices();
        self.images
            .iter()
            .map(|&(fi, b)| {
                let f = target
                    .faces()
                    .get(fi)
                    .ok_or_else(|| Error::IndexOutOfRange(format!("target face {fi}")))?;
                Ok(v[f[0]] * b[0] + v[f[1]] * b[1] + v[f[2]] * b[2])
            })
            .collect()
    }

    /// Checks that the map can be applied from `source` to `target`.
    pub fn check_meshes(&self, source: &TriMesh, target: &TriMesh) -> Result<()> {
        if self.images.len() != source.num_vertices() {
            return Err(Error::DimensionMismatch(format!(
                "map has {} images but the source mesh has {} vertices",
                self.images.len(),
                source.num_vertices()
            )));
        }
        if let Some(&(f, _)) = self.images.iter().find(|(f, _)| *f >= target.num_faces()) {
            return Err(Error::IndexOutOfRange(format!("target face {f}")));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    method: MapMethod,
    residual: Option<f64>,
    converged: bool,
    rigid_motion: Vec<f64>,
    distance: f64,
    source_id: String,
    target_id: String,
}

/// Writes `# {json header}` followed by `source_vertex,target_face,b0,b1,b2`.
pub fn write_correspondence_csv(map: &CorrespondenceMap, mut out: impl Write) -> Result<()> {
    let header = Header {
        method: map.method,
        residual: map.residual.is_finite().then_some(map.residual),
        converged: map.converged,
        rigid_motion: map.motion.to_array().to_vec(),
        distance: map.distance,
        source_id: map.source_id.clone(),
        target_id: map.target_id.clone(),
    };
    writeln!(out, "# {}", serde_json::to_string(&header)?)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["source_vertex", "target_face", "b0", "b1", "b2"])?;
    for (v, (f, b)) in map.images.iter().enumerate() {
        w.write_record([v.to_string(), f.to_string(), b[0].to_string(), b[1].to_string(), b[2].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_correspondence_csv(source: impl Read) -> Result<CorrespondenceMap> {
    let mut reader = BufReader::new(source);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let json = first
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("correspondence file must start with a '# {json}' header".into()))?;
    let header: Header = serde_json::from_str(json.trim())?;
    let motion: [f64; 12] = header
        .rigid_motion
        .as_slice()
        .try_into()
        .map_err(|_| Error::Parse("rigid_motion must have 12 numbers".into()))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut images = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| -> Result<&str> {
            rec.get(k).ok_or_else(|| Error::Parse(format!("row {}: missing column {k}", row + 2)))
        };
        let v: usize = field(0)?.parse().map_err(|_| Error::Parse(format!("row {}: bad vertex", row + 2)))?;
        if v != images.len() {
            return Err(Error::Parse(format!("row {}: vertices must be listed in order", row + 2)));
        }
        let f: usize = field(1)?.parse().map_err(|_| Error::Parse(format!("row {}: bad face", row + 2)))?;
        let mut b = [0.0; 3];
        for (k, bk) in b.iter_mut().enumerate() {
            *bk = field(2 + k)?
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad barycentric coordinate", row + 2)))?;
        }
        images.push((f, b));
    }
    Ok(CorrespondenceMap {
        source_id: header.source_id,
        target_id: header.target_id,
        method: header.method,
        images,
        residual: header.residual.unwrap_or(f64::INFINITY),
        converged: header.converged,
        motion: RigidMotion::from_array(&motion),
        distance: header.distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn csv_round_trip_is_exact() {
        let mesh = synth::bump_surface(3, &synth::family_base(1), "m");
        let mut map = CorrespondenceMap::identity(&mesh);
        map.images[3].1 = [0.1, 0.2, 0.7];
        map.residual = 0.0123456789012345;
        map.motion.translation = Vec3::new(0.1, -1.0 / 3.0, 2.0);
        let mut buf = Vec::new();
        write_correspondence_csv(&map, &mut buf).unwrap();
        let back = read_correspondence_csv(buf.as_slice()).unwrap();
        assert_eq!(back, map);
        let pts = back.image_points(&mesh).unwrap();
        assert_eq!(pts[0], mesh.vertices()[0]);
    }

    #[test]
    fn rejects_missing_header() {
        assert!(read_correspondence_csv("source_vertex,target_face,b0,b1,b2\n".as_bytes()).is_err());
    }
}
