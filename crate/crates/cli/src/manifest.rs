//! Specimen manifests: `id,mesh_path,label1,label2,...` with a header row
//! naming the label levels. Mesh paths resolve against the manifest's
//! directory; `<stem>.landmarks.csv` next to a mesh is loaded when present.

use std::path::{Path, PathBuf};

use morphodist::analysis::{LabeledCollection, Specimen};
use morphodist::mesh::{load_mesh_file, read_landmarks_csv};

use crate::failure::Failure;

pub struct Entry {
    pub id: String,
    pub mesh_path: Option<PathBuf>,
    pub labels: Vec<String>,
}

pub struct Manifest {
    pub levels: Vec<String>,
    pub entries: Vec<Entry>,
}

/// Reads a manifest, or a bare labels file `id,level1,...` whose second
/// column is not `mesh_path`.
pub fn read_manifest(path: &Path) -> Result<Manifest, Failure> {
    let file = std::fs::File::open(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if header.first().map(|h| h.to_ascii_lowercase()) != Some("id".into()) {
        return Err(Failure::Usage(format!("{}: first column must be id", path.display())));
    }
    let has_mesh = header.get(1).is_some_and(|h| h.eq_ignore_ascii_case("mesh_path"));
    let skip = if has_mesh { 2 } else { 1 };
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        entries.push(Entry {
            id: rec[0].to_string(),
            mesh_path: has_mesh.then(|| dir.join(&rec[1])),
            labels: rec.iter().skip(skip).map(String::from).collect(),
        });
    }
    Ok(Manifest { levels: header[skip..].to_vec(), entries })
}

pub fn landmark_path(mesh_path: &Path) -> PathBuf {
    let stem = mesh_path.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh");
    mesh_path.with_file_name(format!("{stem}.landmarks.csv"))
}

/// Loads a mesh with its landmark sidecar, if any.
pub fn load_specimen(id: &str, mesh_path: &Path, labels: Vec<String>) -> Result<Specimen, Failure> {
    let mesh = load_mesh_file(mesh_path)
        .map_err(|e| match Failure::from(e) {
            Failure::Usage(m) => Failure::Usage(format!("{}: {m}", mesh_path.display())),
            Failure::Domain(m) => Failure::Domain(format!("{}: {m}", mesh_path.display())),
        })?
        .with_id(id);
    let lp = landmark_path(mesh_path);
    let landmarks = if lp.exists() {
        let f = std::fs::File::open(&lp)?;
        Some(read_landmarks_csv(f, &mesh).map_err(|e| Failure::Usage(format!("{}: {e}", lp.display())))?)
    } else {
        None
    };
    Ok(Specimen { id: id.to_string(), mesh, labels, landmarks })
}

pub fn load_collection(m: &Manifest) -> Result<LabeledCollection, Failure> {
    let specimens = m
        .entries
        .iter()
        .map(|e| {
            let path = e.mesh_path.as_ref().ok_or_else(|| Failure::Usage("manifest lacks a mesh_path column".into()))?;
            load_specimen(&e.id, path, e.labels.clone())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LabeledCollection::new(m.levels.clone(), specimens)?)
}
