//! Distance matrices over specimen collections.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::distances::{
    cp_distance, cw_distance, cwn_correspondence, cwn_distance, discrete_procrustes, sample_surface, CorrespondenceMap, MapMethod, SampleSet,
};
use crate::error::{Error, Result};
use crate::flatten::{flatten, FlatMap};
use crate::mesh::{normalize_mesh, LandmarkSet, TriMesh, Vec3};
use crate::params::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Metric {
    #[serde(rename = "cP")]
    Cp,
    #[serde(rename = "cWn")]
    Cwn,
    #[serde(rename = "cW")]
    Cw,
    #[serde(rename = "ODLP")]
    Odlp,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Cp => "cP",
            Metric::Cwn => "cWn",
            Metric::Cw => "cW",
            Metric::Odlp => "ODLP",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cp" => Ok(Metric::Cp),
            "cwn" => Ok(Metric::Cwn),
            "cw" => Ok(Metric::Cw),
            "odlp" => Ok(Metric::Odlp),
            _ => Err(Error::InvalidArgument(format!("unknown metric {s:?} (expected cP, cWn, cW or ODLP)"))),
        }
    }
}

/// A failed pair evaluation, `source` → `target` by index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairFailure {
    pub source: usize,
    pub target: usize,
    pub message: String,
}

/// Symmetric, zero-diagonal matrix of distances between labelled specimens.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    ids: Vec<String>,
    values: Vec<f64>,
    metric: Option<Metric>,
    /// Max over pairs of `|d_ij − d_ji| / max(d_ij, d_ji)` before averaging.
    raw_asymmetry: f64,
    failures: Vec<PairFailure>,
}

impl DistanceMatrix {
    /// Builds from a possibly asymmetric row-major matrix by averaging with
    /// its transpose; the diagonal is set to zero. A NaN entry marks a failed
    /// pair and is replaced by its transposed partner when that one exists.
    pub fn from_raw(ids: Vec<String>, metric: Option<Metric>, raw: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        if raw.len() != n * n {
            return Err(Error::DimensionMismatch(format!("{} values for {n} ids", raw.len())));
        }
        let mut sorted: Vec<&String> = ids.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!("duplicate id {:?}", w[0])));
        }
        if let Some(v) = raw.iter().find(|v| **v < 0.0 || v.is_infinite()) {
            return Err(Error::InvalidArgument(format!("distance {v} is negative or infinite")));
        }
        let mut values = vec![0.0; n * n];
        let mut raw_asymmetry: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (raw[i * n + j], raw[j * n + i]);
                let v = match (a.is_nan(), b.is_nan()) {
                    (false, false) => {
                        let m = a.max(b);
                        if m > 0.0 {
                            raw_asymmetry = raw_asymmetry.max((a - b).abs() / m);
                        }
                        0.5 * (a + b)
                    }
                    (true, false) => b,
                    (false, true) => a,
                    (true, true) => f64::NAN,
                };
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Ok(Self { ids, values, metric, raw_asymmetry, failures: Vec::new() })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ids.len() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn metric(&self) -> Option<Metric> {
        self.metric
    }

    pub fn raw_asymmetry(&self) -> f64 {
        self.raw_asymmetry
    }

    pub fn failures(&self) -> &[PairFailure] {
        &self.failures
    }

    /// False if any pair failed in both directions.
    pub fn is_complete(&self) -> bool {
        self.values.iter().all(|v| !v.is_nan())
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Strict upper triangle, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.len();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| self.get(i, j)).collect()
    }

    /// The matrix with rows and columns in the given index order.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let n = self.len();
        let mut seen = vec![false; n];
        if order.len() != n || order.iter().any(|&k| k >= n || std::mem::replace(&mut seen[k], true)) {
            return Err(Error::InvalidArgument("order is not a permutation".into()));
        }
        let values = order.iter().flat_map(|&i| order.iter().map(move |&j| (i, j))).map(|(i, j)| self.get(i, j)).collect();
        Ok(Self {
            ids: order.iter().map(|&i| self.ids[i].clone()).collect(),
            values,
            metric: self.metric,
            raw_asymmetry: self.raw_asymmetry,
            failures: Vec::new(),
        })
    }

    /// This matrix reordered to the id order of `other`.
    pub fn aligned_to(&self, ids: &[String]) -> Result<Self> {
        if ids.len() != self.len() {
            return Err(Error::IdMismatch(format!("{} ids vs {}", ids.len(), self.len())));
        }
        let order = ids
            .iter()
            .map(|id| self.index_of(id).ok_or_else(|| Error::IdMismatch(format!("id {id:?} missing"))))
            .collect::<Result<Vec<_>>>()?;
        self.permuted(&order)
    }

    /// CSV with the metric tag in the corner cell and ids along the first
    /// row and column.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let corner = self.metric.map_or(String::new(), |m| m.to_string());
        w.write_record(std::iter::once(corner).chain(self.ids.iter().cloned()))?;
        for (i, id) in self.ids.iter().enumerate() {
            w.write_record(std::iter::once(id.clone()).chain((0..self.len()).map(|j| self.get(i, j).to_string())))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(source: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(source);
        let mut rows = rdr.records();
        let header = rows.next().ok_or_else(|| Error::Parse("empty distance matrix".into()))??;
        let metric = header.get(0).filter(|s| !s.is_empty()).map(str::parse).transpose().ok().flatten();
        let ids: Vec<String> = header.iter().skip(1).map(String::from).collect();
        let n = ids.len();
        let mut raw = Vec::with_capacity(n * n);
        for (i, rec) in rows.enumerate() {
            let rec = rec?;
            if i >= n || rec.len() != n + 1 || rec[0] != ids[i] {
                return Err(Error::Parse(format!("row {} does not match the header ids", i + 1)));
            }
            for field in rec.iter().skip(1) {
                raw.push(field.parse::<f64>().map_err(|_| Error::Parse(format!("invalid distance {field:?}")))?);
            }
        }
        if raw.len() != n * n {
            return Err(Error::Parse(format!("expected {n} rows")));
        }
        Self::from_raw(ids, metric, raw)
    }
}

/// One specimen: mesh, taxonomic labels, optional observer landmarks.
#[derive(Debug, Clone)]
pub struct Specimen {
    pub id: String,
    pub mesh: TriMesh,
    pub labels: Vec<String>,
    pub landmarks: Option<LandmarkSet>,
}

#[derive(Debug, Clone)]
pub struct LabeledCollection {
    /// Names of the label levels, e.g. `genus`, `species`.
    pub levels: Vec<String>,
    pub specimens: Vec<Specimen>,
}

impl LabeledCollection {
    pub fn new(levels: Vec<String>, specimens: Vec<Specimen>) -> Result<Self> {
        let mut ids: Vec<&str> = specimens.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!("duplicate specimen id {:?}", w[0])));
        }
        for s in &specimens {
            if s.labels.len() != levels.len() || s.labels.iter().any(|l| l.is_empty()) {
                return Err(Error::InvalidArgument(format!("specimen {:?} lacks a label at some level", s.id)));
            }
        }
        Ok(Self { levels, specimens })
    }

    pub fn ids(&self) -> Vec<String> {
        self.specimens.iter().map(|s| s.id.clone()).collect()
    }

    /// Labels at the named level, in specimen order.
    pub fn labels_at(&self, level: &str) -> Result<Vec<String>> {
        let k = self
            .levels
            .iter()
            .position(|l| l == level)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown label level {level:?}")))?;
        Ok(self.specimens.iter().map(|s| s.labels[k].clone()).collect())
    }
}

/// Outcome of one ordered pair evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRecord {
    pub source: String,
    pub target: String,
    pub value: Option<f64>,
    /// Area-distortion residual of the cP correspondence.
    pub residual: Option<f64>,
    pub converged: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct PairwiseRun {
    pub matrix: DistanceMatrix,
    /// Every ordered pair `(i, j)`, `i ≠ j`, row by row.
    pub records: Vec<PairRecord>,
}

/// Per-specimen data the metrics need, computed once.
struct Prepared {
    mesh: TriMesh,
    flat: FlatMap,
    samples: Option<SampleSet>,
}

fn prepare(mesh: &TriMesh, metric: Metric, params: &Params) -> Result<Prepared> {
    let mesh = normalize_mesh(mesh)?;
    let flat = flatten(&mesh)?;
    let n = match metric {
        Metric::Cwn => Some(params.cwn.samples),
        Metric::Cw => Some(params.cw_samples),
        _ => None,
    };
    let samples = n.map(|n| sample_surface(&flat, &mesh, n.min(mesh.num_interior()))).transpose()?;
    Ok(Prepared { mesh, flat, samples })
}

fn landmark_positions(s: &Specimen, labels: &[String]) -> Result<Vec<Vec3>> {
    let set = s
        .landmarks
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("specimen {:?} has no landmarks", s.id)))?;
    let mesh = normalize_mesh(&s.mesh)?;
    let pos = set.positions(&mesh)?;
    labels
        .iter()
        .map(|l| {
            set.labels()
                .iter()
                .position(|x| x == l)
                .map(|k| pos[k])
                .ok_or_else(|| Error::IdMismatch(format!("specimen {:?} lacks landmark {l:?}", s.id)))
        })
        .collect()
}

/// Value of one ordered pair, with the correspondence when asked for.
#[derive(Debug, Clone, PartialEq)]
pub struct PairOutcome {
    pub value: f64,
    /// cP: the corrected map; cWn: the plan argmax map; otherwise `None`.
    pub map: Option<CorrespondenceMap>,
}

impl PairOutcome {
    fn record(&self) -> (f64, Option<f64>, Option<bool>) {
        match &self.map {
            Some(m) if m.method == MapMethod::Cp => (self.value, Some(m.residual), Some(m.converged)),
            _ => (self.value, None, None),
        }
    }
}

fn evaluate(a: &Prepared, b: &Prepared, metric: Metric, params: &Params, want_map: bool) -> Result<PairOutcome> {
    match metric {
        Metric::Cp => {
            let r = cp_distance(&a.mesh, &b.mesh, &a.flat, &b.flat, &params.cp)?;
            Ok(PairOutcome { value: r.value, map: Some(r.map) })
        }
        Metric::Cwn => {
            let (sa, sb) = (a.samples.as_ref().expect("samples"), b.samples.as_ref().expect("samples"));
            let r = cwn_distance(&a.flat, sa, &b.flat, sb, &params.cwn)?;
            let map = want_map.then(|| cwn_correspondence(&a.mesh, sa, &b.mesh, sb, &r));
            Ok(PairOutcome { value: r.value, map })
        }
        Metric::Cw => {
            let (sa, sb) = (a.samples.as_ref().expect("samples"), b.samples.as_ref().expect("samples"));
            Ok(PairOutcome { value: cw_distance(&a.flat, sa, &b.flat, sb, &params.cw_grid)?.value, map: None })
        }
        Metric::Odlp => unreachable!("landmark distances are computed separately"),
    }
}

/// One ordered pair `a → b` under `metric`, prepared exactly as in
/// [`pairwise_matrix`]. ODLP uses the landmark labels of `a`.
pub fn pair_distance(a: &Specimen, b: &Specimen, metric: Metric, params: &Params) -> Result<PairOutcome> {
    params.validate()?;
    if metric == Metric::Odlp {
        let labels: Vec<String> = a
            .landmarks
            .as_ref()
            .map(|s| s.labels().iter().map(|l| l.to_string()).collect())
            .unwrap_or_default();
        let (x, y) = (landmark_positions(a, &labels)?, landmark_positions(b, &labels)?);
        return Ok(PairOutcome { value: discrete_procrustes(&x, &y)?, map: None });
    }
    let pa = prepare(&a.mesh, metric, params)?;
    let pb = prepare(&b.mesh, metric, params)?;
    evaluate(&pa, &pb, metric, params, true)
}

/// All ordered pairs of the collection under `metric`, evaluated on
/// `jobs` worker threads. Outputs do not depend on `jobs`. ODLP uses the
/// landmark labels of the first specimen, on unit-area meshes.
pub fn pairwise_matrix(collection: &LabeledCollection, metric: Metric, params: &Params, jobs: usize) -> Result<PairwiseRun> {
    let n = collection.specimens.len();
    if n < 2 {
        return Err(Error::InvalidArgument("a distance matrix needs at least two specimens".into()));
    }
    if jobs == 0 {
        return Err(Error::InvalidArgument("jobs must be positive".into()));
    }
    params.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Solver(format!("thread pool: {e}")))?;
    let specimens = &collection.specimens;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();

    let outcomes: Vec<Result<(f64, Option<f64>, Option<bool>)>> = pool.install(|| {
        if metric == Metric::Odlp {
            let labels: Vec<String> = specimens[0]
                .landmarks
                .as_ref()
                .map(|s| s.labels().iter().map(|l| l.to_string()).collect())
                .unwrap_or_default();
            let pos: Vec<Result<Vec<Vec3>>> = specimens.par_iter().map(|s| landmark_positions(s, &labels)).collect();
            pairs
                .par_iter()
                .map(|&(i, j)| match (&pos[i], &pos[j]) {
                    (Ok(x), Ok(y)) => discrete_procrustes(x, y).map(|v| (v, None, None)),
                    (Err(e), _) | (_, Err(e)) => Err(Error::InvalidArgument(e.to_string())),
                })
                .collect()
        } else {
            let prepared: Vec<Result<Prepared>> = specimens.par_iter().map(|s| prepare(&s.mesh, metric, params)).collect();
            pairs
                .par_iter()
                .map(|&(i, j)| match (&prepared[i], &prepared[j]) {
                    (Ok(a), Ok(b)) => evaluate(a, b, metric, params, false).map(|o| o.record()),
                    (Err(e), _) | (_, Err(e)) => Err(Error::InvalidArgument(e.to_string())),
                })
                .collect()
        }
    });

    let mut raw = vec![0.0; n * n];
    let mut records = Vec::with_capacity(pairs.len());
    let mut failures = Vec::new();
    for (&(i, j), out) in pairs.iter().zip(outcomes) {
        let (source, target) = (specimens[i].id.clone(), specimens[j].id.clone());
        match out {
            Ok((value, residual, converged)) => {
                raw[i * n + j] = value;
                records.push(PairRecord { source, target, value: Some(value), residual, converged, error: None });
            }
            Err(e) => {
                raw[i * n + j] = f64::NAN;
                failures.push(PairFailure { source: i, target: j, message: e.to_string() });
                records.push(PairRecord { source, target, value: None, residual: None, converged: None, error: Some(e.to_string()) });
            }
        }
    }
    let mut matrix = DistanceMatrix::from_raw(collection.ids(), Some(metric), raw)?;
    matrix.failures = failures;
    Ok(PairwiseRun { matrix, records })
}
