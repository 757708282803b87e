//! Farthest-point sampling of a flattened surface in its surface metric.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64 as Complex;

use crate::error::{Error, Result};
use crate::flatten::FlatMap;
use crate::mesh::TriMesh;

/// Sample sites (interior vertices) with normalized weights.
///
/// The weight of a site is the normalized surface area of its geodesic
/// Voronoi cell, i.e. the `f·dx dy` (equivalently `f̂·dη`) mass of the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub vertices: Vec<usize>,
    pub weights: Vec<f64>,
    pub factor: Vec<f64>,
    pub hyper_factor: Vec<f64>,
    /// Index into `vertices` of the site owning each mesh vertex.
    pub cell: Vec<usize>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Current disk positions of the sites.
    pub fn disk_points(&self, flat: &FlatMap) -> Vec<Complex> {
        self.vertices.iter().map(|&v| flat.disk_coords()[v]).collect()
    }
}

#[derive(PartialEq)]
struct Item(f64, usize, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (distance, label, vertex)
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1)).then(other.2.cmp(&self.2))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Edge-graph adjacency with Euclidean edge lengths.
pub(crate) fn weighted_adjacency(mesh: &TriMesh) -> Vec<Vec<(usize, f64)>> {
    let v = mesh.vertices();
    mesh.vertex_neighbors()
        .into_iter()
        .enumerate()
        .map(|(i, nb)| nb.into_iter().map(|j| (j, (v[i] - v[j]).norm())).collect())
        .collect()
}

/// Multi-source Dijkstra. `dist`/`label` hold the current state and are
/// lowered in place; ties in distance go to the smaller label.
pub(crate) fn dijkstra_update(
    adj: &[Vec<(usize, f64)>],
    sources: &[(usize, usize)],
    dist: &mut [f64],
    label: &mut [usize],
) {
    let mut heap = BinaryHeap::new();
    for &(s, l) in sources {
        if 0.0 < dist[s] || (dist[s] == 0.0 && l < label[s]) {
            dist[s] = 0.0;
            label[s] = l;
        }
        heap.push(Item(0.0, label[s], s));
    }
    while let Some(Item(d, l, x)) = heap.pop() {
        if d > dist[x] || (d == dist[x] && l != label[x]) {
            continue;
        }
        for &(y, w) in &adj[x] {
            let nd = d + w;
            if nd < dist[y] || (nd == dist[y] && l < label[y]) {
                dist[y] = nd;
                label[y] = l;
                heap.push(Item(nd, l, y));
            }
        }
    }
}

/// Geodesic (edge-graph) distances from `source` to every vertex.
pub fn graph_distances(mesh: &TriMesh, source: usize) -> Vec<f64> {
    let adj = weighted_adjacency(mesh);
    let mut dist = vec![f64::INFINITY; mesh.num_vertices()];
    let mut label = vec![usize::MAX; mesh.num_vertices()];
    dijkstra_update(&adj, &[(source, 0)], &mut dist, &mut label);
    dist
}

/// Farthest-point sampling of `n` interior vertices, seeded at the
/// maximum-`f̂` vertex (smallest index on ties); each next site maximizes
/// the graph distance to the sites chosen so far.
pub fn sample_surface(flat: &FlatMap, mesh: &TriMesh, n: usize) -> Result<SampleSet> {
    if flat.num_vertices() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch("flat map and mesh differ in vertex count".into()));
    }
    let interior: Vec<usize> = (0..mesh.num_vertices()).filter(|&v| !mesh.is_boundary(v)).collect();
    if n == 0 || n > interior.len() {
        return Err(Error::InvalidArgument(format!(
            "sample count {n} outside 1..={} (interior vertices)",
            interior.len()
        )));
    }
    let fh = flat.hyper_factor();
    let seed = interior
        .iter()
        .copied()
        .fold(interior[0], |best, v| if fh[v] > fh[best] { v } else { best });

    let adj = weighted_adjacency(mesh);
    let nv = mesh.num_vertices();
    let mut dist = vec![f64::INFINITY; nv];
    let mut label = vec![usize::MAX; nv];
    let mut sites = vec![seed];
    dijkstra_update(&adj, &[(seed, 0)], &mut dist, &mut label);
    while sites.len() < n {
        let next = interior
            .iter()
            .copied()
            .fold(None::<usize>, |best, v| match best {
                Some(b) if dist[b] >= dist[v] => Some(b),
                _ => Some(v),
            })
            .expect("interior is non-empty");
        if dist[next] == 0.0 {
            break;
        }
        let l = sites.len();
        sites.push(next);
        dijkstra_update(&adj, &[(next, l)], &mut dist, &mut label);
    }

    // geodesic Voronoi cells; ties to the earlier-chosen site
    let mass = flat.vertex_mass();
    let mut weights = vec![0.0; sites.len()];
    for v in 0..nv {
        weights[label[v]] += mass[v];
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(SampleSet {
        factor: sites.iter().map(|&v| flat.factor()[v]).collect(),
        hyper_factor: sites.iter().map(|&v| fh[v]).collect(),
        vertices: sites,
        weights,
        cell: label,
    })
}
