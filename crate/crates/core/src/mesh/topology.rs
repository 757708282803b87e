//! Disk-topology diagnostics for raw triangle soups.

use std::collections::HashMap;

use serde::Serialize;

/// Outcome of [`validate_disk_topology`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TopologyReport {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub boundary_loops: usize,
    pub euler_characteristic: i64,
    /// Undirected edges shared by more than two faces.
    pub non_manifold_edges: usize,
    /// Interior edges not traversed once in each direction.
    pub inconsistent_edges: usize,
    /// Vertices whose incident faces do not form a single fan.
    pub non_manifold_vertices: usize,
    pub out_of_range_indices: usize,
    pub pass: bool,
    /// The boundary loop with the surface on its left, when exactly one exists.
    #[serde(skip)]
    pub boundary_loop: Option<Vec<usize>>,
}

impl TopologyReport {
    /// Short human-readable reason for a failure, `None` on pass.
    pub fn failure_reason(&self) -> Option<String> {
        if self.pass {
            return None;
        }
        let mut reasons = Vec::new();
        if self.out_of_range_indices > 0 {
            reasons.push(format!("{} face indices out of range", self.out_of_range_indices));
        }
        if self.non_manifold_edges > 0 {
            reasons.push(format!("non-manifold: {} edges in more than two faces", self.non_manifold_edges));
        }
        if self.inconsistent_edges > 0 {
            reasons.push(format!("{} inconsistently oriented edges", self.inconsistent_edges));
        }
        if self.non_manifold_vertices > 0 {
            reasons.push(format!("{} non-manifold vertices", self.non_manifold_vertices));
        }
        if self.boundary_loops != 1 {
            reasons.push(format!("{} boundary loops (expected 1)", self.boundary_loops));
        }
        if self.euler_characteristic != 1 {
            reasons.push(format!("Euler characteristic {} (expected 1)", self.euler_characteristic));
        }
        Some(reasons.join("; "))
    }
}

/// Checks that `faces` over `n_vertices` vertices form an oriented manifold
/// triangulation of a disk: every edge in one or two faces, interior edges
/// traversed once per direction, one boundary loop and V − E + F = 1.
pub fn validate_disk_topology(n_vertices: usize, faces: &[[usize; 3]]) -> TopologyReport {
    let out_of_range_indices = faces
        .iter()
        .flat_map(|f| f.iter())
        .filter(|&&v| v >= n_vertices)
        .count();
    if out_of_range_indices > 0 {
        return TopologyReport {
            vertices: n_vertices,
            edges: 0,
            faces: faces.len(),
            boundary_loops: 0,
            euler_characteristic: 0,
            non_manifold_edges: 0,
            inconsistent_edges: 0,
            non_manifold_vertices: 0,
            out_of_range_indices,
            pass: false,
            boundary_loop: None,
        };
    }

    // directed edge -> number of occurrences
    let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 3);
    for f in faces {
        for k in 0..3 {
            *directed.entry((f[k], f[(k + 1) % 3])).or_insert(0) += 1;
        }
    }
    let mut undirected: HashMap<(usize, usize), (usize, usize)> = HashMap::with_capacity(directed.len());
    for (&(a, b), &count) in &directed {
        let key = (a.min(b), a.max(b));
        let entry = undirected.entry(key).or_insert((0, 0));
        if a < b {
            entry.0 += count;
        } else {
            entry.1 += count;
        }
    }

    let mut non_manifold_edges = 0;
    let mut inconsistent_edges = 0;
    // boundary half-edges keyed by their start vertex
    let mut boundary_next: HashMap<usize, Vec<usize>> = HashMap::new();
    for (&(a, b), &(fwd, bwd)) in &undirected {
        match fwd + bwd {
            1 => {
                let (s, t) = if fwd == 1 { (a, b) } else { (b, a) };
                boundary_next.entry(s).or_default().push(t);
            }
            2 => {
                if fwd != 1 {
                    inconsistent_edges += 1;
                }
            }
            _ => non_manifold_edges += 1,
        }
    }

    let mut non_manifold_vertices = count_non_manifold_vertices(n_vertices, faces);
    for targets in boundary_next.values() {
        if targets.len() != 1 {
            non_manifold_vertices += 1;
        }
    }

    // walk boundary loops
    let mut starts: Vec<usize> = boundary_next.keys().copied().collect();
    starts.sort_unstable();
    let mut visited: HashMap<usize, bool> = HashMap::new();
    let mut loops: Vec<Vec<usize>> = Vec::new();
    for &s in &starts {
        if visited.contains_key(&s) {
            continue;
        }
        let mut lp = vec![s];
        visited.insert(s, true);
        let mut cur = s;
        let mut closed = false;
        for _ in 0..=boundary_next.len() {
            let Some(next) = boundary_next.get(&cur).and_then(|t| t.first().copied()) else {
                break;
            };
            if next == s {
                closed = true;
                break;
            }
            if visited.contains_key(&next) {
                break;
            }
            visited.insert(next, true);
            lp.push(next);
            cur = next;
        }
        if !closed {
            non_manifold_vertices += 1;
        }
        loops.push(lp);
    }

    let edges = undirected.len();
    let euler = n_vertices as i64 - edges as i64 + faces.len() as i64;
    let pass = non_manifold_edges == 0
        && inconsistent_edges == 0
        && non_manifold_vertices == 0
        && loops.len() == 1
        && euler == 1;
    let boundary_loop = if loops.len() == 1 { loops.pop() } else { None };
    TopologyReport {
        vertices: n_vertices,
        edges,
        faces: faces.len(),
        boundary_loops: if boundary_loop.is_some() { 1 } else { loops.len() },
        euler_characteristic: euler,
        non_manifold_edges,
        inconsistent_edges,
        non_manifold_vertices,
        out_of_range_indices: 0,
        pass,
        boundary_loop,
    }
}

/// Counts vertices whose incident faces split into more than one edge-connected fan.
fn count_non_manifold_vertices(n_vertices: usize, faces: &[[usize; 3]]) -> usize {
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n_vertices];
    for (fi, f) in faces.iter().enumerate() {
        for &v in f {
            incident[v].push(fi);
        }
    }
    let mut bad = 0;
    for (v, inc) in incident.iter().enumerate() {
        if inc.len() <= 1 {
            continue;
        }
        // union faces around v that share an edge (v, w)
        let mut parent: Vec<usize> = (0..inc.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut by_other: HashMap<usize, usize> = HashMap::new();
        for (slot, &fi) in inc.iter().enumerate() {
            for &w in &faces[fi] {
                if w == v {
                    continue;
                }
                if let Some(&other) = by_other.get(&w) {
                    let (a, b) = (find(&mut parent, slot), find(&mut parent, other));
                    parent[a] = b;
                } else {
                    by_other.insert(w, slot);
                }
            }
        }
        let roots = (0..inc.len())
            .map(|s| find(&mut parent, s))
            .collect::<std::collections::HashSet<_>>();
        if roots.len() > 1 {
            bad += 1;
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_passes() {
        let r = validate_disk_topology(4, &[[0, 1, 2], [0, 2, 3]]);
        assert!(r.pass, "{r:?}");
        assert_eq!(r.boundary_loops, 1);
        assert_eq!(r.euler_characteristic, 1);
        assert_eq!(r.boundary_loop.as_ref().unwrap().len(), 4);
    }

    #[test]
    fn annulus_has_two_loops() {
        // outer square 0..4, inner square 4..8
        let faces = [
            [0, 1, 5], [0, 5, 4], [1, 2, 6], [1, 6, 5],
            [2, 3, 7], [2, 7, 6], [3, 0, 4], [3, 4, 7],
        ];
        let r = validate_disk_topology(8, &faces);
        assert!(!r.pass);
        assert_eq!(r.boundary_loops, 2);
        assert_eq!(r.euler_characteristic, 0);
    }

    #[test]
    fn edge_in_three_faces_is_non_manifold() {
        let faces = [[0, 1, 2], [1, 0, 3], [0, 1, 4]];
        let r = validate_disk_topology(5, &faces);
        assert!(!r.pass);
        assert_eq!(r.non_manifold_edges, 1);
    }

    #[test]
    fn tetrahedron_rejected() {
        let faces = [[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]];
        let r = validate_disk_topology(4, &faces);
        assert!(!r.pass);
        assert_eq!(r.boundary_loops, 0);
        assert_eq!(r.euler_characteristic, 2);
    }

    #[test]
    fn flipped_face_is_inconsistent() {
        let r = validate_disk_topology(4, &[[0, 1, 2], [0, 3, 2]]);
        assert!(!r.pass);
        assert_eq!(r.inconsistent_edges, 1);
    }

    #[test]
    fn bowtie_vertex_rejected() {
        // two triangles touching at vertex 0 only
        let r = validate_disk_topology(5, &[[0, 1, 2], [0, 3, 4]]);
        assert!(!r.pass);
        assert!(r.non_manifold_vertices > 0);
    }
}
