//! Prominent local maxima of the hyperbolic density `f̂`.

use num_complex::Complex64 as Complex;
use serde::Serialize;

use crate::flatten::FlatMap;

/// Default cap on the number of peaks kept per surface.
pub const MAX_PEAKS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub vertex: usize,
    pub position: Complex,
    pub value: f64,
    /// Height above the highest saddle connecting it to a higher peak; for
    /// the global maximum, height above the global minimum.
    pub prominence: f64,
}

fn adjacency(n: usize, faces: &[[usize; 3]]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for f in faces {
        for k in 0..3 {
            adj[f[k]].push(f[(k + 1) % 3]);
            adj[f[(k + 1) % 3]].push(f[k]);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Topographic prominence of every vertex that starts a component when
/// sweeping `values` downwards (0 for all other vertices).
pub fn prominences(values: &[f64], faces: &[[usize; 3]]) -> Vec<f64> {
    let n = values.len();
    let adj = adjacency(n, faces);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut rank = vec![0usize; n];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    // a component's root is its first (highest) vertex, i.e. its summit
    let mut added = vec![false; n];
    let mut prom = vec![0.0; n];
    let lowest = order.last().map_or(0.0, |&v| values[v]);
    for &v in &order {
        let mut roots: Vec<usize> = adj[v].iter().filter(|&&u| added[u]).map(|&u| find(&mut parent, u)).collect();
        roots.sort_by_key(|&r| rank[r]);
        roots.dedup();
        added[v] = true;
        if let Some((&keep, rest)) = roots.split_first() {
            parent[v] = keep;
            // v is a saddle for every other component: their summits die here
            for &r in rest {
                prom[r] = values[r] - values[v];
                parent[r] = keep;
            }
        }
    }
    if let Some(&top) = order.first() {
        prom[top] = values[top] - lowest;
    }
    prom
}

/// Vertices whose `f̂` is at least that of every vertex within `k_ring`
/// edges and whose prominence exceeds `min_prominence` times the range of
/// `f̂`; sorted by `f̂` descending (smallest vertex on ties), at most `limit`.
pub fn detect_peaks(flat: &FlatMap, k_ring: usize, min_prominence: f64, limit: usize) -> Vec<Peak> {
    let fh = flat.hyper_factor();
    let n = fh.len();
    if n == 0 {
        return Vec::new();
    }
    let (lo, hi) = fh.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Vec::new();
    }
    let prom = prominences(fh, flat.faces());
    let adj = adjacency(n, flat.faces());
    let mut peaks: Vec<Peak> = (0..n)
        .filter(|&v| prom[v] > 0.0 && prom[v] > min_prominence * range)
        .filter(|&v| is_ring_maximum(&adj, fh, v, k_ring.max(1)))
        .map(|v| Peak { vertex: v, position: flat.disk_coords()[v], value: fh[v], prominence: prom[v] })
        .collect();
    peaks.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.vertex.cmp(&b.vertex)));
    peaks.truncate(limit);
    peaks
}

fn is_ring_maximum(adj: &[Vec<usize>], values: &[f64], v: usize, k: usize) -> bool {
    let mut frontier = vec![v];
    let mut seen = std::collections::HashSet::from([v]);
    for _ in 0..k {
        let mut next = Vec::new();
        for &x in &frontier {
            for &y in &adj[x] {
                if seen.insert(y) {
                    if values[y] > values[v] {
                        return false;
                    }
                    next.push(y);
                }
            }
        }
        frontier = next;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip(values: &[f64]) -> (Vec<f64>, Vec<[usize; 3]>) {
        // a zig-zag strip: vertices 0..n on a path, triangles between i, i+1, i+2
        let faces = (0..values.len() - 2).map(|i| [i, i + 1, i + 2]).collect();
        (values.to_vec(), faces)
    }

    #[test]
    fn prominence_of_two_peaks() {
        // path-like ordering; triangles also connect i and i+2
        let (v, f) = strip(&[0.0, 0.0, 5.0, 0.5, 0.2, 0.1, 3.0, 0.0, 0.0]);
        let p = prominences(&v, &f);
        assert_eq!(p[2], 5.0);
        assert!((p[6] - (3.0 - 0.2)).abs() < 1e-12, "{p:?}");
        assert_eq!(p.iter().filter(|&&x| x > 0.0).count(), 2);
    }

    #[test]
    fn constant_has_single_zero_prominence() {
        let (v, f) = strip(&[1.0; 6]);
        let p = prominences(&v, &f);
        assert!(p.iter().all(|&x| x == 0.0));
    }
}
