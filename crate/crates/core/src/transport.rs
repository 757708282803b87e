//! Discrete Kantorovich optimal transport solved exactly by the network
//! simplex method on the bipartite transportation graph.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported side of the dense cost matrix.
pub const DEFAULT_SIZE_CAP: usize = 1024;

/// Allowed deviation of a weight sum from 1, and of the two sums from each other.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A probability measure on a finite set of sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    points: Vec<usize>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} sites but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.is_empty() {
            return Err(Error::InvalidArgument("empty measure".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidArgument(format!("weights sum to {s}, expected 1")));
        }
        Ok(Self { points, weights })
    }

    /// Normalizes nonnegative weights to sum 1.
    pub fn from_unnormalized(points: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        if !(s > 0.0) {
            return Err(Error::InvalidArgument("weights have no mass".into()));
        }
        Self::new(points, weights.into_iter().map(|w| w / s).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new((0..n).collect(), vec![1.0 / n as f64; n])
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// An optimal coupling with its cost and the dual potentials certifying it
/// (`u_i + v_j ≤ c_ij` everywhere, with equality on the support).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    /// `(i, j, mass)` with positive mass, sorted by `(i, j)`.
    pub entries: Vec<(usize, usize, f64)>,
    pub total_cost: f64,
    pub row_potentials: Vec<f64>,
    pub col_potentials: Vec<f64>,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.rows];
        for &(i, _, m) in &self.entries {
            s[i] += m;
        }
        s
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for &(_, j, m) in &self.entries {
            s[j] += m;
        }
        s
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "mass"])?;
        for &(i, j, m) in &self.entries {
            w.write_record([i.to_string(), j.to_string(), format!("{m:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Row-major dense cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} cost matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let data = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        Self { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|c| c * s).collect() }
    }
}

/// Solves `min Σ π_ij c_ij` over couplings of `mu` and `nu` with the
/// default size cap.
pub fn solve_kantorovich(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostMatrix) -> Result<TransportPlan> {
    solve_kantorovich_capped(mu, nu, cost, DEFAULT_SIZE_CAP)
}

pub fn solve_kantorovich_capped(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    cap: usize,
) -> Result<TransportPlan> {
    let (m, n) = (mu.len(), nu.len());
    if cost.rows != m || cost.cols != n {
        return Err(Error::DimensionMismatch(format!(
            "cost matrix is {}x{} for measures of size {m} and {n}",
            cost.rows, cost.cols
        )));
    }
    if m > cap || n > cap {
        return Err(Error::InvalidArgument(format!(
            "transport problem {m}x{n} exceeds the size cap {cap}; reduce the sample count"
        )));
    }
    if cost.data.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("cost matrix has non-finite entries".into()));
    }
    let sa: f64 = mu.weights.iter().sum();
    let sb: f64 = nu.weights.iter().sum();
    if (sa - sb).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Infeasible(format!("marginal masses differ: {sa} vs {sb}")));
    }
    let b: Vec<f64> = nu.weights.iter().map(|w| w * sa / sb).collect();
    Ok(NetworkSimplex::new(&mu.weights, &b, cost).run())
}

/// For every source site, the target receiving the most mass (smallest
/// index on ties; 0 for a source with no outgoing mass).
pub fn plan_as_soft_correspondence(plan: &TransportPlan) -> Vec<usize> {
    let mut best: Vec<Option<(usize, f64)>> = vec![None; plan.rows];
    for &(i, j, m) in &plan.entries {
        match best[i] {
            Some((bj, bm)) if bm > m || (bm == m && bj < j) => {}
            _ => best[i] = Some((j, m)),
        }
    }
    best.into_iter().map(|b| b.map_or(0, |(j, _)| j)).collect()
}

const NONE: usize = usize::MAX;

/// Spanning-tree simplex state. Nodes `0..m` are sources, `m..m+n` sinks;
/// arc `k` joins source `k / n` to sink `k % n`.
struct NetworkSimplex<'a> {
    m: usize,
    n: usize,
    cost: &'a CostMatrix,
    /// Basic arcs and their flows.
    basis: Vec<(usize, f64)>,
    u: Vec<f64>,
    v: Vec<f64>,
    parent_arc: Vec<usize>,
    parent_node: Vec<usize>,
    depth: Vec<usize>,
    eps: f64,
}

impl<'a> NetworkSimplex<'a> {
    fn new(a: &[f64], b: &[f64], cost: &'a CostMatrix) -> Self {
        let (m, n) = (a.len(), b.len());
        // northwest corner rule; yields exactly m + n - 1 arcs forming a tree
        let mut ra = a.to_vec();
        let mut rb = b.to_vec();
        let mut basis = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let x = ra[i].min(rb[j]).max(0.0);
            basis.push((i * n + j, x));
            ra[i] -= x;
            rb[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if j == n - 1 || (i < m - 1 && ra[i] <= rb[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
        let scale = cost.data.iter().fold(0.0f64, |s, c| s.max(c.abs()));
        Self {
            m,
            n,
            cost,
            basis,
            u: vec![0.0; m],
            v: vec![0.0; n],
            parent_arc: vec![NONE; m + n],
            parent_node: vec![NONE; m + n],
            depth: vec![0; m + n],
            eps: 1e-12 * scale.max(f64::MIN_POSITIVE),
        }
    }

    /// Roots the tree at source 0 and recomputes potentials and parents.
    fn refresh_tree(&mut self) {
        let (m, n) = (self.m, self.n);
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m + n];
        for (slot, &(arc, _)) in self.basis.iter().enumerate() {
            let (i, j) = (arc / n, arc % n);
            adj[i].push((m + j, slot));
            adj[m + j].push((i, slot));
        }
        self.parent_arc.fill(NONE);
        self.parent_node.fill(NONE);
        let mut visited = vec![false; m + n];
        let mut stack = vec![0usize];
        visited[0] = true;
        self.u[0] = 0.0;
        self.depth[0] = 0;
        while let Some(x) = stack.pop() {
            for &(y, slot) in &adj[x] {
                if visited[y] {
                    continue;
                }
                visited[y] = true;
                let arc = self.basis[slot].0;
                let c = self.cost.data[arc];
                if y >= m {
                    self.v[y - m] = c - self.u[x];
                } else {
                    self.u[y] = c - self.v[x - m];
                }
                self.parent_arc[y] = slot;
                self.parent_node[y] = x;
                self.depth[y] = self.depth[x] + 1;
                stack.push(y);
            }
        }
        debug_assert!(visited.iter().all(|&v| v), "basis is not a spanning tree");
    }

    /// First arc (row-major order) with reduced cost below `-eps` when
    /// `bland`, otherwise the most negative one (smallest index on ties).
    fn entering(&self, bland: bool) -> Option<usize> {
        let n = self.n;
        let mut best = None;
        let mut best_rc = -self.eps;
        for i in 0..self.m {
            let ui = self.u[i];
            let row = &self.cost.data[i * n..(i + 1) * n];
            for (j, &c) in row.iter().enumerate() {
                let rc = c - ui - self.v[j];
                if rc < best_rc {
                    best = Some(i * n + j);
                    if bland {
                        return best;
                    }
                    best_rc = rc;
                }
            }
        }
        best
    }

    /// Pivots `arc` into the basis. Returns whether the pivot was degenerate.
    fn pivot(&mut self, arc: usize) -> bool {
        let (m, n) = (self.m, self.n);
        let (p, q) = (arc / n, m + arc % n);
        // tree path q -> p; arcs alternate −, +, −, ... starting at q
        let mut from_q = Vec::new();
        let mut from_p = Vec::new();
        let (mut x, mut y) = (q, p);
        while self.depth[x] > self.depth[y] {
            from_q.push(self.parent_arc[x]);
            x = self.parent_node[x];
        }
        while self.depth[y] > self.depth[x] {
            from_p.push(self.parent_arc[y]);
            y = self.parent_node[y];
        }
        while x != y {
            from_q.push(self.parent_arc[x]);
            x = self.parent_node[x];
            from_p.push(self.parent_arc[y]);
            y = self.parent_node[y];
        }
        let path: Vec<usize> = from_q.into_iter().chain(from_p.into_iter().rev()).collect();

        // leaving arc: minimum flow among "−" arcs, smallest arc index on ties
        let mut leave = NONE;
        let mut theta = f64::INFINITY;
        for &slot in path.iter().step_by(2) {
            let (a, f) = self.basis[slot];
            if f < theta || (f == theta && a < self.basis[leave].0) {
                theta = f;
                leave = slot;
            }
        }
        let theta = theta.max(0.0);
        for (k, &slot) in path.iter().enumerate() {
            let f = &mut self.basis[slot].1;
            if k % 2 == 0 {
                *f = (*f - theta).max(0.0);
            } else {
                *f += theta;
            }
        }
        self.basis[leave] = (arc, theta);
        theta == 0.0
    }

    fn run(mut self) -> TransportPlan {
        self.refresh_tree();
        let mut bland = false;
        while let Some(arc) = self.entering(bland) {
            bland = self.pivot(arc);
            self.refresh_tree();
        }
        let n = self.n;
        let mut entries: Vec<(usize, usize, f64)> = self
            .basis
            .iter()
            .filter(|&&(_, f)| f > 0.0)
            .map(|&(arc, f)| (arc / n, arc % n, f))
            .collect();
        entries.sort_by_key(|e| (e.0, e.1));
        let total_cost = entries.iter().map(|&(i, j, f)| f * self.cost.get(i, j)).sum();
        TransportPlan {
            rows: self.m,
            cols: n,
            entries,
            total_cost,
            row_potentials: self.u,
            col_potentials: self.v,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_feasible(plan: &TransportPlan, a: &[f64], b: &[f64]) {
        for (s, w) in plan.row_sums().iter().zip(a) {
            assert!((s - w).abs() < 1e-8);
        }
        for (s, w) in plan.col_sums().iter().zip(b) {
            assert!((s - w).abs() < 1e-8);
        }
        assert!(plan.entries.len() <= plan.rows + plan.cols - 1);
    }

    #[test]
    fn identity_coupling() {
        let mu = DiscreteMeasure::uniform(3).unwrap();
        let c = CostMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
        let plan = solve_kantorovich(&mu, &mu, &c).unwrap();
        assert_eq!(plan.total_cost, 0.0);
        assert_eq!(plan_as_soft_correspondence(&plan), vec![0, 1, 2]);
    }

    #[test]
    fn forced_transport() {
        let mu = DiscreteMeasure::new(vec![0, 1], vec![1.0, 0.0]).unwrap();
        let nu = DiscreteMeasure::new(vec![0, 1], vec![0.0, 1.0]).unwrap();
        let c = CostMatrix::from_fn(2, 2, |i, j| if i == j { 0.0 } else { 2.5 });
        let plan = solve_kantorovich(&mu, &nu, &c).unwrap();
        assert_eq!(plan.total_cost, 2.5);
    }

    #[test]
    fn argmax_rule() {
        let plan = TransportPlan {
            rows: 1,
            cols: 2,
            entries: vec![(0, 0, 0.4), (0, 1, 0.6)],
            total_cost: 0.0,
            row_potentials: vec![],
            col_potentials: vec![],
        };
        assert_eq!(plan_as_soft_correspondence(&plan), vec![1]);
    }

    #[test]
    fn rejects_mismatch_and_oversize() {
        let mu = DiscreteMeasure::uniform(2).unwrap();
        let nu = DiscreteMeasure::uniform(3).unwrap();
        let c = CostMatrix::from_fn(2, 2, |_, _| 1.0);
        assert!(matches!(solve_kantorovich(&mu, &nu, &c), Err(Error::DimensionMismatch(_))));
        let c = CostMatrix::from_fn(2, 3, |_, _| 1.0);
        assert!(solve_kantorovich_capped(&mu, &nu, &c, 2).is_err());
        assert!(DiscreteMeasure::new(vec![0, 1], vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn dual_certificate_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let m = rng.gen_range(1..12);
            let n = rng.gen_range(1..12);
            let mu = DiscreteMeasure::from_unnormalized((0..m).collect(), (0..m).map(|_| rng.gen::<f64>()).collect())
                .unwrap();
            let nu = DiscreteMeasure::from_unnormalized((0..n).collect(), (0..n).map(|_| rng.gen::<f64>()).collect())
                .unwrap();
            let c = CostMatrix::new(m, n, (0..m * n).map(|_| rng.gen_range(0.0..10.0)).collect()).unwrap();
            let plan = solve_kantorovich(&mu, &nu, &c).unwrap();
            check_feasible(&plan, mu.weights(), nu.weights());
            for i in 0..m {
                for j in 0..n {
                    assert!(c.get(i, j) - plan.row_potentials[i] - plan.col_potentials[j] > -1e-9);
                }
            }
            let dual: f64 = plan.row_potentials.iter().zip(mu.weights()).map(|(u, a)| u * a).sum::<f64>()
                + plan.col_potentials.iter().zip(nu.weights()).map(|(v, b)| v * b).sum::<f64>();
            assert!((dual - plan.total_cost).abs() < 1e-9);
            let rev = solve_kantorovich(&nu, &mu, &c.transpose()).unwrap();
            assert!((rev.total_cost - plan.total_cost).abs() < 1e-10);
        }
    }
}
