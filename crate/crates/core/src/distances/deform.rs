//! Smooth self-maps of the disk that move matched peaks onto each other.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as Complex;

/// Gaussian kernel width of the displacement field.
pub const KERNEL_WIDTH: f64 = 0.25;
/// Matching radius: peaks farther apart than this are not paired.
pub const MATCH_RADIUS: f64 = 0.3;
/// Minimum separation of interpolation centres.
pub const MIN_SEPARATION: f64 = 0.05;
/// Upper bound on the estimated Lipschitz constant of the displacement.
pub const MAX_LIPSCHITZ: f64 = 0.5;

/// `ρ(w) = w + (1 − |w|²) Σ_k c_k exp(−|w − q_k|² / σ²)`.
///
/// The `(1 − |w|²)` factor keeps the unit circle fixed; keeping the
/// displacement's Lipschitz constant below 1 makes `ρ` injective.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakDeformation {
    centers: Vec<Complex>,
    coeffs: Vec<Complex>,
    sigma: f64,
}

impl Default for PeakDeformation {
    fn default() -> Self {
        Self::identity()
    }
}

impl PeakDeformation {
    pub fn identity() -> Self {
        Self { centers: Vec::new(), coeffs: Vec::new(), sigma: KERNEL_WIDTH }
    }

    pub fn is_identity(&self) -> bool {
        self.coeffs.iter().all(|c| *c == Complex::new(0.0, 0.0))
    }

    pub fn centers(&self) -> &[Complex] {
        &self.centers
    }

    /// Interpolant with `ρ(sources[k]) = targets[k]`; `None` if the kernel
    /// system is singular.
    pub fn interpolate(sources: &[Complex], targets: &[Complex], sigma: f64) -> Option<Self> {
        let k = sources.len();
        if k == 0 {
            return Some(Self::identity());
        }
        let s2 = sigma * sigma;
        let a = DMatrix::from_fn(k, k, |i, j| {
            (1.0 - sources[i].norm_sqr()) * (-(sources[i] - sources[j]).norm_sqr() / s2).exp()
        });
        let lu = a.lu();
        let re = DVector::from_fn(k, |i, _| (targets[i] - sources[i]).re);
        let im = DVector::from_fn(k, |i, _| (targets[i] - sources[i]).im);
        let (x, y) = (lu.solve(&re)?, lu.solve(&im)?);
        let coeffs: Vec<Complex> = (0..k).map(|i| Complex::new(x[i], y[i])).collect();
        if coeffs.iter().any(|c| !c.is_finite()) {
            return None;
        }
        Some(Self { centers: sources.to_vec(), coeffs, sigma })
    }

    pub fn apply(&self, w: Complex) -> Complex {
        w + self.displacement(w)
    }

    pub fn displacement(&self, w: Complex) -> Complex {
        if self.centers.is_empty() {
            return Complex::new(0.0, 0.0);
        }
        let s2 = self.sigma * self.sigma;
        let g: Complex = self
            .centers
            .iter()
            .zip(&self.coeffs)
            .map(|(q, c)| c * (-(w - q).norm_sqr() / s2).exp())
            .sum();
        g * (1.0 - w.norm_sqr())
    }

    /// Operator norm of the real Jacobian of the displacement at `w`.
    fn jacobian_norm(&self, w: Complex) -> f64 {
        let s2 = self.sigma * self.sigma;
        let s = 1.0 - w.norm_sqr();
        let (mut g, mut gx, mut gy) = (Complex::new(0.0, 0.0), Complex::new(0.0, 0.0), Complex::new(0.0, 0.0));
        for (q, c) in self.centers.iter().zip(&self.coeffs) {
            let d = w - q;
            let phi = (-d.norm_sqr() / s2).exp();
            g += c * phi;
            gx += c * (-2.0 * d.re / s2 * phi);
            gy += c * (-2.0 * d.im / s2 * phi);
        }
        let dx = g * (-2.0 * w.re) + gx * s;
        let dy = g * (-2.0 * w.im) + gy * s;
        // singular values of [[dx.re, dy.re], [dx.im, dy.im]]
        let (a, b, c, d) = (dx.re, dy.re, dx.im, dy.im);
        let t = a * a + b * b + c * c + d * d;
        let det = a * d - b * c;
        (0.5 * (t + (t * t - 4.0 * det * det).max(0.0).sqrt())).sqrt()
    }

    /// Maximum Jacobian norm of the displacement over a polar grid of the disk.
    pub fn lipschitz_estimate(&self) -> f64 {
        if self.centers.is_empty() {
            return 0.0;
        }
        const RADIAL: usize = 24;
        const ANGULAR: usize = 48;
        let mut best = self.jacobian_norm(Complex::new(0.0, 0.0));
        for i in 1..=RADIAL {
            let r = i as f64 / RADIAL as f64;
            for j in 0..ANGULAR {
                let w = Complex::from_polar(r, std::f64::consts::TAU * (j as f64 / ANGULAR as f64));
                best = best.max(self.jacobian_norm(w));
            }
        }
        best
    }
}

/// Greedy nearest matching of `moved` (source peaks after the Möbius map)
/// to `targets` within [`MATCH_RADIUS`]; `pinned` is matched first.
/// Candidates whose source lies within [`MIN_SEPARATION`] of an accepted
/// source are skipped. Returns index pairs.
pub fn match_peaks(moved: &[Complex], targets: &[Complex], pinned: Option<(usize, usize)>) -> Vec<(usize, usize)> {
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in moved.iter().enumerate() {
        for (j, q) in targets.iter().enumerate() {
            let d = (p - q).norm();
            if d <= MATCH_RADIUS {
                cands.push((d, i, j));
            }
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_s = vec![false; moved.len()];
    let mut used_t = vec![false; targets.len()];
    let mut out = Vec::new();
    if let Some((i, j)) = pinned {
        used_s[i] = true;
        used_t[j] = true;
        out.push((i, j));
    }
    for (_, i, j) in cands {
        if used_s[i] || used_t[j] {
            continue;
        }
        if out.iter().any(|&(k, _)| (moved[k] - moved[i]).norm() < MIN_SEPARATION) {
            continue;
        }
        used_s[i] = true;
        used_t[j] = true;
        out.push((i, j));
    }
    out
}

/// Builds `ρ` for matched pairs, dropping the pair with the largest
/// displacement (never the pinned first pair) until the displacement's
/// Lipschitz estimate is below [`MAX_LIPSCHITZ`].
pub fn align_peak_deformation(moved: &[Complex], targets: &[Complex], pairs: &[(usize, usize)]) -> PeakDeformation {
    let mut pairs = pairs.to_vec();
    loop {
        let src: Vec<Complex> = pairs.iter().map(|&(i, _)| moved[i]).collect();
        let dst: Vec<Complex> = pairs.iter().map(|&(_, j)| targets[j]).collect();
        if src.iter().zip(&dst).all(|(a, b)| a == b) {
            return PeakDeformation::identity();
        }
        if let Some(rho) = PeakDeformation::interpolate(&src, &dst, KERNEL_WIDTH) {
            if rho.lipschitz_estimate() < MAX_LIPSCHITZ {
                return rho;
            }
        }
        // drop the largest displacement among the unpinned pairs
        let worst = (1..pairs.len()).max_by(|&a, &b| {
            let da = (moved[pairs[a].0] - targets[pairs[a].1]).norm();
            let db = (moved[pairs[b].0] - targets[pairs[b].1]).norm();
            da.total_cmp(&db).then(b.cmp(&a))
        });
        match worst {
            Some(k) => {
                pairs.remove(k);
            }
            None => return PeakDeformation::identity(),
        }
    }
}
