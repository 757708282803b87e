//! Disk-preserving Möbius transformations, the hyperbolic distance and
//! measure on the unit disk, and quadrature over hyperbolic neighbourhoods.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flatten::FlatMap;

/// `z -> e^{iθ} (z − α) / (1 − conj(α) z)` with `|α| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobiusTransform {
    theta: f64,
    alpha: Complex,
}

impl Default for MobiusTransform {
    fn default() -> Self {
        Self::identity()
    }
}

fn reduce_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

impl MobiusTransform {
    pub fn new(theta: f64, alpha: Complex) -> Result<Self> {
        if !(alpha.norm() < 1.0) || !theta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Möbius parameters out of range: theta={theta}, |alpha|={}",
                alpha.norm()
            )));
        }
        Ok(Self { theta: reduce_angle(theta), alpha })
    }

    pub fn identity() -> Self {
        Self { theta: 0.0, alpha: Complex::new(0.0, 0.0) }
    }

    pub fn rotation(theta: f64) -> Self {
        Self { theta: reduce_angle(theta), alpha: Complex::new(0.0, 0.0) }
    }

    /// The transform sending `a` to the origin without rotation.
    pub fn to_origin(a: Complex) -> Self {
        debug_assert!(a.norm() < 1.0);
        Self { theta: 0.0, alpha: a }
    }

    /// The transform sending the origin to `a` without rotation.
    pub fn from_origin(a: Complex) -> Self {
        debug_assert!(a.norm() < 1.0);
        Self { theta: 0.0, alpha: -a }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn alpha(&self) -> Complex {
        self.alpha
    }

    #[inline]
    pub fn apply(&self, z: Complex) -> Complex {
        let rot = Complex::from_polar(1.0, self.theta);
        rot * (z - self.alpha) / (Complex::new(1.0, 0.0) - self.alpha.conj() * z)
    }

    /// `|m'(z)| = (1 − |α|²) / |1 − conj(α) z|²`.
    #[inline]
    pub fn derivative_norm(&self, z: Complex) -> f64 {
        let d = Complex::new(1.0, 0.0) - self.alpha.conj() * z;
        (1.0 - self.alpha.norm_sqr()) / d.norm_sqr()
    }

    fn matrix(&self) -> [Complex; 4] {
        let rot = Complex::from_polar(1.0, self.theta);
        [rot, -rot * self.alpha, -self.alpha.conj(), Complex::new(1.0, 0.0)]
    }

    fn from_matrix(m: [Complex; 4]) -> Self {
        let [a, b, _c, d] = m;
        let rot = a / d;
        let alpha = -b / a;
        Self { theta: reduce_angle(rot.arg()), alpha }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &MobiusTransform) -> MobiusTransform {
        let p = self.matrix();
        let q = inner.matrix();
        Self::from_matrix([
            p[0] * q[0] + p[1] * q[2],
            p[0] * q[1] + p[1] * q[3],
            p[2] * q[0] + p[3] * q[2],
            p[2] * q[1] + p[3] * q[3],
        ])
    }

    pub fn inverse(&self) -> MobiusTransform {
        Self {
            theta: reduce_angle(-self.theta),
            alpha: -self.alpha * Complex::from_polar(1.0, self.theta),
        }
    }
}

/// `m2 ∘ m1`.
pub fn compose(m2: &MobiusTransform, m1: &MobiusTransform) -> MobiusTransform {
    m2.compose(m1)
}

/// Hyperbolic distance `ln((1 + r) / (1 − r))` after translating `z` to the
/// origin, where `r = |m(z')|`.
pub fn hyperbolic_distance(z: Complex, w: Complex) -> Result<f64> {
    if !(z.norm() < 1.0) || !(w.norm() < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "hyperbolic distance needs points inside the open unit disk (|z|={}, |w|={})",
            z.norm(),
            w.norm()
        )));
    }
    Ok(hyperbolic_distance_unchecked(z, w))
}

#[inline]
pub(crate) fn hyperbolic_distance_unchecked(z: Complex, w: Complex) -> f64 {
    let r = ((w - z) / (Complex::new(1.0, 0.0) - z.conj() * w)).norm();
    2.0 * r.min(1.0 - f64::EPSILON).atanh()
}

/// Per-vertex quadrature weights for `dη = (1 − |z|²)^{-2} dx dy`; boundary
/// vertices get weight 0.
pub fn hyperbolic_vertex_measure(flat: &FlatMap) -> Vec<f64> {
    flat.disk_coords()
        .iter()
        .zip(flat.planar_area())
        .zip(flat.boundary_mask())
        .map(|((z, &a), &b)| {
            if b {
                0.0
            } else {
                let s = 1.0 - z.norm_sqr();
                a / (s * s)
            }
        })
        .collect()
}

/// All transforms `m` with `m(z) = z'`, indexed by the rotation angle.
pub fn mobius_family_fixing(z: Complex, z_target: Complex, theta: f64) -> MobiusTransform {
    MobiusTransform::from_origin(z_target)
        .compose(&MobiusTransform::rotation(theta))
        .compose(&MobiusTransform::to_origin(z))
}

/// A polar quadrature grid on the hyperbolic disk `N(0, R)`.
///
/// Nodes sit at the radial midpoints of each polar cell and carry the exact
/// `dη`-measure of the cell, so the weights sum to the measure of `N(0, R)`.
/// Nodes are ordered ring by ring; within a ring by angle.
#[derive(Debug, Clone)]
pub struct NeighborhoodGrid {
    radius: f64,
    radial: usize,
    angular: usize,
    points: Vec<Complex>,
    weights: Vec<f64>,
}

impl NeighborhoodGrid {
    pub fn new(radius: f64, radial: usize, angular: usize) -> Result<Self> {
        if !(radius > 0.0) || radial == 0 || angular == 0 {
            return Err(Error::InvalidArgument("neighbourhood grid needs R > 0 and non-empty grid".into()));
        }
        let r_e = euclidean_radius(radius);
        let dphi = TAU / angular as f64;
        let mut points = Vec::with_capacity(radial * angular);
        let mut weights = Vec::with_capacity(radial * angular);
        for i in 0..radial {
            let ra = r_e * i as f64 / radial as f64;
            let rb = r_e * (i + 1) as f64 / radial as f64;
            let rho = 0.5 * (ra + rb);
            let w = 0.5 * dphi * (1.0 / (1.0 - rb * rb) - 1.0 / (1.0 - ra * ra));
            for j in 0..angular {
                let phi = TAU * (j as f64 / angular as f64);
                points.push(Complex::from_polar(rho, phi));
                weights.push(w);
            }
        }
        Ok(Self { radius, radial, angular, points, weights })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn radial(&self) -> usize {
        self.radial
    }

    pub fn angular(&self) -> usize {
        self.angular
    }

    /// Grid nodes in `N(0, R)`.
    pub fn points(&self) -> &[Complex] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the node obtained by rotating node `k` by `shift` angular steps.
    #[inline]
    pub fn rotated_index(&self, k: usize, shift: usize) -> usize {
        let (i, j) = (k / self.angular, k % self.angular);
        i * self.angular + (j + shift) % self.angular
    }

    /// The `dη`-measure of `N(0, R)`: `π sinh²(R/2)`.
    pub fn exact_measure(&self) -> f64 {
        PI * (0.5 * self.radius).sinh().powi(2)
    }
}

/// Euclidean radius `r` of the hyperbolic disk `N(0, R)`: `ln((1+r)/(1−r)) = R`.
pub fn euclidean_radius(hyperbolic_radius: f64) -> f64 {
    (0.5 * hyperbolic_radius).tanh()
}

/// Quadrature nodes and weights on `N(z, R)`: the grid on `N(0, R)` carried
/// to `z` by the translation taking 0 to `z`.
pub fn neighborhood_samples(z: Complex, grid: &NeighborhoodGrid) -> Result<Vec<(Complex, f64)>> {
    if !(z.norm() < 1.0) {
        return Err(Error::InvalidArgument("neighbourhood centre must lie inside the disk".into()));
    }
    let t = MobiusTransform::from_origin(z);
    Ok(grid.points().iter().zip(grid.weights()).map(|(&u, &w)| (t.apply(u), w)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn random_point(rng: &mut ChaCha8Rng, rmax: f64) -> Complex {
        let r = rmax * rng.gen::<f64>().sqrt();
        Complex::from_polar(r, rng.gen::<f64>() * TAU)
    }

    fn random_mobius(rng: &mut ChaCha8Rng) -> MobiusTransform {
        MobiusTransform::new(rng.gen::<f64>() * TAU, random_point(rng, 0.9)).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let id = MobiusTransform::identity();
        assert_eq!(id.apply(c(0.3, -0.2)), c(0.3, -0.2));
        let rot = MobiusTransform::rotation(PI);
        assert!((rot.apply(c(0.5, 0.0)) - c(-0.5, 0.0)).norm() < 1e-15);
        let m = MobiusTransform::new(0.0, c(0.5, 0.0)).unwrap();
        assert_eq!(m.apply(c(0.5, 0.0)), c(0.0, 0.0));
        assert!(MobiusTransform::new(0.0, c(1.0, 0.0)).is_err());
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(MobiusTransform::identity().inverse(), MobiusTransform::identity());
        let m = MobiusTransform::new(0.0, c(0.3, 0.0)).unwrap();
        assert!((m.inverse().apply(c(0.0, 0.0)) - c(0.3, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn boundary_maps_to_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let m = random_mobius(&mut rng);
            let z = Complex::from_polar(1.0, rng.gen::<f64>() * TAU);
            assert!((m.apply(z).norm() - 1.0).abs() < 1e-12);
            let w = random_point(&mut rng, 0.99);
            assert!(m.apply(w).norm() < 1.0);
        }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(hyperbolic_distance(c(0.0, 0.0), c(0.0, 0.0)).unwrap(), 0.0);
        let d = hyperbolic_distance(c(0.0, 0.0), c(0.5, 0.0)).unwrap();
        assert!((d - 3f64.ln()).abs() < 1e-12);
        assert!(hyperbolic_distance(c(1.0, 0.0), c(0.0, 0.0)).is_err());
    }

    #[test]
    fn family_fixing_maps_constraint() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let id = mobius_family_fixing(c(0.0, 0.0), c(0.0, 0.0), 0.0);
        assert!((id.apply(c(0.2, 0.7)) - c(0.2, 0.7)).norm() < 1e-15);
        for _ in 0..200 {
            let z = random_point(&mut rng, 0.95);
            let zt = random_point(&mut rng, 0.95);
            let th = rng.gen::<f64>() * TAU;
            let m = mobius_family_fixing(z, zt, th);
            assert!((m.apply(z) - zt).norm() < 1e-12);
            let m2 = mobius_family_fixing(z, zt, th + 0.5);
            let probe = random_point(&mut rng, 0.5);
            if (probe - z).norm() > 1e-3 {
                assert!((m.apply(probe) - m2.apply(probe)).norm() > 1e-6);
            }
        }
    }

    #[test]
    fn grid_measure_is_exact() {
        let g = NeighborhoodGrid::new(0.5, 16, 32).unwrap();
        let total: f64 = g.weights().iter().sum();
        assert!((total - g.exact_measure()).abs() < 1e-12 * g.exact_measure());
        let r_e = euclidean_radius(0.5);
        assert!(((1.0 + r_e) / (1.0 - r_e)).ln() - 0.5 < 1e-15);
        assert!(g.points().iter().all(|p| p.norm() < r_e));
        assert_eq!(g.rotated_index(31, 1), 0);
        assert_eq!(g.rotated_index(33, 2), 35);
    }
}
