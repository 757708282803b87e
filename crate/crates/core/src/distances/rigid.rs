//! Weighted least-squares rigid alignment (Kabsch) and the discrete
//! Procrustes distance between matched landmark configurations.

use nalgebra::{Matrix3, Rotation3};
use crate::error::{Error, Result};
use crate::mesh::Vec3;

/// `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Default for RigidMotion {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidMotion {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.rotation * x + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation) }
    }

    /// Rotation entries row by row, then the translation.
    pub fn to_array(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)], t.x, t.y, t.z]
    }

    pub fn from_array(a: &[f64; 12]) -> Self {
        Self {
            rotation: Matrix3::new(a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8]),
            translation: Vec3::new(a[9], a[10], a[11]),
        }
    }

    /// Angle of the rotation part, in radians.
    pub fn rotation_angle(&self) -> f64 {
        let c = 0.5 * (self.rotation.trace() - 1.0);
        c.clamp(-1.0, 1.0).acos()
    }

    /// Angle of `self.rotation · other.rotationᵀ`.
    pub fn rotation_angle_to(&self, other: &RigidMotion) -> f64 {
        let rel = self.rotation * other.rotation.transpose();
        (0.5 * (rel.trace() - 1.0)).clamp(-1.0, 1.0).acos()
    }

    pub fn is_proper(&self, tol: f64) -> bool {
        let r = &self.rotation;
        (r.transpose() * r - Matrix3::identity()).abs().max() <= tol && (r.determinant() - 1.0).abs() <= tol
    }
}

impl From<(Rotation3<f64>, Vec3)> for RigidMotion {
    fn from((r, t): (Rotation3<f64>, Vec3)) -> Self {
        Self { rotation: *r.matrix(), translation: t }
    }
}

/// `sqrt(Σ w_i |R x_i + t − y_i|²)`.
pub fn weighted_residual(motion: &RigidMotion, source: &[Vec3], target: &[Vec3], weights: &[f64]) -> f64 {
    source
        .iter()
        .zip(target)
        .zip(weights)
        .map(|((x, y), w)| w * (motion.apply(x) - y).norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// The proper rigid motion minimizing `Σ w_i |R x_i + t − y_i|²`, and the
/// residual `sqrt` of that minimum (weights are not normalized).
pub fn rigid_align(source: &[Vec3], target: &[Vec3], weights: &[f64]) -> Result<(RigidMotion, f64)> {
    rigid_align_with(source, target, weights, false)
}

/// As [`rigid_align`]; `allow_reflection` admits improper orthogonal maps.
pub fn rigid_align_with(
    source: &[Vec3],
    target: &[Vec3],
    weights: &[f64],
    allow_reflection: bool,
) -> Result<(RigidMotion, f64)> {
    if source.len() != target.len() || source.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} source points, {} target points, {} weights",
            source.len(),
            target.len(),
            weights.len()
        )));
    }
    if source.len() < 3 {
        return Err(Error::InvalidArgument("rigid alignment needs at least 3 points".into()));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidArgument("alignment weights must be nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("alignment weights sum to zero".into()));
    }
    let mut cs = Vec3::zeros();
    let mut ct = Vec3::zeros();
    for ((x, y), w) in source.iter().zip(target).zip(weights) {
        cs += x * *w;
        ct += y * *w;
    }
    cs /= total;
    ct /= total;
    let mut h = Matrix3::zeros();
    for ((x, y), w) in source.iter().zip(target).zip(weights) {
        h += (x - cs) * (y - ct).transpose() * *w;
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut s = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    s = nalgebra::Vector3::new(s[order[0]], s[order[1]], s[order[2]]);
    if !(s[0] > 0.0) || s[1] <= 1e-12 * s[0] {
        return Err(Error::Degenerate("cross-covariance has rank < 2".into()));
    }
    let v = v_t.transpose();
    let mut d = Matrix3::identity();
    if !allow_reflection && (v * u.transpose()).determinant() < 0.0 {
        // flip the direction of least covariance
        let (k, _) = svd.singular_values.argmin();
        d[(k, k)] = -1.0;
    }
    let rotation = v * d * u.transpose();
    let motion = RigidMotion { rotation, translation: ct - rotation * cs };
    let residual = weighted_residual(&motion, source, target, weights);
    Ok((motion, residual))
}

/// `min over proper rigid motions of (Σ_n |R X_n + t − Y_n|²)^{1/2}`.
pub fn discrete_procrustes(x: &[Vec3], y: &[Vec3]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} landmarks", x.len(), y.len())));
    }
    rigid_align(x, y, &vec![1.0; x.len()]).map(|(_, r)| r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::random_rigid_motion;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        (0..n).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect()
    }

    #[test]
    fn identity_when_equal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = cloud(&mut rng, 10);
        let (m, r) = rigid_align(&x, &x, &vec![1.0; 10]).unwrap();
        assert!(r < 1e-12);
        assert!((m.rotation - Matrix3::identity()).abs().max() < 1e-12);
    }

    #[test]
    fn recovers_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x = cloud(&mut rng, 12);
            let truth: RigidMotion = random_rigid_motion(&mut rng).into();
            let y: Vec<Vec3> = x.iter().map(|p| truth.apply(p)).collect();
            let w: Vec<f64> = (0..12).map(|_| rng.gen_range(0.1..2.0)).collect();
            let (m, r) = rigid_align(&x, &y, &w).unwrap();
            assert!(r < 1e-9);
            assert!((m.rotation - truth.rotation).abs().max() < 1e-9);
            assert!((m.translation - truth.translation).norm() < 1e-9);
            assert!(m.is_proper(1e-12));
        }
    }

    #[test]
    fn reflection_flag() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = cloud(&mut rng, 8);
        let y: Vec<Vec3> = x.iter().map(|p| Vec3::new(-p.x, p.y, p.z)).collect();
        let w = vec![1.0; 8];
        let (m, r) = rigid_align(&x, &y, &w).unwrap();
        assert!(m.rotation.determinant() > 0.0 && r > 1e-3);
        let (m, r) = rigid_align_with(&x, &y, &w, true).unwrap();
        assert!(m.rotation.determinant() < 0.0 && r < 1e-9);
    }

    #[test]
    fn degenerate_and_mismatch() {
        let line: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(rigid_align(&line, &line, &[1.0; 5]), Err(Error::Degenerate(_))));
        assert!(discrete_procrustes(&line, &line[..4]).is_err());
    }

    #[test]
    fn procrustes_is_uniform_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = cloud(&mut rng, 10);
        let y = cloud(&mut rng, 10);
        let d = discrete_procrustes(&x, &y).unwrap();
        let (_, r) = rigid_align(&x, &y, &[1.0; 10]).unwrap();
        assert_eq!(d, r);
    }
}
