//! The conformal Wasserstein distance: optimal transport between the
//! hyperbolic densities under the hyperbolic ground distance, minimized
//! over a grid of disk-preserving Möbius maps.

use std::f64::consts::TAU;

use num_complex::Complex64 as Complex;
use rayon::prelude::*;

use super::sampling::SampleSet;
use crate::error::{Error, Result};
use crate::flatten::FlatMap;
use crate::hyperbolic::{hyperbolic_distance_unchecked, MobiusTransform};
use crate::transport::{solve_kantorovich, CostMatrix, DiscreteMeasure, TransportPlan};

/// Product grid of Möbius maps `(θ, α)`: `α` on `alpha_radii` circles of
/// radius `r_max · k / alpha_radii` (`k = 0..alpha_radii`, the zero radius
/// counted once) at `alpha_angles` angles, times `thetas` rotation angles.
///
/// Doubling any count gives a grid containing the original one exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusGrid {
    pub alpha_angles: usize,
    pub alpha_radii: usize,
    pub r_max: f64,
    pub thetas: usize,
}

impl Default for MobiusGrid {
    fn default() -> Self {
        Self { alpha_angles: 16, alpha_radii: 5, r_max: 0.5, thetas: 16 }
    }
}

impl MobiusGrid {
    pub fn transforms(&self) -> Vec<MobiusTransform> {
        let mut out = Vec::new();
        for k in 0..self.alpha_radii {
            let r = self.r_max * (k as f64 / self.alpha_radii as f64);
            let angles = if k == 0 { 1 } else { self.alpha_angles };
            for j in 0..angles {
                let alpha = Complex::from_polar(r, TAU * (j as f64 / self.alpha_angles as f64));
                for l in 0..self.thetas {
                    let theta = TAU * (l as f64 / self.thetas as f64);
                    out.push(MobiusTransform::new(theta, alpha).expect("grid radius below 1"));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CwResult {
    pub value: f64,
    /// The grid map attaining the minimum.
    pub transform: MobiusTransform,
    pub plan: TransportPlan,
}

fn transport_cost(za: &[Complex], zb: &[Complex], mu: &DiscreteMeasure, nu: &DiscreteMeasure, m: &MobiusTransform) -> Result<TransportPlan> {
    let moved: Vec<Complex> = za.iter().map(|&z| m.apply(z)).collect();
    let cost = CostMatrix::from_fn(moved.len(), zb.len(), |i, j| hyperbolic_distance_unchecked(moved[i], zb[j]));
    solve_kantorovich(mu, nu, &cost)
}

/// Minimum over `grid` of the Kantorovich cost between the push-forward of
/// A's weighted samples and B's weighted samples, with the hyperbolic
/// distance as ground cost. An upper bound for the infimum over all maps.
pub fn cw_distance(
    flat_a: &FlatMap,
    samples_a: &SampleSet,
    flat_b: &FlatMap,
    samples_b: &SampleSet,
    grid: &MobiusGrid,
) -> Result<CwResult> {
    let transforms = grid.transforms();
    if transforms.is_empty() {
        return Err(Error::InvalidArgument("Möbius grid is empty".into()));
    }
    let za = samples_a.disk_points(flat_a);
    let zb = samples_b.disk_points(flat_b);
    let mu = DiscreteMeasure::new((0..za.len()).collect(), samples_a.weights.clone())?;
    let nu = DiscreteMeasure::new((0..zb.len()).collect(), samples_b.weights.clone())?;
    let values: Vec<f64> = transforms
        .par_iter()
        .map(|m| transport_cost(&za, &zb, &mu, &nu, m).map(|p| p.total_cost))
        .collect::<Result<_>>()?;
    let best = (0..values.len())
        .min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
        .expect("non-empty grid");
    let plan = transport_cost(&za, &zb, &mu, &nu, &transforms[best])?;
    Ok(CwResult { value: values[best], transform: transforms[best], plan })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes_and_nesting() {
        let g = MobiusGrid::default();
        assert_eq!(g.transforms().len(), (1 + 16 * 4) * 16);
        let fine = MobiusGrid { alpha_angles: 32, alpha_radii: 10, r_max: 0.5, thetas: 32 }.transforms();
        for m in g.transforms() {
            assert!(fine.iter().any(|f| f == &m));
        }
        assert!(MobiusGrid { thetas: 0, ..g }.transforms().is_empty());
    }
}
