//! Every tunable of the pipeline in one place, addressable by a flat key.

use crate::distances::{CorrectionParams, CpParams, CwnParams, MobiusGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub cp: CpParams,
    pub cwn: CwnParams,
    pub cw_grid: MobiusGrid,
    /// Farthest-point samples per surface for cW.
    pub cw_samples: usize,
    pub mantel_permutations: usize,
    pub seed: u64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            cp: CpParams::default(),
            cwn: CwnParams::default(),
            cw_grid: MobiusGrid::default(),
            cw_samples: 256,
            mantel_permutations: 10_000,
            seed: 0,
        }
    }
}

/// Keys accepted by [`Params::set`], with a one-line description each.
pub const KEYS: &[(&str, &str)] = &[
    ("cp.samples", "farthest-point samples scoring cP candidates"),
    ("cp.rotations", "rotation angles per peak pair"),
    ("cp.max_peaks", "peaks kept per surface"),
    ("cp.k_ring", "ring size of the peak local-maximum test"),
    ("cp.peak_prominence", "minimum peak prominence, fraction of the f-hat range"),
    ("cp.refine_iterations", "Nelder-Mead iterations polishing the best candidate"),
    ("cp.finalists", "peak pairs whose best candidate is corrected"),
    ("cp.allow_reflection", "allow improper rigid motions"),
    ("correction.tolerance", "area-distortion residual at which the correction stops"),
    ("correction.max_iterations", "iteration cap of the area correction"),
    ("cwn.radius", "hyperbolic neighbourhood radius R"),
    ("cwn.radial_nodes", "radial quadrature nodes"),
    ("cwn.angular_nodes", "angular quadrature nodes"),
    ("cwn.rotations", "rotations tried per point pair (divides angular_nodes)"),
    ("cwn.samples", "farthest-point samples per surface"),
    ("cw.samples", "farthest-point samples per surface"),
    ("cw.alpha_angles", "angles of the Mobius translation grid"),
    ("cw.alpha_radii", "radii of the Mobius translation grid"),
    ("cw.r_max", "largest translation radius"),
    ("cw.thetas", "rotation angles of the Mobius grid"),
    ("mantel.permutations", "Mantel permutations"),
    ("seed", "seed of every randomized procedure"),
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("invalid value {value:?} for {key}")))
}

impl Params {
    /// Sets one parameter from its textual value; unknown keys and
    /// out-of-range values are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.assign(key, value)?;
        self.validate()
    }

    /// Like [`Params::set`] but leaves range checks to a later
    /// [`Params::validate`], so that coupled keys can be set in any order.
    pub fn assign(&mut self, key: &str, value: &str) -> Result<()> {
        let c: &mut CorrectionParams = &mut self.cp.correction;
        match key {
            "cp.samples" => self.cp.samples = parse(key, value)?,
            "cp.rotations" => self.cp.rotations = parse(key, value)?,
            "cp.max_peaks" => self.cp.max_peaks = parse(key, value)?,
            "cp.k_ring" => self.cp.k_ring = parse(key, value)?,
            "cp.peak_prominence" => self.cp.peak_prominence = parse(key, value)?,
            "cp.refine_iterations" => self.cp.refine_iterations = parse(key, value)?,
            "cp.finalists" => self.cp.finalists = parse(key, value)?,
            "cp.allow_reflection" => self.cp.allow_reflection = parse(key, value)?,
            "correction.tolerance" => c.tolerance = parse(key, value)?,
            "correction.max_iterations" => c.max_iterations = parse(key, value)?,
            "cwn.radius" => self.cwn.radius = parse(key, value)?,
            "cwn.radial_nodes" => self.cwn.radial_nodes = parse(key, value)?,
            "cwn.angular_nodes" => self.cwn.angular_nodes = parse(key, value)?,
            "cwn.rotations" => self.cwn.rotations = parse(key, value)?,
            "cwn.samples" => self.cwn.samples = parse(key, value)?,
            "cw.samples" => self.cw_samples = parse(key, value)?,
            "cw.alpha_angles" => self.cw_grid.alpha_angles = parse(key, value)?,
            "cw.alpha_radii" => self.cw_grid.alpha_radii = parse(key, value)?,
            "cw.r_max" => self.cw_grid.r_max = parse(key, value)?,
            "cw.thetas" => self.cw_grid.thetas = parse(key, value)?,
            "mantel.permutations" => self.mantel_permutations = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Err(Error::InvalidArgument(format!("unknown parameter {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let c = &self.cp.correction;
        Some(match key {
            "cp.samples" => self.cp.samples.to_string(),
            "cp.rotations" => self.cp.rotations.to_string(),
            "cp.max_peaks" => self.cp.max_peaks.to_string(),
            "cp.k_ring" => self.cp.k_ring.to_string(),
            "cp.peak_prominence" => self.cp.peak_prominence.to_string(),
            "cp.refine_iterations" => self.cp.refine_iterations.to_string(),
            "cp.finalists" => self.cp.finalists.to_string(),
            "cp.allow_reflection" => self.cp.allow_reflection.to_string(),
            "correction.tolerance" => c.tolerance.to_string(),
            "correction.max_iterations" => c.max_iterations.to_string(),
            "cwn.radius" => self.cwn.radius.to_string(),
            "cwn.radial_nodes" => self.cwn.radial_nodes.to_string(),
            "cwn.angular_nodes" => self.cwn.angular_nodes.to_string(),
            "cwn.rotations" => self.cwn.rotations.to_string(),
            "cwn.samples" => self.cwn.samples.to_string(),
            "cw.samples" => self.cw_samples.to_string(),
            "cw.alpha_angles" => self.cw_grid.alpha_angles.to_string(),
            "cw.alpha_radii" => self.cw_grid.alpha_radii.to_string(),
            "cw.r_max" => self.cw_grid.r_max.to_string(),
            "cw.thetas" => self.cw_grid.thetas.to_string(),
            "mantel.permutations" => self.mantel_permutations.to_string(),
            "seed" => self.seed.to_string(),
            _ => return None,
        })
    }

    /// Checks the documented ranges.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.cp.samples < 3 || self.cwn.samples < 1 || self.cw_samples < 1 {
            return bad("sample counts must be positive (cP needs at least 3)");
        }
        if self.cp.rotations == 0 || self.cp.max_peaks == 0 || self.cp.finalists == 0 {
            return bad("cP rotation, peak and finalist counts must be positive");
        }
        if !(0.0..1.0).contains(&self.cp.peak_prominence) {
            return bad("cp.peak_prominence must lie in [0, 1)");
        }
        if !(self.cp.correction.tolerance > 0.0) {
            return bad("correction.tolerance must be positive");
        }
        if !(self.cwn.radius > 0.0 && self.cwn.radius.is_finite()) {
            return bad("cwn.radius must be positive");
        }
        if self.cwn.radial_nodes == 0 || self.cwn.rotations == 0 || self.cwn.angular_nodes % self.cwn.rotations != 0 {
            return bad("cwn.rotations must divide cwn.angular_nodes and node counts must be positive");
        }
        if !(0.0..1.0).contains(&self.cw_grid.r_max) || self.cw_grid.thetas == 0 || self.cw_grid.alpha_radii == 0 {
            return bad("cw grid needs r_max in [0, 1) and positive counts");
        }
        if self.mantel_permutations < 99 {
            return bad("mantel.permutations must be at least 99");
        }
        Ok(())
    }

    /// `key = value  # description` lines, one per key.
    pub fn table(&self) -> String {
        let width = KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        KEYS.iter()
            .map(|(k, d)| format!("{k:<width$} = {:<8} # {d}\n", self.get(k).expect("listed key")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_round_trips() {
        let defaults = Params::default();
        for (k, _) in KEYS {
            let mut p = Params::default();
            p.set(k, &defaults.get(k).unwrap()).unwrap();
            assert_eq!(p, defaults, "{k}");
        }
    }

    #[test]
    fn defaults_match_documented_values() {
        let p = Params::default();
        assert_eq!(p.cp.samples, 256);
        assert_eq!(p.cwn.radius, 0.5);
        assert_eq!(p.cp.rotations, 64);
        assert_eq!(p.mantel_permutations, 10_000);
        assert_eq!(p.cp.correction.tolerance, 0.05);
        assert!(p.validate().is_ok());
        assert_eq!(p.table().lines().count(), KEYS.len());
    }

    #[test]
    fn rejects_unknown_and_out_of_range() {
        let mut p = Params::default();
        assert!(p.set("cp.sample", "3").is_err());
        assert!(p.set("mantel.permutations", "10").is_err());
        assert!(p.set("cwn.rotations", "5").is_err());
        assert!(p.set("cwn.radius", "abc").is_err());
    }
}
