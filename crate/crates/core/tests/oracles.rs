mod common;

use morphodist::analysis::{loo_classify, seriate, DistanceMatrix};
use morphodist::distances::rigid_align;
use morphodist::mesh::Vec3;
use morphodist::transport::{solve_kantorovich, CostMatrix, DiscreteMeasure};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_force_assignment, rotation_grid_residual};

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i}")).collect()
}

#[test]
fn kabsch_matches_rotation_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..4 {
        let n = rng.gen_range(4..12);
        let x: Vec<Vec3> = (0..n).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect();
        let y: Vec<Vec3> = x.iter().map(|p| Vec3::new(p.y, -p.x, p.z) + Vec3::new(rng.gen(), rng.gen(), rng.gen()) * 0.3).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let (_, residual) = rigid_align(&x, &y, &w).unwrap();
        let oracle = rotation_grid_residual(&x, &y, &w).sqrt();
        assert!((residual - oracle).abs() <= 1e-6 * oracle.max(1.0), "{residual} vs {oracle}");
    }
}

#[test]
fn transport_with_unequal_sizes_matches_split_assignment() {
    // Uniform 3 -> uniform 6 equals a 6x6 assignment with every source row duplicated.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let c: Vec<Vec<f64>> = (0..3).map(|_| (0..6).map(|_| rng.gen::<f64>()).collect()).collect();
        let plan = solve_kantorovich(&DiscreteMeasure::uniform(3).unwrap(), &DiscreteMeasure::uniform(6).unwrap(), &CostMatrix::from_fn(3, 6, |i, j| c[i][j]))
            .unwrap();
        let doubled: Vec<Vec<f64>> = (0..6).map(|i| c[i / 2].clone()).collect();
        let oracle = brute_force_assignment(&doubled) / 6.0;
        assert!((plan.total_cost - oracle).abs() <= 1e-12, "{} vs {oracle}", plan.total_cost);
    }
}

fn loo_oracle(d: &DistanceMatrix, labels: &[String]) -> f64 {
    let n = d.len();
    let mut hits = 0;
    for i in 0..n {
        let mut best = usize::MAX;
        for j in 0..n {
            if j != i && (best == usize::MAX || d.get(i, j) < d.get(i, best)) {
                best = j;
            }
        }
        hits += usize::from(labels[best] == labels[i]);
    }
    100.0 * hits as f64 / n as f64
}

#[test]
fn loo_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..30 {
        let n = rng.gen_range(2..10);
        // Coarse integer distances make ties common.
        let raw: Vec<f64> = (0..n * n).map(|_| rng.gen_range(1..4) as f64).collect();
        let d = DistanceMatrix::from_raw(ids(n), None, raw).unwrap();
        let labels: Vec<String> = (0..n).map(|_| ["a", "b", "c"][rng.gen_range(0..3)].to_string()).collect();
        let report = loo_classify(&d, &labels, "level").unwrap();
        assert_eq!(report.success_rate, loo_oracle(&d, &labels));
    }
}

#[test]
fn seriation_recovers_line_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..10 {
        let n = rng.gen_range(5..15);
        let mut xs: Vec<f64> = (0..n).map(|k| k as f64 + rng.gen_range(-0.3..0.3)).collect();
        xs.shuffle(&mut rng);
        let raw: Vec<f64> = (0..n * n).map(|k| (xs[k / n] - xs[k % n]).abs()).collect();
        let order = seriate(&DistanceMatrix::from_raw(ids(n), None, raw).unwrap());
        let along: Vec<f64> = order.iter().map(|&i| xs[i]).collect();
        let up = along.windows(2).all(|w| w[0] < w[1]);
        let down = along.windows(2).all(|w| w[0] > w[1]);
        assert!(up || down, "{along:?}");
    }
}
