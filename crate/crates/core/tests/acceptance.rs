//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//! `ACCEPTANCE_ONLY=3,9` restricts the run to the listed criteria.

mod common;

use std::time::{Duration, Instant};

use morphodist::analysis::{
    heatmap_export, loo_classify, mantel, pair_distance, pairwise_matrix, propagate_landmarks, seriate, DistanceMatrix, LabeledCollection,
    Metric, Specimen,
};
use morphodist::distances::CorrespondenceMap;
use morphodist::hyperbolic::{hyperbolic_distance, hyperbolic_vertex_measure, MobiusTransform};
use morphodist::mesh::{landmark_to_point, normalize_mesh, Landmark, LandmarkSet, TriMesh};
use morphodist::params::Params;
use morphodist::synth;
use morphodist::transport::{solve_kantorovich, CostMatrix, DiscreteMeasure};
use morphodist::{flatten, Result};
use num_complex::Complex64 as Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{angle_distortion, brute_force_assignment, geodesic_distance, ks_p_value, ks_uniform_statistic, FacePoint};

/// Rings of the acceptance corpus meshes (3781 vertices each).
const CORPUS_RINGS: usize = 35;
const CORPUS_SEED: u64 = 42;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_disk_point(rng: &mut impl Rng, r: f64) -> Complex {
    Complex::from_polar(r * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..std::f64::consts::TAU))
}

fn random_mobius(rng: &mut impl Rng) -> MobiusTransform {
    MobiusTransform::new(rng.gen_range(0.0..std::f64::consts::TAU), random_disk_point(rng, 0.9)).unwrap()
}

fn criterion_1() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut law: f64 = 0.0;
    for _ in 0..200 {
        let (a, b, c) = (random_mobius(&mut rng), random_mobius(&mut rng), random_mobius(&mut rng));
        let z = random_disk_point(&mut rng, 0.95);
        let assoc = (a.compose(&b).compose(&c).apply(z) - a.compose(&b.compose(&c)).apply(z)).norm();
        let inv = (a.compose(&a.inverse()).apply(z) - z).norm().max((a.inverse().compose(&a).apply(z) - z).norm());
        let ident = (a.compose(&MobiusTransform::identity()).apply(z) - a.apply(z)).norm();
        law = law.max(assoc).max(inv).max(ident);
    }
    let ln3 = (hyperbolic_distance(Complex::new(0.0, 0.0), Complex::new(0.5, 0.0))? - 3f64.ln()).abs();
    let mut inv_err: f64 = 0.0;
    for _ in 0..1000 {
        let m = random_mobius(&mut rng);
        let (z, w) = (random_disk_point(&mut rng, 0.9), random_disk_point(&mut rng, 0.9));
        let d = hyperbolic_distance(z, w)?;
        inv_err = inv_err.max((hyperbolic_distance(m.apply(z), m.apply(w))? - d).abs());
    }
    Ok(outcome(
        law < 1e-12 && ln3 < 1e-12 && inv_err < 1e-10,
        format!("group laws {law:.1e}, |d(0,0.5) - ln 3| {ln3:.1e}, invariance {inv_err:.1e}"),
    ))
}

fn criterion_2() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=8);
        let c: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen::<f64>()).collect()).collect();
        let cost = CostMatrix::from_fn(n, n, |i, j| c[i][j]);
        let plan = solve_kantorovich(&DiscreteMeasure::uniform(n)?, &DiscreteMeasure::uniform(n)?, &cost)?;
        let oracle = brute_force_assignment(&c) / n as f64;
        worst = worst.max((plan.total_cost - oracle).abs());
    }
    Ok(outcome(worst <= 1e-12, format!("50 uniform instances, max |cost - permutation optimum| {worst:.1e}")))
}

fn criterion_3() -> Result<Outcome> {
    let mut means = Vec::new();
    let mut boundary: f64 = 0.0;
    for rings in [10, 20, 40] {
        let m = synth::spherical_cap(rings, 0.5, "cap");
        let f = flatten(&m)?;
        means.push(angle_distortion(&m, &f).0);
        for &v in m.boundary_loop() {
            boundary = boundary.max((f.disk_coords()[v].norm() - 1.0).abs());
        }
    }
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    Ok(outcome(
        decreasing && boundary <= 1e-9,
        format!("mean angle distortion {:.2e} > {:.2e} > {:.2e}, boundary |z| error {boundary:.1e}", means[0], means[1], means[2]),
    ))
}

fn corpus() -> Vec<(TriMesh, String)> {
    synth::corpus(CORPUS_RINGS, synth::FAMILIES, 4, CORPUS_SEED)
}

fn criterion_4(corpus: &[(TriMesh, String)]) -> Result<Outcome> {
    let (mut unit, mut identity): (f64, f64) = (0.0, 0.0);
    for (m, _) in corpus {
        let f = flatten(&normalize_mesh(m)?)?;
        let mass: f64 = f.factor().iter().zip(f.planar_area()).map(|(a, b)| a * b).sum();
        let eta = hyperbolic_vertex_measure(&f);
        let hyper: f64 = f.hyper_factor().iter().zip(&eta).map(|(a, b)| a * b).sum();
        unit = unit.max((mass - 1.0).abs());
        identity = identity.max((hyper - mass).abs());
    }
    Ok(outcome(
        unit <= 1e-6 && identity <= 1e-9,
        format!("{} meshes: |sum f dxdy - 1| {unit:.1e}, |sum f-hat d-eta - sum f dxdy| {identity:.1e}", corpus.len()),
    ))
}

fn specimen(mesh: TriMesh, label: &str) -> Specimen {
    Specimen { id: mesh.specimen_id().to_string(), mesh, labels: vec![label.to_string()], landmarks: None }
}

fn criterion_5(params: &Params) -> Result<Outcome> {
    let shapes: Vec<TriMesh> = [(0, 0, 20), (1, 0, 22), (2, 0, 25), (0, 3, 28), (2, 2, 30)]
        .iter()
        .map(|&(f, l, rings)| synth::bump_surface(rings, &synth::family_member(f, l, 9), &format!("s{f}{l}")))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut cp_self, mut cp_rigid, mut cwn_self, mut cwn_rigid): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    let start = Instant::now();
    for s in &shapes {
        let a = specimen(s.clone(), "x");
        cp_self = cp_self.max(pair_distance(&a, &a, Metric::Cp, params)?.value);
        cwn_self = cwn_self.max(pair_distance(&a, &a, Metric::Cwn, params)?.value);
        for k in 0..5 {
            let (rot, t) = synth::random_rigid_motion(&mut rng);
            let b = specimen(synth::apply_rigid(s, &rot, &t).with_id(format!("{}_r{k}", s.specimen_id())), "x");
            cp_rigid = cp_rigid.max(pair_distance(&a, &b, Metric::Cp, params)?.value);
            cwn_rigid = cwn_rigid.max(pair_distance(&a, &b, Metric::Cwn, params)?.value);
        }
    }
    let elapsed = start.elapsed();
    let sizes: Vec<usize> = shapes.iter().map(TriMesh::num_vertices).collect();
    Ok(outcome(
        cp_self <= 1e-6 && cp_rigid <= 1e-3 && cwn_self <= 1e-6 && cwn_rigid <= 1e-3 && elapsed <= Duration::from_secs(600),
        format!(
            "vertices {sizes:?}: cP self {cp_self:.1e} rigid {cp_rigid:.1e}, cWn self {cwn_self:.1e} rigid {cwn_rigid:.1e}, {:.0} s",
            elapsed.as_secs_f64()
        ),
    ))
}

/// Worst triangle-inequality slack over all ordered triples, relative to
/// the largest side.
fn triangle_slack(d: &DistanceMatrix) -> f64 {
    let n = d.len();
    let mut worst = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i != j && j != k && i != k {
                    let big = d.get(i, j).max(d.get(i, k)).max(d.get(k, j));
                    if big > 0.0 {
                        worst = worst.min((d.get(i, k) + d.get(k, j) - d.get(i, j)) / big);
                    }
                }
            }
        }
    }
    worst
}

fn collection(corpus: &[(TriMesh, String)]) -> Result<LabeledCollection> {
    LabeledCollection::new(vec!["family".into()], corpus.iter().map(|(m, l)| specimen(m.clone(), l)).collect())
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn criterion_6(c: &LabeledCollection, params: &Params) -> Result<(Outcome, DistanceMatrix)> {
    let mut details = Vec::new();
    let mut pass = true;
    let mut cp = None;
    for metric in [Metric::Cp, Metric::Cwn] {
        let start = Instant::now();
        let run = pairwise_matrix(c, metric, params, jobs())?;
        let m = run.matrix;
        let (asym, slack) = (m.raw_asymmetry(), triangle_slack(&m));
        pass &= m.is_complete() && asym <= 0.05 && slack >= -0.05;
        details.push(format!(
            "{metric}: asymmetry {:.2}%, triangle slack {:.2}%, {} failed pairs, {:.0} s",
            100.0 * asym,
            100.0 * slack,
            m.failures().len(),
            start.elapsed().as_secs_f64()
        ));
        if metric == Metric::Cp {
            cp = Some(m);
        }
    }
    Ok((outcome(pass, details.join("; ")), cp.expect("cP computed")))
}

fn criterion_7(c: &LabeledCollection, cp: &DistanceMatrix) -> Result<Outcome> {
    let report = loo_classify(cp, &c.labels_at("family")?, "family")?;
    let again = loo_classify(cp, &c.labels_at("family")?, "family")?;
    Ok(outcome(
        report.success_rate >= 90.0 && report.to_json()? == again.to_json()?,
        format!("cP leave-one-out success {:.1}% on {} specimens", report.success_rate, cp.len()),
    ))
}

fn random_distance_matrix(rng: &mut ChaCha8Rng, n: usize) -> Result<DistanceMatrix> {
    let pts: Vec<[f64; 3]> = (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
    let raw = (0..n * n)
        .map(|k| {
            let (a, b) = (pts[k / n], pts[k % n]);
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
        })
        .collect();
    DistanceMatrix::from_raw((0..n).map(|i| format!("x{i}")).collect(), None, raw)
}

fn criterion_8() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let permutations = 999;
    let mut sig = Vec::with_capacity(200);
    for t in 0..200 {
        let d1 = random_distance_matrix(&mut rng, 20)?;
        let d2 = random_distance_matrix(&mut rng, 20)?;
        sig.push(mantel(&d1, &d2, permutations, t)?.significance);
    }
    let d = ks_uniform_statistic(&sig);
    let p = ks_p_value(d, sig.len());
    let d1 = random_distance_matrix(&mut rng, 20)?;
    let same = mantel(&d1, &d1, permutations, 0)?.significance;
    let expected = 1.0 / (permutations + 1) as f64;
    Ok(outcome(
        p > 0.01 && same == expected,
        format!("KS D = {d:.4} (p = {p:.3}) over 200 trials; D2 = D1 significance {same} (expected {expected})"),
    ))
}

fn criterion_9(params: &Params) -> Result<Outcome> {
    let source = synth::bump_surface(25, &synth::family_member(1, 1, 3), "source");
    let target = synth::smooth_deform(&source, 0.05).with_id("target");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let planted: Vec<Landmark> = (0..10)
        .map(|k| {
            let (a, b) = (rng.gen::<f64>(), rng.gen::<f64>());
            let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
            Landmark { label: format!("L{k}"), face: rng.gen_range(0..source.num_faces()), bary: [1.0 - a - b, a, b] }
        })
        .collect();
    let set = LandmarkSet::new(planted.clone())?;
    let map = pair_distance(&specimen(source.clone(), "x"), &specimen(target.clone(), "x"), Metric::Cp, params)?
        .map
        .expect("cP returns a map");
    let out = propagate_landmarks(&map, &set, &source, &target)?;
    let diameter = target.diameter();
    let mut worst: f64 = 0.0;
    for (lm, got) in planted.iter().zip(out.landmarks.entries()) {
        let want = FacePoint { face: lm.face, bary: lm.bary };
        let got = FacePoint { face: got.face, bary: got.bary };
        worst = worst.max(geodesic_distance(&target, &got, &want, 6) / diameter);
    }
    let identity = CorrespondenceMap::identity(&source);
    let same = propagate_landmarks(&identity, &set, &source, &source)?;
    let mut exact: f64 = 0.0;
    for (a, b) in set.entries().iter().zip(same.landmarks.entries()) {
        exact = exact.max((landmark_to_point(&source, a)? - landmark_to_point(&source, b)?).norm());
    }
    Ok(outcome(
        out.failures.is_empty() && worst <= 0.02 && exact <= 1e-9,
        format!("10 landmarks: worst geodesic error {:.2}% of diameter; identity error {exact:.1e}", 100.0 * worst),
    ))
}

fn criterion_10(params: &Params) -> Result<Outcome> {
    let rings = 41;
    let a = specimen(synth::bump_surface(rings, &synth::family_member(0, 0, 10), "a"), "x");
    let b = specimen(synth::bump_surface(rings, &synth::family_member(1, 2, 10), "b"), "x");
    let start = Instant::now();
    let cp = pair_distance(&a, &b, Metric::Cp, params)?.value;
    let t_cp = start.elapsed();
    let start = Instant::now();
    let cwn = pair_distance(&a, &b, Metric::Cwn, params)?.value;
    let t_cwn = start.elapsed();
    Ok(outcome(
        t_cp <= Duration::from_secs(60) && t_cwn <= Duration::from_secs(600),
        format!(
            "{} vertices on {} thread(s): cP {cp:.4} in {:.1} s, cWn (n = {}) {cwn:.4} in {:.1} s",
            a.mesh.num_vertices(),
            jobs(),
            t_cp.as_secs_f64(),
            params.cwn.samples,
            t_cwn.as_secs_f64()
        ),
    ))
}

/// Every byte the pipeline writes for a small corpus at a given parallelism.
fn artifacts(c: &LabeledCollection, params: &Params, jobs: usize) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut mats = Vec::new();
    for metric in [Metric::Cp, Metric::Cwn] {
        let run = pairwise_matrix(c, metric, params, jobs)?;
        run.matrix.write_csv(&mut out)?;
        for r in &run.records {
            out.extend(serde_json::to_vec(r)?);
        }
        out.extend(loo_classify(&run.matrix, &c.labels_at("family")?, "family")?.to_json()?.bytes());
        mats.push(run.matrix);
    }
    out.extend(serde_json::to_vec(&mantel(&mats[0], &mats[1], 999, 3)?)?);
    heatmap_export(&mats[0], &mats[1], &seriate(&mats[0]), &mut out)?;
    Ok(out)
}

fn criterion_11(params: &Params) -> Result<Outcome> {
    let small = synth::corpus(12, synth::FAMILIES, 2, CORPUS_SEED);
    let c = collection(&small)?;
    let reference = artifacts(&c, params, 1)?;
    let mut same = true;
    for jobs in [1, 2, 4] {
        same &= artifacts(&c, params, jobs)? == reference;
    }
    Ok(outcome(
        same,
        format!("{} specimens, cP and cWn matrices, logs, reports, Mantel and pixmap identical at 1, 2 and 4 threads", c.specimens.len()),
    ))
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |k: usize| only.as_ref().is_none_or(|o| o.contains(&k));
    let params = Params::default();
    let mut results: Vec<(usize, Result<Outcome>)> = Vec::new();
    let mut report = |k: usize, r: Result<Outcome>| {
        match &r {
            Ok(o) => println!("criterion {k:>2}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail),
            Err(e) => println!("criterion {k:>2}: FAIL | error: {e}"),
        }
        results.push((k, r));
    };

    if wanted(1) {
        report(1, criterion_1());
    }
    if wanted(2) {
        report(2, criterion_2());
    }
    if wanted(3) {
        report(3, criterion_3());
    }
    let corpus = (wanted(4) || wanted(6) || wanted(7)).then(corpus);
    if wanted(4) {
        report(4, criterion_4(corpus.as_ref().unwrap()));
    }
    if wanted(5) {
        report(5, criterion_5(&params));
    }
    if wanted(6) || wanted(7) {
        match collection(corpus.as_ref().unwrap()).and_then(|c| criterion_6(&c, &params).map(|r| (c, r))) {
            Ok((c, (o6, cp))) => {
                if wanted(6) {
                    report(6, Ok(o6));
                }
                if wanted(7) {
                    report(7, criterion_7(&c, &cp));
                }
            }
            Err(e) => {
                let msg = e.to_string();
                report(6, Err(e));
                report(7, Err(morphodist::Error::Solver(format!("no cP matrix: {msg}"))));
            }
        }
    }
    if wanted(8) {
        report(8, criterion_8());
    }
    if wanted(9) {
        report(9, criterion_9(&params));
    }
    if wanted(10) {
        report(10, criterion_10(&params));
    }
    if wanted(11) {
        report(11, criterion_11(&params));
    }
    let failed: Vec<usize> = results.iter().filter(|(_, r)| !matches!(r, Ok(o) if o.pass)).map(|(k, _)| *k).collect();
    println!("acceptance: {} of {} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
