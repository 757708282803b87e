//! `morphodist`: batch front end over the morphodist library.

mod config;
mod failure;
mod manifest;
mod provenance;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde_json::json;

use morphodist::analysis::{
    heatmap_export, loo_classify, mantel, pair_distance, pairwise_matrix, propagate_along_path, seriate, DistanceMatrix, Metric,
};
use morphodist::distances::{read_correspondence_csv, write_correspondence_csv, CorrespondenceMap};
use morphodist::mesh::{load_mesh_file, parse_raw_mesh, read_landmarks_csv, write_landmarks_csv, MeshFormat, TriMesh};

use config::{defaults_table, RunConfig};
use failure::Failure;
use manifest::{load_collection, load_specimen, read_manifest};
use provenance::Provenance;

#[derive(Parser, Debug)]
#[command(name = "morphodist", version, about = "Landmark-free distances between disk-type surfaces")]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable, applied after --config.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Where to write the provenance record (default: next to the first output).
    #[arg(long, global = true, value_name = "FILE")]
    provenance: Option<PathBuf>,
    /// Print every configuration key with its default and exit.
    #[arg(long)]
    show_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check that meshes are valid disk-type triangulations.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Conformally flatten a mesh to the unit disk.
    Flatten {
        mesh: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Distance from one mesh to another.
    Dist {
        mesh_a: PathBuf,
        mesh_b: PathBuf,
        /// cP, cWn, cW or ODLP (landmarks from `<stem>.landmarks.csv`).
        #[arg(long, value_parser = parse_metric)]
        metric: Option<Metric>,
        /// Write the correspondence map (cP, cWn).
        #[arg(long, value_name = "FILE")]
        correspondence: Option<PathBuf>,
        /// Exit 1 when the cP area correction does not reach its tolerance.
        #[arg(long)]
        strict: bool,
    },
    /// All pairwise distances of a manifest's specimens.
    Matrix {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_parser = parse_metric)]
        metric: Option<Metric>,
        #[arg(long, short)]
        out: PathBuf,
        /// Worker threads (default: available cores).
        #[arg(long, env = "MORPHODIST_JOBS")]
        jobs: Option<usize>,
    },
    /// Mantel test between two distance matrices.
    Mantel {
        matrix_a: PathBuf,
        matrix_b: PathBuf,
        #[arg(long)]
        permutations: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// JSON result file.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Leave-one-out nearest-neighbour classification.
    Classify {
        matrix: PathBuf,
        /// Manifest or `id,level1,...` labels file.
        labels: PathBuf,
        #[arg(long)]
        level: String,
        /// JSON report file (default: standard output).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Carry landmarks along a chain of correspondence maps.
    Propagate {
        /// Landmarks on the first mesh of the chain.
        #[arg(long)]
        landmarks: PathBuf,
        /// Correspondence CSVs in chain order.
        #[arg(long = "map", required = true)]
        maps: Vec<PathBuf>,
        /// Meshes along the chain, one more than maps.
        #[arg(long = "mesh", required = true)]
        meshes: Vec<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Red-blue heatmap of two matrices, one per triangle.
    Heatmap {
        upper: PathBuf,
        lower: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Order::Seriate)]
        order: Order,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Order {
    /// Spectral seriation of the upper matrix.
    Seriate,
    /// Id order of the upper matrix.
    Input,
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: morphodist::Error| e.to_string())
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn read_matrix(path: &Path) -> Result<DistanceMatrix, Failure> {
    DistanceMatrix::read_csv(open(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_mesh(path: &Path) -> Result<TriMesh, Failure> {
    load_mesh_file(path).map_err(|e| match Failure::from(e) {
        Failure::Usage(m) => Failure::Usage(format!("{}: {m}", path.display())),
        Failure::Domain(m) => Failure::Domain(format!("{}: {m}", path.display())),
    })
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh").to_string()
}

/// Outcome of a command: the exit code, and the run record to emit.
type Run = (u8, Provenance);

fn cmd_validate(paths: &[PathBuf]) -> Result<Run, Failure> {
    let mut prov = Provenance::new("validate");
    let (mut io_error, mut failed) = (false, false);
    let mut reports = Vec::new();
    for path in paths {
        prov.input(path);
        let report = match File::open(path) {
            Err(e) => {
                io_error = true;
                ("error", e.to_string())
            }
            Ok(f) => match MeshFormat::from_path(path) {
                None => {
                    io_error = true;
                    ("error", "unknown mesh extension (expected .off or .ply)".to_string())
                }
                Some(fmt) => match parse_raw_mesh(std::io::BufReader::new(f), fmt).and_then(|r| TriMesh::new(r.vertices, r.faces, stem(path))) {
                    Ok(m) => ("pass", format!("{} vertices, {} faces", m.num_vertices(), m.num_faces())),
                    Err(morphodist::Error::Io(e)) => {
                        io_error = true;
                        ("error", e.to_string())
                    }
                    Err(e) => {
                        failed = true;
                        ("fail", e.to_string())
                    }
                },
            },
        };
        println!("{}\t{}\t{}", path.display(), report.0, report.1);
        reports.push(json!({ "path": path.display().to_string(), "status": report.0, "detail": report.1 }));
    }
    prov.note("reports", json!(reports));
    Ok((if io_error { 2 } else { u8::from(failed) }, prov))
}

fn cmd_flatten(mesh: &Path, out: &Path) -> Result<Run, Failure> {
    let mut prov = Provenance::new("flatten");
    prov.input(mesh);
    let m = load_mesh(mesh)?;
    let flat = morphodist::flatten(&m)?;
    flat.write_csv(create(out)?)?;
    prov.output(out);
    prov.note("clamped_weights", json!(flat.clamped_weights()));
    Ok((0, prov))
}

fn cmd_dist(cfg: &RunConfig, a: &Path, b: &Path, metric: Metric, correspondence: Option<&Path>, strict: bool) -> Result<Run, Failure> {
    let mut prov = Provenance::new("dist");
    prov.input(a);
    prov.input(b);
    let sa = load_specimen(&stem(a), a, Vec::new())?;
    let sb = load_specimen(&stem(b), b, Vec::new())?;
    let outcome = pair_distance(&sa, &sb, metric, &cfg.params)?;
    println!("{}", outcome.value);
    prov.note("value", json!(outcome.value));
    let mut code = 0;
    if let Some(map) = &outcome.map {
        prov.note("residual", json!(map.residual));
        prov.note("converged", json!(map.converged));
        if !map.converged && metric == Metric::Cp {
            eprintln!("warning: area correction stopped at residual {} above its tolerance", map.residual);
            if strict {
                code = 1;
            }
        }
    }
    if let Some(path) = correspondence {
        let map = outcome
            .map
            .as_ref()
            .ok_or_else(|| Failure::Usage(format!("{metric} produces no correspondence map")))?;
        write_correspondence_csv(map, create(path)?)?;
        prov.output(path);
    }
    Ok((code, prov))
}

fn cmd_matrix(cfg: &RunConfig, manifest: &Path, metric: Metric, out: &Path, jobs: usize) -> Result<Run, Failure> {
    let mut prov = Provenance::new("matrix");
    prov.input(manifest);
    let m = read_manifest(manifest)?;
    for e in &m.entries {
        if let Some(p) = &e.mesh_path {
            prov.input(p);
        }
    }
    let collection = load_collection(&m)?;
    let run = pairwise_matrix(&collection, metric, &cfg.params, jobs)?;
    run.matrix.write_csv(create(out)?)?;
    let mut log_path = out.as_os_str().to_owned();
    log_path.push(".pairs.jsonl");
    let log_path = PathBuf::from(log_path);
    let mut log = create(&log_path)?;
    for r in &run.records {
        writeln!(log, "{}", serde_json::to_string(r)?)?;
    }
    log.flush()?;
    prov.output(out);
    prov.output(&log_path);
    let failures = run.matrix.failures();
    eprintln!(
        "{} specimens, raw asymmetry {:.4}, {} failed pairs",
        run.matrix.len(),
        run.matrix.raw_asymmetry(),
        failures.len()
    );
    for f in failures {
        eprintln!("failed: {} -> {}: {}", run.matrix.ids()[f.source], run.matrix.ids()[f.target], f.message);
    }
    prov.note("raw_asymmetry", json!(run.matrix.raw_asymmetry()));
    prov.note("failed_pairs", json!(failures.len()));
    Ok((u8::from(!failures.is_empty()), prov))
}

fn cmd_mantel(a: &Path, b: &Path, permutations: usize, seed: u64, out: Option<&Path>) -> Result<Run, Failure> {
    let mut prov = Provenance::new("mantel");
    prov.input(a);
    prov.input(b);
    let (da, db) = (read_matrix(a)?, read_matrix(b)?);
    let r = mantel(&da, &db, permutations, seed)?;
    println!("r = {}", r.r);
    println!("significance = {}", r.significance);
    prov.note("mantel", json!(r));
    if let Some(path) = out {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &r)?;
        writeln!(w)?;
        w.flush()?;
        prov.output(path);
    }
    Ok((0, prov))
}

fn cmd_classify(matrix: &Path, labels: &Path, level: &str, out: Option<&Path>) -> Result<Run, Failure> {
    let mut prov = Provenance::new("classify");
    prov.input(matrix);
    prov.input(labels);
    let d = read_matrix(matrix)?;
    let m = read_manifest(labels)?;
    let k = m
        .levels
        .iter()
        .position(|l| l == level)
        .ok_or_else(|| Failure::Usage(format!("unknown label level {level:?}; available: {}", m.levels.join(", "))))?;
    let by_id = d
        .ids()
        .iter()
        .map(|id| {
            m.entries
                .iter()
                .find(|e| &e.id == id)
                .map(|e| e.labels[k].clone())
                .ok_or_else(|| Failure::Usage(format!("no label for specimen {id:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let report = loo_classify(&d, &by_id, level)?;
    let text = report.to_json()?;
    match out {
        Some(path) => {
            std::fs::write(path, text + "\n").map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            prov.output(path);
            println!("success_rate = {}", report.success_rate);
        }
        None => println!("{text}"),
    }
    prov.note("success_rate", json!(report.success_rate));
    Ok((0, prov))
}

fn cmd_propagate(landmarks: &Path, maps: &[PathBuf], meshes: &[PathBuf], out: &Path) -> Result<Run, Failure> {
    let mut prov = Provenance::new("propagate");
    prov.input(landmarks);
    if meshes.len() != maps.len() + 1 {
        return Err(Failure::Usage(format!("{} maps need {} meshes, got {}", maps.len(), maps.len() + 1, meshes.len())));
    }
    let maps: Vec<CorrespondenceMap> = maps
        .iter()
        .map(|p| {
            prov.input(p);
            read_correspondence_csv(open(p)?).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
        })
        .collect::<Result<_, _>>()?;
    let meshes: Vec<TriMesh> = meshes
        .iter()
        .map(|p| {
            prov.input(p);
            load_mesh(p)
        })
        .collect::<Result<_, _>>()?;
    let lms = read_landmarks_csv(open(landmarks)?, &meshes[0]).map_err(|e| Failure::Usage(format!("{}: {e}", landmarks.display())))?;
    let refs: Vec<&TriMesh> = meshes.iter().collect();
    let result = propagate_along_path(&maps, &refs, &lms)?;
    write_landmarks_csv(&result.landmarks, create(out)?)?;
    prov.output(out);
    for (label, reason) in &result.failures {
        eprintln!("not propagated: {label}: {reason}");
    }
    prov.note("failed_landmarks", json!(result.failures.iter().map(|(l, _)| l).collect::<Vec<_>>()));
    Ok((u8::from(!result.failures.is_empty()), prov))
}

fn cmd_heatmap(upper: &Path, lower: &Path, out: &Path, order: Order) -> Result<Run, Failure> {
    let mut prov = Provenance::new("heatmap");
    prov.input(upper);
    prov.input(lower);
    let (du, dl) = (read_matrix(upper)?, read_matrix(lower)?);
    let order = match order {
        Order::Seriate => seriate(&du),
        Order::Input => (0..du.len()).collect(),
    };
    heatmap_export(&du, &dl, &order, create(out)?)?;
    prov.output(out);
    prov.note("order", json!(order.iter().map(|&i| &du.ids()[i]).collect::<Vec<_>>()));
    Ok((0, prov))
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn dispatch(cli: Cli, cfg: &mut RunConfig) -> Result<Run, Failure> {
    let Some(command) = cli.command else {
        return Err(Failure::Usage("no subcommand given; see --help".into()));
    };
    match command {
        Command::Validate { paths } => cmd_validate(&paths),
        Command::Flatten { mesh, out } => cmd_flatten(&mesh, &cfg.output(&out)),
        Command::Dist { mesh_a, mesh_b, metric, correspondence, strict } => {
            if metric.is_some() {
                cfg.metric = metric;
            }
            let metric = cfg.metric.ok_or_else(|| Failure::Usage("no metric given (--metric or metric = ...)".into()))?;
            let corr = correspondence.map(|p| cfg.output(&p));
            cmd_dist(cfg, &mesh_a, &mesh_b, metric, corr.as_deref(), strict)
        }
        Command::Matrix { manifest, metric, out, jobs } => {
            if metric.is_some() {
                cfg.metric = metric;
            }
            if manifest.is_some() {
                cfg.manifest = manifest;
            }
            if let Some(j) = jobs {
                if j == 0 {
                    return Err(Failure::Usage("--jobs must be positive".into()));
                }
                cfg.jobs = Some(j);
            }
            let jobs = *cfg.jobs.get_or_insert_with(default_jobs);
            let metric = cfg.metric.ok_or_else(|| Failure::Usage("no metric given (--metric or metric = ...)".into()))?;
            let manifest = cfg.manifest.clone().ok_or_else(|| Failure::Usage("no manifest given (--manifest or manifest = ...)".into()))?;
            cmd_matrix(cfg, &manifest, metric, &cfg.output(&out), jobs)
        }
        Command::Mantel { matrix_a, matrix_b, permutations, seed, out } => {
            if let Some(p) = permutations {
                cfg.set("mantel.permutations", &p.to_string())?;
            }
            if let Some(s) = seed {
                cfg.set("seed", &s.to_string())?;
            }
            cfg.validate()?;
            let out = out.map(|p| cfg.output(&p));
            cmd_mantel(&matrix_a, &matrix_b, cfg.params.mantel_permutations, cfg.params.seed, out.as_deref())
        }
        Command::Classify { matrix, labels, level, out } => {
            let out = out.map(|p| cfg.output(&p));
            cmd_classify(&matrix, &labels, &level, out.as_deref())
        }
        Command::Propagate { landmarks, maps, meshes, out } => cmd_propagate(&landmarks, &maps, &meshes, &cfg.output(&out)),
        Command::Heatmap { upper, lower, out, order } => cmd_heatmap(&upper, &lower, &cfg.output(&out), order),
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.load(path)?;
    }
    for pair in &cli.set {
        cfg.set_pair(pair)?;
    }
    cfg.validate()?;
    let explicit = cli.provenance.clone();
    let is_matrix = matches!(cli.command, Some(Command::Matrix { .. }));
    // matrix runs its own pool; everything else stays on one thread
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    let (code, prov) = if is_matrix { dispatch(cli, &mut cfg)? } else { pool.install(|| dispatch(cli, &mut cfg))? };
    prov.emit(&cfg, code, explicit.as_deref())?;
    Ok(code)
}

fn main() -> ExitCode {
    let matches = Cli::command()
        .after_long_help(format!("Configuration keys and defaults:\n{}", defaults_table()))
        .get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if cli.show_defaults {
        print!("{}", defaults_table());
        return ExitCode::SUCCESS;
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
