//! Plain-text `key = value` run configuration.

use std::path::{Path, PathBuf};

use morphodist::analysis::Metric;
use morphodist::params::{Params, KEYS};

use crate::failure::Failure;

/// Keys handled by the front end rather than the library.
pub const RUN_KEYS: &[(&str, &str)] = &[
    ("metric", "distance for dist and matrix: cP, cWn, cW or ODLP"),
    ("manifest", "specimen manifest for matrix"),
    ("output_dir", "directory against which relative output paths resolve"),
    ("jobs", "worker threads for matrix"),
];

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub params: Params,
    pub metric: Option<Metric>,
    pub manifest: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    /// Every `key = value` applied, in order, for provenance.
    pub applied: Vec<(String, String)>,
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Failure> {
        let value = value.trim();
        match key {
            "metric" => self.metric = Some(value.parse().map_err(Failure::usage)?),
            "manifest" => self.manifest = Some(PathBuf::from(value)),
            "output_dir" => self.output_dir = Some(PathBuf::from(value)),
            "jobs" => {
                let n: usize = value.parse().map_err(|_| Failure::Usage(format!("invalid value {value:?} for jobs")))?;
                if n == 0 {
                    return Err(Failure::Usage("jobs must be positive".into()));
                }
                self.jobs = Some(n);
            }
            _ => self.params.assign(key, value).map_err(Failure::usage)?,
        }
        self.applied.push((key.to_string(), value.to_string()));
        Ok(())
    }

    /// Applies a config file; blank lines and `#` comments are skipped.
    pub fn load(&mut self, path: &Path) -> Result<(), Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("{}:{}: expected key = value", path.display(), n + 1)))?;
            self.set(k.trim(), v).map_err(|e| Failure::Usage(format!("{}:{}: {e}", path.display(), n + 1)))?;
        }
        Ok(())
    }

    /// `KEY=VALUE` from the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), Failure> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got {pair:?}")))?;
        self.set(k.trim(), v)
    }

    /// Range checks over the whole configuration.
    pub fn validate(&self) -> Result<(), Failure> {
        self.params.validate().map_err(Failure::usage)
    }

    pub fn output(&self, path: &Path) -> PathBuf {
        match &self.output_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    /// Canonical text of the effective configuration; hashed for provenance.
    pub fn canonical(&self) -> String {
        let mut s = self.params.table();
        let opt = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        s.push_str(&format!("metric = {}\n", self.metric.map_or(String::new(), |m| m.to_string())));
        s.push_str(&format!("manifest = {}\n", opt(&self.manifest)));
        s.push_str(&format!("output_dir = {}\n", opt(&self.output_dir)));
        s
    }
}

/// The defaults table printed by `--show-defaults`.
pub fn defaults_table() -> String {
    let mut s = Params::default().table();
    let width = KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, d) in RUN_KEYS {
        s.push_str(&format!("{k:<width$} = {:<8} # {d}\n", ""));
    }
    s
}
