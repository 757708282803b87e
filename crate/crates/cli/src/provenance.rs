//! Machine-readable run records written next to every output.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::failure::Failure;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub struct Provenance {
    command: &'static str,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    extra: Vec<(&'static str, Value)>,
}

impl Provenance {
    pub fn new(command: &'static str) -> Self {
        Self { command, inputs: Vec::new(), outputs: Vec::new(), extra: Vec::new() }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn note(&mut self, key: &'static str, value: Value) {
        self.extra.push((key, value));
    }

    pub fn to_json(&self, config: &RunConfig, exit_code: u8) -> Value {
        let files = |paths: &[PathBuf]| -> Vec<Value> {
            paths
                .iter()
                .map(|p| {
                    let digest = std::fs::read(p).ok().map(|b| sha256_hex(&b));
                    json!({ "path": p.display().to_string(), "sha256": digest })
                })
                .collect()
        };
        let params: serde_json::Map<String, Value> = morphodist::params::KEYS
            .iter()
            .map(|(k, _)| (k.to_string(), Value::String(config.params.get(k).expect("listed key"))))
            .collect();
        let mut v = json!({
            "tool": "morphodist",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "arguments": std::env::args().skip(1).collect::<Vec<_>>(),
            "config_hash": sha256_hex(config.canonical().as_bytes()),
            "config_overrides": config.applied.iter().map(|(k, v)| json!([k, v])).collect::<Vec<_>>(),
            "parameters": params,
            "seed": config.params.seed,
            "metric": config.metric.map(|m| m.to_string()),
            "jobs": config.jobs,
            "inputs": files(&self.inputs),
            "outputs": files(&self.outputs),
            "exit_code": exit_code,
        });
        for (k, x) in &self.extra {
            v[*k] = x.clone();
        }
        v
    }

    /// Writes `<first output>.provenance.json`, or to `explicit`, or to
    /// standard error when the run produced no file.
    pub fn emit(&self, config: &RunConfig, exit_code: u8, explicit: Option<&Path>) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(&self.to_json(config, exit_code))?;
        let target = explicit.map(Path::to_path_buf).or_else(|| {
            self.outputs.first().map(|p| {
                let mut s = p.as_os_str().to_owned();
                s.push(".provenance.json");
                PathBuf::from(s)
            })
        });
        match target {
            Some(p) => std::fs::write(&p, text + "\n").map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
            None => {
                eprintln!("provenance: {}", serde_json::to_string(&self.to_json(config, exit_code))?);
                Ok(())
            }
        }
    }
}
