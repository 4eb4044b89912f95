//! Atomic artifact writing and the per-run manifest.

use std::fs;
use std::io;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use primemagic::WNormalization;

/// Write via a temp file in the same directory, then rename into place.
pub fn write_atomic(path: &str, contents: &str) -> io::Result<()> {
    let path = Path::new(path);
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

pub fn write_json<T: Serialize>(path: &str, value: &T) -> io::Result<()> {
    let body = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    write_atomic(path, &(body + "\n"))
}

/// Reproducibility record written next to every artifact. Timestamps live
/// here and only here; CSV bodies stay byte-identical across reruns.
#[derive(Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub subcommand: &'static str,
    pub build: &'static str,
    pub unix_time: u64,
    pub threads: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q0_or_max: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub big_w: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_w: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_w: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shrink: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<f64>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(subcommand: &'static str, threads: usize) -> Self {
        Manifest {
            schema_version: 1,
            subcommand,
            build: option_env!("GIT_DESCRIBE").unwrap_or(env!("CARGO_PKG_VERSION")),
            unix_time: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            threads,
            q0_or_max: None,
            w: None,
            strategy: None,
            budget: None,
            big_w: None,
            a_w: None,
            b_w: None,
            x: None,
            weight: None,
            shrink: None,
            support: None,
            outputs: Vec::new(),
        }
    }

    pub fn set_search_params(&mut self, q0_or_max: u64, w: u64, strategy: String, budget: u64) {
        self.q0_or_max = Some(q0_or_max);
        self.w = Some(w);
        self.strategy = Some(strategy);
        self.budget = Some(budget);
    }

    pub fn set_norm(&mut self, norm: &WNormalization) {
        self.q0_or_max = Some(norm.q0);
        self.w = Some(norm.w);
        self.big_w = Some(norm.big_w);
        self.a_w = Some(norm.a_w);
        self.b_w = Some(norm.b_w);
    }

    pub fn set_lattice_params(&mut self, x: u64, weight: String, shrink: f64, support: f64) {
        self.x = Some(x);
        self.weight = Some(weight);
        self.shrink = Some(shrink);
        self.support = Some(support);
    }

    pub fn push_output(&mut self, path: String) {
        self.outputs.push(path);
    }

    pub fn write(&self, prefix: &str) -> io::Result<()> {
        write_json(&format!("{prefix}_manifest.json"), self)
    }
}
