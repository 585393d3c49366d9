//! In-memory tables, atomic-ish emission and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use interlace::seed::{derive_seed, GENERATOR};

use crate::error::CliError;
use crate::schema;

/// CSV table whose header comes from the schema registry.
pub struct Table {
    name: &'static str,
    writer: csv::Writer<Vec<u8>>,
    width: usize,
}

impl Table {
    pub fn new(name: &'static str) -> Result<Self, CliError> {
        let cols = schema::columns(name);
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(cols.iter().map(|c| c.0))?;
        Ok(Self {
            name,
            writer,
            width: cols.len(),
        })
    }

    /// Like [`Table::new`] but with extra coordinate columns `x0..x{d-1}` up front.
    pub fn with_coords(name: &'static str, d: usize) -> Result<Self, CliError> {
        let cols = schema::columns(name);
        let mut writer = csv::Writer::from_writer(Vec::new());
        let header: Vec<String> = (0..d)
            .map(|i| format!("x{i}"))
            .chain(cols.iter().map(|c| c.0.to_string()))
            .collect();
        writer.write_record(&header)?;
        Ok(Self {
            name,
            writer,
            width: cols.len() + d,
        })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        if fields.len() != self.width {
            return Err(CliError::Runtime(format!(
                "{}: row has {} fields, header has {}",
                self.name,
                fields.len(),
                self.width
            )));
        }
        self.writer.write_record(fields)?;
        Ok(())
    }

    fn finish(self) -> Result<(String, Vec<u8>), CliError> {
        let bytes = self.writer.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok((format!("{}.csv", self.name), bytes))
    }
}

/// Formats one CSV cell.
pub fn f(x: impl std::fmt::Display) -> String {
    x.to_string()
}

pub fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

/// Everything a command produced, written only once the command has succeeded.
pub struct RunOutput {
    pub tables: Vec<Table>,
    /// Extra summary merged into the manifest.
    pub summary: Value,
    /// Module tags whose per-replica seeds are recorded.
    pub seed_tags: Vec<String>,
    pub replicas: usize,
}

impl RunOutput {
    pub fn new(replicas: usize) -> Self {
        Self {
            tables: Vec::new(),
            summary: Value::Null,
            seed_tags: Vec::new(),
            replicas,
        }
    }
}

/// Reproducibility record of one invocation.
#[derive(Serialize)]
struct Manifest {
    command: String,
    version: &'static str,
    generator: &'static str,
    seed: Option<u64>,
    threads: usize,
    config: Value,
    config_sha256: String,
    replica_seeds: Value,
    replica_seeds_truncated: bool,
    outputs: Vec<Value>,
    summary: Value,
    elapsed_seconds: f64,
}

/// Records of at most this many replicas are listed in the manifest.
pub const MAX_LISTED_SEEDS: usize = 1000;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct Emitter<'a> {
    pub command: &'a str,
    pub out_dir: &'a Path,
    pub seed: Option<u64>,
    pub threads: usize,
    /// Resolved parameters; excludes threads and the output directory.
    pub config: Value,
    pub started: Instant,
}

impl Emitter<'_> {
    /// Writes every table and the manifest. On any failure the files already written are removed.
    pub fn emit(self, out: RunOutput) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(self.out_dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", self.out_dir.display())))?;
        let mut files = Vec::new();
        for t in out.tables {
            files.push(t.finish()?);
        }
        let outputs = files
            .iter()
            .map(|(name, bytes)| json!({"file": name, "bytes": bytes.len(), "sha256": sha256_hex(bytes)}))
            .collect();
        let n_listed = out.replicas.min(MAX_LISTED_SEEDS);
        let replica_seeds = match self.seed {
            Some(master) => {
                let mut m = serde_json::Map::new();
                for tag in &out.seed_tags {
                    let seeds: Vec<String> = (0..n_listed as u64).map(|r| hex::encode(derive_seed(master, r, tag))).collect();
                    m.insert(tag.clone(), json!(seeds));
                }
                Value::Object(m)
            }
            None => Value::Null,
        };
        let manifest = Manifest {
            command: self.command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            generator: GENERATOR,
            seed: self.seed,
            threads: self.threads,
            config_sha256: sha256_hex(self.config.to_string().as_bytes()),
            config: self.config,
            replica_seeds,
            replica_seeds_truncated: out.replicas > MAX_LISTED_SEEDS,
            outputs,
            summary: out.summary,
            elapsed_seconds: self.started.elapsed().as_secs_f64(),
        };
        let manifest_bytes = serde_json::to_vec_pretty(&manifest)?;
        files.push((format!("{}.manifest.json", self.command), manifest_bytes));

        let mut written = Vec::new();
        for (name, bytes) in &files {
            let path = self.out_dir.join(name);
            if let Err(e) = fs::write(&path, bytes) {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(CliError::Runtime(format!("cannot write {}: {e}", path.display())));
            }
            written.push(path);
        }
        Ok(written)
    }
}
