//! JSON experiment configuration; command-line flags override file values.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

/// A scalar or a list in the config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Every key a config file may set. Unknown keys are rejected.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,

    pub d: Option<usize>,
    pub radius: Option<usize>,
    pub side: Option<usize>,
    pub shape: Option<String>,
    pub points: Option<String>,
    pub dense_cap: Option<usize>,

    pub u: Option<f64>,
    pub eps: Option<OneOrMany<f64>>,
    pub p: Option<f64>,
    pub mode: Option<String>,
    pub safety_radius: Option<usize>,
    pub replicas: Option<usize>,

    pub input: Option<PathBuf>,
    pub field: Option<String>,
    #[serde(rename = "L")]
    pub sizes: Option<OneOrMany<usize>>,
    pub slab: Option<usize>,
    pub diameter: Option<usize>,

    #[serde(rename = "L0")]
    pub base: Option<usize>,
    pub l0: Option<usize>,
    pub n: Option<usize>,
    pub separation: Option<u64>,
    pub allow_override: Option<bool>,
    pub m: Option<f64>,

    pub what: Option<String>,
    pub u_min: Option<f64>,
    pub u_max: Option<f64>,
    pub grid_points: Option<usize>,
    pub tol: Option<f64>,
    pub max_window: Option<usize>,

    pub law: Option<String>,
    #[serde(rename = "N_min")]
    pub n_min: Option<usize>,
    #[serde(rename = "N_max")]
    pub n_max: Option<usize>,
    pub dilution: Option<f64>,
    pub radii: Option<Vec<usize>>,
    pub lattice_reference: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }
}

/// Flag value, else file value, else default.
pub fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>, default: T) -> T {
    flag.clone().or_else(|| file.clone()).unwrap_or(default)
}

/// Flag value, else file value.
pub fn pick_opt<T: Clone>(flag: &Option<T>, file: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| file.clone())
}
