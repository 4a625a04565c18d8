//! Resolved per-command settings.
//!
//! Each command runs from one settings struct. The struct is built by
//! layering, lowest first: built-in defaults, the command's table in the
//! TOML config file, then flags given on the command line. The result is
//! what the manifest records and what `rerun` replays.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

/// Environment variable naming the default data directory.
pub const DATA_DIR_ENV: &str = "PAULIPROP_DATA_DIR";
/// Data directory used when the variable is unset.
pub const DEFAULT_DATA_DIR: &str = "pauliprop-data";

/// Default data directory: `$PAULIPROP_DATA_DIR`, else `./pauliprop-data`.
pub fn data_dir() -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d),
        _ => PathBuf::from(DEFAULT_DATA_DIR),
    }
}

/// Finds an input file as given, then relative to the data directory.
/// The returned path is absolute.
pub fn resolve_input(path: &Path) -> Result<PathBuf> {
    let candidates = if path.is_absolute() { vec![path.to_path_buf()] } else { vec![path.to_path_buf(), data_dir().join(path)] };
    for c in candidates {
        if c.is_file() {
            return std::path::absolute(&c).map_err(|e| CliError::io(&c, e));
        }
    }
    Err(CliError::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found")))
}

/// Observable given as a sparse label or a path to a JSON Pauli-sum file.
/// Paths are made absolute so the manifest can be replayed elsewhere.
pub fn resolve_observable(spec: &str) -> Result<String> {
    let p = Path::new(spec);
    if spec.ends_with(".json") || p.is_file() {
        Ok(resolve_input(p)?.to_string_lossy().into_owned())
    } else {
        Ok(spec.to_string())
    }
}

/// Loads a TOML config file into a JSON object keyed by section.
pub fn load_config(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| CliError::Config { path: path.into(), message: e.to_string() })?;
    match serde_json::to_value(table)? {
        Value::Object(m) => Ok(m),
        _ => unreachable!("a TOML table maps to a JSON object"),
    }
}

/// Layers defaults, the config section and the flags, then deserializes.
pub fn resolve<T, F>(command: &str, config: Option<(&Path, &Map<String, Value>)>, flags: &F) -> Result<T>
where
    T: Serialize + DeserializeOwned + Default,
    F: Serialize,
{
    let mut merged = match serde_json::to_value(T::default())? {
        Value::Object(m) => m,
        _ => unreachable!("settings serialize to objects"),
    };
    if let Some((path, cfg)) = config {
        if let Some(section) = cfg.get(command) {
            let Value::Object(section) = section else {
                return Err(CliError::Config { path: path.into(), message: format!("[{command}] must be a table") });
            };
            for (k, v) in section {
                let key = k.replace('-', "_");
                if !merged.contains_key(&key) {
                    return Err(CliError::Config { path: path.into(), message: format!("unknown key {k:?} in [{command}]") });
                }
                merged.insert(key, v.clone());
            }
        }
    }
    if let Value::Object(f) = serde_json::to_value(flags)? {
        merged.extend(f);
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::usage(format!("{command}: {e}")))
}

/// Model family for `gen-circuit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    KickedIsing,
    GridIsing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenSettings {
    pub family: Family,
    /// Builtin topology name or topology file (kicked-ising).
    pub topology: String,
    /// Trotter steps (kicked-ising).
    pub steps: Option<usize>,
    pub theta_zz: f64,
    /// A fixed angle, or `random` for independent uniform draws.
    pub theta_x: Option<String>,
    pub low: f64,
    pub high: f64,
    pub seed: Option<u64>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub h: Option<f64>,
    pub t: Option<f64>,
    pub dt: Option<f64>,
    pub coupling: f64,
    pub angle_scale: f64,
}

impl Default for GenSettings {
    fn default() -> Self {
        GenSettings {
            family: Family::KickedIsing,
            topology: "ibm_heavy_hex_127".into(),
            steps: None,
            theta_zz: -FRAC_PI_2,
            theta_x: None,
            low: -FRAC_PI_4,
            high: FRAC_PI_4,
            seed: None,
            rows: None,
            cols: None,
            h: None,
            t: None,
            dt: None,
            coupling: -1.0,
            angle_scale: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotFormat {
    Csv,
    Binary,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSettings {
    pub circuit: Option<PathBuf>,
    pub observable: Option<String>,
    pub delta: Option<f64>,
    /// Comma-separated: `trotter`, `peak`, `every=N`, or gate counts.
    pub snapshots: Option<String>,
    pub snapshot_format: SnapshotFormat,
    pub budget_s: Option<f64>,
    pub workers: Option<usize>,
    pub row_cap: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            circuit: None,
            observable: None,
            delta: None,
            snapshots: None,
            snapshot_format: SnapshotFormat::Csv,
            budget_s: None,
            workers: None,
            row_cap: pauliprop::sum::DEFAULT_ROW_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateSettings {
    pub circuit: Option<PathBuf>,
    pub observable: Option<String>,
    pub delta_0: f64,
    pub ratio: f64,
    pub probes: usize,
    /// Target thresholds; defaults to `delta_0 / 4` and `delta_0 / 8`.
    pub targets: Option<Vec<f64>>,
    pub tail_points: usize,
    pub budget_s: Option<f64>,
    pub workers: Option<usize>,
    /// Fitted exponent for the diagnostic closed-form route.
    pub m_star: Option<f64>,
}

impl Default for EstimateSettings {
    fn default() -> Self {
        EstimateSettings {
            circuit: None,
            observable: None,
            delta_0: 0.005,
            ratio: FRAC_1_SQRT_2,
            probes: 3,
            targets: None,
            tail_points: 3,
            budget_s: None,
            workers: None,
            m_star: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeSettings {
    pub circuit: Option<PathBuf>,
    pub observable: Option<String>,
    pub delta_0: f64,
    pub ratio: f64,
    pub eps_tol: f64,
    pub ell: usize,
    pub t_cpu_s: f64,
    pub max_steps: usize,
    pub cumulative_cap_s: Option<f64>,
    pub tail_points: usize,
    pub workers: Option<usize>,
    pub row_cap: usize,
}

impl Default for ConvergeSettings {
    fn default() -> Self {
        let c = pauliprop::convergence::ConvergenceConfig::default();
        ConvergeSettings {
            circuit: None,
            observable: None,
            delta_0: c.delta_0,
            ratio: c.ratio,
            eps_tol: c.eps_tol,
            ell: c.ell,
            t_cpu_s: c.t_cpu_s,
            max_steps: c.max_steps,
            cumulative_cap_s: c.cumulative_cap_s,
            tail_points: c.tail_points,
            workers: None,
            row_cap: c.row_cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeSettings {
    /// Coefficient snapshot (CSV or binary).
    pub snapshot: Option<PathBuf>,
    /// Trace CSV written by `run`.
    pub trace: Option<PathBuf>,
    /// Truncation threshold; read from binary snapshots when absent.
    pub delta: Option<f64>,
    pub bins: usize,
    /// Histogram signed coefficients instead of magnitudes.
    pub signed: bool,
    pub mle: bool,
    pub xmin_mult: Vec<f64>,
    pub regression: bool,
    pub regression_l: Vec<f64>,
    pub spikes: bool,
    pub spike_threshold: f64,
    pub replay: bool,
    pub s_theta: bool,
    pub m: Option<f64>,
    pub s_points: usize,
}

impl Default for AnalyzeSettings {
    fn default() -> Self {
        AnalyzeSettings {
            snapshot: None,
            trace: None,
            delta: None,
            bins: 2048,
            signed: false,
            mle: false,
            xmin_mult: vec![1.0],
            regression: false,
            regression_l: vec![1.0],
            spikes: false,
            spike_threshold: pauliprop::analysis::DEFAULT_SPIKE_THRESHOLD,
            replay: false,
            s_theta: false,
            m: None,
            s_points: 181,
        }
    }
}

/// Fills in a missing worker count with the number of available cores.
pub fn workers_or_default(w: Option<usize>) -> usize {
    w.unwrap_or_else(pauliprop::parallel::default_workers).max(1)
}

pub fn required<T: Clone>(v: &Option<T>, flag: &str) -> Result<T> {
    v.clone().ok_or_else(|| CliError::usage(format!("missing required option --{flag}")))
}
