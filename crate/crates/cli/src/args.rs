//! Command-line flags. Every settings flag is optional so that unset flags
//! fall through to the config file and then the defaults.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::settings::{Family, SnapshotFormat};

#[derive(Debug, Parser)]
#[command(name = "pauliprop", version, about = "Sparse Pauli propagation with truncation", allow_negative_numbers = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a kicked-Ising or grid-Ising circuit.
    GenCircuit(GenArgs),
    /// Propagate an observable through a circuit at one threshold.
    Run(RunArgs),
    /// Predict peak term count and runtime from coarse probe runs.
    Estimate(EstimateArgs),
    /// Shrink the threshold until successive estimates agree.
    Converge(ConvergeArgs),
    /// Histograms, exponent fits, spike reports and s(theta) sweeps.
    Analyze(AnalyzeArgs),
    /// Re-execute a command from its manifest.
    Rerun(RerunArgs),
}

/// Flags shared by every command that writes files.
#[derive(Debug, Args)]
pub struct Common {
    /// Output directory [default: $PAULIPROP_DATA_DIR/<command>].
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// TOML file with one table per command; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[serde(skip)]
    #[command(flatten)]
    pub common: Common,

    #[arg(value_enum)]
    pub family: Family,
    /// Builtin name (ibm_heavy_hex_127, grid_RxC) or topology file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topology: Option<String>,
    /// Number of Trotter steps.
    #[arg(long = "T", alias = "steps")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_zz: Option<f64>,
    /// Angle of every X rotation, or `random`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_x: Option<String>,
    /// Lower end of the random X-angle range.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub low: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub high: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    /// Transverse field.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    /// Total evolution time.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Trotter step size.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// ZZ coupling J.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    /// Rotation angle per unit of dt times coupling or field.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle_scale: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct RunArgs {
    #[serde(skip)]
    #[command(flatten)]
    pub common: Common,

    /// Circuit JSON file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub circuit: Option<PathBuf>,
    /// Sparse label such as Z62, or a Pauli-sum JSON file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<String>,
    /// Truncation threshold (0 for exact propagation).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Snapshot points: `trotter`, `peak`, `every=N` or gate counts,
    /// comma-separated. A bare flag means `trotter`.
    #[arg(long, num_args = 0..=1, default_missing_value = "trotter")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<String>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_format: Option<SnapshotFormat>,
    /// Wall-clock budget in seconds.
    #[arg(long = "budget")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_s: Option<f64>,
    /// Worker threads [default: available cores].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Abort once the number of terms would exceed this.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row_cap: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[serde(skip)]
    #[command(flatten)]
    pub common: Common,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub circuit: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<String>,
    /// Coarsest probe threshold.
    #[arg(long = "delta0", alias = "delta-0")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_0: Option<f64>,
    /// Ratio between successive probe thresholds.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    /// Number of probe runs (at least 3).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<usize>,
    /// Target thresholds, comma-separated; each below every probe.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<f64>>,
    /// Probes used in the runtime fit.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_points: Option<usize>,
    /// Budget in seconds shared by all probes.
    #[arg(long = "budget")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_s: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Fitted exponent; adds the closed-form prediction as a diagnostic.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_star: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ConvergeArgs {
    #[serde(skip)]
    #[command(flatten)]
    pub common: Common,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub circuit: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<String>,
    /// First threshold.
    #[arg(long = "delta0", alias = "delta-0")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_0: Option<f64>,
    /// Threshold ratio between steps.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    /// Agreement tolerance for the trailing window.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_tol: Option<f64>,
    /// Window length.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell: Option<usize>,
    /// Per-step wall-clock budget in seconds.
    #[arg(long = "t-cpu")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_cpu_s: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    /// Cap on the summed runtime of all steps, in seconds.
    #[arg(long = "cumulative-cap")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cumulative_cap_s: Option<f64>,
    /// Steps used for runtime extrapolation.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_points: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row_cap: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    #[serde(skip)]
    #[command(flatten)]
    pub common: Common,

    /// Coefficient snapshot, CSV or binary.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<PathBuf>,
    /// Trace CSV from `run`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Histogram bins.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    /// Histogram signed coefficients rather than magnitudes.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub signed: bool,
    /// Maximum-likelihood exponent fits.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub mle: bool,
    /// Cutoffs for the likelihood fits, in units of delta.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xmin_mult: Option<Vec<f64>>,
    /// Binned log-log regression fits.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub regression: bool,
    /// Lower cutoffs for the regression fits, in units of delta.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regression_l: Option<Vec<f64>>,
    /// Report gates with a large merge fraction.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub spikes: bool,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spike_threshold: Option<f64>,
    /// Replay the term-count recurrence along the trace.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub replay: bool,
    /// Sweep s(theta) and r(theta) over (0, pi/2).
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub s_theta: bool,
    /// Power-law exponent for the model-based analyses.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    /// Points in the s(theta) sweep.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    /// Manifest written by an earlier command.
    pub manifest: PathBuf,
    /// Output directory [default: $PAULIPROP_DATA_DIR/<command>].
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}
