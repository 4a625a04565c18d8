//! Command implementations. Each runs from resolved settings and records
//! its outputs; the caller writes the manifest.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::time::Duration;

use pauliprop::analysis::{
    detect_eta_spikes, fit_m_mle, fit_m_regression, histogram, replay_term_counts, write_s_theta_sweep, FitReport,
    PowerLawModel,
};
use pauliprop::circuit::{kicked_ising, tfim_trotter_grid, AngleSpec, TfimConvention};
use pauliprop::convergence::{classify, run_protocol, Classification, ConvergenceConfig, ConvergenceReport};
use pauliprop::engine::{evolve, EngineConfig, SnapshotPolicy};
use pauliprop::estimator::{run_probes, ProbeConfig, ResourcePrediction};
use pauliprop::{Circuit, Error as CoreError, PauliString, PauliSum, Topology, TraceLog};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::manifest::Outputs;
use crate::settings::*;

/// Facts gathered while a command runs, for the manifest.
#[derive(Debug, Default)]
pub struct RunInfo {
    pub seed: Option<u64>,
    pub workers: usize,
}

/// Makes every input path in the settings absolute.
pub trait Normalize {
    fn normalize(&mut self) -> Result<()>;
}

fn normalize_io(circuit: &mut Option<PathBuf>, observable: &mut Option<String>) -> Result<()> {
    if let Some(c) = circuit {
        *c = resolve_input(c)?;
    }
    if let Some(o) = observable {
        *o = resolve_observable(o)?;
    }
    Ok(())
}

impl Normalize for GenSettings {
    fn normalize(&mut self) -> Result<()> {
        if self.family == Family::KickedIsing && Topology::builtin(&self.topology).is_err() {
            self.topology = resolve_input(Path::new(&self.topology))?.to_string_lossy().into_owned();
        }
        Ok(())
    }
}

impl Normalize for RunSettings {
    fn normalize(&mut self) -> Result<()> {
        normalize_io(&mut self.circuit, &mut self.observable)?;
        self.workers = Some(workers_or_default(self.workers));
        Ok(())
    }
}

impl Normalize for EstimateSettings {
    fn normalize(&mut self) -> Result<()> {
        normalize_io(&mut self.circuit, &mut self.observable)?;
        self.workers = Some(workers_or_default(self.workers));
        if self.targets.is_none() {
            self.targets = Some(vec![self.delta_0 / 4.0, self.delta_0 / 8.0]);
        }
        Ok(())
    }
}

impl Normalize for ConvergeSettings {
    fn normalize(&mut self) -> Result<()> {
        normalize_io(&mut self.circuit, &mut self.observable)?;
        self.workers = Some(workers_or_default(self.workers));
        Ok(())
    }
}

impl Normalize for AnalyzeSettings {
    fn normalize(&mut self) -> Result<()> {
        for p in [&mut self.snapshot, &mut self.trace].into_iter().flatten() {
            *p = resolve_input(p)?;
        }
        Ok(())
    }
}

/// Pauli-sum file: `{"n": 127, "terms": [{"label": "Z62", "coefficient": 1.0}]}`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableFile {
    #[serde(default)]
    pub n: Option<usize>,
    pub terms: Vec<ObservableTerm>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableTerm {
    pub label: String,
    pub coefficient: f64,
}

pub fn load_observable(spec: &str, n: usize) -> Result<PauliSum> {
    let path = Path::new(spec);
    if !path.is_file() {
        return Ok(PauliSum::single(&PauliString::parse(spec, n)?)?);
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: ObservableFile =
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: bad observable file: {e}", path.display())))?;
    if let Some(m) = file.n {
        if m != n {
            return Err(CoreError::QubitMismatch { expected: n, found: m }.into());
        }
    }
    if file.terms.is_empty() {
        return Err(CliError::usage(format!("{}: observable has no terms", path.display())));
    }
    let terms = file
        .terms
        .iter()
        .map(|t| Ok((PauliString::parse(&t.label, n)?, t.coefficient)))
        .collect::<pauliprop::Result<Vec<_>>>()?;
    Ok(PauliSum::from_terms(n, terms)?)
}

fn load_circuit(path: &Option<PathBuf>) -> Result<Circuit> {
    let p = required(path, "circuit")?;
    let text = std::fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
    Ok(Circuit::from_json(&text)?)
}

pub fn gen_circuit(s: &GenSettings, out: &mut Outputs, info: &mut RunInfo) -> Result<()> {
    let (circuit, topo) = match s.family {
        Family::KickedIsing => {
            let steps = required(&s.steps, "T")?;
            let theta_x = required(&s.theta_x, "theta-x")?;
            let spec = if theta_x == "random" {
                let seed = required(&s.seed, "seed")?;
                info.seed = Some(seed);
                AngleSpec::UniformRandom { low: s.low, high: s.high, seed }
            } else {
                let t = theta_x
                    .parse::<f64>()
                    .map_err(|_| CliError::usage(format!("--theta-x expects a number or `random`, got {theta_x:?}")))?;
                AngleSpec::Fixed(t)
            };
            let topo = match Topology::builtin(&s.topology) {
                Ok(t) => t,
                Err(_) => Topology::load(&s.topology, None)?,
            };
            (kicked_ising(&topo, steps, s.theta_zz, spec)?, topo)
        }
        Family::GridIsing => {
            let rows = required(&s.rows, "rows")?;
            let cols = required(&s.cols, "cols")?;
            let conv = TfimConvention { coupling: s.coupling, angle_scale: s.angle_scale };
            let c = tfim_trotter_grid(rows, cols, required(&s.h, "h")?, required(&s.t, "t")?, required(&s.dt, "dt")?, conv)?;
            (c, Topology::grid(rows, cols)?)
        }
    };
    let path = out.write_str("circuit.json", &circuit.to_json()?)?;
    out.write_str("topology.txt", &topo.to_text())?;
    println!("wrote {} ({} qubits, {} gates)", path.display(), circuit.n(), circuit.len());
    Ok(())
}

/// Parses `trotter`, `peak`, `every=N` and bare gate counts.
pub fn snapshot_policy(spec: Option<&str>, circuit: &Circuit) -> Result<SnapshotPolicy> {
    let Some(spec) = spec else { return Ok(SnapshotPolicy::none()) };
    let mut policy = SnapshotPolicy { at: BTreeSet::new(), every: None, peak: false };
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item {
            "none" => {}
            "peak" => policy.peak = true,
            "trotter" => {
                let steps = circuit
                    .metadata
                    .params
                    .get("steps")
                    .and_then(|v| v.as_u64())
                    .filter(|&s| s > 0 && circuit.len().is_multiple_of(s as usize))
                    .ok_or_else(|| CliError::usage("`trotter` snapshots need a generated circuit with a step count"))?;
                policy.every = Some(circuit.len() / steps as usize);
                policy.peak = true;
            }
            _ => {
                let bad = || CliError::usage(format!("bad snapshot point {item:?}"));
                if let Some(n) = item.strip_prefix("every=") {
                    policy.every = Some(n.parse().ok().filter(|&n: &usize| n > 0).ok_or_else(bad)?);
                } else {
                    policy.at.insert(item.parse().map_err(|_| bad())?);
                }
            }
        }
    }
    Ok(policy)
}

/// Deterministic outcome of `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_qubits: usize,
    pub circuit_gates: usize,
    pub observable: String,
    pub delta: f64,
    /// `completed`, `budget-exhausted` or `row-cap-exceeded`.
    pub status: String,
    pub gates_applied: usize,
    pub n_max: usize,
    pub k_star: usize,
    pub final_rows: usize,
    pub final_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expectation: Option<f64>,
    #[serde(default)]
    pub snapshots: Vec<String>,
}

fn write_trace(out: &mut Outputs, log: &TraceLog) -> Result<()> {
    out.write("trace.csv", |w| Ok(log.write_csv(w)?))?;
    let timings = serde_json::json!({
        "total_s": log.total_elapsed().as_secs_f64(),
        "gates": log.gates.len(),
    });
    out.write_json("timings.json", &timings)?;
    Ok(())
}

pub fn run(s: &RunSettings, out: &mut Outputs, info: &mut RunInfo) -> Result<()> {
    let circuit = load_circuit(&s.circuit)?;
    info.seed = circuit.metadata.seed;
    let observable = required(&s.observable, "observable")?;
    let obs = load_observable(&observable, circuit.n())?;
    let delta = required(&s.delta, "delta")?;
    if !(delta >= 0.0) {
        return Err(CliError::usage("--delta must be non-negative"));
    }
    info.workers = workers_or_default(s.workers);
    let cfg = EngineConfig {
        delta,
        workers: info.workers,
        row_cap: s.row_cap,
        budget: s.budget_s.map(Duration::from_secs_f64),
        snapshots: snapshot_policy(s.snapshots.as_deref(), &circuit)?,
    };
    let summary = |log: &TraceLog, status: &str, expectation: Option<f64>, snapshots: Vec<String>| {
        let t = log.summary(expectation.unwrap_or(0.0));
        RunSummary {
            n_qubits: circuit.n(),
            circuit_gates: circuit.len(),
            observable: observable.clone(),
            delta,
            status: status.into(),
            gates_applied: t.gates,
            n_max: t.n_max,
            k_star: t.k_star,
            final_rows: t.final_rows,
            final_norm: t.final_norm,
            expectation,
            snapshots,
        }
    };
    match evolve(&circuit, obs, &cfg) {
        Ok((sum, log)) => {
            let e = sum.expectation();
            write_trace(out, &log)?;
            let mut names = Vec::new();
            for snap in &log.snapshots {
                let stem = format!("snapshots/gate_{:06}", snap.meta.gate);
                if matches!(s.snapshot_format, SnapshotFormat::Csv | SnapshotFormat::Both) {
                    let name = format!("{stem}.csv");
                    out.write(&name, |w| Ok(snap.sum.write_csv(w)?))?;
                    names.push(name);
                }
                if matches!(s.snapshot_format, SnapshotFormat::Binary | SnapshotFormat::Both) {
                    let name = format!("{stem}.bin");
                    out.write(&name, |w| Ok(snap.sum.write_binary(w, &snap.meta)?))?;
                    names.push(name);
                }
            }
            names.dedup();
            out.write_json("summary.json", &summary(&log, "completed", Some(e), names))?;
            println!("expectation {e:.15e}");
            println!("n_max {} at gate {}", log.n_max(), log.k_star());
            Ok(())
        }
        Err(err) => {
            let status = match &err {
                CoreError::BudgetExceeded { .. } => "budget-exhausted",
                CoreError::RowCapExceeded { .. } => "row-cap-exceeded",
                _ => return Err(err.into()),
            };
            let log = err.partial_trace().expect("aborts carry a partial trace").clone();
            write_trace(out, &log)?;
            out.write_json("summary.json", &summary(&log, status, None, Vec::new()))?;
            Err(err.into())
        }
    }
}

pub fn estimate(s: &EstimateSettings, out: &mut Outputs, info: &mut RunInfo) -> Result<()> {
    let targets = s.targets.clone().unwrap_or_default();
    let probe = ProbeConfig {
        delta_0: s.delta_0,
        ratio: s.ratio,
        count: s.probes,
        budget_s: s.budget_s,
        workers: workers_or_default(s.workers),
    };
    let finest = probe.deltas().last().copied().unwrap_or(s.delta_0);
    if targets.is_empty() || targets.iter().any(|&t| !(t > 0.0 && t < finest)) {
        return Err(CliError::usage(format!("targets must be positive and below the finest probe threshold {finest:e}")));
    }
    let circuit = load_circuit(&s.circuit)?;
    info.seed = circuit.metadata.seed;
    info.workers = probe.workers;
    let obs = load_observable(&required(&s.observable, "observable")?, circuit.n())?;
    let series = run_probes(&circuit, &obs, &probe)?;
    out.write("probes.csv", |w| Ok(series.write_csv(w)?))?;
    let mut pred = ResourcePrediction::new(series, &targets, s.tail_points)?;
    if let Some(m) = s.m_star {
        pred = pred.with_m_route(m)?;
    }
    out.write_json("prediction.json", &pred)?;
    for (i, t) in targets.iter().enumerate() {
        println!(
            "delta {t:e}: n_max ~ {:.0}{}, runtime ~ {:.3} s",
            pred.n_max.n_max[i],
            if pred.n_max.clamped[i] { " (clamped)" } else { "" },
            pred.runtime.seconds[i]
        );
    }
    if pred.n_max.low_confidence {
        println!("warning: a probe peaked in the last 5% of the circuit; predictions are low-confidence");
    }
    if pred.runtime.pre_asymptotic {
        println!("warning: runtime does not grow over the probe tail; series looks pre-asymptotic");
    }
    Ok(())
}

impl From<&ConvergeSettings> for ConvergenceConfig {
    fn from(s: &ConvergeSettings) -> Self {
        ConvergenceConfig {
            delta_0: s.delta_0,
            ratio: s.ratio,
            eps_tol: s.eps_tol,
            ell: s.ell,
            t_cpu_s: s.t_cpu_s,
            max_steps: s.max_steps,
            cumulative_cap_s: s.cumulative_cap_s,
            tail_points: s.tail_points,
            workers: workers_or_default(s.workers),
            row_cap: s.row_cap,
        }
    }
}

fn write_report(out: &mut Outputs, report: &ConvergenceReport) -> Result<()> {
    out.write_str("report.json", &report.to_json()?)?;
    out.write_str("timings.json", &report.timings_json()?)?;
    out.write("convergence.csv", |w| Ok(report.write_csv(w)?))?;
    Ok(())
}

pub fn converge(s: &ConvergeSettings, out: &mut Outputs, info: &mut RunInfo) -> Result<()> {
    let circuit = load_circuit(&s.circuit)?;
    info.seed = circuit.metadata.seed;
    let obs = load_observable(&required(&s.observable, "observable")?, circuit.n())?;
    let cfg = ConvergenceConfig::from(s);
    info.workers = cfg.workers;
    let report = match run_protocol(&circuit, &obs, &cfg) {
        Ok(r) => r,
        Err(CoreError::ProtocolAborted { cause, partial }) => {
            write_report(out, &partial)?;
            return Err(CoreError::ProtocolAborted { cause, partial }.into());
        }
        Err(e) => return Err(e.into()),
    };
    write_report(out, &report)?;
    println!("status {:?}", report.status);
    match classify(&report) {
        Classification::Converged { value, .. } => {
            println!("estimate {value:.15e} at delta {:e}", report.final_delta().unwrap_or(f64::NAN));
            if report.local_minimum_risk {
                println!("warning: the preceding estimate lies outside the window; possible local plateau");
            }
        }
        Classification::Unconverged { range, extrapolated_costs } => {
            println!("range [{:.6}, {:.6}]", range[0], range[1]);
            for (d, t) in extrapolated_costs {
                println!("next delta {d:e}: ~{t:.1} s");
            }
        }
    }
    Ok(())
}

const SNAPSHOT_MAGIC: &[u8] = b"PPSNAP01";

/// Coefficients and, for binary snapshots, the stored threshold.
fn read_snapshot(path: &Path) -> Result<(Vec<f64>, Option<f64>, Option<usize>)> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut r = BufReader::new(file);
    let head = r.fill_buf().map_err(|e| CliError::io(path, e))?;
    if head.starts_with(SNAPSHOT_MAGIC) {
        let (sum, meta) = PauliSum::read_binary(r)?;
        return Ok((sum.coeffs().to_vec(), Some(meta.delta), Some(meta.gate)));
    }
    let mut text = String::new();
    r.read_to_string(&mut text).map_err(|e| CliError::io(path, e))?;
    let mut coeffs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("pauli_label")) {
            continue;
        }
        let c = line
            .rsplit_once(',')
            .and_then(|(_, c)| c.trim().parse::<f64>().ok())
            .ok_or_else(|| CoreError::Parse(format!("{} line {}: expected label,coefficient", path.display(), i + 1)))?;
        coeffs.push(c);
    }
    Ok((coeffs, None, None))
}

pub fn analyze(s: &AnalyzeSettings, out: &mut Outputs, _info: &mut RunInfo) -> Result<()> {
    let wants_trace = s.spikes || s.replay;
    if s.snapshot.is_none() && !wants_trace && !s.s_theta {
        return Err(CliError::usage("nothing to analyze: give --snapshot, --trace with --spikes/--replay, or --s-theta"));
    }
    if wants_trace && s.trace.is_none() {
        return Err(CliError::usage("--spikes and --replay need --trace"));
    }
    let need_delta = |d: Option<f64>, what: &str| {
        d.filter(|&d| d > 0.0).ok_or_else(|| CliError::usage(format!("{what} needs a positive --delta")))
    };
    let mut delta = s.delta;
    let mut fits: Vec<FitReport> = Vec::new();
    if let Some(path) = &s.snapshot {
        let (coeffs, stored, gate) = read_snapshot(path)?;
        delta = delta.or(stored);
        let absolute = !s.signed;
        let mut h = histogram(&coeffs, s.bins, absolute, if absolute { delta.filter(|&d| d > 0.0) } else { None })?;
        h.gate = gate;
        h.delta = delta;
        out.write("histogram.csv", |w| Ok(h.write_csv(w)?))?;
        if s.mle {
            let d = need_delta(delta, "--mle")?;
            for &l in &s.xmin_mult {
                fits.push(fit_m_mle(&coeffs, l * d)?);
            }
        }
        if s.regression {
            let d = need_delta(delta, "--regression")?;
            for &l in &s.regression_l {
                fits.push(fit_m_regression(&coeffs, d, l)?);
            }
        }
        for f in &fits {
            println!(
                "{:?} x_min {:e}: m = {:.4} +/- {:.4} ({} samples{})",
                f.method,
                f.x_min,
                f.m,
                f.stderr,
                f.samples,
                if f.low_sample_warning { ", few samples" } else { "" }
            );
        }
        if !fits.is_empty() {
            out.write_json("fits.json", &fits)?;
        }
    } else if s.mle || s.regression {
        return Err(CliError::usage("--mle and --regression need --snapshot"));
    }
    let m = s.m.or_else(|| fits.first().map(|f| f.m));
    if let Some(path) = &s.trace {
        let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        let mut log = TraceLog::read_csv(BufReader::new(file))?;
        if s.spikes {
            let spikes = detect_eta_spikes(&log, s.spike_threshold);
            println!("{} gate(s) with eta >= {}", spikes.len(), s.spike_threshold);
            out.write_json("spikes.json", &spikes)?;
        }
        if s.replay {
            let d = need_delta(delta, "--replay")?;
            let m = m.ok_or_else(|| CliError::usage("--replay needs --m or an --mle fit"))?;
            log.delta = d;
            let replay = replay_term_counts(&log, &PowerLawModel::new(m, d)?)?;
            out.write("replay.csv", |w| {
                use std::io::Write;
                writeln!(w, "k,measured,predicted").map_err(|e| CliError::io("replay.csv", e))?;
                for (g, (a, b)) in log.gates.iter().zip(replay.measured.iter().zip(&replay.predicted)) {
                    writeln!(w, "{},{},{:e}", g.gate_index, a, b).map_err(|e| CliError::io("replay.csv", e))?;
                }
                Ok(())
            })?;
            println!("replay rms log error {:.4}", replay.rms_log_error);
        }
    }
    if s.s_theta {
        let d = need_delta(delta, "--s-theta")?;
        let m = m.ok_or_else(|| CliError::usage("--s-theta needs --m"))?;
        let model = PowerLawModel::new(m, d)?;
        out.write("s_theta.csv", |w| Ok(write_s_theta_sweep(&model, s.s_points, w)?))?;
    }
    Ok(())
}
