//! Pipeline orchestration and artifact writers.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use daereach::consistency::{check_initial_star, random_consistent_basis};
use daereach::lp::{DenseSimplex, LpOutcome, LpSolver};
use daereach::model::{check_regularity, to_autonomous, REGULARITY_TRIALS};
use daereach::reachability::{reach_with_decomposition, DEFAULT_ABS_TOL, DEFAULT_REL_TOL};
use daereach::safety::{verify_with, VerifyOptions};
use daereach::{
    AutonomousDae, DaeError, Decomposition, PropagationMode, RealMatrix, ReachResult, ReachSettings, StarSet,
    TolerancePolicy, VerificationOutcome,
};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::files::{load_directions, load_init, load_model, load_unsafe};

/// Prefix of the `--init` value that generates a consistent box star.
pub const GENERATE_PREFIX: &str = "generate:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Index,
    Decouple,
    CheckConsistency,
    Reach,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Propagation {
    Expm,
    Adaptive,
}

impl From<Propagation> for PropagationMode {
    fn from(p: Propagation) -> Self {
        match p {
            Propagation::Expm => PropagationMode::TransitionMatrix,
            Propagation::Adaptive => PropagationMode::Adaptive,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JobConfig {
    pub model: String,
    /// File path, `builtin:rotating-masses`, or `generate:<k>`.
    pub init: Option<String>,
    pub unsafe_set: Option<String>,
    pub time_step: f64,
    pub time_bound: f64,
    pub mode: Mode,
    pub out: PathBuf,
    pub propagation: Propagation,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub seed: u64,
    pub directions: Option<String>,
    pub consistency_tol: f64,
    pub reach_csv: bool,
    pub report_all: bool,
}

impl JobConfig {
    pub fn new(model: impl Into<String>, mode: Mode, out: impl Into<PathBuf>) -> Self {
        JobConfig {
            model: model.into(),
            init: None,
            unsafe_set: None,
            time_step: 0.01,
            time_bound: 10.0,
            mode,
            out: out.into(),
            propagation: Propagation::Expm,
            abs_tol: DEFAULT_ABS_TOL,
            rel_tol: DEFAULT_REL_TOL,
            seed: 0,
            directions: None,
            consistency_tol: TolerancePolicy::default().consistency_tol,
            reach_csv: false,
            report_all: false,
        }
    }

    fn tolerance(&self) -> CliResult<TolerancePolicy> {
        Ok(TolerancePolicy::default().with_consistency_tol(self.consistency_tol)?)
    }

    fn settings(&self) -> CliResult<ReachSettings> {
        Ok(ReachSettings::from_horizon(self.time_step, self.time_bound)?
            .with_mode(self.propagation.into())
            .with_integrator_tolerances(self.abs_tol, self.rel_tol)?)
    }
}

/// What a finished job reports back to the caller.
#[derive(Debug, Clone, Default)]
pub struct JobReport {
    /// Lines for standard output.
    pub messages: Vec<String>,
    pub index: Option<usize>,
    /// `"safe"` or `"unsafe"` in verify mode.
    pub status: Option<&'static str>,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Timings {
    decoupling: f64,
    reach: f64,
    safety: f64,
}

#[derive(Serialize)]
struct Verdict<'a> {
    mode: Mode,
    model: &'a str,
    index: usize,
    dim: usize,
    time_step: f64,
    time_bound: f64,
    num_steps: usize,
    propagation: Propagation,
    seed: u64,
    consistency_residual: f64,
    status: Option<&'static str>,
    first_unsafe_step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    unsafe_steps: Option<Vec<usize>>,
    alpha: Option<Vec<f64>>,
    /// Wall-clock seconds per phase; the only nondeterministic field.
    timings: Timings,
}

#[derive(Serialize)]
struct DecouplingReport {
    index: usize,
    dim: usize,
    q: Vec<Vec<Vec<f64>>>,
    n: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "L3", skip_serializing_if = "Option::is_none")]
    l3: Option<Vec<Vec<f64>>>,
    #[serde(rename = "L4", skip_serializing_if = "Option::is_none")]
    l4: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Z4", skip_serializing_if = "Option::is_none")]
    z4: Option<Vec<Vec<f64>>>,
    gamma: Vec<Vec<f64>>,
    admissibility_residual: f64,
    partition_residual: f64,
    seconds: f64,
}

#[derive(Serialize)]
struct ConsistencyReport {
    consistent: bool,
    max_residual: f64,
    tolerance: f64,
    worst_column: usize,
    worst_block: usize,
}

fn rows(m: &RealMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

/// Runs one job. Errors carry the exit class; artifacts already written stay on disk.
pub fn run_job(cfg: &JobConfig) -> CliResult<JobReport> {
    let tol = cfg.tolerance()?;
    let (sys, inputs) = load_model(&cfg.model)?;
    let auto = to_autonomous(&sys, &inputs)?;
    if !check_regularity(&auto, REGULARITY_TRIALS, cfg.seed, &tol) {
        return Err(DaeError::IrregularPencil.into());
    }
    let decomposition = Decomposition::compute(&auto, &tol)?;
    let mu = decomposition.mu();
    let mut report = JobReport { index: Some(mu), ..Default::default() };
    report.messages.push(format!("index: {mu}"));

    match cfg.mode {
        Mode::Index => return Ok(report),
        Mode::Decouple => {
            let dec = &decomposition.decoupled;
            let doc = DecouplingReport {
                index: mu,
                dim: dec.dim(),
                q: decomposition.chain.q.iter().map(rows).collect(),
                n: dec.n.iter().map(rows).collect(),
                l3: dec.l3.as_ref().map(rows),
                l4: dec.l4.as_ref().map(rows),
                z4: dec.z4.as_ref().map(rows),
                gamma: rows(&decomposition.gamma),
                admissibility_residual: decomposition.chain.admissibility_residual(),
                partition_residual: dec.partition_residual(),
                seconds: decomposition.elapsed.as_secs_f64(),
            };
            write_json(cfg, "decoupling.json", &doc, &mut report)?;
            return Ok(report);
        }
        _ => {}
    }

    let init = cfg.init.as_deref().ok_or_else(|| CliError::Usage(format!("--init is required in mode {:?}", cfg.mode)))?;
    let theta0 = initial_star(init, &auto, &decomposition, cfg.seed, &tol)?;
    if theta0.dim() != auto.dim() {
        return Err(CliError::parse(init, format!("initial set has {} rows, model needs {}", theta0.dim(), auto.dim())));
    }

    if cfg.mode == Mode::CheckConsistency {
        let cert = check_initial_star(&decomposition.gamma, &theta0, &tol)?;
        let doc = ConsistencyReport {
            consistent: cert.consistent,
            max_residual: cert.max_residual,
            tolerance: tol.consistency_tol,
            worst_column: cert.worst_column,
            worst_block: cert.worst_block,
        };
        write_json(cfg, "consistency.json", &doc, &mut report)?;
        if !cert.consistent {
            return Err(DaeError::InconsistentInitialSet(Box::new(cert)).into());
        }
        report.messages.push(format!("consistent: max residual {:e}", cert.max_residual));
        return Ok(report);
    }

    // Parse the unsafe set before the expensive part.
    let unsafe_spec = match cfg.mode {
        Mode::Verify => {
            let path = cfg.unsafe_set.as_deref().ok_or_else(|| CliError::Usage("--unsafe is required in mode verify".into()))?;
            Some(load_unsafe(path, &auto)?)
        }
        _ => None,
    };
    let directions = cfg.directions.as_deref().map(|p| load_directions(p, &auto)).transpose()?;

    let settings = cfg.settings()?;
    let decoupling_secs = decomposition.elapsed.as_secs_f64();
    let reach = reach_with_decomposition(decomposition, auto.n_orig(), &theta0, &settings, &tol)?;

    let outcome = match &unsafe_spec {
        Some(spec) => {
            let options = VerifyOptions { report_all_unsafe_steps: cfg.report_all };
            Some(verify_with(&reach, spec, &tol, options, &DenseSimplex::default())?)
        }
        None => None,
    };

    ensure_out_dir(&cfg.out)?;
    if let Some(out) = &outcome {
        if let Some(trace) = &out.unsafe_trace {
            let path = cfg.out.join("trace.csv");
            write_trace(&path, &reach, &auto, trace)?;
            report.files.push(path);
        }
        report.status = Some(out.status.as_str());
        report.messages.push(format!("status: {}", out.status.as_str()));
        if let Some(j) = out.first_unsafe_step {
            report.messages.push(format!("first unsafe step: {j} (t = {})", reach.times()[j]));
        }
    }
    if cfg.reach_csv {
        let path = cfg.out.join("reach.csv");
        write_reach(&path, &reach)?;
        report.files.push(path);
    }
    let dirs = directions.unwrap_or_else(|| auto.state_selector());
    let path = cfg.out.join("bounds.csv");
    write_bounds(&path, &reach, &dirs, &tol)?;
    report.files.push(path);

    let verdict = build_verdict(cfg, &reach, outcome.as_ref(), decoupling_secs);
    write_json(cfg, "verdict.json", &verdict, &mut report)?;
    Ok(report)
}

fn initial_star(
    spec: &str,
    auto: &AutonomousDae,
    decomposition: &Decomposition,
    seed: u64,
    tol: &TolerancePolicy,
) -> CliResult<StarSet> {
    match spec.strip_prefix(GENERATE_PREFIX) {
        Some(k) => {
            let k: usize = k.parse().map_err(|_| CliError::parse(spec, "generator count must be a positive integer"))?;
            let basis = random_consistent_basis(&decomposition.gamma, k, seed, tol)?;
            Ok(StarSet::from_box(basis, &vec![0.0; k], &vec![1.0; k])?)
        }
        None => load_init(spec, auto),
    }
}

fn build_verdict<'a>(cfg: &'a JobConfig, reach: &ReachResult, outcome: Option<&VerificationOutcome>, decoupling_secs: f64) -> Verdict<'a> {
    Verdict {
        mode: cfg.mode,
        model: &cfg.model,
        index: reach.decomposition.mu(),
        dim: reach.dim(),
        time_step: reach.settings.time_step,
        time_bound: cfg.time_bound,
        num_steps: reach.settings.num_steps,
        propagation: cfg.propagation,
        seed: cfg.seed,
        consistency_residual: reach.certificate.max_residual,
        status: outcome.map(|o| o.status.as_str()),
        first_unsafe_step: outcome.and_then(|o| o.first_unsafe_step),
        unsafe_steps: outcome.filter(|_| cfg.report_all).map(|o| o.unsafe_steps.clone()),
        alpha: outcome.and_then(|o| o.alpha_feasible.as_ref()).map(|a| a.iter().copied().collect()),
        timings: Timings {
            decoupling: decoupling_secs,
            reach: reach.elapsed.as_secs_f64(),
            safety: outcome.map_or(0.0, |o| o.elapsed.as_secs_f64()),
        },
    }
}

fn ensure_out_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_json<T: Serialize>(cfg: &JobConfig, name: &str, doc: &T, report: &mut JobReport) -> CliResult<()> {
    ensure_out_dir(&cfg.out)?;
    let path = cfg.out.join(name);
    let mut text = serde_json::to_string_pretty(doc).expect("report serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    report.files.push(path);
    Ok(())
}

/// Shortest representation that parses back to the same double.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

/// `time, x1..xn, u1..um`, one row per step.
fn write_trace(path: &Path, reach: &ReachResult, auto: &AutonomousDae, trace: &[daereach::RealVector]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["time".to_string()];
    header.extend((1..=auto.n_orig()).map(|i| format!("x{i}")));
    header.extend((1..=auto.m_orig()).map(|i| format!("u{i}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (t, x) in reach.times().iter().zip(trace) {
        let row: Vec<String> = std::iter::once(*t).chain(x.iter().copied()).map(num).collect();
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Long format: one row per step and basis row, one column per generator.
fn write_reach(path: &Path, reach: &ReachResult) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    let k = reach.stars.first().map_or(0, |s| s.generators());
    let mut header = vec!["step".to_string(), "time".to_string(), "row".to_string()];
    header.extend((1..=k).map(|i| format!("v{i}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (j, (t, s)) in reach.times().iter().zip(&reach.stars).enumerate() {
        for r in 0..s.dim() {
            let mut row = vec![j.to_string(), num(*t), r.to_string()];
            row.extend(s.basis().row(r).iter().map(|v| num(*v)));
            w.write_record(&row).map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Per step and direction row `g`: min and max of `g V_j alpha` over the predicate.
fn write_bounds(path: &Path, reach: &ReachResult, dirs: &RealMatrix, tol: &TolerancePolicy) -> CliResult<()> {
    if dirs.ncols() != reach.dim() {
        return Err(DaeError::InvalidArgument(format!("directions have {} columns, state has {}", dirs.ncols(), reach.dim())).into());
    }
    let solver = DenseSimplex::default();
    let mut w = csv_writer(path)?;
    let mut header = vec!["step".to_string(), "time".to_string()];
    for i in 1..=dirs.nrows() {
        header.push(format!("min{i}"));
        header.push(format!("max{i}"));
    }
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (j, (t, s)) in reach.times().iter().zip(&reach.stars).enumerate() {
        let gv = dirs * s.basis();
        let mut row = vec![j.to_string(), num(*t)];
        for i in 0..gv.nrows() {
            let c = gv.row(i).transpose();
            let lo = solver.minimize(&c, s.predicate_matrix(), s.predicate_bound(), tol);
            let hi = solver.maximize(&c, s.predicate_matrix(), s.predicate_bound(), tol);
            for (outcome, unbounded) in [(lo, f64::NEG_INFINITY), (hi, f64::INFINITY)] {
                let value = match outcome.map_err(|e| step_error(e, j))? {
                    LpOutcome::Optimal { value, .. } => value,
                    LpOutcome::Unbounded => unbounded,
                    LpOutcome::Infeasible => {
                        return Err(DaeError::NumericalFailure { step: Some(j), reason: "predicate became infeasible".into() }.into());
                    }
                };
                row.push(num(value));
            }
        }
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn step_error(e: DaeError, step: usize) -> DaeError {
    match e {
        DaeError::NumericalFailure { reason, .. } => DaeError::NumericalFailure { step: Some(step), reason },
        other => other,
    }
}
