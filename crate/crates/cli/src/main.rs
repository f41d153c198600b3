use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use daereach::reachability::{DEFAULT_ABS_TOL, DEFAULT_REL_TOL};
use daereach_cli::{run_job, CliError, JobConfig, Mode, Propagation};

/// Reachability and safety falsification for linear DAEs.
#[derive(Debug, Parser)]
#[command(name = "daereach", version)]
struct Args {
    /// Model file, or builtin:rotating-masses / builtin:stokes:<k>.
    #[arg(long)]
    model: String,
    /// Initial-set file, builtin:rotating-masses, or generate:<k> for a
    /// random consistent box star with k generators.
    #[arg(long)]
    init: Option<String>,
    /// Unsafe-set file, or builtin:rotating-masses:m2 / builtin:rotating-masses:x4.
    #[arg(long = "unsafe")]
    unsafe_set: Option<String>,
    #[arg(long, value_enum, default_value = "verify")]
    mode: Mode,
    #[arg(long, default_value_t = 0.01)]
    time_step: f64,
    #[arg(long, default_value_t = 10.0)]
    time_bound: f64,
    #[arg(long, value_enum, default_value = "expm")]
    propagation: Propagation,
    #[arg(long, default_value_t = DEFAULT_ABS_TOL)]
    abs_tol: f64,
    #[arg(long, default_value_t = DEFAULT_REL_TOL)]
    rel_tol: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seeds the regularity check and generated initial sets.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Direction rows for bounds.csv (defaults to the original state coordinates).
    #[arg(long)]
    directions: Option<String>,
    /// Max-norm bound on Gamma V(0) accepted as consistent.
    #[arg(long, default_value_t = 1e-8)]
    consistency_tol: f64,
    /// Also write the per-step star bases to reach.csv.
    #[arg(long)]
    reach_csv: bool,
    /// Keep checking after the first unsafe step.
    #[arg(long)]
    report_all: bool,
}

impl From<Args> for JobConfig {
    fn from(a: Args) -> Self {
        JobConfig {
            model: a.model,
            init: a.init,
            unsafe_set: a.unsafe_set,
            time_step: a.time_step,
            time_bound: a.time_bound,
            mode: a.mode,
            out: a.out,
            propagation: a.propagation,
            abs_tol: a.abs_tol,
            rel_tol: a.rel_tol,
            seed: a.seed,
            directions: a.directions,
            consistency_tol: a.consistency_tol,
            reach_csv: a.reach_csv,
            report_all: a.report_all,
        }
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Usage(e.to_string().trim_end().to_string())),
    };
    match run_job(&args.into()) {
        Ok(report) => {
            for line in &report.messages {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}
