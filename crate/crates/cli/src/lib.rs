//! File formats and job orchestration behind the `daereach` binary.

pub mod error;
pub mod files;
pub mod job;

pub use error::{CliError, CliResult};
pub use files::{load_model, model_to_json, save_model};
pub use job::{run_job, JobConfig, JobReport, Mode, Propagation};
