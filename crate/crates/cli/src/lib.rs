//! Experiment driver behind the `covshift` binary: shift injection, batch
//! evaluation with a resumable report, Friedman ranking, the toy
//! reproduction and one-off importance estimates.

pub mod config;
pub mod error;
pub mod inject;
pub mod layout;
pub mod rank;
pub mod report;
pub mod run;
pub mod single;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use inject::cmd_inject;
pub use rank::cmd_rank;
pub use run::cmd_run;
pub use single::{cmd_estimate, cmd_toy};

pub const WORKERS_ENV: &str = "COVSHIFT_WORKERS";

/// Runs `f` on a dedicated pool; `None` uses one thread per core.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Usage("worker count must be ≥ 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {workers:?} workers: {e}")))?;
    Ok(pool.install(f))
}
