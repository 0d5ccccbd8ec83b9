use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::CliError;

/// Environment variable holding the worker count; unset means one per core.
pub const WORKERS_VAR: &str = "PSSA_WORKERS";

pub fn worker_pool() -> Result<ThreadPool, CliError> {
    let threads = match std::env::var(WORKERS_VAR) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("{WORKERS_VAR} must be a positive integer, got '{v}'")))?,
        Err(_) => 0,
    };
    ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))
}
