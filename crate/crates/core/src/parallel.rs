//! Deterministic fan-out over replicate indices.

use rayon::prelude::*;

use crate::error::{Result, SimError};

/// Evaluates `f(0..n)` on a pool of `workers` threads and returns results in
/// index order, so downstream reductions see the same sequence regardless
/// of scheduling.
pub fn par_map_indexed<T, F>(workers: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    if workers <= 1 {
        return Ok((0..n).map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SimError::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
}
