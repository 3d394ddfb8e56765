//! Deterministic path-parallel helpers.
//!
//! Work item `i` always sees the same inputs and results are gathered in index
//! order, so outputs do not depend on the worker count.

use rayon::prelude::*;

use crate::error::Result;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "JUMPFOLIO_THREADS";

pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().with_min_len(64).map(f).collect()
}

/// Like [`map_indexed`], reporting the error of the lowest failing index.
pub fn try_map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_indexed(n, f).into_iter().collect()
}

pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse::<usize>().ok().filter(|n| *n > 0)
}

/// Runs `f` inside a pool with at most `threads` workers (global pool when `None`).
pub fn with_thread_limit<R, F>(threads: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool builds")
            .install(f),
    }
}
