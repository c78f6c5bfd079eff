//! File formats, parallel sweeps and the command line on top of
//! `wander-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod suites;

pub use wander_core as core;

/// Run `f` on a pool with `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> error::Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| error::AppError::Compute(e.to_string()))?;
    Ok(pool.install(f))
}
