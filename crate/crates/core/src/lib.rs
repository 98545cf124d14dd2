//! Topological entropy of non-autonomous dynamical systems, estimated by
//! counting Bowen-separated and spanning sets on finite nets.

pub mod conjugacy;
pub mod entropy;
pub mod error;
pub mod space;
pub mod system;

pub use error::{Error, Result};

/// Runs `f` on a dedicated pool of `threads` workers (0 means the rayon
/// default). Results never depend on the worker count.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Input(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
