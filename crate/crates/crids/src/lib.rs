//! Resilience assessment and adaptation planning for distributed on-site
//! wastewater systems.
//!
//! The pipeline turns per-site measurements and geospatial layers into a
//! composite resilience index per site, then plans adaptation: fuzzy
//! membership transforms map raw values onto [0, 1] scores (`fuzzify`),
//! a series/parallel reliability block diagram combines them
//! (`aggregate`), feature layers supply distances, zone membership, and
//! sea-level-rise vertical separation (`geo`), and three exact solvers
//! assign adaptation options under thresholds, budgets, or along the
//! cost/benefit frontier (`plan`). `io`, `config`, and `pipeline` wire
//! those into the batch command line.
//!
//! With the default `parallel` feature, per-site work fans out across a
//! rayon thread pool; without it the same code paths run sequentially.
//! Outputs are byte-identical either way.

pub mod aggregate;
pub mod config;
pub mod error;
pub mod fuzzify;
pub mod geo;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod plan;

pub use error::{Error, Result};

/// Order-preserving map helpers that fan out across the rayon pool when
/// the `parallel` feature is enabled and degrade to plain iteration when
/// it is not. Callers see identical results in identical order.
pub(crate) mod par {
    #[cfg(feature = "parallel")]
    pub fn map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }

    #[cfg(not(feature = "parallel"))]
    pub fn map<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
        items.iter().map(f).collect()
    }

    #[cfg(feature = "parallel")]
    pub fn map_mut<T: Send, R: Send>(
        items: &mut [T],
        f: impl Fn(&mut T) -> R + Sync + Send,
    ) -> Vec<R> {
        use rayon::prelude::*;
        items.par_iter_mut().map(f).collect()
    }

    #[cfg(not(feature = "parallel"))]
    pub fn map_mut<T, R>(items: &mut [T], f: impl Fn(&mut T) -> R) -> Vec<R> {
        items.iter_mut().map(f).collect()
    }

    /// Run `f` inside a pool of `workers` threads (0 = the global pool's
    /// default size). Without the `parallel` feature, runs `f` inline.
    #[cfg(feature = "parallel")]
    pub fn with_workers<R: Send>(
        workers: usize,
        f: impl FnOnce() -> R + Send,
    ) -> crate::Result<R> {
        if workers == 0 {
            return Ok(f());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| crate::Error::Config(format!("cannot build worker pool: {e}")))?;
        Ok(pool.install(f))
    }

    #[cfg(not(feature = "parallel"))]
    pub fn with_workers<R>(workers: usize, f: impl FnOnce() -> R) -> crate::Result<R> {
        let _ = workers;
        Ok(f())
    }
}
