//! Command-line driver: configuration, sweeps, fits and verification.

pub mod config;
pub mod fit;
pub mod sweep;
pub mod verify;

pub use config::{ConfigError, ExperimentConfig};
pub use sweep::{run_sweep, to_csv, write_atomic, ResultRow, SweepError};
pub use verify::{cmd_verify, VerifyReport};

/// Success.
pub const EXIT_OK: i32 = 0;
/// Bad configuration, arguments or I/O.
pub const EXIT_CONFIG: i32 = 1;
/// A verification invariant failed.
pub const EXIT_INVARIANT: i32 = 2;

/// Run `f` on a rayon pool of the given size, or the global pool if `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, rayon::ThreadPoolBuildError> {
    match workers {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(f)),
        None => Ok(f()),
    }
}
