//! Desk-scale surrogate pipeline for surface aerodynamic fields: spectral
//! graph embeddings with gauge-invariant kernels, a kernel-attention neural
//! operator, surface load integration, and a manufactured-solution dataset
//! generator with exact ground truth.

pub mod cli;
pub mod datagen;
pub mod error;
pub mod graph;
pub mod loads;
pub mod model;
pub mod mesh;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};

/// Builds the global worker pool from the `GIST_THREADS` environment
/// variable. A second call (or an unset variable) leaves the default pool.
pub fn configure_threads_from_env() {
    if let Ok(v) = std::env::var("GIST_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
