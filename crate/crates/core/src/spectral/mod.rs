//! Eigensolvers, spectral gaps, and Chebyshev functional calculus.

mod banded;
pub mod cheb;
mod chfsi;
pub mod dense;
pub mod eigen;
pub mod gaps;
pub mod projection;

pub use banded::band_eigenvalues;
pub use cheb::{apply_filter, apply_filter_block, check_filter_enclosure, smooth_step, ChebFilter, FilterTarget};
pub use eigen::{cluster, eigensolve, Cluster, EigenMode, SolverOptions, SpectrumReport};
pub use gaps::{detect_gaps, SpectralInterval};
pub use projection::{filter_matrix, projection_filter, spectral_projection, trace};

use serde::Serialize;

/// Gap list export: `[{lower, upper, margin}, ...]`.
pub fn gaps_json(gaps: &[SpectralInterval]) -> serde_json::Value {
    #[derive(Serialize)]
    struct Row {
        lower: f64,
        upper: f64,
        margin: f64,
    }
    serde_json::to_value(gaps.iter().map(|g| Row { lower: g.lower, upper: g.upper, margin: g.margin }).collect::<Vec<_>>())
        .expect("plain data")
}
