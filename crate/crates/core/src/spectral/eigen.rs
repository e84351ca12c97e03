use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use super::gaps::{gaps_of, SpectralInterval};
use super::{banded, chfsi, dense};
use crate::error::{Error, Result};
use crate::model::HermitianOperator;

type C = Complex64;

pub const DEFAULT_DENSE_CAP: usize = 6000;
pub const DEFAULT_DEGREE_CAP: usize = 4096;

#[derive(Clone, Debug, Serialize)]
pub struct SolverOptions {
    pub dense_cap: usize,
    pub degree_cap: usize,
    /// Residual certificate `‖Hv − λv‖ ≤ residual_factor·‖H‖`.
    pub residual_factor: f64,
    /// Consecutive eigenvalues closer than this share a cluster; default `1e−6·‖H‖`.
    pub cluster_tol: Option<f64>,
    /// Smallest gap listed in reports; default `1e−3` of the Gershgorin width.
    pub gap_min_width: Option<f64>,
    pub max_iterations: usize,
    pub seed: u64,
    /// Keep eigenvectors in the report.
    pub vectors: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        let dense_cap = std::env::var("GAPFILL_DENSE_CAP")
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_DENSE_CAP);
        SolverOptions {
            dense_cap,
            degree_cap: DEFAULT_DEGREE_CAP,
            residual_factor: 1e-9,
            cluster_tol: None,
            gap_min_width: None,
            max_iterations: 300,
            seed: 0x5eed,
            vectors: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum EigenMode {
    /// Every eigenpair by dense Hermitian diagonalization.
    Full,
    /// Eigenpairs in `[lower, upper]` by Chebyshev-filtered subspace iteration.
    Window { lower: f64, upper: f64, max_pairs: usize },
    /// Eigenpairs in `(lower, upper]` of a banded operator by LAPACK band
    /// bisection plus inverse iteration.
    Slice { lower: f64, upper: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cluster {
    pub start: usize,
    pub size: usize,
    pub lower: f64,
    pub upper: f64,
}

impl Cluster {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Sorted eigenvalues with residual certificates over the range `range`.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub clusters: Vec<Cluster>,
    pub gaps: Vec<SpectralInterval>,
    /// The report lists every eigenvalue in this range when `complete`.
    pub range: (f64, f64),
    pub complete: bool,
    pub residual_tol: f64,
    pub cluster_tol: f64,
    pub method: String,
    /// Estimated number of eigenvalues the completeness check could not account for.
    pub missing_mass: f64,
    #[serde(skip)]
    pub vectors: Option<Array2<C>>,
}

/// Single-linkage grouping of sorted values.
pub fn cluster(eigenvalues: &[f64], tol: f64) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = Vec::new();
    for (i, &e) in eigenvalues.iter().enumerate() {
        match out.last_mut() {
            Some(c) if e - c.upper <= tol => {
                c.size += 1;
                c.upper = e;
            }
            _ => out.push(Cluster { start: i, size: 1, lower: e, upper: e }),
        }
    }
    out
}

impl SpectrumReport {
    /// Report for a known list of eigenvalues (zero residuals, complete everywhere).
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, cluster_tol: f64) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        let n = eigenvalues.len();
        let (lo, hi) = match (eigenvalues.first(), eigenvalues.last()) {
            (Some(a), Some(b)) => (*a, *b),
            _ => (0.0, 0.0),
        };
        let min_width = 1e-3 * (hi - lo).max(1e-300);
        SpectrumReport {
            clusters: cluster(&eigenvalues, cluster_tol),
            gaps: gaps_of(&eigenvalues, min_width),
            eigenvalues,
            residuals: vec![0.0; n],
            range: (f64::NEG_INFINITY, f64::INFINITY),
            complete: true,
            residual_tol: 0.0,
            cluster_tol,
            method: "given".into(),
            missing_mass: 0.0,
            vectors: None,
        }
    }

    /// True if the report is complete on `[a, b]`.
    pub fn covers(&self, a: f64, b: f64) -> bool {
        self.complete && self.range.0 <= a && b <= self.range.1
    }

    pub fn count_in(&self, lower: f64, upper: f64) -> usize {
        self.eigenvalues.iter().filter(|&&e| lower < e && e < upper).count()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m: f64, &r| m.max(r))
    }

    /// Distance from `x` to the nearest reported eigenvalue.
    pub fn distance_to_spectrum(&self, x: f64) -> f64 {
        self.eigenvalues.iter().fold(f64::INFINITY, |m, &e| m.min((e - x).abs()))
    }

    /// CSV with columns `index,eigenvalue,residual,cluster_id`.
    pub fn to_csv(&self) -> String {
        let mut id = vec![0usize; self.eigenvalues.len()];
        for (c, cl) in self.clusters.iter().enumerate() {
            for slot in &mut id[cl.start..cl.start + cl.size] {
                *slot = c;
            }
        }
        let mut s = String::from("index,eigenvalue,residual,cluster_id\n");
        for (i, (e, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            s.push_str(&format!("{i},{e:.15e},{r:.3e},{}\n", id[i]));
        }
        s
    }
}

pub(crate) fn residuals(h: &HermitianOperator, values: &[f64], vectors: &Array2<C>) -> Vec<f64> {
    use rayon::prelude::*;
    (0..values.len())
        .into_par_iter()
        .map(|i| {
            let v: Vec<C> = vectors.column(i).to_vec();
            let hv = h.apply_vec(&v);
            hv.iter().zip(&v).map(|(a, b)| (a - b * values[i]).norm_sqr()).sum::<f64>().sqrt()
        })
        .collect()
}

/// Eigenvalues of `h` according to `mode`, with residual certificates.
pub fn eigensolve(h: &HermitianOperator, mode: EigenMode, opts: &SolverOptions) -> Result<SpectrumReport> {
    let norm = h.norm_bound().max(f64::MIN_POSITIVE);
    let tol = opts.residual_factor * norm;
    let (glo, ghi) = h.gershgorin();
    let (values, vectors, range, method, missing) = match mode {
        EigenMode::Full => {
            if h.dim() > opts.dense_cap {
                return Err(Error::DenseCapExceeded { dim: h.dim(), cap: opts.dense_cap });
            }
            let (w, v) = dense::eigh(&h.to_dense())?;
            (w, v, (f64::NEG_INFINITY, f64::INFINITY), "dense".to_string(), 0.0)
        }
        EigenMode::Window { lower, upper, max_pairs } => {
            if !(lower < upper) {
                return Err(Error::InvalidArgument(format!("empty window [{lower}, {upper}]")));
            }
            let out = chfsi::window_solve(h, lower, upper, max_pairs, opts)?;
            (out.values, out.vectors, (lower, upper), out.method, out.missing_mass)
        }
        EigenMode::Slice { lower, upper } => {
            if !(lower < upper) {
                return Err(Error::InvalidArgument(format!("empty slice ({lower}, {upper}]")));
            }
            let (w, v) = banded::slice_solve(h, lower, upper, opts)?;
            (w, v, (lower, upper), "band bisection".to_string(), 0.0)
        }
    };
    let res = residuals(h, &values, &vectors);
    if let Some((i, r)) = res.iter().enumerate().find(|(_, &r)| r > tol) {
        return Err(Error::WindowNotConverged {
            iterations: 0,
            reason: format!("eigenpair {i} residual {r:e} exceeds certificate {tol:e}"),
        });
    }
    let cluster_tol = opts.cluster_tol.unwrap_or(1e-6 * norm);
    let min_width = opts.gap_min_width.unwrap_or(1e-3 * (ghi - glo));
    Ok(SpectrumReport {
        clusters: cluster(&values, cluster_tol),
        gaps: gaps_of(&values, min_width),
        eigenvalues: values,
        residuals: res,
        range,
        complete: true,
        residual_tol: tol,
        cluster_tol,
        method,
        missing_mass: missing,
        vectors: if opts.vectors { Some(vectors) } else { None },
    })
}
