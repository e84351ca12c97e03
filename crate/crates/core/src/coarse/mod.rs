//! Finite-propagation estimates for functions of banded operators and their
//! compressions to a region `Z`.
//!
//! `q(A) = χ_Z·A·χ_Z`. Far sites at radius `R` are members of `Z` whose
//! boundary distance is at least `R`; every norm here is taken on the far block.

mod wide;

pub use wide::{wideness_check, Counterexample, WidenessCertificate, WidenessOptions, WidenessVerdict};

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CsrMatrix, HermitianOperator, RegionMask};
use crate::spectral::cheb::{check_filter_enclosure, chebyshev_apply, ChebFilter, FilterTarget};
use crate::spectral::dense;

type C = Complex64;

/// Krylov steps for every norm estimate.
const LANCZOS_STEPS: usize = 20;
/// Far blocks up to this many sites are also formed explicitly for a Frobenius upper bound.
const EXPLICIT_BLOCK_CAP: usize = 1024;

#[derive(Clone, Debug, Serialize)]
pub struct PropagationProfile {
    /// Bin `n` collects sites `n` hops from the probe; `distances[n] = n·h`.
    pub distances: Vec<f64>,
    /// Largest `‖χ_shell φ(H) e_p‖` over the probes.
    pub norms: Vec<f64>,
    /// `Σ_{j ≥ ⌈n/hop_range⌉} |c_j|`, an upper bound for each bin.
    pub tail_bound: Vec<f64>,
    pub exact_zero_beyond: Option<f64>,
    /// Every entry beyond `exact_zero_beyond` was bitwise zero on every probe.
    pub verified: bool,
    pub probes: usize,
    pub filter: FilterTarget,
    pub degree: usize,
}

fn suffix_sums(c: &[f64]) -> Vec<f64> {
    let mut t = vec![0.0; c.len() + 1];
    for j in (0..c.len()).rev() {
        t[j] = t[j + 1] + c[j].abs();
    }
    t
}

/// Spread of `φ(H)` applied to single-site probes, binned by hop distance.
pub fn propagation_profile(h: &HermitianOperator, filter: &ChebFilter, probes: &[usize]) -> Result<PropagationProfile> {
    check_filter_enclosure(h, filter)?;
    if probes.iter().any(|&p| p >= h.dim()) {
        return Err(Error::InvalidArgument("probe row outside the operator".into()));
    }
    let reach = filter.degree * h.hop_range();
    let columns: Vec<Vec<(usize, f64, bool)>> = probes
        .par_iter()
        .map(|&p| {
            let mut e = vec![C::new(0.0, 0.0); h.dim()];
            e[p] = C::new(1.0, 0.0);
            let w = chebyshev_apply(h, &filter.coefficients, filter.enclosure, &e);
            (0..h.dim()).map(|r| (h.graph_distance(p, r), w[r].norm_sqr(), w[r] == C::new(0.0, 0.0))).collect()
        })
        .collect();
    let top = columns.iter().flatten().map(|c| c.0).max().unwrap_or(0);
    let mut norms = vec![0.0_f64; top + 1];
    let mut verified = true;
    for col in &columns {
        let mut shell = vec![0.0; top + 1];
        for &(d, m, zero) in col {
            shell[d] += m;
            if d > reach && !zero {
                verified = false;
            }
        }
        for (n, s) in shell.iter().enumerate() {
            norms[n] = norms[n].max(s.sqrt());
        }
    }
    let tail = suffix_sums(&filter.coefficients);
    let hop = h.hop_range().max(1);
    let tail_bound = (0..=top).map(|n| tail[n.div_ceil(hop).min(filter.coefficients.len())]).collect();
    Ok(PropagationProfile {
        distances: (0..=top).map(|n| n as f64 * h.h()).collect(),
        norms,
        tail_bound,
        exact_zero_beyond: Some(reach as f64 * h.h()),
        verified,
        probes: probes.len(),
        filter: filter.target.clone(),
        degree: filter.degree,
    })
}

/// Lanczos estimate of the largest `|eigenvalue|` of a Hermitian map; a lower
/// bound for its norm. Exactly zero when the map kills the start vector.
fn lanczos_norm(n: usize, start: Vec<C>, apply: impl Fn(&[C]) -> Vec<C>) -> f64 {
    let norm = |v: &[C]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let b0 = norm(&start);
    if b0 == 0.0 {
        return 0.0;
    }
    let mut basis: Vec<Vec<C>> = vec![start.iter().map(|z| z / b0).collect()];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for k in 0..LANCZOS_STEPS.min(n) {
        let mut w = apply(&basis[k]);
        let a: f64 = basis[k].iter().zip(&w).map(|(x, y)| (x.conj() * y).re).sum();
        alpha.push(a);
        // full reorthogonalization keeps the small Krylov basis honest
        for _ in 0..2 {
            for b in &basis {
                let c: C = b.iter().zip(&w).map(|(x, y)| x.conj() * y).sum();
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= bi * c;
                }
            }
        }
        let bn = norm(&w);
        if bn <= 1e-300 || k + 1 == LANCZOS_STEPS.min(n) {
            break;
        }
        beta.push(bn);
        basis.push(w.iter().map(|z| z / bn).collect());
    }
    let m = alpha.len();
    let mut t = Array2::<C>::zeros((m, m));
    for i in 0..m {
        t[(i, i)] = C::new(alpha[i], 0.0);
        if i + 1 < m {
            t[(i, i + 1)] = C::new(beta[i], 0.0);
            t[(i + 1, i)] = C::new(beta[i], 0.0);
        }
    }
    let theta = dense::eigvalsh(&t).unwrap_or_default();
    theta.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn far_rows(h_edge: &HermitianOperator, mask: &RegionMask, radius: f64) -> Vec<usize> {
    (0..h_edge.dim()).filter(|&r| mask.boundary_distance(h_edge.rows()[r]) >= radius - 1e-12).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct AffiliationReport {
    pub filter: FilterTarget,
    pub degree: usize,
    pub radii: Vec<f64>,
    /// Nonincreasing in `R`: the running maximum of the estimates from the largest radius down.
    pub deviations: Vec<f64>,
    /// Raw Lanczos estimate at each radius (a lower bound on the norm).
    pub estimates: Vec<f64>,
    /// `2·Σ_{j ≥ 2m} |c_j|` with `m` the least hop count to the complement from the far block.
    pub tail_bounds: Vec<f64>,
    /// Smaller of the tail bound and the Frobenius norm of the explicit far block, when formed.
    pub upper_bounds: Vec<f64>,
    pub far_sites: Vec<usize>,
    pub exact_zero_radius: Option<f64>,
    /// Each deviation at a radius past `exact_zero_radius` is exactly 0.
    pub exact_zero_verified: bool,
    pub filter_error_bound: f64,
}

fn check_compression(h_bulk: &HermitianOperator, h_edge: &HermitianOperator, mask: &RegionMask) -> Result<()> {
    if h_bulk.window() != mask.window() || h_edge.window() != mask.window() {
        return Err(Error::MaskMismatch("bulk, edge and mask windows differ".into()));
    }
    if h_bulk.dim() != mask.window().len() {
        return Err(Error::MaskMismatch("the bulk operator must cover every window site".into()));
    }
    if h_edge.rows() != mask.member_indices().as_slice() {
        return Err(Error::MaskMismatch("edge rows are not the mask members".into()));
    }
    let compressed = h_bulk.matrix().submatrix(h_edge.rows());
    if &compressed != h_edge.matrix() {
        return Err(Error::MaskMismatch("edge operator is not the restriction of the bulk operator".into()));
    }
    Ok(())
}

/// `‖χ_far(R)·(q(φ(H_bulk)) − φ(H_edge))·χ_far(R)‖` for each radius.
pub fn affiliation_check(
    h_bulk: &HermitianOperator,
    h_edge: &HermitianOperator,
    mask: &RegionMask,
    filter: &ChebFilter,
    radii: &[f64],
    seed: u64,
) -> Result<AffiliationReport> {
    check_compression(h_bulk, h_edge, mask)?;
    check_filter_enclosure(h_bulk, filter)?;
    check_filter_enclosure(h_edge, filter)?;
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("radii must be increasing".into()));
    }
    let n_edge = h_edge.dim();
    let to_bulk: Vec<usize> = h_edge.rows().to_vec();
    let tail = suffix_sums(&filter.coefficients);
    let rows: Vec<(f64, f64, usize, f64)> = radii
        .par_iter()
        .enumerate()
        .map(|(i, &radius)| {
            let far = far_rows(h_edge, mask, radius);
            if far.is_empty() {
                return (0.0, 0.0, 0, 0.0);
            }
            let min_hops = far.iter().map(|&r| mask.hops(to_bulk[r])).min().unwrap_or(0);
            let j0 = min_hops.saturating_mul(2).min(filter.coefficients.len());
            let bound = 2.0 * tail[j0];
            let mut in_far = vec![false; n_edge];
            for &r in &far {
                in_far[r] = true;
            }
            let apply = |v: &[C]| -> Vec<C> {
                let mut vb = vec![C::new(0.0, 0.0); h_bulk.dim()];
                for r in 0..n_edge {
                    if in_far[r] {
                        vb[to_bulk[r]] = v[r];
                    }
                }
                let ve: Vec<C> = (0..n_edge).map(|r| if in_far[r] { v[r] } else { C::new(0.0, 0.0) }).collect();
                let wb = chebyshev_apply(h_bulk, &filter.coefficients, filter.enclosure, &vb);
                let we = chebyshev_apply(h_edge, &filter.coefficients, filter.enclosure, &ve);
                (0..n_edge).map(|r| if in_far[r] { wb[to_bulk[r]] - we[r] } else { C::new(0.0, 0.0) }).collect()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9));
            let start: Vec<C> = (0..n_edge)
                .map(|r| if in_far[r] { C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) } else { C::new(0.0, 0.0) })
                .collect();
            let mut upper = bound;
            if far.len() <= EXPLICIT_BLOCK_CAP && bound > 0.0 {
                let frob: f64 = far
                    .par_iter()
                    .map(|&r| {
                        let mut e = vec![C::new(0.0, 0.0); n_edge];
                        e[r] = C::new(1.0, 0.0);
                        apply(&e).iter().map(|z| z.norm_sqr()).sum::<f64>()
                    })
                    .sum();
                upper = upper.min(frob.sqrt());
            }
            (lanczos_norm(n_edge, start, apply), bound, far.len(), upper)
        })
        .collect();
    let estimates: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mut deviations = estimates.clone();
    for i in (0..deviations.len().saturating_sub(1)).rev() {
        deviations[i] = deviations[i].max(deviations[i + 1]);
    }
    let exact_zero_radius = filter.is_exact_polynomial().then(|| filter.degree as f64 * h_bulk.h());
    let exact_zero_verified = match exact_zero_radius {
        Some(r0) => radii.iter().zip(&deviations).filter(|(r, _)| **r > r0).all(|(_, d)| *d == 0.0),
        None => true,
    };
    Ok(AffiliationReport {
        filter: filter.target.clone(),
        degree: filter.degree,
        radii: radii.to_vec(),
        deviations,
        estimates,
        tail_bounds: rows.iter().map(|r| r.1).collect(),
        upper_bounds: rows.iter().map(|r| r.3).collect(),
        far_sites: rows.iter().map(|r| r.2).collect(),
        exact_zero_radius,
        exact_zero_verified,
        filter_error_bound: filter.error_bound,
    })
}

/// Sparse `p(H)` assembled column by column, keeping only entries that are not
/// exactly zero; its hop range is `degree·hop_range(H)`.
pub fn filter_operator(h: &HermitianOperator, filter: &ChebFilter) -> Result<HermitianOperator> {
    check_filter_enclosure(h, filter)?;
    let n = h.dim();
    let cols: Vec<Vec<(usize, C)>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![C::new(0.0, 0.0); n];
            e[j] = C::new(1.0, 0.0);
            let w = chebyshev_apply(h, &filter.coefficients, filter.enclosure, &e);
            w.into_iter().enumerate().filter(|(_, z)| *z != C::new(0.0, 0.0)).collect()
        })
        .collect();
    let mut rows: Vec<Vec<(usize, C)>> = vec![Vec::new(); n];
    for (j, col) in cols.into_iter().enumerate() {
        for (i, z) in col {
            rows[i].push((j, z));
        }
    }
    Ok(h.with_matrix(CsrMatrix::from_rows(rows), filter.degree * h.hop_range()))
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiplicativityProfile {
    pub radii: Vec<f64>,
    pub defects: Vec<f64>,
    /// Largest `|entry|` of the far block; 0 means the block is bitwise zero.
    pub max_entry: Vec<f64>,
    pub hop_ranges: (usize, usize),
    /// `(d₁ + d₂)·h`.
    pub support_radius: f64,
    /// Every far block past `support_radius` has only exact zeros.
    pub exact_zero_verified: bool,
}

/// Defect `q(A)·q(A′) − q(A·A′)` of the compression map on the far blocks.
pub fn ideal_multiplicativity(a: &HermitianOperator, b: &HermitianOperator, mask: &RegionMask, radii: &[f64]) -> Result<MultiplicativityProfile> {
    if a.window() != mask.window() || b.window() != mask.window() || a.dim() != mask.window().len() || b.dim() != a.dim() {
        return Err(Error::MaskMismatch("A, A′ must act on every site of the mask window".into()));
    }
    let keep = mask.member_indices();
    let qa = a.matrix().submatrix(&keep);
    let qb = b.matrix().submatrix(&keep);
    let left = qa.matmul(&qb);
    let right = a.matrix().matmul(b.matrix()).submatrix(&keep);
    let n = keep.len();
    let mut defect_rows: Vec<Vec<(usize, C)>> = vec![Vec::new(); n];
    for r in 0..n {
        let mut acc: std::collections::BTreeMap<usize, C> = left.row(r).collect();
        for (c, v) in right.row(r) {
            *acc.entry(c).or_insert(C::new(0.0, 0.0)) -= v;
        }
        defect_rows[r] = acc.into_iter().collect();
    }
    let e = CsrMatrix::from_rows(defect_rows);
    let support_radius = (a.hop_range() + b.hop_range()) as f64 * a.h();
    let results: Vec<(f64, f64)> = radii
        .par_iter()
        .enumerate()
        .map(|(i, &radius)| {
            let in_far: Vec<bool> = keep.iter().map(|&v| mask.boundary_distance(v) >= radius - 1e-12).collect();
            let mut max_entry = 0.0_f64;
            for r in (0..n).filter(|&r| in_far[r]) {
                for (c, v) in e.row(r) {
                    if in_far[c] {
                        max_entry = max_entry.max(v.norm());
                    }
                }
            }
            if max_entry == 0.0 {
                return (0.0, 0.0);
            }
            // ‖χEχ‖² as the top eigenvalue of (χEχ)*(χEχ)
            let apply_e = |v: &[C], adjoint: bool| -> Vec<C> {
                let mut out = vec![C::new(0.0, 0.0); n];
                for r in (0..n).filter(|&r| in_far[r]) {
                    for (c, z) in e.row(r) {
                        if in_far[c] {
                            if adjoint {
                                out[c] += z.conj() * v[r];
                            } else {
                                out[r] += z * v[c];
                            }
                        }
                    }
                }
                out
            };
            let mut rng = ChaCha8Rng::seed_from_u64(0x1dea1 ^ i as u64);
            let start: Vec<C> =
                (0..n).map(|r| if in_far[r] { C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) } else { C::new(0.0, 0.0) }).collect();
            let top = lanczos_norm(n, start, |v| apply_e(&apply_e(v, false), true));
            (top.sqrt(), max_entry)
        })
        .collect();
    let exact_zero_verified = radii.iter().zip(&results).filter(|(r, _)| **r > support_radius).all(|(_, x)| x.1 == 0.0);
    Ok(MultiplicativityProfile {
        radii: radii.to_vec(),
        defects: results.iter().map(|x| x.0).collect(),
        max_entry: results.iter().map(|x| x.1).collect(),
        hop_ranges: (a.hop_range(), b.hop_range()),
        support_radius,
        exact_zero_verified,
    })
}

/// `(radius, value)` pairs with metadata, for any of the profiles above.
pub fn profile_json<T: Serialize>(radii: &[f64], values: &[f64], meta: &T) -> serde_json::Value {
    let pairs: Vec<(f64, f64)> = radii.iter().copied().zip(values.iter().copied()).collect();
    serde_json::json!({ "profile": pairs, "meta": meta })
}
