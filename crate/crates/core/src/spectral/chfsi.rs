//! Chebyshev-filtered subspace iteration for the eigenpairs in a window.

use ndarray::{s, Array2, Axis};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::cheb::{chebyshev_apply, ChebFilter, FilterTarget};
use super::dense;
use super::eigen::SolverOptions;
use crate::error::{Error, Result};
use crate::model::HermitianOperator;

type C = Complex64;

/// Below this dimension the window is cut out of a dense solve.
const DENSE_SHORTCUT: usize = 400;
/// Hutchinson probes for the completeness check.
const PROBES: usize = 6;

pub(crate) struct WindowOutput {
    pub values: Vec<f64>,
    pub vectors: Array2<C>,
    pub missing_mass: f64,
    pub method: String,
}

fn columns(a: &Array2<C>) -> Vec<Vec<C>> {
    a.axis_iter(Axis(1)).map(|c| c.to_vec()).collect()
}

fn from_columns(n: usize, cols: &[Vec<C>]) -> Array2<C> {
    let mut a = Array2::zeros((n, cols.len()));
    for (j, c) in cols.iter().enumerate() {
        a.column_mut(j).assign(&ndarray::ArrayView1::from(c));
    }
    a
}

fn apply_block(h: &HermitianOperator, x: &Array2<C>) -> Array2<C> {
    let cols: Vec<Vec<C>> = columns(x).par_iter().map(|c| h.apply_vec(c)).collect();
    from_columns(h.dim(), &cols)
}

/// Chebyshev polynomial of degree `d` in `(H − e)/w`, applied to every column.
/// Eigenvalues inside `[e − w, e + w]` stay bounded; those outside grow.
fn damping_filter(h: &HermitianOperator, x: &Array2<C>, lo: f64, hi: f64, d: usize) -> Array2<C> {
    let mut coeff = vec![0.0; d + 1];
    coeff[d] = 1.0;
    let cols: Vec<Vec<C>> = columns(x).par_iter().map(|c| chebyshev_apply(h, &coeff, (lo, hi), c)).collect();
    from_columns(h.dim(), &cols)
}

fn poly_filter(h: &HermitianOperator, x: &Array2<C>, f: &ChebFilter) -> Array2<C> {
    let cols: Vec<Vec<C>> = columns(x).par_iter().map(|c| chebyshev_apply(h, &f.coefficients, f.enclosure, c)).collect();
    from_columns(h.dim(), &cols)
}

/// Rayleigh–Ritz on the span of `y`: Ritz values ascending, Ritz vectors, `H·X`.
fn rayleigh_ritz(h: &HermitianOperator, y: &Array2<C>) -> Result<(Vec<f64>, Array2<C>, Array2<C>)> {
    let q = dense::orthonormalize(y)?;
    let hq = apply_block(h, &q);
    let mut g = dense::adjoint_mul(q.view(), hq.view());
    let m = g.nrows();
    for i in 0..m {
        for j in 0..i {
            let z = 0.5 * (g[(i, j)] + g[(j, i)].conj());
            g[(i, j)] = z;
            g[(j, i)] = z.conj();
        }
        g[(i, i)] = C::new(g[(i, i)].re, 0.0);
    }
    let (theta, v) = dense::eigh(&g)?;
    Ok((theta, q.dot(&v), hq.dot(&v)))
}

fn residual_norms(x: &Array2<C>, hx: &Array2<C>, theta: &[f64]) -> Vec<f64> {
    (0..theta.len())
        .map(|i| {
            let mut s = 0.0;
            for (a, b) in hx.column(i).iter().zip(x.column(i).iter()) {
                s += (a - b * theta[i]).norm_sqr();
            }
            s.sqrt()
        })
        .collect()
}

fn random_block(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Array2<C> {
    Array2::from_shape_fn((n, m), |_| C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
}

/// Hutchinson estimate of `tr((I − XX*)·F(H)·(I − XX*))` for a smoothed
/// indicator `F` of `[lower − η/2, upper + η/2]`; about 0 when `X` spans
/// every eigenvector in the window.
pub(crate) fn missing_mass(
    h: &HermitianOperator,
    x: &Array2<C>,
    lower: f64,
    upper: f64,
    eta_lo: f64,
    eta_hi: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let (glo, ghi) = h.gershgorin();
    let n = h.dim();
    let enclosure = (glo - 1e-9 * (ghi - glo).abs() - 1e-12, ghi + 1e-9 * (ghi - glo).abs() + 1e-12);
    let eta = eta_lo.min(eta_hi);
    if !(eta > 0.0) {
        return Err(Error::WindowNotConverged { iterations: 0, reason: "no spectral room beside the window".into() });
    }
    let target = FilterTarget::ErfWindow { lower: lower - eta / 4.0, upper: upper + eta / 4.0, width: eta / 24.0 };
    let tol = 0.02 / n as f64;
    let f = ChebFilter::fit_to_tolerance(target, enclosure, tol, opts.degree_cap).map_err(|_| Error::WindowNotConverged {
        iterations: 0,
        reason: format!("guard separation {eta:e} too small for the completeness filter"),
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xc0ffee);
    let probes: Vec<Vec<C>> = (0..PROBES)
        .map(|_| {
            let z: Vec<C> = (0..n).map(|_| C::new(if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0)).collect();
            let za = ndarray::ArrayView1::from(&z);
            let coef = x.t().mapv(|c| c.conj()).dot(&za);
            let proj = x.dot(&coef);
            z.iter().zip(proj.iter()).map(|(a, b)| a - b).collect()
        })
        .collect();
    let total: f64 = probes
        .par_iter()
        .map(|z| {
            let fz = chebyshev_apply(h, &f.coefficients, f.enclosure, z);
            z.iter().zip(&fz).map(|(a, b)| (a.conj() * b).re).sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(total / PROBES as f64)
}

pub(crate) fn window_solve(h: &HermitianOperator, lower: f64, upper: f64, max_pairs: usize, opts: &SolverOptions) -> Result<WindowOutput> {
    let n = h.dim();
    let (glo, ghi) = h.gershgorin();
    let norm = h.norm_bound().max(f64::MIN_POSITIVE);
    let tol = opts.residual_factor * norm;
    let guard = (max_pairs / 4).max(12);
    let m = max_pairs + guard;

    if n <= DENSE_SHORTCUT || 2 * m >= n {
        if n > opts.dense_cap {
            return Err(Error::DenseCapExceeded { dim: n, cap: opts.dense_cap });
        }
        let (w, v) = dense::eigh(&h.to_dense())?;
        let idx: Vec<usize> = (0..n).filter(|&i| lower <= w[i] && w[i] <= upper).collect();
        if idx.len() > max_pairs {
            return Err(Error::WindowNotConverged {
                iterations: 0,
                reason: format!("window holds {} eigenvalues, more than max_pairs = {max_pairs}", idx.len()),
            });
        }
        let values = idx.iter().map(|&i| w[i]).collect();
        let vectors = v.select(Axis(1), &idx);
        return Ok(WindowOutput { values, vectors, missing_mass: 0.0, method: "dense window".into() });
    }

    let lowest = lower <= glo;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut y = random_block(n, m, &mut rng);
    let interior = if lowest {
        None
    } else {
        // indicator of the window padded by a tenth of its width, Jackson damped
        let pad = 0.1 * (upper - lower);
        let target = FilterTarget::SmoothedIndicator { lower: lower - pad, upper: upper + pad, margin: pad };
        let enclosure = (glo - 1e-9 * norm, ghi + 1e-9 * norm);
        let degree = ((8.0 * (ghi - glo) / (upper - lower + 2.0 * pad)).ceil() as usize).clamp(20, opts.degree_cap);
        Some(ChebFilter::fit(target, enclosure, degree)?.jackson_damped())
    };
    let mut cut = f64::NAN;
    let mut completeness_failures = 0;
    for iter in 0..opts.max_iterations {
        if iter > 0 {
            y = match &interior {
                None => {
                    let width = ghi - cut;
                    // degree limited so the largest amplification stays near e^40
                    let t = ((glo - 0.5 * (cut + ghi)) / (0.5 * width)).abs();
                    let per = if t > 1.0 { t.acosh() } else { 1e-3 };
                    let d = ((40.0 / per) as usize).clamp(4, 60);
                    damping_filter(h, &y, cut, ghi + 1e-9 * norm, d)
                }
                Some(f) => poly_filter(h, &y, f),
            };
        }
        let (theta, x, hx) = rayleigh_ritz(h, &y)?;
        let res = residual_norms(&x, &hx, &theta);
        let inside: Vec<usize> = (0..m).filter(|&i| lower <= theta[i] && theta[i] <= upper).collect();
        if lowest && inside.len() > max_pairs {
            return Err(Error::WindowNotConverged {
                iterations: iter,
                reason: format!("window holds more than max_pairs = {max_pairs} eigenvalues"),
            });
        }
        if lowest {
            cut = theta[m - 1];
            if cut <= upper {
                // every Ritz value is in the window: ask for a larger block
                return Err(Error::WindowNotConverged {
                    iterations: iter,
                    reason: format!("block of {m} vectors saturated by the window"),
                });
            }
        }
        let converged = inside.iter().all(|&i| res[i] <= tol);
        // the nearest guard outside the window must itself be resolved to within its gap
        let above = (0..m).find(|&i| theta[i] > upper);
        let below = (0..m).rev().find(|&i| theta[i] < lower);
        let eta_hi = above.map_or(ghi - upper, |i| theta[i] - upper - res[i]);
        let eta_lo = if lowest { f64::INFINITY } else { below.map_or(lower - glo, |i| lower - theta[i] - res[i]) };
        if converged && iter > 0 && eta_hi > 0.0 && eta_lo > 0.0 {
            let xw = x.select(Axis(1), &inside);
            let miss = missing_mass(h, &xw, lower, upper, eta_lo, eta_hi, opts)?;
            if miss < 0.5 {
                let values = inside.iter().map(|&i| theta[i]).collect();
                let method = if lowest { "chebyshev subspace (lowest)" } else { "chebyshev subspace (interior)" };
                return Ok(WindowOutput { values, vectors: xw, missing_mass: miss.max(0.0), method: method.into() });
            }
            completeness_failures += 1;
            if completeness_failures > 5 {
                return Err(Error::WindowNotConverged {
                    iterations: iter,
                    reason: format!("completeness check keeps reporting {miss:.2} missing eigenvalues"),
                });
            }
            // refresh the guard columns so a missed direction can enter
            let fresh = random_block(n, guard, &mut rng);
            let mut yy = x.clone();
            yy.slice_mut(s![.., m - guard..]).assign(&fresh);
            y = yy;
            continue;
        }
        y = x;
    }
    Err(Error::WindowNotConverged { iterations: opts.max_iterations, reason: "residual certificate not reached".into() })
}
