//! Eigenpairs of banded Hermitian operators restricted to a slice `(lower, upper]`.
//!
//! Eigenvalues come from LAPACK band reduction plus bisection, which finds
//! every eigenvalue in the slice (a Sturm count, so completeness is exact).
//! Eigenvectors come from block inverse iteration with a banded LU.

use std::os::raw::{c_char, c_int};

use lapack_sys::{__BindgenComplex, zgbtrf_, zgbtrs_, zhbevx_};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense;
use super::eigen::SolverOptions;
use crate::error::{Error, Result};
use crate::model::HermitianOperator;

type C = Complex64;
type Z = __BindgenComplex<f64>;

fn zptr(v: &mut [C]) -> *mut Z {
    v.as_mut_ptr() as *mut Z
}

/// Every eigenvalue of `h` in `(lower, upper]`, ascending.
pub fn band_eigenvalues(h: &HermitianOperator, lower: f64, upper: f64) -> Result<Vec<f64>> {
    let n = h.dim();
    let kd = h.bandwidth();
    let ldab = kd + 1;
    let mut ab = vec![C::new(0.0, 0.0); ldab * n];
    let m = h.matrix();
    for j in 0..n {
        for (i, v) in m.row(j) {
            // row j holds A(j, i); lower storage wants A(i, j) for i ≥ j, which is conj(A(j, i))
            if i >= j {
                ab[(i - j) + j * ldab] = v.conj();
            }
        }
    }
    let (jobz, range, uplo) = (b'N' as c_char, b'V' as c_char, b'L' as c_char);
    let (ni, kdi, ldabi) = (n as c_int, kd as c_int, ldab as c_int);
    let mut q = vec![C::new(0.0, 0.0); 1];
    let ldq: c_int = 1;
    let (il, iu): (c_int, c_int) = (0, 0);
    let abstol = 2.0 * f64::MIN_POSITIVE;
    let mut found: c_int = 0;
    let mut w = vec![0.0; n];
    let mut z = vec![C::new(0.0, 0.0); 1];
    let ldz: c_int = 1;
    let mut work = vec![C::new(0.0, 0.0); n];
    let mut rwork = vec![0.0; 7 * n];
    let mut iwork = vec![0 as c_int; 5 * n];
    let mut ifail = vec![0 as c_int; n];
    let mut info: c_int = 0;
    unsafe {
        zhbevx_(
            &jobz, &range, &uplo, &ni, &kdi, zptr(&mut ab), &ldabi, zptr(&mut q), &ldq, &lower, &upper, &il, &iu, &abstol,
            &mut found, w.as_mut_ptr(), zptr(&mut z), &ldz, zptr(&mut work), rwork.as_mut_ptr(), iwork.as_mut_ptr(),
            ifail.as_mut_ptr(), &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack(format!("zhbevx info = {info}")));
    }
    w.truncate(found as usize);
    w.sort_by(f64::total_cmp);
    Ok(w)
}

/// LU factors of `A − σI` in LAPACK general band storage.
struct BandLu {
    n: usize,
    kl: usize,
    ab: Vec<C>,
    ipiv: Vec<c_int>,
}

impl BandLu {
    fn new(h: &HermitianOperator, sigma: f64) -> Result<Self> {
        let n = h.dim();
        let kl = h.bandwidth();
        let ldab = 3 * kl + 1;
        let mut ab = vec![C::new(0.0, 0.0); ldab * n];
        let m = h.matrix();
        for i in 0..n {
            for (j, v) in m.row(i) {
                let v = if i == j { v - sigma } else { v };
                ab[(2 * kl + i - j) + j * ldab] = v;
            }
        }
        let (ni, kli, ldabi) = (n as c_int, kl as c_int, ldab as c_int);
        let mut ipiv = vec![0 as c_int; n];
        let mut info: c_int = 0;
        unsafe { zgbtrf_(&ni, &ni, &kli, &kli, zptr(&mut ab), &ldabi, ipiv.as_mut_ptr(), &mut info) };
        if info < 0 {
            return Err(Error::Lapack(format!("zgbtrf info = {info}")));
        }
        // info > 0 flags an exactly zero pivot; the shift is nudged by the caller
        if info > 0 {
            return Err(Error::Lapack("singular shift".into()));
        }
        Ok(BandLu { n, kl, ab, ipiv })
    }

    fn solve(&self, b: &mut Array2<C>) -> Result<()> {
        // ndarray is row-major; LAPACK wants columns contiguous
        let nrhs = b.ncols();
        let mut buf: Vec<C> = b.t().iter().copied().collect();
        let (ni, kli, ldab, nr) = (self.n as c_int, self.kl as c_int, (3 * self.kl + 1) as c_int, nrhs as c_int);
        let trans = b'N' as c_char;
        let mut info: c_int = 0;
        unsafe {
            zgbtrs_(&trans, &ni, &kli, &kli, &nr, self.ab.as_ptr() as *const Z, &ldab, self.ipiv.as_ptr(), zptr(&mut buf), &ni, &mut info)
        };
        if info != 0 {
            return Err(Error::Lapack(format!("zgbtrs info = {info}")));
        }
        for j in 0..nrhs {
            for i in 0..self.n {
                b[(i, j)] = buf[j * self.n + i];
            }
        }
        Ok(())
    }
}

/// Eigenvalues in `(lower, upper]` with eigenvectors as columns.
pub(crate) fn slice_solve(h: &HermitianOperator, lower: f64, upper: f64, opts: &SolverOptions) -> Result<(Vec<f64>, Array2<C>)> {
    let n = h.dim();
    let kd = h.bandwidth();
    if 4 * kd > n.max(8) {
        return Err(Error::InvalidArgument(format!("bandwidth {kd} is too wide for band slicing at dimension {n}")));
    }
    let values = band_eigenvalues(h, lower, upper)?;
    let norm = h.norm_bound().max(f64::MIN_POSITIVE);
    let tol = opts.residual_factor * norm;
    let mut vectors = Array2::<C>::zeros((n, values.len()));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xba5d);
    // groups of eigenvalues too close to separate by inverse iteration one at a time
    let sep = 1e-7 * norm;
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && values[end] - values[end - 1] < sep {
            end += 1;
        }
        let size = end - start;
        let sigma0 = 0.5 * (values[start] + values[end - 1]);
        let block = (size + 2).min(n);
        let mut lu = None;
        for nudge in [1e-13, 1e-11, 1e-9] {
            if let Ok(f) = BandLu::new(h, sigma0 + nudge * norm) {
                lu = Some(f);
                break;
            }
        }
        let lu = lu.ok_or_else(|| Error::Lapack("no usable shift for inverse iteration".into()))?;
        let mut x = Array2::from_shape_fn((n, block), |_| C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let mut done = false;
        for _ in 0..8 {
            lu.solve(&mut x)?;
            let q = dense::orthonormalize(&x)?;
            let mut hq = Array2::<C>::zeros((n, q.ncols()));
            for j in 0..q.ncols() {
                let col = h.apply_vec(&q.column(j).to_vec());
                hq.column_mut(j).assign(&ndarray::ArrayView1::from(&col));
            }
            let mut g = dense::adjoint_mul(q.view(), hq.view());
            for i in 0..g.nrows() {
                for j in 0..i {
                    let z = 0.5 * (g[(i, j)] + g[(j, i)].conj());
                    g[(i, j)] = z;
                    g[(j, i)] = z.conj();
                }
                g[(i, i)] = C::new(g[(i, i)].re, 0.0);
            }
            let (theta, v) = dense::eigh(&g)?;
            let ritz = q.dot(&v);
            let hritz = hq.dot(&v);
            // Ritz values nearest the shift, one per target eigenvalue
            let mut order: Vec<usize> = (0..theta.len()).collect();
            order.sort_by(|&a, &b| (theta[a] - sigma0).abs().total_cmp(&(theta[b] - sigma0).abs()));
            let mut pick: Vec<usize> = order[..size].to_vec();
            pick.sort_by(|&a, &b| theta[a].total_cmp(&theta[b]));
            let ok = pick.iter().all(|&i| {
                let r: f64 = hritz.column(i).iter().zip(ritz.column(i).iter()).map(|(a, b)| (a - b * theta[i]).norm_sqr()).sum();
                r.sqrt() <= 0.5 * tol
            });
            x = ritz.clone();
            if ok {
                for (slot, &i) in pick.iter().enumerate() {
                    vectors.column_mut(start + slot).assign(&ritz.column(i));
                }
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::WindowNotConverged {
                iterations: 8,
                reason: format!("inverse iteration near {sigma0} did not reach the residual certificate"),
            });
        }
        start = end;
    }
    Ok((values, vectors))
}
