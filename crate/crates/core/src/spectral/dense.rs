use ndarray::{Array2, ArrayView2, ShapeBuilder};
use ndarray_linalg::{Eigh, EigValsh, QR, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

/// All eigenpairs of a dense Hermitian matrix, ascending.
pub fn eigh(a: &Array2<C>) -> Result<(Vec<f64>, Array2<C>)> {
    // column-major copy so LAPACK sees the matrix itself rather than its transpose
    let mut f = Array2::zeros(a.raw_dim().f());
    f.assign(a);
    let (w, v) = f.eigh(UPLO::Lower).map_err(|e| Error::Lapack(e.to_string()))?;
    Ok((w.to_vec(), v))
}

/// All eigenvalues of a dense Hermitian matrix, ascending.
pub fn eigvalsh(a: &Array2<C>) -> Result<Vec<f64>> {
    let w = a.eigvalsh(UPLO::Lower).map_err(|e| Error::Lapack(e.to_string()))?;
    Ok(w.to_vec())
}

/// Orthonormal basis of the column span (Householder QR, thin).
pub fn orthonormalize(y: &Array2<C>) -> Result<Array2<C>> {
    let (q, _) = y.qr().map_err(|e| Error::Lapack(e.to_string()))?;
    Ok(q)
}

/// `Aᴴ·B`.
pub fn adjoint_mul(a: ArrayView2<C>, b: ArrayView2<C>) -> Array2<C> {
    a.t().mapv(|z| z.conj()).dot(&b)
}

/// Spectral norm of a small dense matrix.
pub fn spectral_norm(a: &Array2<C>) -> Result<f64> {
    let g = adjoint_mul(a.view(), a.view());
    let w = eigvalsh(&g)?;
    Ok(w.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Spectral norm of a dense Hermitian matrix.
pub fn hermitian_norm(a: &Array2<C>) -> Result<f64> {
    let w = eigvalsh(a)?;
    Ok(w.iter().fold(0.0_f64, |m, x| m.max(x.abs())))
}

/// Determinant by LU with partial pivoting.
pub fn determinant(a: &Array2<C>) -> C {
    let n = a.nrows();
    let mut m = a.clone();
    let mut det = C::new(1.0, 0.0);
    for k in 0..n {
        let (p, pmax) = (k..n).map(|r| (r, m[(r, k)].norm())).fold((k, -1.0), |b, x| if x.1 > b.1 { x } else { b });
        if pmax == 0.0 {
            return C::new(0.0, 0.0);
        }
        if p != k {
            for c in 0..n {
                m.swap((k, c), (p, c));
            }
            det = -det;
        }
        let piv = m[(k, k)];
        det *= piv;
        for r in k + 1..n {
            let f = m[(r, k)] / piv;
            if f != C::new(0.0, 0.0) {
                for c in k..n {
                    let t = m[(k, c)];
                    m[(r, c)] -= f * t;
                }
            }
        }
    }
    det
}
