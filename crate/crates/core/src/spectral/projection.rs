use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use super::cheb::{chebyshev_apply, ChebFilter, FilterTarget};
use super::gaps::SpectralInterval;
use crate::error::{Error, Result};
use crate::model::HermitianOperator;

type C = Complex64;

/// Dense matrix `p(H)` for a Chebyshev expansion, column by column.
pub fn filter_matrix(h: &HermitianOperator, f: &ChebFilter) -> Result<Array2<C>> {
    super::cheb::check_filter_enclosure(h, f)?;
    let n = h.dim();
    let cols: Vec<Vec<C>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![C::new(0.0, 0.0); n];
            e[j] = C::new(1.0, 0.0);
            chebyshev_apply(h, &f.coefficients, f.enclosure, &e)
        })
        .collect();
    let mut p = Array2::zeros((n, n));
    for (j, c) in cols.iter().enumerate() {
        for i in 0..n {
            p[(i, j)] = c[i];
        }
    }
    Ok(p)
}

/// Width `w` with `erfc(margin/w) = eps`, by bisection on `erfc`.
fn erf_width(margin: f64, eps: f64) -> f64 {
    let (mut a, mut b) = (0.0_f64, 30.0_f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if libm::erfc(m) > eps {
            a = m;
        } else {
            b = m;
        }
    }
    margin / b
}

/// Filter used for the spectral projection onto a certified interval: an erf
/// window with steps at the interval ends, narrow enough that it is within
/// `tol/16` of the indicator at every point at least `margin` from the ends,
/// expanded to uniform accuracy `tol/16`. At the spectrum it is then within
/// `tol/8` of the sharp indicator.
pub fn projection_filter(h: &HermitianOperator, interval: &SpectralInterval, tol: f64, degree_cap: usize) -> Result<ChebFilter> {
    if !interval.is_certified() {
        return Err(Error::InvalidArgument("spectral projection needs a certified interval".into()));
    }
    let (lo, hi) = h.gershgorin();
    let pad = 1e-9 * (hi - lo).abs().max(1.0);
    let width = erf_width(interval.margin, tol / 16.0);
    let target = FilterTarget::ErfWindow { lower: interval.lower, upper: interval.upper, width };
    ChebFilter::fit_to_tolerance(target, (lo - pad, hi + pad), tol / 16.0, degree_cap).map_err(|_| Error::MarginTooSmall {
        margin: interval.margin,
        cap: degree_cap,
    })
}

/// Dense approximation of the spectral projection `E_H(I)`.
pub fn spectral_projection(h: &HermitianOperator, interval: &SpectralInterval, tol: f64, degree_cap: usize) -> Result<Array2<C>> {
    let f = projection_filter(h, interval, tol, degree_cap)?;
    let mut p = filter_matrix(h, &f)?;
    // p(H) is Hermitian in exact arithmetic; store the mean of the two triangles
    let n = p.nrows();
    for i in 0..n {
        for j in 0..i {
            let z = 0.5 * (p[(i, j)] + p[(j, i)].conj());
            p[(i, j)] = z;
            p[(j, i)] = z.conj();
        }
        p[(i, i)] = C::new(p[(i, i)].re, 0.0);
    }
    Ok(p)
}

/// `Re tr(P)`.
pub fn trace(p: &Array2<C>) -> f64 {
    (0..p.nrows()).map(|i| p[(i, i)].re).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble_bulk, build_gauge, GaugeKind, Geometry, MagneticLattice};
    use crate::spectral::dense;
    use crate::spectral::eigen::{eigensolve, EigenMode, SolverOptions};

    fn small() -> HermitianOperator {
        let lat = MagneticLattice::new(1, 4, 2, 2, Geometry::Torus).unwrap();
        let g = build_gauge(&lat, GaugeKind::Landau).unwrap();
        assemble_bulk(&lat, &g).unwrap()
    }

    #[test]
    fn projection_onto_everything_and_nothing() {
        let h = small();
        let r = eigensolve(&h, EigenMode::Full, &SolverOptions::default()).unwrap();
        let (lo, hi) = (r.eigenvalues[0], *r.eigenvalues.last().unwrap());
        let all = SpectralInterval::certify(lo - 5.0, hi + 5.0, &r).unwrap();
        let p = spectral_projection(&h, &all, 1e-6, 4096).unwrap();
        let n = h.dim();
        let mut dev = p.clone();
        for i in 0..n {
            dev[(i, i)] -= C::new(1.0, 0.0);
        }
        assert!(dense::spectral_norm(&dev).unwrap() < 1e-6);
        let none = SpectralInterval::certify(lo - 20.0, lo - 10.0, &r).unwrap();
        let z = spectral_projection(&h, &none, 1e-6, 4096).unwrap();
        assert!(dense::spectral_norm(&z).unwrap() < 1e-6);
    }

    #[test]
    fn unit_margin_projection_is_idempotent_with_the_right_trace() {
        let h = small();
        let r = eigensolve(&h, EigenMode::Full, &SolverOptions::default()).unwrap();
        let g = r.gaps[0];
        let iv = SpectralInterval::certify(r.eigenvalues[0] - 1.0, g.lower + 1.0, &r).unwrap();
        assert!((iv.margin - 1.0).abs() < 1e-12);
        let p = spectral_projection(&h, &iv, 1e-6, 4096).unwrap();
        let defect = dense::hermitian_norm(&(p.dot(&p) - &p)).unwrap();
        assert!(defect < 1e-6, "{defect}");
        assert_eq!(trace(&p).round() as usize, iv.count_in(&r.eigenvalues));
    }

    #[test]
    fn uncertified_interval_rejected() {
        let h = small();
        let iv = SpectralInterval::new(0.0, 1.0).unwrap();
        assert!(spectral_projection(&h, &iv, 1e-6, 64).is_err());
    }
}
