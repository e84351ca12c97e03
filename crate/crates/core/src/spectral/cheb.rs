use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HermitianOperator;

type C = Complex64;

/// `0` for `u ≤ 0`, `1` for `u ≥ 1`, C∞ in between (built from `exp(−1/u)`).
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        a / (a + b)
    }
}

/// Target function of a Chebyshev filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterTarget {
    /// Equals 1 on `[lower + margin/2, upper − margin/2]` and 0 outside
    /// `[lower − margin/2, upper + margin/2]`.
    SmoothedIndicator { lower: f64, upper: f64, margin: f64 },
    /// `exp(−(x − center)²/(2·width²))`.
    Gaussian { center: f64, width: f64 },
    /// `exp(1 − 1/(1 − ((x − center)/radius)²))` inside the radius, 0 outside.
    Bump { center: f64, radius: f64 },
    /// `½·(erf((x − lower)/width) − erf((x − upper)/width))`, an analytic window.
    ErfWindow { lower: f64, upper: f64, width: f64 },
    /// An explicit polynomial; the expansion is the function.
    Polynomial { label: String },
}

impl FilterTarget {
    pub fn eval(&self, x: f64) -> Option<f64> {
        Some(match *self {
            FilterTarget::SmoothedIndicator { lower, upper, margin } => {
                let rise = smooth_step((x - (lower - margin / 2.0)) / margin);
                let fall = smooth_step(((upper + margin / 2.0) - x) / margin);
                rise * fall
            }
            FilterTarget::Gaussian { center, width } => (-(x - center).powi(2) / (2.0 * width * width)).exp(),
            FilterTarget::Bump { center, radius } => {
                let u = (x - center) / radius;
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - u * u)).exp()
                }
            }
            FilterTarget::ErfWindow { lower, upper, width } => 0.5 * (libm::erf((x - lower) / width) - libm::erf((x - upper) / width)),
            FilterTarget::Polynomial { .. } => return None,
        })
    }
}

/// Chebyshev expansion `Σ c_j T_j(x̃)` of a target on the enclosure `[a, b]`,
/// with `x̃ = (x − (a+b)/2)/((b−a)/2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChebFilter {
    pub degree: usize,
    pub coefficients: Vec<f64>,
    pub enclosure: (f64, f64),
    pub target: FilterTarget,
    /// Uniform bound on `|expansion − target|` over the enclosure.
    pub error_bound: f64,
}

/// Chebyshev interpolation coefficients of `f` at `n` first-kind nodes
/// (a DCT-II computed with one complex FFT of length `2n`).
fn interpolation_coefficients(f: &dyn Fn(f64) -> f64, n: usize) -> Vec<f64> {
    let values: Vec<f64> = (0..n).map(|k| f((PI * (k as f64 + 0.5) / n as f64).cos())).collect();
    let mut buf: Vec<C> = values.iter().chain(values.iter().rev()).map(|&x| C::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(2 * n).process(&mut buf);
    (0..n)
        .map(|j| {
            let rot = C::from_polar(1.0, -PI * j as f64 / (2 * n) as f64);
            let s = 0.5 * (rot * buf[j]).re;
            let c = 2.0 * s / n as f64;
            if j == 0 {
                c / 2.0
            } else {
                c
            }
        })
        .collect()
}

impl ChebFilter {
    fn check_enclosure(enclosure: (f64, f64)) -> Result<()> {
        if !(enclosure.0 < enclosure.1) || !enclosure.0.is_finite() || !enclosure.1.is_finite() {
            return Err(Error::InvalidArgument(format!("bad enclosure {enclosure:?}")));
        }
        Ok(())
    }

    fn target_fn(target: &FilterTarget, enclosure: (f64, f64)) -> Result<impl Fn(f64) -> f64 + '_> {
        if target.eval(0.0).is_none() {
            return Err(Error::InvalidArgument("polynomial targets carry their own coefficients".into()));
        }
        let mid = 0.5 * (enclosure.0 + enclosure.1);
        let half = 0.5 * (enclosure.1 - enclosure.0);
        Ok(move |t: f64| target.eval(mid + half * t).unwrap())
    }

    /// Coefficients resolved far past `cap`, so the tail sum is a reliable error bound.
    fn resolved_coefficients(f: &dyn Fn(f64) -> f64, cap: usize) -> Vec<f64> {
        let mut n = (4 * (cap + 1)).max(512);
        loop {
            let c = interpolation_coefficients(f, n);
            let total: f64 = c.iter().map(|x| x.abs()).sum();
            let top: f64 = c[3 * n / 4..].iter().map(|x| x.abs()).sum();
            if top <= 1e-15 * total.max(1e-300) || n >= 1 << 18 {
                return c;
            }
            n *= 2;
        }
    }

    fn from_resolved(target: FilterTarget, enclosure: (f64, f64), c: &[f64], degree: usize) -> Self {
        let total: f64 = c.iter().map(|x| x.abs()).sum();
        let tail: f64 = c[degree + 1..].iter().map(|x| x.abs()).sum();
        ChebFilter {
            degree,
            coefficients: c[..=degree].to_vec(),
            enclosure,
            target,
            error_bound: tail + 64.0 * f64::EPSILON * total,
        }
    }

    /// Expansion of fixed degree.
    pub fn fit(target: FilterTarget, enclosure: (f64, f64), degree: usize) -> Result<Self> {
        Self::check_enclosure(enclosure)?;
        let f = Self::target_fn(&target, enclosure)?;
        let c = Self::resolved_coefficients(&f, degree);
        drop(f);
        Ok(Self::from_resolved(target, enclosure, &c, degree))
    }

    /// Lowest degree whose error bound is at most `tol`; `MarginTooSmall` past `cap`.
    pub fn fit_to_tolerance(target: FilterTarget, enclosure: (f64, f64), tol: f64, cap: usize) -> Result<Self> {
        Self::check_enclosure(enclosure)?;
        let f = Self::target_fn(&target, enclosure)?;
        let c = Self::resolved_coefficients(&f, cap);
        drop(f);
        let total: f64 = c.iter().map(|x| x.abs()).sum();
        let floor = 64.0 * f64::EPSILON * total;
        let mut tail = vec![0.0; c.len() + 1];
        for j in (0..c.len()).rev() {
            tail[j] = tail[j + 1] + c[j].abs();
        }
        for d in 0..=cap.min(c.len() - 1) {
            if tail[d + 1] + floor <= tol {
                return Ok(Self::from_resolved(target, enclosure, &c, d));
            }
        }
        let margin = match target {
            FilterTarget::SmoothedIndicator { margin, .. } => margin,
            FilterTarget::Gaussian { width, .. } => width,
            FilterTarget::Bump { radius, .. } => radius,
            FilterTarget::ErfWindow { width, .. } => width,
            FilterTarget::Polynomial { .. } => 0.0,
        };
        Err(Error::MarginTooSmall { margin, cap })
    }

    /// An explicit polynomial in Chebyshev form; exact, error bound 0.
    pub fn polynomial(coefficients: Vec<f64>, enclosure: (f64, f64), label: &str) -> Result<Self> {
        Self::check_enclosure(enclosure)?;
        if coefficients.is_empty() {
            return Err(Error::InvalidArgument("polynomial needs at least one coefficient".into()));
        }
        Ok(ChebFilter {
            degree: coefficients.len() - 1,
            coefficients,
            enclosure,
            target: FilterTarget::Polynomial { label: label.to_string() },
            error_bound: 0.0,
        })
    }

    /// `φ(x) = x`.
    pub fn identity(enclosure: (f64, f64)) -> Result<Self> {
        let mid = 0.5 * (enclosure.0 + enclosure.1);
        let half = 0.5 * (enclosure.1 - enclosure.0);
        Self::polynomial(vec![mid, half], enclosure, "identity")
    }

    pub fn is_exact_polynomial(&self) -> bool {
        matches!(self.target, FilterTarget::Polynomial { .. })
    }

    /// Clenshaw evaluation at a real point.
    pub fn eval(&self, x: f64) -> f64 {
        let (a, b) = self.enclosure;
        let t = (2.0 * x - a - b) / (b - a);
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &c in self.coefficients.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + self.coefficients[0]
    }

    /// Largest deviation from the target over 64 equispaced probes of the enclosure.
    pub fn probe_error(&self) -> Option<f64> {
        let (a, b) = self.enclosure;
        let mut worst = 0.0_f64;
        for i in 0..64 {
            let x = a + (b - a) * i as f64 / 63.0;
            worst = worst.max((self.eval(x) - self.target.eval(x)?).abs());
        }
        Some(worst)
    }

    /// Jackson-damped copy (nonnegative kernel, suppresses Gibbs oscillation).
    /// The error bound field keeps the undamped value and is not a bound for the copy.
    pub fn jackson_damped(&self) -> Self {
        let d = self.degree as f64 + 1.0;
        let mut out = self.clone();
        for (j, c) in out.coefficients.iter_mut().enumerate() {
            let jf = j as f64;
            let g = ((d - jf) * (PI * jf / d).cos() + (PI * jf / d).sin() / (PI / d).tan()) / d;
            *c *= g;
        }
        out
    }
}

/// Checks the Gershgorin enclosure of `h` against the filter's.
pub fn check_filter_enclosure(h: &HermitianOperator, f: &ChebFilter) -> Result<()> {
    let (lo, hi) = h.gershgorin();
    let (a, b) = f.enclosure;
    if lo < a || hi > b {
        return Err(Error::EnclosureViolation { lo, hi, a, b });
    }
    Ok(())
}

/// Three-term recurrence for `Σ c_j T_j(H̃)·v` without the enclosure check.
pub(crate) fn chebyshev_apply(h: &HermitianOperator, coefficients: &[f64], enclosure: (f64, f64), v: &[C]) -> Vec<C> {
    let n = v.len();
    let mid = 0.5 * (enclosure.0 + enclosure.1);
    let inv_half = 2.0 / (enclosure.1 - enclosure.0);
    let scaled = |x: &[C], out: &mut [C]| {
        h.apply(x, out);
        for i in 0..n {
            out[i] = (out[i] - x[i] * mid) * inv_half;
        }
    };
    let mut y: Vec<C> = v.iter().map(|z| z * coefficients[0]).collect();
    if coefficients.len() == 1 {
        return y;
    }
    let mut t_prev = v.to_vec();
    let mut t_cur = vec![C::new(0.0, 0.0); n];
    scaled(&t_prev, &mut t_cur);
    for i in 0..n {
        y[i] += t_cur[i] * coefficients[1];
    }
    let mut t_next = vec![C::new(0.0, 0.0); n];
    for &c in &coefficients[2..] {
        scaled(&t_cur, &mut t_next);
        for i in 0..n {
            t_next[i] = t_next[i] * 2.0 - t_prev[i];
            y[i] += t_next[i] * c;
        }
        std::mem::swap(&mut t_prev, &mut t_cur);
        std::mem::swap(&mut t_cur, &mut t_next);
    }
    y
}

/// `f(H)·v` by the Chebyshev recurrence.
pub fn apply_filter(h: &HermitianOperator, f: &ChebFilter, v: &[C]) -> Result<Vec<C>> {
    check_filter_enclosure(h, f)?;
    if v.len() != h.dim() {
        return Err(Error::InvalidArgument(format!("vector length {} vs dimension {}", v.len(), h.dim())));
    }
    Ok(chebyshev_apply(h, &f.coefficients, f.enclosure, v))
}

/// `f(H)` applied to each vector independently.
pub fn apply_filter_block(h: &HermitianOperator, f: &ChebFilter, vs: &[Vec<C>]) -> Result<Vec<Vec<C>>> {
    check_filter_enclosure(h, f)?;
    Ok(vs.par_iter().map(|v| chebyshev_apply(h, &f.coefficients, f.enclosure, v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assemble_bulk, build_gauge, GaugeKind, Geometry, MagneticLattice};

    fn torus(k: u32, q: u32, c: usize) -> HermitianOperator {
        let lat = MagneticLattice::new(k, q, c, c, Geometry::Torus).unwrap();
        let g = build_gauge(&lat, GaugeKind::Landau).unwrap();
        assemble_bulk(&lat, &g).unwrap()
    }

    #[test]
    fn smooth_step_is_flat_outside_unit_interval() {
        assert_eq!(smooth_step(-0.1), 0.0);
        assert_eq!(smooth_step(1.2), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        let t = FilterTarget::SmoothedIndicator { lower: 0.0, upper: 10.0, margin: 2.0 };
        assert_eq!(t.eval(1.0), Some(1.0));
        assert_eq!(t.eval(-1.0), Some(0.0));
        assert_eq!(t.eval(11.0), Some(0.0));
    }

    #[test]
    fn degree_zero_filter_is_identity_scaling() {
        let h = torus(1, 4, 2);
        let (lo, hi) = h.gershgorin();
        let f = ChebFilter::polynomial(vec![1.0], (lo - 1.0, hi + 1.0), "one").unwrap();
        let v: Vec<C> = (0..h.dim()).map(|i| C::new(i as f64, -(i as f64))).collect();
        assert_eq!(apply_filter(&h, &f, &v).unwrap(), v);
    }

    #[test]
    fn enclosure_violation_detected() {
        let h = torus(1, 4, 2);
        let f = ChebFilter::polynomial(vec![1.0, 1.0], (0.0, 1.0), "p").unwrap();
        let v = vec![C::new(1.0, 0.0); h.dim()];
        assert!(matches!(apply_filter(&h, &f, &v), Err(Error::EnclosureViolation { .. })));
    }

    #[test]
    fn expansion_matches_target_within_stated_bound() {
        let targets = [
            FilterTarget::Gaussian { center: 3.0, width: 2.0 },
            FilterTarget::Bump { center: -1.0, radius: 4.0 },
            FilterTarget::SmoothedIndicator { lower: -2.0, upper: 5.0, margin: 3.0 },
        ];
        for t in targets {
            let f = ChebFilter::fit(t.clone(), (-10.0, 10.0), 60).unwrap();
            let err = f.probe_error().unwrap();
            assert!(err <= f.error_bound, "{t:?}: {err} > {}", f.error_bound);
        }
    }

    #[test]
    fn identity_polynomial_reproduces_operator() {
        let h = torus(1, 4, 2);
        let (lo, hi) = h.gershgorin();
        let f = ChebFilter::identity((lo, hi)).unwrap();
        let v: Vec<C> = (0..h.dim()).map(|i| C::new((i as f64).sin(), 0.5)).collect();
        let y = apply_filter(&h, &f, &v).unwrap();
        let hv = h.apply_vec(&v);
        for (a, b) in y.iter().zip(&hv) {
            assert!((a - b).norm() < 1e-10 * h.norm_bound());
        }
    }

    #[test]
    fn tolerance_fit_reports_margin_too_small() {
        let t = FilterTarget::SmoothedIndicator { lower: 0.0, upper: 1.0, margin: 1e-4 };
        assert!(matches!(ChebFilter::fit_to_tolerance(t, (-100.0, 100.0), 1e-10, 64), Err(Error::MarginTooSmall { .. })));
    }
}
