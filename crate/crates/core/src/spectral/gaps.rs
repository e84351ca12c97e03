use serde::{Deserialize, Serialize};

use super::eigen::SpectrumReport;
use crate::error::{Error, Result};

/// An interval `(lower, upper)` with the distance `margin` from its endpoints
/// to the spectrum; `margin > 0` certifies it as a spectral interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralInterval {
    pub lower: f64,
    pub upper: f64,
    pub margin: f64,
}

impl SpectralInterval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::InvalidArgument(format!("interval ({lower}, {upper}) is empty")));
        }
        Ok(SpectralInterval { lower, upper, margin: 0.0 })
    }

    /// Margin = min distance from either endpoint to the eigenvalues of a report.
    /// Distances are trusted only inside the report's complete range, so the
    /// margin is also capped by each endpoint's distance to the edge of that range.
    pub fn certify(lower: f64, upper: f64, report: &SpectrumReport) -> Result<Self> {
        let mut iv = Self::new(lower, upper)?;
        let (lo, hi) = report.range;
        if !report.complete || !(lo <= lower && upper <= hi) {
            return Err(Error::IncompleteSpectrum);
        }
        let reach = |x: f64| {
            let d = report.eigenvalues.iter().fold(f64::INFINITY, |m, &e| m.min((e - x).abs()));
            d.min(x - lo).min(hi - x)
        };
        iv.margin = reach(lower).min(reach(upper));
        Ok(iv)
    }

    pub fn is_certified(&self) -> bool {
        self.margin > 0.0
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower < x && x < self.upper
    }

    pub fn count_in(&self, eigenvalues: &[f64]) -> usize {
        eigenvalues.iter().filter(|&&e| self.contains(e)).count()
    }
}

/// Open intervals between consecutive eigenvalues of width at least `min_width`.
/// The endpoints are eigenvalues, so the endpoint-distance margin would be 0;
/// instead each gap carries half its width, the distance from the midpoint to
/// the nearest eigenvalue.
pub fn detect_gaps(report: &SpectrumReport, min_width: f64) -> Result<Vec<SpectralInterval>> {
    if !report.complete {
        return Err(Error::IncompleteSpectrum);
    }
    Ok(gaps_of(&report.eigenvalues, min_width))
}

pub(crate) fn gaps_of(eigenvalues: &[f64], min_width: f64) -> Vec<SpectralInterval> {
    eigenvalues
        .windows(2)
        .filter(|w| w[1] - w[0] >= min_width && w[1] > w[0])
        .map(|w| SpectralInterval { lower: w[0], upper: w[1], margin: 0.5 * (w[1] - w[0]) })
        .collect()
}
