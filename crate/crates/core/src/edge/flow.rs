//! Spectral flow of the strip dispersion through a reference energy.
//!
//! `κ = 2πs` runs over a uniform grid on `[0, 2π)` and wraps around. Bands are
//! followed by the largest eigenvector overlap between neighboring κ, and a
//! crossing of `E_ref` counts with the sign of `dE/dκ`. Each crossing belongs
//! to the edge carrying at least 60% of its mass.

use std::io::Write;

use ndarray::ArrayView1;
use num_complex::Complex64;
use serde::Serialize;

use super::fill::strip_slices;
use super::StripSpec;
use crate::error::{Error, Result};
use crate::model::HermitianOperator;
use crate::spectral::{SolverOptions, SpectralInterval, SpectrumReport};

type C = Complex64;

pub const FLOW_SIGN_CONVENTION: &str = "kappa increases along +s; crossing sign = sign(dE/dkappa); lower edge designated by default";

/// Mass fraction that assigns a crossing to an edge.
pub const EDGE_MASS: f64 = 0.6;
/// Overlap below which band continuation is ambiguous.
pub const MIN_OVERLAP: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    Lower,
    Upper,
}

#[derive(Clone, Debug)]
pub struct FlowOptions {
    /// Defaults to the midpoint of the bulk gap.
    pub e_ref: Option<f64>,
    pub edge: Edge,
    pub solver: SolverOptions,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { e_ref: None, edge: Edge::Lower, solver: SolverOptions::default() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DispersionPoint {
    pub kappa: f64,
    pub band: usize,
    pub energy: f64,
    pub edge_mass_lower: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Crossing {
    /// Crossing between κ index `kappa_index` and the next one.
    pub kappa_index: usize,
    pub energy_before: f64,
    pub energy_after: f64,
    pub sign: i64,
    pub edge_mass_lower: f64,
    pub edge: Option<Edge>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralFlowReport {
    pub e_ref: f64,
    pub n_kappa: usize,
    pub designated_edge: Edge,
    pub net_flow: i64,
    pub net_flow_lower: i64,
    pub net_flow_upper: i64,
    pub unassigned: usize,
    pub crossings: Vec<Crossing>,
    pub dispersion: Vec<DispersionPoint>,
    pub min_overlap: f64,
    pub convention: &'static str,
}

impl SpectralFlowReport {
    /// CSV rows `kappa,band,energy,edge_mass_lower`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "kappa,band,energy,edge_mass_lower")?;
        for p in &self.dispersion {
            writeln!(out, "{},{},{:.15e},{:.6}", p.kappa, p.band, p.energy, p.edge_mass_lower)?;
        }
        Ok(())
    }
}

fn lower_mass(h: &HermitianOperator, v: ArrayView1<C>) -> f64 {
    let w = h.window();
    let mid = w.origin.1 as f64 + 0.5 * (w.ny as f64 - 1.0);
    let mut low = 0.0;
    let mut total = 0.0;
    for (r, z) in v.iter().enumerate() {
        let m = z.norm_sqr();
        total += m;
        if (h.site(r).1 as f64) < mid {
            low += m;
        }
    }
    low / total
}

fn best_match(from: ArrayView1<C>, to: &SpectrumReport) -> (usize, f64) {
    let vecs = to.vectors.as_ref().expect("vectors requested");
    (0..to.eigenvalues.len())
        .map(|j| {
            let o = from.iter().zip(vecs.column(j).iter()).map(|(a, b)| a.conj() * b).sum::<C>().norm();
            (j, o)
        })
        .fold((usize::MAX, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc })
}

/// Dispersion of the strip near `E_ref` and the signed edge crossings of `E_ref`.
pub fn strip_bands(strip: &StripSpec, bulk_gap: &SpectralInterval, n_kappa: usize, opts: &FlowOptions) -> Result<SpectralFlowReport> {
    if n_kappa < 4 {
        return Err(Error::InvalidArgument(format!("n_kappa = {n_kappa} is below 4")));
    }
    let e_ref = opts.e_ref.unwrap_or(bulk_gap.midpoint());
    // states within `track` of E_ref are followed; their neighbors are solved for within twice that
    let track = if bulk_gap.contains(e_ref) {
        0.5 * (e_ref - bulk_gap.lower).min(bulk_gap.upper - e_ref)
    } else {
        0.25 * bulk_gap.width()
    };
    let twists: Vec<f64> = (0..n_kappa).map(|a| a as f64 / n_kappa as f64).collect();
    let slices = strip_slices(strip, e_ref - 2.0 * track, e_ref + 2.0 * track, &twists, &opts.solver)?;

    let mut dispersion = Vec::new();
    for (a, (h, _, r)) in slices.iter().enumerate() {
        let vecs = r.vectors.as_ref().expect("vectors requested");
        for (i, &e) in r.eigenvalues.iter().enumerate() {
            dispersion.push(DispersionPoint {
                kappa: 2.0 * std::f64::consts::PI * twists[a],
                band: i,
                energy: e,
                edge_mass_lower: lower_mass(h, vecs.column(i)),
            });
        }
    }

    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    let mut min_overlap = f64::INFINITY;
    for a in 0..n_kappa {
        let b = (a + 1) % n_kappa;
        let (ra, rb) = (&slices[a].2, &slices[b].2);
        let (va, vb) = (ra.vectors.as_ref().expect("vectors"), rb.vectors.as_ref().expect("vectors"));
        for i in (0..ra.eigenvalues.len()).filter(|&i| (ra.eigenvalues[i] - e_ref).abs() < track) {
            let (j, o) = best_match(va.column(i), rb);
            min_overlap = min_overlap.min(o);
            if o < MIN_OVERLAP {
                return Err(Error::BandConnectionAmbiguous { index: a, overlap: o });
            }
            pairs.push((a, i, j));
        }
        for j in (0..rb.eigenvalues.len()).filter(|&j| (rb.eigenvalues[j] - e_ref).abs() < track) {
            let (i, o) = best_match(vb.column(j), ra);
            min_overlap = min_overlap.min(o);
            if o < MIN_OVERLAP {
                return Err(Error::BandConnectionAmbiguous { index: a, overlap: o });
            }
            pairs.push((a, i, j));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();

    let mut crossings = Vec::new();
    for &(a, i, j) in &pairs {
        let b = (a + 1) % n_kappa;
        let (e0, e1) = (slices[a].2.eigenvalues[i], slices[b].2.eigenvalues[j]);
        let sign = if e0 < e_ref && e1 >= e_ref {
            1
        } else if e0 >= e_ref && e1 < e_ref {
            -1
        } else {
            continue;
        };
        // mass taken from whichever end lies closer to E_ref
        let (h, rep, col) = if (e0 - e_ref).abs() <= (e1 - e_ref).abs() { (&slices[a].0, &slices[a].2, i) } else { (&slices[b].0, &slices[b].2, j) };
        let m = lower_mass(h, rep.vectors.as_ref().expect("vectors").column(col));
        let edge = if m >= EDGE_MASS {
            Some(Edge::Lower)
        } else if 1.0 - m >= EDGE_MASS {
            Some(Edge::Upper)
        } else {
            None
        };
        crossings.push(Crossing { kappa_index: a, energy_before: e0, energy_after: e1, sign, edge_mass_lower: m, edge });
    }
    let flow = |edge: Edge| crossings.iter().filter(|c| c.edge == Some(edge)).map(|c| c.sign).sum::<i64>();
    let (lower, upper) = (flow(Edge::Lower), flow(Edge::Upper));
    Ok(SpectralFlowReport {
        e_ref,
        n_kappa,
        designated_edge: opts.edge,
        net_flow: if opts.edge == Edge::Lower { lower } else { upper },
        net_flow_lower: lower,
        net_flow_upper: upper,
        unassigned: crossings.iter().filter(|c| c.edge.is_none()).count(),
        min_overlap: if min_overlap.is_finite() { min_overlap } else { 1.0 },
        crossings,
        dispersion,
        convention: FLOW_SIGN_CONVENTION,
    })
}
