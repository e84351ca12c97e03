//! Bloch reduction over the dual torus: fibers, band structure, Chern numbers.
//!
//! A fiber at `(s, t)` acts on the sites of one magnetic cell. Hopping that
//! leaves the cell by `m = (M, N)` cells picks up the magnetic translation
//! factor `τ(m; u)` of the construction gauge and the character
//! `χ(s, t)(m) = e^{2πi(sM + tN)}`, so every fiber is 1-periodic in `s` and `t`.

mod chern;
mod hopping;

pub use chern::{chern_fhs, chern_of_frames, invariant_pair, ChernResult, InvariantPair, ORIENTATION};
pub use hopping::HoppingModel;

use std::io::Write;
use std::ops::Range;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Dir, GaugeField, MagneticLattice};
use crate::spectral::dense;

type C = Complex64;

/// Uniform grid `(a/n_s, b/n_t)` on the dual torus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BlochGrid {
    pub n_s: usize,
    pub n_t: usize,
}

impl BlochGrid {
    pub fn new(n_s: usize, n_t: usize) -> Result<Self> {
        if n_s < 4 || n_t < 4 {
            return Err(Error::InvalidArgument(format!("Bloch grid {n_s}×{n_t} is below the 4×4 minimum")));
        }
        Ok(BlochGrid { n_s, n_t })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn len(&self) -> usize {
        self.n_s * self.n_t
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index with `a` running fastest.
    pub fn index(&self, a: usize, b: usize) -> usize {
        (b % self.n_t) * self.n_s + (a % self.n_s)
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.n_s, index / self.n_s)
    }

    pub fn point(&self, index: usize) -> (f64, f64) {
        let (a, b) = self.coords(index);
        (a as f64 / self.n_s as f64, b as f64 / self.n_t as f64)
    }
}

/// One hop of the cell stencil: row `r` couples to column `c` through
/// `phase·χ(shift)`, with `shift` counted in cells.
#[derive(Clone, Copy, Debug)]
struct CellLink {
    r: usize,
    c: usize,
    phase: C,
    shift: (i64, i64),
}

/// Nearest-neighbor stencil `onsite(v)ψ(v) − hop·Σ U ψ(u)` folded onto one cell.
#[derive(Clone, Debug)]
pub struct CellStencil {
    gauge: GaugeField,
    cell: (usize, usize),
    hop: f64,
    onsite: Vec<f64>,
    links: Vec<CellLink>,
}

impl CellStencil {
    /// Folds the links of `gauge` leaving the `cx × cy` cell at the window origin.
    /// `onsite` lists the diagonal for the cell sites, row-major with `x` fastest.
    pub fn from_gauge(gauge: &GaugeField, cell: (usize, usize), hop: f64, onsite: Vec<f64>) -> Result<Self> {
        let (cx, cy) = cell;
        gauge.check_periodic(cx, cy)?;
        if onsite.len() != cx * cy {
            return Err(Error::InvalidArgument(format!("{} onsite values for a {cx}×{cy} cell", onsite.len())));
        }
        let w = *gauge.window();
        let twist = [gauge.twist().0, gauge.twist().1];
        let mut links = Vec::with_capacity(2 * cx * cy);
        for j in 0..cy {
            for i in 0..cx {
                let v = w.index(i, j);
                for dir in [Dir::PlusX, Dir::PlusY] {
                    let step = w.step(v, dir).ok_or_else(|| {
                        Error::GaugeNotCellPeriodic(format!("link {dir:?} at cell site ({i}, {j}) leaves the window"))
                    })?;
                    let mut phase = gauge.link_phase(v, dir).expect("link inside window");
                    let (ti, tj) = match dir {
                        Dir::PlusX => (i as i64 + 1, j as i64),
                        _ => (i as i64, j as i64 + 1),
                    };
                    let shift = (ti.div_euclid(cx as i64), tj.div_euclid(cy as i64));
                    let (fi, fj) = (ti.rem_euclid(cx as i64) as usize, tj.rem_euclid(cy as i64) as usize);
                    if step.wrap != (0, 0) {
                        // a one-cell window already folded the link; only its twist has to go
                        let undo = twist[0] * step.wrap.0 as f64 + twist[1] * step.wrap.1 as f64;
                        phase *= C::from_polar(1.0, -2.0 * std::f64::consts::PI * undo);
                    } else if shift != (0, 0) {
                        let m = (shift.0 * cx as i64, shift.1 * cy as i64);
                        phase *= gauge.kind().transition(gauge.flux(), m, w.plane(w.index(fi, fj)));
                    }
                    links.push(CellLink { r: j * cx + i, c: fj * cx + fi, phase, shift });
                }
            }
        }
        Ok(CellStencil { gauge: gauge.clone(), cell, hop, onsite, links })
    }

    /// The magnetic Laplacian stencil on one `q × q` cell of `lattice`.
    pub fn magnetic(lattice: &MagneticLattice, gauge: &GaugeField) -> Result<Self> {
        let q = lattice.q() as usize;
        let w = gauge.window();
        let onsite = (0..q * q).map(|r| lattice.onsite(w.plane(w.index(r % q, r / q)))).collect();
        Self::from_gauge(gauge, (q, q), (q * q) as f64, onsite)
    }

    pub fn dim(&self) -> usize {
        self.cell.0 * self.cell.1
    }

    pub fn cell(&self) -> (usize, usize) {
        self.cell
    }

    pub fn gauge(&self) -> &GaugeField {
        &self.gauge
    }

    /// Dense fiber matrix at `(s, t)`.
    pub fn fiber(&self, point: (f64, f64)) -> Array2<C> {
        let n = self.dim();
        let mut a = Array2::<C>::zeros((n, n));
        for (r, &d) in self.onsite.iter().enumerate() {
            a[(r, r)] = C::new(d, 0.0);
        }
        for l in &self.links {
            let frac = (point.0 * l.shift.0 as f64 + point.1 * l.shift.1 as f64).rem_euclid(1.0);
            let chi = if frac == 0.0 { C::new(1.0, 0.0) } else { C::from_polar(1.0, 2.0 * std::f64::consts::PI * frac) };
            let val = -self.hop * l.phase * chi;
            if l.r == l.c {
                a[(l.r, l.r)].re += 2.0 * val.re;
            } else {
                a[(l.r, l.c)] += val;
                a[(l.c, l.r)] += val.conj();
            }
        }
        a
    }
}

/// Fiber of the magnetic Laplacian at `(s, t)` built from the links of `gauge`.
pub fn fiber_hamiltonian(lattice: &MagneticLattice, gauge: &GaugeField, point: (f64, f64)) -> Result<Array2<C>> {
    Ok(CellStencil::magnetic(lattice, gauge)?.fiber(point))
}

/// Fibers over a Bloch grid.
#[derive(Clone, Debug)]
pub struct FiberFamily {
    pub grid: BlochGrid,
    pub fibers: Vec<Array2<C>>,
    pub construction_gauge: GaugeField,
    /// Smallest `L` with `‖H(p) − H(p′)‖_F ≤ L·dist(p, p′)` over adjacent grid points.
    pub lipschitz: f64,
}

impl FiberFamily {
    pub fn build(stencil: &CellStencil, grid: BlochGrid) -> Self {
        let fibers: Vec<Array2<C>> = (0..grid.len()).into_par_iter().map(|i| stencil.fiber(grid.point(i))).collect();
        let mut lipschitz = 0.0_f64;
        for i in 0..grid.len() {
            let (a, b) = grid.coords(i);
            for (j, d) in [(grid.index(a + 1, b), 1.0 / grid.n_s as f64), (grid.index(a, b + 1), 1.0 / grid.n_t as f64)] {
                let diff: f64 = (&fibers[i] - &fibers[j]).iter().map(|z| z.norm_sqr()).sum();
                lipschitz = lipschitz.max(diff.sqrt() / d);
            }
        }
        FiberFamily { grid, fibers, construction_gauge: stencil.gauge.clone(), lipschitz }
    }
}

/// Per-fiber eigendecompositions with bands grouped by fiber-uniform gaps.
#[derive(Clone, Debug)]
pub struct BandData {
    pub grid: BlochGrid,
    /// Ascending energies at each grid point.
    pub energies: Vec<Vec<f64>>,
    /// Orthonormal eigenvectors as columns, matching `energies`.
    pub frames: Vec<Array2<C>>,
    pub band_groups: Vec<Range<usize>>,
    /// Union of the fiber Gershgorin enclosures.
    pub enclosure: (f64, f64),
    pub threshold: f64,
    pub max_residual: f64,
    pub lipschitz: f64,
}

fn gershgorin(a: &Array2<C>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in 0..a.nrows() {
        let rad: f64 = (0..a.ncols()).filter(|&c| c != r).map(|c| a[(r, c)].norm()).sum();
        lo = lo.min(a[(r, r)].re - rad);
        hi = hi.max(a[(r, r)].re + rad);
    }
    (lo, hi)
}

/// Default band-grouping threshold as a fraction of the enclosure width.
pub const GROUP_THRESHOLD: f64 = 1e-3;

impl BandData {
    /// Diagonalizes every fiber. Bands `i` and `i + 1` fall into different groups
    /// when `min E_{i+1} − max E_i ≥ threshold` over the grid; the default
    /// threshold is `1e−3` times the enclosure width.
    pub fn from_family(family: &FiberFamily, threshold: Option<f64>) -> Result<Self> {
        let decomposed: Vec<Result<(Vec<f64>, Array2<C>, f64)>> = family
            .fibers
            .par_iter()
            .map(|f| {
                let (w, v) = dense::eigh(f)?;
                let norm = (0..f.nrows()).map(|r| f.row(r).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
                let av = f.dot(&v);
                let mut worst = 0.0_f64;
                for (c, &e) in w.iter().enumerate() {
                    let r: f64 = av.column(c).iter().zip(v.column(c).iter()).map(|(x, y)| (x - y * e).norm_sqr()).sum();
                    worst = worst.max(r.sqrt());
                }
                let ratio = worst / norm.max(f64::MIN_POSITIVE);
                if ratio > 1e-10 {
                    return Err(Error::Lapack(format!("fiber residual {ratio:e}·‖fiber‖ exceeds 1e-10")));
                }
                Ok((w, v, ratio))
            })
            .collect();
        let mut energies = Vec::with_capacity(decomposed.len());
        let mut frames = Vec::with_capacity(decomposed.len());
        let mut max_residual = 0.0_f64;
        for d in decomposed {
            let (w, v, r) = d?;
            energies.push(w);
            frames.push(v);
            max_residual = max_residual.max(r);
        }
        let enclosure = family.fibers.iter().map(gershgorin).fold((f64::INFINITY, f64::NEG_INFINITY), |acc, g| {
            (acc.0.min(g.0), acc.1.max(g.1))
        });
        let threshold = threshold.unwrap_or(GROUP_THRESHOLD * (enclosure.1 - enclosure.0));
        let mut data = BandData {
            grid: family.grid,
            energies,
            frames,
            band_groups: Vec::new(),
            enclosure,
            threshold,
            max_residual,
            lipschitz: family.lipschitz,
        };
        let mut start = 0;
        for (i, lower, upper) in data.uniform_gaps() {
            if upper - lower >= threshold {
                data.band_groups.push(start..i + 1);
                start = i + 1;
            }
        }
        data.band_groups.push(start..data.bands());
        Ok(data)
    }

    pub fn bands(&self) -> usize {
        self.energies.first().map_or(0, Vec::len)
    }

    /// `(i, max_p E_i(p), min_p E_{i+1}(p))` for every pair of consecutive bands.
    pub fn uniform_gaps(&self) -> Vec<(usize, f64, f64)> {
        (0..self.bands().saturating_sub(1))
            .map(|i| {
                let top = self.energies.iter().map(|e| e[i]).fold(f64::NEG_INFINITY, f64::max);
                let bottom = self.energies.iter().map(|e| e[i + 1]).fold(f64::INFINITY, f64::min);
                (i, top, bottom)
            })
            .collect()
    }

    /// `(min, max)` of band `i` over the grid.
    pub fn band_range(&self, i: usize) -> (f64, f64) {
        self.energies.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, e| (acc.0.min(e[i]), acc.1.max(e[i])))
    }

    /// The lowest band group, which must be separated from the bands above it.
    pub fn lowest_group(&self) -> Result<Range<usize>> {
        if self.band_groups.len() < 2 {
            return Err(Error::NoUniformGap);
        }
        Ok(self.band_groups[0].clone())
    }

    /// Accepts `range` when it is a nonempty union of consecutive band groups.
    pub fn require_group(&self, range: &Range<usize>) -> Result<()> {
        let is_edge = |x: usize| x == 0 || self.band_groups.iter().any(|g| g.end == x);
        if range.start >= range.end || range.end > self.bands() || !is_edge(range.start) || !is_edge(range.end) {
            return Err(Error::NoUniformGap);
        }
        Ok(())
    }

    /// Band index range of the energies inside `(lower, upper)`, which must be
    /// the same at every grid point.
    pub fn interval_bands(&self, lower: f64, upper: f64) -> Result<Range<usize>> {
        let mut starts = (usize::MAX, 0);
        let mut counts = (usize::MAX, 0);
        for e in &self.energies {
            let below = e.iter().filter(|&&x| x <= lower).count();
            let inside = e.iter().filter(|&&x| lower < x && x < upper).count();
            starts = (starts.0.min(below), starts.1.max(below));
            counts = (counts.0.min(inside), counts.1.max(inside));
        }
        if counts.0 != counts.1 {
            return Err(Error::NonConstantRank { min: counts.0, max: counts.1 });
        }
        if counts.0 > 0 && starts.0 != starts.1 {
            return Err(Error::NonConstantRank { min: starts.0, max: starts.1 });
        }
        Ok(starts.0..starts.0 + counts.0)
    }

    /// CSV rows `s,t,band_index,energy`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "s,t,band_index,energy")?;
        for (p, e) in self.energies.iter().enumerate() {
            let (s, t) = self.grid.point(p);
            for (i, x) in e.iter().enumerate() {
                writeln!(out, "{s},{t},{i},{x:.15e}")?;
            }
        }
        Ok(())
    }
}

/// Band structure of the magnetic Laplacian.
pub fn band_structure(lattice: &MagneticLattice, gauge: &GaugeField, grid: BlochGrid) -> Result<BandData> {
    let stencil = CellStencil::magnetic(lattice, gauge)?;
    BandData::from_family(&FiberFamily::build(&stencil, grid), None)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::model::{assemble_bulk, build_gauge, GaugeKind, Geometry};

    fn torus(k: u32, q: u32, cx: usize, cy: usize) -> MagneticLattice {
        MagneticLattice::new(k, q, cx, cy, Geometry::Torus).unwrap()
    }

    #[test]
    fn free_scalar_fiber_is_the_laplacian_symbol() {
        let lat = torus(0, 1, 1, 1);
        let g = build_gauge(&lat, GaugeKind::Landau).unwrap();
        for &(s, t) in &[(0.0, 0.0), (0.25, 0.5), (0.1, 0.7)] {
            let f = fiber_hamiltonian(&lat, &g, (s, t)).unwrap();
            let symbol = 2.0 - 2.0 * (2.0 * PI * s).cos() + 2.0 - 2.0 * (2.0 * PI * t).cos();
            assert_eq!(f.dim(), (1, 1));
            assert!((f[(0, 0)].re - symbol).abs() < 1e-14);
            assert_eq!(f[(0, 0)].im, 0.0);
        }
    }

    #[test]
    fn fiber_is_periodic_and_hermitian() {
        let lat = torus(1, 4, 2, 2);
        for kind in [GaugeKind::Landau, GaugeKind::Symmetric] {
            let g = build_gauge(&lat, kind).unwrap();
            let a = fiber_hamiltonian(&lat, &g, (0.0, 0.3)).unwrap();
            let b = fiber_hamiltonian(&lat, &g, (1.0, 0.3)).unwrap();
            assert_eq!(a, b);
            let herm = a.iter().zip(a.t().iter()).map(|(x, y)| (x - y.conj()).norm()).fold(0.0, f64::max);
            assert_eq!(herm, 0.0);
        }
    }

    #[test]
    fn one_cell_window_gives_the_same_fiber_as_a_larger_one() {
        let big = torus(1, 4, 3, 2);
        let small = torus(1, 4, 1, 1);
        let gb = build_gauge(&big, GaugeKind::Symmetric).unwrap();
        let gs = GaugeField::build(GaugeKind::Symmetric, small.flux(), small.window(), (0.3, 0.8)).unwrap();
        let a = fiber_hamiltonian(&big, &gb, (0.2, 0.45)).unwrap();
        let b = fiber_hamiltonian(&small, &gs, (0.2, 0.45)).unwrap();
        let d = (&a - &b).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn fibers_reassemble_the_torus_spectrum() {
        let (n_s, n_t) = (4, 4);
        let lat = torus(1, 4, n_s, n_t);
        let g = build_gauge(&lat, GaugeKind::Landau).unwrap();
        let bulk = assemble_bulk(&lat, &g).unwrap();
        let mut direct = dense::eigvalsh(&bulk.to_dense()).unwrap();
        let bands = band_structure(&lat, &g, BlochGrid::new(n_s, n_t).unwrap()).unwrap();
        let mut folded: Vec<f64> = bands.energies.concat();
        direct.sort_by(f64::total_cmp);
        folded.sort_by(f64::total_cmp);
        assert_eq!(direct.len(), folded.len());
        let worst = direct.iter().zip(&folded).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn lowest_group_holds_two_bands_for_k1() {
        let lat = torus(1, 8, 1, 1);
        let g = build_gauge(&lat, GaugeKind::Landau).unwrap();
        let bands = band_structure(&lat, &g, BlochGrid::square(12).unwrap()).unwrap();
        assert_eq!(bands.lowest_group().unwrap(), 0..2);
        assert!(bands.max_residual <= 1e-10);
        for e in &bands.energies {
            assert!(e[0] >= bands.enclosure.0 && *e.last().unwrap() <= bands.enclosure.1);
        }
    }

    #[test]
    fn lowest_group_holds_four_bands_for_k2() {
        let lat = torus(2, 8, 1, 1);
        let g = build_gauge(&lat, GaugeKind::Landau).unwrap();
        let bands = band_structure(&lat, &g, BlochGrid::square(8).unwrap()).unwrap();
        assert_eq!(bands.lowest_group().unwrap(), 0..4);
    }

    #[test]
    fn small_grids_are_rejected() {
        assert!(BlochGrid::new(3, 8).is_err());
    }
}
