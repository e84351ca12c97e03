//! Peierls link phases for a constant magnetic field.
//!
//! Phases are built from exact rational arguments. A link `v → u` carries
//! `exp(−i∫_v^u A)` for the vector potential of the chosen gauge; when a link
//! leaves a periodic window the value on the far side is pulled back with the
//! magnetic translation `ψ(u + (M, N)) = τ(M, N; u)·ψ(u)` and an optional
//! Bloch twist `exp(2πi·s)` per wrapped period, so that twisted sections obey
//! `ψ(u + m) = e^{2πi·s·m}·τ(m; u)·ψ(u)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lattice::{Dir, Flux, MagneticLattice, Site, Window};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeKind {
    /// `A = πΦ/h²·(x dy − y dx)`, rotation invariant.
    Symmetric,
    /// `A = 2πΦ/h²·x dy`: x-links carry phase 1.
    Landau,
}

impl GaugeKind {
    fn straight(self, flux: Flux, from: Site, dir: Dir) -> Complex64 {
        let (i, j) = from;
        match (self, dir) {
            (GaugeKind::Landau, Dir::PlusX) => Complex64::new(1.0, 0.0),
            (GaugeKind::Landau, Dir::PlusY) => flux.phase(-i),
            (GaugeKind::Symmetric, Dir::PlusX) => flux.half_phase(j),
            (GaugeKind::Symmetric, Dir::PlusY) => flux.half_phase(-i),
            _ => unreachable!("links are stored in the positive directions"),
        }
    }

    /// Magnetic translation factor `τ(M, N; u)` relating `ψ(u + (M, N))` to `ψ(u)`.
    pub fn transition(self, flux: Flux, shift: (i64, i64), at: Site) -> Complex64 {
        let (m, n) = shift;
        let (i, j) = at;
        match self {
            GaugeKind::Landau => flux.phase(m * j),
            GaugeKind::Symmetric => flux.half_phase(m * j - n * i),
        }
    }
}

/// U(1) phases on the directed edges of a lattice window.
#[derive(Clone, Debug)]
pub struct GaugeField {
    kind: GaugeKind,
    flux: Flux,
    window: Window,
    twist: (f64, f64),
    x_links: Vec<Option<Complex64>>,
    y_links: Vec<Option<Complex64>>,
}

/// Gauge field on the lattice's own window without Bloch twist.
pub fn build_gauge(lattice: &MagneticLattice, kind: GaugeKind) -> Result<GaugeField> {
    GaugeField::build(kind, lattice.flux(), lattice.window(), (0.0, 0.0))
}

impl GaugeField {
    /// `twist = (s, t)` multiplies links wrapping the x (y) period by `exp(2πi·s)` (`exp(2πi·t)`).
    pub fn build(kind: GaugeKind, flux: Flux, window: Window, twist: (f64, f64)) -> Result<Self> {
        if window.is_empty() {
            return Err(Error::InvalidLattice("empty window".into()));
        }
        if window.periodic_x && window.periodic_y {
            let total = flux.num as i128 * window.nx as i128 * window.ny as i128;
            if total % flux.den as i128 != 0 {
                return Err(Error::InvalidLattice(format!(
                    "total flux {flux}·{}·{} through the torus is not an integer",
                    window.nx, window.ny
                )));
            }
        }
        let n = window.len();
        let twist_x = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * twist.0);
        let twist_y = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * twist.1);
        let mut x_links = vec![None; n];
        let mut y_links = vec![None; n];
        for v in 0..n {
            let pv = window.plane(v);
            for (dir, slot) in [(Dir::PlusX, &mut x_links[v]), (Dir::PlusY, &mut y_links[v])] {
                let Some(step) = window.step(v, dir) else { continue };
                let mut phase = kind.straight(flux, pv, dir);
                if step.wrap != (0, 0) {
                    let shift = (step.wrap.0 * window.nx as i64, step.wrap.1 * window.ny as i64);
                    phase *= kind.transition(flux, shift, window.plane(step.index));
                    if step.wrap.0 != 0 {
                        phase *= twist_x.powi(step.wrap.0 as i32);
                    }
                    if step.wrap.1 != 0 {
                        phase *= twist_y.powi(step.wrap.1 as i32);
                    }
                }
                *slot = Some(phase);
            }
        }
        Ok(GaugeField { kind, flux, window, twist, x_links, y_links })
    }

    pub fn kind(&self) -> GaugeKind {
        self.kind
    }
    pub fn flux(&self) -> Flux {
        self.flux
    }
    pub fn window(&self) -> &Window {
        &self.window
    }
    pub fn twist(&self) -> (f64, f64) {
        self.twist
    }

    /// Phase of the directed link leaving window site `index` in direction `dir`.
    /// The reversed link carries the complex conjugate.
    pub fn link_phase(&self, index: usize, dir: Dir) -> Option<Complex64> {
        match dir {
            Dir::PlusX => self.x_links[index],
            Dir::PlusY => self.y_links[index],
            Dir::MinusX => {
                let s = self.window.step(index, Dir::MinusX)?;
                self.x_links[s.index].map(|z| z.conj())
            }
            Dir::MinusY => {
                let s = self.window.step(index, Dir::MinusY)?;
                self.y_links[s.index].map(|z| z.conj())
            }
        }
    }

    /// Overwrite one positive-direction link (used to build non-conforming fields).
    pub fn set_link(&mut self, index: usize, dir: Dir, phase: Complex64) -> Result<()> {
        let slot = match dir {
            Dir::PlusX => &mut self.x_links[index],
            Dir::PlusY => &mut self.y_links[index],
            _ => return Err(Error::InvalidArgument("only +x and +y links are stored".into())),
        };
        if slot.is_none() {
            return Err(Error::InvalidArgument("link leaves the window".into()));
        }
        *slot = Some(phase);
        Ok(())
    }

    /// Counterclockwise products of link phases for every complete plaquette,
    /// keyed by the window index of the lower-left corner.
    pub fn plaquette_products(&self) -> Vec<(usize, Complex64)> {
        let w = &self.window;
        let mut out = Vec::with_capacity(w.len());
        for v in 0..w.len() {
            let (Some(sx), Some(sy)) = (w.step(v, Dir::PlusX), w.step(v, Dir::PlusY)) else { continue };
            let (Some(a), Some(b), Some(c), Some(d)) = (
                self.x_links[v],
                self.y_links[sx.index],
                self.x_links[sy.index],
                self.y_links[v],
            ) else {
                continue;
            };
            out.push((v, a * b * c.conj() * d.conj()));
        }
        out
    }

    /// Largest deviation of any plaquette product from `exp(−2πiΦ)`.
    pub fn max_plaquette_error(&self) -> f64 {
        let target = self.flux.phase(-1);
        self.plaquette_products()
            .iter()
            .map(|(_, z)| (z - target).norm())
            .fold(0.0, f64::max)
    }

    /// Checks that links one cell apart differ exactly by the magnetic translation
    /// factors, `U(v+m → u+m) = U(v → u)·τ(m; v)/τ(m; u)`, for `m = (cell, 0), (0, cell)`.
    pub fn check_cell_periodic(&self, cell: usize) -> Result<()> {
        self.check_periodic(cell, cell)
    }

    /// Rectangular version of [`GaugeField::check_cell_periodic`] with an
    /// `cx × cy` cell.
    pub fn check_periodic(&self, cx: usize, cy: usize) -> Result<()> {
        let w = &self.window;
        if cx == 0 || cy == 0 || w.nx % cx != 0 || w.ny % cy != 0 {
            return Err(Error::GaugeNotCellPeriodic(format!(
                "window {}×{} is not a whole number of {cx}×{cy} cells",
                w.nx, w.ny
            )));
        }
        for v in 0..w.len() {
            let (i, j) = w.coords(v);
            for (di, dj) in [(cx as i64, 0), (0, cy as i64)] {
                let (ti, tj) = (i as i64 + di, j as i64 + dj);
                if ti >= w.nx as i64 || tj >= w.ny as i64 {
                    continue;
                }
                let tv = w.index(ti as usize, tj as usize);
                for dir in [Dir::PlusX, Dir::PlusY] {
                    let (Some(s), Some(st)) = (w.step(v, dir), w.step(tv, dir)) else { continue };
                    if s.wrap != (0, 0) || st.wrap != (0, 0) {
                        continue;
                    }
                    let (Some(u0), Some(u1)) = (self.link_phase(v, dir), self.link_phase(tv, dir)) else {
                        continue;
                    };
                    let tau_v = self.kind.transition(self.flux, (di, dj), w.plane(v));
                    let tau_u = self.kind.transition(self.flux, (di, dj), w.plane(s.index));
                    let expected = u0 * tau_v / tau_u;
                    if (u1 - expected).norm() > 1e-12 {
                        return Err(Error::GaugeNotCellPeriodic(format!(
                            "link at window site {v} direction {dir:?} breaks the magnetic translation by ({di}, {dj})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::lattice::Geometry;

    fn lattice(k: u32, q: u32, cx: usize, cy: usize, g: Geometry) -> MagneticLattice {
        MagneticLattice::new(k, q, cx, cy, g).unwrap()
    }

    #[test]
    fn plaquette_flux_is_one_eighth_for_k1_h_quarter() {
        let lat = lattice(1, 4, 2, 2, Geometry::Torus);
        assert_eq!(lat.flux().value(), 0.125);
        for kind in [GaugeKind::Landau, GaugeKind::Symmetric] {
            let g = build_gauge(&lat, kind).unwrap();
            assert_eq!(g.plaquette_products().len(), 64);
            assert!(g.max_plaquette_error() < 1e-12, "{kind:?}");
        }
    }

    #[test]
    fn landau_plaquette_matches_symbolic_product() {
        // x-links 1, y-links exp(−2πi·2k·h·x): the product around (x, y) is
        // exp(−2πi·2kh(x+h))·exp(+2πi·2kh·x) = exp(−2πi/8) for k = 1, h = 1/4.
        let lat = lattice(1, 4, 1, 1, Geometry::Masked);
        let g = build_gauge(&lat, GaugeKind::Landau).unwrap();
        let target = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI / 8.0);
        for (_, z) in g.plaquette_products() {
            assert!((z - target).norm() < 1e-14);
        }
        let w = lat.window();
        let v = w.index(3, 1);
        let expected = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * 2.0 * 0.25 * 0.75);
        assert!((g.link_phase(v, Dir::PlusY).unwrap() - expected).norm() < 1e-14);
        assert_eq!(g.link_phase(w.index(2, 1), Dir::PlusX).unwrap(), Complex64::new(1.0, 0.0));
        assert!(g.link_phase(v, Dir::PlusX).is_none());
    }

    #[test]
    fn integer_flux_gives_trivial_plaquettes() {
        let lat = lattice(2, 2, 3, 2, Geometry::Torus);
        assert_eq!(lat.flux().value(), 1.0);
        let g = build_gauge(&lat, GaugeKind::Landau).unwrap();
        for (_, z) in g.plaquette_products() {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn reversed_links_are_conjugate() {
        let lat = lattice(1, 3, 2, 2, Geometry::Torus);
        let g = build_gauge(&lat, GaugeKind::Symmetric).unwrap();
        let w = lat.window();
        for v in 0..w.len() {
            for (fwd, back) in [(Dir::PlusX, Dir::MinusX), (Dir::PlusY, Dir::MinusY)] {
                let u = w.step(v, fwd).unwrap().index;
                assert_eq!(g.link_phase(u, back).unwrap(), g.link_phase(v, fwd).unwrap().conj());
            }
        }
    }

    #[test]
    fn torus_seams_carry_flux() {
        for kind in [GaugeKind::Landau, GaugeKind::Symmetric] {
            let lat = lattice(1, 3, 3, 2, Geometry::Torus);
            let g = build_gauge(&lat, kind).unwrap();
            assert_eq!(g.plaquette_products().len(), lat.window().len());
            assert!(g.max_plaquette_error() < 1e-12);
            // twisted closure keeps every plaquette
            let tw = GaugeField::build(kind, lat.flux(), lat.window(), (0.3, -0.7)).unwrap();
            assert!(tw.max_plaquette_error() < 1e-12);
        }
    }

    #[test]
    fn fractional_total_flux_is_rejected() {
        let flux = Flux::new(1, 8).unwrap();
        let w = Window { nx: 3, ny: 2, periodic_x: true, periodic_y: true, origin: (0, 0) };
        assert!(GaugeField::build(GaugeKind::Landau, flux, w, (0.0, 0.0)).is_err());
    }

    #[test]
    fn cell_periodicity_detects_corrupted_links() {
        let lat = lattice(1, 4, 3, 3, Geometry::Torus);
        let mut g = build_gauge(&lat, GaugeKind::Symmetric).unwrap();
        g.check_cell_periodic(4).unwrap();
        g.set_link(5, Dir::PlusY, Complex64::new(0.0, 1.0)).unwrap();
        assert!(matches!(g.check_cell_periodic(4), Err(Error::GaugeNotCellPeriodic(_))));
    }
}
