use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer lattice coordinates of a site in the plane (continuum point = h·(i, j)).
pub type Site = (i64, i64);

/// `exp(2πi·num/den)` with the argument reduced exactly in integers first.
pub fn unit_phase(num: i64, den: i64) -> Complex64 {
    debug_assert!(den > 0);
    let r = num.rem_euclid(den);
    if r == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if 2 * r == den {
        return Complex64::new(-1.0, 0.0);
    }
    if 4 * r == den {
        return Complex64::new(0.0, 1.0);
    }
    if 4 * r == 3 * den {
        return Complex64::new(0.0, -1.0);
    }
    Complex64::from_polar(1.0, 2.0 * PI * r as f64 / den as f64)
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Magnetic flux through one lattice plaquette, in flux quanta, as a reduced fraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flux {
    pub num: i64,
    pub den: i64,
}

impl Flux {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den <= 0 {
            return Err(Error::InvalidLattice(format!("flux denominator {den} must be positive")));
        }
        let g = gcd(num, den).max(1);
        Ok(Flux { num: num / g, den: den / g })
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `exp(2πi·Φ·m)` for an integer multiple `m`.
    pub fn phase(&self, m: i64) -> Complex64 {
        unit_phase(self.num * m, self.den)
    }

    /// `exp(2πi·(Φ/2)·m)`.
    pub fn half_phase(&self, m: i64) -> Complex64 {
        unit_phase(self.num * m, 2 * self.den)
    }
}

impl fmt::Display for Flux {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    /// Magnetic-periodic closure in both directions.
    Torus,
    /// Periodic in x, open in y.
    Strip,
    /// Open window in both directions, usually restricted by a mask.
    Masked,
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Geometry::Torus => "torus",
            Geometry::Strip => "strip",
            Geometry::Masked => "masked",
        };
        f.write_str(s)
    }
}

/// Discretization of the magnetic Laplacian with flux strength `k` on a square
/// lattice of spacing `h = 1/q`, over `cells_x × cells_y` unit cells.
#[derive(Clone, Debug, PartialEq)]
pub struct MagneticLattice {
    k: u32,
    q: u32,
    cells_x: usize,
    cells_y: usize,
    geometry: Geometry,
    potential: Vec<f64>,
    w_norm: f64,
}

impl MagneticLattice {
    /// Lattice with vanishing potential.
    pub fn new(k: u32, q: u32, cells_x: usize, cells_y: usize, geometry: Geometry) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidLattice("q must be at least 1".into()));
        }
        if cells_x == 0 || cells_y == 0 {
            return Err(Error::InvalidLattice("cell counts must be positive".into()));
        }
        let n = (q * q) as usize;
        Ok(MagneticLattice {
            k,
            q,
            cells_x,
            cells_y,
            geometry,
            potential: vec![0.0; n],
            w_norm: 0.0,
        })
    }

    /// Replace the potential by `q²` row-major samples over one unit cell
    /// (row index = y offset, column index = x offset).
    pub fn with_potential(mut self, samples: Vec<f64>) -> Result<Self> {
        let n = (self.q * self.q) as usize;
        if samples.len() != n {
            return Err(Error::InvalidLattice(format!(
                "potential has {} samples, expected q² = {n}",
                samples.len()
            )));
        }
        if samples.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidLattice("potential samples must be finite".into()));
        }
        self.w_norm = samples.iter().fold(0.0_f64, |m, w| m.max(w.abs()));
        self.potential = samples;
        Ok(self)
    }

    /// Add a constant to every potential sample.
    pub fn shifted_potential(&self, c: f64) -> Result<Self> {
        let samples = self.potential.iter().map(|w| w + c).collect();
        self.clone().with_potential(samples)
    }

    pub fn with_geometry(&self, geometry: Geometry) -> Self {
        let mut out = self.clone();
        out.geometry = geometry;
        out
    }

    pub fn with_cells(&self, cells_x: usize, cells_y: usize) -> Result<Self> {
        if cells_x == 0 || cells_y == 0 {
            return Err(Error::InvalidLattice("cell counts must be positive".into()));
        }
        let mut out = self.clone();
        out.cells_x = cells_x;
        out.cells_y = cells_y;
        Ok(out)
    }

    pub fn k(&self) -> u32 {
        self.k
    }
    pub fn q(&self) -> u32 {
        self.q
    }
    pub fn h(&self) -> f64 {
        1.0 / self.q as f64
    }
    pub fn cells_x(&self) -> usize {
        self.cells_x
    }
    pub fn cells_y(&self) -> usize {
        self.cells_y
    }
    pub fn cells(&self) -> usize {
        self.cells_x * self.cells_y
    }
    pub fn geometry(&self) -> Geometry {
        self.geometry
    }
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }
    pub fn w_norm(&self) -> f64 {
        self.w_norm
    }

    /// Flux per plaquette `Φ = 2k·h² = 2k/q²`.
    pub fn flux(&self) -> Flux {
        Flux::new(2 * self.k as i64, (self.q * self.q) as i64).expect("q > 0")
    }

    /// `1/√(4πk)`; infinite without a field.
    pub fn magnetic_length(&self) -> f64 {
        if self.k == 0 {
            f64::INFINITY
        } else {
            1.0 / (4.0 * PI * self.k as f64).sqrt()
        }
    }

    /// Periodically extended potential at a plane site.
    pub fn potential_at(&self, site: Site) -> f64 {
        let q = self.q as i64;
        let col = site.0.rem_euclid(q) as usize;
        let row = site.1.rem_euclid(q) as usize;
        self.potential[row * self.q as usize + col]
    }

    /// On-site stencil value `4h⁻² − 4πk + W(site)`.
    pub fn onsite(&self, site: Site) -> f64 {
        let h2 = (self.q * self.q) as f64;
        4.0 * h2 - 4.0 * PI * self.k as f64 + self.potential_at(site)
    }

    /// The implied lattice window with origin at the plane origin.
    pub fn window(&self) -> Window {
        let q = self.q as usize;
        let (px, py) = match self.geometry {
            Geometry::Torus => (true, true),
            Geometry::Strip => (true, false),
            Geometry::Masked => (false, false),
        };
        Window {
            nx: self.cells_x * q,
            ny: self.cells_y * q,
            periodic_x: px,
            periodic_y: py,
            origin: (0, 0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dir {
    PlusX,
    MinusX,
    PlusY,
    MinusY,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::MinusY, Dir::MinusX, Dir::PlusX, Dir::PlusY];
}

/// A rectangular block of lattice sites, optionally closed periodically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub nx: usize,
    pub ny: usize,
    pub periodic_x: bool,
    pub periodic_y: bool,
    /// Plane coordinates of window site (0, 0).
    pub origin: (i64, i64),
}

/// Neighbor lookup result: the window site reached and the number of
/// periods wrapped in x and y to get there.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Step {
    pub index: usize,
    pub wrap: (i64, i64),
}

impl Window {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.nx, index / self.nx)
    }

    pub fn plane(&self, index: usize) -> Site {
        let (i, j) = self.coords(index);
        (self.origin.0 + i as i64, self.origin.1 + j as i64)
    }

    /// Window index of a plane site, folding periodic directions.
    pub fn locate(&self, site: Site) -> Option<usize> {
        let mut i = site.0 - self.origin.0;
        let mut j = site.1 - self.origin.1;
        if self.periodic_x {
            i = i.rem_euclid(self.nx as i64);
        }
        if self.periodic_y {
            j = j.rem_euclid(self.ny as i64);
        }
        if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.ny as i64 {
            return None;
        }
        Some(self.index(i as usize, j as usize))
    }

    pub fn step(&self, index: usize, dir: Dir) -> Option<Step> {
        let (i, j) = self.coords(index);
        let (i, j) = (i as i64, j as i64);
        let (ni, nj) = match dir {
            Dir::PlusX => (i + 1, j),
            Dir::MinusX => (i - 1, j),
            Dir::PlusY => (i, j + 1),
            Dir::MinusY => (i, j - 1),
        };
        let (nx, ny) = (self.nx as i64, self.ny as i64);
        let (mut wi, mut wj) = (0, 0);
        let fi = if ni < 0 || ni >= nx {
            if !self.periodic_x {
                return None;
            }
            wi = ni.div_euclid(nx);
            ni.rem_euclid(nx)
        } else {
            ni
        };
        let fj = if nj < 0 || nj >= ny {
            if !self.periodic_y {
                return None;
            }
            wj = nj.div_euclid(ny);
            nj.rem_euclid(ny)
        } else {
            nj
        };
        Some(Step { index: self.index(fi as usize, fj as usize), wrap: (wi, wj) })
    }

    /// Lattice graph distance between two window sites.
    pub fn graph_distance(&self, a: usize, b: usize) -> usize {
        let (ai, aj) = self.coords(a);
        let (bi, bj) = self.coords(b);
        let mut dx = ai.abs_diff(bi);
        let mut dy = aj.abs_diff(bj);
        if self.periodic_x {
            dx = dx.min(self.nx - dx);
        }
        if self.periodic_y {
            dy = dy.min(self.ny - dy);
        }
        dx + dy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_is_reduced() {
        let lat = MagneticLattice::new(1, 4, 1, 1, Geometry::Torus).unwrap();
        assert_eq!(lat.flux(), Flux { num: 1, den: 8 });
        let lat = MagneticLattice::new(2, 2, 1, 1, Geometry::Torus).unwrap();
        assert_eq!(lat.flux(), Flux { num: 1, den: 1 });
        assert_eq!(lat.flux().phase(3), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn unit_phase_reduces_exactly() {
        assert_eq!(unit_phase(5, 4), Complex64::new(0.0, 1.0));
        assert_eq!(unit_phase(-2, 4), Complex64::new(-1.0, 0.0));
        let z = unit_phase(7, 24);
        assert!((z.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn potential_norm_is_max_abs_sample() {
        let lat = MagneticLattice::new(1, 2, 1, 1, Geometry::Torus)
            .unwrap()
            .with_potential(vec![0.5, -1.5, 0.25, 1.0])
            .unwrap();
        assert_eq!(lat.w_norm(), 1.5);
        assert_eq!(lat.potential_at((2, 2)), 0.5);
        assert_eq!(lat.potential_at((1, 0)), -1.5);
        assert_eq!(lat.potential_at((-1, -1)), 1.0);
        assert!(lat.clone().with_potential(vec![1.0]).is_err());
    }

    #[test]
    fn window_steps_wrap_only_when_periodic() {
        let w = Window { nx: 3, ny: 2, periodic_x: true, periodic_y: false, origin: (0, 0) };
        let s = w.step(w.index(2, 0), Dir::PlusX).unwrap();
        assert_eq!(s, Step { index: w.index(0, 0), wrap: (1, 0) });
        assert!(w.step(w.index(0, 1), Dir::PlusY).is_none());
        assert_eq!(w.graph_distance(w.index(0, 0), w.index(2, 1)), 2);
    }
}
