use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::lattice::{Dir, Site, Window};
use crate::error::{Error, Result};

/// Declarative description of a region `Z` of the plane (continuum units).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeDescriptor {
    /// Every site.
    All,
    /// `y ≤ c`.
    HalfPlane { c: f64 },
    /// `y ≤ f(x)` with `f` piecewise linear through `samples` taken at
    /// `x = period·l/len`, extended periodically.
    Graph { samples: Vec<f64>, period: f64 },
    /// `y ≤ c` together with open balls of `radius` centered at `(n, center_y)`
    /// for every integer `n`.
    Decorated { c: f64, radius: f64, center_y: f64 },
    /// Closed disk.
    Disk { center: (f64, f64), radius: f64 },
    /// Explicit plane lattice sites.
    Sites { sites: Vec<Site> },
}

impl ShapeDescriptor {
    /// Periodic graph function, linearly interpolated.
    pub fn graph_value(samples: &[f64], period: f64, x: f64) -> f64 {
        let n = samples.len();
        let u = (x / period).rem_euclid(1.0) * n as f64;
        let l = (u.floor() as usize).min(n - 1);
        let frac = u - l as f64;
        samples[l] * (1.0 - frac) + samples[(l + 1) % n] * frac
    }

    /// Horizontal period in continuum units, if the shape is x-periodic.
    pub fn x_period(&self) -> Option<f64> {
        match self {
            ShapeDescriptor::All | ShapeDescriptor::HalfPlane { .. } => Some(1.0),
            ShapeDescriptor::Decorated { .. } => Some(1.0),
            ShapeDescriptor::Graph { period, .. } => Some(*period),
            _ => None,
        }
    }

    /// Membership of a continuum point. `None` for explicit site lists.
    pub fn contains(&self, x: f64, y: f64) -> Option<bool> {
        Some(match self {
            ShapeDescriptor::All => true,
            ShapeDescriptor::HalfPlane { c } => y <= *c,
            ShapeDescriptor::Graph { samples, period } => y <= Self::graph_value(samples, *period, x),
            ShapeDescriptor::Decorated { c, radius, center_y } => {
                if y <= *c {
                    true
                } else {
                    let dx = x - x.round();
                    let dy = y - center_y;
                    dx * dx + dy * dy < radius * radius
                }
            }
            ShapeDescriptor::Disk { center, radius } => {
                let (dx, dy) = (x - center.0, y - center.1);
                dx * dx + dy * dy <= radius * radius
            }
            ShapeDescriptor::Sites { .. } => return None,
        })
    }

    fn validate(&self) -> Result<()> {
        match self {
            ShapeDescriptor::Graph { samples, period } => {
                if samples.is_empty() || !(*period > 0.0) {
                    return Err(Error::InvalidArgument("graph shape needs samples and a positive period".into()));
                }
            }
            ShapeDescriptor::Decorated { radius, .. } | ShapeDescriptor::Disk { radius, .. } => {
                if !(*radius >= 0.0) {
                    return Err(Error::InvalidArgument("radius must be nonnegative".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Membership of lattice sites in a region `Z`, with the graph distance of
/// every member to the complement.
///
/// Sites just beyond an open (non-periodic) side of the window count as
/// outside `Z`, matching the Dirichlet closure of the window itself.
#[derive(Clone, Debug)]
pub struct RegionMask {
    window: Window,
    h: f64,
    member: Vec<bool>,
    hops_to_complement: Vec<usize>,
    descriptor: ShapeDescriptor,
}

impl RegionMask {
    pub fn from_descriptor(window: Window, h: f64, descriptor: ShapeDescriptor) -> Result<Self> {
        descriptor.validate()?;
        let member: Vec<bool> = match &descriptor {
            ShapeDescriptor::Sites { sites } => {
                let set: HashSet<Site> = sites.iter().copied().collect();
                (0..window.len()).map(|v| set.contains(&window.plane(v))).collect()
            }
            d => (0..window.len())
                .map(|v| {
                    let (i, j) = window.plane(v);
                    d.contains(i as f64 * h, j as f64 * h).expect("continuum descriptor")
                })
                .collect(),
        };
        Ok(Self::from_members(window, h, member, descriptor))
    }

    pub fn all(window: Window, h: f64) -> Self {
        Self::from_members(window, h, vec![true; window.len()], ShapeDescriptor::All)
    }

    pub fn from_members(window: Window, h: f64, member: Vec<bool>, descriptor: ShapeDescriptor) -> Self {
        assert_eq!(member.len(), window.len());
        let hops_to_complement = hops_to_complement(&window, &member);
        RegionMask { window, h, member, hops_to_complement, descriptor }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn descriptor(&self) -> &ShapeDescriptor {
        &self.descriptor
    }
    pub fn members(&self) -> &[bool] {
        &self.member
    }
    pub fn contains(&self, index: usize) -> bool {
        self.member[index]
    }
    pub fn count(&self) -> usize {
        self.member.iter().filter(|&&m| m).count()
    }
    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Lattice steps from a member to the nearest non-member (0 outside `Z`).
    pub fn hops(&self, index: usize) -> usize {
        self.hops_to_complement[index]
    }

    /// Continuum distance to the complement: zero on sites outside `Z` and on
    /// members with a neighbor outside `Z`.
    pub fn boundary_distance(&self, index: usize) -> f64 {
        let d = self.hops_to_complement[index];
        if d == 0 {
            0.0
        } else {
            (d - 1) as f64 * self.h
        }
    }

    /// Window indices of members, ascending.
    pub fn member_indices(&self) -> Vec<usize> {
        (0..self.window.len()).filter(|&v| self.member[v]).collect()
    }

    /// Union with another membership vector on the same window.
    pub fn union(&self, other: &[bool], descriptor: ShapeDescriptor) -> Self {
        let member = self.member.iter().zip(other).map(|(a, b)| *a || *b).collect();
        Self::from_members(self.window, self.h, member, descriptor)
    }

    /// True if some member touches an open side of the window.
    pub fn touches_open_side(&self) -> bool {
        let w = &self.window;
        (0..w.len()).any(|v| self.member[v] && Dir::ALL.iter().any(|&d| w.step(v, d).is_none()))
    }
}

fn hops_to_complement(window: &Window, member: &[bool]) -> Vec<usize> {
    let n = window.len();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for v in 0..n {
        if !member[v] {
            dist[v] = 0;
            queue.push_back(v);
        } else if Dir::ALL.iter().any(|&d| window.step(v, d).is_none()) {
            dist[v] = 1;
            queue.push_back(v);
        }
    }
    // members seeded at distance 1 are enqueued after all distance-0 sites,
    // so plain BFS order is preserved
    let mut ordered: Vec<usize> = queue.drain(..).collect();
    ordered.sort_by_key(|&v| dist[v]);
    queue.extend(ordered);
    while let Some(v) = queue.pop_front() {
        let dv = dist[v];
        for d in Dir::ALL {
            if let Some(s) = window.step(v, d) {
                if dist[s.index] == usize::MAX {
                    dist[s.index] = dv + 1;
                    queue.push_back(s.index);
                }
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip_window() -> Window {
        Window { nx: 8, ny: 12, periodic_x: true, periodic_y: false, origin: (0, -8) }
    }

    #[test]
    fn half_plane_matches_inequality_on_sites() {
        let w = strip_window();
        let h = 0.25;
        let m = RegionMask::from_descriptor(w, h, ShapeDescriptor::HalfPlane { c: 0.3 }).unwrap();
        for v in 0..w.len() {
            let (_, j) = w.plane(v);
            assert_eq!(m.contains(v), j as f64 * h <= 0.3);
        }
    }

    #[test]
    fn boundary_distance_zero_iff_adjacent_to_complement() {
        let w = strip_window();
        let m = RegionMask::from_descriptor(w, 0.25, ShapeDescriptor::HalfPlane { c: 0.0 }).unwrap();
        for v in 0..w.len() {
            let touches = !m.contains(v)
                || Dir::ALL.iter().any(|&d| match w.step(v, d) {
                    None => true,
                    Some(s) => !m.contains(s.index),
                });
            assert_eq!(m.boundary_distance(v) == 0.0, touches, "site {v}");
        }
        // row j = -4 is four rows below the top member row 0 and four above the open bottom side
        let v = w.locate((0, -4)).unwrap();
        assert_eq!(m.hops(v), 5);
        assert!((m.boundary_distance(v) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decorated_half_plane_adds_balls() {
        let w = Window { nx: 8, ny: 24, periodic_x: true, periodic_y: false, origin: (0, -8) };
        let h = 0.125;
        let plain = RegionMask::from_descriptor(w, h, ShapeDescriptor::HalfPlane { c: 0.0 }).unwrap();
        let deco = RegionMask::from_descriptor(
            w,
            h,
            ShapeDescriptor::Decorated { c: 0.0, radius: 1.0 / 3.0, center_y: 1.0 },
        )
        .unwrap();
        assert!(deco.count() > plain.count());
        assert!(deco.contains(w.locate((0, 8)).unwrap()));
        assert!(!deco.contains(w.locate((4, 8)).unwrap()));
    }

    #[test]
    fn explicit_sites() {
        let w = Window { nx: 4, ny: 4, periodic_x: false, periodic_y: false, origin: (0, 0) };
        let m = RegionMask::from_descriptor(w, 0.5, ShapeDescriptor::Sites { sites: vec![(1, 1), (2, 1)] }).unwrap();
        assert_eq!(m.count(), 2);
        assert_eq!(m.member_indices(), vec![5, 6]);
    }
}
