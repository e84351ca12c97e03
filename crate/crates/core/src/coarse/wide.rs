//! Wideness of a region under integer translations: every bounded `Y` can be
//! moved by some `g ∈ ℤ²` into the part of `Z` farther than `r` from the complement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::{RegionMask, ShapeDescriptor, Site};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WidenessVerdict {
    WideProved,
    CounterexampleFound,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct WidenessOptions {
    /// Diameter bound for the sampled sets `Y`, continuum units.
    pub diameter: f64,
    pub samples: usize,
    pub translation_budget: usize,
    pub spot_checks: usize,
    pub points_per_set: usize,
    pub seed: u64,
}

impl Default for WidenessOptions {
    fn default() -> Self {
        WidenessOptions { diameter: 4.0, samples: 50, translation_budget: 10_000, spot_checks: 100, points_per_set: 16, seed: 0 }
    }
}

/// Analytic translation rule `g(Y) = (0, −n)` with
/// `n = max(0, ⌊top(Y) − floor + r⌋ + 1)`: every translated point lies below
/// `floor − r`, and `floor` is a lower bound for the boundary height.
#[derive(Clone, Debug, Serialize)]
pub struct TranslationRule {
    pub floor: f64,
    pub rule: String,
}

impl TranslationRule {
    pub fn apply(&self, top: f64, r: f64) -> (i64, i64) {
        let n = ((top - self.floor + r).floor() as i64 + 1).max(0);
        (0, -n)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    /// Plane sites of `Y`.
    pub sites: Vec<Site>,
    pub translations_tried: usize,
    /// All translations keeping `Y` in the window were tried.
    pub exhaustive: bool,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Rule(TranslationRule),
    Failure(Counterexample),
    None { note: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct WidenessCertificate {
    pub descriptor: ShapeDescriptor,
    pub entourage_radius: f64,
    pub verdict: WidenessVerdict,
    pub witness: Witness,
    pub spot_checks_passed: usize,
    pub spot_checks: usize,
    /// Sampled sets placed by the bounded search (masks only).
    pub placed: usize,
    pub sampled: usize,
}

fn rule_for(d: &ShapeDescriptor) -> Option<TranslationRule> {
    match d {
        ShapeDescriptor::HalfPlane { c } | ShapeDescriptor::Decorated { c, .. } => {
            Some(TranslationRule { floor: *c, rule: format!("vertical: below y = {c} − r") })
        }
        ShapeDescriptor::Graph { samples, .. } => {
            // piecewise linear, so the minimum is attained at a sample
            let f_min = samples.iter().copied().fold(f64::INFINITY, f64::min);
            Some(TranslationRule { floor: f_min, rule: format!("vertical: below min f = {f_min} minus r") })
        }
        _ => None,
    }
}

/// Random continuum set of diameter at most `d` around `center`.
fn random_set(rng: &mut ChaCha8Rng, center: (f64, f64), d: f64, n: usize) -> Vec<(f64, f64)> {
    let rad = 0.5 * d;
    let th: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    let mut pts = vec![(center.0 + rad * th.cos(), center.1 + rad * th.sin()), (center.0 - rad * th.cos(), center.1 - rad * th.sin())];
    while pts.len() < n.max(2) {
        let (u, v): (f64, f64) = (rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0);
        if u * u + v * v <= 1.0 {
            pts.push((center.0 + rad * u, center.1 + rad * v));
        }
    }
    pts
}

/// The closed disk of `radius` about `p` lies in the region, sampled on its
/// boundary circle and on concentric rings inside it.
fn disk_inside(d: &ShapeDescriptor, p: (f64, f64), radius: f64) -> bool {
    if d.contains(p.0, p.1) != Some(true) {
        return false;
    }
    if radius == 0.0 {
        return true;
    }
    let ring = |rho: f64, n: usize| {
        (0..n).all(|i| {
            let th = std::f64::consts::TAU * i as f64 / n as f64;
            d.contains(p.0 + rho * th.cos(), p.1 + rho * th.sin()) == Some(true)
        })
    };
    ring(radius, 720) && (1..8).all(|i| ring(radius * i as f64 / 8.0, 64))
}

fn window_box(mask: &RegionMask) -> ((f64, f64), (f64, f64)) {
    let w = mask.window();
    let h = mask.h();
    let lo = (w.origin.0 as f64 * h, w.origin.1 as f64 * h);
    (lo, (lo.0 + (w.nx - 1) as f64 * h, lo.1 + (w.ny - 1) as f64 * h))
}

/// Verdict for `Z` at entourage radius `r`. Descriptor-backed half-planes,
/// graph regions and decorated half-planes get the vertical rule, checked on
/// random sets; other regions get a bounded translation search.
pub fn wideness_check(mask: &RegionMask, r: f64, opts: &WidenessOptions) -> WidenessCertificate {
    let descriptor = mask.descriptor().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (lo, hi) = window_box(mask);
    let base = WidenessCertificate {
        descriptor: descriptor.clone(),
        entourage_radius: r,
        verdict: WidenessVerdict::Inconclusive,
        witness: Witness::None { note: String::new() },
        spot_checks_passed: 0,
        spot_checks: 0,
        placed: 0,
        sampled: 0,
    };
    if descriptor == ShapeDescriptor::All {
        return WidenessCertificate {
            verdict: WidenessVerdict::WideProved,
            witness: Witness::Rule(TranslationRule { floor: f64::INFINITY, rule: "identity: the complement is empty".into() }),
            ..base
        };
    }
    if let Some(rule) = rule_for(&descriptor) {
        let mut passed = 0;
        for _ in 0..opts.spot_checks {
            let c = (lo.0 + rng.gen::<f64>() * (hi.0 - lo.0), lo.1 + rng.gen::<f64>() * (hi.1 - lo.1));
            let d = rng.gen::<f64>() * opts.diameter;
            let y = random_set(&mut rng, c, d, opts.points_per_set);
            let top = y.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            let g = rule.apply(top, r);
            if y.iter().all(|p| disk_inside(&descriptor, (p.0 + g.0 as f64, p.1 + g.1 as f64), r)) {
                passed += 1;
            }
        }
        let verdict = if passed == opts.spot_checks { WidenessVerdict::WideProved } else { WidenessVerdict::Inconclusive };
        return WidenessCertificate { verdict, witness: Witness::Rule(rule), spot_checks_passed: passed, spot_checks: opts.spot_checks, ..base };
    }
    bounded_search(mask, r, opts, &mut rng, base)
}

fn bounded_search(mask: &RegionMask, r: f64, opts: &WidenessOptions, rng: &mut ChaCha8Rng, base: WidenessCertificate) -> WidenessCertificate {
    let w = *mask.window();
    let q = (1.0 / mask.h()).round() as i64;
    let h = mask.h();
    let (lo, hi) = window_box(mask);
    let good = |s: Site| w.locate(s).is_some_and(|v| mask.contains(v) && mask.boundary_distance(v) > r);
    let bounded = !w.periodic_x && !w.periodic_y && !mask.touches_open_side();
    // continuum translations keeping a point of the window inside it
    let gx = ((hi.0 - lo.0).ceil() as i64).max(0);
    let gy = ((hi.1 - lo.1).ceil() as i64).max(0);
    let mut shifts: Vec<(i64, i64)> = (-gx..=gx).flat_map(|a| (-gy..=gy).map(move |b| (a, b))).collect();
    shifts.sort_by_key(|&(a, b)| (a.abs() + b.abs(), a, b));
    let exhaustive = shifts.len() <= opts.translation_budget;
    shifts.truncate(opts.translation_budget);
    let mut placed = 0;
    for sample in 0..opts.samples {
        let c = (lo.0 + rng.gen::<f64>() * (hi.0 - lo.0), lo.1 + rng.gen::<f64>() * (hi.1 - lo.1));
        let pts = random_set(rng, c, opts.diameter, opts.points_per_set);
        let mut sites: Vec<Site> = pts.iter().map(|p| ((p.0 / h).round() as i64, (p.1 / h).round() as i64)).collect();
        sites.sort();
        sites.dedup();
        let fits = shifts.iter().any(|&(a, b)| sites.iter().all(|s| good((s.0 + a * q, s.1 + b * q))));
        if fits {
            placed += 1;
            continue;
        }
        let record = Counterexample { sites, translations_tried: shifts.len(), exhaustive };
        let verdict = if bounded && exhaustive { WidenessVerdict::CounterexampleFound } else { WidenessVerdict::Inconclusive };
        return WidenessCertificate { verdict, witness: Witness::Failure(record), placed, sampled: sample + 1, ..base };
    }
    WidenessCertificate {
        verdict: WidenessVerdict::Inconclusive,
        witness: Witness::None { note: format!("all {placed} sampled sets placed; explicit masks admit no proof") },
        placed,
        sampled: opts.samples,
        ..base
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Window;

    fn window(nx: usize, ny: usize, origin: (i64, i64)) -> Window {
        Window { nx, ny, periodic_x: false, periodic_y: false, origin }
    }

    #[test]
    fn half_plane_is_wide_for_every_radius() {
        for r in [0.0, 0.5, 3.0] {
            let m = RegionMask::from_descriptor(window(32, 32, (-16, -24)), 0.25, ShapeDescriptor::HalfPlane { c: 0.0 }).unwrap();
            let cert = wideness_check(&m, r, &WidenessOptions::default());
            assert_eq!(cert.verdict, WidenessVerdict::WideProved);
            assert_eq!(cert.spot_checks_passed, 100);
        }
    }

    #[test]
    fn half_plane_rule_matches_closed_form() {
        let rule = rule_for(&ShapeDescriptor::HalfPlane { c: 0.0 }).unwrap();
        assert_eq!(rule.apply(2.3, 1.0), (0, -4));
        assert_eq!(rule.apply(-5.0, 1.0), (0, 0));
    }

    #[test]
    fn graph_region_is_wide() {
        let d = ShapeDescriptor::Graph { samples: vec![0.0, 1.5, -0.7, 0.3], period: 3.0 };
        let m = RegionMask::from_descriptor(window(24, 24, (-12, -12)), 0.25, d).unwrap();
        let cert = wideness_check(&m, 1.0, &WidenessOptions { seed: 3, ..Default::default() });
        assert_eq!(cert.verdict, WidenessVerdict::WideProved);
    }

    #[test]
    fn disk_rejects_large_sets() {
        let d = ShapeDescriptor::Disk { center: (0.0, 0.0), radius: 5.0 };
        let m = RegionMask::from_descriptor(window(56, 56, (-28, -28)), 0.25, d).unwrap();
        let cert = wideness_check(&m, 1.0, &WidenessOptions { diameter: 20.0, ..Default::default() });
        assert_eq!(cert.verdict, WidenessVerdict::CounterexampleFound);
        assert!(matches!(cert.witness, Witness::Failure(Counterexample { exhaustive: true, .. })));
    }

    #[test]
    fn small_sets_fit_in_a_disk_without_a_proof() {
        let d = ShapeDescriptor::Disk { center: (0.0, 0.0), radius: 5.0 };
        let m = RegionMask::from_descriptor(window(56, 56, (-28, -28)), 0.25, d).unwrap();
        let cert = wideness_check(&m, 1.0, &WidenessOptions { diameter: 1.0, samples: 10, ..Default::default() });
        assert_eq!(cert.verdict, WidenessVerdict::Inconclusive);
        assert_eq!(cert.placed, 10);
    }
}
