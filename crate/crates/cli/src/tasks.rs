use std::f64::consts::PI;

use gapfill::bloch::{band_structure, invariant_pair, BandData, BlochGrid, HoppingModel, ORIENTATION};
use gapfill::coarse::{affiliation_check, filter_operator, ideal_multiplicativity, propagation_profile, wideness_check, WidenessOptions, WidenessVerdict};
use gapfill::edge::{bulk_gap, gap_filling_check, strip_bands, Edge, FlowOptions, StripSpec};
use gapfill::model::{assemble_bulk, assemble_restricted, build_gauge, Geometry, RegionMask, ShapeDescriptor, Window};
use gapfill::spectral::{eigensolve, gaps_json, ChebFilter, EigenMode, FilterTarget, SolverOptions, SpectrumReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, FilterConfig, SpectrumMode};
use crate::output::{svg_plot, OutDir};
use crate::CliError;

/// Verdict of one task and a short machine-readable summary for the manifest.
pub struct Outcome {
    pub pass: bool,
    pub summary: Value,
}

pub fn solver_options(c: &ExperimentConfig) -> SolverOptions {
    let mut o = SolverOptions { seed: c.seed, ..SolverOptions::default() };
    if let Some(cap) = c.solver.dense_cap {
        o.dense_cap = cap;
    }
    if let Some(r) = c.solver.residual_factor {
        o.residual_factor = r;
    }
    o.gap_min_width = c.solver.gap_min_width;
    o
}

fn torus_lattice(c: &ExperimentConfig) -> gapfill::Result<gapfill::model::MagneticLattice> {
    Ok(c.model.lattice()?.with_geometry(Geometry::Torus))
}

fn bulk_report(c: &ExperimentConfig) -> Result<SpectrumReport, CliError> {
    let lat = torus_lattice(c)?;
    let h = assemble_bulk(&lat, &build_gauge(&lat, c.model.gauge)?)?;
    let opts = solver_options(c);
    let (glo, ghi) = h.gershgorin();
    let per_level = (2 * lat.k() as usize).max(1) * lat.cells();
    let window = || EigenMode::Window {
        lower: glo,
        upper: c.spectrum.upper.unwrap_or(12.0 * PI * lat.k().max(1) as f64).min(ghi),
        max_pairs: c.spectrum.max_pairs.unwrap_or(4 * per_level),
    };
    let mode = match c.spectrum.mode {
        SpectrumMode::Full => EigenMode::Full,
        SpectrumMode::Window => window(),
        SpectrumMode::Auto if h.dim() <= opts.dense_cap.min(3000) => EigenMode::Full,
        SpectrumMode::Auto => window(),
    };
    Ok(eigensolve(&h, mode, &opts)?)
}

fn gaps_csv(report: &SpectrumReport) -> String {
    let mut s = String::from("lower,upper,margin\n");
    for g in &report.gaps {
        s += &format!("{:.15e},{:.15e},{:.15e}\n", g.lower, g.upper, g.margin);
    }
    s
}

pub fn bulk_spectrum(c: &ExperimentConfig, out: &mut OutDir) -> Result<Outcome, CliError> {
    let report = bulk_report(c)?;
    out.write("spectrum.csv", report.to_csv().as_bytes())?;
    out.write("gaps.csv", gaps_csv(&report).as_bytes())?;
    out.json("gaps.json", &gaps_json(&report.gaps))?;
    out.json("spectrum.json", &report)?;
    let line: Vec<(f64, f64)> = report.eigenvalues.iter().enumerate().map(|(i, &e)| (i as f64, e)).collect();
    out.write("spectrum.svg", svg_plot("bulk spectrum", "index", "eigenvalue", &[line]).as_bytes())?;
    let first = report.gaps.first().map(|g| (g.lower, g.upper));
    Ok(Outcome { pass: report.complete, summary: json!({ "eigenvalues": report.eigenvalues.len(), "first_gap": first, "method": report.method }) })
}

pub fn gaps(c: &ExperimentConfig, out: &mut OutDir) -> Result<Outcome, CliError> {
    let report = bulk_report(c)?;
    out.write("gaps.csv", gaps_csv(&report).as_bytes())?;
    out.json("gaps.json", &gaps_json(&report.gaps))?;
    Ok(Outcome { pass: report.complete && !report.gaps.is_empty(), summary: json!({ "gaps": report.gaps.len() }) })
}

/// `(−4πk − ‖W‖ − 1, 4πk)`: the lattice operator is bounded below by
/// `−4πk − ‖W‖`, so the lower end always sits below the spectrum.
/// With no field the whole interval sits below the spectrum.
pub fn default_interval(k: u32, w_norm: f64) -> (f64, f64) {
    let floor = -4.0 * PI * k as f64 - w_norm - 1.0;
    if k == 0 {
        (floor, floor + 0.5)
    } else {
        (floor, 4.0 * PI * k as f64)
    }
}

pub fn chern(c: &ExperimentConfig, out: &mut OutDir) -> Result<Outcome, CliError> {
    let lat = torus_lattice(c)?.with_cells(1, 1)?;
    let gauge = build_gauge(&lat, c.model.gauge)?;
    let interval = c.chern.interval.unwrap_or(default_interval(lat.k(), lat.w_norm()));
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    let mut worst_defect = 0.0_f64;
    let mut flux_csv = String::from("s_index,t_index,flux\n");
    for (gi, &n) in c.chern.grids.iter().enumerate() {
        let grid = BlochGrid::square(n)?;
        let pair = invariant_pair(&lat, &gauge, interval, grid)?;
        let (max_flux, defect) = pair.detail.as_ref().map_or((0.0, 0.0), |d| (d.max_flux, d.integrality_defect()));
        worst_defect = worst_defect.max(defect);
        if gi + 1 == c.chern.grids.len() {
            if let Some(d) = &pair.detail {
                for (i, f) in d.plaquette_flux.iter().enumerate() {
                    let (a, b) = grid.coords(i);
                    flux_csv += &format!("{a},{b},{f:.15e}\n");
                }
            }
        }
        rows.push(json!({ "grid": n, "dim": pair.dim, "chern": pair.c1, "max_flux": max_flux, "integrality_defect": defect }));
        pairs.push(pair.pair());
    }
    let stable = pairs.windows(2).all(|w| w[0] == w[1]);
    let (dim, c1) = pairs.last().copied().unwrap_or((0, 0));
    let doc = json!({
        "dim": dim,
        "chern": c1,
        "interval": interval,
        "grids": rows,
        "stable": stable,
        "orientation": ORIENTATION,
    });
    out.json("chern.json", &doc)?;
    out.write("berry_flux.csv", flux_csv.as_bytes())?;
    Ok(Outcome { pass: stable && worst_defect < 1e-6, summary: json!({ "dim": dim, "chern": c1, "stable": stable }) })
}

fn band_series(b: &BandData) -> Vec<Vec<(f64, f64)>> {
    (0..b.bands())
        .map(|i| (0..b.grid.n_s).map(|a| (a as f64 / b.grid.n_s as f64, b.energies[b.grid.index(a, 0)][i])).collect())
        .collect()
}

pub fn bands(c: &ExperimentConfig, out: &mut OutDir) -> Result<Outcome, CliError> {
    let grid = BlochGrid::square(c.bands.grid)?;
    let data = match &c.bands.hopping {
        Some(hm) => HoppingModel::new(hm.p, hm.q)?.bands(grid)?,
        None => {
            let lat = torus_lattice(c)?.with_cells(1, 1)?;
            band_structure(&lat, &build_gauge(&lat, c.model.gauge)?, grid)?
        }
    };
    let mut csv = Vec::new();
    data.write_csv(&mut csv)?;
    out.write("bands.csv", &csv)?;
    let groups: Vec<(usize, usize)> = data.band_groups.iter().map(|r| (r.start, r.end)).collect();
    out.json(
        "bands.json",
        &json!({
            "bands": data.bands(),
            "grid": data.grid.n_s,
            "groups": groups,
            "uniform_gaps": data.uniform_gaps(),
            "threshold": data.threshold,
            "max_residual": data.max_residual,
        }),
    )?;
    out.write("bands.svg", svg_plot("bands along t = 0", "s", "energy", &band_series(&data)).as_bytes())?;
    Ok(Outcome { pass: true, summary: json!({ "bands": data.bands(), "groups": groups.len() }) })
}

pub const NO_OBSTRUCTION: &str = "no obstruction; gap filling not implied";

pub fn edge_fill(c: &ExperimentConfig, out: &mut OutDir) -> Result<Outcome, CliError> {
    let lat = c.model.lattice()?;
    if lat.k() == 0 {
        let doc = json!({ "skipped": true, "note": NO_OBSTRUCTION });
        out.json("edge_fill.json", &doc)?;
        return Ok(Outcome { pass: true, summary: doc });
    }
    let opts = solver_options(c);
    let gap = bulk_gap(&lat.with_geometry(Geometry::Torus), &opts)?;
    let e = &c.edge;
    let shape = match &e.decoration {
        None => ShapeDescriptor::HalfPlane { c: 0.0 },
        Some(d) => ShapeDescriptor::Decorated { c: 0.0, radius: d.radius, center_y: d.center_y },
    };
    let strip = StripSpec::new(&lat, e.width_cells, e.length_cells, shape)?;
    let report = gap_filling_check(&strip, &gap, e.samples, e.delta, &opts)?;
    out.json("edge_fill.json", &report)?;
    let mut summary = json!({ "all_pass": report.all_pass, "max_distance": report.max_distance, "bulk_gap": (gap.lower, gap.upper) });
    let mut pass = report.all_pass;
    if e.n_kappa > 0 {
        let fo = FlowOptions { e_ref: e.e_ref, edge: if e.upper_edge { Edge::Upper } else { Edge::Lower }, solver: opts };
        let flow = strip_bands(&strip, &gap, e.n_kappa, &fo)?;
        out.json("flow.json", &flow)?;
        let mut csv = Vec::new();
        flow.write_csv(&mut csv)?;
        out.write("dispersion.csv", &csv)?;
        let nb = flow.dispersion.iter().map(|p| p.band + 1).max().unwrap_or(0);
        let series: Vec<Vec<(f64, f64)>> = (0..nb)
            .map(|b| flow.dispersion.iter().filter(|p| p.band == b).map(|p| (p.kappa, p.energy)).collect())
            .collect();
        out.write("dispersion.svg", svg_plot("strip dispersion near E_ref", "kappa", "energy", &series).as_bytes())?;
        summary["net_flow"] = json!(flow.net_flow);
        pass &= flow.net_flow != 0;
    }
    Ok(Outcome { pass, summary })
}

fn make_filter(f: &FilterConfig, enclosure: (f64, f64), seed: u64) -> gapfill::Result<ChebFilter> {
    match *f {
        FilterConfig::Bump { center, radius, degree } => ChebFilter::fit(FilterTarget::Bump { center, radius }, enclosure, degree),
        FilterConfig::Gaussian { center, width, degree } => ChebFilter::fit(FilterTarget::Gaussian { center, width }, enclosure, degree),
        FilterConfig::Polynomial { degree } => random_polynomial(degree, enclosure, seed),
    }
}

fn random_polynomial(degree: usize, enclosure: (f64, f64), seed: u64) -> gapfill::Result<ChebFilter> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = (0..=degree).map(|_| rng.gen::<f64>() - 0.5).collect();
    ChebFilter::polynomial(c, enclosure, &format!("random degree {degree}"))
}

pub fn affiliation(c: &ExperimentConfig, out: &mut OutDir) -> Result<Outcome, CliError> {
    let a = &c.affiliation;
    let lat = torus_lattice(c)?;
    let gauge = build_gauge(&lat, c.model.gauge)?;
    let bulk = assemble_bulk(&lat, &gauge)?;
    let mask = RegionMask::from_descriptor(lat.window(), lat.h(), ShapeDescriptor::HalfPlane { c: a.c })?;
    let edge = assemble_restricted(&lat, &gauge, &mask)?;
    let (lo, hi) = bulk.gershgorin();
    let pad = 1e-9 * (hi - lo).abs() + 1e-12;
    let enclosure = (lo - pad, hi + pad);
    let filter = make_filter(&a.filter, enclosure, c.seed)?;
    let report = affiliation_check(&bulk, &edge, &mask, &filter, &a.radii, c.seed)?;
    let n = bulk.dim();
    let probes: Vec<usize> = (0..4).map(|i| i * n / 4 + n / 8).collect();
    let profile = propagation_profile(&bulk, &filter, &probes)?;
    let p1 = filter_operator(&bulk, &random_polynomial(a.defect_degrees.0, enclosure, c.seed ^ 1)?)?;
    let p2 = filter_operator(&bulk, &random_polynomial(a.defect_degrees.1, enclosure, c.seed ^ 2)?)?;
    let defect = ideal_multiplicativity(&p1, &p2, &mask, &a.radii)?;
    let monotone = report.deviations.windows(2).all(|w| w[1] <= w[0]);
    let mut pass = monotone && report.exact_zero_verified && profile.verified && defect.exact_zero_verified;
    let mut checked = Value::Null;
    if let Some(r) = a.check_radius {
        let i = a
            .radii
            .iter()
            .position(|&x| (x - r).abs() < 1e-12)
            .ok_or_else(|| CliError::ConfigInvalid(format!("affiliation.check_radius: {r} is not one of the radii")))?;
        pass &= report.deviations[i] < a.tolerance;
        checked = json!({ "radius": r, "deviation": report.deviations[i], "upper_bound": report.upper_bounds[i], "tolerance": a.tolerance });
    }
    let mut csv = String::from("radius,deviation,estimate,upper_bound,tail_bound,far_sites\n");
    for i in 0..a.radii.len() {
        csv += &format!(
            "{},{:.6e},{:.6e},{:.6e},{:.6e},{}\n",
            a.radii[i], report.deviations[i], report.estimates[i], report.upper_bounds[i], report.tail_bounds[i], report.far_sites[i]
        );
    }
    out.write("affiliation.csv", csv.as_bytes())?;
    out.json(
        "affiliation.json",
        &json!({
            "pass": pass,
            "monotone": monotone,
            "check": checked,
            "report": report,
            "profile": gapfill::coarse::profile_json(&report.radii, &report.deviations, &report.filter),
            "propagation": profile,
            "defect": defect,
        }),
    )?;
    Ok(Outcome { pass, summary: json!({ "monotone": monotone, "exact_zero_verified": report.exact_zero_verified, "check": checked }) })
}

pub fn wideness(c: &ExperimentConfig, out: &mut OutDir) -> Result<Outcome, CliError> {
    let wc = &c.wideness;
    let q = c.model.q as f64;
    let ((x0, x1), (y0, y1)) = wc.window;
    if !(x0 < x1 && y0 < y1) {
        return Err(CliError::ConfigInvalid("wideness.window: empty box".into()));
    }
    let (i0, j0) = ((x0 * q).floor() as i64, (y0 * q).floor() as i64);
    let (i1, j1) = ((x1 * q).ceil() as i64, (y1 * q).ceil() as i64);
    let window = Window { nx: (i1 - i0 + 1) as usize, ny: (j1 - j0 + 1) as usize, periodic_x: false, periodic_y: false, origin: (i0, j0) };
    let mask = RegionMask::from_descriptor(window, 1.0 / q, wc.shape.clone())?;
    let opts = WidenessOptions { diameter: wc.diameter, seed: c.seed, ..Default::default() };
    let cert = wideness_check(&mask, wc.radius, &opts);
    out.json("wideness.json", &cert)?;
    Ok(Outcome { pass: cert.verdict == WidenessVerdict::WideProved, summary: json!({ "verdict": cert.verdict }) })
}
