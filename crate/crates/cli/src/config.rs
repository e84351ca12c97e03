use std::path::{Path, PathBuf};

use gapfill::model::{Geometry, GaugeKind, MagneticLattice, ShapeDescriptor};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[value(rename_all = "kebab-case")]
pub enum Task {
    BulkSpectrum,
    Gaps,
    Chern,
    EdgeFill,
    Bands,
    Affiliation,
    Wideness,
    Report,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::BulkSpectrum => "bulk-spectrum",
            Task::Gaps => "gaps",
            Task::Chern => "chern",
            Task::EdgeFill => "edge-fill",
            Task::Bands => "bands",
            Task::Affiliation => "affiliation",
            Task::Wideness => "wideness",
            Task::Report => "report",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub k: u32,
    pub q: u32,
    #[serde(default = "four")]
    pub cells_x: usize,
    #[serde(default = "four")]
    pub cells_y: usize,
    #[serde(default = "torus")]
    pub geometry: Geometry,
    #[serde(default = "landau")]
    pub gauge: GaugeKind,
    /// `q²` row-major samples of W over one cell; zero when absent.
    #[serde(default)]
    pub potential: Option<Vec<f64>>,
}

fn four() -> usize {
    4
}
fn torus() -> Geometry {
    Geometry::Torus
}
fn landau() -> GaugeKind {
    GaugeKind::Landau
}

impl ModelConfig {
    pub fn lattice(&self) -> gapfill::Result<MagneticLattice> {
        let lat = MagneticLattice::new(self.k, self.q, self.cells_x, self.cells_y, self.geometry)?;
        match &self.potential {
            Some(p) => lat.with_potential(p.clone()),
            None => Ok(lat),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dense_cap: Option<usize>,
    pub residual_factor: Option<f64>,
    pub gap_min_width: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMode {
    #[default]
    Auto,
    Full,
    Window,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub mode: SpectrumMode,
    /// Window upper end for windowed solves; defaults to `12πk`.
    pub upper: Option<f64>,
    pub max_pairs: Option<usize>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { mode: SpectrumMode::Auto, upper: None, max_pairs: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChernConfig {
    pub grids: Vec<usize>,
    /// Defaults to `(−4πk − ‖W‖ − 1, 4πk)`.
    pub interval: Option<(f64, f64)>,
}

impl Default for ChernConfig {
    fn default() -> Self {
        ChernConfig { grids: vec![12, 16, 24], interval: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecorationConfig {
    pub radius: f64,
    pub center_y: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EdgeConfig {
    pub width_cells: usize,
    pub length_cells: usize,
    pub samples: usize,
    pub delta: f64,
    pub decoration: Option<DecorationConfig>,
    /// Spectral flow is computed when `n_kappa > 0`.
    pub n_kappa: usize,
    pub e_ref: Option<f64>,
    pub upper_edge: bool,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        EdgeConfig {
            width_cells: 16,
            length_cells: 64,
            samples: 16,
            delta: 0.5,
            decoration: None,
            n_kappa: 64,
            e_ref: None,
            upper_edge: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoppingConfig {
    pub p: i64,
    pub q: i64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandsConfig {
    pub grid: usize,
    /// Plain hopping model at flux `p/q` instead of the magnetic Laplacian.
    pub hopping: Option<HoppingConfig>,
}

impl Default for BandsConfig {
    fn default() -> Self {
        BandsConfig { grid: 24, hopping: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterConfig {
    Bump { center: f64, radius: f64, degree: usize },
    Gaussian { center: f64, width: f64, degree: usize },
    /// Random coefficients of the given degree (seeded), an exact polynomial.
    Polynomial { degree: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AffiliationConfig {
    /// `Z = {y ≤ c}` on the bulk torus.
    pub c: f64,
    pub filter: FilterConfig,
    pub radii: Vec<f64>,
    /// Pass requires the deviation at `check_radius` to be below `tolerance`.
    pub check_radius: Option<f64>,
    pub tolerance: f64,
    /// Hop ranges for the multiplicativity defect: degrees of two random polynomials.
    pub defect_degrees: (usize, usize),
}

impl Default for AffiliationConfig {
    fn default() -> Self {
        AffiliationConfig {
            c: 2.0,
            filter: FilterConfig::Bump { center: 0.0, radius: 100.0, degree: 200 },
            radii: vec![0.0, 0.5, 1.0, 1.5, 2.0],
            check_radius: None,
            tolerance: 1e-6,
            defect_degrees: (1, 1),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WidenessConfig {
    pub shape: ShapeDescriptor,
    pub radius: f64,
    pub diameter: f64,
    /// Window in continuum units: `[x0, x1] × [y0, y1]`.
    pub window: ((f64, f64), (f64, f64)),
}

impl Default for WidenessConfig {
    fn default() -> Self {
        WidenessConfig { shape: ShapeDescriptor::HalfPlane { c: 0.0 }, radius: 1.0, diameter: 4.0, window: ((-8.0, 8.0), (-8.0, 8.0)) }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Option<Task>,
    pub model: ModelConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub chern: ChernConfig,
    #[serde(default)]
    pub edge: EdgeConfig,
    #[serde(default)]
    pub bands: BandsConfig,
    #[serde(default)]
    pub affiliation: AffiliationConfig,
    #[serde(default)]
    pub wideness: WidenessConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Parsed config and the raw text it came from.
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub text: String,
    pub path: PathBuf,
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))?;
    if text.trim().is_empty() {
        return Err(CliError::ConfigInvalid(format!("{}: empty config", path.display())));
    }
    let config: ExperimentConfig = toml::from_str(&text).map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", path.display())))?;
    validate(&config)?;
    Ok(LoadedConfig { config, text, path: path.to_path_buf() })
}

fn validate(c: &ExperimentConfig) -> Result<(), CliError> {
    let bad = |m: String| Err(CliError::ConfigInvalid(m));
    if c.model.q == 0 {
        return bad("model.q: must be at least 1".into());
    }
    if c.model.cells_x == 0 || c.model.cells_y == 0 {
        return bad("model.cells_x, model.cells_y: must be positive".into());
    }
    if let Some(p) = &c.model.potential {
        let n = (c.model.q * c.model.q) as usize;
        if p.len() != n {
            return bad(format!("model.potential: expected {n} samples, got {}", p.len()));
        }
    }
    if c.chern.grids.iter().any(|&g| g < 4) {
        return bad("chern.grids: every grid needs at least 4 points per direction".into());
    }
    if !(c.edge.delta > 0.0) {
        return bad("edge.delta: must be positive".into());
    }
    if c.affiliation.radii.windows(2).any(|w| w[1] <= w[0]) {
        return bad("affiliation.radii: must be increasing".into());
    }
    if !(c.wideness.radius >= 0.0) || !(c.wideness.diameter >= 0.0) {
        return bad("wideness.radius, wideness.diameter: must be nonnegative".into());
    }
    Ok(())
}
