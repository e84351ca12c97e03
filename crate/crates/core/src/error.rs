use thiserror::Error;

/// Errors raised by the lattice, spectral, Bloch, edge and coarse modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("bulk assembly needs torus geometry, got {0}")]
    NonTorusGeometry(String),
    #[error("region mask selects no lattice site")]
    EmptyRegion,
    #[error("no gauge phase supplied for site ({0}, {1})")]
    MissingPhase(i64, i64),
    #[error("dimension {dim} exceeds the dense eigensolver cap {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },
    #[error("windowed eigensolver did not converge after {iterations} iterations: {reason}")]
    WindowNotConverged { iterations: usize, reason: String },
    #[error("spectrum report does not certify completeness over the requested range")]
    IncompleteSpectrum,
    #[error("Gershgorin bounds [{lo}, {hi}] exceed the filter enclosure [{a}, {b}]")]
    EnclosureViolation { lo: f64, hi: f64, a: f64, b: f64 },
    #[error("interval margin {margin} needs polynomial degree above the cap {cap}")]
    MarginTooSmall { margin: f64, cap: usize },
    #[error("gauge field is not cell periodic: {0}")]
    GaugeNotCellPeriodic(String),
    #[error("no fiber-uniform spectral gap separates the bands")]
    NoUniformGap,
    #[error("overlap determinant {modulus:e} at grid point ({s}, {t}) is singular")]
    SingularOverlap { s: usize, t: usize, modulus: f64 },
    #[error("eigenvalue count in the interval varies over the grid ({min}..={max})")]
    NonConstantRank { min: usize, max: usize },
    #[error("band continuation ambiguous at kappa index {index}: best overlap {overlap}")]
    BandConnectionAmbiguous { index: usize, overlap: f64 },
    #[error("decoration leaves the lattice window: {0}")]
    DecorationOutsideWindow(String),
    #[error("edge operator does not match the mask on the bulk window: {0}")]
    MaskMismatch(String),
    #[error("invalid strip: {0}")]
    InvalidStrip(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("LAPACK failure: {0}")]
    Lapack(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable variant name used in CLI diagnostics and reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidLattice(_) => "InvalidLattice",
            Error::NonTorusGeometry(_) => "NonTorusGeometry",
            Error::EmptyRegion => "EmptyRegion",
            Error::MissingPhase(..) => "MissingPhase",
            Error::DenseCapExceeded { .. } => "DenseCapExceeded",
            Error::WindowNotConverged { .. } => "WindowNotConverged",
            Error::IncompleteSpectrum => "IncompleteSpectrum",
            Error::EnclosureViolation { .. } => "EnclosureViolation",
            Error::MarginTooSmall { .. } => "MarginTooSmall",
            Error::GaugeNotCellPeriodic(_) => "GaugeNotCellPeriodic",
            Error::NoUniformGap => "NoUniformGap",
            Error::SingularOverlap { .. } => "SingularOverlap",
            Error::NonConstantRank { .. } => "NonConstantRank",
            Error::BandConnectionAmbiguous { .. } => "BandConnectionAmbiguous",
            Error::DecorationOutsideWindow(_) => "DecorationOutsideWindow",
            Error::MaskMismatch(_) => "MaskMismatch",
            Error::InvalidStrip(_) => "InvalidStrip",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Lapack(_) => "Lapack",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
