use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode of the crate. [`Error::code`] gives the stable code
/// printed by the command-line front end.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular 2N perturbation system (pivot ratio {pivot_ratio:.3e})")]
    SingularSystem { pivot_ratio: f64 },

    #[error("singular Y block (pivot ratio {pivot_ratio:.3e})")]
    SingularY { pivot_ratio: f64 },

    #[error("singular Φ_im (pivot ratio {pivot_ratio:.3e})")]
    SingularPhi { pivot_ratio: f64 },

    #[error("singular B - diag(B_sh) (pivot ratio {pivot_ratio:.3e})")]
    SingularB { pivot_ratio: f64 },

    #[error("singular G block (pivot ratio {pivot_ratio:.3e})")]
    SingularG { pivot_ratio: f64 },

    #[error("singular Newton Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },

    #[error("Newton iteration stopped after {iterations} iterations with mismatch {mismatch:.3e}")]
    MaxIterations { iterations: usize, mismatch: f64 },

    #[error("no-load voltage vanishes at bus {bus}")]
    ZeroNoLoadVoltage { bus: usize },

    #[error("voltage magnitude too small for polar extraction at bus {bus}")]
    VanishingMagnitude { bus: usize },

    #[error("nominal voltage must be the no-load voltage for this solver")]
    NominalNotNoLoad,

    #[error("PV buses present; the general 2N solver needs P and Q at every bus")]
    PvUnsupportedInGeneral,

    #[error("network is lossy (max |G| = {max_conductance:.3e})")]
    LossyNetwork { max_conductance: f64 },

    #[error("slack voltage must be 1∠0 for the flat-voltage lossless solution")]
    SlackNotUnity,

    #[error("lossless solvability conditions violated at buses {buses:?}")]
    ConditionsViolated { buses: Vec<usize> },

    #[error("non-ZIP bus {bus} present")]
    NonZipBusPresent { bus: usize },

    #[error("constant-current load at bus {bus}; this special case needs I_L = 0")]
    NonzeroCurrentLoad { bus: usize },

    #[error("Lemma 1 structure does not hold: {0}")]
    Lemma1Violated(String),

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "PARSE_ERROR",
            Error::Validation(_) => "VALIDATION_ERROR",
            Error::DimensionMismatch(_) => "DIMENSION_MISMATCH",
            Error::SingularSystem { .. } => "SINGULAR_SYSTEM",
            Error::SingularY { .. } => "SINGULAR_Y",
            Error::SingularPhi { .. } => "SINGULAR_PHI",
            Error::SingularB { .. } => "SINGULAR_B",
            Error::SingularG { .. } => "SINGULAR_G",
            Error::SingularJacobian { .. } => "SINGULAR_JACOBIAN",
            Error::MaxIterations { .. } => "MAX_ITERATIONS",
            Error::ZeroNoLoadVoltage { .. } => "ZERO_NOLOAD_VOLTAGE",
            Error::VanishingMagnitude { .. } => "VANISHING_MAGNITUDE",
            Error::NominalNotNoLoad => "NOMINAL_NOT_NOLOAD",
            Error::PvUnsupportedInGeneral => "PV_UNSUPPORTED_IN_GENERAL",
            Error::LossyNetwork { .. } => "LOSSY_NETWORK",
            Error::SlackNotUnity => "SLACK_NOT_UNITY",
            Error::ConditionsViolated { .. } => "THEOREM1_CONDITIONS_VIOLATED",
            Error::NonZipBusPresent { .. } => "NON_ZIP_BUS_PRESENT",
            Error::NonzeroCurrentLoad { .. } => "NONZERO_CURRENT_LOAD",
            Error::Lemma1Violated(_) => "LEMMA1_VIOLATED",
            Error::InternalConsistency(_) => "INTERNAL_CONSISTENCY",
        }
    }

    /// Input problems (malformed or invalid case data) as opposed to solver failures.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Validation(_))
    }
}
