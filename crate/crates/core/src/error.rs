use std::path::PathBuf;

/// Errors produced by the resonance toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no Coulomb barrier with an inner pocket found for J = {j}")]
    NoBarrier { j: u32 },

    #[error("wave packet not contained in the grid at the {edge} edge (|psi| ratio {ratio:.3e})")]
    Containment { edge: GridEdge, ratio: f64 },

    #[error("Chebyshev series did not converge within {max_order} terms (last |c_k| = {last_coefficient:.3e})")]
    PropagationDivergence {
        max_order: usize,
        last_coefficient: f64,
    },

    #[error("propagation stopped after {steps} steps without meeting the stop condition")]
    Timeout {
        steps: usize,
        last_state: Box<crate::propagator::WavePacketState>,
    },

    #[error("linear solve failed at E_k = {energy} MeV: relative residual {residual:.3e} after {iterations} iterations")]
    LinearSolve {
        energy: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("Coulomb functions outside their evaluation domain: {0}")]
    Domain(String),

    #[error("grid too coarse for the requested energy: {0}")]
    Resolution(String),

    #[error("no resonance crossing found: {0}")]
    NotFound(String),

    #[error("phase shift decreases through pi/2 at {energy} MeV (anti-resonance)")]
    AntiResonance { energy: f64 },

    #[error("ambiguous peak: {0}; use a rational (Pade) fit for overlapping resonances")]
    AmbiguousPeak(String),

    #[error("ill-conditioned rational fit (condition number {condition:.3e}); lower the orders")]
    Conditioning { condition: f64 },

    #[error("pole unstable under order increase: {first:?} vs {second:?}")]
    PoleUnstable {
        first: (f64, f64),
        second: (f64, f64),
    },

    #[error("missing artifact: {0}")]
    MissingArtifact(PathBuf),

    #[error("unsupported artifact: {0}")]
    UnsupportedArtifact(String),

    #[error("configuration error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridEdge {
    Inner,
    Outer,
}

impl std::fmt::Display for GridEdge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GridEdge::Inner => f.write_str("inner"),
            GridEdge::Outer => f.write_str("outer"),
        }
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::PropagationDivergence { .. }
                | Error::Timeout { .. }
                | Error::LinearSolve { .. }
                | Error::Domain(_)
                | Error::Resolution(_)
                | Error::NotFound(_)
                | Error::AntiResonance { .. }
                | Error::AmbiguousPeak(_)
                | Error::Conditioning { .. }
                | Error::PoleUnstable { .. }
                | Error::NoBarrier { .. }
                | Error::DegenerateInput(_)
                | Error::Containment { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
