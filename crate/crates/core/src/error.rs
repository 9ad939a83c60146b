use thiserror::Error;

/// Errors raised by the physics and numerics layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("phase unwrapping failed: grid too coarse on [{k_lo}, {k_hi}] after maximum refinement")]
    RefinementFailure { k_lo: f64, k_hi: f64 },

    #[error("pole search incomplete: found {found} zeros, argument principle counts {expected}")]
    IncompleteSearch { found: usize, expected: i64 },

    #[error("pole function vanishes on the integration contour near k = {re} + {im}i")]
    ZeroOnContour { re: f64, im: f64 },

    #[error("Newton iteration did not converge from seed {re} + {im}i")]
    NewtonFailure { re: f64, im: f64 },

    #[error("configuration has no bound state")]
    NoBoundState,

    #[error("configuration has {count} bound states; request the lowest explicitly")]
    AmbiguousGroundState { count: usize },

    #[error("iso-resonance search failed: {0}")]
    IsoSearch(String),

    #[error("grid: {0}")]
    Grid(String),

    #[error("time step too large: energy expectation drifts by {drift:.3e} (relative) between dt and dt/2; reduce dt")]
    Resolution { drift: f64 },

    #[error("numerical blow-up (NaN/Inf) at step {step}")]
    NumericalBlowup { step: usize },

    #[error("final configuration has {count} bound state(s); scattering states are not complete")]
    CompletenessViolation { count: usize },

    #[error("wave packet not contained in the box: |psi| near the edge is {ratio:.3e} of its maximum")]
    Containment { ratio: f64 },

    #[error("fit failed after {iterations} iterations: {reason}")]
    FitFailure { iterations: usize, reason: String },

    #[error("fit window: {0}")]
    FitWindow(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument { name, reason: reason.into() }
    }
}
