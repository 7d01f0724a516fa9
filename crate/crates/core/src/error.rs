use thiserror::Error;

/// Everything that can go wrong inside the library.
///
/// Variants are grouped loosely by the module that raises them; the CLI maps
/// all of them to the "numeric contract violation" exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("matrix is singular to working precision (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("spectrum [{min}, {max}] lies outside [0, 1]")]
    SpectrumOutOfRange { min: f64, max: f64 },

    #[error("argument {0} lies on the period lattice")]
    LatticePole(String),

    #[error("degenerate period pair: {0}")]
    InvalidPeriods(String),

    #[error("point {0} is not inside the domain")]
    OutsideDomain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid too coarse: spectral clamp moved {moved:e} of trace {trace:e}")]
    GridTooCoarse { moved: f64, trace: f64 },

    #[error("ground set of size {size} exceeds the enumeration limit {limit}")]
    GroundSetTooLarge { size: usize, limit: usize },

    #[error("kernel has eigenvalue {0} too close to 1 for the L-ensemble representation")]
    EigenvalueOne(f64),

    #[error("Palm kernel undefined at site {index}: pivot {pivot:e}")]
    UndefinedPalm { index: usize, pivot: f64 },

    #[error("Palm minor is singular (determinant {0:e})")]
    SingularMinor(f64),

    #[error("conditioning event has probability {0:e}")]
    ZeroProbability(f64),

    #[error("conditional resolvent is singular (smallest singular value {0:e})")]
    SingularResolvent(f64),

    #[error("stochastic domination violated on an up-set by {excess:e}")]
    DominationViolated {
        certificate: Vec<u32>,
        excess: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
