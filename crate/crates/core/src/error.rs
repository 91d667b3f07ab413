use thiserror::Error;

/// Errors shared across the simulation and inference layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state not a valid density matrix: {0}")]
    InvalidState(String),

    #[error(
        "Fock cutoff too small: boundary population {population:.3e} exceeds \
         {threshold:.1e} at t = {t:.6} s"
    )]
    CutoffOverflow {
        population: f64,
        threshold: f64,
        t: f64,
    },

    #[error("integration step too coarse: {0}")]
    StepSize(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("no threshold crossing on the search interval")]
    NoCrossing,

    #[error("evidence underflow at x = {x}: outside the support of both hypotheses")]
    OutOfSupport { x: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("zero total atom count in shot")]
    ZeroTotalAtoms,

    #[error("figure of merit undefined: detection and interaction probabilities both zero")]
    UndefinedFigureOfMerit,

    #[error("sampler failed to accept a proposal after {0} attempts")]
    SamplerStalled(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
