use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // numerics
    #[error("grid dimension {0} is not a power of two")]
    NonPowerOfTwo(usize),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("SVD did not converge after {0} sweeps")]
    NoConvergence(usize),
    #[error("matrix too large for the dense path: {rows}x{cols}")]
    TooLarge { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    // forward model
    #[error("bad dimensions: {0}")]
    BadDims(String),
    #[error("sampling budget infeasible: {0}")]
    BudgetInfeasible(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    // generator / scheduler / optimizer
    #[error("bad generator config: {0}")]
    BadConfig(String),
    #[error("weighted measurement norm is zero; curriculum admits nothing")]
    DegenerateDenominator,
    #[error("weight parameter {0} outside (0.5, 1]")]
    BadW(f64),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("measurements are identically zero")]
    AllZeroMeasurements,
    #[error("already at the final curriculum stage {0}")]
    FinalStage(usize),
    /// Carries the curve logged up to the abort.
    #[error("loss diverged at iteration {iteration}: {loss}")]
    NonFiniteLoss {
        iteration: usize,
        loss: f64,
        curve: Vec<crate::optimizer::CurvePoint>,
    },

    // metrics
    #[error("reference image is zero on the region of interest")]
    ZeroReference,

    // theory lab
    #[error("step size {eta} violates 0 < eta < {limit}")]
    StepSizeTooLarge { eta: f64, limit: f64 },
    #[error("bad inputs: {0}")]
    BadInputs(String),
    #[error("bound violated at step {step}: measured {measured} > bound {bound}")]
    BoundViolated { step: usize, measured: f64, bound: f64 },
    #[error("weighted update is not a contraction at stage {stage}: norm {norm}")]
    NonExpansivenessViolated { stage: usize, norm: f64 },
    #[error("theory checks failed: {0}")]
    TheoryCheckFailed(String),

    // io
    #[error("bad magic bytes")]
    BadMagic,
    #[error("truncated file")]
    TruncatedFile,
    #[error("unexpected bytes after the payload")]
    TrailingBytes,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("unexpected payload type {0}")]
    BadDtype(u8),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that come from the numerics rather than from bad
    /// input or the filesystem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::NoConvergence(_)
                | Error::NonFiniteLoss { .. }
                | Error::DegenerateDenominator
                | Error::BoundViolated { .. }
                | Error::NonExpansivenessViolated { .. }
                | Error::TheoryCheckFailed(_)
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::BadMagic
                | Error::TruncatedFile
                | Error::TrailingBytes
                | Error::UnsupportedVersion(_)
                | Error::BadDtype(_)
        )
    }
}
