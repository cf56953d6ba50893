use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("polynomial order {0} is below the minimum of 4")]
    OrderTooLow(usize),
    #[error("basis index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("point {0} lies outside [0, 1]")]
    OutsideDomain(f64),
    #[error("derivative order {0} is not supported (0, 1 or 2)")]
    DerivativeOrder(usize),
    #[error("sampling grid with {points} intervals is too coarse: need a multiple of {required}")]
    GridTooCoarse { points: usize, required: usize },
    #[error("diffusion coefficient {value} at x = {x} violates the ellipticity bound {bound}")]
    Ellipticity { x: f64, value: f64, bound: f64 },
    #[error("drift is not finite at x = {0}")]
    UnboundedDrift(f64),
    #[error("path of {len} observations is shorter than the basis dimension {dim}")]
    PathTooShort { len: usize, dim: usize },
    #[error("truncation residual {residual:e} exceeds tolerance {tolerance:e}")]
    Truncation { residual: f64, tolerance: f64 },
    #[error("eigensolver failure: {0}")]
    EigenSolver(String),
    #[error("denominator vanishes at x = {0}")]
    VanishingDenominator(f64),
}

impl Error {
    /// Whether the error stems from a numerical failure rather than from
    /// invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Truncation { .. } | Error::EigenSolver(_) | Error::VanishingDenominator(_)
        )
    }
}
