use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix or vector contains non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian (max |h - h^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("gate is not unitary (max |U^dagger U - I| = {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("linear system is singular (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("linear solve residual {residual:e} exceeds bound {bound:e}")]
    ResidualTooLarge { residual: f64, bound: f64 },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("state is not normalized (norm^2 = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("qubit index {0} out of range (expected 1..=3)")]
    QubitIndex(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state is outside the symmetric J=3/2 sector (projection norm^2 = {projection})")]
    NotSymmetricSector { projection: f64 },

    #[error("no GHZ schedule found with n <= {max_n} at tolerance {tol:e}")]
    NoScheduleFound { max_n: u64, tol: f64 },

    #[error("time {t} is not commensurate with the drive detuning (delta*t mod 2pi residual {residual:e})")]
    NonCommensurateTime { t: f64, residual: f64 },

    #[error("Fock truncation too small: population {population:e} in the top level {level}")]
    Truncation { level: usize, population: f64 },

    #[error("missing parameters: {0}")]
    MissingParameters(String),

    #[error("negative steady-state photon number {0:e}")]
    NegativePhotonNumber(f64),

    #[error("detuning grid does not resolve the shift at {shift_mhz} MHz (nearest point {distance_mhz} MHz away)")]
    GridTooCoarse { shift_mhz: f64, distance_mhz: f64 },

    #[error("spectrum carries no weight at any shift location")]
    EmptySpectrum,

    #[error("correlation value {0} outside [-1, 1]")]
    OutOfRange(f64),

    #[error("iteration did not converge after {iterations} steps")]
    NotConverged { iterations: usize },
}

impl Error {
    /// True for errors caused by caller-supplied parameters rather than by a
    /// numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::MissingParameters(_)
                | Error::QubitIndex(_)
                | Error::ZeroNorm
                | Error::NotNormalized { .. }
                | Error::OutOfRange(_)
        )
    }
}
