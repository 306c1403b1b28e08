//! Error type shared across the library.

use thiserror::Error;

/// Errors raised by channel construction, code building and analysis routines.
#[derive(Debug, Error)]
pub enum QecError {
    #[error("matrix is not Hermitian: max |h - h^dag| = {residual:.3e} exceeds tol {tol:.3e}")]
    NotHermitian { residual: f64, tol: f64 },

    #[error("negative eigenvalue {value:.3e} below -{tol:.3e} in PSD operation")]
    NegativeEigenvalue { value: f64, tol: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("Kraus product count {count} exceeds cap {cap}")]
    SizeCapExceeded { count: usize, cap: usize },

    #[error("map is singular: smallest singular value {sigma_min:.3e} <= tol {tol:.3e}")]
    SingularMap { sigma_min: f64, tol: f64 },

    #[error("value {value} out of range [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },

    #[error("decay rate undefined: |G({t})| = {g_abs:.3e} is at a zero of G")]
    PoleAtGZero { t: f64, g_abs: f64 },

    #[error("stabilizer generators {i} and {j} do not commute")]
    NonCommutingGenerators { i: usize, j: usize },

    #[error("dependent stabilizer generators: projector rank {rank} != expected {expected}")]
    DependentGenerators { rank: usize, expected: usize },

    #[error("logical vector is not normalized: |norm - 1| = {deviation:.3e}")]
    NotNormalized { deviation: f64 },

    #[error("ambiguous syndrome {syndrome:?}: corrections {first} and {second} collide")]
    AmbiguousSyndrome {
        syndrome: Vec<u8>,
        first: String,
        second: String,
    },

    #[error("E[P] has negative eigenvalue {value:.3e} (tol {tol:.3e}); Petz inverse root undefined")]
    NegativeEP { value: f64, tol: f64 },

    #[error("correctable set violates the Knill-Laflamme conditions: residual {residual:.3e}")]
    NotCorrectable { residual: f64 },

    #[error("operation requires a k=1 code (2-dimensional codespace), got codespace dimension {dim}")]
    UnsupportedCodeDimension { dim: usize },

    #[error("least-squares system is ill-conditioned: condition number {cond:.3e}")]
    IllConditioned { cond: f64 },

    #[error("time grid too coarse: {points} points, need at least 3")]
    GridTooCoarse { points: usize },

    #[error("map is not trace preserving: ||sum sign K^dag K - I|| = {residual:.3e}")]
    NotTracePreserving { residual: f64 },

    #[error("invalid Pauli string {string:?}: {reason}")]
    InvalidPauliString { string: String, reason: String },

    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, QecError>;
