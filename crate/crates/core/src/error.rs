use thiserror::Error;

/// Errors raised while building, validating or solving a game instance.
#[derive(Debug, Error)]
pub enum GameError {
    #[error("stage {stage}: {what}")]
    Dimension { stage: usize, what: String },

    #[error("invalid game: {0}")]
    Invalid(String),

    #[error("gain entry ({row}, {col}) = {value} lies outside the structured pattern")]
    OffPattern { row: usize, col: usize, value: f64 },

    #[error("gain has shape {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    GainShape {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },

    #[error(
        "upper value of the game is unbounded: stage {stage} has lambda_min(Rw - D'PD) = {lambda_min:.6e}"
    )]
    Unbounded { stage: usize, lambda_min: f64 },

    #[error("stage {stage}: Riccati value matrix is not positive semidefinite (lambda_min = {lambda_min:.6e})")]
    IndefiniteValue { stage: usize, lambda_min: f64 },

    #[error("stage {stage}: singular matrix in {what} (condition estimate {condition:.3e})")]
    Singular {
        stage: usize,
        what: &'static str,
        condition: f64,
    },

    #[error("gain is outside the feasible set: stage {stage} has lambda_min(H) = {lambda_min:.6e}")]
    Infeasible { stage: usize, lambda_min: f64 },

    #[error("stationarity check failed: |F| = {frob_f:.3e}, |E| = {frob_e:.3e}")]
    NotStationary { frob_f: f64, frob_e: f64 },

    #[error("inner loop did not reach gap {tolerance:.3e} within {iterations} iterations (last gap {last_gap:.3e})")]
    InnerNotConverged {
        iterations: usize,
        tolerance: f64,
        last_gap: f64,
        gaps: Vec<f64>,
    },

    #[error("sampled {what} is not finite; the rollouts blew up")]
    NonFiniteEstimate { what: &'static str },

    #[error("estimated covariance is not invertible (lambda_min = {lambda_min:.3e}, threshold {threshold:.3e})")]
    CovarianceGate { lambda_min: f64, threshold: f64 },

    #[error("instance too large for the dense oracle: dimension {dim} exceeds {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = GameError> = std::result::Result<T, E>;
