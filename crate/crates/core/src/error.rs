use thiserror::Error;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: expected n={expected_n}, half_width={expected_hw}; got n={got_n}, half_width={got_hw}")]
    GridMismatch {
        expected_n: usize,
        expected_hw: f64,
        got_n: usize,
        got_hw: f64,
    },

    #[error("inadmissible soliton parameters (b={b}, omega={omega}, c={c}): {reason}")]
    InvalidParams {
        b: f64,
        omega: f64,
        c: f64,
        reason: String,
    },

    #[error("no sign change of the momentum on [{lo}, {hi}] for b={b}")]
    NoBracket { b: f64, lo: f64, hi: f64 },

    #[error("finite-difference step {h} too large for margin {margin}")]
    StepTooLarge { h: f64, margin: f64 },

    #[error("spectral classification failed: {negative} negative, {kernel} kernel, {unresolved} unresolved eigenvalues (expected 1, 2, 0); lowest eigenvalues {lowest:?}")]
    Classification {
        negative: usize,
        kernel: usize,
        unresolved: usize,
        lowest: Vec<f64>,
    },

    #[error("profile drops below the positivity floor ({min} < {floor})")]
    PositivityFloor { min: f64, floor: f64 },

    #[error("invalid evolve configuration: {0}")]
    InvalidConfig(String),

    #[error("integration aborted at t={time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("x-weighted window leaks mass: outside fraction {leak:e} exceeds budget {budget:e}")]
    WindowBudget { leak: f64, budget: f64 },

    #[error("modulation Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonFailed { iterations: usize, residual: f64 },

    #[error("modulation scale {lambda} left the admissible band (1 - {bound}, 1 + {bound})")]
    LambdaOutOfRange { lambda: f64, bound: f64 },

    #[error("Gram-Schmidt seed is degenerate: (eps1, phi) = {overlap:e}")]
    DegenerateSeed { overlap: f64 },

    #[error("{0}")]
    Diagnostic(String),
}
