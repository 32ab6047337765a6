use thiserror::Error;

/// Everything that can go wrong while evaluating the model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EitError {
    /// Parameters outside the physical domain (negative rates, poles, zero photons).
    #[error("domain error: {0}")]
    Domain(String),

    /// A moment of the fluctuation operator beyond the analytic order-2 table.
    #[error("moment order j + k = {order} exceeds the supported order 2")]
    Order { order: usize },

    /// The alternating l-series did not settle before the cap.
    #[error("l-series did not converge by l = {l_cap} (entry {m},{n})")]
    Convergence { l_cap: usize, m: usize, n: usize },

    /// A state does not fit in the truncated basis.
    #[error("truncation tail mass {tail:.3e} exceeds {tol:.1e} in a basis of size {dim}")]
    TailMass { tail: f64, tol: f64, dim: usize },

    /// A basis or space that is too small or too large to be used.
    #[error("invalid dimension: {0}")]
    Dimension(String),

    /// A malformed sweep description.
    #[error("invalid sweep: {0}")]
    Sweep(String),
}

impl EitError {
    /// Whether the error stems from truncation or convergence rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            EitError::Convergence { .. } | EitError::TailMass { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, EitError>;
