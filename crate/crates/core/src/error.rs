use thiserror::Error;

/// Errors produced by the workbench.
#[derive(Debug, Error)]
pub enum FetError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A request that is well-formed but not supported (size caps, unknown names).
    #[error("usage error: {0}")]
    Usage(String),

    /// The Markov chain is not absorbing: listed states cannot reach consensus.
    #[error("chain is not absorbing: {} state(s) cannot reach (n, n), e.g. {:?}", .states.len(), .states.first())]
    NotAbsorbing { states: Vec<(u32, u32)> },

    /// An iterative solve stopped before reaching its tolerance.
    #[error("solver did not converge: relative residual {residual:e} after {iterations} sweeps")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = FetError> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(FetError::Domain(msg.into()))
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return domain(format!("{name} = {p} is not a probability in [0, 1]"));
    }
    Ok(())
}
