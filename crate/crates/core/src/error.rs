use thiserror::Error;

/// Error type shared by all modules.
///
/// `Domain` marks invalid inputs or parameters; the remaining variants mark
/// numerical conditions detected while computing. Callers that need to map
/// errors to process exit codes can rely on [`SimError::is_domain`].
#[derive(Debug, Error)]
pub enum SimError {
    /// Invalid argument or parameter (caller error).
    #[error("domain error: {0}")]
    Domain(String),

    /// A computed quantity violated a validity bound (for example a
    /// second-order expansion driven outside its regime).
    #[error("validity error: {0}")]
    Validity(String),

    /// A truncated Fock space was too small for the requested accuracy.
    /// `suggested` is a size that would have been sufficient.
    #[error("truncation too small: {msg} (suggested size {suggested})")]
    Truncation { msg: String, suggested: usize },

    /// An iterative solver stopped before reaching its tolerance.
    #[error("did not converge: {msg} (best residual {residual:.3e})")]
    NonConvergence { msg: String, residual: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl SimError {
    /// True for caller-side errors (bad inputs, unreadable files), false for
    /// numerical conditions discovered mid-computation.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            SimError::Domain(_) | SimError::Io(_) | SimError::Csv(_) | SimError::Json(_)
        )
    }
}
