use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} supports at most {limit} spins, got {n_spins}")]
    Capacity {
        what: &'static str,
        n_spins: usize,
        limit: usize,
    },

    /// The QFIM cannot be inverted reliably.
    #[error("QFIM is singular (smallest eigenvalue {min_eigenvalue:e})")]
    SingularQfim { min_eigenvalue: f64 },

    #[error("every measurement outcome has probability below the floor")]
    DegenerateMeasurement,

    /// ⟨J⟩ vanishes, so the mean-spin direction is undefined. The squeezing
    /// parameter evaluated in the covariance frame is still reported.
    #[error("mean-spin direction undefined (|<J>| below threshold); xi_S^2 = {xi_s_sq}")]
    MsdUndefined { xi_s_sq: f64 },

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
