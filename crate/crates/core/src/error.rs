use crate::scf::Solution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field has {actual} samples but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite sample at node {0}")]
    NonFinite(usize),

    #[error("field is not normalizable: {0}")]
    NotNormalizable(String),

    #[error("integral of rho^(2n) underflows to zero for n = {0}")]
    DegeneratePower(f64),

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    /// The partially converged solution is carried along so callers can
    /// still report it.
    #[error("solver stopped after {} iterations without meeting its tolerances", .0.report.iterations)]
    NotConverged(Box<Solution>),

    #[error("mixing produced negative density nodes in {0} consecutive iterations")]
    NonPositiveIterate(usize),

    #[error("family index n = {0} is not a power of two")]
    UnsanctionedIndex(f64),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
