use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("operator carries no tensor-factor dimensions (or they do not match its order)")]
    MissingDims,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (max |U^dag U - I| = {0:.3e})")]
    NotUnitary(f64),

    #[error("operator is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("map is not Hermitian-preserving (max Choi asymmetry {0:.3e})")]
    NotHermitianPreserving(f64),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("inconsistent marginal at index {index}: |Tr_E(joint) - system| = {deviation:.3e}")]
    InconsistentMarginals { index: usize, deviation: f64 },

    #[error("input/output pairs are not consistent with a linear map (residual {0:.3e})")]
    InconsistentAction(f64),

    #[error("offset operator has non-zero partial trace (norm {0:.3e})")]
    NotTraceless(f64),

    #[error("steering outcome has probability {0:.3e}")]
    ZeroProbability(f64),

    #[error("parameter out of domain: {0}")]
    OutOfDomain(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
