use thiserror::Error;

/// Errors shared across the crate.
///
/// Variants are named after the contract they enforce rather than the module
/// that raises them; several modules reuse the same variant (for example
/// `InvalidInput` covers every dimension/finiteness precondition).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Combined rank of the two inputs exceeds the requested block size.
    #[error("rank budget exceeded: {0}")]
    RankBudgetExceeded(String),

    /// A row or column sum of the matrix to complete already exceeds one.
    #[error("infeasible input: {0}")]
    InfeasibleInput(String),

    /// The objective cannot be certified to lie in the requested
    /// curvature class.
    #[error("objective not in class: {0}")]
    NotInClass(String),

    /// A frame that must be orthogonal is not, beyond tolerance.
    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    /// `U^T U != V^T V` beyond tolerance.
    #[error("factors not balanced: {0}")]
    NotBalanced(String),

    #[error("not a stationary point: {0}")]
    NotStationary(String),

    /// The gradient is small but the frames cannot be aligned to the
    /// required diagonal structure; signals numerical degeneracy.
    #[error("certification failed: {0}")]
    CertificationFailed(String),

    #[error("not a pseudo-stationary point: {0}")]
    NotPseudoStationary(String),

    /// Mismatch count outside the feasible range of the reduced problem.
    #[error("infeasible mismatch count: {0}")]
    InfeasibleD(String),

    /// Counterexample requested for a regime the oracle certifies as
    /// factorizable.
    #[error("regime is factorizable: {0}")]
    FactorizableRegime(String),

    /// The quadratic construction is not well defined for these inputs.
    #[error("construction failed: {0}")]
    ConstructionFailed(String),

    /// A witness violates its feasibility constraints.
    #[error("infeasible witness: {0}")]
    Infeasible(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    /// Instance file with an unknown schema version or wrong kind tag.
    #[error("schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
