//! Error taxonomy shared by all layers of the engine.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("composite modulus: {0} is not prime")]
    CompositeModulus(u64),
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("context mismatch: {0}")]
    ContextMismatch(String),
    #[error("degree overflow: {0}")]
    DegreeOverflow(String),
    #[error("not invertible: {0}")]
    NotInvertibleDiagnostic(String),
    #[error("laurent floor too shallow: {0}")]
    FloorTooShallow(String),
    #[error("rank overflow: derived rank {got} exceeds limit {limit}")]
    RankOverflow { got: usize, limit: usize },
    #[error("module is not ordinary-shaped at slope zero: {0}")]
    NotOrdinaryShape(String),
    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("Teichmueller iteration failed to contract: {0}")]
    NonContraction(String),
    #[error("Galois invariance violated: {0}")]
    GaloisInvarianceViolation(String),
    #[error("fiber matrix not invertible at {0}")]
    NonInvertibleFiber(String),
    #[error("splitting iteration failed to gain p-divisibility: {0}")]
    NonTermination(String),
    #[error("integrality violated: {0}")]
    IntegralityViolation(String),
    #[error("negative-exponent support in a function-space result: {0}")]
    NegativeSupport(String),
    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),
    #[error("truncation unsound: {0}")]
    TruncationUnsound(String),
    #[error("module is not normalized")]
    NotNormalized,
    #[error("unit lost in contraction (module not ordinary at slope zero): {0}")]
    UnitLost(String),
    #[error("no unique unit root at point {0}")]
    NotOrdinaryAtPoint(String),
    #[error("coefficient order unresolved at current precision: {0}")]
    UnresolvedOrd(String),
    #[error("parse error at line {line}, column {col}: {msg}")]
    ParseError { line: usize, col: usize, msg: String },
    #[error("invalid field `{field}`: {msg}")]
    ValidationError { field: String, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
