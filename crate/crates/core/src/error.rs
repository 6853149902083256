use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("p=2 unsupported (odd primes only)")]
    EvenPrime,

    #[error("{0} is not an odd prime")]
    NotPrime(u64),

    #[error("valuation of zero undefined")]
    ZeroValuation,

    #[error("{0} is not a p-adic unit")]
    NotUnit(String),

    #[error("{0} is not a square")]
    NotSquare(String),

    #[error("degenerate form (det = 0)")]
    DegenerateForm,

    #[error("matrix is not traceless")]
    NotTraceless,

    #[error("degenerate special endomorphism: q(j) = 0")]
    DegenerateEndomorphism,

    #[error("q(j) = {0} is not p-integral")]
    NonIntegralNorm(String),

    #[error("T not represented by anticommuting special endomorphisms: {0}")]
    NotRealizable(String),

    #[error("expected a {expected} form, got a {found} form")]
    ConventionMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("form entry {0} is not p-integral")]
    NonIntegralForm(String),

    #[error("invalid invariants: {0}")]
    InvalidInvariants(String),

    #[error("vertices {0} and {1} are not adjacent")]
    NotAdjacent(String, String),

    #[error("cycle does not meet chart")]
    ChartMiss,

    #[error("shared component in chart")]
    SharedComponent,

    #[error("brute force requires a diagonalizing basis; use quadratic-forms::realize")]
    NonDiagonalGram,

    #[error("{formula} only stated for mu = {required}")]
    WrongMu { formula: &'static str, required: i8 },

    #[error("resource limit exceeded: {what} ({needed} > {limit})")]
    Resource {
        what: &'static str,
        needed: u128,
        limit: u128,
    },

    #[error("linear system is singular")]
    SingularSystem,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("internal consistency failure: {0}")]
    Internal(String),
}
