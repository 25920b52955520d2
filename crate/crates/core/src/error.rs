use thiserror::Error;

use crate::kb::{Concept, Label};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("arity error: expected a sequence of length {expected}, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("domain error: concept {value} is outside [0, {concepts})")]
    Domain { value: Concept, concepts: usize },

    #[error("budget exceeded: {what} needs {size} elements but the cap is {cap}")]
    BudgetExceeded { what: &'static str, size: u128, cap: usize },

    #[error("unknown builtin knowledge base `{0}` (expected add, mul, xor or modadd)")]
    UnknownBuiltin(String),

    #[error("incomplete truth table: no entry for {missing:?} ({count} tuples missing)")]
    IncompleteTable { missing: Vec<Concept>, count: usize },

    #[error("conflicting truth table entries for {seq:?}: {first} vs {second}")]
    ConflictingTable { seq: Vec<Concept>, first: Label, second: Label },

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("label {0} is not produced by any sequence of the candidate pool")]
    UnknownLabel(Label),

    #[error("the constraint problem has no solution")]
    NoSolution,

    #[error("enumeration stopped at the cap of {cap} solutions; verdict withheld")]
    IncompleteEnumeration { cap: usize },

    #[error("invalid predictor: {0}")]
    InvalidPredictor(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("abduction failed: no candidate sequence yields label {0}")]
    AbductionFailure(Label),

    #[error("tasks disagree on the concept count ({expected} vs {got})")]
    ConceptMismatch { expected: usize, got: usize },

    #[error("an ensemble needs at least one task")]
    EmptyEnsemble,

    #[error("{path}: {message}")]
    TaskFile { path: String, message: String },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
