//! Learnability analysis of neuro-symbolic tasks through derived constraint
//! satisfaction problems.
//!
//! A task is a knowledge base mapping concept sequences to labels. Its derived
//! CSP asks which relabelings of the perception clusters stay consistent with
//! every observed label; the task is learnable exactly when the identity is the
//! only solution. See the `nesy-dcsp` binary for the command-line front end.

pub mod cli;
pub mod dcsp;
pub mod ensemble;
pub mod error;
pub mod kb;
pub mod manifest;
pub mod risks;
pub mod simulate;
pub mod task;

pub use dcsp::{DcspInstance, LearnabilityReport, SolutionSpace, SolveOptions};
pub use error::{Error, Result};
pub use kb::{AbductionIndex, Concept, ConceptSeq, KnowledgeBase, Label};
pub use risks::Predictor;
pub use simulate::ConceptDistribution;
pub use task::{Task, TaskSpec};
