//! Lasserre vector families given by exact inner-product oracles: a perfect
//! family for satisfiable CSP instances, its lift to the DkS instance of the
//! reduction, and verifiers for every constraint either claims.

pub mod oracle;
pub mod space;
pub mod verify;

use thiserror::Error;

pub use oracle::{build_planted_csp_oracle, lift_to_dks, CspLabel, GramFile, GramKind, GramOracle, LiftedOracle, MomentOracle, PlantedOracle, VertexSet};
pub use space::SolutionSpace;
pub use verify::{verify_csp_properties, verify_dks_lasserre, verify_min_degree, Check, CspVerifyOptions, DksVerifyOptions, MinDegreeOptions, PairEnumeration, Verdict};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LasserreError {
    #[error("the constraint system has no solution")]
    EmptySpace,
    #[error("round bound must be at least 1")]
    BadRounds,
    #[error("label of size {size} exceeds round bound {bound}")]
    TooLarge { size: usize, bound: usize },
    #[error("{rounds} rounds of arity {arity} need {} CSP rounds, oracle serves {bound}", rounds * arity)]
    RoundBudget { rounds: usize, arity: usize, bound: usize },
    #[error("label not served: {0}")]
    NotServed(String),
    #[error("{0}")]
    Mismatch(String),
}
