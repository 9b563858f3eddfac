//! Integrality-gap witnesses for Densest k-Subgraph under lift-and-project
//! hierarchies, together with exact verifiers for every constraint they claim
//! to satisfy.

pub mod codes;
pub mod csp;
pub mod exact;
pub mod graph;
pub mod lab;
pub mod lasserre;
pub mod mixed;
pub mod reduction;
pub mod rng;
pub mod sa;
pub mod steiner;
