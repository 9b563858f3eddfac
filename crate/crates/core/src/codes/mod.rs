//! Finite fields, linear algebra over them, and generalized BCH codes.

pub mod code;
pub mod field;
pub mod linalg;
