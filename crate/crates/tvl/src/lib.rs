//! Decision procedures for two-variable logics with counting.
//!
//! The crate decides finite satisfiability of guarded two-variable logic with
//! local Presburger quantifiers (`gp2`) and of two-variable logic with counting
//! plus global cardinality constraints (`c2g`), answers 1-type spectrum queries,
//! and builds explicit finite models. Every answer can be cross-checked against
//! the exhaustive model finder in [`semantics`].

pub mod ast;
pub mod c2solver;
pub mod config;
pub mod gp2solver;
pub mod linear;
pub mod normalize;
pub mod par;
pub mod parser;
pub mod semantics;
pub mod typespace;
