//! GrEff: a gradually typed language with effect handlers.
//!
//! The pipeline is `surface::parse_program` → `elaborate::elab_program` →
//! `core_lang::typing` (validation) → `eval::evaluate`.

pub mod core_lang;
pub mod corpus;
pub mod elaborate;
pub mod eval;
pub mod surface;
pub mod typesys;

pub use typesys::{EffectType, Name, OpType, Signature, ValueType};
