//! Executable metatheory for GrEff: random program generators, derived cast
//! implementations, the error ordering, syntactic precision, and the
//! property batches built from them.

pub mod casts;
pub mod gen;
pub mod order;
pub mod precision;
pub mod suite;
pub mod walk;

pub use casts::{
    cast_factorizations, expand_effect_cast_as_handler, expand_effect_casts, expand_fun_cast, CastError, CastKind,
};
pub use order::{semantic_order, OrderVerdict, Side};
pub use precision::{check_graduality_pair, imprecisify, syntactic_precision, PrecisionPair};
