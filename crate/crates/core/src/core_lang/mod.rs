//! Core GrEff: the cast calculus the surface language elaborates into.

pub mod sexpr;
pub mod term;
pub mod typing;

pub use sexpr::{parse_term, pretty_term, print_term};
pub use term::{CastUnjustified, Clause, HandleKind, Handler, Term};
pub use typing::{check, synth, typecheck, Ctx, Synth, TypeError};
