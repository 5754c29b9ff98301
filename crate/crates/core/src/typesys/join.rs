//! Gradual join (⋎) and meet (⋏), used by the elaborator to combine branch
//! and operand typings.
//!
//! `?` is absorbing for both the join and the meet. A join that forgot the
//! dynamic side (`σ ⋎ ? = σ`) would hand the result of an untracked call a
//! concrete effect it cannot be typed at, so the join keeps `?` instead.

use super::{EffMap, EffectType, OpType, ValueType};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("no gradual join/meet of {left} and {right}")]
pub struct JoinUndefined {
    pub left: String,
    pub right: String,
}

fn undefined(l: impl ToString, r: impl ToString) -> JoinUndefined {
    JoinUndefined { left: l.to_string(), right: r.to_string() }
}

pub fn gradual_join(a: &ValueType, b: &ValueType) -> Result<ValueType, JoinUndefined> {
    use ValueType::*;
    match (a, b) {
        (Bool, Bool) | (Unit, Unit) | (Str, Str) => Ok(a.clone()),
        (Queue(x), Queue(y)) => Ok(ValueType::queue(gradual_join(x, y)?)),
        (Arrow(a1, e1, b1), Arrow(a2, e2, b2)) => Ok(ValueType::arrow(
            gradual_meet(a1, a2)?,
            gradual_join_eff(e1, e2)?,
            gradual_join(b1, b2)?,
        )),
        _ => Err(undefined(a, b)),
    }
}

pub fn gradual_meet(a: &ValueType, b: &ValueType) -> Result<ValueType, JoinUndefined> {
    use ValueType::*;
    match (a, b) {
        (Bool, Bool) | (Unit, Unit) | (Str, Str) => Ok(a.clone()),
        (Queue(x), Queue(y)) => Ok(ValueType::queue(gradual_meet(x, y)?)),
        (Arrow(a1, e1, b1), Arrow(a2, e2, b2)) => Ok(ValueType::arrow(
            gradual_join(a1, a2)?,
            gradual_meet_eff(e1, e2)?,
            gradual_meet(b1, b2)?,
        )),
        _ => Err(undefined(a, b)),
    }
}

/// Shared operations must carry the same typing on both sides; rows are only
/// joined within one module, where every name has a single local typing.
fn shared(name: &str, l: &OpType, r: &OpType) -> Result<OpType, JoinUndefined> {
    if l == r {
        Ok(l.clone())
    } else {
        Err(undefined(format!("{name} : {l}"), format!("{name} : {r}")))
    }
}

pub fn gradual_join_eff(s: &EffectType, t: &EffectType) -> Result<EffectType, JoinUndefined> {
    match (s, t) {
        (EffectType::Dyn, _) | (_, EffectType::Dyn) => Ok(EffectType::Dyn),
        (EffectType::Concrete(s), EffectType::Concrete(t)) => {
            let mut out: EffMap = s.clone();
            for (n, op) in t {
                let merged = match s.get(n) {
                    Some(op0) => shared(n, op0, op)?,
                    None => op.clone(),
                };
                out.insert(n.clone(), merged);
            }
            Ok(EffectType::Concrete(out))
        }
    }
}

pub fn gradual_meet_eff(s: &EffectType, t: &EffectType) -> Result<EffectType, JoinUndefined> {
    match (s, t) {
        (EffectType::Dyn, _) | (_, EffectType::Dyn) => Ok(EffectType::Dyn),
        (EffectType::Concrete(s), EffectType::Concrete(t)) => {
            let mut out = EffMap::new();
            for (n, op) in s {
                if let Some(op2) = t.get(n) {
                    out.insert(n.clone(), shared(n, op, op2)?);
                }
            }
            Ok(EffectType::Concrete(out))
        }
    }
}
