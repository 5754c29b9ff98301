//! Subtyping (≤), precision (⊑), gradual subtyping (≲) and ≤-least upper bounds.

use super::{EffMap, EffectType, OpType, ValueType};

pub fn subtype(a: &ValueType, b: &ValueType) -> bool {
    use ValueType::*;
    match (a, b) {
        (Bool, Bool) | (Unit, Unit) | (Str, Str) => true,
        (Queue(x), Queue(y)) => subtype(x, y),
        (Arrow(a1, e1, b1), Arrow(a2, e2, b2)) => subtype(a2, a1) && subtype_eff(e1, e2) && subtype(b1, b2),
        _ => false,
    }
}

/// Depth rule for one operation: request covariant, response contravariant.
pub fn subtype_op(a: &OpType, b: &OpType) -> bool {
    subtype(&a.req, &b.req) && subtype(&b.resp, &a.resp)
}

pub fn subtype_eff(s: &EffectType, t: &EffectType) -> bool {
    match (s, t) {
        (EffectType::Dyn, EffectType::Dyn) => true,
        (EffectType::Concrete(s), EffectType::Concrete(t)) => {
            s.iter().all(|(n, op)| t.get(n).is_some_and(|op2| subtype_op(op, op2)))
        }
        _ => false,
    }
}

pub fn precision(a: &ValueType, b: &ValueType) -> bool {
    use ValueType::*;
    match (a, b) {
        (Bool, Bool) | (Unit, Unit) | (Str, Str) => true,
        (Queue(x), Queue(y)) => precision(x, y),
        (Arrow(a1, e1, b1), Arrow(a2, e2, b2)) => precision(a1, a2) && precision_eff(e1, e2) && precision(b1, b2),
        _ => false,
    }
}

pub fn precision_eff(s: &EffectType, t: &EffectType) -> bool {
    match (s, t) {
        (_, EffectType::Dyn) => true,
        (EffectType::Dyn, EffectType::Concrete(_)) => false,
        (EffectType::Concrete(s), EffectType::Concrete(t)) => {
            s.len() == t.len()
                && s.iter().all(|(n, op)| {
                    t.get(n).is_some_and(|op2| precision(&op.req, &op2.req) && precision(&op.resp, &op2.resp))
                })
        }
    }
}

pub fn gradual_subtype(a: &ValueType, b: &ValueType) -> bool {
    use ValueType::*;
    match (a, b) {
        (Bool, Bool) | (Unit, Unit) | (Str, Str) => true,
        (Queue(x), Queue(y)) => gradual_subtype(x, y),
        (Arrow(a1, e1, b1), Arrow(a2, e2, b2)) => {
            gradual_subtype(a2, a1) && gradual_subtype_eff(e1, e2) && gradual_subtype(b1, b2)
        }
        _ => false,
    }
}

pub fn gradual_subtype_eff(s: &EffectType, t: &EffectType) -> bool {
    match (s, t) {
        (EffectType::Dyn, _) | (_, EffectType::Dyn) => true,
        (EffectType::Concrete(s), EffectType::Concrete(t)) => s.iter().all(|(n, op)| {
            t.get(n).is_some_and(|op2| gradual_subtype(&op.req, &op2.req) && gradual_subtype(&op2.resp, &op.resp))
        }),
    }
}

/// `A ~ B`: gradual subtyping in both directions.
pub fn compatible(a: &ValueType, b: &ValueType) -> bool {
    gradual_subtype(a, b) && gradual_subtype(b, a)
}

/// Least upper bound in ≤, when one exists.
pub fn lub(a: &ValueType, b: &ValueType) -> Option<ValueType> {
    use ValueType::*;
    match (a, b) {
        (Bool, Bool) | (Unit, Unit) | (Str, Str) => Some(a.clone()),
        (Queue(x), Queue(y)) => Some(ValueType::queue(lub(x, y)?)),
        (Arrow(a1, e1, b1), Arrow(a2, e2, b2)) => {
            Some(ValueType::arrow(glb(a1, a2)?, lub_eff(e1, e2)?, lub(b1, b2)?))
        }
        _ => None,
    }
}

/// Greatest lower bound in ≤, when one exists.
pub fn glb(a: &ValueType, b: &ValueType) -> Option<ValueType> {
    use ValueType::*;
    match (a, b) {
        (Bool, Bool) | (Unit, Unit) | (Str, Str) => Some(a.clone()),
        (Queue(x), Queue(y)) => Some(ValueType::queue(glb(x, y)?)),
        (Arrow(a1, e1, b1), Arrow(a2, e2, b2)) => {
            Some(ValueType::arrow(lub(a1, a2)?, glb_eff(e1, e2)?, glb(b1, b2)?))
        }
        _ => None,
    }
}

/// Least upper bound of effect types in ≤: union of rows with depth-wise
/// bounds on shared operations. `?` is only comparable with itself.
pub fn lub_eff(s: &EffectType, t: &EffectType) -> Option<EffectType> {
    match (s, t) {
        (EffectType::Dyn, EffectType::Dyn) => Some(EffectType::Dyn),
        (EffectType::Concrete(s), EffectType::Concrete(t)) => {
            let mut out: EffMap = s.clone();
            for (n, op) in t {
                let merged = match s.get(n) {
                    Some(op0) => OpType::new(lub(&op0.req, &op.req)?, glb(&op0.resp, &op.resp)?),
                    None => op.clone(),
                };
                out.insert(n.clone(), merged);
            }
            Some(EffectType::Concrete(out))
        }
        _ => None,
    }
}

pub fn glb_eff(s: &EffectType, t: &EffectType) -> Option<EffectType> {
    match (s, t) {
        (EffectType::Dyn, EffectType::Dyn) => Some(EffectType::Dyn),
        (EffectType::Concrete(s), EffectType::Concrete(t)) => {
            let mut out = EffMap::new();
            for (n, op) in s {
                if let Some(op2) = t.get(n) {
                    // A meet of the rows must stay below both, so a shared
                    // operation whose depth types have no bound is dropped.
                    if let (Some(req), Some(resp)) = (glb(&op.req, &op2.req), lub(&op.resp, &op2.resp)) {
                        out.insert(n.clone(), OpType::new(req, resp));
                    }
                }
            }
            Some(EffectType::Concrete(out))
        }
        _ => None,
    }
}
