//! Proof terms for precision, with composition (cut).

use std::collections::BTreeMap;

use super::{precision, precision_eff, EffMap, EffectType, Name, OpType, Signature, ValueType};
use thiserror::Error;

/// A derivation of `A ⊑ B` or `σ ⊑ σ'`. Value and effect derivations share
/// one type; constructors fix which sort a node belongs to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Deriv {
    BoolRefl,
    UnitRefl,
    StrRefl,
    QueueCong(Box<Deriv>),
    ArrowCong(Box<Deriv>, Box<Deriv>, Box<Deriv>),
    DynRefl,
    /// `inj(d_c) : σ_c ⊑ ?`, where `d_c : σ_c ⊑ Σ|supp(σ_c)`.
    Inj(Box<Deriv>),
    /// Request and response derivations per operation.
    ConcreteCong(BTreeMap<Name, (Deriv, Deriv)>),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DerivError {
    #[error("cannot compose: right endpoint {0} differs from left endpoint {1}")]
    EndpointMismatch(String, String),
}

/// Either endpoint of a derivation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Endpoint {
    Value(ValueType),
    Effect(EffectType),
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Endpoint::Value(v) => write!(f, "{v}"),
            Endpoint::Effect(e) => write!(f, "{e}"),
        }
    }
}

impl Deriv {
    pub fn is_effect(&self) -> bool {
        matches!(self, Deriv::DynRefl | Deriv::Inj(_) | Deriv::ConcreteCong(_))
    }

    pub fn left(&self) -> Endpoint {
        self.endpoint(true)
    }

    pub fn right(&self) -> Endpoint {
        self.endpoint(false)
    }

    fn endpoint(&self, left: bool) -> Endpoint {
        match self {
            Deriv::DynRefl => Endpoint::Effect(EffectType::Dyn),
            Deriv::Inj(d) => {
                if left {
                    d.endpoint(true)
                } else {
                    Endpoint::Effect(EffectType::Dyn)
                }
            }
            Deriv::ConcreteCong(m) => Endpoint::Effect(EffectType::Concrete(
                m.iter().map(|(n, (c, d))| (n.clone(), OpType::new(c.vend(left), d.vend(left)))).collect(),
            )),
            _ => Endpoint::Value(self.vend(left)),
        }
    }

    fn vend(&self, left: bool) -> ValueType {
        match self {
            Deriv::BoolRefl => ValueType::Bool,
            Deriv::UnitRefl => ValueType::Unit,
            Deriv::StrRefl => ValueType::Str,
            Deriv::QueueCong(d) => ValueType::queue(d.vend(left)),
            Deriv::ArrowCong(a, e, b) => ValueType::arrow(a.vend(left), e.eend(left), b.vend(left)),
            _ => unreachable!("effect derivation in value position"),
        }
    }

    fn eend(&self, left: bool) -> EffectType {
        match self.endpoint(left) {
            Endpoint::Effect(e) => e,
            Endpoint::Value(_) => unreachable!("value derivation in effect position"),
        }
    }

    pub fn left_value(&self) -> Option<ValueType> {
        match self.left() {
            Endpoint::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn right_value(&self) -> Option<ValueType> {
        match self.right() {
            Endpoint::Value(v) => Some(v),
            _ => None,
        }
    }

    /// Checks the side condition of every `inj`: its inner right endpoint is
    /// Σ restricted to the injected operations.
    pub fn wellformed(&self, sig: &Signature) -> bool {
        match self {
            Deriv::BoolRefl | Deriv::UnitRefl | Deriv::StrRefl | Deriv::DynRefl => true,
            Deriv::QueueCong(d) => d.wellformed(sig),
            Deriv::ArrowCong(a, e, b) => a.wellformed(sig) && e.wellformed(sig) && b.wellformed(sig),
            Deriv::Inj(d) => {
                let Endpoint::Effect(EffectType::Concrete(right)) = d.right() else { return false };
                sig.restrict(right.keys()).is_some_and(|r| r == right) && d.wellformed(sig)
            }
            Deriv::ConcreteCong(m) => m.values().all(|(c, d)| c.wellformed(sig) && d.wellformed(sig)),
        }
    }
}

/// The reflexivity derivation `A : A ⊑ A`.
pub fn reflexivity(a: &ValueType) -> Deriv {
    match a {
        ValueType::Bool => Deriv::BoolRefl,
        ValueType::Unit => Deriv::UnitRefl,
        ValueType::Str => Deriv::StrRefl,
        ValueType::Queue(x) => Deriv::QueueCong(Box::new(reflexivity(x))),
        ValueType::Arrow(x, e, y) => {
            Deriv::ArrowCong(Box::new(reflexivity(x)), Box::new(reflexivity_eff(e)), Box::new(reflexivity(y)))
        }
    }
}

pub fn reflexivity_eff(e: &EffectType) -> Deriv {
    match e {
        EffectType::Dyn => Deriv::DynRefl,
        EffectType::Concrete(m) => Deriv::ConcreteCong(
            m.iter().map(|(n, op)| (n.clone(), (reflexivity(&op.req), reflexivity(&op.resp)))).collect(),
        ),
    }
}

/// The unique derivation of `a ⊑ b`, if there is one.
pub fn derive_precision(a: &ValueType, b: &ValueType) -> Option<Deriv> {
    use ValueType::*;
    match (a, b) {
        (Bool, Bool) => Some(Deriv::BoolRefl),
        (Unit, Unit) => Some(Deriv::UnitRefl),
        (Str, Str) => Some(Deriv::StrRefl),
        (Queue(x), Queue(y)) => Some(Deriv::QueueCong(Box::new(derive_precision(x, y)?))),
        (Arrow(a1, e1, b1), Arrow(a2, e2, b2)) => Some(Deriv::ArrowCong(
            Box::new(derive_precision(a1, a2)?),
            Box::new(derive_precision_eff(e1, e2)?),
            Box::new(derive_precision(b1, b2)?),
        )),
        _ => None,
    }
}

/// Effect derivations. For `σ_c ⊑ ?` the injected derivation targets the
/// erasure of `σ_c`, which is `Σ|supp(σ_c)` whenever `σ_c` is well formed.
pub fn derive_precision_eff(s: &EffectType, t: &EffectType) -> Option<Deriv> {
    match (s, t) {
        (EffectType::Dyn, EffectType::Dyn) => Some(Deriv::DynRefl),
        (EffectType::Concrete(m), EffectType::Dyn) => {
            let erased: EffMap = m.iter().map(|(n, op)| (n.clone(), op.erase())).collect();
            Some(Deriv::Inj(Box::new(derive_row(m, &erased)?)))
        }
        (EffectType::Concrete(m), EffectType::Concrete(m2)) => derive_row(m, m2),
        (EffectType::Dyn, EffectType::Concrete(_)) => None,
    }
}

fn derive_row(m: &EffMap, m2: &EffMap) -> Option<Deriv> {
    if m.len() != m2.len() {
        return None;
    }
    let mut out = BTreeMap::new();
    for (n, op) in m {
        let op2 = m2.get(n)?;
        out.insert(n.clone(), (derive_precision(&op.req, &op2.req)?, derive_precision(&op.resp, &op2.resp)?));
    }
    Some(Deriv::ConcreteCong(out))
}

/// Generic entry point over either sort.
pub fn derive(a: &Endpoint, b: &Endpoint) -> Option<Deriv> {
    match (a, b) {
        (Endpoint::Value(a), Endpoint::Value(b)) => derive_precision(a, b),
        (Endpoint::Effect(a), Endpoint::Effect(b)) => derive_precision_eff(a, b),
        _ => None,
    }
}

/// `c ∘ d` for `c : A ⊑ B` and `d : B ⊑ C`.
pub fn compose_derivations(c: &Deriv, d: &Deriv) -> Result<Deriv, DerivError> {
    let (cr, dl) = (c.right(), d.left());
    if cr != dl {
        return Err(DerivError::EndpointMismatch(cr.to_string(), dl.to_string()));
    }
    Ok(compose(c, d))
}

fn compose(c: &Deriv, d: &Deriv) -> Deriv {
    use Deriv::*;
    match (c, d) {
        (BoolRefl, BoolRefl) => BoolRefl,
        (UnitRefl, UnitRefl) => UnitRefl,
        (StrRefl, StrRefl) => StrRefl,
        (QueueCong(x), QueueCong(y)) => QueueCong(Box::new(compose(x, y))),
        (ArrowCong(a1, e1, b1), ArrowCong(a2, e2, b2)) => {
            ArrowCong(Box::new(compose(a1, a2)), Box::new(compose(e1, e2)), Box::new(compose(b1, b2)))
        }
        (DynRefl, DynRefl) => DynRefl,
        (Inj(x), DynRefl) => Inj(x.clone()),
        (ConcreteCong(_), Inj(y)) => Inj(Box::new(compose(c, y))),
        (ConcreteCong(m1), ConcreteCong(m2)) => ConcreteCong(
            m1.iter()
                .map(|(n, (r1, s1))| {
                    let (r2, s2) = &m2[n];
                    (n.clone(), (compose(r1, r2), compose(s1, s2)))
                })
                .collect(),
        ),
        _ => unreachable!("endpoints were checked before composing"),
    }
}

/// Agreement of the derivation with the boolean decision procedures.
pub fn derivation_agrees(d: &Deriv) -> bool {
    match (d.left(), d.right()) {
        (Endpoint::Value(a), Endpoint::Value(b)) => precision(&a, &b),
        (Endpoint::Effect(a), Endpoint::Effect(b)) => precision_eff(&a, &b),
        _ => false,
    }
}
