//! Core value and effect types, the signature, and the relations on them.

mod deriv;
mod join;
mod relations;

use std::collections::BTreeMap;
use std::fmt;

pub use deriv::{
    compose_derivations, derivation_agrees, derive, derive_precision, derive_precision_eff, reflexivity,
    reflexivity_eff, Deriv, DerivError, Endpoint,
};
pub use join::{gradual_join, gradual_join_eff, gradual_meet, gradual_meet_eff, JoinUndefined};
pub use relations::{
    compatible, glb, glb_eff, gradual_subtype, gradual_subtype_eff, lub, lub_eff, precision, precision_eff, subtype,
    subtype_eff, subtype_op,
};

pub type Name = String;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ValueType {
    Bool,
    Unit,
    Str,
    Queue(Box<ValueType>),
    Arrow(Box<ValueType>, Box<EffectType>, Box<ValueType>),
}

/// Request/response typing of one operation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpType {
    pub req: ValueType,
    pub resp: ValueType,
}

/// Concrete effect rows are kept in a `BTreeMap`, so iteration and equality
/// are canonical (lexicographic by operation name).
pub type EffMap = BTreeMap<Name, OpType>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EffectType {
    Dyn,
    Concrete(EffMap),
}

impl OpType {
    pub fn new(req: ValueType, resp: ValueType) -> Self {
        OpType { req, resp }
    }

    pub fn erase(&self) -> OpType {
        OpType::new(self.req.erase(), self.resp.erase())
    }
}

impl ValueType {
    pub fn arrow(dom: ValueType, eff: EffectType, cod: ValueType) -> Self {
        ValueType::Arrow(Box::new(dom), Box::new(eff), Box::new(cod))
    }

    pub fn queue(elem: ValueType) -> Self {
        ValueType::Queue(Box::new(elem))
    }

    /// Replace every effect annotation with `?`.
    pub fn erase(&self) -> ValueType {
        match self {
            ValueType::Bool | ValueType::Unit | ValueType::Str => self.clone(),
            ValueType::Queue(a) => ValueType::queue(a.erase()),
            ValueType::Arrow(a, _, b) => ValueType::arrow(a.erase(), EffectType::Dyn, b.erase()),
        }
    }

    /// True when every effect annotation inside is `?`.
    pub fn is_non_tracking(&self) -> bool {
        match self {
            ValueType::Bool | ValueType::Unit | ValueType::Str => true,
            ValueType::Queue(a) => a.is_non_tracking(),
            ValueType::Arrow(a, e, b) => **e == EffectType::Dyn && a.is_non_tracking() && b.is_non_tracking(),
        }
    }

    pub fn as_arrow(&self) -> Option<(&ValueType, &EffectType, &ValueType)> {
        match self {
            ValueType::Arrow(a, e, b) => Some((a, e, b)),
            _ => None,
        }
    }

    /// Σ ⊢ A.
    pub fn wellformed(&self, sig: &Signature) -> bool {
        match self {
            ValueType::Bool | ValueType::Unit | ValueType::Str => true,
            ValueType::Queue(a) => a.wellformed(sig),
            ValueType::Arrow(a, e, b) => a.wellformed(sig) && e.wellformed(sig) && b.wellformed(sig),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            ValueType::Bool | ValueType::Unit | ValueType::Str => 1,
            ValueType::Queue(a) => 1 + a.size(),
            ValueType::Arrow(a, e, b) => 1 + a.size() + e.size() + b.size(),
        }
    }
}

impl EffectType {
    pub fn empty() -> Self {
        EffectType::Concrete(EffMap::new())
    }

    pub fn single(name: &str, op: OpType) -> Self {
        EffectType::Concrete(EffMap::from([(name.to_string(), op)]))
    }

    pub fn is_dyn(&self) -> bool {
        matches!(self, EffectType::Dyn)
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, EffectType::Concrete(m) if m.is_empty())
    }

    pub fn concrete(&self) -> Option<&EffMap> {
        match self {
            EffectType::Concrete(m) => Some(m),
            EffectType::Dyn => None,
        }
    }

    /// `ε ∈ σ`, reading `?` as every operation of Σ.
    pub fn contains(&self, sig: &Signature, op: &str) -> bool {
        match self {
            EffectType::Dyn => sig.contains(op),
            EffectType::Concrete(m) => m.contains_key(op),
        }
    }

    /// The typing of `op` in this effect type; `?` answers with Σ.
    pub fn lookup(&self, sig: &Signature, op: &str) -> Option<OpType> {
        match self {
            EffectType::Dyn => sig.get(op).cloned(),
            EffectType::Concrete(m) => m.get(op).cloned(),
        }
    }

    /// Operation names, with `?` expanded through Σ.
    pub fn names(&self, sig: &Signature) -> Vec<Name> {
        match self {
            EffectType::Dyn => sig.names(),
            EffectType::Concrete(m) => m.keys().cloned().collect(),
        }
    }

    pub fn erase(&self) -> EffectType {
        EffectType::Dyn
    }

    pub fn wellformed(&self, sig: &Signature) -> bool {
        match self {
            EffectType::Dyn => true,
            EffectType::Concrete(m) => m.iter().all(|(n, op)| {
                sig.get(n).is_some_and(|s| *s == op.erase()) && op.req.wellformed(sig) && op.resp.wellformed(sig)
            }),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            EffectType::Dyn => 1,
            EffectType::Concrete(m) => 1 + m.values().map(|o| o.req.size() + o.resp.size()).sum::<usize>(),
        }
    }
}

/// Global map from operation names to non-tracking request/response types.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    ops: BTreeMap<Name, OpType>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `op`, erasing its types. Returns false if the name is taken.
    pub fn declare(&mut self, name: &str, op: &OpType) -> bool {
        if self.ops.contains_key(name) {
            return false;
        }
        self.ops.insert(name.to_string(), op.erase());
        true
    }

    pub fn get(&self, name: &str) -> Option<&OpType> {
        self.ops.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.ops.contains_key(name)
    }

    pub fn names(&self) -> Vec<Name> {
        self.ops.keys().cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &OpType)> {
        self.ops.iter()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Σ restricted to the given names, as a concrete effect row.
    pub fn restrict<'a>(&self, names: impl IntoIterator<Item = &'a Name>) -> Option<EffMap> {
        names.into_iter().map(|n| self.get(n).map(|op| (n.clone(), op.clone()))).collect()
    }

    pub fn as_effect(&self) -> EffMap {
        self.ops.clone()
    }
}

impl FromIterator<(Name, OpType)> for Signature {
    fn from_iter<I: IntoIterator<Item = (Name, OpType)>>(iter: I) -> Self {
        Signature { ops: iter.into_iter().map(|(n, op)| (n, op.erase())).collect() }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueType::Bool => write!(f, "bool"),
            ValueType::Unit => write!(f, "1"),
            ValueType::Str => write!(f, "str"),
            ValueType::Queue(a) => match **a {
                ValueType::Arrow(..) | ValueType::Queue(_) => write!(f, "Queue ({a})"),
                _ => write!(f, "Queue {a}"),
            },
            ValueType::Arrow(a, e, b) => {
                match **a {
                    ValueType::Arrow(..) => write!(f, "({a})")?,
                    _ => write!(f, "{a}")?,
                }
                write!(f, " -[")?;
                match &**e {
                    EffectType::Dyn => write!(f, "?")?,
                    EffectType::Concrete(m) => write_row(f, m)?,
                }
                write!(f, "]> {b}")
            }
        }
    }
}

fn write_row(f: &mut fmt::Formatter<'_>, m: &EffMap) -> fmt::Result {
    for (i, (n, op)) in m.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{n} : {op}")?;
    }
    Ok(())
}

impl fmt::Display for OpType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ~> {}", self.req, self.resp)
    }
}

impl fmt::Display for EffectType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EffectType::Dyn => write!(f, "?"),
            EffectType::Concrete(m) => {
                write!(f, "[")?;
                write_row(f, m)?;
                write!(f, "]")
            }
        }
    }
}
