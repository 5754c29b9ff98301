//! Cast-explicit core terms.

use std::collections::{BTreeMap, BTreeSet};

use crate::typesys::{precision, precision_eff, EffectType, Name, ValueType};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HandleKind {
    Deep,
    Shallow,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clause {
    pub x: Name,
    pub k: Name,
    /// Request/response typing the clause is checked at.
    pub req: ValueType,
    pub resp: ValueType,
    pub body: Term,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Handler {
    pub kind: HandleKind,
    pub ret_var: Name,
    pub ret_ty: ValueType,
    pub ret_body: Term,
    pub clauses: BTreeMap<Name, Clause>,
    /// Result typing of the whole handle.
    pub eff: EffectType,
    pub ty: ValueType,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    Var(Name),
    True,
    False,
    Unit,
    Str(String),
    Lam(Name, ValueType, Box<Term>),
    /// `fix f : A. V`, a recursive value.
    Fix(Name, ValueType, Box<Term>),
    App(Box<Term>, Box<Term>),
    Let(Name, ValueType, Box<Term>, Box<Term>),
    If(Box<Term>, Box<Term>, Box<Term>),
    Err,
    Raise { op: Name, req: ValueType, resp: ValueType, arg: Box<Term> },
    Handle(Box<Term>, Box<Handler>),
    ValUp(ValueType, ValueType, Box<Term>),
    ValDown(ValueType, ValueType, Box<Term>),
    EffUp(EffectType, EffectType, Box<Term>),
    EffDown(EffectType, EffectType, Box<Term>),
    Concat(Box<Term>, Box<Term>),
    StrEq(Box<Term>, Box<Term>),
    /// A queue of values; `empty[A]` is `QueueVal(A, [])`.
    QueueVal(ValueType, Vec<Term>),
    Enqueue(Box<Term>, Box<Term>),
    CaseQueue { scrut: Box<Term>, elem: ValueType, empty: Box<Term>, x: Name, q: Name, cons: Box<Term> },
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("cast from {from} to {to} is not justified by precision")]
pub struct CastUnjustified {
    pub from: String,
    pub to: String,
}

impl Term {
    pub fn var(x: &str) -> Term {
        Term::Var(x.to_string())
    }

    pub fn str(s: &str) -> Term {
        Term::Str(s.to_string())
    }

    pub fn bool(b: bool) -> Term {
        if b {
            Term::True
        } else {
            Term::False
        }
    }

    pub fn lam(x: &str, a: ValueType, body: Term) -> Term {
        Term::Lam(x.to_string(), a, Box::new(body))
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Box::new(f), Box::new(a))
    }

    pub fn let_(x: &str, a: ValueType, m: Term, n: Term) -> Term {
        Term::Let(x.to_string(), a, Box::new(m), Box::new(n))
    }

    pub fn if_(c: Term, t: Term, e: Term) -> Term {
        Term::If(Box::new(c), Box::new(t), Box::new(e))
    }

    pub fn raise(op: &str, req: ValueType, resp: ValueType, arg: Term) -> Term {
        Term::Raise { op: op.to_string(), req, resp, arg: Box::new(arg) }
    }

    pub fn handle(scrut: Term, h: Handler) -> Term {
        Term::Handle(Box::new(scrut), Box::new(h))
    }

    pub fn val_up(lo: ValueType, hi: ValueType, m: Term) -> Term {
        Term::ValUp(lo, hi, Box::new(m))
    }

    pub fn val_down(lo: ValueType, hi: ValueType, m: Term) -> Term {
        Term::ValDown(lo, hi, Box::new(m))
    }

    pub fn eff_up(lo: EffectType, hi: EffectType, m: Term) -> Term {
        Term::EffUp(lo, hi, Box::new(m))
    }

    pub fn eff_down(lo: EffectType, hi: EffectType, m: Term) -> Term {
        Term::EffDown(lo, hi, Box::new(m))
    }

    /// Upcast that checks its precision side condition.
    pub fn checked_val_up(lo: ValueType, hi: ValueType, m: Term) -> Result<Term, CastUnjustified> {
        check_val(&lo, &hi)?;
        Ok(Term::val_up(lo, hi, m))
    }

    pub fn checked_val_down(lo: ValueType, hi: ValueType, m: Term) -> Result<Term, CastUnjustified> {
        check_val(&lo, &hi)?;
        Ok(Term::val_down(lo, hi, m))
    }

    pub fn checked_eff_up(lo: EffectType, hi: EffectType, m: Term) -> Result<Term, CastUnjustified> {
        check_eff(&lo, &hi)?;
        Ok(Term::eff_up(lo, hi, m))
    }

    pub fn checked_eff_down(lo: EffectType, hi: EffectType, m: Term) -> Result<Term, CastUnjustified> {
        check_eff(&lo, &hi)?;
        Ok(Term::eff_down(lo, hi, m))
    }

    pub fn is_value(&self) -> bool {
        match self {
            Term::Var(_) | Term::True | Term::False | Term::Unit | Term::Str(_) | Term::Lam(..) | Term::Fix(..) => true,
            Term::QueueVal(_, vs) => vs.iter().all(Term::is_value),
            Term::ValUp(lo, hi, v) | Term::ValDown(lo, hi, v) => {
                matches!((lo, hi), (ValueType::Arrow(..), ValueType::Arrow(..))) && v.is_value()
            }
            _ => false,
        }
    }

    /// Closed values are the only things the machine substitutes.
    pub fn is_closed_value(&self) -> bool {
        self.is_value() && self.free_vars().is_empty()
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        fn under(t: &Term, names: &[&Name], bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
            let n = bound.len();
            bound.extend(names.iter().map(|s| (*s).clone()));
            t.collect_free(bound, out);
            bound.truncate(n);
        }
        match self {
            Term::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Term::True | Term::False | Term::Unit | Term::Str(_) | Term::Err => {}
            Term::Lam(x, _, b) | Term::Fix(x, _, b) => under(b, &[x], bound, out),
            Term::Let(x, _, m, n) => {
                m.collect_free(bound, out);
                under(n, &[x], bound, out);
            }
            Term::Handle(m, h) => {
                m.collect_free(bound, out);
                under(&h.ret_body, &[&h.ret_var], bound, out);
                for c in h.clauses.values() {
                    under(&c.body, &[&c.x, &c.k], bound, out);
                }
            }
            Term::CaseQueue { scrut, empty, x, q, cons, .. } => {
                scrut.collect_free(bound, out);
                empty.collect_free(bound, out);
                under(cons, &[x, q], bound, out);
            }
            Term::QueueVal(_, vs) => vs.iter().for_each(|v| v.collect_free(bound, out)),
            _ => self.children().into_iter().for_each(|c| c.collect_free(bound, out)),
        }
    }

    /// Immediate subterms of the binder-free forms.
    fn children(&self) -> Vec<&Term> {
        match self {
            Term::App(a, b) | Term::Concat(a, b) | Term::StrEq(a, b) | Term::Enqueue(a, b) => vec![a, b],
            Term::If(a, b, c) => vec![a, b, c],
            Term::Raise { arg, .. } => vec![arg],
            Term::ValUp(_, _, m) | Term::ValDown(_, _, m) | Term::EffUp(_, _, m) | Term::EffDown(_, _, m) => vec![m],
            _ => vec![],
        }
    }

    /// `self[v/x]` for a closed value `v`; no renaming is needed.
    pub fn subst(&self, x: &str, v: &Term) -> Term {
        let s = |t: &Term| Box::new(t.subst(x, v));
        match self {
            Term::Var(y) if y == x => v.clone(),
            Term::Var(_) | Term::True | Term::False | Term::Unit | Term::Str(_) | Term::Err => self.clone(),
            Term::Lam(y, a, b) => {
                if y == x {
                    self.clone()
                } else {
                    Term::Lam(y.clone(), a.clone(), s(b))
                }
            }
            Term::Fix(y, a, b) => {
                if y == x {
                    self.clone()
                } else {
                    Term::Fix(y.clone(), a.clone(), s(b))
                }
            }
            Term::App(a, b) => Term::App(s(a), s(b)),
            Term::Let(y, a, m, n) => {
                Term::Let(y.clone(), a.clone(), s(m), if y == x { n.clone() } else { s(n) })
            }
            Term::If(a, b, c) => Term::If(s(a), s(b), s(c)),
            Term::Raise { op, req, resp, arg } => {
                Term::Raise { op: op.clone(), req: req.clone(), resp: resp.clone(), arg: s(arg) }
            }
            Term::Handle(m, h) => {
                let ret_body = if h.ret_var == x { h.ret_body.clone() } else { h.ret_body.subst(x, v) };
                let clauses = h
                    .clauses
                    .iter()
                    .map(|(n, c)| {
                        let body = if c.x == x || c.k == x { c.body.clone() } else { c.body.subst(x, v) };
                        (n.clone(), Clause { body, ..c.clone() })
                    })
                    .collect();
                Term::Handle(s(m), Box::new(Handler { ret_body, clauses, ..(**h).clone() }))
            }
            Term::ValUp(a, b, m) => Term::ValUp(a.clone(), b.clone(), s(m)),
            Term::ValDown(a, b, m) => Term::ValDown(a.clone(), b.clone(), s(m)),
            Term::EffUp(a, b, m) => Term::EffUp(a.clone(), b.clone(), s(m)),
            Term::EffDown(a, b, m) => Term::EffDown(a.clone(), b.clone(), s(m)),
            Term::Concat(a, b) => Term::Concat(s(a), s(b)),
            Term::StrEq(a, b) => Term::StrEq(s(a), s(b)),
            Term::QueueVal(a, vs) => Term::QueueVal(a.clone(), vs.iter().map(|t| t.subst(x, v)).collect()),
            Term::Enqueue(a, b) => Term::Enqueue(s(a), s(b)),
            Term::CaseQueue { scrut, elem, empty, x: y, q, cons } => Term::CaseQueue {
                scrut: s(scrut),
                elem: elem.clone(),
                empty: s(empty),
                x: y.clone(),
                q: q.clone(),
                cons: if y == x || q == x { cons.clone() } else { s(cons) },
            },
        }
    }

    /// Number of nodes, for generator bounds and reporting.
    pub fn size(&self) -> usize {
        1 + match self {
            Term::Lam(_, _, b) | Term::Fix(_, _, b) => b.size(),
            Term::Let(_, _, m, n) => m.size() + n.size(),
            Term::Handle(m, h) => m.size() + h.ret_body.size() + h.clauses.values().map(|c| c.body.size()).sum::<usize>(),
            Term::CaseQueue { scrut, empty, cons, .. } => scrut.size() + empty.size() + cons.size(),
            Term::QueueVal(_, vs) => vs.iter().map(Term::size).sum(),
            _ => self.children().iter().map(|c| c.size()).sum(),
        }
    }

    /// Counts nodes satisfying `pred`.
    pub fn count(&self, pred: &dyn Fn(&Term) -> bool) -> usize {
        let here = usize::from(pred(self));
        here + match self {
            Term::Lam(_, _, b) | Term::Fix(_, _, b) => b.count(pred),
            Term::Let(_, _, m, n) => m.count(pred) + n.count(pred),
            Term::Handle(m, h) => {
                m.count(pred) + h.ret_body.count(pred) + h.clauses.values().map(|c| c.body.count(pred)).sum::<usize>()
            }
            Term::CaseQueue { scrut, empty, cons, .. } => scrut.count(pred) + empty.count(pred) + cons.count(pred),
            Term::QueueVal(_, vs) => vs.iter().map(|v| v.count(pred)).sum(),
            _ => self.children().iter().map(|c| c.count(pred)).sum(),
        }
    }
}

fn check_val(lo: &ValueType, hi: &ValueType) -> Result<(), CastUnjustified> {
    if precision(lo, hi) {
        Ok(())
    } else {
        Err(CastUnjustified { from: lo.to_string(), to: hi.to_string() })
    }
}

fn check_eff(lo: &EffectType, hi: &EffectType) -> Result<(), CastUnjustified> {
    if precision_eff(lo, hi) {
        Ok(())
    } else {
        Err(CastUnjustified { from: lo.to_string(), to: hi.to_string() })
    }
}
