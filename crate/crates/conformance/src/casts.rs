//! Casts re-derived from other constructs: effect casts as handlers,
//! function casts as eta-expansions, and the optimized factorizations of an
//! oblique cast.

use std::collections::BTreeMap;

use greff_core::core_lang::{synth, Clause, HandleKind, Handler, Term};
use greff_core::typesys::{gradual_subtype, precision, precision_eff};
use greff_core::{EffectType, Name, OpType, Signature, ValueType};

use crate::walk::rewrite;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CastKind {
    Up,
    Down,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CastError {
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("decomposition failed: {0}")]
    DecompositionFailed(String),
}

fn pre<T>(msg: String) -> Result<T, CastError> {
    Err(CastError::PreconditionViolated(msg))
}

/// The handler that behaves as the effect cast `⟨σ ↣ τ⟩M` (up) or
/// `⟨σ ↢ τ⟩M` (down); `ty` is the value type of `M`.
///
/// An upcast re-raises each operation of `σ` at its `τ` typing; a downcast
/// re-raises each operation of `τ` at its `σ` typing, or errors when `σ`
/// lacks it.
pub fn expand_effect_cast_as_handler(
    sig: &Signature,
    kind: CastKind,
    sigma: &EffectType,
    tau: &EffectType,
    m: Term,
    ty: &ValueType,
) -> Result<Term, CastError> {
    if !precision_eff(sigma, tau) {
        return pre(format!("{sigma} is not more precise than {tau}"));
    }
    let ops: Vec<Name> = match (kind, sigma, tau) {
        (CastKind::Up, EffectType::Concrete(row), _) => row.keys().cloned().collect(),
        (CastKind::Up, EffectType::Dyn, _) => return pre("an upcast needs a concrete source effect".into()),
        (CastKind::Down, EffectType::Dyn, EffectType::Concrete(_)) => {
            return pre("a downcast needs a concrete target or a `?` source".into())
        }
        (CastKind::Down, _, t) => t.names(sig),
    };
    let result_eff = match kind {
        CastKind::Up => tau.clone(),
        CastKind::Down => sigma.clone(),
    };
    let mut clauses = BTreeMap::new();
    for op in ops {
        let ts = sigma.lookup(sig, &op);
        let tt = tau.lookup(sig, &op).ok_or_else(|| CastError::PreconditionViolated(format!("{op} ∉ {tau}")))?;
        let (x, k) = (Term::var("$x"), Term::var("$k"));
        let (clause_ty, body) = match (kind, ts) {
            (CastKind::Up, Some(s)) => {
                let raised = Term::raise(&op, tt.req.clone(), tt.resp.clone(), Term::val_up(s.req.clone(), tt.req, x));
                (s.clone(), Term::app(k, Term::val_down(s.resp, tt.resp, raised)))
            }
            (CastKind::Down, Some(s)) => {
                let raised = Term::raise(&op, s.req.clone(), s.resp.clone(), Term::val_down(s.req, tt.req.clone(), x));
                (tt.clone(), Term::app(k, Term::val_up(s.resp, tt.resp.clone(), raised)))
            }
            (CastKind::Down, None) => (tt, Term::Err),
            (CastKind::Up, None) => unreachable!("upcast clauses range over the source effect"),
        };
        let clause = Clause { x: "$x".into(), k: "$k".into(), req: clause_ty.req, resp: clause_ty.resp, body };
        clauses.insert(op, clause);
    }
    let handler = Handler {
        kind: HandleKind::Deep,
        ret_var: "$v".into(),
        ret_ty: ty.clone(),
        ret_body: Term::var("$v"),
        clauses,
        eff: result_eff,
        ty: ty.clone(),
    };
    Ok(Term::handle(m, handler))
}

/// Replaces every effect cast in `t` by its handler. Returns the new term
/// and how many casts were replaced; casts whose body type cannot be
/// synthesized, or that the handler form does not cover, are kept.
pub fn expand_effect_casts(sig: &Signature, t: &Term) -> (Term, usize) {
    let mut count = 0;
    let out = rewrite(sig, &Vec::new(), t, &mut |sig, ctx, node| {
        let (kind, lo, hi, m) = match node {
            Term::EffUp(lo, hi, m) => (CastKind::Up, lo, hi, m),
            Term::EffDown(lo, hi, m) => (CastKind::Down, lo, hi, m),
            other => return other,
        };
        let ty = synth(sig, ctx, &m).ok().and_then(|s| s.ty);
        let expanded = ty.and_then(|ty| expand_effect_cast_as_handler(sig, kind, &lo, &hi, (*m).clone(), &ty).ok());
        match expanded {
            Some(h) => {
                count += 1;
                h
            }
            None if kind == CastKind::Up => Term::EffUp(lo, hi, m),
            None => Term::EffDown(lo, hi, m),
        }
    });
    (out, count)
}

/// The eta-expanded function equivalent to the arrow cast of `f`:
/// `λx. ⟨B ↣ B'⟩⟨σ ↣ τ⟩(f (⟨A ↢ A'⟩x))` for an upcast from `A →σ B` to
/// `A' →τ B'`, and dually for a downcast.
pub fn expand_fun_cast(kind: CastKind, from: &ValueType, to: &ValueType, f: Term) -> Result<Term, CastError> {
    if !precision(from, to) {
        return pre(format!("{from} is not more precise than {to}"));
    }
    let (Some((a, s, b)), Some((a2, t, b2))) = (from.as_arrow(), to.as_arrow()) else {
        return pre("function casts need arrow types".into());
    };
    if !f.is_value() {
        return pre("function casts apply to values".into());
    }
    let x = Term::var("$fx");
    Ok(match kind {
        CastKind::Up => {
            let call = Term::app(f, Term::val_down(a.clone(), a2.clone(), x));
            Term::lam("$fx", a2.clone(), Term::val_up(b.clone(), b2.clone(), Term::eff_up(s.clone(), t.clone(), call)))
        }
        CastKind::Down => {
            let call = Term::app(f, Term::val_up(a.clone(), a2.clone(), x));
            Term::lam("$fx", a.clone(), Term::val_down(b.clone(), b2.clone(), Term::eff_down(s.clone(), t.clone(), call)))
        }
    })
}

/// The intermediate types of the factorizations of an oblique cast
/// `A ≲ B`: `A ≤ A_h ⊑ D_h`, `A ⊑ D_l ≤ D_h`, `B ⊑ D_h`, `B_l ⊑ D_l`,
/// `B_l ≤ B`, and `D` the common erasure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factorization {
    pub a_h: ValueType,
    pub d_l: ValueType,
    pub d_h: ValueType,
    pub b_l: ValueType,
    pub d: ValueType,
}

struct Parts<T> {
    a_h: T,
    d_l: T,
    d_h: T,
    b_l: T,
}

fn fail<T>(a: impl std::fmt::Display, b: impl std::fmt::Display) -> Result<T, CastError> {
    Err(CastError::DecompositionFailed(format!("{a} ≲ {b}")))
}

fn split(a: &ValueType, b: &ValueType) -> Result<Parts<ValueType>, CastError> {
    match (a, b) {
        (ValueType::Bool, ValueType::Bool) | (ValueType::Unit, ValueType::Unit) | (ValueType::Str, ValueType::Str) => {
            Ok(Parts { a_h: a.clone(), d_l: a.clone(), d_h: a.clone(), b_l: a.clone() })
        }
        (ValueType::Queue(x), ValueType::Queue(y)) => {
            let p = split(x, y)?;
            Ok(Parts {
                a_h: ValueType::queue(p.a_h),
                d_l: ValueType::queue(p.d_l),
                d_h: ValueType::queue(p.d_h),
                b_l: ValueType::queue(p.b_l),
            })
        }
        (ValueType::Arrow(a1, s, a2), ValueType::Arrow(b1, t, b2)) => {
            // The domain relates the other way round, so its parts swap.
            let dom = split(b1, a1)?;
            let eff = split_eff(s, t)?;
            let cod = split(a2, b2)?;
            Ok(Parts {
                a_h: ValueType::arrow(dom.b_l, eff.a_h, cod.a_h),
                d_l: ValueType::arrow(dom.d_h, eff.d_l, cod.d_l),
                d_h: ValueType::arrow(dom.d_l, eff.d_h, cod.d_h),
                b_l: ValueType::arrow(dom.a_h, eff.b_l, cod.b_l),
            })
        }
        _ => fail(a, b),
    }
}

fn split_op(a: &OpType, b: &OpType) -> Result<Parts<OpType>, CastError> {
    let req = split(&a.req, &b.req)?;
    let resp = split(&b.resp, &a.resp)?;
    Ok(Parts {
        a_h: OpType::new(req.a_h, resp.b_l),
        d_l: OpType::new(req.d_l, resp.d_h),
        d_h: OpType::new(req.d_h, resp.d_l),
        b_l: OpType::new(req.b_l, resp.a_h),
    })
}

fn split_eff(s: &EffectType, t: &EffectType) -> Result<Parts<EffectType>, CastError> {
    let dyn_ = EffectType::Dyn;
    match (s, t) {
        (EffectType::Dyn, EffectType::Dyn) => {
            Ok(Parts { a_h: dyn_.clone(), d_l: dyn_.clone(), d_h: dyn_.clone(), b_l: dyn_ })
        }
        (EffectType::Concrete(_), EffectType::Dyn) => {
            Ok(Parts { a_h: s.clone(), d_l: dyn_.clone(), d_h: dyn_.clone(), b_l: dyn_ })
        }
        (EffectType::Dyn, EffectType::Concrete(_)) => {
            Ok(Parts { a_h: dyn_.clone(), d_l: dyn_.clone(), d_h: dyn_, b_l: t.clone() })
        }
        (EffectType::Concrete(sr), EffectType::Concrete(tr)) => {
            let (mut a_h, mut d_l, mut d_h, mut b_l) = (BTreeMap::new(), BTreeMap::new(), BTreeMap::new(), BTreeMap::new());
            for (n, op) in sr {
                let Some(top) = tr.get(n) else { return fail(s, t) };
                let p = split_op(op, top)?;
                a_h.insert(n.clone(), p.a_h);
                d_l.insert(n.clone(), p.d_l);
                d_h.insert(n.clone(), p.d_h);
                b_l.insert(n.clone(), p.b_l);
            }
            for (n, op) in tr.iter().filter(|(n, _)| !sr.contains_key(*n)) {
                a_h.insert(n.clone(), op.clone());
                d_h.insert(n.clone(), op.clone());
            }
            Ok(Parts {
                a_h: EffectType::Concrete(a_h),
                d_l: EffectType::Concrete(d_l),
                d_h: EffectType::Concrete(d_h),
                b_l: EffectType::Concrete(b_l),
            })
        }
    }
}

/// The decomposition of `A ≲ B` used by the factorizations.
pub fn factorize(a: &ValueType, b: &ValueType) -> Result<Factorization, CastError> {
    if !gradual_subtype(a, b) {
        return pre(format!("{a} is not a gradual subtype of {b}"));
    }
    let p = split(a, b)?;
    Ok(Factorization { a_h: p.a_h, d_l: p.d_l, d_h: p.d_h, b_l: p.b_l, d: a.erase() })
}

/// Four casts of `M : A` to `B`, in order: `⟨B ↢ D_h⟩⟨A_h ↣ D_h⟩M`,
/// `⟨B ↢ D_h⟩⟨A ↣ D_l⟩M`, `⟨B_l ↢ D_l⟩⟨A ↣ D_l⟩M` and the reference
/// `⟨B ↢ D⟩⟨A ↣ D⟩M` through the erasure.
pub fn cast_factorizations(a: &ValueType, b: &ValueType, m: Term) -> Result<[Term; 4], CastError> {
    let f = factorize(a, b)?;
    Ok([
        Term::val_down(b.clone(), f.d_h.clone(), Term::val_up(f.a_h.clone(), f.d_h.clone(), m.clone())),
        Term::val_down(b.clone(), f.d_h.clone(), Term::val_up(a.clone(), f.d_l.clone(), m.clone())),
        Term::val_down(f.b_l.clone(), f.d_l.clone(), Term::val_up(a.clone(), f.d_l, m.clone())),
        Term::val_down(b.clone(), f.d.clone(), Term::val_up(a.clone(), f.d, m)),
    ])
}
