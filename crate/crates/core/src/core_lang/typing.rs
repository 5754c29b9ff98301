//! Algorithmic core typing: synthesize at introductions, check `≤` at
//! eliminations, and combine operand effects with least upper bounds.
//!
//! A synthesized effect of `None` means the term raises nothing (it checks at
//! every effect type); a synthesized type of `None` means it never returns a
//! value (it is, or is built from, `℧`).

use thiserror::Error;

use super::term::{HandleKind, Term};
use crate::typesys::{
    glb, glb_eff, lub, lub_eff, precision, precision_eff, subtype, subtype_eff, subtype_op, EffectType, Name, OpType, Signature,
    ValueType,
};

pub type Ctx = Vec<(Name, ValueType)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Synth {
    pub eff: Option<EffectType>,
    pub ty: Option<ValueType>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("type error in {rule}: {msg} (at `{at}`)")]
    Rule { rule: &'static str, msg: String, at: String },
    #[error("ill-formed under the signature: {0}")]
    WellFormedness(String),
}

fn err<T>(rule: &'static str, msg: impl Into<String>, at: &Term) -> Result<T, TypeError> {
    let mut s = super::sexpr::print_term(at);
    if s.len() > 120 {
        let cut = (0..=120).rev().find(|i| s.is_char_boundary(*i)).unwrap_or(0);
        s.truncate(cut);
        s.push_str("...");
    }
    Err(TypeError::Rule { rule, msg: msg.into(), at: s })
}

pub fn wellformed(sig: &Signature, t: &ValueType) -> bool {
    t.wellformed(sig)
}

pub fn wellformed_eff(sig: &Signature, e: &EffectType) -> bool {
    e.wellformed(sig)
}

fn wf(sig: &Signature, t: &ValueType) -> Result<(), TypeError> {
    if t.wellformed(sig) {
        Ok(())
    } else {
        Err(TypeError::WellFormedness(t.to_string()))
    }
}

fn wf_eff(sig: &Signature, e: &EffectType) -> Result<(), TypeError> {
    if e.wellformed(sig) {
        Ok(())
    } else {
        Err(TypeError::WellFormedness(e.to_string()))
    }
}

fn ty_leq(sig: &Signature, t: &Option<ValueType>, u: &ValueType) -> bool {
    t.as_ref().is_none_or(|t| sub(sig, t, u))
}

/// `≤` extended with `σ ≤ ?` for rows admitted at `?`. Synthesis picks the
/// least latent effect of a function, which a continuation captured under a
/// dynamic context may need to widen.
fn sub(sig: &Signature, a: &ValueType, b: &ValueType) -> bool {
    match (a, b) {
        (ValueType::Queue(x), ValueType::Queue(y)) => sub(sig, x, y),
        (ValueType::Arrow(a1, e1, b1), ValueType::Arrow(a2, e2, b2)) => {
            sub(sig, a2, a1) && sub_eff(sig, e1, e2) && sub(sig, b1, b2)
        }
        _ => subtype(a, b),
    }
}

fn sub_eff(sig: &Signature, e: &EffectType, u: &EffectType) -> bool {
    match (e, u) {
        (EffectType::Concrete(_), EffectType::Dyn) => dyn_compatible(sig, e),
        (EffectType::Concrete(s), EffectType::Concrete(t)) => s.iter().all(|(n, op)| {
            t.get(n).is_some_and(|op2| sub(sig, &op.req, &op2.req) && sub(sig, &op2.resp, &op.resp))
        }),
        _ => subtype_eff(e, u),
    }
}

/// A row that only mentions operations at their signature typing is also
/// admitted at `?`: raising `ε @ Σ(ε)` is allowed under the dynamic effect.
fn dyn_compatible(sig: &Signature, e: &EffectType) -> bool {
    match e {
        EffectType::Dyn => true,
        EffectType::Concrete(row) => row.iter().all(|(n, op)| sig.get(n) == Some(op)),
    }
}

fn eff_leq(sig: &Signature, e: &Option<EffectType>, u: &EffectType) -> bool {
    e.as_ref().is_none_or(|e| sub_eff(sig, e, u))
}

fn join_eff(
    sig: &Signature,
    a: Option<EffectType>,
    b: Option<EffectType>,
    rule: &'static str,
    at: &Term,
) -> Result<Option<EffectType>, TypeError> {
    match (a, b) {
        (None, x) | (x, None) => Ok(x),
        (Some(a), Some(b)) => match lub_eff_rel(sig, &a, &b) {
            Some(c) => Ok(Some(c)),
            None => err(rule, format!("effects {a} and {b} have no upper bound"), at),
        },
    }
}

fn join_ty(
    sig: &Signature,
    a: Option<ValueType>,
    b: Option<ValueType>,
    rule: &'static str,
    at: &Term,
) -> Result<Option<ValueType>, TypeError> {
    match (a, b) {
        (None, x) | (x, None) => Ok(x),
        (Some(a), Some(b)) => match lub(&a, &b).or_else(|| lub_rel(sig, &a, &b)) {
            Some(c) => Ok(Some(c)),
            None => err(rule, format!("types {a} and {b} have no upper bound"), at),
        },
    }
}

/// Least upper bound under the relaxed `≤` of [`sub`].
fn lub_rel(sig: &Signature, a: &ValueType, b: &ValueType) -> Option<ValueType> {
    match (a, b) {
        (ValueType::Queue(x), ValueType::Queue(y)) => Some(ValueType::queue(lub_rel(sig, x, y)?)),
        (ValueType::Arrow(a1, e1, b1), ValueType::Arrow(a2, e2, b2)) => Some(ValueType::arrow(
            glb_rel(sig, a1, a2)?,
            lub_eff_rel(sig, e1, e2)?,
            lub_rel(sig, b1, b2)?,
        )),
        _ => lub(a, b),
    }
}

fn glb_rel(sig: &Signature, a: &ValueType, b: &ValueType) -> Option<ValueType> {
    match (a, b) {
        (ValueType::Queue(x), ValueType::Queue(y)) => Some(ValueType::queue(glb_rel(sig, x, y)?)),
        (ValueType::Arrow(a1, e1, b1), ValueType::Arrow(a2, e2, b2)) => Some(ValueType::arrow(
            lub_rel(sig, a1, a2)?,
            glb_eff_rel(sig, e1, e2)?,
            glb_rel(sig, b1, b2)?,
        )),
        _ => glb(a, b),
    }
}

fn lub_eff_rel(sig: &Signature, e: &EffectType, u: &EffectType) -> Option<EffectType> {
    if let Some(j) = lub_eff(e, u) {
        return Some(j);
    }
    match (e, u) {
        (EffectType::Concrete(s), EffectType::Concrete(t)) => {
            let mut out = s.clone();
            for (n, op) in t {
                let merged = match s.get(n) {
                    Some(op0) => OpType::new(lub_rel(sig, &op0.req, &op.req)?, glb_rel(sig, &op0.resp, &op.resp)?),
                    None => op.clone(),
                };
                out.insert(n.clone(), merged);
            }
            Some(EffectType::Concrete(out))
        }
        _ => (dyn_compatible(sig, e) && dyn_compatible(sig, u)).then_some(EffectType::Dyn),
    }
}

fn glb_eff_rel(sig: &Signature, e: &EffectType, u: &EffectType) -> Option<EffectType> {
    if let Some(m) = glb_eff(e, u) {
        return Some(m);
    }
    match (e, u) {
        (EffectType::Concrete(s), EffectType::Concrete(t)) => {
            let mut out = s.clone();
            out.retain(|n, _| t.contains_key(n));
            for (n, op) in out.iter_mut() {
                let op2 = &t[n];
                *op = OpType::new(glb_rel(sig, &op.req, &op2.req)?, lub_rel(sig, &op.resp, &op2.resp)?);
            }
            Some(EffectType::Concrete(out))
        }
        (EffectType::Dyn, c) | (c, EffectType::Dyn) if dyn_compatible(sig, c) => Some(c.clone()),
        _ => None,
    }
}

fn lookup<'a>(ctx: &'a Ctx, x: &str) -> Option<&'a ValueType> {
    ctx.iter().rev().find(|(y, _)| y == x).map(|(_, t)| t)
}

fn extended(ctx: &Ctx, binds: &[(&Name, &ValueType)]) -> Ctx {
    let mut c = ctx.clone();
    c.extend(binds.iter().map(|(n, t)| ((*n).clone(), (*t).clone())));
    c
}

fn show(t: &Option<ValueType>) -> String {
    t.as_ref().map_or("⊥".to_string(), |t| t.to_string())
}

/// Typing of a closed term, with an absent effect reported as `∅`.
pub fn typecheck(sig: &Signature, ctx: &Ctx, m: &Term) -> Result<(EffectType, Option<ValueType>), TypeError> {
    let s = synth(sig, ctx, m)?;
    Ok((s.eff.unwrap_or_else(EffectType::empty), s.ty))
}

/// Checks `Σ | Γ ⊢_σ M : A`.
pub fn check(sig: &Signature, ctx: &Ctx, m: &Term, eff: &EffectType, ty: &ValueType) -> Result<(), TypeError> {
    match m {
        Term::Err => Ok(()),
        Term::Lam(x, a, body) => {
            wf(sig, a)?;
            let Some((dom, e, cod)) = ty.as_arrow() else {
                return err("Lam", format!("expected {ty}, found a function"), m);
            };
            if !sub(sig, dom, a) {
                return err("Lam", format!("domain {a} is not a supertype of {dom}"), m);
            }
            check(sig, &extended(ctx, &[(x, a)]), body, e, cod)
        }
        Term::Let(x, a, bound, body) => {
            wf(sig, a)?;
            check(sig, ctx, bound, eff, a)?;
            check(sig, &extended(ctx, &[(x, a)]), body, eff, ty)
        }
        Term::If(c, t, e) => {
            check(sig, ctx, c, eff, &ValueType::Bool)?;
            check(sig, ctx, t, eff, ty)?;
            check(sig, ctx, e, eff, ty)
        }
        _ => {
            let s = synth(sig, ctx, m)?;
            if !ty_leq(sig, &s.ty, ty) {
                return err("Sub", format!("value type {} is not a subtype of {ty}", show(&s.ty)), m);
            }
            if !eff_leq(sig, &s.eff, eff) {
                let e = s.eff.as_ref().map_or("⊥".to_string(), |e| e.to_string());
                return err("Sub", format!("effect {e} is not a subtype of {eff}"), m);
            }
            Ok(())
        }
    }
}

/// Checks only the value type; values raise nothing.
fn check_value(sig: &Signature, ctx: &Ctx, v: &Term, ty: &ValueType) -> Result<(), TypeError> {
    check(sig, ctx, v, &EffectType::empty(), ty)
}

pub fn synth(sig: &Signature, ctx: &Ctx, m: &Term) -> Result<Synth, TypeError> {
    let pure = |t: ValueType| Ok(Synth { eff: None, ty: Some(t) });
    match m {
        Term::Var(x) => match lookup(ctx, x) {
            Some(t) => pure(t.clone()),
            None => err("Var", format!("unbound variable {x}"), m),
        },
        Term::True | Term::False => pure(ValueType::Bool),
        Term::Unit => pure(ValueType::Unit),
        Term::Str(_) => pure(ValueType::Str),
        Term::Err => Ok(Synth { eff: None, ty: None }),
        Term::Lam(x, a, body) => {
            wf(sig, a)?;
            let s = synth(sig, &extended(ctx, &[(x, a)]), body)?;
            match s.ty {
                Some(b) => pure(ValueType::arrow(a.clone(), s.eff.unwrap_or_else(EffectType::empty), b)),
                None => err("Lam", "cannot synthesize the codomain of a function that never returns", m),
            }
        }
        Term::Fix(f, t, v) => {
            wf(sig, t)?;
            if t.as_arrow().is_none() || !v.is_value() {
                return err("Fix", "fix needs a function type and a value body", m);
            }
            check_value(sig, &extended(ctx, &[(f, t)]), v, t)?;
            pure(t.clone())
        }
        Term::App(f, a) => {
            let sf = synth(sig, ctx, f)?;
            let sa = synth(sig, ctx, a)?;
            let eff = join_eff(sig, sf.eff, sa.eff, "App", m)?;
            let Some(ft) = sf.ty else { return Ok(Synth { eff, ty: None }) };
            let Some((dom, lat, cod)) = ft.as_arrow() else {
                return err("App", format!("head has non-function type {ft}"), m);
            };
            if !ty_leq(sig, &sa.ty, dom) {
                return err("App", format!("argument type {} is not a subtype of {dom}", show(&sa.ty)), m);
            }
            let eff = join_eff(sig, eff, Some(lat.clone()), "App", m)?;
            Ok(Synth { eff, ty: Some(cod.clone()) })
        }
        Term::Let(x, a, bound, body) => {
            wf(sig, a)?;
            let sb = synth(sig, ctx, bound)?;
            if !ty_leq(sig, &sb.ty, a) {
                return err("Let", format!("bound type {} is not a subtype of {a}", show(&sb.ty)), m);
            }
            let sn = synth(sig, &extended(ctx, &[(x, a)]), body)?;
            Ok(Synth { eff: join_eff(sig, sb.eff, sn.eff, "Let", m)?, ty: sn.ty })
        }
        Term::If(c, t, e) => {
            let sc = synth(sig, ctx, c)?;
            if !ty_leq(sig, &sc.ty, &ValueType::Bool) {
                return err("If", format!("condition has type {}", show(&sc.ty)), m);
            }
            let st = synth(sig, ctx, t)?;
            let se = synth(sig, ctx, e)?;
            let eff = join_eff(sig, join_eff(sig, sc.eff, st.eff, "If", m)?, se.eff, "If", m)?;
            Ok(Synth { eff, ty: join_ty(sig, st.ty, se.ty, "If", m)? })
        }
        Term::Raise { op, req, resp, arg } => {
            wf(sig, req)?;
            wf(sig, resp)?;
            let local = OpType::new(req.clone(), resp.clone());
            match sig.get(op) {
                Some(s) if *s == local.erase() => {}
                Some(s) => return Err(TypeError::WellFormedness(format!("{op} : {local} does not erase to {s}"))),
                None => return Err(TypeError::WellFormedness(format!("{op} is not declared"))),
            }
            let sa = synth(sig, ctx, arg)?;
            if !ty_leq(sig, &sa.ty, req) {
                return err("Raise", format!("payload type {} is not a subtype of {req}", show(&sa.ty)), m);
            }
            let eff = match sa.eff {
                None => EffectType::single(op, local),
                Some(EffectType::Dyn) => {
                    if sig.get(op) != Some(&local) {
                        return err("Raise", format!("{op} raised at ? must use its signature typing"), m);
                    }
                    EffectType::Dyn
                }
                Some(EffectType::Concrete(mut row)) => {
                    if let Some(prev) = row.get(op) {
                        if !subtype_op(prev, &local) {
                            return err("Raise", format!("{op} is used at {prev} and {local}"), m);
                        }
                    }
                    row.insert(op.clone(), local);
                    EffectType::Concrete(row)
                }
            };
            Ok(Synth { eff: Some(eff), ty: Some(resp.clone()) })
        }
        Term::Handle(scrut, h) => {
            wf_eff(sig, &h.eff)?;
            wf(sig, &h.ty)?;
            wf(sig, &h.ret_ty)?;
            let ss = synth(sig, ctx, scrut)?;
            if !ty_leq(sig, &ss.ty, &h.ret_ty) {
                return err("Handle", format!("scrutinee type {} is not a subtype of {}", show(&ss.ty), h.ret_ty), m);
            }
            check(sig, &extended(ctx, &[(&h.ret_var, &h.ret_ty)]), &h.ret_body, &h.eff, &h.ty)?;
            for (n, c) in &h.clauses {
                wf(sig, &c.req)?;
                wf(sig, &c.resp)?;
                if sig.get(n) != Some(&OpType::new(c.req.erase(), c.resp.erase())) {
                    return Err(TypeError::WellFormedness(format!("clause {n} : {} ~> {}", c.req, c.resp)));
                }
            }
            let scrut_eff = ss.eff.clone().unwrap_or_else(EffectType::empty);
            match &scrut_eff {
                EffectType::Concrete(row) => {
                    for (n, op) in row {
                        match h.clauses.get(n) {
                            Some(c) => {
                                if !subtype_op(op, &OpType::new(c.req.clone(), c.resp.clone())) {
                                    return err("Handle", format!("clause {n} cannot be typed at {op}"), m);
                                }
                            }
                            None => match h.eff.lookup(sig, n) {
                                Some(out) if subtype_op(op, &out) => {}
                                _ => return err("Handle", format!("unhandled {n} : {op} is missing from {}", h.eff), m),
                            },
                        }
                    }
                }
                EffectType::Dyn => {
                    for (n, op) in sig.iter() {
                        match h.clauses.get(n) {
                            Some(c) => {
                                if OpType::new(c.req.clone(), c.resp.clone()) != *op {
                                    return err("Handle", format!("clause {n} under ? must be typed at {op}"), m);
                                }
                            }
                            None => {
                                if h.eff.lookup(sig, n).as_ref() != Some(op) {
                                    return err("Handle", format!("unhandled {n} is missing from {}", h.eff), m);
                                }
                            }
                        }
                    }
                }
            }
            for c in h.clauses.values() {
                let kty = match h.kind {
                    HandleKind::Deep => ValueType::arrow(c.resp.clone(), h.eff.clone(), h.ty.clone()),
                    HandleKind::Shallow => ValueType::arrow(c.resp.clone(), scrut_eff.clone(), h.ret_ty.clone()),
                };
                let cctx = extended(ctx, &[(&c.x, &c.req), (&c.k, &kty)]);
                check(sig, &cctx, &c.body, &h.eff, &h.ty)?;
            }
            Ok(Synth { eff: Some(h.eff.clone()), ty: Some(h.ty.clone()) })
        }
        Term::ValUp(lo, hi, body) | Term::ValDown(lo, hi, body) => {
            let up = matches!(m, Term::ValUp(..));
            let rule = if up { "ValUp" } else { "ValDown" };
            wf(sig, lo)?;
            wf(sig, hi)?;
            if !precision(lo, hi) {
                return err(rule, format!("{lo} is not more precise than {hi}"), m);
            }
            let (from, to) = if up { (lo, hi) } else { (hi, lo) };
            let sb = synth(sig, ctx, body)?;
            if !ty_leq(sig, &sb.ty, from) {
                return err(rule, format!("body type {} is not a subtype of {from}", show(&sb.ty)), m);
            }
            Ok(Synth { eff: sb.eff, ty: Some(to.clone()) })
        }
        Term::EffUp(lo, hi, body) | Term::EffDown(lo, hi, body) => {
            let up = matches!(m, Term::EffUp(..));
            let rule = if up { "EffUp" } else { "EffDown" };
            wf_eff(sig, lo)?;
            wf_eff(sig, hi)?;
            if !precision_eff(lo, hi) {
                return err(rule, format!("{lo} is not more precise than {hi}"), m);
            }
            let (from, to) = if up { (lo, hi) } else { (hi, lo) };
            let sb = synth(sig, ctx, body)?;
            if !eff_leq(sig, &sb.eff, from) {
                let e = sb.eff.as_ref().map_or("⊥".to_string(), |e| e.to_string());
                return err(rule, format!("body effect {e} is not a subtype of {from}"), m);
            }
            Ok(Synth { eff: Some(to.clone()), ty: sb.ty })
        }
        Term::Concat(a, b) | Term::StrEq(a, b) => {
            let rule = if matches!(m, Term::Concat(..)) { "Concat" } else { "StrEq" };
            let sa = synth(sig, ctx, a)?;
            let sb = synth(sig, ctx, b)?;
            if !ty_leq(sig, &sa.ty, &ValueType::Str) || !ty_leq(sig, &sb.ty, &ValueType::Str) {
                return err(rule, "operands must be strings", m);
            }
            let ty = if rule == "Concat" { ValueType::Str } else { ValueType::Bool };
            Ok(Synth { eff: join_eff(sig, sa.eff, sb.eff, rule, m)?, ty: Some(ty) })
        }
        Term::QueueVal(a, vs) => {
            wf(sig, a)?;
            for v in vs {
                if !v.is_value() {
                    return err("QueueVal", "queue elements must be values", m);
                }
                check_value(sig, ctx, v, a)?;
            }
            pure(ValueType::queue(a.clone()))
        }
        Term::Enqueue(q, v) => {
            let sq = synth(sig, ctx, q)?;
            let sv = synth(sig, ctx, v)?;
            let eff = join_eff(sig, sq.eff, sv.eff, "Enqueue", m)?;
            // Queues are covariant, so the element types are joined.
            let ty = match sq.ty {
                None => sv.ty.map(ValueType::queue),
                Some(ValueType::Queue(a)) => join_ty(sig, Some(*a), sv.ty, "Enqueue", m)?.map(ValueType::queue),
                Some(t) => return err("Enqueue", format!("{t} is not a queue"), m),
            };
            Ok(Synth { eff, ty })
        }
        Term::CaseQueue { scrut, elem, empty, x, q, cons } => {
            wf(sig, elem)?;
            let qt = ValueType::queue(elem.clone());
            let ss = synth(sig, ctx, scrut)?;
            if !ty_leq(sig, &ss.ty, &qt) {
                return err("CaseQueue", format!("scrutinee type {} is not a subtype of {qt}", show(&ss.ty)), m);
            }
            let se = synth(sig, ctx, empty)?;
            let sc = synth(sig, &extended(ctx, &[(x, elem), (q, &qt)]), cons)?;
            let eff = join_eff(sig, join_eff(sig, ss.eff, se.eff, "CaseQueue", m)?, sc.eff, "CaseQueue", m)?;
            Ok(Synth { eff, ty: join_ty(sig, se.ty, sc.ty, "CaseQueue", m)? })
        }
    }
}
