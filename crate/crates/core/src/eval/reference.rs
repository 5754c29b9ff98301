//! A direct, textual evaluator used as an oracle for the machine.
//!
//! Every step re-decomposes the whole term. A raise bubbles up as a
//! context term containing a hole, which a handler or cast either takes or
//! wraps in its own node before passing it on. Substitution is implemented
//! separately from the core term library.

use std::collections::BTreeMap;

use super::Outcome;
use crate::core_lang::{Clause, HandleKind, Handler, Term};
use crate::typesys::{Name, Signature, ValueType};

const HOLE: &str = "•";

enum Red {
    Value,
    Step(Term),
    Error,
    Raise { op: Name, req: ValueType, resp: ValueType, payload: Term, ctx: Term },
}

pub fn evaluate(sig: &Signature, m: &Term, fuel: u64) -> Result<(Outcome, u64), String> {
    let mut t = m.clone();
    let mut counter = 0u64;
    for steps in 0..=fuel {
        match red(sig, &t, &mut counter)? {
            Red::Value => return Ok((Outcome::Value(t), steps)),
            Red::Error => return Ok((Outcome::Error, steps)),
            Red::Raise { op, .. } => return Ok((Outcome::UncaughtRaise(op), steps)),
            Red::Step(next) => {
                if steps == fuel {
                    break;
                }
                t = next;
            }
        }
    }
    Ok((Outcome::FuelExhausted(fuel), fuel))
}

fn b(t: Term) -> Box<Term> {
    Box::new(t)
}

/// Reduces the first non-value among `parts`, rebuilding the node with
/// `build`; returns `None` when all parts are values.
fn congruence(
    sig: &Signature,
    parts: &[&Term],
    build: &dyn Fn(Vec<Term>) -> Term,
    counter: &mut u64,
) -> Result<Option<Red>, String> {
    for (i, p) in parts.iter().enumerate() {
        if p.is_value() {
            continue;
        }
        let with = |t: Term| {
            let mut v: Vec<Term> = parts.iter().map(|p| (*p).clone()).collect();
            v[i] = t;
            build(v)
        };
        return Ok(Some(match red(sig, p, counter)? {
            Red::Value => unreachable!("non-value reduced to a value"),
            Red::Step(t) => Red::Step(with(t)),
            Red::Error => Red::Error,
            Red::Raise { op, req, resp, payload, ctx } => Red::Raise { op, req, resp, payload, ctx: with(ctx) },
        }));
    }
    Ok(None)
}

fn red(sig: &Signature, t: &Term, counter: &mut u64) -> Result<Red, String> {
    if t.is_value() {
        if let Term::Var(x) = t {
            return Err(format!("free variable {x}"));
        }
        return Ok(Red::Value);
    }
    match t {
        Term::Err => Ok(Red::Error),
        Term::App(f, a) => {
            if let Some(r) = congruence(sig, &[f, a], &|v| Term::App(b(v[0].clone()), b(v[1].clone())), counter)? {
                return Ok(r);
            }
            apply(f, a).map(Red::Step)
        }
        Term::Let(x, ty, m, n) => {
            let (x2, ty2, n2) = (x.clone(), ty.clone(), n.clone());
            let build = move |v: Vec<Term>| Term::Let(x2.clone(), ty2.clone(), b(v[0].clone()), n2.clone());
            if let Some(r) = congruence(sig, &[m], &build, counter)? {
                return Ok(r);
            }
            Ok(Red::Step(replace(n, x, m)))
        }
        Term::If(c, th, el) => {
            let (th2, el2) = (th.clone(), el.clone());
            if let Some(r) = congruence(sig, &[c], &move |v| Term::If(b(v[0].clone()), th2.clone(), el2.clone()), counter)? {
                return Ok(r);
            }
            match **c {
                Term::True => Ok(Red::Step((**th).clone())),
                Term::False => Ok(Red::Step((**el).clone())),
                _ => Err("if on a non-boolean".into()),
            }
        }
        Term::Raise { op, req, resp, arg } => {
            let (o, rq, rs) = (op.clone(), req.clone(), resp.clone());
            let build = move |v: Vec<Term>| Term::Raise { op: o.clone(), req: rq.clone(), resp: rs.clone(), arg: b(v[0].clone()) };
            if let Some(r) = congruence(sig, &[arg], &build, counter)? {
                return Ok(r);
            }
            Ok(Red::Raise {
                op: op.clone(),
                req: req.clone(),
                resp: resp.clone(),
                payload: (**arg).clone(),
                ctx: Term::var(HOLE),
            })
        }
        Term::Handle(m, h) => {
            if m.is_value() {
                return Ok(Red::Step(replace(&h.ret_body, &h.ret_var, m)));
            }
            match red(sig, m, counter)? {
                Red::Value => unreachable!(),
                Red::Step(m2) => Ok(Red::Step(Term::Handle(b(m2), h.clone()))),
                Red::Error => Ok(Red::Error),
                Red::Raise { op, req, resp, payload, ctx } => match h.clauses.get(&op) {
                    Some(c) => {
                        *counter += 1;
                        let y = format!("$r{counter}");
                        let resumed = fill(&ctx, &Term::var(&y));
                        let resumed = match h.kind {
                            HandleKind::Deep => Term::Handle(b(resumed), h.clone()),
                            HandleKind::Shallow => resumed,
                        };
                        let k = Term::Lam(y, c.resp.clone(), b(resumed));
                        Ok(Red::Step(replace(&replace(&c.body, &c.x, &payload), &c.k, &k)))
                    }
                    None => Ok(Red::Raise { op, req, resp, payload, ctx: Term::Handle(b(ctx), h.clone()) }),
                },
            }
        }
        Term::EffUp(lo, hi, m) | Term::EffDown(lo, hi, m) => {
            let up = matches!(t, Term::EffUp(..));
            let wrap = |inner: Term| {
                if up {
                    Term::EffUp(lo.clone(), hi.clone(), b(inner))
                } else {
                    Term::EffDown(lo.clone(), hi.clone(), b(inner))
                }
            };
            if m.is_value() {
                return Ok(Red::Step((**m).clone()));
            }
            match red(sig, m, counter)? {
                Red::Value => unreachable!(),
                Red::Step(m2) => Ok(Red::Step(wrap(m2))),
                Red::Error => Ok(Red::Error),
                Red::Raise { op, req, resp, payload, ctx } => {
                    let (in_lo, in_hi) = (lo.lookup(sig, &op), hi.lookup(sig, &op));
                    *counter += 1;
                    let y = format!("$r{counter}");
                    match (up, in_lo, in_hi) {
                        (true, None, None) | (false, _, None) => {
                            Ok(Red::Raise { op, req, resp, payload, ctx: wrap(ctx) })
                        }
                        (false, None, Some(_)) => Ok(Red::Error),
                        (true, Some(l), Some(h)) => {
                            let raised = Term::Raise {
                                op: op.clone(),
                                req: h.req.clone(),
                                resp: h.resp.clone(),
                                arg: b(Term::ValUp(l.req.clone(), h.req.clone(), b(payload))),
                            };
                            let cast = Term::ValDown(l.resp.clone(), h.resp.clone(), b(raised));
                            Ok(Red::Step(Term::Let(y.clone(), l.resp, b(cast), b(wrap(fill(&ctx, &Term::var(&y)))))))
                        }
                        (false, Some(l), Some(h)) => {
                            let raised = Term::Raise {
                                op: op.clone(),
                                req: l.req.clone(),
                                resp: l.resp.clone(),
                                arg: b(Term::ValDown(l.req.clone(), h.req.clone(), b(payload))),
                            };
                            let cast = Term::ValUp(l.resp.clone(), h.resp.clone(), b(raised));
                            Ok(Red::Step(Term::Let(y.clone(), h.resp, b(cast), b(wrap(fill(&ctx, &Term::var(&y)))))))
                        }
                        (true, _, _) => Err(format!("{op} escapes an upcast")),
                    }
                }
            }
        }
        Term::ValUp(lo, hi, m) | Term::ValDown(lo, hi, m) => {
            let up = matches!(t, Term::ValUp(..));
            let (l2, h2) = (lo.clone(), hi.clone());
            let build = move |v: Vec<Term>| {
                if up {
                    Term::ValUp(l2.clone(), h2.clone(), b(v[0].clone()))
                } else {
                    Term::ValDown(l2.clone(), h2.clone(), b(v[0].clone()))
                }
            };
            if let Some(r) = congruence(sig, &[m], &build, counter)? {
                return Ok(r);
            }
            match (lo, hi, &**m) {
                (ValueType::Queue(a), ValueType::Queue(c), Term::QueueVal(_, vs)) => {
                    let target = if up { (**c).clone() } else { (**a).clone() };
                    let mut q = Term::QueueVal(target, vec![]);
                    for v in vs {
                        let cast = if up {
                            Term::ValUp((**a).clone(), (**c).clone(), b(v.clone()))
                        } else {
                            Term::ValDown((**a).clone(), (**c).clone(), b(v.clone()))
                        };
                        q = Term::Enqueue(b(q), b(cast));
                    }
                    Ok(Red::Step(q))
                }
                (l, h, v) if l == h && !matches!(l, ValueType::Arrow(..)) => Ok(Red::Step(v.clone())),
                _ => Err(format!("value cast between {lo} and {hi}")),
            }
        }
        Term::Concat(x, y) | Term::StrEq(x, y) => {
            let cat = matches!(t, Term::Concat(..));
            let build = move |v: Vec<Term>| {
                if cat {
                    Term::Concat(b(v[0].clone()), b(v[1].clone()))
                } else {
                    Term::StrEq(b(v[0].clone()), b(v[1].clone()))
                }
            };
            if let Some(r) = congruence(sig, &[x, y], &build, counter)? {
                return Ok(r);
            }
            match (&**x, &**y) {
                (Term::Str(p), Term::Str(q)) if cat => Ok(Red::Step(Term::Str(format!("{p}{q}")))),
                (Term::Str(p), Term::Str(q)) => Ok(Red::Step(if p == q { Term::True } else { Term::False })),
                _ => Err("string operation on non-strings".into()),
            }
        }
        Term::Enqueue(q, v) => {
            if let Some(r) = congruence(sig, &[q, v], &|v| Term::Enqueue(b(v[0].clone()), b(v[1].clone())), counter)? {
                return Ok(r);
            }
            match &**q {
                Term::QueueVal(a, vs) => {
                    let mut vs = vs.clone();
                    vs.push((**v).clone());
                    Ok(Red::Step(Term::QueueVal(a.clone(), vs)))
                }
                _ => Err("enqueue onto a non-queue".into()),
            }
        }
        Term::CaseQueue { scrut, elem, empty, x, q, cons } => {
            let (e2, em2, x2, q2, c2) = (elem.clone(), empty.clone(), x.clone(), q.clone(), cons.clone());
            let build = move |v: Vec<Term>| Term::CaseQueue {
                scrut: b(v[0].clone()),
                elem: e2.clone(),
                empty: em2.clone(),
                x: x2.clone(),
                q: q2.clone(),
                cons: c2.clone(),
            };
            if let Some(r) = congruence(sig, &[scrut], &build, counter)? {
                return Ok(r);
            }
            match &**scrut {
                Term::QueueVal(_, vs) if vs.is_empty() => Ok(Red::Step((**empty).clone())),
                Term::QueueVal(a, vs) => {
                    let rest = Term::QueueVal(a.clone(), vs[1..].to_vec());
                    Ok(Red::Step(replace(&replace(cons, x, &vs[0]), q, &rest)))
                }
                _ => Err("case on a non-queue".into()),
            }
        }
        other => Err(format!("cannot reduce {other:?}")),
    }
}

fn apply(f: &Term, a: &Term) -> Result<Term, String> {
    match f {
        Term::Lam(x, _, body) => Ok(replace(body, x, a)),
        Term::Fix(g, _, v) => Ok(Term::App(b(replace(v, g, f)), b(a.clone()))),
        Term::ValUp(ValueType::Arrow(d, s, c), ValueType::Arrow(d2, s2, c2), g) => {
            let call = Term::App(g.clone(), b(Term::ValDown((**d).clone(), (**d2).clone(), b(a.clone()))));
            Ok(Term::ValUp((**c).clone(), (**c2).clone(), b(Term::EffUp((**s).clone(), (**s2).clone(), b(call)))))
        }
        Term::ValDown(ValueType::Arrow(d, s, c), ValueType::Arrow(d2, s2, c2), g) => {
            let call = Term::App(g.clone(), b(Term::ValUp((**d).clone(), (**d2).clone(), b(a.clone()))));
            Ok(Term::ValDown((**c).clone(), (**c2).clone(), b(Term::EffDown((**s).clone(), (**s2).clone(), b(call)))))
        }
        _ => Err("applying a non-function".into()),
    }
}

/// Plugs `v` into the hole of context `ctx`.
fn fill(ctx: &Term, v: &Term) -> Term {
    replace(ctx, HOLE, v)
}

/// `t[v/x]` where `v` is closed (apart from the hole, which is never bound).
fn replace(t: &Term, x: &str, v: &Term) -> Term {
    let r = |s: &Term| b(replace(s, x, v));
    let under = |y: &str, s: &Term| if y == x { b(s.clone()) } else { r(s) };
    match t {
        Term::Var(y) => {
            if y == x {
                v.clone()
            } else {
                t.clone()
            }
        }
        Term::True | Term::False | Term::Unit | Term::Str(_) | Term::Err => t.clone(),
        Term::Lam(y, a, body) => Term::Lam(y.clone(), a.clone(), under(y, body)),
        Term::Fix(y, a, body) => Term::Fix(y.clone(), a.clone(), under(y, body)),
        Term::App(f, a) => Term::App(r(f), r(a)),
        Term::Let(y, a, m, n) => Term::Let(y.clone(), a.clone(), r(m), under(y, n)),
        Term::If(c, p, q) => Term::If(r(c), r(p), r(q)),
        Term::Raise { op, req, resp, arg } => {
            Term::Raise { op: op.clone(), req: req.clone(), resp: resp.clone(), arg: r(arg) }
        }
        Term::Handle(m, h) => {
            let clauses: BTreeMap<Name, Clause> = h
                .clauses
                .iter()
                .map(|(n, c)| {
                    let body = if c.x == x || c.k == x { c.body.clone() } else { replace(&c.body, x, v) };
                    (n.clone(), Clause { body, ..c.clone() })
                })
                .collect();
            let ret_body = *under(&h.ret_var, &h.ret_body);
            Term::Handle(r(m), b2(Handler { ret_body, clauses, ..(**h).clone() }))
        }
        Term::ValUp(p, q, m) => Term::ValUp(p.clone(), q.clone(), r(m)),
        Term::ValDown(p, q, m) => Term::ValDown(p.clone(), q.clone(), r(m)),
        Term::EffUp(p, q, m) => Term::EffUp(p.clone(), q.clone(), r(m)),
        Term::EffDown(p, q, m) => Term::EffDown(p.clone(), q.clone(), r(m)),
        Term::Concat(p, q) => Term::Concat(r(p), r(q)),
        Term::StrEq(p, q) => Term::StrEq(r(p), r(q)),
        Term::QueueVal(a, vs) => Term::QueueVal(a.clone(), vs.iter().map(|s| replace(s, x, v)).collect()),
        Term::Enqueue(p, q) => Term::Enqueue(r(p), r(q)),
        Term::CaseQueue { scrut, elem, empty, x: y, q, cons } => Term::CaseQueue {
            scrut: r(scrut),
            elem: elem.clone(),
            empty: r(empty),
            x: y.clone(),
            q: q.clone(),
            cons: if y == x || q == x { cons.clone() } else { r(cons) },
        },
    }
}

fn b2(h: Handler) -> Box<Handler> {
    Box::new(h)
}
