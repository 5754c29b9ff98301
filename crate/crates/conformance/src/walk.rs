//! Bottom-up rewriting of core terms with the typing context at each node.

use greff_core::core_lang::{synth, Ctx, HandleKind, Term};
use greff_core::{EffectType, Signature, ValueType};

type Rewrite<'f> = dyn FnMut(&Signature, &Ctx, Term) -> Term + 'f;

/// Rebuilds `t` bottom-up, passing every rebuilt node to `f` together with
/// the context it sits in.
pub fn rewrite(sig: &Signature, ctx: &Ctx, t: &Term, f: &mut Rewrite<'_>) -> Term {
    let mut ctx = ctx.clone();
    let node = go(sig, &mut ctx, t, f);
    f(sig, &ctx, node)
}

fn under(sig: &Signature, ctx: &mut Ctx, binds: &[(&str, ValueType)], t: &Term, f: &mut Rewrite<'_>) -> Term {
    let n = ctx.len();
    ctx.extend(binds.iter().map(|(x, a)| (x.to_string(), a.clone())));
    let r = go(sig, ctx, t, f);
    let r = f(sig, ctx, r);
    ctx.truncate(n);
    r
}

fn sub(sig: &Signature, ctx: &mut Ctx, t: &Term, f: &mut Rewrite<'_>) -> Box<Term> {
    Box::new(under(sig, ctx, &[], t, f))
}

fn go(sig: &Signature, ctx: &mut Ctx, t: &Term, f: &mut Rewrite<'_>) -> Term {
    match t {
        Term::Var(_) | Term::True | Term::False | Term::Unit | Term::Str(_) | Term::Err => t.clone(),
        Term::Lam(x, a, body) => Term::Lam(x.clone(), a.clone(), Box::new(under(sig, ctx, &[(x, a.clone())], body, f))),
        Term::Fix(g, a, body) => Term::Fix(g.clone(), a.clone(), Box::new(under(sig, ctx, &[(g, a.clone())], body, f))),
        Term::App(p, q) => Term::App(sub(sig, ctx, p, f), sub(sig, ctx, q, f)),
        Term::Let(x, a, m, n) => {
            let m = sub(sig, ctx, m, f);
            Term::Let(x.clone(), a.clone(), m, Box::new(under(sig, ctx, &[(x, a.clone())], n, f)))
        }
        Term::If(c, p, q) => Term::If(sub(sig, ctx, c, f), sub(sig, ctx, p, f), sub(sig, ctx, q, f)),
        Term::Raise { op, req, resp, arg } => {
            Term::Raise { op: op.clone(), req: req.clone(), resp: resp.clone(), arg: sub(sig, ctx, arg, f) }
        }
        Term::Handle(m, h) => {
            let scrut_eff = match synth(sig, ctx, m) {
                Ok(s) => s.eff.unwrap_or_else(EffectType::empty),
                Err(_) => EffectType::Dyn,
            };
            let m2 = sub(sig, ctx, m, f);
            let mut h2 = (**h).clone();
            h2.ret_body = under(sig, ctx, &[(&h.ret_var, h.ret_ty.clone())], &h.ret_body, f);
            for c in h2.clauses.values_mut() {
                let k = match h.kind {
                    HandleKind::Deep => ValueType::arrow(c.resp.clone(), h.eff.clone(), h.ty.clone()),
                    HandleKind::Shallow => ValueType::arrow(c.resp.clone(), scrut_eff.clone(), h.ret_ty.clone()),
                };
                c.body = under(sig, ctx, &[(&c.x, c.req.clone()), (&c.k, k)], &c.body, f);
            }
            Term::Handle(m2, Box::new(h2))
        }
        Term::ValUp(a, b, m) => Term::ValUp(a.clone(), b.clone(), sub(sig, ctx, m, f)),
        Term::ValDown(a, b, m) => Term::ValDown(a.clone(), b.clone(), sub(sig, ctx, m, f)),
        Term::EffUp(a, b, m) => Term::EffUp(a.clone(), b.clone(), sub(sig, ctx, m, f)),
        Term::EffDown(a, b, m) => Term::EffDown(a.clone(), b.clone(), sub(sig, ctx, m, f)),
        Term::Concat(p, q) => Term::Concat(sub(sig, ctx, p, f), sub(sig, ctx, q, f)),
        Term::StrEq(p, q) => Term::StrEq(sub(sig, ctx, p, f), sub(sig, ctx, q, f)),
        Term::QueueVal(a, vs) => Term::QueueVal(a.clone(), vs.iter().map(|v| *sub(sig, ctx, v, f)).collect()),
        Term::Enqueue(p, q) => Term::Enqueue(sub(sig, ctx, p, f), sub(sig, ctx, q, f)),
        Term::CaseQueue { scrut, elem, empty, x, q, cons } => {
            let binds = [(x.as_str(), elem.clone()), (q.as_str(), ValueType::queue(elem.clone()))];
            Term::CaseQueue {
                scrut: sub(sig, ctx, scrut, f),
                elem: elem.clone(),
                empty: sub(sig, ctx, empty, f),
                x: x.clone(),
                q: q.clone(),
                cons: Box::new(under(sig, ctx, &binds, cons, f)),
            }
        }
    }
}
