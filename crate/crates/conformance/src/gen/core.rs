//! Random well-typed core terms, values and closing contexts over a small
//! fixed signature.
//!
//! Every concrete row in one generated program uses a single local view of
//! the operations, as an elaborated module would. Under `?`, operations are
//! raised and handled at their signature typing.

use std::collections::BTreeMap;

use greff_core::core_lang::{Clause, HandleKind, Handler, Term};
use greff_core::typesys::subtype;
use greff_core::{EffectType, Name, OpType, Signature, ValueType};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::rng_for;

pub const OPS: [&str; 3] = ["ask", "say", "run"];

fn thunk_bool(e: EffectType) -> ValueType {
    ValueType::arrow(ValueType::Bool, e, ValueType::Bool)
}

/// `ask : 1 ~> bool`, `say : str ~> 1`, `run : (bool -[?]> bool) ~> bool`.
pub fn signature() -> Signature {
    [
        ("ask".to_string(), OpType::new(ValueType::Unit, ValueType::Bool)),
        ("say".to_string(), OpType::new(ValueType::Str, ValueType::Unit)),
        ("run".to_string(), OpType::new(thunk_bool(EffectType::Dyn), ValueType::Bool)),
    ]
    .into_iter()
    .collect()
}

pub type Env = Vec<(Name, ValueType)>;

pub struct CoreGen {
    pub rng: ChaCha8Rng,
    pub sig: Signature,
    /// The local typing of each operation used by concrete rows.
    pub view: BTreeMap<Name, OpType>,
    fresh: u32,
    /// Nesting depth of function bodies; `℧` is kept out of them so every
    /// function's codomain can be synthesized.
    in_lambda: u32,
}

impl CoreGen {
    pub fn new(seed: u64) -> Self {
        let mut rng = rng_for(seed);
        let sig = signature();
        let mut view: BTreeMap<Name, OpType> = sig.iter().map(|(n, o)| (n.clone(), o.clone())).collect();
        let simple = |names: &[&str], view: &BTreeMap<Name, OpType>| {
            EffectType::Concrete(names.iter().map(|n| (n.to_string(), view[*n].clone())).collect())
        };
        let inner = match rng.gen_range(0..4) {
            0 => EffectType::Dyn,
            1 => EffectType::empty(),
            2 => simple(&["ask"], &view),
            _ => simple(&["ask", "say"], &view),
        };
        view.insert("run".into(), OpType::new(thunk_bool(inner), ValueType::Bool));
        CoreGen { rng, sig, view, fresh: 0, in_lambda: 0 }
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    pub fn fresh(&mut self, base: &str) -> Name {
        self.fresh += 1;
        format!("{base}{}", self.fresh)
    }

    fn pick<T: Clone>(&mut self, xs: &[T]) -> T {
        xs.choose(&mut self.rng).expect("non-empty choice").clone()
    }

    pub fn row_of(&self, names: &[&str]) -> EffectType {
        EffectType::Concrete(names.iter().map(|n| (n.to_string(), self.view[*n].clone())).collect())
    }

    pub fn gen_row(&mut self) -> EffectType {
        let names: Vec<&str> = OPS.iter().copied().filter(|_| self.rng.gen_bool(0.4)).collect();
        self.row_of(&names)
    }

    pub fn gen_eff(&mut self) -> EffectType {
        if self.chance(0.3) {
            EffectType::Dyn
        } else {
            self.gen_row()
        }
    }

    pub fn gen_type(&mut self, depth: u32) -> ValueType {
        let base = [ValueType::Bool, ValueType::Unit, ValueType::Str];
        if depth == 0 || self.chance(0.45) {
            return self.pick(&base);
        }
        if self.chance(0.2) {
            ValueType::queue(self.gen_type(depth - 1))
        } else {
            let (a, e, b) = (self.gen_type(depth - 1), self.gen_eff(), self.gen_type(depth - 1));
            ValueType::arrow(a, e, b)
        }
    }

    /// A type at least as precise as `a`: some `?` become concrete rows.
    pub fn precisify(&mut self, a: &ValueType) -> ValueType {
        match a {
            ValueType::Queue(x) => ValueType::queue(self.precisify(x)),
            ValueType::Arrow(d, e, c) => {
                let e = self.precisify_eff(e);
                ValueType::arrow(self.precisify(d), e, self.precisify(c))
            }
            _ => a.clone(),
        }
    }

    pub fn precisify_eff(&mut self, e: &EffectType) -> EffectType {
        match e {
            EffectType::Dyn if self.chance(0.6) => self.gen_row(),
            _ => e.clone(),
        }
    }

    /// A type at most as precise as `a`: some concrete rows become `?`.
    pub fn loosen(&mut self, a: &ValueType) -> ValueType {
        match a {
            ValueType::Queue(x) => ValueType::queue(self.loosen(x)),
            ValueType::Arrow(d, e, c) => {
                let e = self.loosen_eff(e);
                ValueType::arrow(self.loosen(d), e, self.loosen(c))
            }
            _ => a.clone(),
        }
    }

    pub fn loosen_eff(&mut self, e: &EffectType) -> EffectType {
        if self.chance(0.6) {
            EffectType::Dyn
        } else {
            e.clone()
        }
    }

    /// A row as precise as `e` or less, loosening the typings of its
    /// operations.
    pub fn loosen_row(&mut self, e: &EffectType) -> EffectType {
        match e {
            EffectType::Dyn => EffectType::Dyn,
            EffectType::Concrete(m) => EffectType::Concrete(
                m.iter().map(|(n, o)| (n.clone(), OpType::new(self.loosen(&o.req), self.loosen(&o.resp)))).collect(),
            ),
        }
    }

    /// A type `b` with `a ≲ b`: covariant rows may grow or become `?`,
    /// contravariant ones may shrink or become `?`, and `?` may become any
    /// row.
    pub fn gradual_super(&mut self, a: &ValueType, covariant: bool) -> ValueType {
        match a {
            ValueType::Queue(x) => ValueType::queue(self.gradual_super(x, covariant)),
            ValueType::Arrow(d, e, c) => {
                let d2 = self.gradual_super(d, !covariant);
                let e2 = self.gradual_super_eff(e, covariant);
                ValueType::arrow(d2, e2, self.gradual_super(c, covariant))
            }
            _ => a.clone(),
        }
    }

    fn gradual_super_eff(&mut self, e: &EffectType, covariant: bool) -> EffectType {
        match e {
            EffectType::Dyn if self.chance(0.5) => EffectType::Dyn,
            EffectType::Dyn => self.gen_row(),
            EffectType::Concrete(_) if self.chance(0.3) => EffectType::Dyn,
            EffectType::Concrete(m) => {
                let mut m = m.clone();
                if covariant {
                    for n in OPS {
                        if self.rng.gen_bool(0.3) {
                            m.insert(n.to_string(), self.view[n].clone());
                        }
                    }
                } else {
                    m.retain(|_, _| self.rng.gen_bool(0.7));
                }
                EffectType::Concrete(m)
            }
        }
    }

    /// The typing `e` gives `op`, if it may raise it.
    pub fn op_in(&self, e: &EffectType, op: &str) -> Option<OpType> {
        match e {
            EffectType::Dyn => self.sig.get(op).cloned(),
            EffectType::Concrete(m) => m.get(op).cloned(),
        }
    }

    fn ops_in(&self, e: &EffectType) -> Vec<(Name, OpType)> {
        OPS.iter().filter_map(|n| self.op_in(e, n).map(|o| (n.to_string(), o))).collect()
    }

    fn var_of(&mut self, env: &Env, a: &ValueType) -> Option<Term> {
        let hits: Vec<&Name> = env.iter().filter(|(_, t)| subtype(t, a)).map(|(x, _)| x).collect();
        if hits.is_empty() {
            None
        } else {
            Some(Term::var(hits[self.rng.gen_range(0..hits.len())]))
        }
    }

    pub fn gen_value(&mut self, a: &ValueType, env: &Env, depth: u32) -> Term {
        if self.chance(0.3) {
            if let Some(v) = self.var_of(env, a) {
                return v;
            }
        }
        match a {
            ValueType::Bool => {
                if self.chance(0.5) {
                    Term::True
                } else {
                    Term::False
                }
            }
            ValueType::Unit => Term::Unit,
            ValueType::Str => Term::str(self.pick(&["", "a", "b", "ab"])),
            ValueType::Queue(x) => {
                let n = self.rng.gen_range(0..3);
                let vs = (0..n).map(|_| self.gen_value(x, env, depth.saturating_sub(1))).collect();
                Term::QueueVal((**x).clone(), vs)
            }
            ValueType::Arrow(d, e, c) => {
                if depth > 0 && self.chance(0.15) {
                    let p = self.precisify(a);
                    if p != *a {
                        let v = self.gen_value(&p, env, depth - 1);
                        return Term::val_up(p, a.clone(), v);
                    }
                }
                if depth > 0 && self.chance(0.15) {
                    let l = self.loosen(a);
                    if l != *a {
                        let v = self.gen_value(&l, env, depth - 1);
                        return Term::val_down(a.clone(), l, v);
                    }
                }
                let x = self.fresh("x");
                let mut env2 = env.clone();
                env2.push((x.clone(), (**d).clone()));
                self.in_lambda += 1;
                let body = self.gen_comp(c, e, &env2, depth.saturating_sub(1));
                self.in_lambda -= 1;
                Term::lam(&x, (**d).clone(), body)
            }
        }
    }

    /// A computation of type `b` whose effect fits in `e`.
    pub fn gen_comp(&mut self, b: &ValueType, e: &EffectType, env: &Env, depth: u32) -> Term {
        if depth == 0 || self.chance(0.1) {
            return self.gen_value(b, env, depth);
        }
        let d = depth - 1;
        loop {
            let choice = self.rng.gen_range(0..16);
            let t = match choice {
                0 | 1 => {
                    let a = self.gen_type(2);
                    let x = self.fresh("l");
                    let m = self.gen_comp(&a, e, env, d);
                    let mut env2 = env.clone();
                    env2.push((x.clone(), a.clone()));
                    Term::let_(&x, a, m, self.gen_comp(b, e, &env2, d))
                }
                2 => Term::if_(
                    self.gen_comp(&ValueType::Bool, e, env, d),
                    self.gen_comp(b, e, env, d),
                    self.gen_comp(b, e, env, d),
                ),
                3 | 4 => self.gen_app(b, e, env, d),
                5 | 6 => match self.gen_raise(b, e, env, d) {
                    Some(t) => t,
                    None => continue,
                },
                7 | 8 => self.gen_handle(b, e, env, d),
                9 => match e {
                    EffectType::Dyn => {
                        let row = self.gen_row();
                        Term::eff_up(row.clone(), EffectType::Dyn, self.gen_comp(b, &row, env, d))
                    }
                    EffectType::Concrete(_) => {
                        Term::eff_down(e.clone(), EffectType::Dyn, self.gen_comp(b, &EffectType::Dyn, env, d))
                    }
                },
                10 => {
                    let p = self.precisify(b);
                    Term::val_up(p.clone(), b.clone(), self.gen_comp(&p, e, env, d))
                }
                11 => {
                    let l = self.loosen(b);
                    Term::val_down(b.clone(), l.clone(), self.gen_comp(&l, e, env, d))
                }
                12 => {
                    let a = self.gen_type(1);
                    let (x, q) = (self.fresh("h"), self.fresh("t"));
                    let scrut = self.gen_comp(&ValueType::queue(a.clone()), e, env, d);
                    let empty = self.gen_comp(b, e, env, d);
                    let mut env2 = env.clone();
                    env2.push((x.clone(), a.clone()));
                    env2.push((q.clone(), ValueType::queue(a.clone())));
                    let cons = self.gen_comp(b, e, &env2, d);
                    Term::CaseQueue { scrut: Box::new(scrut), elem: a, empty: Box::new(empty), x, q, cons: Box::new(cons) }
                }
                13 => match b {
                    ValueType::Bool => Term::StrEq(
                        Box::new(self.gen_comp(&ValueType::Str, e, env, d)),
                        Box::new(self.gen_comp(&ValueType::Str, e, env, d)),
                    ),
                    ValueType::Str => Term::Concat(
                        Box::new(self.gen_comp(&ValueType::Str, e, env, d)),
                        Box::new(self.gen_comp(&ValueType::Str, e, env, d)),
                    ),
                    ValueType::Queue(x) => Term::Enqueue(
                        Box::new(self.gen_comp(b, e, env, d)),
                        Box::new(self.gen_comp(x, e, env, d)),
                    ),
                    _ => continue,
                },
                14 => {
                    if self.in_lambda == 0 && self.chance(0.3) {
                        Term::Err
                    } else {
                        continue;
                    }
                }
                _ => self.gen_value(b, env, depth),
            };
            return t;
        }
    }

    fn gen_app(&mut self, b: &ValueType, e: &EffectType, env: &Env, d: u32) -> Term {
        // Functions in scope whose result and latent effect fit.
        let fits = |t: &ValueType| match t {
            ValueType::Arrow(_, lat, c) => {
                subtype(c, b)
                    && match (lat.as_ref(), e) {
                        (EffectType::Dyn, EffectType::Dyn) => true,
                        (EffectType::Concrete(l), EffectType::Concrete(m)) => l.iter().all(|(n, o)| m.get(n) == Some(o)),
                        _ => false,
                    }
            }
            _ => false,
        };
        let fns: Vec<(Name, ValueType)> = env.iter().filter(|(_, t)| fits(t)).cloned().collect();
        if !fns.is_empty() && self.chance(0.5) {
            let (f, t) = self.pick(&fns);
            let (dom, _, _) = t.as_arrow().expect("arrow");
            let dom = dom.clone();
            let arg = self.gen_comp(&dom, e, env, d);
            return Term::app(Term::var(&f), arg);
        }
        let a = self.gen_type(1);
        let lat = match e {
            EffectType::Dyn => EffectType::Dyn,
            EffectType::Concrete(m) => {
                EffectType::Concrete(m.iter().filter(|_| self.rng.gen_bool(0.7)).map(|(n, o)| (n.clone(), o.clone())).collect())
            }
        };
        let f = self.gen_value(&ValueType::arrow(a.clone(), lat, b.clone()), env, d);
        let arg = self.gen_comp(&a, e, env, d);
        Term::app(f, arg)
    }

    fn gen_raise(&mut self, b: &ValueType, e: &EffectType, env: &Env, d: u32) -> Option<Term> {
        let ops = self.ops_in(e);
        if ops.is_empty() {
            return None;
        }
        let (op, t) = self.pick(&ops);
        let arg = self.gen_comp(&t.req, e, env, d);
        let raise = Term::raise(&op, t.req.clone(), t.resp.clone(), arg);
        if subtype(&t.resp, b) && self.chance(0.5) {
            return Some(raise);
        }
        let y = self.fresh("r");
        let mut env2 = env.clone();
        env2.push((y.clone(), t.resp.clone()));
        Some(Term::let_(&y, t.resp, raise, self.gen_comp(b, e, &env2, d)))
    }

    fn gen_handle(&mut self, b: &ValueType, e: &EffectType, env: &Env, d: u32) -> Term {
        let handled: Vec<&str> = {
            let mut h: Vec<&str> = OPS.iter().copied().filter(|_| self.rng.gen_bool(0.5)).collect();
            if h.is_empty() {
                h.push(self.pick(&OPS));
            }
            h
        };
        let scrut_eff = match e {
            EffectType::Concrete(m) => {
                let mut m = m.clone();
                for n in &handled {
                    m.insert(n.to_string(), self.view[*n].clone());
                }
                EffectType::Concrete(m)
            }
            EffectType::Dyn if self.chance(0.5) => EffectType::Dyn,
            EffectType::Dyn => self.row_of(&handled),
        };
        // Shallow continuations return to the scrutinee's context, so they
        // are only resumable where the scrutinee's effect fits `e`.
        let shallow_ok = match (e, &scrut_eff) {
            (EffectType::Concrete(m), _) => handled.iter().all(|n| m.contains_key(*n)),
            (EffectType::Dyn, EffectType::Dyn) => true,
            _ => false,
        };
        let kind = if shallow_ok && self.chance(0.3) { HandleKind::Shallow } else { HandleKind::Deep };
        let a = self.gen_type(1);
        let scrut = self.gen_comp(&a, &scrut_eff, env, d);
        let r = self.fresh("v");
        let mut env_r = env.clone();
        env_r.push((r.clone(), a.clone()));
        let ret_body = self.gen_comp(b, e, &env_r, d);
        let mut clauses = BTreeMap::new();
        for n in handled {
            let t = self.op_in(&scrut_eff, n).expect("handled op is in the scrutinee effect");
            let (x, k) = (self.fresh("p"), self.fresh("k"));
            let (kty, kret) = match kind {
                HandleKind::Deep => (ValueType::arrow(t.resp.clone(), e.clone(), b.clone()), b.clone()),
                HandleKind::Shallow => {
                    let lat = if scrut_eff.is_dyn() { EffectType::Dyn } else { e.clone() };
                    (ValueType::arrow(t.resp.clone(), lat, a.clone()), a.clone())
                }
            };
            let mut env_c = env.clone();
            env_c.push((x.clone(), t.req.clone()));
            let body = if self.chance(0.6) {
                let arg = self.gen_comp(&t.resp, e, &env_c, d);
                let resumed = Term::app(Term::var(&k), arg);
                if kret == *b && kind == HandleKind::Deep {
                    resumed
                } else {
                    let y = self.fresh("y");
                    let mut env_y = env_c.clone();
                    env_y.push((y.clone(), kret.clone()));
                    Term::let_(&y, kret, resumed, self.gen_comp(b, e, &env_y, d))
                }
            } else {
                if kind == HandleKind::Deep {
                    env_c.push((k.clone(), kty));
                }
                self.gen_comp(b, e, &env_c, d)
            };
            clauses.insert(n.to_string(), Clause { x, k, req: t.req, resp: t.resp, body });
        }
        let h = Handler { kind, ret_var: r, ret_ty: a, ret_body, clauses, eff: e.clone(), ty: b.clone() };
        Term::handle(scrut, h)
    }

    /// Handles every operation `e` may raise, resuming with generated
    /// responses or aborting with a generated result.
    pub fn handle_all(&mut self, e: &EffectType, a: &ValueType, m: Term) -> Term {
        let ops = self.ops_in(e);
        if ops.is_empty() {
            return m;
        }
        let mut clauses = BTreeMap::new();
        for (n, t) in ops {
            let body = if self.chance(0.8) {
                let v = self.gen_value(&t.resp, &vec![], 2);
                Term::app(Term::var("$k"), v)
            } else {
                self.gen_value(a, &vec![], 2)
            };
            clauses.insert(n, Clause { x: "$x".into(), k: "$k".into(), req: t.req, resp: t.resp, body });
        }
        let h = Handler {
            kind: HandleKind::Deep,
            ret_var: "$v".into(),
            ret_ty: a.clone(),
            ret_body: Term::var("$v"),
            clauses,
            eff: EffectType::empty(),
            ty: a.clone(),
        };
        Term::handle(m, h)
    }

    /// A closing context for values of type `a`: a pure boolean program
    /// observing the value bound to `hole`.
    pub fn closer(&mut self, a: &ValueType, hole: &str) -> Term {
        match a {
            ValueType::Bool => Term::var(hole),
            ValueType::Str => Term::StrEq(Box::new(Term::var(hole)), Box::new(Term::str(self.pick(&["", "a", "ab"])))),
            ValueType::Unit => Term::let_("_", ValueType::Unit, Term::var(hole), Term::True),
            ValueType::Queue(x) => {
                let (y, q) = (self.fresh("$e"), self.fresh("$q"));
                let cons = self.closer(x, &y);
                Term::CaseQueue {
                    scrut: Box::new(Term::var(hole)),
                    elem: (**x).clone(),
                    empty: Box::new(Term::bool(self.chance(0.5))),
                    x: y,
                    q,
                    cons: Box::new(cons),
                }
            }
            ValueType::Arrow(d, e, c) => {
                let arg = self.gen_value(d, &vec![], 2);
                let call = self.handle_all(e, c, Term::app(Term::var(hole), arg));
                let r = self.fresh("$c");
                let rest = self.closer(c, &r);
                Term::let_(&r, (**c).clone(), call, rest)
            }
        }
    }
}

/// A reusable closing context for terms of one type and effect.
#[derive(Clone, Debug)]
pub struct Closing {
    pub ty: ValueType,
    pub eff: EffectType,
    handle: Term,
    observe: Term,
}

impl Closing {
    pub fn new(g: &mut CoreGen, eff: &EffectType, ty: &ValueType) -> Closing {
        let handle = g.handle_all(eff, ty, Term::var("$m"));
        let observe = g.closer(ty, "$hole");
        Closing { ty: ty.clone(), eff: eff.clone(), handle, observe }
    }

    /// `let $hole = handle m with … in observe`.
    pub fn plug(&self, m: Term) -> Term {
        let handled = replace_scrutinee(&self.handle, m);
        Term::let_("$hole", self.ty.clone(), handled, self.observe.clone())
    }
}

fn replace_scrutinee(h: &Term, m: Term) -> Term {
    match h {
        Term::Handle(_, handler) => Term::Handle(Box::new(m), handler.clone()),
        _ => m,
    }
}
