//! Random surface programs that elaborate by construction.
//!
//! Terms are generated against an expected type and an allowed effect and
//! always synthesize a type and effect gradually below them. Wherever the
//! elaborator would record a synthesized type (let-bound names, handled and
//! matched scrutinees, applied lambdas), the generated term is ascribed, so
//! the generator's bookkeeping matches the elaborator's exactly.

use std::collections::{BTreeMap, BTreeSet};

use greff_core::surface::{
    Clause, Decl, DeclKind, Handle, HandleKind, MainBlock, Module, Program, SEffect, STerm, SType, Span, TermKind,
};
use greff_core::Name;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::rng_for;

pub const MAX_DEPTH: u32 = 6;

type Env = Vec<(Name, SType)>;

fn t(kind: TermKind) -> STerm {
    STerm::synth(kind)
}

fn bx(m: STerm) -> Box<STerm> {
    Box::new(m)
}

fn decl(kind: DeclKind) -> Decl {
    Decl { kind, span: Span::default() }
}

fn asc(m: STerm, a: &SType) -> STerm {
    t(TermKind::AscribeType(bx(m), a.clone()))
}

/// `a ≲ b` for surface types read in one scope, where each operation name
/// has a single typing.
pub fn fits(a: &SType, b: &SType) -> bool {
    match (a, b) {
        (SType::Bool, SType::Bool) | (SType::Unit, SType::Unit) | (SType::Str, SType::Str) => true,
        (SType::Queue(x), SType::Queue(y)) => fits(x, y),
        (SType::Arrow(a1, e1, b1), SType::Arrow(a2, e2, b2)) => fits(a2, a1) && fits_eff(e1, e2) && fits(b1, b2),
        _ => false,
    }
}

pub fn fits_eff(e: &SEffect, e2: &SEffect) -> bool {
    match (e, e2) {
        (SEffect::Dyn, _) | (_, SEffect::Dyn) => true,
        (SEffect::Set(a), SEffect::Set(b)) => a.is_subset(b),
    }
}

fn loosen(rng: &mut ChaCha8Rng, a: &SType) -> SType {
    match a {
        SType::Queue(x) => SType::Queue(Box::new(loosen(rng, x))),
        SType::Arrow(x, e, y) => {
            let e = if rng.gen_bool(0.5) { SEffect::Dyn } else { e.clone() };
            SType::arrow(loosen(rng, x), e, loosen(rng, y))
        }
        _ => a.clone(),
    }
}

pub struct SurfaceGen {
    rng: ChaCha8Rng,
    fresh: u32,
    /// Operation typings visible in the module being generated.
    scope: BTreeMap<Name, (SType, SType)>,
}

impl SurfaceGen {
    pub fn new(seed: u64) -> Self {
        SurfaceGen { rng: rng_for(seed), fresh: 0, scope: BTreeMap::new() }
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn fresh(&mut self, base: &str) -> Name {
        self.fresh += 1;
        format!("{base}{}", self.fresh)
    }

    fn ops(&self) -> Vec<Name> {
        self.scope.keys().cloned().collect()
    }

    fn subset(&mut self, names: &[Name], p: f64) -> BTreeSet<Name> {
        names.iter().filter(|_| self.rng.gen_bool(p)).cloned().collect()
    }

    fn gen_eff(&mut self) -> SEffect {
        if self.chance(0.3) {
            SEffect::Dyn
        } else {
            let ops = self.ops();
            SEffect::Set(self.subset(&ops, 0.4))
        }
    }

    /// A row inside `e`.
    fn sub_eff(&mut self, e: &SEffect) -> SEffect {
        match e {
            SEffect::Dyn => self.gen_eff(),
            SEffect::Set(_) if self.chance(0.2) => SEffect::Dyn,
            SEffect::Set(s) => {
                let names: Vec<Name> = s.iter().cloned().collect();
                SEffect::Set(self.subset(&names, 0.7))
            }
        }
    }

    fn gen_type(&mut self, depth: u32) -> SType {
        if depth == 0 || self.chance(0.5) {
            return [SType::Bool, SType::Unit, SType::Str].choose(&mut self.rng).unwrap().clone();
        }
        if self.chance(0.2) {
            SType::Queue(Box::new(self.gen_type(depth - 1)))
        } else {
            let (a, e, b) = (self.gen_type(depth - 1), self.gen_eff(), self.gen_type(depth - 1));
            SType::arrow(a, e, b)
        }
    }

    fn var_fitting(&mut self, env: &Env, a: &SType) -> Option<STerm> {
        let hits: Vec<&Name> = env.iter().filter(|(_, b)| fits(b, a)).map(|(x, _)| x).collect();
        hits.choose(&mut self.rng).map(|x| t(TermKind::Var((*x).clone())))
    }

    /// A syntactic value of type `a`.
    fn gen_value(&mut self, a: &SType, env: &Env, depth: u32) -> STerm {
        if self.chance(0.25) {
            if let Some(v) = self.var_fitting(env, a) {
                return v;
            }
        }
        match a {
            SType::Bool => t(if self.chance(0.5) { TermKind::True } else { TermKind::False }),
            SType::Unit => t(TermKind::Unit),
            SType::Str => t(TermKind::Str(["", "a", "b", "ab"].choose(&mut self.rng).unwrap().to_string())),
            SType::Queue(x) => t(TermKind::Empty(Some((**x).clone()))),
            SType::Arrow(d, e, c) => {
                let x = self.fresh("x");
                let mut env2 = env.clone();
                env2.push((x.clone(), (**d).clone()));
                let body = self.gen_term(c, e, &env2, depth.saturating_sub(1));
                t(TermKind::Lam(x, Some((**d).clone()), bx(body)))
            }
        }
    }

    /// A term whose type fits `a` and whose effect fits `e`.
    pub fn gen_term(&mut self, a: &SType, e: &SEffect, env: &Env, depth: u32) -> STerm {
        if depth == 0 || self.chance(0.2) {
            if let SType::Queue(x) = a {
                if depth > 0 && self.chance(0.5) {
                    let q = self.gen_term(a, e, env, depth - 1);
                    let v = self.gen_term(x, e, env, depth - 1);
                    return t(TermKind::Enqueue(bx(q), bx(v)));
                }
            }
            return self.gen_value(a, env, depth);
        }
        let d = depth - 1;
        loop {
            let m = match self.rng.gen_range(0..14) {
                0 | 1 => {
                    let b = self.gen_type(2);
                    let x = self.fresh("l");
                    let bound = asc(self.gen_term(&b, e, env, d), &b);
                    let mut env2 = env.clone();
                    env2.push((x.clone(), b));
                    t(TermKind::Let(x, bx(bound), bx(self.gen_term(a, e, &env2, d))))
                }
                2 => {
                    let first = self.gen_term(&SType::Unit, e, env, d);
                    t(TermKind::Seq(bx(first), bx(self.gen_term(a, e, env, d))))
                }
                3 => {
                    let c = self.gen_term(&SType::Bool, e, env, d);
                    let (p, q) = (self.gen_term(a, e, env, d), self.gen_term(a, e, env, d));
                    asc(t(TermKind::If(bx(c), bx(p), bx(q))), a)
                }
                4 | 5 => self.gen_app(a, e, env, d),
                6 | 7 => match self.gen_raise(a, e, env, d) {
                    Some(m) => m,
                    None => continue,
                },
                8 | 9 => self.gen_handle(a, e, env, d),
                10 => {
                    let inner = self.sub_eff(e);
                    let m = self.gen_term(a, &inner, env, d);
                    t(TermKind::AscribeEff(bx(m), inner))
                }
                11 => match a {
                    SType::Bool => {
                        t(TermKind::StrEq(bx(self.gen_term(&SType::Str, e, env, d)), bx(self.gen_term(&SType::Str, e, env, d))))
                    }
                    SType::Str => {
                        t(TermKind::Concat(bx(self.gen_term(&SType::Str, e, env, d)), bx(self.gen_term(&SType::Str, e, env, d))))
                    }
                    SType::Queue(x) => {
                        t(TermKind::Enqueue(bx(self.gen_term(a, e, env, d)), bx(self.gen_term(x, e, env, d))))
                    }
                    _ => continue,
                },
                12 => {
                    let elem = self.gen_type(1);
                    let qt = SType::Queue(Box::new(elem.clone()));
                    let scrut = asc(self.gen_term(&qt, e, env, d), &qt);
                    let (x, q) = (self.fresh("h"), self.fresh("q"));
                    let empty = self.gen_term(a, e, env, d);
                    let mut env2 = env.clone();
                    env2.push((x.clone(), elem));
                    env2.push((q.clone(), qt));
                    let cons = self.gen_term(a, e, &env2, d);
                    asc(t(TermKind::Match { scrut: bx(scrut), empty: bx(empty), x, q, cons: bx(cons) }), a)
                }
                _ => self.gen_value(a, env, depth),
            };
            return m;
        }
    }

    fn gen_app(&mut self, a: &SType, e: &SEffect, env: &Env, d: u32) -> STerm {
        let usable: Vec<(Name, SType)> = env
            .iter()
            .filter(|(_, ty)| matches!(ty, SType::Arrow(_, lat, cod) if fits(cod, a) && fits_eff(lat, e)))
            .cloned()
            .collect();
        if let Some((f, SType::Arrow(dom, _, _))) = usable.choose(&mut self.rng).cloned() {
            if self.chance(0.6) {
                let arg = self.gen_term(&dom, e, env, d);
                return t(TermKind::App(bx(t(TermKind::Var(f))), bx(arg)));
            }
        }
        let dom = self.gen_type(1);
        let lat = self.sub_eff(e);
        let ft = SType::arrow(dom.clone(), lat, a.clone());
        let f = asc(self.gen_value(&ft, env, d), &ft);
        let arg = self.gen_term(&dom, e, env, d);
        t(TermKind::App(bx(f), bx(arg)))
    }

    fn gen_raise(&mut self, a: &SType, e: &SEffect, env: &Env, d: u32) -> Option<STerm> {
        let ops: Vec<Name> = match e {
            SEffect::Dyn => self.ops(),
            SEffect::Set(s) => s.iter().cloned().collect(),
        };
        let op = ops.choose(&mut self.rng)?.clone();
        let (req, resp) = self.scope[&op].clone();
        let arg = self.gen_term(&req, e, env, d);
        let raise = t(TermKind::Raise(op, bx(arg)));
        if fits(&resp, a) && self.chance(0.5) {
            return Some(raise);
        }
        let y = self.fresh("r");
        let mut env2 = env.clone();
        env2.push((y.clone(), resp));
        Some(t(TermKind::Let(y, bx(raise), bx(self.gen_term(a, e, &env2, d)))))
    }

    fn gen_handle(&mut self, c: &SType, e: &SEffect, env: &Env, d: u32) -> STerm {
        let ops = self.ops();
        let mut handled = self.subset(&ops, 0.5);
        if handled.is_empty() {
            handled.insert(ops.choose(&mut self.rng).expect("at least one effect").clone());
        }
        let result = match e {
            SEffect::Set(_) if self.chance(0.75) => e.clone(),
            SEffect::Set(_) => SEffect::Dyn,
            SEffect::Dyn if self.chance(0.5) => SEffect::Dyn,
            SEffect::Dyn => SEffect::Set(self.subset(&ops, 0.5)),
        };
        let scrut_eff = match &result {
            SEffect::Set(s) => SEffect::Set(s.union(&handled).cloned().collect()),
            SEffect::Dyn => SEffect::Dyn,
        };
        let shallow = matches!(&result, SEffect::Set(s) if handled.is_subset(s)) && self.chance(0.3);
        let a = self.gen_type(1);
        let scrut = asc(self.gen_term(&a, &scrut_eff, env, d), &a);
        let r = self.fresh("v");
        let mut env_r = env.clone();
        env_r.push((r.clone(), a.clone()));
        let ret_body = self.gen_term(c, &result, &env_r, d);
        let mut clauses = Vec::new();
        for op in handled {
            let (req, resp) = self.scope[&op].clone();
            let (x, k) = (self.fresh("p"), self.fresh("k"));
            let mut env_c = env.clone();
            env_c.push((x.clone(), req));
            let kvar = || t(TermKind::Var(k.clone()));
            let body = if shallow {
                // A shallow continuation re-raises at the handled row,
                // which the result row contains.
                let arg = self.gen_term(&resp, &result, &env_c, d);
                let y = self.fresh("y");
                let mut env_y = env_c.clone();
                env_y.push((y.clone(), a.clone()));
                let rest = self.gen_term(c, &result, &env_y, d);
                t(TermKind::Let(y, bx(t(TermKind::App(bx(kvar()), bx(arg)))), bx(rest)))
            } else {
                env_c.push((k.clone(), SType::arrow(resp.clone(), result.clone(), c.clone())));
                if self.chance(0.65) {
                    let arg = self.gen_term(&resp, &result, &env_c, d);
                    t(TermKind::App(bx(kvar()), bx(arg)))
                } else {
                    self.gen_term(c, &result, &env_c, d)
                }
            };
            clauses.push(Clause { op, x, k, body, span: Span::default() });
        }
        let kind = if shallow { HandleKind::Shallow } else { HandleKind::Deep };
        t(TermKind::Handle(Box::new(Handle { kind, eff: result, ty: c.clone(), scrut, ret_var: r, ret_body, clauses })))
    }

    /// Handles every operation in scope at `[] bool`.
    fn gen_main_body(&mut self, env: &Env) -> STerm {
        let ops = self.ops();
        let a = self.gen_type(1);
        let scrut_eff = if self.chance(0.3) { SEffect::Dyn } else { SEffect::Set(ops.iter().cloned().collect()) };
        let scrut = asc(self.gen_term(&a, &scrut_eff, env, MAX_DEPTH - 1), &a);
        let none = SEffect::Set(BTreeSet::new());
        let r = self.fresh("v");
        let mut env_r = env.clone();
        env_r.push((r.clone(), a));
        let ret_body = self.gen_term(&SType::Bool, &none, &env_r, 2);
        let mut clauses = Vec::new();
        for op in ops {
            let (req, resp) = self.scope[&op].clone();
            let (x, k) = (self.fresh("p"), self.fresh("k"));
            let mut env_c = env.clone();
            env_c.push((x.clone(), req));
            env_c.push((k.clone(), SType::arrow(resp.clone(), none.clone(), SType::Bool)));
            let body = if self.chance(0.85) {
                let arg = self.gen_value(&resp, &env_c, 2);
                t(TermKind::App(bx(t(TermKind::Var(k.clone()))), bx(arg)))
            } else {
                self.gen_value(&SType::Bool, &env_c, 1)
            };
            clauses.push(Clause { op, x, k, body, span: Span::default() });
        }
        t(TermKind::Handle(Box::new(Handle {
            kind: HandleKind::Deep,
            eff: none,
            ty: SType::Bool,
            scrut,
            ret_var: r,
            ret_body,
            clauses,
        })))
    }

    fn gen_defines(&mut self, env: &mut Env, n: usize) -> Vec<Decl> {
        (0..n)
            .map(|_| {
                let ty = loop {
                    let ty = self.gen_type(2);
                    if !matches!(ty, SType::Queue(_)) {
                        break ty;
                    }
                };
                let body = self.gen_value(&ty, env, MAX_DEPTH - 1);
                let name = self.fresh("f");
                env.push((name.clone(), ty.clone()));
                decl(DeclKind::Define { name, ty, body })
            })
            .collect()
    }

    /// Imports every effect and some values of `module` into a new scope,
    /// loosening some of their types.
    fn imports(&mut self, module: &str, exported: &Env) -> (Vec<Decl>, Env) {
        let mut decls = Vec::new();
        let old = std::mem::take(&mut self.scope);
        // `defer` mentions the others, so it comes last.
        let mut order: Vec<(&Name, &(SType, SType))> = old.iter().collect();
        order.sort_by_key(|(n, _)| n.as_str() == "defer");
        for (name, (req, resp)) in order {
            let req = if self.chance(0.3) { loosen(&mut self.rng, req) } else { req.clone() };
            self.scope.insert(name.clone(), (req.clone(), resp.clone()));
            decls.push(decl(DeclKind::ImportEffect { module: module.into(), name: name.clone(), req, resp: resp.clone() }));
        }
        let mut env = Env::new();
        for (source, ty) in exported {
            if self.chance(0.7) {
                let ty = if self.chance(0.4) { loosen(&mut self.rng, ty) } else { ty.clone() };
                let local = self.fresh("g");
                env.push((local.clone(), ty.clone()));
                decls.push(decl(DeclKind::ImportValue { module: module.into(), source: source.clone(), local, ty }));
            }
        }
        (decls, env)
    }

    pub fn gen_program(&mut self) -> Program {
        // At most three effects; `defer` takes a thunk over the others.
        let pool = ["ask", "say", "pick", "defer"];
        let n = self.rng.gen_range(1..=3);
        let chosen: Vec<&str> = pool.choose_multiple(&mut self.rng, n).copied().collect();
        let mut effects = Vec::new();
        for name in pool.iter().filter(|p| chosen.contains(p)) {
            let (req, resp) = match *name {
                "ask" => (SType::Unit, SType::Bool),
                "say" => (SType::Str, SType::Unit),
                "pick" => (SType::Bool, SType::Str),
                _ => {
                    let inner = if self.chance(0.3) {
                        SEffect::Dyn
                    } else {
                        SEffect::Set(chosen.iter().filter(|c| **c != "defer").map(|c| c.to_string()).collect())
                    };
                    (SType::arrow(SType::Unit, inner, SType::Bool), SType::Bool)
                }
            };
            self.scope.insert(name.to_string(), (req.clone(), resp.clone()));
            effects.push(decl(DeclKind::NewEffect { name: name.to_string(), req, resp }));
        }
        let mut env = Env::new();
        let mut decls = effects;
        let n = self.rng.gen_range(0..=2);
        decls.extend(self.gen_defines(&mut env, n));
        let mut modules = vec![Module { name: "A".into(), decls, span: Span::default() }];
        if self.chance(0.5) {
            let (mut decls, mut env_b) = self.imports("A", &env);
            let n = self.rng.gen_range(0..=2);
            decls.extend(self.gen_defines(&mut env_b, n));
            let exported: Env = env_b
                .iter()
                .filter(|(x, _)| decls.iter().any(|d| matches!(&d.kind, DeclKind::Define { name, .. } if name == x)))
                .cloned()
                .collect();
            modules.push(Module { name: "B".into(), decls, span: Span::default() });
            env = exported;
        }
        let last = modules.last().unwrap().name.clone();
        let (mut decls, mut env_main) = self.imports(&last, &env);
        let n = self.rng.gen_range(0..=1);
        decls.extend(self.gen_defines(&mut env_main, n));
        let body = self.gen_main_body(&env_main);
        Program { modules, main: MainBlock { decls, body, within: None } }
    }
}

/// The surface program for one seed.
pub fn program(seed: u64) -> Program {
    SurfaceGen::new(seed).gen_program()
}
