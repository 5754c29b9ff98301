//! Type-checking elaboration from surface programs to cast-explicit core
//! terms.
//!
//! Module-level values become nested `let`s around the main term. Their core
//! names are `Module.x` (`main.x` for the main block); locals keep their
//! surface names, which cannot contain `.` or `$`.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use thiserror::Error;

use crate::core_lang::{self as core, CastUnjustified, Term};
use crate::surface::{self as s, DeclKind, Program, SEffect, STerm, SType, Span, TermKind};
use crate::typesys::{
    compatible, gradual_join, gradual_join_eff, gradual_subtype, gradual_subtype_eff, subtype_eff, EffMap,
    EffectType, Name, OpType, Signature, ValueType,
};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ElabError {
    #[error("{at}: type mismatch: {msg}")]
    TypeMismatch { msg: String, at: Span },
    #[error("{at}: unknown effect `{name}`")]
    UnknownEffect { name: Name, at: Span },
    #[error("{at}: effect `{name}` is neither handled nor part of the handler's result effect")]
    UnhandledEffect { name: Name, at: Span },
    #[error("{at}: effect `{name}` is declared twice")]
    DuplicateEffect { name: Name, at: Span },
    #[error("{at}: unknown module `{name}`")]
    UnknownModule { name: Name, at: Span },
    #[error("{at}: unknown name `{name}`")]
    UnknownName { name: Name, at: Span },
    #[error("{at}: effect `{name}` imported at {local} is incompatible with its export at {exported}")]
    IncompatibleEffectImport { name: Name, local: String, exported: String, at: Span },
    #[error("{at}: value `{name}` imported at {local} is incompatible with its export at {exported}")]
    IncompatibleValueImport { name: Name, local: String, exported: String, at: Span },
    #[error("{at}: {err}")]
    Cast { err: CastUnjustified, at: Span },
}

type R<T> = Result<T, ElabError>;

fn mismatch<T>(at: Span, msg: impl Into<String>) -> R<T> {
    Err(ElabError::TypeMismatch { msg: msg.into(), at })
}

/// What a module exports: its whole typing context.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Exports {
    pub effects: BTreeMap<Name, OpType>,
    /// Surface name to (core name, type).
    pub values: BTreeMap<Name, (Name, ValueType)>,
}

/// Module typing contexts of the modules elaborated so far.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ModuleContext {
    pub modules: BTreeMap<Name, Exports>,
}

/// The typing context inside one module.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scope {
    pub module: Name,
    pub ctx: Exports,
}

impl Scope {
    pub fn new(module: &str) -> Self {
        Scope { module: module.into(), ctx: Exports::default() }
    }

    pub fn with_effect(mut self, name: &str, req: ValueType, resp: ValueType) -> Self {
        self.ctx.effects.insert(name.into(), OpType::new(req, resp));
        self
    }

    /// Binds a surface name to a core variable of the same name.
    pub fn with_value(mut self, name: &str, ty: ValueType) -> Self {
        self.ctx.values.insert(name.into(), (name.into(), ty));
        self
    }

    pub fn effect(&self, name: &str) -> Option<&OpType> {
        self.ctx.effects.get(name)
    }

    /// The signature induced by the effects in scope.
    pub fn signature(&self) -> Signature {
        self.ctx.effects.iter().map(|(n, op)| (n.clone(), op.erase())).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Elaborated {
    pub sig: Signature,
    pub term: Term,
    pub eff: EffectType,
    pub ty: ValueType,
}

// ---------------------------------------------------------------- casts

/// `⟨B ↢ |B|⟩⟨A ↣ |A|⟩M`: an upcast to the erasure followed by a downcast.
pub fn oblique_cast(target: &ValueType, source: &ValueType, m: Term) -> Result<Term, CastUnjustified> {
    if !gradual_subtype(source, target) {
        return Err(CastUnjustified { from: source.to_string(), to: target.to_string() });
    }
    let up = Term::checked_val_up(source.clone(), source.erase(), m)?;
    Term::checked_val_down(target.clone(), target.erase(), up)
}

/// `⟨σ ↢ ?⟩⟨σ' ↣ ?⟩M`.
pub fn oblique_cast_eff(target: &EffectType, source: &EffectType, m: Term) -> Result<Term, CastUnjustified> {
    if !gradual_subtype_eff(source, target) {
        return Err(CastUnjustified { from: source.to_string(), to: target.to_string() });
    }
    let up = Term::checked_eff_up(source.clone(), EffectType::Dyn, m)?;
    Term::checked_eff_down(target.clone(), EffectType::Dyn, up)
}

/// Oblique value cast, omitted when source and target coincide.
fn obl(target: &ValueType, source: &ValueType, m: Term, at: Span) -> R<Term> {
    if target == source {
        return Ok(m);
    }
    if !gradual_subtype(source, target) {
        return mismatch(at, format!("{source} is not compatible with {target}"));
    }
    oblique_cast(target, source, m).map_err(|err| ElabError::Cast { err, at })
}

fn obl_eff(target: &EffectType, source: &EffectType, m: Term, at: Span) -> R<Term> {
    if target == source {
        return Ok(m);
    }
    if !gradual_subtype_eff(source, target) {
        return mismatch(at, format!("effect {source} is not compatible with {target}"));
    }
    oblique_cast_eff(target, source, m).map_err(|err| ElabError::Cast { err, at })
}

fn join(a: &ValueType, b: &ValueType, at: Span) -> R<ValueType> {
    gradual_join(a, b).map_err(|e| ElabError::TypeMismatch { msg: e.to_string(), at })
}

fn join_eff(a: &EffectType, b: &EffectType, at: Span) -> R<EffectType> {
    gradual_join_eff(a, b).map_err(|e| ElabError::TypeMismatch { msg: e.to_string(), at })
}

// ---------------------------------------------------------------- types

pub fn elab_type(scope: &Scope, t: &SType) -> R<ValueType> {
    elab_type_at(scope, t, Span::default())
}

pub fn elab_effect(scope: &Scope, e: &SEffect) -> R<EffectType> {
    elab_effect_at(scope, e, Span::default())
}

fn elab_type_at(scope: &Scope, t: &SType, at: Span) -> R<ValueType> {
    Ok(match t {
        SType::Bool => ValueType::Bool,
        SType::Unit => ValueType::Unit,
        SType::Str => ValueType::Str,
        SType::Queue(a) => ValueType::queue(elab_type_at(scope, a, at)?),
        SType::Arrow(a, e, b) => ValueType::arrow(
            elab_type_at(scope, a, at)?,
            elab_effect_at(scope, e, at)?,
            elab_type_at(scope, b, at)?,
        ),
    })
}

fn elab_effect_at(scope: &Scope, e: &SEffect, at: Span) -> R<EffectType> {
    match e {
        SEffect::Dyn => Ok(EffectType::Dyn),
        SEffect::Set(names) => {
            let mut row = EffMap::new();
            for n in names {
                let op = scope.effect(n).ok_or_else(|| ElabError::UnknownEffect { name: n.clone(), at })?;
                row.insert(n.clone(), op.clone());
            }
            Ok(EffectType::Concrete(row))
        }
    }
}

/// Types of an effect declaration. The declaration may mention its own
/// effect; that occurrence is read at the erased typing.
fn elab_op_decl(scope: &Scope, name: &str, req: &SType, resp: &SType, at: Span) -> R<OpType> {
    let erased = scope.clone();
    let er = |t: &SType| elab_type_at(&Scope::new(""), &t.erase(), at);
    let self_ty = OpType::new(er(req)?, er(resp)?);
    let inner = erased.with_effect(name, self_ty.req, self_ty.resp);
    Ok(OpType::new(elab_type_at(&inner, req, at)?, elab_type_at(&inner, resp, at)?))
}

/// The effect type the scrutinee of a handler is cast to, given its own
/// effect `σm`, the handler's result effect `σ` and the handled names.
pub fn handle_scrutinee_type(
    scope: &Scope,
    scrut: &EffectType,
    result: &EffectType,
    handled: &BTreeSet<Name>,
) -> R<EffectType> {
    handle_scrutinee_type_at(scope, scrut, result, handled, Span::default())
}

fn handle_scrutinee_type_at(
    scope: &Scope,
    scrut: &EffectType,
    result: &EffectType,
    handled: &BTreeSet<Name>,
    at: Span,
) -> R<EffectType> {
    let gamma = |n: &Name| -> R<OpType> {
        scope.effect(n).cloned().ok_or_else(|| ElabError::UnknownEffect { name: n.clone(), at })
    };
    let with_handled = |mut row: EffMap| -> R<EffectType> {
        for n in handled {
            row.insert(n.clone(), gamma(n)?);
        }
        Ok(EffectType::Concrete(row))
    };
    match (scrut, result) {
        (EffectType::Concrete(sm), EffectType::Concrete(tc)) => {
            if let Some(n) = sm.keys().find(|n| !tc.contains_key(*n) && !handled.contains(*n)) {
                return Err(ElabError::UnhandledEffect { name: n.clone(), at });
            }
            with_handled(tc.clone())
        }
        (EffectType::Dyn, EffectType::Concrete(tc)) => with_handled(tc.clone()),
        (EffectType::Concrete(sm), EffectType::Dyn) => {
            let mut row = EffMap::new();
            for (n, op) in sm {
                let op = if handled.contains(n) { op.clone() } else { gamma(n)?.erase() };
                row.insert(n.clone(), op);
            }
            Ok(EffectType::Concrete(row))
        }
        (EffectType::Dyn, EffectType::Dyn) => Ok(EffectType::Dyn),
    }
}

// ---------------------------------------------------------------- terms

pub fn elab_term(scope: &Scope, m: &STerm) -> R<(Term, EffectType, ValueType)> {
    Cx { scope, locals: Vec::new() }.term(m, None)
}

/// Elaborates against an expected type, used to annotate bare lambdas.
pub fn elab_term_expecting(scope: &Scope, m: &STerm, expect: &ValueType) -> R<(Term, EffectType, ValueType)> {
    Cx { scope, locals: Vec::new() }.term(m, Some(expect))
}

struct Cx<'a> {
    scope: &'a Scope,
    locals: Vec<(Name, ValueType)>,
}

type Elab = (Term, EffectType, ValueType);

impl Cx<'_> {
    fn ty(&self, t: &SType, at: Span) -> R<ValueType> {
        elab_type_at(self.scope, t, at)
    }

    fn gamma(&self, n: &str, at: Span) -> R<OpType> {
        self.scope.effect(n).cloned().ok_or_else(|| ElabError::UnknownEffect { name: n.into(), at })
    }

    fn lookup(&self, x: &str) -> Option<(Name, ValueType)> {
        if let Some((_, t)) = self.locals.iter().rev().find(|(y, _)| y == x) {
            return Some((x.to_string(), t.clone()));
        }
        self.scope.ctx.values.get(x).cloned()
    }

    fn scoped<T>(&mut self, binds: &[(&Name, &ValueType)], f: impl FnOnce(&mut Self) -> R<T>) -> R<T> {
        let n = self.locals.len();
        self.locals.extend(binds.iter().map(|(x, t)| ((*x).clone(), (*t).clone())));
        let r = f(self);
        self.locals.truncate(n);
        r
    }

    /// Elaborates `m` and casts it to `target`, checking `≲`.
    fn against(&mut self, m: &STerm, target: &ValueType) -> R<(Term, EffectType)> {
        let (t, e, a) = self.term(m, Some(target))?;
        if !gradual_subtype(&a, target) {
            return mismatch(m.span, format!("expected {target}, found {a}"));
        }
        Ok((obl(target, &a, t, m.span)?, e))
    }

    fn term(&mut self, m: &STerm, expect: Option<&ValueType>) -> R<Elab> {
        let at = m.span;
        let pure = |t: Term, a: ValueType| Ok((t, EffectType::empty(), a));
        match &m.kind {
            TermKind::Var(x) => match self.lookup(x) {
                Some((c, a)) => pure(Term::Var(c), a),
                None => Err(ElabError::UnknownName { name: x.clone(), at }),
            },
            TermKind::True => pure(Term::True, ValueType::Bool),
            TermKind::False => pure(Term::False, ValueType::Bool),
            TermKind::Unit => pure(Term::Unit, ValueType::Unit),
            TermKind::Str(s) => pure(Term::Str(s.clone()), ValueType::Str),
            TermKind::Lam(x, ann, body) => {
                let hint = expect.and_then(|e| e.as_arrow());
                let dom = match (ann, hint) {
                    (Some(a), _) => self.ty(a, at)?,
                    (None, Some((d, _, _))) => d.clone(),
                    (None, None) => return mismatch(at, format!("cannot infer the type of `{x}`; annotate it")),
                };
                let cod_hint = hint.map(|(_, _, c)| c.clone());
                let (b, e, cod) = self.scoped(&[(x, &dom)], |cx| cx.term(body, cod_hint.as_ref()))?;
                pure(Term::lam(x, dom.clone(), b), ValueType::arrow(dom, e, cod))
            }
            TermKind::App(f, a) => {
                if let TermKind::Var(name) = &f.kind {
                    if self.lookup(name).is_none() && self.scope.effect(name).is_some() {
                        return self.raise(name, a, at);
                    }
                }
                self.app(f, a, at)
            }
            TermKind::Raise(op, a) => self.raise(op, a, at),
            TermKind::Let(x, bound, body) => self.let_(x, bound, body, expect, at),
            TermKind::Seq(a, b) => self.let_(&"$_".to_string(), a, b, expect, at),
            TermKind::If(c, t, e) => {
                let (c1, ec) = self.against(c, &ValueType::Bool)?;
                let (t1, et, tt) = self.term(t, expect)?;
                let (e1, ee, te) = self.term(e, expect)?;
                let ty = join(&tt, &te, at)?;
                let eff = join_eff(&join_eff(&ec, &et, at)?, &ee, at)?;
                let c2 = obl_eff(&eff, &ec, c1, c.span)?;
                let t2 = obl_eff(&eff, &et, obl(&ty, &tt, t1, t.span)?, t.span)?;
                let e2 = obl_eff(&eff, &ee, obl(&ty, &te, e1, e.span)?, e.span)?;
                Ok((Term::if_(c2, t2, e2), eff, ty))
            }
            TermKind::AscribeType(inner, st) => {
                let a = self.ty(st, at)?;
                let (t, e) = self.against(inner, &a)?;
                Ok((t, e, a))
            }
            TermKind::AscribeEff(inner, se) => {
                let sigma = elab_effect_at(self.scope, se, at)?;
                let (t, e, a) = self.term(inner, expect)?;
                if !gradual_subtype_eff(&e, &sigma) {
                    return mismatch(at, format!("effect {e} is not compatible with {sigma}"));
                }
                Ok((obl_eff(&sigma, &e, t, at)?, sigma, a))
            }
            TermKind::Concat(a, b) | TermKind::StrEq(a, b) => {
                let (a1, ea) = self.against(a, &ValueType::Str)?;
                let (b1, eb) = self.against(b, &ValueType::Str)?;
                let eff = join_eff(&ea, &eb, at)?;
                let a2 = obl_eff(&eff, &ea, a1, a.span)?;
                let b2 = obl_eff(&eff, &eb, b1, b.span)?;
                Ok(match &m.kind {
                    TermKind::Concat(..) => (Term::Concat(Box::new(a2), Box::new(b2)), eff, ValueType::Str),
                    _ => (Term::StrEq(Box::new(a2), Box::new(b2)), eff, ValueType::Bool),
                })
            }
            TermKind::Empty(ann) => {
                let elem = match (ann, expect) {
                    (Some(a), _) => self.ty(a, at)?,
                    (None, Some(ValueType::Queue(a))) => (**a).clone(),
                    _ => return mismatch(at, "cannot infer the element type of `empty`; write `empty[A]`"),
                };
                pure(Term::QueueVal(elem.clone(), Vec::new()), ValueType::queue(elem))
            }
            TermKind::Enqueue(q, v) => {
                let hint = match expect {
                    Some(ValueType::Queue(a)) => Some((**a).clone()),
                    _ => None,
                };
                let (q1, eq, elem) = if matches!(q.kind, TermKind::Empty(None)) && hint.is_none() {
                    // The element type of a bare `empty` comes from the value.
                    let (_, _, a) = self.term(v, None)?;
                    (Term::QueueVal(a.clone(), Vec::new()), EffectType::empty(), a)
                } else {
                    let qh = hint.clone().map(ValueType::queue);
                    let (q1, eq, qt) = self.term(q, qh.as_ref())?;
                    let ValueType::Queue(a) = qt else {
                        return mismatch(q.span, format!("expected a queue, found {qt}"));
                    };
                    (q1, eq, *a)
                };
                let (v1, ev) = self.against(v, &elem)?;
                let eff = join_eff(&eq, &ev, at)?;
                let q2 = obl_eff(&eff, &eq, q1, q.span)?;
                let v2 = obl_eff(&eff, &ev, v1, v.span)?;
                Ok((Term::Enqueue(Box::new(q2), Box::new(v2)), eff, ValueType::queue(elem)))
            }
            TermKind::Match { scrut, empty, x, q, cons } => {
                let (s1, es, st) = self.term(scrut, None)?;
                let ValueType::Queue(elem) = st else {
                    return mismatch(scrut.span, format!("expected a queue, found {st}"));
                };
                let elem = *elem;
                let qt = ValueType::queue(elem.clone());
                let (n1, en, tn) = self.term(empty, expect)?;
                let (c1, ec, tc) = self.scoped(&[(x, &elem), (q, &qt)], |cx| cx.term(cons, expect))?;
                let ty = join(&tn, &tc, at)?;
                let eff = join_eff(&join_eff(&es, &en, at)?, &ec, at)?;
                let kind = Term::CaseQueue {
                    scrut: Box::new(obl_eff(&eff, &es, s1, scrut.span)?),
                    elem,
                    empty: Box::new(obl_eff(&eff, &en, obl(&ty, &tn, n1, empty.span)?, empty.span)?),
                    x: x.clone(),
                    q: q.clone(),
                    cons: Box::new(obl_eff(&eff, &ec, obl(&ty, &tc, c1, cons.span)?, cons.span)?),
                };
                Ok((kind, eff, ty))
            }
            TermKind::Handle(h) => self.handle(h, at),
        }
    }

    fn let_(&mut self, x: &Name, bound: &STerm, body: &STerm, expect: Option<&ValueType>, at: Span) -> R<Elab> {
        let (b1, eb, a) = self.term(bound, None)?;
        let (n1, en, ty) = self.scoped(&[(x, &a)], |cx| cx.term(body, expect))?;
        let eff = join_eff(&eb, &en, at)?;
        let b2 = obl_eff(&eff, &eb, b1, bound.span)?;
        let n2 = obl_eff(&eff, &en, n1, body.span)?;
        Ok((Term::let_(x, a, b2, n2), eff, ty))
    }

    fn app(&mut self, f: &STerm, a: &STerm, at: Span) -> R<Elab> {
        let (f1, ef, ft) = self.term(f, None)?;
        let Some((dom, lat, cod)) = ft.as_arrow() else {
            return mismatch(f.span, format!("applying a non-function of type {ft}"));
        };
        let (dom, lat, cod) = (dom.clone(), lat.clone(), cod.clone());
        let (a1, ea) = self.against(a, &dom)?;
        let eff = join_eff(&join_eff(&ef, &ea, at)?, &lat, at)?;
        // When the latent effect is not below the joined effect (it has `?`
        // or the join went to `?`), the function is cast to run at it.
        let f2 = if subtype_eff(&lat, &eff) {
            f1
        } else {
            obl(&ValueType::arrow(dom.clone(), eff.clone(), cod.clone()), &ft, f1, f.span)?
        };
        let f3 = obl_eff(&eff, &ef, f2, f.span)?;
        let a2 = obl_eff(&eff, &ea, a1, a.span)?;
        Ok((Term::app(f3, a2), eff, cod))
    }

    fn raise(&mut self, op: &Name, a: &STerm, at: Span) -> R<Elab> {
        let OpType { req, resp } = self.gamma(op, at)?;
        let (a1, ea, at_) = self.term(a, Some(&req))?;
        if !gradual_subtype(&at_, &req) {
            return mismatch(a.span, format!("{op} expects {req}, found {at_}"));
        }
        let own = EffectType::single(op, OpType::new(req.clone(), resp.clone()));
        let eff = join_eff(&ea, &own, at)?;
        let payload = obl(&req, &at_, Term::var("$p"), a.span)?;
        let r = obl_eff(&eff, &own, Term::raise(op, req, resp.clone(), payload), at)?;
        let bound = obl_eff(&eff, &ea, a1, a.span)?;
        Ok((Term::let_("$p", at_, bound, r), eff, resp))
    }

    fn handle(&mut self, h: &s::Handle, at: Span) -> R<Elab> {
        let sigma = elab_effect_at(self.scope, &h.eff, at)?;
        let c = self.ty(&h.ty, at)?;
        let (m1, em, a) = self.term(&h.scrut, None)?;
        let mut handled = BTreeSet::new();
        for cl in &h.clauses {
            self.gamma(&cl.op, cl.span)?;
            handled.insert(cl.op.clone());
        }
        let sm = handle_scrutinee_type_at(self.scope, &em, &sigma, &handled, h.scrut.span)?;
        if !gradual_subtype_eff(&em, &sm) {
            return mismatch(h.scrut.span, format!("scrutinee effect {em} is not compatible with {sm}"));
        }
        let scrut = obl_eff(&sm, &em, m1, h.scrut.span)?;

        let (r1, er, tr) = self.scoped(&[(&h.ret_var, &a)], |cx| cx.term(&h.ret_body, Some(&c)))?;
        let ret_body = self.fit(r1, &er, &tr, &sigma, &c, h.ret_body.span)?;

        let mut clauses = BTreeMap::new();
        for cl in &h.clauses {
            let local = self.gamma(&cl.op, cl.span)?;
            // The typing the scrutinee's effect assigns to the operation.
            let ann = match &sm {
                EffectType::Dyn => local.erase(),
                EffectType::Concrete(row) => row.get(&cl.op).cloned().unwrap_or_else(|| local.clone()),
            };
            let kty = |resp: &ValueType| match h.kind {
                s::HandleKind::Deep => ValueType::arrow(resp.clone(), sigma.clone(), c.clone()),
                s::HandleKind::Shallow => ValueType::arrow(resp.clone(), sm.clone(), a.clone()),
            };
            let (k_ann, k_loc) = (kty(&ann.resp), kty(&local.resp));
            let (b1, eb, tb) =
                self.scoped(&[(&cl.x, &local.req), (&cl.k, &k_loc)], |cx| cx.term(&cl.body, Some(&c)))?;
            let mut body = self.fit(b1, &eb, &tb, &sigma, &c, cl.body.span)?;
            let (x, k) = if ann == local {
                (cl.x.clone(), cl.k.clone())
            } else {
                // Re-bind the user's names at the module's view of the
                // operation.
                let kc = obl(&k_loc, &k_ann, Term::var("$k"), cl.span)?;
                body = Term::let_(&cl.k, k_loc.clone(), kc, body);
                let xc = obl(&local.req, &ann.req, Term::var("$x"), cl.span)?;
                body = Term::let_(&cl.x, local.req.clone(), xc, body);
                ("$x".to_string(), "$k".to_string())
            };
            clauses.insert(cl.op.clone(), core::Clause { x, k, req: ann.req, resp: ann.resp, body });
        }
        let kind = match h.kind {
            s::HandleKind::Deep => core::HandleKind::Deep,
            s::HandleKind::Shallow => core::HandleKind::Shallow,
        };
        let handler = core::Handler {
            kind,
            ret_var: h.ret_var.clone(),
            ret_ty: a,
            ret_body,
            clauses,
            eff: sigma.clone(),
            ty: c.clone(),
        };
        Ok((Term::handle(scrut, handler), sigma, c))
    }

    /// Casts an elaborated body to the typing `(σ, C)` of its context.
    fn fit(&self, t: Term, e: &EffectType, a: &ValueType, sigma: &EffectType, c: &ValueType, at: Span) -> R<Term> {
        if !gradual_subtype(a, c) {
            return mismatch(at, format!("expected {c}, found {a}"));
        }
        if !gradual_subtype_eff(e, sigma) {
            return mismatch(at, format!("effect {e} is not compatible with {sigma}"));
        }
        obl_eff(sigma, e, obl(c, a, t, at)?, at)
    }
}

// ---------------------------------------------------------------- programs

pub fn elab_program(p: &Program) -> R<Elaborated> {
    let mut st = ProgramState::default();
    let mut enclosing = None;
    for m in &p.modules {
        let scope = st.module(&m.name, &m.decls)?;
        if p.main.within.as_ref() == Some(&m.name) {
            enclosing = Some(scope.clone());
        }
        st.delta.modules.insert(m.name.clone(), scope.ctx);
    }
    let scope = match enclosing {
        Some(scope) => scope,
        None if p.main.within.is_some() => {
            let name = p.main.within.clone().unwrap_or_default();
            return Err(ElabError::UnknownModule { name, at: p.main.body.span });
        }
        None => st.module("main", &p.main.decls)?,
    };
    let (body, eff, ty) = elab_term(&scope, &p.main.body)?;
    let term = st.bindings.into_iter().rev().fold(body, |acc, (x, a, v)| Term::let_(&x, a, v, acc));
    Ok(Elaborated { sig: st.sig, term, eff, ty })
}

#[derive(Default)]
struct ProgramState {
    sig: Signature,
    delta: ModuleContext,
    bindings: Vec<(Name, ValueType, Term)>,
    used: HashSet<Name>,
}

impl ProgramState {
    fn fresh(&mut self, module: &str, x: &str) -> Name {
        let base = format!("{module}.{x}");
        let mut name = base.clone();
        let mut k = 1;
        while self.used.contains(&name) {
            name = format!("{base}#{k}");
            k += 1;
        }
        self.used.insert(name.clone());
        name
    }

    fn exports(&self, module: &Name, at: Span) -> R<&Exports> {
        self.delta.modules.get(module).ok_or_else(|| ElabError::UnknownModule { name: module.clone(), at })
    }

    fn module(&mut self, name: &str, decls: &[s::Decl]) -> R<Scope> {
        let mut scope = Scope::new(name);
        for d in decls {
            let at = d.span;
            match &d.kind {
                DeclKind::NewEffect { name: e, req, resp } => {
                    if self.sig.contains(e) || scope.effect(e).is_some() {
                        return Err(ElabError::DuplicateEffect { name: e.clone(), at });
                    }
                    let op = elab_op_decl(&scope, e, req, resp, at)?;
                    self.sig.declare(e, &op);
                    scope.ctx.effects.insert(e.clone(), op);
                }
                DeclKind::ImportEffect { module, name: e, req, resp } => {
                    let exported = self
                        .exports(module, at)?
                        .effects
                        .get(e)
                        .cloned()
                        .ok_or_else(|| ElabError::UnknownName { name: format!("{module}.{e}"), at })?;
                    if scope.effect(e).is_some() {
                        return Err(ElabError::DuplicateEffect { name: e.clone(), at });
                    }
                    let op = elab_op_decl(&scope, e, req, resp, at)?;
                    if !compatible(&op.req, &exported.req) || !compatible(&op.resp, &exported.resp) {
                        return Err(ElabError::IncompatibleEffectImport {
                            name: e.clone(),
                            local: op.to_string(),
                            exported: exported.to_string(),
                            at,
                        });
                    }
                    scope.ctx.effects.insert(e.clone(), op);
                }
                DeclKind::ImportValue { module, source, local, ty } => {
                    let (core_src, exported) = self
                        .exports(module, at)?
                        .values
                        .get(source)
                        .cloned()
                        .ok_or_else(|| ElabError::UnknownName { name: format!("{module}.{source}"), at })?;
                    let a = elab_type_at(&scope, ty, at)?;
                    if !gradual_subtype(&exported, &a) {
                        return Err(ElabError::IncompatibleValueImport {
                            name: format!("{module}.{source}"),
                            local: a.to_string(),
                            exported: exported.to_string(),
                            at,
                        });
                    }
                    let v = obl(&a, &exported, Term::Var(core_src), at)?;
                    let c = self.fresh(name, local);
                    self.bindings.push((c.clone(), a.clone(), v));
                    scope.ctx.values.insert(local.clone(), (c, a));
                }
                DeclKind::Define { name: x, ty, body } => {
                    let a = elab_type_at(&scope, ty, at)?;
                    let c = self.fresh(name, x);
                    let recursive = is_lambda(body) && free_in(x, body);
                    let v = if recursive {
                        if a.as_arrow().is_none() {
                            return mismatch(at, format!("recursive definition `{x}` must have a function type"));
                        }
                        let mut inner = scope.clone();
                        inner.ctx.values.insert(x.clone(), (c.clone(), a.clone()));
                        let (t, _, b) = elab_term_expecting(&inner, body, &a)?;
                        if !gradual_subtype(&b, &a) {
                            return mismatch(body.span, format!("expected {a}, found {b}"));
                        }
                        Term::Fix(c.clone(), a.clone(), Box::new(obl(&a, &b, t, body.span)?))
                    } else {
                        let (t, _, b) = elab_term_expecting(&scope, body, &a)?;
                        if !gradual_subtype(&b, &a) {
                            return mismatch(body.span, format!("expected {a}, found {b}"));
                        }
                        obl(&a, &b, t, body.span)?
                    };
                    self.bindings.push((c.clone(), a.clone(), v));
                    scope.ctx.values.insert(x.clone(), (c, a));
                }
            }
        }
        Ok(scope)
    }
}

fn is_lambda(t: &STerm) -> bool {
    match &t.kind {
        TermKind::Lam(..) => true,
        TermKind::AscribeType(m, _) | TermKind::AscribeEff(m, _) => is_lambda(m),
        _ => false,
    }
}

/// Whether surface variable `x` occurs free in `t`.
pub fn free_in(x: &str, t: &STerm) -> bool {
    let f = |m: &STerm| free_in(x, m);
    match &t.kind {
        TermKind::Var(y) => y == x,
        TermKind::True | TermKind::False | TermKind::Str(_) | TermKind::Unit | TermKind::Empty(_) => false,
        TermKind::Lam(y, _, b) => y != x && f(b),
        TermKind::App(a, b)
        | TermKind::Seq(a, b)
        | TermKind::Concat(a, b)
        | TermKind::StrEq(a, b)
        | TermKind::Enqueue(a, b) => f(a) || f(b),
        // `e(M)` for an effect `e` never shadows a variable named `x`.
        TermKind::Let(y, a, b) => f(a) || (y != x && f(b)),
        TermKind::If(a, b, c) => f(a) || f(b) || f(c),
        TermKind::Raise(_, a) | TermKind::AscribeType(a, _) | TermKind::AscribeEff(a, _) => f(a),
        TermKind::Match { scrut, empty, x: y, q, cons } => f(scrut) || f(empty) || (y != x && q != x && f(cons)),
        TermKind::Handle(h) => {
            f(&h.scrut)
                || (h.ret_var != x && f(&h.ret_body))
                || h.clauses.iter().any(|c| c.x != x && c.k != x && f(&c.body))
        }
    }
}
