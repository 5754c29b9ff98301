//! Syntactic precision between surface programs, random imprecisification,
//! and the graduality check for a precise/imprecise pair.

use greff_core::core_lang::Term;
use greff_core::elaborate::{elab_program, Elaborated};
use greff_core::eval::{evaluate, Evaluation, Outcome, Stuck};
use greff_core::surface::{Decl, DeclKind, Program, SEffect, STerm, SType, TermKind};
use greff_core::{EffectType, ValueType};
use rand::Rng;

use crate::gen::rng_for;
use crate::order::{order_outcomes, OrderVerdict};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrecisionPair {
    pub precise: Program,
    pub imprecise: Program,
    /// Indices, in visiting order, of the effect annotations made `?`.
    pub witness: Vec<usize>,
}

/// Visits every effect annotation of a program in a fixed order: module by
/// module, declaration by declaration, left to right within terms and
/// types.
pub fn visit_effects(p: &mut Program, f: &mut dyn FnMut(&mut SEffect)) {
    for m in &mut p.modules {
        for d in &mut m.decls {
            visit_decl(d, f);
        }
    }
    for d in &mut p.main.decls {
        visit_decl(d, f);
    }
    visit_term(&mut p.main.body, f);
}

fn visit_decl(d: &mut Decl, f: &mut dyn FnMut(&mut SEffect)) {
    match &mut d.kind {
        DeclKind::NewEffect { req, resp, .. } | DeclKind::ImportEffect { req, resp, .. } => {
            visit_type(req, f);
            visit_type(resp, f);
        }
        DeclKind::Define { ty, body, .. } => {
            visit_type(ty, f);
            visit_term(body, f);
        }
        DeclKind::ImportValue { ty, .. } => visit_type(ty, f),
    }
}

fn visit_type(t: &mut SType, f: &mut dyn FnMut(&mut SEffect)) {
    match t {
        SType::Bool | SType::Unit | SType::Str => {}
        SType::Queue(a) => visit_type(a, f),
        SType::Arrow(a, e, b) => {
            visit_type(a, f);
            f(e);
            visit_type(b, f);
        }
    }
}

fn visit_term(t: &mut STerm, f: &mut dyn FnMut(&mut SEffect)) {
    match &mut t.kind {
        TermKind::Var(_) | TermKind::True | TermKind::False | TermKind::Str(_) | TermKind::Unit => {}
        TermKind::Empty(a) => {
            if let Some(a) = a {
                visit_type(a, f);
            }
        }
        TermKind::Lam(_, a, body) => {
            if let Some(a) = a {
                visit_type(a, f);
            }
            visit_term(body, f);
        }
        TermKind::Raise(_, m) => visit_term(m, f),
        TermKind::AscribeType(m, a) => {
            visit_term(m, f);
            visit_type(a, f);
        }
        TermKind::AscribeEff(m, e) => {
            visit_term(m, f);
            f(e);
        }
        TermKind::App(a, b)
        | TermKind::Let(_, a, b)
        | TermKind::Seq(a, b)
        | TermKind::Concat(a, b)
        | TermKind::StrEq(a, b)
        | TermKind::Enqueue(a, b) => {
            visit_term(a, f);
            visit_term(b, f);
        }
        TermKind::If(c, a, b) => {
            visit_term(c, f);
            visit_term(a, f);
            visit_term(b, f);
        }
        TermKind::Match { scrut, empty, cons, .. } => {
            visit_term(scrut, f);
            visit_term(empty, f);
            visit_term(cons, f);
        }
        TermKind::Handle(h) => {
            f(&mut h.eff);
            visit_type(&mut h.ty, f);
            visit_term(&mut h.scrut, f);
            visit_term(&mut h.ret_body, f);
            for c in &mut h.clauses {
                visit_term(&mut c.body, f);
            }
        }
    }
}

/// The effect annotations of `p` in visiting order, and `p` with all of
/// them replaced by `?`.
fn skeleton(p: &Program) -> (Vec<SEffect>, Program) {
    let mut q = p.clone();
    let mut effects = Vec::new();
    visit_effects(&mut q, &mut |e| effects.push(std::mem::replace(e, SEffect::Dyn)));
    (effects, q)
}

fn effect_below(e: &SEffect, e2: &SEffect) -> bool {
    match (e, e2) {
        (_, SEffect::Dyn) => true,
        (SEffect::Set(a), SEffect::Set(b)) => a == b,
        (SEffect::Dyn, SEffect::Set(_)) => false,
    }
}

/// `P ⊑syn P'`: the programs agree everywhere except at effect
/// annotations, where each annotation of `P` is at least as precise as
/// the corresponding one of `P'`.
pub fn syntactic_precision(p: &Program, p2: &Program) -> bool {
    let (e1, s1) = skeleton(p);
    let (e2, s2) = skeleton(p2);
    s1 == s2 && e1.len() == e2.len() && e1.iter().zip(&e2).all(|(a, b)| effect_below(a, b))
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("the program has no concrete effect annotation to make imprecise")]
pub struct NoSites;

/// Replaces a random nonempty subset of the concrete effect annotations of
/// `p` by `?`.
pub fn imprecisify(p: &Program, seed: u64) -> Result<PrecisionPair, NoSites> {
    let mut sites = Vec::new();
    let mut i = 0;
    visit_effects(&mut p.clone(), &mut |e| {
        if matches!(e, SEffect::Set(_)) {
            sites.push(i);
        }
        i += 1;
    });
    if sites.is_empty() {
        return Err(NoSites);
    }
    let mut rng = rng_for(seed);
    let mut chosen: Vec<usize> = sites.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
    if chosen.is_empty() {
        chosen.push(sites[rng.gen_range(0..sites.len())]);
    }
    let mut imprecise = p.clone();
    let mut i = 0;
    visit_effects(&mut imprecise, &mut |e| {
        if chosen.binary_search(&i).is_ok() {
            *e = SEffect::Dyn;
        }
        i += 1;
    });
    Ok(PrecisionPair { precise: p.clone(), imprecise, witness: chosen })
}

/// Every concrete effect annotation of `p` made `?`.
pub fn dynamicize(p: &Program) -> Program {
    let mut q = p.clone();
    visit_effects(&mut q, &mut |e| *e = SEffect::Dyn);
    q
}

/// Turns an elaborated program into a closed boolean program at effect `∅`.
/// Booleans are observed directly; strings are compared against
/// `reference`; other results are discarded after running to a value. A
/// non-empty effect is cast to `∅` through `?`.
#[derive(Clone, Debug, Default)]
pub struct Harness {
    pub reference: Option<String>,
}

impl Harness {
    pub fn wrap(&self, e: &Elaborated) -> Term {
        let mut t = e.term.clone();
        if !e.eff.is_empty() {
            if !e.eff.is_dyn() {
                t = Term::eff_up(e.eff.clone(), EffectType::Dyn, t);
            }
            t = Term::eff_down(EffectType::empty(), EffectType::Dyn, t);
        }
        match &e.ty {
            ValueType::Bool => t,
            ValueType::Str => Term::StrEq(Box::new(t), Box::new(Term::Str(self.reference.clone().unwrap_or_default()))),
            other => Term::let_("$_", other.clone(), t, Term::True),
        }
    }
}

/// What checking one pair found.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairReport {
    /// The precise program elaborated but the imprecise one did not.
    pub static_violation: Option<String>,
    /// `None` when the precise program is ill-typed (nothing to check) or
    /// the static guarantee failed.
    pub verdict: Option<OrderVerdict>,
    pub precise: Option<Evaluation>,
    pub imprecise: Option<Evaluation>,
}

impl PairReport {
    pub fn violated(&self) -> bool {
        self.static_violation.is_some() || self.verdict.as_ref().is_some_and(OrderVerdict::is_violated)
    }

    pub fn inconclusive(&self) -> bool {
        matches!(self.verdict, Some(OrderVerdict::Inconclusive(_)))
    }
}

/// Checks both gradual guarantees on one pair: the imprecise program must
/// elaborate whenever the precise one does, and the precise program's
/// boolean observation must be below the imprecise one's in the error
/// ordering.
pub fn check_graduality_pair(pair: &PrecisionPair, fuel: u64) -> Result<PairReport, Stuck> {
    let mut report = PairReport { static_violation: None, verdict: None, precise: None, imprecise: None };
    let Ok(precise) = elab_program(&pair.precise) else { return Ok(report) };
    let imprecise = match elab_program(&pair.imprecise) {
        Ok(e) => e,
        Err(err) => {
            report.static_violation = Some(err.to_string());
            return Ok(report);
        }
    };
    // The precise program's own result is the reference for strings.
    let raw = evaluate(&precise.sig, &precise.term, fuel)?;
    let reference = match &raw.outcome {
        Outcome::Value(Term::Str(s)) => Some(s.clone()),
        _ => None,
    };
    let harness = Harness { reference };
    let l = evaluate(&precise.sig, &harness.wrap(&precise), fuel)?;
    let r = evaluate(&imprecise.sig, &harness.wrap(&imprecise), fuel)?;
    report.verdict = Some(order_outcomes(&l.outcome, &r.outcome));
    report.precise = Some(l);
    report.imprecise = Some(r);
    Ok(report)
}
