//! Seeded property batches. Each case draws from its own seed, so results
//! do not depend on how cases are spread over worker threads; records come
//! back in case order.

use greff_core::core_lang::{check, print_term, synth, Clause, HandleKind, Term};
use greff_core::elaborate::elab_program;
use greff_core::eval::{evaluate, evaluate_observed, Evaluation, Outcome};
use greff_core::typesys::subtype;
use greff_core::surface::Program;
use greff_core::{corpus, EffectType, Signature, ValueType};
use rayon::prelude::*;
use serde::Serialize;

use crate::casts::{cast_factorizations, expand_effect_casts, expand_fun_cast, CastKind};
use crate::gen::core::{Closing, CoreGen};
use crate::gen::{case_seed, surface};
use crate::order::OrderVerdict;
use crate::precision::{check_graduality_pair, imprecisify};
use crate::walk::rewrite;

/// Fuel for generated programs, which are small and never recurse.
pub const CASE_FUEL: u64 = 200_000;
/// How often the preservation check reifies the machine state.
pub const SAMPLE_EVERY: u64 = 5;
pub const GEN_DEPTH: u32 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

/// One line of the report.
#[derive(Clone, Debug, Serialize)]
pub struct Record {
    pub suite: &'static str,
    pub case: usize,
    pub seed: u64,
    pub status: Status,
    pub verdict: String,
    pub outcomes: Vec<String>,
    pub steps: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub inconclusive: usize,
    #[serde(skip)]
    pub records: Vec<Record>,
}

impl SuiteReport {
    fn new(name: &'static str, records: Vec<Record>) -> Self {
        let failures = records.iter().filter(|r| r.status == Status::Fail).count();
        let inconclusive = records.iter().filter(|r| r.status == Status::Inconclusive).count();
        SuiteReport { name, cases: records.len(), failures, inconclusive, records }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn inconclusive_rate(&self) -> f64 {
        if self.cases == 0 {
            0.0
        } else {
            self.inconclusive as f64 / self.cases as f64
        }
    }

    /// The records as line-delimited JSON.
    pub fn jsonl(&self) -> String {
        self.records.iter().map(|r| serde_json::to_string(r).expect("records serialize") + "\n").collect()
    }

    pub fn summary(&self) -> String {
        format!("{}: {} cases, {} failures, {} inconclusive", self.name, self.cases, self.failures, self.inconclusive)
    }
}

/// What one case produced before it is numbered.
struct Case {
    status: Status,
    verdict: String,
    outcomes: Vec<String>,
    steps: Vec<u64>,
    detail: Option<String>,
}

impl Case {
    fn fail(detail: impl Into<String>) -> Case {
        Case { status: Status::Fail, verdict: "fail".into(), outcomes: vec![], steps: vec![], detail: Some(detail.into()) }
    }

    fn pass(verdict: impl Into<String>) -> Case {
        Case { status: Status::Pass, verdict: verdict.into(), outcomes: vec![], steps: vec![], detail: None }
    }

    fn with_runs(mut self, runs: &[Evaluation]) -> Case {
        self.outcomes = runs.iter().map(|e| e.outcome.to_string()).collect();
        self.steps = runs.iter().map(|e| e.steps).collect();
        self
    }
}

/// Runs `want` cases, skipping seeds for which `case` finds nothing to test
/// (it returns `None`), up to a bounded number of attempts.
fn batch(name: &'static str, seed: u64, want: usize, case: impl Fn(u64) -> Option<Case> + Sync) -> SuiteReport {
    let mut records = Vec::new();
    let mut next = 0u64;
    let limit = (want as u64).saturating_mul(30).max(100);
    while records.len() < want && next < limit {
        let chunk = (want - records.len()) as u64 * 2;
        let found: Vec<(u64, Case)> = (next..next + chunk)
            .into_par_iter()
            .filter_map(|i| {
                let s = case_seed(seed, i);
                case(s).map(|c| (s, c))
            })
            .collect();
        next += chunk;
        for (s, c) in found {
            if records.len() == want {
                break;
            }
            records.push(Record {
                suite: name,
                case: records.len(),
                seed: s,
                status: c.status,
                verdict: c.verdict,
                outcomes: c.outcomes,
                steps: c.steps,
                detail: c.detail,
            });
        }
    }
    if records.len() < want {
        let missing = want - records.len();
        records.push(Record {
            suite: name,
            case: records.len(),
            seed,
            status: Status::Fail,
            verdict: "fail".into(),
            outcomes: vec![],
            steps: vec![],
            detail: Some(format!("generator produced {missing} fewer applicable cases than requested")),
        });
    }
    SuiteReport::new(name, records)
}

fn run(sig: &Signature, t: &Term) -> Result<Evaluation, String> {
    evaluate(sig, t, CASE_FUEL).map_err(|e| e.to_string())
}

fn typed(sig: &Signature, t: &Term, eff: &EffectType, ty: &ValueType, what: &str) -> Result<(), String> {
    check(sig, &vec![], t, eff, ty).map_err(|e| format!("{what} is ill-typed: {e}\n{}", print_term(t)))
}

/// Runs closed boolean programs and requires equal outcomes.
fn all_equal(sig: &Signature, terms: &[Term]) -> Case {
    for (i, t) in terms.iter().enumerate() {
        if let Err(e) = typed(sig, t, &EffectType::empty(), &ValueType::Bool, &format!("program {i}")) {
            return Case::fail(e);
        }
    }
    let runs: Result<Vec<Evaluation>, String> = terms.iter().map(|t| run(sig, t)).collect();
    let runs = match runs {
        Ok(r) => r,
        Err(e) => return Case::fail(e),
    };
    let fuel = runs.iter().any(|r| matches!(r.outcome, Outcome::FuelExhausted(_)));
    let same = runs.windows(2).all(|w| w[0].outcome == w[1].outcome);
    let case = if fuel {
        Case { status: Status::Inconclusive, ..Case::pass("fuel") }
    } else if same {
        Case::pass("equal")
    } else {
        Case { status: Status::Fail, ..Case::pass("different") }
    };
    case.with_runs(&runs)
}

// ------------------------------------------------------------ criteria

/// Generated surface programs elaborate identically twice and their core
/// terms typecheck at the elaborated typing.
pub fn well_typed_output(seed: u64, cases: usize) -> SuiteReport {
    batch("well-typed output", seed, cases, |s| {
        let p = surface::program(s);
        let show = |e: &greff_core::elaborate::Elaborated| {
            format!("{:?}\n{}\n{}\n{}", e.sig, print_term(&e.term), e.eff, e.ty)
        };
        let (a, b) = match (elab_program(&p), elab_program(&p)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                let src = greff_core::surface::pretty_program(&p);
                return Some(Case::fail(format!("does not elaborate: {e}\n{src}")));
            }
        };
        if show(&a) != show(&b) {
            return Some(Case::fail("elaboration is not deterministic"));
        }
        Some(match typed(&a.sig, &a.term, &a.eff, &a.ty, "elaborated program") {
            Ok(()) => Case::pass("well-typed"),
            Err(e) => Case::fail(e),
        })
    })
}

/// Generated closed programs at `∅` neither get stuck nor raise uncaught
/// operations, and sampled intermediate states typecheck at the original
/// typing.
pub fn soundness(seed: u64, cases: usize) -> SuiteReport {
    batch("soundness", seed, cases, |s| {
        let mut g = CoreGen::new(s);
        let m = g.gen_comp(&ValueType::Bool, &EffectType::empty(), &vec![], GEN_DEPTH);
        let sig = g.sig.clone();
        if let Err(e) = typed(&sig, &m, &EffectType::empty(), &ValueType::Bool, "generated program") {
            return Some(Case::fail(e));
        }
        let mut broken = None;
        let result = evaluate_observed(&sig, &m, CASE_FUEL, &mut |machine, rule| {
            if broken.is_none() && machine.steps() % SAMPLE_EVERY == 0 {
                let state = machine.reify();
                if let Err(e) = check(&sig, &vec![], &state, &EffectType::empty(), &ValueType::Bool) {
                    broken = Some(format!("after {rule} at step {}: {e}", machine.steps()));
                }
            }
        });
        let ev = match result {
            Ok(ev) => ev,
            Err(stuck) => return Some(Case::fail(stuck.to_string())),
        };
        let case = match (&ev.outcome, broken) {
            (_, Some(e)) => Case::fail(format!("preservation: {e}")),
            (Outcome::UncaughtRaise(op), _) => Case::fail(format!("uncaught {op}")),
            (Outcome::FuelExhausted(_), _) => Case { status: Status::Inconclusive, ..Case::pass("fuel") },
            _ => Case::pass("sound"),
        };
        Some(case.with_runs(&[ev]))
    })
}

/// A generated term at a random typing, with an extra round trip through
/// `?` half of the time, closed to a boolean program.
fn cast_heavy_program(g: &mut CoreGen) -> (Term, Closing) {
    let e = g.gen_eff();
    let ty = g.gen_type(2);
    let mut m = g.gen_comp(&ty, &e, &vec![], GEN_DEPTH);
    if !e.is_dyn() && g.chance(0.5) {
        m = Term::eff_down(e.clone(), EffectType::Dyn, Term::eff_up(e.clone(), EffectType::Dyn, m));
    }
    let closing = Closing::new(g, &e, &ty);
    (m, closing)
}

/// Primitive effect casts and their handler expansions give equal outcomes.
pub fn casts_as_handlers(seed: u64, cases: usize) -> SuiteReport {
    batch("casts as handlers", seed, cases, |s| {
        let mut g = CoreGen::new(s);
        let (m, closing) = cast_heavy_program(&mut g);
        let p = closing.plug(m);
        let (expanded, n) = expand_effect_casts(&g.sig, &p);
        if n == 0 {
            return None;
        }
        let mut c = all_equal(&g.sig, &[p, expanded]);
        c.detail.get_or_insert_with(|| format!("{n} casts expanded"));
        Some(c)
    })
}

/// `⟨A ↢ B⟩⟨A ↣ B⟩V` behaves as `V`, and likewise for effect casts.
pub fn retraction(seed: u64, cases: usize) -> SuiteReport {
    batch("retraction", seed, cases, |s| {
        let mut g = CoreGen::new(s);
        if s % 2 == 0 {
            let a = g.gen_type(2);
            let b = g.loosen(&a);
            let v = g.gen_value(&a, &vec![], 3);
            let c = Closing::new(&mut g, &EffectType::empty(), &a);
            let round = Term::val_down(a.clone(), b.clone(), Term::val_up(a, b, v.clone()));
            Some(all_equal(&g.sig, &[c.plug(v), c.plug(round)]))
        } else {
            let e = g.gen_row();
            let e2 = if g.chance(0.5) { EffectType::Dyn } else { g.loosen_row(&e) };
            let ty = g.gen_type(1);
            let m = g.gen_comp(&ty, &e, &vec![], GEN_DEPTH - 1);
            let c = Closing::new(&mut g, &e, &ty);
            let round = Term::eff_down(e.clone(), e2.clone(), Term::eff_up(e, e2, m.clone()));
            Some(all_equal(&g.sig, &[c.plug(m), c.plug(round)]))
        }
    })
}

/// A cast through an intermediate type behaves as the direct cast.
pub fn functoriality(seed: u64, cases: usize) -> SuiteReport {
    batch("functoriality", seed, cases, |s| {
        let mut g = CoreGen::new(s);
        let terms = match s % 4 {
            0 => {
                let a = g.gen_type(2);
                let b = g.loosen(&a);
                let c = g.loosen(&b);
                let v = g.gen_value(&a, &vec![], 3);
                let k = Closing::new(&mut g, &EffectType::empty(), &c);
                let direct = Term::val_up(a.clone(), c.clone(), v.clone());
                let stepped = Term::val_up(b.clone(), c, Term::val_up(a, b, v));
                [k.plug(direct), k.plug(stepped)]
            }
            1 => {
                let a = g.gen_type(2);
                let b = g.loosen(&a);
                let c = g.loosen(&b);
                let v = g.gen_value(&c, &vec![], 3);
                let k = Closing::new(&mut g, &EffectType::empty(), &a);
                let direct = Term::val_down(a.clone(), c.clone(), v.clone());
                let stepped = Term::val_down(a, b.clone(), Term::val_down(b, c, v));
                [k.plug(direct), k.plug(stepped)]
            }
            2 => {
                let e = g.gen_row();
                let e2 = g.loosen_row(&e);
                let ty = g.gen_type(1);
                let m = g.gen_comp(&ty, &e, &vec![], GEN_DEPTH - 1);
                let k = Closing::new(&mut g, &EffectType::Dyn, &ty);
                let direct = Term::eff_up(e.clone(), EffectType::Dyn, m.clone());
                let stepped = Term::eff_up(e2.clone(), EffectType::Dyn, Term::eff_up(e, e2, m));
                [k.plug(direct), k.plug(stepped)]
            }
            _ => {
                let e = g.gen_row();
                let e2 = g.loosen_row(&e);
                let ty = g.gen_type(1);
                let m = g.gen_comp(&ty, &EffectType::Dyn, &vec![], GEN_DEPTH - 1);
                let k = Closing::new(&mut g, &e, &ty);
                let direct = Term::eff_down(e.clone(), EffectType::Dyn, m.clone());
                let stepped = Term::eff_down(e, e2.clone(), Term::eff_down(e2, EffectType::Dyn, m));
                [k.plug(direct), k.plug(stepped)]
            }
        };
        Some(all_equal(&g.sig, &terms))
    })
}

/// Value and effect casts around one term commute.
pub fn commutation(seed: u64, cases: usize) -> SuiteReport {
    batch("commutation", seed, cases, |s| {
        let mut g = CoreGen::new(s);
        let sigma = g.gen_row();
        let tau = if g.chance(0.5) { EffectType::Dyn } else { g.loosen_row(&sigma) };
        let a = g.gen_type(2);
        let b = g.loosen(&a);
        let terms = if s % 2 == 0 {
            let m = g.gen_comp(&a, &sigma, &vec![], GEN_DEPTH - 1);
            let k = Closing::new(&mut g, &tau, &b);
            let vf = Term::val_up(a.clone(), b.clone(), Term::eff_up(sigma.clone(), tau.clone(), m.clone()));
            let ef = Term::eff_up(sigma, tau, Term::val_up(a, b, m));
            [k.plug(vf), k.plug(ef)]
        } else {
            let m = g.gen_comp(&b, &tau, &vec![], GEN_DEPTH - 1);
            let k = Closing::new(&mut g, &sigma, &a);
            let vf = Term::val_down(a.clone(), b.clone(), Term::eff_down(sigma.clone(), tau.clone(), m.clone()));
            let ef = Term::eff_down(sigma, tau, Term::val_down(a, b, m));
            [k.plug(vf), k.plug(ef)]
        };
        Some(all_equal(&g.sig, &terms))
    })
}

/// Adds `ε(x, k) -> k (raise ε x)` to deep handlers for operations they
/// let through. Returns the new term and the number of clauses added.
pub fn add_forwarding_clauses(sig: &Signature, t: &Term) -> (Term, usize) {
    let mut added = 0;
    let out = rewrite(sig, &Vec::new(), t, &mut |sig, ctx, node| {
        let Term::Handle(m, mut h) = node else { return node };
        if h.kind != HandleKind::Deep {
            return Term::Handle(m, h);
        }
        let Ok(scrut) = synth(sig, ctx, &m) else { return Term::Handle(m, h) };
        let scrut_eff = scrut.eff.unwrap_or_else(EffectType::empty);
        for op in scrut_eff.names(sig) {
            if h.clauses.contains_key(&op) {
                continue;
            }
            let (Some(inner), Some(outer)) = (scrut_eff.lookup(sig, &op), h.eff.lookup(sig, &op)) else { continue };
            if !subtype(&inner.req, &outer.req) || !subtype(&outer.resp, &inner.resp) {
                continue;
            }
            let body = Term::app(Term::var("$k"), Term::raise(&op, outer.req, outer.resp, Term::var("$x")));
            h.clauses.insert(op, Clause { x: "$x".into(), k: "$k".into(), req: inner.req, resp: inner.resp, body });
            added += 1;
        }
        Term::Handle(m, h)
    });
    (out, added)
}

/// Forwarding clauses do not change outcomes.
pub fn forwarding(seed: u64, cases: usize) -> SuiteReport {
    batch("forwarding", seed, cases, |s| {
        let mut g = CoreGen::new(s);
        let (m, closing) = cast_heavy_program(&mut g);
        let p = closing.plug(m);
        let (q, n) = add_forwarding_clauses(&g.sig, &p);
        if n == 0 {
            return None;
        }
        Some(all_equal(&g.sig, &[p, q]))
    })
}

/// Function casts as proxies and as eta-expansions agree.
pub fn function_casts(seed: u64, cases: usize) -> SuiteReport {
    batch("function casts", seed, cases, |s| {
        let mut g = CoreGen::new(s);
        let a = loop {
            let a = g.gen_type(2);
            if a.as_arrow().is_some() {
                break a;
            }
        };
        let b = g.loosen(&a);
        let terms = if s % 2 == 0 {
            let v = g.gen_value(&a, &vec![], 3);
            let k = Closing::new(&mut g, &EffectType::empty(), &b);
            let eta = match expand_fun_cast(CastKind::Up, &a, &b, v.clone()) {
                Ok(t) => t,
                Err(e) => return Some(Case::fail(e.to_string())),
            };
            [k.plug(Term::val_up(a, b, v)), k.plug(eta)]
        } else {
            let v = g.gen_value(&b, &vec![], 3);
            let k = Closing::new(&mut g, &EffectType::empty(), &a);
            let eta = match expand_fun_cast(CastKind::Down, &a, &b, v.clone()) {
                Ok(t) => t,
                Err(e) => return Some(Case::fail(e.to_string())),
            };
            [k.plug(Term::val_down(a, b, v)), k.plug(eta)]
        };
        Some(all_equal(&g.sig, &terms))
    })
}

/// The three optimized factorizations of an oblique cast and the cast
/// through the erasure give equal outcomes.
pub fn factorization(seed: u64, cases: usize) -> SuiteReport {
    batch("factorization", seed, cases, |s| {
        let mut g = CoreGen::new(s);
        let a = g.gen_type(2);
        let b = g.gradual_super(&a, true);
        let v = g.gen_value(&a, &vec![], 3);
        let terms = match cast_factorizations(&a, &b, v) {
            Ok(t) => t,
            Err(e) => return Some(Case::fail(format!("{a} ≲ {b}: {e}"))),
        };
        for (i, t) in terms.iter().enumerate() {
            if let Err(e) = typed(&g.sig, t, &EffectType::empty(), &b, &format!("factorization {i} of {a} ≲ {b}")) {
                return Some(Case::fail(e));
            }
        }
        let k = Closing::new(&mut g, &EffectType::empty(), &b);
        let closed: Vec<Term> = terms.into_iter().map(|t| k.plug(t)).collect();
        Some(all_equal(&g.sig, &closed))
    })
}

/// Random imprecisifications of generated programs, and of the precise
/// threads program every tenth case, satisfy both gradual guarantees.
pub fn graduality(seed: u64, cases: usize, fuel: u64) -> SuiteReport {
    let threads = greff_core::surface::parse_program(&corpus::threads_precise()).expect("corpus parses");
    batch("graduality", seed, cases, |s| {
        let p = if s % 10 == 0 { threads.clone() } else { surface::program(s) };
        graduality_case(&p, s, fuel)
    })
}

/// Graduality pairs drawn from a single program.
pub fn graduality_of(p: &Program, seed: u64, cases: usize, fuel: u64) -> SuiteReport {
    batch("graduality", seed, cases, |s| graduality_case(p, s, fuel))
}

fn graduality_case(p: &Program, s: u64, fuel: u64) -> Option<Case> {
    let pair = imprecisify(p, s).ok()?;
    Some(match check_graduality_pair(&pair, fuel) {
        Err(stuck) => Case::fail(stuck.to_string()),
        Ok(report) => {
            let runs: Vec<Evaluation> = report.precise.iter().chain(report.imprecise.iter()).cloned().collect();
            let mut case = match (&report.static_violation, &report.verdict) {
                (Some(e), _) => Case::fail(format!("imprecise program rejected: {e}")),
                (None, None) => Case::fail("precise program does not elaborate"),
                (None, Some(OrderVerdict::Holds)) => Case::pass("holds"),
                (None, Some(v @ OrderVerdict::Inconclusive(_))) => {
                    Case { status: Status::Inconclusive, ..Case::pass(v.label()) }
                }
                (None, Some(v)) => Case { status: Status::Fail, ..Case::pass(v.label()) },
            };
            if case.status == Status::Fail && case.detail.is_none() {
                case.detail = Some(format!("witness sites {:?}", pair.witness));
            }
            case.with_runs(&runs)
        }
    })
}

/// Every property batch at its acceptance size.
pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    vec![
        well_typed_output(seed, 1000),
        soundness(seed, 1000),
        casts_as_handlers(seed, 500),
        retraction(seed, 200),
        functoriality(seed, 200),
        commutation(seed, 200),
        forwarding(seed, 200),
        function_casts(seed, 200),
        factorization(seed, 200),
        graduality(seed, 300, greff_core::eval::DEFAULT_FUEL),
    ]
}
