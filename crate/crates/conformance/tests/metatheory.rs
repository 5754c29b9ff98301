use std::collections::BTreeMap;

use greff_conformance::gen::core::signature;
use greff_conformance::precision::dynamicize;
use greff_conformance::suite;
use greff_conformance::{
    cast_factorizations, check_graduality_pair, expand_effect_cast_as_handler, expand_effect_casts, expand_fun_cast,
    imprecisify, semantic_order, syntactic_precision, CastError, CastKind, OrderVerdict, PrecisionPair, Side,
};
use greff_conformance::casts::factorize;
use greff_core::core_lang::{check, Clause, HandleKind, Handler, Term};
use greff_core::corpus;
use greff_core::eval::{evaluate, Outcome};
use greff_core::surface::{parse_program, pretty_program, Program};
use greff_core::{EffectType, ValueType};

fn arrow(a: ValueType, e: EffectType, b: ValueType) -> ValueType {
    ValueType::arrow(a, e, b)
}

fn row(sig: &greff_core::Signature, names: &[&str]) -> EffectType {
    EffectType::Concrete(names.iter().map(|n| (n.to_string(), sig.get(n).unwrap().clone())).collect())
}

fn outcome(t: &Term) -> Outcome {
    evaluate(&signature(), t, 10_000).unwrap().outcome
}

/// `handle m` at (∅, bool) answering every `ask` with `answer`.
fn answering_ask(m: Term, answer: bool) -> Term {
    let sig = signature();
    let ask = sig.get("ask").unwrap().clone();
    let mut clauses = BTreeMap::new();
    clauses.insert(
        "ask".to_string(),
        Clause { x: "p".into(), k: "k".into(), req: ask.req, resp: ask.resp, body: Term::app(Term::var("k"), Term::bool(answer)) },
    );
    Term::handle(
        m,
        Handler {
            kind: HandleKind::Deep,
            ret_var: "v".into(),
            ret_ty: ValueType::Bool,
            ret_body: Term::var("v"),
            clauses,
            eff: EffectType::empty(),
            ty: ValueType::Bool,
        },
    )
}

fn raise_ask() -> Term {
    Term::raise("ask", ValueType::Unit, ValueType::Bool, Term::Unit)
}

// ---- error ordering -------------------------------------------------------

#[test]
fn error_below_anything() {
    let v = semantic_order(&signature(), &Term::Err, &Term::bool(true), 100).unwrap();
    assert_eq!(v, OrderVerdict::Holds);
}

#[test]
fn different_booleans_violate() {
    let v = semantic_order(&signature(), &Term::bool(true), &Term::bool(false), 100).unwrap();
    assert_eq!(v, OrderVerdict::Violated(Outcome::Value(Term::bool(true)), Outcome::Value(Term::bool(false))));
}

#[test]
fn equal_booleans_hold() {
    assert_eq!(semantic_order(&signature(), &Term::bool(true), &Term::bool(true), 100).unwrap(), OrderVerdict::Holds);
}

#[test]
fn value_above_error_violates() {
    assert!(semantic_order(&signature(), &Term::bool(false), &Term::Err, 100).unwrap().is_violated());
}

#[test]
fn one_sided_fuel_is_inconclusive() {
    // Three nested applications need more than one step.
    let id = Term::lam("x", ValueType::Bool, Term::var("x"));
    let slow = Term::app(id.clone(), Term::app(id.clone(), Term::app(id, Term::bool(true))));
    let v = semantic_order(&signature(), &slow, &Term::bool(true), 1).unwrap();
    assert_eq!(v, OrderVerdict::Inconclusive(Side::Left));
    let v = semantic_order(&signature(), &Term::bool(true), &slow, 1).unwrap();
    assert_eq!(v, OrderVerdict::Inconclusive(Side::Right));
}

// ---- syntactic precision and imprecisification ----------------------------

fn precise() -> Program {
    parse_program(&corpus::threads_precise()).unwrap()
}

fn imprecise() -> Program {
    parse_program(&corpus::threads_imprecise()).unwrap()
}

#[test]
fn precision_is_reflexive() {
    assert!(syntactic_precision(&precise(), &precise()));
    assert!(syntactic_precision(&imprecise(), &imprecise()));
}

#[test]
fn precise_threads_below_imprecise_threads() {
    assert!(syntactic_precision(&precise(), &imprecise()));
    assert!(!syntactic_precision(&imprecise(), &precise()));
}

#[test]
fn dynamicized_precise_threads_is_the_imprecise_program() {
    assert_eq!(dynamicize(&precise()), dynamicize(&imprecise()));
    // Modulo layout: printing and re-parsing gives the same program.
    let reparsed = parse_program(&pretty_program(&dynamicize(&precise()))).unwrap();
    assert_eq!(reparsed, dynamicize(&imprecise()));
}

const ONE_ARROW: &str = "\
main {
  define f : bool -[]> bool = (lambda b. b);
  f true
}
";

#[test]
fn single_arrow_made_dynamic_is_related() {
    let p = parse_program(ONE_ARROW).unwrap();
    let q = parse_program(&ONE_ARROW.replace("-[]>", "-[?]>")).unwrap();
    assert!(syntactic_precision(&p, &q));
    assert!(!syntactic_precision(&q, &p));
}

#[test]
fn programs_differing_outside_annotations_are_unrelated() {
    let p = parse_program(ONE_ARROW).unwrap();
    let q = parse_program(&ONE_ARROW.replace("f true", "f false")).unwrap();
    assert!(!syntactic_precision(&p, &q));
}

#[test]
fn imprecisify_needs_a_site() {
    let p = parse_program("main { true }").unwrap();
    assert!(imprecisify(&p, 7).is_err());
}

#[test]
fn single_site_is_always_chosen() {
    let p = parse_program(ONE_ARROW).unwrap();
    for seed in 0..20 {
        let pair = imprecisify(&p, seed).unwrap();
        assert_eq!(pair.witness, vec![0]);
        assert_eq!(pair.imprecise, parse_program(&ONE_ARROW.replace("-[]>", "-[?]>")).unwrap());
    }
}

#[test]
fn imprecisify_output_is_less_precise() {
    for seed in 0..200u64 {
        let p = if seed % 4 == 0 { precise() } else { greff_conformance::gen::surface::program(seed) };
        if let Ok(pair) = imprecisify(&p, seed) {
            assert!(!pair.witness.is_empty());
            assert!(syntactic_precision(&pair.precise, &pair.imprecise), "seed {seed}");
            assert_ne!(pair.precise, pair.imprecise, "seed {seed}");
        }
    }
}

#[test]
fn imprecisify_is_deterministic() {
    assert_eq!(imprecisify(&precise(), 42).unwrap(), imprecisify(&precise(), 42).unwrap());
}

// ---- graduality pairs ------------------------------------------------------

#[test]
fn identical_programs_hold() {
    let pair = PrecisionPair { precise: precise(), imprecise: precise(), witness: vec![] };
    let report = check_graduality_pair(&pair, 100_000).unwrap();
    assert_eq!(report.verdict, Some(OrderVerdict::Holds));
    assert!(!report.violated());
}

#[test]
fn erroring_precise_program_holds() {
    let p = parse_program(corpus::BAD_DOWNCAST).unwrap();
    for seed in 0..8 {
        let pair = imprecisify(&p, seed).unwrap();
        let report = check_graduality_pair(&pair, 100_000).unwrap();
        assert_eq!(report.precise.as_ref().map(|e| &e.outcome), Some(&Outcome::Error));
        assert_eq!(report.verdict, Some(OrderVerdict::Holds));
    }
}

#[test]
fn threads_pair_holds() {
    let pair = PrecisionPair { precise: precise(), imprecise: imprecise(), witness: vec![] };
    let report = check_graduality_pair(&pair, 100_000).unwrap();
    assert_eq!(report.static_violation, None);
    assert_eq!(report.verdict, Some(OrderVerdict::Holds));
    assert_eq!(report.precise.unwrap().outcome, Outcome::Value(Term::bool(true)));
}

#[test]
fn ill_typed_precise_program_has_nothing_to_check() {
    let p = parse_program(corpus::BAD_IMPORT).unwrap();
    let pair = PrecisionPair { precise: p.clone(), imprecise: p, witness: vec![] };
    let report = check_graduality_pair(&pair, 1000).unwrap();
    assert_eq!(report.verdict, None);
    assert!(!report.violated());
}

// ---- effect casts as handlers ---------------------------------------------

#[test]
fn downcast_from_dyn_errors_on_missing_operations() {
    let sig = signature();
    let sigma = row(&sig, &["say"]);
    let t = expand_effect_cast_as_handler(&sig, CastKind::Down, &sigma, &EffectType::Dyn, raise_ask(), &ValueType::Bool)
        .unwrap();
    let Term::Handle(_, h) = t else { panic!("expected a handler") };
    assert_eq!(h.kind, HandleKind::Deep);
    assert_eq!(h.eff, sigma);
    assert_eq!(h.clauses.keys().cloned().collect::<Vec<_>>(), vec!["ask", "run", "say"]);
    assert_eq!(h.clauses["ask"].body, Term::Err);
    assert_eq!(h.clauses["run"].body, Term::Err);
    assert_ne!(h.clauses["say"].body, Term::Err);
}

#[test]
fn upcast_clause_reraises_through_casts() {
    let sig = signature();
    let sigma = row(&sig, &["say"]);
    let t = expand_effect_cast_as_handler(&sig, CastKind::Up, &sigma, &EffectType::Dyn, Term::bool(true), &ValueType::Bool)
        .unwrap();
    let Term::Handle(_, h) = t else { panic!("expected a handler") };
    assert_eq!(h.eff, EffectType::Dyn);
    assert_eq!(h.clauses.len(), 1);
    let c = &h.clauses["say"];
    assert_eq!((&c.req, &c.resp), (&ValueType::Str, &ValueType::Unit));
    let expected = Term::app(
        Term::var(&c.k),
        Term::val_down(
            ValueType::Unit,
            ValueType::Unit,
            Term::raise("say", ValueType::Str, ValueType::Unit, Term::val_up(ValueType::Str, ValueType::Str, Term::var(&c.x))),
        ),
    );
    assert_eq!(c.body, expected);
}

#[test]
fn effect_cast_preconditions() {
    let sig = signature();
    let sigma = row(&sig, &["say"]);
    let err = expand_effect_cast_as_handler(&sig, CastKind::Up, &EffectType::Dyn, &sigma, Term::Unit, &ValueType::Unit);
    assert!(matches!(err, Err(CastError::PreconditionViolated(_))));
    let up_from_dyn =
        expand_effect_cast_as_handler(&sig, CastKind::Up, &EffectType::Dyn, &EffectType::Dyn, Term::Unit, &ValueType::Unit);
    assert!(matches!(up_from_dyn, Err(CastError::PreconditionViolated(_))));
}

#[test]
fn expanded_casts_agree_with_primitive_casts() {
    let sig = signature();
    let ask = row(&sig, &["ask"]);
    let say = row(&sig, &["say"]);
    // Through `?` and back: the raise survives.
    let ok = answering_ask(
        Term::eff_down(ask.clone(), EffectType::Dyn, Term::eff_up(ask.clone(), EffectType::Dyn, raise_ask())),
        false,
    );
    // Down to a row without `ask`: the raise is an error.
    let bad = answering_ask(
        Term::eff_up(
            EffectType::empty(),
            ask.clone(),
            Term::eff_down(EffectType::empty(), say.clone(), Term::eff_down(say, EffectType::Dyn, Term::eff_up(ask, EffectType::Dyn, raise_ask()))),
        ),
        true,
    );
    for (t, want) in [(ok, Outcome::Value(Term::bool(false))), (bad, Outcome::Error)] {
        let (expanded, n) = expand_effect_casts(&sig, &t);
        assert!(n > 0);
        assert_eq!(outcome(&t), want);
        assert_eq!(outcome(&expanded), want);
    }
}

// ---- function casts --------------------------------------------------------

#[test]
fn identity_function_cast_behaves_as_the_function() {
    let sig = signature();
    let a = arrow(ValueType::Bool, EffectType::empty(), ValueType::Bool);
    let not = Term::lam("b", ValueType::Bool, Term::if_(Term::var("b"), Term::bool(false), Term::bool(true)));
    for kind in [CastKind::Up, CastKind::Down] {
        let g = expand_fun_cast(kind, &a, &a, not.clone()).unwrap();
        check(&sig, &vec![], &g, &EffectType::empty(), &a).unwrap();
        assert_eq!(outcome(&Term::app(g, Term::bool(true))), Outcome::Value(Term::bool(false)));
    }
}

#[test]
fn expanded_upcast_matches_proxy() {
    let sig = signature();
    let ask = row(&sig, &["ask"]);
    let from = arrow(ValueType::Unit, ask.clone(), ValueType::Bool);
    let to = arrow(ValueType::Unit, EffectType::Dyn, ValueType::Bool);
    let f = Term::lam("u", ValueType::Unit, raise_ask());
    let proxy = Term::val_up(from.clone(), to.clone(), f.clone());
    let eta = expand_fun_cast(CastKind::Up, &from, &to, f).unwrap();
    check(&sig, &vec![], &eta, &EffectType::empty(), &to).unwrap();
    let close = |g: Term| answering_ask(Term::eff_down(EffectType::empty(), EffectType::Dyn, Term::app(g, Term::Unit)), true);
    // The handler sits outside the `?`-to-∅ cast, so the raise is an error
    // either way; under a handler inside the cast it is answered.
    assert_eq!(outcome(&close(proxy.clone())), outcome(&close(eta.clone())));
    let inside = |g: Term| {
        answering_ask(Term::eff_down(ask.clone(), EffectType::Dyn, Term::app(g, Term::Unit)), true)
    };
    assert_eq!(outcome(&inside(proxy)), Outcome::Value(Term::bool(true)));
    assert_eq!(outcome(&inside(eta)), Outcome::Value(Term::bool(true)));
}

#[test]
fn function_cast_preconditions() {
    let a = arrow(ValueType::Bool, EffectType::Dyn, ValueType::Bool);
    let b = arrow(ValueType::Bool, EffectType::empty(), ValueType::Bool);
    let f = Term::lam("b", ValueType::Bool, Term::var("b"));
    assert!(expand_fun_cast(CastKind::Up, &a, &b, f.clone()).is_err());
    assert!(expand_fun_cast(CastKind::Up, &ValueType::Bool, &ValueType::Bool, f).is_err());
    let not_value = Term::app(Term::lam("x", b.clone(), Term::var("x")), Term::Err);
    assert!(expand_fun_cast(CastKind::Up, &b, &b, not_value).is_err());
}

// ---- factorization ---------------------------------------------------------

#[test]
fn factorizations_of_equal_types_are_identities() {
    let sig = signature();
    let a = arrow(ValueType::Str, row(&sig, &["say"]), ValueType::Unit);
    let f = Term::lam("s", ValueType::Str, Term::raise("say", ValueType::Str, ValueType::Unit, Term::var("s")));
    for t in cast_factorizations(&a, &a, f).unwrap() {
        check(&sig, &vec![], &t, &EffectType::empty(), &a).unwrap();
        let run = Term::handle(Term::app(t, Term::str("x")), {
            let mut clauses = BTreeMap::new();
            clauses.insert(
                "say".to_string(),
                Clause { x: "p".into(), k: "k".into(), req: ValueType::Str, resp: ValueType::Unit, body: Term::bool(true) },
            );
            Handler {
                kind: HandleKind::Deep,
                ret_var: "v".into(),
                ret_ty: ValueType::Unit,
                ret_body: Term::bool(false),
                clauses,
                eff: EffectType::empty(),
                ty: ValueType::Bool,
            }
        });
        assert_eq!(outcome(&run), Outcome::Value(Term::bool(true)));
    }
}

#[test]
fn subtype_factorization_needs_no_runtime_cast() {
    let sig = signature();
    let a = arrow(ValueType::Bool, row(&sig, &["say"]), ValueType::Bool);
    let b = arrow(ValueType::Bool, row(&sig, &["ask", "say"]), ValueType::Bool);
    let f = factorize(&a, &b).unwrap();
    assert_eq!(f.d_l, a);
    assert_eq!(f.b_l, a);
    let [_, _, third, _] = cast_factorizations(&a, &b, Term::var("m")).unwrap();
    assert_eq!(third, Term::val_down(a.clone(), a.clone(), Term::val_up(a.clone(), a, Term::var("m"))));
}

#[test]
fn factorization_shapes() {
    let sig = signature();
    let say = row(&sig, &["say"]);
    // A request grows from str to a function type under `?`.
    let a = arrow(arrow(ValueType::Unit, EffectType::Dyn, ValueType::Bool), say.clone(), ValueType::Bool);
    let b = arrow(arrow(ValueType::Unit, EffectType::empty(), ValueType::Bool), EffectType::Dyn, ValueType::Bool);
    let f = factorize(&a, &b).unwrap();
    assert_eq!(f.d, a.erase());
    let m = Term::lam("g", arrow(ValueType::Unit, EffectType::Dyn, ValueType::Bool), Term::bool(true));
    let casts = cast_factorizations(&a, &b, m).unwrap();
    for t in &casts {
        check(&sig, &vec![], t, &EffectType::empty(), &b).unwrap();
    }
    let unrelated = factorize(&ValueType::Bool, &ValueType::Str);
    assert!(matches!(unrelated, Err(CastError::PreconditionViolated(_))));
}

// ---- small suite runs -------------------------------------------------------

#[test]
fn small_suites_pass() {
    let reports = [
        suite::well_typed_output(11, 40),
        suite::soundness(11, 40),
        suite::casts_as_handlers(11, 30),
        suite::retraction(11, 30),
        suite::functoriality(11, 30),
        suite::commutation(11, 30),
        suite::forwarding(11, 30),
        suite::function_casts(11, 30),
        suite::factorization(11, 30),
        suite::graduality(11, 30, 100_000),
    ];
    for r in &reports {
        assert!(r.passed(), "{}", r.summary());
        assert!(r.cases > 0, "{}", r.summary());
    }
}

#[test]
fn suites_are_deterministic() {
    let a = suite::graduality(5, 20, 100_000).jsonl();
    let b = suite::graduality(5, 20, 100_000).jsonl();
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 20);
    for line in a.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("seed").is_some() && v.get("verdict").is_some());
    }
}

#[test]
fn graduality_of_one_program() {
    let r = suite::graduality_of(&precise(), 3, 10, 100_000);
    assert_eq!(r.cases, 10);
    assert!(r.passed(), "{}", r.summary());
}
