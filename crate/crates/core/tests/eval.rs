use greff_core::core_lang::{self, Clause, HandleKind, Handler, Term};
use greff_core::corpus;
use greff_core::elaborate::{elab_program, Elaborated};
use greff_core::eval::{apart, evaluate, evaluate_observed, reference, Frame, Machine, Outcome, Step, DEFAULT_FUEL};
use greff_core::surface::parse_program;
use greff_core::{EffectType, OpType, Signature, ValueType};

fn elab(src: &str) -> Elaborated {
    elab_program(&parse_program(src).unwrap()).unwrap()
}

fn run(sig: &Signature, m: &Term) -> (Outcome, u64) {
    let e = evaluate(sig, m, DEFAULT_FUEL).unwrap();
    let (r, _) = reference::evaluate(sig, m, DEFAULT_FUEL).unwrap();
    assert_eq!(e.outcome, r, "machine and reference evaluator disagree");
    (e.outcome, e.steps)
}

fn s(x: &str) -> Term {
    Term::Str(x.into())
}

#[test]
fn beta_is_one_step() {
    let m = Term::app(Term::lam("x", ValueType::Bool, Term::var("x")), Term::True);
    assert_eq!(run(&Signature::new(), &m), (Outcome::Value(Term::True), 1));
}

#[test]
fn if_does_not_touch_the_untaken_branch() {
    let m = Term::if_(Term::True, Term::False, Term::Err);
    assert_eq!(run(&Signature::new(), &m).0, Outcome::Value(Term::False));
}

#[test]
fn error_aborts_the_whole_context() {
    let m = Term::let_("x", ValueType::Bool, Term::Err, Term::True);
    assert_eq!(run(&Signature::new(), &m).0, Outcome::Error);
}

#[test]
fn handler_return_clause() {
    let e = elab("main { handle \"v\" at [] str with | ret x -> x ++ \"!\" }");
    let out = run(&e.sig, &e.term);
    assert_eq!(out.0, Outcome::Value(s("v!")));
}

#[test]
fn deep_and_shallow_handlers_differ() {
    let body = |kind: &str| {
        format!(
            "main {{ effect get : 1 ~> str; \
             {kind} (get() ++ get()) at [get] str with | ret x -> x | get(_, k) -> k \"a\" }}"
        )
    };
    let deep = elab(&body("handle"));
    assert_eq!(run(&deep.sig, &deep.term).0, Outcome::Value(s("aa")));
    // The second get escapes a shallow handler and is caught by nobody.
    let shallow = elab(&body("shallow-handle"));
    assert_eq!(run(&shallow.sig, &shallow.term).0, Outcome::UncaughtRaise("get".into()));
}

#[test]
fn threads_print_1a2b_in_every_mix() {
    for (name, src) in corpus::files() {
        if !name.starts_with("threads") && !name.starts_with("combo") {
            continue;
        }
        let e = elab(&src);
        let (out, steps) = run(&e.sig, &e.term);
        assert_eq!(out, Outcome::Value(s("1a2b")), "{name}");
        assert!(steps < 10_000, "{name}: {steps} steps");
    }
}

#[test]
fn bad_downcast_is_a_runtime_error() {
    let e = elab(corpus::BAD_DOWNCAST);
    assert_eq!(run(&e.sig, &e.term).0, Outcome::Error);
}

#[test]
fn effect_downcast_check_fires_only_for_forbidden_operations() {
    let sig: Signature = [
        ("print".to_string(), OpType::new(ValueType::Str, ValueType::Unit)),
        ("yield".to_string(), OpType::new(ValueType::Unit, ValueType::Unit)),
    ]
    .into_iter()
    .collect();
    let print = EffectType::single("print", OpType::new(ValueType::Str, ValueType::Unit));
    let raise = |op: &str, req: ValueType, arg: Term| Term::raise(op, req, ValueType::Unit, arg);
    let clause = |req: ValueType| Clause { x: "x".into(), k: "k".into(), req, resp: ValueType::Unit, body: Term::False };
    let handle_all = |m: Term| {
        let h = Handler {
            kind: HandleKind::Deep,
            ret_var: "r".into(),
            ret_ty: ValueType::Unit,
            ret_body: Term::True,
            clauses: [("print".to_string(), clause(ValueType::Str)), ("yield".to_string(), clause(ValueType::Unit))]
                .into_iter()
                .collect(),
            eff: EffectType::empty(),
            ty: ValueType::Bool,
        };
        Term::handle(m, h)
    };
    let allowed = handle_all(Term::eff_down(print.clone(), EffectType::Dyn, raise("print", ValueType::Str, s("p"))));
    assert_eq!(run(&sig, &allowed).0, Outcome::Value(Term::False));
    let forbidden = handle_all(Term::eff_down(print, EffectType::Dyn, raise("yield", ValueType::Unit, Term::Unit)));
    assert_eq!(run(&sig, &forbidden).0, Outcome::Error);
}

#[test]
fn apartness() {
    let sig: Signature = [("e".to_string(), OpType::new(ValueType::Unit, ValueType::Unit))].into_iter().collect();
    let e_row = EffectType::single("e", OpType::new(ValueType::Unit, ValueType::Unit));
    assert!(apart(&sig, &[Frame::AppFun(Term::Unit), Frame::ValUp(ValueType::Bool, ValueType::Bool)], "e"));
    assert!(!apart(&sig, &[Frame::EffUp(e_row.clone(), EffectType::Dyn)], "e"));
    assert!(!apart(&sig, &[Frame::EffUp(EffectType::empty(), EffectType::Dyn)], "e"));
    assert!(apart(&sig, &[Frame::EffUp(EffectType::empty(), e_row.clone())], "f"));
    assert!(!apart(&sig, &[Frame::EffDown(e_row, EffectType::Dyn)], "e"));
}

#[test]
fn fuel_bounds_rule_firings() {
    let src = "main { define spin : 1 -[]> bool = (lambda u. spin u); spin () }";
    let e = elab(src);
    let r = evaluate(&e.sig, &e.term, 500).unwrap();
    assert_eq!(r.outcome, Outcome::FuelExhausted(500));
    // Exactly enough fuel still finishes.
    let m = Term::app(Term::lam("x", ValueType::Bool, Term::var("x")), Term::True);
    assert_eq!(evaluate(&Signature::new(), &m, 1).unwrap().outcome, Outcome::Value(Term::True));
    assert_eq!(evaluate(&Signature::new(), &m, 0).unwrap().outcome, Outcome::FuelExhausted(0));
}

#[test]
fn every_intermediate_state_is_well_typed() {
    for (name, src) in corpus::files() {
        if name.starts_with("bad_import") {
            continue;
        }
        let e = elab(&src);
        let (eff0, ty0) = core_lang::typecheck(&e.sig, &vec![], &e.term).unwrap();
        let mut checked = 0;
        evaluate_observed(&e.sig, &e.term, DEFAULT_FUEL, &mut |m: &Machine, rule| {
            let t = m.reify();
            match &ty0 {
                Some(ty0) => core_lang::check(&e.sig, &vec![], &t, &eff0, ty0),
                None => core_lang::typecheck(&e.sig, &vec![], &t).map(|_| ()),
            }
            .unwrap_or_else(|err| panic!("{name}: ill-typed after {rule}: {err}"));
            checked += 1;
        })
        .unwrap();
        assert!(checked > 0);
    }
}

#[test]
fn halted_machine_keeps_reporting() {
    let sig = Signature::new();
    let mut m = Machine::new(&sig, Term::True);
    assert_eq!(m.step().unwrap(), Step::Done(Outcome::Value(Term::True)));
    assert_eq!(m.step().unwrap(), Step::Done(Outcome::Value(Term::True)));
    assert_eq!(m.steps(), 0);
}
