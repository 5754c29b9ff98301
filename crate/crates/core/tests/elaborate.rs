use greff_core::core_lang::{self, pretty_term, Term};
use greff_core::elaborate::{
    elab_program, elab_term, handle_scrutinee_type, oblique_cast, oblique_cast_eff, ElabError, Scope,
};
use greff_core::surface::{parse_program, parse_term};
use greff_core::typesys::{subtype, subtype_eff};
use greff_core::{corpus, EffectType, OpType, Signature, ValueType};
use std::collections::BTreeSet;

fn elab_src(src: &str) -> Result<greff_core::elaborate::Elaborated, ElabError> {
    elab_program(&parse_program(src).expect("parses"))
}

fn assert_well_typed(src: &str) -> greff_core::elaborate::Elaborated {
    let e = elab_src(src).unwrap_or_else(|err| panic!("elaboration failed: {err}\n{src}"));
    let (eff, ty) = core_lang::typecheck(&e.sig, &vec![], &e.term)
        .unwrap_or_else(|err| panic!("core typing failed: {err}\n{}", pretty_term(&e.term)));
    assert!(subtype_eff(&eff, &e.eff), "{eff} vs {}", e.eff);
    if let Some(ty) = ty {
        assert!(subtype(&ty, &e.ty), "{ty} vs {}", e.ty);
    }
    e
}

#[test]
fn trivial_program() {
    let e = assert_well_typed("main { true }");
    assert!(e.sig.is_empty());
    assert_eq!(e.term, Term::True);
    assert_eq!(e.eff, EffectType::empty());
    assert_eq!(e.ty, ValueType::Bool);
}

#[test]
fn all_eight_mixes_elaborate() {
    for o in [false, true] {
        for s in [false, true] {
            for m in [false, true] {
                let e = assert_well_typed(&corpus::threads(o, s, m));
                assert_eq!(e.ty, ValueType::Str);
            }
        }
    }
}

#[test]
fn precise_main_is_pure_string() {
    let e = assert_well_typed(&corpus::threads_precise());
    assert_eq!(e.eff, EffectType::empty());
    assert_eq!(e.ty, ValueType::Str);
}

#[test]
fn negative_corpus_files() {
    assert_well_typed(corpus::BAD_DOWNCAST);
    assert!(matches!(elab_src(corpus::BAD_IMPORT), Err(ElabError::IncompatibleEffectImport { .. })));
}

#[test]
fn elaboration_is_deterministic() {
    let src = corpus::threads(true, false, true);
    let a = pretty_term(&elab_src(&src).unwrap().term);
    let b = pretty_term(&elab_src(&src).unwrap().term);
    assert_eq!(a, b);
}

fn print_scope() -> Scope {
    Scope::new("main")
        .with_effect("print", ValueType::Str, ValueType::Unit)
        .with_effect("yield", ValueType::Unit, ValueType::Unit)
}

fn row(names: &[&str]) -> EffectType {
    let scope = print_scope();
    EffectType::Concrete(names.iter().map(|n| (n.to_string(), scope.effect(n).unwrap().clone())).collect())
}

#[test]
fn true_is_pure_bool() {
    let (t, e, a) = elab_term(&Scope::new("main"), &parse_term("true").unwrap()).unwrap();
    assert_eq!((t, e, a), (Term::True, EffectType::empty(), ValueType::Bool));
}

#[test]
fn if_joins_branch_effects_and_casts_every_operand() {
    let m = parse_term(r#"if true then print("x") else yield()"#).unwrap();
    let (t, e, a) = elab_term(&print_scope(), &m).unwrap();
    assert_eq!(e, row(&["print", "yield"]));
    assert_eq!(a, ValueType::Unit);
    let Term::If(c, th, el) = &t else { panic!("{t:?}") };
    for part in [c, th, el] {
        assert!(matches!(**part, Term::EffDown(..)), "{part:?}");
    }
}

#[test]
fn effect_ascription_to_dyn() {
    let m = parse_term(r#"(raise print "x") :: [?]"#).unwrap();
    let (t, e, _) = elab_term(&print_scope(), &m).unwrap();
    assert_eq!(e, EffectType::Dyn);
    let Term::EffDown(lo, hi, inner) = &t else { panic!("{t:?}") };
    assert_eq!((lo, hi), (&EffectType::Dyn, &EffectType::Dyn));
    let Term::EffUp(lo, hi, _) = &**inner else { panic!("{inner:?}") };
    assert_eq!((lo, hi), (&row(&["print"]), &EffectType::Dyn));
    let sig = print_scope().signature();
    core_lang::check(&sig, &vec![], &t, &EffectType::Dyn, &ValueType::Unit).unwrap();
}

#[test]
fn scrutinee_types_in_all_four_cases() {
    let scope = print_scope();
    let handled: BTreeSet<String> = ["print".to_string()].into();
    // both concrete, everything handled
    let got = handle_scrutinee_type(&scope, &row(&["print"]), &row(&["yield"]), &handled).unwrap();
    assert_eq!(got, row(&["print", "yield"]));
    // dynamic scrutinee, concrete result
    let got = handle_scrutinee_type(&scope, &EffectType::Dyn, &row(&[]), &handled).unwrap();
    assert_eq!(got, row(&["print"]));
    // concrete scrutinee, dynamic result: unhandled operations are erased
    let got = handle_scrutinee_type(&scope, &row(&["print", "yield"]), &EffectType::Dyn, &handled).unwrap();
    assert_eq!(got, row(&["print", "yield"]));
    // both dynamic
    let got = handle_scrutinee_type(&scope, &EffectType::Dyn, &EffectType::Dyn, &handled).unwrap();
    assert_eq!(got, EffectType::Dyn);
    // an unhandled operation missing from a concrete result
    let err = handle_scrutinee_type(&scope, &row(&["print", "yield"]), &row(&[]), &handled).unwrap_err();
    assert!(matches!(err, ElabError::UnhandledEffect { ref name, .. } if name == "yield"));
}

#[test]
fn elab_type_resolves_local_typings() {
    let scope = Scope::new("m").with_effect("print", ValueType::Str, ValueType::Unit);
    let ty = greff_core::surface::parse_type("1 -[print]> 1").unwrap();
    let got = greff_core::elaborate::elab_type(&scope, &ty).unwrap();
    assert_eq!(
        got,
        ValueType::arrow(
            ValueType::Unit,
            EffectType::single("print", OpType::new(ValueType::Str, ValueType::Unit)),
            ValueType::Unit
        )
    );
    let dyn_ty = greff_core::surface::parse_type("bool -[?]> bool").unwrap();
    assert_eq!(
        greff_core::elaborate::elab_type(&scope, &dyn_ty).unwrap(),
        ValueType::arrow(ValueType::Bool, EffectType::Dyn, ValueType::Bool)
    );
    let unknown = greff_core::surface::parse_type("1 -[nope]> 1").unwrap();
    assert!(matches!(
        greff_core::elaborate::elab_type(&scope, &unknown),
        Err(ElabError::UnknownEffect { .. })
    ));
}

#[test]
fn oblique_casts_route_through_erasure() {
    let thunk_dyn = ValueType::arrow(ValueType::Unit, EffectType::Dyn, ValueType::Unit);
    let thunk_precise = ValueType::arrow(ValueType::Unit, row(&["print"]), ValueType::Unit);
    let t = oblique_cast(&thunk_precise, &thunk_dyn, Term::var("f")).unwrap();
    let Term::ValDown(lo, hi, inner) = &t else { panic!() };
    assert_eq!((lo, hi), (&thunk_precise, &thunk_dyn));
    assert!(matches!(&**inner, Term::ValUp(a, b, _) if *a == thunk_dyn && *b == thunk_dyn));
    let sig: Signature = print_scope().signature();
    let ctx = vec![("f".to_string(), thunk_dyn.clone())];
    core_lang::check(&sig, &ctx, &t, &EffectType::empty(), &thunk_precise).unwrap();

    let e = oblique_cast_eff(&row(&["print"]), &row(&["yield"]), Term::Unit);
    assert!(e.is_err(), "disjoint concrete rows are not gradually related");
    let e = oblique_cast_eff(&row(&["print", "yield"]), &row(&["print"]), Term::Unit).unwrap();
    assert!(matches!(e, Term::EffDown(_, EffectType::Dyn, _)));
    assert!(oblique_cast(&ValueType::Bool, &ValueType::Str, Term::True).is_err());
}

#[test]
fn static_errors() {
    type Case = (&'static str, fn(&ElabError) -> bool);
    let cases: &[Case] = &[
        ("main { x }", |e| matches!(e, ElabError::UnknownName { .. })),
        ("main { import M.x : bool; x }", |e| matches!(e, ElabError::UnknownModule { .. })),
        ("main { true \"a\" }", |e| matches!(e, ElabError::TypeMismatch { .. })),
        ("main { raise nope () }", |e| matches!(e, ElabError::UnknownEffect { .. })),
        ("main { effect e : 1 ~> 1; effect e : 1 ~> 1; true }", |e| matches!(e, ElabError::DuplicateEffect { .. })),
        (
            "module A where define x : str = \"s\" main { import A.x : bool; x }",
            |e| matches!(e, ElabError::IncompatibleValueImport { .. }),
        ),
        (
            "main { effect e : 1 ~> 1; handle raise e () at [] 1 with | ret x -> x }",
            |e| matches!(e, ElabError::UnhandledEffect { .. }),
        ),
        ("main { if true then true else \"s\" }", |e| matches!(e, ElabError::TypeMismatch { .. })),
    ];
    for (src, ok) in cases {
        let err = elab_src(src).expect_err(src);
        assert!(ok(&err), "{src}: {err}");
    }
}

#[test]
fn handler_with_dynamic_scrutinee_and_precise_context() {
    let src = r#"
main {
  effect ask : (1 -[]> 1) ~> bool;
  define f : 1 -[?]> bool = (lambda u. ask(lambda v : 1. v));
  handle f () at [] bool with
    | ret b -> b
    | ask(g, k) -> let _ = g () in k true
}"#;
    assert_well_typed(src);
}

#[test]
fn recursion_through_define() {
    let src = r#"
main {
  define loop : Queue str -[]> str = (lambda q.
    match q with | empty -> "" | dequeue(s, rest) -> s ++ loop rest);
  loop (enqueue (enqueue empty "a") "b")
}"#;
    let e = assert_well_typed(src);
    assert!(e.term.count(&|t| matches!(t, Term::Fix(..))) == 1);
}
