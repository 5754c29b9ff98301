use greff_core::corpus;
use greff_core::surface::*;
use proptest::prelude::*;

#[test]
fn smallest_program() {
    let p = parse_program("main { true }").unwrap();
    assert!(p.modules.is_empty());
    assert!(p.main.decls.is_empty());
    assert_eq!(p.main.body.kind, TermKind::True);
}

#[test]
fn threads_program_structure() {
    let p = parse_program(&corpus::threads_imprecise()).unwrap();
    let names: Vec<_> = p.modules.iter().map(|m| m.name.as_str()).collect();
    assert_eq!(names, ["Operations", "Scheduler", "Main"]);
    let effects = p.modules[0].decls.iter().filter(|d| matches!(d.kind, DeclKind::NewEffect { .. })).count();
    assert_eq!(effects, 3);
    // `define main` became the main block's body, run inside Main.
    assert!(matches!(p.main.body.kind, TermKind::AscribeType(_, SType::Str)));
    assert_eq!(p.main.within.as_deref(), Some("Main"));
    assert!(p.modules[2].decls.iter().all(|d| !matches!(&d.kind, DeclKind::Define { name, .. } if name == "main")));
}

#[test]
fn unbalanced_brace_fails_at_end_of_input() {
    let src = "main { true";
    let err = parse_program(src).unwrap_err();
    assert_eq!(err.kind, ParseErrorKind::Syntax);
    assert_eq!((err.line, err.col), (1, src.len() as u32 + 1));
}

#[test]
fn errors_carry_kinds_and_positions() {
    let err = parse_program("main { \"abc }").unwrap_err();
    assert_eq!(err.kind, ParseErrorKind::Lexical);
    let err = parse_program("module A where\nmodule A where\nmain { true }").unwrap_err();
    assert_eq!((err.kind, err.line), (ParseErrorKind::DuplicateModule, 2));
    let dup = "main { handle true at [] bool with | ret x -> x | e(x, k) -> x | e(y, k) -> y }";
    assert_eq!(parse_program(dup).unwrap_err().kind, ParseErrorKind::DuplicateClause);
    let two_rets = "main { handle true at [] bool with | ret x -> x | ret y -> y }";
    assert_eq!(parse_program(two_rets).unwrap_err().kind, ParseErrorKind::DuplicateClause);
    // Definitions must be values.
    assert_eq!(parse_program("main { define x : bool = f y; x }").unwrap_err().kind, ParseErrorKind::Syntax);
}

#[test]
fn concrete_syntax_forms() {
    let t = parse_type("Queue (1 -[?]> 1) -[]> str -[a,b]> bool").unwrap();
    let SType::Arrow(dom, SEffect::Set(e), cod) = t else { panic!() };
    assert_eq!(*dom, SType::Queue(Box::new(SType::Arrow(Box::new(SType::Unit), SEffect::Dyn, Box::new(SType::Unit)))));
    assert!(e.is_empty());
    assert!(matches!(*cod, SType::Arrow(_, SEffect::Set(ref s), _) if s.len() == 2));

    let m = parse_term("a; b :: [?] :: bool").unwrap();
    let TermKind::Seq(_, rest) = m.kind else { panic!() };
    assert!(matches!(rest.kind, TermKind::AscribeType(ref inner, SType::Bool) if matches!(inner.kind, TermKind::AscribeEff(..))));

    let m = parse_term("f x y ++ \"s\" == z").unwrap();
    let TermKind::StrEq(l, _) = m.kind else { panic!() };
    assert!(matches!(l.kind, TermKind::Concat(ref f, _) if matches!(f.kind, TermKind::App(..))));

    let m = parse_term("raise print \"x\"").unwrap();
    assert!(matches!(m.kind, TermKind::Raise(ref op, _) if op == "print"));

    let p = parse_program("module M where\n  import N.x as y : bool\n  import N.e : 1 ~> 1\nmain { true }").unwrap();
    assert!(matches!(&p.modules[0].decls[0].kind, DeclKind::ImportValue { local, source, .. } if local == "y" && source == "x"));
    assert!(matches!(&p.modules[0].decls[1].kind, DeclKind::ImportEffect { .. }));
    assert!(parse_program("-- comment\nmain { sch-loop q' }").is_ok());
}

#[test]
fn corpus_round_trips() {
    for (name, src) in corpus::files() {
        let p = parse_program(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
        let printed = pretty_program(&p);
        let q = parse_program(&printed).unwrap_or_else(|e| panic!("{name}: {e}\n{printed}"));
        assert_eq!(p, q, "{name}");
        assert_eq!(pretty_program(&q), printed);
    }
}

#[test]
fn parsing_is_deterministic() {
    let src = corpus::threads_precise();
    assert_eq!(parse_program(&src).unwrap(), parse_program(&src).unwrap());
}

fn t(kind: TermKind) -> STerm {
    STerm::synth(kind)
}

fn b(kind: STerm) -> Box<STerm> {
    Box::new(kind)
}

fn arb_name() -> impl Strategy<Value = String> {
    prop_oneof![Just("x"), Just("y'"), Just("sch-loop"), Just("_"), Just("k2"), Just("print")].prop_map(String::from)
}

fn arb_effect() -> impl Strategy<Value = SEffect> {
    prop_oneof![
        Just(SEffect::Dyn),
        proptest::collection::btree_set(prop_oneof![Just("e"), Just("f"), Just("yield")].prop_map(String::from), 0..3)
            .prop_map(SEffect::Set),
    ]
}

fn arb_stype() -> impl Strategy<Value = SType> {
    prop_oneof![Just(SType::Bool), Just(SType::Unit), Just(SType::Str)].prop_recursive(3, 10, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| SType::Queue(Box::new(a))),
            (inner.clone(), arb_effect(), inner).prop_map(|(a, e, c)| SType::Arrow(Box::new(a), e, Box::new(c))),
        ]
    })
}

fn arb_term() -> impl Strategy<Value = STerm> {
    let leaf = prop_oneof![
        arb_name().prop_map(|x| t(TermKind::Var(x))),
        Just(t(TermKind::True)),
        Just(t(TermKind::False)),
        Just(t(TermKind::Unit)),
        "[a-z \"\\\\\n]{0,4}".prop_map(|s| t(TermKind::Str(s))),
        proptest::option::of(arb_stype()).prop_map(|a| t(TermKind::Empty(a))),
    ];
    leaf.prop_recursive(4, 40, 3, |inner| {
        let i = || inner.clone();
        prop_oneof![
            (arb_name(), proptest::option::of(arb_stype()), i()).prop_map(|(x, a, m)| t(TermKind::Lam(x, a, b(m)))),
            (i(), i()).prop_map(|(f, a)| t(TermKind::App(b(f), b(a)))),
            (arb_name(), i(), i()).prop_map(|(x, m, n)| t(TermKind::Let(x, b(m), b(n)))),
            (i(), i(), i()).prop_map(|(c, m, n)| t(TermKind::If(b(c), b(m), b(n)))),
            (arb_name(), i()).prop_map(|(op, m)| t(TermKind::Raise(op, b(m)))),
            (i(), arb_stype()).prop_map(|(m, a)| t(TermKind::AscribeType(b(m), a))),
            (i(), arb_effect()).prop_map(|(m, e)| t(TermKind::AscribeEff(b(m), e))),
            (i(), i()).prop_map(|(m, n)| t(TermKind::Seq(b(m), b(n)))),
            (i(), i()).prop_map(|(m, n)| t(TermKind::Concat(b(m), b(n)))),
            (i(), i()).prop_map(|(m, n)| t(TermKind::StrEq(b(m), b(n)))),
            (i(), i()).prop_map(|(m, n)| t(TermKind::Enqueue(b(m), b(n)))),
            (i(), i(), arb_name(), arb_name(), i()).prop_map(|(s, e, x, q, c)| t(TermKind::Match {
                scrut: b(s),
                empty: b(e),
                x,
                q,
                cons: b(c)
            })),
            (any::<bool>(), arb_effect(), arb_stype(), i(), arb_name(), i(), proptest::option::of(i())).prop_map(
                |(deep, eff, ty, scrut, r, rb, clause)| {
                    let clauses = clause
                        .map(|body| vec![Clause { op: "yield".into(), x: "_".into(), k: "k".into(), body, span: Span::default() }])
                        .unwrap_or_default();
                    let kind = if deep { HandleKind::Deep } else { HandleKind::Shallow };
                    t(TermKind::Handle(Box::new(Handle { kind, eff, ty, scrut, ret_var: r, ret_body: rb, clauses })))
                }
            ),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn terms_round_trip(m in arb_term()) {
        let printed = pretty_term(&m);
        let back = parse_term(&printed).map_err(|e| TestCaseError::fail(format!("{e}\n{printed}")))?;
        prop_assert_eq!(back, m, "{}", printed);
    }

    #[test]
    fn types_round_trip(a in arb_stype()) {
        prop_assert_eq!(parse_type(&pretty_type(&a)).unwrap(), a);
    }

    #[test]
    fn programs_round_trip(body in arb_term(), ty in arb_stype(), name in arb_name()) {
        let def = Decl {
            kind: DeclKind::Define { name, ty: ty.clone(), body: t(TermKind::Lam("u".into(), Some(ty), b(body.clone()))) },
            span: Span::default(),
        };
        let eff = Decl {
            kind: DeclKind::NewEffect { name: "yield".into(), req: SType::Unit, resp: SType::Unit },
            span: Span::default(),
        };
        let p = Program {
            modules: vec![Module { name: "M".into(), decls: vec![eff.clone(), def.clone()], span: Span::default() }],
            main: MainBlock { decls: vec![def], body, within: None },
        };
        let printed = pretty_program(&p);
        let back = parse_program(&printed).map_err(|e| TestCaseError::fail(format!("{e}\n{printed}")))?;
        prop_assert_eq!(back, p);
    }
}
