use greff_core::typesys::*;
use proptest::prelude::*;

fn op(req: ValueType, resp: ValueType) -> OpType {
    OpType::new(req, resp)
}

fn row(entries: &[(&str, OpType)]) -> EffectType {
    EffectType::Concrete(entries.iter().map(|(n, o)| (n.to_string(), o.clone())).collect())
}

fn print() -> (&'static str, OpType) {
    ("print", op(ValueType::Str, ValueType::Unit))
}

fn yield_() -> (&'static str, OpType) {
    ("yield", op(ValueType::Unit, ValueType::Unit))
}

fn eps(name: &'static str) -> (&'static str, OpType) {
    (name, op(ValueType::Bool, ValueType::Bool))
}

fn thunk(e: EffectType) -> ValueType {
    ValueType::arrow(ValueType::Unit, e, ValueType::Unit)
}

fn fork_row() -> EffectType {
    // fork's request mentions fork itself; inside, it is seen at its erasure.
    let fork_erased = ("fork", op(thunk(EffectType::Dyn), ValueType::Unit));
    let inner = row(&[fork_erased, print(), yield_()]);
    row(&[("fork", op(thunk(inner), ValueType::Unit))])
}

#[test]
fn erasure() {
    let precise = thunk(row(&[print(), yield_()]));
    assert_eq!(precise.erase(), thunk(EffectType::Dyn));
    assert_eq!(ValueType::Bool.erase(), ValueType::Bool);
    let t = ValueType::arrow(ValueType::Bool, row(&[eps("e")]), ValueType::Bool);
    assert_eq!(t.erase().erase(), t.erase());
    assert!(t.erase().is_non_tracking());
}

#[test]
fn subtyping_examples() {
    assert!(subtype_eff(&row(&[print()]), &row(&[print(), yield_()])));
    assert!(!subtype_eff(&EffectType::Dyn, &row(&[print()])));
    assert!(!subtype_eff(&row(&[print()]), &EffectType::Dyn));
    assert!(subtype_eff(&EffectType::Dyn, &EffectType::Dyn));
    assert!(subtype(&thunk(row(&[print()])), &thunk(row(&[print(), yield_()]))));
    assert!(!subtype(&thunk(row(&[print(), yield_()])), &thunk(row(&[print()]))));
}

#[test]
fn depth_subtyping_is_covariant_in_requests_and_contravariant_in_responses() {
    let narrow = thunk(row(&[]));
    let wide = thunk(row(&[print()]));
    let lo = row(&[("e", op(narrow.clone(), wide.clone()))]);
    let hi = row(&[("e", op(wide.clone(), narrow.clone()))]);
    assert!(subtype_eff(&lo, &hi));
    assert!(!subtype_eff(&hi, &lo));
}

#[test]
fn precision_examples() {
    assert!(precision_eff(&fork_row(), &EffectType::Dyn));
    assert!(precision(&ValueType::Bool, &ValueType::Bool));
    assert!(!precision_eff(&row(&[eps("e")]), &row(&[eps("e"), eps("f")])));
    assert!(!precision_eff(&EffectType::Dyn, &row(&[eps("e")])));
}

#[test]
fn gradual_subtyping_examples() {
    assert!(gradual_subtype_eff(&EffectType::Dyn, &fork_row()));
    assert!(gradual_subtype_eff(&fork_row(), &EffectType::Dyn));
    let fig2 = thunk(row(&[print(), yield_(), ("fork", op(thunk(EffectType::Dyn), ValueType::Unit))]));
    assert!(gradual_subtype(&thunk(EffectType::Dyn), &fig2));
    assert!(!gradual_subtype(&ValueType::Bool, &ValueType::arrow(ValueType::Bool, EffectType::Dyn, ValueType::Bool)));
}

#[test]
fn compatibility_examples() {
    let fig2 = thunk(row(&[print(), yield_()]));
    assert!(compatible(&thunk(EffectType::Dyn), &fig2));
    assert!(compatible(&ValueType::Bool, &ValueType::Bool));
    let pure = ValueType::arrow(ValueType::Bool, EffectType::empty(), ValueType::Bool);
    let eff = ValueType::arrow(ValueType::Bool, row(&[eps("e")]), ValueType::Bool);
    // Width subtyping makes the pure function a subtype, but not the converse.
    assert!(gradual_subtype(&pure, &eff));
    assert!(!compatible(&pure, &eff));
}

#[test]
fn join_examples() {
    let s = row(&[print()]);
    // `?` is absorbing (see the decisions ledger on joins with `?`).
    assert_eq!(gradual_join_eff(&s, &EffectType::Dyn).unwrap(), EffectType::Dyn);
    assert_eq!(gradual_join_eff(&EffectType::Dyn, &s).unwrap(), EffectType::Dyn);
    assert_eq!(gradual_meet_eff(&s, &EffectType::Dyn).unwrap(), EffectType::Dyn);
    let e = row(&[eps("e")]);
    let f = row(&[("f", op(ValueType::Str, ValueType::Unit))]);
    assert_eq!(
        gradual_join_eff(&e, &f).unwrap(),
        row(&[eps("e"), ("f", op(ValueType::Str, ValueType::Unit))])
    );
    assert_eq!(gradual_meet_eff(&e, &f).unwrap(), EffectType::empty());
    assert_eq!(gradual_join_eff(&s, &s).unwrap(), s);
    assert!(gradual_join(&ValueType::Bool, &thunk(EffectType::Dyn)).is_err());
    let clash = row(&[("print", op(ValueType::Bool, ValueType::Unit))]);
    assert!(gradual_join_eff(&s, &clash).is_err());
}

#[test]
fn derivation_examples() {
    let sc = row(&[eps("e")]);
    let d = derive_precision_eff(&sc, &EffectType::Dyn).unwrap();
    assert!(matches!(d, Deriv::Inj(_)));
    assert_eq!(d.left(), Endpoint::Effect(sc.clone()));
    assert_eq!(derive_precision(&ValueType::Bool, &ValueType::Bool), Some(Deriv::BoolRefl));
    assert_eq!(
        derive_precision(&ValueType::Bool, &ValueType::arrow(ValueType::Bool, EffectType::Dyn, ValueType::Bool)),
        None
    );
    let c = reflexivity_eff(&sc);
    assert_eq!(compose_derivations(&c, &d).unwrap(), d);
    assert_eq!(compose_derivations(&Deriv::BoolRefl, &Deriv::BoolRefl).unwrap(), Deriv::BoolRefl);
    assert!(compose_derivations(&Deriv::BoolRefl, &Deriv::StrRefl).is_err());
    let sig: Signature = [("e".to_string(), op(ValueType::Bool, ValueType::Bool))].into_iter().collect();
    assert!(d.wellformed(&sig));
}

// Types over a fixed signature: e : bool ~> bool, f : str ~> 1,
// g : (1 -[?]> 1) ~> 1. Requests of g vary only in their effect.
fn sig() -> Signature {
    [
        ("e".to_string(), op(ValueType::Bool, ValueType::Bool)),
        ("f".to_string(), op(ValueType::Str, ValueType::Unit)),
        ("g".to_string(), op(thunk(EffectType::Dyn), ValueType::Unit)),
    ]
    .into_iter()
    .collect()
}

fn arb_leaf_eff() -> impl Strategy<Value = EffectType> {
    prop_oneof![
        Just(EffectType::Dyn),
        (any::<bool>(), any::<bool>()).prop_map(|(e, f)| {
            let mut v = vec![];
            if e {
                v.push(eps("e"));
            }
            if f {
                v.push(("f", op(ValueType::Str, ValueType::Unit)));
            }
            row(&v)
        }),
    ]
}

fn arb_eff() -> impl Strategy<Value = EffectType> {
    (arb_leaf_eff(), proptest::option::of(arb_leaf_eff())).prop_map(|(base, g)| match (base, g) {
        (EffectType::Concrete(mut m), Some(inner)) => {
            m.insert("g".into(), op(thunk(inner), ValueType::Unit));
            EffectType::Concrete(m)
        }
        (e, _) => e,
    })
}

fn arb_type() -> impl Strategy<Value = ValueType> {
    let leaf = prop_oneof![Just(ValueType::Bool), Just(ValueType::Unit), Just(ValueType::Str)];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(ValueType::queue),
            (inner.clone(), arb_eff(), inner).prop_map(|(a, e, b)| ValueType::arrow(a, e, b)),
        ]
    })
}

/// Replaces the effects picked by `bits` with `?`, giving a less precise type.
fn loosen(t: &ValueType, bits: &mut impl Iterator<Item = bool>) -> ValueType {
    match t {
        ValueType::Queue(x) => ValueType::queue(loosen(x, bits)),
        ValueType::Arrow(a, e, b) => {
            let e = match &**e {
                EffectType::Concrete(m) if !bits.next().unwrap_or(false) => EffectType::Concrete(
                    m.iter().map(|(n, o)| (n.clone(), op(loosen(&o.req, bits), loosen(&o.resp, bits)))).collect(),
                ),
                _ => EffectType::Dyn,
            };
            ValueType::arrow(loosen(a, bits), e, loosen(b, bits))
        }
        _ => t.clone(),
    }
}

fn chain() -> impl Strategy<Value = (ValueType, ValueType, ValueType)> {
    (arb_type(), proptest::collection::vec(any::<bool>(), 16), proptest::collection::vec(any::<bool>(), 16)).prop_map(
        |(a, b1, b2)| {
            let b = loosen(&a, &mut b1.into_iter());
            let c = loosen(&b, &mut b2.into_iter());
            (a, b, c)
        },
    )
}

proptest! {
    #[test]
    fn relations_are_reflexive(a in arb_type()) {
        prop_assert!(subtype(&a, &a));
        prop_assert!(precision(&a, &a));
        prop_assert!(gradual_subtype(&a, &a));
        prop_assert!(compatible(&a, &a));
        prop_assert!(a.wellformed(&sig()));
    }

    #[test]
    fn erasure_is_least_precise(a in arb_type()) {
        prop_assert!(precision(&a, &a.erase()));
        prop_assert_eq!(a.erase().erase(), a.erase());
    }

    #[test]
    fn precision_is_transitive_and_derivable((a, b, c) in chain()) {
        prop_assert!(precision(&a, &b) && precision(&b, &c) && precision(&a, &c));
        let d1 = derive_precision(&a, &b).unwrap();
        let d2 = derive_precision(&b, &c).unwrap();
        let d = compose_derivations(&d1, &d2).unwrap();
        prop_assert_eq!(d.left_value(), Some(a.clone()));
        prop_assert_eq!(d.right_value(), Some(c.clone()));
        prop_assert_eq!(Some(d.clone()), derive_precision(&a, &c));
        prop_assert!(derivation_agrees(&d));
        prop_assert!(d.wellformed(&sig()));
        prop_assert_eq!(compose_derivations(&reflexivity(&a), &d1).unwrap(), d1.clone());
        prop_assert_eq!(compose_derivations(&d1, &reflexivity(&b)).unwrap(), d1);
    }

    #[test]
    fn composition_is_associative((a, b, c) in chain(), bits in proptest::collection::vec(any::<bool>(), 16)) {
        let d = loosen(&c, &mut bits.into_iter());
        let (x, y, z) = (
            derive_precision(&a, &b).unwrap(),
            derive_precision(&b, &c).unwrap(),
            derive_precision(&c, &d).unwrap(),
        );
        let left = compose_derivations(&compose_derivations(&x, &y).unwrap(), &z).unwrap();
        let right = compose_derivations(&x, &compose_derivations(&y, &z).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn precision_agrees_with_derivations(a in arb_type(), b in arb_type()) {
        prop_assert_eq!(precision(&a, &b), derive_precision(&a, &b).is_some());
    }

    #[test]
    fn subtyping_is_transitive(a in arb_type(), b in arb_type(), c in arb_type()) {
        if subtype(&a, &b) && subtype(&b, &c) {
            prop_assert!(subtype(&a, &c));
        }
        if subtype(&a, &b) {
            prop_assert!(gradual_subtype(&a, &b));
        }
    }

    #[test]
    fn loosening_stays_gradually_related((a, b, _c) in chain()) {
        prop_assert!(gradual_subtype(&a, &b) && gradual_subtype(&b, &a));
    }

    #[test]
    fn join_is_idempotent_and_absorbs_dyn(e in arb_eff()) {
        prop_assert_eq!(gradual_join_eff(&e, &e).unwrap(), e.clone());
        prop_assert_eq!(gradual_meet_eff(&e, &e).unwrap(), e.clone());
        prop_assert_eq!(gradual_join_eff(&e, &EffectType::Dyn).unwrap(), EffectType::Dyn);
        prop_assert_eq!(gradual_meet_eff(&EffectType::Dyn, &e).unwrap(), EffectType::Dyn);
    }
}
