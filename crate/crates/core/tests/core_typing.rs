use greff_core::core_lang::{check, synth, Term};
use greff_core::{EffectType, OpType, Signature, ValueType};

fn sig() -> Signature {
    let run_req = ValueType::arrow(ValueType::Bool, EffectType::Dyn, ValueType::Bool);
    [
        ("ask".to_string(), OpType::new(ValueType::Unit, ValueType::Bool)),
        ("say".to_string(), OpType::new(ValueType::Str, ValueType::Unit)),
        ("run".to_string(), OpType::new(run_req, ValueType::Bool)),
    ]
    .into_iter()
    .collect()
}

fn row(sig: &Signature, entries: &[(&str, Option<OpType>)]) -> EffectType {
    EffectType::Concrete(
        entries.iter().map(|(n, op)| (n.to_string(), op.clone().unwrap_or_else(|| sig.get(n).unwrap().clone()))).collect(),
    )
}

fn unit_fn(eff: EffectType) -> ValueType {
    ValueType::arrow(ValueType::Unit, eff, ValueType::Unit)
}

#[test]
fn enqueue_joins_element_types() {
    let s = sig();
    let say = row(&s, &[("say", None)]);
    let pure = Term::lam("u", ValueType::Unit, Term::Unit);
    let chatty = Term::lam("u", ValueType::Unit, Term::raise("say", ValueType::Str, ValueType::Unit, Term::str("hi")));
    // The queue itself is ⊥, so only the elements say what it holds.
    let q = Term::Enqueue(Box::new(Term::Enqueue(Box::new(Term::Err), Box::new(pure))), Box::new(chatty));
    let got = synth(&s, &vec![], &q).unwrap();
    assert_eq!(got.ty, Some(ValueType::queue(unit_fn(say.clone()))));
    check(&s, &vec![], &q, &EffectType::empty(), &ValueType::queue(unit_fn(say))).unwrap();
    assert!(check(&s, &vec![], &q, &EffectType::empty(), &ValueType::queue(unit_fn(EffectType::empty()))).is_err());
}

#[test]
fn branches_with_different_views_of_an_operation_join() {
    let s = sig();
    // `run` seen at its declared typing and at a narrower view.
    let narrow = OpType::new(
        ValueType::arrow(ValueType::Bool, row(&s, &[("ask", None)]), ValueType::Bool),
        ValueType::Bool,
    );
    let id = Term::lam("b", ValueType::Bool, Term::var("b"));
    let raise_at = |op: &OpType| {
        Term::lam("b", ValueType::Bool, Term::raise("run", op.req.clone(), op.resp.clone(), id.clone()))
    };
    let wide = s.get("run").unwrap().clone();
    let t = Term::if_(Term::bool(true), raise_at(&wide), raise_at(&narrow));
    let got = synth(&s, &vec![], &t).unwrap();
    let joined = ValueType::arrow(ValueType::Bool, row(&s, &[("run", None)]), ValueType::Bool);
    assert_eq!(got.ty, Some(joined));
}

#[test]
fn unrelated_typings_still_have_no_join() {
    let s = sig();
    let t = Term::if_(Term::bool(true), Term::str("a"), Term::bool(false));
    assert!(synth(&s, &vec![], &t).is_err());
}
