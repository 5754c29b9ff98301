//! Small-step evaluation of core terms on an explicit frame stack.
//!
//! Decomposing a term into frames and returning a value into the top frame
//! are administrative; only reduction rules consume fuel. A raise walks the
//! stack outward, collecting the frames it passes, until a handler or an
//! effect cast takes it.

pub mod reference;

use std::fmt;

use crate::core_lang::{print_term, HandleKind, Handler, Term};
use crate::typesys::{EffectType, Name, Signature, ValueType};

pub const DEFAULT_FUEL: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frame {
    AppFun(Term),
    AppArg(Term),
    Let(Name, ValueType, Term),
    If(Term, Term),
    RaiseArg { op: Name, req: ValueType, resp: ValueType },
    Handle(Box<Handler>),
    ValUp(ValueType, ValueType),
    ValDown(ValueType, ValueType),
    EffUp(EffectType, EffectType),
    EffDown(EffectType, EffectType),
    ConcatL(Term),
    ConcatR(Term),
    StrEqL(Term),
    StrEqR(Term),
    EnqueueL(Term),
    EnqueueR(Term),
    CaseQueue { elem: ValueType, empty: Term, x: Name, q: Name, cons: Term },
}

impl Frame {
    /// The term with this frame around `t`.
    pub fn plug(&self, t: Term) -> Term {
        let b = Box::new(t);
        match self.clone() {
            Frame::AppFun(a) => Term::App(b, Box::new(a)),
            Frame::AppArg(f) => Term::App(Box::new(f), b),
            Frame::Let(x, a, n) => Term::Let(x, a, b, Box::new(n)),
            Frame::If(t, e) => Term::If(b, Box::new(t), Box::new(e)),
            Frame::RaiseArg { op, req, resp } => Term::Raise { op, req, resp, arg: b },
            Frame::Handle(h) => Term::Handle(b, h),
            Frame::ValUp(lo, hi) => Term::ValUp(lo, hi, b),
            Frame::ValDown(lo, hi) => Term::ValDown(lo, hi, b),
            Frame::EffUp(lo, hi) => Term::EffUp(lo, hi, b),
            Frame::EffDown(lo, hi) => Term::EffDown(lo, hi, b),
            Frame::ConcatL(r) => Term::Concat(b, Box::new(r)),
            Frame::ConcatR(l) => Term::Concat(Box::new(l), b),
            Frame::StrEqL(r) => Term::StrEq(b, Box::new(r)),
            Frame::StrEqR(l) => Term::StrEq(Box::new(l), b),
            Frame::EnqueueL(v) => Term::Enqueue(b, Box::new(v)),
            Frame::EnqueueR(q) => Term::Enqueue(Box::new(q), b),
            Frame::CaseQueue { elem, empty, x, q, cons } => {
                Term::CaseQueue { scrut: b, elem, empty: Box::new(empty), x, q, cons: Box::new(cons) }
            }
        }
    }

    /// Whether a raise of `op` passes through this frame untouched.
    pub fn apart(&self, sig: &Signature, op: &str) -> bool {
        match self {
            Frame::Handle(h) => !h.clauses.contains_key(op),
            Frame::EffUp(lo, hi) => !lo.contains(sig, op) && !hi.contains(sig, op),
            Frame::EffDown(_, hi) => !hi.contains(sig, op),
            _ => true,
        }
    }
}

/// `ε # E` for the context given by `frames` (in any order).
pub fn apart(sig: &Signature, frames: &[Frame], op: &str) -> bool {
    frames.iter().all(|f| f.apart(sig, op))
}

/// Plugs `t` into `frames`, innermost first.
pub fn plug_all(frames: &[Frame], t: Term) -> Term {
    frames.iter().fold(t, |acc, f| f.plug(acc))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Control {
    Eval(Term),
    Return(Term),
    /// A raise travelling outward; `captured` is innermost first.
    Raising { op: Name, req: ValueType, resp: ValueType, payload: Term, captured: Vec<Frame> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Value(Term),
    Error,
    UncaughtRaise(Name),
    FuelExhausted(u64),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Value(v) => write!(f, "{}", print_term(v)),
            Outcome::Error => write!(f, "error"),
            Outcome::UncaughtRaise(op) => write!(f, "uncaught raise of {op}"),
            Outcome::FuelExhausted(n) => write!(f, "fuel exhausted after {n} steps"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evaluation {
    pub outcome: Outcome,
    pub steps: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("machine stuck: {0}")]
pub struct Stuck(pub String);

/// Result of one call to [`Machine::step`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    Fired(&'static str),
    Done(Outcome),
}

#[derive(Clone, Debug)]
pub struct Machine<'s> {
    sig: &'s Signature,
    frames: Vec<Frame>,
    control: Control,
    steps: u64,
    fresh: u64,
    done: Option<Outcome>,
}

impl<'s> Machine<'s> {
    pub fn new(sig: &'s Signature, term: Term) -> Self {
        Machine { sig, frames: Vec::new(), control: Control::Eval(term), steps: 0, fresh: 0, done: None }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn control(&self) -> &Control {
        &self.control
    }

    /// The current state read back as a single term.
    pub fn reify(&self) -> Term {
        let inner = match &self.control {
            Control::Eval(t) | Control::Return(t) => t.clone(),
            Control::Raising { op, req, resp, payload, captured } => plug_all(
                captured,
                Term::Raise { op: op.clone(), req: req.clone(), resp: resp.clone(), arg: Box::new(payload.clone()) },
            ),
        };
        self.frames.iter().rev().fold(inner, |acc, f| f.plug(acc))
    }

    fn fresh_var(&mut self) -> Name {
        self.fresh += 1;
        format!("$y{}", self.fresh)
    }

    fn fire(&mut self, rule: &'static str, control: Control) -> Result<Step, Stuck> {
        self.steps += 1;
        self.control = control;
        Ok(Step::Fired(rule))
    }

    fn finish(&mut self, o: Outcome) -> Result<Step, Stuck> {
        self.done = Some(o.clone());
        Ok(Step::Done(o))
    }

    /// Runs administrative transitions until one rule fires or the machine
    /// halts. A halted machine keeps reporting its outcome.
    pub fn step(&mut self) -> Result<Step, Stuck> {
        if let Some(o) = &self.done {
            return Ok(Step::Done(o.clone()));
        }
        loop {
            let control = std::mem::replace(&mut self.control, Control::Return(Term::Unit));
            match control {
                Control::Eval(t) => {
                    if let Some(step) = self.eval(t)? {
                        return Ok(step);
                    }
                }
                Control::Return(v) => {
                    let Some(frame) = self.frames.pop() else {
                        return self.finish(Outcome::Value(v));
                    };
                    if let Some(step) = self.ret(frame, v)? {
                        return Ok(step);
                    }
                }
                Control::Raising { op, req, resp, payload, mut captured } => {
                    let Some(frame) = self.frames.pop() else {
                        return self.finish(Outcome::UncaughtRaise(op));
                    };
                    if frame.apart(self.sig, &op) {
                        captured.push(frame);
                        self.control = Control::Raising { op, req, resp, payload, captured };
                        continue;
                    }
                    return self.intercept(frame, op, payload, captured);
                }
            }
        }
    }

    /// Decomposes `t`, or fires the rule for `℧`.
    fn eval(&mut self, t: Term) -> Result<Option<Step>, Stuck> {
        if t.is_value() {
            if let Term::Var(x) = &t {
                return Err(Stuck(format!("free variable {x}")));
            }
            self.control = Control::Return(t);
            return Ok(None);
        }
        let (frame, inner) = match t {
            Term::Err => {
                if !self.frames.is_empty() {
                    self.steps += 1;
                    self.frames.clear();
                }
                return self.finish(Outcome::Error).map(Some);
            }
            Term::App(f, a) => (Frame::AppFun(*a), *f),
            Term::Let(x, a, m, n) => (Frame::Let(x, a, *n), *m),
            Term::If(c, t, e) => (Frame::If(*t, *e), *c),
            Term::Raise { op, req, resp, arg } => (Frame::RaiseArg { op, req, resp }, *arg),
            Term::Handle(m, h) => (Frame::Handle(h), *m),
            Term::ValUp(lo, hi, m) => (Frame::ValUp(lo, hi), *m),
            Term::ValDown(lo, hi, m) => (Frame::ValDown(lo, hi), *m),
            Term::EffUp(lo, hi, m) => (Frame::EffUp(lo, hi), *m),
            Term::EffDown(lo, hi, m) => (Frame::EffDown(lo, hi), *m),
            Term::Concat(a, b) => (Frame::ConcatL(*b), *a),
            Term::StrEq(a, b) => (Frame::StrEqL(*b), *a),
            Term::Enqueue(q, v) => (Frame::EnqueueL(*v), *q),
            Term::CaseQueue { scrut, elem, empty, x, q, cons } => {
                (Frame::CaseQueue { elem, empty: *empty, x, q, cons: *cons }, *scrut)
            }
            other => return Err(Stuck(format!("cannot evaluate {}", print_term(&other)))),
        };
        self.frames.push(frame);
        self.control = Control::Eval(inner);
        Ok(None)
    }

    /// Returns value `v` into `frame`.
    fn ret(&mut self, frame: Frame, v: Term) -> Result<Option<Step>, Stuck> {
        let stuck = |what: &str, v: &Term| Err(Stuck(format!("{what}: {}", print_term(v))));
        let step = match frame {
            Frame::AppFun(a) => {
                self.frames.push(Frame::AppArg(v));
                self.control = Control::Eval(a);
                return Ok(None);
            }
            Frame::AppArg(f) => self.apply(f, v)?,
            Frame::Let(x, _, n) => self.fire("Let", Control::Eval(n.subst(&x, &v)))?,
            Frame::If(t, e) => match v {
                Term::True => self.fire("IfTrue", Control::Eval(t))?,
                Term::False => self.fire("IfFalse", Control::Eval(e))?,
                other => return stuck("if on a non-boolean", &other),
            },
            Frame::RaiseArg { op, req, resp } => {
                self.control = Control::Raising { op, req, resp, payload: v, captured: Vec::new() };
                return Ok(None);
            }
            Frame::Handle(h) => self.fire("HandleVal", Control::Eval(h.ret_body.subst(&h.ret_var, &v)))?,
            Frame::ValUp(lo, hi) if lo.as_arrow().is_some() => {
                // Casts between function types are values (proxies).
                self.control = Control::Return(Term::ValUp(lo, hi, Box::new(v)));
                return Ok(None);
            }
            Frame::ValDown(lo, hi) if lo.as_arrow().is_some() => {
                self.control = Control::Return(Term::ValDown(lo, hi, Box::new(v)));
                return Ok(None);
            }
            Frame::ValUp(lo, hi) => self.value_cast(true, lo, hi, v)?,
            Frame::ValDown(lo, hi) => self.value_cast(false, lo, hi, v)?,
            Frame::EffUp(..) => self.fire("EffUpCastVal", Control::Return(v))?,
            Frame::EffDown(..) => self.fire("EffDnCastVal", Control::Return(v))?,
            Frame::ConcatL(r) => {
                self.frames.push(Frame::ConcatR(v));
                self.control = Control::Eval(r);
                return Ok(None);
            }
            Frame::ConcatR(l) => match (l, v) {
                (Term::Str(a), Term::Str(b)) => self.fire("Concat", Control::Return(Term::Str(a + &b)))?,
                (l, _) => return stuck("concatenating a non-string", &l),
            },
            Frame::StrEqL(r) => {
                self.frames.push(Frame::StrEqR(v));
                self.control = Control::Eval(r);
                return Ok(None);
            }
            Frame::StrEqR(l) => match (l, v) {
                (Term::Str(a), Term::Str(b)) => self.fire("StrEq", Control::Return(Term::bool(a == b)))?,
                (l, _) => return stuck("comparing a non-string", &l),
            },
            Frame::EnqueueL(x) => {
                self.frames.push(Frame::EnqueueR(v));
                self.control = Control::Eval(x);
                return Ok(None);
            }
            Frame::EnqueueR(q) => match q {
                Term::QueueVal(a, mut vs) => {
                    vs.push(v);
                    self.fire("Enqueue", Control::Return(Term::QueueVal(a, vs)))?
                }
                other => return stuck("enqueue onto a non-queue", &other),
            },
            Frame::CaseQueue { empty, x, q, cons, .. } => match v {
                Term::QueueVal(_, vs) if vs.is_empty() => self.fire("CaseEmpty", Control::Eval(empty))?,
                Term::QueueVal(a, mut vs) => {
                    let head = vs.remove(0);
                    let body = cons.subst(&x, &head).subst(&q, &Term::QueueVal(a, vs));
                    self.fire("CaseDequeue", Control::Eval(body))?
                }
                other => return stuck("case on a non-queue", &other),
            },
        };
        Ok(Some(step))
    }

    /// A value cast returning into its frame at a non-function type.
    fn value_cast(&mut self, up: bool, lo: ValueType, hi: ValueType, v: Term) -> Result<Step, Stuck> {
        match (&lo, &hi) {
            (ValueType::Bool, ValueType::Bool) | (ValueType::Unit, ValueType::Unit) | (ValueType::Str, ValueType::Str) => {
                self.fire("BoolUpDnCast", Control::Return(v))
            }
            (ValueType::Queue(a), ValueType::Queue(b)) => {
                let Term::QueueVal(_, vs) = v else {
                    return Err(Stuck(format!("queue cast of {}", print_term(&v))));
                };
                let (a, b) = ((**a).clone(), (**b).clone());
                let target = if up { b.clone() } else { a.clone() };
                let rebuilt = vs.into_iter().fold(Term::QueueVal(target, Vec::new()), |q, x| {
                    let cast =
                        if up { Term::val_up(a.clone(), b.clone(), x) } else { Term::val_down(a.clone(), b.clone(), x) };
                    Term::Enqueue(Box::new(q), Box::new(cast))
                });
                self.fire("QueueUpDnCast", Control::Eval(rebuilt))
            }
            _ => Err(Stuck(format!("value cast between {lo} and {hi}"))),
        }
    }

    fn apply(&mut self, f: Term, w: Term) -> Result<Step, Stuck> {
        match f {
            Term::Lam(x, _, body) => self.fire("Lam", Control::Eval(body.subst(&x, &w))),
            Term::Fix(g, t, v) => {
                let unrolled = v.subst(&g, &Term::Fix(g.clone(), t, v.clone()));
                self.fire("Fix", Control::Eval(Term::app(unrolled, w)))
            }
            Term::ValUp(lo, hi, g) => {
                let ((a, s, b), (a2, s2, b2)) = arrows(&lo, &hi)?;
                let call = Term::app(*g, Term::val_down(a, a2, w));
                self.fire("FunUpCast", Control::Eval(Term::val_up(b, b2, Term::eff_up(s, s2, call))))
            }
            Term::ValDown(lo, hi, g) => {
                let ((a, s, b), (a2, s2, b2)) = arrows(&lo, &hi)?;
                let call = Term::app(*g, Term::val_up(a, a2, w));
                self.fire("FunDnCast", Control::Eval(Term::val_down(b, b2, Term::eff_down(s, s2, call))))
            }
            other => Err(Stuck(format!("applying a non-function {}", print_term(&other)))),
        }
    }

    /// A raise meets a frame that is not apart from it.
    fn intercept(&mut self, frame: Frame, op: Name, payload: Term, captured: Vec<Frame>) -> Result<Step, Stuck> {
        let sig = self.sig;
        let y = self.fresh_var();
        match frame {
            Frame::Handle(h) => {
                let clause = &h.clauses[&op];
                let resumed = plug_all(&captured, Term::var(&y));
                let resumed = match h.kind {
                    HandleKind::Deep => Term::Handle(Box::new(resumed), h.clone()),
                    HandleKind::Shallow => resumed,
                };
                let k = Term::lam(&y, clause.resp.clone(), resumed);
                let body = clause.body.subst(&clause.x, &payload).subst(&clause.k, &k);
                self.fire("Handle", Control::Eval(body))
            }
            Frame::EffUp(lo, hi) => {
                let (Some(l), Some(h)) = (lo.lookup(sig, &op), hi.lookup(sig, &op)) else {
                    return Err(Stuck(format!("{op} escapes an upcast from {lo}")));
                };
                let rest = Term::eff_up(lo, hi, plug_all(&captured, Term::var(&y)));
                self.frames.push(Frame::Let(y, l.resp.clone(), rest));
                let raise = Term::raise(&op, h.req.clone(), h.resp.clone(), Term::val_up(l.req, h.req, payload));
                self.fire("EffUpCast", Control::Eval(Term::val_down(l.resp, h.resp, raise)))
            }
            Frame::EffDown(lo, hi) => {
                let Some(l) = lo.lookup(sig, &op) else {
                    self.frames.clear();
                    return self.fire("BadEffDnCast", Control::Eval(Term::Err));
                };
                let Some(h) = hi.lookup(sig, &op) else {
                    return Err(Stuck(format!("{op} escapes a downcast from {hi}")));
                };
                let rest = Term::eff_down(lo, hi, plug_all(&captured, Term::var(&y)));
                self.frames.push(Frame::Let(y, h.resp.clone(), rest));
                let raise = Term::raise(&op, l.req.clone(), l.resp.clone(), Term::val_down(l.req, h.req, payload));
                self.fire("GoodEffDnCast", Control::Eval(Term::val_up(l.resp, h.resp, raise)))
            }
            other => Err(Stuck(format!("{op} intercepted by {other:?}"))),
        }
    }
}

type Arrow = (ValueType, EffectType, ValueType);

fn arrows(lo: &ValueType, hi: &ValueType) -> Result<(Arrow, Arrow), Stuck> {
    match (lo, hi) {
        (ValueType::Arrow(a, s, b), ValueType::Arrow(a2, s2, b2)) => Ok((
            ((**a).clone(), (**s).clone(), (**b).clone()),
            ((**a2).clone(), (**s2).clone(), (**b2).clone()),
        )),
        _ => Err(Stuck(format!("function cast between {lo} and {hi}"))),
    }
}

/// Runs `m` for at most `fuel` rule firings.
pub fn evaluate(sig: &Signature, m: &Term, fuel: u64) -> Result<Evaluation, Stuck> {
    evaluate_observed(sig, m, fuel, &mut |_, _| {})
}

/// Like [`evaluate`], calling `observe` after every rule with its name.
pub fn evaluate_observed(
    sig: &Signature,
    m: &Term,
    fuel: u64,
    observe: &mut dyn FnMut(&Machine, &'static str),
) -> Result<Evaluation, Stuck> {
    let mut machine = Machine::new(sig, m.clone());
    loop {
        if machine.steps >= fuel {
            // A program that halts without firing another rule still
            // finishes; only a pending rule is out of fuel.
            let mut probe = machine.clone();
            if let Step::Done(outcome) = probe.step()? {
                if probe.steps == machine.steps {
                    return Ok(Evaluation { outcome, steps: machine.steps });
                }
            }
            return Ok(Evaluation { outcome: Outcome::FuelExhausted(machine.steps), steps: machine.steps });
        }
        match machine.step()? {
            Step::Fired(rule) => observe(&machine, rule),
            Step::Done(outcome) => return Ok(Evaluation { outcome, steps: machine.steps }),
        }
    }
}

/// One trace line per fired rule: step number, rule, and the current
/// control.
pub fn trace_line(machine: &Machine, rule: &str) -> String {
    let what = match machine.control() {
        Control::Eval(t) => format!("eval {}", print_term(t)),
        Control::Return(v) => format!("return {}", print_term(v)),
        Control::Raising { op, .. } => format!("raise {op}"),
    };
    let mut what = what;
    if what.len() > 100 {
        let cut = (0..=100).rev().find(|i| what.is_char_boundary(*i)).unwrap_or(0);
        what.truncate(cut);
        what.push_str("...");
    }
    format!("{:>6} {rule:<14} depth={} {what}", machine.steps(), machine.frames().len())
}
