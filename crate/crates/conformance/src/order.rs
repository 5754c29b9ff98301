//! The error ordering on closed boolean programs, decided up to fuel.

use greff_core::core_lang::Term;
use greff_core::eval::{evaluate, Evaluation, Outcome, Stuck};
use greff_core::Signature;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    Left,
    Right,
}

// Verdicts are short-lived; boxing the outcomes buys nothing.
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OrderVerdict {
    Holds,
    Violated(Outcome, Outcome),
    /// Exactly one side ran out of fuel.
    Inconclusive(Side),
}

impl OrderVerdict {
    pub fn is_violated(&self) -> bool {
        matches!(self, OrderVerdict::Violated(..))
    }

    pub fn label(&self) -> &'static str {
        match self {
            OrderVerdict::Holds => "holds",
            OrderVerdict::Violated(..) => "violated",
            OrderVerdict::Inconclusive(Side::Left) => "inconclusive-left",
            OrderVerdict::Inconclusive(Side::Right) => "inconclusive-right",
        }
    }
}

/// Compares two observed outcomes: the left may error anywhere the right
/// does anything; otherwise both must agree.
pub fn order_outcomes(left: &Outcome, right: &Outcome) -> OrderVerdict {
    match (left, right) {
        (Outcome::Error, _) => OrderVerdict::Holds,
        (Outcome::FuelExhausted(_), Outcome::FuelExhausted(_)) => OrderVerdict::Holds,
        (Outcome::FuelExhausted(_), _) => OrderVerdict::Inconclusive(Side::Left),
        (_, Outcome::FuelExhausted(_)) => OrderVerdict::Inconclusive(Side::Right),
        (l, r) if l == r => OrderVerdict::Holds,
        (l, r) => OrderVerdict::Violated(l.clone(), r.clone()),
    }
}

/// Runs both programs and orders their outcomes. A stuck machine is an
/// interpreter bug and is reported as such rather than as a verdict.
pub fn semantic_order(sig: &Signature, m: &Term, m2: &Term, fuel: u64) -> Result<OrderVerdict, Stuck> {
    let (l, r) = run_pair(sig, m, m2, fuel)?;
    Ok(order_outcomes(&l.outcome, &r.outcome))
}

pub fn run_pair(sig: &Signature, m: &Term, m2: &Term, fuel: u64) -> Result<(Evaluation, Evaluation), Stuck> {
    Ok((evaluate(sig, m, fuel)?, evaluate(sig, m2, fuel)?))
}
