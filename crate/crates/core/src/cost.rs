//! Operation counts of derived algorithms.
//!
//! The update is charged one flop per addition, subtraction,
//! multiplication and division. A counter `C` is threaded through the loop
//! and its value is pinned down by a cost invariant checked like any other.

use num::{BigRational, ToPrimitive};
use thiserror::Error;

use crate::expr::{Expr, Part, VecRef};
use crate::interp::{input_state, run_with_cost, RunError};
use crate::invariants::{Direction, Mode};
use crate::normal::normalize_in;
use crate::predicate::{Atom, Predicate};
use crate::sample::{TrialConfig, Verdict};
use crate::state::{rat, State};
use crate::stmt::{Stmt, COUNTER};
use crate::verify::{cost_check, Check};
use crate::worksheet::{index_of, Worksheet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CostError {
    #[error("the update raises to a symbolic power `{0}`; its cost is not a constant")]
    UnsupportedRecurrence(String),
    #[error("the worksheet has no update to cost")]
    Incomplete,
    #[error("cost obligation failed: {0}")]
    CostInvariantFalsified(Check),
    #[error("measured cost {measured} differs from {expected} at n = {n}")]
    CountMismatch { n: usize, measured: String, expected: String },
    #[error(transparent)]
    Run(#[from] RunError),
}

fn expr_flops(e: &Expr) -> Result<u64, CostError> {
    let children: u64 = match e {
        Expr::Elem { .. } | Expr::Len(_) | Expr::Ref(_) => return Ok(0),
        _ => e.children().into_iter().map(expr_flops).sum::<Result<u64, _>>()?,
    };
    let own = match e {
        Expr::Add(..) | Expr::Sub(..) | Expr::Mul(..) | Expr::Div(..) => 1,
        Expr::Pow(_, exp) => match exp.as_int().and_then(|v| v.to_u64()) {
            Some(v) => v.saturating_sub(1),
            None => return Err(CostError::UnsupportedRecurrence(crate::print::ascii(e))),
        },
        Expr::Sum { .. } | Expr::Poly(..) => {
            return Err(CostError::UnsupportedRecurrence(crate::print::ascii(e)));
        }
        _ => 0,
    };
    Ok(children + own)
}

/// Flops performed by one execution of a loop-free statement.
pub fn flop_count(s: &Stmt) -> Result<u64, CostError> {
    let mut total = 0;
    for part in s.flatten() {
        if let Stmt::Assign { exprs, .. } = part {
            for e in exprs {
                total += expr_flops(e)?;
            }
        }
    }
    Ok(total)
}

/// `C_0 = initial`, `C_{k+1} = C_k + increment`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Recurrence {
    pub initial: i64,
    pub increment: i64,
}

pub const ITERATIONS: &str = "k";

/// The closed form `initial + increment·k`, checked against the
/// recurrence for the first few `k`.
pub fn solve_recurrence(r: &Recurrence) -> Expr {
    let k = Expr::var(ITERATIONS);
    let closed = normalize_in(&(Expr::int(r.initial) + Expr::int(r.increment) * k), &Default::default());
    let mut c = r.initial;
    for step in 0..=16 {
        let at = State::new().with_scalar(ITERATIONS, rat(step));
        debug_assert_eq!(at.evaluate(&closed), Ok(rat(c)));
        c += r.increment;
    }
    closed
}

/// The number of elements processed so far.
fn processed(ws: &Worksheet) -> Expr {
    let (a, n) = ws.spec.vector();
    match (ws.mode, ws.direction) {
        (Mode::Indexed, Direction::LastToFirst) => Expr::var(n) - Expr::var(index_of(&ws.spec)),
        (Mode::Indexed, Direction::FirstToLast) => Expr::var(index_of(&ws.spec)),
        (Mode::Flame, Direction::LastToFirst) => Expr::len(VecRef::part(a, Part::Bottom)),
        (Mode::Flame, Direction::FirstToLast) => Expr::len(VecRef::part(a, Part::Top)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostReport {
    pub recurrence: Recurrence,
    pub closed_form: Expr,
    pub cost_invariant: Predicate,
    pub total_cost: Expr,
    pub verification: Vec<Check>,
    pub runtime_counts: Vec<(usize, BigRational)>,
}

/// Adds the counter increment and the cost invariant to `ws`.
pub fn instrument(ws: &Worksheet) -> Result<Worksheet, CostError> {
    let update = ws.update.as_ref().ok_or(CostError::Incomplete)?;
    let c = flop_count(update)?;
    let mut out = ws.clone();
    out.cost_increment = Some(Expr::int(c as i64));
    let rhs = Expr::int(c as i64) * processed(ws);
    out.cost_invariant = Some(Predicate::atom(Atom::eq(Expr::var(COUNTER), rhs)));
    Ok(out)
}

pub fn total_cost(ws: &Worksheet, increment: i64) -> Expr {
    let a = ws.spec.vector().0;
    normalize_in(&(Expr::int(increment) * Expr::len(VecRef::whole(a))), &ws.sizes())
}

/// Counter values of the instrumented program for `n = 0..=max_n`.
pub fn runtime_counts(ws: &Worksheet, max_n: usize) -> Result<Vec<(usize, BigRational)>, CostError> {
    let mut out = Vec::new();
    for n in 0..=max_n {
        let coeffs: Vec<BigRational> = (0..n).map(|i| rat((i % 7) as i64 - 3)).collect();
        let input = input_state(&ws.spec, &coeffs, &rat(2));
        let r = run_with_cost(ws, &input, true)?;
        out.push((n, r.state.get(COUNTER).cloned().unwrap_or_default()));
    }
    Ok(out)
}

/// Instruments, solves, verifies and measures.
pub fn prove_cost(ws: &Worksheet, cfg: &TrialConfig, max_n: usize) -> Result<CostReport, CostError> {
    let inst = if ws.cost_increment.is_some() && ws.cost_invariant.is_some() {
        ws.clone()
    } else {
        instrument(ws)?
    };
    let increment = inst
        .cost_increment
        .as_ref()
        .and_then(|e| e.as_int())
        .and_then(|v| v.to_i64())
        .ok_or_else(|| CostError::UnsupportedRecurrence(crate::print::ascii(inst.cost_increment.as_ref().unwrap())))?;
    let recurrence = Recurrence { initial: 0, increment };
    let closed_form = solve_recurrence(&recurrence);
    let total = total_cost(&inst, increment);
    let check = cost_check(&inst, cfg).ok_or(CostError::Incomplete)?;
    if !check.holds() {
        return Err(CostError::CostInvariantFalsified(check));
    }
    let counts = runtime_counts(&inst, max_n)?;
    for (n, measured) in &counts {
        let mut at = State::new();
        at.bind_vector(inst.spec.vector().0, Some(inst.spec.vector().1), vec![rat(0); *n]);
        let expected = at.evaluate(&total).map_err(|e| RunError::Exec(e.into()))?;
        if *measured != expected {
            return Err(CostError::CountMismatch {
                n: *n,
                measured: measured.to_string(),
                expected: expected.to_string(),
            });
        }
    }
    Ok(CostReport {
        recurrence,
        closed_form,
        cost_invariant: inst.cost_invariant.clone().expect("instrumented"),
        total_cost: total,
        verification: vec![check],
        runtime_counts: counts,
    })
}

/// True when every verdict in the report is a proof or a passed test.
pub fn all_verified(r: &CostReport) -> bool {
    r.verification.iter().all(|c| matches!(c.verdict, Verdict::Proved | Verdict::Tested { .. }))
}
