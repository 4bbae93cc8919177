//! Running derived algorithms on concrete inputs.

use std::fmt;

use num::{BigRational, One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::Expr;
use crate::invariants::analyze_post;
use crate::predicate::Predicate;
use crate::spec::{OperationSpec, Role};
use crate::state::{rat, EvalError, State};
use crate::stmt::{iteration_limit, ExecError, Stmt, COUNTER};
use crate::worksheet::{Slot, Worksheet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assertion {
    LoopHead,
    LoopBottom,
    Exit,
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Assertion::LoopHead => "invariant at loop head",
            Assertion::LoopBottom => "invariant at loop bottom",
            Assertion::Exit => "postcondition at exit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("worksheet is incomplete")]
    Incomplete(Vec<Slot>),
    #[error("{assertion} fails in iteration {iteration} at {state}")]
    InvariantViolation { iteration: usize, assertion: Assertion, state: State },
    #[error("{0}")]
    IndexOutOfRange(EvalError),
    #[error("loop did not terminate within {0} iterations")]
    NonTermination(usize),
    #[error(transparent)]
    Exec(ExecError),
}

impl From<ExecError> for RunError {
    fn from(e: ExecError) -> Self {
        match e {
            ExecError::Eval(err @ EvalError::IndexOutOfRange { .. }) => RunError::IndexOutOfRange(err),
            ExecError::NonTermination(n) => RunError::NonTermination(n),
            e => RunError::Exec(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub state: State,
    pub iterations: usize,
    /// The state after initialization and after every iteration.
    pub trace: Vec<State>,
}

impl Run {
    /// Successive values of `name` along the trace.
    pub fn history(&self, name: &str) -> Vec<BigRational> {
        self.trace.iter().filter_map(|s| s.get(name).cloned()).collect()
    }
}

/// Binds the vector and the evaluation point of `spec`.
pub fn input_state(spec: &OperationSpec, coeffs: &[BigRational], point: &BigRational) -> State {
    let (a, n) = spec.vector();
    let mut s = State::new();
    s.bind_vector(a, Some(n), coeffs.to_vec());
    let x = analyze_post(spec)
        .ok()
        .and_then(|f| f.power.map(|(_, x)| x))
        .or_else(|| {
            spec.context()
                .scalars()
                .find(|(_, r)| *r == Role::In)
                .map(|(name, _)| name.to_string())
        });
    if let Some(x) = x {
        s.set(&x, point.clone());
    }
    s
}

struct Program {
    init: Stmt,
    guard: Predicate,
    body: Stmt,
    invariant: Predicate,
}

fn program(ws: &Worksheet, with_cost: bool) -> Result<Program, RunError> {
    let missing = ws.missing();
    if !missing.is_empty() {
        return Err(RunError::Incomplete(missing));
    }
    let mut p = Program {
        init: ws.init.clone().expect("checked"),
        guard: ws.guard.clone().expect("checked"),
        body: ws.body().expect("checked"),
        invariant: ws.invariant.clone(),
    };
    if with_cost {
        if let Some(c) = &ws.cost_increment {
            p.init = Stmt::seq(vec![Stmt::assign(COUNTER, Expr::int(0)), p.init]);
            p.body = Stmt::seq(vec![p.body, Stmt::CounterIncr(c.clone())]);
        }
        if let Some(ci) = &ws.cost_invariant {
            p.invariant = p.invariant.and(ci);
        }
    }
    Ok(p)
}

fn execute(ws: &Worksheet, input: &State, check: bool, with_cost: bool) -> Result<Run, RunError> {
    let p = program(ws, with_cost)?;
    let mut state = input.clone();
    p.init.exec(&mut state)?;
    let limit = iteration_limit(&state);
    let mut trace = vec![state.clone()];
    let mut iteration = 0;
    let violation = |iteration, assertion, state: &State| RunError::InvariantViolation {
        iteration,
        assertion,
        state: state.clone(),
    };
    loop {
        if check && !p.invariant.holds(&state) {
            return Err(violation(iteration + 1, Assertion::LoopHead, &state));
        }
        if !p.guard.eval(&state).map_err(ExecError::Eval)? {
            break;
        }
        iteration += 1;
        if iteration > limit {
            return Err(RunError::NonTermination(limit));
        }
        p.body.exec(&mut state)?;
        if check && !p.invariant.holds(&state) {
            return Err(violation(iteration, Assertion::LoopBottom, &state));
        }
        trace.push(state.clone());
    }
    if check && !ws.postcondition.holds(&state) {
        return Err(violation(iteration, Assertion::Exit, &state));
    }
    Ok(Run { state, iterations: iteration, trace })
}

pub fn run(ws: &Worksheet, input: &State, check_invariants: bool) -> Result<Run, RunError> {
    execute(ws, input, check_invariants, false)
}

/// Runs the cost-instrumented program; the cost invariant joins the
/// checked invariant.
pub fn run_with_cost(ws: &Worksheet, input: &State, check_invariants: bool) -> Result<Run, RunError> {
    execute(ws, input, check_invariants, true)
}

/// `Σ a_i x^i`, each power formed by repeated multiplication.
pub fn oracle(a: &[BigRational], x: &BigRational) -> BigRational {
    let mut total = BigRational::zero();
    for (i, c) in a.iter().enumerate() {
        let mut p = BigRational::one();
        for _ in 0..i {
            p *= x;
        }
        total += c * p;
    }
    total
}

/// `a_0 + (a_1 + (⋯(a_{n-1} + 0·x)·x⋯)·x)·x` as an expression.
pub fn nested_form(array: &str, n: usize, x: &str) -> Expr {
    (0..n).rev().fold(Expr::int(0), |acc, i| {
        Expr::elem(array, Expr::int(i as i64)) + acc * Expr::var(x)
    })
}

pub fn nested_form_identity_check(a: &[BigRational], x: &BigRational) -> bool {
    let mut s = State::new();
    s.bind_vector("a", None, a.to_vec());
    s.set("x", x.clone());
    s.evaluate(&nested_form("a", a.len(), "x")).is_ok_and(|v| v == oracle(a, x))
}

pub const MAX_INPUT_LEN: usize = 8;

/// A seeded stream of inputs: up to eight coefficients in `[-5, 5]` and a
/// point in `[-3, 3]`.
pub struct Inputs {
    rng: ChaCha8Rng,
}

impl Inputs {
    pub fn new(seed: u64) -> Self {
        Inputs { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Iterator for Inputs {
    type Item = (Vec<BigRational>, BigRational);

    fn next(&mut self) -> Option<Self::Item> {
        let n = self.rng.gen_range(0..=MAX_INPUT_LEN);
        let a = (0..n).map(|_| rat(self.rng.gen_range(-5..=5))).collect();
        let x = rat(self.rng.gen_range(-3..=3));
        Some((a, x))
    }
}

/// True if the input satisfies the precondition and the side conditions
/// the derived update relies on.
pub fn admits(ws: &Worksheet, input: &State) -> bool {
    ws.spec.pre.holds(input) && ws.side_conditions.iter().all(|c| c.eval(input).unwrap_or(false))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub coeffs: Vec<BigRational>,
    pub x: BigRational,
    pub expected: BigRational,
    pub outcome: Result<BigRational, RunError>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossCheck {
    pub inputs: usize,
    /// Inputs skipped because a side condition excludes them.
    pub excluded: usize,
    pub mismatches: Vec<Mismatch>,
}

/// Runs `ws` against the oracle on the first `count` admissible inputs of
/// the seeded stream.
pub fn cross_check(ws: &Worksheet, seed: u64, count: usize, check_invariants: bool) -> CrossCheck {
    let out_name = ws.spec.output().to_string();
    let mut report = CrossCheck { inputs: 0, excluded: 0, mismatches: Vec::new() };
    for (a, x) in Inputs::new(seed) {
        if report.inputs == count {
            break;
        }
        let input = input_state(&ws.spec, &a, &x);
        if !admits(ws, &input) {
            report.excluded += 1;
            continue;
        }
        report.inputs += 1;
        let expected = oracle(&a, &x);
        let outcome = run(ws, &input, check_invariants)
            .map(|r| r.state.get(&out_name).cloned().unwrap_or_else(BigRational::zero));
        if outcome.as_ref() != Ok(&expected) {
            report.mismatches.push(Mismatch { coeffs: a, x, expected, outcome });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_spec, parse_stmt};
    use crate::invariants::Mode;
    use crate::worksheet::derive;

    const POLYEVAL: &str = "op polyeval
var y : scalar, out
var a : vector(n), in
var x : scalar, in
var k : scalar, index
pre: 0 <= n
post: y = sum(i, 0, n-1, a[i] * x^i)
";

    fn ints(v: &[i64]) -> Vec<BigRational> {
        v.iter().map(|&i| rat(i)).collect()
    }

    fn horner(mode: Mode) -> Worksheet {
        derive(&parse_spec(POLYEVAL).unwrap(), mode, 5).unwrap().worksheet
    }

    #[test]
    fn oracle_values() {
        assert_eq!(oracle(&ints(&[1, 2, 3]), &rat(2)), rat(17));
        assert_eq!(oracle(&[], &rat(9)), rat(0));
        assert_eq!(oracle(&ints(&[4]), &rat(9)), rat(4));
    }

    #[test]
    fn horner_trace() {
        for mode in [Mode::Indexed, Mode::Flame] {
            let ws = horner(mode);
            let r = run(&ws, &input_state(&ws.spec, &ints(&[1, 2, 3]), &rat(2)), true).unwrap();
            assert_eq!(r.history("y"), ints(&[0, 3, 8, 17]));
            assert_eq!(r.iterations, 3);
        }
    }

    #[test]
    fn empty_input_runs_zero_iterations() {
        let ws = horner(Mode::Indexed);
        let r = run(&ws, &input_state(&ws.spec, &[], &rat(5)), true).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.state.get("y"), Some(&rat(0)));
    }

    #[test]
    fn corrupted_update_is_caught_in_first_iteration() {
        let mut ws = horner(Mode::Indexed);
        ws.update = Some(parse_stmt("y := a[k - 1] + y * x + 1").unwrap());
        let err = run(&ws, &input_state(&ws.spec, &ints(&[1, 2]), &rat(3)), true).unwrap_err();
        assert!(matches!(err, RunError::InvariantViolation { iteration: 1, assertion: Assertion::LoopBottom, .. }));
    }

    #[test]
    fn nested_form_matches() {
        assert!(nested_form_identity_check(&ints(&[1, 2, 3]), &rat(2)));
        assert!(nested_form_identity_check(&[], &rat(7)));
        assert!(Inputs::new(3).take(200).all(|(a, x)| nested_form_identity_check(&a, &x)));
    }

    #[test]
    fn runaway_loop_is_cut_off() {
        let mut ws = horner(Mode::Indexed);
        ws.traversal = Some((Stmt::Skip, Stmt::Skip));
        let err = run(&ws, &input_state(&ws.spec, &ints(&[1]), &rat(1)), false).unwrap_err();
        assert_eq!(err, RunError::NonTermination(20));
    }
}
