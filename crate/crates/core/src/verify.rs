//! Proof obligations of a completed worksheet.

use std::fmt;

use thiserror::Error;

use crate::entail::entails;
use crate::expr::{Expr, Part, VecRef};
use crate::predicate::{Atom, Predicate};
use crate::sample::{hoare_test, implies, replay_hoare, replay_implication, TrialConfig, Verdict};
use crate::spec::{Context, Role};
use crate::state::State;
use crate::stmt::{Side, Stmt, COUNTER};
use crate::worksheet::{Slot, Worksheet};
use crate::wp::{forward_repartition, wp_normalized};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Obligation {
    /// `{P} S_I {Inv}`
    Initialization,
    /// `{Inv ∧ G} body {Inv}`
    Preservation,
    /// `Inv ∧ ¬G ⇒ Q`
    Exit,
    /// The variant is positive while the guard holds and drops each pass.
    Termination,
    /// The cost invariant under the instrumented program.
    Cost,
}

impl Obligation {
    pub fn name(self) -> &'static str {
        match self {
            Obligation::Initialization => "initialization",
            Obligation::Preservation => "preservation",
            Obligation::Exit => "exit",
            Obligation::Termination => "termination",
            Obligation::Cost => "cost",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub obligation: Obligation,
    pub verdict: Verdict,
}

impl Check {
    pub fn holds(&self) -> bool {
        matches!(self.verdict, Verdict::Proved | Verdict::Tested { .. })
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.obligation.name(), self.verdict)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(Check::holds)
    }

    pub fn get(&self, o: Obligation) -> Option<&Check> {
        self.checks.iter().find(|c| c.obligation == o)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("worksheet is incomplete; missing: {}", .0.iter().map(|s| s.keyword()).collect::<Vec<_>>().join(", "))]
    IncompleteWorksheet(Vec<Slot>),
}

/// Reads and divisions in `s` that `pre` must show to be defined. Only
/// statements up to the first one that changes a variable are checked,
/// which is where the reads see the state `pre` describes.
fn defined(ctx: &Context, pre: &Predicate, s: &Stmt) -> bool {
    let Stmt::Assign { exprs, .. } = s else { return true };
    let sizes = ctx.sizes();
    let mut needs = Vec::new();
    for e in exprs {
        e.walk(&mut |x| match x {
            Expr::Elem { array, index } => {
                if let Some(n) = sizes.size_of(array) {
                    needs.push(Atom::le(Expr::int(0), (**index).clone()));
                    needs.push(Atom::lt((**index).clone(), Expr::var(n)));
                }
            }
            Expr::Div(_, d) => needs.push(Atom::Ne((**d).clone(), Expr::int(0))),
            _ => {}
        });
    }
    entails(ctx, pre, &Predicate::all(needs))
}

fn exposable(ctx: &Context, pre: &Predicate, vector: &str, from: Side) -> bool {
    let part = match from {
        Side::Bottom => Part::Top,
        Side::Top => Part::Bottom,
    };
    let nonempty = Atom::lt(Expr::int(0), Expr::len(VecRef::part(vector, part)));
    entails(ctx, pre, &Predicate::atom(nonempty))
}

/// Tier 1 for a loop-free triple: a leading repartition is applied
/// forwards, the rest backwards by wp.
fn prove_triple(ctx: &Context, pre: &Predicate, s: &Stmt, post: &Predicate) -> bool {
    let stmts = s.flatten();
    let (pre, rest) = match stmts.first() {
        Some(Stmt::Repartition { vector, from }) => {
            if !exposable(ctx, pre, vector, *from) {
                return false;
            }
            (forward_repartition(vector, *from, pre), &stmts[1..])
        }
        _ => (pre.clone(), &stmts[..]),
    };
    if rest.first().is_some_and(|s| !defined(ctx, &pre, s)) {
        return false;
    }
    if rest.iter().skip(1).any(|s| matches!(s, Stmt::Assign { exprs, .. } if exprs.iter().any(reads))) {
        return false;
    }
    let rest = Stmt::seq(rest.iter().map(|s| (*s).clone()).collect());
    match wp_normalized(&rest, post, &ctx.sizes()) {
        Ok(w) => entails(ctx, &pre, &w),
        Err(_) => false,
    }
}

fn reads(e: &Expr) -> bool {
    e.any(&|x| matches!(x, Expr::Elem { .. } | Expr::Div(..)))
}

/// `{pre} s {post}`: proved when possible, tested otherwise.
pub fn hoare(ctx: &Context, pre: &Predicate, s: &Stmt, post: &Predicate, cfg: &TrialConfig) -> Verdict {
    if s.is_loop_free() && prove_triple(ctx, pre, s, post) {
        return Verdict::Proved;
    }
    hoare_test(ctx, pre, s, post, cfg).unwrap_or(Verdict::Unknown)
}

fn combine(a: Verdict, b: Verdict) -> Verdict {
    match (a, b) {
        (v @ Verdict::Falsified { .. }, _) | (_, v @ Verdict::Falsified { .. }) => v,
        (Verdict::Unknown, _) | (_, Verdict::Unknown) => Verdict::Unknown,
        (Verdict::Proved, Verdict::Proved) => Verdict::Proved,
        (t @ Verdict::Tested { .. }, _) | (_, t @ Verdict::Tested { .. }) => t,
    }
}

const VARIANT: &str = "t₀";

/// One part of an obligation: a triple, or an implication when `stmt` is
/// `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Goal {
    pub ctx: Context,
    pub pre: Predicate,
    pub stmt: Option<Stmt>,
    pub post: Predicate,
}

impl Goal {
    fn check(&self, cfg: &TrialConfig) -> Verdict {
        match &self.stmt {
            Some(s) => hoare(&self.ctx, &self.pre, s, &self.post, cfg),
            None => implies(&self.ctx, &self.pre, &self.post, cfg),
        }
    }

    /// True if `state` is a counterexample to this goal.
    pub fn refuted_by(&self, state: &State) -> bool {
        match &self.stmt {
            Some(s) => replay_hoare(&self.pre, s, &self.post, state),
            None => replay_implication(&self.pre, &self.post, state),
        }
    }
}

fn triple(ctx: &Context, pre: Predicate, stmt: Stmt, post: Predicate) -> Goal {
    Goal { ctx: ctx.clone(), pre, stmt: Some(stmt), post }
}

fn implication(ctx: &Context, pre: Predicate, post: Predicate) -> Goal {
    Goal { ctx: ctx.clone(), pre, stmt: None, post }
}

/// The goals making up obligation `o`, or `None` when the worksheet lacks
/// what `o` is about.
pub fn goals(ws: &Worksheet, o: Obligation) -> Option<Vec<Goal>> {
    let ctx = ws.context();
    let guard = ws.guard.clone()?;
    let init = ws.init.clone()?;
    let body = ws.body()?;
    let side = Predicate::all(ws.side_conditions.iter().cloned());
    let pre = ws.spec.pre.and(&side);
    let inv = &ws.invariant;
    let inside = inv.and(&guard).and(&side);
    let exit = |inv: &Predicate, post: Predicate| {
        guard.negate_guard().map(|not_g| implication(&ctx, inv.and(&not_g).and(&side), post))
    };
    Some(match o {
        Obligation::Initialization => vec![triple(&ctx, pre, init, inv.clone())],
        Obligation::Preservation => vec![triple(&ctx, inside, body, inv.clone())],
        Obligation::Exit => vec![exit(inv, ws.postcondition.clone())?],
        Obligation::Termination => {
            let t = ws.variant();
            let vctx = ctx.clone().with(VARIANT, Role::Aux);
            let start = inside.and_atom(Atom::eq(Expr::var(VARIANT), t.clone()));
            vec![
                implication(&ctx, inside.clone(), Predicate::atom(Atom::lt(Expr::int(0), t.clone()))),
                triple(&vctx, start, body, Predicate::atom(Atom::lt(t, Expr::var(VARIANT)))),
            ]
        }
        Obligation::Cost => {
            let incr = ws.cost_increment.clone()?;
            let inv = inv.and(ws.cost_invariant.as_ref()?);
            let a = ws.spec.vector().0;
            let total = Predicate::atom(Atom::eq(Expr::var(COUNTER), incr.clone() * Expr::len(VecRef::whole(a))));
            vec![
                triple(&ctx, pre, Stmt::seq(vec![Stmt::assign(COUNTER, Expr::int(0)), init]), inv.clone()),
                triple(&ctx, inv.and(&guard).and(&side), Stmt::seq(vec![body, Stmt::CounterIncr(incr)]), inv.clone()),
                exit(&inv, total)?,
            ]
        }
    })
}

fn check(ws: &Worksheet, o: Obligation, cfg: &TrialConfig) -> Option<Check> {
    let verdict = goals(ws, o)?
        .iter()
        .map(|g| g.check(cfg))
        .reduce(combine)
        .unwrap_or(Verdict::Unknown);
    Some(Check { obligation: o, verdict })
}

pub fn verify(ws: &Worksheet, cfg: &TrialConfig) -> Result<Report, VerifyError> {
    let missing = ws.missing();
    if !missing.is_empty() {
        return Err(VerifyError::IncompleteWorksheet(missing));
    }
    let mut checks: Vec<Check> = [
        Obligation::Initialization,
        Obligation::Preservation,
        Obligation::Exit,
        Obligation::Termination,
    ]
    .into_iter()
    .map(|o| check(ws, o, cfg).unwrap_or(Check { obligation: o, verdict: Verdict::Unknown }))
    .collect();
    checks.extend(cost_check(ws, cfg));
    Ok(Report { checks })
}

/// Initialization, preservation and exit for the invariant extended by the
/// cost invariant, with `C := 0` before the loop and `C += c` in the body.
pub fn cost_check(ws: &Worksheet, cfg: &TrialConfig) -> Option<Check> {
    check(ws, Obligation::Cost, cfg)
}

/// True if `state` refutes one of the goals of `o`.
pub fn replay(ws: &Worksheet, o: Obligation, state: &State) -> bool {
    goals(ws, o).is_some_and(|gs| gs.iter().any(|g| g.refuted_by(state)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_predicate, parse_spec, parse_stmt};
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

    fn cfg() -> TrialConfig {
        TrialConfig::new(200, 7)
    }

    #[test]
    fn derived_worksheets_verify() {
        let spec = parse_spec(POLYEVAL).unwrap();
        for mode in [Mode::Indexed, Mode::Flame] {
            for id in 1..=6 {
                let ws = derive(&spec, mode, id).unwrap().worksheet;
                let r = verify(&ws, &cfg()).unwrap();
                assert!(r.all_hold(), "{mode:?} {id}: {:?}", r.checks);
            }
        }
    }

    #[test]
    fn horner_is_proved_outright() {
        let spec = parse_spec(POLYEVAL).unwrap();
        for mode in [Mode::Indexed, Mode::Flame] {
            let ws = crate::cost::instrument(&derive(&spec, mode, 5).unwrap().worksheet).unwrap();
            let r = verify(&ws, &cfg()).unwrap();
            assert_eq!(r.checks.len(), 5);
            for c in &r.checks {
                assert_eq!(c.verdict, Verdict::Proved, "{mode:?} {c}");
            }
        }
    }

    #[test]
    fn mutants_fail() {
        let spec = parse_spec(POLYEVAL).unwrap();
        let ws = derive(&spec, Mode::Indexed, 5).unwrap().worksheet;

        let mut m = ws.clone();
        m.update = Some(parse_stmt("y := a[k] + y * x").unwrap());
        let r = verify(&m, &cfg()).unwrap();
        assert!(r.get(Obligation::Preservation).unwrap().verdict.is_falsified());

        let mut m = ws.clone();
        m.guard = Some(parse_predicate("k >= 0").unwrap());
        assert!(!verify(&m, &cfg()).unwrap().all_hold());

        let mut m = ws.clone();
        m.init = Some(Stmt::Skip);
        let r = verify(&m, &cfg()).unwrap();
        let Verdict::Falsified { counterexample } = &r.get(Obligation::Initialization).unwrap().verdict else {
            panic!("{:?}", r.checks)
        };
        assert!(replay(&m, Obligation::Initialization, counterexample));

        let mut m = ws;
        m.update = None;
        assert_eq!(verify(&m, &cfg()), Err(VerifyError::IncompleteWorksheet(vec![Slot::Update])));
    }
}
