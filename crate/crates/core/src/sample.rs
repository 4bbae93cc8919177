//! Implication and Hoare-triple checking.
//!
//! Tier 1 is [`crate::entail::entails`]. When it cannot decide, Tier 2 draws
//! seeded random states: trial `t` uses its own ChaCha stream, so verdicts
//! and counterexamples depend only on the seed, never on scheduling.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::entail;
use crate::expr::{Expr, Part};
use crate::par::{self, Strategy};
use crate::predicate::{Atom, Predicate};
use crate::spec::{Context, Role};
use crate::state::{rat, Cursor, State};
use crate::stmt::Stmt;

pub const DEFAULT_TRIALS: u64 = 1000;
pub const DEFAULT_SEED: u64 = 42;
const DRAWS_PER_TRIAL: usize = 100;
const MAX_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialConfig {
    pub trials: u64,
    pub seed: u64,
    pub strategy: Strategy,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig { trials: DEFAULT_TRIALS, seed: DEFAULT_SEED, strategy: Strategy::default() }
    }
}

impl TrialConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        TrialConfig { trials, seed, ..TrialConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Proved,
    Tested { trials: u64, seed: u64 },
    Falsified { counterexample: State },
    /// No sampled state satisfied the antecedent.
    Unknown,
}

impl Verdict {
    pub fn is_falsified(&self) -> bool {
        matches!(self, Verdict::Falsified { .. })
    }

    pub fn tier(&self) -> u8 {
        match self {
            Verdict::Proved => 1,
            _ => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Proved => "Proved",
            Verdict::Tested { .. } => "Tested",
            Verdict::Falsified { .. } => "Falsified",
            Verdict::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Proved => write!(f, "Proved (tier 1)"),
            Verdict::Tested { trials, seed } => write!(f, "Tested (tier 2, {trials} trials, seed {seed})"),
            Verdict::Falsified { counterexample } => write!(f, "Falsified (tier 2) at {counterexample}"),
            Verdict::Unknown => write!(f, "Unknown (tier 2, no satisfying state)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SampleError {
    #[error("no state satisfying the precondition was found in {0} draws")]
    VacuousPrecondition(u64),
}

/// What the sampler needs to know about the formulas involved.
#[derive(Debug, Clone, Default)]
struct Shape {
    names: BTreeSet<String>,
    partitioned: BTreeSet<String>,
    exposed: BTreeSet<String>,
    defs: Vec<(String, Expr)>,
}

impl Shape {
    fn scan(&mut self, e: &Expr) {
        self.names.extend(e.free_vars());
        for r in e.vec_refs() {
            if r.parts.iter().any(|p| *p != Part::Whole) {
                self.partitioned.insert(r.root.clone());
            }
            if r.mentions_repartition() {
                self.exposed.insert(r.root.clone());
            }
        }
    }

    fn of(ctx: &Context, solve_from: &Predicate, others: &[&Predicate], stmt: Option<&Stmt>) -> Shape {
        let mut shape = Shape::default();
        for p in std::iter::once(solve_from).chain(others.iter().copied()) {
            for e in p.exprs() {
                shape.scan(e);
            }
        }
        if let Some(s) = stmt {
            for_each_expr(s, &mut |e| shape.scan(e));
        }
        for a in &solve_from.conjuncts {
            let Atom::Eq(l, r) = a else { continue };
            for (lhs, rhs) in [(l, r), (r, l)] {
                if let Some(v) = lhs.as_var() {
                    let dependent = ctx.is_dependent(v) || !ctx.contains(v);
                    if dependent && !rhs.mentions_var(v) && !shape.defs.iter().any(|(n, _)| n == v) {
                        shape.defs.push((v.to_string(), rhs.clone()));
                        break;
                    }
                }
            }
        }
        shape
    }
}

fn for_each_expr(s: &Stmt, mut f: &mut dyn FnMut(&Expr)) {
    match s {
        Stmt::Assign { exprs, .. } => exprs.iter().for_each(&mut f),
        Stmt::Seq(a, b) => {
            for_each_expr(a, f);
            for_each_expr(b, f);
        }
        Stmt::While { guard, body } => {
            guard.exprs().for_each(&mut f);
            for_each_expr(body, f);
        }
        Stmt::CounterIncr(e) => f(e),
        Stmt::Skip | Stmt::PartitionInit { .. } | Stmt::Repartition { .. } | Stmt::MergeBack { .. } => {}
    }
}

fn draw(ctx: &Context, shape: &Shape, rng: &mut ChaCha8Rng) -> State {
    let mut s = State::new();
    let mut index_bound = 0;
    for (name, size) in ctx.vectors() {
        let len = rng.gen_range(0..=MAX_LEN);
        let values: Vec<_> = (0..len).map(|_| rat(rng.gen_range(-5..=5))).collect();
        s.bind_vector(&name, Some(&size), values);
        if shape.partitioned.contains(&name) {
            let split = rng.gen_range(0..=len);
            let exposed = (shape.exposed.contains(&name) && len > 0).then(|| rng.gen_range(0..len));
            s.cursors.insert(name.clone(), Cursor { split, exposed });
        }
        index_bound = index_bound.max(len as i64);
    }
    for (name, role) in ctx.scalars() {
        if s.get(name).is_some() {
            continue;
        }
        let v = match role {
            Role::Size => continue,
            Role::Index => rng.gen_range(0..=index_bound),
            Role::In => rng.gen_range(-3..=3),
            Role::Out | Role::Aux | Role::Counter | Role::Hole => rng.gen_range(-5..=5),
        };
        s.set(name, rat(v));
    }
    for name in &shape.names {
        if s.get(name).is_none() && !s.vectors.contains_key(name) && !ctx.contains(name) {
            s.set(name, rat(rng.gen_range(-5..=5)));
        }
    }
    for _ in 0..2 {
        for (v, e) in &shape.defs {
            if let Ok(val) = s.evaluate(e) {
                s.set(v, val);
            }
        }
    }
    s
}

fn rng_for(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// The first drawn state of trial `t` satisfying `pre`.
fn satisfying(ctx: &Context, shape: &Shape, pre: &Predicate, seed: u64, t: u64) -> Option<State> {
    let mut rng = rng_for(seed, t);
    (0..DRAWS_PER_TRIAL)
        .map(|_| draw(ctx, shape, &mut rng))
        .find(|s| pre.holds(s))
}

/// Tier 2 only: searches for a state satisfying `p` but not `q`.
pub fn falsify(ctx: &Context, p: &Predicate, q: &Predicate, cfg: &TrialConfig) -> Verdict {
    let shape = Shape::of(ctx, p, &[q], None);
    let outcomes = par::map_range(cfg.trials, cfg.strategy, |t| {
        satisfying(ctx, &shape, p, cfg.seed, t).map(|s| {
            let ok = q.holds(&s);
            (ok, s)
        })
    });
    if outcomes.iter().all(Option::is_none) {
        return Verdict::Unknown;
    }
    match outcomes.into_iter().flatten().find(|(ok, _)| !ok) {
        Some((_, s)) => Verdict::Falsified { counterexample: s },
        None => Verdict::Tested { trials: cfg.trials, seed: cfg.seed },
    }
}

/// `p ⇒ q`, proved syntactically when possible and tested otherwise.
pub fn implies(ctx: &Context, p: &Predicate, q: &Predicate, cfg: &TrialConfig) -> Verdict {
    if entail::entails(ctx, p, q) {
        return Verdict::Proved;
    }
    falsify(ctx, p, q, cfg)
}

fn triple_holds(pre_state: &State, s: &Stmt, post: &Predicate) -> bool {
    let mut st = pre_state.clone();
    s.exec(&mut st).is_ok() && post.holds(&st)
}

/// Tests `{pre} s {post}` on random states satisfying `pre`. A run that
/// fails to execute counts as a violation.
pub fn hoare_test(
    ctx: &Context,
    pre: &Predicate,
    s: &Stmt,
    post: &Predicate,
    cfg: &TrialConfig,
) -> Result<Verdict, SampleError> {
    let shape = Shape::of(ctx, pre, &[post], Some(s));
    let outcomes = par::map_range(cfg.trials, cfg.strategy, |t| {
        satisfying(ctx, &shape, pre, cfg.seed, t).map(|st| (triple_holds(&st, s, post), st))
    });
    if outcomes.iter().all(Option::is_none) {
        return Err(SampleError::VacuousPrecondition(cfg.trials * DRAWS_PER_TRIAL as u64));
    }
    Ok(match outcomes.into_iter().flatten().find(|(ok, _)| !ok) {
        Some((_, st)) => Verdict::Falsified { counterexample: st },
        None => Verdict::Tested { trials: cfg.trials, seed: cfg.seed },
    })
}

/// True if `state` still shows `p` holding and `q` failing.
pub fn replay_implication(p: &Predicate, q: &Predicate, state: &State) -> bool {
    p.holds(state) && !q.holds(state)
}

/// True if `state` satisfies `pre` and running `s` from it breaks `post`.
pub fn replay_hoare(pre: &Predicate, s: &Stmt, post: &Predicate, state: &State) -> bool {
    pre.holds(state) && !triple_holds(state, s, post)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> Context {
        Context::default()
            .with_vector("a", "n")
            .with("x", Role::In)
            .with("y", Role::Out)
            .with("k", Role::Index)
    }

    fn v(n: &str) -> Expr {
        Expr::var(n)
    }

    fn inv5() -> Predicate {
        let body = Expr::elem("a", v("i")) * v("x").pow(v("i") - v("k"));
        Predicate::all([
            Atom::eq(v("y"), Expr::sum("i", v("k"), v("n"), body)),
            Atom::le(Expr::int(0), v("k")),
            Atom::le(v("k"), v("n")),
        ])
    }

    #[test]
    fn wrong_update_is_falsified_and_replayable() {
        let p = Predicate::all([inv5().conjuncts[0].clone(), Atom::lt(Expr::int(0), v("k"))]);
        let q = Predicate::atom(Atom::eq(v("y"), Expr::elem("a", v("k")) + v("y") * v("x")));
        let cfg = TrialConfig::default();
        let Verdict::Falsified { counterexample } = implies(&ctx(), &p, &q, &cfg) else {
            panic!("expected a counterexample");
        };
        assert!(replay_implication(&p, &q, &counterexample));
    }

    #[test]
    fn horner_body_is_tested() {
        let pre = inv5().and_atom(Atom::lt(Expr::int(0), v("k")));
        let k1 = v("k") - Expr::int(1);
        let body = Stmt::seq(vec![
            Stmt::assign("y", Expr::elem("a", k1.clone()) + v("y") * v("x")),
            Stmt::assign("k", k1),
        ]);
        let verdict = hoare_test(&ctx(), &pre, &body, &inv5(), &TrialConfig::default()).unwrap();
        assert_eq!(verdict, Verdict::Tested { trials: 1000, seed: 42 });
    }

    #[test]
    fn vacuous_precondition() {
        let pre = Predicate::atom(Atom::lt(Expr::int(1), Expr::int(0)));
        let r = hoare_test(&ctx(), &pre, &Stmt::Skip, &Predicate::truth(), &TrialConfig::new(5, 1));
        assert_eq!(r, Err(SampleError::VacuousPrecondition(500)));
    }

    #[test]
    fn deterministic_across_strategies() {
        let p = Predicate::atom(Atom::le(Expr::int(0), v("k")));
        let q = Predicate::atom(Atom::le(v("k"), Expr::int(3)));
        let seq = TrialConfig { strategy: Strategy::Sequential, ..TrialConfig::default() };
        let par = TrialConfig { strategy: Strategy::Parallel, ..TrialConfig::default() };
        let a = falsify(&ctx(), &p, &q, &seq);
        assert!(a.is_falsified());
        assert_eq!(a, falsify(&ctx(), &p, &q, &par));
    }
}
