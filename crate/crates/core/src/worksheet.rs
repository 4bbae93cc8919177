//! The eight-step worksheet and its mechanical completion.
//!
//! Given a specification and a chosen invariant, the remaining steps are
//! filled in order: guard, initialization, traversal, the states before and
//! after the update, and finally the update itself, read off from the
//! `ℰ`-form of the state after it.

use std::collections::BTreeSet;
use std::fmt;

use num::Signed;
use thiserror::Error;

use crate::entail::entails;
use crate::expr::{Expr, Part, VecRef};
use crate::invariants::{
    candidate_context, enumerate_invariants, find_guard, guard_grammar, mode_post, select, Direction,
    InvariantError, Mode,
};
use crate::normal::{nf_in, normalize_in, Factor, Mono, Nf, Sizes};
use crate::predicate::{Atom, Predicate};
use crate::spec::{Context, OperationSpec, Role};
use crate::stmt::{Side, Stmt, COUNTER};
use crate::wp::{forward_repartition, wp, wp_symbolic_assign, WpError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Precondition,
    Postcondition,
    Invariant,
    Guard,
    Initialization,
    Traversal,
    BeforeUpdate,
    AfterUpdate,
    Update,
}

impl Slot {
    pub const ALL: [Slot; 9] = [
        Slot::Precondition,
        Slot::Postcondition,
        Slot::Invariant,
        Slot::Guard,
        Slot::Initialization,
        Slot::Traversal,
        Slot::BeforeUpdate,
        Slot::AfterUpdate,
        Slot::Update,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Slot::Precondition => "pre",
            Slot::Postcondition => "post",
            Slot::Invariant => "invariant",
            Slot::Guard => "guard",
            Slot::Initialization => "init",
            Slot::Traversal => "traversal",
            Slot::BeforeUpdate => "state",
            Slot::AfterUpdate => "obligation",
            Slot::Update => "update",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Slot> {
        Slot::ALL.into_iter().find(|k| k.keyword() == s)
    }

    /// The worksheet step this slot belongs to.
    pub fn label(self) -> &'static str {
        match self {
            Slot::Precondition => "1a",
            Slot::Postcondition => "1b",
            Slot::Invariant => "2",
            Slot::Guard => "3",
            Slot::Initialization => "4",
            Slot::Traversal => "5",
            Slot::BeforeUpdate => "6",
            Slot::AfterUpdate => "7",
            Slot::Update => "8",
        }
    }

    pub fn title(self, mode: Mode) -> &'static str {
        match (self, mode) {
            (Slot::Precondition, _) => "Precondition",
            (Slot::Postcondition, _) => "Postcondition",
            (Slot::Invariant, _) => "Loop invariant",
            (Slot::Guard, _) => "Loop guard",
            (Slot::Initialization, _) => "Initialization",
            (Slot::Traversal, _) => "Traversal",
            (Slot::BeforeUpdate, Mode::Indexed) => "State after the update, before the index moves",
            (Slot::BeforeUpdate, Mode::Flame) => "State after repartitioning",
            (Slot::AfterUpdate, _) => "Condition on the update",
            (Slot::Update, _) => "Update",
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// The shape of a solved update `v := ℰ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Template {
    /// `v := c + v·e`
    Horner,
    /// `v := v + e`
    Accumulate,
    /// `v := v·e`
    Scale,
    /// `v := v / e`
    Divide,
    /// `v := v`
    Identity,
}

impl Template {
    pub fn name(self) -> &'static str {
        match self {
            Template::Horner => "horner",
            Template::Accumulate => "accumulate",
            Template::Scale => "scale",
            Template::Divide => "divide",
            Template::Identity => "identity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Worksheet {
    pub spec: OperationSpec,
    pub mode: Mode,
    pub candidate: usize,
    pub invariant: Predicate,
    pub auxiliaries: Vec<String>,
    pub direction: Direction,
    pub repair: Option<String>,
    /// Extra hypotheses the update relies on, such as a nonzero divisor.
    pub side_conditions: Vec<Atom>,
    pub postcondition: Predicate,
    pub guard: Option<Predicate>,
    pub init: Option<Stmt>,
    /// Statements before and after the update in the loop body.
    pub traversal: Option<(Stmt, Stmt)>,
    /// Step 6: the state after repartitioning (Flame) or the state the
    /// update must reach before the index moves (indexed).
    pub before: Option<Predicate>,
    /// Step 7: that requirement with the update's unknowns `ℰ` in place.
    pub after: Option<Predicate>,
    pub update: Option<Stmt>,
    pub cost_increment: Option<Expr>,
    pub cost_invariant: Option<Predicate>,
    pub derived: BTreeSet<Slot>,
}

impl Worksheet {
    /// A worksheet with only the given slots filled in.
    pub fn start(spec: &OperationSpec, mode: Mode, candidate: usize) -> Result<Worksheet, DeriveError> {
        let cands = enumerate_invariants(spec, mode)?;
        let cand = select(&cands, candidate)?;
        Ok(Worksheet {
            spec: spec.clone(),
            mode,
            candidate,
            invariant: cand.predicate.clone(),
            auxiliaries: cand.auxiliaries.iter().map(|(z, _)| z.clone()).collect(),
            direction: cand.direction,
            repair: cand.repair.clone(),
            side_conditions: Vec::new(),
            postcondition: mode_post(spec, mode)?,
            guard: None,
            init: None,
            traversal: None,
            before: None,
            after: None,
            update: None,
            cost_increment: None,
            cost_invariant: None,
            derived: BTreeSet::new(),
        })
    }

    pub fn context(&self) -> Context {
        let ctx = self.auxiliaries.iter().fold(self.spec.context(), |c, z| c.with(z, Role::Aux));
        if self.cost_increment.is_some() {
            ctx.with(COUNTER, Role::Counter)
        } else {
            ctx
        }
    }

    pub fn sizes(&self) -> Sizes {
        self.context().sizes()
    }

    pub fn is_filled(&self, slot: Slot) -> bool {
        match slot {
            Slot::Precondition | Slot::Postcondition | Slot::Invariant => true,
            Slot::Guard => self.guard.is_some(),
            Slot::Initialization => self.init.is_some(),
            Slot::Traversal => self.traversal.is_some(),
            Slot::BeforeUpdate => self.before.is_some(),
            Slot::AfterUpdate => self.after.is_some(),
            Slot::Update => self.update.is_some(),
        }
    }

    pub fn missing(&self) -> Vec<Slot> {
        [Slot::Guard, Slot::Initialization, Slot::Traversal, Slot::Update]
            .into_iter()
            .filter(|s| !self.is_filled(*s))
            .collect()
    }

    /// The loop body without cost instrumentation.
    pub fn body(&self) -> Option<Stmt> {
        let (before, after) = self.traversal.clone()?;
        Some(Stmt::seq(vec![before, self.update.clone()?, after]))
    }

    pub fn program(&self) -> Option<Stmt> {
        Some(Stmt::seq(vec![
            self.init.clone()?,
            Stmt::While { guard: self.guard.clone()?, body: Box::new(self.body()?) },
        ]))
    }

    /// The program with `C += e` at the end of the body.
    pub fn instrumented(&self) -> Option<Stmt> {
        let incr = self.cost_increment.clone()?;
        let body = Stmt::seq(vec![self.body()?, Stmt::CounterIncr(incr)]);
        Some(Stmt::seq(vec![
            self.init.clone()?,
            Stmt::While { guard: self.guard.clone()?, body: Box::new(body) },
        ]))
    }

    /// The index variable or the traversed vector's top part, whichever
    /// the mode moves.
    pub fn variant(&self) -> Expr {
        let (a, n) = self.spec.vector();
        match (self.mode, self.direction) {
            (Mode::Indexed, Direction::LastToFirst) => Expr::var(index_of(&self.spec)),
            (Mode::Indexed, Direction::FirstToLast) => Expr::var(n) - Expr::var(index_of(&self.spec)),
            (Mode::Flame, Direction::LastToFirst) => Expr::len(VecRef::part(a, Part::Top)),
            (Mode::Flame, Direction::FirstToLast) => Expr::len(VecRef::part(a, Part::Bottom)),
        }
    }
}

pub(crate) fn index_of(spec: &OperationSpec) -> &str {
    spec.index().unwrap_or("k")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeriveError {
    #[error(transparent)]
    Invariant(#[from] InvariantError),
    #[error("no guard in the grammar yields the postcondition")]
    NoGuard,
    #[error(transparent)]
    Wp(#[from] WpError),
    #[error("could not isolate `{0}` in the state after the update")]
    UnsolvedHole(String),
    #[error("no update template matches `{target} := {expr}`")]
    NoTemplateMatch { target: String, expr: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub worksheet: Worksheet,
    pub templates: Vec<(String, Template)>,
}

/// Equations `v = e` of the hypothesis usable to fold `e` back into `v`.
fn definitions(ctx: &Context, hyp: &Predicate, sizes: &Sizes) -> Vec<(String, Nf)> {
    hyp.conjuncts
        .iter()
        .filter_map(|a| match a {
            Atom::Eq(l, r) => {
                let v = l.as_var()?;
                (ctx.is_dependent(v) && !r.mentions_var(v)).then(|| (v.to_string(), nf_in(r, sizes)))
            }
            _ => None,
        })
        .collect()
}

/// Replaces occurrences of each definition's right-hand side by its name.
fn fold_definitions(nf: &Nf, defs: &[(String, Nf)]) -> Nf {
    let mut cur = nf.clone();
    for (v, d) in defs {
        if let Some((m, c)) = d.single_term() {
            if m.is_unit() {
                continue;
            }
            let mut next = Nf::zero();
            for (mono, coef) in cur.terms() {
                let t = match mono.divide(m) {
                    Some(rest) => Nf::term(rest, coef / c).mul(&Nf::var(v)),
                    None => Nf::term(mono.clone(), coef.clone()),
                };
                next = next.add(&t);
            }
            cur = next;
        } else if d.terms().count() > 1 {
            let contained = d
                .terms()
                .all(|(m, c)| cur.terms().any(|(m2, c2)| m2 == m && c2 == c));
            if contained {
                cur = cur.sub(d).add(&Nf::var(v));
            }
        }
    }
    cur
}

fn needs_loop(nf: &Nf) -> bool {
    nf.any_factor(&|f| matches!(f, Factor::Sum { .. } | Factor::Poly(..)))
}

fn has_negative_power(m: &Mono) -> bool {
    m.factors().any(|(f, e)| {
        matches!(f, Factor::Recip(_)) || e.as_const().is_some_and(|c| c.is_negative())
    })
}

pub fn classify(nf: &Nf, v: &str) -> Option<Template> {
    let var = Mono::single(Factor::Var(v.to_string()));
    let mut with_v = Vec::new();
    let mut others = 0;
    for (m, c) in nf.terms() {
        if !m.mentions(v) {
            others += 1;
            continue;
        }
        if m.exponent_of(&Factor::Var(v.to_string())) != Some(&Nf::one()) {
            return None;
        }
        let rest = m.divide(&var)?;
        if rest.mentions(v) {
            return None;
        }
        with_v.push((rest, c.clone()));
    }
    let [(rest, c)] = with_v.as_slice() else { return None };
    let unit = rest.is_unit() && *c == num::One::one();
    Some(match (others, unit) {
        (0, true) => Template::Identity,
        (0, false) if has_negative_power(rest) => Template::Divide,
        (0, false) => Template::Scale,
        (_, true) => Template::Accumulate,
        (_, false) => Template::Horner,
    })
}

/// Nonzero conditions for every base raised to a negative power.
fn divisors(nf: &Nf) -> Vec<Atom> {
    let mut out = Vec::new();
    for (m, _) in nf.terms() {
        for (f, e) in m.factors() {
            let base = match f {
                Factor::Recip(b) => Some(b.to_expr()),
                Factor::Var(x) if e.as_const().is_some_and(|c| c.is_negative()) => Some(Expr::var(x)),
                _ => None,
            };
            if let Some(b) = base {
                let atom = Atom::Ne(b, Expr::int(0));
                if !out.contains(&atom) {
                    out.push(atom);
                }
            }
        }
    }
    out
}

struct Solved {
    stmt: Stmt,
    form: Predicate,
    templates: Vec<(String, Template)>,
    side: Vec<Atom>,
}

/// Solves `targets := ℰ` so that `goal` holds afterwards, folding the
/// hypothesis' definitions into each `ℰ`.
fn solve(
    ctx: &Context,
    targets: &[String],
    goal: &Predicate,
    hyp: &Predicate,
    classify_updates: bool,
) -> Result<Solved, DeriveError> {
    let sizes = ctx.sizes();
    let (sym, holes) = wp_symbolic_assign(targets, goal)?;
    let defs = definitions(ctx, hyp, &sizes);
    let is_hole = |e: &Expr| holes.iter().any(|h| e.mentions_var(h));
    let mut pairs = Vec::new();
    let mut templates = Vec::new();
    let mut side = Vec::new();
    let mut form = Predicate::truth();
    for (target, hole) in targets.iter().zip(&holes) {
        let rhs = sym
            .conjuncts
            .iter()
            .find_map(|a| match a {
                Atom::Eq(l, r) if l.as_var() == Some(hole.as_str()) && !is_hole(r) => Some(r.clone()),
                Atom::Eq(l, r) if r.as_var() == Some(hole.as_str()) && !is_hole(l) => Some(l.clone()),
                _ => None,
            })
            .ok_or_else(|| DeriveError::UnsolvedHole(hole.clone()))?;
        let nf = nf_in(&rhs, &sizes);
        form = form.and_atom(Atom::eq(Expr::var(hole), nf.to_expr()));
        let folded = fold_definitions(&nf, &defs);
        let expr = folded.to_expr();
        let bad = || DeriveError::NoTemplateMatch { target: target.clone(), expr: crate::print::ascii(&expr) };
        if needs_loop(&folded) {
            return Err(bad());
        }
        if classify_updates {
            templates.push((target.clone(), classify(&folded, target).ok_or_else(bad)?));
        }
        side.extend(divisors(&folded));
        pairs.push((target.clone(), expr));
    }
    for a in &sym.conjuncts {
        if !a.sides().is_some_and(|(l, r)| is_hole(l) || is_hole(r)) {
            form = form.and(&Predicate::atom(a.clone()).normalize_in(&sizes));
        }
    }
    Ok(Solved { stmt: Stmt::assign_many(pairs), form, templates, side })
}

fn traversal(spec: &OperationSpec, mode: Mode, dir: Direction) -> (Stmt, Stmt) {
    match mode {
        Mode::Indexed => {
            let k = index_of(spec);
            let step = match dir {
                Direction::FirstToLast => Expr::var(k) + Expr::int(1),
                Direction::LastToFirst => Expr::var(k) - Expr::int(1),
            };
            (Stmt::Skip, Stmt::assign(k, step))
        }
        Mode::Flame => {
            let a = spec.vector().0.to_string();
            let from = match dir {
                Direction::FirstToLast => Side::Top,
                Direction::LastToFirst => Side::Bottom,
            };
            (Stmt::Repartition { vector: a.clone(), from }, Stmt::MergeBack { vector: a, from })
        }
    }
}

fn start_stmt(spec: &OperationSpec, mode: Mode, dir: Direction) -> Stmt {
    match mode {
        Mode::Indexed => {
            let value = match dir {
                Direction::FirstToLast => Expr::int(0),
                Direction::LastToFirst => Expr::var(spec.vector().1),
            };
            Stmt::assign(index_of(spec), value)
        }
        Mode::Flame => {
            let empty = match dir {
                Direction::FirstToLast => Side::Top,
                Direction::LastToFirst => Side::Bottom,
            };
            Stmt::PartitionInit { vector: spec.vector().0.to_string(), empty }
        }
    }
}

/// The state just before the update: the invariant and guard, restated
/// over the exposed regions when the body starts with a repartition.
/// Its equations are what the update may fold back into variables.
pub fn state_before(first: &Stmt, inv_and_guard: &Predicate) -> Predicate {
    match first {
        Stmt::Repartition { vector, from } => forward_repartition(vector, *from, inv_and_guard),
        _ => inv_and_guard.clone(),
    }
}

/// `p` without the conjuncts that hold in every state.
fn drop_trivial(ctx: &Context, p: &Predicate) -> Predicate {
    Predicate::all(
        p.conjuncts
            .iter()
            .filter(|a| !entails(ctx, &Predicate::truth(), &Predicate::atom((*a).clone())))
            .cloned(),
    )
}

pub fn derive(spec: &OperationSpec, mode: Mode, candidate: usize) -> Result<Derivation, DeriveError> {
    let mut ws = Worksheet::start(spec, mode, candidate)?;
    let cands = enumerate_invariants(spec, mode)?;
    let cand = select(&cands, candidate)?;
    let ctx = candidate_context(spec, cand);
    let sizes = ctx.sizes();
    let inv = ws.invariant.clone();

    let guard = find_guard(&ctx, &guard_grammar(spec, mode), &inv, &ws.postcondition).ok_or(DeriveError::NoGuard)?;
    ws.guard = Some(guard.clone());

    let mut targets = vec![spec.output().to_string()];
    targets.extend(ws.auxiliaries.iter().cloned());

    let start = start_stmt(spec, mode, ws.direction);
    let init = solve(&ctx, &targets, &wp(&start, &inv)?, &spec.pre, false)?;
    ws.init = Some(Stmt::seq(vec![init.stmt, start]));

    let (first, last) = traversal(spec, mode, ws.direction);
    let hyp = drop_trivial(&ctx, &state_before(&first, &inv.and(&guard)).normalize_in(&sizes));
    let goal = wp(&last, &inv)?;
    let update = solve(&ctx, &targets, &goal, &hyp, true)?;
    ws.before = Some(match mode {
        Mode::Indexed => goal.normalize_in(&sizes),
        Mode::Flame => hyp,
    });
    ws.traversal = Some((first, last));
    ws.after = Some(update.form);
    ws.update = Some(update.stmt);
    ws.side_conditions = init.side;
    for a in update.side {
        if !ws.side_conditions.contains(&a) {
            ws.side_conditions.push(a);
        }
    }
    ws.derived = [
        Slot::Guard,
        Slot::Initialization,
        Slot::Traversal,
        Slot::BeforeUpdate,
        Slot::AfterUpdate,
        Slot::Update,
    ]
    .into_iter()
    .collect();
    Ok(Derivation { worksheet: ws, templates: update.templates })
}

/// `normalize_in` for the update's right-hand sides, used when comparing
/// derived and hand-written worksheets.
pub fn normalized_update(ws: &Worksheet) -> Option<Vec<(String, Expr)>> {
    let sizes = ws.sizes();
    match ws.update.as_ref()? {
        Stmt::Assign { targets, exprs } => Some(
            targets
                .iter()
                .cloned()
                .zip(exprs.iter().map(|e| normalize_in(e, &sizes)))
                .collect(),
        ),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_spec, parse_stmt};

    const POLYEVAL: &str = "op polyeval
var y : scalar, out
var a : vector(n), in
var x : scalar, in
var k : scalar, index
pre: 0 <= n
post: y = sum(i, 0, n-1, a[i] * x^i)
";

    fn derived(mode: Mode, id: usize) -> Derivation {
        derive(&parse_spec(POLYEVAL).unwrap(), mode, id).unwrap()
    }

    #[test]
    fn indexed_horner() {
        let d = derived(Mode::Indexed, 5);
        let ws = &d.worksheet;
        assert_eq!(ws.guard, Some(Predicate::atom(Atom::lt(Expr::int(0), Expr::var("k")))));
        assert_eq!(ws.init, Some(parse_stmt("y := 0; k := n").unwrap()));
        assert_eq!(ws.update, Some(parse_stmt("y := a[k - 1] + y * x").unwrap()));
        assert_eq!(d.templates, vec![("y".to_string(), Template::Horner)]);
    }

    #[test]
    fn flame_horner() {
        let d = derived(Mode::Flame, 5);
        let ws = &d.worksheet;
        assert_eq!(ws.init, Some(parse_stmt("y := 0; partition a empty-bottom").unwrap()));
        assert_eq!(ws.update, Some(parse_stmt("y := a.1 + y * x").unwrap()));
        assert_eq!(d.templates, vec![("y".to_string(), Template::Horner)]);
    }

    #[test]
    fn tracked_power_uses_division() {
        let d = derived(Mode::Indexed, 4);
        assert_eq!(
            d.templates,
            vec![("y".to_string(), Template::Accumulate), ("z".to_string(), Template::Divide)]
        );
        assert_eq!(d.worksheet.side_conditions, vec![Atom::Ne(Expr::var("x"), Expr::int(0))]);
    }

    #[test]
    fn every_valid_candidate_derives() {
        for mode in [Mode::Indexed, Mode::Flame] {
            for id in 1..=6 {
                let d = derived(mode, id);
                assert!(d.worksheet.missing().is_empty(), "{mode:?} {id}");
            }
        }
    }
}
