//! Splitting the postcondition and enumerating loop invariants.
//!
//! For `y = Σ_{0<=i<n} g(i) x^i` the split at `k` is
//!
//! ```text
//! y = Σ_{0<=i<k} g(i) x^i + (Σ_{k<=i<n} g(i) x^(i-k)) x^k
//! ```
//!
//! and, over a partitioned vector, `π(a, χ) = π(a_T, χ) + π(a_B, χ) χ^m(a_T)`.
//! Candidates pick parts of that right-hand side, optionally with an
//! auxiliary `z` tracking the power.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::entail::{contradictory, entails};
use crate::expr::{fresh_name, Expr, Part, VecRef};
use crate::predicate::{Atom, Predicate};
use crate::spec::{Context, OperationSpec, Role};
use crate::state::{rat, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Indexed,
    Flame,
}

impl Mode {
    pub fn keyword(self) -> &'static str {
        match self {
            Mode::Indexed => "indexed",
            Mode::Flame => "flame",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Mode> {
        match s {
            "indexed" => Some(Mode::Indexed),
            "flame" => Some(Mode::Flame),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    FirstToLast,
    LastToFirst,
}

impl Direction {
    pub fn keyword(self) -> &'static str {
        match self {
            Direction::FirstToLast => "first-to-last",
            Direction::LastToFirst => "last-to-first",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Direction> {
        match s {
            "first-to-last" => Some(Direction::FirstToLast),
            "last-to-first" => Some(Direction::LastToFirst),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    WellFormedness(String),
    NonVacuity,
    Completability,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::WellFormedness(why) => write!(f, "well-formedness: {why}"),
            Rejection::NonVacuity => write!(f, "non-vacuity: does not constrain the output"),
            Rejection::Completability => write!(f, "completability: no guard yields the postcondition"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validity {
    Valid,
    Rejected(Rejection),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantCandidate {
    pub id: usize,
    pub label: &'static str,
    pub predicate: Predicate,
    /// Auxiliary variables and the values the invariant pins them to.
    pub auxiliaries: Vec<(String, Expr)>,
    pub direction: Direction,
    pub validity: Validity,
    pub repair: Option<String>,
}

impl InvariantCandidate {
    pub fn is_valid(&self) -> bool {
        self.validity == Validity::Valid
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvariantError {
    #[error("the postcondition is not a single bounded sum `out = sum(i, 0, n-1, ...)`: {0}")]
    UnsplittableForm(String),
    #[error("the split identity failed numerically at {0}")]
    SplitMismatch(String),
    #[error("candidate {0} does not exist")]
    NoSuchCandidate(usize),
    #[error("candidate {id} was rejected ({reason})")]
    RejectedCandidate { id: usize, reason: String },
}

/// The recognized shape `out = Σ_{i=0}^{n-1} g(i) · x^i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostForm {
    pub output: String,
    pub var: String,
    pub body: Expr,
    pub vector: String,
    pub size: String,
    /// `(g(i), x)` when the body has the form `g(i) · x^i`.
    pub power: Option<(Expr, String)>,
}

impl PostForm {
    /// The body with its power shifted down by `k`: `g(i) · x^(i-k)`.
    fn deferred(&self, k: &Expr) -> Option<Expr> {
        let (g, x) = self.power.as_ref()?;
        Some(g.clone() * Expr::var(x).pow(Expr::var(&self.var) - k.clone()))
    }

    fn point(&self) -> Option<&str> {
        self.power.as_ref().map(|(_, x)| x.as_str())
    }

    /// True when `g(i)` is exactly `a[i]`, so the sum is `π(a, x)`.
    fn is_polynomial(&self) -> bool {
        matches!(&self.power, Some((Expr::Elem { array, index }, _))
            if *array == self.vector && index.as_var() == Some(self.var.as_str()))
    }
}

fn split_power(body: &Expr, var: &str) -> Option<(Expr, String)> {
    let Expr::Mul(l, r) = body else { return None };
    let is_pow = |e: &Expr| match e {
        Expr::Pow(b, ex) if ex.as_var() == Some(var) => b.as_var().map(str::to_string),
        _ => None,
    };
    if let Some(x) = is_pow(r) {
        if !l.mentions_var(&x) {
            return Some(((**l).clone(), x));
        }
    }
    if let Some(x) = is_pow(l) {
        if !r.mentions_var(&x) {
            return Some(((**r).clone(), x));
        }
    }
    None
}

pub fn analyze_post(spec: &OperationSpec) -> Result<PostForm, InvariantError> {
    let bad = |why: &str| InvariantError::UnsplittableForm(why.to_string());
    let [Atom::Eq(lhs, rhs)] = spec.post.conjuncts.as_slice() else {
        return Err(bad("expected a single equation"));
    };
    let output = spec.output();
    if lhs.as_var() != Some(output) {
        return Err(bad("the left-hand side must be the output"));
    }
    let Expr::Sum { var, lo, hi, body } = rhs else {
        return Err(bad("the right-hand side must be a sum"));
    };
    let (vector, size) = spec.vector();
    if !lo.is_int(0) || hi.as_var() != Some(size) {
        return Err(bad("the sum must range over the whole vector"));
    }
    let reads_at_var = body.any(&|e| {
        matches!(e, Expr::Elem { array, index } if array == vector && index.as_var() == Some(var.as_str()))
    });
    if !reads_at_var {
        return Err(bad("the summand must read the vector at the summation index"));
    }
    Ok(PostForm {
        output: output.to_string(),
        var: var.clone(),
        body: (**body).clone(),
        vector: vector.to_string(),
        size: size.to_string(),
        power: split_power(body, var),
    })
}

/// The postcondition as the loop must establish it in `mode`.
pub fn mode_post(spec: &OperationSpec, mode: Mode) -> Result<Predicate, InvariantError> {
    let form = analyze_post(spec)?;
    match mode {
        Mode::Indexed => Ok(spec.post.clone()),
        Mode::Flame => {
            if !form.is_polynomial() {
                return Err(InvariantError::UnsplittableForm(
                    "partitioned derivations need a summand of the form a[i] * x^i".into(),
                ));
            }
            let x = form.point().expect("polynomial form has a point");
            Ok(Predicate::atom(Atom::eq(
                Expr::var(&form.output),
                Expr::poly(VecRef::whole(&form.vector), Expr::var(x)),
            )))
        }
    }
}

/// `out = left + right · power`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIdentity {
    pub output: String,
    pub left: Expr,
    pub right: Expr,
    pub power: Expr,
    pub range: Vec<Atom>,
}

impl SplitIdentity {
    pub fn rhs(&self) -> Expr {
        self.left.clone() + self.right.clone() * self.power.clone()
    }

    pub fn as_predicate(&self) -> Predicate {
        let mut atoms = vec![Atom::eq(Expr::var(&self.output), self.rhs())];
        atoms.extend(self.range.iter().cloned());
        Predicate::all(atoms)
    }
}

fn index_name(spec: &OperationSpec) -> String {
    spec.index().map(str::to_string).unwrap_or_else(|| "k".to_string())
}

fn range_atoms(k: &Expr, size: &str) -> Vec<Atom> {
    vec![Atom::le(Expr::int(0), k.clone()), Atom::le(k.clone(), Expr::var(size))]
}

pub fn split_postcondition(spec: &OperationSpec, mode: Mode) -> Result<SplitIdentity, InvariantError> {
    let form = analyze_post(spec)?;
    let identity = match mode {
        Mode::Indexed => {
            let kn = index_name(spec);
            let k = Expr::var(&kn);
            let n = Expr::var(&form.size);
            let left = Expr::sum(&form.var, Expr::int(0), k.clone(), form.body.clone());
            let (right, power) = match (form.deferred(&k), form.point()) {
                (Some(d), Some(x)) => (Expr::sum(&form.var, k.clone(), n, d), Expr::var(x).pow(k.clone())),
                _ => (Expr::sum(&form.var, k.clone(), n, form.body.clone()), Expr::int(1)),
            };
            SplitIdentity { output: form.output.clone(), left, right, power, range: range_atoms(&k, &form.size) }
        }
        Mode::Flame => {
            mode_post(spec, mode)?;
            let x = Expr::var(form.point().expect("checked by mode_post"));
            let a = &form.vector;
            SplitIdentity {
                output: form.output.clone(),
                left: Expr::poly(VecRef::part(a, Part::Top), x.clone()),
                right: Expr::poly(VecRef::part(a, Part::Bottom), x.clone()),
                power: x.pow(Expr::len(VecRef::part(a, Part::Top))),
                range: Vec::new(),
            }
        }
    };
    verify_split(spec, &form, mode, &identity)?;
    Ok(identity)
}

/// Checks the identity on random vectors at every split point.
fn verify_split(spec: &OperationSpec, form: &PostForm, mode: Mode, id: &SplitIdentity) -> Result<(), InvariantError> {
    let Atom::Eq(_, whole) = &spec.post.conjuncts[0] else { unreachable!() };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let k = index_name(spec);
    for _ in 0..40 {
        let len = rng.gen_range(0..=8usize);
        let mut s = State::new();
        let values = (0..len).map(|_| rat(rng.gen_range(-5..=5))).collect();
        s.bind_vector(&form.vector, Some(&form.size), values);
        for (name, role) in spec.context().scalars() {
            if role == Role::In {
                s.set(name, rat(rng.gen_range(-3..=3)));
            }
        }
        for split in 0..=len {
            let mut st = s.clone();
            match mode {
                Mode::Indexed => st.set(&k, rat(split as i64)),
                Mode::Flame => {
                    st = st.with_cursor(&form.vector, split, None);
                }
            }
            let lhs = st.evaluate(&id.rhs());
            let rhs = st.evaluate(whole);
            if lhs.is_err() || lhs != rhs {
                return Err(InvariantError::SplitMismatch(st.to_string()));
            }
        }
    }
    Ok(())
}

/// Context for a candidate: the spec's names plus its auxiliaries.
pub fn candidate_context(spec: &OperationSpec, cand: &InvariantCandidate) -> Context {
    cand.auxiliaries
        .iter()
        .fold(spec.context(), |ctx, (z, _)| ctx.with(z, Role::Aux))
}

fn aux_name(spec: &OperationSpec) -> String {
    let taken: std::collections::BTreeSet<String> = spec.vars.iter().map(|v| v.name.clone()).collect();
    if taken.contains("z") {
        fresh_name("z", &taken)
    } else {
        "z".to_string()
    }
}

/// Guards tried, in order of preference.
pub fn guard_grammar(spec: &OperationSpec, mode: Mode) -> Vec<Predicate> {
    let (a, n) = spec.vector();
    let atoms = match mode {
        Mode::Indexed => {
            let k = Expr::var(&index_name(spec));
            vec![Atom::lt(Expr::int(0), k.clone()), Atom::lt(k, Expr::var(n))]
        }
        Mode::Flame => {
            let m = |p| Expr::len(VecRef::part(a, p));
            vec![
                Atom::lt(m(Part::Bottom), m(Part::Whole)),
                Atom::lt(m(Part::Top), m(Part::Whole)),
                Atom::lt(Expr::int(0), m(Part::Top)),
                Atom::lt(Expr::int(0), m(Part::Bottom)),
            ]
        }
    };
    atoms.into_iter().map(Predicate::atom).collect()
}

/// The weakest guard `G` of the grammar for which `inv ∧ ¬G ⇒ post` is
/// proved. Guards whose exit condition contradicts the invariant are
/// skipped.
pub fn find_guard(ctx: &Context, grammar: &[Predicate], inv: &Predicate, post: &Predicate) -> Option<Predicate> {
    let proved: Vec<&Predicate> = grammar
        .iter()
        .filter(|g| {
            let Some(not_g) = g.negate_guard() else { return false };
            let exit = inv.and(&not_g);
            !contradictory(ctx, &exit) && entails(ctx, &exit, post)
        })
        .collect();
    proved
        .iter()
        .find(|g| proved.iter().all(|h| entails(ctx, h, g)))
        .or(proved.first())
        .map(|g| (*g).clone())
}

struct Draft {
    label: &'static str,
    output_rhs: Expr,
    with_aux: bool,
}

fn drafts(spec: &OperationSpec, form: &PostForm, mode: Mode) -> Vec<Draft> {
    let d = |label, output_rhs, with_aux| Draft { label, output_rhs, with_aux };
    match mode {
        Mode::Indexed => {
            let k = Expr::var(&index_name(spec));
            let n = Expr::var(&form.size);
            let through_k = Expr::sum(&form.var, Expr::int(0), k.clone() + Expr::int(1), form.body.clone());
            let right = Expr::sum(&form.var, k.clone(), n.clone(), form.body.clone());
            let mut out = vec![
                d("left partial sum", through_k.clone(), false),
                d("right partial sum", right.clone(), false),
                d("left partial sum, power tracked in z", through_k, true),
                d("right partial sum, power tracked in z", right, true),
            ];
            if let Some(def) = form.deferred(&k) {
                let deferred = Expr::sum(&form.var, k, n, def);
                out.push(d("right partial sum, power deferred", deferred.clone(), false));
                out.push(d("right partial sum, power deferred and tracked in z", deferred, true));
            }
            out.push(d("empty selection", Expr::int(0), false));
            out
        }
        Mode::Flame => {
            let x = Expr::var(form.point().expect("flame mode has a point"));
            let a = &form.vector;
            let top = Expr::poly(VecRef::part(a, Part::Top), x.clone());
            let bottom = Expr::poly(VecRef::part(a, Part::Bottom), x.clone());
            let shifted = bottom.clone() * x.pow(Expr::len(VecRef::part(a, Part::Top)));
            vec![
                d("top part", top.clone(), false),
                d("bottom part, shifted", shifted.clone(), false),
                d("top part, power tracked in z", top, true),
                d("bottom part, shifted, power tracked in z", shifted, true),
                d("bottom part", bottom.clone(), false),
                d("bottom part, power tracked in z", bottom, true),
                d("empty selection", Expr::int(0), false),
            ]
        }
    }
}

/// Tightens sum bounds that let an array index run past the end.
fn repair_bounds(ctx: &Context, range: &Predicate, size: &str, e: &Expr) -> Result<(Expr, Option<String>), String> {
    let Expr::Sum { var, lo, hi, body } = e else {
        return Ok((e.clone(), None));
    };
    let n = Expr::var(size);
    if !entails(ctx, range, &Predicate::atom(Atom::le(Expr::int(0), (**lo).clone()))) {
        return Err(format!("lower bound {} may be negative", crate::print::ascii(lo)));
    }
    if entails(ctx, range, &Predicate::atom(Atom::le((**hi).clone(), n.clone()))) {
        return Ok((e.clone(), None));
    }
    let shifted = crate::normal::normalize(&((**hi).clone() - Expr::int(1)));
    if entails(ctx, range, &Predicate::atom(Atom::le(shifted.clone(), n))) {
        let note = format!(
            "summation through {} reads past the end of the array; shifted to end before {}",
            crate::print::ascii(&crate::expr::pred_bound(hi)),
            crate::print::ascii(&shifted),
        );
        return Ok((Expr::sum(var, (**lo).clone(), shifted, (**body).clone()), Some(note)));
    }
    Err(format!("upper bound {} may exceed {size}", crate::print::ascii(hi)))
}

fn infer_direction(rhs: &Expr) -> Direction {
    let grows_from_front = rhs.any(&|e| match e {
        Expr::Sum { lo, .. } => lo.is_int(0),
        Expr::Poly(r, _) => r.parts == [Part::Top],
        _ => false,
    });
    if grows_from_front {
        Direction::FirstToLast
    } else {
        Direction::LastToFirst
    }
}

pub fn enumerate_invariants(spec: &OperationSpec, mode: Mode) -> Result<Vec<InvariantCandidate>, InvariantError> {
    let form = analyze_post(spec)?;
    split_postcondition(spec, mode)?;
    let post = mode_post(spec, mode)?;
    let grammar = guard_grammar(spec, mode);
    let z = aux_name(spec);
    let k = Expr::var(&index_name(spec));
    let range = match mode {
        Mode::Indexed => range_atoms(&k, &form.size),
        Mode::Flame => Vec::new(),
    };
    let power = match (mode, form.point()) {
        (Mode::Indexed, Some(x)) => Some(Expr::var(x).pow(k.clone())),
        (Mode::Flame, Some(x)) => Some(Expr::var(x).pow(Expr::len(VecRef::part(&form.vector, Part::Top)))),
        _ => None,
    };
    let mut out = Vec::new();
    for draft in drafts(spec, &form, mode) {
        if draft.with_aux && power.is_none() {
            continue;
        }
        let id = out.len() + 1;
        let auxiliaries: Vec<(String, Expr)> = if draft.with_aux {
            vec![(z.clone(), power.clone().expect("checked"))]
        } else {
            Vec::new()
        };
        let mut cand = InvariantCandidate {
            id,
            label: draft.label,
            predicate: Predicate::truth(),
            auxiliaries,
            direction: infer_direction(&draft.output_rhs),
            validity: Validity::Valid,
            repair: None,
        };
        let ctx = candidate_context(spec, &cand);
        let range_pred = Predicate::all(range.clone());
        let rhs = match repair_bounds(&ctx, &range_pred, &form.size, &draft.output_rhs) {
            Ok((rhs, note)) => {
                cand.repair = note;
                rhs
            }
            Err(why) => {
                cand.validity = Validity::Rejected(Rejection::WellFormedness(why));
                draft.output_rhs.clone()
            }
        };
        let mut atoms = vec![Atom::eq(Expr::var(&form.output), rhs.clone())];
        atoms.extend(cand.auxiliaries.iter().map(|(z, e)| Atom::eq(Expr::var(z), e.clone())));
        atoms.extend(range.iter().cloned());
        cand.predicate = Predicate::all(atoms);
        if cand.is_valid() && !rhs.mentions_vector(&form.vector) {
            cand.validity = Validity::Rejected(Rejection::NonVacuity);
        }
        if cand.is_valid() && find_guard(&ctx, &grammar, &cand.predicate, &post).is_none() {
            cand.validity = Validity::Rejected(Rejection::Completability);
        }
        out.push(cand);
    }
    Ok(out)
}

/// The candidate with the given id, which must be valid.
pub fn select(cands: &[InvariantCandidate], id: usize) -> Result<&InvariantCandidate, InvariantError> {
    let c = cands.iter().find(|c| c.id == id).ok_or(InvariantError::NoSuchCandidate(id))?;
    match &c.validity {
        Validity::Valid => Ok(c),
        Validity::Rejected(r) => Err(InvariantError::RejectedCandidate { id, reason: r.to_string() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_spec;

    pub(crate) const POLYEVAL: &str = "op polyeval
var y : scalar, out
var a : vector(n), in
var x : scalar, in
var k : scalar, index
pre: 0 <= n
post: y = sum(i, 0, n-1, a[i] * x^i)
";

    #[test]
    fn split_identities_verify() {
        let spec = parse_spec(POLYEVAL).unwrap();
        assert!(split_postcondition(&spec, Mode::Indexed).is_ok());
        assert!(split_postcondition(&spec, Mode::Flame).is_ok());
    }

    #[test]
    fn indexed_family() {
        let spec = parse_spec(POLYEVAL).unwrap();
        let cands = enumerate_invariants(&spec, Mode::Indexed).unwrap();
        let valid: Vec<usize> = cands.iter().filter(|c| c.is_valid()).map(|c| c.id).collect();
        assert_eq!(valid, vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(cands[6].validity, Validity::Rejected(Rejection::NonVacuity));
        assert!(cands[0].repair.is_some());
        assert_eq!(cands[0].direction, Direction::FirstToLast);
        assert_eq!(cands[4].direction, Direction::LastToFirst);
    }

    #[test]
    fn flame_family() {
        let spec = parse_spec(POLYEVAL).unwrap();
        let cands = enumerate_invariants(&spec, Mode::Flame).unwrap();
        let valid: Vec<usize> = cands.iter().filter(|c| c.is_valid()).map(|c| c.id).collect();
        assert_eq!(valid, vec![1, 2, 3, 4, 5, 6]);
        let five = &cands[4];
        let expected = Atom::eq(Expr::var("y"), Expr::poly(VecRef::part("a", Part::Bottom), Expr::var("x")));
        assert_eq!(five.predicate.conjuncts, vec![expected]);
        assert_eq!(five.direction, Direction::LastToFirst);
    }

    #[test]
    fn guards() {
        let spec = parse_spec(POLYEVAL).unwrap();
        for mode in [Mode::Indexed, Mode::Flame] {
            let cands = enumerate_invariants(&spec, mode).unwrap();
            let ctx = candidate_context(&spec, &cands[4]);
            let g = find_guard(&ctx, &guard_grammar(&spec, mode), &cands[4].predicate, &mode_post(&spec, mode).unwrap());
            assert_eq!(g.unwrap(), guard_grammar(&spec, mode)[0]);
        }
    }
}
