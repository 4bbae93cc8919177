//! Syntactic entailment between predicates.
//!
//! Both sides are normalized. Atoms over integer-valued terms (index and
//! size variables, region lengths) that have the shape `u - w <= c` feed a
//! difference-bound matrix, whose closure yields every implied bound and
//! equality. Implied equalities are substituted back (so `0 <= k ∧ k <= 0`
//! turns `k` into `0` everywhere), and equations `v = e` that define a
//! computed variable `v` are used as rewrite rules. A goal atom then holds
//! if it is trivially true, occurs among the hypotheses, or follows from
//! the bounds.

use std::collections::BTreeMap;

use num::{BigInt, BigRational, Integer, One, ToPrimitive, Zero};

use crate::expr::{Expr, Part, VecRef};
use crate::normal::{Factor, Nf, Normalizer, Sizes};
use crate::predicate::{canonical_key, Atom, Predicate, Rel};
use crate::spec::{Context, Role};

type Diff = (Rel, Nf);

/// Each region of a vector and the regions that replace it.
type PartMap = Vec<(Part, Vec<Part>)>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Node {
    Zero,
    Var(String),
    Len(String, Part),
}

impl Node {
    fn expr(&self) -> Expr {
        match self {
            Node::Zero => Expr::int(0),
            Node::Var(v) => Expr::var(v),
            Node::Len(root, part) => Expr::len(VecRef::part(root, *part)),
        }
    }
}

struct Dbm {
    nodes: Vec<Node>,
    index: BTreeMap<Node, usize>,
    /// `w[i][j] = Some(c)` means `x_j - x_i <= c`.
    w: Vec<Vec<Option<i64>>>,
}

fn min_opt(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

impl Dbm {
    fn new() -> Self {
        let mut d = Dbm { nodes: Vec::new(), index: BTreeMap::new(), w: Vec::new() };
        d.node(Node::Zero);
        d
    }

    fn node(&mut self, n: Node) -> usize {
        if let Some(&i) = self.index.get(&n) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(n.clone());
        self.index.insert(n, i);
        for row in &mut self.w {
            row.push(None);
        }
        self.w.push(vec![None; i + 1]);
        self.w[i][i] = Some(0);
        i
    }

    /// `x_j - x_i <= c`
    fn edge(&mut self, i: usize, j: usize, c: i64) {
        self.w[i][j] = min_opt(self.w[i][j], Some(c));
    }

    fn close(&mut self) -> bool {
        let n = self.nodes.len();
        for k in 0..n {
            for i in 0..n {
                let Some(ik) = self.w[i][k] else { continue };
                for j in 0..n {
                    if let Some(kj) = self.w[k][j] {
                        let via = ik.saturating_add(kj);
                        self.w[i][j] = min_opt(self.w[i][j], Some(via));
                    }
                }
            }
        }
        (0..n).all(|i| self.w[i][i].is_some_and(|c| c >= 0))
    }

    fn bound(&self, i: usize, j: usize) -> Option<i64> {
        self.w[i][j]
    }
}

/// `c + x_u - x_w` with `u`, `w` node ids (`0` is the zero node).
struct Linear {
    c: i64,
    plus: usize,
    minus: usize,
}

/// `d` divided by the positive rational content of its coefficients, so
/// the coefficients become coprime integers. The sign is kept, so every
/// relation against zero is unchanged.
fn primitive(d: &Nf) -> Nf {
    let mut num = BigInt::zero();
    let mut den = BigInt::one();
    for (_, c) in d.terms() {
        num = num.gcd(c.numer());
        den = den.lcm(c.denom());
    }
    if num.is_zero() {
        return d.clone();
    }
    d.scale(&BigRational::new(den, num))
}

struct Engine<'a> {
    ctx: &'a Context,
    sizes: Sizes,
}

impl<'a> Engine<'a> {
    fn as_node(&self, f: &Factor) -> Option<Node> {
        match f {
            Factor::Var(v) if self.ctx.is_integer(v) => Some(Node::Var(v.clone())),
            Factor::Len(root, part) => Some(Node::Len(root.clone(), *part)),
            _ => None,
        }
    }

    fn term_node(&self, m: &crate::normal::Mono) -> Option<Node> {
        let mut it = m.factors();
        let (f, e) = it.next()?;
        if it.next().is_some() || *e != Nf::one() {
            return None;
        }
        self.as_node(f)
    }

    fn collect_nodes(&self, d: &Nf, dbm: &mut Dbm) {
        for (m, _) in d.terms() {
            if let Some(n) = self.term_node(m) {
                dbm.node(n);
            }
        }
    }

    fn linear(&self, d: &Nf, dbm: &Dbm) -> Option<Linear> {
        let d = primitive(d);
        let mut lin = Linear { c: 0, plus: 0, minus: 0 };
        for (m, coeff) in d.terms() {
            if m.is_unit() {
                if !coeff.is_integer() {
                    return None;
                }
                lin.c = coeff.to_integer().to_i64()?;
                continue;
            }
            let id = *dbm.index.get(&self.term_node(m)?)?;
            if coeff.is_one() && lin.plus == 0 {
                lin.plus = id;
            } else if *coeff == -BigRational::one() && lin.minus == 0 {
                lin.minus = id;
            } else {
                return None;
            }
        }
        Some(lin)
    }

    fn add_fact(&self, rel: Rel, d: &Nf, dbm: &mut Dbm) {
        let Some(l) = self.linear(d, dbm) else { return };
        match rel {
            Rel::Le => dbm.edge(l.plus, l.minus, l.c),
            Rel::Lt => dbm.edge(l.plus, l.minus, l.c - 1),
            Rel::Eq => {
                dbm.edge(l.plus, l.minus, l.c);
                dbm.edge(l.minus, l.plus, -l.c);
            }
            Rel::Ne => {}
        }
    }

    fn add_domain(&self, dbm: &mut Dbm) {
        let existing: Vec<Node> = dbm.nodes.clone();
        for n in existing {
            match &n {
                Node::Zero => {}
                Node::Var(v) => {
                    if self.ctx.role(v) == Some(Role::Size) {
                        let i = dbm.node(n.clone());
                        dbm.edge(i, 0, 0);
                    }
                }
                Node::Len(root, part) => {
                    let i = dbm.node(n.clone());
                    dbm.edge(i, 0, 0);
                    let whole = dbm.node(Node::Len(root.clone(), Part::Whole));
                    match part {
                        Part::Top => dbm.edge(whole, i, 0),
                        Part::Front => dbm.edge(whole, i, -1),
                        _ => {}
                    }
                }
            }
        }
        for (vector, size) in self.ctx.vectors() {
            let touched = dbm.nodes.iter().any(|n| matches!(n, Node::Len(r, _) if *r == vector))
                || dbm.index.contains_key(&Node::Var(size.clone()));
            if !touched {
                continue;
            }
            let whole = dbm.node(Node::Len(vector.clone(), Part::Whole));
            let s = dbm.node(Node::Var(size.clone()));
            dbm.edge(whole, 0, 0);
            dbm.edge(s, 0, 0);
            dbm.edge(whole, s, 0);
            dbm.edge(s, whole, 0);
        }
    }

    fn diffs(&self, p: &Predicate) -> Vec<Diff> {
        let mut norm = Normalizer::new(&self.sizes);
        p.conjuncts.iter().filter_map(|a| a.difference(&mut norm)).collect()
    }

    fn holds_in(&self, rel: Rel, d: &Nf, dbm: &Dbm) -> bool {
        let Some(l) = self.linear(d, dbm) else { return false };
        let le = |i: usize, j: usize, c: i64| dbm.bound(i, j).is_some_and(|b| b <= c);
        match rel {
            Rel::Le => le(l.plus, l.minus, l.c),
            Rel::Lt => le(l.plus, l.minus, l.c - 1),
            Rel::Eq => le(l.plus, l.minus, l.c) && le(l.minus, l.plus, -l.c),
            Rel::Ne => le(l.plus, l.minus, l.c - 1) || le(l.minus, l.plus, -l.c - 1),
        }
    }

    fn rank(&self, n: &Node) -> u8 {
        match n {
            Node::Zero => 0,
            Node::Var(v) if self.ctx.role(v) == Some(Role::Size) => 1,
            Node::Len(_, Part::Whole) => 2,
            Node::Len(..) => 3,
            Node::Var(_) => 4,
        }
    }

    /// Rewrites implied by equalities in the closed matrix.
    fn equality_rewrites(&self, dbm: &Dbm, p: &Predicate, q: &Predicate) -> (Predicate, Predicate) {
        let n = dbm.nodes.len();
        let mut bindings: Vec<(String, Expr)> = Vec::new();
        let mut collapse: Vec<(String, PartMap)> = Vec::new();
        for j in 0..n {
            let mut best: Option<(usize, i64)> = None;
            for i in 0..n {
                if i == j {
                    continue;
                }
                if let (Some(a), Some(b)) = (dbm.bound(i, j), dbm.bound(j, i)) {
                    if a == -b && self.rank(&dbm.nodes[i]) < self.rank(&dbm.nodes[j]) {
                        let better = best.is_none_or(|(bi, _)| self.rank(&dbm.nodes[i]) < self.rank(&dbm.nodes[bi]));
                        if better {
                            best = Some((i, a));
                        }
                    }
                }
            }
            let Some((rep, off)) = best else { continue };
            let rep_node = &dbm.nodes[rep];
            match &dbm.nodes[j] {
                Node::Var(v) => {
                    let base = rep_node.expr();
                    let value = match (rep_node, off) {
                        (Node::Zero, c) => Expr::int(c),
                        (_, 0) => base,
                        (_, c) if c > 0 => base + Expr::int(c),
                        (_, c) => base - Expr::int(-c),
                    };
                    bindings.push((v.clone(), value));
                }
                Node::Len(root, part) => {
                    let whole = dbm.index.get(&Node::Len(root.clone(), Part::Whole)).copied();
                    let empty = rep == 0 && off == 0;
                    let full = |c: i64| {
                        whole.is_some_and(|w| dbm.bound(w, j) == Some(c) && dbm.bound(j, w) == Some(-c))
                    };
                    let map = match part {
                        Part::Top if empty => Some(vec![(Part::Top, vec![]), (Part::Bottom, vec![Part::Whole])]),
                        Part::Top if full(0) => Some(vec![(Part::Top, vec![Part::Whole]), (Part::Bottom, vec![])]),
                        Part::Front if empty => Some(vec![(Part::Front, vec![])]),
                        Part::Front if full(-1) => Some(vec![(Part::Back, vec![])]),
                        _ => None,
                    };
                    if let Some(m) = map {
                        collapse.push((root.clone(), m));
                    }
                }
                Node::Zero => {}
            }
        }
        let apply = |pred: &Predicate| {
            let mut out = pred.substitute(&bindings);
            for (root, map) in &collapse {
                out = out.rename_parts(root, map);
            }
            out
        };
        (apply(p), apply(q))
    }

    /// Equations `v = e` where `v` is a computed variable not occurring in `e`.
    fn definitions(&self, p: &[Diff]) -> Vec<(String, Expr)> {
        let mut defs = Vec::new();
        for (rel, d) in p {
            if *rel != Rel::Eq {
                continue;
            }
            for (m, c) in d.terms() {
                let mut fs = m.factors();
                let Some((Factor::Var(v), e)) = fs.next() else { continue };
                if fs.next().is_some() || *e != Nf::one() || !self.ctx.is_dependent(v) {
                    continue;
                }
                if defs.iter().any(|(n, _): &(String, Expr)| n == v) {
                    continue;
                }
                let var_term = Nf::var(v).scale(c);
                let rest = d.sub(&var_term);
                if rest.mentions(v) {
                    continue;
                }
                let value = rest.scale(&(-c.recip()));
                defs.push((v.clone(), value.to_expr()));
                break;
            }
        }
        defs
    }

    fn entails(&self, p: &Predicate, q: &Predicate) -> bool {
        let p_diffs = self.diffs(p);
        let q_diffs = self.diffs(q);
        let mut dbm = Dbm::new();
        for (_, d) in p_diffs.iter().chain(&q_diffs) {
            self.collect_nodes(d, &mut dbm);
        }
        self.add_domain(&mut dbm);
        for (rel, d) in &p_diffs {
            self.add_fact(*rel, d, &mut dbm);
        }
        if !dbm.close() {
            return true;
        }
        for (rel, d) in &p_diffs {
            if Atom::constant_truth(*rel, d) == Some(false) {
                return true;
            }
        }

        let (p2, mut q2) = self.equality_rewrites(&dbm, p, q);
        let p2_diffs = self.diffs(&p2);
        let defs = self.definitions(&p2_diffs);
        for _ in 0..=defs.len() {
            let next = q2.substitute(&defs);
            if next == q2 {
                break;
            }
            q2 = next;
        }

        let known: Vec<(Rel, Nf)> = p2_diffs.iter().map(|(r, d)| canonical_key(*r, d)).collect();
        let present = |rel: Rel, d: &Nf| {
            let key = canonical_key(rel, d);
            let neg = canonical_key(rel, &d.neg());
            known.iter().any(|k| {
                *k == key
                    || (matches!(rel, Rel::Eq | Rel::Ne) && *k == neg)
                    || (rel == Rel::Le && (*k == (Rel::Eq, key.1.clone()) || *k == (Rel::Eq, neg.1.clone()) || *k == (Rel::Lt, key.1.clone())))
                    || (rel == Rel::Ne && (*k == (Rel::Lt, key.1.clone()) || *k == (Rel::Lt, neg.1.clone())))
            })
        };

        let mut norm = Normalizer::new(&self.sizes);
        q2.conjuncts.iter().all(|a| {
            if *a == Atom::True {
                return true;
            }
            let Some((rel, d)) = a.difference(&mut norm) else { return false };
            Atom::constant_truth(rel, &d) == Some(true) || present(rel, &d) || self.holds_in(rel, &d, &dbm)
        })
    }
}

/// Tier-1 check that `p` implies `q` in the given context.
pub fn entails(ctx: &Context, p: &Predicate, q: &Predicate) -> bool {
    Engine { ctx, sizes: ctx.sizes() }.entails(p, q)
}

/// True when `p` is contradictory on integer bounds alone.
pub fn contradictory(ctx: &Context, p: &Predicate) -> bool {
    let false_atom = Predicate::atom(Atom::lt(Expr::int(0), Expr::int(0)));
    entails(ctx, p, &false_atom)
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

    fn body(shift: Expr) -> Expr {
        Expr::elem("a", v("i")) * v("x").pow(v("i") - shift)
    }

    fn inv5() -> Predicate {
        Predicate::all([
            Atom::eq(v("y"), Expr::sum("i", v("k"), v("n"), body(v("k")))),
            Atom::le(Expr::int(0), v("k")),
            Atom::le(v("k"), v("n")),
        ])
    }

    fn post() -> Predicate {
        Predicate::atom(Atom::eq(v("y"), Expr::sum("i", Expr::int(0), v("n"), Expr::elem("a", v("i")) * v("x").pow(v("i")))))
    }

    #[test]
    fn reflexive() {
        assert!(entails(&ctx(), &inv5(), &inv5()));
    }

    #[test]
    fn exit_condition_forces_index_to_zero() {
        let p = inv5().and_atom(Atom::le(v("k"), Expr::int(0)));
        assert!(entails(&ctx(), &p, &post()));
        assert!(!entails(&ctx(), &inv5(), &post()));
    }

    #[test]
    fn horner_update_step() {
        let p = inv5().and_atom(Atom::lt(Expr::int(0), v("k")));
        let k1 = v("k") - Expr::int(1);
        let wp = inv5().substitute(&[
            ("y".into(), Expr::elem("a", k1.clone()) + v("y") * v("x")),
            ("k".into(), k1),
        ]);
        assert!(entails(&ctx(), &p, &wp));
        let wrong = inv5().substitute(&[
            ("y".into(), Expr::elem("a", v("k")) + v("y") * v("x")),
            ("k".into(), v("k") - Expr::int(1)),
        ]);
        assert!(!entails(&ctx(), &p, &wrong));
    }

    #[test]
    fn contradiction_proves_anything() {
        let p = Predicate::all([Atom::lt(v("k"), Expr::int(0)), Atom::le(Expr::int(0), v("k"))]);
        assert!(contradictory(&ctx(), &p));
        assert!(!contradictory(&ctx(), &inv5()));
    }

    #[test]
    fn partition_collapse() {
        let c = ctx();
        let b = VecRef::part("a", Part::Bottom);
        let inv = Predicate::atom(Atom::eq(v("y"), Expr::poly(b.clone(), v("x"))));
        let not_guard = Atom::le(Expr::len(VecRef::whole("a")), Expr::len(b));
        let goal = Predicate::atom(Atom::eq(v("y"), Expr::poly(VecRef::whole("a"), v("x"))));
        assert!(entails(&c, &inv.and_atom(not_guard), &goal));
        assert!(!entails(&c, &inv, &goal));
    }

    #[test]
    fn scaled_differences() {
        let c = ctx().with("C", Role::Counter);
        let p = Predicate::all([
            Atom::eq(v("C"), Expr::int(2) * (v("n") - v("k"))),
            Atom::le(v("k"), Expr::int(0)),
            Atom::le(Expr::int(0), v("k")),
        ]);
        assert!(entails(&c, &p, &Predicate::atom(Atom::eq(v("C"), Expr::int(2) * Expr::len(VecRef::whole("a"))))));
        assert!(!entails(&c, &p, &Predicate::atom(Atom::eq(v("C"), Expr::int(3) * v("n")))));
        let q = Predicate::atom(Atom::le(Expr::int(2) * v("k"), Expr::int(2) * v("n")));
        assert!(entails(&ctx(), &Predicate::atom(Atom::le(v("k"), v("n"))), &q));
    }
}
