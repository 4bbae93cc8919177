//! Conjunctive predicates over expressions.

use std::collections::BTreeSet;
use std::fmt;

use num::{Signed, Zero};

use crate::expr::{Expr, Part};
use crate::normal::{Nf, Normalizer, Sizes};
use crate::print::{self, Notation};
use crate::state::{EvalError, State};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Eq(Expr, Expr),
    Le(Expr, Expr),
    Lt(Expr, Expr),
    /// Disequality; only produced as the negation of an `Eq` guard or as a
    /// domain side condition such as `x ≠ 0`.
    Ne(Expr, Expr),
    True,
}

/// Relation of a normalized atom `d REL 0`, where `d = rhs - lhs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rel {
    Eq,
    Le,
    Lt,
    Ne,
}

impl Atom {
    pub fn eq(l: Expr, r: Expr) -> Atom {
        Atom::Eq(l, r)
    }

    pub fn le(l: Expr, r: Expr) -> Atom {
        Atom::Le(l, r)
    }

    pub fn lt(l: Expr, r: Expr) -> Atom {
        Atom::Lt(l, r)
    }

    pub fn sides(&self) -> Option<(&Expr, &Expr)> {
        match self {
            Atom::Eq(l, r) | Atom::Le(l, r) | Atom::Lt(l, r) | Atom::Ne(l, r) => Some((l, r)),
            Atom::True => None,
        }
    }

    pub fn rel(&self) -> Option<Rel> {
        Some(match self {
            Atom::Eq(..) => Rel::Eq,
            Atom::Le(..) => Rel::Le,
            Atom::Lt(..) => Rel::Lt,
            Atom::Ne(..) => Rel::Ne,
            Atom::True => return None,
        })
    }

    pub fn map(&self, f: &dyn Fn(&Expr) -> Expr) -> Atom {
        match self {
            Atom::Eq(l, r) => Atom::Eq(f(l), f(r)),
            Atom::Le(l, r) => Atom::Le(f(l), f(r)),
            Atom::Lt(l, r) => Atom::Lt(f(l), f(r)),
            Atom::Ne(l, r) => Atom::Ne(f(l), f(r)),
            Atom::True => Atom::True,
        }
    }

    pub fn eval(&self, s: &State) -> Result<bool, EvalError> {
        let Some((l, r)) = self.sides() else {
            return Ok(true);
        };
        let (l, r) = (s.evaluate(l)?, s.evaluate(r)?);
        Ok(match self {
            Atom::Eq(..) => l == r,
            Atom::Le(..) => l <= r,
            Atom::Lt(..) => l < r,
            Atom::Ne(..) => l != r,
            Atom::True => true,
        })
    }

    /// Logical negation of a single comparison.
    pub fn negate(&self) -> Option<Atom> {
        Some(match self.clone() {
            Atom::Lt(l, r) => Atom::Le(r, l),
            Atom::Le(l, r) => Atom::Lt(r, l),
            Atom::Eq(l, r) => Atom::Ne(l, r),
            Atom::Ne(l, r) => Atom::Eq(l, r),
            Atom::True => return None,
        })
    }

    /// `(rel, rhs - lhs)` in normal form.
    pub fn difference(&self, norm: &mut Normalizer) -> Option<(Rel, Nf)> {
        let (l, r) = self.sides()?;
        let l = norm.nf(l).ok()?;
        let r = norm.nf(r).ok()?;
        Some((self.rel()?, r.sub(&l)))
    }

    /// Decides atoms whose difference is a constant.
    pub fn constant_truth(rel: Rel, d: &Nf) -> Option<bool> {
        let c = d.as_const()?;
        Some(match rel {
            Rel::Eq => c.is_zero(),
            Rel::Ne => !c.is_zero(),
            Rel::Le => !c.is_negative(),
            Rel::Lt => c.is_positive(),
        })
    }

    /// Rebuilds a readable atom from `d REL 0`: negative terms move to the
    /// left-hand side so `0 <= k - 1` reads `1 <= k`.
    pub fn from_difference(rel: Rel, d: &Nf) -> Atom {
        let mut lhs = Nf::zero();
        let mut rhs = Nf::zero();
        for (m, c) in d.terms() {
            let t = Nf::term(m.clone(), c.abs());
            if c.is_negative() {
                lhs = lhs.add(&t);
            } else {
                rhs = rhs.add(&t);
            }
        }
        let (l, r) = (lhs.to_expr(), rhs.to_expr());
        match rel {
            Rel::Eq => Atom::Eq(l, r),
            Rel::Le => Atom::Le(l, r),
            Rel::Lt => Atom::Lt(l, r),
            Rel::Ne => Atom::Ne(l, r),
        }
    }
}

/// Scales a difference so that equal atoms get equal keys: equalities are
/// made monic, inequalities are divided by the magnitude of their leading
/// coefficient.
pub fn canonical_key(rel: Rel, d: &Nf) -> (Rel, Nf) {
    let lead = d
        .terms()
        .find(|(m, _)| !m.is_unit())
        .or_else(|| d.terms().next())
        .map(|(_, c)| c.clone());
    match lead {
        Some(c) => {
            let k = match rel {
                Rel::Eq | Rel::Ne => c.recip(),
                Rel::Le | Rel::Lt => c.abs().recip(),
            };
            (rel, d.scale(&k))
        }
        None => (rel, d.clone()),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Predicate {
    pub conjuncts: Vec<Atom>,
}

impl Predicate {
    pub fn truth() -> Predicate {
        Predicate::default()
    }

    pub fn atom(a: Atom) -> Predicate {
        Predicate { conjuncts: vec![a] }
    }

    pub fn all(atoms: impl IntoIterator<Item = Atom>) -> Predicate {
        Predicate { conjuncts: atoms.into_iter().filter(|a| *a != Atom::True).collect() }
    }

    pub fn is_true(&self) -> bool {
        self.conjuncts.iter().all(|a| *a == Atom::True)
    }

    pub fn and(&self, other: &Predicate) -> Predicate {
        let mut out = self.clone();
        for a in &other.conjuncts {
            if !out.conjuncts.contains(a) && *a != Atom::True {
                out.conjuncts.push(a.clone());
            }
        }
        out
    }

    pub fn and_atom(&self, a: Atom) -> Predicate {
        self.and(&Predicate::atom(a))
    }

    pub fn map(&self, f: &dyn Fn(&Expr) -> Expr) -> Predicate {
        Predicate { conjuncts: self.conjuncts.iter().map(|a| a.map(f)).collect() }
    }

    pub fn substitute(&self, bindings: &[(String, Expr)]) -> Predicate {
        self.map(&|e| e.substitute(bindings))
    }

    pub fn rename_parts(&self, root: &str, map: &[(Part, Vec<Part>)]) -> Predicate {
        self.map(&|e| e.rename_parts(root, map))
    }

    pub fn exprs(&self) -> impl Iterator<Item = &Expr> {
        self.conjuncts.iter().filter_map(Atom::sides).flat_map(|(l, r)| [l, r])
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        self.exprs().flat_map(Expr::free_vars).collect()
    }

    pub fn mentions_var(&self, name: &str) -> bool {
        self.exprs().any(|e| e.mentions_var(name))
    }

    pub fn eval(&self, s: &State) -> Result<bool, EvalError> {
        for a in &self.conjuncts {
            if !a.eval(s)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Evaluation where an undefined atom counts as false.
    pub fn holds(&self, s: &State) -> bool {
        self.eval(s).unwrap_or(false)
    }

    /// The negation of a single-atom guard.
    pub fn negate_guard(&self) -> Option<Predicate> {
        match self.conjuncts.as_slice() {
            [a] => a.negate().map(Predicate::atom),
            _ => None,
        }
    }

    /// Normalizes each atom, dropping those that are constantly true.
    pub fn normalize_in(&self, sizes: &Sizes) -> Predicate {
        let mut norm = Normalizer::new(sizes);
        let mut out = Predicate::truth();
        for a in &self.conjuncts {
            let atom = match a.difference(&mut norm) {
                None => a.clone(),
                Some((rel, d)) => match Atom::constant_truth(rel, &d) {
                    Some(true) => continue,
                    _ => Atom::from_difference(rel, &d),
                },
            };
            out = out.and_atom(atom);
        }
        out
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print::atom(self, &print::Printer::new(Notation::Ascii)))
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print::predicate(self, &print::Printer::new(Notation::Ascii)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::rat;

    fn k() -> Expr {
        Expr::var("k")
    }

    #[test]
    fn normalization_isolates_variables() {
        let p = Predicate::all([
            Atom::le(Expr::int(0), k() - Expr::int(1)),
            Atom::le(k() - Expr::int(1), Expr::var("n")),
        ]);
        let expected = Predicate::all([
            Atom::le(Expr::int(1), k()),
            Atom::le(k(), Expr::var("n") + Expr::int(1)),
        ]);
        assert_eq!(p.normalize_in(&Sizes::new()), expected);
    }

    #[test]
    fn guard_negation() {
        let g = Predicate::atom(Atom::lt(Expr::int(0), k()));
        assert_eq!(g.negate_guard().unwrap(), Predicate::atom(Atom::le(k(), Expr::int(0))));
    }

    #[test]
    fn undefined_atoms_do_not_hold() {
        let p = Predicate::atom(Atom::eq(Expr::elem("a", Expr::int(5)), Expr::int(0)));
        let s = State::new().with_vector("a", Some("n"), &[1]);
        assert!(!p.holds(&s));
        assert!(Predicate::truth().holds(&s));
        assert!(Predicate::atom(Atom::le(Expr::var("n"), Expr::int(1))).holds(&s.with_scalar("q", rat(0))));
    }

    #[test]
    fn keys_identify_scaled_equalities() {
        let sizes = Sizes::new();
        let mut norm = Normalizer::new(&sizes);
        let a = Atom::eq(Expr::var("y"), Expr::var("x"));
        let b = Atom::eq(Expr::int(2) * Expr::var("x"), Expr::int(2) * Expr::var("y"));
        let (ra, da) = a.difference(&mut norm).unwrap();
        let (rb, db) = b.difference(&mut norm).unwrap();
        assert_eq!(canonical_key(ra, &da), canonical_key(rb, &db));
    }
}
