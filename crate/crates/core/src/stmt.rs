//! Commands of the worksheet language and their execution.

use std::fmt;

use thiserror::Error;

use crate::expr::Expr;
use crate::predicate::Predicate;
use crate::print::{Notation, Printer};
use crate::state::{Cursor, EvalError, State};

/// Name of the operation counter introduced by cost annotations.
pub const COUNTER: &str = "C";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Top,
    Bottom,
}

impl Side {
    pub fn keyword(self) -> &'static str {
        match self {
            Side::Top => "top",
            Side::Bottom => "bottom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stmt {
    Skip,
    /// Simultaneous assignment; every right-hand side is evaluated first.
    Assign { targets: Vec<String>, exprs: Vec<Expr> },
    Seq(Box<Stmt>, Box<Stmt>),
    While { guard: Predicate, body: Box<Stmt> },
    /// `a -> (a_T; a_B)` with the `empty` half holding no elements.
    PartitionInit { vector: String, empty: Side },
    /// `(a_T; a_B) -> (a_0; α_1; a_2)`. From the bottom, `α_1` is the last
    /// element of `a_T`; from the top, the first element of `a_B`.
    Repartition { vector: String, from: Side },
    /// `(a_T; a_B) <- (a_0; α_1; a_2)`, moving `α_1` to the other half.
    MergeBack { vector: String, from: Side },
    /// `C := C + e`
    CounterIncr(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("cannot {action} `{vector}` in its current partition")]
    Partition { vector: String, action: &'static str },
    #[error("loop did not terminate within {0} iterations")]
    NonTermination(usize),
}

impl Stmt {
    pub fn assign(target: &str, e: Expr) -> Stmt {
        Stmt::Assign { targets: vec![target.to_string()], exprs: vec![e] }
    }

    pub fn assign_many(pairs: Vec<(String, Expr)>) -> Stmt {
        let (targets, exprs) = pairs.into_iter().unzip();
        Stmt::Assign { targets, exprs }
    }

    /// Right-nested sequence; `Skip` for an empty list.
    pub fn seq(stmts: Vec<Stmt>) -> Stmt {
        let mut it = stmts.into_iter().filter(|s| *s != Stmt::Skip).rev();
        let Some(last) = it.next() else {
            return Stmt::Skip;
        };
        it.fold(last, |acc, s| Stmt::Seq(Box::new(s), Box::new(acc)))
    }

    /// The statements of a (nested) sequence in order.
    pub fn flatten(&self) -> Vec<&Stmt> {
        match self {
            Stmt::Seq(a, b) => {
                let mut v = a.flatten();
                v.extend(b.flatten());
                v
            }
            Stmt::Skip => Vec::new(),
            s => vec![s],
        }
    }

    pub fn assigned(&self) -> Vec<String> {
        let mut out = Vec::new();
        for s in self.flatten() {
            match s {
                Stmt::Assign { targets, .. } => out.extend(targets.iter().cloned()),
                Stmt::CounterIncr(_) => out.push(COUNTER.to_string()),
                Stmt::While { body, .. } => out.extend(body.assigned()),
                _ => {}
            }
        }
        out
    }

    pub fn is_loop_free(&self) -> bool {
        self.flatten().iter().all(|s| !matches!(s, Stmt::While { .. }))
    }

    pub fn exec(&self, s: &mut State) -> Result<(), ExecError> {
        match self {
            Stmt::Skip => Ok(()),
            Stmt::Assign { targets, exprs } => {
                let values = exprs.iter().map(|e| s.evaluate(e)).collect::<Result<Vec<_>, _>>()?;
                for (t, v) in targets.iter().zip(values) {
                    s.set(t, v);
                }
                Ok(())
            }
            Stmt::Seq(a, b) => {
                a.exec(s)?;
                b.exec(s)
            }
            Stmt::While { guard, body } => {
                let limit = iteration_limit(s);
                let mut n = 0;
                while guard.eval(s)? {
                    if n == limit {
                        return Err(ExecError::NonTermination(limit));
                    }
                    body.exec(s)?;
                    n += 1;
                }
                Ok(())
            }
            Stmt::PartitionInit { vector, empty } => {
                let len = vector_len(s, vector)?;
                let split = match empty {
                    Side::Bottom => len,
                    Side::Top => 0,
                };
                s.cursors.insert(vector.clone(), Cursor { split, exposed: None });
                Ok(())
            }
            Stmt::Repartition { vector, from } => {
                let len = vector_len(s, vector)?;
                let fail = || ExecError::Partition { vector: vector.clone(), action: "repartition" };
                let c = s.cursors.get_mut(vector).ok_or_else(fail)?;
                if c.exposed.is_some() {
                    return Err(fail());
                }
                c.exposed = Some(match from {
                    Side::Bottom if c.split > 0 => c.split - 1,
                    Side::Top if c.split < len => c.split,
                    _ => return Err(fail()),
                });
                Ok(())
            }
            Stmt::MergeBack { vector, from } => {
                let fail = || ExecError::Partition { vector: vector.clone(), action: "merge" };
                let c = s.cursors.get_mut(vector).ok_or_else(fail)?;
                let p = c.exposed.take().ok_or_else(fail)?;
                c.split = match from {
                    Side::Bottom => p,
                    Side::Top => p + 1,
                };
                Ok(())
            }
            Stmt::CounterIncr(e) => {
                let now = s
                    .get(COUNTER)
                    .cloned()
                    .ok_or_else(|| EvalError::UnboundVariable(COUNTER.to_string()))?;
                let inc = s.evaluate(e)?;
                s.set(COUNTER, now + inc);
                Ok(())
            }
        }
    }
}

fn vector_len(s: &State, v: &str) -> Result<usize, ExecError> {
    s.vectors
        .get(v)
        .map(Vec::len)
        .ok_or_else(|| ExecError::Eval(EvalError::UnboundVariable(v.to_string())))
}

/// Loops over vectors of length `n` may take at most `10 n + 10` iterations.
pub fn iteration_limit(s: &State) -> usize {
    10 * s.vectors.values().map(Vec::len).max().unwrap_or(0) + 10
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&Printer::new(Notation::Ascii).stmt(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Part, VecRef};
    use crate::predicate::Atom;
    use crate::state::rat;

    fn v(n: &str) -> Expr {
        Expr::var(n)
    }

    #[test]
    fn simultaneous_assignment_reads_pre_state() {
        let mut s = State::new().with_scalar("a", rat(1)).with_scalar("b", rat(2));
        Stmt::assign_many(vec![("a".into(), v("b")), ("b".into(), v("a"))]).exec(&mut s).unwrap();
        assert_eq!(s.get("a"), Some(&rat(2)));
        assert_eq!(s.get("b"), Some(&rat(1)));
    }

    #[test]
    fn horner_loop_indexed() {
        let k1 = v("k") - Expr::int(1);
        let body = Stmt::seq(vec![
            Stmt::assign("y", Expr::elem("a", k1.clone()) + v("y") * v("x")),
            Stmt::assign("k", k1),
        ]);
        let prog = Stmt::seq(vec![
            Stmt::assign("y", Expr::int(0)),
            Stmt::assign("k", v("n")),
            Stmt::While { guard: Predicate::atom(Atom::lt(Expr::int(0), v("k"))), body: Box::new(body) },
        ]);
        let mut s = State::new().with_vector("a", Some("n"), &[1, 2, 3]).with_scalar("x", rat(2));
        prog.exec(&mut s).unwrap();
        assert_eq!(s.get("y"), Some(&rat(17)));
    }

    #[test]
    fn horner_loop_partitioned() {
        let cur = Expr::Ref(VecRef::part("a", Part::Current));
        let body = Stmt::seq(vec![
            Stmt::Repartition { vector: "a".into(), from: Side::Bottom },
            Stmt::assign("y", cur + v("y") * v("x")),
            Stmt::MergeBack { vector: "a".into(), from: Side::Bottom },
        ]);
        let guard = Atom::lt(Expr::len(VecRef::part("a", Part::Bottom)), Expr::len(VecRef::whole("a")));
        let prog = Stmt::seq(vec![
            Stmt::assign("y", Expr::int(0)),
            Stmt::PartitionInit { vector: "a".into(), empty: Side::Bottom },
            Stmt::While { guard: Predicate::atom(guard), body: Box::new(body) },
        ]);
        let mut s = State::new().with_vector("a", Some("n"), &[1, 2, 3]).with_scalar("x", rat(2));
        prog.exec(&mut s).unwrap();
        assert_eq!(s.get("y"), Some(&rat(17)));
        assert_eq!(s.cursors["a"], Cursor { split: 0, exposed: None });
    }

    #[test]
    fn runaway_loop_is_reported() {
        let prog = Stmt::While {
            guard: Predicate::atom(Atom::le(Expr::int(0), v("k"))),
            body: Box::new(Stmt::assign("k", v("k") + Expr::int(1))),
        };
        let mut s = State::new().with_scalar("k", rat(0));
        assert_eq!(prog.exec(&mut s), Err(ExecError::NonTermination(10)));
    }

    #[test]
    fn partition_errors() {
        let mut s = State::new().with_vector("a", Some("n"), &[]);
        Stmt::PartitionInit { vector: "a".into(), empty: Side::Bottom }.exec(&mut s).unwrap();
        let r = Stmt::Repartition { vector: "a".into(), from: Side::Bottom }.exec(&mut s);
        assert!(matches!(r, Err(ExecError::Partition { .. })));
    }
}
