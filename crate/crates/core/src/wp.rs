//! Weakest preconditions.
//!
//! Assignments substitute; partition steps rename regions of the affected
//! vector and perform no computation.

use thiserror::Error;

use crate::expr::{Expr, Part};
use crate::normal::Sizes;
use crate::predicate::Predicate;
use crate::stmt::{Side, Stmt, COUNTER};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WpError {
    #[error("wp is not defined for `{0}`")]
    UnsupportedStatement(String),
    #[error("`{0}` does not occur free in the predicate")]
    TargetAbsent(String),
}

type Renaming = Vec<(Part, Vec<Part>)>;

fn merge_renaming(from: Side) -> Renaming {
    match from {
        Side::Bottom => vec![(Part::Top, vec![Part::Front]), (Part::Bottom, vec![Part::Current, Part::Back])],
        Side::Top => vec![(Part::Top, vec![Part::Front, Part::Current]), (Part::Bottom, vec![Part::Back])],
    }
}

fn repartition_renaming(from: Side) -> Renaming {
    match from {
        Side::Bottom => vec![(Part::Top, vec![Part::Front, Part::Current]), (Part::Bottom, vec![Part::Back])],
        Side::Top => vec![(Part::Top, vec![Part::Front]), (Part::Bottom, vec![Part::Current, Part::Back])],
    }
}

fn mentions_repartition(r: &Predicate, vector: &str) -> bool {
    r.exprs()
        .flat_map(Expr::vec_refs)
        .any(|v| v.root == vector && v.mentions_repartition())
}

/// `wp(s, r)` by substitution and renaming, without normalization.
pub fn wp(s: &Stmt, r: &Predicate) -> Result<Predicate, WpError> {
    match s {
        Stmt::Skip => Ok(r.clone()),
        Stmt::Assign { targets, exprs } => {
            let bindings: Vec<(String, Expr)> = targets.iter().cloned().zip(exprs.iter().cloned()).collect();
            Ok(r.substitute(&bindings))
        }
        Stmt::Seq(a, b) => wp(a, &wp(b, r)?),
        Stmt::CounterIncr(e) => Ok(r.substitute(&[(COUNTER.to_string(), Expr::var(COUNTER) + e.clone())])),
        Stmt::PartitionInit { vector, empty } => {
            if mentions_repartition(r, vector) {
                return Err(WpError::UnsupportedStatement(s.to_string()));
            }
            let map = match empty {
                Side::Bottom => vec![(Part::Top, vec![Part::Whole]), (Part::Bottom, vec![])],
                Side::Top => vec![(Part::Top, vec![]), (Part::Bottom, vec![Part::Whole])],
            };
            Ok(r.rename_parts(vector, &map))
        }
        Stmt::Repartition { vector, .. } => {
            if mentions_repartition(r, vector) {
                return Err(WpError::UnsupportedStatement(s.to_string()));
            }
            Ok(r.clone())
        }
        Stmt::MergeBack { vector, from } => {
            if mentions_repartition(r, vector) {
                return Err(WpError::UnsupportedStatement(s.to_string()));
            }
            Ok(r.rename_parts(vector, &merge_renaming(*from)))
        }
        Stmt::While { .. } => Err(WpError::UnsupportedStatement(s.to_string())),
    }
}

/// `wp(s, r)` with every atom normalized.
pub fn wp_normalized(s: &Stmt, r: &Predicate, sizes: &Sizes) -> Result<Predicate, WpError> {
    Ok(wp(s, r)?.normalize_in(sizes))
}

/// The strongest postcondition of a repartition: the same facts, stated in
/// terms of the exposed regions.
pub fn forward_repartition(vector: &str, from: Side, r: &Predicate) -> Predicate {
    r.rename_parts(vector, &repartition_renaming(from))
}

pub const HOLE: &str = "ℰ";

/// Name of the unknown standing for `target` in a multi-target assignment.
pub fn hole_for(target: &str, single: bool) -> String {
    if single {
        HOLE.to_string()
    } else {
        format!("{HOLE}_{target}")
    }
}

/// `r` with a fresh unknown substituted for each target.
pub fn wp_symbolic_assign(targets: &[String], r: &Predicate) -> Result<(Predicate, Vec<String>), WpError> {
    let free = r.free_vars();
    if let Some(t) = targets.iter().find(|t| !free.contains(*t)) {
        return Err(WpError::TargetAbsent(t.clone()));
    }
    let holes: Vec<String> = targets.iter().map(|t| hole_for(t, targets.len() == 1)).collect();
    let bindings: Vec<(String, Expr)> = targets
        .iter()
        .zip(&holes)
        .map(|(t, h)| (t.clone(), Expr::var(h)))
        .collect();
    Ok((r.substitute(&bindings), holes))
}
