//! Symbolic expressions over scalars, indexed arrays, bounded sums and
//! partitioned vectors.
//!
//! Sums are stored with an inclusive lower and an exclusive upper bound:
//! `Sum { lo: k, hi: n, .. }` ranges over `k <= i < n`.

use std::collections::BTreeSet;
use std::fmt;
use std::ops;

use num::BigInt;

/// One region of a partitioned vector.
///
/// `Top`/`Bottom` are the two halves of a 2-way partition; `Front`,
/// `Current` and `Back` are the three regions of a repartition, where
/// `Current` always holds exactly one element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Part {
    Whole,
    Top,
    Bottom,
    Front,
    Current,
    Back,
}

impl Part {
    pub fn suffix(self) -> &'static str {
        match self {
            Part::Whole => "",
            Part::Top => "T",
            Part::Bottom => "B",
            Part::Front => "0",
            Part::Current => "1",
            Part::Back => "2",
        }
    }

    pub fn from_suffix(s: &str) -> Option<Part> {
        Some(match s {
            "T" => Part::Top,
            "B" => Part::Bottom,
            "0" => Part::Front,
            "1" => Part::Current,
            "2" => Part::Back,
            _ => return None,
        })
    }
}

/// A reference to a contiguous stack of regions of one vector.
///
/// An empty `parts` list denotes the empty vector.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VecRef {
    pub root: String,
    pub parts: Vec<Part>,
}

impl VecRef {
    pub fn whole(root: &str) -> Self {
        VecRef { root: root.to_string(), parts: vec![Part::Whole] }
    }

    pub fn part(root: &str, part: Part) -> Self {
        VecRef { root: root.to_string(), parts: vec![part] }
    }

    pub fn stack(root: &str, parts: &[Part]) -> Self {
        VecRef { root: root.to_string(), parts: parts.to_vec() }
    }

    pub fn empty(root: &str) -> Self {
        VecRef { root: root.to_string(), parts: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Parts must be adjacent regions of a single partitioning.
    pub fn is_well_formed(&self) -> bool {
        const TWO: [Part; 2] = [Part::Top, Part::Bottom];
        const THREE: [Part; 3] = [Part::Front, Part::Current, Part::Back];
        match self.parts.as_slice() {
            [] | [Part::Whole] => true,
            parts => [&TWO[..], &THREE[..]]
                .iter()
                .any(|run| run.windows(parts.len()).any(|w| w == parts)),
        }
    }

    pub fn mentions_repartition(&self) -> bool {
        self.parts
            .iter()
            .any(|p| matches!(p, Part::Front | Part::Current | Part::Back))
    }
}

impl fmt::Display for VecRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.parts.as_slice() {
            [] => write!(f, "empty({})", self.root),
            [Part::Whole] => write!(f, "{}", self.root),
            [p] => write!(f, "{}.{}", self.root, p.suffix()),
            parts => {
                write!(f, "cat(")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}", VecRef::part(&self.root, *p))?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Int(BigInt),
    Var(String),
    Elem { array: String, index: Box<Expr> },
    Sum { var: String, lo: Box<Expr>, hi: Box<Expr>, body: Box<Expr> },
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    /// `m(v)`: number of elements in a vector region.
    Len(VecRef),
    /// `π(v, χ)`: the polynomial with coefficients `v` evaluated at `χ`.
    Poly(VecRef, Box<Expr>),
    /// A single-element region used as a scalar (`α_1`).
    Ref(VecRef),
}

impl Expr {
    pub fn int(v: i64) -> Expr {
        Expr::Int(BigInt::from(v))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn elem(array: &str, index: Expr) -> Expr {
        Expr::Elem { array: array.to_string(), index: Box::new(index) }
    }

    pub fn sum(var: &str, lo: Expr, hi: Expr, body: Expr) -> Expr {
        Expr::Sum {
            var: var.to_string(),
            lo: Box::new(lo),
            hi: Box::new(hi),
            body: Box::new(body),
        }
    }

    pub fn pow(self, exp: Expr) -> Expr {
        Expr::Pow(Box::new(self), Box::new(exp))
    }

    pub fn len(r: VecRef) -> Expr {
        Expr::Len(r)
    }

    pub fn poly(r: VecRef, point: Expr) -> Expr {
        Expr::Poly(r, Box::new(point))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Expr::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Expr::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_int(&self, v: i64) -> bool {
        matches!(self, Expr::Int(i) if *i == BigInt::from(v))
    }

    /// Direct children, in a fixed order.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Int(_) | Expr::Var(_) | Expr::Len(_) | Expr::Ref(_) => vec![],
            Expr::Elem { index, .. } => vec![index],
            Expr::Sum { lo, hi, body, .. } => vec![lo, hi, body],
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                vec![a, b]
            }
            Expr::Neg(a) => vec![a],
            Expr::Poly(_, p) => vec![p],
        }
    }

    /// Free scalar variables (sum-bound variables excluded).
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(v) => {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
            Expr::Sum { var, lo, hi, body } => {
                lo.collect_free(bound, out);
                hi.collect_free(bound, out);
                bound.push(var.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            other => {
                for c in other.children() {
                    c.collect_free(bound, out);
                }
            }
        }
    }

    /// Every identifier appearing anywhere, bound or free.
    pub fn all_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |e| match e {
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Sum { var, .. } => {
                out.insert(var.clone());
            }
            Expr::Elem { array, .. } => {
                out.insert(array.clone());
            }
            _ => {}
        });
        out
    }

    pub fn walk(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    pub fn any(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= pred(e));
        found
    }

    pub fn mentions_var(&self, name: &str) -> bool {
        self.free_vars().contains(name)
    }

    /// True if the expression reads any element or region of `vector`.
    pub fn mentions_vector(&self, vector: &str) -> bool {
        self.any(&|e| match e {
            Expr::Elem { array, .. } => array == vector,
            Expr::Poly(r, _) | Expr::Ref(r) => r.root == vector && !r.is_empty(),
            _ => false,
        })
    }

    /// Vector references (from `Len`, `Poly` and `Ref`).
    pub fn vec_refs(&self) -> Vec<VecRef> {
        let mut out = Vec::new();
        self.walk(&mut |e| match e {
            Expr::Len(r) | Expr::Poly(r, _) | Expr::Ref(r) => out.push(r.clone()),
            _ => {}
        });
        out
    }

    /// Simultaneous, capture-avoiding substitution of expressions for free
    /// variables.
    pub fn substitute(&self, bindings: &[(String, Expr)]) -> Expr {
        if bindings.is_empty() {
            return self.clone();
        }
        match self {
            Expr::Var(v) => bindings
                .iter()
                .find(|(n, _)| n == v)
                .map(|(_, e)| e.clone())
                .unwrap_or_else(|| self.clone()),
            Expr::Int(_) | Expr::Len(_) | Expr::Ref(_) => self.clone(),
            Expr::Elem { array, index } => Expr::Elem {
                array: array.clone(),
                index: Box::new(index.substitute(bindings)),
            },
            Expr::Sum { var, lo, hi, body } => {
                let lo = lo.substitute(bindings);
                let hi = hi.substitute(bindings);
                let body_free = body.free_vars();
                let inner: Vec<(String, Expr)> = bindings
                    .iter()
                    .filter(|(n, _)| n != var && body_free.contains(n))
                    .cloned()
                    .collect();
                let captures = inner.iter().any(|(_, e)| e.mentions_var(var));
                if captures {
                    let mut avoid = body.all_names();
                    for (n, e) in &inner {
                        avoid.insert(n.clone());
                        avoid.extend(e.all_names());
                    }
                    let fresh = fresh_name(var, &avoid);
                    let renamed = body.substitute(&[(var.clone(), Expr::Var(fresh.clone()))]);
                    Expr::Sum {
                        var: fresh,
                        lo: Box::new(lo),
                        hi: Box::new(hi),
                        body: Box::new(renamed.substitute(&inner)),
                    }
                } else {
                    Expr::Sum {
                        var: var.clone(),
                        lo: Box::new(lo),
                        hi: Box::new(hi),
                        body: Box::new(body.substitute(&inner)),
                    }
                }
            }
            Expr::Add(a, b) => Expr::Add(Box::new(a.substitute(bindings)), Box::new(b.substitute(bindings))),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.substitute(bindings)), Box::new(b.substitute(bindings))),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.substitute(bindings)), Box::new(b.substitute(bindings))),
            Expr::Div(a, b) => Expr::Div(Box::new(a.substitute(bindings)), Box::new(b.substitute(bindings))),
            Expr::Pow(a, b) => Expr::Pow(Box::new(a.substitute(bindings)), Box::new(b.substitute(bindings))),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(bindings))),
            Expr::Poly(r, p) => Expr::Poly(r.clone(), Box::new(p.substitute(bindings))),
        }
    }

    pub fn substitute_one(&self, name: &str, value: Expr) -> Expr {
        self.substitute(&[(name.to_string(), value)])
    }

    /// Rewrites region paths of `root`: each part listed in `map` is replaced
    /// by the given stack of parts. Used for partition, repartition and merge
    /// steps, which rename regions without computing anything.
    pub fn rename_parts(&self, root: &str, map: &[(Part, Vec<Part>)]) -> Expr {
        let rename = |r: &VecRef| -> VecRef {
            if r.root != root {
                return r.clone();
            }
            let mut parts = Vec::new();
            for p in &r.parts {
                match map.iter().find(|(from, _)| from == p) {
                    Some((_, to)) => parts.extend(to.iter().copied()),
                    None => parts.push(*p),
                }
            }
            VecRef { root: r.root.clone(), parts }
        };
        self.map_refs(&rename)
    }

    pub fn map_refs(&self, f: &dyn Fn(&VecRef) -> VecRef) -> Expr {
        let b = |e: &Expr| Box::new(e.map_refs(f));
        match self {
            Expr::Int(_) | Expr::Var(_) => self.clone(),
            Expr::Len(r) => Expr::Len(f(r)),
            Expr::Ref(r) => Expr::Ref(f(r)),
            Expr::Poly(r, p) => Expr::Poly(f(r), b(p)),
            Expr::Elem { array, index } => Expr::Elem { array: array.clone(), index: b(index) },
            Expr::Sum { var, lo, hi, body } => Expr::Sum {
                var: var.clone(),
                lo: b(lo),
                hi: b(hi),
                body: b(body),
            },
            Expr::Add(x, y) => Expr::Add(b(x), b(y)),
            Expr::Sub(x, y) => Expr::Sub(b(x), b(y)),
            Expr::Mul(x, y) => Expr::Mul(b(x), b(y)),
            Expr::Div(x, y) => Expr::Div(b(x), b(y)),
            Expr::Pow(x, y) => Expr::Pow(b(x), b(y)),
            Expr::Neg(x) => Expr::Neg(b(x)),
        }
    }

    /// Checks the structural invariants: no sum shadows an enclosing sum's
    /// bound variable and every region path is well formed.
    pub fn is_well_formed(&self) -> bool {
        fn go(e: &Expr, bound: &mut Vec<String>) -> bool {
            match e {
                Expr::Sum { var, lo, hi, body } => {
                    if bound.contains(var) || !go(lo, bound) || !go(hi, bound) {
                        return false;
                    }
                    bound.push(var.clone());
                    let ok = go(body, bound);
                    bound.pop();
                    ok
                }
                Expr::Len(r) | Expr::Ref(r) => r.is_well_formed(),
                Expr::Poly(r, p) => r.is_well_formed() && go(p, bound),
                other => other.children().into_iter().all(|c| go(c, bound)),
            }
        }
        go(self, &mut Vec::new())
    }
}

pub(crate) fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    (1..)
        .map(|n| format!("{base}{n}"))
        .find(|c| !avoid.contains(c))
        .expect("unbounded counter")
}

/// `hi - 1`, written the way a person would (used when converting an
/// exclusive upper bound to an inclusive one).
pub fn pred_bound(hi: &Expr) -> Expr {
    match hi {
        Expr::Add(e, one) if one.is_int(1) => (**e).clone(),
        Expr::Int(v) => Expr::Int(v - 1),
        _ => hi.clone() - Expr::int(1),
    }
}

/// Inverse of [`pred_bound`].
pub fn succ_bound(hi: &Expr) -> Expr {
    match hi {
        Expr::Sub(e, one) if one.is_int(1) => (**e).clone(),
        Expr::Int(v) => Expr::Int(v + 1),
        _ => hi.clone() + Expr::int(1),
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $variant:ident) => {
        impl ops::$tr for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly_body() -> Expr {
        Expr::elem("a", Expr::var("i")) * Expr::var("x").pow(Expr::var("i") - Expr::var("k"))
    }

    #[test]
    fn substitute_index_into_sum_bounds() {
        let e = Expr::sum("i", Expr::var("k"), Expr::var("n"), poly_body());
        let k1 = Expr::var("k") - Expr::int(1);
        let out = e.substitute_one("k", k1.clone());
        let expected = Expr::sum(
            "i",
            k1.clone(),
            Expr::var("n"),
            Expr::elem("a", Expr::var("i")) * Expr::var("x").pow(Expr::var("i") - k1),
        );
        assert_eq!(out, expected);
    }

    #[test]
    fn substitute_plain_and_bound() {
        assert_eq!(Expr::var("y").substitute_one("y", Expr::int(0)), Expr::int(0));
        let e = Expr::sum("i", Expr::int(0), Expr::var("n"), Expr::elem("a", Expr::var("i")));
        assert_eq!(e.substitute_one("i", Expr::int(7)), e);
    }

    #[test]
    fn substitution_is_simultaneous() {
        let e = Expr::var("y") + Expr::var("k");
        let out = e.substitute(&[
            ("y".into(), Expr::var("k")),
            ("k".into(), Expr::var("y")),
        ]);
        assert_eq!(out, Expr::var("k") + Expr::var("y"));
    }

    #[test]
    fn capture_renames_bound_variable() {
        // sum_i a[i] * j   with j := i must not capture.
        let e = Expr::sum("i", Expr::int(0), Expr::var("n"), Expr::elem("a", Expr::var("i")) * Expr::var("j"));
        let out = e.substitute_one("j", Expr::var("i"));
        match out {
            Expr::Sum { var, body, .. } => {
                assert_ne!(var, "i");
                assert_eq!(*body, Expr::elem("a", Expr::var(&var)) * Expr::var("i"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vecref_well_formedness() {
        assert!(VecRef::whole("a").is_well_formed());
        assert!(VecRef::stack("a", &[Part::Current, Part::Back]).is_well_formed());
        assert!(VecRef::stack("a", &[Part::Top, Part::Bottom]).is_well_formed());
        assert!(!VecRef::stack("a", &[Part::Front, Part::Back]).is_well_formed());
        assert!(!VecRef::stack("a", &[Part::Top, Part::Back]).is_well_formed());
    }

    #[test]
    fn bound_conversion_round_trips() {
        for hi in [Expr::var("n"), Expr::var("k") + Expr::int(1), Expr::int(0), Expr::var("n") - Expr::int(1)] {
            assert_eq!(succ_bound(&pred_bound(&hi)), hi);
        }
    }
}
