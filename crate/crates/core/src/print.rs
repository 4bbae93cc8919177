//! Printing expressions, predicates and statements.
//!
//! [`Notation::Ascii`] is the machine-readable syntax shared by `.spec` and
//! `.wks` files and parses back to the same tree. The other notations are
//! for people and are not parsed.

use std::collections::BTreeMap;

use crate::expr::{pred_bound, Expr, Part, VecRef};
use crate::predicate::{Atom, Predicate};
use crate::stmt::{Side, Stmt};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Notation {
    Ascii,
    Unicode,
    Latex,
}

#[derive(Debug, Clone)]
pub struct Printer {
    pub notation: Notation,
    /// Display names for scalar variables (`y` shown as `ψ`).
    pub names: BTreeMap<String, String>,
    /// Display name of the exposed element of each vector (`a` -> `α`).
    pub elements: BTreeMap<String, String>,
}

const ADD: u8 = 1;
const MUL: u8 = 2;
const NEG: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

impl Printer {
    pub fn new(notation: Notation) -> Self {
        Printer { notation, names: BTreeMap::new(), elements: BTreeMap::new() }
    }

    pub fn rename(mut self, from: &str, to: &str) -> Self {
        self.names.insert(from.to_string(), to.to_string());
        self
    }

    pub fn element(mut self, vector: &str, name: &str) -> Self {
        self.elements.insert(vector.to_string(), name.to_string());
        self
    }

    fn name(&self, n: &str) -> String {
        let shown = self.names.get(n).map(String::as_str).unwrap_or(n);
        match self.notation {
            Notation::Latex => latex_name(shown),
            _ => shown.to_string(),
        }
    }

    fn sym(&self, ascii: &'static str, unicode: &'static str, latex: &'static str) -> &'static str {
        match self.notation {
            Notation::Ascii => ascii,
            Notation::Unicode => unicode,
            Notation::Latex => latex,
        }
    }

    pub fn expr(&self, e: &Expr) -> String {
        self.go(e, 0)
    }

    fn subscript(&self, base: &str, sub: &str) -> String {
        if sub.chars().count() == 1 {
            format!("{base}_{sub}")
        } else {
            format!("{base}_{{{sub}}}")
        }
    }

    fn region(&self, r: &VecRef) -> String {
        if self.notation == Notation::Ascii {
            return r.to_string();
        }
        let root = self.name(&r.root);
        let one = |p: Part| match p {
            Part::Whole => root.clone(),
            Part::Current => match self.elements.get(&r.root) {
                Some(el) => {
                    let el = if self.notation == Notation::Latex { latex_name(el) } else { el.clone() };
                    self.subscript(&el, "1")
                }
                None => self.subscript(&root, "1"),
            },
            p => self.subscript(&root, p.suffix()),
        };
        match r.parts.as_slice() {
            [] => self.sym("", "()", "()").to_string(),
            [p] => one(*p),
            parts => {
                let items: Vec<String> = parts.iter().map(|p| one(*p)).collect();
                format!("({})", items.join("; "))
            }
        }
    }

    fn wrap(&self, s: String, own: u8, ctx: u8) -> String {
        if own < ctx {
            match self.notation {
                Notation::Latex => format!("\\left({s}\\right)"),
                _ => format!("({s})"),
            }
        } else {
            s
        }
    }

    fn go(&self, e: &Expr, ctx: u8) -> String {
        match e {
            Expr::Int(v) => {
                if v.sign() == num::bigint::Sign::Minus {
                    let s = format!("{}{}", self.sym("-", "−", "-"), -v);
                    self.wrap(s, NEG, ctx)
                } else {
                    v.to_string()
                }
            }
            Expr::Var(v) => self.name(v),
            Expr::Elem { array, index } => {
                let arr = self.name(array);
                match self.notation {
                    Notation::Ascii => format!("{arr}[{}]", self.go(index, 0)),
                    _ => self.subscript(&arr, &self.go(index, 0)),
                }
            }
            Expr::Sum { var, lo, hi, body } => {
                let top = pred_bound(hi);
                match self.notation {
                    Notation::Ascii => format!(
                        "sum({var}, {}, {}, {})",
                        self.go(lo, 0),
                        self.go(&top, 0),
                        self.go(body, 0)
                    ),
                    Notation::Unicode => {
                        let s = format!(
                            "Σ_{{{}={}}}^{{{}}} {}",
                            self.name(var),
                            self.go(lo, 0),
                            self.go(&top, 0),
                            self.go(body, MUL)
                        );
                        self.wrap(s, ADD, ctx.min(MUL))
                    }
                    Notation::Latex => {
                        let s = format!(
                            "\\sum_{{{}={}}}^{{{}}} {}",
                            self.name(var),
                            self.go(lo, 0),
                            self.go(&top, 0),
                            self.go(body, MUL)
                        );
                        self.wrap(s, ADD, ctx.min(MUL))
                    }
                }
            }
            Expr::Add(a, b) => {
                let s = format!("{} + {}", self.go(a, ADD), self.go(b, MUL));
                self.wrap(s, ADD, ctx)
            }
            Expr::Sub(a, b) => {
                let s = format!("{} {} {}", self.go(a, ADD), self.sym("-", "−", "-"), self.go(b, MUL));
                self.wrap(s, ADD, ctx)
            }
            Expr::Mul(a, b) => {
                let s = format!("{}{}{}", self.go(a, MUL), self.sym(" * ", "·", " \\cdot "), self.go(b, NEG));
                self.wrap(s, MUL, ctx)
            }
            Expr::Div(a, b) => {
                let s = format!("{} / {}", self.go(a, MUL), self.go(b, NEG));
                self.wrap(s, MUL, ctx)
            }
            Expr::Neg(a) if self.notation == Notation::Ascii && matches!(**a, Expr::Int(_)) => {
                self.wrap(format!("-({})", self.go(a, 0)), NEG, ctx)
            }
            Expr::Neg(a) => {
                let s = format!("{}{}", self.sym("-", "−", "-"), self.go(a, POW));
                self.wrap(s, NEG, ctx)
            }
            Expr::Pow(a, b) => {
                let base = self.go(a, ATOM);
                let s = match self.notation {
                    Notation::Ascii => format!("{base}^{}", self.go(b, NEG)),
                    _ => {
                        let exp = self.go(b, 0);
                        if exp.chars().count() == 1 {
                            format!("{base}^{exp}")
                        } else {
                            format!("{base}^{{{exp}}}")
                        }
                    }
                };
                self.wrap(s, POW, ctx)
            }
            Expr::Len(r) => match self.notation {
                Notation::Ascii => format!("len({r})"),
                _ => format!("m({})", self.region(r)),
            },
            Expr::Poly(r, p) => match self.notation {
                Notation::Ascii => format!("poly({r}, {})", self.go(p, 0)),
                Notation::Unicode => format!("π({}, {})", self.region(r), self.go(p, 0)),
                Notation::Latex => format!("\\pi({}, {})", self.region(r), self.go(p, 0)),
            },
            Expr::Ref(r) => self.region(r),
        }
    }

    pub fn atom(&self, a: &Atom) -> String {
        let (op, l, r) = match a {
            Atom::True => return self.sym("true", "true", "\\mathrm{true}").to_string(),
            Atom::Eq(l, r) => ("=", l, r),
            Atom::Le(l, r) => (self.sym("<=", "≤", "\\le"), l, r),
            Atom::Lt(l, r) => ("<", l, r),
            Atom::Ne(l, r) => (self.sym("!=", "≠", "\\ne"), l, r),
        };
        format!("{} {op} {}", self.expr(l), self.expr(r))
    }

    pub fn predicate(&self, p: &Predicate) -> String {
        if p.conjuncts.is_empty() {
            return self.atom(&Atom::True);
        }
        let sep = self.sym(" && ", " ∧ ", " \\wedge ");
        p.conjuncts.iter().map(|a| self.atom(a)).collect::<Vec<_>>().join(sep)
    }
}

impl Printer {
    /// Words inside a statement; LaTeX needs them out of math mode.
    fn text(&self, w: &str) -> String {
        match self.notation {
            Notation::Latex => format!("\\text{{ {w} }}"),
            _ => w.to_string(),
        }
    }

    fn partition(&self, v: &str, three: bool) -> String {
        let r = |p: Part| self.region(&VecRef::part(v, p));
        if three {
            format!("({}; {}; {})", r(Part::Front), r(Part::Current), r(Part::Back))
        } else {
            format!("({}; {})", r(Part::Top), r(Part::Bottom))
        }
    }

    pub fn stmt(&self, s: &Stmt) -> String {
        let arrow = |u: &'static str, l: &'static str| self.sym("", u, l);
        match s {
            Stmt::Skip => "skip".to_string(),
            Stmt::Assign { targets, exprs } => {
                let ts: Vec<String> = targets.iter().map(|t| self.name(t)).collect();
                let es: Vec<String> = exprs.iter().map(|e| self.expr(e)).collect();
                format!("{} := {}", ts.join(", "), es.join(", "))
            }
            Stmt::Seq(..) => {
                let parts: Vec<String> = s.flatten().into_iter().map(|x| self.stmt(x)).collect();
                parts.join("; ")
            }
            Stmt::While { guard, body } => {
                format!("while {} do {} od", self.predicate(guard), self.stmt(body))
            }
            Stmt::PartitionInit { vector, empty } => match self.notation {
                Notation::Ascii => format!("partition {vector} empty-{}", empty.keyword()),
                _ => {
                    let half = match empty {
                        Side::Top => Part::Top,
                        Side::Bottom => Part::Bottom,
                    };
                    format!(
                        "{} {} {} {} {} {} {}",
                        self.text("partition"),
                        self.region(&VecRef::whole(vector)),
                        arrow("→", "\\rightarrow"),
                        self.partition(vector, false),
                        self.text("where"),
                        self.region(&VecRef::part(vector, half)),
                        self.text("has 0 elements"),
                    )
                }
            },
            Stmt::Repartition { vector, from } => match self.notation {
                Notation::Ascii => format!("repartition {vector} from-{}", from.keyword()),
                _ => format!(
                    "{} {} {} {}",
                    self.text("repartition"),
                    self.partition(vector, false),
                    arrow("→", "\\rightarrow"),
                    self.partition(vector, true)
                ),
            },
            Stmt::MergeBack { vector, from } => match self.notation {
                Notation::Ascii => format!("merge {vector} from-{}", from.keyword()),
                _ => format!(
                    "{} {} {} {}",
                    self.text("continue with"),
                    self.partition(vector, false),
                    arrow("←", "\\leftarrow"),
                    self.partition(vector, true)
                ),
            },
            Stmt::CounterIncr(e) => match self.notation {
                Notation::Ascii => format!("{} += {}", crate::stmt::COUNTER, self.go(e, ADD)),
                _ => format!("{c} := {c} + {}", self.go(e, MUL), c = crate::stmt::COUNTER),
            },
        }
    }
}

pub fn atom(a: &Atom, p: &Printer) -> String {
    p.atom(a)
}

pub fn predicate(pred: &Predicate, p: &Printer) -> String {
    p.predicate(pred)
}

pub fn ascii(e: &Expr) -> String {
    Printer::new(Notation::Ascii).expr(e)
}

pub fn unicode(e: &Expr) -> String {
    Printer::new(Notation::Unicode).expr(e)
}

fn latex_name(n: &str) -> String {
    let (head, tail) = match n.split_once('_') {
        Some((h, t)) => (h, Some(t)),
        None => (n, None),
    };
    let mut out = String::new();
    for ch in head.chars() {
        let mapped = match ch {
            'ψ' => "\\psi ",
            'χ' => "\\chi ",
            'α' => "\\alpha ",
            'π' => "\\pi ",
            'ℰ' => "\\mathcal{E}",
            _ => {
                out.push(ch);
                continue;
            }
        };
        out.push_str(mapped);
    }
    let mut out = out.trim_end().to_string();
    if head.chars().count() > 1 && !head.starts_with('ℰ') && head.chars().all(char::is_alphanumeric) {
        out = format!("\\mathit{{{out}}}");
    }
    let suffix: String = head.chars().skip_while(|c| *c == 'ℰ').collect();
    if head.starts_with('ℰ') && !suffix.is_empty() {
        out = format!("\\mathcal{{E}}_{{{suffix}}}");
    }
    match tail {
        Some(t) => format!("{out}_{{{t}}}"),
        None => out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Expr {
        Expr::var(n)
    }

    #[test]
    fn ascii_forms() {
        let e = Expr::sum("i", Expr::int(0), v("n"), Expr::elem("a", v("i")) * v("x").pow(v("i")));
        assert_eq!(ascii(&e), "sum(i, 0, n - 1, a[i] * x^i)");
        assert_eq!(ascii(&(v("a") - (v("b") - v("c")))), "a - (b - c)");
        assert_eq!(ascii(&(-(v("a") * v("b")))), "-(a * b)");
        assert_eq!(ascii(&Expr::poly(VecRef::part("a", Part::Bottom), v("x"))), "poly(a.B, x)");
    }

    #[test]
    fn unicode_forms() {
        let e = Expr::elem("a", v("k") - Expr::int(1)) + v("y") * v("x");
        assert_eq!(unicode(&e), "a_{k − 1} + y·x");
        let s = Expr::sum("i", v("k"), v("n"), Expr::elem("a", v("i")) * v("x").pow(v("i") - v("k")));
        assert_eq!(unicode(&(s * v("x"))), "(Σ_{i=k}^{n − 1} a_i·x^{i − k})·x");
        let p = Printer::new(Notation::Unicode).rename("y", "ψ").rename("x", "χ").element("a", "α");
        let upd = Expr::Ref(VecRef::part("a", Part::Current)) + v("y") * v("x");
        assert_eq!(p.expr(&upd), "α_1 + ψ·χ");
    }

    #[test]
    fn latex_names() {
        assert_eq!(latex_name("ψ"), "\\psi");
        assert_eq!(latex_name("ℰ0"), "\\mathcal{E}_{0}");
        assert_eq!(latex_name("k"), "k");
    }
}
