//! Algebraic normalization.
//!
//! Expressions are brought into a sum-of-monomials form ([`Nf`]) with exact
//! rational coefficients. Each monomial maps opaque factors (variables, array
//! elements, bounded sums, polynomial and length terms) to exponents, which
//! are themselves normal forms so that `x^(k+1)` and `x^k * x` coincide.
//!
//! Bounded sums are simplified on the way in:
//!
//! * ranges of constant width are folded (empty ranges become `0`);
//! * a lower bound `e - c` is peeled down to `e`, exposing the leading terms;
//! * an upper bound `e + c` is peeled down to `e`, exposing the trailing terms;
//! * factors that do not depend on the bound variable move outside the sum,
//!   including the constant part of a power such as `x^(i-k+1)`.
//!
//! Peeling a range of unknown width is only done where an empty range would
//! make the exposed term read outside its array, so the rewrite agrees with
//! the original wherever both are defined.

use std::collections::BTreeMap;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::expr::{Expr, Part, VecRef};
use crate::state::pow_rational;

const STEP_BUDGET: usize = 10_000;
const EXPAND_WIDTH: i64 = 16;
const EXPAND_POWER: i64 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error("normalization exceeded its budget of {0} rewrite steps")]
    BudgetExceeded(usize),
}

/// Maps each array to the name of its size variable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sizes(pub BTreeMap<String, String>);

impl Sizes {
    pub fn new() -> Self {
        Sizes::default()
    }

    pub fn with(mut self, array: &str, size: &str) -> Self {
        self.0.insert(array.to_string(), size.to_string());
        self
    }

    pub fn size_of(&self, array: &str) -> Option<&str> {
        self.0.get(array).map(String::as_str)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Nf {
    terms: BTreeMap<Mono, BigRational>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mono {
    factors: BTreeMap<Factor, Nf>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Factor {
    Elem(String, Nf),
    Seg(VecRef),
    Sum { var: String, lo: Nf, hi: Nf, body: Nf },
    Poly(VecRef, Nf),
    Len(String, Part),
    Recip(Nf),
    Pow(Nf, Nf),
    Var(String),
}

impl Factor {
    fn mentions(&self, name: &str) -> bool {
        match self {
            Factor::Var(v) => v == name,
            Factor::Elem(_, i) => i.mentions(name),
            Factor::Seg(_) | Factor::Len(..) => false,
            Factor::Sum { var, lo, hi, body } => {
                lo.mentions(name) || hi.mentions(name) || (var != name && body.mentions(name))
            }
            Factor::Poly(_, p) | Factor::Recip(p) => p.mentions(name),
            Factor::Pow(b, e) => b.mentions(name) || e.mentions(name),
        }
    }

    fn any(&self, pred: &dyn Fn(&Factor) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            Factor::Var(_) | Factor::Seg(_) | Factor::Len(..) => false,
            Factor::Elem(_, i) => i.any_factor(pred),
            Factor::Sum { lo, hi, body, .. } => {
                lo.any_factor(pred) || hi.any_factor(pred) || body.any_factor(pred)
            }
            Factor::Poly(_, p) | Factor::Recip(p) => p.any_factor(pred),
            Factor::Pow(b, e) => b.any_factor(pred) || e.any_factor(pred),
        }
    }

    fn to_expr(&self) -> Expr {
        match self {
            Factor::Var(v) => Expr::Var(v.clone()),
            Factor::Elem(a, i) => Expr::elem(a, i.to_expr()),
            Factor::Seg(r) => Expr::Ref(r.clone()),
            Factor::Sum { var, lo, hi, body } => Expr::sum(var, lo.to_expr(), hi.to_expr(), body.to_expr()),
            Factor::Poly(r, p) => Expr::poly(r.clone(), p.to_expr()),
            Factor::Len(root, part) => Expr::Len(VecRef::part(root, *part)),
            Factor::Recip(b) => Expr::int(1) / b.to_expr(),
            Factor::Pow(b, e) => b.to_expr().pow(e.to_expr()),
        }
    }
}

impl Mono {
    pub fn is_unit(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> impl Iterator<Item = (&Factor, &Nf)> {
        self.factors.iter()
    }

    pub fn single(f: Factor) -> Mono {
        let mut factors = BTreeMap::new();
        factors.insert(f, Nf::one());
        Mono { factors }
    }

    pub fn exponent_of(&self, f: &Factor) -> Option<&Nf> {
        self.factors.get(f)
    }

    fn mul(&self, other: &Mono) -> Mono {
        let mut factors = self.factors.clone();
        for (f, e) in &other.factors {
            let merged = match factors.get(f) {
                Some(prev) => prev.add(e),
                None => e.clone(),
            };
            if merged.is_zero() {
                factors.remove(f);
            } else {
                factors.insert(f.clone(), merged);
            }
        }
        Mono { factors }
    }

    fn pow(&self, exp: &Nf) -> Mono {
        let factors = self
            .factors
            .iter()
            .map(|(f, e)| (f.clone(), e.mul(exp)))
            .filter(|(_, e)| !e.is_zero())
            .collect();
        Mono { factors }
    }

    /// `self / other` when every factor of `other` occurs in `self` and the
    /// leftover exponents are integer constants.
    pub fn divide(&self, other: &Mono) -> Option<Mono> {
        let mut rest = self.factors.clone();
        for (f, e) in &other.factors {
            let have = rest.get(f)?;
            let left = have.sub(e);
            match left.as_const() {
                Some(c) if c.is_integer() => {
                    if c.is_zero() {
                        rest.remove(f);
                    } else {
                        rest.insert(f.clone(), left);
                    }
                }
                _ => return None,
            }
        }
        Some(Mono { factors: rest })
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.factors.iter().any(|(f, e)| f.mentions(name) || e.mentions(name))
    }

    /// Factors in display order: structured terms first, plain variables
    /// last in reverse alphabetical order (`y·x`, `z·x`).
    fn display_factors(&self) -> Vec<(&Factor, &Nf)> {
        let (vars, mut rest): (Vec<_>, Vec<_>) =
            self.factors.iter().partition(|(f, _)| matches!(f, Factor::Var(_)));
        rest.extend(vars.into_iter().rev());
        rest
    }

    /// Renders `coeff * self` for a positive coefficient.
    fn to_expr(&self, coeff: &BigRational) -> Expr {
        let mut num: Vec<Expr> = Vec::new();
        let mut den: Vec<Expr> = Vec::new();
        for (f, e) in self.display_factors() {
            if let Factor::Recip(b) = f {
                match e.as_const().and_then(|c| c.to_integer().to_i64().filter(|_| c.is_integer())) {
                    Some(c) if c > 0 => den.push(power(b.to_expr(), c)),
                    _ => num.push(f.to_expr().pow(e.to_expr())),
                }
                continue;
            }
            let fe = f.to_expr();
            match e.as_const() {
                Some(c) if c.is_integer() => {
                    let c = c.to_integer().to_i64().unwrap_or(i64::MAX);
                    if c > 0 {
                        num.push(power(fe, c));
                    } else {
                        den.push(power(fe, -c));
                    }
                }
                Some(_) => num.push(fe.pow(e.to_expr())),
                None => {
                    let (sym, c) = e.split_const();
                    match c.to_integer().to_i64() {
                        Some(c) if c > 0 && e.split_const().1.is_integer() => {
                            num.push(fe.clone().pow(sym.to_expr()));
                            num.push(power(fe, c));
                        }
                        _ => num.push(fe.pow(e.to_expr())),
                    }
                }
            }
        }
        let p = coeff.numer().clone();
        let q = coeff.denom().clone();
        if !p.is_one() || num.is_empty() {
            num.insert(0, Expr::Int(p));
        }
        if !q.is_one() {
            den.push(Expr::Int(q));
        }
        let product = |v: Vec<Expr>| v.into_iter().reduce(|a, b| a * b);
        let top = product(num).expect("numerator is never empty");
        match product(den) {
            Some(bottom) => top / bottom,
            None => top,
        }
    }
}

fn power(base: Expr, exp: i64) -> Expr {
    if exp == 1 {
        base
    } else {
        base.pow(Expr::int(exp))
    }
}

impl Nf {
    pub fn zero() -> Nf {
        Nf::default()
    }

    pub fn one() -> Nf {
        Nf::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Nf {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Mono::default(), c);
        }
        Nf { terms }
    }

    pub fn int(v: i64) -> Nf {
        Nf::constant(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn factor(f: Factor) -> Nf {
        Nf::term(Mono::single(f), BigRational::one())
    }

    pub fn var(name: &str) -> Nf {
        Nf::factor(Factor::Var(name.to_string()))
    }

    pub fn term(m: Mono, c: BigRational) -> Nf {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Nf { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &BigRational)> {
        self.terms.iter()
    }

    pub fn as_const(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_unit().then(|| c.clone())
            }
            _ => None,
        }
    }

    /// Splits into the non-constant part and the constant term.
    pub fn split_const(&self) -> (Nf, BigRational) {
        let mut rest = self.clone();
        let c = rest.terms.remove(&Mono::default()).unwrap_or_else(BigRational::zero);
        (rest, c)
    }

    pub fn single_term(&self) -> Option<(&Mono, &BigRational)> {
        if self.terms.len() == 1 {
            self.terms.iter().next()
        } else {
            None
        }
    }

    pub fn add(&self, other: &Nf) -> Nf {
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            let sum = terms.get(m).cloned().unwrap_or_else(BigRational::zero) + c;
            if sum.is_zero() {
                terms.remove(m);
            } else {
                terms.insert(m.clone(), sum);
            }
        }
        Nf { terms }
    }

    pub fn scale(&self, k: &BigRational) -> Nf {
        if k.is_zero() {
            return Nf::zero();
        }
        Nf { terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect() }
    }

    pub fn neg(&self) -> Nf {
        self.scale(&-BigRational::one())
    }

    pub fn sub(&self, other: &Nf) -> Nf {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Nf) -> Nf {
        let mut acc = Nf::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                acc = acc.add(&Nf::term(m1.mul(m2), c1 * c2));
            }
        }
        acc
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.terms.keys().any(|m| m.mentions(name))
    }

    /// True if any factor, at any depth, satisfies `pred`.
    pub fn any_factor(&self, pred: &dyn Fn(&Factor) -> bool) -> bool {
        self.terms
            .keys()
            .any(|m| m.factors.iter().any(|(f, e)| f.any(pred) || e.any_factor(pred)))
    }

    pub fn to_expr(&self) -> Expr {
        let mut ordered: Vec<(&Mono, &BigRational)> =
            self.terms.iter().filter(|(m, _)| !m.is_unit()).collect();
        if let Some(c) = self.terms.get(&Mono::default()) {
            ordered.push((self.terms.keys().next().unwrap(), c));
        }
        let mut acc: Option<Expr> = None;
        for (m, c) in ordered {
            let t = m.to_expr(&c.abs());
            acc = Some(match (acc, c.is_negative()) {
                (None, false) => t,
                (None, true) if m.is_unit() && c.is_integer() => Expr::Int(c.to_integer()),
                (None, true) => -t,
                (Some(a), false) => a + t,
                (Some(a), true) => a - t,
            });
        }
        acc.unwrap_or_else(|| Expr::int(0))
    }
}

pub struct Normalizer<'a> {
    sizes: &'a Sizes,
    steps: usize,
}

impl<'a> Normalizer<'a> {
    pub fn new(sizes: &'a Sizes) -> Self {
        Normalizer { sizes, steps: 0 }
    }

    fn tick(&mut self) -> Result<(), NormalizeError> {
        self.steps += 1;
        if self.steps > STEP_BUDGET {
            Err(NormalizeError::BudgetExceeded(STEP_BUDGET))
        } else {
            Ok(())
        }
    }

    pub fn nf(&mut self, e: &Expr) -> Result<Nf, NormalizeError> {
        Ok(match e {
            Expr::Int(v) => Nf::constant(BigRational::from_integer(v.clone())),
            Expr::Var(v) => Nf::var(v),
            Expr::Elem { array, index } => Nf::factor(Factor::Elem(array.clone(), self.nf(index)?)),
            Expr::Add(a, b) => self.nf(a)?.add(&self.nf(b)?),
            Expr::Sub(a, b) => self.nf(a)?.sub(&self.nf(b)?),
            Expr::Mul(a, b) => self.nf(a)?.mul(&self.nf(b)?),
            Expr::Neg(a) => self.nf(a)?.neg(),
            Expr::Div(a, b) => {
                let den = self.nf(b)?;
                self.nf(a)?.mul(&inverse(&den))
            }
            Expr::Pow(a, b) => {
                let base = self.nf(a)?;
                let exp = self.nf(b)?;
                pow_nf(&base, &exp)
            }
            Expr::Len(r) => len_nf(r),
            Expr::Poly(r, p) => {
                let point = self.nf(p)?;
                poly_nf(&r.root, &r.parts, &point)
            }
            Expr::Ref(r) => Nf::factor(Factor::Seg(r.clone())),
            Expr::Sum { var, lo, hi, body } => self.nf_sum(var, lo, hi, body)?,
        })
    }

    fn nf_sum(&mut self, var: &str, lo: &Expr, hi: &Expr, body: &Expr) -> Result<Nf, NormalizeError> {
        let lo_n = self.nf(lo)?;
        let hi_n = self.nf(hi)?;
        if let Some(width) = hi_n.sub(&lo_n).as_const() {
            if !width.is_positive() {
                self.tick()?;
                return Ok(Nf::zero());
            }
            if width.is_integer() && width <= BigRational::from_integer(EXPAND_WIDTH.into()) {
                self.tick()?;
                let w = width.to_integer().to_i64().unwrap_or(0);
                let mut acc = Nf::zero();
                for j in 0..w {
                    let at = lo_n.add(&Nf::int(j)).to_expr();
                    acc = acc.add(&self.nf(&body.substitute_one(var, at))?);
                }
                return Ok(acc);
            }
        }

        let (lo_sym, lo_c) = lo_n.split_const();
        if lo_c.is_integer() && lo_c.is_negative() && !lo_sym.is_zero() && self.lower_peel_safe(var, &hi_n, body) {
            self.tick()?;
            let head = self.nf(&body.substitute_one(var, lo_n.to_expr()))?;
            let next = lo_n.add(&Nf::one()).to_expr();
            let rest = self.nf_sum(var, &next, hi, body)?;
            return Ok(head.add(&rest));
        }

        let (hi_sym, hi_c) = hi_n.split_const();
        if hi_c.is_integer() && hi_c.is_positive() && !hi_sym.is_zero() && upper_peel_safe(var, &lo_n, body) {
            self.tick()?;
            let last = hi_n.sub(&Nf::one()).to_expr();
            let init = self.nf_sum(var, lo, &last, body)?;
            let tail = self.nf(&body.substitute_one(var, last))?;
            return Ok(init.add(&tail));
        }

        let body_n = self.nf(body)?;
        if body_n.is_zero() {
            return Ok(Nf::zero());
        }
        let Some((mono, coeff)) = body_n.single_term() else {
            return Ok(Nf::factor(Factor::Sum { var: var.to_string(), lo: lo_n, hi: hi_n, body: body_n }));
        };
        let mut inside = Mono::default();
        let mut outside = Mono::default();
        for (f, e) in &mono.factors {
            let factor_dep = f.mentions(var);
            let exp_dep = e.mentions(var);
            if !factor_dep && !exp_dep {
                outside.factors.insert(f.clone(), e.clone());
            } else if !factor_dep {
                let (sym, c) = e.split_const();
                if c.is_integer() && c.is_positive() {
                    inside.factors.insert(f.clone(), sym);
                    outside.factors.insert(f.clone(), Nf::constant(c));
                } else {
                    inside.factors.insert(f.clone(), e.clone());
                }
            } else {
                inside.factors.insert(f.clone(), e.clone());
            }
        }
        let sum = Factor::Sum {
            var: var.to_string(),
            lo: lo_n,
            hi: hi_n,
            body: Nf::term(inside, BigRational::one()),
        };
        Ok(Nf::term(outside.mul(&Mono::single(sum)), coeff.clone()))
    }

    /// Peeling `lo` off `[lo, hi)` is safe when `hi` is the size of an array
    /// the body reads at the bound index: an empty range then puts the
    /// exposed element out of bounds.
    fn lower_peel_safe(&self, var: &str, hi: &Nf, body: &Expr) -> bool {
        arrays_read_at(var, body).iter().any(|arr| {
            self.sizes
                .size_of(arr)
                .is_some_and(|size| *hi == Nf::var(size))
        })
    }
}

/// Peeling `hi - 1` off `[lo, hi)` is safe when `lo <= 0` and the body reads
/// an array at the bound index: an empty range then exposes a negative index.
fn upper_peel_safe(var: &str, lo: &Nf, body: &Expr) -> bool {
    lo.as_const().is_some_and(|c| !c.is_positive()) && !arrays_read_at(var, body).is_empty()
}

fn arrays_read_at(var: &str, body: &Expr) -> Vec<String> {
    let mut out = Vec::new();
    body.walk(&mut |e| {
        if let Expr::Elem { array, index } = e {
            if index.as_var() == Some(var) {
                out.push(array.clone());
            }
        }
    });
    out
}

fn inverse(den: &Nf) -> Nf {
    match den.as_const() {
        Some(c) if c.is_zero() => Nf::factor(Factor::Recip(Nf::zero())),
        Some(c) => Nf::constant(c.recip()),
        None if den.single_term().is_some() => pow_nf(den, &Nf::int(-1)),
        None => Nf::factor(Factor::Recip(den.clone())),
    }
}

fn opaque_pow(base: &Nf, exp: &Nf) -> Nf {
    Nf::factor(Factor::Pow(base.clone(), exp.clone()))
}

fn pow_nf(base: &Nf, exp: &Nf) -> Nf {
    if let Some(c) = exp.as_const() {
        if !c.is_integer() {
            return opaque_pow(base, exp);
        }
        let c = c.to_integer();
        if c.is_zero() {
            return Nf::one();
        }
        if base.is_zero() {
            return if c.is_positive() { Nf::zero() } else { opaque_pow(base, exp) };
        }
        if let Some((m, q)) = base.single_term() {
            return match pow_rational(q, &c) {
                Ok(coeff) => Nf::term(m.pow(exp), coeff),
                Err(_) => opaque_pow(base, exp),
            };
        }
        let small = c.to_i64().filter(|v| v.abs() <= EXPAND_POWER);
        return match small {
            Some(v) if v > 0 => (1..v).fold(base.clone(), |acc, _| acc.mul(base)),
            Some(v) => {
                let mut m = Mono::default();
                m.factors.insert(Factor::Recip(base.clone()), Nf::int(-v));
                Nf::term(m, BigRational::one())
            }
            None => opaque_pow(base, exp),
        };
    }
    match base.single_term() {
        Some((m, q)) if !m.is_unit() => {
            let powered = Nf::term(m.pow(exp), BigRational::one());
            if q.is_one() {
                powered
            } else {
                powered.mul(&opaque_pow(&Nf::constant(q.clone()), exp))
            }
        }
        _ => opaque_pow(base, exp),
    }
}

fn len_part(root: &str, part: Part) -> Nf {
    let len = |p| Nf::factor(Factor::Len(root.to_string(), p));
    match part {
        Part::Whole | Part::Top | Part::Front => len(part),
        Part::Bottom => len(Part::Whole).sub(&len(Part::Top)),
        Part::Current => Nf::one(),
        Part::Back => len(Part::Whole).sub(&len(Part::Front)).sub(&Nf::one()),
    }
}

fn len_nf(r: &VecRef) -> Nf {
    r.parts.iter().fold(Nf::zero(), |acc, p| acc.add(&len_part(&r.root, *p)))
}

/// `π((v_1; v_2; ...), χ) = π(v_1, χ) + π((v_2; ...), χ) χ^{m(v_1)}`.
fn poly_nf(root: &str, parts: &[Part], point: &Nf) -> Nf {
    let Some((first, rest)) = parts.split_first() else {
        return Nf::zero();
    };
    let head = match first {
        Part::Current => Nf::factor(Factor::Seg(VecRef::part(root, Part::Current))),
        p => Nf::factor(Factor::Poly(VecRef::part(root, *p), point.clone())),
    };
    if rest.is_empty() {
        return head;
    }
    let shift = pow_nf(point, &len_part(root, *first));
    head.add(&poly_nf(root, rest, point).mul(&shift))
}

pub fn try_normalize_in(e: &Expr, sizes: &Sizes) -> Result<Expr, NormalizeError> {
    Ok(Normalizer::new(sizes).nf(e)?.to_expr())
}

pub fn nf_in(e: &Expr, sizes: &Sizes) -> Nf {
    Normalizer::new(sizes)
        .nf(e)
        .unwrap_or_else(|err| panic!("internal error: {err} while normalizing {e:?}"))
}

/// Normalizes with knowledge of which variables hold array sizes.
pub fn normalize_in(e: &Expr, sizes: &Sizes) -> Expr {
    nf_in(e, sizes).to_expr()
}

/// Normalizes without array-size knowledge; ranges of unknown width are then
/// never peeled.
pub fn normalize(e: &Expr) -> Expr {
    normalize_in(e, &Sizes::default())
}
