//! Concrete program states and exact evaluation of expressions.

use std::collections::BTreeMap;
use std::fmt;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::expr::{Expr, Part, VecRef};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("index {index} out of range for `{array}`")]
    IndexOutOfRange { array: String, index: String },
    #[error("division by zero")]
    DivisionByZero,
    #[error("expected an integer, found {0}")]
    NotAnInteger(String),
    #[error("exponent {0} too large")]
    ExponentTooLarge(String),
    #[error("region `{0}` is not available in this state")]
    MissingRegion(String),
    #[error("region `{0}` is not a single element")]
    NotScalar(String),
}

/// Partition state of one vector: `Top = [0, split)`, `Bottom = [split, len)`.
/// While an element is exposed at `p`: `Front = [0, p)`, `Current = [p, p+1)`,
/// `Back = [p+1, len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cursor {
    pub split: usize,
    pub exposed: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State {
    pub scalars: BTreeMap<String, BigRational>,
    pub vectors: BTreeMap<String, Vec<BigRational>>,
    pub cursors: BTreeMap<String, Cursor>,
}

pub fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

pub(crate) fn to_integer(v: &BigRational) -> Result<BigInt, EvalError> {
    if v.is_integer() {
        Ok(v.to_integer())
    } else {
        Err(EvalError::NotAnInteger(v.to_string()))
    }
}

pub(crate) fn pow_rational(base: &BigRational, exp: &BigInt) -> Result<BigRational, EvalError> {
    let e = exp
        .to_i32()
        .filter(|e| e.abs() <= 100_000)
        .ok_or_else(|| EvalError::ExponentTooLarge(exp.to_string()))?;
    if e < 0 && base.is_zero() {
        return Err(EvalError::DivisionByZero);
    }
    Ok(num::pow::Pow::pow(base, e))
}

impl State {
    pub fn new() -> Self {
        State::default()
    }

    pub fn with_scalar(mut self, name: &str, value: BigRational) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: BigRational) {
        self.scalars.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<&BigRational> {
        self.scalars.get(name)
    }

    /// Binds a vector and, when given, its size variable.
    pub fn bind_vector(&mut self, name: &str, size: Option<&str>, values: Vec<BigRational>) {
        if let Some(size) = size {
            self.set(size, rat(values.len() as i64));
        }
        self.vectors.insert(name.to_string(), values);
    }

    pub fn with_vector(mut self, name: &str, size: Option<&str>, values: &[i64]) -> Self {
        self.bind_vector(name, size, values.iter().map(|v| rat(*v)).collect());
        self
    }

    pub fn with_cursor(mut self, name: &str, split: usize, exposed: Option<usize>) -> Self {
        self.cursors.insert(name.to_string(), Cursor { split, exposed });
        self
    }

    fn part_range(&self, root: &str, part: Part) -> Result<(usize, usize), EvalError> {
        let len = self
            .vectors
            .get(root)
            .ok_or_else(|| EvalError::UnboundVariable(root.to_string()))?
            .len();
        let missing = || EvalError::MissingRegion(VecRef::part(root, part).to_string());
        if part == Part::Whole {
            return Ok((0, len));
        }
        let cursor = self.cursors.get(root).ok_or_else(missing)?;
        match part {
            Part::Whole => unreachable!(),
            Part::Top => Ok((0, cursor.split)),
            Part::Bottom => Ok((cursor.split, len)),
            Part::Front => cursor.exposed.map(|p| (0, p)).ok_or_else(missing),
            Part::Current => cursor.exposed.map(|p| (p, p + 1)).ok_or_else(missing),
            Part::Back => cursor.exposed.map(|p| (p + 1, len)).ok_or_else(missing),
        }
    }

    /// The elements a region reference denotes, in order.
    pub fn segment(&self, r: &VecRef) -> Result<Vec<BigRational>, EvalError> {
        let values = self
            .vectors
            .get(&r.root)
            .ok_or_else(|| EvalError::UnboundVariable(r.root.clone()))?;
        let mut out = Vec::new();
        for part in &r.parts {
            let (lo, hi) = self.part_range(&r.root, *part)?;
            if lo > hi || hi > values.len() {
                return Err(EvalError::MissingRegion(r.to_string()));
            }
            out.extend_from_slice(&values[lo..hi]);
        }
        Ok(out)
    }

    pub fn evaluate(&self, e: &Expr) -> Result<BigRational, EvalError> {
        Evaluator { state: self, locals: Vec::new() }.eval(e)
    }
}

struct Evaluator<'a> {
    state: &'a State,
    locals: Vec<(String, BigRational)>,
}

impl Evaluator<'_> {
    fn lookup(&self, name: &str) -> Result<BigRational, EvalError> {
        if let Some((_, v)) = self.locals.iter().rev().find(|(n, _)| n == name) {
            return Ok(v.clone());
        }
        self.state
            .scalars
            .get(name)
            .cloned()
            .ok_or_else(|| EvalError::UnboundVariable(name.to_string()))
    }

    fn eval_int(&mut self, e: &Expr) -> Result<BigInt, EvalError> {
        to_integer(&self.eval(e)?)
    }

    fn eval(&mut self, e: &Expr) -> Result<BigRational, EvalError> {
        Ok(match e {
            Expr::Int(v) => BigRational::from_integer(v.clone()),
            Expr::Var(v) => self.lookup(v)?,
            Expr::Elem { array, index } => {
                let idx = self.eval_int(index)?;
                let values = self
                    .state
                    .vectors
                    .get(array)
                    .ok_or_else(|| EvalError::UnboundVariable(array.clone()))?;
                idx.to_usize()
                    .and_then(|i| values.get(i))
                    .cloned()
                    .ok_or_else(|| EvalError::IndexOutOfRange { array: array.clone(), index: idx.to_string() })?
            }
            Expr::Sum { var, lo, hi, body } => {
                let lo = self.eval_int(lo)?;
                let hi = self.eval_int(hi)?;
                let mut acc = BigRational::zero();
                let mut i = lo;
                while i < hi {
                    self.locals.push((var.clone(), BigRational::from_integer(i.clone())));
                    let term = self.eval(body);
                    self.locals.pop();
                    acc += term?;
                    i += 1;
                }
                acc
            }
            Expr::Add(a, b) => self.eval(a)? + self.eval(b)?,
            Expr::Sub(a, b) => self.eval(a)? - self.eval(b)?,
            Expr::Mul(a, b) => self.eval(a)? * self.eval(b)?,
            Expr::Div(a, b) => {
                let num = self.eval(a)?;
                let den = self.eval(b)?;
                if den.is_zero() {
                    return Err(EvalError::DivisionByZero);
                }
                num / den
            }
            Expr::Pow(a, b) => {
                let base = self.eval(a)?;
                let exp = self.eval_int(b)?;
                pow_rational(&base, &exp)?
            }
            Expr::Neg(a) => -self.eval(a)?,
            Expr::Len(r) => rat(self.state.segment(r)?.len() as i64),
            Expr::Poly(r, point) => {
                let coeffs = self.state.segment(r)?;
                let x = self.eval(point)?;
                let mut acc = BigRational::zero();
                let mut power = BigRational::one();
                for c in coeffs {
                    acc += c * &power;
                    power *= &x;
                }
                acc
            }
            Expr::Ref(r) => {
                let seg = self.state.segment(r)?;
                match seg.as_slice() {
                    [v] => v.clone(),
                    _ => return Err(EvalError::NotScalar(r.to_string())),
                }
            }
        })
    }
}

pub fn format_rational(v: &BigRational) -> String {
    if v.is_integer() {
        v.to_integer().to_string()
    } else if v.is_negative() {
        format!("-{}/{}", v.numer().abs(), v.denom())
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

impl fmt::Display for State {
    /// `{a = (1, 2); n = 2; x = 1; cursor(a) = 1}`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut items = Vec::new();
        for (name, values) in &self.vectors {
            let vals: Vec<String> = values.iter().map(format_rational).collect();
            items.push(format!("{name} = ({})", vals.join(", ")));
        }
        for (name, v) in &self.scalars {
            items.push(format!("{name} = {}", format_rational(v)));
        }
        for (name, c) in &self.cursors {
            match c.exposed {
                Some(p) => items.push(format!("cursor({name}) = {}/{p}", c.split)),
                None => items.push(format!("cursor({name}) = {}", c.split)),
            }
        }
        write!(f, "{{{}}}", items.join("; "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body() -> Expr {
        Expr::elem("a", Expr::var("i")) * Expr::var("x").pow(Expr::var("i"))
    }

    fn s() -> State {
        State::new().with_vector("a", Some("n"), &[1, 2, 3]).with_scalar("x", rat(2))
    }

    #[test]
    fn empty_sum_is_zero() {
        let e = Expr::sum("i", Expr::int(0), Expr::int(0), body());
        assert_eq!(s().evaluate(&e).unwrap(), rat(0));
    }

    #[test]
    fn full_sum_matches_direct_summation() {
        // 1 + 2*2 + 3*4
        let e = Expr::sum("i", Expr::int(0), Expr::int(3), body());
        assert_eq!(s().evaluate(&e).unwrap(), rat(17));
    }

    #[test]
    fn poly_over_bottom_region() {
        let st = s().with_cursor("a", 1, None);
        let e = Expr::poly(VecRef::part("a", Part::Bottom), Expr::var("x"));
        assert_eq!(st.evaluate(&e).unwrap(), rat(8));
        assert_eq!(st.evaluate(&Expr::len(VecRef::part("a", Part::Top))).unwrap(), rat(1));
    }

    #[test]
    fn exposed_regions() {
        let st = s().with_cursor("a", 2, Some(1));
        assert_eq!(st.evaluate(&Expr::Ref(VecRef::part("a", Part::Current))).unwrap(), rat(2));
        let e = Expr::poly(VecRef::stack("a", &[Part::Current, Part::Back]), Expr::var("x"));
        assert_eq!(st.evaluate(&e).unwrap(), rat(8));
        assert_eq!(st.evaluate(&Expr::len(VecRef::empty("a"))).unwrap(), rat(0));
    }

    #[test]
    fn errors() {
        let st = s();
        assert_eq!(st.evaluate(&Expr::var("q")), Err(EvalError::UnboundVariable("q".into())));
        assert!(matches!(
            st.evaluate(&Expr::elem("a", Expr::int(3))),
            Err(EvalError::IndexOutOfRange { .. })
        ));
        assert_eq!(st.evaluate(&(Expr::int(1) / Expr::int(0))), Err(EvalError::DivisionByZero));
        assert_eq!(
            st.evaluate(&Expr::int(0).pow(Expr::int(-1))),
            Err(EvalError::DivisionByZero)
        );
        assert!(matches!(
            st.evaluate(&Expr::len(VecRef::part("a", Part::Top))),
            Err(EvalError::MissingRegion(_))
        ));
    }
}
