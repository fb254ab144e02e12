use std::collections::HashMap;
use thiserror::Error;

use super::{Expr, Func, Node, Point, Symbol};
use crate::numeric::Real;

/// A numerical value together with the magnitude of the largest
/// intermediate quantity that produced it. Cancellation below
/// `tolerance * scale` is indistinguishable from an exact zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Value {
    pub v: Real,
    pub scale: f64,
}

impl Value {
    pub const ZERO: Value = Value { v: Real::ZERO, scale: 0.0 };

    pub fn exact(v: Real) -> Value {
        Value { v, scale: v.mag() }
    }

    pub fn is_negligible(&self, tolerance: f64) -> bool {
        self.v.mag() <= tolerance * self.scale
    }

    pub fn add(self, o: Value) -> Value {
        let v = self.v + o.v;
        Value { v, scale: self.scale.max(o.scale).max(v.mag()) }
    }

    pub fn sub(self, o: Value) -> Value {
        self.add(o.neg())
    }

    pub fn neg(self) -> Value {
        Value { v: -self.v, scale: self.scale }
    }

    pub fn mul(self, o: Value) -> Value {
        Value { v: self.v * o.v, scale: self.scale * o.scale }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
#[error("cannot evaluate `{expr}` at the sample point: {reason}")]
pub struct DomainError {
    pub expr: String,
    pub reason: &'static str,
}

impl DomainError {
    fn new(e: &Expr, reason: &'static str) -> DomainError {
        DomainError { expr: e.to_string(), reason }
    }
}

/// Evaluates expressions at one point, memoizing atoms so that repeated
/// subterms across a batch of expressions are computed once.
pub struct Evaluator<'p> {
    point: &'p Point,
    tolerance: f64,
    vars: HashMap<Symbol, Real>,
    atoms: HashMap<Expr, Value>,
}

impl<'p> Evaluator<'p> {
    pub fn new(point: &'p Point, tolerance: f64) -> Evaluator<'p> {
        Evaluator { point, tolerance, vars: HashMap::new(), atoms: HashMap::new() }
    }

    pub fn point(&self) -> &Point {
        self.point
    }

    pub fn var(&mut self, s: &Symbol) -> Real {
        if let Some(v) = self.vars.get(s) {
            return *v;
        }
        let v = Real::from_rational(&self.point.value(s));
        self.vars.insert(s.clone(), v);
        v
    }

    pub fn eval(&mut self, e: &Expr) -> Result<Value, DomainError> {
        match e.node() {
            Node::Rational(_) => Ok(Value::exact(e.approx().expect("rational nodes carry a value"))),
            Node::Var(s) => Ok(Value::exact(self.var(s))),
            Node::Sum(xs) => {
                let mut acc = Value::ZERO;
                for x in xs {
                    acc = acc.add(self.eval(x)?);
                }
                Ok(acc)
            }
            Node::Product(xs) => {
                let mut acc = Value::exact(Real::ONE);
                for x in xs {
                    acc = acc.mul(self.eval(x)?);
                }
                Ok(acc)
            }
            Node::Power(..) | Node::Apply(..) => {
                if let Some(v) = self.atoms.get(e) {
                    return Ok(*v);
                }
                let v = self.eval_atom(e)?;
                if !v.v.is_finite() || !v.scale.is_finite() {
                    return Err(DomainError::new(e, "non-finite value"));
                }
                self.atoms.insert(e.clone(), v);
                Ok(v)
            }
        }
    }

    fn eval_atom(&mut self, e: &Expr) -> Result<Value, DomainError> {
        let tol = self.tolerance;
        match e.node() {
            Node::Power(b, n) => {
                let bv = self.eval(b)?;
                if *n < 0 && bv.is_negligible(tol) {
                    return Err(DomainError::new(e, "division by zero"));
                }
                let v = bv.v.powi(*n);
                let rel = if bv.v.is_zero() { 1.0 } else { bv.scale / bv.v.mag() };
                Ok(Value { v, scale: v.mag() * rel.powi(n.unsigned_abs().min(64) as i32) })
            }
            Node::Apply(f, a) => {
                let av = self.eval(a)?;
                let x = av.v;
                let (v, slope) = match f {
                    Func::Sin => {
                        let (s, c) = x.sin_cos();
                        (s, c.mag())
                    }
                    Func::Cos => {
                        let (s, c) = x.sin_cos();
                        (c, s.mag())
                    }
                    Func::Tan => {
                        let (s, c) = x.sin_cos();
                        if c.mag() <= tol * av.scale.max(1.0) {
                            return Err(DomainError::new(e, "pole of tan"));
                        }
                        let t = s / c;
                        (t, 1.0 + t.mag() * t.mag())
                    }
                    Func::Cot => {
                        let (s, c) = x.sin_cos();
                        if s.mag() <= tol * av.scale.max(1.0) {
                            return Err(DomainError::new(e, "pole of cot"));
                        }
                        let t = c / s;
                        (t, 1.0 + t.mag() * t.mag())
                    }
                    Func::Exp => {
                        let v = x.exp().ok_or_else(|| DomainError::new(e, "exp overflow"))?;
                        (v, v.mag())
                    }
                    Func::Ln => {
                        if av.is_negligible(tol) {
                            return Err(DomainError::new(e, "log of zero"));
                        }
                        let v = x.ln().ok_or_else(|| DomainError::new(e, "log of a non-positive value"))?;
                        (v, 1.0 / x.mag())
                    }
                };
                Ok(Value { v, scale: v.mag() + slope * av.scale })
            }
            _ => unreachable!("only atoms are memoized"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Sampler};

    #[test]
    fn cancellation_is_negligible_but_values_are_not() {
        let s = Sampler::default();
        let p = s.point(0, 0);
        let mut ev = Evaluator::new(&p, s.tolerance());
        let z = parse("sin(x)^2 + cos(x)^2 - 1").unwrap();
        assert!(ev.eval(&z).unwrap().is_negligible(1e-20));
        let nz = parse("sin(x)^2 + cos(x)^2 - 1 + 1/1000000000000").unwrap();
        assert!(!ev.eval(&nz).unwrap().is_negligible(1e-20));
    }

    #[test]
    fn matches_central_differences() {
        // The derivative, evaluated, agrees with a difference quotient.
        let e = parse("exp(x)*sin(x*y) + ln(2 + x^2)/(3 + y)").unwrap();
        let x = Symbol::new("x");
        let d = e.diff(&x);
        let s = Sampler::default();
        for i in 0..4 {
            let p = s.point(i, 0);
            let mut ev = Evaluator::new(&p, 1e-20);
            let exact = ev.eval(&d).unwrap().v.to_f64();
            let x0 = ev.var(&x).to_f64();
            let h = 1e-5;
            let at = |xv: f64| {
                let pt = p.with_value(&x, xv);
                Evaluator::new(&pt, 1e-20).eval(&e).unwrap().v.to_f64()
            };
            let fd = (at(x0 + h) - at(x0 - h)) / (2.0 * h);
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{fd} vs {exact}");
        }
    }

    #[test]
    fn poles_are_domain_errors() {
        let s = Sampler::default();
        let p = s.point(0, 0).with_value(&Symbol::new("x"), 0.0);
        let mut ev = Evaluator::new(&p, 1e-20);
        assert!(ev.eval(&parse("cot(x)").unwrap()).is_err());
        assert!(ev.eval(&parse("1/x").unwrap()).is_err());
        assert!(ev.eval(&parse("ln(x)").unwrap()).is_err());
        assert!(ev.eval(&parse("cos(x)").unwrap()).is_ok());
    }
}
