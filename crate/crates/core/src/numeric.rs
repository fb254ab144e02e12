//! Double-double arithmetic.
//!
//! A `Real` is an unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`, giving
//! roughly 106 bits of significand. Only the operations the zero tests and
//! the rank computations need are provided.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Real {
    hi: f64,
    lo: f64,
}

#[allow(clippy::approx_constant, clippy::excessive_precision)]
const PI: Real = Real { hi: 3.141592653589793116e+00, lo: 1.224646799147353207e-16 };
#[allow(clippy::approx_constant, clippy::excessive_precision)]
const TWO_PI: Real = Real { hi: 6.283185307179586232e+00, lo: 2.449293598294706414e-16 };
#[allow(clippy::approx_constant, clippy::excessive_precision)]
const HALF_PI: Real = Real { hi: 1.570796326794896558e+00, lo: 6.123233995736766036e-17 };
#[allow(clippy::approx_constant, clippy::excessive_precision)]
const LN2: Real = Real { hi: 6.931471805599452862e-01, lo: 2.319046813846299558e-17 };

/// Series terms below this relative size are dropped.
const SERIES_EPS: f64 = 1e-34;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Real {
    pub const ZERO: Real = Real { hi: 0.0, lo: 0.0 };
    pub const ONE: Real = Real { hi: 1.0, lo: 0.0 };

    pub const fn from_f64(x: f64) -> Real {
        Real { hi: x, lo: 0.0 }
    }

    pub fn pi() -> Real {
        PI
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    pub fn is_zero(self) -> bool {
        self.hi == 0.0
    }

    pub fn abs(self) -> Real {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    /// Magnitude as a plain float, which is all the tolerance logic needs.
    pub fn mag(self) -> f64 {
        self.hi.abs()
    }

    fn mul_f64(self, b: f64) -> Real {
        let (p1, p2) = two_prod(self.hi, b);
        let p2 = p2 + self.lo * b;
        let (hi, lo) = quick_two_sum(p1, p2);
        Real { hi, lo }
    }

    fn ldexp(self, e: i32) -> Real {
        let f = 2f64.powi(e);
        Real { hi: self.hi * f, lo: self.lo * f }
    }

    fn round(self) -> Real {
        let hi = self.hi.round();
        if hi == self.hi {
            let lo = self.lo.round();
            let (hi, lo) = quick_two_sum(hi, lo);
            Real { hi, lo }
        } else if (hi - self.hi).abs() == 0.5 && self.lo != 0.0 {
            // Exactly halfway in the high word; the low word decides.
            let hi = if self.lo > 0.0 { self.hi.floor() + 1.0 } else { self.hi.floor() };
            Real { hi, lo: 0.0 }
        } else {
            Real { hi, lo: 0.0 }
        }
    }

    pub fn from_bigint(n: &BigInt) -> Real {
        let hi = n.to_f64().unwrap_or(f64::INFINITY * sign_of(n));
        if !hi.is_finite() {
            return Real { hi, lo: 0.0 };
        }
        let rest = n - BigInt::from_f64(hi).unwrap_or_default();
        // `hi` carries 53 bits; the remainder fits a second double closely enough.
        let lo = rest.to_f64().unwrap_or(0.0);
        let (hi, lo) = quick_two_sum(hi, lo);
        Real { hi, lo }
    }

    pub fn from_rational(q: &BigRational) -> Real {
        if q.is_integer() {
            return Real::from_bigint(q.numer());
        }
        let n = Real::from_bigint(q.numer());
        let d = Real::from_bigint(q.denom());
        if n.is_finite() && d.is_finite() {
            return n / d;
        }
        // Huge numerator or denominator: scale both down first.
        let shift = q.numer().bits().max(q.denom().bits()) as i64 - 900;
        let (n, d) = if shift > 0 {
            (q.numer() >> shift as usize, q.denom() >> shift as usize)
        } else {
            (q.numer().clone(), q.denom().clone())
        };
        if d.is_zero() {
            return Real::from_f64(f64::INFINITY * sign_of(&n));
        }
        Real::from_bigint(&n) / Real::from_bigint(&d)
    }

    pub fn powi(self, n: i64) -> Real {
        if n == 0 {
            return Real::ONE;
        }
        let mut base = if n < 0 { Real::ONE / self } else { self };
        let mut k = n.unsigned_abs();
        let mut acc = Real::ONE;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            k >>= 1;
            if k > 0 {
                base = base * base;
            }
        }
        acc
    }

    /// `exp`, or `None` on overflow.
    pub fn exp(self) -> Option<Real> {
        if self.hi > 709.0 {
            return None;
        }
        if self.hi < -745.0 {
            return Some(Real::ZERO);
        }
        if self.hi == 0.0 {
            return Some(Real::ONE);
        }
        let m = (self / LN2).round();
        let r = (self - LN2 * m).ldexp(-9);
        // expm1 on the reduced argument, then square back up.
        let mut term = r;
        let mut s = r;
        let mut k = 1.0;
        loop {
            k += 1.0;
            term = term * r / Real::from_f64(k);
            s = s + term;
            if term.mag() <= SERIES_EPS * s.mag().max(1e-300) {
                break;
            }
        }
        for _ in 0..9 {
            s = s * Real::from_f64(2.0) + s * s;
        }
        let res = (s + Real::ONE).ldexp(m.hi as i32);
        res.is_finite().then_some(res)
    }

    /// Natural log, or `None` outside the domain.
    pub fn ln(self) -> Option<Real> {
        // Written so that NaN is rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.hi > 0.0) || !self.is_finite() {
            return None;
        }
        let mut y = Real::from_f64(self.hi.ln());
        for _ in 0..2 {
            let e = (-y).exp()?;
            y = y + self * e - Real::ONE;
        }
        Some(y)
    }

    fn sin_taylor(x: Real) -> Real {
        let x2 = -(x * x);
        let mut term = x;
        let mut s = x;
        let mut k = 1.0;
        loop {
            term = term * x2 / Real::from_f64((k + 1.0) * (k + 2.0));
            k += 2.0;
            s = s + term;
            if term.mag() <= SERIES_EPS * s.mag().max(1e-300) {
                return s;
            }
        }
    }

    fn cos_taylor(x: Real) -> Real {
        let x2 = -(x * x);
        let mut term = Real::ONE;
        let mut s = Real::ONE;
        let mut k = 0.0;
        loop {
            term = term * x2 / Real::from_f64((k + 1.0) * (k + 2.0));
            k += 2.0;
            s = s + term;
            if term.mag() <= SERIES_EPS * s.mag() {
                return s;
            }
        }
    }

    /// Reduce to `r` in `[-pi/4, pi/4]` plus the quadrant index.
    fn reduce(self) -> (Real, i64) {
        let z = (self / TWO_PI).round();
        let r = self - TWO_PI * z;
        let j = (r / HALF_PI).round();
        let r = r - HALF_PI * j;
        (r, (j.hi as i64).rem_euclid(4))
    }

    pub fn sin_cos(self) -> (Real, Real) {
        if self.hi == 0.0 {
            return (Real::ZERO, Real::ONE);
        }
        let (r, q) = self.reduce();
        let (s, c) = (Real::sin_taylor(r), Real::cos_taylor(r));
        match q {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }
}

fn sign_of(n: &BigInt) -> f64 {
    if n.is_negative() {
        -1.0
    } else {
        1.0
    }
}

impl From<f64> for Real {
    fn from(x: f64) -> Real {
        Real::from_f64(x)
    }
}

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real { hi: -self.hi, lo: -self.lo }
    }
}

impl Add for Real {
    type Output = Real;
    fn add(self, b: Real) -> Real {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let s2 = s2 + t1;
        let (s1, s2) = quick_two_sum(s1, s2);
        let s2 = s2 + t2;
        let (hi, lo) = quick_two_sum(s1, s2);
        Real { hi, lo }
    }
}

impl Sub for Real {
    type Output = Real;
    fn sub(self, b: Real) -> Real {
        self + (-b)
    }
}

impl Mul for Real {
    type Output = Real;
    fn mul(self, b: Real) -> Real {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let p2 = p2 + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p1, p2);
        Real { hi, lo }
    }
}

impl Div for Real {
    type Output = Real;
    fn div(self, b: Real) -> Real {
        let q1 = self.hi / b.hi;
        if !q1.is_finite() {
            return Real::from_f64(q1);
        }
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Real { hi, lo } + Real::from_f64(q3)
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Real) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&other.lo),
            o => Some(o),
        }
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.to_f64())
    }
}
