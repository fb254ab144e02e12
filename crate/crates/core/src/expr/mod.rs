//! Immutable, normalized scalar expressions.
//!
//! Every constructor returns an expression in canonical form: sums are flat
//! with like monomials collected, products are expanded over sums, monomials
//! are a rational coefficient times sorted atom powers, and the children of
//! every node are in a fixed structural order. Two expressions built from
//! equal inputs therefore compare equal and print identically.

mod diff;
mod eval;
mod parse;
mod sample;

pub use eval::{DomainError, Evaluator, Value};
pub use parse::{parse, ParseError};
pub use sample::{Point, Sampler};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use crate::numeric::Real;

/// A coordinate name. Ordered by its text so that canonical forms do not
/// depend on the order in which names were created.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Symbol {
        Symbol(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn mask(&self) -> u64 {
        1u64 << (str_hash(&self.0) & 63)
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Symbol {
        Symbol::new(s)
    }
}

fn str_hash(s: &str) -> u64 {
    // FNV-1a: stable across platforms and runs.
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Cot,
    Exp,
    Ln,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Cot => "cot",
            Func::Exp => "exp",
            Func::Ln => "ln",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "cot" => Func::Cot,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug)]
pub enum Node {
    Rational(BigRational),
    Var(Symbol),
    /// At least two terms, at most one of them rational (placed first).
    Sum(Vec<Expr>),
    /// Optional leading rational coefficient, then atoms or atom powers
    /// with distinct bases in structural order.
    Product(Vec<Expr>),
    /// Exponent outside {0, 1}. The base is an atom, or a sum when the
    /// exponent is negative.
    Power(Expr, i64),
    Apply(Func, Expr),
}

struct Inner {
    node: Node,
    hash: u64,
    mask: u64,
    approx: Option<Real>,
}

#[derive(Clone)]
pub struct Expr(Arc<Inner>);

impl Expr {
    fn from_node(node: Node) -> Expr {
        let mut h = DefaultHasher::new();
        let mut mask = 0u64;
        let mut approx = None;
        match &node {
            Node::Rational(q) => {
                0u8.hash(&mut h);
                q.hash(&mut h);
                approx = Some(Real::from_rational(q));
            }
            Node::Var(s) => {
                1u8.hash(&mut h);
                s.hash(&mut h);
                mask = s.mask();
            }
            Node::Sum(xs) | Node::Product(xs) => {
                (if matches!(node, Node::Sum(_)) { 2u8 } else { 3u8 }).hash(&mut h);
                for x in xs {
                    x.0.hash.hash(&mut h);
                    mask |= x.0.mask;
                }
            }
            Node::Power(b, n) => {
                4u8.hash(&mut h);
                b.0.hash.hash(&mut h);
                n.hash(&mut h);
                mask = b.0.mask;
            }
            Node::Apply(f, a) => {
                5u8.hash(&mut h);
                f.hash(&mut h);
                a.0.hash.hash(&mut h);
                mask = a.0.mask;
            }
        }
        Expr(Arc::new(Inner { node, hash: h.finish(), mask, approx }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn rational(q: BigRational) -> Expr {
        Expr::from_node(Node::Rational(q))
    }

    pub fn int(n: i64) -> Expr {
        Expr::rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn frac(n: i64, d: i64) -> Expr {
        Expr::rational(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn var(name: &str) -> Expr {
        Expr::from_node(Node::Var(Symbol::new(name)))
    }

    pub fn symbol(s: &Symbol) -> Expr {
        Expr::from_node(Node::Var(s.clone()))
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self.node() {
            Node::Rational(q) => Some(q),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_rational().is_some_and(|q| q.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.as_rational().is_some_and(|q| q.is_one())
    }

    pub fn is_constant(&self) -> bool {
        self.0.mask == 0
    }

    pub(crate) fn approx(&self) -> Option<Real> {
        self.0.approx
    }

    /// Cheap test: `false` means the expression certainly does not mention `s`.
    pub fn may_depend_on(&self, s: &Symbol) -> bool {
        self.0.mask & s.mask() != 0
    }

    pub fn depends_on(&self, s: &Symbol) -> bool {
        if !self.may_depend_on(s) {
            return false;
        }
        match self.node() {
            Node::Rational(_) => false,
            Node::Var(v) => v == s,
            Node::Sum(xs) | Node::Product(xs) => xs.iter().any(|x| x.depends_on(s)),
            Node::Power(b, _) => b.depends_on(s),
            Node::Apply(_, a) => a.depends_on(s),
        }
    }

    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        match self.node() {
            Node::Rational(_) => {}
            Node::Var(v) => {
                out.insert(v.clone());
            }
            Node::Sum(xs) | Node::Product(xs) => xs.iter().for_each(|x| x.collect_symbols(out)),
            Node::Power(b, _) => b.collect_symbols(out),
            Node::Apply(_, a) => a.collect_symbols(out),
        }
    }

    /// Number of nodes in the tree, counting shared subtrees repeatedly.
    pub fn size(&self) -> usize {
        1 + match self.node() {
            Node::Rational(_) | Node::Var(_) => 0,
            Node::Sum(xs) | Node::Product(xs) => xs.iter().map(Expr::size).sum(),
            Node::Power(b, _) => b.size(),
            Node::Apply(_, a) => a.size(),
        }
    }

    fn kind_rank(&self) -> u8 {
        match self.node() {
            Node::Rational(_) => 0,
            Node::Var(_) => 1,
            Node::Apply(..) => 2,
            Node::Power(..) => 3,
            Node::Product(_) => 4,
            Node::Sum(_) => 5,
        }
    }

    pub fn terms(&self) -> &[Expr] {
        match self.node() {
            Node::Sum(xs) => xs,
            _ => std::slice::from_ref(self),
        }
    }

    /// Coefficient and coefficient-free monomial of a non-sum expression.
    fn split_coeff(&self) -> (BigRational, Option<Expr>) {
        match self.node() {
            Node::Rational(q) => (q.clone(), None),
            Node::Product(xs) => match xs[0].node() {
                Node::Rational(q) => {
                    let rest = if xs.len() == 2 {
                        xs[1].clone()
                    } else {
                        Expr::from_node(Node::Product(xs[1..].to_vec()))
                    };
                    (q.clone(), Some(rest))
                }
                _ => (BigRational::one(), Some(self.clone())),
            },
            _ => (BigRational::one(), Some(self.clone())),
        }
    }

    /// Rational coefficient of the first term, used for sign conventions.
    pub fn leading_coefficient(&self) -> BigRational {
        self.terms()[0].split_coeff().0
    }

    /// Atom powers of a coefficient-free monomial.
    fn atom_powers(m: &Expr) -> Vec<(Expr, i64)> {
        match m.node() {
            Node::Product(xs) => xs
                .iter()
                .filter(|x| !matches!(x.node(), Node::Rational(_)))
                .map(Expr::base_exp)
                .collect(),
            Node::Rational(_) => Vec::new(),
            _ => vec![m.base_exp()],
        }
    }

    fn base_exp(&self) -> (Expr, i64) {
        match self.node() {
            Node::Power(b, n) => (b.clone(), *n),
            _ => (self.clone(), 1),
        }
    }

    fn monomial(c: BigRational, atoms: BTreeMap<Expr, i64>) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        let mut factors: Vec<Expr> = Vec::with_capacity(atoms.len() + 1);
        let coeff_is_one = c.is_one();
        if !coeff_is_one {
            factors.push(Expr::rational(c.clone()));
        }
        for (a, n) in atoms {
            match n {
                0 => {}
                1 => factors.push(a),
                _ => factors.push(Expr::from_node(Node::Power(a, n))),
            }
        }
        match factors.len() {
            0 => Expr::rational(c),
            1 => factors.pop().unwrap(),
            _ => Expr::from_node(Node::Product(factors)),
        }
    }

    fn with_coeff(c: BigRational, key: Option<Expr>) -> Expr {
        match key {
            None => Expr::rational(c),
            Some(k) => {
                if c.is_one() {
                    return k;
                }
                if c.is_zero() {
                    return Expr::zero();
                }
                let mut factors = vec![Expr::rational(c)];
                match k.node() {
                    Node::Product(xs) => factors.extend(xs.iter().cloned()),
                    _ => factors.push(k),
                }
                Expr::from_node(Node::Product(factors))
            }
        }
    }

    pub fn sum<I: IntoIterator<Item = Expr>>(items: I) -> Expr {
        let mut constant = BigRational::zero();
        let mut map: BTreeMap<Expr, BigRational> = BTreeMap::new();
        for item in items {
            for t in item.terms() {
                let (c, key) = t.split_coeff();
                match key {
                    None => constant += c,
                    Some(k) => {
                        let slot = map.entry(k).or_insert_with(BigRational::zero);
                        *slot += c;
                    }
                }
            }
        }
        let mut terms = Vec::with_capacity(map.len() + 1);
        if !constant.is_zero() {
            terms.push(Expr::rational(constant));
        }
        for (k, c) in map {
            if !c.is_zero() {
                terms.push(Expr::with_coeff(c, Some(k)));
            }
        }
        match terms.len() {
            0 => Expr::zero(),
            1 => terms.pop().unwrap(),
            _ => Expr::from_node(Node::Sum(terms)),
        }
    }

    pub fn product<I: IntoIterator<Item = Expr>>(items: I) -> Expr {
        items.into_iter().fold(Expr::one(), |acc, x| acc.mul_expr(&x))
    }

    pub fn scale(&self, c: &BigRational) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        if c.is_one() {
            return self.clone();
        }
        match self.node() {
            Node::Sum(xs) => {
                let terms = xs
                    .iter()
                    .map(|t| {
                        let (k, key) = t.split_coeff();
                        Expr::with_coeff(k * c, key)
                    })
                    .collect();
                Expr::from_node(Node::Sum(terms))
            }
            _ => {
                let (k, key) = self.split_coeff();
                Expr::with_coeff(k * c, key)
            }
        }
    }

    fn mul_expr(&self, other: &Expr) -> Expr {
        if let Some(q) = self.as_rational() {
            return other.scale(q);
        }
        if let Some(q) = other.as_rational() {
            return self.scale(q);
        }
        let a_sum = matches!(self.node(), Node::Sum(_));
        let b_sum = matches!(other.node(), Node::Sum(_));
        if a_sum && !b_sum && other.has_atom(self) {
            return Expr::mul_monomials(self, other, true);
        }
        if b_sum && !a_sum && self.has_atom(other) {
            return Expr::mul_monomials(other, self, true);
        }
        if a_sum {
            return Expr::sum(self.terms().iter().map(|t| t.mul_expr(other)));
        }
        if b_sum {
            return Expr::sum(other.terms().iter().map(|t| self.mul_expr(t)));
        }
        Expr::mul_monomials(self, other, false)
    }

    fn has_atom(&self, atom: &Expr) -> bool {
        let (_, key) = self.split_coeff();
        key.is_some_and(|k| Expr::atom_powers(&k).iter().any(|(b, _)| b == atom))
    }

    /// Product of two monomials. With `a_is_atom`, `a` is a sum treated as
    /// a single atom (it appears inverted in `b`).
    fn mul_monomials(a: &Expr, b: &Expr, a_is_atom: bool) -> Expr {
        let mut atoms: BTreeMap<Expr, i64> = BTreeMap::new();
        let mut coeff = BigRational::one();
        let mut absorb = |e: &Expr, as_atom: bool| {
            if as_atom {
                *atoms.entry(e.clone()).or_insert(0) += 1;
                return;
            }
            let (c, key) = e.split_coeff();
            coeff *= c;
            if let Some(k) = key {
                for (base, n) in Expr::atom_powers(&k) {
                    *atoms.entry(base).or_insert(0) += n;
                }
            }
        };
        absorb(a, a_is_atom);
        absorb(b, false);
        // A sum raised to a non-negative power must be expanded again.
        let mut pending: Vec<Expr> = Vec::new();
        atoms.retain(|base, n| {
            if *n > 0 && matches!(base.node(), Node::Sum(_)) {
                pending.push(base.pow(*n));
                false
            } else {
                *n != 0
            }
        });
        let mono = Expr::monomial(coeff, atoms);
        pending.iter().fold(mono, |acc, p| acc.mul_expr(p))
    }

    pub fn pow(&self, n: i64) -> Expr {
        if n == 0 {
            return Expr::one();
        }
        if n == 1 {
            return self.clone();
        }
        match self.node() {
            Node::Rational(q) => {
                if q.is_zero() {
                    if n > 0 {
                        return Expr::zero();
                    }
                    return Expr::from_node(Node::Power(self.clone(), n));
                }
                let p = num_traits::pow::pow(q.clone(), n.unsigned_abs() as usize);
                Expr::rational(if n < 0 { p.recip() } else { p })
            }
            Node::Sum(_) => {
                if n > 0 {
                    let mut acc = Expr::one();
                    let mut base = self.clone();
                    let mut k = n as u64;
                    while k > 0 {
                        if k & 1 == 1 {
                            acc = acc.mul_expr(&base);
                        }
                        k >>= 1;
                        if k > 0 {
                            base = base.mul_expr(&base);
                        }
                    }
                    acc
                } else {
                    let lc = self.leading_coefficient();
                    let monic = self.scale(&lc.recip());
                    let p = num_traits::pow::pow(lc, n.unsigned_abs() as usize).recip();
                    Expr::from_node(Node::Power(monic, n)).scale(&p)
                }
            }
            Node::Power(b, m) => b.pow(m * n),
            Node::Product(xs) => Expr::product(xs.iter().map(|x| x.pow(n))),
            Node::Var(_) | Node::Apply(..) => Expr::from_node(Node::Power(self.clone(), n)),
        }
    }

    pub fn recip(&self) -> Expr {
        self.pow(-1)
    }

    pub fn apply(f: Func, arg: Expr) -> Expr {
        if let Some(q) = arg.as_rational() {
            if q.is_zero() {
                match f {
                    Func::Sin | Func::Tan => return Expr::zero(),
                    Func::Cos | Func::Exp => return Expr::one(),
                    _ => {}
                }
            }
            if q.is_one() && f == Func::Ln {
                return Expr::zero();
            }
        }
        if !matches!(f, Func::Exp | Func::Ln) && arg.leading_coefficient().is_negative() {
            let flipped = Expr::from_node(Node::Apply(f, -&arg));
            return if f == Func::Cos { flipped } else { -&flipped };
        }
        Expr::from_node(Node::Apply(f, arg))
    }

    pub fn sin(&self) -> Expr {
        Expr::apply(Func::Sin, self.clone())
    }

    pub fn cos(&self) -> Expr {
        Expr::apply(Func::Cos, self.clone())
    }

    pub fn tan(&self) -> Expr {
        Expr::apply(Func::Tan, self.clone())
    }

    pub fn cot(&self) -> Expr {
        Expr::apply(Func::Cot, self.clone())
    }

    pub fn exp(&self) -> Expr {
        Expr::apply(Func::Exp, self.clone())
    }

    pub fn ln(&self) -> Expr {
        Expr::apply(Func::Ln, self.clone())
    }

    /// Substitute expressions for symbols and renormalize.
    pub fn subst(&self, map: &BTreeMap<Symbol, Expr>) -> Expr {
        if map.keys().all(|s| !self.may_depend_on(s)) {
            return self.clone();
        }
        match self.node() {
            Node::Rational(_) => self.clone(),
            Node::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Node::Sum(xs) => Expr::sum(xs.iter().map(|x| x.subst(map))),
            Node::Product(xs) => Expr::product(xs.iter().map(|x| x.subst(map))),
            Node::Power(b, n) => b.subst(map).pow(*n),
            Node::Apply(f, a) => Expr::apply(*f, a.subst(map)),
        }
    }

    /// Coefficients of `x^k` for `k = 0, 1, ...` when the expression is a
    /// polynomial in the symbol `x` with coefficients free of `x`.
    pub fn polynomial_in(&self, x: &Symbol) -> Option<Vec<Expr>> {
        let mut coeffs: Vec<Vec<Expr>> = Vec::new();
        for t in self.terms() {
            let (c, key) = t.split_coeff();
            let mut degree = 0usize;
            let mut rest: BTreeMap<Expr, i64> = BTreeMap::new();
            if let Some(k) = key {
                for (base, n) in Expr::atom_powers(&k) {
                    if matches!(base.node(), Node::Var(v) if v == x) {
                        if n < 0 {
                            return None;
                        }
                        degree = n as usize;
                    } else if base.depends_on(x) {
                        return None;
                    } else {
                        rest.insert(base, n);
                    }
                }
            }
            if coeffs.len() <= degree {
                coeffs.resize(degree + 1, Vec::new());
            }
            coeffs[degree].push(Expr::monomial(c, rest));
        }
        Some(coeffs.into_iter().map(Expr::sum).collect())
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.hash == other.0.hash && self.cmp(other) == Ordering::Equal)
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.hash.hash(state);
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Expr) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Expr {
    fn cmp(&self, other: &Expr) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        let (ra, rb) = (self.kind_rank(), other.kind_rank());
        if ra != rb {
            return ra.cmp(&rb);
        }
        match (self.node(), other.node()) {
            (Node::Rational(a), Node::Rational(b)) => a.cmp(b),
            (Node::Var(a), Node::Var(b)) => a.cmp(b),
            (Node::Apply(f, a), Node::Apply(g, b)) => f.cmp(g).then_with(|| a.cmp(b)),
            (Node::Power(a, n), Node::Power(b, m)) => a.cmp(b).then_with(|| n.cmp(m)),
            (Node::Product(a), Node::Product(b)) | (Node::Sum(a), Node::Sum(b)) => a.cmp(b),
            _ => unreachable!("kind ranks agree"),
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn fmt_rational(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl Expr {
    /// Text of a factor inside a product or a power base.
    fn fmt_factor(&self) -> String {
        match self.node() {
            Node::Sum(_) => format!("({self})"),
            Node::Rational(q) if !q.is_integer() || q.is_negative() => format!("({})", fmt_rational(q)),
            _ => self.to_string(),
        }
    }

    fn fmt_power(base: &Expr, n: i64) -> String {
        if n == 1 {
            base.fmt_factor()
        } else {
            format!("{}^{}", base.fmt_factor(), n)
        }
    }

    /// Product text for a positive coefficient, sign handled by the caller.
    fn fmt_unsigned_product(c: &BigRational, key: &Expr) -> String {
        let mut num: Vec<String> = Vec::new();
        let mut den: Vec<String> = Vec::new();
        let c = c.abs();
        if !c.numer().is_one() {
            num.push(c.numer().to_string());
        }
        if !c.denom().is_one() {
            den.push(c.denom().to_string());
        }
        for (base, n) in Expr::atom_powers(key) {
            if n > 0 {
                num.push(Expr::fmt_power(&base, n));
            } else if n < -1 && matches!(base.node(), Node::Sum(_)) {
                // `1/(a + b)^2` would re-parse as the reciprocal of the expanded square.
                num.push(format!("{}^{}", base.fmt_factor(), n));
            } else {
                den.push(Expr::fmt_power(&base, -n));
            }
        }
        let mut s = if num.is_empty() { "1".to_string() } else { num.join("*") };
        match den.len() {
            0 => {}
            1 => {
                s.push('/');
                s.push_str(&den[0]);
            }
            _ => {
                s.push_str("/(");
                s.push_str(&den.join("*"));
                s.push(')');
            }
        }
        s
    }

    fn fmt_term(&self) -> (bool, String) {
        let (c, key) = self.split_coeff();
        let neg = c.is_negative();
        let body = match key {
            None => fmt_rational(&c.abs()),
            Some(k) => Expr::fmt_unsigned_product(&c, &k),
        };
        (neg, body)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Var(v) => write!(f, "{v}"),
            Node::Apply(func, a) => write!(f, "{}({})", func.name(), a),
            Node::Sum(xs) => {
                for (i, t) in xs.iter().enumerate() {
                    let (neg, body) = t.fmt_term();
                    match (i, neg) {
                        (0, true) => write!(f, "-{body}")?,
                        (0, false) => write!(f, "{body}")?,
                        (_, true) => write!(f, " - {body}")?,
                        (_, false) => write!(f, " + {body}")?,
                    }
                }
                Ok(())
            }
            _ => {
                let (neg, body) = self.fmt_term();
                if neg {
                    write!(f, "-{body}")
                } else {
                    write!(f, "{body}")
                }
            }
        }
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale(&-BigRational::one())
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl $trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl $trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                (&self).$method(rhs)
            }
        }
        impl $trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| Expr::sum([a.clone(), b.clone()]));
binop!(Sub, sub, |a, b| Expr::sum([a.clone(), -b]));
binop!(Mul, mul, |a, b| a.mul_expr(b));
binop!(Div, div, |a, b| a.mul_expr(&b.recip()));

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Expr {
        Expr::var(s)
    }

    #[test]
    fn like_terms_collect_and_cancel() {
        let x = v("x");
        let y = v("y");
        let e = &(&x + &y) - &x;
        assert_eq!(e, y);
        assert!((&x - &x).is_zero());
        let two_x = &x + &x;
        assert_eq!(two_x, &Expr::int(2) * &x);
        assert_eq!(two_x.to_string(), "2*x");
    }

    #[test]
    fn products_expand_and_merge_powers() {
        let x = v("x");
        let y = v("y");
        let e = (&x + &y) * (&x - &y);
        assert_eq!(e, &x * &x - &y * &y);
        assert_eq!((&x * &x).to_string(), "x^2");
        assert_eq!((&x / &x), Expr::one());
        let q = &(&x + &y).recip() * &(&x + &y);
        assert_eq!(q, Expr::one());
    }

    #[test]
    fn order_independent_canonical_form() {
        let a = v("a");
        let b = v("b");
        let c = v("c");
        let e1 = &(&a * &b.sin()) + &(&c * &Expr::int(3));
        let e2 = &(&Expr::int(3) * &c) + &(&b.sin() * &a);
        assert_eq!(e1, e2);
        assert_eq!(e1.to_string(), e2.to_string());
    }

    #[test]
    fn odd_functions_pull_out_sign() {
        let x = v("x");
        assert_eq!((-&x).sin(), -&x.sin());
        assert_eq!((-&x).cos(), x.cos());
        assert!(Expr::zero().sin().is_zero());
        assert!(Expr::one().ln().is_zero());
    }

    #[test]
    fn sum_reciprocal_is_made_monic() {
        let x = v("x");
        let y = v("y");
        let s = &(&Expr::int(2) * &x) + &(&Expr::int(2) * &y);
        let r = s.recip();
        assert_eq!(r, &Expr::frac(1, 2) * &(&x + &y).recip());
    }

    #[test]
    fn polynomial_coefficients() {
        let x = v("x");
        let u = v("u");
        let e = &(&u * &u * &x.sin()) + &(&Expr::int(3) * &u) + &x;
        let cs = e.polynomial_in(&Symbol::new("u")).unwrap();
        assert_eq!(cs, vec![x.clone(), Expr::int(3), x.sin()]);
        assert!(u.recip().polynomial_in(&Symbol::new("u")).is_none());
        assert!(u.sin().polynomial_in(&Symbol::new("u")).is_none());
    }

    #[test]
    fn substitution_renormalizes() {
        let x = v("x");
        let y = v("y");
        let e = &x * &x - &y;
        let mut m = BTreeMap::new();
        m.insert(Symbol::new("y"), &x * &x);
        assert!(e.subst(&m).is_zero());
    }
}
