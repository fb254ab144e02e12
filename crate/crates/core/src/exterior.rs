//! Differential forms and vector fields in coordinates.
//!
//! A k-form is stored as a map from strictly increasing index tuples to
//! nonzero coefficient expressions, relative to the ordered coordinates of
//! a `Chart`. Vector fields carry one component per coordinate.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{DomainError, Evaluator, Expr, Symbol, Value};

#[derive(Debug)]
struct ChartInner {
    coords: Vec<Symbol>,
    index: HashMap<Symbol, usize>,
}

/// Ordered local coordinates.
#[derive(Clone, Debug)]
pub struct Chart(Arc<ChartInner>);

impl Chart {
    pub fn new<I, S>(coords: I) -> Result<Chart>
    where
        I: IntoIterator<Item = S>,
        S: Into<Symbol>,
    {
        let coords: Vec<Symbol> = coords.into_iter().map(Into::into).collect();
        let mut index = HashMap::new();
        for (i, c) in coords.iter().enumerate() {
            if index.insert(c.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate coordinate `{c}`")));
            }
        }
        Ok(Chart(Arc::new(ChartInner { coords, index })))
    }

    pub fn dim(&self) -> usize {
        self.0.coords.len()
    }

    pub fn coords(&self) -> &[Symbol] {
        &self.0.coords
    }

    pub fn coord(&self, i: usize) -> &Symbol {
        &self.0.coords[i]
    }

    pub fn index_of(&self, s: &Symbol) -> Option<usize> {
        self.0.index.get(s).copied()
    }

    pub fn contains(&self, s: &Symbol) -> bool {
        self.0.index.contains_key(s)
    }

    pub fn same(&self, other: &Chart) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.coords == other.0.coords
    }

    fn check(&self, other: &Chart) -> Result<()> {
        if self.same(other) {
            Ok(())
        } else {
            Err(Error::ChartMismatch(format!("{:?} vs {:?}", self.0.coords, other.0.coords)))
        }
    }

    /// Gradient of a function as a list of (coordinate index, partial).
    pub fn gradient(&self, f: &Expr) -> Vec<(usize, Expr)> {
        self.coords()
            .iter()
            .enumerate()
            .filter(|(_, s)| f.may_depend_on(s))
            .map(|(i, s)| (i, f.diff(s)))
            .filter(|(_, d)| !d.is_zero())
            .collect()
    }
}

/// Sign of the permutation sorting the concatenation of two sorted,
/// disjoint index lists, with the merged list; `None` if they overlap.
fn merge_sign(a: &[usize], b: &[usize]) -> Option<(bool, Vec<usize>)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let mut swaps = 0usize;
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i] < b[j]) {
            out.push(a[i]);
            i += 1;
        } else if i == a.len() || b[j] < a[i] {
            // b[j] jumps over the remaining elements of a.
            swaps += a.len() - i;
            out.push(b[j]);
            j += 1;
        } else {
            return None;
        }
    }
    Some((swaps % 2 == 1, out))
}

#[derive(Clone)]
pub struct KForm {
    chart: Chart,
    degree: usize,
    terms: BTreeMap<Vec<usize>, Expr>,
}

impl KForm {
    pub fn zero(chart: &Chart, degree: usize) -> KForm {
        KForm { chart: chart.clone(), degree, terms: BTreeMap::new() }
    }

    pub fn function(chart: &Chart, f: Expr) -> KForm {
        let mut k = KForm::zero(chart, 0);
        if !f.is_zero() {
            k.terms.insert(Vec::new(), f);
        }
        k
    }

    /// The coordinate differential `d(coords[i])`.
    pub fn dx(chart: &Chart, i: usize) -> KForm {
        let mut k = KForm::zero(chart, 1);
        k.terms.insert(vec![i], Expr::one());
        k
    }

    /// One-form from its coefficient row.
    pub fn from_row(chart: &Chart, row: &[Expr]) -> KForm {
        let mut k = KForm::zero(chart, 1);
        for (i, c) in row.iter().enumerate() {
            if !c.is_zero() {
                k.terms.insert(vec![i], c.clone());
            }
        }
        k
    }

    pub fn from_terms(chart: &Chart, degree: usize, terms: impl IntoIterator<Item = (Vec<usize>, Expr)>) -> KForm {
        let mut k = KForm::zero(chart, degree);
        for (mut idx, c) in terms {
            assert_eq!(idx.len(), degree);
            let mut sign = false;
            // Bubble sort keeps track of the permutation parity.
            for a in 0..idx.len() {
                for b in 0..idx.len() - 1 - a {
                    if idx[b] > idx[b + 1] {
                        idx.swap(b, b + 1);
                        sign = !sign;
                    }
                }
            }
            if idx.windows(2).any(|w| w[0] == w[1]) {
                continue;
            }
            k.add_term(idx, if sign { -c } else { c });
        }
        k
    }

    fn add_term(&mut self, idx: Vec<usize>, c: Expr) {
        if c.is_zero() {
            return;
        }
        match self.terms.remove(&idx) {
            Some(old) => {
                let s = old + c;
                if !s.is_zero() {
                    self.terms.insert(idx, s);
                }
            }
            None => {
                self.terms.insert(idx, c);
            }
        }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> &BTreeMap<Vec<usize>, Expr> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, idx: &[usize]) -> Expr {
        self.terms.get(idx).cloned().unwrap_or_else(Expr::zero)
    }

    /// Coefficient row of a one-form.
    pub fn row(&self) -> Vec<Expr> {
        assert_eq!(self.degree, 1);
        (0..self.chart.dim()).map(|i| self.coefficient(&[i])).collect()
    }

    pub fn add(&self, other: &KForm) -> Result<KForm> {
        self.chart.check(&other.chart)?;
        if self.degree != other.degree {
            return Err(Error::InvalidInput(format!("adding a {}-form to a {}-form", self.degree, other.degree)));
        }
        let mut out = self.clone();
        for (idx, c) in &other.terms {
            out.add_term(idx.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn scale(&self, f: &Expr) -> KForm {
        let mut out = KForm::zero(&self.chart, self.degree);
        for (idx, c) in &self.terms {
            out.add_term(idx.clone(), c * f);
        }
        out
    }

    pub fn neg(&self) -> KForm {
        self.scale(&Expr::int(-1))
    }

    pub fn wedge(&self, other: &KForm) -> Result<KForm> {
        self.chart.check(&other.chart)?;
        let mut out = KForm::zero(&self.chart, self.degree + other.degree);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                if let Some((neg, idx)) = merge_sign(a, b) {
                    let c = ca * cb;
                    out.add_term(idx, if neg { -c } else { c });
                }
            }
        }
        Ok(out)
    }

    pub fn d(&self) -> KForm {
        let mut out = KForm::zero(&self.chart, self.degree + 1);
        for (idx, c) in &self.terms {
            for (j, dc) in self.chart.gradient(c) {
                if let Some((neg, merged)) = merge_sign(&[j], idx) {
                    out.add_term(merged, if neg { -dc } else { dc });
                }
            }
        }
        out
    }

    /// Contraction `i_X` with a vector field.
    pub fn interior(&self, x: &VectorField) -> Result<KForm> {
        self.chart.check(&x.chart)?;
        if self.degree == 0 {
            return Ok(KForm::zero(&self.chart, 0));
        }
        let mut out = KForm::zero(&self.chart, self.degree - 1);
        for (idx, c) in &self.terms {
            for (r, &i) in idx.iter().enumerate() {
                let xi = &x.components[i];
                if xi.is_zero() {
                    continue;
                }
                let mut rest = idx.clone();
                rest.remove(r);
                let t = c * xi;
                out.add_term(rest, if r % 2 == 1 { -t } else { t });
            }
        }
        Ok(out)
    }

    /// Lie derivative by Cartan's formula.
    pub fn lie(&self, x: &VectorField) -> Result<KForm> {
        let a = self.d().interior(x)?;
        if self.degree == 0 {
            return Ok(a);
        }
        let b = self.interior(x)?.d();
        a.add(&b)
    }

    /// Value of a 0-form as an expression.
    pub fn as_function(&self) -> Expr {
        assert_eq!(self.degree, 0);
        self.coefficient(&[])
    }

    /// Pull back along a map given by the source coordinates as
    /// expressions on `target`.
    pub fn pullback(&self, target: &Chart, images: &[Expr]) -> Result<KForm> {
        if images.len() != self.chart.dim() {
            return Err(Error::ChartMismatch("pullback map has the wrong number of components".into()));
        }
        let map: BTreeMap<Symbol, Expr> = self.chart.coords().iter().cloned().zip(images.iter().cloned()).collect();
        let diffs: Vec<KForm> = images.iter().map(|f| KForm::function(target, f.clone()).d()).collect();
        let mut out = KForm::zero(target, self.degree);
        for (idx, c) in &self.terms {
            let mut acc = KForm::function(target, c.subst(&map));
            for &i in idx {
                acc = acc.wedge(&diffs[i])?;
            }
            out = out.add(&acc)?;
        }
        Ok(out)
    }

    /// Evaluate a one-form's coefficient row.
    pub fn eval_row(&self, ev: &mut Evaluator) -> std::result::Result<Vec<Value>, DomainError> {
        assert_eq!(self.degree, 1);
        let mut row = vec![Value::ZERO; self.chart.dim()];
        for (idx, c) in &self.terms {
            row[idx[0]] = ev.eval(c)?;
        }
        Ok(row)
    }

    /// Evaluate a two-form on a pair of numerical vectors.
    pub fn eval_pair(&self, ev: &mut Evaluator, a: &[Value], b: &[Value]) -> std::result::Result<Value, DomainError> {
        assert_eq!(self.degree, 2);
        let mut acc = Value::ZERO;
        for (idx, c) in &self.terms {
            let (i, j) = (idx[0], idx[1]);
            let minor = a[i].mul(b[j]).sub(a[j].mul(b[i]));
            if minor.v.is_zero() && minor.scale == 0.0 {
                continue;
            }
            acc = acc.add(ev.eval(c)?.mul(minor));
        }
        Ok(acc)
    }

    /// Stable text form, e.g. `dx - cot(a)*dy`.
    pub fn display(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut s = String::new();
        for (k, (idx, c)) in self.terms.iter().enumerate() {
            let basis: Vec<String> = idx.iter().map(|&i| format!("d{}", self.chart.coord(i))).collect();
            let basis = basis.join("^");
            let coef = if c.is_one() {
                String::new()
            } else if c.terms().len() > 1 {
                format!("({c})*")
            } else {
                format!("{c}*")
            };
            if k > 0 {
                s.push_str(" + ");
            }
            if basis.is_empty() {
                s.push_str(&c.to_string());
            } else {
                s.push_str(&coef);
                s.push_str(&basis);
            }
        }
        s
    }
}

impl fmt::Debug for KForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display())
    }
}

#[derive(Clone)]
pub struct VectorField {
    chart: Chart,
    components: Vec<Expr>,
}

impl VectorField {
    pub fn new(chart: &Chart, components: Vec<Expr>) -> VectorField {
        assert_eq!(components.len(), chart.dim());
        VectorField { chart: chart.clone(), components }
    }

    pub fn zero(chart: &Chart) -> VectorField {
        VectorField::new(chart, vec![Expr::zero(); chart.dim()])
    }

    /// The coordinate field `d/d(coords[i])`.
    pub fn coordinate(chart: &Chart, i: usize) -> VectorField {
        let mut v = VectorField::zero(chart);
        v.components[i] = Expr::one();
        v
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Expr {
        &self.components[i]
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Expr::is_zero)
    }

    /// Directional derivative of a function.
    pub fn apply(&self, f: &Expr) -> Expr {
        Expr::sum(
            self.components
                .iter()
                .zip(self.chart.coords())
                .filter(|(c, s)| !c.is_zero() && f.may_depend_on(s))
                .map(|(c, s)| c * f.diff(s)),
        )
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField> {
        self.chart.check(&other.chart)?;
        Ok(VectorField::new(&self.chart, self.components.iter().zip(&other.components).map(|(a, b)| a + b).collect()))
    }

    pub fn scale(&self, f: &Expr) -> VectorField {
        VectorField::new(&self.chart, self.components.iter().map(|c| c * f).collect())
    }

    pub fn bracket(&self, other: &VectorField) -> Result<VectorField> {
        self.chart.check(&other.chart)?;
        let comps = (0..self.chart.dim())
            .map(|i| {
                let a = self.apply(&other.components[i]);
                let b = other.apply(&self.components[i]);
                a - b
            })
            .collect();
        Ok(VectorField::new(&self.chart, comps))
    }

    pub fn eval(&self, ev: &mut Evaluator) -> std::result::Result<Vec<Value>, DomainError> {
        self.components.iter().map(|c| ev.eval(c)).collect()
    }

    /// Substitute into every component and move to another chart.
    pub fn transport(&self, target: &Chart, map: &BTreeMap<Symbol, Expr>) -> VectorField {
        VectorField::new(target, self.components.iter().map(|c| c.subst(map)).collect())
    }

    pub fn display(&self) -> String {
        let parts: Vec<String> = self
            .components
            .iter()
            .zip(self.chart.coords())
            .filter(|(c, _)| !c.is_zero())
            .map(|(c, s)| if c.terms().len() > 1 { format!("({c})*d/d{s}") } else { format!("{c}*d/d{s}") })
            .collect();
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Sampler};

    fn chart() -> Chart {
        Chart::new(["x", "y", "z"]).unwrap()
    }

    fn f(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn hand_computed_exterior_calculus() {
        let c = chart();
        // d(x dy) = dx ^ dy
        let w = KForm::dx(&c, 1).scale(&f("x"));
        let dw = w.d();
        assert_eq!(dw.terms().len(), 1);
        assert!(dw.coefficient(&[0, 1]).is_one());
        // dy ^ dx = -dx ^ dy
        let yx = KForm::dx(&c, 1).wedge(&KForm::dx(&c, 0)).unwrap();
        assert_eq!(yx.coefficient(&[0, 1]), Expr::int(-1));
        // i_X (dx ^ dy) with X = d/dy gives -dx
        let xy = KForm::dx(&c, 0).wedge(&KForm::dx(&c, 1)).unwrap();
        let i = xy.interior(&VectorField::coordinate(&c, 1)).unwrap();
        assert_eq!(i.coefficient(&[0]), Expr::int(-1));
    }

    #[test]
    fn dd_is_zero_and_leibniz() {
        let c = chart();
        let a = KForm::from_row(&c, &[f("sin(x*y)"), f("z^2*exp(x)"), f("x - y*z")]);
        assert!(a.d().d().is_zero());
        let b = KForm::from_row(&c, &[f("y"), f("cos(z)"), f("x*y")]);
        // d(a ^ b) = da ^ b - a ^ db
        let lhs = a.wedge(&b).unwrap().d();
        let rhs = a.d().wedge(&b).unwrap().add(&a.wedge(&b.d()).unwrap().neg()).unwrap();
        let diff = lhs.add(&rhs.neg()).unwrap();
        let s = Sampler::default();
        assert!(s.all_zero(&diff.terms().values().cloned().collect::<Vec<_>>()).unwrap());
    }

    #[test]
    fn cartan_and_bracket() {
        let c = chart();
        let x = VectorField::new(&c, vec![f("y"), f("-x"), f("0")]);
        let y = VectorField::new(&c, vec![f("0"), f("z"), f("-y")]);
        let br = x.bracket(&y).unwrap();
        // [X, Y] = X(Y) - Y(X) componentwise.
        assert_eq!(br.components(), &[f("-z"), f("0"), f("x")]);
        // L_X dh = d(X h)
        let h = f("x^2*y + sin(z)");
        let dh = KForm::function(&c, h.clone()).d();
        let lie = dh.lie(&x).unwrap();
        let expect = KForm::function(&c, x.apply(&h)).d();
        assert!(lie.add(&expect.neg()).unwrap().is_zero());
    }

    #[test]
    fn chart_mismatch_is_an_error() {
        let a = KForm::dx(&chart(), 0);
        let b = KForm::dx(&Chart::new(["x", "w"]).unwrap(), 0);
        assert!(matches!(a.wedge(&b), Err(Error::ChartMismatch(_))));
    }
}
