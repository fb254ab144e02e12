//! Foliations given by exact generators, and certificates that a foliation
//! is the zero dynamics foliation of some output with a vector relative
//! degree.
//!
//! A foliation is stored as the functions whose differentials generate its
//! ideal. Two ideals matter: the invariantized ideal `i(Z)`, closed under
//! input-free Lie derivatives along the drift, and its closure `i+(Z)` that
//! also contains the first input-dependent derivative of each generator.
//! Controllability indices are read off the intersections of `i+(Z)` with
//! the augmented derived flag, which reproduces the relative degrees of the
//! defining outputs; the indices of `i(Z)` alone are reported alongside.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::expr::{Evaluator, Expr, Sampler};
use crate::linalg::{self, Row};
use crate::numeric::Real;
use crate::pfaff::{FrameFlag, Jet};
use crate::system::ControlSystem;

/// A foliation given by functions whose level sets are its leaves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoliationIdeal {
    pub generators: Vec<Expr>,
}

impl FoliationIdeal {
    pub fn new(generators: Vec<Expr>) -> FoliationIdeal {
        FoliationIdeal { generators }
    }

    /// Canonical text, independent of generator order.
    pub fn fingerprint(&self) -> String {
        let mut g: Vec<String> = self.generators.iter().map(Expr::to_string).collect();
        g.sort();
        g.join("; ")
    }
}

fn gradient_rows(sys: &ControlSystem, fs: &[Expr]) -> Vec<Vec<Expr>> {
    let chart = sys.chart();
    fs.iter()
        .map(|f| {
            let mut row = vec![Expr::zero(); chart.dim()];
            for (i, d) in chart.gradient(f) {
                row[i] = d;
            }
            row
        })
        .collect()
}

/// Generically independent subset (in order) of a list of functions.
pub fn independent_functions(sys: &ControlSystem, fs: &[Expr], sampler: &Sampler) -> Result<Vec<Expr>> {
    let (_, keep) = linalg::generic_rank(&gradient_rows(sys, fs), sampler)?;
    Ok(keep.into_iter().map(|i| fs[i].clone()).collect())
}

/// Add input-free Lie derivatives until none is new.
pub fn invariantize(sys: &ControlSystem, k: &FoliationIdeal, sampler: &Sampler) -> Result<FoliationIdeal> {
    let mut gens = independent_functions(sys, &k.generators, sampler)?;
    let limit = sys.chart().dim();
    let mut i = 0;
    while i < gens.len() {
        if gens.len() > limit {
            return Err(Error::NotInvariant(limit));
        }
        let g = gens[i].clone();
        i += 1;
        if sys.input_dependent(&g, sampler)? {
            continue;
        }
        let lg = sys.lie(&g);
        if lg.is_constant() || sys.input_dependent(&lg, sampler)? {
            continue;
        }
        let mut trial = gens.clone();
        trial.push(lg);
        if independent_functions(sys, &trial, sampler)?.len() == trial.len() {
            gens = trial;
        }
    }
    Ok(FoliationIdeal::new(gens))
}

/// `i+(Z)`: the invariantized generators plus the first input-dependent
/// derivative of each input-free generator.
pub fn closed_generators(sys: &ControlSystem, z: &FoliationIdeal, sampler: &Sampler) -> Result<(FoliationIdeal, FoliationIdeal)> {
    let inv = invariantize(sys, z, sampler)?;
    let mut all = inv.generators.clone();
    for g in &inv.generators {
        if sys.input_dependent(g, sampler)? {
            continue;
        }
        let lg = sys.lie(g);
        if sys.input_dependent(&lg, sampler)? {
            all.push(lg);
        }
    }
    let closed = independent_functions(sys, &all, sampler)?;
    Ok((inv, FoliationIdeal::new(closed)))
}

/// Meet of two foliations: the sum of their ideals, with a canonical
/// generator order.
pub fn meet(sys: &ControlSystem, a: &FoliationIdeal, b: &FoliationIdeal, sampler: &Sampler) -> Result<FoliationIdeal> {
    let mut all: Vec<Expr> = a.generators.iter().chain(&b.generators).cloned().collect();
    all.sort_by_key(|e| e.to_string());
    all.dedup();
    Ok(FoliationIdeal::new(independent_functions(sys, &all, sampler)?))
}

#[derive(Clone, Debug)]
pub struct Certificate {
    /// Generators of `i(Z)`.
    pub invariant: FoliationIdeal,
    /// Generators of `i+(Z)`.
    pub closed: FoliationIdeal,
    /// Whether the given generators already formed an invariant ideal.
    pub input_was_invariant: bool,
    /// `dim (<I^(k), dt> ∩ i+(Z))` per flag level, without `dt`.
    pub intersection_dims: Vec<usize>,
    pub rho: Vec<usize>,
    pub kappa: Vec<usize>,
    /// Indices computed from `i(Z)` alone.
    pub literal_rho: Vec<usize>,
    pub literal_kappa: Vec<usize>,
    /// Outputs assembled from exact generators, with their relative degrees.
    pub outputs: Vec<Expr>,
    pub output_kappa: Vec<usize>,
    /// The relative degrees of the outputs agree with `kappa` as multisets.
    pub consistent: bool,
}

impl Certificate {
    /// Type `(r, kappa)` of the zero dynamics foliation.
    pub fn type_string(&self) -> String {
        let k: Vec<String> = self.output_kappa.iter().map(usize::to_string).collect();
        format!("({}, ({}))", self.outputs.len(), k.join(", "))
    }
}

/// Rows `X(c)` for fields `X` and functions `c`, evaluated.
fn action_rows(ev: &mut Evaluator, fields: &[Jet], grads: &[Vec<(usize, Expr)>]) -> std::result::Result<Vec<Row>, crate::expr::DomainError> {
    let vals: Vec<Vec<crate::expr::Value>> = fields.iter().map(|f| f.field.eval(ev)).collect::<std::result::Result<_, _>>()?;
    let mut rows = Vec::with_capacity(vals.len());
    for v in &vals {
        let mut row = Vec::with_capacity(grads.len());
        for g in grads {
            let mut acc = crate::expr::Value::ZERO;
            for (j, d) in g {
                if v[*j].v.is_zero() {
                    continue;
                }
                acc = acc.add(ev.eval(d)?.mul(v[*j]));
            }
            row.push(acc);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Dimension of `span{dc} ∩ ann(fields)` per point, and whether it is the
/// same at every point.
fn intersection_dim(fields: &[Jet], grads: &[Vec<(usize, Expr)>], sampler: &Sampler) -> Result<(usize, bool)> {
    let tol = sampler.tolerance();
    let ranks = sampler.sample(|p| {
        let mut ev = Evaluator::new(p, tol);
        let rows = action_rows(&mut ev, fields, grads)?;
        Ok(linalg::rank(&rows, tol))
    })?;
    let max = ranks.iter().copied().max().unwrap_or(0);
    let constant = ranks.iter().all(|&r| r == max);
    Ok((grads.len() - max, constant))
}

/// Best rational approximation with a bounded denominator.
fn rationalize(x: Real) -> Option<BigRational> {
    let v = x.to_f64();
    if v.abs() < 1e-12 {
        return Some(BigRational::zero());
    }
    let (mut h0, mut h1) = (BigInt::from(0), BigInt::from(1));
    let (mut k0, mut k1) = (BigInt::from(1), BigInt::from(0));
    let mut r = v;
    for _ in 0..40 {
        let a = r.floor();
        let ai = BigInt::from(a as i64);
        let h2 = &ai * &h1 + &h0;
        let k2 = &ai * &k1 + &k0;
        h0 = std::mem::replace(&mut h1, h2);
        k0 = std::mem::replace(&mut k1, k2);
        let approx = h1.to_f64()? / k1.to_f64()?;
        if (approx - v).abs() <= 1e-13 * v.abs().max(1.0) {
            return Some(BigRational::new(h1, k1));
        }
        if k1 > BigInt::from(1_000_000) {
            return None;
        }
        let frac = r - a;
        if frac.abs() < 1e-300 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

/// Constant-coefficient combinations of `funcs` whose differentials
/// annihilate `fields`, as functions. `None` when the numerical kernel does
/// not lift to rational coefficients.
fn exact_generators(fields: &[Jet], funcs: &[Expr], grads: &[Vec<(usize, Expr)>], sampler: &Sampler) -> Result<Option<Vec<Expr>>> {
    let tol = sampler.tolerance();
    let blocks = sampler.sample(|p| {
        let mut ev = Evaluator::new(p, tol);
        action_rows(&mut ev, fields, grads)
    })?;
    let stacked: Vec<Row> = blocks.into_iter().flatten().collect();
    let kernel = linalg::nullspace(&stacked, funcs.len(), tol);
    let mut out = Vec::new();
    for v in kernel {
        let mut terms = Vec::new();
        for (c, f) in v.iter().zip(funcs) {
            let Some(q) = rationalize(c.v) else { return Ok(None) };
            if !q.is_zero() {
                terms.push(f * &Expr::rational(q));
            }
        }
        let g = Expr::sum(terms);
        // Normalize the sign so the leading coefficient is positive.
        let g = if g.leading_coefficient().is_negative() { -g } else { g };
        out.push(g);
    }
    // Check exactly what was reconstructed numerically.
    for g in &out {
        let checks: Vec<Expr> = fields.iter().map(|f| f.field.apply(g)).collect();
        if !sampler.all_zero(&checks)? {
            return Ok(None);
        }
    }
    Ok(Some(out))
}

fn rho_kappa(total: usize, dims: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut rho = vec![total - dims.first().copied().unwrap_or(0)];
    for w in dims.windows(2) {
        rho.push(w[0] - w[1]);
    }
    // Under the literal reading rho^0 can vanish; the number of outputs is
    // then taken from the largest index so the formula still yields one
    // value per output.
    let max = rho.iter().copied().max().unwrap_or(0);
    let count = if rho[0] == 0 { max } else { rho[0] };
    let kappa = (1..=count).map(|i| rho.iter().filter(|&&r| r >= i).count().saturating_sub(1)).collect();
    (rho, kappa)
}

/// Decide whether `z` is a regular zero dynamics foliation and return its
/// type, indices and defining outputs.
pub fn certify(sys: &ControlSystem, z: &FoliationIdeal, flag: &FrameFlag, sampler: &Sampler) -> Result<Certificate> {
    if !flag.complete {
        return Err(Error::InvalidInput("certification needs the complete flag".into()));
    }
    let (inv, closed) = closed_generators(sys, z, sampler)?;
    let given = independent_functions(sys, &z.generators, sampler)?;
    let input_was_invariant = given.len() == inv.generators.len();
    let again = invariantize(sys, &inv, sampler)?;
    if again.generators.len() != inv.generators.len() {
        return Err(Error::NotRegular("invariantization is not idempotent".into()));
    }
    let chart = sys.chart();
    let grads: Vec<Vec<(usize, Expr)>> = closed.generators.iter().map(|c| chart.gradient(c)).collect();
    let mut dims = Vec::new();
    for (k, level) in flag.levels.iter().enumerate() {
        let (dim, constant) = intersection_dim(&level.fields, &grads, sampler)?;
        if !constant {
            return Err(Error::NotRegular(format!("intersection with level {k} does not have constant rank")));
        }
        dims.push(dim);
    }
    if dims.last().copied().unwrap_or(0) != 0 {
        return Err(Error::NotRegular("the foliation meets the last derived system".into()));
    }
    let (rho, kappa) = rho_kappa(closed.generators.len(), &dims);
    if rho.iter().skip(1).zip(rho.iter().skip(2)).any(|(a, b)| b > a) && rho[0] > 0 {
        // Indices must not increase after the first step.
        return Err(Error::NotRegular(format!("indices {rho:?} increase")));
    }
    let inv_grads: Vec<Vec<(usize, Expr)>> = inv.generators.iter().map(|c| chart.gradient(c)).collect();
    let mut literal_dims = Vec::new();
    for level in &flag.levels {
        literal_dims.push(intersection_dim(&level.fields, &inv_grads, sampler)?.0);
    }
    let (literal_rho, literal_kappa) = rho_kappa(inv.generators.len(), &literal_dims);

    // Assemble outputs from the top level down: a new output at level k has
    // relative degree k + 1 unless it is a derivative of one found higher up.
    let mut outputs: Vec<Expr> = Vec::new();
    let mut output_kappa: Vec<usize> = Vec::new();
    for k in (0..flag.levels.len()).rev() {
        if dims[k] == 0 {
            continue;
        }
        let Some(basis) = exact_generators(&flag.levels[k].fields, &closed.generators, &grads, sampler)? else {
            return Err(Error::NotRepresentable(format!("level {k} intersection")));
        };
        if basis.len() != dims[k] {
            return Err(Error::NotRepresentable(format!(
                "level {k}: {} exact generators for a {}-dimensional intersection",
                basis.len(),
                dims[k]
            )));
        }
        let mut covered: Vec<Expr> = Vec::new();
        for (h, &kh) in outputs.iter().zip(&output_kappa) {
            let mut d = h.clone();
            for _ in 0..=(kh - 1 - k) {
                covered.push(d.clone());
                d = sys.lie(&d);
            }
        }
        for b in basis {
            let mut trial = covered.clone();
            trial.push(b.clone());
            if independent_functions(sys, &trial, sampler)?.len() == trial.len() {
                covered.push(b.clone());
                outputs.push(b);
                output_kappa.push(k + 1);
            }
        }
    }
    // Relative degree zero outputs: generators not reached by the derivatives
    // of the outputs found so far.
    let mut covered: Vec<Expr> = Vec::new();
    for (h, &kh) in outputs.iter().zip(&output_kappa) {
        let mut d = h.clone();
        for _ in 0..=kh {
            covered.push(d.clone());
            d = sys.lie(&d);
        }
    }
    for c in &closed.generators {
        let mut trial = covered.clone();
        trial.push(c.clone());
        if independent_functions(sys, &trial, sampler)?.len() == trial.len() {
            covered.push(c.clone());
            outputs.push(c.clone());
            output_kappa.push(0);
        }
    }
    // Cross-check against the definition of relative degree.
    let rd = sys.vector_relative_degree(&outputs, sampler)?;
    let mut a = rd.kappa.clone();
    let mut b = kappa.clone();
    a.sort_unstable();
    b.sort_unstable();
    let consistent = a == b && rd.kappa == output_kappa;
    Ok(Certificate {
        invariant: inv,
        closed,
        input_was_invariant,
        intersection_dims: dims,
        rho,
        kappa,
        literal_rho,
        literal_kappa,
        outputs,
        output_kappa: rd.kappa,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Symbol};

    fn sys(states: &[&str], inputs: &[&str], f: &[&str]) -> ControlSystem {
        let st: Vec<Symbol> = states.iter().map(|s| Symbol::new(s)).collect();
        let inp: Vec<Symbol> = inputs.iter().map(|s| Symbol::new(s)).collect();
        ControlSystem::explicit(&st, &inp, f.iter().map(|s| parse(s).unwrap()).collect()).unwrap()
    }

    fn z(gs: &[&str]) -> FoliationIdeal {
        FoliationIdeal::new(gs.iter().map(|s| parse(s).unwrap()).collect())
    }

    #[test]
    fn double_integrator_output() {
        let s = Sampler::default();
        let c = sys(&["x1", "x2"], &["u"], &["x2", "u"]);
        let inv = invariantize(&c, &z(&["x1"]), &s).unwrap();
        assert_eq!(inv, z(&["x1", "x2"]));
        let flag = c.flag(&s, false).unwrap();
        let cert = certify(&c, &z(&["x1"]), &flag, &s).unwrap();
        assert_eq!(cert.rho, vec![1, 1, 1]);
        assert_eq!(cert.intersection_dims, vec![2, 1, 0]);
        assert_eq!(cert.kappa, vec![2]);
        assert_eq!(cert.literal_rho, vec![0, 1, 1]);
        assert_eq!(cert.literal_kappa, vec![1]);
        assert_eq!(cert.outputs, vec![parse("x1").unwrap()]);
        assert_eq!(cert.output_kappa, vec![2]);
        assert!(cert.consistent);
    }

    #[test]
    fn unicycle_single_output() {
        let s = Sampler::default();
        let c = sys(&["x", "y", "th"], &["u1", "u2"], &["u1*cos(th)", "u1*sin(th)", "u2"]);
        let flag = c.flag(&s, false).unwrap();
        let cert = certify(&c, &z(&["x"]), &flag, &s).unwrap();
        assert_eq!(cert.output_kappa, vec![1]);
        assert!(cert.consistent);
        let cert = certify(&c, &z(&["x", "th"]), &flag, &s).unwrap();
        assert_eq!(cert.type_string(), "(2, (1, 1))");
    }

    #[test]
    fn meet_is_order_independent() {
        let s = Sampler::default();
        let c = sys(&["x1", "x2", "x3"], &["u"], &["x2", "x3", "u"]);
        let a = z(&["x1 + x2"]);
        let b = z(&["x3", "x1"]);
        let m1 = meet(&c, &a, &b, &s).unwrap();
        let m2 = meet(&c, &b, &a, &s).unwrap();
        assert_eq!(m1.fingerprint(), m2.fingerprint());
        assert_eq!(m1.generators.len(), 3);
    }

    #[test]
    fn rational_reconstruction() {
        assert_eq!(rationalize(Real::from_f64(-0.75)), Some(BigRational::new((-3).into(), 4.into())));
        assert_eq!(rationalize(Real::from_f64(1.0) / Real::from_f64(3.0)), Some(BigRational::new(1.into(), 3.into())));
        assert!(rationalize(Real::pi()).is_none());
    }
}
