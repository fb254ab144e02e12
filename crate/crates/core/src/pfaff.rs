//! Pfaffian systems and their derived flags.
//!
//! Two routes are provided. The form route works for any list of one-forms:
//! the kernel is built symbolically with Cramer minors and the derived
//! system is the kernel of the torsion map `w -> dw|ker`. The frame route
//! works dually on the kernel distribution and needs no division at all:
//! for a control system the kernel of `<I^(k), dt>` is
//! `E_k`, with `E_0` spanned by the input fields and
//! `E_{k+1} = E_k + [F, E_k] + [E_k, E_k]`, so every dimension and defect of
//! the augmented flag is a generic rank of brackets evaluated at points.

use crate::error::{Error, Result};
use crate::exterior::{Chart, KForm, VectorField};
use crate::expr::{DomainError, Evaluator, Expr, Point, Sampler, Value};
use crate::linalg::{self, best_selection, Echelon, Row};

#[derive(Clone, Debug)]
pub struct PfaffianSystem {
    chart: Chart,
    generators: Vec<KForm>,
}

/// Evaluate the coefficient rows of several one-forms.
pub fn eval_forms(ev: &mut Evaluator, forms: &[KForm]) -> std::result::Result<Vec<Row>, DomainError> {
    forms.iter().map(|w| w.eval_row(ev)).collect()
}

/// Generic rank of a list of one-forms, with an independent subset.
pub fn forms_rank(forms: &[KForm], sampler: &Sampler) -> Result<(usize, Vec<usize>)> {
    let rows: Vec<Vec<Expr>> = forms.iter().map(KForm::row).collect();
    linalg::generic_rank(&rows, sampler)
}

/// Generic rank of a list of vector fields, with an independent subset.
pub fn fields_rank(fields: &[VectorField], sampler: &Sampler) -> Result<(usize, Vec<usize>)> {
    let rows: Vec<Vec<Expr>> = fields.iter().map(|f| f.components().to_vec()).collect();
    linalg::generic_rank(&rows, sampler)
}

impl PfaffianSystem {
    pub fn new(chart: &Chart, generators: Vec<KForm>) -> Result<PfaffianSystem> {
        for g in &generators {
            if g.degree() != 1 {
                return Err(Error::InvalidInput(format!("generator `{}` is not a one-form", g.display())));
            }
            if !g.chart().same(chart) {
                return Err(Error::ChartMismatch(format!("generator `{}`", g.display())));
            }
        }
        Ok(PfaffianSystem { chart: chart.clone(), generators })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn generators(&self) -> &[KForm] {
        &self.generators
    }

    /// The system with extra generators appended.
    pub fn with(&self, extra: &[KForm]) -> Result<PfaffianSystem> {
        let mut g = self.generators.clone();
        g.extend(extra.iter().cloned());
        PfaffianSystem::new(&self.chart, g)
    }

    pub fn dim(&self, sampler: &Sampler) -> Result<usize> {
        Ok(forms_rank(&self.generators, sampler)?.0)
    }

    /// The same system with a generically independent set of generators.
    pub fn pruned(&self, sampler: &Sampler) -> Result<PfaffianSystem> {
        let (_, keep) = forms_rank(&self.generators, sampler)?;
        PfaffianSystem::new(&self.chart, keep.into_iter().map(|i| self.generators[i].clone()).collect())
    }

    /// Symbolic frame of the kernel distribution.
    pub fn kernel(&self, sampler: &Sampler) -> Result<Vec<VectorField>> {
        let rows: Vec<Vec<Expr>> = self.generators.iter().map(KForm::row).collect();
        let n = self.chart.dim();
        // Prefer pivots on later coordinates so the kernel is written over the
        // earlier ones (time and inputs come first in control charts).
        let order: Vec<usize> = (0..n).rev().collect();
        let mut vecs = linalg::symbolic_nullspace(&rows, n, &order, sampler)?;
        vecs.sort_by_key(|v| v.iter().position(|c| !c.is_zero()));
        Ok(vecs.into_iter().map(|v| VectorField::new(&self.chart, v)).collect())
    }

    /// First derived system: forms of the system whose exterior derivative
    /// vanishes on the kernel.
    pub fn derived_system(&self, sampler: &Sampler) -> Result<PfaffianSystem> {
        let me = self.pruned(sampler)?;
        let r = me.generators.len();
        if r == 0 {
            return Ok(me);
        }
        let kernel = me.kernel(sampler)?;
        let d: Vec<KForm> = me.generators.iter().map(KForm::d).collect();
        let mut torsion: Vec<Vec<Expr>> = Vec::new();
        for a in 0..kernel.len() {
            let ia: Vec<KForm> = d.iter().map(|w| w.interior(&kernel[a])).collect::<Result<_>>()?;
            for b in (a + 1)..kernel.len() {
                let row: Vec<Expr> =
                    ia.iter().map(|w| w.interior(&kernel[b]).map(|f| f.as_function())).collect::<Result<_>>()?;
                if row.iter().any(|e| !e.is_zero()) {
                    torsion.push(row);
                }
            }
        }
        if torsion.is_empty() {
            return Ok(me);
        }
        let order: Vec<usize> = (0..r).collect();
        let combos = linalg::symbolic_nullspace(&torsion, r, &order, sampler)?;
        let mut gens = Vec::new();
        for c in combos {
            let mut w = KForm::zero(&self.chart, 1);
            for (ci, g) in c.iter().zip(&me.generators) {
                if !ci.is_zero() {
                    w = w.add(&g.scale(ci))?;
                }
            }
            if !w.is_zero() {
                gens.push(w);
            }
        }
        PfaffianSystem::new(&self.chart, gens)
    }

    /// The derived flag `I, I^(1), ...` up to and including the first
    /// repeated dimension.
    pub fn derived_flag(&self, sampler: &Sampler) -> Result<Vec<PfaffianSystem>> {
        let mut flag = vec![self.pruned(sampler)?];
        loop {
            let last = flag.last().expect("nonempty");
            let next = last.derived_system(sampler)?;
            if next.generators.len() == last.generators.len() {
                return Ok(flag);
            }
            flag.push(next);
        }
    }

    pub fn defect(&self, sampler: &Sampler) -> Result<usize> {
        let me = self.pruned(sampler)?;
        Ok(me.generators.len() - me.derived_system(sampler)?.dim(sampler)?)
    }

    /// Frobenius test at sample points: every `dw` restricted to the kernel
    /// vanishes.
    pub fn is_involutive(&self, sampler: &Sampler) -> Result<bool> {
        let me = self.pruned(sampler)?;
        let d: Vec<KForm> = me.generators.iter().map(KForm::d).filter(|w| !w.is_zero()).collect();
        if d.is_empty() {
            return Ok(true);
        }
        let tol = sampler.tolerance();
        let n = self.chart.dim();
        let hits = sampler.sample(|p| {
            let mut ev = Evaluator::new(p, tol);
            let rows = eval_forms(&mut ev, &me.generators)?;
            let k = linalg::nullspace(&rows, n, tol);
            for w in &d {
                for a in 0..k.len() {
                    for b in (a + 1)..k.len() {
                        if !w.eval_pair(&mut ev, &k[a], &k[b])?.is_negligible(tol) {
                            return Ok(false);
                        }
                    }
                }
            }
            Ok(true)
        })?;
        Ok(hits.into_iter().all(|x| x))
    }

    /// Generic ideal membership of a one-form: adding it does not raise
    /// the rank.
    pub fn contains(&self, form: &KForm, sampler: &Sampler) -> Result<bool> {
        if form.degree() != 1 {
            return Err(Error::InvalidInput("membership is tested for one-forms".into()));
        }
        if !form.chart().same(&self.chart) {
            return Err(Error::ChartMismatch(form.display()));
        }
        let tol = sampler.tolerance();
        let hits = sampler.sample(|p| {
            let mut ev = Evaluator::new(p, tol);
            let mut ech = Echelon::new(tol);
            for r in eval_forms(&mut ev, &self.generators)? {
                ech.push(r);
            }
            Ok(ech.contains(&form.eval_row(&mut ev)?))
        })?;
        Ok(hits.into_iter().all(|x| x))
    }
}

/// A vector field with its symbolic Jacobian, so brackets can be evaluated
/// at points without building them symbolically.
#[derive(Clone, Debug)]
pub struct Jet {
    pub field: VectorField,
    jac: Vec<Vec<(usize, Expr)>>,
}

impl Jet {
    pub fn new(field: VectorField) -> Jet {
        let chart = field.chart().clone();
        let jac = field.components().iter().map(|c| chart.gradient(c)).collect();
        Jet { field, jac }
    }

    fn eval(&self, ev: &mut Evaluator) -> std::result::Result<JetValue, DomainError> {
        let vals = self.field.eval(ev)?;
        let mut jac = Vec::with_capacity(self.jac.len());
        for row in &self.jac {
            let mut r = Vec::with_capacity(row.len());
            for (j, e) in row {
                r.push((*j, ev.eval(e)?));
            }
            jac.push(r);
        }
        Ok(JetValue { vals, jac })
    }

    /// Symbolic bracket `[self, other]` from the stored Jacobians.
    pub fn bracket(&self, other: &Jet) -> VectorField {
        let a = self.field.components();
        let b = other.field.components();
        let comps = (0..a.len())
            .map(|i| {
                let mut terms = Vec::new();
                for (j, d) in &other.jac[i] {
                    if !a[*j].is_zero() {
                        terms.push(&a[*j] * d);
                    }
                }
                for (j, d) in &self.jac[i] {
                    if !b[*j].is_zero() {
                        terms.push(-(&b[*j] * d));
                    }
                }
                Expr::sum(terms)
            })
            .collect();
        VectorField::new(self.field.chart(), comps)
    }
}

struct JetValue {
    vals: Vec<Value>,
    jac: Vec<Vec<(usize, Value)>>,
}

fn apply_jac(jac: &[Vec<(usize, Value)>], v: &[Value]) -> Vec<Value> {
    jac.iter()
        .map(|row| row.iter().fold(Value::ZERO, |acc, (j, d)| acc.add(d.mul(v[*j]))))
        .collect()
}

fn num_bracket(a: &JetValue, b: &JetValue) -> Vec<Value> {
    let x = apply_jac(&b.jac, &a.vals);
    let y = apply_jac(&a.jac, &b.vals);
    x.into_iter().zip(y).map(|(p, q)| p.sub(q)).collect()
}

/// Values of some fields at a point, and of their brackets `[X_a, X_b]`
/// for `a < b` in row-major order.
pub fn frame_values(fields: &[Jet], ev: &mut Evaluator) -> std::result::Result<(Vec<Row>, Vec<Row>), DomainError> {
    let e: Vec<JetValue> = fields.iter().map(|j| j.eval(ev)).collect::<std::result::Result<_, _>>()?;
    let mut brackets = Vec::new();
    for a in 0..e.len() {
        for b in (a + 1)..e.len() {
            brackets.push(num_bracket(&e[a], &e[b]));
        }
    }
    Ok((e.into_iter().map(|j| j.vals).collect(), brackets))
}

/// One level of the augmented flag in frame form.
#[derive(Clone, Debug)]
pub struct FrameLevel {
    /// Basis of `E_k`, the kernel of `<I^(k), dt>`.
    pub fields: Vec<Jet>,
    /// Rank of `E_k + [E_k, E_k]`.
    pub closure_rank: usize,
}

impl FrameLevel {
    pub fn rank(&self) -> usize {
        self.fields.len()
    }

    pub fn defect(&self) -> usize {
        self.closure_rank - self.fields.len()
    }
}

#[derive(Clone, Debug)]
pub struct FrameFlag {
    pub dim: usize,
    pub levels: Vec<FrameLevel>,
    /// False when the computation stopped at the first defect.
    pub complete: bool,
}

impl FrameFlag {
    /// `dim <I^(k), dt>` per level.
    pub fn augmented_dims(&self) -> Vec<usize> {
        self.levels.iter().map(|l| self.dim - l.rank()).collect()
    }

    pub fn defects(&self) -> Vec<usize> {
        self.levels.iter().map(FrameLevel::defect).collect()
    }

    /// First level whose augmented system is not integrable.
    pub fn leading_index(&self) -> Option<usize> {
        self.levels.iter().position(|l| l.defect() > 0)
    }

    /// Defect at the leading index, zero when every level is integrable.
    pub fn lid(&self) -> usize {
        self.leading_index().map(|k| self.levels[k].defect()).unwrap_or(0)
    }

    /// Every level integrable and the flag ends at `<dt>`.
    pub fn linearizable(&self) -> bool {
        self.complete
            && self.leading_index().is_none()
            && self.levels.last().is_some_and(|l| l.rank() + 1 == self.dim)
    }

    /// Whether every level keeps its generic rank, and its closure its
    /// generic closure rank, at one point.
    pub fn regular_at(&self, point: &Point, tol: f64) -> std::result::Result<bool, DomainError> {
        let mut ev = Evaluator::new(point, tol);
        for level in &self.levels {
            let (vals, brackets) = frame_values(&level.fields, &mut ev)?;
            let mut ech = Echelon::new(tol);
            for v in vals {
                ech.push(v);
            }
            if ech.rank() != level.rank() {
                return Ok(false);
            }
            for b in brackets {
                ech.push(b);
            }
            if ech.rank() != level.closure_rank {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

enum Cand {
    Old(usize),
    Drift(usize),
    Pair(usize, usize),
}

/// The augmented derived flag of a control system from its drift and
/// input fields. With `stop_at_defect`, levels past the first
/// non-integrable one are not computed.
pub fn frame_flag(drift: &VectorField, inputs: &[VectorField], sampler: &Sampler, stop_at_defect: bool) -> Result<FrameFlag> {
    let n = drift.chart().dim();
    let tol = sampler.tolerance();
    let drift = Jet::new(drift.clone());
    let (_, keep) = fields_rank(inputs, sampler)?;
    let mut current: Vec<Jet> = keep.into_iter().map(|i| Jet::new(inputs[i].clone())).collect();
    let mut levels = Vec::new();
    loop {
        let r = current.len();
        let mut cands: Vec<Cand> = (0..r).map(Cand::Old).collect();
        cands.extend((0..r).map(Cand::Drift));
        for a in 0..r {
            for b in (a + 1)..r {
                cands.push(Cand::Pair(a, b));
            }
        }
        let per_point = sampler.sample(|p| {
            let mut ev = Evaluator::new(p, tol);
            let f = drift.eval(&mut ev)?;
            let e: Vec<JetValue> = current.iter().map(|j| j.eval(&mut ev)).collect::<std::result::Result<_, _>>()?;
            let rows: Vec<Row> = cands
                .iter()
                .map(|c| match c {
                    Cand::Old(a) => e[*a].vals.clone(),
                    Cand::Drift(a) => num_bracket(&f, &e[*a]),
                    Cand::Pair(a, b) => num_bracket(&e[*a], &e[*b]),
                })
                .collect();
            let mut closure = Echelon::new(tol);
            for (row, c) in rows.iter().zip(&cands) {
                if !matches!(c, Cand::Drift(_)) {
                    closure.push(row.clone());
                }
            }
            let mut next = Echelon::new(tol);
            let sel: Vec<usize> = rows.iter().enumerate().filter(|(_, row)| next.push((*row).clone())).map(|(i, _)| i).collect();
            Ok((closure.rank(), sel))
        })?;
        let closure_rank = per_point.iter().map(|(c, _)| *c).max().unwrap_or(0);
        let (_, sel) = best_selection(per_point.into_iter().map(|(_, s)| s).collect());
        let level = FrameLevel { fields: current.clone(), closure_rank };
        let defect = level.defect();
        levels.push(level);
        if stop_at_defect && defect > 0 {
            return Ok(FrameFlag { dim: n, levels, complete: false });
        }
        let new: Vec<Jet> = sel
            .iter()
            .filter_map(|&i| match cands[i] {
                Cand::Old(_) => None,
                Cand::Drift(a) => Some(Jet::new(drift.bracket(&current[a]))),
                Cand::Pair(a, b) => Some(Jet::new(current[a].bracket(&current[b]))),
            })
            .collect();
        if new.is_empty() {
            return Ok(FrameFlag { dim: n, levels, complete: true });
        }
        let mut next = current.clone();
        next.extend(new);
        current = next;
    }
}

/// Whether a one-form annihilates every field in a list, generically.
pub fn annihilates(form: &KForm, fields: &[Jet], sampler: &Sampler) -> Result<bool> {
    let exprs: Vec<Expr> = fields
        .iter()
        .map(|f| {
            Expr::sum(form.terms().iter().map(|(idx, c)| c * f.field.component(idx[0])))
        })
        .collect();
    sampler.all_zero(&exprs)
}

/// Fraction-free annihilator of a list of fields: a symbolic basis of the
/// one-forms vanishing on them.
pub fn annihilator(chart: &Chart, fields: &[VectorField], sampler: &Sampler) -> Result<Vec<KForm>> {
    let rows: Vec<Vec<Expr>> = fields.iter().map(|f| f.components().to_vec()).collect();
    let n = chart.dim();
    let order: Vec<usize> = (0..n).rev().collect();
    let vecs = if rows.is_empty() {
        (0..n)
            .map(|i| {
                let mut v = vec![Expr::zero(); n];
                v[i] = Expr::one();
                v
            })
            .collect()
    } else {
        linalg::symbolic_nullspace(&rows, n, &order, sampler)?
    };
    let mut forms: Vec<KForm> = vecs.iter().map(|v| KForm::from_row(chart, v)).collect();
    forms.sort_by_key(|w| w.terms().keys().next().cloned());
    Ok(forms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn f(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn contact_form_is_not_involutive() {
        // dz - y dx on R^3: dw = dx ^ dy restricted to the kernel is nonzero.
        let c = Chart::new(["x", "y", "z"]).unwrap();
        let w = KForm::from_row(&c, &[f("-y"), f("0"), f("1")]);
        let s = Sampler::default();
        let sys = PfaffianSystem::new(&c, vec![w]).unwrap();
        assert!(!sys.is_involutive(&s).unwrap());
        assert_eq!(sys.derived_system(&s).unwrap().dim(&s).unwrap(), 0);
        assert_eq!(sys.defect(&s).unwrap(), 1);
        let exact = PfaffianSystem::new(&c, vec![KForm::function(&c, f("x*y + sin(z)")).d()]).unwrap();
        assert!(exact.is_involutive(&s).unwrap());
    }

    #[test]
    fn double_integrator_flag_both_routes() {
        // t, u, x1, x2 with x1' = x2, x2' = u.
        let c = Chart::new(["t", "u", "x1", "x2"]).unwrap();
        let s = Sampler::default();
        let w1 = KForm::from_row(&c, &[f("-x2"), f("0"), f("1"), f("0")]);
        let w2 = KForm::from_row(&c, &[f("-u"), f("0"), f("0"), f("1")]);
        let dt = KForm::dx(&c, 0);
        let sys = PfaffianSystem::new(&c, vec![w1, w2]).unwrap();
        let flag = sys.derived_flag(&s).unwrap();
        let dims: Vec<usize> = flag.iter().map(|l| l.dim(&s).unwrap()).collect();
        assert_eq!(dims, vec![2, 1, 0]);
        for level in &flag {
            assert!(level.with(std::slice::from_ref(&dt)).unwrap().is_involutive(&s).unwrap());
        }
        let drift = VectorField::new(&c, vec![f("1"), f("0"), f("x2"), f("u")]);
        let g = VectorField::coordinate(&c, 1);
        let ff = frame_flag(&drift, &[g], &s, false).unwrap();
        assert_eq!(ff.augmented_dims(), vec![3, 2, 1]);
        assert_eq!(ff.defects(), vec![0, 0, 0]);
        assert!(ff.linearizable());
    }

    #[test]
    fn unicycle_defect() {
        // x' = u1 cos th, y' = u1 sin th, th' = u2: not linearizable.
        let c = Chart::new(["t", "u1", "u2", "x", "y", "th"]).unwrap();
        let s = Sampler::default();
        let drift = VectorField::new(&c, vec![f("1"), f("0"), f("0"), f("u1*cos(th)"), f("u1*sin(th)"), f("u2")]);
        let gs = [VectorField::coordinate(&c, 1), VectorField::coordinate(&c, 2)];
        let ff = frame_flag(&drift, &gs, &s, false).unwrap();
        assert_eq!(ff.augmented_dims(), vec![4, 2, 1]);
        assert_eq!(ff.defects(), vec![0, 1, 0]);
        assert_eq!(ff.leading_index(), Some(1));
        assert_eq!(ff.lid(), 1);
        assert!(!ff.linearizable());
        // The form route agrees on the first derived system.
        let gens: Vec<KForm> = [("u1*cos(th)", 3), ("u1*sin(th)", 4), ("u2", 5)]
            .iter()
            .map(|(rhs, i)| KForm::dx(&c, *i).add(&KForm::dx(&c, 0).scale(&f(rhs)).neg()).unwrap())
            .collect();
        let sys = PfaffianSystem::new(&c, gens).unwrap();
        let d1 = sys.derived_system(&s).unwrap();
        assert_eq!(d1.dim(&s).unwrap(), 1);
        let expect = KForm::dx(&c, 3).scale(&f("sin(th)")).add(&KForm::dx(&c, 4).scale(&f("-cos(th)"))).unwrap();
        assert!(d1.contains(&expect, &s).unwrap());
        let ann = annihilator(&c, &ff.levels[1].fields.iter().map(|j| j.field.clone()).collect::<Vec<_>>(), &s).unwrap();
        assert_eq!(ann.len(), 2);
        let with_dt = d1.with(&[KForm::dx(&c, 0)]).unwrap();
        for w in &ann {
            assert!(with_dt.contains(w, &s).unwrap());
        }
    }
}
