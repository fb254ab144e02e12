//! Control systems as Pfaffian systems with a time coordinate.
//!
//! A system lives on a chart `(t, inputs, states)` and is described by its
//! drift `F` (with `F(t) = 1`), one input field per input, and the contact
//! generators annihilating both. Systems entered as ODEs `x' = f(x, u)` keep
//! their right-hand sides; systems produced by an implicit extension only
//! keep the frame and the generators.

use num_rational::BigRational;
use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exterior::{Chart, KForm, VectorField};
use crate::expr::{Evaluator, Expr, Point, Sampler, Symbol};
use crate::extend::ExtensionArrow;
use crate::linalg::Echelon;
use crate::pfaff::{frame_flag, FrameFlag, PfaffianSystem};

pub const TIME: &str = "t";

#[derive(Clone, Debug)]
pub struct ControlSystem {
    chart: Chart,
    inputs: Vec<usize>,
    states: Vec<usize>,
    drift: VectorField,
    input_fields: Vec<VectorField>,
    contact: Vec<KForm>,
    dynamics: Option<Vec<Expr>>,
    point: BTreeMap<Symbol, BigRational>,
    history: Vec<ExtensionArrow>,
    parent: Option<Arc<ControlSystem>>,
}

/// Dimensions and defects of the augmented flag `<I^(k), dt>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DefectReport {
    pub augmented_dims: Vec<usize>,
    pub defects: Vec<usize>,
    pub leading_index: Option<usize>,
    pub lid: usize,
    /// Whether every level was computed (false after an early stop).
    pub complete: bool,
}

impl DefectReport {
    pub fn from_flag(flag: &FrameFlag) -> DefectReport {
        DefectReport {
            augmented_dims: flag.augmented_dims(),
            defects: flag.defects(),
            leading_index: flag.leading_index(),
            lid: flag.lid(),
            complete: flag.complete,
        }
    }

    /// Brunovsky-type condition: the augmented flag reaches `<dt>`.
    pub fn controllable(&self) -> bool {
        self.complete && self.augmented_dims.last() == Some(&1)
    }

    pub fn linearizable(&self) -> bool {
        self.controllable() && self.leading_index.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct RelativeDegree {
    pub kappa: Vec<usize>,
    /// `L_F^j h` for `j = 0..=kappa` per output.
    pub derivatives: Vec<Vec<Expr>>,
    /// Rows `G_a(L_F^kappa h)`.
    pub decoupling: Vec<Vec<Expr>>,
    /// Product of elimination pivots of the decoupling matrix at the base
    /// point, a numerical witness that the joint wedge is nonzero there.
    pub witness: f64,
}

impl ControlSystem {
    /// A system `x' = f(x, u)` given by its right-hand sides.
    pub fn explicit(states: &[Symbol], inputs: &[Symbol], dynamics: Vec<Expr>) -> Result<ControlSystem> {
        if dynamics.len() != states.len() {
            return Err(Error::NotAControlSystem(format!(
                "{} state equations for {} states",
                dynamics.len(),
                states.len()
            )));
        }
        if inputs.is_empty() {
            return Err(Error::NotAControlSystem("no inputs".into()));
        }
        if states.is_empty() {
            return Err(Error::NotAControlSystem("no states".into()));
        }
        let time = Symbol::new(TIME);
        if states.contains(&time) || inputs.contains(&time) {
            return Err(Error::InvalidInput(format!("`{TIME}` is reserved for time")));
        }
        let mut coords = vec![time];
        coords.extend(inputs.iter().cloned());
        coords.extend(states.iter().cloned());
        let chart = Chart::new(coords)?;
        for (s, f) in states.iter().zip(&dynamics) {
            if let Some(bad) = f.free_symbols().into_iter().find(|v| !chart.contains(v)) {
                return Err(Error::NotAControlSystem(format!("equation for `{s}` uses undeclared symbol `{bad}`")));
            }
        }
        let m = inputs.len();
        let input_idx: Vec<usize> = (1..=m).collect();
        let state_idx: Vec<usize> = (m + 1..m + 1 + states.len()).collect();
        Ok(ControlSystem::from_explicit_parts(chart, input_idx, state_idx, dynamics))
    }

    pub(crate) fn from_explicit_parts(chart: Chart, inputs: Vec<usize>, states: Vec<usize>, dynamics: Vec<Expr>) -> ControlSystem {
        let mut drift = vec![Expr::zero(); chart.dim()];
        drift[0] = Expr::one();
        let mut contact = Vec::with_capacity(states.len());
        for (&i, f) in states.iter().zip(&dynamics) {
            drift[i] = f.clone();
            let w = KForm::from_terms(&chart, 1, [(vec![i], Expr::one()), (vec![0], -f)]);
            contact.push(w);
        }
        let drift = VectorField::new(&chart, drift);
        let input_fields = inputs.iter().map(|&i| VectorField::coordinate(&chart, i)).collect();
        ControlSystem {
            chart,
            inputs,
            states,
            drift,
            input_fields,
            contact,
            dynamics: Some(dynamics),
            point: BTreeMap::new(),
            history: Vec::new(),
            parent: None,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_frame(
        chart: Chart,
        inputs: Vec<usize>,
        states: Vec<usize>,
        drift: VectorField,
        input_fields: Vec<VectorField>,
        contact: Vec<KForm>,
    ) -> ControlSystem {
        ControlSystem {
            chart,
            inputs,
            states,
            drift,
            input_fields,
            contact,
            dynamics: None,
            point: BTreeMap::new(),
            history: Vec::new(),
            parent: None,
        }
    }

    pub(crate) fn with_lineage(mut self, parent: Arc<ControlSystem>, arrow: ExtensionArrow) -> ControlSystem {
        self.history = parent.history.clone();
        self.history.push(arrow);
        self.point = parent.point.clone();
        self.parent = Some(parent);
        self
    }

    /// Pin base-point values for some coordinates.
    pub fn with_point(mut self, point: BTreeMap<Symbol, BigRational>) -> Result<ControlSystem> {
        for s in point.keys() {
            if !self.chart.contains(s) {
                return Err(Error::InvalidInput(format!("base point names unknown symbol `{s}`")));
            }
        }
        self.point = point;
        Ok(self)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn input_indices(&self) -> &[usize] {
        &self.inputs
    }

    pub fn state_indices(&self) -> &[usize] {
        &self.states
    }

    pub fn inputs(&self) -> Vec<Symbol> {
        self.inputs.iter().map(|&i| self.chart.coord(i).clone()).collect()
    }

    pub fn states(&self) -> Vec<Symbol> {
        self.states.iter().map(|&i| self.chart.coord(i).clone()).collect()
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn drift(&self) -> &VectorField {
        &self.drift
    }

    pub fn input_fields(&self) -> &[VectorField] {
        &self.input_fields
    }

    pub fn dynamics(&self) -> Option<&[Expr]> {
        self.dynamics.as_deref()
    }

    pub fn is_explicit(&self) -> bool {
        self.dynamics.is_some()
    }

    pub fn contact_generators(&self) -> &[KForm] {
        &self.contact
    }

    pub fn contact_ideal(&self) -> PfaffianSystem {
        PfaffianSystem::new(&self.chart, self.contact.clone()).expect("contact generators live on the chart")
    }

    pub fn dt(&self) -> KForm {
        KForm::dx(&self.chart, 0)
    }

    pub fn history(&self) -> &[ExtensionArrow] {
        &self.history
    }

    pub fn parent(&self) -> Option<&Arc<ControlSystem>> {
        self.parent.as_ref()
    }

    pub fn base_point(&self) -> &BTreeMap<Symbol, BigRational> {
        &self.point
    }

    /// Lie derivative of a function along the drift.
    pub fn lie(&self, h: &Expr) -> Expr {
        self.drift.apply(h)
    }

    /// Whether `h` generically depends on the inputs (some `G_a h != 0`).
    pub fn input_dependent(&self, h: &Expr, sampler: &Sampler) -> Result<bool> {
        let rows: Vec<Expr> = self.input_fields.iter().map(|g| g.apply(h)).collect();
        Ok(!sampler.all_zero(&rows)?)
    }

    /// The augmented derived flag, computed on the kernel frame.
    pub fn flag(&self, sampler: &Sampler, stop_at_defect: bool) -> Result<FrameFlag> {
        frame_flag(&self.drift, &self.input_fields, sampler, stop_at_defect)
    }

    pub fn defect_report(&self, sampler: &Sampler) -> Result<DefectReport> {
        Ok(DefectReport::from_flag(&self.flag(sampler, false)?))
    }

    /// Static feedback linearizability: controllable with every
    /// `<I^(k), dt>` integrable. Stops at the first defect.
    pub fn feedback_linearizable(&self, sampler: &Sampler) -> Result<bool> {
        Ok(self.flag(sampler, true)?.linearizable())
    }

    /// Feedback linearizable, and the base point is a regular point of
    /// the flag. Unpinned coordinates are drawn by the sampler.
    pub fn linearizable_at_base_point(&self, sampler: &Sampler) -> Result<bool> {
        let flag = self.flag(sampler, true)?;
        if !flag.linearizable() {
            return Ok(false);
        }
        flag.regular_at(&self.base_point_for(sampler), sampler.tolerance())
            .map_err(|e| Error::NotRegular(format!("base point is singular: {e}")))
    }

    /// Defect at the leading (first non-integrable) index; zero for
    /// systems without one.
    pub fn lid(&self, sampler: &Sampler) -> Result<usize> {
        Ok(self.flag(sampler, true)?.lid())
    }

    /// The base point: pinned coordinates, the rest drawn from the seed.
    pub fn base_point_for(&self, sampler: &Sampler) -> Point {
        Point::fixed(self.point.clone(), sampler.seed())
    }

    /// Vector relative degree of outputs: the least order at which each
    /// output's derivative involves an input, with the joint decoupling
    /// matrix of full rank generically and at the base point.
    pub fn vector_relative_degree(&self, outputs: &[Expr], sampler: &Sampler) -> Result<RelativeDegree> {
        let n = self.n_states();
        let mut kappa = Vec::new();
        let mut derivatives = Vec::new();
        let mut decoupling = Vec::new();
        for h in outputs {
            if let Some(bad) = h.free_symbols().into_iter().find(|v| !self.chart.contains(v)) {
                return Err(Error::InvalidInput(format!("output `{h}` uses unknown symbol `{bad}`")));
            }
            let mut ders = vec![h.clone()];
            let mut found = None;
            for j in 0..=n {
                let phi = &ders[j];
                let row: Vec<Expr> = self.input_fields.iter().map(|g| g.apply(phi)).collect();
                if !sampler.all_zero(&row)? {
                    found = Some((j, row));
                    break;
                }
                let next = self.lie(phi);
                ders.push(next);
            }
            let Some((k, row)) = found else {
                return Err(Error::RelativeDegreeUndefined(format!("no derivative of `{h}` up to order {n} involves an input")));
            };
            ders.truncate(k + 1);
            kappa.push(k);
            derivatives.push(ders);
            decoupling.push(row);
        }
        let (rank, _) = crate::linalg::generic_rank(&decoupling, sampler)?;
        if rank < outputs.len() {
            return Err(Error::RelativeDegreeUndefined("decoupling matrix is generically singular".into()));
        }
        let witness = self.decoupling_witness(&decoupling, sampler)?;
        if witness <= sampler.tolerance() {
            return Err(Error::RelativeDegreeUndefined("decoupling matrix is singular at the base point".into()));
        }
        Ok(RelativeDegree { kappa, derivatives, decoupling, witness })
    }

    fn decoupling_witness(&self, rows: &[Vec<Expr>], sampler: &Sampler) -> Result<f64> {
        let tol = sampler.tolerance();
        let eval_at = |p: &Point| -> std::result::Result<f64, crate::expr::DomainError> {
            let mut ev = Evaluator::new(p, tol);
            let m = crate::linalg::eval_rows(&mut ev, rows)?;
            let mut ech = Echelon::new(tol);
            for r in m {
                if !ech.push(r) {
                    return Ok(0.0);
                }
            }
            Ok(ech.pivot_product())
        };
        if self.point.is_empty() {
            let w = sampler.sample(eval_at)?;
            return Ok(w[0]);
        }
        eval_at(&self.base_point_for(sampler))
            .map_err(|e| Error::RelativeDegreeUndefined(format!("base point is singular: {e}")))
    }
}
