//! One-step dynamic extensions and their verification.
//!
//! Extending along an output `h` of relative degree `k` adds the constraint
//! `d(L^k h) - q dt` with a new input `q`, and frees one input that appears
//! non-singularly in `L^k h`. When `L^k h` is affine in that input it is
//! solved for explicitly and the system stays in ODE form with a new state
//! `zeta = L^k h`. Otherwise the input itself becomes a state and the
//! constraint is kept implicit in the frame, which describes the same
//! Pfaffian system in different coordinates.
//!
//! New symbols are named after the input slot they replace: replacing `u`
//! introduces the input `u_d1` (then `u_d2`, ...) and, on the explicit
//! route, the state `zeta_u`. Names therefore do not depend on the order in
//! which commuting extensions are applied.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exterior::{Chart, KForm, VectorField};
use crate::expr::{Expr, Sampler, Symbol};
use crate::pfaff::{forms_rank, PfaffianSystem};
use crate::system::ControlSystem;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Route {
    /// The replaced input was solved out: `replaced = substitution`.
    Explicit { substitution: Expr },
    /// The replaced input became a state; `L^k h` is a function on the new
    /// chart with derivative `q`.
    Implicit,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtensionArrow {
    /// Output on the source chart.
    pub output: Expr,
    pub kappa: usize,
    pub replaced: Symbol,
    pub new_state: Symbol,
    pub new_input: Symbol,
    pub route: Route,
    /// The output is one of the inputs.
    pub prolongation: bool,
}

impl ExtensionArrow {
    /// Dimension loss of a primitive arrow.
    pub const LOSS: usize = 1;

    /// `kappa|output|replaced`. Leading with the relative degree makes
    /// fingerprint ties favour lower-order arrows, prolongations first.
    pub fn descriptor(&self) -> String {
        format!("{}|{}|{}", self.kappa, self.output, self.replaced)
    }

    /// Images of the source coordinates under the projection, as
    /// expressions on the target chart.
    pub fn projection(&self, source: &Chart) -> Vec<Expr> {
        source
            .coords()
            .iter()
            .map(|c| match &self.route {
                Route::Explicit { substitution } if *c == self.replaced => substitution.clone(),
                _ => Expr::symbol(c),
            })
            .collect()
    }
}

/// Name of the input that replaces `u`: `u_d1`, `u_d1 -> u_d2`, ...
fn next_input_name(u: &Symbol) -> String {
    let s = u.as_str();
    if let Some((root, k)) = s.rsplit_once("_d") {
        if let Ok(k) = k.parse::<u32>() {
            return format!("{root}_d{}", k + 1);
        }
    }
    format!("{s}_d1")
}

fn fresh(chart: &Chart, base: String) -> Symbol {
    let mut name = base.clone();
    let mut k = 2;
    while chart.contains(&Symbol::new(&name)) {
        name = format!("{base}_{k}");
        k += 1;
    }
    Symbol::new(&name)
}

/// Extend along `h`, replacing the lowest-index input that appears
/// non-singularly in `L^k h`.
pub fn one_step_extension(sys: &Arc<ControlSystem>, h: &Expr, sampler: &Sampler) -> Result<(ControlSystem, ExtensionArrow)> {
    one_step_extension_replacing(sys, h, None, sampler)
}

/// As [`one_step_extension`], with an optional choice of input to replace.
pub fn one_step_extension_replacing(
    sys: &Arc<ControlSystem>,
    h: &Expr,
    replace: Option<&Symbol>,
    sampler: &Sampler,
) -> Result<(ControlSystem, ExtensionArrow)> {
    let rd = sys.vector_relative_degree(std::slice::from_ref(h), sampler)?;
    let kappa = rd.kappa[0];
    let phi = rd.derivatives[0][kappa].clone();
    let row = &rd.decoupling[0];
    let inputs = sys.inputs();
    let a = match replace {
        Some(u) => {
            let a = inputs
                .iter()
                .position(|v| v == u)
                .ok_or_else(|| Error::InvalidInput(format!("`{u}` is not an input")))?;
            if sampler.is_zero(&row[a])? {
                return Err(Error::NoValidReplacement(format!("`{u}` does not appear in the derivative of `{h}`")));
            }
            a
        }
        None => {
            let mut found = None;
            for (a, g) in row.iter().enumerate() {
                if !sampler.is_zero(g)? {
                    found = Some(a);
                    break;
                }
            }
            found.ok_or_else(|| Error::NoValidReplacement(format!("no input appears in the derivative of `{h}`")))?
        }
    };
    let u = inputs[a].clone();
    let new_input = fresh(sys.chart(), next_input_name(&u));
    let prolongation = kappa == 0 && *h == Expr::symbol(&u);

    let affine = phi.polynomial_in(&u).filter(|c| c.len() == 2);
    let (child, route, new_state) = match (sys.dynamics(), affine) {
        (Some(f), Some(c)) => {
            let new_state = if prolongation { u.clone() } else { fresh(sys.chart(), format!("zeta_{u}")) };
            let zeta = Expr::symbol(&new_state);
            let substitution = if prolongation { zeta.clone() } else { (&zeta - &c[0]) * c[1].recip() };
            let map: BTreeMap<Symbol, Expr> = [(u.clone(), substitution.clone())].into();
            let chart = sys.chart();
            let mut coords: Vec<Symbol> = vec![chart.coord(0).clone()];
            coords.extend(inputs.iter().map(|v| if *v == u { new_input.clone() } else { v.clone() }));
            coords.extend(sys.states());
            coords.push(new_state.clone());
            let new_chart = Chart::new(coords)?;
            let m = inputs.len();
            let n = sys.n_states();
            let mut dyn2: Vec<Expr> = f.iter().map(|e| e.subst(&map)).collect();
            dyn2.push(Expr::symbol(&new_input));
            let child = ControlSystem::from_explicit_parts(new_chart, (1..=m).collect(), (m + 1..=m + n + 1).collect(), dyn2);
            (child, Route::Explicit { substitution }, new_state)
        }
        _ => (implicit(sys, &phi, a, &new_input)?, Route::Implicit, u.clone()),
    };
    let arrow = ExtensionArrow { output: h.clone(), kappa, replaced: u, new_state, new_input, route, prolongation };
    Ok((child.with_lineage(sys.clone(), arrow.clone()), arrow))
}

/// Frame of the extension that keeps `phi = L^k h` implicit.
fn implicit(sys: &ControlSystem, phi: &Expr, a: usize, q: &Symbol) -> Result<ControlSystem> {
    let chart = sys.chart();
    let mut coords = chart.coords().to_vec();
    coords.push(q.clone());
    let new_chart = Chart::new(coords)?;
    let qi = chart.dim();
    let lift = |v: &VectorField| {
        let mut c = v.components().to_vec();
        c.push(Expr::zero());
        VectorField::new(&new_chart, c)
    };
    let f = lift(sys.drift());
    let gs: Vec<VectorField> = sys.input_fields().iter().map(lift).collect();
    let ga = &gs[a];
    let ga_phi = ga.apply(phi);
    let inv = ga_phi.recip();
    let coef = (Expr::symbol(q) - f.apply(phi)) * &inv;
    let drift = f.add(&ga.scale(&coef))?;
    let mut fields = Vec::new();
    let mut inputs = Vec::new();
    for (b, g) in gs.iter().enumerate() {
        if b == a {
            continue;
        }
        let c = -(g.apply(phi) * &inv);
        fields.push(if c.is_zero() { g.clone() } else { g.add(&ga.scale(&c))? });
        inputs.push(sys.input_indices()[b]);
    }
    fields.push(VectorField::coordinate(&new_chart, qi));
    inputs.push(qi);
    let mut states = sys.state_indices().to_vec();
    states.push(sys.input_indices()[a]);
    let mut contact: Vec<KForm> = Vec::new();
    for w in sys.contact_generators() {
        contact.push(w.pullback(&new_chart, &chart.coords().iter().map(Expr::symbol).collect::<Vec<_>>())?);
    }
    let dphi = KForm::function(&new_chart, phi.clone()).d();
    contact.push(dphi.add(&KForm::dx(&new_chart, 0).scale(&-Expr::symbol(q)))?);
    Ok(ControlSystem::from_frame(new_chart, inputs, states, drift, fields, contact))
}

/// Prolong one input: extend along the input itself.
pub fn pure_prolongation(sys: &Arc<ControlSystem>, input: &Symbol, sampler: &Sampler) -> Result<(ControlSystem, ExtensionArrow)> {
    if !sys.inputs().contains(input) {
        return Err(Error::InvalidInput(format!("`{input}` is not an input")));
    }
    one_step_extension_replacing(sys, &Expr::symbol(input), Some(input), sampler)
}

/// Check that `candidate` projects onto `base` along `images` (the base
/// coordinates as functions on the candidate chart): the pulled-back contact
/// generators lie in the candidate's ideal, the candidate's contact ideal has
/// full rank, and `covering` together with the pulled-back coordinates and
/// `dt` spans every direction of the candidate chart.
pub fn verify_projection(
    candidate: &ControlSystem,
    base: &ControlSystem,
    images: &[Expr],
    covering: &[Expr],
    sampler: &Sampler,
) -> Result<bool> {
    let c_chart = candidate.chart();
    let ideal: PfaffianSystem = candidate.contact_ideal();
    let (contact_rank, _) = forms_rank(candidate.contact_generators(), sampler)?;
    if contact_rank != candidate.n_states() {
        return Ok(false);
    }
    for w in base.contact_generators() {
        let pulled = w.pullback(c_chart, images)?;
        if !ideal.contains(&pulled, sampler)? {
            return Ok(false);
        }
    }
    let mut forms: Vec<KForm> = images.iter().map(|f| KForm::function(c_chart, f.clone()).d()).collect();
    forms.extend(covering.iter().map(|f| KForm::function(c_chart, f.clone()).d()));
    forms.push(candidate.dt());
    let (rank, _) = forms_rank(&forms, sampler)?;
    Ok(rank == c_chart.dim())
}

/// Check the two conditions of an extension system for a primitive arrow:
/// pullback containment and covering by the derivatives of the output.
/// Also checks that the output gained one order of relative degree.
pub fn verify_extension(candidate: &ControlSystem, base: &ControlSystem, arrow: &ExtensionArrow, sampler: &Sampler) -> Result<bool> {
    if candidate.chart().dim() != base.chart().dim() + 1 || candidate.n_inputs() != base.n_inputs() {
        return Ok(false);
    }
    let images = arrow.projection(base.chart());
    let map: BTreeMap<Symbol, Expr> = base.chart().coords().iter().cloned().zip(images.iter().cloned()).collect();
    let h = arrow.output.subst(&map);
    let rd = match candidate.vector_relative_degree(std::slice::from_ref(&h), sampler) {
        Ok(rd) => rd,
        Err(Error::RelativeDegreeUndefined(_)) => return Ok(false),
        Err(e) => return Err(e),
    };
    if rd.kappa[0] != arrow.kappa + 1 {
        return Ok(false);
    }
    verify_projection(candidate, base, &images, &rd.derivatives[0], sampler)
}

/// The extension history of `sys` as verified primitive links, oldest
/// first, each with the system it starts from.
pub fn decompose_composite(sys: &ControlSystem, sampler: &Sampler) -> Result<Vec<(Arc<ControlSystem>, ExtensionArrow)>> {
    let mut links = Vec::new();
    let mut current = sys;
    while let Some(parent) = current.parent() {
        let arrow = current
            .history()
            .last()
            .ok_or_else(|| Error::NotDecomposable("parent without an arrow".into()))?;
        if !verify_extension(current, parent, arrow, sampler)? {
            return Err(Error::NotDecomposable(format!("link `{}` fails verification", arrow.descriptor())));
        }
        links.push((parent.clone(), arrow.clone()));
        current = parent;
    }
    links.reverse();
    Ok(links)
}

/// Apply one-step extensions along each output in turn.
pub fn extend_along(sys: &Arc<ControlSystem>, outputs: &[Expr], sampler: &Sampler) -> Result<Arc<ControlSystem>> {
    let mut cur = sys.clone();
    for h in outputs {
        cur = Arc::new(one_step_extension(&cur, h, sampler)?.0);
    }
    Ok(cur)
}

/// Prolong inputs by the given orders.
pub fn prolong_profile(sys: &Arc<ControlSystem>, orders: &[(Symbol, usize)], sampler: &Sampler) -> Result<Arc<ControlSystem>> {
    let mut cur = sys.clone();
    for (u, k) in orders {
        let mut name = u.clone();
        for _ in 0..*k {
            let (child, arrow) = pure_prolongation(&cur, &name, sampler)?;
            name = arrow.new_input.clone();
            cur = Arc::new(child);
        }
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn sys(states: &[&str], inputs: &[&str], f: &[&str]) -> Arc<ControlSystem> {
        let st: Vec<Symbol> = states.iter().map(|s| Symbol::new(s)).collect();
        let inp: Vec<Symbol> = inputs.iter().map(|s| Symbol::new(s)).collect();
        Arc::new(ControlSystem::explicit(&st, &inp, f.iter().map(|s| parse(s).unwrap()).collect()).unwrap())
    }

    #[test]
    fn double_integrator_along_position_is_a_triple_chain() {
        let s = Sampler::default();
        let c = sys(&["x1", "x2"], &["u"], &["x2", "u"]);
        let (e, arrow) = one_step_extension(&c, &parse("x1").unwrap(), &s).unwrap();
        assert_eq!(arrow.kappa, 2);
        assert_eq!(arrow.new_input, Symbol::new("u_d1"));
        assert_eq!(e.dynamics().unwrap(), &[parse("x2").unwrap(), parse("zeta_u").unwrap(), parse("u_d1").unwrap()][..]);
        assert!(e.feedback_linearizable(&s).unwrap());
        assert!(verify_extension(&e, &c, &arrow, &s).unwrap());
        assert_eq!(e.vector_relative_degree(&[parse("x1").unwrap()], &s).unwrap().kappa, vec![3]);
    }

    #[test]
    fn relative_degree_zero_output_is_a_prolongation() {
        let s = Sampler::default();
        let c = sys(&["x", "y", "th"], &["u1", "u2"], &["u1*cos(th)", "u1*sin(th)", "u2"]);
        let (a, arrow_a) = one_step_extension(&c, &parse("u1").unwrap(), &s).unwrap();
        let (b, arrow_b) = pure_prolongation(&c, &Symbol::new("u1"), &s).unwrap();
        assert_eq!(arrow_a, arrow_b);
        assert!(arrow_a.prolongation);
        assert_eq!(a.dynamics(), b.dynamics());
        assert_eq!(a.states(), vec![Symbol::new("x"), Symbol::new("y"), Symbol::new("th"), Symbol::new("u1")]);
        assert!(a.feedback_linearizable(&s).unwrap());
        assert!(!c.feedback_linearizable(&s).unwrap());
    }

    #[test]
    fn implicit_route_matches_explicit_flag() {
        // u enters nonlinearly through exp, so the implicit route is taken.
        let s = Sampler::default();
        let c = sys(&["x1", "x2", "x3"], &["u", "v"], &["x2", "exp(u) + x3", "v"]);
        let (e, arrow) = one_step_extension(&c, &parse("x2").unwrap(), &s).unwrap();
        assert_eq!(arrow.route, Route::Implicit);
        assert!(!e.is_explicit());
        assert!(verify_extension(&e, &c, &arrow, &s).unwrap());
        // Same extension written out by hand: w = exp(u) + x3, w' = q.
        let hand = sys(&["x1", "x2", "x3", "w"], &["q", "v"], &["x2", "w", "v", "q"]);
        assert_eq!(e.defect_report(&s).unwrap(), hand.defect_report(&s).unwrap());
    }

    #[test]
    fn prolongations_commute_by_name() {
        let s = Sampler::default();
        let c = sys(&["x", "y", "th"], &["u1", "u2"], &["u1*cos(th)", "u1*sin(th)", "u2"]);
        let ab = prolong_profile(&c, &[(Symbol::new("u1"), 1), (Symbol::new("u2"), 1)], &s).unwrap();
        let ba = prolong_profile(&c, &[(Symbol::new("u2"), 1), (Symbol::new("u1"), 1)], &s).unwrap();
        let mut da: Vec<String> = ab.history().iter().map(ExtensionArrow::descriptor).collect();
        let mut db: Vec<String> = ba.history().iter().map(ExtensionArrow::descriptor).collect();
        da.sort();
        db.sort();
        assert_eq!(da, db);
        assert_eq!(decompose_composite(&ab, &s).unwrap().len(), 2);
    }

    #[test]
    fn dropping_the_new_constraint_is_not_an_extension() {
        let s = Sampler::default();
        let c = sys(&["x1", "x2"], &["u"], &["x2", "u"]);
        let (e, arrow) = pure_prolongation(&c, &Symbol::new("u"), &s).unwrap();
        let contact = e.contact_generators()[..2].to_vec();
        let broken = ControlSystem::from_frame(
            e.chart().clone(),
            e.input_indices().to_vec(),
            e.state_indices().to_vec(),
            e.drift().clone(),
            e.input_fields().to_vec(),
            contact,
        );
        assert!(!verify_extension(&broken, &c, &arrow, &s).unwrap());
        let id: Vec<Expr> = c.chart().coords().iter().map(Expr::symbol).collect();
        assert!(verify_projection(&c, &c, &id, &[], &s).unwrap());
    }
}
