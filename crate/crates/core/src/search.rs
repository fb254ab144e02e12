//! Best-first search for a minimal dynamic extension.
//!
//! Nodes are systems reached from the base by primitive arrows, each of
//! loss one. A node's fingerprint is the sorted multiset of its arrow
//! descriptors; nodes with equal fingerprints are identified. Priorities
//! are `g + H` (`g` alone for Dijkstra) and ties are broken by `g`, then by
//! fingerprint, so results do not depend on thread scheduling: children are
//! built and evaluated in parallel, but every queue and closed-set update
//! happens in one thread in a fixed order.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::sync::Arc;

use num_traits::Signed;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extend::{decompose_composite, one_step_extension, pure_prolongation, prolong_profile, verify_extension, ExtensionArrow};
use crate::expr::{Evaluator, Expr, Sampler, Symbol};
use crate::foliation::{independent_functions, FoliationIdeal};
use crate::linalg::{self, Echelon, Row};
use crate::pfaff::{frame_values, FrameFlag};
use crate::system::{DefectReport, ControlSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeuristicKind {
    None,
    /// Leading integrability defect. Not a lower bound on the cost.
    Lid,
    /// Size of the smallest set of candidate differentials that removes the
    /// leading defect.
    Cover,
}

impl HeuristicKind {
    pub fn name(self) -> &'static str {
        match self {
            HeuristicKind::None => "none",
            HeuristicKind::Lid => "lid",
            HeuristicKind::Cover => "cover",
        }
    }

    pub fn from_name(s: &str) -> Option<HeuristicKind> {
        match s {
            "none" => Some(HeuristicKind::None),
            "lid" => Some(HeuristicKind::Lid),
            "cover" => Some(HeuristicKind::Cover),
            _ => None,
        }
    }

    pub fn admissibility(self) -> &'static str {
        match self {
            HeuristicKind::None => "exact",
            HeuristicKind::Lid => "guidance (possibly inadmissible)",
            HeuristicKind::Cover => "bound-consistent on the bundled examples",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    /// Priority `g`; the heuristic is only used by the restriction.
    Dijkstra,
    /// Priority `g + H`.
    AStar,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dijkstra => "dijkstra",
            Algorithm::AStar => "astar",
        }
    }

    pub fn from_name(s: &str) -> Option<Algorithm> {
        match s {
            "dijkstra" => Some(Algorithm::Dijkstra),
            "astar" => Some(Algorithm::AStar),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CandidateConfig {
    /// Coefficients of the linear-combination outputs.
    pub coefficients: Vec<i64>,
    /// Largest number of states in one combination.
    pub max_support: usize,
    pub user: Vec<Expr>,
    pub prolongations: bool,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        CandidateConfig { coefficients: vec![-1, 0, 1], max_support: 3, user: Vec::new(), prolongations: true }
    }
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub candidates: CandidateConfig,
    pub heuristic: HeuristicKind,
    pub algorithm: Algorithm,
    /// Depth bound; `n + m` of the base when unset.
    pub max_depth: Option<usize>,
    /// Use `g - H(node) + H(root)` as the priority.
    pub literal_lh: bool,
    /// Drop arrows that increase the heuristic.
    pub restrict_nonincreasing: bool,
    /// Largest cover size tried by the cover heuristic.
    pub max_cover: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            candidates: CandidateConfig::default(),
            heuristic: HeuristicKind::None,
            algorithm: Algorithm::Dijkstra,
            max_depth: None,
            literal_lh: false,
            restrict_nonincreasing: false,
            max_cover: 2,
        }
    }
}

/// Outputs tried at every node: signed combinations of base states, then
/// user candidates. A combination and its negative are the same output, so
/// only one of them is kept.
pub fn candidate_pool(base: &ControlSystem, cfg: &CandidateConfig) -> Vec<Expr> {
    let states = base.states();
    let coeffs: Vec<i64> = {
        let mut c: Vec<i64> = cfg.coefficients.iter().copied().filter(|&c| c != 0).collect();
        c.sort_unstable();
        c.dedup();
        c
    };
    let mut pool: Vec<Expr> = Vec::new();
    let mut seen: BTreeSet<Expr> = BTreeSet::new();
    let mut push = |e: Expr, pool: &mut Vec<Expr>| {
        if !e.is_constant() && seen.insert(e.clone()) {
            pool.push(e);
        }
    };
    for k in 1..=cfg.max_support.min(states.len()) {
        for subset in subsets(states.len(), k) {
            let mut assignment = vec![0usize; k];
            loop {
                let cs: Vec<i64> = assignment.iter().map(|&i| coeffs[i]).collect();
                let negated_present = cs.iter().all(|c| coeffs.contains(&-c));
                let e = Expr::sum(subset.iter().zip(&cs).map(|(&s, &c)| Expr::symbol(&states[s]) * Expr::int(c)));
                // The sign is fixed by the leading term in the expression's
                // own order, so the printed form never starts with a minus.
                if !(negated_present && e.leading_coefficient().is_negative()) {
                    push(e, &mut pool);
                }
                // Next assignment, odometer style.
                let mut i = k;
                loop {
                    if i == 0 {
                        break;
                    }
                    i -= 1;
                    assignment[i] += 1;
                    if assignment[i] < coeffs.len() {
                        break;
                    }
                    assignment[i] = 0;
                    if i == 0 {
                        i = usize::MAX;
                        break;
                    }
                }
                if i == usize::MAX || coeffs.is_empty() {
                    break;
                }
            }
        }
    }
    for e in &cfg.user {
        push(e.clone(), &mut pool);
    }
    pool
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cover {
    /// Smallest size of a removing set; zero when there is no defect.
    pub ell: usize,
    pub sets: Vec<Vec<Expr>>,
}

struct CoverPoint {
    level: Vec<Row>,
    /// Brackets `[X_a, X_b]`, `a < b`, modulo the level, restricted to
    /// the non-pivot columns.
    curvature: Vec<Row>,
    grads: Vec<Row>,
}

/// Smallest sets `{dv}` of candidate differentials in `<I^(k-1), dt>`, with
/// `k` the leading index, such that adding them to `<I^(k), dt>` keeps them
/// independent and makes the ideal integrable. Sizes up to `max_size` are
/// tried; `first_only` stops at the first set found.
pub fn minimal_cover_candidates(sys: &ControlSystem, pool: &[Expr], max_size: usize, first_only: bool, sampler: &Sampler) -> Result<Option<Cover>> {
    if pool.is_empty() {
        return Err(Error::InvalidInput("empty candidate pool".into()));
    }
    let flag = sys.flag(sampler, true)?;
    cover_on_flag(sys, &flag, pool, max_size, first_only, sampler)
}

fn cover_on_flag(sys: &ControlSystem, flag: &FrameFlag, pool: &[Expr], max_size: usize, first_only: bool, sampler: &Sampler) -> Result<Option<Cover>> {
    let Some(k) = flag.leading_index() else {
        return Ok(Some(Cover { ell: 0, sets: vec![Vec::new()] }));
    };
    let chart = sys.chart();
    let tol = sampler.tolerance();
    let grads: Vec<Vec<(usize, Expr)>> = pool.iter().map(|v| chart.gradient(v)).collect();
    let level = &flag.levels[k].fields;
    let prev = if k > 0 { Some(&flag.levels[k - 1].fields) } else { None };
    let dim = chart.dim();
    let data = sampler.sample(|p| {
        let mut ev = Evaluator::new(p, tol);
        let (vals, brackets) = frame_values(level, &mut ev)?;
        let prev_vals: Vec<Row> = match prev {
            Some(f) => f.iter().map(|j| j.field.eval(&mut ev)).collect::<std::result::Result<_, _>>()?,
            None => Vec::new(),
        };
        let mut gs = Vec::with_capacity(grads.len());
        for g in &grads {
            let mut row = vec![crate::expr::Value::ZERO; dim];
            for (j, d) in g {
                row[*j] = ev.eval(d)?;
            }
            gs.push(row);
        }
        let member: Vec<bool> = gs.iter().map(|g| prev_vals.iter().all(|x| linalg::dot(g, x).is_negligible(tol))).collect();
        let mut span = Echelon::new(tol);
        for x in &vals {
            span.push(x.clone());
        }
        let pivots = span.pivots();
        let free: Vec<usize> = (0..dim).filter(|c| !pivots.contains(c)).collect();
        let curvature = brackets
            .iter()
            .map(|b| {
                let res = span.residual(b);
                free.iter().map(|&c| res[c]).collect()
            })
            .collect();
        Ok((CoverPoint { level: vals, curvature, grads: gs }, member))
    })?;
    let members: Vec<usize> = (0..pool.len()).filter(|&i| data.iter().all(|(_, m)| m[i])).collect();
    let points: Vec<CoverPoint> = data.into_iter().map(|(p, _)| p).collect();
    let r = level.len();
    let passes = |set: &[usize]| -> bool {
        let mut full_somewhere = false;
        for pt in &points {
            // A[b][a] = dv_b(X_a)
            let a: Vec<Row> = set.iter().map(|&v| pt.level.iter().map(|x| linalg::dot(&pt.grads[v], x)).collect()).collect();
            if linalg::rank(&a, tol) < set.len() {
                continue;
            }
            full_somewhere = true;
            let kernel = linalg::nullspace(&a, r, tol);
            for i in 0..kernel.len() {
                for j in (i + 1)..kernel.len() {
                    let (c, d) = (&kernel[i], &kernel[j]);
                    let width = pt.curvature.first().map_or(0, Vec::len);
                    let mut w = vec![crate::expr::Value::ZERO; width];
                    let mut idx = 0;
                    for p in 0..r {
                        for q in (p + 1)..r {
                            let coef = c[p].mul(d[q]).sub(c[q].mul(d[p]));
                            if !coef.v.is_zero() {
                                for (wi, bi) in w.iter_mut().zip(&pt.curvature[idx]) {
                                    *wi = wi.add(coef.mul(*bi));
                                }
                            }
                            idx += 1;
                        }
                    }
                    if !w.iter().all(|x| x.is_negligible(tol)) {
                        return false;
                    }
                }
            }
        }
        full_somewhere
    };
    for ell in 1..=max_size.min(members.len()) {
        let mut sets = Vec::new();
        for s in subsets(members.len(), ell) {
            let set: Vec<usize> = s.iter().map(|&i| members[i]).collect();
            if passes(&set) {
                sets.push(set.iter().map(|&i| pool[i].clone()).collect());
                if first_only {
                    return Ok(Some(Cover { ell, sets }));
                }
            }
        }
        if !sets.is_empty() {
            return Ok(Some(Cover { ell, sets }));
        }
    }
    Ok(None)
}

/// A node of the search graph.
#[derive(Clone, Debug)]
pub struct SearchNode {
    pub system: Arc<ControlSystem>,
    pub g: usize,
    pub h: usize,
    pub fingerprint: String,
    pub arrow: Option<ExtensionArrow>,
    pub parent: Option<usize>,
}

pub fn fingerprint(arrows: &[ExtensionArrow]) -> String {
    let mut d: Vec<String> = arrows.iter().map(ExtensionArrow::descriptor).collect();
    d.sort();
    d.join("; ")
}

/// Children of a system along every primitive arrow: prolongations of each
/// input, then extensions along each pool output. Failed constructions are
/// reported as strings and skipped.
pub fn enumerate_primitive_arrows(
    sys: &Arc<ControlSystem>,
    pool: &[Expr],
    cfg: &CandidateConfig,
    sampler: &Sampler,
) -> (Vec<(ControlSystem, ExtensionArrow)>, Vec<String>) {
    enum Job<'a> {
        Prolong(Symbol),
        Output(&'a Expr),
    }
    let mut jobs: Vec<Job> = Vec::new();
    if cfg.prolongations {
        jobs.extend(sys.inputs().into_iter().map(Job::Prolong));
    }
    jobs.extend(pool.iter().map(Job::Output));
    let built: Vec<Result<(ControlSystem, ExtensionArrow)>> = jobs
        .par_iter()
        .map(|j| match j {
            Job::Prolong(u) => pure_prolongation(sys, u, sampler),
            Job::Output(h) => one_step_extension(sys, h, sampler),
        })
        .collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut log = Vec::new();
    for (r, j) in built.into_iter().zip(&jobs) {
        match r {
            Ok((child, arrow)) => {
                if seen.insert(fingerprint(child.history())) {
                    out.push((child, arrow));
                }
            }
            // Outputs without a relative degree are simply not arrows.
            Err(Error::RelativeDegreeUndefined(_)) => {}
            Err(e) => {
                let what = match j {
                    Job::Prolong(u) => format!("prolongation of `{u}`"),
                    Job::Output(h) => format!("extension along `{h}`"),
                };
                log.push(format!("{what}: {e}"));
            }
        }
    }
    (out, log)
}

/// The explored part of the search graph.
#[derive(Clone, Debug, Default)]
pub struct ExploredGraph {
    pub fingerprints: Vec<String>,
    pub g: Vec<usize>,
    /// Goal status of nodes that were tested.
    pub goal: Vec<Option<bool>>,
    /// Arrows `(source, target, loss)`.
    pub edges: Vec<(usize, usize, usize)>,
}

/// Optimal cost-to-goal of every explored node by value iteration on
/// `J(a) = min(0 if a is a goal, min over arrows a -> c of L + J(c))`.
/// `None` marks nodes that reach no known goal.
pub fn dp_value(graph: &ExploredGraph) -> Vec<Option<usize>> {
    let n = graph.fingerprints.len();
    let mut j: Vec<Option<usize>> = graph.goal.iter().map(|g| if *g == Some(true) { Some(0) } else { None }).collect();
    loop {
        let mut changed = false;
        for &(a, c, loss) in &graph.edges {
            if let Some(jc) = j[c] {
                let cand = jc + loss;
                if j[a].is_none_or(|ja| cand < ja) {
                    j[a] = Some(cand);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    debug_assert_eq!(j.len(), n);
    j
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub cost: usize,
    pub arrows: Vec<ExtensionArrow>,
    pub system: Arc<ControlSystem>,
    pub final_report: DefectReport,
    /// Meet of the arrow outputs that live on the base chart.
    pub foliation: Option<FoliationIdeal>,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    /// `None` when the bounded search space holds no goal.
    pub result: Option<SearchResult>,
    pub heuristic: HeuristicKind,
    pub algorithm: Algorithm,
    pub root_h: usize,
    pub nodes_expanded: usize,
    pub nodes_generated: usize,
    /// `(fingerprint, g, h)` of expanded nodes in order.
    pub expanded: Vec<(String, usize, usize)>,
    pub graph: ExploredGraph,
    /// `dp_value` at the root.
    pub dp_root: Option<usize>,
    pub warnings: Vec<String>,
}

struct Eval {
    goal: bool,
    h: usize,
}

fn heuristic(sys: &ControlSystem, kind: HeuristicKind, pool: &[Expr], max_cover: usize, sampler: &Sampler) -> Result<Eval> {
    let flag = sys.flag(sampler, true)?;
    let goal = flag.linearizable();
    let h = match kind {
        _ if goal => 0,
        HeuristicKind::None => 0,
        HeuristicKind::Lid => flag.lid(),
        HeuristicKind::Cover => match cover_on_flag(sys, &flag, pool, max_cover, true, sampler)? {
            Some(c) => c.ell.max(1),
            None => 1,
        },
    };
    Ok(Eval { goal, h })
}

/// Queue key: smaller is better.
type Key = (i64, usize, String, usize);

/// Best-first search for the cheapest extension that is static feedback
/// linearizable.
pub fn minimal_extension_search(base: &ControlSystem, cfg: &SearchConfig, sampler: &Sampler) -> Result<SearchOutcome> {
    let report = base.defect_report(sampler)?;
    if !report.controllable() {
        return Err(Error::InvalidInput("the base system is not controllable".into()));
    }
    let pool = candidate_pool(base, &cfg.candidates);
    let depth = cfg.max_depth.unwrap_or(base.n_states() + base.n_inputs());
    let use_h = cfg.heuristic != HeuristicKind::None;
    let in_priority = use_h && (cfg.algorithm == Algorithm::AStar || cfg.literal_lh);
    let root = Arc::new(base.clone());
    let root_eval = heuristic(&root, cfg.heuristic, &pool, cfg.max_cover, sampler)?;
    let root_h = root_eval.h;
    let priority = |g: usize, h: usize| -> i64 {
        if !in_priority {
            g as i64
        } else if cfg.literal_lh {
            g as i64 - h as i64 + root_h as i64
        } else {
            (g + h) as i64
        }
    };

    let mut nodes: Vec<SearchNode> = vec![SearchNode { system: root.clone(), g: 0, h: root_h, fingerprint: String::new(), arrow: None, parent: None }];
    let mut goal_known: Vec<Option<bool>> = vec![Some(root_eval.goal)];
    // With g + H ordering a child is queued under `H(parent) - loss`, a
    // lower bound for consistent heuristics, and its own H is computed
    // when it reaches the top. Expansion order is unchanged; nodes that
    // never reach the top are never evaluated.
    let lazy = in_priority && !cfg.literal_lh && !cfg.restrict_nonincreasing;
    let mut h_known: Vec<bool> = vec![true];
    let mut graph = ExploredGraph { fingerprints: vec![String::new()], g: vec![0], goal: vec![None], edges: Vec::new() };
    let mut index: HashMap<String, usize> = HashMap::from([(String::new(), 0)]);
    let mut closed: BTreeSet<String> = BTreeSet::new();
    let mut open: BinaryHeap<Reverse<Key>> = BinaryHeap::new();
    open.push(Reverse((priority(0, root_h), 0, String::new(), 0)));
    let mut expanded = Vec::new();
    let mut warnings = Vec::new();
    let mut generated = 1usize;
    // Nodes sharing the top (priority, g) are evaluated together; children
    // always have larger g, so they cannot overtake the batch.
    let batch_limit = if cfg.literal_lh { 1 } else { 64 };

    let mut found: Option<usize> = None;
    'outer: while let Some(Reverse(top)) = open.pop() {
        let mut batch = vec![top];
        while batch.len() < batch_limit {
            match open.peek() {
                Some(Reverse(k)) if k.0 == batch[0].0 && k.1 == batch[0].1 => batch.push(open.pop().unwrap().0),
                _ => break,
            }
        }
        let batch: Vec<Key> = batch
            .into_iter()
            .filter(|k| !closed.contains(&k.2) && nodes[k.3].g == k.1)
            .collect();
        let pending: Vec<&Key> = batch.iter().filter(|k| !h_known[k.3]).collect();
        let evals: Vec<Result<Eval>> = pending
            .par_iter()
            .map(|k| heuristic(&nodes[k.3].system, cfg.heuristic, &pool, cfg.max_cover, sampler))
            .collect();
        let mut requeue = BTreeSet::new();
        for (k, ev) in pending.iter().zip(evals) {
            let id = k.3;
            match ev {
                Ok(e) => {
                    nodes[id].h = e.h;
                    goal_known[id] = Some(e.goal);
                    h_known[id] = true;
                    let key = priority(k.1, e.h);
                    if key != k.0 {
                        open.push(Reverse((key, k.1, k.2.clone(), id)));
                        requeue.insert(id);
                    }
                }
                Err(e) if e.is_genericity_failure() => return Err(e),
                Err(e) => {
                    warnings.push(format!("node `{}` dropped: {e}", k.2));
                    closed.insert(k.2.clone());
                    requeue.insert(id);
                }
            }
        }
        let batch: Vec<Key> = batch.into_iter().filter(|k| !requeue.contains(&k.3)).collect();
        // Verify and goal-test the batch in parallel.
        let checks: Vec<Result<(bool, bool)>> = batch
            .par_iter()
            .map(|k| {
                let node = &nodes[k.3];
                let verified = match (&node.arrow, node.parent) {
                    (Some(arrow), Some(p)) => verify_extension(&node.system, &nodes[p].system, arrow, sampler)?,
                    _ => true,
                };
                let goal = match goal_known[k.3] {
                    Some(g) => g,
                    None => node.system.feedback_linearizable(sampler)?,
                };
                Ok((verified, goal))
            })
            .collect();
        for (k, check) in batch.into_iter().zip(checks) {
            let id = k.3;
            if !closed.insert(k.2.clone()) {
                continue;
            }
            let (verified, goal) = match check {
                Ok(c) => c,
                Err(e) if e.is_genericity_failure() => return Err(e),
                Err(e) => {
                    warnings.push(format!("node `{}` dropped: {e}", k.2));
                    continue;
                }
            };
            graph.goal[id] = Some(goal);
            goal_known[id] = Some(goal);
            if !verified {
                warnings.push(format!("arrow into `{}` failed verification and was rejected", k.2));
                continue;
            }
            if goal {
                found = Some(id);
                break 'outer;
            }
            let (node_g, node_h, node_sys) = (nodes[id].g, nodes[id].h, nodes[id].system.clone());
            expanded.push((k.2.clone(), node_g, node_h));
            if node_g >= depth {
                continue;
            }
            let (children, log) = enumerate_primitive_arrows(&node_sys, &pool, &cfg.candidates, sampler);
            warnings.extend(log);
            let fresh: Vec<(ControlSystem, ExtensionArrow, String)> = children
                .into_iter()
                .map(|(c, a)| {
                    let fp = fingerprint(c.history());
                    (c, a, fp)
                })
                .filter(|(_, _, fp)| !closed.contains(fp))
                .collect();
            let evals: Vec<Option<Result<Eval>>> = fresh
                .par_iter()
                .map(|(c, _, _)| {
                    if use_h && !lazy {
                        Some(heuristic(c, cfg.heuristic, &pool, cfg.max_cover, sampler))
                    } else {
                        None
                    }
                })
                .collect();
            for ((child, arrow, fp), ev) in fresh.into_iter().zip(evals) {
                let (h, goal) = match ev {
                    Some(Ok(e)) => (e.h, Some(e.goal)),
                    Some(Err(e)) if e.is_genericity_failure() => return Err(e),
                    Some(Err(e)) => {
                        warnings.push(format!("node `{fp}` dropped: {e}"));
                        continue;
                    }
                    None if lazy => (node_h.saturating_sub(ExtensionArrow::LOSS), None),
                    None => (0, None),
                };
                if cfg.restrict_nonincreasing && use_h && h > node_h {
                    continue;
                }
                let g = node_g + ExtensionArrow::LOSS;
                let cid = match index.get(&fp) {
                    Some(&cid) => {
                        graph.edges.push((id, cid, ExtensionArrow::LOSS));
                        if nodes[cid].g <= g {
                            continue;
                        }
                        let h = if h_known[cid] { nodes[cid].h } else { h };
                        nodes[cid] = SearchNode { system: Arc::new(child), g, h, fingerprint: fp.clone(), arrow: Some(arrow), parent: Some(id) };
                        graph.g[cid] = g;
                        cid
                    }
                    None => {
                        let cid = nodes.len();
                        nodes.push(SearchNode { system: Arc::new(child), g, h, fingerprint: fp.clone(), arrow: Some(arrow), parent: Some(id) });
                        goal_known.push(goal);
                        h_known.push(!lazy);
                        graph.fingerprints.push(fp.clone());
                        graph.g.push(g);
                        graph.goal.push(None);
                        graph.edges.push((id, cid, ExtensionArrow::LOSS));
                        index.insert(fp.clone(), cid);
                        generated += 1;
                        cid
                    }
                };
                open.push(Reverse((priority(g, nodes[cid].h), g, fp, cid)));
            }
        }
    }

    let dp = dp_value(&graph);
    let result = match found {
        None => None,
        Some(id) => {
            let node = &nodes[id];
            let system = node.system.clone();
            let links = decompose_composite(&system, sampler)?;
            let arrows: Vec<ExtensionArrow> = links.into_iter().map(|(_, a)| a).collect();
            if arrows.len() != node.g {
                return Err(Error::NotDecomposable("history length differs from the accumulated loss".into()));
            }
            let final_report = system.defect_report(sampler)?;
            let foliation = combined_foliation(base, &arrows, sampler)?;
            if cfg.heuristic == HeuristicKind::Lid && root_h > node.g {
                warnings.push(format!(
                    "lid heuristic is not a lower bound here: Lid = {root_h} at the base but the optimal cost is {}; lid mode is guidance only (possibly inadmissible)",
                    node.g
                ));
            }
            Some(SearchResult { cost: node.g, arrows, system, final_report, foliation })
        }
    };
    Ok(SearchOutcome {
        result,
        heuristic: cfg.heuristic,
        algorithm: cfg.algorithm,
        root_h,
        nodes_expanded: expanded.len(),
        nodes_generated: generated,
        expanded,
        dp_root: dp[0],
        graph,
        warnings,
    })
}

/// Meet of the arrow outputs, when every output is a function on the base
/// chart.
pub fn combined_foliation(base: &ControlSystem, arrows: &[ExtensionArrow], sampler: &Sampler) -> Result<Option<FoliationIdeal>> {
    let chart = base.chart();
    let mut gens = Vec::new();
    for a in arrows {
        if a.output.free_symbols().iter().any(|s| !chart.contains(s)) {
            return Ok(None);
        }
        gens.push(a.output.clone());
    }
    gens.sort();
    Ok(Some(FoliationIdeal::new(independent_functions(base, &gens, sampler)?)))
}

/// Result of prolonging each input a fixed number of times.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProfileResult {
    pub orders: Vec<(Symbol, usize)>,
    pub total: usize,
    pub linearizable: bool,
}

/// Every pure-prolongation profile of total order at most `max_order`,
/// in order of increasing total and then lexicographically.
pub fn prolongation_sweep(base: &ControlSystem, max_order: usize, sampler: &Sampler) -> Result<Vec<ProfileResult>> {
    let inputs = base.inputs();
    let mut profiles: Vec<Vec<usize>> = Vec::new();
    fn rec(i: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur[i] = k;
            rec(i + 1, left - k, cur, out);
        }
        cur[i] = 0;
    }
    rec(0, max_order, &mut vec![0; inputs.len()], &mut profiles);
    profiles.sort_by_key(|p| (p.iter().sum::<usize>(), Reverse(p.clone())));
    let root = Arc::new(base.clone());
    profiles
        .par_iter()
        .map(|p| {
            let orders: Vec<(Symbol, usize)> = inputs.iter().cloned().zip(p.iter().copied()).collect();
            let sys = prolong_profile(&root, &orders, sampler)?;
            Ok(ProfileResult { total: p.iter().sum(), linearizable: sys.feedback_linearizable(sampler)?, orders })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn sys(states: &[&str], inputs: &[&str], f: &[&str]) -> ControlSystem {
        let st: Vec<Symbol> = states.iter().map(|s| Symbol::new(s)).collect();
        let inp: Vec<Symbol> = inputs.iter().map(|s| Symbol::new(s)).collect();
        ControlSystem::explicit(&st, &inp, f.iter().map(|s| parse(s).unwrap()).collect()).unwrap()
    }

    #[test]
    fn pool_is_sign_canonical() {
        let c = sys(&["a", "b"], &["u"], &["b", "u"]);
        let pool = candidate_pool(&c, &CandidateConfig::default());
        let shown: Vec<String> = pool.iter().map(Expr::to_string).collect();
        assert_eq!(shown, ["a", "b", "a - b", "a + b"]);
    }

    #[test]
    fn dp_on_small_graph() {
        let graph = ExploredGraph {
            fingerprints: vec!["".into(), "a".into(), "b".into(), "c".into()],
            g: vec![0, 1, 1, 2],
            goal: vec![Some(false), Some(false), None, Some(true)],
            edges: vec![(0, 1, 1), (0, 2, 1), (1, 3, 1)],
        };
        assert_eq!(dp_value(&graph), vec![Some(2), Some(1), None, Some(0)]);
    }

    #[test]
    fn linearizable_base_costs_nothing() {
        let s = Sampler::default();
        let c = sys(&["x1", "x2"], &["u"], &["x2", "u"]);
        let out = minimal_extension_search(&c, &SearchConfig::default(), &s).unwrap();
        let r = out.result.unwrap();
        assert_eq!(r.cost, 0);
        assert!(r.arrows.is_empty());
        assert_eq!(out.dp_root, Some(0));
    }

    #[test]
    fn unicycle_needs_one_prolongation() {
        let s = Sampler::default();
        let c = sys(&["x", "y", "theta"], &["u1", "u2"], &["u1*cos(theta)", "u1*sin(theta)", "u2"]);
        let cover = minimal_cover_candidates(&c, &candidate_pool(&c, &CandidateConfig::default()), 2, false, &s).unwrap().unwrap();
        assert_eq!(cover.ell, 1);
        for kind in [HeuristicKind::None, HeuristicKind::Lid, HeuristicKind::Cover] {
            let cfg = SearchConfig { heuristic: kind, algorithm: Algorithm::AStar, ..SearchConfig::default() };
            let out = minimal_extension_search(&c, &cfg, &s).unwrap();
            let r = out.result.unwrap();
            assert_eq!(r.cost, 1, "{kind:?}");
            assert_eq!(out.dp_root, Some(1));
        }
    }

    #[test]
    fn uncontrollable_base_is_rejected() {
        let s = Sampler::default();
        let c = sys(&["x1", "x2"], &["u"], &["u + x2", "-x2"]);
        assert!(minimal_extension_search(&c, &SearchConfig::default(), &s).is_err());
    }
}
