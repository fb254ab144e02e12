//! Helpers shared by the integration tests and the acceptance runner.
//! Every check returns `Err` with a readable message instead of panicking,
//! so the acceptance runner can print a verdict per criterion.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use dynext::cli::file::SystemFile;
use dynext::expr::{DomainError, Evaluator, Expr, Point, Sampler, Symbol};
use dynext::extend::ExtensionArrow;
use dynext::exterior::{Chart, KForm, VectorField};
use dynext::pfaff::{annihilator, PfaffianSystem};
use dynext::search::{
    candidate_pool, enumerate_primitive_arrows, minimal_extension_search, CandidateConfig, SearchConfig,
};
use dynext::system::ControlSystem;
use num_traits::ToPrimitive;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

pub fn corpus_file(name: &str) -> PathBuf {
    corpus_dir().join(format!("{name}.toml"))
}

pub fn load(name: &str) -> ControlSystem {
    SystemFile::read(&corpus_file(name)).expect("corpus file parses").system().expect("corpus system builds")
}

/// Names of every corpus system, sorted.
pub fn corpus_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .filter_map(|e| {
            let p = e.ok()?.path();
            (p.extension()? == "toml").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    names
}

pub fn f(s: &str) -> Expr {
    dynext::expr::parse(s).unwrap()
}

fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &[7; 32]))
}

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

pub fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-4i64..5).prop_map(Expr::int),
        (1i64..4, 1i64..4).prop_map(|(a, b)| Expr::frac(a, b)),
        prop::sample::select(vec!["x", "y", "z"]).prop_map(Expr::var),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), 1i64..4).prop_map(|(a, n)| a.pow(n)),
            inner.clone().prop_map(|a| a.sin()),
            inner.clone().prop_map(|a| a.cos()),
            inner.prop_map(|a| (a * Expr::frac(1, 4)).exp()),
        ]
    })
}

fn chart() -> Chart {
    Chart::new(["x", "y", "z"]).unwrap()
}

fn index_sets(n: usize, k: usize) -> Vec<Vec<usize>> {
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

fn arb_form(degree: usize) -> impl Strategy<Value = KForm> {
    let sets = index_sets(3, degree);
    prop::collection::vec(arb_expr(), sets.len())
        .prop_map(move |coeffs| KForm::from_terms(&chart(), degree, sets.clone().into_iter().zip(coeffs)))
}

fn arb_field() -> impl Strategy<Value = VectorField> {
    prop::collection::vec(arb_expr(), 3).prop_map(|c| VectorField::new(&chart(), c))
}

fn form_is_zero(w: &KForm, sampler: &Sampler) -> Result<bool, TestCaseError> {
    let coeffs: Vec<Expr> = w.terms().values().cloned().collect();
    match sampler.all_zero(&coeffs) {
        Ok(z) => Ok(z),
        // Every sample hit a singularity: not a counterexample.
        Err(e) if e.is_genericity_failure() => Err(TestCaseError::reject("singular everywhere sampled")),
        Err(e) => Err(TestCaseError::fail(e.to_string())),
    }
}

fn sub(a: &KForm, b: &KForm) -> KForm {
    a.add(&b.neg()).unwrap()
}

/// `d d w = 0`, graded Leibniz and `L_X d = d L_X` on random forms.
/// Returns the number of forms checked.
pub fn exterior_identities(cases: u32) -> Result<usize, String> {
    let sampler = Sampler::new(11);
    let strategy = (0usize..3, 0usize..3, arb_field()).prop_flat_map(|(p, q, x)| (arb_form(p), arb_form(q), Just(x)));
    run(cases, strategy, |(a, b, x)| {
        prop_assert!(form_is_zero(&a.d().d(), &sampler)?, "d d a != 0 for {:?}", a);
        let lhs = a.wedge(&b).unwrap().d();
        let sign = if a.degree() % 2 == 0 { Expr::one() } else { Expr::int(-1) };
        let rhs = a.d().wedge(&b).unwrap().add(&a.wedge(&b.d()).unwrap().scale(&sign)).unwrap();
        prop_assert!(form_is_zero(&sub(&lhs, &rhs), &sampler)?, "Leibniz fails for {:?} and {:?}", a, b);
        let cartan = sub(&a.d().lie(&x).unwrap(), &a.lie(&x).unwrap().d());
        prop_assert!(form_is_zero(&cartan, &sampler)?, "L_X d != d L_X for {:?}", a);
        Ok(())
    })?;
    Ok(2 * cases as usize)
}

fn at(e: &Expr, p: &Point) -> Result<f64, DomainError> {
    let v = Evaluator::new(p, 1e-20).eval(e)?;
    Ok(v.v.to_f64())
}

/// Central difference of `e` in `s` at `p`, computed in double-double.
fn central(e: &Expr, s: &Symbol, p: &Point, h: f64) -> Result<f64, DomainError> {
    let x0 = p.value(s).to_f64().unwrap();
    let (xp, xm) = (x0 + h, x0 - h);
    let fp = Evaluator::new(&p.with_value(s, xp), 1e-20).eval(e)?;
    let fm = Evaluator::new(&p.with_value(s, xm), 1e-20).eval(e)?;
    Ok(fp.sub(fm).v.to_f64() / (xp - xm))
}

/// Bound on the central-difference error constant: `|f'''| / 6` on the
/// stencil, with slack.
fn fd_constant(e: &Expr, s: &Symbol, p: &Point, h: f64) -> Result<f64, DomainError> {
    let e3 = e.diff(s).diff(s).diff(s);
    let x0 = p.value(s).to_f64().unwrap();
    let mut m: f64 = 0.0;
    for x in [x0 - h, x0, x0 + h] {
        m = m.max(at(&e3, &p.with_value(s, x))?.abs());
    }
    Ok(1.0 + m)
}

const STEPS: [f64; 2] = [1e-3, 1e-4];

/// `differentiate` and the coefficients of `d` against central differences
/// with tolerance `C h^2`. Returns the number of comparisons made.
pub fn finite_differences(cases: u32) -> Result<usize, String> {
    let sampler = Sampler::new(5);
    let vars = ["x", "y", "z"];
    let strategy = (prop::collection::vec(arb_expr(), 3), 0usize..3, 0usize..3, 0usize..1000);
    run(cases, strategy, |(coeffs, i, j, k)| {
        let p = sampler.point(k, 0);
        let si = Symbol::new(vars[i]);
        let skip = |_| TestCaseError::reject("singular point");
        // differentiate
        let e = &coeffs[0];
        let exact = at(&e.diff(&si), &p).map_err(skip)?;
        prop_assume!(exact.abs() < 1e6);
        for h in STEPS {
            let c = fd_constant(e, &si, &p, h).map_err(skip)?;
            prop_assume!(c < 1e6);
            let fd = central(e, &si, &p, h).map_err(skip)?;
            prop_assert!((fd - exact).abs() <= c * h * h, "d/d{} of {} at h={}: {} vs {}", vars[i], e, h, fd, exact);
        }
        // exterior derivative of a one-form: (dw)_{ij} = d_i a_j - d_j a_i
        prop_assume!(i != j);
        let (i, j) = (i.min(j), i.max(j));
        let (si, sj) = (Symbol::new(vars[i]), Symbol::new(vars[j]));
        let w = KForm::from_terms(&chart(), 1, (0..3).map(|m| (vec![m], coeffs[m].clone())));
        let exact = at(&w.d().coefficient(&[i, j]), &p).map_err(skip)?;
        prop_assume!(exact.abs() < 1e6);
        for h in STEPS {
            let c = fd_constant(&coeffs[j], &si, &p, h).map_err(skip)? + fd_constant(&coeffs[i], &sj, &p, h).map_err(skip)?;
            prop_assume!(c < 1e6);
            let fd = central(&coeffs[j], &si, &p, h).map_err(skip)? - central(&coeffs[i], &sj, &p, h).map_err(skip)?;
            prop_assert!((fd - exact).abs() <= c * h * h, "(dw)_{}{} at h={}: {} vs {}", i, j, h, fd, exact);
        }
        Ok(())
    })?;
    Ok(cases as usize * STEPS.len() * 2)
}

/// Flag dimensions never increase, and each level's defect is zero exactly
/// when the annihilator of its frame is a Frobenius-integrable system.
pub fn flag_properties(names: &[String]) -> Result<usize, String> {
    let sampler = Sampler::default();
    let mut levels = 0;
    for name in names {
        let sys = load(name);
        let flag = sys.flag(&sampler, false).map_err(|e| format!("{name}: {e}"))?;
        let dims = flag.augmented_dims();
        if dims.windows(2).any(|w| w[1] > w[0]) {
            return Err(format!("{name}: flag dimensions {dims:?} increase"));
        }
        for (k, level) in flag.levels.iter().enumerate() {
            let fields: Vec<VectorField> = level.fields.iter().map(|j| j.field.clone()).collect();
            let forms = annihilator(sys.chart(), &fields, &sampler).map_err(|e| format!("{name}: {e}"))?;
            if forms.len() != dims[k] {
                return Err(format!("{name}: level {k} annihilator has {} forms, flag says {}", forms.len(), dims[k]));
            }
            let inv = PfaffianSystem::new(sys.chart(), forms)
                .and_then(|p| p.is_involutive(&sampler))
                .map_err(|e| format!("{name}: {e}"))?;
            if inv != (level.defect() == 0) {
                return Err(format!("{name}: level {k} defect {} but involutive = {inv}", level.defect()));
            }
            levels += 1;
        }
    }
    Ok(levels)
}

/// Every boolean verdict the engine produces for a corpus system.
fn verdicts(sys: &ControlSystem, sampler: &Sampler) -> Result<Vec<bool>, String> {
    let r = sys.defect_report(sampler).map_err(|e| e.to_string())?;
    let mut v = vec![r.controllable(), r.linearizable(), sys.feedback_linearizable(sampler).map_err(|e| e.to_string())?];
    v.extend(r.defects.iter().map(|&d| d == 0));
    let root = Arc::new(sys.clone());
    for u in sys.inputs() {
        let (child, arrow) = dynext::extend::pure_prolongation(&root, &u, sampler).map_err(|e| e.to_string())?;
        v.push(dynext::extend::verify_extension(&child, sys, &arrow, sampler).map_err(|e| e.to_string())?);
        v.push(child.feedback_linearizable(sampler).map_err(|e| e.to_string())?);
    }
    Ok(v)
}

/// Verdicts agree across seeds 1, 2 and 3. Returns the number compared.
pub fn seed_invariance(names: &[String]) -> Result<usize, String> {
    let mut count = 0;
    for name in names {
        let sys = load(name);
        let base = verdicts(&sys, &Sampler::new(1)).map_err(|e| format!("{name}: {e}"))?;
        for seed in [2, 3] {
            let other = verdicts(&sys, &Sampler::new(seed)).map_err(|e| format!("{name}: {e}"))?;
            if other != base {
                return Err(format!("{name}: seed {seed} gives {other:?}, seed 1 gives {base:?}"));
            }
        }
        count += base.len();
    }
    Ok(count)
}

/// Controllable corpus systems, which are the ones search accepts.
pub fn searchable(names: &[String]) -> Vec<String> {
    let s = Sampler::default();
    names.iter().filter(|n| load(n).defect_report(&s).unwrap().controllable()).cloned().collect()
}

fn depth_config(depth: usize) -> SearchConfig {
    SearchConfig { max_depth: Some(depth), ..SearchConfig::default() }
}

/// Cost is additive along every explored history: the cost of a node is
/// the summed loss of its arrows, and every edge adds its loss.
pub fn loss_additivity(names: &[String], depth: usize) -> Result<usize, String> {
    let sampler = Sampler::default();
    let mut edges = 0;
    for name in names {
        let outcome = minimal_extension_search(&load(name), &depth_config(depth), &sampler).map_err(|e| format!("{name}: {e}"))?;
        let g = &outcome.graph;
        for (fp, &cost) in g.fingerprints.iter().zip(&g.g) {
            let arrows = if fp.is_empty() { 0 } else { fp.split("; ").count() };
            if cost != arrows * ExtensionArrow::LOSS {
                return Err(format!("{name}: node `{fp}` has cost {cost} for {arrows} arrows"));
            }
        }
        for &(a, c, loss) in &g.edges {
            if g.g[c] > g.g[a] + loss {
                return Err(format!("{name}: edge {a} -> {c} breaks additivity"));
            }
        }
        if let Some(r) = &outcome.result {
            let total: usize = r.arrows.iter().map(|_| ExtensionArrow::LOSS).sum();
            if total != r.cost || r.system.history().len() != r.arrows.len() {
                return Err(format!("{name}: result cost {} but arrows sum to {total}", r.cost));
            }
        }
        edges += g.edges.len();
    }
    Ok(edges)
}

/// Least number of arrows to a linearizable system, by breadth-first
/// expansion of every primitive arrow, up to `depth`.
pub fn brute_force_cost(base: &ControlSystem, depth: usize, sampler: &Sampler) -> Option<usize> {
    let cfg = CandidateConfig::default();
    let pool = candidate_pool(base, &cfg);
    let mut frontier: Vec<Arc<ControlSystem>> = vec![Arc::new(base.clone())];
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for d in 0..=depth {
        if frontier.iter().any(|s| s.feedback_linearizable(sampler).unwrap()) {
            return Some(d);
        }
        if d == depth {
            break;
        }
        let mut next = Vec::new();
        for s in &frontier {
            let (children, _) = enumerate_primitive_arrows(s, &pool, &cfg, sampler);
            for (child, _) in children {
                if seen.insert(dynext::search::fingerprint(child.history())) {
                    next.push(Arc::new(child));
                }
            }
        }
        frontier = next;
    }
    None
}

/// Dijkstra and the brute force agree on every controllable corpus system.
pub fn dijkstra_vs_brute_force(names: &[String], depth: usize) -> Result<BTreeMap<String, Option<usize>>, String> {
    let sampler = Sampler::default();
    let mut costs = BTreeMap::new();
    for name in names {
        let sys = load(name);
        let outcome = minimal_extension_search(&sys, &depth_config(depth), &sampler).map_err(|e| format!("{name}: {e}"))?;
        let dijkstra = outcome.result.as_ref().map(|r| r.cost);
        let brute = brute_force_cost(&sys, depth, &sampler);
        if dijkstra != brute {
            return Err(format!("{name}: dijkstra {dijkstra:?}, brute force {brute:?}"));
        }
        costs.insert(name.clone(), dijkstra);
    }
    Ok(costs)
}

/// Run the CLI binary and return (exit code, stdout).
pub fn cli(args: &[&str]) -> (i32, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_dynext")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).expect("utf-8 output"))
}

/// Reports are byte-identical across repeated runs and thread counts.
pub fn reports_deterministic(runs: &[Vec<String>]) -> Result<usize, String> {
    let mut n = 0;
    for args in runs {
        let mut outputs = Vec::new();
        for threads in ["1", "1", "4"] {
            let mut a: Vec<&str> = args.iter().map(String::as_str).collect();
            a.extend(["--threads", threads]);
            outputs.push(cli(&a));
        }
        if outputs.iter().any(|o| o != &outputs[0]) {
            return Err(format!("`dynext {}` output differs between runs", args.join(" ")));
        }
        n += outputs.len();
    }
    Ok(n)
}
