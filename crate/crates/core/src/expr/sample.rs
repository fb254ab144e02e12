use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::sync::Arc;

use super::{str_hash, DomainError, Evaluator, Expr, Symbol};
use crate::error::Error;

/// Default number of random points behind every generic decision.
pub const DEFAULT_POINTS: usize = 8;
/// Values below `tolerance * scale` count as zero.
pub const DEFAULT_TOLERANCE: f64 = 1e-20;
/// Evaluations that may fail on a domain error before a decision gives up.
pub const DEFAULT_RETRY_LIMIT: usize = 32;

/// A sample point. Coordinates are drawn lazily from a hash of the seed,
/// the point index, the attempt number and the coordinate name, so the
/// same point gives the same value to a name regardless of which chart
/// asks, in which order, or on which thread.
#[derive(Clone, Debug)]
pub struct Point {
    seed: u64,
    index: usize,
    attempt: usize,
    fixed: Arc<BTreeMap<Symbol, BigRational>>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl Point {
    /// A point whose listed coordinates are pinned; the rest are drawn.
    pub fn fixed(values: BTreeMap<Symbol, BigRational>, seed: u64) -> Point {
        Point { seed, index: usize::MAX, attempt: 0, fixed: Arc::new(values) }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn value(&self, s: &Symbol) -> BigRational {
        if let Some(q) = self.fixed.get(s) {
            return q.clone();
        }
        let key = splitmix(
            splitmix(splitmix(self.seed) ^ self.index as u64) ^ (self.attempt as u64).rotate_left(32),
        ) ^ str_hash(s.as_str());
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(key));
        let d: i64 = rng.gen_range(1..=64);
        let n: i64 = rng.gen_range(-3 * d..=3 * d);
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    pub fn with_value(&self, s: &Symbol, v: f64) -> Point {
        let mut fixed = (*self.fixed).clone();
        fixed.insert(s.clone(), BigRational::from_float(v).expect("finite value"));
        Point { fixed: Arc::new(fixed), ..self.clone() }
    }

    pub fn pinned(&self) -> &BTreeMap<Symbol, BigRational> {
        &self.fixed
    }
}

/// Settings for generic (probabilistic) decisions: how many points, the
/// zero tolerance, and the resampling budget.
#[derive(Clone, Debug)]
pub struct Sampler {
    seed: u64,
    points: usize,
    tolerance: f64,
    retry_limit: usize,
}

impl Default for Sampler {
    fn default() -> Sampler {
        Sampler::new(1)
    }
}

impl Sampler {
    pub fn new(seed: u64) -> Sampler {
        Sampler {
            seed,
            points: DEFAULT_POINTS,
            tolerance: DEFAULT_TOLERANCE,
            retry_limit: DEFAULT_RETRY_LIMIT,
        }
    }

    pub fn with_points(mut self, n: usize) -> Sampler {
        self.points = n.max(1);
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn retry_limit(&self) -> usize {
        self.retry_limit
    }

    pub fn point(&self, index: usize, attempt: usize) -> Point {
        Point { seed: self.seed, index, attempt, fixed: Arc::new(BTreeMap::new()) }
    }

    /// Run `f` at each sample point, redrawing a point whenever `f` hits a
    /// domain error. Returns the successful results in point order; fails
    /// only when no point at all could be evaluated.
    pub fn sample<T>(&self, mut f: impl FnMut(&Point) -> Result<T, DomainError>) -> Result<Vec<T>, Error> {
        let mut out = Vec::with_capacity(self.points);
        let mut failures = 0usize;
        let mut last = None;
        for index in 0..self.points {
            let mut attempt = 0;
            loop {
                match f(&self.point(index, attempt)) {
                    Ok(v) => {
                        out.push(v);
                        break;
                    }
                    Err(e) => {
                        last = Some(e);
                        failures += 1;
                        attempt += 1;
                        if failures > self.retry_limit {
                            break;
                        }
                    }
                }
            }
            if failures > self.retry_limit {
                break;
            }
        }
        if out.is_empty() {
            return Err(Error::SamplingExhausted(last.expect("at least one failure")));
        }
        Ok(out)
    }

    /// Generic zero test: true when the expression is negligible at every
    /// sample point.
    pub fn is_zero(&self, e: &Expr) -> Result<bool, Error> {
        if e.is_constant() {
            return Ok(e.is_zero());
        }
        let tol = self.tolerance;
        let hits = self.sample(|p| Ok(Evaluator::new(p, tol).eval(e)?.is_negligible(tol)))?;
        Ok(hits.into_iter().all(|z| z))
    }

    /// Like `is_zero`, for several expressions sharing the same points.
    pub fn all_zero(&self, es: &[Expr]) -> Result<bool, Error> {
        let es: Vec<&Expr> = es.iter().filter(|e| !e.is_zero()).collect();
        if es.is_empty() {
            return Ok(true);
        }
        if es.iter().any(|e| e.is_constant()) {
            return Ok(false);
        }
        let tol = self.tolerance;
        let hits = self.sample(|p| {
            let mut ev = Evaluator::new(p, tol);
            for e in &es {
                if !ev.eval(e)?.is_negligible(tol) {
                    return Ok(false);
                }
            }
            Ok(true)
        })?;
        Ok(hits.into_iter().all(|z| z))
    }
}
