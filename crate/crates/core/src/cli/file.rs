//! System definition files.
//!
//! ```toml
//! [system]
//! states = ["x1", "x2"]
//! inputs = ["u"]
//! point = { x2 = "1/2" }
//!
//! [dynamics]
//! x1 = "x2"
//! x2 = "u"
//!
//! [candidates]
//! outputs = ["x1 + x2"]
//!
//! [search]
//! max_order = 3
//! heuristic = "none"
//! algorithm = "dijkstra"
//! coefficients = [-1, 0, 1]
//! support = 3
//! seed = 1
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use num_rational::BigRational;
use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

use crate::expr::{parse, Expr, Symbol};
use crate::search::{Algorithm, HeuristicKind};
use crate::system::{ControlSystem, TIME};

#[derive(Debug, Error)]
pub enum FileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Syntax { origin: String, message: String },
    #[error("{origin}:{line}: {field}: {message}")]
    Field { origin: String, line: usize, field: String, message: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    system: RawSystem,
    #[serde(default)]
    dynamics: BTreeMap<String, Spanned<String>>,
    #[serde(default)]
    candidates: RawCandidates,
    #[serde(default)]
    search: RawSearch,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    states: Spanned<Vec<String>>,
    inputs: Spanned<Vec<String>>,
    #[serde(default)]
    point: BTreeMap<String, Spanned<toml::Value>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawCandidates {
    #[serde(default)]
    outputs: Vec<Spanned<String>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSearch {
    max_order: Option<usize>,
    heuristic: Option<Spanned<String>>,
    algorithm: Option<Spanned<String>>,
    coefficients: Option<Vec<i64>>,
    support: Option<usize>,
    seed: Option<u64>,
    prolongations: Option<bool>,
    max_cover: Option<usize>,
}

/// Search settings given in the file; flags override them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SearchSettings {
    pub max_order: Option<usize>,
    pub heuristic: Option<HeuristicKind>,
    pub algorithm: Option<Algorithm>,
    pub coefficients: Option<Vec<i64>>,
    pub support: Option<usize>,
    pub seed: Option<u64>,
    pub prolongations: Option<bool>,
    pub max_cover: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct SystemFile {
    pub states: Vec<Symbol>,
    pub inputs: Vec<Symbol>,
    pub dynamics: Vec<Expr>,
    pub point: BTreeMap<Symbol, BigRational>,
    pub candidates: Vec<Expr>,
    pub search: SearchSettings,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Parse a rational written as an integer, a decimal or `p/q`.
pub fn parse_rational(s: &str) -> Result<BigRational, String> {
    let e = parse(s).map_err(|e| e.to_string())?;
    e.as_rational().cloned().ok_or_else(|| format!("`{s}` is not a rational number"))
}

impl SystemFile {
    pub fn read(path: &Path) -> Result<SystemFile, FileError> {
        let text = std::fs::read_to_string(path).map_err(|source| FileError::Io { path: path.display().to_string(), source })?;
        SystemFile::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<SystemFile, FileError> {
        let raw: RawFile = toml::from_str(text).map_err(|e| FileError::Syntax { origin: origin.to_string(), message: e.to_string() })?;
        let field = |span: std::ops::Range<usize>, field: &str, message: String| FileError::Field {
            origin: origin.to_string(),
            line: line_of(text, span.start),
            field: field.to_string(),
            message,
        };
        let mut declared = BTreeSet::new();
        let mut names = |list: &Spanned<Vec<String>>, what: &str| -> Result<Vec<Symbol>, FileError> {
            let mut out = Vec::new();
            for name in list.get_ref() {
                let ok = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                    && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                if !ok {
                    return Err(field(list.span(), &format!("system.{what}"), format!("`{name}` is not a valid symbol name")));
                }
                if name == TIME {
                    return Err(field(list.span(), &format!("system.{what}"), format!("`{TIME}` is reserved for time")));
                }
                if !declared.insert(name.clone()) {
                    return Err(field(list.span(), &format!("system.{what}"), format!("duplicate symbol `{name}`")));
                }
                out.push(Symbol::new(name));
            }
            Ok(out)
        };
        let states = names(&raw.system.states, "states")?;
        let inputs = names(&raw.system.inputs, "inputs")?;
        if states.is_empty() {
            return Err(field(raw.system.states.span(), "system.states", "no states declared".into()));
        }
        if inputs.is_empty() {
            return Err(field(raw.system.inputs.span(), "system.inputs", "no inputs declared".into()));
        }
        let mut known: BTreeSet<Symbol> = states.iter().chain(&inputs).cloned().collect();
        known.insert(Symbol::new(TIME));
        let check_expr = |s: &Spanned<String>, name: &str| -> Result<Expr, FileError> {
            let e = parse(s.get_ref()).map_err(|e| field(s.span(), name, e.to_string()))?;
            if let Some(bad) = e.free_symbols().into_iter().find(|v| !known.contains(v)) {
                return Err(field(s.span(), name, format!("undeclared symbol `{bad}`")));
            }
            Ok(e)
        };
        for (k, v) in &raw.dynamics {
            if !states.iter().any(|s| s.as_str() == k) {
                return Err(field(v.span(), &format!("dynamics.{k}"), format!("`{k}` is not a declared state")));
            }
        }
        let mut dynamics = Vec::new();
        for s in &states {
            let Some(v) = raw.dynamics.get(s.as_str()) else {
                return Err(FileError::Field {
                    origin: origin.to_string(),
                    line: 0,
                    field: "dynamics".into(),
                    message: format!("missing dynamics for state `{s}`"),
                });
            };
            dynamics.push(check_expr(v, &format!("dynamics.{s}"))?);
        }
        let mut point = BTreeMap::new();
        for (k, v) in &raw.system.point {
            let name = format!("system.point.{k}");
            let sym = Symbol::new(k);
            if !known.contains(&sym) {
                return Err(field(v.span(), &name, format!("undeclared symbol `{k}`")));
            }
            let text_value = match v.get_ref() {
                toml::Value::String(s) => s.clone(),
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                other => return Err(field(v.span(), &name, format!("expected a number, found {}", other.type_str()))),
            };
            point.insert(sym, parse_rational(&text_value).map_err(|m| field(v.span(), &name, m))?);
        }
        let mut candidates = Vec::new();
        for (i, c) in raw.candidates.outputs.iter().enumerate() {
            candidates.push(check_expr(c, &format!("candidates.outputs[{i}]"))?);
        }
        let rs = raw.search;
        let heuristic = match &rs.heuristic {
            None => None,
            Some(h) => Some(
                HeuristicKind::from_name(h.get_ref())
                    .ok_or_else(|| field(h.span(), "search.heuristic", format!("unknown heuristic `{}`", h.get_ref())))?,
            ),
        };
        let algorithm = match &rs.algorithm {
            None => None,
            Some(a) => Some(
                Algorithm::from_name(a.get_ref())
                    .ok_or_else(|| field(a.span(), "search.algorithm", format!("unknown algorithm `{}`", a.get_ref())))?,
            ),
        };
        let search = SearchSettings {
            max_order: rs.max_order,
            heuristic,
            algorithm,
            coefficients: rs.coefficients,
            support: rs.support,
            seed: rs.seed,
            prolongations: rs.prolongations,
            max_cover: rs.max_cover,
        };
        Ok(SystemFile { states, inputs, dynamics, point, candidates, search })
    }

    pub fn system(&self) -> crate::Result<ControlSystem> {
        ControlSystem::explicit(&self.states, &self.inputs, self.dynamics.clone())?.with_point(self.point.clone())
    }
}

fn quote(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// A system definition file for an explicit system.
pub fn system_to_toml(sys: &ControlSystem) -> Option<String> {
    let dynamics = sys.dynamics()?;
    let list = |xs: Vec<Symbol>| xs.iter().map(|s| quote(s.as_str())).collect::<Vec<_>>().join(", ");
    let mut out = String::new();
    writeln!(out, "[system]").unwrap();
    writeln!(out, "states = [{}]", list(sys.states())).unwrap();
    writeln!(out, "inputs = [{}]", list(sys.inputs())).unwrap();
    let point = sys.base_point();
    if !point.is_empty() {
        let entries: Vec<String> = point.iter().map(|(k, v)| format!("{k} = {}", quote(&v.to_string()))).collect();
        writeln!(out, "point = {{ {} }}", entries.join(", ")).unwrap();
    }
    writeln!(out, "\n[dynamics]").unwrap();
    for (s, f) in sys.states().iter().zip(dynamics) {
        writeln!(out, "{s} = {}", quote(&f.to_string())).unwrap();
    }
    Some(out)
}
