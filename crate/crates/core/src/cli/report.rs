//! JSON reports. Field order is the struct order, maps are sorted, and
//! exact quantities are printed as strings, so equal inputs give equal bytes.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::expr::Sampler;
use crate::extend::{ExtensionArrow, Route};
use crate::foliation::Certificate;
use crate::search::{ProfileResult, SearchOutcome};
use crate::system::{ControlSystem, DefectReport};

use super::file::system_to_toml;

#[derive(Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub system: SystemReport,
    pub flag: FlagReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enumerate: Option<EnumerateReport>,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
pub struct SystemReport {
    pub states: Vec<String>,
    pub inputs: Vec<String>,
    /// Pinned base-point coordinates.
    pub point: BTreeMap<String, String>,
    /// The other base-point coordinates, as drawn from the seed.
    pub drawn_point: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<BTreeMap<String, String>>,
}

impl SystemReport {
    pub fn new(sys: &ControlSystem, sampler: &Sampler) -> SystemReport {
        let base = sys.base_point_for(sampler);
        SystemReport {
            drawn_point: sys
                .states()
                .into_iter()
                .chain(sys.inputs())
                .filter(|s| !sys.base_point().contains_key(s))
                .map(|s| (s.to_string(), base.value(&s).to_string()))
                .collect(),
            states: sys.states().iter().map(|s| s.to_string()).collect(),
            inputs: sys.inputs().iter().map(|s| s.to_string()).collect(),
            point: sys.base_point().iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            dynamics: sys
                .dynamics()
                .map(|d| sys.states().iter().zip(d).map(|(s, f)| (s.to_string(), f.to_string())).collect()),
        }
    }
}

#[derive(Serialize)]
pub struct FlagReport {
    /// `dim <I^(k), dt>` per level.
    pub augmented_dims: Vec<usize>,
    /// `dim I^(k)`, without `dt`.
    pub state_dims: Vec<usize>,
    pub defects: Vec<usize>,
    /// Whether each `<I^(k), dt>` is integrable.
    pub integrable: Vec<bool>,
    pub controllable: bool,
    pub leading_index: Option<usize>,
    pub lid: usize,
    pub linearizable: bool,
    /// Whether the pinned base point keeps every generic rank.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_point_regular: Option<bool>,
}

impl FlagReport {
    pub fn new(r: &DefectReport) -> FlagReport {
        FlagReport {
            augmented_dims: r.augmented_dims.clone(),
            state_dims: r.augmented_dims.iter().map(|d| d - 1).collect(),
            defects: r.defects.clone(),
            integrable: r.defects.iter().map(|&d| d == 0).collect(),
            controllable: r.controllable(),
            leading_index: r.leading_index,
            lid: r.lid,
            linearizable: r.linearizable(),
            base_point_regular: None,
        }
    }
}

#[derive(Serialize)]
pub struct ArrowReport {
    pub output: String,
    pub relative_degree: usize,
    pub replaced_input: String,
    pub new_state: String,
    pub new_input: String,
    pub route: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub substitution: Option<String>,
    pub loss: usize,
}

impl ArrowReport {
    pub fn new(a: &ExtensionArrow) -> ArrowReport {
        let (route, substitution) = match &a.route {
            Route::Explicit { substitution } => ("explicit", Some(format!("{} = {}", a.replaced, substitution))),
            Route::Implicit => ("implicit", None),
        };
        ArrowReport {
            output: a.output.to_string(),
            relative_degree: a.kappa,
            replaced_input: a.replaced.to_string(),
            new_state: a.new_state.to_string(),
            new_input: a.new_input.to_string(),
            route,
            substitution,
            loss: ExtensionArrow::LOSS,
        }
    }
}

#[derive(Serialize)]
pub struct CertificateReport {
    #[serde(rename = "type")]
    pub type_: String,
    pub rho: Vec<usize>,
    pub kappa: Vec<usize>,
    pub literal_rho: Vec<usize>,
    pub literal_kappa: Vec<usize>,
    pub outputs: Vec<String>,
    pub output_relative_degrees: Vec<usize>,
    pub consistent: bool,
}

impl CertificateReport {
    pub fn new(c: &Certificate) -> CertificateReport {
        CertificateReport {
            type_: c.type_string(),
            rho: c.rho.clone(),
            kappa: c.kappa.clone(),
            literal_rho: c.literal_rho.clone(),
            literal_kappa: c.literal_kappa.clone(),
            outputs: c.outputs.iter().map(|e| e.to_string()).collect(),
            output_relative_degrees: c.output_kappa.clone(),
            consistent: c.consistent,
        }
    }
}

#[derive(Serialize)]
pub struct FinalSystemReport {
    pub system: SystemReport,
    pub flag: FlagReport,
    /// A definition file for the extended system, when it is explicit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

#[derive(Serialize)]
pub struct SearchReport {
    pub algorithm: &'static str,
    pub heuristic: &'static str,
    pub heuristic_admissibility: &'static str,
    pub literal_lh: bool,
    pub restrict_nonincreasing: bool,
    pub max_depth: usize,
    pub candidates: usize,
    /// `found` or `exhausted`.
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<usize>,
    pub arrows: Vec<ArrowReport>,
    pub root_heuristic: usize,
    pub dp_root: Option<usize>,
    pub nodes_expanded: usize,
    pub nodes_generated: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub foliation: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_system: Option<FinalSystemReport>,
}

impl SearchReport {
    pub fn new(
        out: &SearchOutcome,
        literal_lh: bool,
        restrict: bool,
        max_depth: usize,
        candidates: usize,
        certificate: Option<CertificateReport>,
        sampler: &Sampler,
    ) -> SearchReport {
        let r = out.result.as_ref();
        SearchReport {
            algorithm: out.algorithm.name(),
            heuristic: out.heuristic.name(),
            heuristic_admissibility: out.heuristic.admissibility(),
            literal_lh,
            restrict_nonincreasing: restrict,
            max_depth,
            candidates,
            status: if r.is_some() { "found" } else { "exhausted" },
            cost: r.map(|r| r.cost),
            arrows: r.map(|r| r.arrows.iter().map(ArrowReport::new).collect()).unwrap_or_default(),
            root_heuristic: out.root_h,
            dp_root: out.dp_root,
            nodes_expanded: out.nodes_expanded,
            nodes_generated: out.nodes_generated,
            foliation: r.and_then(|r| r.foliation.as_ref()).map(|f| f.generators.iter().map(|e| e.to_string()).collect()),
            certificate,
            final_system: r.map(|r| FinalSystemReport {
                system: SystemReport::new(&r.system, sampler),
                flag: FlagReport::new(&r.final_report),
                file: system_to_toml(&r.system),
            }),
        }
    }
}

#[derive(Serialize)]
pub struct ProfileReport {
    pub orders: BTreeMap<String, usize>,
    pub total: usize,
    pub linearizable: bool,
}

#[derive(Serialize)]
pub struct EnumerateReport {
    pub max_order: usize,
    pub profiles: Vec<ProfileReport>,
    pub linearizable_count: usize,
    /// Smallest total order of a linearizing profile.
    pub least_order: Option<usize>,
}

impl EnumerateReport {
    pub fn new(max_order: usize, results: &[ProfileResult]) -> EnumerateReport {
        let profiles: Vec<ProfileReport> = results
            .iter()
            .map(|p| ProfileReport {
                orders: p.orders.iter().map(|(s, k)| (s.to_string(), *k)).collect(),
                total: p.total,
                linearizable: p.linearizable,
            })
            .collect();
        EnumerateReport {
            max_order,
            linearizable_count: results.iter().filter(|p| p.linearizable).count(),
            least_order: results.iter().filter(|p| p.linearizable).map(|p| p.total).min(),
            profiles,
        }
    }
}

#[derive(Serialize)]
pub struct ErrorReport {
    pub error: ErrorBody,
}

#[derive(Serialize)]
pub struct ErrorBody {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}
