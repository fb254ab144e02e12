//! Command line front end: `check`, `search` and `enumerate`.

pub mod file;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::expr::{Sampler, Symbol};
use crate::foliation::certify;
use crate::system::DefectReport;
use crate::search::{candidate_pool, minimal_extension_search, prolongation_sweep, Algorithm, CandidateConfig, HeuristicKind, SearchConfig};

use file::{parse_rational, FileError, SystemFile};
use report::{CertificateReport, EnumerateReport, ErrorBody, ErrorReport, FlagReport, Report, SearchReport, SystemReport};

#[derive(Parser, Debug)]
#[command(name = "dynext", version, about = "Feedback linearizability checks and minimal dynamic extension search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Derived flag, integrability verdicts and leading defect.
    Check(CommonArgs),
    /// Search for a minimal dynamic extension.
    Search(CommonArgs),
    /// Try every pure-prolongation profile up to an order.
    Enumerate(CommonArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// System definition file.
    pub file: PathBuf,
    /// Seed for the sample points (default: the file's, else 1).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Depth bound for search, total order for enumerate.
    #[arg(long)]
    pub max_order: Option<usize>,
    /// Search heuristic (default: none).
    #[arg(long, value_parser = ["none", "lid", "cover"])]
    pub heuristic: Option<String>,
    /// Default: astar with a heuristic, dijkstra without.
    #[arg(long, value_parser = ["dijkstra", "astar"])]
    pub algorithm: Option<String>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Pin a base-point coordinate, `name=value`.
    #[arg(long = "point", value_name = "NAME=VALUE")]
    pub point: Vec<String>,
    /// Rank nodes by `g - H(node) + H(root)`.
    #[arg(long)]
    pub literal_lh: bool,
    /// Drop arrows that increase the heuristic.
    #[arg(long)]
    pub restrict_nonincreasing: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    File(#[from] FileError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Engine(#[from] crate::Error),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for problems with the input, 2 when random sampling kept hitting
    /// singularities.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Engine(e) if e.is_genericity_failure() => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::File(_) => "input",
            CliError::Usage(_) => "usage",
            CliError::Engine(e) if e.is_genericity_failure() => "genericity",
            CliError::Engine(_) => "engine",
            CliError::Write { .. } => "io",
        }
    }

    pub fn to_json(&self) -> String {
        let r = ErrorReport { error: ErrorBody { kind: self.kind(), message: self.to_string(), exit_code: self.exit_code() } };
        serde_json::to_string_pretty(&r).expect("error report serializes")
    }
}

/// Default total order for `enumerate`.
pub const DEFAULT_ENUMERATE_ORDER: usize = 3;

/// Run a command and return the report text.
pub fn run(command: &Command) -> Result<String, CliError> {
    let (name, args) = match command {
        Command::Check(a) => ("check", a),
        Command::Search(a) => ("search", a),
        Command::Enumerate(a) => ("enumerate", a),
    };
    match args.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
            pool.install(|| run_in(name, args))
        }
        None => run_in(name, args),
    }
}

fn run_in(name: &'static str, args: &CommonArgs) -> Result<String, CliError> {
    let mut file = SystemFile::read(&args.file)?;
    for p in &args.point {
        let (k, v) = p.split_once('=').ok_or_else(|| CliError::Usage(format!("--point expects NAME=VALUE, got `{p}`")))?;
        let q = parse_rational(v.trim()).map_err(|m| CliError::Usage(format!("--point {k}: {m}")))?;
        file.point.insert(Symbol::new(k.trim()), q);
    }
    let sys = file.system()?;
    let seed = args.seed.or(file.search.seed).unwrap_or(1);
    let sampler = Sampler::new(seed);
    let flag = sys.flag(&sampler, false)?;
    let defects = DefectReport::from_flag(&flag);
    let mut flag_report = FlagReport::new(&defects);
    if !sys.base_point().is_empty() {
        flag_report.base_point_regular = Some(flag.regular_at(&sys.base_point_for(&sampler), sampler.tolerance()).unwrap_or(false));
    }
    let mut report = Report {
        tool: "dynext",
        version: env!("CARGO_PKG_VERSION"),
        command: name,
        seed,
        system: SystemReport::new(&sys, &sampler),
        flag: flag_report,
        search: None,
        enumerate: None,
        warnings: Vec::new(),
    };
    if !defects.controllable() {
        report.warnings.push("the system is not controllable: the augmented flag does not reach <dt>".into());
    }
    match name {
        "search" => {
            let heuristic = match &args.heuristic {
                Some(h) => HeuristicKind::from_name(h).expect("validated by clap"),
                None => file.search.heuristic.unwrap_or(HeuristicKind::None),
            };
            let algorithm = match &args.algorithm {
                Some(a) => Algorithm::from_name(a).expect("validated by clap"),
                None => file.search.algorithm.unwrap_or(if heuristic == HeuristicKind::None { Algorithm::Dijkstra } else { Algorithm::AStar }),
            };
            let defaults = CandidateConfig::default();
            let candidates = CandidateConfig {
                coefficients: file.search.coefficients.clone().unwrap_or(defaults.coefficients),
                max_support: file.search.support.unwrap_or(defaults.max_support),
                user: file.candidates.clone(),
                prolongations: file.search.prolongations.unwrap_or(true),
            };
            let max_depth = args.max_order.or(file.search.max_order).unwrap_or(sys.n_states() + sys.n_inputs());
            let cfg = SearchConfig {
                candidates,
                heuristic,
                algorithm,
                max_depth: Some(max_depth),
                literal_lh: args.literal_lh,
                restrict_nonincreasing: args.restrict_nonincreasing,
                max_cover: file.search.max_cover.unwrap_or(SearchConfig::default().max_cover),
            };
            let pool_size = candidate_pool(&sys, &cfg.candidates).len();
            let outcome = minimal_extension_search(&sys, &cfg, &sampler)?;
            let mut certificate = None;
            if let Some(f) = outcome.result.as_ref().and_then(|r| r.foliation.as_ref()) {
                if !f.generators.is_empty() {
                    match certify(&sys, f, &flag, &sampler) {
                        Ok(c) => certificate = Some(CertificateReport::new(&c)),
                        Err(e) if e.is_genericity_failure() => return Err(e.into()),
                        Err(e) => report.warnings.push(format!("foliation of the winning arrows was not certified: {e}")),
                    }
                }
            }
            report.warnings.extend(outcome.warnings.iter().cloned());
            report.search = Some(SearchReport::new(&outcome, args.literal_lh, args.restrict_nonincreasing, max_depth, pool_size, certificate, &sampler));
        }
        "enumerate" => {
            let order = args.max_order.or(file.search.max_order).unwrap_or(DEFAULT_ENUMERATE_ORDER);
            let results = prolongation_sweep(&sys, order, &sampler)?;
            report.enumerate = Some(EnumerateReport::new(order, &results));
        }
        _ => {}
    }
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    if let Some(path) = &args.out {
        std::fs::write(path, &text).map_err(|source| CliError::Write { path: path.display().to_string(), source })?;
        return Ok(String::new());
    }
    Ok(text)
}

/// Entry point for the binary; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            println!("{}", e.to_json());
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
