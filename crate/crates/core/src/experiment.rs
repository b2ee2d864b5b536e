//! Repeated sample → search → compare runs, tallied per (score, α, n).

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{domain, Error, Result};
use crate::model::{markov_equivalent, Dag, Network, NetworkFile};
use crate::sampler::{preset_network, sample, stream_seed, GeneratorPreset};
use crate::scoring::{ScoreKind, ScoreSpec};
use crate::search::{build_family_cache, search_with_cache, DagSpace};

/// Where the true network comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Generator {
    Preset(GeneratorPreset),
    File(PathBuf),
}

impl TryFrom<String> for Generator {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        if s.is_empty() {
            return Err(domain("generator must be a preset id or a network file path"));
        }
        Ok(match s.parse::<GeneratorPreset>() {
            Ok(p) => Generator::Preset(p),
            Err(_) => Generator::File(PathBuf::from(s)),
        })
    }
}

impl From<Generator> for String {
    fn from(g: Generator) -> String {
        g.to_string()
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Preset(p) => write!(f, "{p}"),
            Generator::File(path) => write!(f, "{}", path.display()),
        }
    }
}

impl Generator {
    /// Loads the network; relative file paths resolve against `base_dir`.
    pub fn load(&self, base_dir: Option<&Path>) -> Result<Network> {
        match self {
            Generator::Preset(p) => Ok(preset_network(*p)),
            Generator::File(path) => {
                let full = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                Network::read_json(full)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryMetric {
    ExactDag,
    EquivalenceClass,
    #[default]
    Both,
}

/// Score entry of the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreSpecFile {
    pub kind: ScoreKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothetical: Option<NetworkFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ml_pseudocount: Option<f64>,
}

impl TryFrom<ScoreSpecFile> for ScoreSpec<f64> {
    type Error = Error;

    fn try_from(f: ScoreSpecFile) -> Result<Self> {
        let alpha = match (f.kind.uses_alpha(), f.alpha) {
            (true, Some(a)) => a,
            (true, None) => return Err(domain(format!("score {} needs an alpha", f.kind))),
            (false, _) => 1.0,
        };
        let spec = ScoreSpec {
            kind: f.kind,
            alpha,
            hypothetical: f.hypothetical.map(NetworkFile::into_network).transpose()?,
            ml_pseudocount: f.ml_pseudocount.unwrap_or(1.0),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<ScoreSpec<f64>> for ScoreSpecFile {
    fn from(s: ScoreSpec<f64>) -> Self {
        Self {
            kind: s.kind,
            alpha: s.kind.uses_alpha().then_some(s.alpha),
            hypothetical: s.hypothetical.as_ref().map(NetworkFile::from),
            ml_pseudocount: (s.kind == ScoreKind::Ml).then_some(s.ml_pseudocount),
        }
    }
}

pub const DEFAULT_SAMPLE_SIZES: [usize; 5] = [50, 100, 200, 500, 1000];
pub const DEFAULT_ALPHA_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

/// ML, BDeu over the α grid, BIC, NIP-BIC over the α grid.
pub fn default_scores() -> Vec<ScoreSpec<f64>> {
    let mut out = vec![ScoreSpec::ml()];
    out.extend(DEFAULT_ALPHA_GRID.iter().map(|&a| ScoreSpec::bdeu(a)));
    out.push(ScoreSpec::bic());
    out.extend(DEFAULT_ALPHA_GRID.iter().map(|&a| ScoreSpec::nip_bic(a)));
    out
}

fn default_sample_sizes() -> Vec<usize> {
    DEFAULT_SAMPLE_SIZES.to_vec()
}

fn default_score_files() -> Vec<ScoreSpecFile> {
    default_scores().into_iter().map(ScoreSpecFile::from).collect()
}

fn default_repetitions() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentConfigFile {
    generator: Generator,
    #[serde(default = "default_sample_sizes")]
    sample_sizes: Vec<usize>,
    #[serde(default = "default_score_files")]
    scores: Vec<ScoreSpecFile>,
    #[serde(default = "default_repetitions")]
    repetitions: usize,
    #[serde(default)]
    master_seed: u64,
    #[serde(default)]
    recovery_metric: RecoveryMetric,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub generator: Generator,
    pub sample_sizes: Vec<usize>,
    pub scores: Vec<ScoreSpec<f64>>,
    pub repetitions: usize,
    pub master_seed: u64,
    pub recovery_metric: RecoveryMetric,
}

impl ExperimentConfig {
    /// Full default protocol for `generator`.
    pub fn new(generator: Generator) -> Self {
        Self {
            generator,
            sample_sizes: default_sample_sizes(),
            scores: default_scores(),
            repetitions: default_repetitions(),
            master_seed: 0,
            recovery_metric: RecoveryMetric::Both,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(domain("repetitions must be at least 1"));
        }
        if self.sample_sizes.contains(&0) {
            return Err(domain("sample sizes must be at least 1"));
        }
        self.scores.iter().try_for_each(ScoreSpec::validate)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: ExperimentConfigFile = serde_json::from_str(s)?;
        let cfg = Self {
            generator: f.generator,
            sample_sizes: f.sample_sizes,
            scores: f
                .scores
                .into_iter()
                .map(ScoreSpec::try_from)
                .collect::<Result<_>>()?,
            repetitions: f.repetitions,
            master_seed: f.master_seed,
            recovery_metric: f.recovery_metric,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let f = ExperimentConfigFile {
            generator: self.generator.clone(),
            sample_sizes: self.sample_sizes.clone(),
            scores: self.scores.iter().cloned().map(ScoreSpecFile::from).collect(),
            repetitions: self.repetitions,
            master_seed: self.master_seed,
            recovery_metric: self.recovery_metric,
        };
        Ok(serde_json::to_string_pretty(&f)?)
    }
}

/// Directed arc comparison: `(extra, missing)`. A reversed arc counts once in
/// each.
pub fn arc_diff(estimated: &Dag, truth: &Dag) -> (usize, usize) {
    let extra = estimated
        .arcs()
        .into_iter()
        .filter(|&(a, b)| !truth.has_arc(a, b))
        .count();
    let missing = truth
        .arcs()
        .into_iter()
        .filter(|&(a, b)| !estimated.has_arc(a, b))
        .count();
    (extra, missing)
}

/// Totals for one (score, n) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CellTotals {
    /// "+": extra arcs summed over repetitions.
    pub extra_arcs: u64,
    /// "−": missing arcs summed over repetitions.
    pub missing_arcs: u64,
    /// "O" under exact-DAG recovery.
    pub correct_exact: u64,
    /// "O" under equivalence-class recovery.
    pub correct_equivalence: u64,
    /// Repetitions whose tie set had more than one DAG.
    pub tied_runs: u64,
}

/// Seed and content hash of one sampled dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunLog {
    pub repetition: usize,
    pub n: usize,
    pub seed: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub generator: String,
    pub repetitions: usize,
    pub master_seed: u64,
    #[serde(skip)]
    pub recovery_metric: RecoveryMetric,
    pub sample_sizes: Vec<usize>,
    pub score_labels: Vec<String>,
    /// `cells[size index][score index]`.
    pub cells: Vec<Vec<CellTotals>>,
    pub runs: Vec<RunLog>,
}

impl ExperimentReport {
    pub fn cell(&self, n: usize, label: &str) -> Option<&CellTotals> {
        let i = self.sample_sizes.iter().position(|&m| m == n)?;
        let j = self.score_labels.iter().position(|l| l == label)?;
        Some(&self.cells[i][j])
    }

    pub fn tie_rate(&self, size_index: usize, score_index: usize) -> f64 {
        self.cells[size_index][score_index].tied_runs as f64 / self.repetitions as f64
    }

    /// One line per sampled dataset: repetition, n, seed and SHA-256.
    pub fn run_log(&self) -> String {
        let mut out = format!("master_seed={}\n", self.master_seed);
        for r in &self.runs {
            let _ = writeln!(out, "rep={} n={} seed={} sha256={}", r.repetition, r.n, r.seed, r.sha256);
        }
        out
    }
}

/// Seed of the dataset for repetition `rep` at sample size `n`.
pub fn dataset_seed(master_seed: u64, rep: usize, n: usize) -> u64 {
    stream_seed(master_seed, ((rep as u64) << 32) | n as u64)
}

struct UnitOutcome {
    log: RunLog,
    per_score: Vec<CellTotals>,
}

/// Runs the protocol on the current rayon pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_in(config, None)
}

/// Runs the protocol on a dedicated pool of `jobs` workers. The report does
/// not depend on `jobs`.
pub fn run_experiment_with_jobs(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| domain(format!("cannot start worker pool: {e}")))?;
    pool.install(|| run_experiment_in(config, None))
}

/// Like [`run_experiment`], resolving relative generator paths against
/// `base_dir`.
pub fn run_experiment_in(config: &ExperimentConfig, base_dir: Option<&Path>) -> Result<ExperimentReport> {
    config.validate()?;
    let network = config.generator.load(base_dir)?;
    if network.cpts().is_none() {
        return Err(domain("generator network has no CPTs"));
    }
    let truth = network.dag().clone();
    let space = DagSpace::new(network.n_vars())?;

    let units: Vec<(usize, usize)> = (0..config.repetitions)
        .flat_map(|rep| (0..config.sample_sizes.len()).map(move |s| (rep, s)))
        .collect();
    let outcomes = units
        .into_par_iter()
        .map(|(rep, size_idx)| {
            let n = config.sample_sizes[size_idx];
            run_unit(config, &network, &truth, &space, rep, n).map_err(|e| {
                domain(format!("repetition {rep}, n = {n}: {e}"))
            })
        })
        .collect::<Result<Vec<UnitOutcome>>>()?;

    let mut cells = vec![vec![CellTotals::default(); config.scores.len()]; config.sample_sizes.len()];
    let mut runs = Vec::with_capacity(outcomes.len());
    for (unit, outcome) in outcomes.into_iter().enumerate() {
        let size_idx = unit % config.sample_sizes.len();
        for (cell, add) in cells[size_idx].iter_mut().zip(&outcome.per_score) {
            cell.extra_arcs += add.extra_arcs;
            cell.missing_arcs += add.missing_arcs;
            cell.correct_exact += add.correct_exact;
            cell.correct_equivalence += add.correct_equivalence;
            cell.tied_runs += add.tied_runs;
        }
        runs.push(outcome.log);
    }
    Ok(ExperimentReport {
        generator: config.generator.to_string(),
        repetitions: config.repetitions,
        master_seed: config.master_seed,
        recovery_metric: config.recovery_metric,
        sample_sizes: config.sample_sizes.clone(),
        score_labels: config.scores.iter().map(ScoreSpec::label).collect(),
        cells,
        runs,
    })
}

fn run_unit(
    config: &ExperimentConfig,
    network: &Network,
    truth: &Dag,
    space: &DagSpace,
    rep: usize,
    n: usize,
) -> Result<UnitOutcome> {
    let seed = dataset_seed(config.master_seed, rep, n);
    let data: Dataset = sample(network, n, seed)?;
    let log = RunLog {
        repetition: rep,
        n,
        seed,
        sha256: data.digest(),
    };
    let per_score = config
        .scores
        .iter()
        .map(|spec| {
            let cache = build_family_cache(&data, spec)?;
            let result = search_with_cache(space, &cache);
            let (extra, missing) = arc_diff(&result.best_dag, truth);
            Ok(CellTotals {
                extra_arcs: extra as u64,
                missing_arcs: missing as u64,
                correct_exact: u64::from(result.best_dag == *truth),
                correct_equivalence: u64::from(markov_equivalent(&result.best_dag, truth)),
                tied_runs: u64::from(result.tie_set.len() > 1),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UnitOutcome { log, per_score })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            _ => Err(domain(format!("unknown report format {s:?}"))),
        }
    }
}

fn correct_cell(c: &CellTotals, metric: RecoveryMetric) -> String {
    match metric {
        RecoveryMetric::ExactDag => c.correct_exact.to_string(),
        RecoveryMetric::EquivalenceClass => c.correct_equivalence.to_string(),
        RecoveryMetric::Both => format!("{}/{}", c.correct_exact, c.correct_equivalence),
    }
}

/// Tables-style layout: one row per sample size, a `(+, −, O)` column triplet
/// per score. Under the `both` metric the O cell reads `exact/equivalence`.
pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> String {
    let mut header = Vec::with_capacity(1 + 3 * report.score_labels.len());
    header.push("n".to_string());
    for label in &report.score_labels {
        header.push(format!("{label} +"));
        header.push(format!("{label} -"));
        header.push(format!("{label} O"));
    }
    let rows: Vec<Vec<String>> = report
        .sample_sizes
        .iter()
        .zip(&report.cells)
        .map(|(n, cells)| {
            let mut row = vec![n.to_string()];
            for c in cells {
                row.push(c.extra_arcs.to_string());
                row.push(c.missing_arcs.to_string());
                row.push(correct_cell(c, report.recovery_metric));
            }
            row
        })
        .collect();

    match format {
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
            let mut full = vec!["generator".to_string()];
            full.extend(header);
            w.write_record(&full).expect("in-memory write");
            for row in rows {
                let mut full = vec![report.generator.clone()];
                full.extend(row);
                w.write_record(&full).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 output")
        }
        ReportFormat::Markdown => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "**{}** (repetitions: {}, master seed: {})\n",
                report.generator, report.repetitions, report.master_seed
            );
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
            for row in rows {
                let _ = writeln!(out, "| {} |", row.join(" | "));
            }
            out
        }
    }
}
