//! Score-based structure learning for discrete Bayesian networks.
//!
//! The numeric core is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which the command-line tool uses.

pub mod asymptotics;
pub mod data;
pub mod error;
pub mod experiment;
pub mod format;
pub mod model;
pub mod sampler;
pub mod scalar;
pub mod scoring;
pub mod search;
pub mod special;

pub use data::{count_all, count_family, Dataset, FamilyStats};
pub use error::{Error, Result};
pub use experiment::{
    render_report, run_experiment, run_experiment_in, run_experiment_with_jobs, ExperimentConfig, ExperimentReport, Generator,
    RecoveryMetric, ReportFormat,
};
pub use model::{markov_equivalent, Cpt, Dag, Network, VariableSpec};
pub use sampler::{preset_network, sample, GeneratorPreset};
pub use scalar::Scalar;
pub use scoring::{score_structure, ScoreKind};
pub use search::{build_family_cache, exhaustive_search, DagSpace};

pub type Real = f64;
pub type ScoreSpec = scoring::ScoreSpec<Real>;
pub type ScoreSpec32 = scoring::ScoreSpec<f32>;
pub type StructureScore = scoring::StructureScore<Real>;
pub type EapEstimate = scoring::EapEstimate<Real>;
pub type FamilyCache = search::FamilyCache<Real>;
pub type SearchResult = search::SearchResult<Real>;
pub type DecompositionReport = asymptotics::DecompositionReport<Real>;
pub type BdeuApprox = asymptotics::BdeuApprox<Real>;
