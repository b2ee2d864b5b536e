//! Prior/likelihood split of log-BDeu and its closed-form asymptotic
//! approximations, evaluated side by side over α and n grids.
//!
//! With `α_ijk = α / (r_i q_i)`:
//!
//! * prior term `Σ_ij [ln Γ(α_ij) − Σ_k ln Γ(α_ijk)]` (data independent),
//! * likelihood term `Σ_ij [Σ_k ln Γ(α_ijk + n_ijk) − ln Γ(α_ij + n_ij)]`,
//!
//! and their sum is log-BDeu exactly. The approximations are only ever
//! compared numerically; no remainder term is modeled.

use std::fmt;
use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;

use crate::data::{count_all, Dataset, FamilyStats};
use crate::error::{domain, Result};
use crate::format::fmt12;
use crate::model::{parent_config_count, Dag, Network};
use crate::sampler::sample;
use crate::scalar::Scalar;
use crate::scoring::{bdeu_hyperparams, log_ml_family, posterior_term};
use crate::special::ln_gamma;

fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("alpha must be positive and finite, got {alpha}")))
    }
}

/// `(r_i, q_i)` for every variable of `dag`.
fn shapes(dag: &Dag, cards: &[usize]) -> Vec<(usize, usize)> {
    (0..dag.n_vars())
        .map(|i| (cards[i], parent_config_count(dag.parents(i), cards)))
        .collect()
}

fn uz<T: Scalar>(v: usize) -> T {
    T::from_usize(v).expect("size representable")
}

/// Exact prior term of log-BDeu.
pub fn prior_term_exact<T: Scalar>(dag: &Dag, cards: &[usize], alpha: T) -> Result<T> {
    check_alpha(alpha)?;
    Ok(shapes(dag, cards)
        .into_iter()
        .map(|(r, q)| {
            let a_ij = alpha / uz(q);
            let a_ijk = a_ij / uz(r);
            uz::<T>(q) * (ln_gamma(a_ij) - uz::<T>(r) * ln_gamma(a_ijk))
        })
        .fold(T::zero(), |a, b| a + b))
}

/// Small-hyperparameter form of the prior term: `Σ_i q_i (r_i − 1) ln(α / (r_i q_i))`.
pub fn prior_term_approx_small<T: Scalar>(dag: &Dag, cards: &[usize], alpha: T) -> T {
    shapes(dag, cards)
        .into_iter()
        .map(|(r, q)| uz::<T>(q * (r - 1)) * (alpha / uz(r * q)).ln())
        .fold(T::zero(), |a, b| a + b)
}

/// Large-hyperparameter form of the prior term:
/// `Σ_i α ln r_i + ½ Σ_i q_i (r_i − 1) ln(α / (2π r_i q_i))`.
pub fn prior_term_approx_large<T: Scalar>(dag: &Dag, cards: &[usize], alpha: T) -> T {
    let half = T::lit(0.5);
    let two_pi = T::PI() + T::PI();
    shapes(dag, cards)
        .into_iter()
        .map(|(r, q)| {
            alpha * uz::<T>(r).ln() + half * uz::<T>(q * (r - 1)) * (alpha / (two_pi * uz(r * q))).ln()
        })
        .fold(T::zero(), |a, b| a + b)
}

/// Small `α + n` limit of the likelihood term: the negation of
/// [`prior_term_approx_small`].
pub fn likelihood_term_approx_small<T: Scalar>(dag: &Dag, cards: &[usize], alpha: T) -> T {
    -prior_term_approx_small(dag, cards, alpha)
}

/// Exact likelihood term of log-BDeu.
pub fn likelihood_term_exact<T: Scalar>(stats: &[FamilyStats], alpha: T) -> Result<T> {
    check_alpha(alpha)?;
    let mut total = T::zero();
    for s in stats {
        let (q, r) = s.counts.dim();
        let a_ij = alpha / uz(q);
        let a_ijk = a_ij / uz(r);
        for j in 0..q {
            for &c in s.counts.row(j) {
                total = total + ln_gamma(a_ijk + T::from_count(c));
            }
            total = total - ln_gamma(a_ij + T::from_count(s.row_totals[j]));
        }
    }
    Ok(total)
}

/// Large-`α + n` form of the likelihood term, returned as
/// `(posterior, penalty)`; the approximation is `posterior − penalty` with
/// `penalty = ½ Σ_ij (r_i − 1)/r_i Σ_k ln((α_ijk + n_ijk) / 2π)`.
pub fn likelihood_term_approx<T: Scalar>(stats: &[FamilyStats], alpha: T) -> (T, T) {
    let half = T::lit(0.5);
    let two_pi = T::PI() + T::PI();
    let mut posterior = T::zero();
    let mut penalty = T::zero();
    for s in stats {
        let (q, r) = s.counts.dim();
        let hyper = bdeu_hyperparams(alpha, r, q);
        posterior = posterior + posterior_term(s, &hyper);
        let weight = uz::<T>(r - 1) / uz(r);
        for ((j, k), &a) in hyper.indexed_iter() {
            penalty = penalty + half * weight * ((a + T::from_count(s.counts[[j, k]])) / two_pi).ln();
        }
    }
    (posterior, penalty)
}

/// Which side of `α_ijk = 1` the families fall on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `α ≥ r_i q_i` for every variable.
    Large,
    /// `α < r_i q_i` for every variable.
    Small,
    Mixed,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Large => "large",
            Regime::Small => "small",
            Regime::Mixed => "mixed",
        })
    }
}

/// Both large-n forms of log-BDeu.
#[derive(Debug, Clone, PartialEq)]
pub struct BdeuApprox<T> {
    /// `posterior + α Σ ln r_i − ½ Σ (r_i−1)/r_i ln(1 + n_ijk/α_ijk)`.
    pub large_alpha: T,
    /// `posterior − ½ Σ (r_i−1)/r_i ln(n_ijk / (2π α_ijk²))`.
    pub small_alpha: T,
    pub regime: Regime,
    /// Cells with `n_ijk = 0`, where the small-α form uses `α_ijk` in place
    /// of the count.
    pub zero_cells: usize,
    /// Set when there is no data, so neither form is meaningful.
    pub unreliable: bool,
}

pub fn bdeu_approx<T: Scalar>(stats: &[FamilyStats], alpha: T) -> BdeuApprox<T> {
    let half = T::lit(0.5);
    let two_pi = T::PI() + T::PI();
    let mut posterior = T::zero();
    let mut log_r_sum = T::zero();
    let mut pen_large = T::zero();
    let mut pen_small = T::zero();
    let mut zero_cells = 0;
    let (mut all_large, mut all_small) = (true, true);
    for s in stats {
        let (q, r) = s.counts.dim();
        if alpha >= uz(r * q) {
            all_small = false;
        } else {
            all_large = false;
        }
        let hyper = bdeu_hyperparams(alpha, r, q);
        posterior = posterior + posterior_term(s, &hyper);
        log_r_sum = log_r_sum + uz::<T>(r).ln();
        let weight = uz::<T>(r - 1) / uz(r);
        for ((j, k), &a) in hyper.indexed_iter() {
            let c = s.counts[[j, k]];
            let n = T::from_count(c);
            pen_large = pen_large + weight * (T::one() + n / a).ln();
            let numer = if c == 0 {
                zero_cells += 1;
                a
            } else {
                n
            };
            pen_small = pen_small + weight * (numer / (two_pi * a * a)).ln();
        }
    }
    let regime = match (all_large, all_small) {
        (true, _) => Regime::Large,
        (_, true) => Regime::Small,
        _ => Regime::Mixed,
    };
    BdeuApprox {
        large_alpha: posterior + alpha * log_r_sum - half * pen_large,
        small_alpha: posterior - half * pen_small,
        regime,
        zero_cells,
        unreliable: stats.iter().all(|s| s.total() == 0),
    }
}

/// `log p(Θ̂ | X, g, α) − ½ Σ (r_i−1)/r_i ln(1 + n_ijk/α_ijk)` for arbitrary
/// Dirichlet hyperparameters (one matrix per family). The additive constant is
/// taken as 0.
pub fn general_hyperparameter_approx<T: Scalar>(stats: &[FamilyStats], alphas: &[Array2<T>]) -> Result<T> {
    if stats.len() != alphas.len() {
        return Err(domain(format!(
            "{} hyperparameter matrices for {} families",
            alphas.len(),
            stats.len()
        )));
    }
    let half = T::lit(0.5);
    let mut total = T::zero();
    for (s, hyper) in stats.iter().zip(alphas) {
        if hyper.dim() != s.counts.dim() || hyper.iter().any(|&a| a.is_nan() || a <= T::zero()) {
            return Err(domain("hyperparameters must be positive and match the counts"));
        }
        let r = s.r();
        let weight = uz::<T>(r - 1) / uz(r);
        total = total + posterior_term(s, hyper);
        for ((j, k), &a) in hyper.indexed_iter() {
            total = total - half * weight * (T::one() + T::from_count(s.counts[[j, k]]) / a).ln();
        }
    }
    Ok(total)
}

/// One `(α, n)` cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport<T> {
    pub alpha: T,
    pub n: usize,
    pub prior_exact: T,
    pub prior_approx_small: T,
    pub prior_approx_large: T,
    pub likelihood_exact: T,
    pub likelihood_approx: T,
    pub posterior_term: T,
    pub penalty_term: T,
    pub bdeu_exact: T,
    pub bdeu_approx_large_alpha: T,
    pub bdeu_approx_small_alpha: T,
    pub general_hyperparameter_approx: T,
    pub regime: Regime,
    pub zero_cells: usize,
    pub unreliable: bool,
}

/// Evaluates every term for one structure, dataset and α.
pub fn decompose<T: Scalar>(dag: &Dag, data: &Dataset, alpha: T) -> Result<DecompositionReport<T>> {
    check_alpha(alpha)?;
    dag.ensure_acyclic()?;
    let cards = data.cards();
    let stats = count_all(data, dag)?;
    let hypers: Vec<Array2<T>> = stats
        .iter()
        .map(|s| bdeu_hyperparams(alpha, s.r(), s.q()))
        .collect();
    let bdeu_exact = stats
        .iter()
        .zip(&hypers)
        .map(|(s, h)| log_ml_family(s, h))
        .sum::<Result<T>>()?;
    let (posterior, penalty) = likelihood_term_approx(&stats, alpha);
    let approx = bdeu_approx(&stats, alpha);
    Ok(DecompositionReport {
        alpha,
        n: data.n_rows(),
        prior_exact: prior_term_exact(dag, cards, alpha)?,
        prior_approx_small: prior_term_approx_small(dag, cards, alpha),
        prior_approx_large: prior_term_approx_large(dag, cards, alpha),
        likelihood_exact: likelihood_term_exact(&stats, alpha)?,
        likelihood_approx: posterior - penalty,
        posterior_term: posterior,
        penalty_term: penalty,
        bdeu_exact,
        bdeu_approx_large_alpha: approx.large_alpha,
        bdeu_approx_small_alpha: approx.small_alpha,
        general_hyperparameter_approx: general_hyperparameter_approx(&stats, &hypers)?,
        regime: approx.regime,
        zero_cells: approx.zero_cells,
        unreliable: approx.unreliable,
    })
}

/// Where a sweep's data comes from.
pub enum SweepData<'a> {
    /// A fixed dataset; the n grid is its row count.
    Fixed(&'a Dataset),
    /// Rows sampled from `network` with `seed`; each n uses the first n rows
    /// of one draw of `max(n_grid)` rows, so larger n extend smaller ones.
    Generated {
        network: &'a Network,
        n_grid: &'a [usize],
        seed: u64,
    },
}

/// One report per `(α, n)`, α-major in grid order.
pub fn sweep<T: Scalar>(
    dag: &Dag,
    source: SweepData<'_>,
    alpha_grid: &[T],
) -> Result<Vec<DecompositionReport<T>>> {
    if alpha_grid.is_empty() {
        return Err(domain("alpha grid is empty"));
    }
    let datasets: Vec<Dataset> = match source {
        SweepData::Fixed(data) => vec![data.clone()],
        SweepData::Generated {
            network,
            n_grid,
            seed,
        } => {
            let max_n = *n_grid.iter().max().ok_or_else(|| domain("n grid is empty"))?;
            let full = sample(network, max_n, seed)?;
            n_grid.iter().map(|&n| full.prefix(n)).collect()
        }
    };
    if let Some(d) = datasets.first() {
        if d.n_vars() != dag.n_vars() {
            return Err(domain("structure and data disagree on the variable count"));
        }
    }
    let cells: Vec<(T, &Dataset)> = alpha_grid
        .iter()
        .flat_map(|&a| datasets.iter().map(move |d| (a, d)))
        .collect();
    cells
        .into_par_iter()
        .map(|(alpha, data)| decompose(dag, data, alpha))
        .collect()
}

pub const SWEEP_CSV_HEADER: [&str; 14] = [
    "alpha", "n", "prior_exact", "prior_small", "prior_large", "lik_exact", "posterior", "penalty",
    "lik_approx", "bdeu_exact", "bdeu_large_alpha", "bdeu_small_alpha", "bdeu_general", "regime",
];

/// Writes the sweep CSV (12 significant digits).
pub fn write_sweep_csv<T: Scalar, W: Write>(reports: &[DecompositionReport<T>], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Never)
        .from_writer(writer);
    w.write_record(SWEEP_CSV_HEADER)?;
    for r in reports {
        let f = |v: T| fmt12(v.to_f64_lossy());
        w.write_record([
            f(r.alpha),
            r.n.to_string(),
            f(r.prior_exact),
            f(r.prior_approx_small),
            f(r.prior_approx_large),
            f(r.likelihood_exact),
            f(r.posterior_term),
            f(r.penalty_term),
            f(r.likelihood_approx),
            f(r.bdeu_exact),
            f(r.bdeu_approx_large_alpha),
            f(r.bdeu_approx_small_alpha),
            f(r.general_hyperparameter_approx),
            r.regime.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
