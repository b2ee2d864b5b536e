//! Decomposable structure scores: Dirichlet marginal likelihood (ML, BDe,
//! BDeu), BIC and NIP-BIC, plus the EAP parameter estimator.
//!
//! Every score is a natural-log value and a sum of per-family terms, so the
//! search can cache family scores and add them up.

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{count_all, count_family, Dataset, FamilyStats};
use crate::error::{domain, Error, Result};
use crate::model::{parent_config_count, Dag, Network};
use crate::scalar::Scalar;
use crate::special::ln_gamma_ratio;

/// Largest joint state space enumerated for BDe hyperparameters.
pub const MAX_JOINT_STATES: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKind {
    Ml,
    Bde,
    Bdeu,
    Bic,
    NipBic,
}

impl ScoreKind {
    /// Whether the score uses the equivalent sample size.
    pub fn uses_alpha(self) -> bool {
        matches!(self, ScoreKind::Bde | ScoreKind::Bdeu | ScoreKind::NipBic)
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ml" => Some(Self::Ml),
            "bde" => Some(Self::Bde),
            "bdeu" => Some(Self::Bdeu),
            "bic" => Some(Self::Bic),
            "nip-bic" | "nip_bic" | "nipbic" => Some(Self::NipBic),
            _ => None,
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreKind::Ml => "ML",
            ScoreKind::Bde => "BDe",
            ScoreKind::Bdeu => "BDeu",
            ScoreKind::Bic => "BIC",
            ScoreKind::NipBic => "NIP-BIC",
        })
    }
}

/// Which score to compute, with its hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSpec<T> {
    pub kind: ScoreKind,
    /// Equivalent sample size; ignored by ML and BIC.
    pub alpha: T,
    /// Prior network, required by (and only by) BDe.
    pub hypothetical: Option<Network>,
    /// Per-cell pseudocount `α_ijk` of ML.
    pub ml_pseudocount: T,
}

impl<T: Scalar> ScoreSpec<T> {
    /// Cooper–Herskovits marginal likelihood, `α_ijk = 1`.
    pub fn ml() -> Self {
        Self::ml_with_pseudocount(T::one())
    }

    pub fn ml_with_pseudocount(pseudocount: T) -> Self {
        Self {
            kind: ScoreKind::Ml,
            alpha: T::one(),
            hypothetical: None,
            ml_pseudocount: pseudocount,
        }
    }

    pub fn bdeu(alpha: T) -> Self {
        Self {
            kind: ScoreKind::Bdeu,
            alpha,
            hypothetical: None,
            ml_pseudocount: T::one(),
        }
    }

    pub fn bde(alpha: T, hypothetical: Network) -> Self {
        Self {
            kind: ScoreKind::Bde,
            alpha,
            hypothetical: Some(hypothetical),
            ml_pseudocount: T::one(),
        }
    }

    pub fn bic() -> Self {
        Self {
            kind: ScoreKind::Bic,
            alpha: T::one(),
            hypothetical: None,
            ml_pseudocount: T::one(),
        }
    }

    pub fn nip_bic(alpha: T) -> Self {
        Self {
            kind: ScoreKind::NipBic,
            alpha,
            hypothetical: None,
            ml_pseudocount: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.uses_alpha() && !(self.alpha > T::zero() && self.alpha.is_finite()) {
            return Err(domain(format!("{} needs alpha > 0, got {}", self.kind, self.alpha)));
        }
        if self.kind == ScoreKind::Ml
            && !(self.ml_pseudocount > T::zero() && self.ml_pseudocount.is_finite())
        {
            return Err(domain(format!(
                "ML pseudocount must be > 0, got {}",
                self.ml_pseudocount
            )));
        }
        match (self.kind, &self.hypothetical) {
            (ScoreKind::Bde, None) => Err(domain("BDe needs a hypothetical network")),
            (ScoreKind::Bde, Some(net)) if net.cpts().is_none() => {
                Err(domain("BDe hypothetical network has no CPTs"))
            }
            (kind, Some(_)) if kind != ScoreKind::Bde => {
                Err(domain(format!("{kind} does not take a hypothetical network")))
            }
            _ => Ok(()),
        }
    }

    /// Short column label, e.g. `BDeu(alpha=0.01)`.
    pub fn label(&self) -> String {
        match self.kind {
            ScoreKind::Ml if self.ml_pseudocount == T::one() => "ML".to_string(),
            ScoreKind::Ml => format!("ML(pseudocount={})", self.ml_pseudocount),
            ScoreKind::Bic => "BIC".to_string(),
            ScoreKind::NipBic => format!("NIP(alpha={})", self.alpha),
            kind => format!("{kind}(alpha={})", self.alpha),
        }
    }
}

/// Log-score of one family.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyScore<T> {
    pub child: usize,
    pub parents: Vec<usize>,
    pub log_score: T,
}

/// Total log-score with its per-family breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureScore<T> {
    pub total: T,
    pub families: Vec<FamilyScore<T>>,
}

/// EAP parameter estimates, one `q_i × r_i` block per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct EapEstimate<T> {
    pub families: Vec<Array2<T>>,
}

fn check_hyper<T: Scalar>(stats: &FamilyStats, alpha: &Array2<T>) -> Result<()> {
    if alpha.dim() != stats.counts.dim() {
        return Err(domain(format!(
            "hyperparameter shape {:?} does not match counts {:?}",
            alpha.dim(),
            stats.counts.dim()
        )));
    }
    if alpha.iter().any(|&a| !(a > T::zero() && a.is_finite())) {
        return Err(domain("Dirichlet hyperparameters must be positive and finite"));
    }
    Ok(())
}

/// `θ̂_ijk = (α_ijk + n_ijk) / (α_ij + n_ij)`.
pub fn eap_estimate<T: Scalar>(stats: &FamilyStats, alpha: &Array2<T>) -> Result<Array2<T>> {
    check_hyper(stats, alpha)?;
    let mut theta = Array2::<T>::zeros(stats.counts.dim());
    for j in 0..stats.q() {
        let a_row = alpha.row(j);
        let denom = a_row.iter().copied().sum::<T>() + T::from_count(stats.row_totals[j]);
        for k in 0..stats.r() {
            theta[[j, k]] = (a_row[k] + T::from_count(stats.counts[[j, k]])) / denom;
        }
    }
    Ok(theta)
}

/// Log of one family's factor of the Dirichlet marginal likelihood:
/// `Σ_j [ln Γ(α_ij) − ln Γ(α_ij + n_ij) + Σ_k (ln Γ(α_ijk + n_ijk) − ln Γ(α_ijk))]`.
pub fn log_ml_family<T: Scalar>(stats: &FamilyStats, alpha: &Array2<T>) -> Result<T> {
    check_hyper(stats, alpha)?;
    Ok(log_ml_family_unchecked(stats, alpha))
}

fn log_ml_family_unchecked<T: Scalar>(stats: &FamilyStats, alpha: &Array2<T>) -> T {
    let mut total = T::zero();
    for j in 0..stats.q() {
        let n_ij = stats.row_totals[j];
        if n_ij == 0 {
            continue;
        }
        let a_row = alpha.row(j);
        let a_ij: T = a_row.iter().copied().sum();
        total = total - ln_gamma_ratio(a_ij, n_ij);
        for k in 0..stats.r() {
            total = total + ln_gamma_ratio(a_row[k], stats.counts[[j, k]]);
        }
    }
    total
}

/// BDeu hyperparameters: every cell `α / (r q)`.
pub fn bdeu_hyperparams<T: Scalar>(alpha: T, r: usize, q: usize) -> Array2<T> {
    let cell = alpha / T::from_usize(r * q).expect("cell count representable");
    Array2::from_elem((q, r), cell)
}

/// Exact joint distribution of a network with CPTs, by enumeration.
#[derive(Debug, Clone)]
pub struct JointDistribution {
    cards: Vec<usize>,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn new(network: &Network) -> Result<Self> {
        let cpts = network
            .cpts()
            .ok_or_else(|| domain("network has no CPTs"))?;
        let cards = network.cards();
        let size = cards
            .iter()
            .try_fold(1usize, |acc, &r| acc.checked_mul(r).filter(|&s| s <= MAX_JOINT_STATES))
            .ok_or_else(|| {
                Error::Capacity(format!(
                    "joint state space exceeds {MAX_JOINT_STATES} assignments"
                ))
            })?;
        let dag = network.dag();
        let mut probs = Vec::with_capacity(size);
        let mut states = vec![0usize; cards.len()];
        for _ in 0..size {
            let mut p = 1.0;
            for (i, cpt) in cpts.iter().enumerate() {
                let j = dag
                    .parents(i)
                    .iter()
                    .fold(0usize, |j, &pa| j * cards[pa] + states[pa]);
                p *= cpt.rows[j][states[i]];
                if p == 0.0 {
                    break;
                }
            }
            probs.push(p);
            // Mixed-radix increment, last variable fastest.
            for i in (0..cards.len()).rev() {
                states[i] += 1;
                if states[i] < cards[i] {
                    break;
                }
                states[i] = 0;
            }
        }
        Ok(Self { cards, probs })
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    /// Probability of each full assignment, first variable most significant.
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// `p(x_child = k, Π = j)` as a `q × r` matrix.
    pub fn family_marginal(&self, child: usize, parents: &[usize]) -> Array2<f64> {
        let cards = &self.cards;
        let q = parent_config_count(parents, cards);
        let mut out = Array2::<f64>::zeros((q, cards[child]));
        let mut states = vec![0usize; cards.len()];
        for &p in &self.probs {
            let j = parents.iter().fold(0usize, |j, &pa| j * cards[pa] + states[pa]);
            out[[j, states[child]]] += p;
            for i in (0..cards.len()).rev() {
                states[i] += 1;
                if states[i] < cards[i] {
                    break;
                }
                states[i] = 0;
            }
        }
        out
    }

    /// BDe hyperparameters `α p(x_child = k, Π = j | g^h)`; zero cells are
    /// rejected.
    pub fn bde_hyperparams<T: Scalar>(
        &self,
        alpha: T,
        child: usize,
        parents: &[usize],
    ) -> Result<Array2<T>> {
        if alpha.is_nan() || alpha <= T::zero() {
            return Err(domain(format!("BDe needs alpha > 0, got {alpha}")));
        }
        let marginal = self.family_marginal(child, parents);
        let mut out = Array2::<T>::zeros(marginal.dim());
        for ((j, k), &p) in marginal.indexed_iter() {
            let cell = alpha * T::lit(p);
            if cell.is_nan() || cell <= T::zero() {
                return Err(Error::DegeneratePrior {
                    child,
                    parent_config: j,
                    state: k,
                });
            }
            out[[j, k]] = cell;
        }
        Ok(out)
    }
}

/// BDe hyperparameters for the family `(child, parents)` under `hypothetical`.
pub fn bde_hyperparams<T: Scalar>(
    hypothetical: &Network,
    alpha: T,
    child: usize,
    parents: &[usize],
) -> Result<Array2<T>> {
    let n = hypothetical.n_vars();
    if child >= n || parents.iter().any(|&p| p >= n || p == child) {
        return Err(domain("family indices out of range for the hypothetical network"));
    }
    JointDistribution::new(hypothetical)?.bde_hyperparams(alpha, child, parents)
}

/// `Σ_{j,k} (α_ijk + n_ijk) ln((α_ijk + n_ijk)/(α_ij + n_ij))` for one family:
/// the log-posterior of the EAP estimate. With `alpha` all zero this is the
/// maximized log-likelihood (using `0 ln 0 = 0`).
pub fn posterior_term<T: Scalar>(stats: &FamilyStats, alpha: &Array2<T>) -> T {
    let mut total = T::zero();
    for j in 0..stats.q() {
        let a_row = alpha.row(j);
        let denom = a_row.iter().copied().sum::<T>() + T::from_count(stats.row_totals[j]);
        for k in 0..stats.r() {
            let num = a_row[k] + T::from_count(stats.counts[[j, k]]);
            if num > T::zero() {
                total = total + num * (num / denom).ln();
            }
        }
    }
    total
}

/// Maximized log-likelihood `Σ n_ijk ln(n_ijk / n_ij)` of one family.
pub fn log_likelihood_family<T: Scalar>(stats: &FamilyStats) -> T {
    let mut total = T::zero();
    for j in 0..stats.q() {
        let n_ij = T::from_count(stats.row_totals[j]);
        for &c in stats.counts.row(j) {
            if c > 0 {
                let c = T::from_count(c);
                total = total + c * (c / n_ij).ln();
            }
        }
    }
    total
}

fn family_dim<T: Scalar>(stats: &FamilyStats) -> T {
    T::from_usize(stats.q() * (stats.r() - 1)).expect("parameter count representable")
}

/// BIC contribution of one family with total sample size `n`.
pub fn bic_family<T: Scalar>(stats: &FamilyStats, n: u64) -> Result<T> {
    if n == 0 {
        return Err(domain("BIC is undefined for an empty dataset"));
    }
    Ok(log_likelihood_family::<T>(stats) - T::lit(0.5) * family_dim::<T>(stats) * T::from_count(n).ln())
}

/// `Σ n_ijk ln(n_ijk/n_ij) − ½ k(g) ln n`.
pub fn log_bic<T: Scalar>(stats: &[FamilyStats], n: u64) -> Result<T> {
    stats.iter().map(|s| bic_family::<T>(s, n)).sum()
}

/// NIP-BIC contribution of one family: BDeu-smoothed log-posterior minus
/// `½ q (r − 1) ln(α + n)`.
pub fn nip_bic_family<T: Scalar>(stats: &FamilyStats, alpha: T, n: u64) -> Result<T> {
    if !(alpha > T::zero() && alpha.is_finite()) {
        return Err(domain(format!("NIP-BIC needs alpha > 0, got {alpha}")));
    }
    let hyper = bdeu_hyperparams(alpha, stats.r(), stats.q());
    Ok(posterior_term(stats, &hyper)
        - T::lit(0.5) * family_dim::<T>(stats) * (alpha + T::from_count(n)).ln())
}

/// `log p(Θ̂ | X, g, α) − ½ k(g) ln(α + n)` with `α_ijk = α / (r_i q_i)`.
pub fn log_nip_bic<T: Scalar>(stats: &[FamilyStats], alpha: T, n: u64) -> Result<T> {
    stats.iter().map(|s| nip_bic_family(s, alpha, n)).sum()
}

/// Scores families under one [`ScoreSpec`]; holds the BDe joint so it is
/// enumerated once.
pub struct FamilyScorer<'a, T> {
    spec: &'a ScoreSpec<T>,
    n_rows: u64,
    joint: Option<JointDistribution>,
}

impl<'a, T: Scalar> FamilyScorer<'a, T> {
    pub fn new(spec: &'a ScoreSpec<T>, data: &Dataset) -> Result<Self> {
        spec.validate()?;
        let joint = match (&spec.kind, &spec.hypothetical) {
            (ScoreKind::Bde, Some(net)) => {
                if net.cards() != data.cards() {
                    return Err(domain(
                        "hypothetical network variables do not match the dataset",
                    ));
                }
                Some(JointDistribution::new(net)?)
            }
            _ => None,
        };
        Ok(Self {
            spec,
            n_rows: data.n_rows() as u64,
            joint,
        })
    }

    /// Dirichlet hyperparameters for a family (ML, BDe, BDeu only).
    pub fn hyperparams(&self, stats: &FamilyStats) -> Result<Array2<T>> {
        let (q, r) = stats.counts.dim();
        match self.spec.kind {
            ScoreKind::Ml => Ok(Array2::from_elem((q, r), self.spec.ml_pseudocount)),
            ScoreKind::Bdeu | ScoreKind::NipBic => Ok(bdeu_hyperparams(self.spec.alpha, r, q)),
            ScoreKind::Bde => self
                .joint
                .as_ref()
                .expect("BDe joint prepared")
                .bde_hyperparams(self.spec.alpha, stats.child, &stats.parents),
            ScoreKind::Bic => Err(domain("BIC has no Dirichlet hyperparameters")),
        }
    }

    pub fn score(&self, stats: &FamilyStats) -> Result<T> {
        match self.spec.kind {
            ScoreKind::Ml | ScoreKind::Bde | ScoreKind::Bdeu => {
                let hyper = self.hyperparams(stats)?;
                Ok(log_ml_family_unchecked(stats, &hyper))
            }
            ScoreKind::Bic => bic_family(stats, self.n_rows),
            ScoreKind::NipBic => nip_bic_family(stats, self.spec.alpha, self.n_rows),
        }
    }
}

/// Total score of `dag` on `data` with per-family breakdown.
pub fn score_structure<T: Scalar>(
    data: &Dataset,
    dag: &Dag,
    spec: &ScoreSpec<T>,
) -> Result<StructureScore<T>> {
    dag.ensure_acyclic()?;
    let scorer = FamilyScorer::new(spec, data)?;
    let stats = count_all(data, dag)?;
    let families = stats
        .iter()
        .map(|s| {
            Ok(FamilyScore {
                child: s.child,
                parents: s.parents.clone(),
                log_score: scorer.score(s)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let total = families.iter().map(|f| f.log_score).sum();
    Ok(StructureScore { total, families })
}

/// EAP parameters of `dag` under a Dirichlet score (ML, BDe or BDeu).
pub fn estimate_parameters<T: Scalar>(
    data: &Dataset,
    dag: &Dag,
    spec: &ScoreSpec<T>,
) -> Result<EapEstimate<T>> {
    let scorer = FamilyScorer::new(spec, data)?;
    let families = count_all(data, dag)?
        .iter()
        .map(|s| eap_estimate(s, &scorer.hyperparams(s)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(EapEstimate { families })
}

/// Grid value of α maximizing the BDeu score of `dag`; ties go to the
/// smallest α.
pub fn select_alpha_empirical_bayes<T: Scalar>(
    data: &Dataset,
    dag: &Dag,
    alpha_grid: &[T],
) -> Result<T> {
    if alpha_grid.is_empty() {
        return Err(domain("alpha grid is empty"));
    }
    dag.ensure_acyclic()?;
    let stats = count_all(data, dag)?;
    let mut best: Option<(T, T)> = None;
    for &alpha in alpha_grid {
        if !(alpha > T::zero() && alpha.is_finite()) {
            return Err(domain(format!("grid value {alpha} is not a positive ESS")));
        }
        let score: T = stats
            .iter()
            .map(|s| log_ml_family_unchecked(s, &bdeu_hyperparams(alpha, s.r(), s.q())))
            .sum();
        best = match best {
            Some((a, s)) if s > score || (s == score && a <= alpha) => Some((a, s)),
            _ => Some((alpha, score)),
        };
    }
    Ok(best.expect("non-empty grid").0)
}

/// Convenience: one family's Dirichlet score straight from data.
pub fn family_score<T: Scalar>(
    data: &Dataset,
    child: usize,
    parents: &[usize],
    spec: &ScoreSpec<T>,
) -> Result<T> {
    let scorer = FamilyScorer::new(spec, data)?;
    scorer.score(&count_family(data, child, parents)?)
}
