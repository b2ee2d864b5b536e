//! Exact structure search over every labeled DAG of a small variable set.
//!
//! Family scores are computed once into a [`FamilyCache`] keyed by parent
//! bitmask; each DAG's score is then a sum of `N` lookups.

use rayon::prelude::*;
use serde_json::json;

use crate::data::{count_family, Dataset};
use crate::error::{Error, Result};
use crate::model::{pair_from_index, Dag};
use crate::scalar::Scalar;
use crate::scoring::{FamilyScorer, ScoreSpec};

/// Most variables a family cache will hold.
pub const MAX_CACHE_VARS: usize = 8;
/// Most variables the exhaustive enumeration accepts.
pub const MAX_SEARCH_VARS: usize = 6;
/// Relative tolerance defining the tie set.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Removes bit `child` from a full-width parent mask.
#[inline]
fn compress(child: usize, mask: u32) -> usize {
    let low = mask & ((1u32 << child) - 1);
    let high = mask >> (child + 1);
    (low | (high << child)) as usize
}

#[inline]
fn expand(child: usize, compact: usize) -> u32 {
    let compact = compact as u32;
    let low = compact & ((1u32 << child) - 1);
    let high = compact >> child;
    low | (high << (child + 1))
}

fn mask_to_list(mask: u32) -> Vec<usize> {
    (0..32).filter(|&b| mask & (1 << b) != 0).collect()
}

/// Log-scores of every `(child, parent set)` family for one dataset and score.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyCache<T> {
    n: usize,
    scores: Vec<T>,
}

impl<T: Scalar> FamilyCache<T> {
    pub fn n_vars(&self) -> usize {
        self.n
    }

    /// Entry count, `N · 2^(N−1)`.
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Score of `child` with parent set `parent_mask` (bit `p` = variable `p`).
    #[inline]
    pub fn get(&self, child: usize, parent_mask: u32) -> T {
        debug_assert_eq!(parent_mask & (1 << child), 0);
        let per_child = 1usize << (self.n - 1);
        self.scores[child * per_child + compress(child, parent_mask)]
    }

    /// `(child, parent_mask, score)` for every entry.
    pub fn entries(&self) -> impl Iterator<Item = (usize, u32, T)> + '_ {
        let per_child = if self.n == 0 { 1 } else { 1usize << (self.n - 1) };
        self.scores
            .iter()
            .enumerate()
            .map(move |(idx, &s)| (idx / per_child, expand(idx / per_child, idx % per_child), s))
    }

    /// Sum of the family scores of `dag`, in child order.
    pub fn score_dag(&self, dag: &Dag) -> T {
        (0..dag.n_vars())
            .map(|i| self.get(i, dag.parent_mask(i)))
            .fold(T::zero(), |a, b| a + b)
    }
}

/// Scores all `N · 2^(N−1)` families of `data` under `spec`.
pub fn build_family_cache<T: Scalar>(data: &Dataset, spec: &ScoreSpec<T>) -> Result<FamilyCache<T>> {
    let n = data.n_vars();
    if n > MAX_CACHE_VARS {
        return Err(Error::Capacity(format!(
            "family cache supports at most {MAX_CACHE_VARS} variables, got {n}"
        )));
    }
    let scorer = FamilyScorer::new(spec, data)?;
    if n == 0 {
        return Ok(FamilyCache { n, scores: Vec::new() });
    }
    let per_child = 1usize << (n - 1);
    let scores = (0..n * per_child)
        .into_par_iter()
        .map(|idx| {
            let child = idx / per_child;
            let parents = mask_to_list(expand(child, idx % per_child));
            scorer.score(&count_family(data, child, &parents)?)
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(FamilyCache { n, scores })
}

/// All labeled DAGs on `n` nodes in ascending adjacency-bitstring order
/// (see [`Dag::adjacency_mask`]).
#[derive(Debug, Clone)]
pub struct DagSpace {
    n: usize,
    masks: Vec<u64>,
    /// Parent bitmasks, `n` per DAG.
    parents: Vec<u8>,
}

impl DagSpace {
    pub fn new(n: usize) -> Result<Self> {
        if n > MAX_SEARCH_VARS {
            return Err(Error::Capacity(format!(
                "exhaustive enumeration supports at most {MAX_SEARCH_VARS} variables, got {n}"
            )));
        }
        let mut space = Self {
            n,
            masks: Vec::new(),
            parents: Vec::new(),
        };
        let pairs = n * n.saturating_sub(1);
        // desc[v]: bitmask of v and everything reachable from it.
        let mut desc = [0u8; MAX_SEARCH_VARS];
        for (v, d) in desc.iter_mut().enumerate().take(n) {
            *d = 1 << v;
        }
        space.descend(pairs, 0, desc);
        Ok(space)
    }

    // Decides pair bits from most to least significant, 0 before 1, so the
    // leaves come out in ascending mask order. Branches that close a cycle
    // are cut immediately.
    fn descend(&mut self, remaining: usize, mask: u64, desc: [u8; MAX_SEARCH_VARS]) {
        if remaining == 0 {
            self.push(mask);
            return;
        }
        let b = remaining - 1;
        self.descend(b, mask, desc);
        let (from, to) = pair_from_index(self.n, b);
        if desc[to] & (1 << from) != 0 {
            return;
        }
        let mut next = desc;
        for d in next.iter_mut().take(self.n) {
            if *d & (1 << from) != 0 {
                *d |= desc[to];
            }
        }
        self.descend(b, mask | (1 << b), next);
    }

    fn push(&mut self, mask: u64) {
        let n = self.n;
        let start = self.parents.len();
        self.parents.resize(start + n, 0);
        let pairs = n * n.saturating_sub(1);
        for b in 0..pairs {
            if mask & (1 << b) != 0 {
                let (from, to) = pair_from_index(n, b);
                self.parents[start + to] |= 1 << from;
            }
        }
        self.masks.push(mask);
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn adjacency_mask(&self, idx: usize) -> u64 {
        self.masks[idx]
    }

    pub fn parent_masks(&self, idx: usize) -> &[u8] {
        &self.parents[idx * self.n..(idx + 1) * self.n]
    }

    pub fn dag(&self, idx: usize) -> Dag {
        Dag::from_adjacency_mask(self.n, self.masks[idx]).expect("enumerated mask is valid")
    }

    pub fn iter(&self) -> impl Iterator<Item = Dag> + '_ {
        (0..self.len()).map(|i| self.dag(i))
    }

    /// Score of every DAG under `cache`, in enumeration order.
    pub fn score_all<T: Scalar>(&self, cache: &FamilyCache<T>) -> Vec<T> {
        assert_eq!(cache.n_vars(), self.n, "cache and DAG space disagree on N");
        if self.n == 0 {
            return vec![T::zero(); self.len()];
        }
        self.parents
            .par_chunks(self.n)
            .map(|pm| {
                pm.iter()
                    .enumerate()
                    .map(|(i, &m)| cache.get(i, m as u32))
                    .fold(T::zero(), |a, b| a + b)
            })
            .collect()
    }
}

/// Every labeled DAG on `n` nodes, ascending adjacency bitstring.
pub fn enumerate_dags(n: usize) -> Result<impl Iterator<Item = Dag>> {
    let space = DagSpace::new(n)?;
    Ok((0..space.len()).map(move |i| space.dag(i)))
}

/// Outcome of an exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult<T> {
    /// Smallest-bitstring member of the tie set.
    pub best_dag: Dag,
    /// Score of `best_dag`.
    pub best_score: T,
    /// Every DAG within [`TIE_TOLERANCE`] (relative) of the maximum, in
    /// ascending bitstring order.
    pub tie_set: Vec<Dag>,
    pub dag_count_examined: u64,
}

impl<T: Scalar> SearchResult<T> {
    /// `{"best": [...], "score": .., "ties": [...], "examined": ..}` with each
    /// graph written as its list of parent lists.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "best": self.best_dag.parent_sets(),
            "score": self.best_score.to_f64_lossy(),
            "ties": self.tie_set.iter().map(|d| d.parent_sets().to_vec()).collect::<Vec<_>>(),
            "examined": self.dag_count_examined,
        })
    }
}

fn is_tie<T: Scalar>(score: T, best: T) -> bool {
    best - score <= T::lit(TIE_TOLERANCE) * best.abs()
}

/// Maximizes the cached score over `space`.
pub fn search_with_cache<T: Scalar>(space: &DagSpace, cache: &FamilyCache<T>) -> SearchResult<T> {
    let scores = space.score_all(cache);
    let best = scores
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let ties: Vec<usize> = (0..scores.len()).filter(|&i| is_tie(scores[i], best)).collect();
    let first = ties[0];
    SearchResult {
        best_dag: space.dag(first),
        best_score: scores[first],
        tie_set: ties.iter().map(|&i| space.dag(i)).collect(),
        dag_count_examined: scores.len() as u64,
    }
}

/// Exact MAP structure of `data` under `spec`.
pub fn exhaustive_search<T: Scalar>(data: &Dataset, spec: &ScoreSpec<T>) -> Result<SearchResult<T>> {
    let space = DagSpace::new(data.n_vars())?;
    let cache = build_family_cache(data, spec)?;
    Ok(search_with_cache(&space, &cache))
}

/// The `k` best DAGs, by score descending then bitstring ascending.
pub fn rank_with_cache<T: Scalar>(space: &DagSpace, cache: &FamilyCache<T>, k: usize) -> Vec<(Dag, T)> {
    let scores = space.score_all(cache);
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Stable sort keeps ascending bitstring order among equal scores.
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    order
        .into_iter()
        .take(k)
        .map(|i| (space.dag(i), scores[i]))
        .collect()
}

pub fn top_k<T: Scalar>(data: &Dataset, spec: &ScoreSpec<T>, k: usize) -> Result<Vec<(Dag, T)>> {
    let space = DagSpace::new(data.n_vars())?;
    let cache = build_family_cache(data, spec)?;
    Ok(rank_with_cache(&space, &cache, k))
}
