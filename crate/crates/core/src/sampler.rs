//! Forward (ancestral) sampling and the five skew-graded generator networks.
//!
//! Random streams come from ChaCha8 (`rand_chacha`), which is seedable and
//! produces the same sequence on every platform. Independent streams for
//! repetitions are derived with [`stream_seed`].

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{domain, Error, Result};
use crate::model::{binary_variables, decode_parent_config, Cpt, Dag, Network};

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `master`: `splitmix64(master ^ splitmix64(index))`.
pub fn stream_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// Draws `n` i.i.d. rows from `network`, sampling variables in topological
/// order given their sampled parents.
pub fn sample(network: &Network, n: usize, seed: u64) -> Result<Dataset> {
    let cpts = network
        .cpts()
        .ok_or_else(|| domain("sampling needs a network with CPTs"))?;
    let dag = network.dag();
    let order = dag
        .topological_order()
        .ok_or_else(|| domain("graph contains a directed cycle"))?;
    let cards = network.cards();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Dataset::for_network(network);
    let mut row = vec![0usize; cards.len()];
    for _ in 0..n {
        for &i in &order {
            let j = dag
                .parents(i)
                .iter()
                .fold(0usize, |j, &p| j * cards[p] + row[p]);
            row[i] = draw(cpts[i].row(j), rng.gen::<f64>());
        }
        data.push_row(&row)?;
    }
    Ok(data)
}

/// Inverse-CDF draw; rounding slack falls on the last positive-mass state.
fn draw(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Generator networks graded from strongly skewed (g1) to strongly uniform
/// (g4), plus a mixed one (g5).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorPreset {
    G1,
    G2,
    G3,
    G4,
    G5,
}

impl GeneratorPreset {
    pub const ALL: [GeneratorPreset; 5] = [Self::G1, Self::G2, Self::G3, Self::G4, Self::G5];

    /// Skew δ of node `i`: conditional rows are `0.5 ± δ`.
    pub fn skew(self, node: usize) -> f64 {
        match self {
            Self::G1 => 0.4,
            Self::G2 => 0.25,
            Self::G3 => 0.1,
            Self::G4 => 0.02,
            Self::G5 => {
                if node.is_multiple_of(2) {
                    0.4
                } else {
                    0.02
                }
            }
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Self::G1 => "g1",
            Self::G2 => "g2",
            Self::G3 => "g3",
            Self::G4 => "g4",
            Self::G5 => "g5",
        }
    }
}

impl fmt::Display for GeneratorPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for GeneratorPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| domain(format!("unknown generator preset {s:?}")))
    }
}

/// Arcs shared by every preset: x1→x2, x1→x3, x2→x4, x3→x4, x4→x5.
pub const PRESET_ARCS: [(usize, usize); 5] = [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4)];

pub fn preset_dag() -> Dag {
    Dag::from_arcs(5, &PRESET_ARCS).expect("preset arcs are valid")
}

/// Five binary variables on [`PRESET_ARCS`]. The root is uniform; a child's
/// row for parent configuration `j` is `(0.5 + δ, 0.5 − δ)` when the parent
/// states of `j` sum to an even number and the mirror image otherwise.
pub fn preset_network(id: GeneratorPreset) -> Network {
    let dag = preset_dag();
    let cards = [2; 5];
    let cpts = (0..5)
        .map(|i| {
            let parents = dag.parents(i);
            if parents.is_empty() {
                return Cpt {
                    child: i,
                    rows: vec![vec![0.5, 0.5]],
                };
            }
            let pc: Vec<usize> = parents.iter().map(|&p| cards[p]).collect();
            let q: usize = pc.iter().product();
            let d = id.skew(i);
            let rows = (0..q)
                .map(|j| {
                    let parity: usize = decode_parent_config(j, &pc).iter().sum::<usize>() % 2;
                    if parity == 0 {
                        vec![0.5 + d, 0.5 - d]
                    } else {
                        vec![0.5 - d, 0.5 + d]
                    }
                })
                .collect();
            Cpt { child: i, rows }
        })
        .collect();
    Network::new(binary_variables(5), dag, Some(cpts)).expect("preset network is valid")
}
