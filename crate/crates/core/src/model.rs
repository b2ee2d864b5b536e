//! Variables, DAG structures, CPTs and networks.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Tolerance on CPT row sums.
pub const CPT_ROW_TOLERANCE: f64 = 1e-12;

/// Largest variable count supported by the bitmask representations.
pub const MAX_MASK_VARS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub cardinality: usize,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, cardinality: usize) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(domain("variable name must be non-empty"));
        }
        if cardinality < 2 {
            return Err(domain(format!("variable {name:?} has cardinality {cardinality} < 2")));
        }
        Ok(Self { name, cardinality })
    }
}

/// `n` binary variables named `x1..xn`.
pub fn binary_variables(n: usize) -> Vec<VariableSpec> {
    (1..=n)
        .map(|i| VariableSpec {
            name: format!("x{i}"),
            cardinality: 2,
        })
        .collect()
}

/// Directed graph given by sorted, duplicate-free parent lists.
///
/// Construction checks the parent lists only; acyclicity is a separate query
/// ([`Dag::is_acyclic`]) and every consumer that needs it checks it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dag {
    parents: Vec<Vec<usize>>,
}

impl Dag {
    pub fn new(parents: Vec<Vec<usize>>) -> Result<Self> {
        let n = parents.len();
        for (child, ps) in parents.iter().enumerate() {
            for w in ps.windows(2) {
                if w[0] >= w[1] {
                    return Err(domain(format!(
                        "parent list of variable {child} is not sorted and duplicate-free"
                    )));
                }
            }
            for &p in ps {
                if p >= n {
                    return Err(domain(format!("parent index {p} out of range for {n} variables")));
                }
                if p == child {
                    return Err(domain(format!("variable {child} lists itself as a parent")));
                }
            }
        }
        Ok(Self { parents })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            parents: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from `(from, to)` arcs. Parent lists are sorted.
    pub fn from_arcs(n: usize, arcs: &[(usize, usize)]) -> Result<Self> {
        let mut parents = vec![Vec::new(); n];
        for &(from, to) in arcs {
            if from >= n || to >= n {
                return Err(domain(format!("arc {from}->{to} out of range for {n} variables")));
            }
            parents[to].push(from);
        }
        for ps in &mut parents {
            ps.sort_unstable();
        }
        Self::new(parents)
    }

    pub fn n_vars(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self, child: usize) -> &[usize] {
        &self.parents[child]
    }

    pub fn parent_sets(&self) -> &[Vec<usize>] {
        &self.parents
    }

    pub fn has_arc(&self, from: usize, to: usize) -> bool {
        self.parents[to].binary_search(&from).is_ok()
    }

    /// Arcs `(from, to)`, ordered by child then parent.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(to, ps)| ps.iter().map(move |&from| (from, to)))
            .collect()
    }

    pub fn arc_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// Parent set of `child` as a bitmask over variable indices.
    pub fn parent_mask(&self, child: usize) -> u32 {
        self.parents[child].iter().fold(0u32, |m, &p| m | (1 << p))
    }

    /// Adjacency bitstring: bit `b` is set when the `b`-th ordered pair in
    /// row-major order `(0,1), (0,2), .., (0,n-1), (1,0), (1,2), ..` is an arc.
    pub fn adjacency_mask(&self) -> u64 {
        let n = self.n_vars();
        let mut mask = 0u64;
        for (from, to) in self.arcs() {
            mask |= 1 << pair_index(n, from, to);
        }
        mask
    }

    /// Inverse of [`Dag::adjacency_mask`].
    pub fn from_adjacency_mask(n: usize, mask: u64) -> Result<Self> {
        if n > MAX_MASK_VARS {
            return Err(Error::Capacity(format!(
                "adjacency bitstrings support at most {MAX_MASK_VARS} variables"
            )));
        }
        let pairs = n * n.saturating_sub(1);
        if pairs < 64 && mask >> pairs != 0 {
            return Err(domain(format!("mask {mask:#x} has bits beyond {pairs} pairs")));
        }
        let mut parents = vec![Vec::new(); n];
        for b in 0..pairs {
            if mask & (1 << b) != 0 {
                let (from, to) = pair_from_index(n, b);
                parents[to].push(from);
            }
        }
        for ps in &mut parents {
            ps.sort_unstable();
        }
        Ok(Self { parents })
    }

    /// Kahn's algorithm; `None` when the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.n_vars();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut children = vec![Vec::new(); n];
        for (from, to) in self.arcs() {
            children[from].push(to);
        }
        let mut ready: Vec<usize> = (0..n).rev().filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop() {
            order.push(v);
            for &c in children[v].iter().rev() {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    pub(crate) fn ensure_acyclic(&self) -> Result<()> {
        if self.is_acyclic() {
            Ok(())
        } else {
            Err(domain("graph contains a directed cycle"))
        }
    }
}

/// Free-function form of [`Dag::is_acyclic`].
pub fn is_acyclic(dag: &Dag) -> bool {
    dag.is_acyclic()
}

/// Index of ordered pair `(from, to)` in the row-major adjacency bitstring.
pub(crate) fn pair_index(n: usize, from: usize, to: usize) -> usize {
    debug_assert!(from != to);
    from * (n - 1) + if to > from { to - 1 } else { to }
}

pub(crate) fn pair_from_index(n: usize, b: usize) -> (usize, usize) {
    let from = b / (n - 1);
    let rem = b % (n - 1);
    let to = if rem >= from { rem + 1 } else { rem };
    (from, to)
}

/// Mixed-radix index of a parent configuration, first parent most significant.
pub fn parent_config_index(parent_states: &[usize], parent_cards: &[usize]) -> Result<usize> {
    if parent_states.len() != parent_cards.len() {
        return Err(domain(format!(
            "{} parent states for {} parent cardinalities",
            parent_states.len(),
            parent_cards.len()
        )));
    }
    let mut j = 0usize;
    for (&s, &r) in parent_states.iter().zip(parent_cards) {
        if s >= r {
            return Err(domain(format!("state {s} out of range for cardinality {r}")));
        }
        j = j * r + s;
    }
    Ok(j)
}

/// Inverse of [`parent_config_index`].
pub fn decode_parent_config(mut j: usize, parent_cards: &[usize]) -> Vec<usize> {
    let mut states = vec![0; parent_cards.len()];
    for (slot, &r) in states.iter_mut().zip(parent_cards).rev() {
        *slot = j % r;
        j /= r;
    }
    states
}

/// `q_i`: product of the parents' cardinalities (1 for no parents).
pub fn parent_config_count(parents: &[usize], cards: &[usize]) -> usize {
    parents.iter().map(|&p| cards[p]).product()
}

/// `k(g) = Σ_i q_i (r_i - 1)`.
pub fn num_parameters(dag: &Dag, cards: &[usize]) -> u64 {
    (0..dag.n_vars())
        .map(|i| (parent_config_count(dag.parents(i), cards) * (cards[i] - 1)) as u64)
        .sum()
}

/// Same skeleton and same v-structures.
pub fn markov_equivalent(g1: &Dag, g2: &Dag) -> bool {
    if g1.n_vars() != g2.n_vars() {
        return false;
    }
    skeleton(g1) == skeleton(g2) && v_structures(g1) == v_structures(g2)
}

fn adjacent(g: &Dag, a: usize, b: usize) -> bool {
    g.has_arc(a, b) || g.has_arc(b, a)
}

fn skeleton(g: &Dag) -> HashSet<(usize, usize)> {
    g.arcs()
        .into_iter()
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect()
}

/// Triples `(a, c, b)` with `a < b`, `a -> c <- b` and `a`, `b` non-adjacent.
pub fn v_structures(g: &Dag) -> HashSet<(usize, usize, usize)> {
    let mut out = HashSet::new();
    for c in 0..g.n_vars() {
        let ps = g.parents(c);
        for (i, &a) in ps.iter().enumerate() {
            for &b in &ps[i + 1..] {
                if !adjacent(g, a, b) {
                    out.insert((a, c, b));
                }
            }
        }
    }
    out
}

/// Conditional probability table of one variable: one row per parent
/// configuration, rows ordered by [`parent_config_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub child: usize,
    pub rows: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn q(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.rows[j]
    }

    fn validate(&self, r: usize, q: usize) -> Result<()> {
        if self.rows.len() != q {
            return Err(domain(format!(
                "CPT of variable {} has {} rows, expected q = {q}",
                self.child,
                self.rows.len()
            )));
        }
        for (j, row) in self.rows.iter().enumerate() {
            if row.len() != r {
                return Err(domain(format!(
                    "CPT of variable {} row {j} has {} entries, expected r = {r}",
                    self.child,
                    row.len()
                )));
            }
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(domain(format!(
                    "CPT of variable {} row {j} has an entry outside [0, 1]",
                    self.child
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > CPT_ROW_TOLERANCE {
                return Err(domain(format!(
                    "CPT of variable {} row {j} sums to {sum}",
                    self.child
                )));
            }
        }
        Ok(())
    }
}

/// Variables, structure and optional CPTs.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    variables: Vec<VariableSpec>,
    dag: Dag,
    cpts: Option<Vec<Cpt>>,
}

impl Network {
    pub fn new(variables: Vec<VariableSpec>, dag: Dag, cpts: Option<Vec<Cpt>>) -> Result<Self> {
        if dag.n_vars() != variables.len() {
            return Err(domain(format!(
                "graph has {} variables but {} variable specs were given",
                dag.n_vars(),
                variables.len()
            )));
        }
        let mut seen = HashSet::new();
        for v in &variables {
            if v.name.is_empty() {
                return Err(domain("variable name must be non-empty"));
            }
            if v.cardinality < 2 {
                return Err(domain(format!("variable {:?} has cardinality < 2", v.name)));
            }
            if !seen.insert(v.name.as_str()) {
                return Err(domain(format!("duplicate variable name {:?}", v.name)));
            }
        }
        dag.ensure_acyclic()?;
        let cards: Vec<usize> = variables.iter().map(|v| v.cardinality).collect();
        if let Some(cpts) = &cpts {
            if cpts.len() != variables.len() {
                return Err(domain(format!(
                    "{} CPTs for {} variables",
                    cpts.len(),
                    variables.len()
                )));
            }
            for (i, cpt) in cpts.iter().enumerate() {
                if cpt.child != i {
                    return Err(domain(format!("CPT {i} is labelled for variable {}", cpt.child)));
                }
                cpt.validate(cards[i], parent_config_count(dag.parents(i), &cards))?;
            }
        }
        Ok(Self {
            variables,
            dag,
            cpts,
        })
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn cpts(&self) -> Option<&[Cpt]> {
        self.cpts.as_deref()
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn cards(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.cardinality).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(s)?;
        file.into_network()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NetworkFile::from(self))?)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()? + "\n")?;
        Ok(())
    }
}

/// On-disk network layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub variables: Vec<VariableSpec>,
    pub parents: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpts: Option<Vec<Vec<Vec<f64>>>>,
}

impl NetworkFile {
    pub fn into_network(self) -> Result<Network> {
        let dag = Dag::new(self.parents)?;
        let cpts = self.cpts.map(|tables| {
            tables
                .into_iter()
                .enumerate()
                .map(|(child, rows)| Cpt { child, rows })
                .collect()
        });
        Network::new(self.variables, dag, cpts)
    }
}

impl From<&Network> for NetworkFile {
    fn from(net: &Network) -> Self {
        Self {
            variables: net.variables.clone(),
            parents: net.dag.parent_sets().to_vec(),
            cpts: net
                .cpts
                .as_ref()
                .map(|c| c.iter().map(|t| t.rows.clone()).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parent_config_examples() {
        assert_eq!(parent_config_index(&[], &[]).unwrap(), 0);
        assert_eq!(parent_config_index(&[1, 2], &[2, 3]).unwrap(), 5);
        assert_eq!(parent_config_index(&[0, 0, 0], &[2, 2, 2]).unwrap(), 0);
        assert!(matches!(
            parent_config_index(&[2], &[2]),
            Err(Error::Domain(_))
        ));
        assert!(parent_config_index(&[0], &[]).is_err());
    }

    #[test]
    fn parent_config_is_bijective() {
        for cards in [vec![], vec![2], vec![3, 2], vec![2, 3, 4], vec![4, 4, 4, 4, 4], vec![2; 10]] {
            let q: usize = cards.iter().product();
            assert!(q <= 1024);
            for j in 0..q {
                let states = decode_parent_config(j, &cards);
                assert_eq!(parent_config_index(&states, &cards).unwrap(), j);
            }
        }
    }

    #[test]
    fn num_parameters_examples() {
        let cards = vec![2; 5];
        assert_eq!(num_parameters(&Dag::empty(5), &cards), 5);
        let chain = Dag::from_arcs(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(num_parameters(&chain, &[2, 2, 2]), 5);
        assert_eq!(num_parameters(&Dag::empty(1), &[3]), 2);
    }

    #[test]
    fn acyclicity_examples() {
        assert!(Dag::from_arcs(3, &[(0, 1), (1, 2)]).unwrap().is_acyclic());
        assert!(!Dag::from_arcs(2, &[(0, 1), (1, 0)]).unwrap().is_acyclic());
        assert!(is_acyclic(&Dag::empty(5)));
        assert!(!Dag::from_arcs(3, &[(0, 1), (1, 2), (2, 0)]).unwrap().is_acyclic());
    }

    #[test]
    fn dag_rejects_bad_parent_lists() {
        assert!(Dag::new(vec![vec![0]]).is_err());
        assert!(Dag::new(vec![vec![], vec![0, 0]]).is_err());
        assert!(Dag::new(vec![vec![], vec![], vec![1, 0]]).is_err());
        assert!(Dag::new(vec![vec![3], vec![]]).is_err());
    }

    #[test]
    fn markov_equivalence_examples() {
        let a = Dag::from_arcs(2, &[(0, 1)]).unwrap();
        let b = Dag::from_arcs(2, &[(1, 0)]).unwrap();
        assert!(markov_equivalent(&a, &b));
        let collider = Dag::from_arcs(3, &[(0, 2), (1, 2)]).unwrap();
        let chain = Dag::from_arcs(3, &[(2, 0), (1, 2)]).unwrap();
        assert!(!markov_equivalent(&collider, &chain));
        assert!(markov_equivalent(&collider, &collider.clone()));
        assert!(!markov_equivalent(&Dag::empty(2), &Dag::empty(3)));
    }

    #[test]
    fn adjacency_mask_round_trips() {
        let n = 4;
        for b in 0..n * (n - 1) {
            let (from, to) = pair_from_index(n, b);
            assert_ne!(from, to);
            assert_eq!(pair_index(n, from, to), b);
        }
        let g = Dag::from_arcs(4, &[(0, 1), (2, 1), (3, 0)]).unwrap();
        assert_eq!(Dag::from_adjacency_mask(4, g.adjacency_mask()).unwrap(), g);
        // (0,1) is the least significant pair.
        assert_eq!(Dag::from_arcs(3, &[(0, 1)]).unwrap().adjacency_mask(), 1);
    }

    #[test]
    fn topological_order_respects_arcs() {
        let g = Dag::from_arcs(5, &[(0, 1), (0, 2), (1, 3), (2, 3), (3, 4)]).unwrap();
        let order = g.topological_order().unwrap();
        let pos: Vec<usize> = (0..5).map(|v| order.iter().position(|&x| x == v).unwrap()).collect();
        for (from, to) in g.arcs() {
            assert!(pos[from] < pos[to]);
        }
    }

    #[test]
    fn network_json_round_trip_and_validation() {
        let json = r#"{"variables":[{"name":"a","cardinality":2},{"name":"b","cardinality":3}],
            "parents":[[],[0]],
            "cpts":[[[0.25,0.75]],[[0.2,0.3,0.5],[1.0,0.0,0.0]]]}"#;
        let net = Network::from_json_str(json).unwrap();
        assert_eq!(net.cards(), vec![2, 3]);
        let back = Network::from_json_str(&net.to_json_string().unwrap()).unwrap();
        assert_eq!(back, net);

        let bad_row = json.replace("0.2,0.3,0.5", "0.2,0.3,0.6");
        assert!(Network::from_json_str(&bad_row).is_err());
        let bad_rows = r#"{"variables":[{"name":"a","cardinality":2},{"name":"b","cardinality":2}],
            "parents":[[],[0]], "cpts":[[[0.5,0.5]],[[0.5,0.5]]]}"#;
        assert!(Network::from_json_str(bad_rows).is_err());
        let dup = r#"{"variables":[{"name":"a","cardinality":2},{"name":"a","cardinality":2}],"parents":[[],[]]}"#;
        assert!(Network::from_json_str(dup).is_err());
        let cyclic = r#"{"variables":[{"name":"a","cardinality":2},{"name":"b","cardinality":2}],"parents":[[1],[0]]}"#;
        assert!(Network::from_json_str(cyclic).is_err());
        let unknown = r#"{"variables":[],"parents":[],"extra":1}"#;
        assert!(Network::from_json_str(unknown).is_err());
    }
}
