use essbn::model::{binary_variables, Cpt, VariableSpec};
use essbn::scoring::{bdeu_hyperparams, estimate_parameters, family_score, JointDistribution};
use essbn::{score_structure, Dag, Dataset, Network, ScoreKind, ScoreSpec};
use proptest::prelude::*;

/// Random DAG on `n` nodes: arcs only go forward in the shuffled order.
fn dag_strategy(n: usize) -> impl Strategy<Value = Dag> {
    let pairs = n * n.saturating_sub(1) / 2;
    (Just((0..n).collect::<Vec<_>>()).prop_shuffle(), prop::collection::vec(any::<bool>(), pairs)).prop_map(
        move |(order, bits)| {
            let mut arcs = Vec::new();
            let mut b = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if bits[b] {
                        arcs.push((order[i], order[j]));
                    }
                    b += 1;
                }
            }
            Dag::from_arcs(n, &arcs).unwrap()
        },
    )
}

fn data_strategy(cards: Vec<usize>, max_rows: usize) -> impl Strategy<Value = Dataset> {
    let row = cards.iter().map(|&c| 0..c).collect::<Vec<_>>();
    prop::collection::vec(row, 0..max_rows).prop_map(move |rows| Dataset::from_rows(cards.clone(), &rows).unwrap())
}

fn case() -> impl Strategy<Value = (Dag, Dataset)> {
    (1usize..=4)
        .prop_flat_map(|n| (dag_strategy(n), prop::collection::vec(2usize..=3, n)))
        .prop_flat_map(|(dag, cards)| (Just(dag), data_strategy(cards, 60)))
}

fn alpha() -> impl Strategy<Value = f64> {
    (-3.0f64..3.0).prop_map(|e| 10f64.powf(e))
}

fn specs(a: f64) -> Vec<ScoreSpec> {
    vec![ScoreSpec::ml(), ScoreSpec::bdeu(a), ScoreSpec::bic(), ScoreSpec::nip_bic(a)]
}

proptest! {
    #[test]
    fn total_is_sum_of_family_scores((dag, data) in case(), a in alpha()) {
        prop_assume!(data.n_rows() > 0);
        for spec in specs(a) {
            let scored = score_structure(&data, &dag, &spec).unwrap();
            let sum: f64 = scored.families.iter().map(|f| f.log_score).sum();
            prop_assert!((scored.total - sum).abs() <= 1e-9 * scored.total.abs().max(1.0));
            if matches!(spec.kind, ScoreKind::Ml | ScoreKind::Bdeu) {
                for f in &scored.families {
                    let alone = family_score(&data, f.child, &f.parents, &spec).unwrap();
                    prop_assert!((alone - f.log_score).abs() <= 1e-12 * alone.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn eap_rows_are_distributions((dag, data) in case(), a in alpha()) {
        for spec in [ScoreSpec::ml(), ScoreSpec::bdeu(a)] {
            let est = estimate_parameters(&data, &dag, &spec).unwrap();
            for fam in &est.families {
                for row in fam.rows() {
                    prop_assert!(row.iter().all(|&p| p > 0.0 && p < 1.0));
                    prop_assert!((row.sum() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn row_order_does_not_matter((dag, data) in case(), a in alpha(), seed in any::<u64>()) {
        let mut rows: Vec<Vec<usize>> = data.rows().map(|r| r.iter().map(|&v| v as usize).collect()).collect();
        let n = rows.len();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            rows.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled = Dataset::from_rows(data.cards().to_vec(), &rows).unwrap();
        for spec in [ScoreSpec::ml(), ScoreSpec::bdeu(a)] {
            let x = score_structure(&data, &dag, &spec).unwrap().total;
            let y = score_structure(&shuffled, &dag, &spec).unwrap().total;
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn more_data_lowers_the_marginal_likelihood((dag, data) in case(), a in alpha()) {
        // Each extra row multiplies the evidence by a predictive probability < 1.
        prop_assume!(data.n_rows() > 1);
        let spec = ScoreSpec::bdeu(a);
        let full = score_structure(&data, &dag, &spec).unwrap().total;
        let fewer = score_structure(&data.prefix(data.n_rows() - 1), &dag, &spec).unwrap().total;
        prop_assert!(full < fewer);
    }

    #[test]
    fn adjacency_mask_round_trip(dag in (1usize..=6).prop_flat_map(dag_strategy)) {
        let back = Dag::from_adjacency_mask(dag.n_vars(), dag.adjacency_mask()).unwrap();
        prop_assert_eq!(back, dag);
    }

    #[test]
    fn joint_marginals_are_consistent(ps in prop::collection::vec(0.05f64..0.95, 7)) {
        // Collider x1 -> x3 <- x2.
        let dag = Dag::from_arcs(3, &[(0, 2), (1, 2)]).unwrap();
        let cpts = vec![
            Cpt { child: 0, rows: vec![vec![ps[0], 1.0 - ps[0]]] },
            Cpt { child: 1, rows: vec![vec![ps[1], 1.0 - ps[1]]] },
            Cpt { child: 2, rows: (0..4).map(|j| vec![ps[2 + j], 1.0 - ps[2 + j]]).collect() },
        ];
        let net = Network::new(binary_variables(3), dag, Some(cpts)).unwrap();
        let joint = JointDistribution::new(&net).unwrap();
        prop_assert!((joint.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let fam = joint.family_marginal(2, &[0, 1]);
        let single = joint.family_marginal(0, &[]);
        // Summing x2 and x3 out of the family marginal leaves p(x1).
        for a in 0..2 {
            let m: f64 = (0..2).map(|b| fam.row(a * 2 + b).sum()).sum();
            prop_assert!((m - single[[0, a]]).abs() < 1e-12);
        }
        prop_assert!((single[[0, 0]] - ps[0]).abs() < 1e-12);
        for j in 0..4 {
            let row = fam.row(j);
            prop_assert!((row[0] / row.sum() - ps[2 + j]).abs() < 1e-9);
        }
    }

    #[test]
    fn bdeu_is_bde_with_uniform_hypothetical((dag, data) in case(), a in alpha()) {
        let vars: Vec<VariableSpec> = data
            .names()
            .iter()
            .zip(data.cards())
            .map(|(n, &c)| VariableSpec::new(n.clone(), c).unwrap())
            .collect();
        let n = vars.len();
        let uniform: Vec<Cpt> = (0..n)
            .map(|i| Cpt { child: i, rows: vec![vec![1.0 / data.cards()[i] as f64; data.cards()[i]]] })
            .collect();
        let hyp = Network::new(vars, Dag::empty(n), Some(uniform)).unwrap();
        let bde = score_structure(&data, &dag, &ScoreSpec::bde(a, hyp)).unwrap().total;
        let bdeu = score_structure(&data, &dag, &ScoreSpec::bdeu(a)).unwrap().total;
        prop_assert!((bde - bdeu).abs() <= 1e-9 * bdeu.abs().max(1.0));
        let h = bdeu_hyperparams(a, 3, 4);
        prop_assert!((h.sum() - a).abs() < 1e-12 * a.max(1.0));
    }
}
