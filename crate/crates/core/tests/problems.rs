use std::path::Path;

use proptest::prelude::*;
use qaoarl_core::problems::{
    load_problem, random_graph_with_average_degree, random_regular_graph, save_problem, MaxCutProblem,
};

/// Plain enumeration over every assignment, vertex 0 included.
fn brute_force(problem: &MaxCutProblem) -> u32 {
    let n = problem.n_vertices();
    (0u64..1 << n)
        .map(|z| {
            let bits: Vec<bool> = (0..n).map(|i| z >> i & 1 == 1).collect();
            problem.edges().iter().filter(|&&(a, b)| bits[a] != bits[b]).count() as u32
        })
        .max()
        .unwrap()
}

fn arb_problem(max_n: usize) -> impl Strategy<Value = MaxCutProblem> {
    (2usize..=max_n).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        proptest::sample::subsequence(pairs.clone(), 0..=pairs.len())
            .prop_map(move |edges| MaxCutProblem::new(n, edges).unwrap())
    })
}

#[test]
fn exact_matches_brute_force_on_regular_graphs() {
    for n in [4usize, 6, 8, 10, 12, 14, 16] {
        for seed in 0..3 {
            let problem = random_regular_graph(n, 3, seed).unwrap();
            let (best, witness) = problem.exact_maxcut().unwrap();
            assert_eq!(best.get(), brute_force(&problem), "n={n} seed={seed}");
            assert_eq!(problem.cut_value(witness), best);
        }
    }
}

#[test]
fn known_values() {
    let k3 = MaxCutProblem::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
    assert_eq!(k3.exact_maxcut().unwrap().0.get(), 2);
    let k4: Vec<_> = (0..4).flat_map(|a| (a + 1..4).map(move |b| (a, b))).collect();
    assert_eq!(MaxCutProblem::new(4, k4).unwrap().exact_maxcut().unwrap().0.get(), 4);
    let ring: Vec<_> = (0..7).map(|i| (i, (i + 1) % 7)).collect();
    assert_eq!(MaxCutProblem::new(7, ring).unwrap().exact_maxcut().unwrap().0.get(), 6);
}

#[test]
fn generators_are_seeded_and_well_formed() {
    let a = random_regular_graph(10, 3, 7).unwrap();
    assert_eq!(a, random_regular_graph(10, 3, 7).unwrap());
    assert!(a.degrees().iter().all(|&d| d == 3));
    assert_eq!(a.n_edges(), 15);

    let g = random_graph_with_average_degree(21, 3.0, 1).unwrap();
    assert_eq!(g.n_vertices(), 21);
    assert_eq!(g.n_edges(), 32);
    assert_eq!(g, random_graph_with_average_degree(21, 3.0, 1).unwrap());
    assert!(random_regular_graph(7, 3, 0).is_err());
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.txt");
    let problem = random_regular_graph(8, 3, 2).unwrap();
    save_problem(&problem, &path).unwrap();
    assert_eq!(load_problem(&path).unwrap(), problem);
    assert!(load_problem(dir.path().join("missing.txt")).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn exact_agrees_with_enumeration(problem in arb_problem(9)) {
        prop_assert_eq!(problem.exact_maxcut().unwrap().0.get(), brute_force(&problem));
    }

    #[test]
    fn complement_has_equal_cut(problem in arb_problem(10), z in any::<u64>()) {
        let n = problem.n_vertices();
        let z = z & ((1 << n) - 1);
        let flipped = !z & ((1 << n) - 1);
        prop_assert_eq!(problem.cut_value(z), problem.cut_value(flipped));
        prop_assert!(problem.cut_value(z).get() as usize <= problem.n_edges());
    }

    #[test]
    fn text_round_trip(problem in arb_problem(12)) {
        let parsed = MaxCutProblem::parse(&problem.to_text(), Path::new("<mem>")).unwrap();
        prop_assert_eq!(parsed, problem);
    }
}
