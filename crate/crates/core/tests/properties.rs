mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lsts::graph::{compile, dag_accepts, discarded_edges, prune_unreachable, EdgeId, NodeId};
use lsts::spec::{parse_spec, sat_spec, AtomLiteral, LabelSet, LabelTrace, Predicate, SpecAst};

fn literal() -> impl Strategy<Value = Predicate> {
    (prop::sample::select(vec!["a", "b", "c", "d"]), any::<bool>())
        .prop_map(|(n, neg)| Predicate::Literal(AtomLiteral::new(n, neg).unwrap()))
}

fn predicate() -> impl Strategy<Value = Predicate> {
    literal().prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.and(b)),
            (inner.clone(), inner).prop_map(|(a, b)| a.or(b)),
        ]
    })
}

fn spec() -> impl Strategy<Value = SpecAst> {
    predicate().prop_map(SpecAst::achieve).prop_recursive(3, 8, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.then(b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.or(b)),
            (inner, predicate()).prop_map(|(a, p)| a.ensuring(p)),
        ]
    })
}

fn trace(max_len: usize) -> impl Strategy<Value = LabelTrace> {
    prop::collection::vec(0u8..16, 1..=max_len).prop_map(|masks| {
        masks
            .into_iter()
            .map(|m| LabelSet::from_atoms(["a", "b", "c", "d"].iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, a)| *a)).unwrap())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_parse_round_trip(phi in spec()) {
        prop_assert_eq!(parse_spec(&phi.to_string()).unwrap(), phi);
    }

    #[test]
    fn or_is_symmetric(a in spec(), b in spec(), t in trace(6)) {
        let ab = a.clone().or(b.clone());
        let ba = b.or(a);
        prop_assert_eq!(sat_spec(&ab, &t).unwrap(), sat_spec(&ba, &t).unwrap());
        prop_assert_eq!(dag_accepts(&compile(&ab).unwrap(), &t), dag_accepts(&compile(&ba).unwrap(), &t));
    }

    #[test]
    fn satisfaction_survives_extension(phi in spec(), t in trace(5), tail in trace(3)) {
        if sat_spec(&phi, &t).unwrap() {
            let mut longer = t.clone();
            longer.steps.extend(tail.steps);
            prop_assert!(sat_spec(&phi, &longer).unwrap());
        }
    }

    #[test]
    fn achieve_holds_once_its_predicate_does(b in predicate(), t in trace(6)) {
        let phi = SpecAst::achieve(b.clone());
        let expected = t.steps.iter().any(|l| b.eval(l));
        prop_assert_eq!(sat_spec(&phi, &t).unwrap(), expected);
    }

    #[test]
    fn nested_ensuring_is_conjunction(phi in spec(), b1 in predicate(), b2 in predicate(), t in trace(6)) {
        let nested = phi.clone().ensuring(b1.clone()).ensuring(b2.clone());
        let joined = phi.ensuring(b1.and(b2));
        prop_assert_eq!(sat_spec(&nested, &t).unwrap(), sat_spec(&joined, &t).unwrap());
    }

    #[test]
    fn compiled_graph_agrees_with_semantics(phi in spec(), t in trace(6)) {
        let g = compile(&phi).unwrap();
        prop_assert_eq!(dag_accepts(&g, &t), sat_spec(&phi, &t).unwrap());
    }

    #[test]
    fn compiled_graph_is_pruned_and_topological(phi in spec()) {
        let g = compile(&phi).unwrap();
        prop_assert!(g.edges.iter().all(|e| e.src < e.dst));
        prop_assert_eq!(g.q0, NodeId(0));
        prop_assert_eq!(&prune_unreachable(&g), &g);
    }

    #[test]
    fn prune_is_idempotent(seed in any::<u64>()) {
        let g = common::random_dag(&mut ChaCha8Rng::seed_from_u64(seed), 8);
        let once = prune_unreachable(&g);
        prop_assert_eq!(prune_unreachable(&once), once);
    }
}

#[test]
fn discard_matches_path_oracle_on_random_dags() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let g = common::random_dag(&mut rng, 8);
        let p = NodeId(rng.gen_range(0..g.node_count));
        let learned: BTreeSet<EdgeId> = g.edge_ids().filter(|_| rng.gen_bool(0.3)).collect();
        assert_eq!(discarded_edges(&g, p, &learned), common::discard_oracle(&g, p, &learned), "{g:?} p={p}");
    }
}

#[test]
fn teacher_recursion_matches_closed_form() {
    let err = common::teacher_recursion_error(&mut ChaCha8Rng::seed_from_u64(9), 10_000);
    assert!(err < 1e-12, "{err}");
}
