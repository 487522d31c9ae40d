use std::collections::BTreeSet;

use histaxo_core::taxonomy::{NodeId, Parent, Provenance, RootMode, Taxonomy, TaxonomyError, TaxonomyNode};
use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Tree with `parents[i] < i + 1` naming the parent of node `n{i+1}`; `n0`
/// is the domain root.
fn build(parents: &[usize], domain: &str) -> Taxonomy {
    let mut t = Taxonomy::new();
    t.add_domain_root("n0", domain, "", Provenance::Ingested).unwrap();
    for (i, &p) in parents.iter().enumerate() {
        let id = format!("n{}", i + 1);
        t.add_node(
            TaxonomyNode::new(id.as_str(), id.as_str(), "", domain, Provenance::Ingested),
            Parent::Node(NodeId::new(format!("n{p}"))),
        )
        .unwrap();
    }
    t
}

fn random_parents(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    (1..n).map(|i| rng.random_range(0..i)).collect()
}

fn arb_parents(max: usize) -> impl Strategy<Value = Vec<usize>> {
    (1..max).prop_flat_map(|n| (1..n).map(|i| (0..i).boxed()).collect::<Vec<_>>())
}

/// Parent walk written against the raw node records.
fn naive_path(t: &Taxonomy, id: &NodeId) -> Vec<NodeId> {
    let mut out = vec![id.clone()];
    while let Some(p) = t.node(out.last().unwrap()).unwrap().parent.clone() {
        out.push(p);
    }
    out.reverse();
    out
}

fn ids(t: &Taxonomy) -> Vec<NodeId> {
    t.nodes().map(|n| n.id.clone()).collect()
}

#[test]
fn path_and_lca_match_naive_walk_on_random_12_node_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let parents = random_parents(&mut rng, 12);
        let t = build(&parents, "Politics");
        for a in ids(&t) {
            let path = t.path_to_root(&a, RootMode::PerDomain).unwrap();
            assert_eq!(path, naive_path(&t, &a));
            assert_eq!(path[0], NodeId::from("n0"));
            for b in ids(&t) {
                let pb = naive_path(&t, &b);
                let prefix = path.iter().zip(&pb).take_while(|(x, y)| x == y).count();
                assert_eq!(t.lca_depth(&a, &b, RootMode::PerDomain).unwrap(), prefix);
                assert_eq!(t.lca_depth(&a, &b, RootMode::Global).unwrap(), prefix + 1);
            }
        }
    }
}

#[test]
fn depth_four_path() {
    let t = build(&[0, 1, 2], "Military");
    let path = t.path_to_root(&"n3".into(), RootMode::PerDomain).unwrap();
    assert_eq!(path, vec!["n0".into(), "n1".into(), "n2".into(), NodeId::from("n3")]);
}

#[test]
fn structure_weight_fixtures() {
    // n0 ─ n1 ─ n3, n0 ─ n2
    let t = build(&[0, 0, 1], "Ritual");
    let w = |a: &str, b: &str| t.structure_weight(&a.into(), &b.into(), RootMode::PerDomain).unwrap();
    assert_eq!(w("n3", "n3"), Ratio::from_integer(1));
    assert_eq!(w("n1", "n2"), Ratio::new(1, 2));
    assert_eq!(w("n1", "n3"), Ratio::new(4, 5));
}

#[test]
fn lca_across_domains_needs_global_mode() {
    let mut t = build(&[0], "Politics");
    t.add_domain_root("m0", "Nature", "", Provenance::Ingested).unwrap();
    assert!(matches!(
        t.lca_depth(&"n1".into(), &"m0".into(), RootMode::PerDomain),
        Err(TaxonomyError::NoCommonRoot(..))
    ));
    assert_eq!(t.lca_depth(&"n1".into(), &"m0".into(), RootMode::Global).unwrap(), 1);
    assert_eq!(
        t.structure_weight(&"n1".into(), &"m0".into(), RootMode::Global)
            .unwrap(),
        Ratio::new(2, 5)
    );
}

#[test]
fn merge_into_own_descendant_is_rejected() {
    let mut t = build(&[0, 1, 2], "Society");
    let before = t.clone();
    for (keep, drop) in [("n3", "n1"), ("n2", "n1"), ("n1", "n1")] {
        let descendants = t.descendants(&drop.into());
        assert!(keep == drop || descendants.contains(&keep.into()));
        assert!(matches!(
            t.merge_nodes(&keep.into(), &drop.into()),
            Err(TaxonomyError::WouldCreateCycle { .. })
        ));
    }
    assert_eq!(t, before);
}

#[test]
fn merge_moves_children_and_records_alias() {
    // n0 ─ n1, n0 ─ n2 ─ {n3, n4, n5}
    let mut t = build(&[0, 0, 2, 2, 2], "Economy-Livelihood");
    let record = t.merge_nodes(&"n1".into(), &"n2".into()).unwrap();
    assert_eq!(record.moved_children.len(), 3);
    assert_eq!(t.children(&"n1".into()).len(), 3);
    assert_eq!(t.len(), 5);
    assert_eq!(t.node(&"n1".into()).unwrap().aliases, vec!["n2".to_string()]);
    assert!(t.validate().is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn structure_weight_symmetric_and_bounded(parents in arb_parents(200), a in any::<prop::sample::Index>(), b in any::<prop::sample::Index>()) {
        let t = build(&parents, "Diplomacy");
        let all = ids(&t);
        let (a, b) = (a.get(&all), b.get(&all));
        for mode in [RootMode::PerDomain, RootMode::Global] {
            let wab = t.structure_weight(a, b, mode).unwrap();
            prop_assert_eq!(wab, t.structure_weight(b, a, mode).unwrap());
            prop_assert!(wab <= Ratio::from_integer(1));
            prop_assert!(wab > Ratio::from_integer(0));
            prop_assert_eq!(t.structure_weight(a, a, mode).unwrap(), Ratio::from_integer(1));
        }
    }

    #[test]
    fn path_length_is_depth(parents in arb_parents(60)) {
        let t = build(&parents, "Individual");
        for id in ids(&t) {
            let d = t.depth(&id, RootMode::PerDomain).unwrap();
            prop_assert_eq!(t.path_to_root(&id, RootMode::PerDomain).unwrap().len(), d);
            prop_assert_eq!(t.depth(&id, RootMode::Global).unwrap(), d + 1);
        }
    }

    #[test]
    fn merge_preserves_descendants_minus_dropped(parents in arb_parents(40), k in any::<prop::sample::Index>(), d in any::<prop::sample::Index>()) {
        let mut t = build(&parents, "Nature");
        let all: Vec<NodeId> = ids(&t).into_iter().filter(|i| i.as_str() != "n0").collect();
        prop_assume!(all.len() >= 2);
        let keep = k.get(&all).clone();
        let drop = d.get(&all).clone();
        prop_assume!(keep != drop && !t.is_in_subtree(&keep, &drop));
        let root = NodeId::from("n0");
        let before: BTreeSet<NodeId> = t.descendants(&root).into_iter().collect();
        let drop_subtree: BTreeSet<NodeId> = t.descendants(&drop).into_iter().collect();
        t.merge_nodes(&keep, &drop).unwrap();
        let after: BTreeSet<NodeId> = t.descendants(&root).into_iter().collect();
        let mut expected = before;
        expected.remove(&drop);
        prop_assert_eq!(after, expected);
        let kept_subtree: BTreeSet<NodeId> = t.descendants(&keep).into_iter().collect();
        for moved in drop_subtree.iter().filter(|x| **x != drop) {
            prop_assert!(kept_subtree.contains(moved));
        }
        prop_assert!(t.validate().is_empty());
    }

    #[test]
    fn document_round_trip(parents in arb_parents(40)) {
        let t = build(&parents, "Politics");
        let json = t.to_json();
        let back = Taxonomy::from_json(&json).unwrap();
        prop_assert_eq!(back.to_json(), json);
    }
}

#[test]
fn structural_stats_fixture_tree() {
    // root ─ A, B, C; C ─ C1, C2
    let t = build(&[0, 0, 0, 3, 3], "Politics");
    let s = t.structural_stats(RootMode::PerDomain).unwrap();
    assert_eq!((s.max_depth, s.avg_depth, s.branch_factor), (3, 2.5, 2.5));
    let flat = build(&[0, 0, 0], "Politics");
    let s = flat.structural_stats(RootMode::PerDomain).unwrap();
    assert_eq!((s.max_depth, s.avg_depth, s.branch_factor), (2, 2.0, 3.0));
}
