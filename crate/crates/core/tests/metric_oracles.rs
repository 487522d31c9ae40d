use std::collections::HashMap;

use histaxo_core::ingest::{dedup_event_types, event_type_frequency, greedy_dedup, rank_by_frequency, EventRecord};
use histaxo_core::metrics::{
    classification_delta, coverage_rate, csc, node_recall, novelty, significance, HeldOutEvent, NodeVectors,
};
use histaxo_core::similarity::cosine;
use histaxo_core::taxonomy::{NodeId, Parent, Provenance, RootMode, Taxonomy, TaxonomyNode};
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DOMAINS: [&str; 3] = ["Politics", "Military", "Nature"];

/// Random forest over up to three domains with `n` nodes in total.
fn random_forest(rng: &mut ChaCha8Rng, n: usize, domains: usize) -> Taxonomy {
    let mut t = Taxonomy::new();
    let mut members: Vec<Vec<NodeId>> = Vec::new();
    for d in DOMAINS.iter().take(domains) {
        let id = NodeId::new(format!("{d}-root"));
        t.add_domain_root(id.clone(), d, "", Provenance::Ingested).unwrap();
        members.push(vec![id]);
    }
    for i in domains..n {
        let d = rng.random_range(0..domains);
        let parent = members[d][rng.random_range(0..members[d].len())].clone();
        let id = NodeId::new(format!("x{i}"));
        t.add_node(
            TaxonomyNode::new(id.clone(), format!("label {i}"), "", DOMAINS[d], Provenance::Ingested),
            Parent::Node(parent),
        )
        .unwrap();
        members[d].push(id);
    }
    t
}

fn random_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn random_vectors(rng: &mut ChaCha8Rng, t: &Taxonomy, dim: usize) -> NodeVectors {
    t.nodes().map(|n| (n.id.clone(), random_vec(rng, dim))).collect()
}

/// Tau-b by explicit concordant / discordant / tie counting over all pairs
/// of pairs, with integer counts.
fn brute_tau_b(w: &[Ratio<u64>], s: &[f64]) -> Option<f64> {
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            let dx = w[i].cmp(&w[j]);
            let dy = s[i].partial_cmp(&s[j]).unwrap();
            use std::cmp::Ordering::Equal;
            match (dx, dy) {
                (Equal, Equal) => {}
                (Equal, _) => tx += 1,
                (_, Equal) => ty += 1,
                (a, b) if a == b => c += 1,
                _ => d += 1,
            }
        }
    }
    let denom = (((c + d + tx) * (c + d + ty)) as f64).sqrt();
    (denom > 0.0).then(|| (c - d) as f64 / denom)
}

fn brute_pairs(t: &Taxonomy, v: &NodeVectors, ids: &[NodeId], mode: RootMode) -> (Vec<Ratio<u64>>, Vec<f64>) {
    let (mut w, mut s) = (Vec::new(), Vec::new());
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let pa = t.path_to_root(&ids[i], mode).unwrap();
            let pb = t.path_to_root(&ids[j], mode).unwrap();
            let lca = pa.iter().zip(&pb).take_while(|(a, b)| a == b).count() as u64;
            w.push(Ratio::new(2 * lca, (pa.len() + pb.len()) as u64));
            let (x, y) = (&v[&ids[i]], &v[&ids[j]]);
            let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            let nx: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            let ny: f64 = y.iter().map(|a| a * a).sum::<f64>().sqrt();
            s.push((dot / (nx * ny)).clamp(-1.0, 1.0));
        }
    }
    (w, s)
}

#[test]
fn csc_matches_brute_force_tau_b_on_200_random_trees() {
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(5..=15);
        let t = random_forest(&mut rng, n, 1);
        let v = random_vectors(&mut rng, &t, 8);
        let got = csc(&t, &v, RootMode::PerDomain).unwrap();
        let ids: Vec<NodeId> = t.nodes().map(|n| n.id.clone()).collect();
        let (w, s) = brute_pairs(&t, &v, &ids, RootMode::PerDomain);
        let want = brute_tau_b(&w, &s).unwrap();
        assert!((got.value - want).abs() < 1e-12, "seed {seed}: {} vs {want}", got.value);
    }
}

#[test]
fn csc_global_and_per_domain_modes_match_oracle() {
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = rng.random_range(8..=15);
        let t = random_forest(&mut rng, n, 3);
        let v = random_vectors(&mut rng, &t, 6);

        let all: Vec<NodeId> = t.preorder_all().into_iter().map(|n| n.id.clone()).collect();
        let (w, s) = brute_pairs(&t, &v, &all, RootMode::Global);
        let global = csc(&t, &v, RootMode::Global).unwrap();
        assert!((global.value - brute_tau_b(&w, &s).unwrap()).abs() < 1e-12);

        let mut taus = Vec::new();
        for d in DOMAINS {
            let ids: Vec<NodeId> = t.domain_nodes(d).into_iter().map(|n| n.id.clone()).collect();
            let (w, s) = brute_pairs(&t, &v, &ids, RootMode::PerDomain);
            if let Some(tau) = brute_tau_b(&w, &s) {
                taus.push(tau);
            }
        }
        match csc(&t, &v, RootMode::PerDomain) {
            Ok(r) => {
                let mean = taus.iter().sum::<f64>() / taus.len() as f64;
                assert!((r.value - mean).abs() < 1e-12);
                assert_eq!(r.per_domain.iter().filter(|s| s.tau.is_some()).count(), taus.len());
            }
            Err(_) => assert!(taus.is_empty()),
        }
    }
}

#[test]
fn csc_ignores_node_relabeling() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let t = random_forest(&mut rng, 14, 1);
    let v = random_vectors(&mut rng, &t, 8);
    let base = csc(&t, &v, RootMode::PerDomain).unwrap().value;

    // rename every node, reversing the id order
    let rename = |id: &NodeId| {
        NodeId::new(format!(
            "z{:03}",
            999 - t.preorder_all().iter().position(|n| &n.id == id).unwrap()
        ))
    };
    let mut relabeled = Taxonomy::new();
    let mut v2 = HashMap::new();
    for node in t.preorder_all() {
        let new_id = rename(&node.id);
        v2.insert(new_id.clone(), v[&node.id].clone());
        match &node.parent {
            None => {
                relabeled
                    .add_domain_root(new_id, &node.domain, "", Provenance::Ingested)
                    .unwrap();
            }
            Some(p) => {
                relabeled
                    .add_node(
                        TaxonomyNode::new(
                            new_id,
                            node.label.as_str(),
                            "",
                            node.domain.as_str(),
                            Provenance::Ingested,
                        ),
                        Parent::Node(rename(p)),
                    )
                    .unwrap();
            }
        }
    }
    let other = csc(&relabeled, &v2, RootMode::PerDomain).unwrap().value;
    assert!((base - other).abs() < 1e-12);
}

fn held_out(rng: &mut ChaCha8Rng, pool: &[Vec<f64>], n: usize, dim: usize) -> Vec<HeldOutEvent> {
    (0..n)
        .map(|i| {
            // half the events sit near an existing vector, half are random
            let vector = if i % 2 == 0 {
                let base = &pool[rng.random_range(0..pool.len())];
                base.iter().map(|x| x + rng.random_range(-0.3..0.3)).collect()
            } else {
                random_vec(rng, dim)
            };
            HeldOutEvent {
                event_type: format!("event {i}"),
                vector,
                domain: None,
            }
        })
        .collect()
}

fn best(v: &NodeVectors, q: &[f64]) -> f64 {
    v.values()
        .map(|x| cosine(x, q).unwrap())
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn coverage_matches_exhaustive_scan() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_forest(&mut rng, 12, 3);
        let v = random_vectors(&mut rng, &t, 5);
        let pool: Vec<Vec<f64>> = v.values().cloned().collect();
        let events = held_out(&mut rng, &pool, 25, 5);
        let hits = events.iter().filter(|e| best(&v, &e.vector) > 0.6).count();
        let r = coverage_rate(&t, &v, &events, 0.6).unwrap();
        assert_eq!(r.covered, hits);
        assert_eq!(r.percent, 100.0 * hits as f64 / 25.0);
        assert_eq!(r.per_domain.values().map(|f| f.total).sum::<usize>(), 25);
    }
}

#[test]
fn self_comparison_identities() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let t = random_forest(&mut rng, 10, 2);
        let v = random_vectors(&mut rng, &t, 6);
        let pool: Vec<Vec<f64>> = v.values().cloned().collect();
        let mut events = held_out(&mut rng, &pool, 20, 6);
        // guarantee a non-empty matched set
        events.push(HeldOutEvent {
            event_type: "exact".into(),
            vector: pool[0].clone(),
            domain: None,
        });
        assert_eq!(node_recall(&t, &v, &t, &v, 0.6).unwrap().percent, 100.0);
        assert_eq!(novelty(&t, &v, &t, &v, 0.6).unwrap().value, 0.0);
        assert_eq!(significance(&t, &v, &t, &v, &events, 0.6).unwrap().value, 0.0);
    }
}

#[test]
fn recall_and_novelty_match_pairwise_oracle() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let g = random_forest(&mut rng, 10, 2);
        let r = random_forest(&mut rng, 9, 3);
        let gv = random_vectors(&mut rng, &g, 3);
        let rv = random_vectors(&mut rng, &r, 3);
        let recalled = rv.values().filter(|x| best(&gv, x) > 0.6).count();
        let novel = gv.values().filter(|x| best(&rv, x) <= 0.6).count();
        let rec = node_recall(&g, &gv, &r, &rv, 0.6).unwrap();
        assert_eq!(rec.recalled, recalled);
        assert_eq!(rec.recalled + (rec.total - rec.recalled), rec.total);
        let nov = novelty(&g, &gv, &r, &rv, 0.6).unwrap();
        assert_eq!(nov.novel, novel);
        assert_eq!(nov.value, novel as f64 / 10.0);
    }
}

#[test]
fn novelty_seven_of_ten() {
    // generated nodes on axes 0..10, reference covers axes 0..3 only
    let mut g = Taxonomy::new();
    g.add_domain_root("g0", "Politics", "", Provenance::Ingested).unwrap();
    for i in 1..10 {
        g.add_node(
            TaxonomyNode::new(
                format!("g{i}").as_str(),
                format!("g{i}"),
                "",
                "Politics",
                Provenance::Ingested,
            ),
            Parent::Node("g0".into()),
        )
        .unwrap();
    }
    let axis = |i: usize| (0..10).map(|j| if j == i { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
    let gv: NodeVectors = (0..10).map(|i| (NodeId::new(format!("g{i}")), axis(i))).collect();
    let mut r = Taxonomy::new();
    r.add_domain_root("r0", "Politics", "", Provenance::Ingested).unwrap();
    for i in 1..3 {
        r.add_node(
            TaxonomyNode::new(
                format!("r{i}").as_str(),
                format!("r{i}"),
                "",
                "Politics",
                Provenance::Ingested,
            ),
            Parent::Node("r0".into()),
        )
        .unwrap();
    }
    let rv: NodeVectors = (0..3).map(|i| (NodeId::new(format!("r{i}")), axis(i))).collect();
    let n = novelty(&g, &gv, &r, &rv, 0.6).unwrap();
    assert_eq!((n.novel, n.total), (7, 10));
    assert_eq!(n.value, 0.7);
    assert_eq!(node_recall(&g, &gv, &r, &rv, 0.6).unwrap().percent, 100.0);
}

#[test]
fn classification_delta_toy_values() {
    assert_eq!(classification_delta(12, 10, 20).unwrap(), 0.1);
    assert_eq!(classification_delta(8, 10, 20).unwrap(), -0.1);
}

#[test]
fn greedy_dedup_matches_quadratic_oracle() {
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut rng, 4)).collect();
        let vecs: Vec<Vec<f64>> = (0..20)
            .map(|_| {
                let c = &centers[rng.random_range(0..4)];
                c.iter().map(|x| x + rng.random_range(-0.4..0.4)).collect()
            })
            .collect();
        let kept = greedy_dedup(&vecs, 0.6).unwrap();
        // oracle: item i survives iff no earlier survivor exceeds the threshold
        let mut alive = vec![false; vecs.len()];
        for i in 0..vecs.len() {
            alive[i] = (0..i).all(|j| !alive[j] || cosine(&vecs[i], &vecs[j]).unwrap() <= 0.6);
        }
        let oracle: Vec<usize> = (0..vecs.len()).filter(|&i| alive[i]).collect();
        assert_eq!(kept, oracle);
        for (a, &i) in kept.iter().enumerate() {
            for &j in &kept[a + 1..] {
                assert!(cosine(&vecs[i], &vecs[j]).unwrap() <= 0.6);
            }
        }
    }
}

#[test]
fn dedup_keeps_most_frequent_then_lexicographic() {
    let ranked = rank_by_frequency(&[("乙".to_string(), 3), ("甲".to_string(), 3), ("丙".to_string(), 9)].into());
    assert_eq!(
        ranked.iter().map(|(l, _)| l.as_str()).collect::<Vec<_>>(),
        ["丙", "乙", "甲"]
    );
    let same = vec![vec![1.0, 0.0]; 3];
    let kept = dedup_event_types(&ranked, &same, 0.6).unwrap();
    assert_eq!(kept, vec![("丙".to_string(), 9)]);
    let orth = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
    assert_eq!(dedup_event_types(&ranked, &orth, 0.6).unwrap().len(), 3);
}

#[test]
fn frequency_is_order_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut events: Vec<EventRecord> = (0..300)
        .map(|i| EventRecord::new(format!("text {i}"), format!("type {}", rng.random_range(0..30))))
        .collect();
    let a = event_type_frequency(&events);
    events.shuffle(&mut rng);
    assert_eq!(event_type_frequency(&events), a);
}
