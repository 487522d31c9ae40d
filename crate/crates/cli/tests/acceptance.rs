//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use histaxo_core::editlog::EditLog;
use histaxo_core::ingest::EventRecord;
use histaxo_core::metrics::{coverage_rate, csc, node_recall, novelty, significance, HeldOutEvent, NodeVectors};
use histaxo_core::report::render_structural_table;
use histaxo_core::{NodeId, Parent, Provenance, RootMode, StructuralStats, Taxonomy, TaxonomyNode};
use histaxo_gateway::{AgentRole, Gateway, MockProvider, RoleName};
use histaxo_pipeline::enricher::collect_frequent;
use histaxo_pipeline::evaluate::{held_out_events, node_vectors};
use histaxo_pipeline::expander::{dedup_pass, find_duplicate_pairs, DedupScope};
use histaxo_pipeline::{ProviderMode, RunConfig};
use num_rational::Ratio;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const H: f64 = 0.6;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn synthetic(rel: &str) -> PathBuf {
    repo().join("data/synthetic").join(rel)
}

fn mock(seed: u64, fixture: Value) -> Gateway {
    Gateway::mock(MockProvider::from_json(seed, &fixture.to_string()).expect("fixture parses")).with_parallelism(4)
}

fn judger() -> AgentRole {
    AgentRole::new(RoleName::Judger, "mock", "judge", Some(0.0))
}

/// dot / sqrt(|u|² |v|²), written out independently of the library.
fn cos(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let uu: f64 = u.iter().map(|a| a * a).sum();
    let vv: f64 = v.iter().map(|a| a * a).sum();
    dot / (uu * vv).sqrt()
}

/// Single-domain random tree with `n` nodes; ids `t0` (root) .. `t{n-1}`.
fn random_tree(rng: &mut ChaCha8Rng, n: usize, domain: &str) -> Taxonomy {
    let mut t = Taxonomy::new();
    t.add_domain_root("t0", domain, "", Provenance::Ingested).unwrap();
    for i in 1..n {
        let parent = format!("t{}", rng.random_range(0..i));
        t.add_node(
            TaxonomyNode::new(
                format!("t{i}").as_str(),
                format!("{domain} 節點 {i}"),
                "",
                domain,
                Provenance::Ingested,
            ),
            Parent::Node(parent.as_str().into()),
        )
        .unwrap();
    }
    t
}

fn embed_nodes(g: &Gateway, t: &Taxonomy) -> NodeVectors {
    node_vectors(g, t).unwrap()
}

// 1 ──────────────────────────────────────────────────────────────────────

/// Tau-b from explicit concordant, discordant and tie counts.
fn tau_b_oracle(w: &[Ratio<u64>], s: &[f64]) -> f64 {
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            let x = w[i].cmp(&w[j]) as i8;
            let y = s[i].partial_cmp(&s[j]).unwrap() as i8;
            match (x, y) {
                (0, 0) => {}
                (0, _) => tx += 1,
                (_, 0) => ty += 1,
                _ if x == y => c += 1,
                _ => d += 1,
            }
        }
    }
    (c - d) as f64 / (((c + d + tx) * (c + d + ty)) as f64).sqrt()
}

fn weight_oracle(t: &Taxonomy, a: &NodeId, b: &NodeId) -> Ratio<u64> {
    let chain = |id: &NodeId| {
        let mut out = vec![id.clone()];
        while let Some(p) = t.node(out.last().unwrap()).unwrap().parent.clone() {
            out.push(p);
        }
        out.reverse();
        out
    };
    let (pa, pb) = (chain(a), chain(b));
    let lca = pa.iter().zip(&pb).take_while(|(x, y)| x == y).count() as u64;
    Ratio::new(2 * lca, (pa.len() + pb.len()) as u64)
}

fn criterion_1() {
    let started = Instant::now();
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(5..=15);
        let t = random_tree(&mut rng, n, "Politics");
        let v = embed_nodes(&mock(seed, json!({"dim": 16})), &t);
        let ids: Vec<NodeId> = t.nodes().map(|n| n.id.clone()).collect();
        let (mut w, mut s) = (Vec::new(), Vec::new());
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                w.push(weight_oracle(&t, &ids[i], &ids[j]));
                s.push(cos(&v[&ids[i]], &v[&ids[j]]));
            }
        }
        let want = tau_b_oracle(&w, &s);
        let got = csc(&t, &v, RootMode::PerDomain).unwrap().value;
        assert!((got - want).abs() < 1e-12, "seed {seed}: csc {got}, oracle {want}");
    }
    assert!(
        started.elapsed() < Duration::from_secs(10),
        "took {:?}",
        started.elapsed()
    );
}

// 2 ──────────────────────────────────────────────────────────────────────

fn fixture_tree() -> Taxonomy {
    Taxonomy::from_json(&fs::read_to_string(repo().join("data/fixtures/stats_tree.json")).unwrap()).unwrap()
}

fn criterion_2() {
    let t = fixture_tree();
    let w = |a: &str, b: &str| t.structure_weight(&a.into(), &b.into(), RootMode::PerDomain).unwrap();
    for id in ["military", "m-a", "m-c", "m-c2"] {
        assert_eq!(w(id, id), Ratio::from_integer(1));
    }
    assert_eq!(w("m-a", "m-b"), Ratio::new(1, 2));
    assert_eq!(w("m-c", "m-c1"), Ratio::new(4, 5));

    let mut runner = TestRunner::new(PropConfig {
        cases: 128,
        failure_persistence: None,
        ..PropConfig::default()
    });
    runner
        .run(&(any::<u64>(), 2usize..30), |(seed, n)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_tree(&mut rng, n, "Nature");
            let ids: Vec<NodeId> = t.nodes().map(|n| n.id.clone()).collect();
            for a in &ids {
                for b in &ids {
                    let ab = t.structure_weight(a, b, RootMode::PerDomain).unwrap();
                    let ba = t.structure_weight(b, a, RootMode::PerDomain).unwrap();
                    prop_assert_eq!(ab, ba);
                    prop_assert!(ab <= Ratio::from_integer(1));
                    prop_assert_eq!(ab == Ratio::from_integer(1), a == b);
                    prop_assert_eq!(ab, weight_oracle(&t, a, b));
                }
            }
            Ok(())
        })
        .unwrap();
}

// 3 ──────────────────────────────────────────────────────────────────────

fn criterion_3() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let (n, m) = (rng.random_range(6..15), rng.random_range(3..8));
        let mut t = random_tree(&mut rng, n, "Society");
        let extra = random_tree(&mut rng, m, "Ritual");
        for n in extra.preorder_all() {
            let id = format!("r{}", n.id.as_str());
            match &n.parent {
                None => {
                    t.add_domain_root(id.as_str(), "Ritual", "", Provenance::Ingested)
                        .unwrap();
                }
                Some(p) => {
                    let node = TaxonomyNode::new(id.as_str(), n.label.as_str(), "", "Ritual", Provenance::Ingested);
                    t.add_node(node, Parent::Node(format!("r{}", p.as_str()).as_str().into()))
                        .unwrap();
                }
            }
        }
        let labels: Vec<String> = t.nodes().map(|n| n.label.clone()).collect();
        let mut emb = serde_json::Map::new();
        let mut events = Vec::new();
        for i in 0..15 {
            let name = format!("留出事件 {seed}-{i}");
            if i % 3 != 2 {
                let base = &labels[rng.random_range(0..labels.len())];
                emb.insert(
                    name.clone(),
                    json!({"near": base, "similarity": rng.random_range(0.65..0.99)}),
                );
            }
            events.push(EventRecord::new(format!("{name}之文"), name.as_str()));
        }
        let g = mock(seed, json!({"dim": 32, "embeddings": emb}));
        let v = embed_nodes(&g, &t);
        let held = held_out_events(&g, &events).unwrap();
        assert_eq!(node_recall(&t, &v, &t, &v, H).unwrap().percent, 100.0);
        assert_eq!(novelty(&t, &v, &t, &v, H).unwrap().value, 0.0);
        assert_eq!(significance(&t, &v, &t, &v, &held, H).unwrap().value, 0.0);
    }

    // generated uses 8 distinct nodes for 20 matched events, reference 10
    let axis = |k: usize| -> Vec<f64> { (0..20).map(|j| if j == k { 1.0 } else { 0.0 }).collect() };
    let flat = |prefix: &str, n: usize| {
        let mut t = Taxonomy::new();
        t.add_domain_root(format!("{prefix}root").as_str(), "Politics", "", Provenance::Ingested)
            .unwrap();
        let mut v: NodeVectors = HashMap::new();
        v.insert(format!("{prefix}root").as_str().into(), axis(19));
        for k in 0..n {
            let id = format!("{prefix}{k}");
            t.add_node(
                TaxonomyNode::new(id.as_str(), id.as_str(), "", "Politics", Provenance::Ingested),
                Parent::Node(format!("{prefix}root").as_str().into()),
            )
            .unwrap();
            v.insert(id.as_str().into(), axis(k));
        }
        (t, v)
    };
    let (g, gv) = flat("c", 8);
    let (r, rv) = flat("t", 10);
    let events: Vec<HeldOutEvent> = (0..20)
        .map(|i| {
            let k = i % 10;
            let mut vector = axis(k);
            if k >= 8 {
                // reference picks axis k (0.75); generated falls back to axis k-8 (0.66)
                vector[k] = 0.75;
                vector[k - 8] = (1.0f64 - 0.75 * 0.75).sqrt();
            }
            HeldOutEvent {
                event_type: format!("e{i}"),
                vector,
                domain: None,
            }
        })
        .collect();
    let s = significance(&g, &gv, &r, &rv, &events, H).unwrap();
    assert_eq!((s.distinct_generated, s.distinct_reference, s.matched), (8, 10, 20));
    assert_eq!(s.value, -0.1);
}

// 4 ──────────────────────────────────────────────────────────────────────

fn criterion_4() {
    let mut events = Vec::new();
    for (ty, n) in [("遣使", 5), ("出兵", 6), ("朝貢", 4)] {
        for i in 0..n {
            events.push(EventRecord::new(format!("{ty}{i}"), ty));
        }
    }
    let freq: Vec<String> = collect_frequent(&events, 5).into_iter().map(|c| c.label).collect();
    assert_eq!(freq, ["出兵"]);

    let g = mock(
        4,
        json!({"dim": 4, "embeddings": {
            "甲": [3.0, 4.0, 0.0, 0.0],
            "乙": [5.0, 0.0, 0.0, 0.0],
            "丙": [3.0001, 4.0, 0.0, 0.0]
        }}),
    );
    let v = g
        .embed(&["甲".to_string(), "乙".to_string(), "丙".to_string()])
        .unwrap();
    assert_eq!(cos(&v[0].values, &v[1].values), 0.6);
    let exact = [
        (NodeId::new("a"), v[0].values.as_slice()),
        (NodeId::new("b"), v[1].values.as_slice()),
    ];
    assert!(find_duplicate_pairs(&exact, H).unwrap().is_empty());
    let above = [
        (NodeId::new("b"), v[1].values.as_slice()),
        (NodeId::new("c"), v[2].values.as_slice()),
    ];
    assert_eq!(find_duplicate_pairs(&above, H).unwrap().len(), 1);

    let mut t = Taxonomy::new();
    t.add_domain_root("root", "Military", "", Provenance::Induced).unwrap();
    for (id, label) in [("a", "甲"), ("b", "乙")] {
        t.add_node(
            TaxonomyNode::new(id, label, "", "Military", Provenance::Induced),
            Parent::Node("root".into()),
        )
        .unwrap();
    }
    let mut vectors = NodeVectors::new();
    let mut log = EditLog::new();
    let counts = dedup_pass(&g, &judger(), &mut t, &mut vectors, DedupScope::All, H, &mut log).unwrap();
    assert_eq!(counts.pairs, 0);
    assert_eq!(t.len(), 3);
}

// 5 ──────────────────────────────────────────────────────────────────────

fn run_pipeline(dir: &Path) -> Duration {
    let started = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_histaxo"))
        .args(["pipeline", "--mock", "--seed", "7", "--fixtures"])
        .arg(synthetic("fixtures"))
        .arg("--config")
        .arg(synthetic("config.toml"))
        .arg("--events")
        .arg(synthetic("events.jsonl"))
        .arg("--topics")
        .arg(synthetic("topics.json"))
        .arg("--relations")
        .arg(synthetic("relations.json"))
        .arg("--run-dir")
        .arg(dir)
        .output()
        .unwrap();
    let elapsed = started.elapsed();
    assert!(
        out.status.success(),
        "pipeline failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    elapsed
}

fn tree_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn load(path: &Path) -> Taxonomy {
    Taxonomy::from_json(&fs::read_to_string(path).unwrap()).unwrap()
}

fn criterion_5() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let took = run_pipeline(dir);
        assert!(took < Duration::from_secs(60), "pipeline took {took:?}");
    }
    let (fa, fb) = (tree_files(&a), tree_files(&b));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (k, bytes) in &fa {
        assert!(bytes == &fb[k], "{} differs between runs", k.display());
    }

    let induced = load(&a.join("1-induce/taxonomy.json"));
    let expanded = load(&a.join("2-expand/taxonomy.json"));
    let last = load(&a.join("taxonomy.json"));
    let types: BTreeSet<String> = fs::read_to_string(synthetic("events.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<EventRecord>(l).unwrap().event_type)
        .collect();
    assert!(types.len() >= 55 && last.domains().len() == 8, "corpus shape");

    for t in [&induced, &expanded, &last] {
        assert!(t.validate().is_empty(), "{:?}", t.validate());
        // unique ids and acyclic parent chains, checked on the document
        let doc: Value = serde_json::from_str(&t.to_json()).unwrap();
        let mut parent: HashMap<String, Option<String>> = HashMap::new();
        for d in doc["domains"].as_array().unwrap() {
            for n in d["nodes"].as_array().unwrap() {
                let id = n["id"].as_str().unwrap().to_string();
                assert!(
                    parent.insert(id, n["parent_id"].as_str().map(String::from)).is_none(),
                    "duplicate id"
                );
            }
        }
        for start in parent.keys() {
            let mut cur = Some(start.clone());
            let mut steps = 0;
            while let Some(c) = cur {
                steps += 1;
                assert!(steps <= parent.len(), "cycle through {start}");
                cur = parent[&c].clone();
            }
        }
        for d in t.domains() {
            assert!(t.children(&d.root).len() < 10, "{} top level too wide", d.name);
        }
    }

    // every induced leaf survives expansion as a label or a merge alias
    let induced_leaves: BTreeSet<String> = induced
        .leaves()
        .into_iter()
        .filter(|n| n.parent.is_some())
        .map(|n| n.label.clone())
        .collect();
    assert_eq!(induced_leaves, types);
    for t in [&expanded, &last] {
        let known: HashSet<&str> = t
            .nodes()
            .flat_map(|n| std::iter::once(n.label.as_str()).chain(n.aliases.iter().map(String::as_str)))
            .collect();
        for l in &induced_leaves {
            assert!(known.contains(l.as_str()), "leaf {l} lost");
        }
    }

    let mode = ProviderMode::Mock {
        seed: 7,
        fixtures: Some(synthetic("fixtures")),
    };
    let g = RunConfig::default().gateway(&mode).unwrap();
    for t in [&expanded, &last] {
        let v = embed_nodes(&g, t);
        let ids: Vec<&NodeId> = t.nodes().filter(|n| n.parent.is_some()).map(|n| &n.id).collect();
        for (i, x) in ids.iter().enumerate() {
            for y in &ids[i + 1..] {
                let s = cos(&v[*x], &v[*y]);
                assert!(s <= H, "{x} and {y} survive at {s}");
            }
        }
    }

    assert!(last.len() >= expanded.len());
    for n in expanded.nodes() {
        let after = last
            .node(&n.id)
            .unwrap_or_else(|| panic!("{} removed by enrichment", n.id));
        assert_eq!(after.parent, n.parent);
    }
}

// 6 ──────────────────────────────────────────────────────────────────────

fn criterion_6() {
    let mut merged = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let n = rng.random_range(6..20);
        let mut emb = serde_json::Map::new();
        let mut t = Taxonomy::new();
        t.add_domain_root("root", "Military", "", Provenance::Induced).unwrap();
        for i in 0..n {
            let label = format!("條目{i}");
            if i > 0 && rng.random_bool(0.6) {
                let base = format!("條目{}", rng.random_range(0..i));
                let mut s: f64 = rng.random_range(0.3..0.98);
                if (s - H).abs() < 1e-3 {
                    s += 0.01;
                }
                emb.insert(label.clone(), json!({"near": base, "similarity": s}));
            }
            t.add_node(
                TaxonomyNode::new(format!("n{i:02}").as_str(), label, "", "Military", Provenance::Induced),
                Parent::Node("root".into()),
            )
            .unwrap();
        }
        let g = mock(
            seed,
            json!({"dim": 24, "embeddings": emb, "chat": {"judge": [{"reply": {"keep": "A"}}]}}),
        );
        let v = embed_nodes(&g, &t);

        // oracle: all pairs by descending cosine, keep the smaller id
        let ids: Vec<NodeId> = t.nodes().filter(|n| n.parent.is_some()).map(|n| n.id.clone()).collect();
        let mut pairs = Vec::new();
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                let (a, b) = if ids[i] < ids[j] {
                    (&ids[i], &ids[j])
                } else {
                    (&ids[j], &ids[i])
                };
                let s = cos(&v[a], &v[b]);
                if s > H {
                    pairs.push((s, a.clone(), b.clone()));
                }
            }
        }
        pairs.sort_by(|x, y| {
            y.0.total_cmp(&x.0)
                .then_with(|| x.1.cmp(&y.1))
                .then_with(|| x.2.cmp(&y.2))
        });
        let mut alive: BTreeSet<NodeId> = ids.iter().cloned().collect();
        for (_, a, b) in &pairs {
            if alive.contains(a) && alive.contains(b) {
                alive.remove(b);
            }
        }

        let mut vectors = NodeVectors::new();
        let mut log = EditLog::new();
        dedup_pass(&g, &judger(), &mut t, &mut vectors, DedupScope::All, H, &mut log).unwrap();
        let survivors: BTreeSet<NodeId> = t.nodes().filter(|n| n.parent.is_some()).map(|n| n.id.clone()).collect();
        assert_eq!(survivors, alive, "seed {seed}");
        merged += ids.len() - alive.len();
    }
    assert!(merged > 50, "oracle exercised only {merged} merges");
}

// 7 ──────────────────────────────────────────────────────────────────────

fn criterion_7() {
    let out = Command::new(env!("CARGO_BIN_EXE_histaxo"))
        .args(["stats", "--format", "json", "--taxonomy"])
        .arg(repo().join("data/fixtures/stats_tree.json"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let s: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(s["max_depth"], 3);
    assert_eq!(s["avg_depth"], 2.5);
    assert_eq!(s["branch_factor"], 2.5);
    let st = fixture_tree().structural_stats(RootMode::PerDomain).unwrap();
    assert_eq!((st.max_depth, st.avg_depth, st.branch_factor), (3, 2.5, 2.5));

    let rows: Vec<Value> =
        serde_json::from_str(&fs::read_to_string(repo().join("data/reference/structural_stats.json")).unwrap())
            .unwrap();
    let stats: Vec<(String, StructuralStats)> = rows
        .iter()
        .map(|r| {
            (
                r["name"].as_str().unwrap().to_string(),
                StructuralStats {
                    max_depth: r["max_depth"].as_u64().unwrap() as usize,
                    avg_depth: r["avg_depth"].as_f64().unwrap(),
                    branch_factor: r["branch_factor"].as_f64().unwrap(),
                },
            )
        })
        .collect();
    let borrowed: Vec<(&str, StructuralStats)> = stats.iter().map(|(n, s)| (n.as_str(), *s)).collect();
    let golden = fs::read_to_string(repo().join("data/golden/structural_stats.md")).unwrap();
    assert_eq!(render_structural_table(&borrowed), golden);
    assert!(golden.contains("| CHisAgent | 6 | 3.93 | 2.43 |"));
}

// 8 ──────────────────────────────────────────────────────────────────────

fn criterion_8() {
    let (mut any_miss, mut any_near_hit) = (false, false);
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(800 + seed);
        let t = random_tree(&mut rng, 14, "Diplomacy");
        let labels: Vec<String> = t.nodes().map(|n| n.label.clone()).collect();
        let mut emb = serde_json::Map::new();
        let mut events = Vec::new();
        for i in 0..25 {
            let name = match i % 3 {
                0 => labels[rng.random_range(0..labels.len())].clone(),
                1 => {
                    let name = format!("近似 {i}");
                    let mut s: f64 = rng.random_range(0.35..0.95);
                    if (s - H).abs() < 1e-3 {
                        s += 0.01;
                    }
                    emb.insert(
                        name.clone(),
                        json!({"near": labels[rng.random_range(0..labels.len())], "similarity": s}),
                    );
                    name
                }
                _ => format!("無關 {i}"),
            };
            events.push(EventRecord::new(format!("{name}之文"), name.as_str()));
        }
        let g = mock(seed, json!({"dim": 48, "embeddings": emb}));
        let v = embed_nodes(&g, &t);
        let held = held_out_events(&g, &events).unwrap();
        let distinct = held.len();
        let hits = held
            .iter()
            .filter(|e| v.values().map(|x| cos(x, &e.vector)).fold(f64::NEG_INFINITY, f64::max) > H)
            .count();
        let r = coverage_rate(&t, &v, &held, H).unwrap();
        assert_eq!((r.covered, r.total), (hits, distinct), "seed {seed}");
        assert_eq!(r.percent, 100.0 * hits as f64 / distinct as f64);
        any_miss |= hits < distinct;
        any_near_hit |= hits > 9;
    }
    assert!(any_miss && any_near_hit, "coverage cases were one-sided");
}

fn main() {
    let criteria: [(&str, fn()); 8] = [
        ("CSC equals brute-force tau-b on 200 random trees", criterion_1),
        ("structure-weight truths and properties", criterion_2),
        ("metric identities and significance sign", criterion_3),
        ("strict threshold semantics", criterion_4),
        ("pipeline invariants end-to-end, deterministic", criterion_5),
        ("dedup survivors match greedy oracle", criterion_6),
        ("structural stats and table golden", criterion_7),
        ("coverage rate equals exhaustive oracle", criterion_8),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let quiet = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let label = format!("criterion {}: {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|x| label.contains(x.as_str())) {
            continue;
        }
        let started = Instant::now();
        match panic::catch_unwind(AssertUnwindSafe(f)) {
            Ok(()) => println!("PASS {label} ({:.2?})", started.elapsed()),
            Err(e) => {
                failed += 1;
                let why = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("FAIL {label}: {why}");
            }
        }
    }
    panic::set_hook(quiet);
    if failed > 0 {
        std::process::exit(1);
    }
}
