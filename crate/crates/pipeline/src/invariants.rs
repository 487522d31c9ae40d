//! Structural checks run on every stage output. Each returns the list of
//! violations; empty means the check passed.

use std::collections::{BTreeMap, BTreeSet};

use histaxo_core::metrics::NodeVectors;
use histaxo_core::similarity::cosine;
use histaxo_core::Taxonomy;

use crate::expander::non_root_ids;
use crate::PipelineError;

/// Every domain root has fewer than `limit` children.
pub fn top_level_width(taxonomy: &Taxonomy, limit: usize) -> Vec<String> {
    taxonomy
        .domains()
        .iter()
        .filter_map(|d| {
            let w = taxonomy.children(&d.root).len();
            (w >= limit).then(|| format!("{}: top level has {w} nodes (limit {limit})", d.name))
        })
        .collect()
}

/// Induction leaves of each domain equal the event types assigned to it.
pub fn induced_leaves(taxonomy: &Taxonomy, classification: &BTreeMap<String, String>) -> Vec<String> {
    let mut problems = Vec::new();
    for entry in taxonomy.domains() {
        let expected: BTreeSet<&str> = classification
            .iter()
            .filter(|(_, d)| **d == entry.name)
            .map(|(t, _)| t.as_str())
            .collect();
        let leaves: BTreeSet<&str> = taxonomy
            .domain_nodes(&entry.name)
            .into_iter()
            .filter(|n| taxonomy.children(&n.id).is_empty() && !taxonomy.is_domain_root(&n.id))
            .map(|n| n.label.as_str())
            .collect();
        for missing in expected.difference(&leaves) {
            problems.push(format!("{}: event type `{missing}` is not a leaf", entry.name));
        }
        for extra in leaves.difference(&expected) {
            problems.push(format!("{}: leaf `{extra}` is not an input event type", entry.name));
        }
    }
    problems
}

/// Every label in `labels` survives as some node's label or alias.
pub fn labels_preserved<'a>(taxonomy: &Taxonomy, labels: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let known: BTreeSet<&str> = taxonomy
        .nodes()
        .flat_map(|n| std::iter::once(n.label.as_str()).chain(n.aliases.iter().map(String::as_str)))
        .collect();
    labels
        .into_iter()
        .filter(|l| !known.contains(l))
        .map(|l| format!("leaf `{l}` lost"))
        .collect()
}

/// Leaf labels of `taxonomy`, domain roots excluded.
pub fn leaf_labels(taxonomy: &Taxonomy) -> BTreeSet<String> {
    taxonomy
        .leaves()
        .into_iter()
        .filter(|n| !taxonomy.is_domain_root(&n.id))
        .map(|n| n.label.clone())
        .collect()
}

/// Exhaustive pairwise check among non-root nodes. With `within_only`
/// only pairs that share a domain are compared.
pub fn no_duplicates(
    taxonomy: &Taxonomy,
    vectors: &NodeVectors,
    threshold: f64,
    within_only: bool,
) -> Result<Vec<String>, PipelineError> {
    let ids = non_root_ids(taxonomy, None);
    let mut problems = Vec::new();
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            let (na, nb) = (taxonomy.node(a).expect("live"), taxonomy.node(b).expect("live"));
            if within_only && na.domain != nb.domain {
                continue;
            }
            let s = cosine(&vectors[a], &vectors[b])?;
            if s > threshold {
                problems.push(format!(
                    "`{}` ({a}) and `{}` ({b}) have cosine {s:.4}",
                    na.label, nb.label
                ));
            }
        }
    }
    Ok(problems)
}

/// `after` keeps every node and edge of `before`.
pub fn monotone(before: &Taxonomy, after: &Taxonomy) -> Vec<String> {
    let mut problems = Vec::new();
    if after.len() < before.len() {
        problems.push(format!("node count fell from {} to {}", before.len(), after.len()));
    }
    for n in before.nodes() {
        match after.node(&n.id) {
            None => problems.push(format!("node `{}` disappeared", n.id)),
            Some(m) if m.parent != n.parent => problems.push(format!("node `{}` changed parent", n.id)),
            Some(_) => {}
        }
    }
    problems
}

/// Turns a violation list into an error for `stage`.
pub fn require(stage: &str, violations: Vec<String>) -> Result<(), PipelineError> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(PipelineError::InvariantViolation {
            stage: stage.to_string(),
            violations,
        })
    }
}
