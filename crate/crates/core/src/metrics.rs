//! Taxonomy quality metrics over precomputed embeddings.
//!
//! Every threshold comparison is strict (`similarity > h`). Best-match
//! searches scan nodes in id order and keep the first maximum, so results do
//! not depend on how the taxonomy document was ordered.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::kendall::{tau_b_by, KendallError};
use crate::similarity::{cosine, SimilarityError};
use crate::taxonomy::{NodeId, RootMode, Taxonomy, TaxonomyError};

pub type NodeVectors = HashMap<NodeId, Vec<f64>>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("no usable scope: tau-b is undefined when structure weights or similarities are all tied")]
    DegenerateInput,
    #[error("held-out event set is empty")]
    EmptyEventSet,
    #[error("taxonomy is empty")]
    EmptyTaxonomy,
    #[error("no held-out event is matched by both taxonomies")]
    EmptyMatchedSet,
    #[error("no parent-child pairs to judge")]
    NoPairs,
    #[error("no embedding for node `{0}`")]
    MissingVector(NodeId),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
}

fn vector<'a>(vectors: &'a NodeVectors, id: &NodeId) -> Result<&'a [f64], MetricError> {
    vectors
        .get(id)
        .map(Vec::as_slice)
        .ok_or_else(|| MetricError::MissingVector(id.clone()))
}

/// Tau for one scope; `None` when the scope is degenerate or too small.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeTau {
    pub scope: String,
    pub tau: Option<f64>,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CscResult {
    pub mode: RootMode,
    /// Mean of the non-null per-domain taus, or the single global tau.
    pub value: f64,
    pub per_domain: Vec<ScopeTau>,
    pub pairs: usize,
}

/// Structure weights and cosine similarities for every unordered pair of
/// `ids`, in (i < j) enumeration order.
pub fn pair_values(
    taxonomy: &Taxonomy,
    vectors: &NodeVectors,
    ids: &[NodeId],
    mode: RootMode,
) -> Result<(Vec<Ratio<u64>>, Vec<f64>), MetricError> {
    // root paths as small integers so the LCA is a prefix comparison
    let mut index: HashMap<NodeId, u32> = HashMap::new();
    let mut paths: Vec<Vec<u32>> = Vec::with_capacity(ids.len());
    for id in ids {
        let path = taxonomy.path_to_root(id, mode)?;
        paths.push(
            path.into_iter()
                .map(|p| {
                    let next = index.len() as u32;
                    *index.entry(p).or_insert(next)
                })
                .collect(),
        );
    }
    let vecs: Vec<&[f64]> = ids.iter().map(|id| vector(vectors, id)).collect::<Result<_, _>>()?;

    let n = ids.len();
    let mut weights = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    let mut sims = Vec::with_capacity(weights.capacity());
    for i in 0..n {
        for j in i + 1..n {
            let lca = paths[i].iter().zip(&paths[j]).take_while(|(a, b)| a == b).count() as u64;
            if lca == 0 {
                return Err(TaxonomyError::NoCommonRoot(ids[i].clone(), ids[j].clone()).into());
            }
            let depth_sum = (paths[i].len() + paths[j].len()) as u64;
            weights.push(Ratio::new(2 * lca, depth_sum));
            sims.push(cosine(vecs[i], vecs[j])?);
        }
    }
    Ok((weights, sims))
}

fn scope_tau(
    taxonomy: &Taxonomy,
    vectors: &NodeVectors,
    scope: &str,
    ids: &[NodeId],
    mode: RootMode,
) -> Result<ScopeTau, MetricError> {
    let (weights, sims) = pair_values(taxonomy, vectors, ids, mode)?;
    let pairs = weights.len();
    let tau = match tau_b_by(&weights, &sims, |a, b| a.cmp(b), |a, b| a.total_cmp(b)) {
        Ok(t) => Some(t),
        Err(KendallError::Degenerate) | Err(KendallError::TooFewObservations(_)) => None,
        Err(KendallError::LengthMismatch(..)) => unreachable!("pair vectors are built together"),
    };
    Ok(ScopeTau {
        scope: scope.to_string(),
        tau,
        pairs,
    })
}

/// Cluster-semantic consistency: Kendall tau-b between structure weights and
/// embedding similarities over all node pairs in scope.
pub fn csc(taxonomy: &Taxonomy, vectors: &NodeVectors, mode: RootMode) -> Result<CscResult, MetricError> {
    if taxonomy.is_empty() {
        return Err(MetricError::EmptyTaxonomy);
    }
    let mut per_domain = Vec::new();
    for name in taxonomy.domain_names() {
        let ids: Vec<NodeId> = taxonomy.domain_nodes(&name).into_iter().map(|n| n.id.clone()).collect();
        per_domain.push(scope_tau(taxonomy, vectors, &name, &ids, RootMode::PerDomain)?);
    }
    match mode {
        RootMode::PerDomain => {
            let valid: Vec<f64> = per_domain.iter().filter_map(|s| s.tau).collect();
            if valid.is_empty() {
                return Err(MetricError::DegenerateInput);
            }
            let pairs = per_domain.iter().map(|s| s.pairs).sum();
            Ok(CscResult {
                mode,
                value: valid.iter().sum::<f64>() / valid.len() as f64,
                per_domain,
                pairs,
            })
        }
        RootMode::Global => {
            let ids: Vec<NodeId> = taxonomy.preorder_all().into_iter().map(|n| n.id.clone()).collect();
            let global = scope_tau(taxonomy, vectors, "global", &ids, RootMode::Global)?;
            Ok(CscResult {
                mode,
                value: global.tau.ok_or(MetricError::DegenerateInput)?,
                per_domain,
                pairs: global.pairs,
            })
        }
    }
}

/// Highest-similarity node of `taxonomy` for `query`, scanning in id order.
pub fn best_match<'a>(
    taxonomy: &'a Taxonomy,
    vectors: &NodeVectors,
    query: &[f64],
) -> Result<Option<(&'a NodeId, f64)>, MetricError> {
    let mut best: Option<(&NodeId, f64)> = None;
    for node in taxonomy.nodes() {
        let s = cosine(vector(vectors, &node.id)?, query)?;
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((&node.id, s));
        }
    }
    Ok(best)
}

/// A held-out event type with its embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldOutEvent {
    pub event_type: String,
    pub vector: Vec<f64>,
    /// Domain label carried by the event record, if any.
    pub domain: Option<String>,
}

fn dedup_events(events: &[HeldOutEvent]) -> Vec<&HeldOutEvent> {
    let mut seen = HashSet::new();
    events.iter().filter(|e| seen.insert(e.event_type.as_str())).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Fraction {
    pub hits: usize,
    pub total: usize,
}

impl Fraction {
    pub fn percent(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.hits as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub percent: f64,
    pub covered: usize,
    pub total: usize,
    pub per_domain: BTreeMap<String, Fraction>,
}

/// Share of distinct held-out event types whose best node similarity
/// exceeds `threshold`. Per-domain attribution uses the event's own domain
/// label when it names a domain of the taxonomy, else the best node's domain.
pub fn coverage_rate(
    taxonomy: &Taxonomy,
    vectors: &NodeVectors,
    events: &[HeldOutEvent],
    threshold: f64,
) -> Result<CoverageResult, MetricError> {
    let events = dedup_events(events);
    if events.is_empty() {
        return Err(MetricError::EmptyEventSet);
    }
    if taxonomy.is_empty() {
        return Err(MetricError::EmptyTaxonomy);
    }
    let mut covered = 0;
    let mut per_domain: BTreeMap<String, Fraction> = BTreeMap::new();
    for event in &events {
        let (best, sim) = best_match(taxonomy, vectors, &event.vector)?.expect("taxonomy is non-empty");
        let hit = sim > threshold;
        covered += usize::from(hit);
        let domain = match &event.domain {
            Some(d) if taxonomy.domain(d).is_some() => d.clone(),
            _ => taxonomy.node(best).expect("best match exists").domain.clone(),
        };
        let slot = per_domain.entry(domain).or_default();
        slot.total += 1;
        slot.hits += usize::from(hit);
    }
    Ok(CoverageResult {
        percent: 100.0 * covered as f64 / events.len() as f64,
        covered,
        total: events.len(),
        per_domain,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallResult {
    pub percent: f64,
    pub recalled: usize,
    pub total: usize,
    /// Recalled reference nodes attributed to the domain of their best
    /// generated match.
    pub per_domain: BTreeMap<String, usize>,
}

/// Share of reference nodes matched (similarity > `threshold`) by some
/// generated node.
pub fn node_recall(
    generated: &Taxonomy,
    generated_vectors: &NodeVectors,
    reference: &Taxonomy,
    reference_vectors: &NodeVectors,
    threshold: f64,
) -> Result<RecallResult, MetricError> {
    if generated.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptyTaxonomy);
    }
    let mut recalled = 0;
    let mut per_domain = BTreeMap::new();
    for node in reference.nodes() {
        let query = vector(reference_vectors, &node.id)?;
        let (best, sim) = best_match(generated, generated_vectors, query)?.expect("non-empty");
        if sim > threshold {
            recalled += 1;
            let domain = generated.node(best).expect("exists").domain.clone();
            *per_domain.entry(domain).or_insert(0) += 1;
        }
    }
    Ok(RecallResult {
        percent: 100.0 * recalled as f64 / reference.len() as f64,
        recalled,
        total: reference.len(),
        per_domain,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltyResult {
    /// Fraction in [0, 1].
    pub value: f64,
    pub novel: usize,
    pub total: usize,
    pub per_domain: BTreeMap<String, Fraction>,
}

/// Fraction of generated nodes with no reference node above `threshold`.
pub fn novelty(
    generated: &Taxonomy,
    generated_vectors: &NodeVectors,
    reference: &Taxonomy,
    reference_vectors: &NodeVectors,
    threshold: f64,
) -> Result<NoveltyResult, MetricError> {
    if generated.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptyTaxonomy);
    }
    let mut novel = 0;
    let mut per_domain: BTreeMap<String, Fraction> = BTreeMap::new();
    for node in generated.nodes() {
        let query = vector(generated_vectors, &node.id)?;
        let (_, sim) = best_match(reference, reference_vectors, query)?.expect("non-empty");
        let is_new = sim <= threshold;
        novel += usize::from(is_new);
        let slot = per_domain.entry(node.domain.clone()).or_default();
        slot.total += 1;
        slot.hits += usize::from(is_new);
    }
    Ok(NoveltyResult {
        value: novel as f64 / generated.len() as f64,
        novel,
        total: generated.len(),
        per_domain,
    })
}

/// `(distinct_generated − distinct_reference) / matched`.
pub fn classification_delta(
    distinct_generated: usize,
    distinct_reference: usize,
    matched: usize,
) -> Result<f64, MetricError> {
    if matched == 0 {
        return Err(MetricError::EmptyMatchedSet);
    }
    Ok((distinct_generated as f64 - distinct_reference as f64) / matched as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub value: f64,
    pub distinct_generated: usize,
    pub distinct_reference: usize,
    pub matched: usize,
}

/// Classification delta over the held-out event types covered by both
/// taxonomies. Each event goes to its best-matching node in each taxonomy.
pub fn significance(
    generated: &Taxonomy,
    generated_vectors: &NodeVectors,
    reference: &Taxonomy,
    reference_vectors: &NodeVectors,
    events: &[HeldOutEvent],
    threshold: f64,
) -> Result<SignificanceResult, MetricError> {
    if generated.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptyTaxonomy);
    }
    let mut gen_nodes = BTreeSet::new();
    let mut ref_nodes = BTreeSet::new();
    let mut matched = 0;
    for event in dedup_events(events) {
        let (g, gs) = best_match(generated, generated_vectors, &event.vector)?.expect("non-empty");
        let (r, rs) = best_match(reference, reference_vectors, &event.vector)?.expect("non-empty");
        if gs > threshold && rs > threshold {
            matched += 1;
            gen_nodes.insert(g.clone());
            ref_nodes.insert(r.clone());
        }
    }
    Ok(SignificanceResult {
        value: classification_delta(gen_nodes.len(), ref_nodes.len(), matched)?,
        distinct_generated: gen_nodes.len(),
        distinct_reference: ref_nodes.len(),
        matched,
    })
}

/// Verdict on one parent-child pair; `score == None` means the judge failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairJudgment {
    pub parent: NodeId,
    pub child: NodeId,
    pub domain: String,
    pub score: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GranularityResult {
    pub percent: f64,
    pub specific: usize,
    pub total: usize,
    pub per_domain: BTreeMap<String, Fraction>,
    /// Pairs the judge could not score; they count as 0.
    pub failed: Vec<(NodeId, NodeId)>,
}

pub fn path_granularity(judgments: &[PairJudgment]) -> Result<GranularityResult, MetricError> {
    if judgments.is_empty() {
        return Err(MetricError::NoPairs);
    }
    let mut specific = 0;
    let mut failed = Vec::new();
    let mut per_domain: BTreeMap<String, Fraction> = BTreeMap::new();
    for j in judgments {
        let hit = j.score == Some(1);
        specific += usize::from(hit);
        if j.score.is_none() {
            failed.push((j.parent.clone(), j.child.clone()));
        }
        let slot = per_domain.entry(j.domain.clone()).or_default();
        slot.total += 1;
        slot.hits += usize::from(hit);
    }
    Ok(GranularityResult {
        percent: 100.0 * specific as f64 / judgments.len() as f64,
        specific,
        total: judgments.len(),
        per_domain,
        failed,
    })
}
