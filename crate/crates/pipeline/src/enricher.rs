//! Stage 3: gather candidate event types from frequency counts, topics and
//! relations, deduplicate them, and position each one in the taxonomy.

use std::collections::HashSet;

use histaxo_core::domain::all_specs;
use histaxo_core::ingest::{
    event_type_frequency, greedy_dedup, rank_by_frequency, EventRecord, RelationEntry, TopicEntry,
};
use histaxo_core::metrics::NodeVectors;
use histaxo_core::similarity::cosine;
use histaxo_core::taxonomy::node_text;
use histaxo_core::{Domain, NodeId, Parent, Provenance, Taxonomy, TaxonomyError, TaxonomyNode};
use histaxo_gateway::{AgentRole, Gateway, GatewayError, Vars};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::expander::refresh_vectors;
use crate::inducer::domain_listing;
use crate::reply::{self, Concept};
use crate::{vars, PipelineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateSource {
    Freq,
    Topic,
    Relation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEvent {
    pub label: String,
    #[serde(default)]
    pub definition: String,
    pub source: CandidateSource,
    /// Event type, topic id or relation name the candidate came from.
    pub origin_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

impl CandidateEvent {
    pub fn text(&self) -> String {
        node_text(&self.label, &self.definition)
    }
}

/// Event types seen more than `threshold` times, by descending count.
pub fn collect_frequent(events: &[EventRecord], threshold: usize) -> Vec<CandidateEvent> {
    rank_by_frequency(&event_type_frequency(events))
        .into_iter()
        .filter(|(_, c)| *c > threshold)
        .map(|(label, c)| CandidateEvent {
            origin_ref: label.clone(),
            label,
            definition: String::new(),
            source: CandidateSource::Freq,
            count: Some(c),
        })
        .collect()
}

fn concepts_to_candidates(concepts: Vec<Concept>, source: CandidateSource, origin: &str) -> Vec<CandidateEvent> {
    concepts
        .into_iter()
        .map(|c| CandidateEvent {
            label: c.label,
            definition: c.definition,
            source,
            origin_ref: origin.to_string(),
            count: None,
        })
        .collect()
}

fn conceptualize_entries<T: Sync>(
    gateway: &Gateway,
    role: &AgentRole,
    entries: &[T],
    template: &str,
    source: CandidateSource,
    describe: impl Fn(&T) -> (String, Vars) + Sync,
) -> Result<Vec<CandidateEvent>, PipelineError> {
    let results = gateway.par_map(entries, |entry| {
        let (origin, v) = describe(entry);
        (
            origin,
            gateway.chat_structured(role, template, &v, reply::parse_concepts),
        )
    });
    let mut out = Vec::new();
    for (origin, result) in results {
        match result {
            Ok(concepts) => {
                if concepts.is_empty() {
                    log::warn!("{template} {origin}: no event types");
                }
                out.extend(concepts_to_candidates(concepts, source, &origin));
            }
            Err(GatewayError::MalformedResponse { reason, .. }) => {
                log::warn!("{template} {origin}: skipped, {reason}");
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

/// Event types the conceptualizer reads out of topic-model topics.
pub fn conceptualize_topics(
    gateway: &Gateway,
    role: &AgentRole,
    topics: &[TopicEntry],
) -> Result<Vec<CandidateEvent>, PipelineError> {
    conceptualize_entries(
        gateway,
        role,
        topics,
        "conceptualize_topic",
        CandidateSource::Topic,
        |t| {
            let id = t.id.to_string();
            let v = vars(&[
                ("topic_id", &id),
                ("label", &t.label),
                ("top_words", &t.top_words.join(", ")),
            ]);
            (id, v)
        },
    )
}

/// Event types the conceptualizer reads out of relation types.
pub fn conceptualize_relations(
    gateway: &Gateway,
    role: &AgentRole,
    relations: &[RelationEntry],
) -> Result<Vec<CandidateEvent>, PipelineError> {
    conceptualize_entries(
        gateway,
        role,
        relations,
        "conceptualize_relation",
        CandidateSource::Relation,
        |r| (r.name.clone(), vars(&[("name", &r.name), ("source", &r.source)])),
    )
}

/// Union of the three sources in priority order (frequency, topic,
/// relation), exact labels collapsed, then greedy semantic dedup on label
/// embeddings so higher-priority candidates survive.
pub fn build_candidate_set(
    gateway: &Gateway,
    freq: &[CandidateEvent],
    topic: &[CandidateEvent],
    relation: &[CandidateEvent],
    threshold: f64,
) -> Result<Vec<CandidateEvent>, PipelineError> {
    let mut seen = HashSet::new();
    let pool: Vec<CandidateEvent> = freq
        .iter()
        .chain(topic)
        .chain(relation)
        .filter(|c| seen.insert(c.label.clone()))
        .cloned()
        .collect();
    if pool.is_empty() {
        return Ok(pool);
    }
    let labels: Vec<String> = pool.iter().map(|c| c.label.clone()).collect();
    let vectors: Vec<Vec<f64>> = gateway.embed(&labels)?.into_iter().map(|v| v.values).collect();
    let kept = greedy_dedup(&vectors, threshold)?;
    Ok(kept.into_iter().map(|i| pool[i].clone()).collect())
}

/// Asks the enricher for the candidate's domain. `None` when the answer
/// stays unusable after a re-prompt.
pub fn predict_domain(
    gateway: &Gateway,
    role: &AgentRole,
    candidate: &CandidateEvent,
) -> Result<Option<String>, PipelineError> {
    let specs = all_specs();
    let allowed: Vec<String> = specs.iter().map(|s| s.name.name().to_string()).collect();
    let v = vars(&[
        ("label", &candidate.label),
        ("definition", &candidate.definition),
        ("domains", &domain_listing(&specs)),
    ]);
    match gateway.chat_structured(role, "enrich_domain", &v, |t| reply::parse_domain(t, &allowed)) {
        Ok(d) => Ok(Some(d)),
        Err(GatewayError::MalformedResponse { reason, .. }) => {
            log::warn!("domain prediction for `{}` unusable: {reason}", candidate.label);
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decision {
    Duplicate {
        of: NodeId,
    },
    Inserted {
        id: NodeId,
        parent: NodeId,
        /// The enricher never named a valid parent; attached under the root.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        fallback: bool,
        /// The parent was itself added during enrichment.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        chained: bool,
    },
    Skipped {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub seq: usize,
    pub candidate: CandidateEvent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    /// Highest cosine against the domain before any insertion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_similarity: Option<f64>,
    #[serde(flatten)]
    pub decision: Decision,
}

fn domain_listing_nodes(taxonomy: &Taxonomy, domain: &str) -> String {
    let items: Vec<_> = taxonomy
        .domain_nodes(domain)
        .into_iter()
        .map(|n| json!({"id": n.id, "label": n.label, "definition": n.definition, "parent": n.parent}))
        .collect();
    serde_json::to_string_pretty(&items).expect("listing serializes")
}

fn resolve_parent(
    taxonomy: &Taxonomy,
    domain: &str,
    full_root: Option<&NodeId>,
    answer: &str,
) -> Result<NodeId, String> {
    let raw = reply::parse_field(answer, "parent")?;
    let nodes = taxonomy.domain_nodes(domain);
    let found = match nodes.iter().find(|n| n.id.as_str() == raw) {
        Some(n) => Some(n.id.clone()),
        None => match nodes.iter().filter(|n| n.label == raw).collect::<Vec<_>>().as_slice() {
            [one] => Some(one.id.clone()),
            _ => None,
        },
    };
    if let Some(id) = found {
        if Some(&id) == full_root {
            return Err(format!("the {domain} top level is full; choose a more specific parent"));
        }
        return Ok(id);
    }
    let valid: Vec<&str> = nodes
        .iter()
        .map(|n| n.id.as_str())
        .filter(|id| Some(*id) != full_root.map(NodeId::as_str))
        .collect();
    Err(format!(
        "`{raw}` is not a node of {domain}; choose one of these ids: {}",
        valid.join(", ")
    ))
}

/// Highest cosine between `vector` and any node of `domain`.
pub fn max_similarity(
    taxonomy: &Taxonomy,
    vectors: &NodeVectors,
    domain: &str,
    vector: &[f64],
) -> Result<Option<(NodeId, f64)>, PipelineError> {
    let mut best: Option<(NodeId, f64)> = None;
    for n in taxonomy.domain_nodes(domain) {
        let s = cosine(vector, &vectors[&n.id])?;
        if best.as_ref().is_none_or(|(_, b)| s > *b) {
            best = Some((n.id.clone(), s));
        }
    }
    Ok(best)
}

fn nearest_non_root(
    taxonomy: &Taxonomy,
    vectors: &NodeVectors,
    domain: &str,
    vector: &[f64],
) -> Result<Option<NodeId>, PipelineError> {
    let mut best: Option<(NodeId, f64)> = None;
    for n in taxonomy.domain_nodes(domain) {
        if n.parent.is_none() {
            continue;
        }
        let s = cosine(vector, &vectors[&n.id])?;
        if best.as_ref().is_none_or(|(_, b)| s > *b) {
            best = Some((n.id.clone(), s));
        }
    }
    Ok(best.map(|(id, _)| id))
}

/// Redundancy check and insertion for one candidate whose domain is known.
/// The candidate is a duplicate when its cosine to some node of the domain
/// exceeds `threshold`; otherwise the enricher names its parent. A root
/// already holding `top_level_limit - 1` children is not a valid parent.
#[allow(clippy::too_many_arguments)]
pub fn position_candidate(
    gateway: &Gateway,
    role: &AgentRole,
    taxonomy: &mut Taxonomy,
    vectors: &mut NodeVectors,
    candidate: &CandidateEvent,
    candidate_vector: &[f64],
    domain: &str,
    threshold: f64,
    top_level_limit: usize,
) -> Result<(Decision, Option<f64>), PipelineError> {
    let Some(entry) = taxonomy.domain(domain).cloned() else {
        return Ok((
            Decision::Skipped {
                reason: format!("no `{domain}` tree"),
            },
            None,
        ));
    };
    refresh_vectors(gateway, taxonomy, vectors)?;
    let best = max_similarity(taxonomy, vectors, domain, candidate_vector)?;
    let top = best.as_ref().map(|(_, s)| *s);
    if let Some((of, s)) = best {
        if s > threshold {
            return Ok((Decision::Duplicate { of }, top));
        }
    }
    let v = vars(&[
        ("domain", domain),
        ("domain_description", &entry.description),
        ("label", &candidate.label),
        ("definition", &candidate.definition),
        ("nodes", &domain_listing_nodes(taxonomy, domain)),
    ]);
    let root_full = taxonomy.children(&entry.root).len() + 1 >= top_level_limit;
    let full_root = root_full.then_some(&entry.root);
    let snapshot = &*taxonomy;
    let (parent, fallback) = match gateway.chat_structured(role, "enrich_position", &v, |t| {
        resolve_parent(snapshot, domain, full_root, t)
    }) {
        Ok(p) => (p, false),
        Err(GatewayError::MalformedResponse { reason, .. }) => {
            let parent = if root_full {
                nearest_non_root(taxonomy, vectors, domain, candidate_vector)?.unwrap_or_else(|| entry.root.clone())
            } else {
                entry.root.clone()
            };
            log::warn!(
                "`{}`: no valid parent ({reason}); attached under `{parent}`",
                candidate.label
            );
            (parent, true)
        }
        Err(e) => return Err(e.into()),
    };
    let chained = taxonomy
        .node(&parent)
        .is_some_and(|n| n.provenance == Provenance::Enriched);
    let slug = Domain::parse_loose(domain).map_or("domain", |d| d.slug());
    let id = taxonomy.mint_id(&format!("{slug}-e"));
    taxonomy.add_node(
        TaxonomyNode::new(
            id.clone(),
            candidate.label.as_str(),
            candidate.definition.as_str(),
            domain,
            Provenance::Enriched,
        ),
        Parent::Node(parent.clone()),
    )?;
    vectors.insert(id.clone(), candidate_vector.to_vec());
    Ok((
        Decision::Inserted {
            id,
            parent,
            fallback,
            chained,
        },
        top,
    ))
}

/// Re-applies the insertions of a decision log.
pub fn replay_decisions(input: &Taxonomy, decisions: &[DecisionRecord]) -> Result<Taxonomy, TaxonomyError> {
    let mut taxonomy = input.clone();
    for d in decisions {
        if let (Decision::Inserted { id, parent, .. }, Some(domain)) = (&d.decision, &d.domain) {
            let node = TaxonomyNode::new(
                id.clone(),
                d.candidate.label.as_str(),
                d.candidate.definition.as_str(),
                domain.as_str(),
                Provenance::Enriched,
            );
            taxonomy.add_node(node, Parent::Node(parent.clone()))?;
        }
    }
    Ok(taxonomy)
}

pub fn decisions_to_jsonl(decisions: &[DecisionRecord]) -> String {
    decisions
        .iter()
        .map(|d| serde_json::to_string(d).expect("decision serializes") + "\n")
        .collect()
}

pub fn decisions_from_jsonl(text: &str) -> Result<Vec<DecisionRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnrichReport {
    pub nodes_before: usize,
    pub nodes_after: usize,
    pub freq_candidates: usize,
    pub topic_candidates: usize,
    pub relation_candidates: usize,
    pub candidates_after_dedup: usize,
    pub inserted: usize,
    pub duplicates: usize,
    pub skipped: usize,
    pub fallbacks: usize,
    pub chained: usize,
}

#[derive(Debug, Clone)]
pub struct EnrichOutcome {
    pub taxonomy: Taxonomy,
    pub decisions: Vec<DecisionRecord>,
    pub report: EnrichReport,
}

pub struct EnrichInputs<'a> {
    pub events: &'a [EventRecord],
    pub topics: &'a [TopicEntry],
    pub relations: &'a [RelationEntry],
}

pub struct EnrichSettings {
    pub threshold: f64,
    pub frequency_threshold: usize,
    pub top_level_limit: usize,
}

/// Builds the candidate set, predicts domains concurrently, then positions
/// candidates one at a time in priority order.
pub fn run_enrichment(
    gateway: &Gateway,
    conceptualizer: &AgentRole,
    enricher: &AgentRole,
    settings: &EnrichSettings,
    input: &Taxonomy,
    inputs: &EnrichInputs<'_>,
) -> Result<EnrichOutcome, PipelineError> {
    let freq = collect_frequent(inputs.events, settings.frequency_threshold);
    let topic = conceptualize_topics(gateway, conceptualizer, inputs.topics)?;
    let relation = conceptualize_relations(gateway, conceptualizer, inputs.relations)?;
    let candidates = build_candidate_set(gateway, &freq, &topic, &relation, settings.threshold)?;
    let mut report = EnrichReport {
        nodes_before: input.len(),
        freq_candidates: freq.len(),
        topic_candidates: topic.len(),
        relation_candidates: relation.len(),
        candidates_after_dedup: candidates.len(),
        ..EnrichReport::default()
    };

    let mut taxonomy = input.clone();
    let mut decisions = Vec::new();
    if candidates.is_empty() {
        report.nodes_after = taxonomy.len();
        return Ok(EnrichOutcome {
            taxonomy,
            decisions,
            report,
        });
    }
    let domains = gateway.par_map(&candidates, |c| predict_domain(gateway, enricher, c));
    let texts: Vec<String> = candidates.iter().map(CandidateEvent::text).collect();
    let candidate_vectors = gateway.embed(&texts)?;
    let mut vectors = NodeVectors::new();
    for (seq, ((candidate, domain), vector)) in candidates.iter().zip(domains).zip(&candidate_vectors).enumerate() {
        let domain = domain?;
        let (decision, max_similarity) = match &domain {
            None => (
                Decision::Skipped {
                    reason: "no usable domain prediction".into(),
                },
                None,
            ),
            Some(d) => position_candidate(
                gateway,
                enricher,
                &mut taxonomy,
                &mut vectors,
                candidate,
                &vector.values,
                d,
                settings.threshold,
                settings.top_level_limit,
            )?,
        };
        match &decision {
            Decision::Duplicate { .. } => report.duplicates += 1,
            Decision::Skipped { .. } => report.skipped += 1,
            Decision::Inserted { fallback, chained, .. } => {
                report.inserted += 1;
                report.fallbacks += usize::from(*fallback);
                report.chained += usize::from(*chained);
            }
        }
        decisions.push(DecisionRecord {
            seq,
            candidate: candidate.clone(),
            domain,
            max_similarity,
            decision,
        });
    }
    report.nodes_after = taxonomy.len();
    Ok(EnrichOutcome {
        taxonomy,
        decisions,
        report,
    })
}
