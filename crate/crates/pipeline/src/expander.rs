//! Stage 2: judger-resolved deduplication within and across domains, a
//! top-down layer sweep with the expander agent, and a final global
//! deduplication pass.

use std::collections::{BTreeMap, HashMap};

use histaxo_core::editlog::{Edit, EditLog};
use histaxo_core::metrics::NodeVectors;
use histaxo_core::similarity::cosine;
use histaxo_core::{NodeId, Parent, Provenance, RootMode, Taxonomy, TaxonomyNode};
use histaxo_gateway::{AgentRole, Gateway, GatewayError};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{reply, vars, PipelineError};

const STAGE: &str = "expand";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicatePair {
    pub a: NodeId,
    pub b: NodeId,
    pub similarity: f64,
}

/// Embeds every node in `ids` by its label and definition.
pub fn embed_nodes(gateway: &Gateway, taxonomy: &Taxonomy, ids: &[NodeId]) -> Result<NodeVectors, PipelineError> {
    let texts: Vec<String> = ids
        .iter()
        .map(|id| {
            taxonomy
                .node(id)
                .map(TaxonomyNode::embedding_text)
                .ok_or_else(|| histaxo_core::TaxonomyError::UnknownNode(id.clone()))
        })
        .collect::<Result<_, _>>()?;
    if texts.is_empty() {
        return Ok(NodeVectors::new());
    }
    let vectors = gateway.embed(&texts)?;
    Ok(ids.iter().cloned().zip(vectors.into_iter().map(|v| v.values)).collect())
}

/// Vectors for every node of `taxonomy`, reusing those already in `vectors`.
pub fn refresh_vectors(gateway: &Gateway, taxonomy: &Taxonomy, vectors: &mut NodeVectors) -> Result<(), PipelineError> {
    let missing: Vec<NodeId> = taxonomy
        .preorder_all()
        .into_iter()
        .filter(|n| !vectors.contains_key(&n.id))
        .map(|n| n.id.clone())
        .collect();
    let fresh = embed_nodes(gateway, taxonomy, &missing)?;
    vectors.extend(fresh);
    Ok(())
}

/// All unordered pairs of `items` with cosine strictly above `threshold`,
/// by descending similarity, then by ids. Rows are scored in parallel.
pub fn find_duplicate_pairs(items: &[(NodeId, &[f64])], threshold: f64) -> Result<Vec<DuplicatePair>, PipelineError> {
    let n = items.len();
    let workers = std::thread::available_parallelism()
        .map_or(1, |p| p.get())
        .min(n.max(1));
    let rows: Vec<usize> = (0..n).collect();
    let chunk = n.div_ceil(workers).max(1);
    let scored: Vec<Result<Vec<DuplicatePair>, PipelineError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = rows
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    let mut out = Vec::new();
                    for &i in part {
                        for j in i + 1..n {
                            let s = cosine(items[i].1, items[j].1)?;
                            if s > threshold {
                                let (a, b) = if items[i].0 <= items[j].0 {
                                    (items[i].0.clone(), items[j].0.clone())
                                } else {
                                    (items[j].0.clone(), items[i].0.clone())
                                };
                                out.push(DuplicatePair { a, b, similarity: s });
                            }
                        }
                    }
                    Ok(out)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("pair worker panicked"))
            .collect()
    });
    let mut pairs = Vec::new();
    for part in scored {
        pairs.extend(part?);
    }
    pairs.sort_by(|x, y| {
        y.similarity
            .total_cmp(&x.similarity)
            .then_with(|| x.a.cmp(&y.a))
            .then_with(|| x.b.cmp(&y.b))
    });
    Ok(pairs)
}

/// How a duplicate pair was settled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Merged {
        keep: NodeId,
        drop: NodeId,
        cross_domain: bool,
        /// `judger`, `fallback` or `judger+swap`.
        by: String,
    },
    Stale,
}

fn label_path(taxonomy: &Taxonomy, id: &NodeId) -> String {
    taxonomy
        .path_to_root(id, RootMode::PerDomain)
        .map(|path| {
            path.iter()
                .rev()
                .filter_map(|p| taxonomy.node(p).map(|n| n.label.clone()))
                .collect::<Vec<_>>()
                .join(" > ")
        })
        .unwrap_or_default()
}

fn domain_size(taxonomy: &Taxonomy, domain: &str) -> usize {
    taxonomy.domain_nodes(domain).len()
}

/// Deterministic keep choice when the judger cannot answer.
pub fn fallback_keep(taxonomy: &Taxonomy, a: &NodeId, b: &NodeId) -> NodeId {
    let (na, nb) = (
        &taxonomy.node(a).expect("live").domain,
        &taxonomy.node(b).expect("live").domain,
    );
    if na != nb {
        let (sa, sb) = (domain_size(taxonomy, na), domain_size(taxonomy, nb));
        if sa != sb {
            return if sa < sb { a.clone() } else { b.clone() };
        }
        return if na <= nb { a.clone() } else { b.clone() };
    }
    let (da, db) = (taxonomy.descendants(a).len(), taxonomy.descendants(b).len());
    if da != db {
        return if da > db { a.clone() } else { b.clone() };
    }
    std::cmp::min(a, b).clone()
}

fn parse_keep(text: &str) -> Result<bool, String> {
    let choice = reply::parse_field(text, "keep")?;
    match choice.trim().to_ascii_uppercase().as_str() {
        "A" => Ok(true),
        "B" => Ok(false),
        other => Err(format!("`keep` must be \"A\" or \"B\", got `{other}`")),
    }
}

fn ask_judger(
    gateway: &Gateway,
    judger: &AgentRole,
    taxonomy: &Taxonomy,
    a: &NodeId,
    b: &NodeId,
) -> Result<bool, GatewayError> {
    let (na, nb) = (taxonomy.node(a).expect("live"), taxonomy.node(b).expect("live"));
    if na.domain == nb.domain {
        let v = vars(&[
            ("domain", &na.domain),
            ("a_label", &na.label),
            ("a_definition", &na.definition),
            ("a_path", &label_path(taxonomy, a)),
            ("b_label", &nb.label),
            ("b_definition", &nb.definition),
            ("b_path", &label_path(taxonomy, b)),
        ]);
        gateway.chat_structured(judger, "judge", &v, parse_keep)
    } else {
        let desc = |d: &str| taxonomy.domain(d).map(|e| e.description.clone()).unwrap_or_default();
        let v = vars(&[
            ("a_domain", &na.domain),
            ("a_domain_description", &desc(&na.domain)),
            ("a_label", &na.label),
            ("a_definition", &na.definition),
            ("b_domain", &nb.domain),
            ("b_domain_description", &desc(&nb.domain)),
            ("b_label", &nb.label),
            ("b_definition", &nb.definition),
        ]);
        gateway.chat_structured(judger, "judge_cross", &v, parse_keep)
    }
}

/// Settles one pair: the judger picks the survivor and the other node is
/// merged into it. A pair with a member already merged away is skipped.
/// When the judger keeps an ancestor's descendant the roles are swapped so
/// the merge stays acyclic.
pub fn resolve_duplicate(
    gateway: &Gateway,
    judger: &AgentRole,
    taxonomy: &mut Taxonomy,
    pair: &DuplicatePair,
    log: &mut EditLog,
) -> Result<Resolution, PipelineError> {
    if !taxonomy.contains(&pair.a) || !taxonomy.contains(&pair.b) {
        log::info!("pair {} / {} is stale, skipped", pair.a, pair.b);
        return Ok(Resolution::Stale);
    }
    let (mut keep, mut drop, mut by) = match ask_judger(gateway, judger, taxonomy, &pair.a, &pair.b) {
        Ok(true) => (pair.a.clone(), pair.b.clone(), "judger".to_string()),
        Ok(false) => (pair.b.clone(), pair.a.clone(), "judger".to_string()),
        Err(e @ (GatewayError::MalformedResponse { .. } | GatewayError::ProviderUnavailable { .. })) => {
            let keep = fallback_keep(taxonomy, &pair.a, &pair.b);
            let drop = if keep == pair.a { pair.b.clone() } else { pair.a.clone() };
            log::warn!(
                "judger unavailable for {} / {} ({e}); fallback keeps {keep}",
                pair.a,
                pair.b
            );
            (keep, drop, "fallback".to_string())
        }
        Err(e) => return Err(e.into()),
    };
    if taxonomy.is_in_subtree(&keep, &drop) {
        log::warn!("{keep} lies under {drop}; keeping the ancestor instead");
        std::mem::swap(&mut keep, &mut drop);
        by.push_str("+swap");
    }
    let drop_parent = taxonomy.node(&drop).and_then(|n| n.parent.clone());
    let record = taxonomy.merge_nodes(&keep, &drop)?;
    let cross_domain = record.from_domain.is_some();
    log.push(
        STAGE,
        Edit::Merge {
            keep: keep.clone(),
            drop: drop.clone(),
            drop_parent,
            moved_children: record.moved_children,
        },
        format!(
            "similarity {:.4}, {by}{}",
            pair.similarity,
            if cross_domain { ", cross-domain" } else { "" }
        ),
    );
    Ok(Resolution::Merged {
        keep,
        drop,
        cross_domain,
        by,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DedupScope {
    /// Pairs inside one domain.
    Within,
    /// Pairs whose members sit in different domains.
    Cross,
    All,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DedupCounts {
    pub pairs: usize,
    pub within_merges: usize,
    pub cross_merges: usize,
    pub stale: usize,
    pub fallbacks: usize,
}

/// Finds and resolves duplicate pairs among non-root nodes.
pub fn dedup_pass(
    gateway: &Gateway,
    judger: &AgentRole,
    taxonomy: &mut Taxonomy,
    vectors: &mut NodeVectors,
    scope: DedupScope,
    threshold: f64,
    log: &mut EditLog,
) -> Result<DedupCounts, PipelineError> {
    refresh_vectors(gateway, taxonomy, vectors)?;
    let mut pairs = Vec::new();
    let groups: Vec<Vec<NodeId>> = match scope {
        DedupScope::Within => taxonomy
            .domain_names()
            .iter()
            .map(|d| non_root_ids(taxonomy, Some(d)))
            .collect(),
        DedupScope::Cross | DedupScope::All => vec![non_root_ids(taxonomy, None)],
    };
    for ids in groups {
        let items: Vec<(NodeId, &[f64])> = ids.iter().map(|id| (id.clone(), vectors[id].as_slice())).collect();
        pairs.extend(find_duplicate_pairs(&items, threshold)?);
    }
    if scope == DedupScope::Cross {
        pairs.retain(|p| taxonomy.node(&p.a).map(|n| &n.domain) != taxonomy.node(&p.b).map(|n| &n.domain));
    }
    if scope == DedupScope::Within {
        pairs.sort_by(|x, y| {
            y.similarity
                .total_cmp(&x.similarity)
                .then_with(|| x.a.cmp(&y.a))
                .then_with(|| x.b.cmp(&y.b))
        });
    }
    let mut counts = DedupCounts {
        pairs: pairs.len(),
        ..DedupCounts::default()
    };
    for pair in &pairs {
        match resolve_duplicate(gateway, judger, taxonomy, pair, log)? {
            Resolution::Stale => counts.stale += 1,
            Resolution::Merged { cross_domain, by, .. } => {
                if cross_domain {
                    counts.cross_merges += 1;
                } else {
                    counts.within_merges += 1;
                }
                if by.starts_with("fallback") {
                    counts.fallbacks += 1;
                }
            }
        }
    }
    Ok(counts)
}

/// Non-root node ids in preorder, for one domain or all of them.
pub fn non_root_ids(taxonomy: &Taxonomy, domain: Option<&String>) -> Vec<NodeId> {
    let nodes = match domain {
        Some(d) => taxonomy.domain_nodes(d),
        None => taxonomy.preorder_all(),
    };
    nodes
        .into_iter()
        .filter(|n| !taxonomy.is_domain_root(&n.id))
        .map(|n| n.id.clone())
        .collect()
}

/// One edit proposed by the expander for a layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum LayerEdit {
    NewSibling {
        label: String,
        #[serde(default)]
        definition: String,
        /// Existing layer node the new one sits beside.
        #[serde(default)]
        sibling_of: Option<String>,
    },
    NewIntermediate {
        label: String,
        #[serde(default)]
        definition: String,
        parent: String,
        children: Vec<String>,
    },
    Reassign {
        child: String,
        parent: String,
    },
}

#[derive(Deserialize)]
struct LayerEdits {
    edits: Vec<LayerEdit>,
}

pub fn parse_layer_edits(text: &str) -> Result<Vec<LayerEdit>, String> {
    Ok(reply::parse_as::<LayerEdits>(text)?.edits)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerOutcome {
    pub depth: usize,
    pub siblings: usize,
    pub intermediates: usize,
    pub reassigned: usize,
    pub dropped: Vec<String>,
}

/// Resolves a reference by id, else by a label unique among `pool`.
fn resolve_ref(taxonomy: &Taxonomy, pool: &[NodeId], reference: &str) -> Option<NodeId> {
    let r = reference.trim();
    if let Some(id) = pool.iter().find(|id| id.as_str() == r) {
        return Some(id.clone());
    }
    let hits: Vec<&NodeId> = pool
        .iter()
        .filter(|id| taxonomy.node(id).is_some_and(|n| n.label == r))
        .collect();
    match hits.as_slice() {
        [one] => Some((*one).clone()),
        _ => None,
    }
}

/// Nodes of `domain` at `depth` (domain root has depth 1), in preorder.
pub fn layer_at(taxonomy: &Taxonomy, domain: &str, depth: usize) -> Vec<NodeId> {
    taxonomy
        .domain_nodes(domain)
        .into_iter()
        .filter(|n| taxonomy.depth(&n.id, RootMode::PerDomain).ok() == Some(depth))
        .map(|n| n.id.clone())
        .collect()
}

pub struct LayerContext<'a> {
    pub domain: &'a str,
    pub depth: usize,
    /// Cap on the top-level width; a new top-level sibling may not reach it.
    pub top_level_limit: usize,
}

/// Validates and applies `edits` one at a time against the layer at
/// `ctx.depth`. Invalid edits are dropped with a warning.
pub fn apply_layer_edits(
    taxonomy: &mut Taxonomy,
    ctx: &LayerContext<'_>,
    edits: &[LayerEdit],
    log: &mut EditLog,
) -> LayerOutcome {
    let mut out = LayerOutcome {
        depth: ctx.depth,
        ..LayerOutcome::default()
    };
    let slug = histaxo_core::Domain::parse_loose(ctx.domain).map_or("domain", |d| d.slug());
    let prefix = format!("{slug}-x");
    let mut layer = layer_at(taxonomy, ctx.domain, ctx.depth);
    let drop_edit = |out: &mut LayerOutcome, why: String| {
        log::warn!("{} depth {}: edit dropped: {why}", ctx.domain, ctx.depth);
        out.dropped.push(why);
    };
    for edit in edits {
        let children_now: Vec<NodeId> = layer.iter().flat_map(|p| taxonomy.children(p).to_vec()).collect();
        match edit {
            LayerEdit::NewSibling {
                label,
                definition,
                sibling_of,
            } => {
                let label = label.trim();
                if label.is_empty() {
                    drop_edit(&mut out, "new sibling with empty label".into());
                    continue;
                }
                if layer
                    .iter()
                    .any(|id| taxonomy.node(id).is_some_and(|n| n.label == label))
                {
                    drop_edit(&mut out, format!("sibling `{label}` already in the layer"));
                    continue;
                }
                let parent = match sibling_of {
                    Some(r) => match resolve_ref(taxonomy, &layer, r) {
                        Some(s) => taxonomy.node(&s).and_then(|n| n.parent.clone()),
                        None => {
                            drop_edit(&mut out, format!("sibling_of `{r}` is not in the layer"));
                            continue;
                        }
                    },
                    None => {
                        let mut parents: Vec<NodeId> = layer
                            .iter()
                            .filter_map(|id| taxonomy.node(id).and_then(|n| n.parent.clone()))
                            .collect();
                        parents.dedup();
                        if parents.len() == 1 {
                            parents.pop()
                        } else {
                            drop_edit(
                                &mut out,
                                format!("sibling `{label}` needs `sibling_of` in a layer with several parents"),
                            );
                            continue;
                        }
                    }
                };
                let Some(parent) = parent else {
                    drop_edit(&mut out, format!("sibling `{label}` has no parent to attach to"));
                    continue;
                };
                if taxonomy.is_domain_root(&parent) && taxonomy.children(&parent).len() + 1 >= ctx.top_level_limit {
                    drop_edit(
                        &mut out,
                        format!("sibling `{label}` would widen the top level to {}", ctx.top_level_limit),
                    );
                    continue;
                }
                let id = taxonomy.mint_id(&prefix);
                let node = TaxonomyNode::new(id.clone(), label, definition.trim(), ctx.domain, Provenance::Expanded);
                if let Err(e) = taxonomy.add_node(node, Parent::Node(parent.clone())) {
                    drop_edit(&mut out, format!("sibling `{label}`: {e}"));
                    continue;
                }
                log.push(
                    STAGE,
                    Edit::AddNode {
                        id: id.clone(),
                        label: label.to_string(),
                        definition: definition.trim().to_string(),
                        domain: ctx.domain.to_string(),
                        parent,
                        provenance: Provenance::Expanded,
                    },
                    format!("new sibling at depth {}", ctx.depth),
                );
                layer.push(id);
                out.siblings += 1;
            }
            LayerEdit::NewIntermediate {
                label,
                definition,
                parent,
                children,
            } => {
                let label = label.trim();
                if label.is_empty() {
                    drop_edit(&mut out, "intermediate with empty label".into());
                    continue;
                }
                let Some(parent_id) = resolve_ref(taxonomy, &layer, parent) else {
                    drop_edit(
                        &mut out,
                        format!("intermediate `{label}`: parent `{parent}` is not in the layer"),
                    );
                    continue;
                };
                let own: Vec<NodeId> = taxonomy.children(&parent_id).to_vec();
                let mut adopted: Vec<NodeId> = Vec::new();
                let mut bad = None;
                for c in children {
                    match resolve_ref(taxonomy, &own, c) {
                        Some(id) if !adopted.contains(&id) => adopted.push(id),
                        Some(_) => {}
                        None => {
                            bad = Some(c.clone());
                            break;
                        }
                    }
                }
                if let Some(c) = bad {
                    drop_edit(
                        &mut out,
                        format!("intermediate `{label}`: `{c}` is not a child of `{parent}`"),
                    );
                    continue;
                }
                if adopted.is_empty() {
                    drop_edit(&mut out, format!("intermediate `{label}` adopts no children"));
                    continue;
                }
                if own.iter().any(|c| taxonomy.node(c).is_some_and(|n| n.label == label)) {
                    drop_edit(&mut out, format!("intermediate `{label}` repeats a child label"));
                    continue;
                }
                let id = taxonomy.mint_id(&prefix);
                let node = TaxonomyNode::new(id.clone(), label, definition.trim(), ctx.domain, Provenance::Expanded);
                if let Err(e) = taxonomy.add_node(node, Parent::Node(parent_id.clone())) {
                    drop_edit(&mut out, format!("intermediate `{label}`: {e}"));
                    continue;
                }
                log.push(
                    STAGE,
                    Edit::AddNode {
                        id: id.clone(),
                        label: label.to_string(),
                        definition: definition.trim().to_string(),
                        domain: ctx.domain.to_string(),
                        parent: parent_id.clone(),
                        provenance: Provenance::Expanded,
                    },
                    format!("intermediate below depth {}", ctx.depth),
                );
                for child in adopted {
                    let from = taxonomy
                        .move_node(&child, &id)
                        .expect("validated child of the same domain");
                    log.push(
                        STAGE,
                        Edit::Reparent {
                            child,
                            from,
                            to: id.clone(),
                        },
                        "adopted by intermediate",
                    );
                }
                out.intermediates += 1;
            }
            LayerEdit::Reassign { child, parent } => {
                let Some(child_id) = resolve_ref(taxonomy, &children_now, child) else {
                    drop_edit(&mut out, format!("reassign: `{child}` is not below the layer"));
                    continue;
                };
                let Some(parent_id) = resolve_ref(taxonomy, &layer, parent) else {
                    drop_edit(&mut out, format!("reassign: `{parent}` is not in the layer"));
                    continue;
                };
                if taxonomy.node(&child_id).and_then(|n| n.parent.as_ref()) == Some(&parent_id) {
                    drop_edit(&mut out, format!("reassign: `{child}` already sits under `{parent}`"));
                    continue;
                }
                match taxonomy.move_node(&child_id, &parent_id) {
                    Ok(from) => {
                        log.push(
                            STAGE,
                            Edit::Reparent {
                                child: child_id,
                                from,
                                to: parent_id,
                            },
                            "reassigned by expander",
                        );
                        out.reassigned += 1;
                    }
                    Err(e) => drop_edit(&mut out, format!("reassign `{child}`: {e}")),
                }
            }
        }
    }
    out
}

fn node_listing(taxonomy: &Taxonomy, ids: &[NodeId], with_parent: bool) -> String {
    let items: Vec<_> = ids
        .iter()
        .filter_map(|id| taxonomy.node(id))
        .map(|n| {
            let mut v = json!({"id": n.id, "label": n.label, "definition": n.definition});
            if with_parent {
                v["parent"] = json!(n.parent);
            }
            v
        })
        .collect();
    serde_json::to_string_pretty(&items).expect("listing serializes")
}

/// Asks the expander for edits to one layer and applies the valid ones.
pub fn expand_layer(
    gateway: &Gateway,
    expander: &AgentRole,
    taxonomy: &mut Taxonomy,
    ctx: &LayerContext<'_>,
    log: &mut EditLog,
) -> Result<LayerOutcome, PipelineError> {
    let layer = layer_at(taxonomy, ctx.domain, ctx.depth);
    let children: Vec<NodeId> = layer.iter().flat_map(|p| taxonomy.children(p).to_vec()).collect();
    let description = taxonomy
        .domain(ctx.domain)
        .map(|d| d.description.clone())
        .unwrap_or_default();
    let v = vars(&[
        ("domain", ctx.domain),
        ("domain_description", &description),
        ("depth", &ctx.depth.to_string()),
        ("layer", &node_listing(taxonomy, &layer, false)),
        ("children", &node_listing(taxonomy, &children, true)),
    ]);
    let edits = match gateway.chat_structured(expander, "expand", &v, parse_layer_edits) {
        Ok(e) => e,
        Err(GatewayError::MalformedResponse { reason, .. }) => {
            log::warn!(
                "{} depth {}: expander answer unusable ({reason}); layer left as is",
                ctx.domain,
                ctx.depth
            );
            return Ok(LayerOutcome {
                depth: ctx.depth,
                dropped: vec![format!("malformed expander answer: {reason}")],
                ..LayerOutcome::default()
            });
        }
        Err(e) => return Err(e.into()),
    };
    Ok(apply_layer_edits(taxonomy, ctx, &edits, log))
}

/// Sweeps one domain from the top layer down. Only layers that have
/// children are offered to the expander.
pub fn sweep_domain(
    gateway: &Gateway,
    expander: &AgentRole,
    taxonomy: &mut Taxonomy,
    domain: &str,
    top_level_limit: usize,
    log: &mut EditLog,
) -> Result<Vec<LayerOutcome>, PipelineError> {
    let mut outcomes = Vec::new();
    let mut depth = 2;
    loop {
        let layer = layer_at(taxonomy, domain, depth);
        if layer.iter().all(|id| taxonomy.children(id).is_empty()) {
            break;
        }
        let ctx = LayerContext {
            domain,
            depth,
            top_level_limit,
        };
        outcomes.push(expand_layer(gateway, expander, taxonomy, &ctx, log)?);
        depth += 1;
    }
    Ok(outcomes)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpandReport {
    pub nodes_before: usize,
    pub nodes_after: usize,
    pub within: DedupCounts,
    pub cross: DedupCounts,
    pub layers: BTreeMap<String, Vec<LayerOutcome>>,
    /// The final pass, split by pair kind.
    pub final_pass: DedupCounts,
}

#[derive(Debug, Clone)]
pub struct ExpandOutcome {
    pub taxonomy: Taxonomy,
    pub log: EditLog,
    pub report: ExpandReport,
}

pub struct ExpandSettings {
    pub threshold: f64,
    pub top_level_limit: usize,
}

/// Within-domain dedup, cross-domain dedup, the layer sweep, then a
/// global dedup over every non-root node.
pub fn run_expansion(
    gateway: &Gateway,
    judger: &AgentRole,
    expander: &AgentRole,
    settings: &ExpandSettings,
    input: &Taxonomy,
) -> Result<ExpandOutcome, PipelineError> {
    let mut taxonomy = input.clone();
    let mut log = EditLog::new();
    let mut vectors: NodeVectors = HashMap::new();
    let h = settings.threshold;
    let mut report = ExpandReport {
        nodes_before: taxonomy.len(),
        ..ExpandReport::default()
    };
    report.within = dedup_pass(
        gateway,
        judger,
        &mut taxonomy,
        &mut vectors,
        DedupScope::Within,
        h,
        &mut log,
    )?;
    report.cross = dedup_pass(
        gateway,
        judger,
        &mut taxonomy,
        &mut vectors,
        DedupScope::Cross,
        h,
        &mut log,
    )?;
    for domain in taxonomy.domain_names() {
        let outcomes = sweep_domain(
            gateway,
            expander,
            &mut taxonomy,
            &domain,
            settings.top_level_limit,
            &mut log,
        )?;
        report.layers.insert(domain, outcomes);
    }
    report.final_pass = dedup_pass(
        gateway,
        judger,
        &mut taxonomy,
        &mut vectors,
        DedupScope::All,
        h,
        &mut log,
    )?;
    report.nodes_after = taxonomy.len();

    let violations = taxonomy.validate();
    if !violations.is_empty() {
        return Err(PipelineError::InvariantViolation {
            stage: STAGE.into(),
            violations,
        });
    }
    Ok(ExpandOutcome { taxonomy, log, report })
}
