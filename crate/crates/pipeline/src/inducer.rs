//! Stage 1: extract events, classify event types into domains, and build
//! each domain tree bottom-up with generator and merger agents.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use histaxo_core::domain::DomainSpec;
use histaxo_core::ingest::{event_type_frequency, normalize_event_type, rank_by_frequency, Chapter, EventRecord};
use histaxo_core::taxonomy::{NodeId, Parent, Provenance, Taxonomy, TaxonomyNode};
use histaxo_gateway::{AgentRole, Gateway, GatewayError, Vars};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::reply::{self, Category};
use crate::{vars, PipelineError};

/// A proposed category with the arena indices it covers.
type Grouped = (Category, Vec<usize>);

#[derive(Debug, Clone, Deserialize)]
struct ExtractedEvent {
    #[serde(default)]
    text: String,
    event_type: String,
    #[serde(default)]
    trigger: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct Extraction {
    events: Vec<ExtractedEvent>,
}

/// Runs every extractor on one chapter concurrently and returns the union
/// of their records, tagged with the extractor's model id. One failing
/// extractor only costs its own records.
pub fn extract_events(
    gateway: &Gateway,
    chapter: &Chapter,
    extractors: &[AgentRole],
) -> Result<Vec<EventRecord>, PipelineError> {
    if chapter.text.trim().is_empty() {
        return Err(PipelineError::EmptyChapter(format!(
            "{}/{}",
            chapter.book, chapter.chapter
        )));
    }
    let v = vars(&[
        ("book", &chapter.book),
        ("chapter", &chapter.chapter),
        ("text", &chapter.text),
    ]);
    let results = gateway.par_map(extractors, |role| {
        gateway.chat_structured(role, "extract", &v, |text| {
            let parsed: Extraction = reply::parse_as(text)?;
            Ok(parsed.events)
        })
    });
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (role, result) in extractors.iter().zip(results) {
        match result {
            Ok(events) => {
                for e in events {
                    let event_type = normalize_event_type(&e.event_type);
                    if event_type.is_empty() {
                        log::warn!("{}: dropping an event with an empty type", role.model_id);
                        continue;
                    }
                    let text = if e.text.trim().is_empty() {
                        chapter.text.clone()
                    } else {
                        e.text
                    };
                    let record = EventRecord {
                        text,
                        event_type,
                        trigger: e.trigger.filter(|t| !t.trim().is_empty()),
                        book: chapter.book.clone(),
                        chapter: chapter.chapter.clone(),
                        extractor: role.model_id.clone(),
                        domain: None,
                    };
                    for w in record.warnings() {
                        log::warn!("{}/{}: {w}", chapter.book, chapter.chapter);
                    }
                    records.push(record);
                }
            }
            Err(e) => {
                log::warn!(
                    "extractor {} failed on {}/{}: {e}",
                    role.model_id,
                    chapter.book,
                    chapter.chapter
                );
                errors.push(format!("{}: {e}", role.model_id));
            }
        }
    }
    if errors.len() == extractors.len() {
        return Err(PipelineError::AllExtractorsFailed {
            chapter: format!("{}/{}", chapter.book, chapter.chapter),
            errors,
        });
    }
    Ok(records)
}

pub fn domain_listing(specs: &[DomainSpec]) -> String {
    specs
        .iter()
        .map(|s| format!("- {}: {}", s.name.name(), s.description))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Asks the classifier for the domain of one event type.
pub fn classify_domain(
    gateway: &Gateway,
    role: &AgentRole,
    event_type: &str,
    samples: &[String],
    specs: &[DomainSpec],
) -> Result<String, PipelineError> {
    let allowed: Vec<String> = specs.iter().map(|s| s.name.name().to_string()).collect();
    let sample_text = samples.iter().map(|s| format!("- {s}")).collect::<Vec<_>>().join("\n");
    let v = vars(&[
        ("event_type", event_type),
        ("samples", &sample_text),
        ("domains", &domain_listing(specs)),
    ]);
    Ok(gateway.chat_structured(role, "classify", &v, |text| reply::parse_domain(text, &allowed))?)
}

/// Distinct event types with up to `limit` distinct sample passages each,
/// in first-seen order.
pub fn type_samples(events: &[EventRecord], limit: usize) -> Vec<(String, Vec<String>)> {
    let mut order: Vec<String> = Vec::new();
    let mut samples: HashMap<String, Vec<String>> = HashMap::new();
    for e in events {
        let key = normalize_event_type(&e.event_type);
        if key.is_empty() {
            continue;
        }
        let entry = samples.entry(key.clone()).or_insert_with(|| {
            order.push(key.clone());
            Vec::new()
        });
        if entry.len() < limit.max(1) && !entry.contains(&e.text) {
            entry.push(e.text.clone());
        }
    }
    order
        .into_iter()
        .map(|k| {
            let s = samples.remove(&k).unwrap_or_default();
            (k, s)
        })
        .collect()
}

/// Classifies every distinct event type concurrently.
pub fn classify_all(
    gateway: &Gateway,
    role: &AgentRole,
    types: &[(String, Vec<String>)],
    specs: &[DomainSpec],
) -> Result<BTreeMap<String, String>, PipelineError> {
    let results = gateway.par_map(types, |(t, samples)| classify_domain(gateway, role, t, samples, specs));
    let mut out = BTreeMap::new();
    for ((t, _), result) in types.iter().zip(results) {
        out.insert(t.clone(), result?);
    }
    Ok(out)
}

/// One event type entering induction.
#[derive(Debug, Clone, PartialEq)]
pub struct InduceItem {
    pub label: String,
    pub definition: String,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InduceSettings {
    /// Stop once the top level is narrower than this.
    pub top_level_limit: usize,
    pub max_rounds: usize,
}

impl Default for InduceSettings {
    fn default() -> Self {
        InduceSettings {
            top_level_limit: 10,
            max_rounds: 6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DomainInduction {
    pub domain: String,
    pub leaves: usize,
    /// Rounds that produced a new level.
    pub rounds: usize,
    /// Width of every level, leaves first.
    pub level_sizes: Vec<usize>,
    /// Rounds whose output did not shrink the level and were discarded.
    pub stalled_rounds: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
struct Proto {
    label: String,
    definition: String,
    children: Vec<usize>,
}

struct Proposal {
    label: String,
    definition: String,
    children: Vec<usize>,
}

/// Assigns `wanted` labels to unassigned items of `pool` by exact label.
/// Returns the matched items and the labels that matched nothing.
fn claim(wanted: &[String], pool: &[usize], arena: &[Proto], taken: &mut BTreeSet<usize>) -> (Vec<usize>, Vec<String>) {
    let mut matched = Vec::new();
    let mut unknown = Vec::new();
    for label in wanted {
        match pool.iter().find(|&&i| arena[i].label == *label && !taken.contains(&i)) {
            Some(&i) => {
                taken.insert(i);
                matched.push(i);
            }
            None => {
                if !pool.iter().any(|&i| arena[i].label == *label) {
                    unknown.push(label.clone());
                }
            }
        }
    }
    (matched, unknown)
}

fn uncovered_suffix(what: &str, labels: &[String]) -> String {
    format!(
        "\n\nThese {what} were not assigned to any category: {}\nAnswer with the same JSON format, covering only these {what}. You may reuse category labels from your previous answer.",
        serde_json::to_string(labels).expect("labels serialize")
    )
}

struct DomainContext<'a> {
    gateway: &'a Gateway,
    spec: &'a DomainSpec,
    generators: &'a [AgentRole],
    merger: &'a AgentRole,
}

impl DomainContext<'_> {
    fn base_vars(&self, round: usize) -> Vars {
        vars(&[
            ("domain", self.spec.name.name()),
            ("domain_description", &self.spec.description),
            ("round", &round.to_string()),
        ])
    }

    /// Categories for `pool`, one re-prompt for uncovered items.
    #[allow(clippy::too_many_arguments)]
    fn group(
        &self,
        role: &AgentRole,
        template: &str,
        field: &str,
        payload: String,
        pool: &[usize],
        arena: &[Proto],
        round: usize,
        warnings: &mut Vec<String>,
    ) -> Result<(Vec<Grouped>, Vec<usize>), GatewayError> {
        let mut v = self.base_vars(round);
        v.insert(field.to_string(), payload);
        let mut taken = BTreeSet::new();
        let mut groups: Vec<Grouped> = Vec::new();
        let mut absorb = |cats: Vec<Category>, taken: &mut BTreeSet<usize>, warnings: &mut Vec<String>| {
            for cat in cats {
                let (matched, unknown) = claim(&cat.children, pool, arena, taken);
                for u in unknown {
                    warnings.push(format!(
                        "{template} round {round}: `{}` lists unknown item `{u}`",
                        cat.label
                    ));
                }
                match groups.iter_mut().find(|(c, _)| c.label == cat.label) {
                    Some((existing, kids)) => {
                        if existing.definition.is_empty() {
                            existing.definition = cat.definition.clone();
                        }
                        kids.extend(matched);
                    }
                    None => groups.push((cat, matched)),
                }
            }
        };
        let first = self
            .gateway
            .chat_structured(role, template, &v, reply::parse_categories)?;
        absorb(first, &mut taken, warnings);
        let missing: Vec<String> = pool
            .iter()
            .filter(|i| !taken.contains(i))
            .map(|&i| arena[i].label.clone())
            .collect();
        if !missing.is_empty() {
            let suffix = uncovered_suffix("items", &missing);
            match self
                .gateway
                .chat_structured_from(role, template, &v, 1, &suffix, reply::parse_categories)
            {
                Ok(more) => absorb(more, &mut taken, warnings),
                Err(GatewayError::MalformedResponse { reason, .. }) => {
                    warnings.push(format!(
                        "{template} round {round}: coverage re-prompt unusable: {reason}"
                    ));
                }
                Err(e) => return Err(e),
            }
        }
        let groups: Vec<Grouped> = groups
            .into_iter()
            .filter(|(c, kids)| {
                if kids.is_empty() {
                    warnings.push(format!(
                        "{template} round {round}: category `{}` covers nothing, dropped",
                        c.label
                    ));
                }
                !kids.is_empty()
            })
            .collect();
        let left: Vec<usize> = pool.iter().copied().filter(|i| !taken.contains(i)).collect();
        Ok((groups, left))
    }

    fn round(
        &self,
        level: &[usize],
        arena: &mut Vec<Proto>,
        round: usize,
        warnings: &mut Vec<String>,
    ) -> Result<Vec<usize>, PipelineError> {
        // round-robin partition in level order
        let g = self.generators.len().min(level.len()).max(1);
        let partitions: Vec<(usize, Vec<usize>)> = (0..g)
            .map(|k| (k, level.iter().copied().skip(k).step_by(g).collect()))
            .collect();
        let snapshot: &[Proto] = arena;
        let outputs = self.gateway.par_map(&partitions, |(k, pool)| {
            let items: Vec<_> = pool
                .iter()
                .map(|&i| json!({"label": snapshot[i].label, "definition": snapshot[i].definition}))
                .collect();
            let mut local = Vec::new();
            let out = self.group(
                &self.generators[*k],
                "generate",
                "items",
                serde_json::to_string_pretty(&items).expect("items serialize"),
                pool,
                snapshot,
                round,
                &mut local,
            );
            (out, local)
        });

        let mut proposals: Vec<Proposal> = Vec::new();
        let mut orphans: Vec<usize> = Vec::new();
        for (out, local) in outputs {
            warnings.extend(local);
            let (groups, left) = out?;
            for (cat, kids) in groups {
                match proposals.iter_mut().find(|p| p.label == cat.label) {
                    Some(p) => p.children.extend(kids),
                    None => proposals.push(Proposal {
                        label: cat.label,
                        definition: cat.definition,
                        children: kids,
                    }),
                }
            }
            if !left.is_empty() {
                warnings.push(format!(
                    "generate round {round}: {} item(s) left unassigned and carried up",
                    left.len()
                ));
            }
            orphans.extend(left);
        }
        orphans.sort_by_key(|i| level.iter().position(|x| x == i));
        if proposals.is_empty() {
            return Ok(orphans);
        }

        // merger works on the proposals as a level of their own
        let base = arena.len();
        for p in &proposals {
            arena.push(Proto {
                label: p.label.clone(),
                definition: p.definition.clone(),
                children: p.children.clone(),
            });
        }
        let pool: Vec<usize> = (base..arena.len()).collect();
        let listing: Vec<_> = proposals
            .iter()
            .map(|p| {
                json!({
                    "label": p.label,
                    "definition": p.definition,
                    "children": p.children.iter().map(|&c| arena[c].label.clone()).collect::<Vec<_>>(),
                })
            })
            .collect();
        let (groups, standalone) = self.group(
            self.merger,
            "merge",
            "proposals",
            serde_json::to_string_pretty(&listing).expect("proposals serialize"),
            &pool,
            arena,
            round,
            warnings,
        )?;
        let mut next = Vec::new();
        for (cat, members) in groups {
            let children: Vec<usize> = members.iter().flat_map(|&m| arena[m].children.clone()).collect();
            let definition = if cat.definition.is_empty() {
                arena[members[0]].definition.clone()
            } else {
                cat.definition
            };
            arena.push(Proto {
                label: cat.label,
                definition,
                children,
            });
            next.push(arena.len() - 1);
        }
        if !standalone.is_empty() {
            warnings.push(format!(
                "merge round {round}: {} proposal(s) not unified, kept as their own categories",
                standalone.len()
            ));
        }
        next.extend(standalone);
        next.extend(orphans);
        Ok(next)
    }
}

/// Builds one domain tree under a new domain root in `taxonomy`.
///
/// Every round runs the generators on a round-robin partition of the
/// current level, then the merger on their proposals. A round whose output
/// is not narrower than its input is discarded. At least one round always
/// runs; induction stops once the top level is narrower than
/// `top_level_limit`, or when a round is discarded on a level that is already
/// that narrow. It fails after two consecutive discarded rounds or
/// `max_rounds` rounds.
pub fn induce_domain_taxonomy(
    gateway: &Gateway,
    settings: InduceSettings,
    spec: &DomainSpec,
    items: &[InduceItem],
    generators: &[AgentRole],
    merger: &AgentRole,
    taxonomy: &mut Taxonomy,
) -> Result<DomainInduction, PipelineError> {
    let slug = spec.name.slug();
    let name = spec.name.name();
    let mut report = DomainInduction {
        domain: name.to_string(),
        leaves: items.len(),
        ..DomainInduction::default()
    };
    let root = taxonomy.add_domain_root(NodeId::new(slug), name, &spec.description, Provenance::Induced)?;
    if items.is_empty() {
        report.warnings.push("no event types; domain root only".into());
        return Ok(report);
    }
    if generators.is_empty() {
        return Err(PipelineError::Config("no generator roles".into()));
    }
    let ctx = DomainContext {
        gateway,
        spec,
        generators,
        merger,
    };
    let mut arena: Vec<Proto> = items
        .iter()
        .map(|i| Proto {
            label: i.label.clone(),
            definition: i.definition.clone(),
            children: Vec::new(),
        })
        .collect();
    let mut level: Vec<usize> = (0..arena.len()).collect();
    report.level_sizes.push(level.len());
    let mut attempted = 0;
    let mut stalls = 0;
    loop {
        if report.rounds >= 1 && level.len() < settings.top_level_limit {
            break;
        }
        if attempted >= settings.max_rounds {
            return Err(PipelineError::NonConvergence {
                domain: name.to_string(),
                rounds: attempted,
                width: level.len(),
            });
        }
        attempted += 1;
        let mark = arena.len();
        let next = ctx.round(&level, &mut arena, attempted, &mut report.warnings)?;
        if next.len() >= level.len() {
            arena.truncate(mark);
            stalls += 1;
            report.stalled_rounds += 1;
            report.warnings.push(format!(
                "round {attempted} did not shrink the level ({} items)",
                level.len()
            ));
            if level.len() < settings.top_level_limit {
                // already narrow enough; the items hang off the root directly
                break;
            }
            if stalls >= 2 {
                return Err(PipelineError::NonConvergence {
                    domain: name.to_string(),
                    rounds: attempted,
                    width: level.len(),
                });
            }
            continue;
        }
        stalls = 0;
        report.rounds += 1;
        report.level_sizes.push(next.len());
        level = next;
    }

    // attach top-down, minting ids in breadth-first order
    let mut queue: VecDeque<(usize, NodeId)> = level.iter().map(|&i| (i, root.clone())).collect();
    while let Some((i, parent)) = queue.pop_front() {
        let id = taxonomy.mint_id(slug);
        let proto = &arena[i];
        taxonomy.add_node(
            TaxonomyNode::new(
                id.clone(),
                proto.label.as_str(),
                proto.definition.as_str(),
                name,
                Provenance::Induced,
            ),
            Parent::Node(parent),
        )?;
        for &c in &proto.children {
            queue.push_back((c, id.clone()));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InduceReport {
    pub event_types: usize,
    pub domains: Vec<DomainInduction>,
    /// Event type → assigned domain.
    pub classification: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct InduceOutcome {
    pub taxonomy: Taxonomy,
    /// Input events with their assigned domain.
    pub events: Vec<EventRecord>,
    pub report: InduceReport,
}

pub struct InduceRoles<'a> {
    pub classifier: &'a AgentRole,
    pub generators: &'a [AgentRole],
    pub merger: &'a AgentRole,
}

/// Classifies the event types of `events` and induces all eight domain
/// trees. Domains are processed one after another so node ids are stable.
pub fn run_induction(
    gateway: &Gateway,
    settings: InduceSettings,
    classify_samples: usize,
    roles: &InduceRoles<'_>,
    events: &[EventRecord],
) -> Result<InduceOutcome, PipelineError> {
    let specs: Vec<DomainSpec> = histaxo_core::domain::all_specs();
    let samples = type_samples(events, classify_samples);
    let classification = classify_all(gateway, roles.classifier, &samples, &specs)?;
    let ranked = rank_by_frequency(&event_type_frequency(events));

    let mut taxonomy = Taxonomy::new();
    let mut domains = Vec::new();
    for spec in &specs {
        let items: Vec<InduceItem> = ranked
            .iter()
            .filter(|(t, _)| classification.get(t).map(String::as_str) == Some(spec.name.name()))
            .map(|(t, c)| InduceItem {
                label: t.clone(),
                definition: String::new(),
                count: *c,
            })
            .collect();
        let report = induce_domain_taxonomy(
            gateway,
            settings,
            spec,
            &items,
            roles.generators,
            roles.merger,
            &mut taxonomy,
        )?;
        for w in &report.warnings {
            log::warn!("{}: {w}", spec.name.name());
        }
        domains.push(report);
    }
    let events = events
        .iter()
        .map(|e| {
            let mut e = e.clone();
            e.domain = classification.get(&normalize_event_type(&e.event_type)).cloned();
            e
        })
        .collect();
    Ok(InduceOutcome {
        taxonomy,
        events,
        report: InduceReport {
            event_types: ranked.len(),
            domains,
            classification,
        },
    })
}
