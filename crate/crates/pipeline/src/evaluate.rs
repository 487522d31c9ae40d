//! Evaluation of a finished taxonomy into one metric report row.

use std::collections::HashMap;
use std::time::Instant;

use histaxo_core::ingest::{normalize_event_type, EventRecord};
use histaxo_core::metrics::{self, HeldOutEvent, NodeVectors, PairJudgment};
use histaxo_core::report::{DomainMetrics, MetricReport};
use histaxo_core::{RootMode, Taxonomy};
use histaxo_gateway::{AgentRole, Gateway, GatewayError};

use crate::expander::refresh_vectors;
use crate::{reply, vars, PipelineError};

/// Vectors for every node, including domain roots.
pub fn node_vectors(gateway: &Gateway, taxonomy: &Taxonomy) -> Result<NodeVectors, PipelineError> {
    let mut vectors = NodeVectors::new();
    refresh_vectors(gateway, taxonomy, &mut vectors)?;
    Ok(vectors)
}

/// Distinct event types of `events`, embedded by label. The domain is the
/// first one recorded for the type.
pub fn held_out_events(gateway: &Gateway, events: &[EventRecord]) -> Result<Vec<HeldOutEvent>, PipelineError> {
    let mut order: Vec<(String, Option<String>)> = Vec::new();
    for e in events {
        let t = normalize_event_type(&e.event_type);
        if t.is_empty() {
            continue;
        }
        match order.iter_mut().find(|(k, _)| *k == t) {
            Some((_, d)) => {
                if d.is_none() {
                    d.clone_from(&e.domain);
                }
            }
            None => order.push((t, e.domain.clone())),
        }
    }
    if order.is_empty() {
        return Ok(Vec::new());
    }
    let labels: Vec<String> = order.iter().map(|(t, _)| t.clone()).collect();
    let vectors = gateway.embed(&labels)?;
    Ok(order
        .into_iter()
        .zip(vectors)
        .map(|((event_type, domain), v)| HeldOutEvent {
            event_type,
            vector: v.values,
            domain,
        })
        .collect())
}

fn parse_score(text: &str) -> Result<u8, String> {
    match reply::parse_field(text, "score")?.as_str() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(format!("`score` must be 0 or 1, got `{other}`")),
    }
}

/// Judges every parent-child pair once per distinct (parent text, child
/// text). A pair the judge cannot score stays `None`.
pub fn judge_pairs(
    gateway: &Gateway,
    judge: &AgentRole,
    taxonomy: &Taxonomy,
) -> Result<Vec<PairJudgment>, PipelineError> {
    let pairs = taxonomy.parent_child_pairs();
    let mut keys: Vec<(String, String, String, String)> = Vec::new();
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    let mut slots = Vec::with_capacity(pairs.len());
    for (p, c) in &pairs {
        let key = (p.embedding_text(), c.embedding_text());
        let slot = *index.entry(key).or_insert_with(|| {
            keys.push((
                p.label.clone(),
                p.definition.clone(),
                c.label.clone(),
                c.definition.clone(),
            ));
            keys.len() - 1
        });
        slots.push(slot);
    }
    let scores = gateway.par_map(&keys, |(pl, pd, cl, cd)| {
        let v = vars(&[
            ("parent_label", pl),
            ("parent_definition", pd),
            ("child_label", cl),
            ("child_definition", cd),
        ]);
        gateway.chat_structured(judge, "granularity", &v, parse_score)
    });
    let mut resolved = Vec::with_capacity(scores.len());
    for (key, s) in keys.iter().zip(scores) {
        resolved.push(match s {
            Ok(v) => Some(v),
            Err(e @ (GatewayError::MalformedResponse { .. } | GatewayError::ProviderUnavailable { .. })) => {
                log::warn!("granularity of `{}` > `{}` unscored: {e}", key.0, key.2);
                None
            }
            Err(e) => return Err(e.into()),
        });
    }
    Ok(pairs
        .iter()
        .zip(slots)
        .map(|((p, c), slot)| PairJudgment {
            parent: p.id.clone(),
            child: c.id.clone(),
            domain: c.domain.clone(),
            score: resolved[slot],
        })
        .collect())
}

pub struct EvalRequest<'a> {
    pub name: &'a str,
    pub taxonomy: &'a Taxonomy,
    pub reference: Option<&'a Taxonomy>,
    pub events: Option<&'a [EventRecord]>,
    pub mode: RootMode,
    pub threshold: f64,
    /// Path granularity is skipped without a judge.
    pub judge: Option<&'a AgentRole>,
    /// Adds the CSC wall time; off for reproducible reports.
    pub record_timing: bool,
}

fn entry<'m>(report: &'m mut MetricReport, domain: &str) -> &'m mut DomainMetrics {
    report.per_domain.entry(domain.to_string()).or_default()
}

/// Computes every metric the inputs allow. A metric that cannot be
/// computed is listed under `details.skipped` with the reason.
pub fn evaluate(gateway: &Gateway, req: &EvalRequest<'_>) -> Result<MetricReport, PipelineError> {
    let tax = req.taxonomy;
    let structural = tax.structural_stats(req.mode)?;
    let mut report = MetricReport::new(req.name, req.mode, req.threshold, structural);
    report.details.nodes = tax.len();
    for d in tax.domain_names() {
        entry(&mut report, &d);
    }
    let vectors = node_vectors(gateway, tax)?;
    let skip = |report: &mut MetricReport, metric: &str, why: String| {
        log::warn!("{metric} skipped: {why}");
        report.details.skipped.insert(metric.to_string(), why);
    };

    match req.judge {
        None => skip(
            &mut report,
            "path_granularity",
            "no granularity judge configured".into(),
        ),
        Some(judge) => match judge_pairs(gateway, judge, tax) {
            Err(PipelineError::Gateway(e @ GatewayError::MissingFixture { .. })) => {
                skip(&mut report, "path_granularity", e.to_string())
            }
            Err(e) => return Err(e),
            Ok(judgments) => match metrics::path_granularity(&judgments) {
                Ok(g) => {
                    report.path_granularity = Some(g.percent);
                    for (d, f) in &g.per_domain {
                        entry(&mut report, d).path_granularity = f.percent();
                    }
                    report.details.granularity = Some(g);
                }
                Err(e) => skip(&mut report, "path_granularity", e.to_string()),
            },
        },
    }

    let started = Instant::now();
    match metrics::csc(tax, &vectors, req.mode) {
        Ok(c) => {
            report.csc = Some(c.value);
            for s in &c.per_domain {
                if let Some(t) = s.tau {
                    entry(&mut report, &s.scope).csc = Some(t);
                }
            }
            report.details.csc = Some(c);
            if req.record_timing {
                report.details.csc_runtime_ms = Some(started.elapsed().as_millis() as u64);
            }
        }
        Err(e) => skip(&mut report, "csc", e.to_string()),
    }

    let held_out = match req.events {
        Some(events) => held_out_events(gateway, events)?,
        None => Vec::new(),
    };
    if req.events.is_none() {
        skip(&mut report, "coverage_rate", "no held-out events supplied".into());
    } else {
        match metrics::coverage_rate(tax, &vectors, &held_out, req.threshold) {
            Ok(c) => {
                report.coverage_rate = Some(c.percent);
                for (d, f) in &c.per_domain {
                    entry(&mut report, d).coverage_rate = f.percent();
                }
                report.details.coverage = Some(c);
            }
            Err(e) => skip(&mut report, "coverage_rate", e.to_string()),
        }
    }

    let Some(reference) = req.reference else {
        return Ok(report);
    };
    let ref_vectors = node_vectors(gateway, reference)?;
    match metrics::node_recall(tax, &vectors, reference, &ref_vectors, req.threshold) {
        Ok(r) => {
            report.node_recall = Some(r.percent);
            for (d, hits) in &r.per_domain {
                entry(&mut report, d).node_recall = Some(100.0 * *hits as f64 / r.total as f64);
            }
            report.details.recall = Some(r);
        }
        Err(e) => skip(&mut report, "node_recall", e.to_string()),
    }
    match metrics::novelty(tax, &vectors, reference, &ref_vectors, req.threshold) {
        Ok(n) => {
            report.novelty = Some(n.value);
            for (d, f) in &n.per_domain {
                entry(&mut report, d).novelty = (f.total > 0).then(|| f.hits as f64 / f.total as f64);
            }
            report.details.novelty = Some(n);
        }
        Err(e) => skip(&mut report, "novelty", e.to_string()),
    }
    if req.events.is_none() {
        skip(&mut report, "significance", "no held-out events supplied".into());
    } else {
        match metrics::significance(tax, &vectors, reference, &ref_vectors, &held_out, req.threshold) {
            Ok(s) => {
                report.significance = Some(s.value);
                report.details.significance = Some(s);
            }
            Err(e) => skip(&mut report, "significance", e.to_string()),
        }
    }
    Ok(report)
}
