//! Metric report row and its JSON / markdown renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::CoverageResult;
use crate::metrics::{CscResult, GranularityResult, NoveltyResult, RecallResult, SignificanceResult};
use crate::taxonomy::{RootMode, StructuralStats};

/// Metric subset that can be attributed to a single domain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DomainMetrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_granularity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage_rate: Option<f64>,
    /// Share of all reference nodes recalled through this domain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub novelty: Option<f64>,
}

/// One row of the evaluation table. Reference-based fields are absent when
/// no reference taxonomy was supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub name: String,
    pub mode: RootMode,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_granularity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub novelty: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub significance: Option<f64>,
    pub structural: StructuralStats,
    pub per_domain: BTreeMap<String, DomainMetrics>,
    pub details: ReportDetails,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportDetails {
    pub nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub granularity: Option<GranularityResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csc: Option<CscResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csc_runtime_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<RecallResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub novelty: Option<NoveltyResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub significance: Option<SignificanceResult>,
    /// Metrics that could not be computed, with the reason.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub skipped: BTreeMap<String, String>,
}

impl MetricReport {
    pub fn new(name: impl Into<String>, mode: RootMode, threshold: f64, structural: StructuralStats) -> Self {
        MetricReport {
            name: name.into(),
            mode,
            threshold,
            path_granularity: None,
            csc: None,
            coverage_rate: None,
            node_recall: None,
            novelty: None,
            significance: None,
            structural,
            per_domain: BTreeMap::new(),
            details: ReportDetails::default(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "## {} ({} mode, threshold {})\n",
            self.name, self.mode, self.threshold
        );
        out.push_str(&render_metric_table(std::slice::from_ref(self)));
        out.push('\n');
        out.push_str(&render_structural_table(&[(self.name.as_str(), self.structural)]));
        if !self.per_domain.is_empty() {
            out.push('\n');
            out.push_str("| Domain | Path Gran. | CSC | Cover. Rate | Node Recall | Novelty |\n");
            out.push_str("|---|---|---|---|---|---|\n");
            for (domain, m) in &self.per_domain {
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {} | {} | {} |",
                    domain,
                    opt(m.path_granularity, 2),
                    opt(m.csc, 4),
                    opt(m.coverage_rate, 2),
                    opt(m.node_recall, 2),
                    opt(m.novelty.map(|v| v * 100.0), 2),
                );
            }
        }
        if !self.details.skipped.is_empty() {
            out.push('\n');
            for (metric, why) in &self.details.skipped {
                let _ = writeln!(out, "- {metric}: not computed ({why})");
            }
        }
        out
    }
}

fn opt(v: Option<f64>, decimals: usize) -> String {
    match v {
        Some(x) => format!("{x:.decimals$}"),
        None => "-".to_string(),
    }
}

/// Fixed decimals with trailing zeros removed: 2.50 → "2.5", 3.00 → "3".
pub fn trim_decimal(x: f64, decimals: usize) -> String {
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Evaluation table: percentages with two decimals, CSC and Significance
/// with four, Novelty shown as a percentage.
pub fn render_metric_table(rows: &[MetricReport]) -> String {
    let mut out = String::from(
        "| Method | Path Gran. | CSC | Cover. Rate | Node Recall | Novelty | Significance |\n\
         |---|---|---|---|---|---|---|\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} |",
            r.name,
            opt(r.path_granularity, 2),
            opt(r.csc, 4),
            opt(r.coverage_rate, 2),
            opt(r.node_recall, 2),
            opt(r.novelty.map(|v| v * 100.0), 2),
            opt(r.significance, 4),
        );
    }
    out
}

/// Structural statistics table: max depth, average leaf depth, branching.
pub fn render_structural_table(rows: &[(&str, StructuralStats)]) -> String {
    let mut out = String::from("| Method | Max. Dep. | Avg. Dep. | Branch |\n|---|---|---|---|\n");
    for (name, s) in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            name,
            s.max_depth,
            trim_decimal(s.avg_depth, 2),
            trim_decimal(s.branch_factor, 2)
        );
    }
    out
}
