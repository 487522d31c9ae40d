//! Prompt templates with `{{name}}` placeholders.
//!
//! Defaults are compiled in; a directory of `<id>.txt` files can override any
//! of them or add new ones.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::GatewayError;
use crate::role::Vars;

const DEFAULTS: &[(&str, &str)] = &[
    ("extract", include_str!("../templates/extract.txt")),
    ("classify", include_str!("../templates/classify.txt")),
    ("generate", include_str!("../templates/generate.txt")),
    ("merge", include_str!("../templates/merge.txt")),
    ("judge", include_str!("../templates/judge.txt")),
    ("judge_cross", include_str!("../templates/judge_cross.txt")),
    ("expand", include_str!("../templates/expand.txt")),
    (
        "conceptualize_topic",
        include_str!("../templates/conceptualize_topic.txt"),
    ),
    (
        "conceptualize_relation",
        include_str!("../templates/conceptualize_relation.txt"),
    ),
    ("enrich_domain", include_str!("../templates/enrich_domain.txt")),
    ("enrich_position", include_str!("../templates/enrich_position.txt")),
    ("granularity", include_str!("../templates/granularity.txt")),
];

#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<String, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet {
            templates: DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl TemplateSet {
    /// Defaults overlaid with every `*.txt` file in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, GatewayError> {
        let mut set = Self::default();
        let entries = fs::read_dir(dir).map_err(|e| GatewayError::io(format!("reading {}", dir.display()), e))?;
        let mut paths: Vec<_> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for path in paths {
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let text =
                fs::read_to_string(&path).map_err(|e| GatewayError::io(format!("reading {}", path.display()), e))?;
            set.templates.insert(id, text);
        }
        Ok(set)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn get(&self, id: &str) -> Option<&str> {
        self.templates.get(id).map(String::as_str)
    }

    pub fn insert(&mut self, id: &str, text: &str) {
        self.templates.insert(id.to_string(), text.to_string());
    }

    /// Fills every placeholder. An unknown template or an unbound
    /// placeholder is a `TemplateMissing` error.
    pub fn render(&self, id: &str, vars: &Vars) -> Result<String, GatewayError> {
        let template = self.get(id).ok_or_else(|| GatewayError::TemplateMissing {
            template: id.to_string(),
            detail: "no such template".to_string(),
        })?;
        render(template, vars).map_err(|name| GatewayError::TemplateMissing {
            template: id.to_string(),
            detail: format!("variable `{name}` is not bound"),
        })
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Replaces `{{name}}`; returns the first unbound name as the error.
pub fn render(template: &str, vars: &Vars) -> Result<String, String> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) if end > 0 && after[..end].chars().all(is_name_char) => {
                let name = &after[..end];
                let value = vars.get(name).ok_or_else(|| name.to_string())?;
                out.push_str(value);
                rest = &after[end + 2..];
            }
            _ => {
                out.push_str("{{");
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Placeholder names used by a template, in order of first use.
pub fn placeholders(template: &str) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) if end > 0 && after[..end].chars().all(is_name_char) => {
                let name = after[..end].to_string();
                if !names.contains(&name) {
                    names.push(name);
                }
                rest = &after[end + 2..];
            }
            _ => rest = after,
        }
    }
    names
}
