//! Parsing of structured model answers.

use histaxo_core::Domain;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

/// The JSON object in a reply, tolerating code fences and surrounding prose.
pub fn json_object(text: &str) -> Result<Value, String> {
    let trimmed = text.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        return Ok(v);
    }
    let start = trimmed.find('{').ok_or("no JSON object in the answer")?;
    let end = trimmed.rfind('}').ok_or("no JSON object in the answer")?;
    if end < start {
        return Err("no JSON object in the answer".into());
    }
    serde_json::from_str(&trimmed[start..=end]).map_err(|e| format!("invalid JSON: {e}"))
}

pub fn parse_as<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    serde_json::from_value(json_object(text)?).map_err(|e| format!("unexpected JSON shape: {e}"))
}

/// A domain name from `allowed`, given as `{"domain": ...}` or bare text.
pub fn parse_domain(text: &str, allowed: &[String]) -> Result<String, String> {
    let raw = match json_object(text) {
        Ok(v) => v
            .get("domain")
            .and_then(Value::as_str)
            .ok_or("answer has no \"domain\" field")?
            .to_string(),
        Err(_) => text.trim().trim_matches('"').to_string(),
    };
    if let Some(hit) = allowed.iter().find(|a| a.as_str() == raw.trim()) {
        return Ok(hit.clone());
    }
    if let Some(d) = Domain::parse_loose(&raw) {
        if let Some(hit) = allowed.iter().find(|a| a.as_str() == d.name()) {
            return Ok(hit.clone());
        }
    }
    Err(format!("`{}` is not one of the listed domains", raw.trim()))
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Category {
    pub label: String,
    #[serde(default)]
    pub definition: String,
    #[serde(default, alias = "members")]
    pub children: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct Categories {
    categories: Vec<Category>,
}

/// `{"categories": [{"label", "definition", "children" | "members"}]}`.
pub fn parse_categories(text: &str) -> Result<Vec<Category>, String> {
    let parsed: Categories = parse_as(text)?;
    for c in &parsed.categories {
        if c.label.trim().is_empty() {
            return Err("a category has an empty label".into());
        }
    }
    Ok(parsed
        .categories
        .into_iter()
        .map(|c| Category {
            label: c.label.trim().to_string(),
            definition: c.definition.trim().to_string(),
            children: c.children.iter().map(|s| s.trim().to_string()).collect(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Concept {
    pub label: String,
    #[serde(default)]
    pub definition: String,
}

#[derive(Deserialize)]
struct Concepts {
    event_types: Vec<Concept>,
}

/// `{"event_types": [{"label", "definition"}]}`; blank labels are dropped.
pub fn parse_concepts(text: &str) -> Result<Vec<Concept>, String> {
    let parsed: Concepts = parse_as(text)?;
    Ok(parsed
        .event_types
        .into_iter()
        .filter(|c| !c.label.trim().is_empty())
        .map(|c| Concept {
            label: c.label.trim().to_string(),
            definition: c.definition.trim().to_string(),
        })
        .collect())
}

/// A string field of the answer object.
pub fn parse_field(text: &str, field: &str) -> Result<String, String> {
    let v = json_object(text)?;
    match v.get(field) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.trim().to_string()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        _ => Err(format!("answer has no usable \"{field}\" field")),
    }
}
