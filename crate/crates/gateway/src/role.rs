use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleName {
    Extractor,
    Classifier,
    Generator,
    Merger,
    Judger,
    Expander,
    Conceptualizer,
    Enricher,
    GranularityJudge,
}

impl RoleName {
    pub fn as_str(self) -> &'static str {
        match self {
            RoleName::Extractor => "extractor",
            RoleName::Classifier => "classifier",
            RoleName::Generator => "generator",
            RoleName::Merger => "merger",
            RoleName::Judger => "judger",
            RoleName::Expander => "expander",
            RoleName::Conceptualizer => "conceptualizer",
            RoleName::Enricher => "enricher",
            RoleName::GranularityJudge => "granularity_judge",
        }
    }
}

impl fmt::Display for RoleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One agent binding: a role served by one model of one provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRole {
    pub name: RoleName,
    pub provider: String,
    pub model_id: String,
    /// `None` leaves the provider default in place.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

impl AgentRole {
    pub fn new(name: RoleName, provider: &str, model_id: &str, temperature: Option<f64>) -> Self {
        AgentRole {
            name,
            provider: provider.to_string(),
            model_id: model_id.to_string(),
            temperature,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.model_id.trim().is_empty() {
            return Err(format!("{}: empty model id", self.name));
        }
        match self.temperature {
            Some(t) if t.is_nan() || t < 0.0 => Err(format!("{}: temperature {t} is negative", self.name)),
            _ => Ok(()),
        }
    }
}

pub type Vars = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Chat,
    Embed,
}

/// A request before rendering: role, template and bound variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderRequest {
    pub role: AgentRole,
    pub template_id: String,
    pub variables: Vars,
    pub kind: RequestKind,
}

/// What a chat backend receives for one attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatCall<'a> {
    pub provider: &'a str,
    pub model: &'a str,
    pub temperature: Option<f64>,
    pub template_id: &'a str,
    pub variables: &'a Vars,
    pub prompt: &'a str,
    /// 0 for the first prompt, 1 for the re-prompt after a parse failure.
    pub reprompt: u32,
}
