//! The eight fixed top-level domains that partition all event types.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the eight top-level thematic domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    Politics,
    Military,
    Diplomacy,
    Society,
    Ritual,
    #[serde(rename = "Economy-Livelihood")]
    EconomyLivelihood,
    Nature,
    Individual,
}

impl Domain {
    pub const ALL: [Domain; 8] = [
        Domain::Politics,
        Domain::Military,
        Domain::Diplomacy,
        Domain::Society,
        Domain::Ritual,
        Domain::EconomyLivelihood,
        Domain::Nature,
        Domain::Individual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Domain::Politics => "Politics",
            Domain::Military => "Military",
            Domain::Diplomacy => "Diplomacy",
            Domain::Society => "Society",
            Domain::Ritual => "Ritual",
            Domain::EconomyLivelihood => "Economy-Livelihood",
            Domain::Nature => "Nature",
            Domain::Individual => "Individual",
        }
    }

    /// Prose definition handed to the classifier, expander and enricher prompts.
    pub fn description(self) -> &'static str {
        match self {
            Domain::Politics => "Encompasses events related to state governance, power structures, policy formulation and implementation, as well as judicial and legal affairs.",
            Domain::Military => "Encompasses events related to warfare, military operations, strategic planning, and army organization and management.",
            Domain::Diplomacy => "Includes inter-state political and cultural interactions conducted through official channels, such as envoy missions, tribute relations, and peace negotiations.",
            Domain::Society => "Covers social activities, cultural practices, customs, and collective events involving groups, organizations, or institutions beyond the individual level.",
            Domain::Ritual => "Refers to ceremonial and ritual activities conducted by ancient states or royal families.",
            Domain::EconomyLivelihood => "Covers events related to economic production, resource distribution, daily subsistence, and state finance.",
            Domain::Nature => "Includes natural phenomena, related events, and their impacts on human society.",
            Domain::Individual => "Covers events related to individual life trajectories, identity attributes, personal behaviors, and social relationships.",
        }
    }

    /// Lowercase ASCII slug used as a node-id prefix.
    pub fn slug(self) -> &'static str {
        match self {
            Domain::Politics => "politics",
            Domain::Military => "military",
            Domain::Diplomacy => "diplomacy",
            Domain::Society => "society",
            Domain::Ritual => "ritual",
            Domain::EconomyLivelihood => "economy",
            Domain::Nature => "nature",
            Domain::Individual => "individual",
        }
    }

    pub fn spec(self) -> DomainSpec {
        DomainSpec {
            name: self,
            description: self.description().to_string(),
        }
    }

    /// Lenient parse for model output: case-insensitive, tolerant of the
    /// dash variants seen for "Economy-Livelihood".
    pub fn parse_loose(raw: &str) -> Option<Domain> {
        let cleaned: String = raw
            .trim()
            .trim_matches(|c: char| c == '"' || c == '\'' || c == '.' || c == '*')
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        match cleaned.as_str() {
            "politics" => Some(Domain::Politics),
            "military" => Some(Domain::Military),
            "diplomacy" => Some(Domain::Diplomacy),
            "society" => Some(Domain::Society),
            "ritual" => Some(Domain::Ritual),
            "economylivelihood" | "economy" => Some(Domain::EconomyLivelihood),
            "nature" => Some(Domain::Nature),
            "individual" => Some(Domain::Individual),
            _ => None,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown domain `{0}`")]
pub struct UnknownDomain(pub String);

impl FromStr for Domain {
    type Err = UnknownDomain;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Domain::ALL
            .into_iter()
            .find(|d| d.name() == s.trim())
            .ok_or_else(|| UnknownDomain(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub name: Domain,
    pub description: String,
}

/// Specs for all eight domains, in canonical order.
pub fn all_specs() -> Vec<DomainSpec> {
    Domain::ALL.into_iter().map(Domain::spec).collect()
}
