//! Deterministic offline provider.
//!
//! Chat answers come from fixture rules keyed by template id. Embeddings are
//! unit vectors drawn from a generator seeded with `sha256(seed, text)`,
//! unless a fixture pins the vector for that text.
//!
//! Fixture file layout (several files in a directory are merged in file
//! name order; chat rules are concatenated, later embedding entries win):
//!
//! ```json
//! {
//!   "dim": 8,
//!   "chat": {
//!     "classify": [
//!       {"when": {"event_type": "冊封使節"}, "reply": {"domain": "Diplomacy"}},
//!       {"when_contains": {"samples": "旱"}, "model": "gpt-4o", "replies": ["?", {"domain": "Nature"}]},
//!       {"error": "transient"}
//!     ]
//!   },
//!   "embeddings": {
//!     "叛亂": [1, 0, 0, 0, 0, 0, 0, 0],
//!     "謀反": {"near": "叛亂", "similarity": 0.9},
//!     "冊封": {"axis": 3}
//!   }
//! }
//! ```
//!
//! The first rule whose conditions hold answers. `replies` is indexed by the
//! re-prompt number and repeats its last entry.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::backend::{ChatBackend, EmbeddingBackend};
use crate::error::{BackendError, GatewayError};
use crate::role::ChatCall;

pub const DEFAULT_MOCK_DIM: usize = 256;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatRule {
    #[serde(default)]
    pub when: BTreeMap<String, String>,
    #[serde(default)]
    pub when_contains: BTreeMap<String, String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub reply: Option<Value>,
    #[serde(default)]
    pub replies: Vec<Value>,
    /// `"transient"` or `"fatal"`: answer with a backend error instead.
    #[serde(default)]
    pub error: Option<String>,
}

impl ChatRule {
    fn matches(&self, call: &ChatCall<'_>) -> bool {
        if let Some(m) = &self.model {
            if m != call.model {
                return false;
            }
        }
        self.when.iter().all(|(k, v)| call.variables.get(k) == Some(v))
            && self
                .when_contains
                .iter()
                .all(|(k, v)| call.variables.get(k).is_some_and(|x| x.contains(v.as_str())))
    }

    fn answer(&self, reprompt: u32) -> Option<String> {
        let value = if self.replies.is_empty() {
            self.reply.as_ref()?
        } else {
            let i = (reprompt as usize).min(self.replies.len() - 1);
            &self.replies[i]
        };
        Some(match value {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum EmbeddingFixture {
    Vector(Vec<f64>),
    Axis { axis: usize },
    Near { near: String, similarity: f64 },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureFile {
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub chat: BTreeMap<String, Vec<ChatRule>>,
    #[serde(default)]
    pub embeddings: BTreeMap<String, EmbeddingFixture>,
}

#[derive(Debug, Clone)]
pub struct MockProvider {
    seed: u64,
    dim: usize,
    chat: BTreeMap<String, Vec<ChatRule>>,
    embeddings: BTreeMap<String, EmbeddingFixture>,
}

impl MockProvider {
    pub fn new(seed: u64) -> Self {
        MockProvider {
            seed,
            dim: DEFAULT_MOCK_DIM,
            chat: BTreeMap::new(),
            embeddings: BTreeMap::new(),
        }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn add_fixture(&mut self, file: FixtureFile) {
        if let Some(dim) = file.dim {
            self.dim = dim;
        }
        for (template, rules) in file.chat {
            self.chat.entry(template).or_default().extend(rules);
        }
        self.embeddings.extend(file.embeddings);
    }

    pub fn add_rule(&mut self, template: &str, rule: ChatRule) {
        self.chat.entry(template.to_string()).or_default().push(rule);
    }

    pub fn add_embedding(&mut self, text: &str, fixture: EmbeddingFixture) {
        self.embeddings.insert(text.to_string(), fixture);
    }

    pub fn from_json(seed: u64, text: &str) -> Result<Self, GatewayError> {
        let mut mock = MockProvider::new(seed);
        mock.add_fixture(parse_fixture(Path::new("<inline>"), text)?);
        mock.check()?;
        Ok(mock)
    }

    /// Loads one fixture file, or every `*.json` file of a directory.
    pub fn from_path(seed: u64, path: &Path) -> Result<Self, GatewayError> {
        let mut mock = MockProvider::new(seed);
        for file in fixture_files(path)? {
            let text =
                fs::read_to_string(&file).map_err(|e| GatewayError::io(format!("reading {}", file.display()), e))?;
            mock.add_fixture(parse_fixture(&file, &text)?);
        }
        mock.check()?;
        Ok(mock)
    }

    fn check(&self) -> Result<(), GatewayError> {
        let bad = |detail: String| GatewayError::Fixture {
            path: "<fixtures>".into(),
            detail,
        };
        for (text, fx) in &self.embeddings {
            match fx {
                EmbeddingFixture::Vector(v) if v.len() != self.dim => {
                    return Err(bad(format!(
                        "vector for `{text}` has {} values, dim is {}",
                        v.len(),
                        self.dim
                    )));
                }
                EmbeddingFixture::Vector(v) if v.iter().all(|x| *x == 0.0) => {
                    return Err(bad(format!("vector for `{text}` is all zero")));
                }
                EmbeddingFixture::Axis { axis } if *axis >= self.dim => {
                    return Err(bad(format!("axis {axis} for `{text}` is outside dim {}", self.dim)));
                }
                EmbeddingFixture::Near { similarity, .. } if !(-1.0..=1.0).contains(similarity) => {
                    return Err(bad(format!("similarity {similarity} for `{text}` is outside [-1, 1]")));
                }
                _ => {}
            }
        }
        for text in self.embeddings.keys() {
            self.vector(text, 0).map_err(|e| bad(e.to_string()))?;
        }
        Ok(())
    }

    /// Unit vector derived only from `(seed, text)`.
    pub fn hash_vector(&self, text: &str) -> Vec<f64> {
        let mut hasher = Sha256::new();
        hasher.update(b"histaxo-mock-embedding\0");
        hasher.update(self.seed.to_le_bytes());
        hasher.update(text.as_bytes());
        let digest: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha20Rng::from_seed(digest);
        let mut v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        histaxo_core::similarity::normalize(&mut v);
        v
    }

    fn vector(&self, text: &str, hops: usize) -> Result<Vec<f64>, BackendError> {
        if hops > 32 {
            return Err(BackendError::Fatal(format!(
                "embedding fixture chain through `{text}` is cyclic"
            )));
        }
        Ok(match self.embeddings.get(text) {
            None => self.hash_vector(text),
            Some(EmbeddingFixture::Vector(v)) => v.clone(),
            Some(EmbeddingFixture::Axis { axis }) => {
                let mut v = vec![0.0; self.dim];
                v[*axis] = 1.0;
                v
            }
            Some(EmbeddingFixture::Near { near, similarity }) => {
                let mut base = self.vector(near, hops + 1)?;
                histaxo_core::similarity::normalize(&mut base);
                let mut noise = self.hash_vector(text);
                let dot: f64 = noise.iter().zip(&base).map(|(a, b)| a * b).sum();
                for (n, b) in noise.iter_mut().zip(&base) {
                    *n -= dot * b;
                }
                histaxo_core::similarity::normalize(&mut noise);
                let s = *similarity;
                let c = (1.0 - s * s).max(0.0).sqrt();
                base.iter().zip(&noise).map(|(b, n)| s * b + c * n).collect()
            }
        })
    }
}

fn parse_fixture(path: &Path, text: &str) -> Result<FixtureFile, GatewayError> {
    serde_json::from_str(text).map_err(|e| GatewayError::Fixture {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

/// The fixture files a path stands for, sorted.
pub fn fixture_files(path: &Path) -> Result<Vec<PathBuf>, GatewayError> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let entries = fs::read_dir(path).map_err(|e| GatewayError::io(format!("reading {}", path.display()), e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("json"))
        .collect();
    files.sort();
    Ok(files)
}

impl ChatBackend for MockProvider {
    fn complete(&self, call: &ChatCall<'_>) -> Result<String, BackendError> {
        let missing = |detail: String| BackendError::MissingFixture {
            template: call.template_id.to_string(),
            detail,
        };
        let rules = self
            .chat
            .get(call.template_id)
            .ok_or_else(|| missing("no rules for this template".into()))?;
        let rule = rules
            .iter()
            .find(|r| r.matches(call))
            .ok_or_else(|| missing(format!("no rule matches variables {:?}", call.variables)))?;
        match rule.error.as_deref() {
            Some("transient") => return Err(BackendError::Transient("scripted transient failure".into())),
            Some(other) => return Err(BackendError::Fatal(format!("scripted failure: {other}"))),
            None => {}
        }
        rule.answer(call.reprompt)
            .ok_or_else(|| missing("matching rule has no reply".into()))
    }
}

impl EmbeddingBackend for MockProvider {
    fn embed(&self, _model: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
        texts.iter().map(|t| self.vector(t, 0)).collect()
    }

    fn dimension(&self) -> Option<usize> {
        Some(self.dim)
    }
}
