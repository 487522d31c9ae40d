use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use histaxo_core::similarity::cosine;
use serde::{Deserialize, Serialize};

use crate::backend::{ChatBackend, EmbeddingBackend};
use crate::cache::EmbeddingCache;
use crate::error::{BackendError, GatewayError};
use crate::limiter::{Semaphore, TokenBucket};
use crate::mock::MockProvider;
use crate::role::{AgentRole, ChatCall, RequestKind, Vars};
use crate::template::TemplateSet;
use crate::transcript::{Capture, TranscriptLog, TranscriptRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Total attempts per request, including the first.
    pub max_attempts: u32,
    pub backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff_ms: 500,
            max_backoff_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    fn delay(&self, failed_attempts: u32) -> Duration {
        let factor = 1u64 << failed_attempts.saturating_sub(1).min(16);
        Duration::from_millis(self.backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

/// A text and its embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub source_text: String,
}

/// Appended to a prompt whose answer could not be parsed.
pub fn reprompt_suffix(reason: &str) -> String {
    format!(
        "\n\nYour previous answer could not be used: {reason}\nReply again with only the JSON object requested above."
    )
}

/// Routes chat requests to per-provider backends and embedding requests to
/// one embedding backend, with retries, rate limits, caching and an ordered
/// transcript.
pub struct Gateway {
    templates: TemplateSet,
    chat: BTreeMap<String, Arc<dyn ChatBackend>>,
    fallback_chat: Option<Arc<dyn ChatBackend>>,
    embedder: Arc<dyn EmbeddingBackend>,
    embedding_provider: String,
    embedding_model: String,
    cache: EmbeddingCache,
    chat_cache: Option<Mutex<HashMap<String, String>>>,
    transcript: Arc<TranscriptLog>,
    retry: RetryPolicy,
    parallelism: usize,
    buckets: Mutex<BTreeMap<String, Arc<TokenBucket>>>,
    permits: Mutex<BTreeMap<String, Arc<Semaphore>>>,
}

/// One `par_map` result with the transcript records it produced.
type Slot<R> = Mutex<Option<(R, Vec<TranscriptRecord>)>>;

impl Gateway {
    /// Every provider and the embedder are served by `mock`.
    pub fn mock(mock: MockProvider) -> Self {
        let mock = Arc::new(mock);
        Gateway::new(BTreeMap::new(), Some(mock.clone()), mock, "mock", "mock-embedding")
    }

    pub fn new(
        chat: BTreeMap<String, Arc<dyn ChatBackend>>,
        fallback_chat: Option<Arc<dyn ChatBackend>>,
        embedder: Arc<dyn EmbeddingBackend>,
        embedding_provider: &str,
        embedding_model: &str,
    ) -> Self {
        Gateway {
            templates: TemplateSet::default(),
            chat,
            fallback_chat,
            embedder,
            embedding_provider: embedding_provider.to_string(),
            embedding_model: embedding_model.to_string(),
            cache: EmbeddingCache::new(),
            chat_cache: None,
            transcript: Arc::new(TranscriptLog::new()),
            retry: RetryPolicy::default(),
            parallelism: 4,
            buckets: Mutex::new(BTreeMap::new()),
            permits: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn with_templates(mut self, templates: TemplateSet) -> Self {
        self.templates = templates;
        self
    }

    pub fn with_transcript(mut self, transcript: Arc<TranscriptLog>) -> Self {
        self.transcript = transcript;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Worker threads for `par_map`, also the in-flight bound per provider.
    pub fn with_parallelism(mut self, parallelism: usize) -> Self {
        self.parallelism = parallelism.max(1);
        self
    }

    pub fn with_embedding_cache(mut self, cache: EmbeddingCache) -> Self {
        self.cache = cache;
        self
    }

    /// Serves repeated identical chat prompts from memory.
    pub fn with_chat_cache(mut self, enabled: bool) -> Self {
        self.chat_cache = enabled.then(|| Mutex::new(HashMap::new()));
        self
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn transcript(&self) -> &TranscriptLog {
        &self.transcript
    }

    pub fn embedding_cache(&self) -> &EmbeddingCache {
        &self.cache
    }

    pub fn parallelism(&self) -> usize {
        self.parallelism
    }

    fn backend(&self, provider: &str) -> Result<&Arc<dyn ChatBackend>, GatewayError> {
        self.chat
            .get(provider)
            .or(self.fallback_chat.as_ref())
            .ok_or_else(|| GatewayError::UnknownProvider(provider.to_string()))
    }

    fn bucket(&self, provider: &str, per_minute: Option<u32>) -> Option<Arc<TokenBucket>> {
        let rpm = per_minute?;
        let mut buckets = self.buckets.lock().expect("bucket map lock");
        Some(
            buckets
                .entry(provider.to_string())
                .or_insert_with(|| Arc::new(TokenBucket::per_minute(rpm)))
                .clone(),
        )
    }

    fn semaphore(&self, provider: &str) -> Arc<Semaphore> {
        let mut permits = self.permits.lock().expect("permit map lock");
        permits
            .entry(provider.to_string())
            .or_insert_with(|| Arc::new(Semaphore::new(self.parallelism)))
            .clone()
    }

    pub fn chat(&self, role: &AgentRole, template: &str, vars: &Vars) -> Result<String, GatewayError> {
        self.chat_with(role, template, vars, 0, "")
    }

    /// One chat request. `reprompt` numbers follow-up prompts for the same
    /// question; `suffix` is appended to the rendered prompt.
    pub fn chat_with(
        &self,
        role: &AgentRole,
        template: &str,
        vars: &Vars,
        reprompt: u32,
        suffix: &str,
    ) -> Result<String, GatewayError> {
        let mut prompt = self.templates.render(template, vars)?;
        prompt.push_str(suffix);
        let backend = self.backend(&role.provider)?;
        let mut record = TranscriptRecord {
            seq: 0,
            kind: RequestKind::Chat,
            role: Some(role.name.to_string()),
            provider: role.provider.clone(),
            model: role.model_id.clone(),
            temperature: role.temperature,
            template: template.to_string(),
            variables: vars.clone(),
            prompt: prompt.clone(),
            response: None,
            texts: Vec::new(),
            reprompt,
            attempts: 0,
            cached: false,
            latency_ms: None,
            error: None,
        };
        let cache_key = format!(
            "{}\u{0}{}\u{0}{:?}\u{0}{}",
            role.provider, role.model_id, role.temperature, prompt
        );
        if let Some(cache) = &self.chat_cache {
            if let Some(hit) = cache.lock().expect("chat cache lock").get(&cache_key) {
                record.response = Some(hit.clone());
                record.cached = true;
                self.transcript.record(record);
                return Ok(hit.clone());
            }
        }
        let call = ChatCall {
            provider: &role.provider,
            model: &role.model_id,
            temperature: role.temperature,
            template_id: template,
            variables: vars,
            prompt: &prompt,
            reprompt,
        };
        let bucket = self.bucket(&role.provider, backend.requests_per_minute());
        let semaphore = self.semaphore(&role.provider);
        let started = Instant::now();
        let mut last = String::new();
        for attempt in 1..=self.retry.max_attempts.max(1) {
            record.attempts = attempt;
            if let Some(bucket) = &bucket {
                bucket.acquire();
            }
            let outcome = {
                let _permit = semaphore.acquire();
                backend.complete(&call)
            };
            match outcome {
                Ok(text) => {
                    if backend.is_live() {
                        record.latency_ms = Some(started.elapsed().as_millis() as u64);
                    }
                    record.response = Some(text.clone());
                    self.transcript.record(record);
                    if let Some(cache) = &self.chat_cache {
                        cache.lock().expect("chat cache lock").insert(cache_key, text.clone());
                    }
                    return Ok(text);
                }
                Err(BackendError::MissingFixture { template, detail }) => {
                    record.error = Some(format!("missing fixture: {detail}"));
                    self.transcript.record(record);
                    return Err(GatewayError::MissingFixture { template, detail });
                }
                Err(BackendError::Fatal(msg)) => {
                    last = msg;
                    break;
                }
                Err(BackendError::Transient(msg)) => {
                    log::warn!("{} attempt {attempt} failed: {msg}", role.provider);
                    last = msg;
                    if attempt < self.retry.max_attempts {
                        std::thread::sleep(self.retry.delay(attempt));
                    }
                }
            }
        }
        if backend.is_live() {
            record.latency_ms = Some(started.elapsed().as_millis() as u64);
        }
        record.error = Some(last.clone());
        let attempts = record.attempts;
        self.transcript.record(record);
        Err(GatewayError::ProviderUnavailable {
            provider: role.provider.clone(),
            attempts,
            last,
        })
    }

    /// Chat with one re-prompt when `parse` rejects the first answer.
    pub fn chat_structured<T>(
        &self,
        role: &AgentRole,
        template: &str,
        vars: &Vars,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, GatewayError> {
        self.chat_structured_from(role, template, vars, 0, "", parse)
    }

    /// As `chat_structured`, starting at re-prompt number `reprompt` with
    /// `suffix` appended to the first prompt.
    pub fn chat_structured_from<T>(
        &self,
        role: &AgentRole,
        template: &str,
        vars: &Vars,
        reprompt: u32,
        suffix: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, GatewayError> {
        let first = self.chat_with(role, template, vars, reprompt, suffix)?;
        let reason = match parse(&first) {
            Ok(v) => return Ok(v),
            Err(reason) => reason,
        };
        log::warn!("{template}: unusable answer ({reason}), re-prompting");
        let second_suffix = format!("{suffix}{}", reprompt_suffix(&reason));
        let second = self.chat_with(role, template, vars, reprompt + 1, &second_suffix)?;
        parse(&second).map_err(|reason| GatewayError::MalformedResponse {
            template: template.to_string(),
            reason,
        })
    }

    /// Embeds `texts`, order preserved; each distinct text is fetched from
    /// the backend at most once per gateway.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        if texts.is_empty() || texts.iter().any(|t| t.trim().is_empty()) {
            return Err(GatewayError::EmptyInput);
        }
        let vectors = self
            .cache
            .get_or_fetch(texts, |missing| self.fetch_embeddings(missing))?;
        Ok(texts
            .iter()
            .zip(vectors)
            .map(|(t, v)| EmbeddingVector {
                values: v.as_ref().clone(),
                source_text: t.clone(),
            })
            .collect())
    }

    /// Embeddings keyed by text; an empty input gives an empty map.
    pub fn embed_map(&self, texts: &[String]) -> Result<HashMap<String, Vec<f64>>, GatewayError> {
        if texts.is_empty() {
            return Ok(HashMap::new());
        }
        Ok(self
            .embed(texts)?
            .into_iter()
            .map(|e| (e.source_text, e.values))
            .collect())
    }

    pub fn similarity(&self, a: &str, b: &str) -> Result<f64, GatewayError> {
        let v = self.embed(&[a.to_string(), b.to_string()])?;
        Ok(cosine(&v[0].values, &v[1].values)?)
    }

    fn fetch_embeddings(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        let started = Instant::now();
        let mut record = TranscriptRecord {
            seq: 0,
            kind: RequestKind::Embed,
            role: None,
            provider: self.embedding_provider.clone(),
            model: self.embedding_model.clone(),
            temperature: None,
            template: String::new(),
            variables: Vars::new(),
            prompt: String::new(),
            response: None,
            texts: texts.to_vec(),
            reprompt: 0,
            attempts: 0,
            cached: false,
            latency_ms: None,
            error: None,
        };
        let mut last = String::new();
        for attempt in 1..=self.retry.max_attempts.max(1) {
            record.attempts = attempt;
            match self.embedder.embed(&self.embedding_model, texts) {
                Ok(vectors) => {
                    if self.embedder.is_live() {
                        record.latency_ms = Some(started.elapsed().as_millis() as u64);
                    }
                    self.transcript.record(record);
                    let expected = self.embedder.dimension().or(vectors.first().map(Vec::len)).unwrap_or(0);
                    for (t, v) in texts.iter().zip(&vectors) {
                        if v.len() != expected {
                            return Err(GatewayError::Dimension {
                                text: t.clone(),
                                got: v.len(),
                                expected,
                            });
                        }
                    }
                    return Ok(vectors);
                }
                Err(BackendError::Transient(msg)) => {
                    last = msg;
                    if attempt < self.retry.max_attempts {
                        std::thread::sleep(self.retry.delay(attempt));
                    }
                }
                Err(other) => {
                    last = other.to_string();
                    break;
                }
            }
        }
        record.error = Some(last.clone());
        let attempts = record.attempts;
        self.transcript.record(record);
        Err(GatewayError::ProviderUnavailable {
            provider: self.embedding_provider.clone(),
            attempts,
            last,
        })
    }

    /// Applies `f` to every item on up to `parallelism` threads. Results and
    /// the transcript records each item produced come back in item order.
    pub fn par_map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync,
    {
        let workers = self.parallelism.min(items.len());
        if workers <= 1 {
            return items.iter().map(f).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Slot<R>> = items.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= items.len() {
                        break;
                    }
                    let capture = Capture::start();
                    let result = f(&items[i]);
                    let records = capture.finish();
                    *slots[i].lock().expect("slot lock") = Some((result, records));
                });
            }
        });
        slots
            .into_iter()
            .map(|slot| {
                let (result, records) = slot.into_inner().expect("slot lock").expect("every item ran");
                self.transcript.append(records);
                result
            })
            .collect()
    }
}
