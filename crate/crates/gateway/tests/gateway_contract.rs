use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use histaxo_gateway::{
    AgentRole, BackendError, ChatBackend, ChatCall, Gateway, GatewayError, MockProvider, RetryPolicy, RoleName, Vars,
};

fn role(name: RoleName) -> AgentRole {
    AgentRole::new(name, "mock", "gpt-4o-2024-11-20", Some(0.0))
}

fn vars(pairs: &[(&str, &str)]) -> Vars {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

const FIXTURE: &str = r#"{
  "chat": {
    "classify": [
      {"when": {"event_type": "冊封使節"}, "reply": {"domain": "Diplomacy"}},
      {"when": {"event_type": "天氣"}, "replies": ["Weather", "Weather again"]}
    ],
    "granularity": [
      {"when_contains": {"child_label": "叛"}, "reply": {"score": 1}},
      {"reply": {"score": 0}}
    ]
  }
}"#;

fn gateway(seed: u64) -> Gateway {
    Gateway::mock(MockProvider::from_json(seed, FIXTURE).unwrap())
}

fn classify_vars(event_type: &str) -> Vars {
    vars(&[("event_type", event_type), ("samples", "-"), ("domains", "-")])
}

fn parse_domain(text: &str) -> Result<String, String> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    v["domain"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| "no domain".to_string())
}

#[test]
fn scripted_classification() {
    let g = gateway(1);
    let out = g.chat_structured(
        &role(RoleName::Classifier),
        "classify",
        &classify_vars("冊封使節"),
        parse_domain,
    );
    assert_eq!(out.unwrap(), "Diplomacy");
    assert_eq!(g.transcript().len(), 1);
}

#[test]
fn unbound_template_variable() {
    let g = gateway(1);
    let err = g
        .chat(&role(RoleName::Classifier), "classify", &vars(&[("event_type", "x")]))
        .unwrap_err();
    assert!(matches!(err, GatewayError::TemplateMissing { .. }));
}

#[test]
fn unparseable_twice_is_malformed() {
    let g = gateway(1);
    let err = g
        .chat_structured(
            &role(RoleName::Classifier),
            "classify",
            &classify_vars("天氣"),
            parse_domain,
        )
        .unwrap_err();
    assert!(matches!(err, GatewayError::MalformedResponse { .. }), "{err}");
    let records = g.transcript().records();
    assert_eq!(records.len(), 2);
    assert_eq!(records[1].reprompt, 1);
    assert!(records[1].prompt.contains("could not be used"));
}

#[test]
fn missing_fixture_is_reported() {
    let g = gateway(1);
    let v = vars(&[
        ("domain", "Military"),
        ("domain_description", "-"),
        ("depth", "2"),
        ("layer", "[]"),
        ("children", "[]"),
    ]);
    assert!(matches!(
        g.chat(&role(RoleName::Expander), "expand", &v),
        Err(GatewayError::MissingFixture { .. })
    ));
}

#[test]
fn embeddings_are_cached_and_unit_length() {
    let g = gateway(3);
    let a = g.embed(&["叛亂".to_string()]).unwrap();
    let b = g.embed(&["叛亂".to_string(), "叛亂".to_string()]).unwrap();
    assert_eq!(a[0].values, b[0].values);
    assert_eq!(b[0].values, b[1].values);
    assert_eq!(g.embedding_cache().wire_texts(), 1);
    assert_eq!(g.transcript().len(), 1);
    assert_eq!(g.similarity("叛亂", "叛亂").unwrap(), 1.0);
    assert!(matches!(g.embed(&[]), Err(GatewayError::EmptyInput)));
    assert!(matches!(g.embed(&["  ".to_string()]), Err(GatewayError::EmptyInput)));
}

#[test]
fn reported_similarity_matches_dot_product() {
    let g = gateway(3);
    let v = g.embed(&["冊封".to_string(), "旱災".to_string()]).unwrap();
    let dot: f64 = v[0].values.iter().zip(&v[1].values).map(|(a, b)| a * b).sum();
    let na: f64 = v[0].values.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = v[1].values.iter().map(|x| x * x).sum::<f64>().sqrt();
    let s = g.similarity("冊封", "旱災").unwrap();
    assert!((s - dot / (na * nb)).abs() < 1e-12);
    assert!(s.abs() < 0.5);
}

fn transcript_of_run(seed: u64) -> String {
    let g = gateway(seed).with_parallelism(4);
    let labels: Vec<String> = (0..24)
        .map(|i| {
            if i % 3 == 0 {
                format!("叛{i}")
            } else {
                format!("事{i}")
            }
        })
        .collect();
    let scores = g.par_map(&labels, |label| {
        let v = vars(&[
            ("parent_label", "軍事"),
            ("parent_definition", ""),
            ("child_label", label),
            ("child_definition", ""),
        ]);
        g.chat(&role(RoleName::GranularityJudge), "granularity", &v).unwrap()
    });
    assert_eq!(scores.iter().filter(|s| s.contains('1')).count(), 8);
    g.embed(&labels).unwrap();
    g.transcript().to_jsonl()
}

#[test]
fn same_seed_and_fixtures_give_identical_transcripts() {
    let a = transcript_of_run(5);
    assert_eq!(a, transcript_of_run(5));
    assert!(!a.contains("latency_ms"));
    let first: serde_json::Value = serde_json::from_str(a.lines().next().unwrap()).unwrap();
    assert_eq!(first["variables"]["child_label"], "叛0");
}

struct Flaky {
    calls: AtomicU32,
    fail_first: u32,
}

impl ChatBackend for Flaky {
    fn complete(&self, _call: &ChatCall<'_>) -> Result<String, BackendError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        if n <= self.fail_first {
            Err(BackendError::Transient(format!("attempt {n}")))
        } else {
            Ok("{\"score\": 1}".into())
        }
    }
}

fn flaky_gateway(fail_first: u32) -> (Gateway, Arc<Flaky>) {
    let flaky = Arc::new(Flaky {
        calls: AtomicU32::new(0),
        fail_first,
    });
    let g = Gateway::new(
        [("mock".to_string(), flaky.clone() as Arc<dyn ChatBackend>)].into(),
        None,
        Arc::new(MockProvider::new(0)),
        "mock",
        "m",
    )
    .with_retry(RetryPolicy {
        max_attempts: 3,
        backoff_ms: 0,
        max_backoff_ms: 0,
    });
    (g, flaky)
}

#[test]
fn retries_are_bounded() {
    let v = vars(&[
        ("parent_label", "a"),
        ("parent_definition", ""),
        ("child_label", "b"),
        ("child_definition", ""),
    ]);
    let (g, flaky) = flaky_gateway(2);
    assert!(g.chat(&role(RoleName::GranularityJudge), "granularity", &v).is_ok());
    assert_eq!(flaky.calls.load(Ordering::SeqCst), 3);
    assert_eq!(g.transcript().records()[0].attempts, 3);

    let (g, flaky) = flaky_gateway(10);
    let err = g
        .chat(&role(RoleName::GranularityJudge), "granularity", &v)
        .unwrap_err();
    assert!(matches!(err, GatewayError::ProviderUnavailable { attempts: 3, .. }));
    assert_eq!(flaky.calls.load(Ordering::SeqCst), 3);
}

#[test]
fn unknown_provider_without_fallback() {
    let (g, _) = flaky_gateway(0);
    let other = AgentRole::new(RoleName::Merger, "elsewhere", "gpt-5-2025-08-07", None);
    assert!(matches!(
        g.chat(&other, "granularity", &Vars::new()),
        Err(GatewayError::TemplateMissing { .. }) | Err(GatewayError::UnknownProvider(_))
    ));
}
