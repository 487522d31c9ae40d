//! Loading and validating external inputs: extracted events (JSON-lines),
//! topics, relations, corpus chapters. Also the frequency table and the
//! greedy semantic dedup shared by the candidate pools.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::similarity::{cosine, SimilarityError};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("file not found: {0}")]
    FileMissing(PathBuf),
    #[error("could not read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {} invalid record(s): {}", .violations.len(), .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    SchemaViolation {
        path: PathBuf,
        violations: Vec<LineViolation>,
    },
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error("{0} texts but {1} vectors")]
    VectorCount(usize, usize),
}

/// One rejected record. `line` is 1-based; for JSON arrays it is the
/// 1-based element index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineViolation {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for LineViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub text: String,
    pub event_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<String>,
    #[serde(default)]
    pub book: String,
    #[serde(default)]
    pub chapter: String,
    #[serde(default)]
    pub extractor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

impl EventRecord {
    pub fn new(text: impl Into<String>, event_type: impl Into<String>) -> Self {
        EventRecord {
            text: text.into(),
            event_type: event_type.into(),
            trigger: None,
            book: String::new(),
            chapter: String::new(),
            extractor: String::new(),
            domain: None,
        }
    }

    /// Hard errors; an empty result means the record is usable.
    pub fn errors(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.text.trim().is_empty() {
            out.push("empty text".to_string());
        }
        if self.event_type.trim().is_empty() {
            out.push("empty event_type".to_string());
        }
        out
    }

    /// Soft problems: extraction may normalize triggers.
    pub fn warnings(&self) -> Vec<String> {
        match &self.trigger {
            Some(t) if !t.is_empty() && !self.text.contains(t.as_str()) => {
                vec![format!("trigger `{t}` does not occur in the text")]
            }
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicEntry {
    pub id: u32,
    pub label: String,
    pub top_words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationEntry {
    pub name: String,
    #[serde(default)]
    pub source: String,
}

/// One chapter of the source corpus, read from `<book>/<chapter>.txt`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chapter {
    pub book: String,
    pub chapter: String,
    pub text: String,
}

fn read(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            IngestError::FileMissing(path.to_path_buf())
        } else {
            IngestError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

pub fn parse_events(path: &Path, text: &str) -> Result<Vec<EventRecord>, IngestError> {
    let mut records = Vec::new();
    let mut violations = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<EventRecord>(line) {
            Ok(record) => {
                let errors = record.errors();
                if errors.is_empty() {
                    for w in record.warnings() {
                        log::warn!("{}:{line_no}: {w}", path.display());
                    }
                    records.push(record);
                } else {
                    violations.push(LineViolation {
                        line: line_no,
                        message: errors.join(", "),
                    });
                }
            }
            Err(e) => violations.push(LineViolation {
                line: line_no,
                message: e.to_string(),
            }),
        }
    }
    if violations.is_empty() {
        Ok(records)
    } else {
        Err(IngestError::SchemaViolation {
            path: path.to_path_buf(),
            violations,
        })
    }
}

/// Reads a JSON-lines event file. Every malformed line is reported, not
/// just the first.
pub fn load_events(path: &Path) -> Result<Vec<EventRecord>, IngestError> {
    parse_events(path, &read(path)?)
}

pub fn write_events(path: &Path, events: &[EventRecord]) -> Result<(), IngestError> {
    let io_err = |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = fs::File::create(path).map_err(io_err)?;
    for event in events {
        let line = serde_json::to_string(event).expect("event serializes");
        writeln!(file, "{line}").map_err(io_err)?;
    }
    Ok(())
}

fn load_array<T: for<'de> Deserialize<'de>>(
    path: &Path,
    check: impl Fn(&T) -> Vec<String>,
) -> Result<Vec<T>, IngestError> {
    let text = read(path)?;
    let raw: Vec<serde_json::Value> = serde_json::from_str(&text).map_err(|e| IngestError::SchemaViolation {
        path: path.to_path_buf(),
        violations: vec![LineViolation {
            line: e.line(),
            message: e.to_string(),
        }],
    })?;
    let mut out = Vec::new();
    let mut violations = Vec::new();
    for (idx, value) in raw.into_iter().enumerate() {
        match serde_json::from_value::<T>(value) {
            Ok(item) => {
                let problems = check(&item);
                if problems.is_empty() {
                    out.push(item);
                } else {
                    violations.push(LineViolation {
                        line: idx + 1,
                        message: problems.join(", "),
                    });
                }
            }
            Err(e) => violations.push(LineViolation {
                line: idx + 1,
                message: e.to_string(),
            }),
        }
    }
    if violations.is_empty() {
        Ok(out)
    } else {
        Err(IngestError::SchemaViolation {
            path: path.to_path_buf(),
            violations,
        })
    }
}

pub fn load_topics(path: &Path) -> Result<Vec<TopicEntry>, IngestError> {
    load_array(path, |t: &TopicEntry| {
        let mut p = Vec::new();
        if t.label.trim().is_empty() {
            p.push(format!("topic {} has an empty label", t.id));
        }
        if t.top_words.iter().all(|w| w.trim().is_empty()) {
            p.push(format!("topic {} has no top words", t.id));
        }
        p
    })
}

pub fn load_relations(path: &Path) -> Result<Vec<RelationEntry>, IngestError> {
    load_array(path, |r: &RelationEntry| {
        if r.name.trim().is_empty() {
            vec!["relation with empty name".to_string()]
        } else {
            Vec::new()
        }
    })
}

/// Reads every `<book>/<chapter>.txt` under `root`, sorted by path.
pub fn load_chapters(root: &Path) -> Result<Vec<Chapter>, IngestError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| IngestError::Io { path, source }
    };
    if !root.is_dir() {
        return Err(IngestError::FileMissing(root.to_path_buf()));
    }
    let mut books: Vec<PathBuf> = fs::read_dir(root)
        .map_err(io_err(root))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    books.sort();
    let mut chapters = Vec::new();
    for book_dir in books {
        let mut files: Vec<PathBuf> = fs::read_dir(&book_dir)
            .map_err(io_err(&book_dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "txt"))
            .collect();
        files.sort();
        for file in files {
            let text = read(&file)?;
            if text.trim().is_empty() {
                log::warn!("skipping empty chapter {}", file.display());
                continue;
            }
            chapters.push(Chapter {
                book: book_dir
                    .file_name()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                chapter: file
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                text,
            });
        }
    }
    Ok(chapters)
}

/// Trims and collapses internal whitespace runs to one space.
pub fn normalize_event_type(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn event_type_frequency(events: &[EventRecord]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for event in events {
        let key = normalize_event_type(&event.event_type);
        if !key.is_empty() {
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

/// Event types ordered by descending count, ties lexicographically.
pub fn rank_by_frequency(counts: &BTreeMap<String, usize>) -> Vec<(String, usize)> {
    let mut ranked: Vec<(String, usize)> = counts.iter().map(|(k, v)| (k.clone(), *v)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}

/// Greedy semantic dedup over items already in priority order: an item
/// survives when its cosine to every earlier survivor is `<= threshold`.
/// Returns surviving indices in input order.
pub fn greedy_dedup(vectors: &[Vec<f64>], threshold: f64) -> Result<Vec<usize>, SimilarityError> {
    let mut kept: Vec<usize> = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        let mut duplicate = false;
        for &k in &kept {
            if cosine(&vectors[k], v)? > threshold {
                duplicate = true;
                break;
            }
        }
        if !duplicate {
            kept.push(i);
        }
    }
    Ok(kept)
}

/// Deduplicated event-type pool: exact duplicates collapse first, then
/// semantic duplicates are resolved in frequency order so the most frequent
/// member of each group survives. `vectors` aligns with `ranked`.
pub fn dedup_event_types(
    ranked: &[(String, usize)],
    vectors: &[Vec<f64>],
    threshold: f64,
) -> Result<Vec<(String, usize)>, IngestError> {
    if ranked.len() != vectors.len() {
        return Err(IngestError::VectorCount(ranked.len(), vectors.len()));
    }
    let mut seen = HashSet::new();
    let (mut items, mut vecs) = (Vec::new(), Vec::new());
    for ((label, count), v) in ranked.iter().zip(vectors) {
        if seen.insert(label.as_str()) {
            items.push((label.clone(), *count));
            vecs.push(v.clone());
        }
    }
    let kept = greedy_dedup(&vecs, threshold)?;
    Ok(kept.into_iter().map(|i| items[i].clone()).collect())
}
