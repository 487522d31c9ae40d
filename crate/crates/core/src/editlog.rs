//! Replayable log of structural edits applied by the pipeline stages.

use serde::{Deserialize, Serialize};

use crate::taxonomy::{NodeId, Parent, Provenance, Taxonomy, TaxonomyError, TaxonomyNode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Edit {
    AddNode {
        id: NodeId,
        label: String,
        definition: String,
        domain: String,
        parent: NodeId,
        provenance: Provenance,
    },
    Reparent {
        child: NodeId,
        from: NodeId,
        to: NodeId,
    },
    Merge {
        keep: NodeId,
        drop: NodeId,
        /// Parent of `drop` before the merge.
        drop_parent: Option<NodeId>,
        moved_children: Vec<NodeId>,
    },
}

/// One applied edit plus context for auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditEntry {
    pub seq: usize,
    pub stage: String,
    #[serde(flatten)]
    pub edit: Edit,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Edit {
    pub fn apply(&self, taxonomy: &mut Taxonomy) -> Result<(), TaxonomyError> {
        match self {
            Edit::AddNode {
                id,
                label,
                definition,
                domain,
                parent,
                provenance,
            } => {
                let node = TaxonomyNode::new(id.clone(), label, definition, domain, *provenance);
                taxonomy.add_node(node, Parent::Node(parent.clone()))?;
            }
            Edit::Reparent { child, to, .. } => {
                taxonomy.move_node(child, to)?;
            }
            Edit::Merge { keep, drop, .. } => {
                taxonomy.merge_nodes(keep, drop)?;
            }
        }
        Ok(())
    }
}

/// Appends entries and keeps sequence numbers contiguous.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EditLog {
    entries: Vec<EditEntry>,
}

impl EditLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, stage: &str, edit: Edit, note: impl Into<String>) {
        self.entries.push(EditEntry {
            seq: self.entries.len() + 1,
            stage: stage.to_string(),
            edit,
            note: note.into(),
        });
    }

    pub fn entries(&self) -> &[EditEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| serde_json::to_string(e).expect("edit serializes") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let entries = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<EditEntry>, _>>()?;
        Ok(EditLog { entries })
    }

    /// Applies every entry in order to a copy of `input`.
    pub fn replay(&self, input: &Taxonomy) -> Result<Taxonomy, TaxonomyError> {
        let mut out = input.clone();
        for entry in &self.entries {
            entry.edit.apply(&mut out)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::RootMode;

    #[test]
    fn replay_reproduces_edits() {
        let mut t = Taxonomy::new();
        t.add_domain_root("r", "Military", "", Provenance::Induced).unwrap();
        for id in ["a", "b", "c"] {
            t.add_node(
                TaxonomyNode::new(id, id, "", "Military", Provenance::Induced),
                Parent::Node("r".into()),
            )
            .unwrap();
        }
        let input = t.clone();
        let mut log = EditLog::new();

        let add = Edit::AddNode {
            id: "x".into(),
            label: "屯田".into(),
            definition: "軍隊墾荒".into(),
            domain: "Military".into(),
            parent: "r".into(),
            provenance: Provenance::Expanded,
        };
        add.apply(&mut t).unwrap();
        log.push("expand", add, "");
        let from = t.move_node(&"c".into(), &"x".into()).unwrap();
        log.push(
            "expand",
            Edit::Reparent {
                child: "c".into(),
                from,
                to: "x".into(),
            },
            "",
        );
        let rec = t.merge_nodes(&"a".into(), &"b".into()).unwrap();
        log.push(
            "dedup",
            Edit::Merge {
                keep: rec.keep,
                drop: rec.drop,
                drop_parent: Some("r".into()),
                moved_children: rec.moved_children,
            },
            "similarity 0.91",
        );

        let text = log.to_jsonl();
        let parsed = EditLog::from_jsonl(&text).unwrap();
        assert_eq!(parsed, log);
        let replayed = parsed.replay(&input).unwrap();
        assert_eq!(replayed.to_json(), t.to_json());
        assert_eq!(replayed.depth(&"c".into(), RootMode::PerDomain).unwrap(), 3);
    }
}
