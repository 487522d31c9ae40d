//! Taxonomy data model: one concept tree per domain, joined under an
//! optional virtual root when a metric needs a single shared ancestor.
//!
//! Depth counts nodes, not edges: a domain root has depth 1. In
//! [`RootMode::Global`] the virtual root takes depth 1 and every real node
//! shifts down by one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

/// Reserved id of the synthetic node joining all domain roots.
pub const VIRTUAL_ROOT: &str = "__virtual_root__";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn virtual_root() -> Self {
        NodeId(VIRTUAL_ROOT.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_virtual_root(&self) -> bool {
        self.0 == VIRTUAL_ROOT
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Induced,
    Expanded,
    Enriched,
    #[default]
    Ingested,
}

/// Whether root-anchored computations stop at each domain root or continue
/// to the virtual root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootMode {
    #[default]
    PerDomain,
    Global,
}

impl RootMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RootMode::PerDomain => "per-domain",
            RootMode::Global => "global",
        }
    }
}

impl fmt::Display for RootMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RootMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-domain" => Ok(RootMode::PerDomain),
            "global" => Ok(RootMode::Global),
            other => Err(format!("unknown mode `{other}` (expected per-domain or global)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyNode {
    pub id: NodeId,
    pub label: String,
    pub definition: String,
    pub domain: String,
    pub parent: Option<NodeId>,
    pub provenance: Provenance,
    /// Labels of nodes merged into this one. Kept for audit only.
    pub aliases: Vec<String>,
}

impl TaxonomyNode {
    pub fn new(
        id: impl Into<NodeId>,
        label: impl Into<String>,
        definition: impl Into<String>,
        domain: impl Into<String>,
        provenance: Provenance,
    ) -> Self {
        TaxonomyNode {
            id: id.into(),
            label: label.into(),
            definition: definition.into(),
            domain: domain.into(),
            parent: None,
            provenance,
            aliases: Vec::new(),
        }
    }

    /// Text sent to the embedding model for this node.
    pub fn embedding_text(&self) -> String {
        node_text(&self.label, &self.definition)
    }
}

/// `label：definition`, or the bare label when there is no definition.
pub fn node_text(label: &str, definition: &str) -> String {
    let definition = definition.trim();
    if definition.is_empty() {
        label.trim().to_string()
    } else {
        format!("{}：{}", label.trim(), definition)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TaxonomyError {
    #[error("unknown parent `{0}`")]
    UnknownParent(NodeId),
    #[error("duplicate node id `{0}`")]
    DuplicateId(NodeId),
    #[error("node `{node}` belongs to domain `{node_domain}` but its parent is in `{parent_domain}`")]
    DomainMismatch {
        node: NodeId,
        node_domain: String,
        parent_domain: String,
    },
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("nodes `{0}` and `{1}` do not share a root")]
    NoCommonRoot(NodeId, NodeId),
    #[error("merging `{drop}` into `{keep}` would create a cycle")]
    WouldCreateCycle { keep: NodeId, drop: NodeId },
    #[error("domain root `{0}` cannot be merged away or moved")]
    DomainRoot(NodeId),
    #[error("taxonomy is empty")]
    EmptyTaxonomy,
    #[error("node `{0}` has an empty label")]
    EmptyLabel(NodeId),
    #[error("domain `{0}` already exists")]
    DuplicateDomain(String),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("`{0}` is reserved for the virtual root")]
    ReservedId(NodeId),
    #[error("invalid taxonomy document: {0}")]
    Format(String),
}

pub type Result<T, E = TaxonomyError> = std::result::Result<T, E>;

/// Where a new node attaches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Parent {
    Node(NodeId),
    /// The node becomes the root of a new domain tree.
    VirtualRoot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainEntry {
    pub name: String,
    pub description: String,
    pub root: NodeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub keep: NodeId,
    pub drop: NodeId,
    pub dropped_label: String,
    pub moved_children: Vec<NodeId>,
    /// Set when the dropped node lived in another domain.
    pub from_domain: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralStats {
    pub max_depth: usize,
    pub avg_depth: f64,
    pub branch_factor: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Taxonomy {
    domains: Vec<DomainEntry>,
    nodes: BTreeMap<NodeId, TaxonomyNode>,
    children: BTreeMap<NodeId, Vec<NodeId>>,
    minted: BTreeMap<String, u64>,
}

impl Taxonomy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn domains(&self) -> &[DomainEntry] {
        &self.domains
    }

    pub fn domain(&self, name: &str) -> Option<&DomainEntry> {
        self.domains.iter().find(|d| d.name == name)
    }

    pub fn domain_names(&self) -> Vec<String> {
        self.domains.iter().map(|d| d.name.clone()).collect()
    }

    pub fn node(&self, id: &NodeId) -> Option<&TaxonomyNode> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    /// All nodes in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &TaxonomyNode> {
        self.nodes.values()
    }

    pub fn children(&self, id: &NodeId) -> &[NodeId] {
        self.children.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_domain_root(&self, id: &NodeId) -> bool {
        self.domains.iter().any(|d| &d.root == id)
    }

    /// Nodes of one domain in preorder, children in insertion order.
    pub fn domain_nodes(&self, domain: &str) -> Vec<&TaxonomyNode> {
        match self.domain(domain) {
            Some(entry) => self
                .preorder(&entry.root)
                .into_iter()
                .filter_map(|id| self.nodes.get(&id))
                .collect(),
            None => Vec::new(),
        }
    }

    /// Every node, domain by domain, in preorder.
    pub fn preorder_all(&self) -> Vec<&TaxonomyNode> {
        self.domains.iter().flat_map(|d| self.domain_nodes(&d.name)).collect()
    }

    pub fn leaves(&self) -> Vec<&TaxonomyNode> {
        self.preorder_all()
            .into_iter()
            .filter(|n| self.children(&n.id).is_empty())
            .collect()
    }

    /// All (parent, child) edges inside domain trees, preorder.
    pub fn parent_child_pairs(&self) -> Vec<(&TaxonomyNode, &TaxonomyNode)> {
        self.preorder_all()
            .into_iter()
            .filter_map(|child| {
                let parent = child.parent.as_ref()?;
                Some((self.nodes.get(parent)?, child))
            })
            .collect()
    }

    fn preorder(&self, start: &NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![start.clone()];
        while let Some(id) = stack.pop() {
            for child in self.children(&id).iter().rev() {
                stack.push(child.clone());
            }
            out.push(id);
        }
        out
    }

    /// Strict descendants of `id`, preorder.
    pub fn descendants(&self, id: &NodeId) -> Vec<NodeId> {
        let mut all = self.preorder(id);
        all.remove(0);
        all
    }

    /// True when `candidate` lies in the subtree rooted at `ancestor`
    /// (including `candidate == ancestor`).
    pub fn is_in_subtree(&self, candidate: &NodeId, ancestor: &NodeId) -> bool {
        let mut cursor = Some(candidate);
        while let Some(id) = cursor {
            if id == ancestor {
                return true;
            }
            cursor = self.nodes.get(id).and_then(|n| n.parent.as_ref());
        }
        false
    }

    /// Produces an id `prefix-N` not yet present. Deterministic for a given
    /// history of calls on a given taxonomy.
    pub fn mint_id(&mut self, prefix: &str) -> NodeId {
        let counter = self.minted.entry(prefix.to_string()).or_insert(0);
        loop {
            *counter += 1;
            let id = NodeId(format!("{prefix}-{counter}"));
            if !self.nodes.contains_key(&id) {
                return id;
            }
        }
    }

    pub fn add_node(&mut self, mut node: TaxonomyNode, parent: Parent) -> Result<NodeId> {
        if node.id.is_virtual_root() {
            return Err(TaxonomyError::ReservedId(node.id));
        }
        if node.label.trim().is_empty() {
            return Err(TaxonomyError::EmptyLabel(node.id));
        }
        if self.nodes.contains_key(&node.id) {
            return Err(TaxonomyError::DuplicateId(node.id));
        }
        match parent {
            Parent::VirtualRoot => {
                if self.domain(&node.domain).is_some() {
                    return Err(TaxonomyError::DuplicateDomain(node.domain));
                }
                node.parent = None;
                self.domains.push(DomainEntry {
                    name: node.domain.clone(),
                    description: node.definition.clone(),
                    root: node.id.clone(),
                });
            }
            Parent::Node(parent_id) => {
                let parent_node = self
                    .nodes
                    .get(&parent_id)
                    .ok_or_else(|| TaxonomyError::UnknownParent(parent_id.clone()))?;
                if parent_node.domain != node.domain {
                    return Err(TaxonomyError::DomainMismatch {
                        node: node.id,
                        node_domain: node.domain,
                        parent_domain: parent_node.domain.clone(),
                    });
                }
                self.children
                    .entry(parent_id.clone())
                    .or_default()
                    .push(node.id.clone());
                node.parent = Some(parent_id);
            }
        }
        let id = node.id.clone();
        self.nodes.insert(id.clone(), node);
        Ok(id)
    }

    /// Adds a domain root whose label is the domain name.
    pub fn add_domain_root(
        &mut self,
        id: impl Into<NodeId>,
        name: &str,
        description: &str,
        provenance: Provenance,
    ) -> Result<NodeId> {
        let node = TaxonomyNode::new(id, name, description, name, provenance);
        self.add_node(node, Parent::VirtualRoot)
    }

    pub fn path_to_root(&self, id: &NodeId, mode: RootMode) -> Result<Vec<NodeId>> {
        let mut path = Vec::new();
        let mut cursor = Some(id);
        while let Some(current) = cursor {
            let node = self
                .nodes
                .get(current)
                .ok_or_else(|| TaxonomyError::UnknownNode(current.clone()))?;
            path.push(current.clone());
            cursor = node.parent.as_ref();
            if path.len() > self.nodes.len() {
                return Err(TaxonomyError::WouldCreateCycle {
                    keep: id.clone(),
                    drop: current.clone(),
                });
            }
        }
        if mode == RootMode::Global {
            path.push(NodeId::virtual_root());
        }
        path.reverse();
        Ok(path)
    }

    pub fn depth(&self, id: &NodeId, mode: RootMode) -> Result<usize> {
        Ok(self.path_to_root(id, mode)?.len())
    }

    pub fn lca_depth(&self, a: &NodeId, b: &NodeId, mode: RootMode) -> Result<usize> {
        let pa = self.path_to_root(a, mode)?;
        let pb = self.path_to_root(b, mode)?;
        let shared = pa.iter().zip(&pb).take_while(|(x, y)| x == y).count();
        if shared == 0 {
            return Err(TaxonomyError::NoCommonRoot(a.clone(), b.clone()));
        }
        Ok(shared)
    }

    /// `2 · lca_depth / (depth(a) + depth(b))`, exact.
    pub fn structure_weight(&self, a: &NodeId, b: &NodeId, mode: RootMode) -> Result<Ratio<u64>> {
        let lca = self.lca_depth(a, b, mode)? as u64;
        let da = self.depth(a, mode)? as u64;
        let db = self.depth(b, mode)? as u64;
        Ok(Ratio::new(2 * lca, da + db))
    }

    /// Folds `drop` into `keep`: children of `drop` move under `keep`, the
    /// dropped label (and its aliases) become aliases of `keep`. When the two
    /// nodes live in different domains the moved subtrees adopt `keep`'s
    /// domain.
    pub fn merge_nodes(&mut self, keep: &NodeId, drop: &NodeId) -> Result<MergeRecord> {
        if !self.nodes.contains_key(keep) {
            return Err(TaxonomyError::UnknownNode(keep.clone()));
        }
        if !self.nodes.contains_key(drop) {
            return Err(TaxonomyError::UnknownNode(drop.clone()));
        }
        if self.is_in_subtree(keep, drop) {
            return Err(TaxonomyError::WouldCreateCycle {
                keep: keep.clone(),
                drop: drop.clone(),
            });
        }
        if self.is_domain_root(drop) {
            return Err(TaxonomyError::DomainRoot(drop.clone()));
        }

        let keep_domain = self.nodes[keep].domain.clone();
        let dropped = self.nodes.remove(drop).expect("checked above");
        if let Some(parent) = &dropped.parent {
            if let Some(siblings) = self.children.get_mut(parent) {
                siblings.retain(|c| c != drop);
            }
        }
        let moved = self.children.remove(drop).unwrap_or_default();
        for child in &moved {
            if let Some(node) = self.nodes.get_mut(child) {
                node.parent = Some(keep.clone());
            }
        }
        if dropped.domain != keep_domain {
            for child in &moved {
                for id in self.preorder(child) {
                    if let Some(node) = self.nodes.get_mut(&id) {
                        node.domain = keep_domain.clone();
                    }
                }
            }
        }
        self.children
            .entry(keep.clone())
            .or_default()
            .extend(moved.iter().cloned());

        let keeper = self.nodes.get_mut(keep).expect("checked above");
        keeper.aliases.push(dropped.label.clone());
        keeper.aliases.extend(dropped.aliases.iter().cloned());

        Ok(MergeRecord {
            keep: keep.clone(),
            drop: drop.clone(),
            dropped_label: dropped.label,
            moved_children: moved,
            from_domain: (dropped.domain != keep_domain).then_some(dropped.domain),
        })
    }

    /// Re-parents `child` within its domain. Returns the previous parent.
    pub fn move_node(&mut self, child: &NodeId, new_parent: &NodeId) -> Result<NodeId> {
        let node = self
            .nodes
            .get(child)
            .ok_or_else(|| TaxonomyError::UnknownNode(child.clone()))?;
        let target = self
            .nodes
            .get(new_parent)
            .ok_or_else(|| TaxonomyError::UnknownParent(new_parent.clone()))?;
        let old_parent = node
            .parent
            .clone()
            .ok_or_else(|| TaxonomyError::DomainRoot(child.clone()))?;
        if target.domain != node.domain {
            return Err(TaxonomyError::DomainMismatch {
                node: child.clone(),
                node_domain: node.domain.clone(),
                parent_domain: target.domain.clone(),
            });
        }
        if self.is_in_subtree(new_parent, child) {
            return Err(TaxonomyError::WouldCreateCycle {
                keep: new_parent.clone(),
                drop: child.clone(),
            });
        }
        if let Some(siblings) = self.children.get_mut(&old_parent) {
            siblings.retain(|c| c != child);
        }
        self.children.entry(new_parent.clone()).or_default().push(child.clone());
        self.nodes.get_mut(child).expect("checked above").parent = Some(new_parent.clone());
        Ok(old_parent)
    }

    /// Max depth, mean leaf depth and mean children per internal node.
    /// The virtual root only participates in [`RootMode::Global`].
    pub fn structural_stats(&self, mode: RootMode) -> Result<StructuralStats> {
        if self.nodes.is_empty() {
            return Err(TaxonomyError::EmptyTaxonomy);
        }
        let offset = usize::from(mode == RootMode::Global);
        let mut max_depth = 0;
        let mut leaf_depth_sum = 0usize;
        let mut leaves = 0usize;
        let mut edges = 0usize;
        let mut internal = 0usize;
        for domain in &self.domains {
            let mut stack = vec![(domain.root.clone(), 1 + offset)];
            while let Some((id, depth)) = stack.pop() {
                max_depth = max_depth.max(depth);
                let kids = self.children(&id);
                if kids.is_empty() {
                    leaves += 1;
                    leaf_depth_sum += depth;
                } else {
                    internal += 1;
                    edges += kids.len();
                    stack.extend(kids.iter().map(|k| (k.clone(), depth + 1)));
                }
            }
        }
        if mode == RootMode::Global {
            internal += 1;
            edges += self.domains.len();
        }
        Ok(StructuralStats {
            max_depth,
            avg_depth: leaf_depth_sum as f64 / leaves as f64,
            branch_factor: if internal == 0 {
                0.0
            } else {
                edges as f64 / internal as f64
            },
        })
    }

    /// Checks every structural invariant from scratch. Empty means valid.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut seen_domains = BTreeSet::new();
        for entry in &self.domains {
            if !seen_domains.insert(entry.name.as_str()) {
                problems.push(format!("domain `{}` appears twice", entry.name));
            }
            match self.nodes.get(&entry.root) {
                None => problems.push(format!("domain `{}` root `{}` missing", entry.name, entry.root)),
                Some(root) => {
                    if root.parent.is_some() {
                        problems.push(format!("domain root `{}` has a parent", root.id));
                    }
                    if root.domain != entry.name {
                        problems.push(format!("domain root `{}` tagged `{}`", root.id, root.domain));
                    }
                }
            }
        }
        for node in self.nodes.values() {
            if node.label.trim().is_empty() {
                problems.push(format!("node `{}` has an empty label", node.id));
            }
            if self.domain(&node.domain).is_none() {
                problems.push(format!("node `{}` in unknown domain `{}`", node.id, node.domain));
            }
            match &node.parent {
                None => {
                    if !self.is_domain_root(&node.id) {
                        problems.push(format!("node `{}` has no parent but is not a domain root", node.id));
                    }
                }
                Some(parent) => match self.nodes.get(parent) {
                    None => problems.push(format!("node `{}` has missing parent `{}`", node.id, parent)),
                    Some(p) => {
                        if p.domain != node.domain {
                            problems.push(format!("node `{}` crosses domains to parent `{}`", node.id, parent));
                        }
                        if !self.children(parent).contains(&node.id) {
                            problems.push(format!("child index missing `{}` under `{}`", node.id, parent));
                        }
                    }
                },
            }
            // cycle check: the walk must reach a root within |nodes| steps
            let mut steps = 0;
            let mut cursor = node.parent.as_ref();
            while let Some(id) = cursor {
                steps += 1;
                if steps > self.nodes.len() {
                    problems.push(format!("cycle through node `{}`", node.id));
                    break;
                }
                cursor = self.nodes.get(id).and_then(|n| n.parent.as_ref());
            }
        }
        for (parent, kids) in &self.children {
            let mut unique = BTreeSet::new();
            for kid in kids {
                if !unique.insert(kid) {
                    problems.push(format!("child `{kid}` listed twice under `{parent}`"));
                }
                match self.nodes.get(kid) {
                    Some(n) if n.parent.as_ref() == Some(parent) => {}
                    _ => problems.push(format!("stale child index entry `{kid}` under `{parent}`")),
                }
            }
        }
        problems
    }

    // ---- JSON document -------------------------------------------------

    pub fn to_document(&self) -> TaxonomyDocument {
        TaxonomyDocument {
            domains: self
                .domains
                .iter()
                .map(|entry| DomainDocument {
                    name: entry.name.clone(),
                    description: entry.description.clone(),
                    nodes: self
                        .domain_nodes(&entry.name)
                        .into_iter()
                        .map(|n| NodeDocument {
                            id: n.id.clone(),
                            label: n.label.clone(),
                            definition: n.definition.clone(),
                            parent_id: n.parent.clone(),
                            provenance: n.provenance,
                            aliases: n.aliases.clone(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: TaxonomyDocument) -> Result<Self> {
        let mut taxonomy = Taxonomy::new();
        for domain in doc.domains {
            if domain.name.trim().is_empty() {
                return Err(TaxonomyError::Format("domain with empty name".into()));
            }
            let mut roots = domain.nodes.iter().filter(|n| n.parent_id.is_none());
            let root = roots
                .next()
                .ok_or_else(|| TaxonomyError::Format(format!("domain `{}` has no root node", domain.name)))?;
            if let Some(extra) = roots.next() {
                return Err(TaxonomyError::Format(format!(
                    "domain `{}` has a second root `{}`",
                    domain.name, extra.id
                )));
            }
            taxonomy.add_node(root.to_node(&domain.name), Parent::VirtualRoot)?;
            taxonomy.domains.last_mut().expect("just pushed").description = domain.description.clone();

            // attach in passes so parents may appear after children in the file
            let mut pending: Vec<&NodeDocument> = domain.nodes.iter().filter(|n| n.parent_id.is_some()).collect();
            while !pending.is_empty() {
                let before = pending.len();
                let mut next = Vec::new();
                for doc_node in pending {
                    let parent = doc_node.parent_id.clone().expect("filtered");
                    if taxonomy.nodes.contains_key(&parent) {
                        if taxonomy.nodes[&parent].domain != domain.name {
                            return Err(TaxonomyError::Format(format!(
                                "node `{}` points at `{}` in another domain",
                                doc_node.id, parent
                            )));
                        }
                        taxonomy.add_node(doc_node.to_node(&domain.name), Parent::Node(parent))?;
                    } else {
                        next.push(doc_node);
                    }
                }
                if next.len() == before {
                    let ids: Vec<String> = next.iter().map(|n| n.id.to_string()).collect();
                    return Err(TaxonomyError::Format(format!(
                        "domain `{}`: nodes unreachable from the root (missing parent or cycle): {}",
                        domain.name,
                        ids.join(", ")
                    )));
                }
                pending = next;
            }
        }
        Ok(taxonomy)
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(&self.to_document()).expect("document serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TaxonomyDocument = serde_json::from_str(text).map_err(|e| TaxonomyError::Format(e.to_string()))?;
        Self::from_document(doc)
    }
}

/// On-disk taxonomy document: pipeline checkpoint and metrics input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyDocument {
    pub domains: Vec<DomainDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDocument {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub nodes: Vec<NodeDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDocument {
    pub id: NodeId,
    pub label: String,
    #[serde(default)]
    pub definition: String,
    pub parent_id: Option<NodeId>,
    #[serde(default)]
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
}

impl NodeDocument {
    fn to_node(&self, domain: &str) -> TaxonomyNode {
        TaxonomyNode {
            id: self.id.clone(),
            label: self.label.clone(),
            definition: self.definition.clone(),
            domain: domain.to_string(),
            parent: None,
            provenance: self.provenance,
            aliases: self.aliases.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: &str, label: &str, domain: &str) -> TaxonomyNode {
        TaxonomyNode::new(id, label, "", domain, Provenance::Induced)
    }

    /// root ─ A, B, C; C ─ C1, C2
    pub(crate) fn small_tree() -> Taxonomy {
        let mut t = Taxonomy::new();
        t.add_domain_root("root", "Military", "war", Provenance::Induced)
            .unwrap();
        for id in ["A", "B", "C"] {
            t.add_node(node(id, id, "Military"), Parent::Node("root".into()))
                .unwrap();
        }
        for id in ["C1", "C2"] {
            t.add_node(node(id, id, "Military"), Parent::Node("C".into())).unwrap();
        }
        t
    }

    #[test]
    fn add_leaf_grows_parent() {
        let mut t = Taxonomy::new();
        t.add_domain_root("mil", "Military", "", Provenance::Induced).unwrap();
        t.add_node(node("conflict", "軍事衝突", "Military"), Parent::Node("mil".into()))
            .unwrap();
        let before = t.children(&"conflict".into()).len();
        t.add_node(node("rebellion", "叛亂", "Military"), Parent::Node("conflict".into()))
            .unwrap();
        assert_eq!(t.children(&"conflict".into()).len(), before + 1);
        assert_eq!(t.len(), 3);
        assert!(t.validate().is_empty());
    }

    #[test]
    fn add_errors() {
        let mut t = small_tree();
        assert_eq!(
            t.add_node(node("x", "x", "Military"), Parent::Node("missing".into())),
            Err(TaxonomyError::UnknownParent("missing".into()))
        );
        assert_eq!(
            t.add_node(node("A", "again", "Military"), Parent::Node("root".into())),
            Err(TaxonomyError::DuplicateId("A".into()))
        );
        assert!(matches!(
            t.add_node(node("y", "y", "Ritual"), Parent::Node("root".into())),
            Err(TaxonomyError::DomainMismatch { .. })
        ));
        assert!(matches!(
            t.add_node(node("z", "  ", "Military"), Parent::Node("root".into())),
            Err(TaxonomyError::EmptyLabel(_))
        ));
        assert!(matches!(
            t.add_node(node(VIRTUAL_ROOT, "v", "Military"), Parent::Node("root".into())),
            Err(TaxonomyError::ReservedId(_))
        ));
    }

    #[test]
    fn paths_and_depths() {
        let t = small_tree();
        assert_eq!(
            t.path_to_root(&"root".into(), RootMode::PerDomain).unwrap(),
            vec![NodeId::from("root")]
        );
        assert_eq!(
            t.path_to_root(&"C1".into(), RootMode::PerDomain).unwrap(),
            vec![NodeId::from("root"), "C".into(), "C1".into()]
        );
        assert_eq!(t.depth(&"C1".into(), RootMode::Global).unwrap(), 4);
        assert_eq!(
            t.path_to_root(&"nope".into(), RootMode::PerDomain),
            Err(TaxonomyError::UnknownNode("nope".into()))
        );
    }

    #[test]
    fn weights_match_hand_values() {
        let t = small_tree();
        let w = |a: &str, b: &str| t.structure_weight(&a.into(), &b.into(), RootMode::PerDomain).unwrap();
        assert_eq!(w("C1", "C1"), Ratio::new(1, 1));
        assert_eq!(w("A", "B"), Ratio::new(1, 2));
        assert_eq!(w("C", "C1"), Ratio::new(4, 5));
        assert_eq!(t.lca_depth(&"C1".into(), &"C2".into(), RootMode::PerDomain).unwrap(), 2);
    }

    #[test]
    fn cross_domain_lca_needs_global_mode() {
        let mut t = small_tree();
        t.add_domain_root("rit", "Ritual", "", Provenance::Induced).unwrap();
        assert!(matches!(
            t.lca_depth(&"A".into(), &"rit".into(), RootMode::PerDomain),
            Err(TaxonomyError::NoCommonRoot(..))
        ));
        assert_eq!(t.lca_depth(&"A".into(), &"rit".into(), RootMode::Global).unwrap(), 1);
    }

    #[test]
    fn merge_childless_duplicates() {
        let mut t = small_tree();
        let rec = t.merge_nodes(&"A".into(), &"B".into()).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(t.node(&"A".into()).unwrap().aliases, vec!["B".to_string()]);
        assert!(rec.moved_children.is_empty());
        assert!(t.validate().is_empty());
    }

    #[test]
    fn merge_moves_children() {
        let mut t = small_tree();
        t.add_node(node("C3", "C3", "Military"), Parent::Node("C".into()))
            .unwrap();
        t.merge_nodes(&"A".into(), &"C".into()).unwrap();
        assert_eq!(t.children(&"A".into()).len(), 3);
        assert!(t.validate().is_empty());
    }

    #[test]
    fn merge_into_descendant_is_cycle() {
        let mut t = small_tree();
        assert!(matches!(
            t.merge_nodes(&"C1".into(), &"C".into()),
            Err(TaxonomyError::WouldCreateCycle { .. })
        ));
        assert!(matches!(
            t.merge_nodes(&"A".into(), &"A".into()),
            Err(TaxonomyError::WouldCreateCycle { .. })
        ));
        assert!(matches!(
            t.merge_nodes(&"A".into(), &"root".into()),
            Err(TaxonomyError::WouldCreateCycle { .. })
        ));
    }

    #[test]
    fn cross_domain_merge_relabels_subtree() {
        let mut t = small_tree();
        t.add_domain_root("rit", "Ritual", "", Provenance::Induced).unwrap();
        t.add_node(node("R1", "R1", "Ritual"), Parent::Node("rit".into()))
            .unwrap();
        let rec = t.merge_nodes(&"R1".into(), &"C".into()).unwrap();
        assert_eq!(rec.from_domain.as_deref(), Some("Military"));
        assert_eq!(t.node(&"C1".into()).unwrap().domain, "Ritual");
        assert!(t.validate().is_empty());
    }

    #[test]
    fn move_node_rules() {
        let mut t = small_tree();
        assert_eq!(t.move_node(&"C1".into(), &"A".into()).unwrap(), NodeId::from("C"));
        assert!(matches!(
            t.move_node(&"C".into(), &"C2".into()),
            Err(TaxonomyError::WouldCreateCycle { .. })
        ));
        assert!(matches!(
            t.move_node(&"root".into(), &"A".into()),
            Err(TaxonomyError::WouldCreateCycle { .. }) | Err(TaxonomyError::DomainRoot(_))
        ));
        assert!(t.validate().is_empty());
    }

    #[test]
    fn stats_hand_counts() {
        let mut flat = Taxonomy::new();
        flat.add_domain_root("r", "Nature", "", Provenance::Induced).unwrap();
        for id in ["a", "b", "c"] {
            flat.add_node(node(id, id, "Nature"), Parent::Node("r".into())).unwrap();
        }
        let s = flat.structural_stats(RootMode::PerDomain).unwrap();
        assert_eq!((s.max_depth, s.avg_depth, s.branch_factor), (2, 2.0, 3.0));

        let s = small_tree().structural_stats(RootMode::PerDomain).unwrap();
        assert_eq!((s.max_depth, s.avg_depth, s.branch_factor), (3, 2.5, 2.5));

        assert_eq!(
            Taxonomy::new().structural_stats(RootMode::PerDomain),
            Err(TaxonomyError::EmptyTaxonomy)
        );
    }

    #[test]
    fn stats_global_mode_counts_virtual_root() {
        let s = small_tree().structural_stats(RootMode::Global).unwrap();
        assert_eq!(s.max_depth, 4);
        assert_eq!(s.avg_depth, 3.5);
        assert_eq!(s.branch_factor, 6.0 / 3.0);
    }

    #[test]
    fn mint_ids_skip_existing() {
        let mut t = small_tree();
        t.add_node(node("exp-1", "x", "Military"), Parent::Node("root".into()))
            .unwrap();
        assert_eq!(t.mint_id("exp"), NodeId::from("exp-2"));
        assert_eq!(t.mint_id("exp"), NodeId::from("exp-3"));
    }

    #[test]
    fn json_round_trip_and_out_of_order_nodes() {
        let t = small_tree();
        let text = t.to_json();
        let back = Taxonomy::from_json(&text).unwrap();
        assert_eq!(back.to_json(), text);

        let shuffled = r#"{"domains":[{"name":"Nature","description":"d","nodes":[
            {"id":"b","label":"B","definition":"","parent_id":"a","provenance":"induced"},
            {"id":"a","label":"A","definition":"","parent_id":"r","provenance":"induced"},
            {"id":"r","label":"Nature","definition":"d","parent_id":null}]}]}"#;
        let t = Taxonomy::from_json(shuffled).unwrap();
        assert_eq!(t.depth(&"b".into(), RootMode::PerDomain).unwrap(), 3);
        assert_eq!(t.node(&"r".into()).unwrap().provenance, Provenance::Ingested);
    }

    #[test]
    fn json_rejects_cycles_and_double_roots() {
        let cyclic = r#"{"domains":[{"name":"N","nodes":[
            {"id":"r","label":"N","parent_id":null},
            {"id":"a","label":"A","parent_id":"b"},
            {"id":"b","label":"B","parent_id":"a"}]}]}"#;
        assert!(matches!(Taxonomy::from_json(cyclic), Err(TaxonomyError::Format(_))));
        let two_roots = r#"{"domains":[{"name":"N","nodes":[
            {"id":"r","label":"N","parent_id":null},
            {"id":"s","label":"S","parent_id":null}]}]}"#;
        assert!(matches!(Taxonomy::from_json(two_roots), Err(TaxonomyError::Format(_))));
    }

    #[test]
    fn embedding_text_convention() {
        let mut n = node("x", "朝貢", "Diplomacy");
        assert_eq!(n.embedding_text(), "朝貢");
        n.definition = "藩屬向中原王朝進獻方物".into();
        assert_eq!(n.embedding_text(), "朝貢：藩屬向中原王朝進獻方物");
    }
}
