#![allow(dead_code)]

use histaxo_core::{NodeId, Parent, Provenance, Taxonomy, TaxonomyNode};
use histaxo_gateway::{AgentRole, Gateway, MockProvider, RoleName};
use serde_json::Value;

pub fn role(name: RoleName, model: &str) -> AgentRole {
    AgentRole::new(name, "mock", model, Some(0.0))
}

pub fn gateway(fixture: Value) -> Gateway {
    gateway_seeded(7, fixture)
}

pub fn gateway_seeded(seed: u64, fixture: Value) -> Gateway {
    Gateway::mock(MockProvider::from_json(seed, &fixture.to_string()).expect("fixture parses")).with_parallelism(4)
}

/// One domain tree from `(id, label, parent id)` rows; the first row is
/// the root.
pub fn add_tree(tax: &mut Taxonomy, domain: &str, rows: &[(&str, &str, &str)]) {
    let (root_id, _, _) = rows[0];
    tax.add_domain_root(NodeId::new(root_id), domain, "", Provenance::Induced)
        .unwrap();
    for (id, label, parent) in &rows[1..] {
        tax.add_node(
            TaxonomyNode::new(NodeId::new(*id), *label, "", domain, Provenance::Induced),
            Parent::Node(NodeId::new(*parent)),
        )
        .unwrap();
    }
}

pub fn id(s: &str) -> NodeId {
    NodeId::new(s)
}
