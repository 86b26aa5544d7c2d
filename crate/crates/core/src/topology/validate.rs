use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graphmap::DiGraphMap;
use serde::Serialize;

use super::config::{ComponentConfig, ComponentKind, Topology};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: String,
    /// Component, source or edge the violation is about.
    pub subject: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.rule, self.subject, self.detail)
    }
}

pub mod rule {
    pub const DUPLICATE_ID: &str = "duplicate-id";
    pub const DANGLING_EDGE: &str = "dangling-edge";
    pub const CYCLE: &str = "cycle";
    pub const LAYERING: &str = "layering";
    pub const RMA1: &str = "RMa1";
    pub const RMA2: &str = "RMa2";
    pub const F1_ADVISORY: &str = "F1-advisory";
    pub const WRAPPER_SOURCE: &str = "wrapper-source";
    pub const SOURCE_WRAPPER: &str = "source-wrapper";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Node {
    Source,
    Component(ComponentKind),
}

/// Every rule the topology breaks. Empty means launchable.
pub fn validate_topology(t: &Topology) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |rule: &str, subject: &str, detail: String| {
        out.push(Violation {
            rule: rule.to_string(),
            subject: subject.to_string(),
            detail,
        })
    };

    let mut nodes: BTreeMap<&str, Node> = BTreeMap::new();
    let ids = t
        .sources
        .iter()
        .map(|s| (s.id.as_str(), Node::Source))
        .chain(t.components.iter().map(|c| (c.id.as_str(), Node::Component(c.kind()))));
    for (id, node) in ids {
        if nodes.insert(id, node).is_some() {
            push(rule::DUPLICATE_ID, id, "id is used more than once".into());
        }
    }

    let mut graph: DiGraphMap<&str, ()> = DiGraphMap::new();
    for id in nodes.keys() {
        graph.add_node(id);
    }
    let mut seen_edges = BTreeSet::new();
    for e in &t.edges {
        let subject = format!("{} -> {}", e.from, e.to);
        let (Some(&from), Some(&to)) = (nodes.get(e.from.as_str()), nodes.get(e.to.as_str())) else {
            let missing = if nodes.contains_key(e.from.as_str()) {
                &e.to
            } else {
                &e.from
            };
            push(rule::DANGLING_EDGE, &subject, format!("`{missing}` is not declared"));
            continue;
        };
        if !seen_edges.insert((e.from.as_str(), e.to.as_str())) {
            push(rule::DUPLICATE_ID, &subject, "edge is declared more than once".into());
        }
        graph.add_edge(e.from.as_str(), e.to.as_str(), ());

        use ComponentKind::*;
        match (from, to) {
            (_, Node::Component(Mask)) => push(
                rule::RMA1,
                &subject,
                format!("mask `{}` must sit at the top and take no incoming connections", e.to),
            ),
            (Node::Source, _) => push(rule::LAYERING, &subject, "a source has no downstream".into()),
            (Node::Component(Wrapper), Node::Source) => {}
            (Node::Component(Wrapper), _) => {
                push(rule::LAYERING, &subject, "a wrapper has no component children".into())
            }
            (Node::Component(Mediator), Node::Component(Mediator | Wrapper)) => {}
            (Node::Component(Mediator), Node::Source) => push(
                rule::LAYERING,
                &subject,
                "a mediator reaches sources only through wrappers".into(),
            ),
            (Node::Component(Mask), Node::Component(Mediator)) => {}
            (Node::Component(Mask), Node::Component(Wrapper)) => {
                let allowed = match t.component(&e.from).map(|c| &c.config) {
                    Some(ComponentConfig::Mask(m)) => m.allow_wrapper_downstream,
                    _ => false,
                };
                if !allowed {
                    push(
                        rule::F1_ADVISORY,
                        &subject,
                        "a mask over a wrapper needs `allow_wrapper_downstream`".into(),
                    );
                }
            }
            (Node::Component(Mask), Node::Source) => {
                push(rule::RMA2, &subject, "a mask connects only to a mediator".into())
            }
        }
    }

    for scc in tarjan_scc(&graph) {
        let self_loop = scc.len() == 1 && graph.contains_edge(scc[0], scc[0]);
        if scc.len() > 1 || self_loop {
            let mut members: Vec<&str> = scc.clone();
            members.sort();
            push(rule::CYCLE, members[0], format!("cycle through {}", members.join(", ")));
        }
    }

    for c in &t.components {
        let out_edges: Vec<_> = t.children_of(&c.id).collect();
        match c.kind() {
            ComponentKind::Mask => {
                if out_edges.len() != 1 {
                    push(
                        rule::RMA2,
                        &c.id,
                        format!(
                            "a mask has exactly one downstream connection, found {}",
                            out_edges.len()
                        ),
                    );
                }
            }
            ComponentKind::Wrapper => {
                let sources = out_edges
                    .iter()
                    .filter(|e| nodes.get(e.to.as_str()) == Some(&Node::Source))
                    .count();
                if sources != 1 {
                    push(
                        rule::WRAPPER_SOURCE,
                        &c.id,
                        format!("a wrapper encapsulates exactly one source, found {sources}"),
                    );
                }
            }
            ComponentKind::Mediator => {}
        }
    }

    for s in &t.sources {
        let wrappers = t
            .parents_of(&s.id)
            .filter(|e| nodes.get(e.from.as_str()) == Some(&Node::Component(ComponentKind::Wrapper)))
            .count();
        if wrappers != 1 {
            push(
                rule::SOURCE_WRAPPER,
                &s.id,
                format!("a source is wrapped by exactly one wrapper, found {wrappers}"),
            );
        }
    }
    out
}

/// Bottom-up start order: wrappers, then mediators by height, then masks.
/// Assumes a validated (acyclic) topology.
pub fn start_order(t: &Topology) -> Vec<String> {
    fn height<'a>(t: &'a Topology, id: &'a str, memo: &mut BTreeMap<&'a str, usize>) -> usize {
        if let Some(&h) = memo.get(id) {
            return h;
        }
        let h = t
            .children_of(id)
            .filter(|e| t.component(&e.to).is_some())
            .map(|e| 1 + height(t, &e.to, memo))
            .max()
            .unwrap_or(0);
        memo.insert(id, h);
        h
    }
    let mut memo = BTreeMap::new();
    let mut order: Vec<(u8, usize, usize, &str)> = t
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let rank = match c.kind() {
                ComponentKind::Wrapper => 0,
                ComponentKind::Mediator => 1,
                ComponentKind::Mask => 2,
            };
            (rank, height(t, &c.id, &mut memo), i, c.id.as_str())
        })
        .collect();
    order.sort();
    order.into_iter().map(|(.., id)| id.to_string()).collect()
}
