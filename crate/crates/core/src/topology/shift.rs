use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{
    Component, ComponentConfig, ComponentKind, Edge, MaskComponentConfig, MaskKindName, MediatorConfig, SourceDef,
    Topology,
};
use super::validate::validate_topology;
use crate::cost::Architecture;
use crate::wrapper::AdapterConfig;

/// An anticipated change to a running architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shift", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shift {
    /// A representation kind nobody offers yet, over an existing mediation.
    AddRepresentationType { over: String, kind: String },
    /// Another representation of an already implemented kind.
    AddRepresentation {
        over: String,
        #[serde(default)]
        kind: Option<String>,
    },
    /// A new mediation over existing wrappers, made reachable to users.
    AddMediation {
        wrappers: Vec<String>,
        #[serde(default)]
        kind: Option<String>,
    },
    /// A new source and its wrapper under an existing mediator.
    AddWrapper {
        mediator: String,
        #[serde(default)]
        source: Option<AdapterConfig>,
    },
}

impl Shift {
    pub fn scenario(&self) -> u8 {
        match self {
            Shift::AddRepresentationType { .. } => 1,
            Shift::AddRepresentation { .. } => 2,
            Shift::AddMediation { .. } => 3,
            Shift::AddWrapper { .. } => 4,
        }
    }

    /// How many wrappers the shifted mediation spans.
    pub fn wrapper_count(&self, t: &Topology) -> usize {
        match self {
            Shift::AddRepresentationType { over, .. } | Shift::AddRepresentation { over, .. } => {
                wrappers_below(t, over).len()
            }
            Shift::AddMediation { wrappers, .. } => wrappers.len(),
            Shift::AddWrapper { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Implement,
    Deploy,
    Connect,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Implement => "implement",
            Action::Deploy => "deploy",
            Action::Connect => "connect",
        })
    }
}

pub const MASK: &str = "Ma";
/// A mediator that also represents.
pub const MEDIATOR: &str = "Me";
/// A mediator that only mediates.
pub const MEDIATOR_PRIME: &str = "Me'";
pub const WRAPPER: &str = "W";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub action: Action,
    /// One of `Ma`, `Me`, `Me'`, `W`. For connections, the upper end.
    pub component_type: String,
    pub component: String,
    /// Lower end of a connection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peer: Option<String>,
}

impl fmt::Display for Edit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.action, self.component_type, self.component)?;
        if let Some(p) = &self.peer {
            write!(f, " -> {p}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditLog {
    pub edits: Vec<Edit>,
}

impl EditLog {
    fn push(&mut self, action: Action, component_type: &str, component: &str, peer: Option<&str>) {
        self.edits.push(Edit {
            action,
            component_type: component_type.to_string(),
            component: component.to_string(),
            peer: peer.map(String::from),
        });
    }

    pub fn count(&self, action: Action, component_type: &str) -> usize {
        self.edits
            .iter()
            .filter(|e| e.action == action && e.component_type == component_type)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid-shift-target: {0}")]
pub struct ShiftError(pub String);

impl ShiftError {
    pub fn code(&self) -> &'static str {
        "invalid-shift-target"
    }
}

#[derive(Debug, Clone)]
pub struct ShiftOutcome {
    pub topology: Topology,
    pub log: EditLog,
}

/// Masks anywhere make it MMW; mediators over mediators make it 2LMW.
pub fn architecture(t: &Topology) -> Architecture {
    if t.masks().next().is_some() {
        return Architecture::Mmw;
    }
    let stacked = t.edges.iter().any(|e| {
        t.kind_of(&e.from) == Some(ComponentKind::Mediator) && t.kind_of(&e.to) == Some(ComponentKind::Mediator)
    });
    if stacked {
        Architecture::TwoLayer
    } else {
        Architecture::OneLayer
    }
}

/// Wrappers reachable from `id`, first-reached order.
pub fn wrappers_below(t: &Topology, id: &str) -> Vec<String> {
    fn walk(t: &Topology, id: &str, seen: &mut BTreeSet<String>, out: &mut Vec<String>) {
        for e in t.children_of(id) {
            match t.kind_of(&e.to) {
                Some(ComponentKind::Wrapper) => {
                    if seen.insert(e.to.clone()) {
                        out.push(e.to.clone());
                    }
                }
                Some(ComponentKind::Mediator) => walk(t, &e.to, seen, out),
                _ => {}
            }
        }
    }
    let mut out = Vec::new();
    walk(t, id, &mut BTreeSet::new(), &mut out);
    out
}

/// Representation kinds already implemented: mask kinds, or the kinds
/// representational mediators carry.
pub fn representation_kinds(t: &Topology) -> Vec<String> {
    let mut kinds = Vec::new();
    for c in &t.components {
        let k = match &c.config {
            ComponentConfig::Mask(m) => Some(m.mask_kind.to_string()),
            ComponentConfig::Mediator(m) => m.representation.clone(),
            ComponentConfig::Wrapper(_) => None,
        };
        if let Some(k) = k {
            if !kinds.contains(&k) {
                kinds.push(k);
            }
        }
    }
    kinds
}

fn fresh_id(t: &Topology, prefix: &str) -> String {
    let taken = |id: &str| t.component(id).is_some() || t.source(id).is_some();
    (1..)
        .map(|k| format!("{prefix}{k}"))
        .find(|id| !taken(id))
        .expect("ids are unbounded")
}

fn bad(detail: impl Into<String>) -> ShiftError {
    ShiftError(detail.into())
}

struct Builder {
    t: Topology,
    log: EditLog,
    arch: Architecture,
}

impl Builder {
    fn mediator_type(&self) -> &'static str {
        if self.arch == Architecture::Mmw {
            MEDIATOR_PRIME
        } else {
            MEDIATOR
        }
    }

    fn connect(&mut self, from: &str, ty: &str, to: &str, alias: Option<&str>) {
        self.t.edges.push(Edge {
            from: from.to_string(),
            to: to.to_string(),
            alias: alias.map(String::from),
        });
        self.log.push(Action::Connect, ty, from, Some(to));
    }

    fn add_mask(&mut self, kind: MaskKindName, over: &str, implement: bool) {
        let id = fresh_id(&self.t, "ma");
        if implement {
            self.log.push(Action::Implement, MASK, &id, None);
        }
        self.t
            .components
            .push(Component::mask(&id, MaskComponentConfig::new(kind)));
        self.log.push(Action::Deploy, MASK, &id, None);
        self.connect(&id, MASK, over, None);
    }

    /// A mediator over `children` (id, alias), with `mapping` rules.
    fn add_mediator(
        &mut self,
        config: MediatorConfig,
        children: &[(String, Option<String>)],
        implement: bool,
    ) -> String {
        let id = fresh_id(&self.t, "me");
        let ty = self.mediator_type();
        if implement {
            self.log.push(Action::Implement, ty, &id, None);
        }
        self.t.components.push(Component::mediator(&id, config));
        self.log.push(Action::Deploy, ty, &id, None);
        for (child, alias) in children {
            self.connect(&id, ty, child, alias.as_deref());
        }
        id
    }

    /// One representation over the mediation rooted at `over`.
    fn represent(&mut self, over: &str, kind: &str, implement: bool) -> Result<(), ShiftError> {
        match self.arch {
            Architecture::Mmw => {
                let kind = MaskKindName::parse(kind).ok_or_else(|| bad(format!("no mask kind `{kind}` exists")))?;
                self.add_mask(kind, over, implement);
            }
            Architecture::TwoLayer => {
                let config = MediatorConfig {
                    representation: Some(kind.to_string()),
                    ..MediatorConfig::default()
                };
                self.add_mediator(config, &[(over.to_string(), None)], implement);
            }
            Architecture::OneLayer => {
                // Redo the mediation itself, straight over the wrappers.
                let Some(ComponentConfig::Mediator(base)) = self.t.component(over).map(|c| c.config.clone()) else {
                    unreachable!("checked by the caller");
                };
                let children: Vec<(String, Option<String>)> = self
                    .t
                    .children_of(over)
                    .map(|e| (e.to.clone(), e.alias.clone()))
                    .collect();
                let config = MediatorConfig {
                    mapping: base.mapping,
                    representation: Some(kind.to_string()),
                    timeout_ms: base.timeout_ms,
                };
                self.add_mediator(config, &children, implement);
            }
        }
        Ok(())
    }
}

fn require_mediator(t: &Topology, id: &str) -> Result<(), ShiftError> {
    match t.kind_of(id) {
        Some(ComponentKind::Mediator) => Ok(()),
        Some(k) => Err(bad(format!("`{id}` is a {k}, not a mediator"))),
        None => Err(bad(format!("no component `{id}`"))),
    }
}

/// Kind used when a shift does not name one: the first already offered.
fn existing_kind(t: &Topology, kind: &Option<String>) -> Result<String, ShiftError> {
    let kinds = representation_kinds(t);
    match kind {
        Some(k) if kinds.contains(k) => Ok(k.clone()),
        Some(k) => Err(bad(format!("representation kind `{k}` is not implemented yet"))),
        None => kinds
            .into_iter()
            .next()
            .ok_or_else(|| bad("no representation kind exists yet")),
    }
}

pub fn apply_shift(t: &Topology, shift: &Shift) -> Result<ShiftOutcome, ShiftError> {
    let report = validate_topology(t);
    if !report.is_empty() {
        return Err(bad(format!("base topology is invalid: {}", report[0])));
    }
    let mut b = Builder {
        t: t.clone(),
        log: EditLog::default(),
        arch: architecture(t),
    };
    match shift {
        Shift::AddRepresentationType { over, kind } => {
            require_mediator(t, over)?;
            if representation_kinds(t).contains(kind) {
                return Err(bad(format!("representation kind `{kind}` already exists")));
            }
            b.represent(over, kind, true)?;
        }
        Shift::AddRepresentation { over, kind } => {
            require_mediator(t, over)?;
            let kind = existing_kind(t, kind)?;
            b.represent(over, &kind, false)?;
        }
        Shift::AddMediation { wrappers, kind } => {
            if wrappers.is_empty() {
                return Err(bad("a mediation needs at least one wrapper"));
            }
            let mut seen = BTreeSet::new();
            for w in wrappers {
                if t.kind_of(w) != Some(ComponentKind::Wrapper) {
                    return Err(bad(format!("`{w}` is not a wrapper")));
                }
                if !seen.insert(w) {
                    return Err(bad(format!("`{w}` is listed twice")));
                }
            }
            let kind = existing_kind(t, kind)?;
            let children: Vec<(String, Option<String>)> = wrappers.iter().map(|w| (w.clone(), None)).collect();
            match b.arch {
                Architecture::OneLayer => {
                    let config = MediatorConfig {
                        representation: Some(kind),
                        ..MediatorConfig::default()
                    };
                    b.add_mediator(config, &children, false);
                }
                Architecture::TwoLayer | Architecture::Mmw => {
                    let lower = b.add_mediator(MediatorConfig::default(), &children, false);
                    b.represent(&lower, &kind, false)?;
                }
            }
        }
        Shift::AddWrapper { mediator, source } => {
            require_mediator(t, mediator)?;
            let source_id = fresh_id(&b.t, "s");
            b.t.sources.push(SourceDef {
                id: source_id.clone(),
                adapter: source.clone().unwrap_or_else(AdapterConfig::mem_empty),
            });
            let wrapper = fresh_id(&b.t, "w");
            b.t.components.push(Component::wrapper(&wrapper));
            b.t.edges.push(Edge::new(&wrapper, &source_id));
            b.log.push(Action::Deploy, WRAPPER, &wrapper, None);
            let ty = b.mediator_type();
            b.connect(mediator, ty, &wrapper, None);
        }
    }
    let report = validate_topology(&b.t);
    assert!(report.is_empty(), "shift broke the architecture: {report:?}");
    Ok(ShiftOutcome {
        topology: b.t,
        log: b.log,
    })
}
