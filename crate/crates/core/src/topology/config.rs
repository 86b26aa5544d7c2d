use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::comms::DEFAULT_TIMEOUT;
use crate::mask::tabular::TabularFormat;
use crate::mask::DEFAULT_REFRESH_INTERVAL;
use crate::model::SchemaMapping;
use crate::wrapper::{AdapterConfig, WrapperCapabilities};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Wrapper,
    Mediator,
    Mask,
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComponentKind::Wrapper => "wrapper",
            ComponentKind::Mediator => "mediator",
            ComponentKind::Mask => "mask",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WrapperConfig {
    /// Narrows what the adapter would otherwise push down.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capabilities: Option<WrapperCapabilities>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediatorConfig {
    #[serde(default, skip_serializing_if = "SchemaMapping::is_empty")]
    pub mapping: SchemaMapping,
    /// Set on mediators that also represent data (mask-less layouts). Only
    /// recorded; a mediator never renders anything itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_ms: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKindName {
    Http,
    Tabular,
}

impl MaskKindName {
    pub fn as_str(&self) -> &'static str {
        match self {
            MaskKindName::Http => "http",
            MaskKindName::Tabular => "tabular",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "http" => Some(MaskKindName::Http),
            "tabular" => Some(MaskKindName::Tabular),
            _ => None,
        }
    }
}

impl fmt::Display for MaskKindName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskComponentConfig {
    pub mask_kind: MaskKindName,
    #[serde(default, skip_serializing_if = "SchemaMapping::is_empty")]
    pub mapping: SchemaMapping,
    /// Tabular only: `table` or `csv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub stale_allowed: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub allow_wrapper_downstream: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refresh_secs: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_ms: Option<u64>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl MaskComponentConfig {
    pub fn new(mask_kind: MaskKindName) -> Self {
        MaskComponentConfig {
            mask_kind,
            mapping: SchemaMapping::default(),
            format: None,
            stale_allowed: false,
            allow_wrapper_downstream: false,
            refresh_secs: None,
            timeout_ms: None,
        }
    }

    pub fn tabular_format(&self) -> Result<TabularFormat, String> {
        self.format.as_deref().unwrap_or("table").parse()
    }

    pub fn refresh_interval(&self) -> std::time::Duration {
        self.refresh_secs
            .map_or(DEFAULT_REFRESH_INTERVAL, std::time::Duration::from_secs)
    }
}

pub(crate) fn timeout(ms: Option<u64>) -> std::time::Duration {
    ms.map_or(DEFAULT_TIMEOUT, std::time::Duration::from_millis)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ComponentConfig {
    Wrapper(WrapperConfig),
    Mediator(MediatorConfig),
    Mask(MaskComponentConfig),
}

impl ComponentConfig {
    pub fn kind(&self) -> ComponentKind {
        match self {
            ComponentConfig::Wrapper(_) => ComponentKind::Wrapper,
            ComponentConfig::Mediator(_) => ComponentKind::Mediator,
            ComponentConfig::Mask(_) => ComponentKind::Mask,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub id: String,
    pub config: ComponentConfig,
}

impl Component {
    pub fn wrapper(id: impl Into<String>) -> Self {
        Component {
            id: id.into(),
            config: ComponentConfig::Wrapper(WrapperConfig::default()),
        }
    }

    pub fn mediator(id: impl Into<String>, config: MediatorConfig) -> Self {
        Component {
            id: id.into(),
            config: ComponentConfig::Mediator(config),
        }
    }

    pub fn mask(id: impl Into<String>, config: MaskComponentConfig) -> Self {
        Component {
            id: id.into(),
            config: ComponentConfig::Mask(config),
        }
    }

    pub fn kind(&self) -> ComponentKind {
        self.config.kind()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceDef {
    pub id: String,
    pub adapter: AdapterConfig,
}

/// Upper component to lower component, or wrapper to source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub from: String,
    pub to: String,
    /// Child alias for mediator edges; defaults to the child id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alias: Option<String>,
}

impl Edge {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Edge {
            from: from.into(),
            to: to.into(),
            alias: None,
        }
    }

    pub fn alias(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.to)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Topology {
    pub sources: Vec<SourceDef>,
    pub components: Vec<Component>,
    pub edges: Vec<Edge>,
    /// First port of the deterministic allocation in multi-process mode.
    pub base_port: Option<u16>,
}

pub const DEFAULT_BASE_PORT: u16 = 47100;

impl Topology {
    pub fn component(&self, id: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn source(&self, id: &str) -> Option<&SourceDef> {
        self.sources.iter().find(|s| s.id == id)
    }

    pub fn kind_of(&self, id: &str) -> Option<ComponentKind> {
        self.component(id).map(Component::kind)
    }

    /// Outgoing edges in document order.
    pub fn children_of<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.from == id)
    }

    pub fn parents_of<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.to == id)
    }

    pub fn masks(&self) -> impl Iterator<Item = &Component> {
        self.components.iter().filter(|c| c.kind() == ComponentKind::Mask)
    }

    /// One port per component, in document order.
    pub fn port_plan(&self, base_port: u16) -> BTreeMap<String, u16> {
        self.components
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.clone(), base_port + i as u16))
            .collect()
    }

    pub fn to_json(&self) -> Json {
        let components: Vec<Json> = self
            .components
            .iter()
            .map(|c| {
                let config = match &c.config {
                    ComponentConfig::Wrapper(w) => serde_json::to_value(w),
                    ComponentConfig::Mediator(m) => serde_json::to_value(m),
                    ComponentConfig::Mask(m) => serde_json::to_value(m),
                }
                .expect("configs always serialize");
                let mut obj = serde_json::Map::new();
                obj.insert("id".into(), c.id.clone().into());
                obj.insert("kind".into(), c.kind().to_string().into());
                if config.as_object().is_some_and(|o| !o.is_empty()) {
                    obj.insert("config".into(), config);
                }
                Json::Object(obj)
            })
            .collect();
        let mut doc = serde_json::json!({
            "sources": self.sources,
            "components": components,
            "edges": self.edges,
        });
        if let Some(port) = self.base_port {
            doc["base_port"] = port.into();
        }
        doc
    }

    pub fn to_pretty_string(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.to_json()).expect("json values always serialize");
        text.push('\n');
        text
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse-error at {path}: {detail}")]
pub struct ParseError {
    /// JSON path of the offending element, `.` for the whole document.
    pub path: String,
    pub line: Option<usize>,
    pub detail: String,
}

impl ParseError {
    pub fn code(&self) -> &'static str {
        "parse-error"
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    sources: Vec<SourceDef>,
    components: Vec<RawComponent>,
    edges: Vec<Edge>,
    #[serde(default)]
    base_port: Option<u16>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    id: String,
    kind: ComponentKind,
    #[serde(default)]
    config: Option<Json>,
}

fn typed_config<T: serde::de::DeserializeOwned + Default>(value: Option<Json>, path: &str) -> Result<T, ParseError> {
    match value {
        None => Ok(T::default()),
        Some(v) => config_at(v, path),
    }
}

fn config_at<T: serde::de::DeserializeOwned>(value: Json, path: &str) -> Result<T, ParseError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        ParseError {
            path: if inner == "." {
                path.to_string()
            } else {
                format!("{path}.{inner}")
            },
            line: None,
            detail: e.into_inner().to_string(),
        }
    })
}

pub fn parse_topology(document: &str) -> Result<Topology, ParseError> {
    let mut de = serde_json::Deserializer::from_str(document);
    let raw: RawTopology = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ParseError {
            path,
            line: (inner.line() > 0).then_some(inner.line()),
            detail: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| ParseError {
        path: ".".into(),
        line: Some(e.line()),
        detail: e.to_string(),
    })?;

    let mut components = Vec::with_capacity(raw.components.len());
    for (i, c) in raw.components.into_iter().enumerate() {
        let path = format!("components[{i}].config");
        let config = match c.kind {
            ComponentKind::Wrapper => ComponentConfig::Wrapper(typed_config(c.config, &path)?),
            ComponentKind::Mediator => ComponentConfig::Mediator(typed_config(c.config, &path)?),
            ComponentKind::Mask => {
                let Some(value) = c.config else {
                    return Err(ParseError {
                        path,
                        line: None,
                        detail: "a mask needs a config with `mask_kind`".into(),
                    });
                };
                let mask: MaskComponentConfig = config_at(value, &path)?;
                if let Err(detail) = mask.tabular_format() {
                    return Err(ParseError {
                        path: format!("{path}.format"),
                        line: None,
                        detail,
                    });
                }
                ComponentConfig::Mask(mask)
            }
        };
        components.push(Component { id: c.id, config });
    }
    Ok(Topology {
        sources: raw.sources,
        components,
        edges: raw.edges,
        base_port: raw.base_port,
    })
}
