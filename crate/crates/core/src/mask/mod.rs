//! Masks: the top of the hierarchy, presenting one mediator's GCS in a
//! user-facing representation.
//!
//! A mask kind supplies the three translators ([`SchemaTranslator`],
//! [`QueryTranslator`], [`ResultTranslator`]) and its own mapping rules. The
//! [`MaskModule`] core handles schema loading, name reversal and query
//! sequencing; mask applications are written against [`MaskInterface`].

pub mod http;
pub mod tabular;

use std::fmt;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, SystemTime};

use futures::stream::{self, BoxStream};
use serde::{Deserialize, Serialize};
use tokio::task::JoinHandle;
use tracing::{info, warn};

use crate::comms::{CommError, CommNode, ComponentType, Endpoint, Link, DEFAULT_TIMEOUT};
use crate::model::{
    apply_schema_mapping, typecheck_query, CanonicalQuery, CanonicalResult, CanonicalSchema, MappingError,
    NameCorrespondence, SchemaMapping,
};

pub const DEFAULT_REFRESH_INTERVAL: Duration = Duration::from_secs(30);

/// Kind-specific bytes with their kind tag and content type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedDocument {
    pub kind: String,
    pub content_type: String,
    pub payload: Vec<u8>,
}

impl MaskedDocument {
    pub fn new(kind: &str, content_type: &str, payload: impl Into<Vec<u8>>) -> Self {
        MaskedDocument {
            kind: kind.to_string(),
            content_type: content_type.to_string(),
            payload: payload.into(),
        }
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.payload).into_owned()
    }
}

pub type MaskedSchema = MaskedDocument;
pub type MaskedQuery = MaskedDocument;
pub type MaskedResult = MaskedDocument;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Schema,
    Query,
    System,
    Result,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Schema => "schema",
            Stage::Query => "query",
            Stage::System => "system",
            Stage::Result => "result",
        })
    }
}

/// A failure attributed to the stage that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{stage} stage: {code}: {detail}")]
pub struct MaskError {
    #[serde(rename = "error")]
    pub code: String,
    pub stage: Stage,
    pub detail: String,
}

impl MaskError {
    pub fn new(stage: Stage, code: impl Into<String>, detail: impl Into<String>) -> Self {
        MaskError {
            code: code.into(),
            stage,
            detail: detail.into(),
        }
    }

    pub fn query(code: &str, detail: impl Into<String>) -> Self {
        MaskError::new(Stage::Query, code, detail)
    }

    pub fn not_ready(detail: impl Into<String>) -> Self {
        MaskError::new(Stage::Schema, "not-ready", detail)
    }

    fn system(e: &CommError) -> Self {
        let payload = e.to_payload();
        // Downstream details speak system names; only the code and origin cross the mask.
        let detail = match &payload.component {
            Some(c) => format!("downstream failure in `{c}`"),
            None => "downstream failure".to_string(),
        };
        MaskError::new(Stage::System, payload.code, detail)
    }

    pub fn is_not_ready(&self) -> bool {
        self.code == "not-ready"
    }
}

pub trait SchemaTranslator {
    /// Renders the already-mapped schema in the kind's format.
    fn translate_schema(&self, masked: &CanonicalSchema) -> Result<MaskedSchema, MaskError>;
}

pub trait QueryTranslator {
    /// Parses a masked query into a canonical query over masked names.
    fn translate_query(&self, query: &MaskedQuery, masked: &CanonicalSchema) -> Result<CanonicalQuery, MaskError>;
}

pub trait ResultTranslator {
    /// Renders a result whose attributes already carry masked names.
    fn translate_result(&self, result: &CanonicalResult) -> Result<MaskedResult, MaskError>;

    /// The same rendering in pieces, for streaming. One piece by default.
    fn translate_result_chunks(&self, result: &CanonicalResult) -> Result<Vec<Vec<u8>>, MaskError> {
        Ok(vec![self.translate_result(result)?.payload])
    }
}

/// Everything a new mask kind has to provide.
pub trait MaskKind: SchemaTranslator + QueryTranslator + ResultTranslator + Send + Sync {
    fn kind(&self) -> &'static str;

    /// Rename and hide rules from system names to masked names.
    fn mapping(&self) -> &SchemaMapping;
}

/// A system schema, its masked form, and the correspondence between them.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskView {
    pub system: CanonicalSchema,
    pub masked: CanonicalSchema,
    pub correspondence: NameCorrespondence,
}

fn mapping_error(e: MappingError) -> MaskError {
    MaskError::new(Stage::Schema, e.code(), e.to_string())
}

/// Masks only rename and hide.
pub fn check_mask_mapping(mapping: &SchemaMapping) -> Result<(), MaskError> {
    match mapping.rules.iter().position(|r| !r.is_rename_or_hide()) {
        None => Ok(()),
        Some(i) => Err(MaskError::new(
            Stage::Schema,
            "invalid-mask-mapping",
            format!("rule {} restructures relations; masks may only rename and hide", i + 1),
        )),
    }
}

pub fn mask_view(system: &CanonicalSchema, mapping: &SchemaMapping) -> Result<MaskView, MaskError> {
    check_mask_mapping(mapping)?;
    let (masked, correspondence) = apply_schema_mapping(system, mapping).map_err(mapping_error)?;
    Ok(MaskView {
        system: system.clone(),
        masked,
        correspondence,
    })
}

/// Masked query to a typechecked system query.
pub fn translate_query(kind: &dyn MaskKind, query: &MaskedQuery, view: &MaskView) -> Result<CanonicalQuery, MaskError> {
    if query.kind != kind.kind() {
        return Err(MaskError::query(
            "malformed-masked-query",
            format!("a `{}` query sent to a `{}` mask", query.kind, kind.kind()),
        ));
    }
    let mut masked = kind.translate_query(query, &view.masked)?;
    let Some(relation) = view.masked.relation(&masked.target) else {
        return Err(MaskError::query(
            "unknown-masked-resource",
            format!("no resource `{}`", masked.target),
        ));
    };
    for name in masked
        .projection
        .iter()
        .map(String::as_str)
        .chain(masked.selection.iter().flat_map(|p| p.attributes()))
    {
        if relation.attribute(name).is_none() {
            return Err(MaskError::query(
                "unknown-masked-field",
                format!("`{}` has no field `{name}`", masked.target),
            ));
        }
    }
    // Hidden attributes must never be fetched.
    if masked.projection.is_empty() {
        masked.projection = relation.attributes.iter().map(|a| a.name.clone()).collect();
    }
    // Typechecking on the masked side keeps system names out of error details.
    let typed = typecheck_query(&masked, &view.masked).map_err(|errors| {
        let code = errors[0].kind.code();
        let detail = errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ");
        MaskError::query(code, detail)
    })?;
    view.correspondence
        .to_input_query(&typed.query)
        .map_err(|e| MaskError::query("unknown-masked-field", e.to_string()))
}

/// Renames a system result on `system_target` to masked attribute names.
pub fn mask_result(
    result: &CanonicalResult,
    system_target: &str,
    view: &MaskView,
) -> Result<CanonicalResult, MaskError> {
    let unmapped = |detail: String| MaskError::new(Stage::Result, "unmapped-attribute", detail);
    let output = view
        .correspondence
        .output_relation_for(system_target)
        .ok_or_else(|| unmapped("result relation has no masked counterpart".to_string()))?;
    let corr = &view.correspondence.relations[output];
    let mut masked = result.clone();
    for (i, a) in masked.attributes.iter_mut().enumerate() {
        let name = corr
            .attributes
            .iter()
            .find(|c| c.sources[0].attribute == a.name)
            .map(|c| c.name.clone())
            .ok_or_else(|| unmapped(format!("result column {} has no masked name", i + 1)))?;
        a.name = name;
    }
    Ok(masked)
}

pub fn translate_result(
    kind: &dyn MaskKind,
    result: &CanonicalResult,
    system_target: &str,
    view: &MaskView,
) -> Result<MaskedResult, MaskError> {
    kind.translate_result(&mask_result(result, system_target, view)?)
}

#[derive(Debug, Clone)]
pub struct MaskConfig {
    pub id: String,
    pub refresh_interval: Duration,
    /// Keep answering from the previous schema when a reload fails.
    pub stale_allowed: bool,
    /// Permit a wrapper as the downstream peer. Inadvisable; logged.
    pub allow_wrapper_downstream: bool,
    pub timeout: Duration,
}

impl MaskConfig {
    pub fn new(id: impl Into<String>) -> Self {
        MaskConfig {
            id: id.into(),
            refresh_interval: DEFAULT_REFRESH_INTERVAL,
            stale_allowed: false,
            allow_wrapper_downstream: false,
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

/// One fetched system schema with everything derived from it.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub view: MaskView,
    pub masked_schema: MaskedSchema,
    pub fetched_at: SystemTime,
}

#[derive(Debug, Clone)]
pub struct SchemaLoad {
    pub snapshot: Arc<Snapshot>,
    /// Set when the fetch failed and the previous snapshot was kept.
    pub stale_warning: Option<String>,
}

pub struct MaskModule {
    config: MaskConfig,
    kind: Arc<dyn MaskKind>,
    node: CommNode,
    link: RwLock<Option<Arc<Link>>>,
    snapshot: RwLock<Option<Arc<Snapshot>>>,
    warning: Mutex<Option<String>>,
}

impl MaskModule {
    pub fn new(config: MaskConfig, kind: Arc<dyn MaskKind>) -> Result<Self, MaskError> {
        check_mask_mapping(kind.mapping())?;
        let node = CommNode::for_mask(config.id.clone()).with_timeout(config.timeout);
        Ok(MaskModule {
            config,
            kind,
            node,
            link: RwLock::new(None),
            snapshot: RwLock::new(None),
            warning: Mutex::new(None),
        })
    }

    /// New module, attached to `endpoint` with a first schema load attempted.
    /// A failed load leaves the module not ready rather than failing.
    pub async fn start(
        config: MaskConfig,
        kind: Arc<dyn MaskKind>,
        endpoint: &Endpoint,
    ) -> Result<Arc<Self>, MaskError> {
        let module = Arc::new(MaskModule::new(config, kind)?);
        module.attach(endpoint).await?;
        if let Err(e) = module.load_schema().await {
            warn!(mask = %module.config.id, error = %e, "initial schema load failed");
        }
        Ok(module)
    }

    pub fn id(&self) -> &str {
        &self.config.id
    }

    pub fn config(&self) -> &MaskConfig {
        &self.config
    }

    pub fn kind(&self) -> &dyn MaskKind {
        self.kind.as_ref()
    }

    pub fn node(&self) -> &CommNode {
        &self.node
    }

    /// Opens the single downstream link.
    pub async fn attach(&self, endpoint: &Endpoint) -> Result<(), MaskError> {
        let link = self
            .node
            .connect_downstream(endpoint)
            .await
            .map_err(|e| MaskError::system(&e))?;
        match link.peer().component_type {
            ComponentType::Mediator => {}
            ComponentType::Wrapper if self.config.allow_wrapper_downstream => {
                warn!(mask = %self.config.id, wrapper = %link.peer().node_id, "mask attached directly to a wrapper");
            }
            other => {
                self.node.disconnect(&link).await;
                let code = if other == ComponentType::Wrapper {
                    "wrapper-downstream-refused"
                } else {
                    "invalid-downstream"
                };
                return Err(MaskError::new(
                    Stage::System,
                    code,
                    format!("`{}` is a {other:?} component", link.peer().node_id),
                ));
            }
        }
        *self.link.write().unwrap() = Some(link);
        Ok(())
    }

    fn link(&self) -> Option<Arc<Link>> {
        self.link.read().unwrap().clone()
    }

    pub fn snapshot(&self) -> Option<Arc<Snapshot>> {
        self.snapshot.read().unwrap().clone()
    }

    pub fn is_ready(&self) -> bool {
        self.snapshot().is_some()
    }

    /// Last stale-schema warning, if the current snapshot is a fallback.
    pub fn warning(&self) -> Option<String> {
        self.warning.lock().unwrap().clone()
    }

    /// Fetches the system schema and replaces the snapshot.
    pub async fn load_schema(&self) -> Result<SchemaLoad, MaskError> {
        let link = self.link().ok_or_else(|| MaskError::not_ready("no downstream link"))?;
        let fetched = link.request_schema().await.map_err(|e| MaskError::system(&e));
        let built = fetched.and_then(|schema| {
            let view = mask_view(&schema, self.kind.mapping())?;
            let masked_schema = self.kind.translate_schema(&view.masked)?;
            Ok(Snapshot {
                view,
                masked_schema,
                fetched_at: SystemTime::now(),
            })
        });
        match built {
            Ok(snapshot) => {
                let snapshot = Arc::new(snapshot);
                *self.snapshot.write().unwrap() = Some(snapshot.clone());
                *self.warning.lock().unwrap() = None;
                Ok(SchemaLoad {
                    snapshot,
                    stale_warning: None,
                })
            }
            Err(e) => {
                let prior = self.snapshot();
                match prior {
                    Some(snapshot) if self.config.stale_allowed => {
                        let warning = format!("schema reload failed, serving the previous snapshot: {e}");
                        warn!(mask = %self.config.id, "{warning}");
                        *self.warning.lock().unwrap() = Some(warning.clone());
                        Ok(SchemaLoad {
                            snapshot,
                            stale_warning: Some(warning),
                        })
                    }
                    _ => {
                        *self.snapshot.write().unwrap() = None;
                        Err(e)
                    }
                }
            }
        }
    }

    /// Reloads the schema every refresh interval until aborted.
    pub fn spawn_refresher(self: &Arc<Self>) -> JoinHandle<()> {
        let module = Arc::downgrade(self);
        let every = self.config.refresh_interval;
        tokio::spawn(async move {
            let mut ticker = tokio::time::interval(every);
            ticker.tick().await;
            loop {
                ticker.tick().await;
                let Some(module) = module.upgrade() else { break };
                if let Err(e) = module.load_schema().await {
                    info!(mask = %module.config.id, error = %e, "scheduled schema reload failed");
                }
            }
        })
    }

    fn ready_snapshot(&self) -> Result<Arc<Snapshot>, MaskError> {
        self.snapshot()
            .ok_or_else(|| MaskError::not_ready(format!("mask `{}` has no schema", self.config.id)))
    }

    /// Runs a masked query against one snapshot and returns the result with
    /// masked attribute names.
    async fn run_masked(&self, query: &MaskedQuery) -> Result<CanonicalResult, MaskError> {
        let snapshot = self.ready_snapshot()?;
        let system = translate_query(self.kind.as_ref(), query, &snapshot.view)?;
        let link = self.link().ok_or_else(|| MaskError::not_ready("no downstream link"))?;
        let result = link
            .execute_remote_query(&system)
            .await
            .map_err(|e| MaskError::system(&e))?;
        let mut masked = mask_result(&result, &system.target, &snapshot.view)?;
        masked.origin = self.config.id.clone();
        Ok(masked)
    }

    pub async fn execute_masked_query(&self, query: &MaskedQuery) -> Result<MaskedResult, MaskError> {
        let result = self.run_masked(query).await?;
        self.kind.translate_result(&result)
    }
}

/// The mask application interface: masked schema, masked queries, masked
/// results (whole or streamed).
#[derive(Clone)]
pub struct MaskInterface {
    module: Arc<MaskModule>,
}

impl MaskInterface {
    pub fn new(module: Arc<MaskModule>) -> Self {
        MaskInterface { module }
    }

    pub fn id(&self) -> &str {
        self.module.id()
    }

    pub fn kind(&self) -> &'static str {
        self.module.kind().kind()
    }

    pub fn is_ready(&self) -> bool {
        self.module.is_ready()
    }

    /// Builds a masked query of this mask's kind from its textual form.
    pub fn masked_query(&self, text: &str) -> MaskedQuery {
        MaskedDocument::new(self.kind(), "text/plain", text)
    }

    pub async fn get_masked_schema(&self) -> Result<MaskedSchema, MaskError> {
        Ok(self.module.ready_snapshot()?.masked_schema.clone())
    }

    pub async fn run(&self, query: &MaskedQuery) -> Result<MaskedResult, MaskError> {
        self.module.execute_masked_query(query).await
    }

    pub async fn run_streaming(&self, query: &MaskedQuery) -> Result<BoxStream<'static, Vec<u8>>, MaskError> {
        let result = self.module.run_masked(query).await?;
        let chunks = self.module.kind().translate_result_chunks(&result)?;
        Ok(Box::pin(stream::iter(chunks)))
    }

    pub async fn refresh(&self) -> Result<SchemaLoad, MaskError> {
        self.module.load_schema().await
    }
}
