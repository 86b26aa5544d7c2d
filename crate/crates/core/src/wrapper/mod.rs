//! Wrappers: one data source each, exposed as a local conceptual schema.
//!
//! A wrapper derives its LCS from the adapter's schema hints, splits each
//! incoming query between the source and itself according to the source's
//! capabilities, and applies the remainder to the native output.

mod adapter;
mod native;
mod pushdown;

use std::sync::{Arc, RwLock};

use async_trait::async_trait;
use thiserror::Error;

use crate::comms::{ComponentType, ErrorPayload, Hello, Service};
use crate::model::{
    evaluate_query_oracle, typecheck_query, CanonicalQuery, CanonicalResult, CanonicalSchema, RelationDef, SchemaRole,
    Table, TypeError,
};

pub use adapter::{
    AdapterConfig, AdapterKind, CsvDirectory, JsonLinesDirectory, MemoryStore, Seed, SeedTable, SourceAdapter,
};
pub use pushdown::{plan_pushdown, PushdownPlan, WrapperCapabilities};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WrapperError {
    #[error("source unreachable: {0}")]
    SourceUnreachable(String),
    #[error("unmappable type in `{collection}.{field}`: {detail}")]
    UnmappableType {
        collection: String,
        field: String,
        detail: String,
    },
    #[error("schema drift: {0}")]
    SchemaDrift(String),
    #[error("query does not typecheck: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Type(Vec<TypeError>),
    #[error("capability violation: {0}")]
    CapabilityViolation(String),
    /// Stored data no longer matches the relation it was scanned as.
    #[error("source mismatch: {0}")]
    SourceMismatch(String),
    #[error("malformed source: {0}")]
    MalformedSource(String),
}

impl WrapperError {
    pub fn code(&self) -> &str {
        match self {
            WrapperError::SourceUnreachable(_) => "source-unreachable",
            WrapperError::UnmappableType { .. } => "unmappable-type",
            WrapperError::SchemaDrift(_) | WrapperError::SourceMismatch(_) => "schema-drift",
            WrapperError::Type(errors) => errors.first().map_or("type-mismatch", |e| e.kind.code()),
            WrapperError::CapabilityViolation(_) => "capability-violation",
            WrapperError::MalformedSource(_) => "malformed-source",
        }
    }

    pub fn to_payload(&self, component: &str) -> ErrorPayload {
        ErrorPayload::new(self.code(), self.to_string()).attributed(component)
    }
}

/// A wrapper bound to exactly one source adapter.
pub struct Wrapper {
    id: String,
    adapter: Box<dyn SourceAdapter>,
    caps: WrapperCapabilities,
    lcs: RwLock<Arc<CanonicalSchema>>,
}

impl Wrapper {
    pub fn new(id: impl Into<String>, adapter: Box<dyn SourceAdapter>) -> Result<Self, WrapperError> {
        let id = id.into();
        let lcs = derive_lcs(&id, adapter.as_ref())?;
        let caps = adapter.capabilities();
        Ok(Wrapper {
            id,
            adapter,
            caps,
            lcs: RwLock::new(Arc::new(lcs)),
        })
    }

    /// Restricts pushdown further than the source itself would.
    pub fn with_capabilities(mut self, caps: &WrapperCapabilities) -> Self {
        self.caps = self.adapter.capabilities().intersect(caps);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn source_id(&self) -> &str {
        self.adapter.source_id()
    }

    pub fn capabilities(&self) -> &WrapperCapabilities {
        &self.caps
    }

    /// Cached LCS snapshot.
    pub fn lcs(&self) -> Arc<CanonicalSchema> {
        self.lcs.read().unwrap().clone()
    }

    /// Re-derives the LCS and swaps it in. Returns the new snapshot.
    pub fn refresh(&self) -> Result<Arc<CanonicalSchema>, WrapperError> {
        let fresh = Arc::new(derive_lcs(&self.id, self.adapter.as_ref())?);
        *self.lcs.write().unwrap() = fresh.clone();
        Ok(fresh)
    }

    pub fn plan(&self, query: &CanonicalQuery) -> Result<PushdownPlan, WrapperError> {
        let lcs = self.lcs();
        let typed = typecheck_query(query, &lcs).map_err(WrapperError::Type)?;
        Ok(plan_pushdown(&typed.query, &self.caps))
    }

    pub fn execute_wrapped(&self, query: &CanonicalQuery) -> Result<CanonicalResult, WrapperError> {
        let lcs = self.lcs();
        let typed = typecheck_query(query, &lcs).map_err(WrapperError::Type)?;
        let plan = plan_pushdown(&typed.query, &self.caps);
        let rows = match self.adapter.scan(&typed.relation, &plan.native_query) {
            Ok(rows) => rows,
            Err(WrapperError::SourceMismatch(detail)) => return Err(self.drift(&typed.relation, detail)),
            Err(e) => return Err(e),
        };
        let native = Table::new(adapter::native_output(&typed.relation, &plan.native_query)?, rows);
        let result = evaluate_query_oracle(&plan.compensation, &native).map_err(WrapperError::Type)?;
        Ok(result.with_origin(self.id.clone()))
    }

    /// Classifies a failed scan. The cache is left untouched either way.
    fn drift(&self, cached: &RelationDef, detail: String) -> WrapperError {
        match self.adapter.read_schema_hints(&cached.name) {
            Ok(current) if &current == cached => WrapperError::SourceMismatch(detail),
            Ok(_) => WrapperError::SchemaDrift(format!(
                "`{}` no longer matches the cached LCS of `{}`",
                cached.name, self.id
            )),
            Err(WrapperError::SourceUnreachable(d)) => {
                WrapperError::SchemaDrift(format!("`{}` is gone: {d}", cached.name))
            }
            Err(e) => WrapperError::SchemaDrift(format!("`{}`: {e}", cached.name)),
        }
    }
}

/// One relation per collection; role LCS, provenance the source id.
pub fn derive_lcs(wrapper_id: &str, adapter: &dyn SourceAdapter) -> Result<CanonicalSchema, WrapperError> {
    let mut schema = CanonicalSchema::new(wrapper_id, SchemaRole::LCS);
    schema.provenance = vec![adapter.source_id().to_string()];
    for collection in adapter.list_collections()? {
        schema.relations.push(adapter.read_schema_hints(&collection)?);
    }
    Ok(schema)
}

#[async_trait]
impl Service for Wrapper {
    fn identity(&self) -> Hello {
        Hello {
            component_type: ComponentType::Wrapper,
            node_id: self.id.clone(),
        }
    }

    async fn schema(&self) -> Result<CanonicalSchema, ErrorPayload> {
        Ok(self.lcs().as_ref().clone())
    }

    async fn query(&self, query: CanonicalQuery) -> Result<CanonicalResult, ErrorPayload> {
        self.execute_wrapped(&query).map_err(|e| e.to_payload(&self.id))
    }
}

#[cfg(test)]
mod tests;
