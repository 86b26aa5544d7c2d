//! Mediators: integrate child schemas into a GCS and answer queries against
//! it by decomposing them into child sub-queries.
//!
//! Children are reached only through comms links, so a child may be a
//! wrapper or another mediator.

mod plan;

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use async_trait::async_trait;
use thiserror::Error;

use crate::comms::{CommError, CommNode, ComponentType, Endpoint, ErrorPayload, Hello, Link, Service};
use crate::model::{CanonicalQuery, CanonicalResult, CanonicalSchema, MappingError, TypeError};

pub use plan::{
    decompose_query, integrate_schemas, merge_results, qualify, ChildRef, Combiner, Integration, IntegrationSpec,
    MergePlan, Origin, SubQuery,
};

#[derive(Debug, Clone, Error)]
pub enum MediatorError {
    #[error("alias collision: {0}")]
    AliasCollision(String),
    #[error("unknown child: {0}")]
    UnknownChild(String),
    #[error(transparent)]
    Mapping(MappingError),
    #[error("query does not typecheck: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Type(Vec<TypeError>),
    #[error("union arity mismatch: {0}")]
    UnionArityMismatch(String),
    #[error("missing partial: {0}")]
    MissingPartial(String),
    #[error("malformed partial: {0}")]
    PartialShape(String),
    #[error("child `{child}` failed: {}: {}", .error.code, .error.detail)]
    Child { child: String, error: ErrorPayload },
    #[error("cannot reach child `{child}`: {error}")]
    Connect { child: String, error: CommError },
}

impl MediatorError {
    pub fn code(&self) -> &str {
        match self {
            MediatorError::AliasCollision(_) => "alias-collision",
            MediatorError::UnknownChild(_) => "unknown-child",
            MediatorError::Mapping(e) => e.code(),
            MediatorError::Type(errors) => errors.first().map_or("type-mismatch", |e| e.kind.code()),
            MediatorError::UnionArityMismatch(_) => "union-arity-mismatch",
            MediatorError::MissingPartial(_) => "missing-partial",
            MediatorError::PartialShape(_) => "malformed-partial",
            MediatorError::Child { .. } => "peer-error",
            MediatorError::Connect { error, .. } => error.code(),
        }
    }

    /// Child failures are attributed to the child; all else to `mediator`.
    pub fn to_payload(&self, mediator: &str) -> ErrorPayload {
        let component = match self {
            MediatorError::Child { child, .. } | MediatorError::Connect { child, .. } => child.as_str(),
            _ => mediator,
        };
        ErrorPayload::new(self.code(), self.to_string()).attributed(component)
    }

    /// Code reported by the child, for child failures.
    pub fn child_code(&self) -> Option<&str> {
        match self {
            MediatorError::Child { error, .. } => Some(&error.code),
            _ => None,
        }
    }
}

pub struct Mediator {
    id: String,
    spec: IntegrationSpec,
    node: CommNode,
    links: Vec<Arc<Link>>,
    state: RwLock<Arc<Integration>>,
}

impl Mediator {
    /// Links to every child and builds the initial GCS. `endpoints` is keyed
    /// by child id.
    pub async fn connect(
        id: impl Into<String>,
        spec: IntegrationSpec,
        endpoints: &BTreeMap<String, Endpoint>,
        timeout: Duration,
    ) -> Result<Self, MediatorError> {
        let id = id.into();
        let node = CommNode::new(ComponentType::Mediator, id.clone()).with_timeout(timeout);
        let mut links = Vec::with_capacity(spec.children.len());
        for child in &spec.children {
            let endpoint = endpoints
                .get(&child.id)
                .ok_or_else(|| MediatorError::UnknownChild(format!("no endpoint for `{}`", child.id)))?;
            let link = node
                .connect_downstream(endpoint)
                .await
                .map_err(|error| MediatorError::Connect {
                    child: child.id.clone(),
                    error,
                })?;
            if link.peer().node_id != child.id {
                tracing::warn!(mediator = %id, expected = %child.id, actual = %link.peer().node_id, "child identifies under another id");
            }
            links.push(link);
        }
        let schemas = fetch_schemas(&spec, &links).await?;
        let integration = integrate_schemas(&id, &spec, &schemas)?;
        Ok(Mediator {
            id,
            spec,
            node,
            links,
            state: RwLock::new(Arc::new(integration)),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn spec(&self) -> &IntegrationSpec {
        &self.spec
    }

    pub fn node(&self) -> &CommNode {
        &self.node
    }

    pub fn integration(&self) -> Arc<Integration> {
        self.state.read().unwrap().clone()
    }

    pub fn gcs(&self) -> CanonicalSchema {
        self.integration().gcs.clone()
    }

    /// Pulls every child schema again and swaps in the new GCS.
    pub async fn refresh(&self) -> Result<Arc<Integration>, MediatorError> {
        let schemas = fetch_schemas(&self.spec, &self.links).await?;
        let fresh = Arc::new(integrate_schemas(&self.id, &self.spec, &schemas)?);
        *self.state.write().unwrap() = fresh.clone();
        Ok(fresh)
    }

    /// Decompose, dispatch to children in parallel, merge.
    pub async fn execute(&self, query: &CanonicalQuery) -> Result<CanonicalResult, MediatorError> {
        let integration = self.integration();
        let plan = decompose_query(query, &integration)?;
        let calls = plan.sub_queries.iter().enumerate().map(|(i, sub)| {
            let link = self.links[sub.child].clone();
            let child = integration.children[sub.child].id.clone();
            async move {
                link.execute_remote_query(&sub.query)
                    .await
                    .map(|r| (i, r))
                    .map_err(|e| MediatorError::Child {
                        child,
                        error: e.to_payload(),
                    })
            }
        });
        let partials = futures::future::try_join_all(calls)
            .await?
            .into_iter()
            .collect::<BTreeMap<_, _>>();
        merge_results(&partials, &plan, &integration, &self.id)
    }
}

async fn fetch_schemas(spec: &IntegrationSpec, links: &[Arc<Link>]) -> Result<Vec<CanonicalSchema>, MediatorError> {
    let calls = spec.children.iter().zip(links).map(|(child, link)| async move {
        link.request_schema().await.map_err(|e| MediatorError::Child {
            child: child.id.clone(),
            error: e.to_payload(),
        })
    });
    futures::future::try_join_all(calls).await
}

#[async_trait]
impl Service for Mediator {
    fn identity(&self) -> Hello {
        self.node.identity().clone()
    }

    async fn schema(&self) -> Result<CanonicalSchema, ErrorPayload> {
        match self.refresh().await {
            Ok(integration) => Ok(integration.gcs.clone()),
            Err(e) => Err(e.to_payload(&self.id)),
        }
    }

    async fn query(&self, query: CanonicalQuery) -> Result<CanonicalResult, ErrorPayload> {
        self.execute(&query).await.map_err(|e| e.to_payload(&self.id))
    }
}
