use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;
use tokio::task::JoinHandle;
use tracing::info;

use super::config::{timeout, ComponentConfig, MaskComponentConfig, MaskKindName, Topology};
use super::validate::{start_order, validate_topology, Violation};
use crate::comms::{serve_memory, serve_tcp, Endpoint, ServerHandle, Service};
use crate::mask::http::{self, HttpKind, HttpServer};
use crate::mask::tabular::{self, LineServer, TabularKind};
use crate::mask::{MaskConfig, MaskInterface, MaskKind, MaskModule};
use crate::mediator::{ChildRef, IntegrationSpec, Mediator};
use crate::wrapper::Wrapper;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaunchMode {
    /// Components talk over in-memory pipes.
    InProcess,
    /// Every component listens on `127.0.0.1`, at `base_port` plus its
    /// position in the document. Masks also expose their application there.
    Tcp { base_port: u16 },
}

#[derive(Debug, Clone, Error)]
pub enum LaunchError {
    #[error("topology is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("component `{id}` failed to start: {detail}")]
    ComponentStartFailure { id: String, detail: String },
}

impl LaunchError {
    pub fn code(&self) -> &'static str {
        match self {
            LaunchError::Invalid(_) => "invalid-topology",
            LaunchError::ComponentStartFailure { .. } => "component-start-failure",
        }
    }
}

enum Front {
    Http(HttpServer),
    Lines(LineServer),
}

impl Front {
    fn addr(&self) -> SocketAddr {
        match self {
            Front::Http(s) => s.addr,
            Front::Lines(s) => s.addr,
        }
    }
}

/// A started system. Components stop in reverse start order.
pub struct RunningSystem {
    mode: LaunchMode,
    started: Vec<String>,
    servers: BTreeMap<String, ServerHandle>,
    wrappers: BTreeMap<String, Arc<Wrapper>>,
    mediators: BTreeMap<String, Arc<Mediator>>,
    masks: BTreeMap<String, MaskInterface>,
    fronts: BTreeMap<String, Front>,
    refreshers: Vec<JoinHandle<()>>,
}

impl RunningSystem {
    fn new(mode: LaunchMode) -> Self {
        RunningSystem {
            mode,
            started: Vec::new(),
            servers: BTreeMap::new(),
            wrappers: BTreeMap::new(),
            mediators: BTreeMap::new(),
            masks: BTreeMap::new(),
            fronts: BTreeMap::new(),
            refreshers: Vec::new(),
        }
    }

    pub fn mode(&self) -> LaunchMode {
        self.mode
    }

    /// Component ids in the order they were started.
    pub fn started(&self) -> &[String] {
        &self.started
    }

    pub fn mask(&self, id: &str) -> Option<&MaskInterface> {
        self.masks.get(id)
    }

    pub fn mask_ids(&self) -> impl Iterator<Item = &str> {
        self.masks.keys().map(String::as_str)
    }

    pub fn wrapper(&self, id: &str) -> Option<&Arc<Wrapper>> {
        self.wrappers.get(id)
    }

    pub fn mediator(&self, id: &str) -> Option<&Arc<Mediator>> {
        self.mediators.get(id)
    }

    /// Where a wrapper or mediator accepts system-format connections.
    pub fn endpoint(&self, id: &str) -> Option<&Endpoint> {
        self.servers.get(id).map(ServerHandle::endpoint)
    }

    /// Address of a mask's application front (TCP mode only).
    pub fn front_addr(&self, id: &str) -> Option<SocketAddr> {
        self.fronts.get(id).map(Front::addr)
    }

    pub async fn shutdown(mut self) {
        self.stop().await;
    }

    async fn stop(&mut self) {
        for r in self.refreshers.drain(..) {
            r.abort();
        }
        for id in self.started.drain(..).rev() {
            match self.fronts.remove(&id) {
                Some(Front::Http(s)) => s.shutdown().await,
                Some(Front::Lines(s)) => s.shutdown(),
                None => {}
            }
            if let Some(s) = self.servers.remove(&id) {
                s.shutdown();
            }
            self.masks.remove(&id);
            self.mediators.remove(&id);
            self.wrappers.remove(&id);
            info!(component = %id, "stopped");
        }
    }
}

fn failure(id: &str, detail: impl ToString) -> LaunchError {
    LaunchError::ComponentStartFailure {
        id: id.to_string(),
        detail: detail.to_string(),
    }
}

/// Validates, then starts every component bottom-up. A failed start stops
/// whatever already runs.
pub async fn launch(t: &Topology, base_dir: &Path, mode: LaunchMode) -> Result<RunningSystem, LaunchError> {
    let order = checked_order(t)?;
    launch_only(t, base_dir, mode, &order).await
}

/// Starts the listed components only, in the given order. Children that
/// are not part of this launch are reached at their planned TCP port, so
/// this is how one process of a multi-process deployment starts.
pub async fn launch_subset(
    t: &Topology,
    base_dir: &Path,
    mode: LaunchMode,
    ids: &[String],
) -> Result<RunningSystem, LaunchError> {
    let order: Vec<String> = checked_order(t)?.into_iter().filter(|id| ids.contains(id)).collect();
    if let Some(missing) = ids.iter().find(|id| !order.contains(id)) {
        return Err(failure(missing, "no such component"));
    }
    launch_only(t, base_dir, mode, &order).await
}

fn checked_order(t: &Topology) -> Result<Vec<String>, LaunchError> {
    let report = validate_topology(t);
    if !report.is_empty() {
        return Err(LaunchError::Invalid(report));
    }
    Ok(start_order(t))
}

async fn launch_only(
    t: &Topology,
    base_dir: &Path,
    mode: LaunchMode,
    order: &[String],
) -> Result<RunningSystem, LaunchError> {
    let mut system = RunningSystem::new(mode);
    for id in order {
        if let Err(e) = start_one(t, base_dir, &mut system, id).await {
            system.stop().await;
            return Err(e);
        }
        system.started.push(id.clone());
        info!(component = %id, "started");
    }
    Ok(system)
}

fn downstream(t: &Topology, system: &RunningSystem, id: &str, child: &str) -> Result<Endpoint, LaunchError> {
    if let Some(e) = system.endpoint(child) {
        return Ok(e.clone());
    }
    match system.mode {
        LaunchMode::Tcp { base_port } => {
            let port = t.port_plan(base_port)[child];
            Ok(Endpoint::Tcp(format!("127.0.0.1:{port}")))
        }
        LaunchMode::InProcess => Err(failure(id, format!("child `{child}` is not running"))),
    }
}

async fn listen(
    system: &RunningSystem,
    t: &Topology,
    id: &str,
    service: Arc<dyn Service>,
) -> Result<ServerHandle, LaunchError> {
    match system.mode {
        LaunchMode::InProcess => Ok(serve_memory(service)),
        LaunchMode::Tcp { base_port } => {
            let port = t.port_plan(base_port)[id];
            serve_tcp(service, &format!("127.0.0.1:{port}"))
                .await
                .map_err(|e| failure(id, e))
        }
    }
}

pub(crate) fn mask_kind(config: &MaskComponentConfig) -> Result<Arc<dyn MaskKind>, String> {
    Ok(match config.mask_kind {
        MaskKindName::Http => Arc::new(HttpKind::new(config.mapping.clone())),
        MaskKindName::Tabular => Arc::new(TabularKind::new(config.mapping.clone(), config.tabular_format()?)),
    })
}

async fn start_one(t: &Topology, base_dir: &Path, system: &mut RunningSystem, id: &str) -> Result<(), LaunchError> {
    let component = t.component(id).expect("start order only lists declared components");
    match &component.config {
        ComponentConfig::Wrapper(config) => {
            let source_id = t
                .children_of(id)
                .map(|e| e.to.as_str())
                .find(|to| t.source(to).is_some())
                .expect("validated wrappers have a source");
            let adapter = t
                .source(source_id)
                .unwrap()
                .adapter
                .open(source_id, base_dir)
                .map_err(|e| failure(id, e))?;
            let mut wrapper = Wrapper::new(id, adapter).map_err(|e| failure(id, e))?;
            if let Some(caps) = &config.capabilities {
                wrapper = wrapper.with_capabilities(caps);
            }
            let wrapper = Arc::new(wrapper);
            let server = listen(system, t, id, wrapper.clone()).await?;
            system.servers.insert(id.to_string(), server);
            system.wrappers.insert(id.to_string(), wrapper);
        }
        ComponentConfig::Mediator(config) => {
            let mut children = Vec::new();
            let mut endpoints = BTreeMap::new();
            for e in t.children_of(id) {
                children.push(ChildRef::new(&e.to, e.alias()));
                endpoints.insert(e.to.clone(), downstream(t, system, id, &e.to)?);
            }
            let spec = IntegrationSpec {
                children,
                mapping: config.mapping.clone(),
            };
            let mediator = Mediator::connect(id, spec, &endpoints, timeout(config.timeout_ms))
                .await
                .map_err(|e| failure(id, e))?;
            let mediator = Arc::new(mediator);
            let server = listen(system, t, id, mediator.clone()).await?;
            system.servers.insert(id.to_string(), server);
            system.mediators.insert(id.to_string(), mediator);
        }
        ComponentConfig::Mask(config) => {
            let child = t.children_of(id).next().expect("validated masks have one downstream");
            let endpoint = downstream(t, system, id, &child.to)?;
            let kind = mask_kind(config).map_err(|e| failure(id, e))?;
            let mut mask_config = MaskConfig::new(id);
            mask_config.refresh_interval = config.refresh_interval();
            mask_config.stale_allowed = config.stale_allowed;
            mask_config.allow_wrapper_downstream = config.allow_wrapper_downstream;
            mask_config.timeout = timeout(config.timeout_ms);
            let module = MaskModule::start(mask_config, kind, &endpoint)
                .await
                .map_err(|e| failure(id, e))?;
            system.refreshers.push(module.spawn_refresher());
            let interface = MaskInterface::new(module);
            if let LaunchMode::Tcp { base_port } = system.mode {
                let addr = format!("127.0.0.1:{}", t.port_plan(base_port)[id]);
                let front = match config.mask_kind {
                    MaskKindName::Http => Front::Http(
                        http::serve(interface.clone(), &addr)
                            .await
                            .map_err(|e| failure(id, e))?,
                    ),
                    MaskKindName::Tabular => Front::Lines(
                        tabular::serve_lines(interface.clone(), &addr)
                            .await
                            .map_err(|e| failure(id, e))?,
                    ),
                };
                system.fronts.insert(id.to_string(), front);
            }
            system.masks.insert(id.to_string(), interface);
        }
    }
    Ok(())
}
