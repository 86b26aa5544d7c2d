use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex as StdMutex};
use std::time::Duration;

use thiserror::Error;
use tokio::io::AsyncWriteExt;
use tokio::sync::{mpsc, oneshot, Mutex};
use tokio::task::JoinHandle;
use tracing::debug;

use super::frame::{
    encode_message, read_frame, Body, ComponentType, CorrelationId, ErrorPayload, FrameError, Hello, Message,
};
use super::transport::Endpoint;
use crate::model::{CanonicalQuery, CanonicalResult, CanonicalSchema};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Error, Clone)]
pub enum CommError {
    #[error("node `{node}` already holds {cap} downstream link(s)")]
    DownstreamCapExceeded { node: String, cap: usize },
    #[error("handshake refused by {endpoint}: {reason}")]
    HandshakeRefused { endpoint: String, reason: String },
    #[error("transport failure: {0}")]
    TransportFailure(String),
    #[error("no response from `{peer}` within {after:?}")]
    Timeout { peer: String, after: Duration },
    #[error("peer error {0}")]
    PeerError(ErrorPayload),
    #[error("protocol violation: {0}")]
    Protocol(String),
}

impl CommError {
    pub fn code(&self) -> &str {
        match self {
            CommError::DownstreamCapExceeded { .. } => "downstream-cap-exceeded",
            CommError::HandshakeRefused { .. } => "handshake-refused",
            CommError::TransportFailure(_) => "transport-failure",
            CommError::Timeout { .. } => "timeout",
            CommError::PeerError(p) => &p.code,
            CommError::Protocol(_) => "protocol-violation",
        }
    }

    /// Renders as an error payload for forwarding upstream.
    pub fn to_payload(&self) -> ErrorPayload {
        match self {
            CommError::PeerError(p) => p.clone(),
            other => ErrorPayload::new(other.code(), other.to_string()),
        }
    }
}

impl From<FrameError> for CommError {
    fn from(e: FrameError) -> Self {
        match e {
            FrameError::Io(io) => CommError::TransportFailure(io.to_string()),
            other => CommError::Protocol(other.to_string()),
        }
    }
}

type Pending = Arc<StdMutex<HashMap<CorrelationId, oneshot::Sender<Message>>>>;

/// An established connection to one downstream peer. Requests may be issued
/// concurrently; responses are routed back by correlation id.
pub struct Link {
    peer: Hello,
    endpoint: String,
    timeout: Duration,
    outbox: mpsc::Sender<Vec<u8>>,
    pending: Pending,
    closed: Arc<AtomicBool>,
    schema_gate: Mutex<()>,
    tasks: [JoinHandle<()>; 2],
}

impl Link {
    pub async fn establish(endpoint: &Endpoint, identity: &Hello, timeout: Duration) -> Result<Link, CommError> {
        let stream = endpoint
            .open()
            .await
            .map_err(|e| CommError::TransportFailure(format!("{endpoint}: {e}")))?;
        let (mut reader, mut writer) = tokio::io::split(stream);

        let hello = Message::new(CorrelationId::random(), Body::Hello(identity.clone()));
        writer
            .write_all(&encode_message(&hello)?)
            .await
            .map_err(|e| CommError::TransportFailure(e.to_string()))?;
        let ack = tokio::time::timeout(timeout, read_frame(&mut reader))
            .await
            .map_err(|_| CommError::Timeout {
                peer: endpoint.to_string(),
                after: timeout,
            })??;
        let peer = match ack {
            Some(Message {
                correlation_id,
                body: Body::HelloAck(peer),
                ..
            }) if correlation_id == hello.correlation_id => peer,
            Some(Message {
                body: Body::Error(e), ..
            }) => {
                return Err(CommError::HandshakeRefused {
                    endpoint: endpoint.to_string(),
                    reason: e.detail,
                })
            }
            Some(other) => {
                return Err(CommError::Protocol(format!(
                    "expected HELLO_ACK, got {}",
                    other.msg_type().as_str()
                )))
            }
            None => {
                return Err(CommError::TransportFailure(format!(
                    "{endpoint} closed during handshake"
                )))
            }
        };

        let pending: Pending = Arc::default();
        let closed = Arc::new(AtomicBool::new(false));
        let (outbox, mut rx) = mpsc::channel::<Vec<u8>>(256);

        let writer_closed = closed.clone();
        let writer_task = tokio::spawn(async move {
            while let Some(frame) = rx.recv().await {
                if writer.write_all(&frame).await.is_err() {
                    break;
                }
            }
            writer_closed.store(true, Ordering::SeqCst);
            let _ = writer.shutdown().await;
        });

        let reader_pending = pending.clone();
        let reader_closed = closed.clone();
        let peer_name = peer.node_id.clone();
        let reader_task = tokio::spawn(async move {
            loop {
                match read_frame(&mut reader).await {
                    Ok(Some(msg)) => {
                        let waiter = reader_pending.lock().unwrap().remove(&msg.correlation_id);
                        match waiter {
                            Some(tx) => {
                                let _ = tx.send(msg);
                            }
                            None => debug!(peer = %peer_name, id = %msg.correlation_id, "unsolicited frame dropped"),
                        }
                    }
                    Ok(None) => break,
                    Err(e) => {
                        debug!(peer = %peer_name, error = %e, "link read failed");
                        break;
                    }
                }
            }
            reader_closed.store(true, Ordering::SeqCst);
            // Dropping the senders wakes every waiter with a transport failure.
            reader_pending.lock().unwrap().clear();
        });

        Ok(Link {
            peer,
            endpoint: endpoint.to_string(),
            timeout,
            outbox,
            pending,
            closed,
            schema_gate: Mutex::new(()),
            tasks: [writer_task, reader_task],
        })
    }

    pub fn peer(&self) -> &Hello {
        &self.peer
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::SeqCst)
    }

    async fn request(&self, body: Body) -> Result<Message, CommError> {
        if self.is_closed() {
            return Err(CommError::TransportFailure(format!(
                "link to `{}` is closed",
                self.peer.node_id
            )));
        }
        let msg = Message::new(CorrelationId::random(), body);
        let frame = encode_message(&msg)?;
        let (tx, rx) = oneshot::channel();
        self.pending.lock().unwrap().insert(msg.correlation_id, tx);
        if self.outbox.send(frame).await.is_err() {
            self.pending.lock().unwrap().remove(&msg.correlation_id);
            return Err(CommError::TransportFailure("writer stopped".into()));
        }
        match tokio::time::timeout(self.timeout, rx).await {
            Ok(Ok(reply)) => match reply.body {
                Body::Error(e) => Err(CommError::PeerError(e)),
                _ => Ok(reply),
            },
            Ok(Err(_)) => Err(CommError::TransportFailure(format!(
                "connection to `{}` closed before a response arrived",
                self.peer.node_id
            ))),
            Err(_) => {
                self.pending.lock().unwrap().remove(&msg.correlation_id);
                Err(CommError::Timeout {
                    peer: self.peer.node_id.clone(),
                    after: self.timeout,
                })
            }
        }
    }

    /// Fetches the peer's exported schema. At most one schema request is in
    /// flight per link.
    pub async fn request_schema(&self) -> Result<CanonicalSchema, CommError> {
        let _gate = self.schema_gate.lock().await;
        match self.request(Body::SchemaReq).await?.body {
            Body::SchemaRes(schema) => Ok(schema),
            other => Err(CommError::Protocol(format!(
                "expected SCHEMA_RES, got {}",
                other.msg_type().as_str()
            ))),
        }
    }

    pub async fn execute_remote_query(&self, query: &CanonicalQuery) -> Result<CanonicalResult, CommError> {
        match self.request(Body::QueryReq(query.clone())).await?.body {
            Body::QueryRes(result) => Ok(result),
            other => Err(CommError::Protocol(format!(
                "expected QUERY_RES, got {}",
                other.msg_type().as_str()
            ))),
        }
    }
}

impl Drop for Link {
    fn drop(&mut self) {
        for task in &self.tasks {
            task.abort();
        }
    }
}

/// Communication node shared by all component types. A mask uses the
/// restricted form with a downstream cap of one.
pub struct CommNode {
    identity: Hello,
    max_downstream: Option<usize>,
    timeout: Duration,
    links: Mutex<Vec<Arc<Link>>>,
}

impl CommNode {
    pub fn new(component_type: ComponentType, node_id: impl Into<String>) -> Self {
        CommNode {
            identity: Hello {
                component_type,
                node_id: node_id.into(),
            },
            max_downstream: None,
            timeout: DEFAULT_TIMEOUT,
            links: Mutex::new(Vec::new()),
        }
    }

    /// Node restricted to a single downstream link.
    pub fn for_mask(node_id: impl Into<String>) -> Self {
        CommNode::new(ComponentType::Mask, node_id).with_max_downstream(1)
    }

    pub fn with_max_downstream(mut self, cap: usize) -> Self {
        self.max_downstream = Some(cap);
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn id(&self) -> &str {
        &self.identity.node_id
    }

    pub fn identity(&self) -> &Hello {
        &self.identity
    }

    pub fn max_downstream(&self) -> Option<usize> {
        self.max_downstream
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    /// Performs the HELLO handshake with `endpoint` and registers the link.
    pub async fn connect_downstream(&self, endpoint: &Endpoint) -> Result<Arc<Link>, CommError> {
        let mut links = self.links.lock().await;
        if let Some(cap) = self.max_downstream {
            if links.len() >= cap {
                return Err(CommError::DownstreamCapExceeded {
                    node: self.identity.node_id.clone(),
                    cap,
                });
            }
        }
        let link = Arc::new(Link::establish(endpoint, &self.identity, self.timeout).await?);
        links.push(link.clone());
        Ok(link)
    }

    pub async fn disconnect(&self, link: &Arc<Link>) {
        self.links.lock().await.retain(|l| !Arc::ptr_eq(l, link));
    }

    pub async fn links(&self) -> Vec<Arc<Link>> {
        self.links.lock().await.clone()
    }

    pub async fn link_count(&self) -> usize {
        self.links.lock().await.len()
    }
}
