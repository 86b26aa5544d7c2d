use std::io;
use std::sync::Arc;

use async_trait::async_trait;
use tokio::io::AsyncWriteExt;
use tokio::net::TcpListener;
use tokio::sync::mpsc;
use tokio::task::{JoinHandle, JoinSet};
use tracing::{debug, warn};

use super::frame::{encode_message, read_frame, Body, ComponentType, ErrorPayload, Hello, Message};
use super::transport::{BoxedStream, Endpoint, MemoryEndpoint};
use crate::model::{CanonicalQuery, CanonicalResult, CanonicalSchema};

/// What a served component answers: its exported schema and queries over it.
/// This is the whole child interface a mediator sees, whatever is behind it.
#[async_trait]
pub trait Service: Send + Sync + 'static {
    fn identity(&self) -> Hello;
    async fn schema(&self) -> Result<CanonicalSchema, ErrorPayload>;
    async fn query(&self, query: CanonicalQuery) -> Result<CanonicalResult, ErrorPayload>;
}

/// A running accept loop. Dropping or shutting it down stops accepting and
/// tears down open connections.
pub struct ServerHandle {
    endpoint: Endpoint,
    task: JoinHandle<()>,
}

impl ServerHandle {
    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    pub fn shutdown(&self) {
        self.task.abort();
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.task.abort();
    }
}

pub fn serve_memory(service: Arc<dyn Service>) -> ServerHandle {
    let name = service.identity().node_id;
    let (endpoint, mut incoming) = MemoryEndpoint::new(name);
    let task = tokio::spawn(async move {
        let mut connections = JoinSet::new();
        while let Some(stream) = incoming.recv().await {
            connections.spawn(handle_connection(Box::new(stream), service.clone()));
        }
    });
    ServerHandle {
        endpoint: Endpoint::Memory(endpoint),
        task,
    }
}

pub async fn serve_tcp(service: Arc<dyn Service>, addr: &str) -> io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let task = tokio::spawn(async move {
        let mut connections = JoinSet::new();
        loop {
            match listener.accept().await {
                Ok((stream, _)) => {
                    let _ = stream.set_nodelay(true);
                    connections.spawn(handle_connection(Box::new(stream), service.clone()));
                }
                Err(e) => {
                    warn!(error = %e, "accept failed");
                }
            }
        }
    });
    Ok(ServerHandle {
        endpoint: Endpoint::Tcp(local.to_string()),
        task,
    })
}

/// Which peers may open a downstream link to a component.
fn accepts(peer: ComponentType) -> Result<(), String> {
    match peer {
        ComponentType::Mask | ComponentType::Mediator => Ok(()),
        ComponentType::Wrapper => Err("wrappers do not hold downstream links".into()),
    }
}

async fn handle_connection(stream: BoxedStream, service: Arc<dyn Service>) {
    let identity = service.identity();
    let (mut reader, mut writer) = tokio::io::split(stream);

    let hello = match read_frame(&mut reader).await {
        Ok(Some(m)) => m,
        Ok(None) => return,
        Err(e) => {
            debug!(node = %identity.node_id, error = %e, "bad handshake frame");
            return;
        }
    };
    let reply = match &hello.body {
        Body::Hello(peer) => match accepts(peer.component_type) {
            Ok(()) => hello.reply(Body::HelloAck(identity.clone())),
            Err(reason) => hello.reply(Body::Error(ErrorPayload::new("handshake-refused", reason))),
        },
        other => hello.reply(Body::Error(ErrorPayload::new(
            "handshake-refused",
            format!("expected HELLO, got {}", other.msg_type().as_str()),
        ))),
    };
    let refused = matches!(reply.body, Body::Error(_));
    if let Ok(frame) = encode_message(&reply) {
        if writer.write_all(&frame).await.is_err() {
            return;
        }
    }
    if refused {
        let _ = writer.shutdown().await;
        return;
    }

    let (tx, mut rx) = mpsc::channel::<Message>(256);
    let writer_task = tokio::spawn(async move {
        while let Some(msg) = rx.recv().await {
            let frame = match encode_message(&msg) {
                Ok(f) => f,
                Err(e) => match encode_message(&msg.reply(Body::Error(ErrorPayload::new(e.code(), e.to_string())))) {
                    Ok(f) => f,
                    Err(_) => continue,
                },
            };
            if writer.write_all(&frame).await.is_err() {
                break;
            }
        }
    });

    let mut handlers = JoinSet::new();
    loop {
        let msg = match read_frame(&mut reader).await {
            Ok(Some(m)) => m,
            Ok(None) => break,
            Err(e) => {
                debug!(node = %identity.node_id, error = %e, "closing connection after bad frame");
                break;
            }
        };
        let service = service.clone();
        let tx = tx.clone();
        handlers.spawn(async move {
            let body = match &msg.body {
                Body::SchemaReq => match service.schema().await {
                    Ok(s) => Body::SchemaRes(s),
                    Err(e) => Body::Error(e),
                },
                Body::QueryReq(q) => match service.query(q.clone()).await {
                    Ok(r) => Body::QueryRes(r),
                    Err(e) => Body::Error(e),
                },
                other => Body::Error(ErrorPayload::new(
                    "unexpected-message",
                    format!("{} is not a request", other.msg_type().as_str()),
                )),
            };
            let _ = tx.send(msg.reply(body)).await;
        });
    }
    // The peer stopped sending; finish what is in flight, then close.
    while handlers.join_next().await.is_some() {}
    drop(tx);
    let _ = writer_task.await;
}
