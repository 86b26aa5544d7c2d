use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use tokio::io::AsyncWriteExt;

use super::*;
use crate::model::{
    AttributeDef, AttributeType, CanonicalQuery, CanonicalResult, CanonicalSchema, RelationDef, ResultAttribute,
    SchemaRole, Value,
};

/// Answers queries with a single row holding the query's limit, after
/// sleeping for `limit` milliseconds.
struct Echo {
    id: String,
    kind: ComponentType,
}

#[async_trait]
impl Service for Echo {
    fn identity(&self) -> Hello {
        Hello {
            component_type: self.kind,
            node_id: self.id.clone(),
        }
    }

    async fn schema(&self) -> Result<CanonicalSchema, ErrorPayload> {
        Ok(CanonicalSchema {
            name: self.id.clone(),
            role: SchemaRole::LCS,
            relations: vec![RelationDef::new(
                "people",
                vec![AttributeDef::new("id", AttributeType::Integer, false)],
            )],
            provenance: vec!["src".into()],
        })
    }

    async fn query(&self, query: CanonicalQuery) -> Result<CanonicalResult, ErrorPayload> {
        if query.target != "people" {
            return Err(ErrorPayload::new("unknown-relation", query.target));
        }
        let n = query.limit.unwrap_or(0);
        tokio::time::sleep(Duration::from_millis(n)).await;
        Ok(CanonicalResult::new(
            vec![ResultAttribute::new("n", AttributeType::Integer)],
            vec![vec![Value::Integer(n as i64)]],
            self.id.clone(),
        ))
    }
}

fn echo(id: &str, kind: ComponentType) -> ServerHandle {
    serve_memory(Arc::new(Echo { id: id.into(), kind }))
}

#[tokio::test]
async fn mask_node_holds_one_link() {
    let a = echo("mediator-a", ComponentType::Mediator);
    let b = echo("mediator-b", ComponentType::Mediator);
    let mask = CommNode::for_mask("mask");
    let link = mask.connect_downstream(a.endpoint()).await.unwrap();
    assert_eq!(link.peer().node_id, "mediator-a");
    let err = mask.connect_downstream(b.endpoint()).await.err().unwrap();
    assert_eq!(err.code(), "downstream-cap-exceeded");
    assert_eq!(mask.link_count().await, 1);
}

#[tokio::test]
async fn uncapped_node_holds_many_links() {
    let servers: Vec<_> = (0..3).map(|i| echo(&format!("w{i}"), ComponentType::Wrapper)).collect();
    let node = CommNode::new(ComponentType::Mediator, "me");
    for s in &servers {
        node.connect_downstream(s.endpoint()).await.unwrap();
    }
    assert_eq!(node.link_count().await, 3);
}

#[tokio::test]
async fn concurrent_requests_are_matched_by_correlation_id() {
    let server = echo("w", ComponentType::Wrapper);
    let node = CommNode::new(ComponentType::Mediator, "me");
    let link = node.connect_downstream(server.endpoint()).await.unwrap();
    // Later requests finish first.
    let futures = (0..16u64).map(|i| {
        let link = link.clone();
        async move {
            let q = CanonicalQuery::scan("people").limit(80 - i * 5);
            (i, link.execute_remote_query(&q).await.unwrap())
        }
    });
    for (i, result) in futures::future::join_all(futures).await {
        assert_eq!(result.rows, vec![vec![Value::Integer((80 - i * 5) as i64)]]);
    }
}

#[tokio::test]
async fn schema_request_and_peer_errors() {
    let server = echo("w", ComponentType::Wrapper);
    let node = CommNode::new(ComponentType::Mediator, "me");
    let link = node.connect_downstream(server.endpoint()).await.unwrap();
    let schema = link.request_schema().await.unwrap();
    assert_eq!(schema.relations[0].name, "people");
    let err = link
        .execute_remote_query(&CanonicalQuery::scan("nope"))
        .await
        .unwrap_err();
    assert_eq!(err.code(), "unknown-relation");
}

#[tokio::test]
async fn wrappers_cannot_open_downstream_links() {
    let server = echo("me", ComponentType::Mediator);
    let node = CommNode::new(ComponentType::Wrapper, "w");
    let err = node.connect_downstream(server.endpoint()).await.err().unwrap();
    assert_eq!(err.code(), "handshake-refused");
}

#[tokio::test]
async fn slow_peer_times_out() {
    let server = echo("w", ComponentType::Wrapper);
    let node = CommNode::new(ComponentType::Mediator, "me").with_timeout(Duration::from_millis(50));
    let link = node.connect_downstream(server.endpoint()).await.unwrap();
    let err = link
        .execute_remote_query(&CanonicalQuery::scan("people").limit(500))
        .await
        .unwrap_err();
    assert_eq!(err.code(), "timeout");
}

#[tokio::test]
async fn peer_closing_mid_response_is_a_transport_failure() {
    let (endpoint, mut incoming) = MemoryEndpoint::new("flaky");
    tokio::spawn(async move {
        let stream = incoming.recv().await.unwrap();
        let (mut r, mut w) = tokio::io::split(stream);
        let hello = read_frame(&mut r).await.unwrap().unwrap();
        let ack = hello.reply(Body::HelloAck(Hello {
            component_type: ComponentType::Wrapper,
            node_id: "flaky".into(),
        }));
        w.write_all(&encode_message(&ack).unwrap()).await.unwrap();
        let req = read_frame(&mut r).await.unwrap().unwrap();
        let full = encode_message(&req.reply(Body::QueryRes(CanonicalResult::new(vec![], vec![], "flaky")))).unwrap();
        // Half a frame, then hang up.
        w.write_all(&full[..full.len() / 2]).await.unwrap();
        w.shutdown().await.unwrap();
    });
    let node = CommNode::new(ComponentType::Mediator, "me");
    let link = node.connect_downstream(&Endpoint::Memory(endpoint)).await.unwrap();
    let err = link
        .execute_remote_query(&CanonicalQuery::scan("people"))
        .await
        .unwrap_err();
    assert_eq!(err.code(), "transport-failure");
}

#[tokio::test]
async fn tcp_transport_behaves_like_memory() {
    let server = serve_tcp(
        Arc::new(Echo {
            id: "w".into(),
            kind: ComponentType::Wrapper,
        }),
        "127.0.0.1:0",
    )
    .await
    .unwrap();
    let node = CommNode::for_mask("mask");
    let link = node.connect_downstream(server.endpoint()).await.unwrap();
    let r = link
        .execute_remote_query(&CanonicalQuery::scan("people").limit(3))
        .await
        .unwrap();
    assert_eq!(r.rows, vec![vec![Value::Integer(3)]]);
    server.shutdown();
}

#[tokio::test]
async fn unreachable_endpoint_is_a_transport_failure() {
    let node = CommNode::new(ComponentType::Mediator, "me");
    let err = node
        .connect_downstream(&Endpoint::Tcp("127.0.0.1:1".into()))
        .await
        .err()
        .unwrap();
    assert_eq!(err.code(), "transport-failure");
}
