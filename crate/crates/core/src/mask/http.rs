//! HTTP/JSON mask kind: resources addressed by URL path, filters as query
//! parameters, results as JSON arrays of objects.
//!
//! `GET /{resource}?select=f1,f2&where=field.op.literal&where=...&limit=n`
//! with every `where` conjoined. OR and NOT cannot be expressed.

use std::convert::Infallible;
use std::net::SocketAddr;

use axum::body::Body;
use axum::extract::{OriginalUri, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures::StreamExt;
use serde_json::{json, Map, Value as Json};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use super::{
    MaskError, MaskInterface, MaskKind, MaskedDocument, MaskedQuery, MaskedResult, MaskedSchema, QueryTranslator,
    ResultTranslator, SchemaTranslator, Stage,
};
use crate::model::SchemaMapping;
use crate::model::{AttributeType, CanonicalQuery, CanonicalResult, CanonicalSchema, CompareOp, Predicate, Value};

pub const KIND: &str = "http-json";
const JSON: &str = "application/json";

#[derive(Debug, Clone, Default)]
pub struct HttpKind {
    mapping: SchemaMapping,
}

impl HttpKind {
    pub fn new(mapping: SchemaMapping) -> Self {
        HttpKind { mapping }
    }
}

pub fn masked_get(target: &str) -> MaskedQuery {
    MaskedDocument::new(KIND, "text/plain", target)
}

impl MaskKind for HttpKind {
    fn kind(&self) -> &'static str {
        KIND
    }

    fn mapping(&self) -> &SchemaMapping {
        &self.mapping
    }
}

impl SchemaTranslator for HttpKind {
    fn translate_schema(&self, masked: &CanonicalSchema) -> Result<MaskedSchema, MaskError> {
        let resources: Vec<Json> = masked
            .relations
            .iter()
            .map(|r| {
                json!({
                    "path": format!("/{}", r.name),
                    "fields": r.attributes.iter().map(|a| json!({
                        "name": a.name,
                        "type": a.ty.as_str(),
                        "nullable": a.nullable,
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        let doc = json!({ "kind": KIND, "resources": resources });
        let mut text = serde_json::to_string_pretty(&doc).expect("json values always serialize");
        text.push('\n');
        Ok(MaskedDocument::new(KIND, JSON, text))
    }
}

fn malformed(detail: impl Into<String>) -> MaskError {
    MaskError::query("malformed-masked-query", detail)
}

fn typed_literal(text: &str, ty: &AttributeType, field: &str) -> Result<Value, MaskError> {
    let bad = || malformed(format!("`{text}` is not a valid {ty} for `{field}`"));
    Ok(match ty {
        AttributeType::String => Value::String(text.to_string()),
        AttributeType::Integer => Value::Integer(text.parse().map_err(|_| bad())?),
        AttributeType::Float => Value::Float(text.parse().map_err(|_| bad())?),
        AttributeType::Boolean => match text {
            "true" => Value::Boolean(true),
            "false" => Value::Boolean(false),
            _ => return Err(bad()),
        },
        AttributeType::Unknown(_) => return Err(bad()),
    })
}

impl QueryTranslator for HttpKind {
    fn translate_query(&self, query: &MaskedQuery, masked: &CanonicalSchema) -> Result<CanonicalQuery, MaskError> {
        let text = std::str::from_utf8(&query.payload).map_err(|_| malformed("query is not UTF-8"))?;
        let text = text.trim();
        let text = text.strip_prefix("GET ").map(str::trim_start).unwrap_or(text);
        let (path, params) = text.split_once('?').unwrap_or((text, ""));
        let resource = path
            .strip_prefix('/')
            .ok_or_else(|| malformed(format!("`{path}` is not an absolute path")))?;
        if resource.is_empty() || resource.contains('/') {
            return Err(MaskError::query(
                "unknown-masked-resource",
                format!("`{path}` does not name a resource"),
            ));
        }
        let relation = masked
            .relation(resource)
            .ok_or_else(|| MaskError::query("unknown-masked-resource", format!("no resource `/{resource}`")))?;
        let field = |name: &str| {
            relation
                .attribute(name)
                .ok_or_else(|| MaskError::query("unknown-masked-field", format!("`/{resource}` has no field `{name}`")))
        };

        let mut out = CanonicalQuery::scan(resource);
        let mut seen_select = false;
        let mut conjuncts = Vec::new();
        for (key, value) in form_urlencoded::parse(params.as_bytes()) {
            match key.as_ref() {
                "select" => {
                    if seen_select {
                        return Err(malformed("`select` given twice"));
                    }
                    seen_select = true;
                    for name in value.split(',') {
                        if name.is_empty() {
                            return Err(malformed("empty name in `select`"));
                        }
                        field(name)?;
                        out.projection.push(name.to_string());
                    }
                }
                "where" => {
                    let mut parts = value.splitn(3, '.');
                    let (Some(name), Some(op), Some(literal)) = (parts.next(), parts.next(), parts.next()) else {
                        return Err(malformed(format!("`where={value}` is not field.op.literal")));
                    };
                    let op =
                        CompareOp::from_token(op).ok_or_else(|| malformed(format!("unsupported operator `{op}`")))?;
                    let attr = field(name)?;
                    conjuncts.push(Predicate::cmp(name, op, typed_literal(literal, &attr.ty, name)?));
                }
                "limit" => {
                    if out.limit.is_some() {
                        return Err(malformed("`limit` given twice"));
                    }
                    out.limit = Some(value.parse().map_err(|_| malformed(format!("bad limit `{value}`")))?);
                }
                other => return Err(malformed(format!("unknown parameter `{other}`"))),
            }
        }
        out.selection = Predicate::conjoin(conjuncts);
        Ok(out)
    }
}

fn row_object(result: &CanonicalResult, row: &[Value]) -> Json {
    let mut object = Map::new();
    for (a, v) in result.attributes.iter().zip(row) {
        object.insert(
            a.name.clone(),
            serde_json::to_value(v).expect("values always serialize"),
        );
    }
    Json::Object(object)
}

impl ResultTranslator for HttpKind {
    fn translate_result(&self, result: &CanonicalResult) -> Result<MaskedResult, MaskError> {
        Ok(MaskedDocument::new(
            KIND,
            JSON,
            self.translate_result_chunks(result)?.concat(),
        ))
    }

    fn translate_result_chunks(&self, result: &CanonicalResult) -> Result<Vec<Vec<u8>>, MaskError> {
        let mut chunks = vec![b"[".to_vec()];
        for (i, row) in result.rows.iter().enumerate() {
            let mut chunk = if i == 0 { Vec::new() } else { b",".to_vec() };
            chunk.extend(row_object(result, row).to_string().into_bytes());
            chunks.push(chunk);
        }
        chunks.push(b"]".to_vec());
        Ok(chunks)
    }
}

pub fn status_for(e: &MaskError) -> StatusCode {
    if e.is_not_ready() {
        StatusCode::SERVICE_UNAVAILABLE
    } else if e.stage == Stage::Query {
        StatusCode::BAD_REQUEST
    } else {
        StatusCode::BAD_GATEWAY
    }
}

fn error_response(e: MaskError) -> Response {
    let body = json!({"error": e.code, "stage": e.stage, "detail": e.detail});
    (status_for(&e), [(header::CONTENT_TYPE, JSON)], body.to_string()).into_response()
}

async fn get_schema(State(mask): State<MaskInterface>) -> Response {
    match mask.get_masked_schema().await {
        Ok(doc) => (StatusCode::OK, [(header::CONTENT_TYPE, JSON)], doc.payload).into_response(),
        Err(e) => error_response(e),
    }
}

async fn get_resource(State(mask): State<MaskInterface>, OriginalUri(uri): OriginalUri) -> Response {
    let target = uri.path_and_query().map_or(uri.path(), |pq| pq.as_str());
    match mask.run_streaming(&masked_get(target)).await {
        Ok(chunks) => {
            let body = Body::from_stream(chunks.map(Ok::<_, Infallible>));
            (StatusCode::OK, [(header::CONTENT_TYPE, JSON)], body).into_response()
        }
        Err(e) => error_response(e),
    }
}

/// The HTTP mask application.
pub fn router(mask: MaskInterface) -> Router {
    Router::new()
        .route("/schema", get(get_schema))
        .route("/{resource}", get(get_resource))
        .with_state(mask)
}

pub struct HttpServer {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<()>,
}

impl HttpServer {
    pub async fn shutdown(mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        let _ = (&mut self.task).await;
    }
}

impl Drop for HttpServer {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
    }
}

pub async fn serve(mask: MaskInterface, addr: &str) -> std::io::Result<HttpServer> {
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let (stop, stopped) = oneshot::channel::<()>();
    let app = router(mask);
    let task = tokio::spawn(async move {
        let _ = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await;
    });
    Ok(HttpServer {
        addr,
        stop: Some(stop),
        task,
    })
}
