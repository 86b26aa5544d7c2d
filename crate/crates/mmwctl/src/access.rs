use std::io::Write;

use mmw_core::mask::tabular::{request_line, SCHEMA_LINE};
use mmw_core::mask::{MaskError, Stage};
use mmw_core::topology::{launch, ComponentConfig, LaunchMode, MaskKindName, Topology};

use crate::{base_dir, base_port, load, Failure, Outcome, Target};

enum Ask<'a> {
    Schema,
    Query(&'a str),
}

fn mask_error(e: MaskError) -> Failure {
    let text = format!("{} ({}): {}", e.code, e.stage, e.detail);
    if e.stage == Stage::Query {
        Failure::Rejected(text)
    } else {
        Failure::Runtime(text)
    }
}

fn emit(body: &[u8]) -> Outcome {
    let mut out = std::io::stdout().lock();
    out.write_all(body)
        .and_then(|_| {
            if body.ends_with(b"\n") {
                Ok(())
            } else {
                out.write_all(b"\n")
            }
        })
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn mask_kind(t: &Topology, id: &str) -> Result<MaskKindName, Failure> {
    match t.component(id).map(|c| &c.config) {
        Some(ComponentConfig::Mask(m)) => Ok(m.mask_kind),
        Some(_) => Err(Failure::Rejected(format!("`{id}` is not a mask"))),
        None => Err(Failure::Rejected(format!("no component `{id}`"))),
    }
}

async fn in_process(t: &Topology, target: &Target, id: &str, ask: Ask<'_>) -> Outcome {
    let system = launch(t, &base_dir(&target.topology), LaunchMode::InProcess)
        .await
        .map_err(|e| Failure::Runtime(format!("{}: {e}", e.code())))?;
    let mask = system.mask(id).expect("launched masks are registered").clone();
    let answer = match ask {
        Ask::Schema => mask.get_masked_schema().await,
        Ask::Query(q) => mask.run(&mask.masked_query(q)).await,
    };
    system.shutdown().await;
    emit(&answer.map_err(mask_error)?.payload)
}

async fn over_http(addr: &str, ask: Ask<'_>) -> Outcome {
    let path = match ask {
        Ask::Schema => "/schema".to_string(),
        Ask::Query(q) => {
            let q = q.trim();
            q.strip_prefix("GET ").map(str::trim_start).unwrap_or(q).to_string()
        }
    };
    let response = reqwest::get(format!("http://{addr}{path}"))
        .await
        .map_err(|e| Failure::Runtime(format!("cannot reach mask at {addr}: {e}")))?;
    let status = response.status();
    let body = response.bytes().await.map_err(|e| Failure::Runtime(e.to_string()))?;
    if status.is_success() {
        return emit(&body);
    }
    let text = String::from_utf8_lossy(&body).trim().to_string();
    match serde_json::from_slice::<MaskError>(&body) {
        Ok(e) => Err(mask_error(e)),
        Err(_) => Err(Failure::Runtime(format!("HTTP {status}: {text}"))),
    }
}

async fn over_lines(addr: &str, ask: Ask<'_>) -> Outcome {
    let line = match ask {
        Ask::Schema => SCHEMA_LINE,
        Ask::Query(q) => q,
    };
    let reply = request_line(addr, line)
        .await
        .map_err(|e| Failure::Runtime(format!("cannot reach mask at {addr}: {e}")))?;
    match reply.strip_prefix("error: ") {
        None => emit(reply.as_bytes()),
        Some(rest) if rest.contains("(query)") => Err(Failure::Rejected(rest.trim_end().to_string())),
        Some(rest) => Err(Failure::Runtime(rest.trim_end().to_string())),
    }
}

async fn ask(id: &str, target: &Target, ask: Ask<'_>) -> Outcome {
    let t = load(&target.topology)?;
    let kind = mask_kind(&t, id)?;
    if !target.connect {
        return in_process(&t, target, id, ask).await;
    }
    let port = t.port_plan(base_port(&t, target.base_port))[id];
    let addr = format!("127.0.0.1:{port}");
    match kind {
        MaskKindName::Http => over_http(&addr, ask).await,
        MaskKindName::Tabular => over_lines(&addr, ask).await,
    }
}

pub async fn schema(id: &str, target: &Target) -> Outcome {
    ask(id, target, Ask::Schema).await
}

pub async fn query(id: &str, query: &str, target: &Target) -> Outcome {
    ask(id, target, Ask::Query(query)).await
}
