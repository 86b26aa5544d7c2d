use std::path::PathBuf;
use std::time::{Duration, Instant};

use mmw_core::mask::http::masked_get;
use mmw_core::mask::tabular::masked_select;
use mmw_core::topology::{launch, load_topology, validate_topology, LaunchMode, RunningSystem};
use serde_json::{json, Value as Json};

/// The replica lives in the core crate; other crates reach it relatively.
pub fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/sos")
}

fn users() -> Vec<Json> {
    let mut reader = csv::Reader::from_path(dir().join("data/hbase/users.csv")).unwrap();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            json!({"id": r[0].parse::<i64>().unwrap(), "name": &r[1], "city": &r[2]})
        })
        .collect()
}

fn sessions() -> Vec<Json> {
    std::fs::read_to_string(dir().join("data/redis/sessions.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn posts() -> Vec<Json> {
    let seed: Json = serde_json::from_str(&std::fs::read_to_string(dir().join("data/mongo.json")).unwrap()).unwrap();
    let table = &seed["tables"][0];
    let names: Vec<&str> = table["attributes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["name"].as_str().unwrap())
        .collect();
    table["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|row| {
            let obj: serde_json::Map<String, Json> = names
                .iter()
                .zip(row.as_array().unwrap())
                .map(|(n, v)| (n.to_string(), v.clone()))
                .collect();
            Json::Object(obj)
        })
        .collect()
}

fn pick(rows: &[Json], keep: impl Fn(&Json) -> bool, fields: &[&str]) -> Json {
    Json::Array(
        rows.iter()
            .filter(|r| keep(r))
            .map(|r| Json::Object(fields.iter().map(|f| (f.to_string(), r[*f].clone())).collect()))
            .collect(),
    )
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Validates and launches the replica in-process, checks every mask against
/// the fixture files and returns the wall time taken.
pub async fn check_replica() -> Result<Duration, String> {
    let clock = Instant::now();
    let t = load_topology(&dir().join("topology.json")).map_err(|e| e.to_string())?;
    let report = validate_topology(&t);
    ensure!(report.is_empty(), "replica is invalid: {report:?}");
    let system = launch(&t, &dir(), LaunchMode::InProcess)
        .await
        .map_err(|e| e.to_string())?;
    let result = check_running(&system).await;
    system.shutdown().await;
    result?;
    let elapsed = clock.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "replica took {elapsed:?}");
    Ok(elapsed)
}

async fn check_running(system: &RunningSystem) -> Result<(), String> {
    ensure!(system.mask_ids().count() == 4, "expected four masks");
    for id in ["ma-hbase", "ma-redis", "ma-mongo", "ma-redis-sql"] {
        let schema = system
            .mask(id)
            .unwrap()
            .get_masked_schema()
            .await
            .map_err(|e| format!("{id}: {e}"))?;
        ensure!(!schema.payload.is_empty(), "{id} has an empty schema");
    }
    let schema: Json = serde_json::from_slice(
        &system
            .mask("ma-hbase")
            .unwrap()
            .get_masked_schema()
            .await
            .unwrap()
            .payload,
    )
    .unwrap();
    ensure!(schema["resources"][0]["path"] == "/users", "unexpected schema {schema}");

    let run = |id: &'static str, target: &'static str| {
        let mask = system.mask(id).unwrap().clone();
        async move {
            let doc = mask
                .run(&masked_get(target))
                .await
                .map_err(|e| format!("{id} {target}: {e}"))?;
            serde_json::from_slice::<Json>(&doc.payload).map_err(|e| e.to_string())
        }
    };
    let same = |got: Json, want: Json, what: &str| -> Result<(), String> {
        ensure!(got == want, "{what}: got {got}, want {want}");
        Ok(())
    };

    let all_users = users();
    same(
        run("ma-hbase", "/users").await?,
        pick(&all_users, |_| true, &["id", "name", "city"]),
        "users",
    )?;
    same(
        run("ma-hbase", "/users?where=city.like.%25o%25&select=name").await?,
        pick(&all_users, |r| r["city"].as_str().unwrap().contains('o'), &["name"]),
        "users by city",
    )?;

    let all_sessions = sessions();
    same(
        run("ma-redis", "/sessions?where=user_id.eq.1").await?,
        pick(&all_sessions, |r| r["user_id"] == 1, &["key", "user_id", "ttl"]),
        "sessions",
    )?;

    let all_posts = posts();
    same(
        run("ma-mongo", "/posts?where=likes.gt.1&select=title,likes").await?,
        pick(
            &all_posts,
            |r| r["likes"].as_f64().is_some_and(|l| l > 1.0),
            &["title", "likes"],
        ),
        "posts",
    )?;
    let limited = run("ma-mongo", "/posts?limit=1").await?;
    ensure!(limited.as_array().map(Vec::len) == Some(1), "limit ignored: {limited}");

    let table = system.mask("ma-redis-sql").unwrap();
    let out = table
        .run(&masked_select("select key, ttl from sessions where ttl < 100"))
        .await
        .map_err(|e| e.to_string())?;
    let expected: Vec<String> = all_sessions
        .iter()
        .filter(|r| r["ttl"].as_i64().unwrap() < 100)
        .map(|r| format!("{:<3} | {}", r["key"].as_str().unwrap(), r["ttl"]))
        .collect();
    let text = out.text();
    let body: Vec<&str> = text.lines().skip(2).take(expected.len()).map(str::trim_end).collect();
    ensure!(
        body == expected.iter().map(|s| s.trim_end()).collect::<Vec<_>>(),
        "table output {text}"
    );
    ensure!(
        text.ends_with(&format!("({} rows)\n", expected.len())),
        "row count line missing: {text}"
    );

    // The integrating mediator joins users with their posts.
    let gcs = system.mediator("me-int").unwrap().gcs();
    let view = gcs.relation("user_posts").ok_or("no user_posts view")?;
    ensure!(view.attribute("title").is_some(), "user_posts lacks title");
    Ok(())
}
