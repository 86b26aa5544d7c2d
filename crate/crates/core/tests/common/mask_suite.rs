use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Duration;

use mmw_core::comms::{serve_memory, ServerHandle};
use mmw_core::mask::http::{masked_get, HttpKind};
use mmw_core::mask::tabular::{masked_select, TabularFormat, TabularKind};
use mmw_core::mask::{translate_query, MaskConfig, MaskInterface, MaskModule};
use mmw_core::mediator::{ChildRef, IntegrationSpec, Mediator};
use mmw_core::model::{
    AttributeDef, AttributeType, CanonicalSchema, Database, MappingRule, RelationDef, Row, SchemaMapping, Table, Value,
};
use mmw_core::wrapper::{MemoryStore, Wrapper};

fn staff(rows: Vec<Row>) -> Table {
    Table::new(
        RelationDef::new(
            "staff",
            vec![
                AttributeDef::new("emp_id", AttributeType::Integer, false),
                AttributeDef::new("emp_name", AttributeType::String, false),
                AttributeDef::new("dept", AttributeType::String, true),
                AttributeDef::new("salary", AttributeType::Float, true),
                AttributeDef::new("active", AttributeType::Boolean, false),
            ],
        ),
        rows,
    )
}

fn row(id: i64, name: &str, dept: Option<&str>, salary: Option<f64>, active: bool) -> Row {
    vec![
        id.into(),
        name.into(),
        dept.map_or(Value::Null, Value::from),
        salary.map_or(Value::Null, Value::from),
        active.into(),
    ]
}

fn children() -> (Database, Database) {
    let mut a = Database::default();
    a.insert(staff(vec![
        row(1, "ann", Some("ops"), Some(41.5), true),
        row(2, "bob", None, Some(30.0), false),
        row(3, "cyd", Some("dev"), None, true),
    ]));
    let mut b = Database::default();
    b.insert(staff(vec![
        row(4, "dee", Some("dev"), Some(52.25), true),
        row(5, "eve", Some("ops"), Some(30.0), true),
    ]));
    b.insert(Table::new(
        RelationDef::new(
            "sites",
            vec![
                AttributeDef::new("site_id", AttributeType::Integer, false),
                AttributeDef::new("city", AttributeType::String, false),
            ],
        ),
        vec![vec![1.into(), "oslo".into()], vec![2.into(), "rome".into()]],
    ));
    (a, b)
}

fn mediator_spec() -> IntegrationSpec {
    IntegrationSpec {
        children: vec![ChildRef::new("w1", "a"), ChildRef::new("w2", "b")],
        mapping: SchemaMapping::new(vec![MappingRule::UnionRelations {
            sources: vec!["a_staff".into(), "b_staff".into()],
            target: "staff_all".into(),
        }]),
    }
}

fn rename(relation: &str, old: &str, new: &str) -> MappingRule {
    MappingRule::RenameAttribute {
        relation: relation.into(),
        old: old.into(),
        new: new.into(),
    }
}

fn mask_mapping() -> SchemaMapping {
    SchemaMapping::new(vec![
        MappingRule::RenameRelation {
            old: "staff_all".into(),
            new: "workers".into(),
        },
        rename("workers", "emp_id", "id"),
        rename("workers", "emp_name", "full_name"),
        rename("workers", "salary", "pay"),
        MappingRule::RenameRelation {
            old: "b_sites".into(),
            new: "locations".into(),
        },
        rename("locations", "site_id", "code"),
        MappingRule::HideAttribute {
            relation: "workers".into(),
            name: "active".into(),
        },
    ])
}

/// Identifiers that exist only on the system side of the mask.
const INTERNAL: &[&str] = &[
    "staff_all",
    "a_staff",
    "b_staff",
    "staff",
    "emp_id",
    "emp_name",
    "salary",
    "b_sites",
    "sites",
    "site_id",
    "active",
];

const QUERIES: [(&str, &str); 20] = [
    ("/workers", "select * from workers"),
    ("/workers?select=full_name", "select full_name from workers"),
    ("/workers?select=pay,id", "select pay, id from workers"),
    ("/workers?where=id.gte.3", "select * from workers where id >= 3"),
    (
        "/workers?where=id.lt.3&select=full_name",
        "select full_name from workers where id < 3",
    ),
    ("/workers?where=dept.eq.ops", "select * from workers where dept = 'ops'"),
    (
        "/workers?where=dept.neq.ops",
        "select * from workers where dept != 'ops'",
    ),
    ("/workers?where=pay.gt.30", "select * from workers where pay > 30"),
    ("/workers?where=pay.lte.30.0", "select * from workers where pay <= 30.0"),
    (
        "/workers?where=full_name.like.%25e%25",
        "select * from workers where full_name like '%e%'",
    ),
    (
        "/workers?where=full_name.like.a__",
        "select * from workers where full_name like 'a__'",
    ),
    ("/workers?limit=2", "select * from workers limit 2"),
    ("/workers?limit=0", "select * from workers limit 0"),
    (
        "/workers?where=dept.eq.dev&where=pay.gte.50",
        "select * from workers where dept = 'dev' and pay >= 50",
    ),
    (
        "/workers?where=dept.eq.dev&limit=1",
        "select * from workers where dept = 'dev' limit 1",
    ),
    (
        "/workers?select=dept&where=pay.neq.30",
        "select dept from workers where pay <> 30",
    ),
    ("/locations", "select * from locations"),
    (
        "/locations?select=city&where=code.eq.2",
        "select city from locations where code = 2",
    ),
    (
        "/locations?where=city.like.r%25",
        "select * from locations where city like 'r%'",
    ),
    ("/workers?where=id.eq.99", "select * from workers where id = 99"),
];

struct Fixture {
    _servers: Vec<ServerHandle>,
    http: MaskInterface,
    tabular: MaskInterface,
    integrated: Database,
    masked: CanonicalSchema,
}

async fn fixture() -> Fixture {
    let (a, b) = children();
    let mut servers = Vec::new();
    let mut endpoints = BTreeMap::new();
    for (id, db) in [("w1", a.clone()), ("w2", b.clone())] {
        let w = Wrapper::new(id, Box::new(MemoryStore::new(format!("{id}-source"), db))).unwrap();
        let s = serve_memory(Arc::new(w));
        endpoints.insert(id.to_string(), s.endpoint().clone());
        servers.push(s);
    }
    let me = Mediator::connect("me", mediator_spec(), &endpoints, Duration::from_secs(5))
        .await
        .unwrap();
    let gcs = me.gcs();
    let me = serve_memory(Arc::new(me));

    let http = MaskModule::start(
        MaskConfig::new("ma-http"),
        Arc::new(HttpKind::new(mask_mapping())),
        me.endpoint(),
    )
    .await
    .unwrap();
    let tabular = MaskModule::start(
        MaskConfig::new("ma-tab"),
        Arc::new(TabularKind::new(mask_mapping(), TabularFormat::Csv)),
        me.endpoint(),
    )
    .await
    .unwrap();
    let masked = http.snapshot().unwrap().view.masked.clone();
    servers.push(me);

    // Union order follows aliases: a before b.
    let mut integrated = Database::default();
    let mut all = a.tables["staff"].rows.clone();
    all.extend(b.tables["staff"].rows.clone());
    integrated.insert(Table::new(gcs.relation("staff_all").unwrap().clone(), all));
    integrated.insert(Table::new(
        gcs.relation("b_sites").unwrap().clone(),
        b.tables["sites"].rows.clone(),
    ));

    Fixture {
        _servers: servers,
        http: MaskInterface::new(http),
        tabular: MaskInterface::new(tabular),
        integrated,
        masked,
    }
}

fn typed(text: &str, ty: &AttributeType) -> Value {
    if text.is_empty() {
        return Value::Null;
    }
    match ty {
        AttributeType::Integer => Value::Integer(text.parse().unwrap()),
        AttributeType::Float => Value::Float(text.parse().unwrap()),
        AttributeType::Boolean => Value::Boolean(text.parse().unwrap()),
        _ => Value::String(text.to_string()),
    }
}

fn decode_json(payload: &[u8], relation: &RelationDef) -> (Vec<String>, Vec<Row>) {
    let rows: Vec<serde_json::Map<String, serde_json::Value>> = serde_json::from_slice(payload).unwrap();
    let header: Vec<String> = rows.first().map(|r| r.keys().cloned().collect()).unwrap_or_default();
    let decoded = rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|(k, v)| {
                    let ty = &relation.attribute(k).unwrap().ty;
                    match v {
                        serde_json::Value::Null => Value::Null,
                        serde_json::Value::String(s) => Value::String(s.clone()),
                        other => typed(&other.to_string(), ty),
                    }
                })
                .collect()
        })
        .collect();
    (header, decoded)
}

fn decode_csv(payload: &[u8], relation: &RelationDef) -> (Vec<String>, Vec<Row>) {
    let mut reader = csv::Reader::from_reader(payload);
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| {
            r.unwrap()
                .iter()
                .zip(&header)
                .map(|(cell, name)| typed(cell, &relation.attribute(name).unwrap().ty))
                .collect()
        })
        .collect();
    (header, rows)
}

fn identifiers(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

/// What the suite covered when it succeeds.
#[derive(Debug, Clone, Copy)]
pub struct SuiteReport {
    pub queries: usize,
    pub errors: usize,
    pub scanned: usize,
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Both kinds answer every paired query with the oracle's rows, reject the
/// same bad queries at the query stage and never emit a system-side name.
pub async fn run_suite() -> Result<SuiteReport, String> {
    let f = fixture().await;
    let mut emitted = vec![
        f.http.get_masked_schema().await.unwrap().text(),
        f.tabular.get_masked_schema().await.unwrap().text(),
    ];
    let view = mmw_core::mask::mask_view(
        &f.integrated
            .schema("me", mmw_core::model::SchemaRole::GCS, vec!["w1".into(), "w2".into()]),
        &mask_mapping(),
    )
    .unwrap();
    let http_kind = HttpKind::new(mask_mapping());

    for (http_q, table_q) in QUERIES {
        let target = http_q[1..].split('?').next().unwrap();
        let relation = f.masked.relation(target).unwrap();
        let json = f
            .http
            .run(&masked_get(http_q))
            .await
            .map_err(|e| format!("{http_q}: {e}"))?;
        let csv = f
            .tabular
            .run(&masked_select(table_q))
            .await
            .map_err(|e| format!("{table_q}: {e}"))?;
        let (_, json_rows) = decode_json(&json.payload, relation);
        let (csv_header, csv_rows) = decode_csv(&csv.payload, relation);
        ensure!(json_rows == csv_rows, "{http_q} and {table_q} disagree");

        let system = translate_query(&http_kind, &masked_get(http_q), &view).unwrap();
        let expected = f.integrated.evaluate(&system).unwrap();
        ensure!(json_rows == expected.rows, "{http_q} differs from the reference");
        ensure!(
            csv_header.len() == expected.attributes.len(),
            "{table_q}: wrong column count"
        );

        emitted.push(json.text());
        emitted.push(csv.text());
    }

    let mut errors = 0;
    for (http_q, table_q) in [
        ("/workers?where=id.like.3", "select * from workers where id like 3"),
        ("/workers?where=pay.like.x", "select * from workers where pay like 'x'"),
        ("/workers?where=bogus.eq.1", "select bogus from workers"),
        ("/nowhere", "select * from nowhere"),
    ] {
        let (Err(json), Err(table)) = (
            f.http.run(&masked_get(http_q)).await,
            f.tabular.run(&masked_select(table_q)).await,
        ) else {
            return Err(format!("{http_q} / {table_q} should both be rejected"));
        };
        ensure!(
            json.stage == mmw_core::mask::Stage::Query,
            "{http_q} failed at {}",
            json.stage
        );
        ensure!(
            table.stage == mmw_core::mask::Stage::Query,
            "{table_q} failed at {}",
            table.stage
        );
        errors += 1;
        emitted.push(serde_json::to_string(&json).unwrap());
        emitted.push(serde_json::to_string(&table).unwrap());
    }

    let streamed: Vec<u8> = {
        use futures::StreamExt;
        f.http
            .run_streaming(&masked_get("/workers"))
            .await
            .unwrap()
            .concat()
            .await
    };
    emitted.push(String::from_utf8(streamed).unwrap());

    for text in &emitted {
        let leaked: Vec<_> = identifiers(text)
            .into_iter()
            .filter(|t| INTERNAL.contains(&t.as_str()))
            .collect();
        ensure!(leaked.is_empty(), "internal names {leaked:?} in {text}");
    }
    Ok(SuiteReport {
        queries: QUERIES.len(),
        errors,
        scanned: emitted.len(),
    })
}
