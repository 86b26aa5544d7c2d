//! Random 2-3 child mediations and their materialized reference contents.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use mmw_core::comms::{serve_memory, ServerHandle};
use mmw_core::mediator::{integrate_schemas, ChildRef, Integration, IntegrationSpec, Mediator};
use mmw_core::model::{
    compare, AttributeDef, AttributeType, CanonicalQuery, CompareOp, Database, MappingRule, QualifiedName, RelationDef,
    RelationSource, Row, SchemaMapping, SchemaRole, Table,
};
use mmw_core::wrapper::{MemoryStore, Wrapper, WrapperCapabilities};
use proptest::prelude::*;

use super::{caps, people_relation, query, table_of};

pub fn items_relation() -> RelationDef {
    RelationDef::new(
        "items",
        vec![
            AttributeDef::new("pid", AttributeType::Integer, false),
            AttributeDef::new("item", AttributeType::String, true),
        ],
    )
}

#[derive(Debug, Clone)]
pub struct Federation {
    pub children: Vec<(ChildRef, Database, WrapperCapabilities)>,
    pub spec: IntegrationSpec,
}

pub fn mapping(scenario: usize, aliases: &[String]) -> SchemaMapping {
    let q = |alias: &str, rel: &str| format!("{alias}_{rel}");
    let rules = match scenario {
        0 => vec![
            MappingRule::RenameRelation {
                old: q(&aliases[0], "people"),
                new: "persons".into(),
            },
            MappingRule::RenameAttribute {
                relation: "persons".into(),
                old: "name".into(),
                new: "label".into(),
            },
            MappingRule::HideAttribute {
                relation: "persons".into(),
                name: "score".into(),
            },
            MappingRule::HideRelation {
                name: q(&aliases[1], "items"),
            },
        ],
        1 => vec![
            MappingRule::UnionRelations {
                sources: aliases.iter().map(|a| q(a, "people")).collect(),
                target: "people".into(),
            },
            MappingRule::RenameAttribute {
                relation: "people".into(),
                old: "score".into(),
                new: "points".into(),
            },
        ],
        2 => vec![
            MappingRule::JoinView {
                left: QualifiedName::new(q(&aliases[0], "people"), "id"),
                right: QualifiedName::new(q(&aliases[1], "items"), "pid"),
                target: "bought".into(),
            },
            MappingRule::HideAttribute {
                relation: "bought".into(),
                name: "active".into(),
            },
        ],
        _ => vec![
            MappingRule::UnionRelations {
                // Listed against alias order on purpose.
                sources: aliases.iter().rev().map(|a| q(a, "items")).collect(),
                target: "items".into(),
            },
            MappingRule::JoinView {
                left: QualifiedName::new(q(&aliases[0], "people"), "id"),
                right: QualifiedName::new(q(&aliases[1], "people"), "id"),
                target: "pairs".into(),
            },
        ],
    };
    SchemaMapping::new(rules)
}

pub fn federation() -> impl Strategy<Value = Federation> {
    (2usize..=3, 0usize..4)
        .prop_flat_map(|(k, scenario)| {
            let child = (
                table_of(people_relation("people"), 10),
                table_of(items_relation(), 10),
                caps(),
            );
            (
                proptest::collection::vec(child, k),
                Just(vec!["c".to_string(), "a".to_string(), "b".to_string()]).prop_shuffle(),
                Just(scenario),
            )
        })
        .prop_map(|(children, aliases, scenario)| {
            let aliases: Vec<String> = aliases.into_iter().take(children.len()).collect();
            let children: Vec<_> = children
                .into_iter()
                .enumerate()
                .map(|(i, (people, items, caps))| {
                    let mut db = Database::default();
                    db.insert(people);
                    db.insert(items);
                    (ChildRef::new(format!("w{i}"), aliases[i].clone()), db, caps)
                })
                .collect();
            let spec = IntegrationSpec {
                children: children.iter().map(|c| c.0.clone()).collect(),
                mapping: mapping(scenario, &aliases),
            };
            Federation { children, spec }
        })
}

pub fn integration(t: &Federation) -> Integration {
    let schemas: Vec<_> = t
        .children
        .iter()
        .map(|(c, db, _)| db.schema(&c.id, SchemaRole::LCS, vec![format!("{}-source", c.id)]))
        .collect();
    integrate_schemas("me", &t.spec, &schemas).unwrap()
}

/// Reference contents of every GCS relation, computed by name lookups over
/// the raw child tables.
pub fn materialize(t: &Federation, i: &Integration) -> Database {
    let table_of = |qualified: &str| {
        let o = &i.origins[qualified];
        &t.children[o.child].1.tables[&o.relation]
    };
    let cell = |table: &Table, row: &Row, attribute: &str| row[table.relation.position(attribute).unwrap()].clone();
    let mut out = Database::default();
    for r in &i.gcs.relations {
        let corr = &i.correspondence.relations[&r.name];
        let rows: Vec<Row> = match &corr.source {
            RelationSource::Direct { relation } => {
                let t = table_of(relation);
                t.rows
                    .iter()
                    .map(|row| {
                        corr.attributes
                            .iter()
                            .map(|a| cell(t, row, &a.sources[0].attribute))
                            .collect()
                    })
                    .collect()
            }
            RelationSource::Union { relations } => {
                let mut order: Vec<usize> = (0..relations.len()).collect();
                order.sort_by_key(|&k| (t.children[i.origins[&relations[k]].child].0.alias.clone(), k));
                order
                    .into_iter()
                    .flat_map(|k| {
                        let tab = table_of(&relations[k]);
                        tab.rows
                            .iter()
                            .map(|row| {
                                corr.attributes
                                    .iter()
                                    .map(|a| cell(tab, row, &a.sources[k].attribute))
                                    .collect::<Row>()
                            })
                            .collect::<Vec<_>>()
                    })
                    .collect()
            }
            RelationSource::Join { left, right } => {
                let (lt, rt) = (table_of(&left.relation), table_of(&right.relation));
                let mut rows = Vec::new();
                for lr in &lt.rows {
                    for rr in &rt.rows {
                        if compare(
                            &cell(lt, lr, &left.attribute),
                            CompareOp::Eq,
                            &cell(rt, rr, &right.attribute),
                        ) {
                            rows.push(
                                corr.attributes
                                    .iter()
                                    .map(|a| {
                                        let s = &a.sources[0];
                                        if s.relation == left.relation {
                                            cell(lt, lr, &s.attribute)
                                        } else {
                                            cell(rt, rr, &s.attribute)
                                        }
                                    })
                                    .collect(),
                            );
                        }
                    }
                }
                rows
            }
        };
        out.insert(Table::new(r.clone(), rows));
    }
    out
}

pub fn case() -> impl Strategy<Value = (Federation, CanonicalQuery)> {
    federation().prop_flat_map(|t| {
        let gcs = integration(&t).gcs;
        let relations = gcs.relations.clone();
        let query = proptest::sample::select(relations).prop_flat_map(|r| query(&r));
        (Just(t), query)
    })
}

pub struct Running {
    _servers: Vec<ServerHandle>,
    pub lower: Arc<Mediator>,
    pub upper: Mediator,
}

pub async fn launch(t: &Federation) -> Running {
    let timeout = Duration::from_secs(10);
    let mut servers = Vec::new();
    let mut endpoints = BTreeMap::new();
    for (c, db, caps) in &t.children {
        let w = Wrapper::new(
            c.id.clone(),
            Box::new(MemoryStore::new(format!("{}-source", c.id), db.clone())),
        )
        .unwrap()
        .with_capabilities(caps);
        let server = serve_memory(Arc::new(w));
        endpoints.insert(c.id.clone(), server.endpoint().clone());
        servers.push(server);
    }
    let lower = Arc::new(
        Mediator::connect("me", t.spec.clone(), &endpoints, timeout)
            .await
            .unwrap(),
    );
    let server = serve_memory(lower.clone());
    let upper_endpoints = BTreeMap::from([("me".to_string(), server.endpoint().clone())]);
    servers.push(server);
    let upper_spec = IntegrationSpec {
        children: vec![ChildRef::new("me", "top")],
        mapping: SchemaMapping::default(),
    };
    let upper = Mediator::connect("top-me", upper_spec, &upper_endpoints, timeout)
        .await
        .unwrap();
    Running {
        _servers: servers,
        lower,
        upper,
    }
}

/// Direct and stacked answers equal the oracle over the materialized data.
pub fn check_federation((t, q): &(Federation, CanonicalQuery)) -> Result<(), TestCaseError> {
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .unwrap();
    let i = integration(t);
    let data = materialize(t, &i);
    let expected = data.evaluate(q).unwrap();
    rt.block_on(async {
        let running = launch(t).await;
        prop_assert_eq!(running.lower.gcs(), i.gcs.clone());

        let direct = running.lower.execute(q).await.unwrap();
        prop_assert_eq!(&direct.attributes, &expected.attributes);
        prop_assert_eq!(&direct.rows, &expected.rows);
        prop_assert_eq!(direct.origin.as_str(), "me");

        let mut stacked_query = q.clone();
        stacked_query.target = format!("top_{}", q.target);
        let stacked = running.upper.execute(&stacked_query).await.unwrap();
        prop_assert_eq!(&stacked.rows, &expected.rows);
        prop_assert_eq!(stacked.origin.as_str(), "top-me");
        Ok(())
    })?;
    Ok(())
}
