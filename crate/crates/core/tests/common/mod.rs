//! Generators shared by the property tests.
#![allow(dead_code)]

pub mod federation;
pub mod mask_suite;
pub mod pushdown;
pub mod sos;

use mmw_core::model::{
    AttributeDef, AttributeType, CanonicalQuery, CompareOp, Predicate, RelationDef, Row, Table, Value,
};
use mmw_core::wrapper::WrapperCapabilities;
use proptest::prelude::*;
use proptest::sample::subsequence;

pub fn people_relation(name: &str) -> RelationDef {
    RelationDef::new(
        name,
        vec![
            AttributeDef::new("id", AttributeType::Integer, false),
            AttributeDef::new("name", AttributeType::String, true),
            AttributeDef::new("score", AttributeType::Float, true),
            AttributeDef::new("active", AttributeType::Boolean, true),
        ],
    )
}

pub fn value_of(ty: &AttributeType) -> BoxedStrategy<Value> {
    match ty {
        AttributeType::Integer => (-5i64..5).prop_map(Value::Integer).boxed(),
        AttributeType::Float => (-10i32..10).prop_map(|x| Value::Float(x as f64 / 2.0)).boxed(),
        AttributeType::Boolean => any::<bool>().prop_map(Value::Boolean).boxed(),
        _ => "[abc]{1,3}".prop_map(Value::String).boxed(),
    }
}

fn cell_of(attr: &AttributeDef, allow_null: bool) -> BoxedStrategy<Value> {
    if attr.nullable && allow_null {
        prop_oneof![1 => Just(Value::Null), 4 => value_of(&attr.ty)].boxed()
    } else {
        value_of(&attr.ty)
    }
}

pub fn row_of(relation: &RelationDef, allow_null: bool) -> BoxedStrategy<Row> {
    relation
        .attributes
        .iter()
        .map(|a| cell_of(a, allow_null))
        .collect::<Vec<_>>()
        .boxed()
}

/// Up to `max` rows, sometimes none; the first row never holds nulls.
pub fn table_of(relation: RelationDef, max: usize) -> impl Strategy<Value = Table> {
    let first = row_of(&relation, false);
    let rest = proptest::collection::vec(row_of(&relation, true), 0..max);
    (proptest::option::weighted(0.95, first), rest).prop_map(move |(first, rest)| {
        let rows = match first {
            Some(first) => std::iter::once(first).chain(rest).collect(),
            None => Vec::new(),
        };
        Table::new(relation.clone(), rows)
    })
}

pub fn op() -> impl Strategy<Value = CompareOp> {
    proptest::sample::select(CompareOp::ALL.to_vec())
}

fn leaf(relation: &RelationDef) -> BoxedStrategy<Predicate> {
    let leaves: Vec<BoxedStrategy<Predicate>> = relation
        .attributes
        .iter()
        .map(|a| {
            let name = a.name.clone();
            let literal = match a.ty {
                AttributeType::String => prop_oneof!["[abc%_]{0,3}".prop_map(Value::String), value_of(&a.ty)].boxed(),
                // Integer literals against float columns exercise coercion.
                AttributeType::Float => prop_oneof![value_of(&a.ty), (-5i64..5).prop_map(Value::Integer)].boxed(),
                _ => value_of(&a.ty),
            };
            let is_string = a.ty == AttributeType::String;
            (op(), literal)
                .prop_map(move |(op, v)| {
                    let op = if op == CompareOp::Like && !is_string {
                        CompareOp::Eq
                    } else {
                        op
                    };
                    Predicate::cmp(name.clone(), op, v)
                })
                .boxed()
        })
        .collect();
    proptest::strategy::Union::new(leaves).boxed()
}

pub fn predicate(relation: &RelationDef) -> impl Strategy<Value = Predicate> {
    leaf(relation).prop_recursive(3, 12, 3, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 1..4).prop_map(Predicate::And),
            proptest::collection::vec(inner.clone(), 1..4).prop_map(Predicate::Or),
            inner.prop_map(|p| Predicate::Not(Box::new(p))),
        ]
    })
}

pub fn query(relation: &RelationDef) -> impl Strategy<Value = CanonicalQuery> {
    let names = relation.attribute_names();
    let n = names.len();
    let target = relation.name.clone();
    (
        subsequence(names, 0..=n).prop_shuffle(),
        proptest::option::of(predicate(relation)),
        proptest::option::of(0u64..8),
    )
        .prop_map(move |(projection, selection, limit)| CanonicalQuery {
            target: target.clone(),
            projection,
            selection,
            limit,
        })
}

pub fn caps() -> impl Strategy<Value = WrapperCapabilities> {
    (
        any::<bool>(),
        subsequence(CompareOp::ALL.to_vec(), 0..=CompareOp::ALL.len()),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(s, ops, p, l)| WrapperCapabilities::new(s, ops, p, l))
}

pub fn csv_text(table: &Table) -> String {
    let header: Vec<String> = table
        .relation
        .attributes
        .iter()
        .map(|a| format!("{}:{}", a.name, a.ty))
        .collect();
    let mut out = header.join(",") + "\n";
    for row in &table.rows {
        let cells: Vec<String> = row
            .iter()
            .map(|v| match v {
                Value::Null => String::new(),
                Value::Float(f) => format!("{f:?}"),
                other => other.to_string(),
            })
            .collect();
        out += &cells.join(",");
        out += "\n";
    }
    out
}

pub fn jsonl_text(table: &Table) -> String {
    let mut out = String::new();
    for row in &table.rows {
        let mut object = serde_json::Map::new();
        for (a, v) in table.relation.attributes.iter().zip(row) {
            if !v.is_null() {
                object.insert(a.name.clone(), serde_json::to_value(v).unwrap());
            }
        }
        out += &serde_json::Value::Object(object).to_string();
        out += "\n";
    }
    out
}
