//! Reference query evaluator.
//!
//! A direct interpretation of the query semantics over materialized rows.
//! Every pushdown, decomposition and translation path is checked against it.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::like::like_match;
use super::query::{typecheck_against, CanonicalQuery, CompareOp, Predicate, TypeError, TypedQuery};
use super::result::CanonicalResult;
use super::schema::{CanonicalSchema, RelationDef, SchemaRole};
use super::value::{Row, Value};

pub const ORACLE_ORIGIN: &str = "oracle";

/// Contents of one relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub relation: RelationDef,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(relation: RelationDef, rows: Vec<Row>) -> Self {
        Table { relation, rows }
    }

    /// Treats a result as a relation named `name`.
    pub fn from_result(name: &str, result: &CanonicalResult) -> Self {
        Table {
            relation: result.as_relation(name),
            rows: result.rows.clone(),
        }
    }
}

/// Named collection of tables, e.g. the full contents of a source.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Database {
    pub tables: BTreeMap<String, Table>,
}

impl Database {
    pub fn insert(&mut self, table: Table) {
        self.tables.insert(table.relation.name.clone(), table);
    }

    pub fn schema(&self, name: &str, role: SchemaRole, provenance: Vec<String>) -> CanonicalSchema {
        CanonicalSchema {
            name: name.to_string(),
            role,
            relations: self.tables.values().map(|t| t.relation.clone()).collect(),
            provenance,
        }
    }

    pub fn evaluate(&self, query: &CanonicalQuery) -> Result<CanonicalResult, Vec<TypeError>> {
        let Some(table) = self.tables.get(&query.target) else {
            return Err(vec![TypeError {
                kind: super::query::TypeErrorKind::UnknownRelation,
                detail: format!("relation `{}` does not exist", query.target),
            }]);
        };
        evaluate_query_oracle(query, table)
    }
}

/// Evaluates `query` over `table`: filter, project, then truncate, keeping
/// input row order.
pub fn evaluate_query_oracle(query: &CanonicalQuery, table: &Table) -> Result<CanonicalResult, Vec<TypeError>> {
    let typed = typecheck_against(query, &table.relation)?;
    Ok(evaluate_typed(&typed, &table.rows, ORACLE_ORIGIN))
}

/// Evaluates an already typechecked query over rows laid out as
/// `typed.relation`.
pub fn evaluate_typed(typed: &TypedQuery, rows: &[Row], origin: &str) -> CanonicalResult {
    let limit = typed.query.limit.map(|n| n as usize).unwrap_or(usize::MAX);
    let out = rows
        .iter()
        .filter(|row| match &typed.query.selection {
            None => true,
            Some(p) => eval_predicate(p, &typed.relation, row),
        })
        .take(limit)
        .map(|row| typed.projection.iter().map(|&i| row[i].clone()).collect())
        .collect();
    CanonicalResult::new(typed.output_attributes(), out, origin)
}

/// Two-valued predicate evaluation: a comparison involving null is false, and
/// negation flips that false to true.
pub fn eval_predicate(p: &Predicate, relation: &RelationDef, row: &Row) -> bool {
    match p {
        Predicate::Compare(c) => {
            let Some(i) = relation.position(&c.attribute) else {
                return false;
            };
            compare(&row[i], c.op, &c.value)
        }
        Predicate::And(parts) => parts.iter().all(|q| eval_predicate(q, relation, row)),
        Predicate::Or(parts) => parts.iter().any(|q| eval_predicate(q, relation, row)),
        Predicate::Not(inner) => !eval_predicate(inner, relation, row),
    }
}

pub fn compare(left: &Value, op: CompareOp, right: &Value) -> bool {
    if op == CompareOp::Like {
        return match (left, right) {
            (Value::String(text), Value::String(pattern)) => like_match(pattern, text),
            _ => false,
        };
    }
    let Some(ordering) = left.compare(right) else {
        return false;
    };
    match op {
        CompareOp::Eq => ordering == Ordering::Equal,
        CompareOp::Neq => ordering != Ordering::Equal,
        CompareOp::Lt => ordering == Ordering::Less,
        CompareOp::Lte => ordering != Ordering::Greater,
        CompareOp::Gt => ordering == Ordering::Greater,
        CompareOp::Gte => ordering != Ordering::Less,
        CompareOp::Like => unreachable!(),
    }
}
