//! Execution of pushed-down queries inside the built-in stores.
//!
//! Predicates are compiled once into closures over column positions, the way
//! a store would prepare a native filter.

use crate::model::{compare, CanonicalQuery, CompareOp, Predicate, RelationDef, Row, Value};

use super::WrapperError;

type RowFilter = Box<dyn Fn(&Row) -> bool + Send + Sync>;

pub(crate) fn compile(predicate: &Predicate, relation: &RelationDef) -> Result<RowFilter, WrapperError> {
    Ok(match predicate {
        Predicate::Compare(c) => {
            let column = relation
                .position(&c.attribute)
                .ok_or_else(|| WrapperError::CapabilityViolation(format!("unknown column `{}`", c.attribute)))?;
            let op: CompareOp = c.op;
            let literal: Value = c.value.clone();
            Box::new(move |row: &Row| compare(&row[column], op, &literal))
        }
        Predicate::And(parts) => {
            let parts = parts
                .iter()
                .map(|p| compile(p, relation))
                .collect::<Result<Vec<_>, _>>()?;
            Box::new(move |row: &Row| parts.iter().all(|f| f(row)))
        }
        Predicate::Or(parts) => {
            let parts = parts
                .iter()
                .map(|p| compile(p, relation))
                .collect::<Result<Vec<_>, _>>()?;
            Box::new(move |row: &Row| parts.iter().any(|f| f(row)))
        }
        Predicate::Not(inner) => {
            let inner = compile(inner, relation)?;
            Box::new(move |row: &Row| !inner(row))
        }
    })
}

/// Column positions a native projection selects; all columns when empty.
pub(crate) fn projection_columns(query: &CanonicalQuery, relation: &RelationDef) -> Result<Vec<usize>, WrapperError> {
    if query.projection.is_empty() {
        return Ok((0..relation.attributes.len()).collect());
    }
    query
        .projection
        .iter()
        .map(|name| {
            relation
                .position(name)
                .ok_or_else(|| WrapperError::CapabilityViolation(format!("unknown column `{name}`")))
        })
        .collect()
}

/// Relation describing the rows a native query returns.
pub(crate) fn output_relation(relation: &RelationDef, columns: &[usize]) -> RelationDef {
    RelationDef::new(
        relation.name.clone(),
        columns.iter().map(|&i| relation.attributes[i].clone()).collect(),
    )
}
