use std::fmt;

use serde::{Deserialize, Serialize};

use super::schema::{AttributeType, RelationDef};
use super::value::Row;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultAttribute {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: AttributeType,
}

impl ResultAttribute {
    pub fn new(name: impl Into<String>, ty: AttributeType) -> Self {
        ResultAttribute { name: name.into(), ty }
    }
}

/// Rows produced by a component, in the system format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalResult {
    pub attributes: Vec<ResultAttribute>,
    pub rows: Vec<Row>,
    pub origin: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultViolation(pub String);

impl fmt::Display for ResultViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl CanonicalResult {
    pub fn new(attributes: Vec<ResultAttribute>, rows: Vec<Row>, origin: impl Into<String>) -> Self {
        CanonicalResult {
            attributes,
            rows,
            origin: origin.into(),
        }
    }

    pub fn attribute_names(&self) -> Vec<&str> {
        self.attributes.iter().map(|a| a.name.as_str()).collect()
    }

    /// Equality of header and rows, ignoring which component produced them.
    pub fn same_content(&self, other: &CanonicalResult) -> bool {
        self.attributes == other.attributes && self.rows == other.rows
    }

    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = origin.into();
        self
    }

    /// Views the result as the contents of a relation called `name`.
    pub fn as_relation(&self, name: &str) -> RelationDef {
        RelationDef::new(
            name,
            self.attributes
                .iter()
                .map(|a| super::schema::AttributeDef::new(a.name.clone(), a.ty.clone(), true))
                .collect(),
        )
    }

    pub fn check(&self) -> Vec<ResultViolation> {
        let mut out = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.attributes.len() {
                out.push(ResultViolation(format!(
                    "row {i} has arity {} but header has {}",
                    row.len(),
                    self.attributes.len()
                )));
                continue;
            }
            for (value, attribute) in row.iter().zip(&self.attributes) {
                if !value.conforms_to(&attribute.ty) {
                    out.push(ResultViolation(format!(
                        "row {i}: value `{value}` is not {}",
                        attribute.ty
                    )));
                }
            }
        }
        out
    }
}
