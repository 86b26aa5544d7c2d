use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Position of a schema in the integration hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemaRole {
    /// Local internal schema, native to a data source.
    LIS,
    /// Local conceptual schema, exported by a wrapper.
    LCS,
    /// Local exported schema, owned by a mask over a single source.
    LES,
    /// Global conceptual schema, produced by a mediator.
    GCS,
    /// Global exported schema, owned by a mask over integrated sources.
    GES,
}

impl fmt::Display for SchemaRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SchemaRole::LIS => "LIS",
            SchemaRole::LCS => "LCS",
            SchemaRole::LES => "LES",
            SchemaRole::GCS => "GCS",
            SchemaRole::GES => "GES",
        };
        f.write_str(s)
    }
}

/// Scalar attribute type.
///
/// `Unknown` only exists so that documents naming a type outside the
/// canonical set can be loaded and reported by [`validate_schema`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AttributeType {
    String,
    Integer,
    Float,
    Boolean,
    Unknown(String),
}

impl AttributeType {
    pub fn as_str(&self) -> &str {
        match self {
            AttributeType::String => "string",
            AttributeType::Integer => "integer",
            AttributeType::Float => "float",
            AttributeType::Boolean => "boolean",
            AttributeType::Unknown(s) => s,
        }
    }

    pub fn parse(s: &str) -> AttributeType {
        match s {
            "string" => AttributeType::String,
            "integer" => AttributeType::Integer,
            "float" => AttributeType::Float,
            "boolean" => AttributeType::Boolean,
            other => AttributeType::Unknown(other.to_string()),
        }
    }

    pub fn is_known(&self) -> bool {
        !matches!(self, AttributeType::Unknown(_))
    }
}

impl fmt::Display for AttributeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for AttributeType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for AttributeType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(AttributeType::parse(&s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: AttributeType,
    #[serde(default)]
    pub nullable: bool,
}

impl AttributeDef {
    pub fn new(name: impl Into<String>, ty: AttributeType, nullable: bool) -> Self {
        AttributeDef {
            name: name.into(),
            ty,
            nullable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationDef {
    pub name: String,
    pub attributes: Vec<AttributeDef>,
}

impl RelationDef {
    pub fn new(name: impl Into<String>, attributes: Vec<AttributeDef>) -> Self {
        RelationDef {
            name: name.into(),
            attributes,
        }
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn attribute_names(&self) -> Vec<String> {
        self.attributes.iter().map(|a| a.name.clone()).collect()
    }
}

/// Schema in the system format exchanged between components.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalSchema {
    pub name: String,
    pub role: SchemaRole,
    pub relations: Vec<RelationDef>,
    #[serde(default)]
    pub provenance: Vec<String>,
}

impl CanonicalSchema {
    pub fn new(name: impl Into<String>, role: SchemaRole) -> Self {
        CanonicalSchema {
            name: name.into(),
            role,
            relations: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn relation(&self, name: &str) -> Option<&RelationDef> {
        self.relations.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    DuplicateRelation,
    DuplicateAttribute,
    UnknownType,
    MissingProvenance,
    EmptyName,
}

impl ViolationKind {
    pub fn code(&self) -> &'static str {
        match self {
            ViolationKind::DuplicateRelation => "duplicate-relation",
            ViolationKind::DuplicateAttribute => "duplicate-attribute",
            ViolationKind::UnknownType => "unknown-type",
            ViolationKind::MissingProvenance => "missing-provenance",
            ViolationKind::EmptyName => "empty-name",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaViolation {
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.code(), self.detail)
    }
}

/// Checks every structural invariant of a schema. An empty report means the
/// schema is valid.
pub fn validate_schema(schema: &CanonicalSchema) -> Vec<SchemaViolation> {
    let mut report = Vec::new();
    let mut push = |kind, detail: String| report.push(SchemaViolation { kind, detail });

    if schema.provenance.is_empty() && schema.role != SchemaRole::LIS {
        push(
            ViolationKind::MissingProvenance,
            format!("{} schema `{}` has no provenance", schema.role, schema.name),
        );
    }

    let mut relations = HashSet::new();
    for relation in &schema.relations {
        if relation.name.is_empty() {
            push(ViolationKind::EmptyName, "relation with empty name".into());
        }
        if !relations.insert(relation.name.as_str()) {
            push(
                ViolationKind::DuplicateRelation,
                format!("relation `{}` declared more than once", relation.name),
            );
        }
        let mut attributes = HashSet::new();
        for attribute in &relation.attributes {
            if attribute.name.is_empty() {
                push(
                    ViolationKind::EmptyName,
                    format!("attribute with empty name in `{}`", relation.name),
                );
            }
            if !attributes.insert(attribute.name.as_str()) {
                push(
                    ViolationKind::DuplicateAttribute,
                    format!("`{}.{}` declared more than once", relation.name, attribute.name),
                );
            }
            if !attribute.ty.is_known() {
                push(
                    ViolationKind::UnknownType,
                    format!(
                        "`{}.{}` has unknown type `{}`",
                        relation.name, attribute.name, attribute.ty
                    ),
                );
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn people() -> RelationDef {
        RelationDef::new(
            "people",
            vec![
                AttributeDef::new("id", AttributeType::Integer, false),
                AttributeDef::new("name", AttributeType::String, false),
                AttributeDef::new("age", AttributeType::Integer, true),
            ],
        )
    }

    fn lcs(relations: Vec<RelationDef>) -> CanonicalSchema {
        CanonicalSchema {
            name: "w1".into(),
            role: SchemaRole::LCS,
            relations,
            provenance: vec!["s1".into()],
        }
    }

    #[test]
    fn well_formed_schema_has_empty_report() {
        assert!(validate_schema(&lcs(vec![people()])).is_empty());
    }

    #[test]
    fn duplicate_relation_is_reported_once() {
        let report = validate_schema(&lcs(vec![people(), people()]));
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].kind, ViolationKind::DuplicateRelation);
    }

    #[test]
    fn unknown_type_survives_decoding_and_is_reported() {
        let json = r#"{"name":"w1","role":"LCS","provenance":["s1"],
            "relations":[{"name":"events","attributes":[{"name":"at","type":"date","nullable":false}]}]}"#;
        let schema: CanonicalSchema = serde_json::from_str(json).unwrap();
        let report = validate_schema(&schema);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].kind, ViolationKind::UnknownType);
    }

    #[test]
    fn provenance_only_optional_for_lis() {
        let mut schema = lcs(vec![people()]);
        schema.provenance.clear();
        assert_eq!(validate_schema(&schema)[0].kind, ViolationKind::MissingProvenance);
        schema.role = SchemaRole::LIS;
        assert!(validate_schema(&schema).is_empty());
    }

    #[test]
    fn duplicate_attribute_is_reported() {
        let mut relation = people();
        relation
            .attributes
            .push(AttributeDef::new("age", AttributeType::Float, false));
        let report = validate_schema(&lcs(vec![relation]));
        assert_eq!(report[0].kind, ViolationKind::DuplicateAttribute);
    }
}
