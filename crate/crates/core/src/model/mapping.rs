//! Declarative schema mapping rules and the name correspondence they induce.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::query::CanonicalQuery;
use super::schema::{AttributeDef, CanonicalSchema, RelationDef};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QualifiedName {
    pub relation: String,
    pub attribute: String,
}

impl QualifiedName {
    pub fn new(relation: impl Into<String>, attribute: impl Into<String>) -> Self {
        QualifiedName {
            relation: relation.into(),
            attribute: attribute.into(),
        }
    }
}

impl fmt::Display for QualifiedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.relation, self.attribute)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum MappingRule {
    RenameRelation {
        old: String,
        new: String,
    },
    RenameAttribute {
        relation: String,
        old: String,
        new: String,
    },
    HideRelation {
        name: String,
    },
    HideAttribute {
        relation: String,
        name: String,
    },
    UnionRelations {
        sources: Vec<String>,
        target: String,
    },
    JoinView {
        left: QualifiedName,
        right: QualifiedName,
        target: String,
    },
}

impl MappingRule {
    pub fn is_rename_or_hide(&self) -> bool {
        !matches!(self, MappingRule::UnionRelations { .. } | MappingRule::JoinView { .. })
    }
}

/// Ordered list of mapping rules.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaMapping {
    #[serde(default)]
    pub rules: Vec<MappingRule>,
}

impl SchemaMapping {
    pub fn new(rules: Vec<MappingRule>) -> Self {
        SchemaMapping { rules }
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MappingError {
    #[error("rule {rule}: `{name}` is not visible at this point")]
    DanglingNameReference { rule: usize, name: String },
    #[error("rule {rule}: union sources have different attribute lists ({detail})")]
    UnionIncompatibleSources { rule: usize, detail: String },
    #[error("rule {rule}: name `{name}` already exists")]
    NameCollision { rule: usize, name: String },
    #[error("rule {rule}: {detail}")]
    InvalidView { rule: usize, detail: String },
    #[error("`{0}` cannot be resolved through the correspondence")]
    Unresolvable(String),
}

impl MappingError {
    pub fn code(&self) -> &'static str {
        match self {
            MappingError::DanglingNameReference { .. } => "dangling-name-reference",
            MappingError::UnionIncompatibleSources { .. } => "union-incompatible-sources",
            MappingError::NameCollision { .. } => "name-collision",
            MappingError::InvalidView { .. } => "invalid-view",
            MappingError::Unresolvable(_) => "unresolvable-name",
        }
    }
}

/// Where an output relation's rows come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RelationSource {
    Direct { relation: String },
    Union { relations: Vec<String> },
    Join { left: QualifiedName, right: QualifiedName },
}

/// One output attribute and the input attribute(s) it is drawn from. One
/// source for direct and join relations, one per union member otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeCorrespondence {
    pub name: String,
    pub sources: Vec<QualifiedName>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationCorrespondence {
    pub source: RelationSource,
    pub attributes: Vec<AttributeCorrespondence>,
}

impl RelationCorrespondence {
    pub fn attribute(&self, name: &str) -> Option<&AttributeCorrespondence> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn direct_relation(&self) -> Option<&str> {
        match &self.source {
            RelationSource::Direct { relation } => Some(relation),
            _ => None,
        }
    }
}

/// Bidirectional name map between a mapped schema and its input.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameCorrespondence {
    pub relations: BTreeMap<String, RelationCorrespondence>,
}

impl NameCorrespondence {
    /// Correspondence of a schema to itself.
    pub fn identity(schema: &CanonicalSchema) -> Self {
        NameCorrespondence {
            relations: schema.relations.iter().map(|r| (r.name.clone(), direct(r))).collect(),
        }
    }

    pub fn relation(&self, name: &str) -> Option<&RelationCorrespondence> {
        self.relations.get(name)
    }

    /// Output name of an input relation that maps directly.
    pub fn output_relation_for(&self, input: &str) -> Option<&str> {
        self.relations
            .iter()
            .find(|(_, c)| c.direct_relation() == Some(input))
            .map(|(name, _)| name.as_str())
    }

    /// Rewrites a query on an output relation into the same query on its
    /// input relation. Only direct relations can be rewritten one-to-one.
    pub fn to_input_query(&self, query: &CanonicalQuery) -> Result<CanonicalQuery, MappingError> {
        let corr = self
            .relation(&query.target)
            .ok_or_else(|| MappingError::Unresolvable(query.target.clone()))?;
        let source = corr
            .direct_relation()
            .ok_or_else(|| MappingError::Unresolvable(query.target.clone()))?;
        let rename = |name: &str| -> Result<String, MappingError> {
            corr.attribute(name)
                .map(|a| a.sources[0].attribute.clone())
                .ok_or_else(|| MappingError::Unresolvable(format!("{}.{name}", query.target)))
        };
        rewrite(query, source, rename)
    }

    /// Inverse of [`to_input_query`](Self::to_input_query).
    pub fn to_output_query(&self, query: &CanonicalQuery) -> Result<CanonicalQuery, MappingError> {
        let output = self
            .output_relation_for(&query.target)
            .ok_or_else(|| MappingError::Unresolvable(query.target.clone()))?;
        let corr = &self.relations[output];
        let rename = |name: &str| -> Result<String, MappingError> {
            corr.attributes
                .iter()
                .find(|a| a.sources[0].attribute == name)
                .map(|a| a.name.clone())
                .ok_or_else(|| MappingError::Unresolvable(format!("{}.{name}", query.target)))
        };
        rewrite(query, output, rename)
    }
}

fn rewrite(
    query: &CanonicalQuery,
    target: &str,
    mut rename: impl FnMut(&str) -> Result<String, MappingError>,
) -> Result<CanonicalQuery, MappingError> {
    Ok(CanonicalQuery {
        target: target.to_string(),
        projection: query.projection.iter().map(|a| rename(a)).collect::<Result<_, _>>()?,
        selection: query
            .selection
            .as_ref()
            .map(|p| p.map_attributes(&mut rename))
            .transpose()?,
        limit: query.limit,
    })
}

fn direct(relation: &RelationDef) -> RelationCorrespondence {
    RelationCorrespondence {
        source: RelationSource::Direct {
            relation: relation.name.clone(),
        },
        attributes: relation
            .attributes
            .iter()
            .map(|a| AttributeCorrespondence {
                name: a.name.clone(),
                sources: vec![QualifiedName::new(&relation.name, &a.name)],
            })
            .collect(),
    }
}

struct Working {
    def: RelationDef,
    corr: RelationCorrespondence,
}

/// Applies `mapping` rule by rule. The output keeps the input's name, role and
/// provenance; callers assign those for their layer.
///
/// `UnionRelations` consumes its sources. `JoinView` adds a view and leaves its
/// inputs visible. Views are built only from direct relations.
pub fn apply_schema_mapping(
    schema: &CanonicalSchema,
    mapping: &SchemaMapping,
) -> Result<(CanonicalSchema, NameCorrespondence), MappingError> {
    let mut work: Vec<Working> = schema
        .relations
        .iter()
        .map(|r| Working {
            def: r.clone(),
            corr: direct(r),
        })
        .collect();

    for (rule_index, rule) in mapping.rules.iter().enumerate() {
        let rule_no = rule_index + 1;
        let dangling = |name: &str| MappingError::DanglingNameReference {
            rule: rule_no,
            name: name.to_string(),
        };
        let position = |work: &[Working], name: &str| work.iter().position(|w| w.def.name == name);
        let collision = |work: &[Working], name: &str| -> Result<(), MappingError> {
            if work.iter().any(|w| w.def.name == name) {
                Err(MappingError::NameCollision {
                    rule: rule_no,
                    name: name.to_string(),
                })
            } else {
                Ok(())
            }
        };

        match rule {
            MappingRule::RenameRelation { old, new } => {
                let i = position(&work, old).ok_or_else(|| dangling(old))?;
                if old != new {
                    collision(&work, new)?;
                }
                work[i].def.name = new.clone();
            }
            MappingRule::RenameAttribute { relation, old, new } => {
                let i = position(&work, relation).ok_or_else(|| dangling(relation))?;
                let w = &mut work[i];
                let j = w
                    .def
                    .position(old)
                    .ok_or_else(|| dangling(&format!("{relation}.{old}")))?;
                if old != new && w.def.position(new).is_some() {
                    return Err(MappingError::NameCollision {
                        rule: rule_no,
                        name: format!("{relation}.{new}"),
                    });
                }
                w.def.attributes[j].name = new.clone();
                w.corr.attributes[j].name = new.clone();
            }
            MappingRule::HideRelation { name } => {
                let i = position(&work, name).ok_or_else(|| dangling(name))?;
                work.remove(i);
            }
            MappingRule::HideAttribute { relation, name } => {
                let i = position(&work, relation).ok_or_else(|| dangling(relation))?;
                let w = &mut work[i];
                let j = w
                    .def
                    .position(name)
                    .ok_or_else(|| dangling(&format!("{relation}.{name}")))?;
                w.def.attributes.remove(j);
                w.corr.attributes.remove(j);
            }
            MappingRule::UnionRelations { sources, target } => {
                if sources.is_empty() {
                    return Err(MappingError::InvalidView {
                        rule: rule_no,
                        detail: "union needs at least one source".into(),
                    });
                }
                let mut indices = Vec::new();
                for s in sources {
                    let i = position(&work, s).ok_or_else(|| dangling(s))?;
                    if indices.contains(&i) {
                        return Err(MappingError::InvalidView {
                            rule: rule_no,
                            detail: format!("`{s}` listed twice"),
                        });
                    }
                    if work[i].corr.direct_relation().is_none() {
                        return Err(MappingError::InvalidView {
                            rule: rule_no,
                            detail: format!("`{s}` is a view; unions take base relations"),
                        });
                    }
                    indices.push(i);
                }
                let first = &work[indices[0]].def;
                for &i in &indices[1..] {
                    let other = &work[i].def;
                    let same = first.attributes.len() == other.attributes.len()
                        && first
                            .attributes
                            .iter()
                            .zip(&other.attributes)
                            .all(|(a, b)| a.name == b.name && a.ty == b.ty);
                    if !same {
                        return Err(MappingError::UnionIncompatibleSources {
                            rule: rule_no,
                            detail: format!("`{}` vs `{}`", first.name, other.name),
                        });
                    }
                }
                let attributes: Vec<AttributeDef> = first
                    .attributes
                    .iter()
                    .enumerate()
                    .map(|(j, a)| AttributeDef {
                        name: a.name.clone(),
                        ty: a.ty.clone(),
                        nullable: indices.iter().any(|&i| work[i].def.attributes[j].nullable),
                    })
                    .collect();
                let corr = RelationCorrespondence {
                    source: RelationSource::Union {
                        relations: indices
                            .iter()
                            .map(|&i| work[i].corr.direct_relation().unwrap().to_string())
                            .collect(),
                    },
                    attributes: attributes
                        .iter()
                        .enumerate()
                        .map(|(j, a)| AttributeCorrespondence {
                            name: a.name.clone(),
                            sources: indices
                                .iter()
                                .map(|&i| work[i].corr.attributes[j].sources[0].clone())
                                .collect(),
                        })
                        .collect(),
                };
                let insert_at = *indices.iter().min().unwrap();
                let mut sorted = indices.clone();
                sorted.sort_unstable_by(|a, b| b.cmp(a));
                for i in sorted {
                    work.remove(i);
                }
                collision(&work, target)?;
                work.insert(
                    insert_at.min(work.len()),
                    Working {
                        def: RelationDef::new(target.clone(), attributes),
                        corr,
                    },
                );
            }
            MappingRule::JoinView { left, right, target } => {
                let li = position(&work, &left.relation).ok_or_else(|| dangling(&left.relation))?;
                let ri = position(&work, &right.relation).ok_or_else(|| dangling(&right.relation))?;
                if li == ri {
                    return Err(MappingError::InvalidView {
                        rule: rule_no,
                        detail: "self-joins are not supported".into(),
                    });
                }
                for i in [li, ri] {
                    if work[i].corr.direct_relation().is_none() {
                        return Err(MappingError::InvalidView {
                            rule: rule_no,
                            detail: format!("`{}` is a view; joins take base relations", work[i].def.name),
                        });
                    }
                }
                let lk = work[li]
                    .def
                    .position(&left.attribute)
                    .ok_or_else(|| dangling(&left.to_string()))?;
                let rk = work[ri]
                    .def
                    .position(&right.attribute)
                    .ok_or_else(|| dangling(&right.to_string()))?;
                if work[li].def.attributes[lk].ty != work[ri].def.attributes[rk].ty {
                    return Err(MappingError::InvalidView {
                        rule: rule_no,
                        detail: format!("join keys `{left}` and `{right}` differ in type"),
                    });
                }
                collision(&work, target)?;

                let mut attributes: Vec<AttributeDef> = Vec::new();
                let mut attr_corr = Vec::new();
                for side in [li, ri] {
                    let w = &work[side];
                    for (a, c) in w.def.attributes.iter().zip(&w.corr.attributes) {
                        let mut name = a.name.clone();
                        if attributes.iter().any(|x| x.name == name) {
                            name = format!("{}_{}", w.def.name, a.name);
                            if attributes.iter().any(|x| x.name == name) {
                                return Err(MappingError::NameCollision {
                                    rule: rule_no,
                                    name: format!("{target}.{name}"),
                                });
                            }
                        }
                        attributes.push(AttributeDef {
                            name: name.clone(),
                            ty: a.ty.clone(),
                            nullable: a.nullable,
                        });
                        attr_corr.push(AttributeCorrespondence {
                            name,
                            sources: c.sources.clone(),
                        });
                    }
                }
                let corr = RelationCorrespondence {
                    source: RelationSource::Join {
                        left: work[li].corr.attributes[lk].sources[0].clone(),
                        right: work[ri].corr.attributes[rk].sources[0].clone(),
                    },
                    attributes: attr_corr,
                };
                work.push(Working {
                    def: RelationDef::new(target.clone(), attributes),
                    corr,
                });
            }
        }
    }

    let mut out = schema.clone();
    out.relations = work.iter().map(|w| w.def.clone()).collect();
    let correspondence = NameCorrespondence {
        relations: work.into_iter().map(|w| (w.def.name, w.corr)).collect(),
    };
    Ok((out, correspondence))
}
