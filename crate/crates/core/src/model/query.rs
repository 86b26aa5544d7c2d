use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::schema::{AttributeType, CanonicalSchema, RelationDef};
use super::value::Value;

/// Maximum nesting depth of a predicate tree. A single comparison has depth 1.
pub const MAX_PREDICATE_DEPTH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompareOp {
    Eq,
    Neq,
    Lt,
    Lte,
    Gt,
    Gte,
    Like,
}

impl CompareOp {
    pub const ALL: [CompareOp; 7] = [
        CompareOp::Eq,
        CompareOp::Neq,
        CompareOp::Lt,
        CompareOp::Lte,
        CompareOp::Gt,
        CompareOp::Gte,
        CompareOp::Like,
    ];

    pub fn token(&self) -> &'static str {
        match self {
            CompareOp::Eq => "eq",
            CompareOp::Neq => "neq",
            CompareOp::Lt => "lt",
            CompareOp::Lte => "lte",
            CompareOp::Gt => "gt",
            CompareOp::Gte => "gte",
            CompareOp::Like => "like",
        }
    }

    pub fn from_token(token: &str) -> Option<CompareOp> {
        CompareOp::ALL.into_iter().find(|op| op.token() == token)
    }
}

impl fmt::Display for CompareOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub attribute: String,
    pub op: CompareOp,
    pub value: Value,
}

/// Boolean selection tree over attribute/literal comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "PredicateRepr", try_from = "PredicateRepr")]
pub enum Predicate {
    Compare(Comparison),
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    pub fn cmp(attribute: impl Into<String>, op: CompareOp, value: impl Into<Value>) -> Self {
        Predicate::Compare(Comparison {
            attribute: attribute.into(),
            op,
            value: value.into(),
        })
    }

    pub fn and(self, other: Predicate) -> Predicate {
        match self {
            Predicate::And(mut parts) => {
                parts.push(other);
                Predicate::And(parts)
            }
            first => Predicate::And(vec![first, other]),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Predicate {
        Predicate::Not(Box::new(self))
    }

    pub fn depth(&self) -> usize {
        match self {
            Predicate::Compare(_) => 1,
            Predicate::And(parts) | Predicate::Or(parts) => 1 + parts.iter().map(Predicate::depth).max().unwrap_or(0),
            Predicate::Not(inner) => 1 + inner.depth(),
        }
    }

    pub fn comparisons(&self) -> Vec<&Comparison> {
        let mut out = Vec::new();
        self.collect_comparisons(&mut out);
        out
    }

    fn collect_comparisons<'a>(&'a self, out: &mut Vec<&'a Comparison>) {
        match self {
            Predicate::Compare(c) => out.push(c),
            Predicate::And(parts) | Predicate::Or(parts) => parts.iter().for_each(|p| p.collect_comparisons(out)),
            Predicate::Not(inner) => inner.collect_comparisons(out),
        }
    }

    pub fn attributes(&self) -> Vec<&str> {
        self.comparisons().into_iter().map(|c| c.attribute.as_str()).collect()
    }

    /// Top-level AND operands; a non-AND predicate is its own single conjunct.
    pub fn conjuncts(&self) -> Vec<&Predicate> {
        match self {
            Predicate::And(parts) => parts.iter().flat_map(|p| p.conjuncts()).collect(),
            other => vec![other],
        }
    }

    /// Rebuilds a predicate from conjuncts; `None` for an empty list.
    pub fn conjoin(mut parts: Vec<Predicate>) -> Option<Predicate> {
        match parts.len() {
            0 => None,
            1 => parts.pop(),
            _ => Some(Predicate::And(parts)),
        }
    }

    /// Applies `rename` to every attribute reference.
    pub fn map_attributes<E>(&self, rename: &mut impl FnMut(&str) -> Result<String, E>) -> Result<Predicate, E> {
        Ok(match self {
            Predicate::Compare(c) => Predicate::Compare(Comparison {
                attribute: rename(&c.attribute)?,
                op: c.op,
                value: c.value.clone(),
            }),
            Predicate::And(parts) => Predicate::And(
                parts
                    .iter()
                    .map(|p| p.map_attributes(rename))
                    .collect::<Result<_, _>>()?,
            ),
            Predicate::Or(parts) => Predicate::Or(
                parts
                    .iter()
                    .map(|p| p.map_attributes(rename))
                    .collect::<Result<_, _>>()?,
            ),
            Predicate::Not(inner) => Predicate::Not(Box::new(inner.map_attributes(rename)?)),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum PredicateRepr {
    Eq { attribute: String, value: Value },
    Neq { attribute: String, value: Value },
    Lt { attribute: String, value: Value },
    Lte { attribute: String, value: Value },
    Gt { attribute: String, value: Value },
    Gte { attribute: String, value: Value },
    Like { attribute: String, value: Value },
    And { args: Vec<PredicateRepr> },
    Or { args: Vec<PredicateRepr> },
    Not { arg: Box<PredicateRepr> },
}

impl From<Predicate> for PredicateRepr {
    fn from(p: Predicate) -> Self {
        match p {
            Predicate::Compare(Comparison { attribute, op, value }) => match op {
                CompareOp::Eq => PredicateRepr::Eq { attribute, value },
                CompareOp::Neq => PredicateRepr::Neq { attribute, value },
                CompareOp::Lt => PredicateRepr::Lt { attribute, value },
                CompareOp::Lte => PredicateRepr::Lte { attribute, value },
                CompareOp::Gt => PredicateRepr::Gt { attribute, value },
                CompareOp::Gte => PredicateRepr::Gte { attribute, value },
                CompareOp::Like => PredicateRepr::Like { attribute, value },
            },
            Predicate::And(parts) => PredicateRepr::And {
                args: parts.into_iter().map(Into::into).collect(),
            },
            Predicate::Or(parts) => PredicateRepr::Or {
                args: parts.into_iter().map(Into::into).collect(),
            },
            Predicate::Not(inner) => PredicateRepr::Not {
                arg: Box::new((*inner).into()),
            },
        }
    }
}

impl TryFrom<PredicateRepr> for Predicate {
    type Error = String;

    fn try_from(r: PredicateRepr) -> Result<Self, Self::Error> {
        let leaf = |attribute, op, value| Ok(Predicate::Compare(Comparison { attribute, op, value }));
        match r {
            PredicateRepr::Eq { attribute, value } => leaf(attribute, CompareOp::Eq, value),
            PredicateRepr::Neq { attribute, value } => leaf(attribute, CompareOp::Neq, value),
            PredicateRepr::Lt { attribute, value } => leaf(attribute, CompareOp::Lt, value),
            PredicateRepr::Lte { attribute, value } => leaf(attribute, CompareOp::Lte, value),
            PredicateRepr::Gt { attribute, value } => leaf(attribute, CompareOp::Gt, value),
            PredicateRepr::Gte { attribute, value } => leaf(attribute, CompareOp::Gte, value),
            PredicateRepr::Like { attribute, value } => leaf(attribute, CompareOp::Like, value),
            PredicateRepr::And { args } => {
                if args.is_empty() {
                    return Err("`and` needs at least one argument".into());
                }
                Ok(Predicate::And(
                    args.into_iter().map(TryInto::try_into).collect::<Result<_, _>>()?,
                ))
            }
            PredicateRepr::Or { args } => {
                if args.is_empty() {
                    return Err("`or` needs at least one argument".into());
                }
                Ok(Predicate::Or(
                    args.into_iter().map(TryInto::try_into).collect::<Result<_, _>>()?,
                ))
            }
            PredicateRepr::Not { arg } => Ok(Predicate::Not(Box::new((*arg).try_into()?))),
        }
    }
}

/// Projection/selection/limit query over a single relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalQuery {
    pub target: String,
    /// Empty means all attributes of the target.
    #[serde(default)]
    pub projection: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Predicate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<u64>,
}

impl CanonicalQuery {
    /// Identity query: every attribute, every row.
    pub fn scan(target: impl Into<String>) -> Self {
        CanonicalQuery {
            target: target.into(),
            projection: Vec::new(),
            selection: None,
            limit: None,
        }
    }

    pub fn select(mut self, attributes: &[&str]) -> Self {
        self.projection = attributes.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn filter(mut self, predicate: Predicate) -> Self {
        self.selection = Some(predicate);
        self
    }

    pub fn limit(mut self, n: u64) -> Self {
        self.limit = Some(n);
        self
    }

    pub fn is_identity(&self) -> bool {
        self.projection.is_empty() && self.selection.is_none() && self.limit.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TypeErrorKind {
    UnknownRelation,
    UnknownAttribute,
    TypeMismatch,
    OperatorUnsupportedForType,
    PredicateTooDeep,
    DuplicateProjection,
}

impl TypeErrorKind {
    pub fn code(&self) -> &'static str {
        match self {
            TypeErrorKind::UnknownRelation => "unknown-relation",
            TypeErrorKind::UnknownAttribute => "unknown-attribute",
            TypeErrorKind::TypeMismatch => "type-mismatch",
            TypeErrorKind::OperatorUnsupportedForType => "operator-unsupported-for-type",
            TypeErrorKind::PredicateTooDeep => "predicate-too-deep",
            TypeErrorKind::DuplicateProjection => "duplicate-projection",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub detail: String,
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.code(), self.detail)
    }
}

/// A query that passed typechecking, with literals coerced to attribute types
/// and the projection resolved to column positions.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedQuery {
    pub query: CanonicalQuery,
    pub relation: RelationDef,
    pub projection: Vec<usize>,
}

impl TypedQuery {
    pub fn output_attributes(&self) -> Vec<super::result::ResultAttribute> {
        self.projection
            .iter()
            .map(|&i| {
                let a = &self.relation.attributes[i];
                super::result::ResultAttribute::new(a.name.clone(), a.ty.clone())
            })
            .collect()
    }
}

/// Resolves names and literal types of `query` against `schema`.
pub fn typecheck_query(query: &CanonicalQuery, schema: &CanonicalSchema) -> Result<TypedQuery, Vec<TypeError>> {
    let Some(relation) = schema.relation(&query.target) else {
        return Err(vec![TypeError {
            kind: TypeErrorKind::UnknownRelation,
            detail: format!("relation `{}` does not exist", query.target),
        }]);
    };
    typecheck_against(query, relation)
}

/// Typechecks against a single relation definition, ignoring the target name
/// beyond requiring it to match.
pub fn typecheck_against(query: &CanonicalQuery, relation: &RelationDef) -> Result<TypedQuery, Vec<TypeError>> {
    let mut errors = Vec::new();
    if query.target != relation.name {
        errors.push(TypeError {
            kind: TypeErrorKind::UnknownRelation,
            detail: format!("relation `{}` does not exist", query.target),
        });
        return Err(errors);
    }

    let mut projection = Vec::new();
    if query.projection.is_empty() {
        projection.extend(0..relation.attributes.len());
    } else {
        let mut seen = HashSet::new();
        for name in &query.projection {
            match relation.position(name) {
                Some(i) => {
                    if !seen.insert(i) {
                        errors.push(TypeError {
                            kind: TypeErrorKind::DuplicateProjection,
                            detail: format!("`{name}` projected more than once"),
                        });
                    }
                    projection.push(i);
                }
                None => errors.push(unknown_attribute(relation, name)),
            }
        }
    }

    let selection = match &query.selection {
        None => None,
        Some(p) if p.depth() > MAX_PREDICATE_DEPTH => {
            errors.push(TypeError {
                kind: TypeErrorKind::PredicateTooDeep,
                detail: format!("predicate depth {} exceeds {MAX_PREDICATE_DEPTH}", p.depth()),
            });
            None
        }
        Some(p) => Some(check_predicate(p, relation, &mut errors)),
    };

    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(TypedQuery {
        query: CanonicalQuery {
            target: query.target.clone(),
            projection: query.projection.clone(),
            selection,
            limit: query.limit,
        },
        relation: relation.clone(),
        projection,
    })
}

fn unknown_attribute(relation: &RelationDef, name: &str) -> TypeError {
    TypeError {
        kind: TypeErrorKind::UnknownAttribute,
        detail: format!("`{}.{name}` does not exist", relation.name),
    }
}

fn check_predicate(p: &Predicate, relation: &RelationDef, errors: &mut Vec<TypeError>) -> Predicate {
    match p {
        Predicate::Compare(c) => {
            let Some(attribute) = relation.attribute(&c.attribute) else {
                errors.push(unknown_attribute(relation, &c.attribute));
                return p.clone();
            };
            if c.op == CompareOp::Like && attribute.ty != AttributeType::String {
                errors.push(TypeError {
                    kind: TypeErrorKind::OperatorUnsupportedForType,
                    detail: format!("`like` on {} attribute `{}`", attribute.ty, attribute.name),
                });
                return p.clone();
            }
            match c.value.coerce_to(&attribute.ty) {
                Some(value) => Predicate::Compare(Comparison {
                    attribute: c.attribute.clone(),
                    op: c.op,
                    value,
                }),
                None => {
                    let found = c
                        .value
                        .type_of()
                        .map(|t| t.to_string())
                        .unwrap_or_else(|| "null".into());
                    errors.push(TypeError {
                        kind: TypeErrorKind::TypeMismatch,
                        detail: format!("`{}` is {} but literal is {found}", attribute.name, attribute.ty),
                    });
                    p.clone()
                }
            }
        }
        Predicate::And(parts) => Predicate::And(parts.iter().map(|q| check_predicate(q, relation, errors)).collect()),
        Predicate::Or(parts) => Predicate::Or(parts.iter().map(|q| check_predicate(q, relation, errors)).collect()),
        Predicate::Not(inner) => Predicate::Not(Box::new(check_predicate(inner, relation, errors))),
    }
}
