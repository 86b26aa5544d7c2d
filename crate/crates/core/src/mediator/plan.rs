use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::MediatorError;
use crate::model::{
    apply_schema_mapping, compare, evaluate_query_oracle, typecheck_query, CanonicalQuery, CanonicalResult,
    CanonicalSchema, CompareOp, MappingError, NameCorrespondence, Predicate, RelationDef, RelationSource, Row,
    SchemaMapping, SchemaRole, Table,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChildRef {
    pub id: String,
    pub alias: String,
}

impl ChildRef {
    pub fn new(id: impl Into<String>, alias: impl Into<String>) -> Self {
        ChildRef {
            id: id.into(),
            alias: alias.into(),
        }
    }
}

/// How a mediator combines its children. Children are qualified as
/// `alias_relation` before `mapping` runs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrationSpec {
    pub children: Vec<ChildRef>,
    #[serde(default)]
    pub mapping: SchemaMapping,
}

impl IntegrationSpec {
    /// One child per id, aliased by its own id, no mapping rules.
    pub fn translational(children: &[&str]) -> Self {
        IntegrationSpec {
            children: children.iter().map(|c| ChildRef::new(*c, *c)).collect(),
            mapping: SchemaMapping::default(),
        }
    }
}

/// Where a qualified relation lives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub child: usize,
    pub relation: String,
}

/// A GCS together with everything needed to decompose queries against it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Integration {
    pub gcs: CanonicalSchema,
    pub correspondence: NameCorrespondence,
    pub children: Vec<ChildRef>,
    /// Keyed by qualified relation name.
    pub origins: BTreeMap<String, Origin>,
}

pub fn qualify(alias: &str, relation: &str) -> String {
    format!("{alias}_{relation}")
}

/// Builds the GCS of `spec` from the child schemas, given in child order.
pub fn integrate_schemas(
    name: &str,
    spec: &IntegrationSpec,
    schemas: &[CanonicalSchema],
) -> Result<Integration, MediatorError> {
    if schemas.len() != spec.children.len() {
        return Err(MediatorError::UnknownChild(format!(
            "{} child schemas for {} children",
            schemas.len(),
            spec.children.len()
        )));
    }
    let mut aliases = BTreeSet::new();
    for c in &spec.children {
        if !aliases.insert(c.alias.as_str()) {
            return Err(MediatorError::AliasCollision(format!("alias `{}` used twice", c.alias)));
        }
    }
    let mut qualified = CanonicalSchema::new(name, SchemaRole::GCS);
    let mut origins = BTreeMap::new();
    for (i, (child, schema)) in spec.children.iter().zip(schemas).enumerate() {
        qualified.provenance.push(schema.name.clone());
        for r in &schema.relations {
            let q = qualify(&child.alias, &r.name);
            if origins.contains_key(&q) {
                return Err(MediatorError::AliasCollision(format!(
                    "qualified name `{q}` produced twice"
                )));
            }
            origins.insert(
                q.clone(),
                Origin {
                    child: i,
                    relation: r.name.clone(),
                },
            );
            qualified.relations.push(RelationDef::new(q, r.attributes.clone()));
        }
    }
    let (gcs, correspondence) = apply_schema_mapping(&qualified, &spec.mapping).map_err(MediatorError::Mapping)?;
    Ok(Integration {
        gcs,
        correspondence,
        children: spec.children.clone(),
        origins,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubQuery {
    /// Index into the mediator's children.
    pub child: usize,
    pub query: CanonicalQuery,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Combiner {
    Passthrough,
    /// Concatenation in sub-query order.
    UnionAll,
    /// Nested-loop join of sub-query 0 (outer) with sub-query 1. Each output
    /// column is taken from `(side, column)` of the partials.
    EquiJoin {
        left_key: usize,
        right_key: usize,
        columns: Vec<(usize, usize)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergePlan {
    pub sub_queries: Vec<SubQuery>,
    pub combiner: Combiner,
    /// Shape of the combined rows the residual runs over.
    pub combined: RelationDef,
    pub residual: CanonicalQuery,
}

impl MergePlan {
    /// Child indices the plan touches, without repetition.
    pub fn children(&self) -> BTreeSet<usize> {
        self.sub_queries.iter().map(|s| s.child).collect()
    }
}

fn unresolvable(name: impl Into<String>) -> MediatorError {
    MediatorError::Mapping(MappingError::Unresolvable(name.into()))
}

/// Splits a GCS query into native child sub-queries plus a residual.
pub fn decompose_query(query: &CanonicalQuery, integration: &Integration) -> Result<MergePlan, MediatorError> {
    let typed = typecheck_query(query, &integration.gcs).map_err(MediatorError::Type)?;
    let query = &typed.query;
    let relation = &typed.relation;
    let corr = integration
        .correspondence
        .relation(&query.target)
        .ok_or_else(|| unresolvable(&query.target))?;
    let origin = |qualified: &str| {
        integration
            .origins
            .get(qualified)
            .ok_or_else(|| unresolvable(qualified))
    };
    let projection: Vec<String> = if query.projection.is_empty() {
        relation.attribute_names()
    } else {
        query.projection.clone()
    };
    // GCS attribute -> native attribute of the k-th source.
    let native = |k: usize| {
        move |name: &str| -> Result<String, MediatorError> {
            corr.attribute(name)
                .and_then(|a| a.sources.get(k))
                .map(|s| s.attribute.clone())
                .ok_or_else(|| unresolvable(format!("{}.{name}", query.target)))
        }
    };
    let rewrite = |k: usize, target: &str| -> Result<CanonicalQuery, MediatorError> {
        let mut rename = native(k);
        Ok(CanonicalQuery {
            target: target.to_string(),
            projection: projection.iter().map(|a| rename(a)).collect::<Result<_, _>>()?,
            selection: query
                .selection
                .as_ref()
                .map(|p| p.map_attributes(&mut rename))
                .transpose()?,
            limit: query.limit,
        })
    };
    let projected = RelationDef::new(
        relation.name.clone(),
        projection
            .iter()
            .map(|a| relation.attribute(a).cloned().ok_or_else(|| unresolvable(a.clone())))
            .collect::<Result<_, _>>()?,
    );
    let identity = CanonicalQuery::scan(relation.name.clone());

    match &corr.source {
        RelationSource::Direct { relation: qualified } => {
            let o = origin(qualified)?;
            Ok(MergePlan {
                sub_queries: vec![SubQuery {
                    child: o.child,
                    query: rewrite(0, &o.relation)?,
                }],
                combiner: Combiner::Passthrough,
                combined: projected,
                residual: identity,
            })
        }
        RelationSource::Union { relations } => {
            let mut parts = Vec::with_capacity(relations.len());
            for (k, qualified) in relations.iter().enumerate() {
                let o = origin(qualified)?;
                parts.push((
                    integration.children[o.child].alias.clone(),
                    k,
                    SubQuery {
                        child: o.child,
                        query: rewrite(k, &o.relation)?,
                    },
                ));
            }
            parts.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
            Ok(MergePlan {
                sub_queries: parts.into_iter().map(|(_, _, s)| s).collect(),
                combiner: Combiner::UnionAll,
                combined: projected,
                residual: CanonicalQuery {
                    limit: query.limit,
                    ..identity
                },
            })
        }
        RelationSource::Join { left, right } => {
            let sides = [left, right];
            let side_of = |qualified: &str| sides.iter().position(|s| s.relation == qualified);
            // Native columns fetched from each side, and where every view
            // attribute lands among them.
            let mut fetched: [Vec<String>; 2] = [Vec::new(), Vec::new()];
            let mut columns = Vec::with_capacity(corr.attributes.len());
            let mut view_side: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
            for a in &corr.attributes {
                let src = &a.sources[0];
                let side = side_of(&src.relation).ok_or_else(|| unresolvable(src.to_string()))?;
                columns.push((side, fetched[side].len()));
                fetched[side].push(src.attribute.clone());
                view_side.insert(a.name.as_str(), (side, src.attribute.as_str()));
            }
            let mut keys = [0usize; 2];
            for side in 0..2 {
                let key = &sides[side].attribute;
                keys[side] = match fetched[side].iter().position(|c| c == key) {
                    Some(i) => i,
                    None => {
                        fetched[side].push(key.clone());
                        fetched[side].len() - 1
                    }
                };
            }

            let mut pushed: [Vec<Predicate>; 2] = [Vec::new(), Vec::new()];
            let mut kept = Vec::new();
            if let Some(selection) = &query.selection {
                for conjunct in selection.conjuncts() {
                    let touched: BTreeSet<usize> = conjunct
                        .attributes()
                        .iter()
                        .filter_map(|a| view_side.get(a).map(|(s, _)| *s))
                        .collect();
                    if touched.len() == 1 {
                        let side = *touched.iter().next().unwrap();
                        let mut rename = |name: &str| -> Result<String, MediatorError> {
                            view_side
                                .get(name)
                                .map(|(_, n)| n.to_string())
                                .ok_or_else(|| unresolvable(name.to_string()))
                        };
                        pushed[side].push(conjunct.map_attributes(&mut rename)?);
                    } else {
                        kept.push(conjunct.clone());
                    }
                }
            }
            let [left_pushed, right_pushed] = pushed;
            let mut sub_queries = Vec::with_capacity(2);
            for (side, selection) in [(0, left_pushed), (1, right_pushed)] {
                let o = origin(&sides[side].relation)?;
                sub_queries.push(SubQuery {
                    child: o.child,
                    query: CanonicalQuery {
                        target: o.relation.clone(),
                        projection: fetched[side].clone(),
                        selection: Predicate::conjoin(selection),
                        limit: None,
                    },
                });
            }
            Ok(MergePlan {
                sub_queries,
                combiner: Combiner::EquiJoin {
                    left_key: keys[0],
                    right_key: keys[1],
                    columns,
                },
                combined: relation.clone(),
                residual: CanonicalQuery {
                    target: relation.name.clone(),
                    projection: query.projection.clone(),
                    selection: Predicate::conjoin(kept),
                    limit: query.limit,
                },
            })
        }
    }
}

/// Combines the partial results of `plan`, keyed by sub-query index, and
/// applies its residual.
pub fn merge_results(
    partials: &BTreeMap<usize, CanonicalResult>,
    plan: &MergePlan,
    integration: &Integration,
    origin: &str,
) -> Result<CanonicalResult, MediatorError> {
    let mut parts = Vec::with_capacity(plan.sub_queries.len());
    for (i, sub) in plan.sub_queries.iter().enumerate() {
        let partial = partials.get(&i).ok_or_else(|| {
            MediatorError::MissingPartial(format!(
                "no result for sub-query {i} to `{}`",
                integration.children.get(sub.child).map_or("?", |c| c.id.as_str())
            ))
        })?;
        parts.push(partial);
    }
    let rows: Vec<Row> = match &plan.combiner {
        Combiner::Passthrough | Combiner::UnionAll => {
            let expected = plan.combined.attributes.len();
            let mut rows = Vec::new();
            for (i, p) in parts.iter().enumerate() {
                let types_match = p.attributes.len() == expected
                    && p.attributes
                        .iter()
                        .zip(&plan.combined.attributes)
                        .all(|(a, b)| a.ty == b.ty);
                if !types_match || p.rows.iter().any(|r| r.len() != expected) {
                    return Err(MediatorError::UnionArityMismatch(format!(
                        "sub-query {i} returned {} attribute(s), expected {expected}",
                        p.attributes.len()
                    )));
                }
                rows.extend(p.rows.iter().cloned());
            }
            rows
        }
        Combiner::EquiJoin {
            left_key,
            right_key,
            columns,
        } => {
            let (l, r) = (parts[0], parts[1]);
            for (side, p, key) in [(0, l, *left_key), (1, r, *right_key)] {
                let width = columns
                    .iter()
                    .filter(|(s, _)| *s == side)
                    .map(|(_, c)| c + 1)
                    .max()
                    .unwrap_or(0);
                if p.attributes.len() <= key
                    || p.attributes.len() < width
                    || p.rows.iter().any(|row| row.len() != p.attributes.len())
                {
                    return Err(MediatorError::PartialShape(format!(
                        "join input {side} has {} attribute(s)",
                        p.attributes.len()
                    )));
                }
            }
            let mut rows = Vec::new();
            for lrow in &l.rows {
                for rrow in &r.rows {
                    if compare(&lrow[*left_key], CompareOp::Eq, &rrow[*right_key]) {
                        let sides = [lrow, rrow];
                        rows.push(columns.iter().map(|&(s, c)| sides[s][c].clone()).collect());
                    }
                }
            }
            rows
        }
    };
    let combined = Table::new(plan.combined.clone(), rows);
    let result = evaluate_query_oracle(&plan.residual, &combined).map_err(MediatorError::Type)?;
    Ok(result.with_origin(origin))
}
