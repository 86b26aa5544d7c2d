//! The system format: schemas, queries and results exchanged between
//! components, the schema mapping rules, and the reference evaluator.

mod eval;
mod like;
mod mapping;
mod query;
mod result;
mod schema;
mod value;

pub use eval::{compare, eval_predicate, evaluate_query_oracle, evaluate_typed, Database, Table, ORACLE_ORIGIN};
pub use like::like_match;
pub use mapping::{
    apply_schema_mapping, AttributeCorrespondence, MappingError, MappingRule, NameCorrespondence, QualifiedName,
    RelationCorrespondence, RelationSource, SchemaMapping,
};
pub use query::{
    typecheck_against, typecheck_query, CanonicalQuery, CompareOp, Comparison, Predicate, TypeError, TypeErrorKind,
    TypedQuery, MAX_PREDICATE_DEPTH,
};
pub use result::{CanonicalResult, ResultAttribute, ResultViolation};
pub use schema::{
    validate_schema, AttributeDef, AttributeType, CanonicalSchema, RelationDef, SchemaRole, SchemaViolation,
    ViolationKind,
};
pub use value::{Row, Value};
