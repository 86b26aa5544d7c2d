use std::fs;
use std::path::Path;

use super::*;
use crate::model::{AttributeDef, AttributeType, CompareOp, Database, Predicate, Value};

fn write(dir: &Path, file: &str, text: &str) {
    fs::write(dir.join(file), text).unwrap();
}

fn people_csv(dir: &Path) {
    write(
        dir,
        "people.csv",
        "id:integer,name:string,age:integer\n1,a,30\n2,b,17\n",
    );
}

fn csv_wrapper(dir: &Path) -> Wrapper {
    Wrapper::new("w1", Box::new(CsvDirectory::new("s1", dir))).unwrap()
}

fn adults() -> CanonicalQuery {
    CanonicalQuery::scan("people")
        .select(&["name"])
        .filter(Predicate::cmp("age", CompareOp::Gte, 18))
}

#[test]
fn csv_header_becomes_relation() {
    let dir = tempfile::tempdir().unwrap();
    people_csv(dir.path());
    let w = csv_wrapper(dir.path());
    let lcs = w.lcs();
    assert_eq!(lcs.role, SchemaRole::LCS);
    assert_eq!(lcs.provenance, vec!["s1".to_string()]);
    assert_eq!(lcs.relations.len(), 1);
    let people = &lcs.relations[0];
    assert_eq!(people.attribute_names(), vec!["id", "name", "age"]);
    assert_eq!(people.attributes[2].ty, AttributeType::Integer);
    assert!(crate::model::validate_schema(&lcs).is_empty());
}

#[test]
fn empty_directory_gives_empty_lcs() {
    let dir = tempfile::tempdir().unwrap();
    let w = csv_wrapper(dir.path());
    assert!(w.lcs().relations.is_empty());
    assert!(crate::model::validate_schema(&w.lcs()).is_empty());
}

#[test]
fn missing_directory_is_unreachable() {
    let err = Wrapper::new("w", Box::new(CsvDirectory::new("s", "/nonexistent/dir")))
        .err()
        .unwrap();
    assert_eq!(err.code(), "source-unreachable");
}

#[test]
fn untyped_csv_columns_are_inferred() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.csv", "a,b,c,d,e\n1,1.5,true,x,\n2,2,false,y,\n");
    let w = csv_wrapper(dir.path());
    let t = &w.lcs().relations[0];
    let types: Vec<_> = t.attributes.iter().map(|a| a.ty.clone()).collect();
    use AttributeType::*;
    assert_eq!(types, vec![Integer, Float, Boolean, String, String]);
    assert!(t.attributes[4].nullable);
    assert!(!t.attributes[0].nullable);
}

#[test]
fn csv_cell_of_wrong_type_is_unmappable() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.csv", "id:integer\n1\nx\n");
    let err = Wrapper::new("w", Box::new(CsvDirectory::new("s", dir.path())))
        .err()
        .unwrap();
    assert_eq!(err.code(), "unmappable-type");
    assert!(matches!(err, WrapperError::UnmappableType { ref field, .. } if field == "id"));
}

#[test]
fn lcs_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    people_csv(dir.path());
    let w = csv_wrapper(dir.path());
    let a = w.lcs();
    let b = w.refresh().unwrap();
    assert_eq!(*a, *b);
}

#[test]
fn adults_by_name() {
    let dir = tempfile::tempdir().unwrap();
    people_csv(dir.path());
    let w = csv_wrapper(dir.path());
    let r = w.execute_wrapped(&adults()).unwrap();
    assert_eq!(r.rows, vec![vec![Value::from("a")]]);
    assert_eq!(r.origin, "w1");
}

#[test]
fn removed_column_is_schema_drift() {
    let dir = tempfile::tempdir().unwrap();
    people_csv(dir.path());
    let w = csv_wrapper(dir.path());
    write(dir.path(), "people.csv", "id:integer,name:string\n1,a\n");
    let err = w.execute_wrapped(&adults()).unwrap_err();
    assert_eq!(err.code(), "schema-drift");
    // Never re-mapped behind the caller's back.
    assert_eq!(w.lcs().relations[0].attributes.len(), 3);
}

#[test]
fn removed_file_is_schema_drift() {
    let dir = tempfile::tempdir().unwrap();
    people_csv(dir.path());
    let w = csv_wrapper(dir.path());
    fs::remove_file(dir.path().join("people.csv")).unwrap();
    assert_eq!(w.execute_wrapped(&adults()).unwrap_err().code(), "schema-drift");
}

#[test]
fn limit_zero_keeps_header() {
    let dir = tempfile::tempdir().unwrap();
    people_csv(dir.path());
    let w = csv_wrapper(dir.path());
    let r = w
        .execute_wrapped(&CanonicalQuery::scan("people").select(&["age", "id"]).limit(0))
        .unwrap();
    assert!(r.rows.is_empty());
    assert_eq!(r.attribute_names(), vec!["age", "id"]);
}

#[test]
fn query_must_typecheck() {
    let dir = tempfile::tempdir().unwrap();
    people_csv(dir.path());
    let w = csv_wrapper(dir.path());
    let err = w
        .execute_wrapped(&CanonicalQuery::scan("people").filter(Predicate::cmp("age", CompareOp::Eq, "x")))
        .unwrap_err();
    assert_eq!(err.code(), "type-mismatch");
}

#[test]
fn jsonl_inference_and_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "people.jsonl",
        "{\"id\":1,\"name\":\"a\",\"score\":1.5,\"ok\":true}\n{\"id\":2,\"score\":2,\"ok\":false}\n",
    );
    let w = Wrapper::new("w", Box::new(JsonLinesDirectory::new("s", dir.path()))).unwrap();
    let people = &w.lcs().relations[0];
    assert_eq!(people.attribute("score").unwrap().ty, AttributeType::Float);
    assert_eq!(people.attribute("ok").unwrap().ty, AttributeType::Boolean);
    assert!(people.attribute("name").unwrap().nullable);
    let r = w
        .execute_wrapped(&CanonicalQuery::scan("people").select(&["id"]).filter(Predicate::cmp(
            "score",
            CompareOp::Gt,
            1.9,
        )))
        .unwrap();
    assert_eq!(r.rows, vec![vec![Value::Integer(2)]]);

    write(dir.path(), "bad.jsonl", "{\"age\":1}\n{\"age\":\"x\"}\n");
    let err = Wrapper::new("w", Box::new(JsonLinesDirectory::new("s", dir.path())))
        .err()
        .unwrap();
    assert_eq!(err.code(), "unmappable-type");
    assert!(err.to_string().contains("age"));
}

#[test]
fn jsonl_nested_first_row_is_unmappable() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.jsonl", "{\"tags\":[1]}\n");
    let err = Wrapper::new("w", Box::new(JsonLinesDirectory::new("s", dir.path())))
        .err()
        .unwrap();
    assert_eq!(err.code(), "unmappable-type");
}

#[test]
fn adapters_refuse_work_beyond_their_capabilities() {
    let dir = tempfile::tempdir().unwrap();
    people_csv(dir.path());
    let csv = CsvDirectory::new("s", dir.path());
    let relation = csv.read_schema_hints("people").unwrap();
    let err = csv
        .scan(
            &relation,
            &CanonicalQuery::scan("people").filter(Predicate::cmp("id", CompareOp::Eq, 1)),
        )
        .unwrap_err();
    assert_eq!(err.code(), "capability-violation");
}

#[test]
fn configs_open_each_kind() {
    let dir = tempfile::tempdir().unwrap();
    people_csv(dir.path());
    let config: AdapterConfig = serde_json::from_str(r#"{"kind":"csv","path":"."}"#).unwrap();
    let adapter = config.open("s", dir.path()).unwrap();
    assert_eq!(adapter.list_collections().unwrap(), vec!["people".to_string()]);

    let config: AdapterConfig = serde_json::from_value(serde_json::json!({
        "kind": "mem",
        "seed": {"tables": [{
            "name": "t",
            "attributes": [{"name": "x", "type": "float", "nullable": true}],
            "rows": [[1], [null], [2.5]]
        }]}
    }))
    .unwrap();
    let w = Wrapper::new("w", config.open("s", dir.path()).unwrap()).unwrap();
    let r = w.execute_wrapped(&CanonicalQuery::scan("t").limit(2)).unwrap();
    assert_eq!(r.rows, vec![vec![Value::Float(1.0)], vec![Value::Null]]);
}

#[test]
fn memory_store_drift() {
    let relation = |attrs: Vec<AttributeDef>| RelationDef::new("t", attrs);
    let mut db = Database::default();
    db.insert(Table::new(
        relation(vec![
            AttributeDef::new("a", AttributeType::Integer, false),
            AttributeDef::new("b", AttributeType::Integer, false),
        ]),
        vec![vec![1.into(), 2.into()]],
    ));
    let store = std::sync::Arc::new(MemoryStore::new("s", db));

    struct Shared(std::sync::Arc<MemoryStore>);
    impl SourceAdapter for Shared {
        fn source_id(&self) -> &str {
            self.0.source_id()
        }
        fn capabilities(&self) -> WrapperCapabilities {
            self.0.capabilities()
        }
        fn list_collections(&self) -> Result<Vec<String>, WrapperError> {
            self.0.list_collections()
        }
        fn read_schema_hints(&self, c: &str) -> Result<RelationDef, WrapperError> {
            self.0.read_schema_hints(c)
        }
        fn scan(&self, r: &RelationDef, q: &CanonicalQuery) -> Result<Vec<crate::model::Row>, WrapperError> {
            self.0.scan(r, q)
        }
    }

    let w = Wrapper::new("w", Box::new(Shared(store.clone()))).unwrap();
    assert_eq!(w.execute_wrapped(&CanonicalQuery::scan("t")).unwrap().rows.len(), 1);
    let mut db = Database::default();
    db.insert(Table::new(
        relation(vec![AttributeDef::new("a", AttributeType::Integer, false)]),
        vec![],
    ));
    store.replace(db);
    assert_eq!(
        w.execute_wrapped(&CanonicalQuery::scan("t")).unwrap_err().code(),
        "schema-drift"
    );
    w.refresh().unwrap();
    assert!(w.execute_wrapped(&CanonicalQuery::scan("t")).unwrap().rows.is_empty());
}

#[test]
fn narrowed_capabilities_still_agree_with_oracle() {
    let dir = tempfile::tempdir().unwrap();
    people_csv(dir.path());
    let mut db = Database::default();
    let csv = CsvDirectory::new("s", dir.path());
    let relation = csv.read_schema_hints("people").unwrap();
    let rows = csv.scan(&relation, &CanonicalQuery::scan("people")).unwrap();
    db.insert(Table::new(relation, rows));
    let q = adults().limit(1);
    let expected = db.evaluate(&q).unwrap();
    let w = Wrapper::new("w", Box::new(MemoryStore::new("s", db)))
        .unwrap()
        .with_capabilities(&WrapperCapabilities::new(true, [CompareOp::Eq], false, true));
    assert!(!w.capabilities().supports_projection);
    assert!(w.execute_wrapped(&q).unwrap().same_content(&expected));
}
