//! Wrapper answers against the reference evaluator, per adapter kind.

use std::fs;

use mmw_core::model::{CanonicalQuery, Database, Table};
use mmw_core::wrapper::{CsvDirectory, JsonLinesDirectory, MemoryStore, SourceAdapter, Wrapper, WrapperCapabilities};
use proptest::prelude::*;

use super::{caps, csv_text, jsonl_text, people_relation, query, table_of};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Memory,
    Csv,
    Jsonl,
}

impl SourceKind {
    pub const ALL: [SourceKind; 3] = [SourceKind::Memory, SourceKind::Csv, SourceKind::Jsonl];
}

pub type PushdownCase = (Table, CanonicalQuery, WrapperCapabilities);

/// Up to 50 rows, a random query and a random capability set.
pub fn pushdown_case(kind: SourceKind) -> BoxedStrategy<PushdownCase> {
    let tables = table_of(people_relation("people"), 50);
    let tables = if kind == SourceKind::Jsonl {
        tables
            .prop_filter("types come from the first row", |t| !t.rows.is_empty())
            .boxed()
    } else {
        tables.boxed()
    };
    (
        tables.prop_flat_map(|t| {
            let q = query(&t.relation);
            (Just(t), q)
        }),
        caps(),
    )
        .prop_map(|((t, q), c)| (t, q, c))
        .boxed()
}

pub fn check_pushdown(kind: SourceKind, (table, query, caps): &PushdownCase) -> Result<(), TestCaseError> {
    let dir = tempfile::tempdir().unwrap();
    let adapter: Box<dyn SourceAdapter> = match kind {
        SourceKind::Memory => {
            let mut db = Database::default();
            db.insert(table.clone());
            Box::new(MemoryStore::new("s", db))
        }
        SourceKind::Csv => {
            fs::write(dir.path().join("people.csv"), csv_text(table)).unwrap();
            Box::new(CsvDirectory::new("s", dir.path()))
        }
        SourceKind::Jsonl => {
            fs::write(dir.path().join("people.jsonl"), jsonl_text(table)).unwrap();
            Box::new(JsonLinesDirectory::new("s", dir.path()))
        }
    };
    let mut db = Database::default();
    db.insert(table.clone());
    let expected = db.evaluate(query).unwrap();
    let wrapper = Wrapper::new("w", adapter).unwrap().with_capabilities(caps);
    let plan = wrapper.plan(query).unwrap();
    prop_assert!(wrapper.capabilities().admits(&plan.native_query));
    let actual = wrapper.execute_wrapped(query).unwrap();
    prop_assert_eq!(&actual.attributes, &expected.attributes);
    prop_assert_eq!(&actual.rows, &expected.rows);
    prop_assert_eq!(actual.origin, "w");
    Ok(())
}
