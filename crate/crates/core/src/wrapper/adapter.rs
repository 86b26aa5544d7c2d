use std::fs;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::native::{compile, output_relation, projection_columns};
use super::{WrapperCapabilities, WrapperError};
use crate::model::{AttributeDef, AttributeType, CanonicalQuery, CompareOp, Database, RelationDef, Row, Table, Value};

/// The three operations a data source must offer to be wrapped.
pub trait SourceAdapter: Send + Sync {
    fn source_id(&self) -> &str;

    /// What the source evaluates natively.
    fn capabilities(&self) -> WrapperCapabilities;

    fn list_collections(&self) -> Result<Vec<String>, WrapperError>;

    /// Native description of one collection, mapped to a relation.
    fn read_schema_hints(&self, collection: &str) -> Result<RelationDef, WrapperError>;

    /// Rows of `relation` after `native` is applied, laid out as its
    /// projection. Fails with [`WrapperError::SourceMismatch`] when the stored
    /// collection no longer has the shape of `relation`.
    fn scan(&self, relation: &RelationDef, native: &CanonicalQuery) -> Result<Vec<Row>, WrapperError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdapterKind {
    Csv,
    Jsonl,
    Mem,
}

/// `{"kind":"csv"|"jsonl"|"mem","path":...,"seed":...}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterConfig {
    pub kind: AdapterKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// For `mem`: an inline seed document or a path to one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<serde_json::Value>,
}

impl AdapterConfig {
    pub fn mem_empty() -> Self {
        AdapterConfig {
            kind: AdapterKind::Mem,
            path: None,
            seed: None,
        }
    }

    /// Opens the adapter, resolving relative paths against `base_dir`.
    pub fn open(&self, source_id: &str, base_dir: &Path) -> Result<Box<dyn SourceAdapter>, WrapperError> {
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        match self.kind {
            AdapterKind::Csv | AdapterKind::Jsonl => {
                let path = self
                    .path
                    .as_deref()
                    .ok_or_else(|| WrapperError::SourceUnreachable(format!("source `{source_id}` has no path")))?;
                let path = resolve(path);
                Ok(if self.kind == AdapterKind::Csv {
                    Box::new(CsvDirectory::new(source_id, path))
                } else {
                    Box::new(JsonLinesDirectory::new(source_id, path))
                })
            }
            AdapterKind::Mem => {
                let seed = match (&self.seed, &self.path) {
                    (Some(serde_json::Value::String(p)), _) => read_seed_file(&resolve(Path::new(p)))?,
                    (Some(inline), _) => serde_json::from_value(inline.clone())
                        .map_err(|e| WrapperError::MalformedSource(format!("seed: {e}")))?,
                    (None, Some(p)) => read_seed_file(&resolve(p))?,
                    (None, None) => Seed::default(),
                };
                Ok(Box::new(MemoryStore::new(source_id, seed.into_database()?)))
            }
        }
    }
}

fn read_seed_file(path: &Path) -> Result<Seed, WrapperError> {
    let text =
        fs::read_to_string(path).map_err(|e| WrapperError::SourceUnreachable(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| WrapperError::MalformedSource(format!("{}: {e}", path.display())))
}

/// Seed document of an in-memory store.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Seed {
    #[serde(default)]
    pub tables: Vec<SeedTable>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedTable {
    pub name: String,
    pub attributes: Vec<AttributeDef>,
    #[serde(default)]
    pub rows: Vec<Row>,
}

impl Seed {
    pub fn into_database(self) -> Result<Database, WrapperError> {
        let mut db = Database::default();
        for t in self.tables {
            let relation = RelationDef::new(t.name, t.attributes);
            let mut rows = Vec::with_capacity(t.rows.len());
            for row in t.rows {
                if row.len() != relation.attributes.len() {
                    return Err(WrapperError::MalformedSource(format!(
                        "seed row of `{}` has {} values, expected {}",
                        relation.name,
                        row.len(),
                        relation.attributes.len()
                    )));
                }
                let row = row
                    .into_iter()
                    .zip(&relation.attributes)
                    .map(|(v, a)| {
                        v.coerce_to(&a.ty)
                            .or(v.is_null().then_some(Value::Null))
                            .ok_or_else(|| WrapperError::UnmappableType {
                                collection: relation.name.clone(),
                                field: a.name.clone(),
                                detail: format!("value `{v}` is not {}", a.ty),
                            })
                    })
                    .collect::<Result<Row, _>>()?;
                rows.push(row);
            }
            db.insert(Table::new(relation, rows));
        }
        Ok(db)
    }

    pub fn from_database(db: &Database) -> Seed {
        Seed {
            tables: db
                .tables
                .values()
                .map(|t| SeedTable {
                    name: t.relation.name.clone(),
                    attributes: t.relation.attributes.clone(),
                    rows: t.rows.clone(),
                })
                .collect(),
        }
    }
}

fn check_caps(caps: &WrapperCapabilities, source: &str, native: &CanonicalQuery) -> Result<(), WrapperError> {
    if caps.admits(native) {
        Ok(())
    } else {
        Err(WrapperError::CapabilityViolation(format!(
            "source `{source}` cannot evaluate {}",
            serde_json::to_string(native).unwrap_or_default()
        )))
    }
}

fn same_shape(a: &RelationDef, b: &RelationDef) -> bool {
    a.name == b.name
        && a.attributes.len() == b.attributes.len()
        && a.attributes
            .iter()
            .zip(&b.attributes)
            .all(|(x, y)| x.name == y.name && x.ty == y.ty)
}

fn read_collection(dir: &Path, path: &Path) -> Result<String, WrapperError> {
    fs::read_to_string(path).map_err(|e| {
        if dir.is_dir() && e.kind() == std::io::ErrorKind::NotFound {
            WrapperError::SourceMismatch(format!("{} no longer exists", path.display()))
        } else {
            WrapperError::SourceUnreachable(format!("{}: {e}", path.display()))
        }
    })
}

fn list_with_extension(dir: &Path, ext: &str) -> Result<Vec<String>, WrapperError> {
    let entries = fs::read_dir(dir).map_err(|e| WrapperError::SourceUnreachable(format!("{}: {e}", dir.display())))?;
    let mut names = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| WrapperError::SourceUnreachable(e.to_string()))?
            .path();
        if path.is_file() && path.extension().is_some_and(|x| x == ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                names.push(stem.to_string());
            }
        }
    }
    names.sort();
    Ok(names)
}

/// Directory of CSV files, one relation per file.
///
/// The header holds `name:type` per column; a column without a type tag has
/// its type inferred from the data. Empty cells are nulls. Natively supports
/// projection only.
pub struct CsvDirectory {
    id: String,
    dir: PathBuf,
}

impl CsvDirectory {
    pub fn new(id: impl Into<String>, dir: impl Into<PathBuf>) -> Self {
        CsvDirectory {
            id: id.into(),
            dir: dir.into(),
        }
    }

    fn read(&self, collection: &str) -> Result<(RelationDef, Vec<Vec<String>>), WrapperError> {
        let path = self.dir.join(format!("{collection}.csv"));
        let text = read_collection(&self.dir, &path)?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().unwrap_or("");
        let columns: Vec<(String, Option<AttributeType>)> = if header.is_empty() {
            Vec::new()
        } else {
            header
                .split(',')
                .map(|cell| match cell.split_once(':') {
                    Some((name, ty)) => (name.trim().to_string(), Some(AttributeType::parse(ty.trim()))),
                    None => (cell.trim().to_string(), None),
                })
                .collect()
        };
        let cells: Vec<Vec<String>> = lines.map(|l| l.split(',').map(|c| c.to_string()).collect()).collect();
        for (i, row) in cells.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(WrapperError::MalformedSource(format!(
                    "{}: line {} has {} cells, header has {}",
                    path.display(),
                    i + 2,
                    row.len(),
                    columns.len()
                )));
            }
        }
        let mut attributes = Vec::with_capacity(columns.len());
        for (j, (name, declared)) in columns.into_iter().enumerate() {
            let column = cells.iter().map(|r| r[j].as_str());
            let ty = match declared {
                Some(AttributeType::Unknown(t)) => {
                    return Err(WrapperError::UnmappableType {
                        collection: collection.to_string(),
                        field: name,
                        detail: format!("unknown type tag `{t}`"),
                    })
                }
                Some(t) => t,
                None => infer_text_type(column.clone()),
            };
            let nullable = column.clone().any(|c| c.is_empty());
            for cell in column {
                parse_cell(cell, &ty).map_err(|detail| WrapperError::UnmappableType {
                    collection: collection.to_string(),
                    field: name.clone(),
                    detail,
                })?;
            }
            attributes.push(AttributeDef::new(name, ty, nullable));
        }
        Ok((RelationDef::new(collection, attributes), cells))
    }
}

/// Integers stay integers, numbers with a decimal point become floats,
/// `true`/`false` become booleans, everything else is a string.
fn infer_text_type<'a>(cells: impl Iterator<Item = &'a str> + Clone) -> AttributeType {
    let values: Vec<&str> = cells.filter(|c| !c.is_empty()).collect();
    if values.is_empty() {
        AttributeType::String
    } else if values.iter().all(|c| c.parse::<i64>().is_ok()) {
        AttributeType::Integer
    } else if values
        .iter()
        .all(|c| c.parse::<f64>().is_ok() && c.contains('.') || c.parse::<i64>().is_ok())
    {
        AttributeType::Float
    } else if values.iter().all(|c| *c == "true" || *c == "false") {
        AttributeType::Boolean
    } else {
        AttributeType::String
    }
}

fn parse_cell(cell: &str, ty: &AttributeType) -> Result<Value, String> {
    if cell.is_empty() {
        return Ok(Value::Null);
    }
    let bad = || format!("`{cell}` is not {ty}");
    match ty {
        AttributeType::String => Ok(Value::String(cell.to_string())),
        AttributeType::Integer => cell.parse().map(Value::Integer).map_err(|_| bad()),
        AttributeType::Float => cell.parse().map(Value::Float).map_err(|_| bad()),
        AttributeType::Boolean => match cell {
            "true" => Ok(Value::Boolean(true)),
            "false" => Ok(Value::Boolean(false)),
            _ => Err(bad()),
        },
        AttributeType::Unknown(_) => Err(bad()),
    }
}

impl SourceAdapter for CsvDirectory {
    fn source_id(&self) -> &str {
        &self.id
    }

    fn capabilities(&self) -> WrapperCapabilities {
        WrapperCapabilities::new(false, [], true, false)
    }

    fn list_collections(&self) -> Result<Vec<String>, WrapperError> {
        list_with_extension(&self.dir, "csv")
    }

    fn read_schema_hints(&self, collection: &str) -> Result<RelationDef, WrapperError> {
        self.read(collection).map(|(r, _)| r)
    }

    fn scan(&self, relation: &RelationDef, native: &CanonicalQuery) -> Result<Vec<Row>, WrapperError> {
        check_caps(&self.capabilities(), &self.id, native)?;
        let (stored, cells) = self.read(&relation.name).map_err(|e| match e {
            WrapperError::SourceUnreachable(_) => e,
            other => WrapperError::SourceMismatch(other.to_string()),
        })?;
        if !same_shape(&stored, relation) {
            return Err(WrapperError::SourceMismatch(format!(
                "`{}` changed shape",
                relation.name
            )));
        }
        let columns = projection_columns(native, relation)?;
        cells
            .iter()
            .map(|row| {
                columns
                    .iter()
                    .map(|&j| parse_cell(&row[j], &relation.attributes[j].ty).map_err(WrapperError::SourceMismatch))
                    .collect()
            })
            .collect()
    }
}

/// Directory of JSON-lines files, one relation per file. Field order and
/// types come from the first row. Natively supports `eq` selection and
/// projection.
pub struct JsonLinesDirectory {
    id: String,
    dir: PathBuf,
}

impl JsonLinesDirectory {
    pub fn new(id: impl Into<String>, dir: impl Into<PathBuf>) -> Self {
        JsonLinesDirectory {
            id: id.into(),
            dir: dir.into(),
        }
    }

    fn read(
        &self,
        collection: &str,
    ) -> Result<(RelationDef, Vec<serde_json::Map<String, serde_json::Value>>), WrapperError> {
        let path = self.dir.join(format!("{collection}.jsonl"));
        let text = read_collection(&self.dir, &path)?;
        let mut objects = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<serde_json::Value>(line) {
                Ok(serde_json::Value::Object(o)) => objects.push(o),
                Ok(_) => {
                    return Err(WrapperError::MalformedSource(format!(
                        "{}: line {} is not an object",
                        path.display(),
                        i + 1
                    )))
                }
                Err(e) => {
                    return Err(WrapperError::MalformedSource(format!(
                        "{}: line {}: {e}",
                        path.display(),
                        i + 1
                    )))
                }
            }
        }
        let unmappable = |field: &str, detail: String| WrapperError::UnmappableType {
            collection: collection.to_string(),
            field: field.to_string(),
            detail,
        };
        let mut attributes = Vec::new();
        if let Some(first) = objects.first() {
            for (name, v) in first {
                let ty = match v {
                    serde_json::Value::Bool(_) => AttributeType::Boolean,
                    serde_json::Value::Number(n) if n.is_i64() => AttributeType::Integer,
                    serde_json::Value::Number(_) => AttributeType::Float,
                    serde_json::Value::String(_) => AttributeType::String,
                    other => return Err(unmappable(name, format!("cannot infer a type from `{other}`"))),
                };
                attributes.push(AttributeDef::new(name.clone(), ty, false));
            }
        }
        for (i, object) in objects.iter().enumerate() {
            for name in object.keys() {
                if !attributes.iter().any(|a| &a.name == name) {
                    return Err(unmappable(
                        name,
                        format!("row {} has a field absent from the first row", i + 1),
                    ));
                }
            }
            for a in attributes.iter_mut() {
                match object.get(&a.name) {
                    None | Some(serde_json::Value::Null) => a.nullable = true,
                    Some(v) => {
                        json_to_value(v, &a.ty)
                            .map_err(|detail| unmappable(&a.name, format!("row {}: {detail}", i + 1)))?;
                    }
                }
            }
        }
        Ok((RelationDef::new(collection, attributes), objects))
    }
}

fn json_to_value(v: &serde_json::Value, ty: &AttributeType) -> Result<Value, String> {
    use serde_json::Value as J;
    match (v, ty) {
        (J::Null, _) => Ok(Value::Null),
        (J::Bool(b), AttributeType::Boolean) => Ok(Value::Boolean(*b)),
        (J::Number(n), AttributeType::Integer) if n.is_i64() => Ok(Value::Integer(n.as_i64().unwrap())),
        (J::Number(n), AttributeType::Float) => Ok(Value::Float(n.as_f64().unwrap())),
        (J::String(s), AttributeType::String) => Ok(Value::String(s.clone())),
        (other, ty) => Err(format!("`{other}` conflicts with inferred type {ty}")),
    }
}

impl SourceAdapter for JsonLinesDirectory {
    fn source_id(&self) -> &str {
        &self.id
    }

    fn capabilities(&self) -> WrapperCapabilities {
        WrapperCapabilities::new(true, [CompareOp::Eq], true, false)
    }

    fn list_collections(&self) -> Result<Vec<String>, WrapperError> {
        list_with_extension(&self.dir, "jsonl")
    }

    fn read_schema_hints(&self, collection: &str) -> Result<RelationDef, WrapperError> {
        self.read(collection).map(|(r, _)| r)
    }

    fn scan(&self, relation: &RelationDef, native: &CanonicalQuery) -> Result<Vec<Row>, WrapperError> {
        check_caps(&self.capabilities(), &self.id, native)?;
        let (stored, objects) = self.read(&relation.name).map_err(|e| match e {
            WrapperError::SourceUnreachable(_) => e,
            other => WrapperError::SourceMismatch(other.to_string()),
        })?;
        if !same_shape(&stored, relation) {
            return Err(WrapperError::SourceMismatch(format!(
                "`{}` changed shape",
                relation.name
            )));
        }
        let filter = native.selection.as_ref().map(|p| compile(p, relation)).transpose()?;
        let columns = projection_columns(native, relation)?;
        let mut out = Vec::new();
        for object in &objects {
            let row: Row = relation
                .attributes
                .iter()
                .map(|a| {
                    object
                        .get(&a.name)
                        .map(|v| json_to_value(v, &a.ty))
                        .unwrap_or(Ok(Value::Null))
                        .map_err(WrapperError::SourceMismatch)
                })
                .collect::<Result<_, _>>()?;
            if filter.as_ref().is_none_or(|f| f(&row)) {
                out.push(columns.iter().map(|&j| row[j].clone()).collect());
            }
        }
        Ok(out)
    }
}

/// In-memory store with full native query support.
pub struct MemoryStore {
    id: String,
    data: RwLock<Database>,
}

impl MemoryStore {
    pub fn new(id: impl Into<String>, data: Database) -> Self {
        MemoryStore {
            id: id.into(),
            data: RwLock::new(data),
        }
    }

    /// Replaces the stored contents, e.g. to simulate a schema change.
    pub fn replace(&self, data: Database) {
        *self.data.write().unwrap() = data;
    }
}

impl SourceAdapter for MemoryStore {
    fn source_id(&self) -> &str {
        &self.id
    }

    fn capabilities(&self) -> WrapperCapabilities {
        WrapperCapabilities::all()
    }

    fn list_collections(&self) -> Result<Vec<String>, WrapperError> {
        Ok(self.data.read().unwrap().tables.keys().cloned().collect())
    }

    fn read_schema_hints(&self, collection: &str) -> Result<RelationDef, WrapperError> {
        self.data
            .read()
            .unwrap()
            .tables
            .get(collection)
            .map(|t| t.relation.clone())
            .ok_or_else(|| WrapperError::SourceUnreachable(format!("no collection `{collection}`")))
    }

    fn scan(&self, relation: &RelationDef, native: &CanonicalQuery) -> Result<Vec<Row>, WrapperError> {
        let data = self.data.read().unwrap();
        let table = data
            .tables
            .get(&relation.name)
            .ok_or_else(|| WrapperError::SourceMismatch(format!("`{}` is gone", relation.name)))?;
        if !same_shape(&table.relation, relation) {
            return Err(WrapperError::SourceMismatch(format!(
                "`{}` changed shape",
                relation.name
            )));
        }
        let filter = native.selection.as_ref().map(|p| compile(p, relation)).transpose()?;
        let columns = projection_columns(native, relation)?;
        let limit = native.limit.map_or(usize::MAX, |n| n as usize);
        Ok(table
            .rows
            .iter()
            .filter(|row| filter.as_ref().is_none_or(|f| f(row)))
            .take(limit)
            .map(|row| columns.iter().map(|&j| row[j].clone()).collect())
            .collect())
    }
}

pub(crate) fn native_output(relation: &RelationDef, native: &CanonicalQuery) -> Result<RelationDef, WrapperError> {
    Ok(output_relation(relation, &projection_columns(native, relation)?))
}
