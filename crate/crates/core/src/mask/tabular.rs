//! Tabular mask kind for terminals: a small SELECT dialect in, aligned text
//! or CSV out.
//!
//! `select a, b from rel [where a >= 18 and b like 'x%'] [limit n]`

use serde::{Deserialize, Serialize};

use super::{
    MaskError, MaskInterface, MaskKind, MaskedDocument, MaskedQuery, MaskedResult, MaskedSchema, QueryTranslator,
    ResultTranslator, SchemaTranslator,
};
use crate::model::{CanonicalQuery, CanonicalResult, CanonicalSchema, CompareOp, Predicate, SchemaMapping, Value};

pub const KIND: &str = "tabular";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TabularFormat {
    #[default]
    Table,
    Csv,
}

impl std::str::FromStr for TabularFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(TabularFormat::Table),
            "csv" => Ok(TabularFormat::Csv),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TabularKind {
    mapping: SchemaMapping,
    format: TabularFormat,
}

impl TabularKind {
    pub fn new(mapping: SchemaMapping, format: TabularFormat) -> Self {
        TabularKind { mapping, format }
    }
}

pub fn masked_select(text: &str) -> MaskedQuery {
    MaskedDocument::new(KIND, "text/plain", text)
}

impl MaskKind for TabularKind {
    fn kind(&self) -> &'static str {
        KIND
    }

    fn mapping(&self) -> &SchemaMapping {
        &self.mapping
    }
}

impl SchemaTranslator for TabularKind {
    fn translate_schema(&self, masked: &CanonicalSchema) -> Result<MaskedSchema, MaskError> {
        let mut out = String::new();
        for r in &masked.relations {
            out += &format!("{}\n", r.name);
            let width = r.attributes.iter().map(|a| a.name.len()).max().unwrap_or(0);
            for a in &r.attributes {
                let line = format!(
                    "  {:width$}  {:7}{}",
                    a.name,
                    a.ty.as_str(),
                    if a.nullable { "  nullable" } else { "" }
                );
                out += line.trim_end();
                out.push('\n');
            }
        }
        out += &format!(
            "({} relation{})\n",
            masked.relations.len(),
            plural(masked.relations.len())
        );
        Ok(MaskedDocument::new(KIND, "text/plain", out))
    }
}

fn plural(n: usize) -> &'static str {
    if n == 1 {
        ""
    } else {
        "s"
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Str(String),
    Num(String),
    Sym(&'static str),
}

fn malformed(detail: impl Into<String>) -> MaskError {
    MaskError::query("malformed-masked-query", detail)
}

fn tokenize(text: &str) -> Result<Vec<Token>, MaskError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '\'' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(malformed("unterminated string literal")),
                    Some('\'') if chars.get(i + 1) == Some(&'\'') => {
                        s.push('\'');
                        i += 2;
                    }
                    Some('\'') => {
                        i += 1;
                        break;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            tokens.push(Token::Str(s));
        } else if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            i += 1;
            while i < chars.len()
                && (chars[i].is_ascii_digit() || chars[i] == '.' || chars[i] == 'e' || chars[i] == 'E')
            {
                i += 1;
            }
            tokens.push(Token::Num(chars[start..i].iter().collect()));
        } else if c.is_alphanumeric() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            tokens.push(Token::Word(chars[start..i].iter().collect()));
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let sym = match two.as_str() {
                "<=" => Some("<="),
                ">=" => Some(">="),
                "!=" => Some("!="),
                "<>" => Some("!="),
                _ => None,
            };
            if let Some(sym) = sym {
                tokens.push(Token::Sym(sym));
                i += 2;
                continue;
            }
            let sym = match c {
                ',' => ",",
                '*' => "*",
                '=' => "=",
                '<' => "<",
                '>' => ">",
                ';' => ";",
                other => return Err(malformed(format!("unexpected character `{other}`"))),
            };
            tokens.push(Token::Sym(sym));
            i += 1;
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn keyword(&mut self, kw: &str) -> bool {
        match self.peek() {
            Some(Token::Word(w)) if w.eq_ignore_ascii_case(kw) => {
                self.pos += 1;
                true
            }
            _ => false,
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), MaskError> {
        if self.keyword(kw) {
            Ok(())
        } else {
            Err(malformed(format!("expected `{kw}`")))
        }
    }

    fn symbol(&mut self, sym: &str) -> bool {
        match self.peek() {
            Some(Token::Sym(s)) if *s == sym => {
                self.pos += 1;
                true
            }
            _ => false,
        }
    }

    fn identifier(&mut self) -> Result<String, MaskError> {
        match self.next() {
            Some(Token::Word(w)) => Ok(w),
            other => Err(malformed(format!("expected a name, found {other:?}"))),
        }
    }

    fn literal(&mut self) -> Result<Value, MaskError> {
        match self.next() {
            Some(Token::Str(s)) => Ok(Value::String(s)),
            Some(Token::Num(n)) => {
                if let Ok(i) = n.parse::<i64>() {
                    Ok(Value::Integer(i))
                } else {
                    n.parse::<f64>()
                        .map(Value::Float)
                        .map_err(|_| malformed(format!("bad number `{n}`")))
                }
            }
            Some(Token::Word(w)) if w.eq_ignore_ascii_case("true") => Ok(Value::Boolean(true)),
            Some(Token::Word(w)) if w.eq_ignore_ascii_case("false") => Ok(Value::Boolean(false)),
            other => Err(malformed(format!("expected a literal, found {other:?}"))),
        }
    }

    fn op(&mut self) -> Result<CompareOp, MaskError> {
        Ok(match self.next() {
            Some(Token::Sym("=")) => CompareOp::Eq,
            Some(Token::Sym("!=")) => CompareOp::Neq,
            Some(Token::Sym("<")) => CompareOp::Lt,
            Some(Token::Sym("<=")) => CompareOp::Lte,
            Some(Token::Sym(">")) => CompareOp::Gt,
            Some(Token::Sym(">=")) => CompareOp::Gte,
            Some(Token::Word(w)) if w.eq_ignore_ascii_case("like") => CompareOp::Like,
            other => return Err(malformed(format!("expected an operator, found {other:?}"))),
        })
    }
}

/// Parses the dialect into a query over masked names.
pub fn parse_select(text: &str) -> Result<CanonicalQuery, MaskError> {
    let mut p = Parser {
        tokens: tokenize(text)?,
        pos: 0,
    };
    p.expect_keyword("select")?;
    let mut projection = Vec::new();
    if !p.symbol("*") {
        loop {
            projection.push(p.identifier()?);
            if !p.symbol(",") {
                break;
            }
        }
    }
    p.expect_keyword("from")?;
    let mut query = CanonicalQuery::scan(p.identifier()?);
    query.projection = projection;
    if p.keyword("where") {
        let mut conjuncts = Vec::new();
        loop {
            let field = p.identifier()?;
            let op = p.op()?;
            conjuncts.push(Predicate::cmp(field, op, p.literal()?));
            if !p.keyword("and") {
                break;
            }
        }
        query.selection = Predicate::conjoin(conjuncts);
    }
    if p.keyword("limit") {
        match p.next() {
            Some(Token::Num(n)) => query.limit = Some(n.parse().map_err(|_| malformed(format!("bad limit `{n}`")))?),
            other => return Err(malformed(format!("expected a limit, found {other:?}"))),
        }
    }
    p.symbol(";");
    if let Some(t) = p.peek() {
        return Err(malformed(format!("unexpected {t:?}")));
    }
    Ok(query)
}

impl QueryTranslator for TabularKind {
    fn translate_query(&self, query: &MaskedQuery, _masked: &CanonicalSchema) -> Result<CanonicalQuery, MaskError> {
        let text = std::str::from_utf8(&query.payload).map_err(|_| malformed("query is not UTF-8"))?;
        parse_select(text)
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => "NULL".to_string(),
        other => other.to_string(),
    }
}

pub fn render_table(result: &CanonicalResult) -> String {
    let header: Vec<String> = result.attributes.iter().map(|a| a.name.clone()).collect();
    let body: Vec<Vec<String>> = result.rows.iter().map(|r| r.iter().map(cell).collect()).collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|j| {
            body.iter()
                .map(|r| r[j].chars().count())
                .chain([header[j].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}", w = *w))
            .collect();
        padded.join(" | ").trim_end().to_string() + "\n"
    };
    let mut out = line(&header);
    out += &widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-");
    out.push('\n');
    for row in &body {
        out += &line(row);
    }
    out += &format!("({} row{})\n", body.len(), plural(body.len()));
    out
}

pub fn render_csv(result: &CanonicalResult) -> Result<String, MaskError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| MaskError::new(super::Stage::Result, "render-failure", e.to_string());
    w.write_record(result.attributes.iter().map(|a| a.name.as_str()))
        .map_err(fail)?;
    for row in &result.rows {
        w.write_record(
            row.iter()
                .map(|v| if v.is_null() { String::new() } else { v.to_string() }),
        )
        .map_err(fail)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| MaskError::new(super::Stage::Result, "render-failure", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output of UTF-8 input"))
}

impl ResultTranslator for TabularKind {
    fn translate_result(&self, result: &CanonicalResult) -> Result<MaskedResult, MaskError> {
        Ok(match self.format {
            TabularFormat::Table => MaskedDocument::new(KIND, "text/plain", render_table(result)),
            TabularFormat::Csv => MaskedDocument::new(KIND, "text/csv", render_csv(result)?),
        })
    }
}

/// What the tabular mask application was asked to do.
#[derive(Debug, Clone, Default)]
pub struct TabularRequest {
    pub query: Option<String>,
    pub schema: bool,
}

/// The tabular mask application: prints the catalog and/or one query result.
pub async fn run_app(mask: &MaskInterface, request: &TabularRequest) -> Result<String, MaskError> {
    let mut out = String::new();
    if request.schema {
        out += &mask.get_masked_schema().await?.text();
    }
    if let Some(q) = &request.query {
        out += &mask.run(&mask.masked_query(q)).await?.text();
    }
    Ok(out)
}

/// Request line that asks for the catalog instead of a query.
pub const SCHEMA_LINE: &str = "\\schema";

/// One request line per connection: [`SCHEMA_LINE`] or a SELECT. The reply
/// is the rendered output, or `error: <code> (<stage>): <detail>`.
pub struct LineServer {
    pub addr: std::net::SocketAddr,
    task: tokio::task::JoinHandle<()>,
}

impl LineServer {
    pub fn shutdown(&self) {
        self.task.abort();
    }
}

impl Drop for LineServer {
    fn drop(&mut self) {
        self.task.abort();
    }
}

async fn answer_line(mask: &MaskInterface, line: &str) -> String {
    let line = line.trim();
    let request = if line == SCHEMA_LINE {
        TabularRequest {
            query: None,
            schema: true,
        }
    } else {
        TabularRequest {
            query: Some(line.to_string()),
            schema: false,
        }
    };
    match run_app(mask, &request).await {
        Ok(text) => text,
        Err(e) => format!("error: {} ({}): {}\n", e.code, e.stage, e.detail),
    }
}

pub async fn serve_lines(mask: MaskInterface, addr: &str) -> std::io::Result<LineServer> {
    use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};

    let listener = tokio::net::TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let task = tokio::spawn(async move {
        let mut connections = tokio::task::JoinSet::new();
        while let Ok((stream, _)) = listener.accept().await {
            let mask = mask.clone();
            connections.spawn(async move {
                let (read, mut write) = stream.into_split();
                let mut line = String::new();
                if BufReader::new(read).read_line(&mut line).await.is_ok() {
                    let reply = answer_line(&mask, &line).await;
                    let _ = write.write_all(reply.as_bytes()).await;
                    let _ = write.shutdown().await;
                }
            });
        }
    });
    Ok(LineServer { addr, task })
}

/// Client side of [`serve_lines`].
pub async fn request_line(addr: &str, line: &str) -> std::io::Result<String> {
    use tokio::io::{AsyncReadExt, AsyncWriteExt};

    let mut stream = tokio::net::TcpStream::connect(addr).await?;
    stream.write_all(line.trim_end().as_bytes()).await?;
    stream.write_all(b"\n").await?;
    let mut reply = String::new();
    stream.read_to_string(&mut reply).await?;
    Ok(reply)
}
