//! Text-extracted statement tables: block location, value-column selection
//! with fallbacks, and line-item extraction.
//!
//! Document format (UTF-8, tab-separated cells):
//!
//! ```text
//! ===PAGE 45===
//! #STATEMENT IS
//! #UNITS 万元
//! 项目	2023年	2022年
//! 营业收入	1,234	1,100
//! ```
//!
//! A block starts at `#STATEMENT` and runs to the next `#STATEMENT` or EOF.
//! The first non-directive line of a block is its header row.

mod number;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use number::{normalize_number, numeric_tokens, NumericCell, UnitScale};

use crate::anomaly::{Anomaly, AnomalyKind};
use crate::ontology::Statement;
use crate::package::{ContextPackage, Evidence, StatementBoundary, TextSpan};

/// Header keywords that mark the current-period column.
pub const DEFAULT_PERIOD_KEYWORDS: &[&str] = &["本期", "本年", "期末", "当期", "Current"];

/// Minimum share of numeric cells for the fallback column rule.
pub const NUMERIC_RATE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error("malformed table document (line {line}): {message}")]
    MalformedTableDoc { line: usize, message: String },
    #[error("table has no value columns")]
    NoValueColumn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StatementHint {
    IS,
    BS,
    CF,
    #[serde(rename = "unknown")]
    Unknown,
}

impl StatementHint {
    fn parse(token: &str) -> Self {
        match token {
            "IS" => StatementHint::IS,
            "BS" => StatementHint::BS,
            "CF" => StatementHint::CF,
            _ => StatementHint::Unknown,
        }
    }

    pub fn statement(self) -> Option<Statement> {
        match self {
            StatementHint::IS => Some(Statement::IS),
            StatementHint::BS => Some(Statement::BS),
            StatementHint::CF => Some(Statement::CF),
            StatementHint::Unknown => None,
        }
    }
}

impl fmt::Display for StatementHint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.statement() {
            Some(s) => write!(f, "{s}"),
            None => f.write_str("unknown"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    /// Value cells, excluding the label cell.
    pub cells: Vec<String>,
    pub page: u32,
    /// 1-based line number in the document.
    pub line: usize,
    pub span: TextSpan,
}

impl TableRow {
    pub fn cell(&self, column: usize) -> &str {
        self.cells.get(column).map(String::as_str).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTable {
    pub statement_hint: StatementHint,
    pub page_range: (u32, u32),
    /// Full header including the label column.
    pub header: Vec<String>,
    pub header_span: TextSpan,
    pub rows: Vec<TableRow>,
    pub unit_scale: UnitScale,
    /// False when the block had no `#UNITS` directive.
    pub units_declared: bool,
}

impl RawTable {
    /// Number of value columns, ignoring trailing columns that are blank in
    /// the header and in every row.
    pub fn value_column_count(&self) -> usize {
        let mut n = self.header.len().saturating_sub(1);
        while n > 0 {
            let col = n - 1;
            let blank_header = self.header[col + 1].trim().is_empty();
            let blank_cells = self.rows.iter().all(|r| r.cell(col).trim().is_empty());
            if blank_header && blank_cells {
                n -= 1;
            } else {
                break;
            }
        }
        n
    }

    pub fn value_header(&self, column: usize) -> &str {
        self.header.get(column + 1).map(String::as_str).unwrap_or("")
    }
}

/// A block that could not be parsed, kept so the caller can isolate it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrokenBlock {
    pub statement_hint: StatementHint,
    pub line: usize,
    /// Bytes from the `#STATEMENT` line to the block's last line.
    pub span: TextSpan,
    /// Scale declared before the block broke, if any.
    pub unit_scale: Option<UnitScale>,
    pub error: TableError,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableDocument {
    pub tables: Vec<RawTable>,
    pub broken: Vec<BrokenBlock>,
}

struct BlockBuilder {
    hint: StatementHint,
    start_line: usize,
    span: TextSpan,
    first_page: u32,
    last_page: u32,
    units: Option<UnitScale>,
    header: Option<(Vec<String>, TextSpan)>,
    rows: Vec<TableRow>,
    error: Option<TableError>,
}

impl BlockBuilder {
    fn finish(self) -> Result<RawTable, BrokenBlock> {
        let broken = |error| BrokenBlock {
            statement_hint: self.hint,
            line: self.start_line,
            span: self.span,
            unit_scale: self.units,
            error,
        };
        if let Some(e) = self.error.clone() {
            return Err(broken(e));
        }
        let Some((header, header_span)) = self.header.clone() else {
            return Err(broken(TableError::MalformedTableDoc {
                line: self.start_line,
                message: format!("#STATEMENT {} block has no header row", self.hint),
            }));
        };
        Ok(RawTable {
            statement_hint: self.hint,
            page_range: (self.first_page, self.last_page),
            header,
            header_span,
            rows: self.rows,
            unit_scale: self.units.unwrap_or(UnitScale::ONE),
            units_declared: self.units.is_some(),
        })
    }
}

fn page_marker(line: &str) -> Option<Result<u32, ()>> {
    let inner = line.strip_prefix("===PAGE")?;
    let number = inner.strip_suffix("===").ok_or(());
    Some(number.and_then(|n| n.trim().parse::<u32>().map_err(|_| ())))
}

/// Splits a document into statement blocks, keeping broken blocks aside
/// instead of failing the whole document. Only page-marker syntax errors
/// are fatal.
pub fn parse_table_document(document: &str) -> Result<TableDocument, TableError> {
    let mut doc = TableDocument::default();
    let mut page = 0u32;
    let mut block: Option<BlockBuilder> = None;
    let mut offset = 0usize;

    let close = |b: BlockBuilder, doc: &mut TableDocument| match b.finish() {
        Ok(t) => doc.tables.push(t),
        Err(e) => doc.broken.push(e),
    };

    for (idx, raw_line) in document.split_inclusive('\n').enumerate() {
        let line_no = idx + 1;
        let start = offset;
        offset += raw_line.len();
        let content = raw_line.trim_end_matches(['\n', '\r']);
        let span = TextSpan::new(start, start + content.len());
        let trimmed = content.trim();

        if let Some(b) = block.as_mut() {
            if !trimmed.is_empty() && !trimmed.starts_with("#STATEMENT") {
                b.span.end = span.end;
            }
        }
        if let Some(marker) = page_marker(trimmed) {
            page = marker.map_err(|_| TableError::MalformedTableDoc {
                line: line_no,
                message: format!("bad page marker {trimmed:?}"),
            })?;
            if let Some(b) = block.as_mut() {
                if b.first_page == 0 {
                    b.first_page = page;
                }
                b.last_page = page;
            }
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("#STATEMENT") {
            if let Some(b) = block.take() {
                close(b, &mut doc);
            }
            let token = rest.trim();
            let mut builder = BlockBuilder {
                hint: StatementHint::parse(token),
                start_line: line_no,
                span,
                first_page: page,
                last_page: page,
                units: None,
                header: None,
                rows: Vec::new(),
                error: None,
            };
            if token.is_empty() {
                builder.error = Some(TableError::MalformedTableDoc {
                    line: line_no,
                    message: "#STATEMENT without a statement kind".into(),
                });
            }
            block = Some(builder);
            continue;
        }
        let Some(b) = block.as_mut() else {
            // preamble outside any block
            continue;
        };
        if b.error.is_some() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("#UNITS") {
            let token = rest.trim();
            if b.header.is_some() {
                b.error = Some(TableError::MalformedTableDoc {
                    line: line_no,
                    message: "#UNITS after the header row".into(),
                });
            } else {
                match UnitScale::from_token(token) {
                    Some(scale) => b.units = Some(scale),
                    None => {
                        b.error = Some(TableError::MalformedTableDoc {
                            line: line_no,
                            message: format!("unknown unit token {token:?}"),
                        })
                    }
                }
            }
            continue;
        }
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cells: Vec<String> = content.split('\t').map(|c| c.trim().to_string()).collect();
        match &b.header {
            None => b.header = Some((cells, span)),
            Some((header, _)) => {
                if cells.len() > header.len() {
                    b.error = Some(TableError::MalformedTableDoc {
                        line: line_no,
                        message: format!("row has {} cells but the header has {}", cells.len(), header.len()),
                    });
                    continue;
                }
                let mut cells = cells.into_iter();
                let label = cells.next().unwrap_or_default();
                b.rows.push(TableRow {
                    label,
                    cells: cells.collect(),
                    page,
                    line: line_no,
                    span,
                });
            }
        }
    }
    if let Some(b) = block.take() {
        close(b, &mut doc);
    }
    Ok(doc)
}

/// One table per `#STATEMENT` block; any broken block fails the document.
pub fn locate_statements(document: &str) -> Result<Vec<RawTable>, TableError> {
    let doc = parse_table_document(document)?;
    if let Some(b) = doc.broken.into_iter().next() {
        return Err(b.error);
    }
    Ok(doc.tables)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRule {
    /// Header names the fiscal year or a current-period keyword.
    HeaderMatch,
    /// Leftmost mostly-numeric column.
    NumericRate,
    /// Nothing matched; first value column.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnChoice {
    /// Index into the value cells (0 = first column after the label).
    pub column: usize,
    pub rule: ColumnRule,
    pub anomaly: Option<Anomaly>,
}

fn header_names_year(header: &str, fiscal_year: i32) -> bool {
    let folded: String = header
        .chars()
        .map(|c| match c {
            '０'..='９' => char::from_u32(c as u32 - '０' as u32 + '0' as u32).unwrap_or(c),
            _ => c,
        })
        .collect();
    let target = format!("{fiscal_year:04}");
    folded
        .split(|c: char| !c.is_ascii_digit())
        .any(|run| run.len() == 4 && run == target)
}

/// Picks the column holding current-period values.
pub fn select_value_column(table: &RawTable, fiscal_year: i32, keywords: &[&str]) -> Result<ColumnChoice, TableError> {
    let count = table.value_column_count();
    if count == 0 {
        return Err(TableError::NoValueColumn);
    }

    let keywords: Vec<String> = keywords.iter().map(|k| k.to_lowercase()).collect();
    for col in 0..count {
        let header = table.value_header(col);
        let lowered = header.to_lowercase();
        if header_names_year(header, fiscal_year) || keywords.iter().any(|k| lowered.contains(k)) {
            return Ok(ColumnChoice {
                column: col,
                rule: ColumnRule::HeaderMatch,
                anomaly: None,
            });
        }
    }

    if !table.rows.is_empty() {
        for col in 0..count {
            let numeric = table
                .rows
                .iter()
                .filter(|r| normalize_number(r.cell(col), UnitScale::ONE).is_value())
                .count();
            if numeric as f64 / table.rows.len() as f64 >= NUMERIC_RATE_THRESHOLD {
                return Ok(ColumnChoice {
                    column: col,
                    rule: ColumnRule::NumericRate,
                    anomaly: None,
                });
            }
        }
    }

    Ok(ColumnChoice {
        column: 0,
        rule: ColumnRule::Fallback,
        anomaly: Some(Anomaly::anomaly(
            AnomalyKind::ColumnFallback,
            table.statement_hint.to_string(),
            format!(
                "no header matched year {fiscal_year} and no column is at least {}% numeric; using column 0 ({:?})",
                NUMERIC_RATE_THRESHOLD * 100.0,
                table.value_header(0)
            ),
        )),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineItem {
    pub raw_label: String,
    pub raw_value: String,
    /// Already multiplied by `unit_scale`.
    pub value: NumericCell,
    pub unit_scale: UnitScale,
    pub source: Evidence,
}

/// One line item per row, in row order.
pub fn extract_line_items(table: &RawTable, column: usize, unit_scale: UnitScale) -> Vec<LineItem> {
    table
        .rows
        .iter()
        .enumerate()
        .map(|(row_idx, row)| {
            let raw = row.cell(column);
            LineItem {
                raw_label: row.label.clone(),
                raw_value: raw.to_string(),
                value: normalize_number(raw, unit_scale),
                unit_scale,
                source: Evidence::Cell {
                    page: row.page,
                    row: row_idx,
                    column,
                    span: row.span,
                },
            }
        })
        .collect()
}

/// Company-level facts the table track cannot read from the document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableFilingInfo {
    pub document_locator: String,
    pub entity_name: String,
    pub fiscal_year_start: chrono::NaiveDate,
    pub fiscal_year_end: chrono::NaiveDate,
    pub currency: String,
    pub accounting_standard: String,
}

/// Context package for a table document: each statement's region covers
/// the header and rows of its blocks.
pub fn build_table_package(doc: &TableDocument, source_text: &str, info: &TableFilingInfo) -> ContextPackage {
    let mut boundaries: BTreeMap<Statement, StatementBoundary> = Statement::ALL
        .iter()
        .map(|s| (*s, StatementBoundary::default()))
        .collect();
    for table in &doc.tables {
        let Some(statement) = table.statement_hint.statement() else {
            continue;
        };
        let b = boundaries.get_mut(&statement).expect("all statements present");
        b.spans.push(table.header_span);
        b.spans.extend(table.rows.iter().map(|r| r.span));
        b.pages = Some(match b.pages {
            None => table.page_range,
            Some((lo, hi)) => (lo.min(table.page_range.0), hi.max(table.page_range.1)),
        });
        b.unit_scale = table.unit_scale;
    }
    // broken blocks stay readable to the verifier
    for broken in &doc.broken {
        if let Some(statement) = broken.statement_hint.statement() {
            let b = boundaries.get_mut(&statement).expect("all statements present");
            b.spans.push(broken.span);
            if b.pages.is_none() {
                if let Some(scale) = broken.unit_scale {
                    b.unit_scale = scale;
                }
            }
        }
    }
    for b in boundaries.values_mut() {
        b.spans.sort();
    }
    ContextPackage {
        document_locator: info.document_locator.clone(),
        entity_name: info.entity_name.clone(),
        fiscal_year_start: info.fiscal_year_start,
        fiscal_year_end: info.fiscal_year_end,
        currency: info.currency.clone(),
        accounting_standard: info.accounting_standard.clone(),
        statement_boundaries: boundaries,
        evidence_text: source_text.to_string(),
    }
}
