//! Statement-level context packages and evidence locators shared by
//! extraction and verification.

use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ontology::Statement;
use crate::table::UnitScale;

/// Byte range into a package's evidence text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TextSpan {
    pub start: usize,
    pub end: usize,
}

impl TextSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Where a value came from in the source filing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    Fact {
        tag: String,
        context_id: String,
        span: TextSpan,
    },
    Cell {
        page: u32,
        row: usize,
        column: usize,
        span: TextSpan,
    },
    /// Value supplied by the verifier or a reviewer.
    Quote { text: String },
}

impl Evidence {
    pub fn span(&self) -> Option<TextSpan> {
        match self {
            Evidence::Fact { span, .. } | Evidence::Cell { span, .. } => Some(*span),
            Evidence::Quote { .. } => None,
        }
    }
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Evidence::Fact { tag, context_id, .. } => write!(f, "{tag}@{context_id}"),
            Evidence::Cell { page, row, column, .. } => write!(f, "p{page}:r{row}:c{column}"),
            Evidence::Quote { text } => write!(f, "quote:{text}"),
        }
    }
}

/// Region of the evidence text that belongs to one statement.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementBoundary {
    /// Tag names grouped onto this statement (tag-native filings).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
    /// First and last page (table filings).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pages: Option<(u32, u32)>,
    pub spans: Vec<TextSpan>,
    #[serde(default)]
    pub unit_scale: UnitScale,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextPackage {
    pub document_locator: String,
    pub entity_name: String,
    pub fiscal_year_start: NaiveDate,
    pub fiscal_year_end: NaiveDate,
    pub currency: String,
    pub accounting_standard: String,
    pub statement_boundaries: BTreeMap<Statement, StatementBoundary>,
    pub evidence_text: String,
}

impl ContextPackage {
    pub fn boundary(&self, statement: Statement) -> Option<&StatementBoundary> {
        self.statement_boundaries.get(&statement)
    }

    /// Concatenated text of a statement's region, one span per line.
    pub fn statement_region(&self, statement: Statement) -> String {
        let Some(boundary) = self.boundary(statement) else {
            return String::new();
        };
        boundary
            .spans
            .iter()
            .filter_map(|s| self.evidence_text.get(s.start..s.end))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Character window of at most `cap` chars centred on `span`.
    pub fn window(&self, span: TextSpan, cap: usize) -> String {
        window_around(&self.evidence_text, span, cap)
    }

    pub fn unit_scale(&self, statement: Statement) -> UnitScale {
        self.boundary(statement).map(|b| b.unit_scale).unwrap_or_default()
    }
}

/// Returns up to `cap` characters of `text` centred on `span`. Falls back
/// to the beginning of the text when the span is out of range.
pub fn window_around(text: &str, span: TextSpan, cap: usize) -> String {
    if cap == 0 || text.is_empty() {
        return String::new();
    }
    // char indices of every boundary
    let bounds: Vec<usize> = text.char_indices().map(|(i, _)| i).chain([text.len()]).collect();
    let total = bounds.len() - 1;
    let to_char = |byte: usize| bounds.partition_point(|&b| b < byte).min(total);
    let (first, last) = if span.end <= text.len() && span.start <= span.end {
        (to_char(span.start), to_char(span.end))
    } else {
        (0, 0)
    };
    let width = cap.min(total);
    let inner = last - first;
    let start = if inner >= width {
        first
    } else {
        let slack = width - inner;
        first.saturating_sub(slack / 2).min(total - width)
    };
    text[bounds[start]..bounds[start + width]].to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_is_clipped_and_contains_span() {
        let text = "a".repeat(100) + "TARGET" + &"b".repeat(100);
        let w = window_around(&text, TextSpan::new(100, 106), 20);
        assert_eq!(w.chars().count(), 20);
        assert!(w.contains("TARGET"));
    }

    #[test]
    fn window_respects_text_edges() {
        let text = "TARGET and more text afterwards";
        let w = window_around(text, TextSpan::new(0, 6), 10);
        assert_eq!(w, "TARGET and");
        let w = window_around(text, TextSpan::new(25, 31), 10);
        assert_eq!(w, "afterwards");
    }

    #[test]
    fn window_handles_multibyte_text() {
        let text = "营业收入\t1,234\n营业成本\t800";
        let start = text.find("营业成本").unwrap();
        let w = window_around(text, TextSpan::new(start, text.len()), 8);
        assert_eq!(w.chars().count(), 8);
        assert!(w.contains("营业成本"));
    }

    #[test]
    fn short_text_returned_whole() {
        assert_eq!(window_around("abc", TextSpan::new(0, 1), 100), "abc");
    }
}
