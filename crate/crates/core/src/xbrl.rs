//! Simplified tag-native instance parsing and per-concept fact selection.
//!
//! The instance format is a small XML dialect:
//!
//! ```xml
//! <instance>
//!   <filing entityName="Acme" fiscalYearStart="2023-01-01" fiscalYearEnd="2023-12-31"
//!           currency="USD" standard="US-GAAP"/>
//!   <context id="FY23" entity="0000001" consolidated="true">
//!     <startDate>2023-01-01</startDate><endDate>2023-12-31</endDate>
//!   </context>
//!   <context id="I23" entity="0000001" consolidated="true"><instant>2023-12-31</instant></context>
//!   <unit id="usd" code="USD"/>
//!   <fact tag="us-gaap:Revenues" contextRef="FY23" unitRef="usd" decimals="-6">383285000000</fact>
//! </instance>
//! ```

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anomaly::{Anomaly, AnomalyKind};
use crate::mapping::normalize_label;
use crate::ontology::{Aggregation, CanonicalConcept, Jurisdiction, OntologyCatalog, Statement};
use crate::package::{ContextPackage, StatementBoundary, TextSpan};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum XbrlError {
    #[error("malformed instance: {0}")]
    MalformedInstance(String),
    #[error("missing filing metadata: {0}")]
    MissingMetadata(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Period {
    Instant { date: NaiveDate },
    Duration { start: NaiveDate, end: NaiveDate },
}

impl Period {
    pub fn aggregation(&self) -> Aggregation {
        match self {
            Period::Instant { .. } => Aggregation::Point,
            Period::Duration { .. } => Aggregation::Flow,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiscalPeriod {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl FiscalPeriod {
    /// The context period a concept with this aggregation must report on.
    pub fn expected_period(&self, aggregation: Aggregation) -> Period {
        match aggregation {
            Aggregation::Point => Period::Instant { date: self.end },
            Aggregation::Flow => Period::Duration {
                start: self.start,
                end: self.end,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportingContext {
    pub context_id: String,
    pub entity_id: String,
    pub period: Period,
    pub consolidated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedFact {
    pub tag: String,
    pub context_id: String,
    /// ISO-4217 code resolved from the unit reference.
    pub unit: String,
    /// Reported precision exponent; `INF` maps to `i32::MAX`.
    pub scale_decimals: i32,
    pub value: Decimal,
    pub span: TextSpan,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilingMetadata {
    pub entity_name: Option<String>,
    pub fiscal_year_start: Option<NaiveDate>,
    pub fiscal_year_end: Option<NaiveDate>,
    pub currency: Option<String>,
    pub accounting_standard: Option<String>,
    pub filing_date: Option<NaiveDate>,
}

impl FilingMetadata {
    pub fn fiscal_period(&self) -> Option<FiscalPeriod> {
        Some(FiscalPeriod {
            start: self.fiscal_year_start?,
            end: self.fiscal_year_end?,
        })
    }
}

pub type ContextMap = BTreeMap<String, ReportingContext>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedInstance {
    pub contexts: Vec<ReportingContext>,
    pub facts: Vec<TaggedFact>,
    pub metadata: FilingMetadata,
    /// Per-fact problems; the offending facts were dropped.
    pub anomalies: Vec<Anomaly>,
}

impl ParsedInstance {
    pub fn context_map(&self) -> ContextMap {
        self.contexts
            .iter()
            .map(|c| (c.context_id.clone(), c.clone()))
            .collect()
    }
}

struct PendingContext {
    id: String,
    entity: String,
    consolidated: bool,
    instant: Option<String>,
    start: Option<String>,
    end: Option<String>,
}

struct PendingFact {
    attrs: BTreeMap<String, String>,
    text: String,
    start: usize,
}

struct RawFact {
    attrs: BTreeMap<String, String>,
    text: String,
    span: TextSpan,
}

fn attributes(e: &BytesStart<'_>) -> Result<BTreeMap<String, String>, XbrlError> {
    let mut out = BTreeMap::new();
    for attr in e.attributes() {
        let attr = attr.map_err(|err| XbrlError::MalformedInstance(err.to_string()))?;
        let key = String::from_utf8_lossy(attr.key.local_name().as_ref()).into_owned();
        let value = attr
            .unescape_value()
            .map_err(|err| XbrlError::MalformedInstance(err.to_string()))?
            .into_owned();
        out.insert(key, value);
    }
    Ok(out)
}

fn parse_date(field: &str, raw: &str) -> Result<NaiveDate, XbrlError> {
    NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d")
        .map_err(|_| XbrlError::MalformedInstance(format!("{field}: invalid date {raw:?}")))
}

fn optional_date(attrs: &BTreeMap<String, String>, key: &str) -> Result<Option<NaiveDate>, XbrlError> {
    attrs.get(key).map(|v| parse_date(key, v)).transpose()
}

/// Instance values are plain decimals: optional leading minus, digits,
/// optional fraction, nothing else.
fn parse_plain_decimal(raw: &str) -> Option<Decimal> {
    let s = raw.trim();
    let unsigned = s.strip_prefix('-').unwrap_or(s);
    let mut parts = unsigned.splitn(2, '.');
    let int = parts.next()?;
    let ok = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
    if !ok(int) || !parts.next().is_none_or(ok) {
        return None;
    }
    s.parse().ok()
}

/// Parses an instance document. Facts with problems are dropped and
/// reported as anomalies; structural problems fail the whole document.
pub fn parse_instance(document: &str) -> Result<ParsedInstance, XbrlError> {
    let mut reader = Reader::from_str(document);
    let mut metadata = FilingMetadata::default();
    let mut contexts: Vec<ReportingContext> = Vec::new();
    let mut units: BTreeMap<String, String> = BTreeMap::new();
    let mut raw_facts: Vec<RawFact> = Vec::new();

    let mut context: Option<PendingContext> = None;
    let mut fact: Option<PendingFact> = None;
    let mut period_field: Option<String> = None;
    let mut depth = 0usize;
    let mut saw_root = false;

    loop {
        let before = reader.buffer_position() as usize;
        let event = reader
            .read_event()
            .map_err(|e| XbrlError::MalformedInstance(format!("at byte {before}: {e}")))?;
        match event {
            Event::Start(e) => {
                let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                depth += 1;
                if depth == 1 {
                    saw_root = true;
                    continue;
                }
                if fact.is_some() {
                    return Err(XbrlError::MalformedInstance(format!(
                        "element <{name}> nested inside a fact"
                    )));
                }
                match name.as_str() {
                    "context" => context = Some(start_context(&e)?),
                    "instant" | "startDate" | "endDate" if context.is_some() => period_field = Some(name),
                    "fact" => {
                        fact = Some(PendingFact {
                            attrs: attributes(&e)?,
                            text: String::new(),
                            start: before,
                        })
                    }
                    "unit" => {
                        let attrs = attributes(&e)?;
                        register_unit(&mut units, &attrs)?;
                    }
                    "filing" => read_filing(&mut metadata, &attributes(&e)?)?,
                    _ => {}
                }
            }
            Event::Empty(e) => {
                let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                if depth == 0 {
                    saw_root = true;
                    continue;
                }
                match name.as_str() {
                    "filing" => read_filing(&mut metadata, &attributes(&e)?)?,
                    "unit" => register_unit(&mut units, &attributes(&e)?)?,
                    "fact" => raw_facts.push(RawFact {
                        attrs: attributes(&e)?,
                        text: String::new(),
                        span: TextSpan::new(before, reader.buffer_position() as usize),
                    }),
                    "context" => return Err(XbrlError::MalformedInstance("context without a period".into())),
                    _ => {}
                }
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| XbrlError::MalformedInstance(e.to_string()))?;
                if let Some(f) = fact.as_mut() {
                    f.text.push_str(&text);
                } else if let (Some(ctx), Some(field)) = (context.as_mut(), period_field.as_deref()) {
                    let slot = match field {
                        "instant" => &mut ctx.instant,
                        "startDate" => &mut ctx.start,
                        _ => &mut ctx.end,
                    };
                    slot.get_or_insert_with(String::new).push_str(&text);
                }
            }
            Event::CData(t) => {
                if let Some(f) = fact.as_mut() {
                    f.text.push_str(&String::from_utf8_lossy(&t));
                }
            }
            Event::End(e) => {
                let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                depth = depth.saturating_sub(1);
                match name.as_str() {
                    "fact" => {
                        if let Some(f) = fact.take() {
                            raw_facts.push(RawFact {
                                attrs: f.attrs,
                                text: f.text,
                                span: TextSpan::new(f.start, reader.buffer_position() as usize),
                            });
                        }
                    }
                    "instant" | "startDate" | "endDate" => period_field = None,
                    "context" => {
                        if let Some(ctx) = context.take() {
                            contexts.push(finish_context(ctx)?);
                        }
                    }
                    _ => {}
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }

    if !saw_root {
        return Err(XbrlError::MalformedInstance("empty document".into()));
    }
    if depth != 0 || context.is_some() || fact.is_some() {
        return Err(XbrlError::MalformedInstance("unexpected end of document".into()));
    }

    let mut seen = BTreeSet::new();
    for ctx in &contexts {
        if !seen.insert(ctx.context_id.as_str()) {
            return Err(XbrlError::MalformedInstance(format!(
                "duplicate context id {:?}",
                ctx.context_id
            )));
        }
    }

    let mut anomalies = Vec::new();
    let mut facts = Vec::new();
    for raw in raw_facts {
        match resolve_fact(raw, &seen, &units) {
            Ok(f) => facts.push(f),
            Err(a) => anomalies.push(a),
        }
    }

    Ok(ParsedInstance {
        contexts,
        facts,
        metadata,
        anomalies,
    })
}

fn start_context(e: &BytesStart<'_>) -> Result<PendingContext, XbrlError> {
    let attrs = attributes(e)?;
    let id = attrs
        .get("id")
        .filter(|s| !s.is_empty())
        .cloned()
        .ok_or_else(|| XbrlError::MalformedInstance("context without id".into()))?;
    let consolidated = match attrs.get("consolidated").map(String::as_str) {
        Some("true") => true,
        Some("false") => false,
        other => {
            return Err(XbrlError::MalformedInstance(format!(
                "context {id:?}: consolidated must be \"true\" or \"false\", got {other:?}"
            )))
        }
    };
    Ok(PendingContext {
        entity: attrs.get("entity").cloned().unwrap_or_default(),
        id,
        consolidated,
        instant: None,
        start: None,
        end: None,
    })
}

fn finish_context(ctx: PendingContext) -> Result<ReportingContext, XbrlError> {
    let field = |name: &str| format!("context {:?} {name}", ctx.id);
    let period = match (&ctx.instant, &ctx.start, &ctx.end) {
        (Some(i), None, None) => Period::Instant {
            date: parse_date(&field("instant"), i)?,
        },
        (None, Some(s), Some(e)) => {
            let start = parse_date(&field("startDate"), s)?;
            let end = parse_date(&field("endDate"), e)?;
            if start >= end {
                return Err(XbrlError::MalformedInstance(format!(
                    "context {:?}: duration start {start} is not before end {end}",
                    ctx.id
                )));
            }
            Period::Duration { start, end }
        }
        _ => {
            return Err(XbrlError::MalformedInstance(format!(
                "context {:?} needs either <instant> or <startDate>+<endDate>",
                ctx.id
            )))
        }
    };
    Ok(ReportingContext {
        context_id: ctx.id,
        entity_id: ctx.entity,
        period,
        consolidated: ctx.consolidated,
    })
}

fn register_unit(units: &mut BTreeMap<String, String>, attrs: &BTreeMap<String, String>) -> Result<(), XbrlError> {
    match (attrs.get("id"), attrs.get("code")) {
        (Some(id), Some(code)) if !id.is_empty() && !code.is_empty() => {
            units.insert(id.clone(), code.clone());
            Ok(())
        }
        _ => Err(XbrlError::MalformedInstance(
            "unit requires id and code attributes".into(),
        )),
    }
}

fn read_filing(meta: &mut FilingMetadata, attrs: &BTreeMap<String, String>) -> Result<(), XbrlError> {
    let text = |k: &str| attrs.get(k).filter(|v| !v.trim().is_empty()).cloned();
    meta.entity_name = text("entityName");
    meta.currency = text("currency");
    meta.accounting_standard = text("standard");
    meta.fiscal_year_start = optional_date(attrs, "fiscalYearStart")?;
    meta.fiscal_year_end = optional_date(attrs, "fiscalYearEnd")?;
    meta.filing_date = optional_date(attrs, "filingDate")?;
    Ok(())
}

fn resolve_fact(
    raw: RawFact,
    contexts: &BTreeSet<&str>,
    units: &BTreeMap<String, String>,
) -> Result<TaggedFact, Anomaly> {
    let tag = raw.attrs.get("tag").cloned().unwrap_or_default();
    let malformed = |detail: String| Anomaly::anomaly(AnomalyKind::MalformedFact, tag.clone(), detail);
    if tag.is_empty() {
        return Err(malformed("fact without tag".into()));
    }
    let Some(context_id) = raw.attrs.get("contextRef").cloned() else {
        return Err(malformed("fact without contextRef".into()));
    };
    if !contexts.contains(context_id.as_str()) {
        return Err(Anomaly::anomaly(
            AnomalyKind::DanglingContext,
            tag.clone(),
            format!("contextRef {context_id:?} does not resolve; fact dropped"),
        ));
    }
    let Some(unit_ref) = raw.attrs.get("unitRef") else {
        return Err(malformed("fact without unitRef".into()));
    };
    let Some(unit) = units.get(unit_ref).cloned() else {
        return Err(Anomaly::anomaly(
            AnomalyKind::DanglingUnit,
            tag.clone(),
            format!("unitRef {unit_ref:?} does not resolve; fact dropped"),
        ));
    };
    let scale_decimals = match raw.attrs.get("decimals").map(String::as_str) {
        Some("INF") => i32::MAX,
        Some(d) => d
            .trim()
            .parse::<i32>()
            .map_err(|_| malformed(format!("invalid decimals {d:?}")))?,
        None => return Err(malformed("fact without decimals".into())),
    };
    let value = parse_plain_decimal(&raw.text)
        .ok_or_else(|| malformed(format!("value {:?} is not a plain decimal", raw.text)))?;
    Ok(TaggedFact {
        tag,
        context_id,
        unit,
        scale_decimals,
        value,
        span: raw.span,
    })
}

/// Result of selecting one fact for a concept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactSelection<'a> {
    pub fact: Option<&'a TaggedFact>,
    pub anomalies: Vec<Anomaly>,
}

/// Picks the fact reporting `concept` for the fiscal year.
///
/// Candidates must match the consolidation scope, then the exact period
/// (instant at year end for point concepts, the full-year duration for
/// flow concepts). Among survivors the most precise wins; remaining ties
/// go to the smallest context id and raise `DuplicateFact`.
pub fn select_fact<'a>(
    facts: &'a [TaggedFact],
    contexts: &ContextMap,
    concept: &CanonicalConcept,
    fiscal_year: FiscalPeriod,
    require_consolidated: bool,
) -> FactSelection<'a> {
    select_for_aggregation(
        facts,
        contexts,
        &concept.concept_id,
        concept.aggregation,
        fiscal_year,
        require_consolidated,
    )
}

fn select_for_aggregation<'a>(
    facts: &'a [TaggedFact],
    contexts: &ContextMap,
    target: &str,
    aggregation: Aggregation,
    fiscal_year: FiscalPeriod,
    require_consolidated: bool,
) -> FactSelection<'a> {
    let mut anomalies = Vec::new();
    let in_scope: Vec<(&TaggedFact, &ReportingContext)> = facts
        .iter()
        .filter_map(|f| contexts.get(&f.context_id).map(|c| (f, c)))
        .filter(|(_, c)| c.consolidated == require_consolidated)
        .collect();

    let expected = fiscal_year.expected_period(aggregation);
    let mut matching: Vec<&TaggedFact> = in_scope
        .iter()
        .filter(|(_, c)| c.period == expected)
        .map(|(f, _)| *f)
        .collect();

    if matching.is_empty() {
        if !in_scope.is_empty() {
            let periods: BTreeSet<String> = in_scope.iter().map(|(_, c)| describe_period(&c.period)).collect();
            anomalies.push(Anomaly::anomaly(
                AnomalyKind::PeriodMismatch,
                target,
                format!(
                    "no context matches {}; candidates: {}",
                    describe_period(&expected),
                    periods.into_iter().collect::<Vec<_>>().join(", ")
                ),
            ));
        }
        return FactSelection { fact: None, anomalies };
    }

    matching.sort_by(|a, b| {
        b.scale_decimals
            .cmp(&a.scale_decimals)
            .then_with(|| a.context_id.cmp(&b.context_id))
            .then_with(|| a.tag.cmp(&b.tag))
            .then_with(|| a.value.cmp(&b.value))
    });
    let best = matching[0];
    let tied: Vec<&TaggedFact> = matching
        .iter()
        .copied()
        .filter(|f| f.scale_decimals == best.scale_decimals)
        .collect();
    if tied.len() > 1 {
        let ids: Vec<&str> = tied.iter().map(|f| f.context_id.as_str()).collect();
        anomalies.push(Anomaly::anomaly(
            AnomalyKind::DuplicateFact,
            target,
            format!(
                "{} facts at decimals {} in contexts [{}]; selected {:?}",
                tied.len(),
                best.scale_decimals,
                ids.join(","),
                best.context_id
            ),
        ));
    }
    FactSelection {
        fact: Some(best),
        anomalies,
    }
}

fn describe_period(p: &Period) -> String {
    match p {
        Period::Instant { date } => format!("instant {date}"),
        Period::Duration { start, end } => format!("duration {start}..{end}"),
    }
}

/// One fact chosen for a (concept, tag) pair or retained as an extra.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectedFact<'a> {
    pub concept_id: Option<String>,
    pub fact: &'a TaggedFact,
}

#[derive(Debug, Clone, Default)]
pub struct TaggedExtraction<'a> {
    /// Per aliased tag, the fact selected for its concept.
    pub selected: Vec<SelectedFact<'a>>,
    /// Facts for tags outside the alias dictionary, current period only.
    pub extras: Vec<&'a TaggedFact>,
    pub anomalies: Vec<Anomaly>,
}

/// Runs fact selection for every catalog concept, one alias tag at a time,
/// and keeps current-period facts of unaliased tags as extras.
pub fn extract_tagged<'a>(
    parsed: &'a ParsedInstance,
    catalog: &OntologyCatalog,
    jurisdiction: Jurisdiction,
    fiscal_year: FiscalPeriod,
    require_consolidated: bool,
) -> TaggedExtraction<'a> {
    let contexts = parsed.context_map();
    // tag -> (indices into parsed.facts, owned copies for selection)
    let mut by_tag: BTreeMap<&str, (Vec<usize>, Vec<TaggedFact>)> = BTreeMap::new();
    for (i, f) in parsed.facts.iter().enumerate() {
        let entry = by_tag.entry(f.tag.as_str()).or_default();
        entry.0.push(i);
        entry.1.push(f.clone());
    }

    let mut out = TaggedExtraction::default();
    for (tag, (indices, group)) in &by_tag {
        let original = |chosen: &TaggedFact| {
            let pos = group
                .iter()
                .position(|g| std::ptr::eq(g, chosen))
                .expect("selection borrows from the group");
            &parsed.facts[indices[pos]]
        };
        let concept = catalog
            .lookup_by_alias(jurisdiction, &normalize_label(tag))
            .and_then(|id| catalog.concept(id));
        match concept {
            Some(concept) => {
                let s = select_fact(group, &contexts, concept, fiscal_year, require_consolidated);
                out.anomalies.extend(s.anomalies);
                if let Some(f) = s.fact {
                    out.selected.push(SelectedFact {
                        concept_id: Some(concept.concept_id.clone()),
                        fact: original(f),
                    });
                }
            }
            None => {
                let extra = [Aggregation::Point, Aggregation::Flow].iter().find_map(|&agg| {
                    select_for_aggregation(group, &contexts, tag, agg, fiscal_year, require_consolidated).fact
                });
                if let Some(f) = extra {
                    out.extras.push(original(f));
                }
            }
        }
    }
    out.extras.sort_by_key(|f| f.span);
    out.selected.sort_by_key(|s| s.fact.span);
    out
}

/// Builds the statement-level context package for a parsed instance.
pub fn build_context_package(
    parsed: &ParsedInstance,
    source_text: &str,
    document_locator: &str,
    catalog: &OntologyCatalog,
    jurisdiction: Jurisdiction,
) -> Result<ContextPackage, XbrlError> {
    let meta = &parsed.metadata;
    let mut missing = Vec::new();
    if meta.fiscal_year_start.is_none() {
        missing.push("fiscalYearStart");
    }
    if meta.fiscal_year_end.is_none() {
        missing.push("fiscalYearEnd");
    }
    if meta.currency.is_none() {
        missing.push("currency");
    }
    if !missing.is_empty() {
        return Err(XbrlError::MissingMetadata(missing.join(", ")));
    }
    let (start, end) = (meta.fiscal_year_start.unwrap(), meta.fiscal_year_end.unwrap());
    if start >= end {
        return Err(XbrlError::MissingMetadata(format!(
            "fiscal year start {start} is not before end {end}"
        )));
    }

    let mut boundaries: BTreeMap<Statement, StatementBoundary> = Statement::ALL
        .iter()
        .map(|s| (*s, StatementBoundary::default()))
        .collect();
    for fact in &parsed.facts {
        let statement = catalog
            .lookup_by_alias(jurisdiction, &normalize_label(&fact.tag))
            .and_then(|id| catalog.concept(id))
            .map(|c| c.statement);
        if let Some(statement) = statement {
            let b = boundaries.get_mut(&statement).expect("all statements present");
            if !b.tags.contains(&fact.tag) {
                b.tags.push(fact.tag.clone());
            }
            b.spans.push(fact.span);
        }
    }
    for b in boundaries.values_mut() {
        b.tags.sort();
        b.spans.sort();
    }

    Ok(ContextPackage {
        document_locator: document_locator.to_string(),
        entity_name: meta.entity_name.clone().unwrap_or_default(),
        fiscal_year_start: start,
        fiscal_year_end: end,
        currency: meta.currency.clone().unwrap_or_default(),
        accounting_standard: meta.accounting_standard.clone().unwrap_or_default(),
        statement_boundaries: boundaries,
        evidence_text: source_text.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rust_decimal_macros::dec;

    const INSTANCE: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<instance>
  <filing entityName="Acme Corp" fiscalYearStart="2023-01-01" fiscalYearEnd="2023-12-31" currency="USD" standard="US-GAAP"/>
  <context id="FY23" entity="0001" consolidated="true"><startDate>2023-01-01</startDate><endDate>2023-12-31</endDate></context>
  <context id="I23" entity="0001" consolidated="true"><instant>2023-12-31</instant></context>
  <unit id="usd" code="USD"/>
  <fact tag="us-gaap:Revenues" contextRef="FY23" unitRef="usd" decimals="-6">1000000</fact>
  <fact tag="us-gaap:NetIncomeLoss" contextRef="FY23" unitRef="usd" decimals="-6">-250000</fact>
  <fact tag="us-gaap:Assets" contextRef="I23" unitRef="usd" decimals="-6">5000000.5</fact>
</instance>"#;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn fy() -> FiscalPeriod {
        FiscalPeriod {
            start: d("2023-01-01"),
            end: d("2023-12-31"),
        }
    }

    fn ctx(id: &str, period: Period, consolidated: bool) -> ReportingContext {
        ReportingContext {
            context_id: id.into(),
            entity_id: "e".into(),
            period,
            consolidated,
        }
    }

    fn fact(tag: &str, ctx: &str, decimals: i32, value: Decimal) -> TaggedFact {
        TaggedFact {
            tag: tag.into(),
            context_id: ctx.into(),
            unit: "USD".into(),
            scale_decimals: decimals,
            value,
            span: TextSpan::new(0, 0),
        }
    }

    #[test]
    fn parses_happy_path() {
        let parsed = parse_instance(INSTANCE).unwrap();
        assert_eq!(parsed.contexts.len(), 2);
        assert_eq!(parsed.facts.len(), 3);
        assert!(parsed.anomalies.is_empty());
        assert_eq!(parsed.facts[1].value, dec!(-250000));
        assert_eq!(parsed.facts[2].value, dec!(5000000.5));
        assert_eq!(parsed.metadata.currency.as_deref(), Some("USD"));
        assert_eq!(parsed.metadata.entity_name.as_deref(), Some("Acme Corp"));
        let span = parsed.facts[0].span;
        assert!(INSTANCE[span.start..span.end].starts_with("<fact tag=\"us-gaap:Revenues\""));
        assert!(INSTANCE[span.start..span.end].ends_with("</fact>"));
    }

    #[test]
    fn dangling_context_drops_fact_with_anomaly() {
        let doc = INSTANCE.replace(
            "</instance>",
            r#"<fact tag="us-gaap:Liabilities" contextRef="c99" unitRef="usd" decimals="0">5</fact></instance>"#,
        );
        let parsed = parse_instance(&doc).unwrap();
        assert_eq!(parsed.facts.len(), 3);
        assert_eq!(parsed.anomalies.len(), 1);
        assert_eq!(parsed.anomalies[0].kind, AnomalyKind::DanglingContext);
    }

    #[test]
    fn separator_in_value_drops_fact() {
        let doc = INSTANCE.replace(">1000000<", ">12,300<");
        let parsed = parse_instance(&doc).unwrap();
        assert_eq!(parsed.facts.len(), 2);
        assert_eq!(parsed.anomalies[0].kind, AnomalyKind::MalformedFact);
        assert!(parsed.facts.iter().all(|f| f.tag != "us-gaap:Revenues"));
    }

    #[test]
    fn syntax_errors_are_fatal() {
        assert!(matches!(
            parse_instance("<instance><context id=\"a\""),
            Err(XbrlError::MalformedInstance(_))
        ));
        assert!(matches!(parse_instance(""), Err(XbrlError::MalformedInstance(_))));
        let reversed = INSTANCE.replace("<startDate>2023-01-01", "<startDate>2024-01-01");
        assert!(matches!(
            parse_instance(&reversed),
            Err(XbrlError::MalformedInstance(_))
        ));
    }

    #[test]
    fn point_concept_prefers_instant_at_year_end() {
        let catalog = OntologyCatalog::default_catalog();
        let concept = catalog.concept("total_assets").unwrap();
        let contexts: ContextMap = [
            ctx("I", Period::Instant { date: d("2023-12-31") }, true),
            ctx(
                "D",
                Period::Duration {
                    start: d("2023-01-01"),
                    end: d("2023-12-31"),
                },
                true,
            ),
        ]
        .into_iter()
        .map(|c| (c.context_id.clone(), c))
        .collect();
        let facts = vec![
            fact("us-gaap:Assets", "D", 0, dec!(1)),
            fact("us-gaap:Assets", "I", 0, dec!(2)),
        ];
        let sel = select_fact(&facts, &contexts, concept, fy(), true);
        assert_eq!(sel.fact.unwrap().context_id, "I");
        assert!(sel.anomalies.is_empty());
    }

    #[test]
    fn tie_breaks_on_context_id_with_duplicate_anomaly() {
        let catalog = OntologyCatalog::default_catalog();
        let concept = catalog.concept("total_assets").unwrap();
        let contexts: ContextMap = ["cB", "cA"]
            .iter()
            .map(|id| ctx(id, Period::Instant { date: d("2023-12-31") }, true))
            .map(|c| (c.context_id.clone(), c))
            .collect();
        let facts = vec![fact("t", "cB", 0, dec!(1)), fact("t", "cA", 0, dec!(1))];
        let sel = select_fact(&facts, &contexts, concept, fy(), true);
        assert_eq!(sel.fact.unwrap().context_id, "cA");
        assert_eq!(sel.anomalies.len(), 1);
        assert_eq!(sel.anomalies[0].kind, AnomalyKind::DuplicateFact);
    }

    #[test]
    fn near_miss_period_yields_none_and_period_mismatch() {
        let catalog = OntologyCatalog::default_catalog();
        let concept = catalog.concept("revenue").unwrap();
        let contexts: ContextMap = [ctx(
            "D",
            Period::Duration {
                start: d("2023-01-02"),
                end: d("2023-12-31"),
            },
            true,
        )]
        .into_iter()
        .map(|c| (c.context_id.clone(), c))
        .collect();
        let facts = vec![fact("t", "D", 0, dec!(1))];
        let sel = select_fact(&facts, &contexts, concept, fy(), true);
        assert!(sel.fact.is_none());
        assert_eq!(sel.anomalies[0].kind, AnomalyKind::PeriodMismatch);
    }

    #[test]
    fn separate_scope_is_excluded() {
        let catalog = OntologyCatalog::default_catalog();
        let concept = catalog.concept("revenue").unwrap();
        let contexts: ContextMap = [ctx(
            "D",
            Period::Duration {
                start: d("2023-01-01"),
                end: d("2023-12-31"),
            },
            false,
        )]
        .into_iter()
        .map(|c| (c.context_id.clone(), c))
        .collect();
        let facts = vec![fact("t", "D", 0, dec!(1))];
        assert!(select_fact(&facts, &contexts, concept, fy(), true).fact.is_none());
        assert!(select_fact(&facts, &contexts, concept, fy(), false).fact.is_some());
    }

    #[test]
    fn context_package_from_instance() {
        let catalog = OntologyCatalog::default_catalog();
        let parsed = parse_instance(INSTANCE).unwrap();
        let pkg = build_context_package(&parsed, INSTANCE, "US/ACME/instance.xml", &catalog, Jurisdiction::US).unwrap();
        assert_eq!(pkg.currency, "USD");
        assert_eq!(pkg.fiscal_year_end, d("2023-12-31"));
        assert_eq!(pkg.boundary(Statement::IS).unwrap().tags.len(), 2);
        assert_eq!(
            pkg.boundary(Statement::BS).unwrap().tags,
            vec!["us-gaap:Assets".to_string()]
        );
        assert!(pkg.boundary(Statement::CF).unwrap().tags.is_empty());
        assert!(pkg.statement_region(Statement::IS).contains("us-gaap:Revenues"));
    }

    #[test]
    fn context_package_only_is_tags() {
        let catalog = OntologyCatalog::default_catalog();
        let doc = INSTANCE.replace(
            r#"<fact tag="us-gaap:Assets" contextRef="I23" unitRef="usd" decimals="-6">5000000.5</fact>"#,
            "",
        );
        let parsed = parse_instance(&doc).unwrap();
        let pkg = build_context_package(&parsed, &doc, "x", &catalog, Jurisdiction::US).unwrap();
        assert!(!pkg.boundary(Statement::IS).unwrap().tags.is_empty());
        assert!(pkg.boundary(Statement::BS).unwrap().tags.is_empty());
        assert!(pkg.boundary(Statement::CF).unwrap().tags.is_empty());
    }

    #[test]
    fn missing_currency_is_missing_metadata() {
        let catalog = OntologyCatalog::default_catalog();
        let doc = INSTANCE.replace(r#" currency="USD""#, "");
        let parsed = parse_instance(&doc).unwrap();
        let err = build_context_package(&parsed, &doc, "x", &catalog, Jurisdiction::US).unwrap_err();
        assert!(matches!(err, XbrlError::MissingMetadata(ref m) if m.contains("currency")));
    }

    #[test]
    fn extraction_separates_aliased_and_extra_tags() {
        let catalog = OntologyCatalog::default_catalog();
        let doc = INSTANCE.replace(
            "</instance>",
            r#"<fact tag="acme:WidgetsShipped" contextRef="FY23" unitRef="usd" decimals="0">42</fact></instance>"#,
        );
        let parsed = parse_instance(&doc).unwrap();
        let ex = extract_tagged(&parsed, &catalog, Jurisdiction::US, fy(), true);
        assert_eq!(ex.selected.len(), 3);
        assert_eq!(ex.extras.len(), 1);
        assert_eq!(ex.extras[0].tag, "acme:WidgetsShipped");
    }
}
