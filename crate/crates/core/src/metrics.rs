//! Filled Rate, Conflict Rate and Accuracy.
//!
//! Counts are kept as exact rationals; percentages are rounded half-up to
//! two decimals only when a report is built for display.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use num_rational::Ratio;
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::guardrail::Decision;
use crate::mapping::{ExtractedField, FieldStatus, StatementBundle};
use crate::ontology::Jurisdiction;

/// Default relative tolerance for accuracy comparisons.
pub const DEFAULT_ACC_TOLERANCE: Decimal = Decimal::from_parts(1, 0, 0, false, 6);

pub const ABSENT_MARKER: &str = "absent";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no fields to evaluate")]
    EmptyInput,
    #[error("no gold labels cover the evaluated fields")]
    NoGoldLabels,
    #[error("gold file line {line}: {message}")]
    Gold { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoldValue {
    Value(Decimal),
    Absent,
}

pub type GoldKey = (Jurisdiction, String, String);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldLabelSet {
    entries: BTreeMap<GoldKey, GoldValue>,
}

#[derive(Debug, Deserialize)]
struct GoldRow {
    market: String,
    company_id: String,
    concept_id: String,
    gold: String,
}

impl GoldLabelSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a label; a second label for the same key is rejected.
    pub fn insert(&mut self, market: Jurisdiction, company_id: &str, concept_id: &str, value: GoldValue) -> bool {
        let key = (market, company_id.to_string(), concept_id.to_string());
        if self.entries.contains_key(&key) {
            return false;
        }
        self.entries.insert(key, value);
        true
    }

    pub fn get(&self, market: Jurisdiction, company_id: &str, concept_id: &str) -> Option<GoldValue> {
        self.entries
            .get(&(market, company_id.to_string(), concept_id.to_string()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reads `market,company_id,concept_id,gold` rows; `gold` is a decimal
    /// in base units or the word `absent`.
    pub fn parse_csv(text: &str) -> Result<Self, MetricsError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut set = GoldLabelSet::new();
        for (i, row) in reader.deserialize::<GoldRow>().enumerate() {
            let line = i + 2;
            let err = |message: String| MetricsError::Gold { line, message };
            let row = row.map_err(|e| err(e.to_string()))?;
            let market = Jurisdiction::from_str(&row.market).map_err(|e| err(e.to_string()))?;
            let value = if row.gold.eq_ignore_ascii_case(ABSENT_MARKER) {
                GoldValue::Absent
            } else {
                GoldValue::Value(Decimal::from_str(&row.gold).map_err(|e| err(format!("{:?}: {e}", row.gold)))?)
            };
            if !set.insert(market, &row.company_id, &row.concept_id, value) {
                return Err(err(format!(
                    "duplicate label for {market}/{}/{}",
                    row.company_id, row.concept_id
                )));
            }
        }
        Ok(set)
    }

    pub fn from_path(path: &Path) -> Result<Self, MetricsError> {
        let text = std::fs::read_to_string(path).map_err(|e| MetricsError::Gold {
            line: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        Self::parse_csv(&text)
    }
}

/// Which fields count towards accuracy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccScope {
    /// Every gold-labeled field.
    #[default]
    All,
    /// Gold-labeled fields whose final decision is NEED_REVIEW.
    Reviewed,
}

impl FromStr for AccScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(AccScope::All),
            "reviewed" => Ok(AccScope::Reviewed),
            other => Err(format!("unknown accuracy scope {other:?} (expected all or reviewed)")),
        }
    }
}

fn is_conflicted(f: &ExtractedField) -> bool {
    f.decision == Some(Decision::NeedReview)
}

fn value_matches(value: Decimal, gold: Decimal, tol_rel: Decimal) -> bool {
    let bound = tol_rel * gold.abs().max(Decimal::ONE);
    value.checked_sub(gold).is_some_and(|d| d.abs() <= bound)
}

/// Whether a field agrees with its gold label.
pub fn field_correct(field: &ExtractedField, gold: GoldValue, tol_rel: Decimal) -> bool {
    match gold {
        GoldValue::Value(g) => {
            field.status == FieldStatus::Ok && field.value.is_some_and(|v| value_matches(v, g, tol_rel))
        }
        GoldValue::Absent => matches!(field.status, FieldStatus::Missing | FieldStatus::NotApplicable),
    }
}

/// Raw counts behind the three rates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub n: u64,
    pub filled: u64,
    pub conflicted: u64,
    pub correct: u64,
    pub compared: u64,
}

impl Counts {
    pub fn add(&mut self, other: Counts) {
        self.n += other.n;
        self.filled += other.filled;
        self.conflicted += other.conflicted;
        self.correct += other.correct;
        self.compared += other.compared;
    }

    pub fn filled_ratio(&self) -> Option<Ratio<u64>> {
        (self.n > 0).then(|| Ratio::new(self.filled, self.n))
    }

    pub fn conflict_ratio(&self) -> Option<Ratio<u64>> {
        (self.n > 0).then(|| Ratio::new(self.conflicted, self.n))
    }

    pub fn accuracy_ratio(&self) -> Option<Ratio<u64>> {
        (self.compared > 0).then(|| Ratio::new(self.correct, self.compared))
    }
}

pub fn count_bundle(
    bundle: &StatementBundle,
    gold: Option<&GoldLabelSet>,
    tol_rel: Decimal,
    scope: AccScope,
) -> Counts {
    let mut c = Counts::default();
    for f in &bundle.fields {
        c.n += 1;
        c.filled += u64::from(f.status == FieldStatus::Ok);
        c.conflicted += u64::from(is_conflicted(f));
        let in_scope = scope == AccScope::All || is_conflicted(f);
        if let (true, Some(g)) = (
            in_scope,
            gold.and_then(|g| g.get(bundle.metadata.market, &bundle.metadata.company_id, &f.concept_id)),
        ) {
            c.compared += 1;
            c.correct += u64::from(field_correct(f, g, tol_rel));
        }
    }
    c
}

fn total(bundles: &[StatementBundle], gold: Option<&GoldLabelSet>, tol: Decimal, scope: AccScope) -> Counts {
    let mut c = Counts::default();
    for b in bundles {
        c.add(count_bundle(b, gold, tol, scope));
    }
    c
}

/// Exact fraction of fields with status OK.
pub fn filled_rate(bundles: &[StatementBundle]) -> Result<Ratio<u64>, MetricsError> {
    total(bundles, None, DEFAULT_ACC_TOLERANCE, AccScope::All)
        .filled_ratio()
        .ok_or(MetricsError::EmptyInput)
}

/// Exact fraction of fields whose final decision is NEED_REVIEW.
pub fn conflict_rate(bundles: &[StatementBundle]) -> Result<Ratio<u64>, MetricsError> {
    total(bundles, None, DEFAULT_ACC_TOLERANCE, AccScope::All)
        .conflict_ratio()
        .ok_or(MetricsError::EmptyInput)
}

/// Exact fraction of compared fields that agree with gold.
pub fn accuracy(
    bundles: &[StatementBundle],
    gold: &GoldLabelSet,
    tol_rel: Decimal,
    scope: AccScope,
) -> Result<Ratio<u64>, MetricsError> {
    total(bundles, Some(gold), tol_rel, scope)
        .accuracy_ratio()
        .ok_or(MetricsError::NoGoldLabels)
}

/// `100 * ratio`, rounded half-up to two decimals.
pub fn percent(ratio: Ratio<u64>) -> Decimal {
    let num = u128::from(*ratio.numer());
    let den = u128::from(*ratio.denom());
    let hundredths = (20_000 * num + den) / (2 * den);
    Decimal::from_i128_with_scale(hundredths as i128, 2)
}

fn percent_f64(ratio: Option<Ratio<u64>>) -> Option<f64> {
    ratio.map(|r| percent(r).to_f64().unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    #[serde(flatten)]
    pub counts: Counts,
    #[serde(rename = "FR")]
    pub fr: f64,
    #[serde(rename = "CR")]
    pub cr: f64,
    #[serde(rename = "ACC")]
    pub acc: Option<f64>,
}

impl RateRow {
    fn from_counts(counts: Counts) -> Self {
        Self {
            counts,
            fr: percent_f64(counts.filled_ratio()).unwrap_or(0.0),
            cr: percent_f64(counts.conflict_ratio()).unwrap_or(0.0),
            acc: percent_f64(counts.accuracy_ratio()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub global: RateRow,
    pub markets: BTreeMap<Jurisdiction, RateRow>,
    pub tol_rel: Decimal,
    pub acc_scope: AccScope,
    pub gold_labels: usize,
}

/// Global and per-market rates. Accuracy is reported only when gold is
/// supplied; a gold file that covers none of the fields is an error.
pub fn build_report(
    bundles: &[StatementBundle],
    gold: Option<&GoldLabelSet>,
    tol_rel: Decimal,
    scope: AccScope,
) -> Result<MetricsReport, MetricsError> {
    let mut markets: BTreeMap<Jurisdiction, Counts> = BTreeMap::new();
    for b in bundles {
        markets
            .entry(b.metadata.market)
            .or_default()
            .add(count_bundle(b, gold, tol_rel, scope));
    }
    let mut global = Counts::default();
    for c in markets.values() {
        global.add(*c);
    }
    if global.n == 0 {
        return Err(MetricsError::EmptyInput);
    }
    if gold.is_some() && global.compared == 0 && scope == AccScope::All {
        return Err(MetricsError::NoGoldLabels);
    }
    Ok(MetricsReport {
        global: RateRow::from_counts(global),
        markets: markets.into_iter().map(|(m, c)| (m, RateRow::from_counts(c))).collect(),
        tol_rel,
        acc_scope: scope,
        gold_labels: gold.map_or(0, GoldLabelSet::len),
    })
}
