//! Canonical mapping: alias matching, per-field status assignment, bundle
//! assembly and identity checks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use chrono::NaiveDate;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anomaly::{Anomaly, AnomalyKind};
use crate::guardrail::Decision;
use crate::ontology::{IdentityReport, Jurisdiction, OntologyCatalog, Severity, Statement};
use crate::package::Evidence;
use crate::table::{LineItem, NumericCell};
use crate::xbrl::TaggedFact;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MappingError {
    #[error("incomplete field set: missing {missing:?}, duplicated {duplicated:?}, unknown {unknown:?}")]
    IncompleteFieldSet {
        missing: Vec<String>,
        duplicated: Vec<String>,
        unknown: Vec<String>,
    },
    #[error("field {concept_id}: status {status} is inconsistent with value presence")]
    IncoherentField { concept_id: String, status: FieldStatus },
    #[error("applicability file: {0}")]
    Applicability(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FieldStatus {
    Ok,
    Missing,
    ParseError,
    NotApplicable,
}

impl FieldStatus {
    pub const ALL: [FieldStatus; 4] = [
        FieldStatus::Ok,
        FieldStatus::Missing,
        FieldStatus::ParseError,
        FieldStatus::NotApplicable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FieldStatus::Ok => "OK",
            FieldStatus::Missing => "MISSING",
            FieldStatus::ParseError => "PARSE_ERROR",
            FieldStatus::NotApplicable => "NOT_APPLICABLE",
        }
    }
}

impl fmt::Display for FieldStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Who last set a field's value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Rule,
    Verifier,
    Human,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedField {
    pub concept_id: String,
    pub value: Option<Decimal>,
    pub currency: String,
    pub status: FieldStatus,
    pub evidence: Option<Evidence>,
    pub raw_label: Option<String>,
    #[serde(default)]
    pub provenance: Provenance,
    /// Final verifier decision, once verification has run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
}

impl ExtractedField {
    pub fn is_coherent(&self) -> bool {
        (self.status == FieldStatus::Ok) == self.value.is_some()
    }

    fn without_value(concept_id: &str, currency: &str, status: FieldStatus) -> Self {
        Self {
            concept_id: concept_id.to_string(),
            value: None,
            currency: currency.to_string(),
            status,
            evidence: None,
            raw_label: None,
            provenance: Provenance::Rule,
            decision: None,
        }
    }
}

/// A line item or fact that did not map onto a canonical concept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtraItem {
    pub raw_label: String,
    pub raw_value: Option<String>,
    pub value: Option<Decimal>,
    pub currency: Option<String>,
    pub evidence: Option<Evidence>,
}

/// Uniform input to canonical mapping from either extraction track.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingInput {
    pub raw_label: String,
    pub raw_value: Option<String>,
    pub value: NumericCell,
    pub currency: Option<String>,
    pub evidence: Option<Evidence>,
}

impl From<&LineItem> for MappingInput {
    fn from(item: &LineItem) -> Self {
        Self {
            raw_label: item.raw_label.clone(),
            raw_value: Some(item.raw_value.clone()),
            value: item.value.clone(),
            currency: None,
            evidence: Some(item.source.clone()),
        }
    }
}

impl From<&TaggedFact> for MappingInput {
    fn from(fact: &TaggedFact) -> Self {
        Self {
            raw_label: fact.tag.clone(),
            raw_value: Some(fact.value.to_string()),
            value: NumericCell::Value(fact.value),
            currency: Some(fact.unit.clone()),
            evidence: Some(Evidence::Fact {
                tag: fact.tag.clone(),
                context_id: fact.context_id.clone(),
                span: fact.span,
            }),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MappingOutcome {
    /// One field per catalog concept, in catalog order.
    pub fields: Vec<ExtractedField>,
    pub extras: Vec<ExtraItem>,
    pub currency: String,
    pub anomalies: Vec<Anomaly>,
}

/// Trims, drops trailing colons, collapses whitespace and lowercases ASCII.
pub fn normalize_label(raw: &str) -> String {
    let mut s = raw.trim();
    loop {
        let stripped = s.trim_end_matches([':', '：']).trim_end();
        if stripped.len() == s.len() {
            break;
        }
        s = stripped;
    }
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for c in s.chars() {
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space && !out.is_empty() {
            out.push(' ');
        }
        pending_space = false;
        out.push(c.to_ascii_lowercase());
    }
    out
}

fn pick_currency(items: &[(&MappingInput, usize)], default: &str) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (item, _) in items {
        if let (Some(cur), true) = (item.currency.as_deref(), item.value.is_value()) {
            *counts.entry(cur).or_default() += 1;
        }
    }
    let Some(&best) = counts.values().max() else {
        return default.to_string();
    };
    let tied: Vec<&str> = counts.iter().filter(|(_, &n)| n == best).map(|(c, _)| *c).collect();
    if tied.contains(&default) {
        default.to_string()
    } else {
        tied[0].to_string()
    }
}

/// Maps extracted items onto the catalog. Every concept receives exactly
/// one field; unmatched items become extras.
pub fn map_to_canonical(
    items: &[MappingInput],
    catalog: &OntologyCatalog,
    jurisdiction: Jurisdiction,
    applicability: &BTreeSet<String>,
    default_currency: &str,
) -> MappingOutcome {
    let mut out = MappingOutcome::default();
    // concept -> (priority, input order, item)
    let mut candidates: BTreeMap<&str, Vec<(i32, usize, &MappingInput)>> = BTreeMap::new();
    let mut matched = Vec::new();
    for (order, item) in items.iter().enumerate() {
        match catalog.lookup_alias(jurisdiction, &normalize_label(&item.raw_label)) {
            Some(alias) => {
                candidates
                    .entry(alias.concept_id.as_str())
                    .or_default()
                    .push((alias.priority, order, item));
                matched.push((item, order));
            }
            None => out.extras.push(ExtraItem {
                raw_label: item.raw_label.clone(),
                raw_value: item.raw_value.clone(),
                value: item.value.value(),
                currency: item.currency.clone(),
                evidence: item.evidence.clone(),
            }),
        }
    }

    out.currency = pick_currency(&matched, default_currency);
    let currency = out.currency.clone();

    for concept in &catalog.concepts {
        let id = concept.concept_id.as_str();
        if applicability.contains(id) {
            out.fields
                .push(ExtractedField::without_value(id, &currency, FieldStatus::NotApplicable));
            continue;
        }
        let Some(cands) = candidates.get_mut(id) else {
            out.fields
                .push(ExtractedField::without_value(id, &currency, FieldStatus::Missing));
            continue;
        };
        cands.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let (priority, _, winner) = cands[0];
        if cands.len() > 1 {
            let runner_up = cands[1].0;
            let severity = if priority > runner_up {
                Severity::Info
            } else {
                Severity::Anomaly
            };
            let labels: Vec<&str> = cands.iter().map(|c| c.2.raw_label.as_str()).collect();
            out.anomalies.push(Anomaly::new(
                AnomalyKind::DuplicateMapping,
                severity,
                id,
                format!(
                    "{} items matched [{}]; kept {:?}",
                    cands.len(),
                    labels.join(", "),
                    winner.raw_label
                ),
            ));
        }

        let mut field = ExtractedField {
            concept_id: id.to_string(),
            value: None,
            currency: currency.clone(),
            status: FieldStatus::Missing,
            evidence: winner.evidence.clone(),
            raw_label: Some(winner.raw_label.clone()),
            provenance: Provenance::Rule,
            decision: None,
        };
        match &winner.value {
            NumericCell::Value(v) => {
                let foreign = winner.currency.as_deref().filter(|c| *c != currency);
                if let Some(foreign) = foreign {
                    field.status = FieldStatus::ParseError;
                    out.anomalies.push(Anomaly::anomaly(
                        AnomalyKind::MixedCurrency,
                        id,
                        format!("value {v} reported in {foreign}, bundle currency is {currency}"),
                    ));
                } else {
                    field.value = Some(*v);
                    field.status = FieldStatus::Ok;
                }
            }
            NumericCell::ParseError => field.status = FieldStatus::ParseError,
            NumericCell::Absent => field.status = FieldStatus::Missing,
        }
        out.fields.push(field);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleMetadata {
    pub market: Jurisdiction,
    pub company_id: String,
    pub entity_name: String,
    pub fiscal_year: i32,
    pub fiscal_year_start: NaiveDate,
    pub fiscal_year_end: NaiveDate,
    pub currency: String,
    pub accounting_standard: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filing_date: Option<NaiveDate>,
    pub document_locator: String,
}

/// Localized statements for one company.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementBundle {
    #[serde(flatten)]
    pub metadata: BundleMetadata,
    pub fields: Vec<ExtractedField>,
    pub extras: Vec<ExtraItem>,
    /// Sequence numbers in the company's anomaly log.
    pub anomalies: Vec<u64>,
}

impl StatementBundle {
    pub fn field(&self, concept_id: &str) -> Option<&ExtractedField> {
        self.fields.iter().find(|f| f.concept_id == concept_id)
    }

    pub fn field_mut(&mut self, concept_id: &str) -> Option<&mut ExtractedField> {
        self.fields.iter_mut().find(|f| f.concept_id == concept_id)
    }

    pub fn fields_for<'a>(
        &'a self,
        catalog: &'a OntologyCatalog,
        statement: Statement,
    ) -> impl Iterator<Item = &'a ExtractedField> + 'a {
        self.fields
            .iter()
            .filter(move |f| catalog.concept(&f.concept_id).is_some_and(|c| c.statement == statement))
    }

    /// Values of OK fields, keyed by concept id.
    pub fn ok_values(&self) -> BTreeMap<String, Decimal> {
        self.fields
            .iter()
            .filter(|f| f.status == FieldStatus::Ok)
            .filter_map(|f| f.value.map(|v| (f.concept_id.clone(), v)))
            .collect()
    }

    /// Checks one-field-per-concept and status/value coherence.
    pub fn validate(&self, catalog: &OntologyCatalog) -> Result<(), MappingError> {
        check_field_set(&self.fields, catalog)?;
        for f in &self.fields {
            if !f.is_coherent() {
                return Err(MappingError::IncoherentField {
                    concept_id: f.concept_id.clone(),
                    status: f.status,
                });
            }
        }
        Ok(())
    }
}

fn check_field_set(fields: &[ExtractedField], catalog: &OntologyCatalog) -> Result<(), MappingError> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for f in fields {
        *seen.entry(f.concept_id.as_str()).or_default() += 1;
    }
    let missing: Vec<String> = catalog
        .concepts
        .iter()
        .filter(|c| !seen.contains_key(c.concept_id.as_str()))
        .map(|c| c.concept_id.clone())
        .collect();
    let duplicated: Vec<String> = seen
        .iter()
        .filter(|(_, &n)| n > 1)
        .map(|(id, _)| id.to_string())
        .collect();
    let unknown: Vec<String> = seen
        .keys()
        .filter(|id| catalog.concept(id).is_none())
        .map(|id| id.to_string())
        .collect();
    if missing.is_empty() && duplicated.is_empty() && unknown.is_empty() {
        Ok(())
    } else {
        Err(MappingError::IncompleteFieldSet {
            missing,
            duplicated,
            unknown,
        })
    }
}

/// Builds a bundle, ordering fields as in the catalog.
pub fn assemble_bundle(
    mut fields: Vec<ExtractedField>,
    extras: Vec<ExtraItem>,
    metadata: BundleMetadata,
    catalog: &OntologyCatalog,
) -> Result<StatementBundle, MappingError> {
    check_field_set(&fields, catalog)?;
    let order: BTreeMap<&str, usize> = catalog
        .concepts
        .iter()
        .enumerate()
        .map(|(i, c)| (c.concept_id.as_str(), i))
        .collect();
    fields.sort_by_key(|f| order[f.concept_id.as_str()]);
    let bundle = StatementBundle {
        metadata,
        fields,
        extras,
        anomalies: Vec::new(),
    };
    bundle.validate(catalog)?;
    Ok(bundle)
}

/// Identity evaluation over the bundle's OK fields.
pub fn identity_report(bundle: &StatementBundle, catalog: &OntologyCatalog) -> IdentityReport {
    catalog.check_identities(&bundle.ok_values())
}

/// Identity violations and skipped rules as anomaly-log entries.
pub fn run_identity_checks(bundle: &StatementBundle, catalog: &OntologyCatalog) -> Vec<Anomaly> {
    let report = identity_report(bundle, catalog);
    report
        .violations
        .iter()
        .map(Anomaly::from_violation)
        .chain(report.skipped.iter().map(Anomaly::from_skipped))
        .collect()
}

#[derive(Debug, Clone, Deserialize)]
struct ApplicabilityEntry {
    market: Jurisdiction,
    company_id: String,
    #[serde(default)]
    not_applicable: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct ApplicabilityDocument {
    #[serde(default)]
    companies: Vec<ApplicabilityEntry>,
}

/// Per-company NOT_APPLICABLE declarations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Applicability {
    entries: BTreeMap<(Jurisdiction, String), BTreeSet<String>>,
}

impl Applicability {
    pub fn parse(document: &str) -> Result<Self, MappingError> {
        let doc: ApplicabilityDocument =
            toml::from_str(document).map_err(|e| MappingError::Applicability(e.to_string()))?;
        let mut entries: BTreeMap<(Jurisdiction, String), BTreeSet<String>> = BTreeMap::new();
        for e in doc.companies {
            entries
                .entry((e.market, e.company_id))
                .or_default()
                .extend(e.not_applicable);
        }
        Ok(Self { entries })
    }

    pub fn from_path(path: &Path) -> Result<Self, MappingError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MappingError::Applicability(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn declare(&mut self, market: Jurisdiction, company_id: &str, concept_id: &str) {
        self.entries
            .entry((market, company_id.to_string()))
            .or_default()
            .insert(concept_id.to_string());
    }

    pub fn for_company(&self, market: Jurisdiction, company_id: &str) -> BTreeSet<String> {
        self.entries
            .get(&(market, company_id.to_string()))
            .cloned()
            .unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rust_decimal_macros::dec;

    fn input(label: &str, value: NumericCell) -> MappingInput {
        MappingInput {
            raw_label: label.into(),
            raw_value: None,
            value,
            currency: None,
            evidence: None,
        }
    }

    fn meta() -> BundleMetadata {
        BundleMetadata {
            market: Jurisdiction::CN,
            company_id: "600000".into(),
            entity_name: "Test".into(),
            fiscal_year: 2023,
            fiscal_year_start: NaiveDate::from_ymd_opt(2023, 1, 1).unwrap(),
            fiscal_year_end: NaiveDate::from_ymd_opt(2023, 12, 31).unwrap(),
            currency: "CNY".into(),
            accounting_standard: "CAS".into(),
            filing_date: None,
            document_locator: "x".into(),
        }
    }

    #[test]
    fn label_normalization() {
        assert_eq!(normalize_label("  Net  Income: "), "net income");
        assert_eq!(normalize_label("营业收入"), "营业收入");
        assert_eq!(normalize_label(""), "");
        assert_eq!(normalize_label("资产总计："), "资产总计");
        assert_eq!(normalize_label("减：所得税费用"), "减：所得税费用");
        assert_eq!(normalize_label("\u{3000}Total\tAssets :: "), "total assets");
    }

    #[test]
    fn complete_filing_maps_all_ok() {
        let catalog = OntologyCatalog::default_catalog();
        let items: Vec<MappingInput> = catalog
            .concepts
            .iter()
            .map(|c| {
                let alias = catalog.aliases_for(Jurisdiction::CN, &c.concept_id)[0];
                input(&alias.pattern, NumericCell::Value(dec!(1)))
            })
            .collect();
        let out = map_to_canonical(&items, &catalog, Jurisdiction::CN, &BTreeSet::new(), "CNY");
        assert_eq!(out.fields.len(), 18);
        assert!(out.fields.iter().all(|f| f.status == FieldStatus::Ok));
        assert!(out.extras.is_empty());
    }

    #[test]
    fn single_alias_leaves_others_missing() {
        let catalog = OntologyCatalog::default_catalog();
        let items = vec![
            input("营业收入", NumericCell::Value(dec!(1234))),
            input("营业成本", NumericCell::Value(dec!(800))),
        ];
        let out = map_to_canonical(&items, &catalog, Jurisdiction::CN, &BTreeSet::new(), "CNY");
        let ok: Vec<_> = out.fields.iter().filter(|f| f.status == FieldStatus::Ok).collect();
        assert_eq!(ok.len(), 1);
        assert_eq!(ok[0].concept_id, "revenue");
        assert_eq!(ok[0].value, Some(dec!(1234)));
        assert_eq!(
            out.fields.iter().filter(|f| f.status == FieldStatus::Missing).count(),
            17
        );
        assert_eq!(out.extras.len(), 1);
        assert_eq!(out.extras[0].raw_label, "营业成本");
    }

    #[test]
    fn applicability_overrides_filing_content() {
        let catalog = OntologyCatalog::default_catalog();
        let items = vec![input("营业收入", NumericCell::Value(dec!(1)))];
        let na: BTreeSet<String> = ["revenue".to_string(), "not_a_concept".to_string()].into();
        let out = map_to_canonical(&items, &catalog, Jurisdiction::CN, &na, "CNY");
        let revenue = out.fields.iter().find(|f| f.concept_id == "revenue").unwrap();
        assert_eq!(revenue.status, FieldStatus::NotApplicable);
        assert_eq!(revenue.value, None);
        assert_eq!(
            out.fields
                .iter()
                .filter(|f| f.status == FieldStatus::NotApplicable)
                .count(),
            1
        );
    }

    #[test]
    fn parse_error_and_absent_values() {
        let catalog = OntologyCatalog::default_catalog();
        let items = vec![
            input("营业收入", NumericCell::ParseError),
            input("净利润", NumericCell::Absent),
        ];
        let out = map_to_canonical(&items, &catalog, Jurisdiction::CN, &BTreeSet::new(), "CNY");
        let status = |id: &str| out.fields.iter().find(|f| f.concept_id == id).unwrap().status;
        assert_eq!(status("revenue"), FieldStatus::ParseError);
        assert_eq!(status("net_income"), FieldStatus::Missing);
    }

    #[test]
    fn higher_priority_alias_wins_duplicates() {
        let catalog = OntologyCatalog::default_catalog();
        let items = vec![
            input("营业总收入", NumericCell::Value(dec!(2000))),
            input("营业收入", NumericCell::Value(dec!(1900))),
        ];
        let out = map_to_canonical(&items, &catalog, Jurisdiction::CN, &BTreeSet::new(), "CNY");
        assert_eq!(out.fields[0].value, Some(dec!(1900)));
        assert_eq!(out.anomalies.len(), 1);
        assert_eq!(out.anomalies[0].kind, AnomalyKind::DuplicateMapping);
    }

    #[test]
    fn minority_currency_becomes_parse_error() {
        let catalog = OntologyCatalog::default_catalog();
        let mut a = input("us-gaap:Revenues", NumericCell::Value(dec!(1)));
        a.currency = Some("USD".into());
        let mut b = input("us-gaap:Assets", NumericCell::Value(dec!(2)));
        b.currency = Some("USD".into());
        let mut c = input("us-gaap:Liabilities", NumericCell::Value(dec!(3)));
        c.currency = Some("EUR".into());
        let out = map_to_canonical(&[a, b, c], &catalog, Jurisdiction::US, &BTreeSet::new(), "USD");
        assert_eq!(out.currency, "USD");
        let liab = out.fields.iter().find(|f| f.concept_id == "total_liabilities").unwrap();
        assert_eq!(liab.status, FieldStatus::ParseError);
        assert!(liab.value.is_none());
        assert!(out.anomalies.iter().any(|a| a.kind == AnomalyKind::MixedCurrency));
    }

    #[test]
    fn assemble_requires_full_field_set() {
        let catalog = OntologyCatalog::default_catalog();
        let out = map_to_canonical(&[], &catalog, Jurisdiction::CN, &BTreeSet::new(), "CNY");
        let extras = vec![
            ExtraItem {
                raw_label: "a".into(),
                raw_value: Some("1".into()),
                value: Some(dec!(1)),
                currency: None,
                evidence: None
            };
            4
        ];
        let bundle = assemble_bundle(out.fields.clone(), extras, meta(), &catalog).unwrap();
        assert_eq!(bundle.fields.len(), 18);
        assert_eq!(bundle.extras.len(), 4);

        let mut short = out.fields.clone();
        short.pop();
        let err = assemble_bundle(short, vec![], meta(), &catalog).unwrap_err();
        assert!(
            matches!(err, MappingError::IncompleteFieldSet { ref missing, .. } if missing == &["cash_ending".to_string()])
        );
    }

    fn bundle_with(values: &[(&str, Decimal)]) -> StatementBundle {
        let catalog = OntologyCatalog::default_catalog();
        let mut fields = map_to_canonical(&[], &catalog, Jurisdiction::CN, &BTreeSet::new(), "CNY").fields;
        for (id, v) in values {
            let f = fields.iter_mut().find(|f| f.concept_id == *id).unwrap();
            f.value = Some(*v);
            f.status = FieldStatus::Ok;
        }
        assemble_bundle(fields, vec![], meta(), &catalog).unwrap()
    }

    #[test]
    fn identity_checks_on_bundles() {
        let catalog = OntologyCatalog::default_catalog();
        let consistent = bundle_with(&[
            ("total_assets", dec!(100)),
            ("current_assets", dec!(40)),
            ("noncurrent_assets", dec!(60)),
            ("total_liabilities", dec!(60)),
            ("total_equity", dec!(40)),
        ]);
        let anomalies = run_identity_checks(&consistent, &catalog);
        assert!(anomalies.iter().all(|a| a.kind != AnomalyKind::IdentityViolation));

        let off = bundle_with(&[
            ("total_assets", dec!(100)),
            ("total_liabilities", dec!(60)),
            ("total_equity", dec!(35)),
        ]);
        let anomalies = run_identity_checks(&off, &catalog);
        let violations: Vec<_> = anomalies
            .iter()
            .filter(|a| a.kind == AnomalyKind::IdentityViolation)
            .collect();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].residual, Some(dec!(5)));
        assert_eq!(violations[0].rule_id.as_deref(), Some("balance_sheet"));
        // asset roll-up skipped because current_assets is MISSING
        assert!(anomalies
            .iter()
            .any(|a| a.kind == AnomalyKind::IdentitySkipped && a.rule_id.as_deref() == Some("asset_rollup")));
    }

    #[test]
    fn applicability_sidecar() {
        let doc = r#"
[[companies]]
market = "CN"
company_id = "600000"
not_applicable = ["noncurrent_liabilities"]
"#;
        let app = Applicability::parse(doc).unwrap();
        assert_eq!(
            app.for_company(Jurisdiction::CN, "600000"),
            ["noncurrent_liabilities".to_string()].into()
        );
        assert!(app.for_company(Jurisdiction::US, "600000").is_empty());
    }
}
