//! Canonical concept inventory, jurisdiction alias dictionaries and
//! accounting identity rules.
//!
//! The catalog is loaded once and never mutated; every other stage of the
//! pipeline borrows it read-only.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::normalize_label;

const DEFAULT_CATALOG: &str = include_str!("../data/catalog.toml");

/// Default relative tolerance for identity rules.
pub const DEFAULT_IDENTITY_TOLERANCE: Decimal = Decimal::from_parts(1, 0, 0, false, 4);

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("malformed catalog: {0}")]
    Malformed(String),
    #[error("invalid catalog: {0}")]
    Invalid(String),
    #[error("cannot read catalog {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Statement {
    IS,
    BS,
    CF,
}

impl Statement {
    pub const ALL: [Statement; 3] = [Statement::IS, Statement::BS, Statement::CF];

    pub fn as_str(self) -> &'static str {
        match self {
            Statement::IS => "IS",
            Statement::BS => "BS",
            Statement::CF => "CF",
        }
    }

    /// Aggregation every concept on this statement must use.
    pub fn aggregation(self) -> Aggregation {
        match self {
            Statement::BS => Aggregation::Point,
            Statement::IS | Statement::CF => Aggregation::Flow,
        }
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Statement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "IS" => Ok(Statement::IS),
            "BS" => Ok(Statement::BS),
            "CF" => Ok(Statement::CF),
            other => Err(format!("unknown statement {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Point,
    Flow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Jurisdiction {
    US,
    JP,
    CN,
}

impl Jurisdiction {
    pub const ALL: [Jurisdiction; 3] = [Jurisdiction::US, Jurisdiction::JP, Jurisdiction::CN];

    pub fn as_str(self) -> &'static str {
        match self {
            Jurisdiction::US => "US",
            Jurisdiction::JP => "JP",
            Jurisdiction::CN => "CN",
        }
    }

    /// Tag-native markets ship machine-readable instances; the rest ship
    /// text-extracted tables.
    pub fn is_tag_native(self) -> bool {
        matches!(self, Jurisdiction::US | Jurisdiction::JP)
    }
}

impl fmt::Display for Jurisdiction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Jurisdiction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "US" => Ok(Jurisdiction::US),
            "JP" => Ok(Jurisdiction::JP),
            "CN" => Ok(Jurisdiction::CN),
            other => Err(format!("unknown market {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Anomaly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalConcept {
    #[serde(rename = "id")]
    pub concept_id: String,
    pub statement: Statement,
    pub display_name: String,
    pub aggregation: Aggregation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliasEntry {
    pub jurisdiction: Jurisdiction,
    pub pattern: String,
    #[serde(rename = "concept")]
    pub concept_id: String,
    #[serde(default)]
    pub priority: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    Plus,
    Minus,
}

impl TryFrom<i8> for Sign {
    type Error = String;

    fn try_from(value: i8) -> Result<Self, Self::Error> {
        match value {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(format!("sign must be 1 or -1, got {other}")),
        }
    }
}

impl From<Sign> for i8 {
    fn from(sign: Sign) -> i8 {
        match sign {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityTerm {
    #[serde(rename = "concept")]
    pub concept_id: String,
    pub sign: Sign,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityRule {
    #[serde(rename = "id")]
    pub rule_id: String,
    pub lhs: String,
    pub rhs: Vec<IdentityTerm>,
    #[serde(default = "default_tolerance")]
    pub tolerance_rel: Decimal,
    #[serde(default = "default_severity")]
    pub severity: Severity,
    /// Only the cash reconciliation rule may combine point and flow concepts.
    #[serde(default)]
    pub allow_mixed_aggregation: bool,
}

impl IdentityRule {
    pub fn concept_ids(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.lhs.as_str()).chain(self.rhs.iter().map(|t| t.concept_id.as_str()))
    }
}

fn default_tolerance() -> Decimal {
    DEFAULT_IDENTITY_TOLERANCE
}

fn default_severity() -> Severity {
    Severity::Anomaly
}

#[derive(Debug, Deserialize)]
struct CatalogDocument {
    version: String,
    #[serde(default)]
    concepts: Vec<CanonicalConcept>,
    #[serde(default)]
    aliases: Vec<AliasEntry>,
    #[serde(default)]
    identities: Vec<IdentityRule>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Enforce the 5/7/6 per-statement concept counts.
    pub strict18: bool,
}

/// Validated, immutable ontology.
#[derive(Debug, Clone, PartialEq)]
pub struct OntologyCatalog {
    pub version: String,
    pub concepts: Vec<CanonicalConcept>,
    pub aliases: Vec<AliasEntry>,
    pub identities: Vec<IdentityRule>,
    // (jurisdiction, normalized pattern) -> alias indices, best first
    alias_index: BTreeMap<(Jurisdiction, String), Vec<usize>>,
    concept_index: BTreeMap<String, usize>,
}

impl OntologyCatalog {
    /// The shipped 18-concept catalog.
    pub fn default_catalog() -> Self {
        load_catalog(DEFAULT_CATALOG, LoadOptions { strict18: true }).expect("shipped catalog is valid")
    }

    pub fn from_path(path: &Path, options: LoadOptions) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        load_catalog(&text, options)
    }

    pub fn concept(&self, concept_id: &str) -> Option<&CanonicalConcept> {
        self.concept_index.get(concept_id).map(|&i| &self.concepts[i])
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn concepts_for(&self, statement: Statement) -> impl Iterator<Item = &CanonicalConcept> {
        self.concepts.iter().filter(move |c| c.statement == statement)
    }

    pub fn statement_counts(&self) -> (usize, usize, usize) {
        let count = |s| self.concepts_for(s).count();
        (count(Statement::IS), count(Statement::BS), count(Statement::CF))
    }

    /// Best alias entry for an already-normalized label or tag.
    pub fn lookup_alias(&self, jurisdiction: Jurisdiction, label_or_tag: &str) -> Option<&AliasEntry> {
        self.alias_index
            .get(&(jurisdiction, label_or_tag.to_string()))
            .and_then(|hits| hits.first())
            .map(|&i| &self.aliases[i])
    }

    /// Highest-priority concept for a normalized label or tag. Equal
    /// priorities resolve to the lexicographically smallest concept id.
    pub fn lookup_by_alias(&self, jurisdiction: Jurisdiction, label_or_tag: &str) -> Option<&str> {
        self.lookup_alias(jurisdiction, label_or_tag)
            .map(|a| a.concept_id.as_str())
    }

    /// Raw alias patterns for one concept in one jurisdiction.
    pub fn aliases_for(&self, jurisdiction: Jurisdiction, concept_id: &str) -> Vec<&AliasEntry> {
        self.aliases
            .iter()
            .filter(|a| a.jurisdiction == jurisdiction && a.concept_id == concept_id)
            .collect()
    }

    /// Evaluates every identity rule against the supplied values.
    pub fn check_identities(&self, values: &BTreeMap<String, Decimal>) -> IdentityReport {
        let mut report = IdentityReport::default();
        for rule in &self.identities {
            let missing: Vec<String> = rule
                .concept_ids()
                .filter(|id| !values.contains_key(*id))
                .map(str::to_string)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if !missing.is_empty() {
                report.skipped.push(SkippedRule {
                    rule_id: rule.rule_id.clone(),
                    missing,
                });
                continue;
            }
            let lhs = values[&rule.lhs];
            let rhs: Decimal = rule
                .rhs
                .iter()
                .map(|t| match t.sign {
                    Sign::Plus => values[&t.concept_id],
                    Sign::Minus => -values[&t.concept_id],
                })
                .sum();
            let residual = lhs - rhs;
            let threshold = rule.tolerance_rel * lhs.abs().max(Decimal::ONE);
            if residual.abs() > threshold {
                report.violations.push(IdentityViolation {
                    rule_id: rule.rule_id.clone(),
                    lhs_value: lhs,
                    rhs_value: rhs,
                    residual,
                    threshold,
                    severity: rule.severity,
                    concepts: rule.concept_ids().map(str::to_string).collect(),
                });
            } else {
                report.satisfied.push(rule.rule_id.clone());
            }
        }
        report
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdentityViolation {
    pub rule_id: String,
    pub lhs_value: Decimal,
    pub rhs_value: Decimal,
    /// lhs minus the signed sum of the right-hand side.
    pub residual: Decimal,
    /// tolerance_rel · max(1, |lhs|)
    pub threshold: Decimal,
    pub severity: Severity,
    pub concepts: Vec<String>,
}

impl IdentityViolation {
    /// Residual more than ten times the allowed threshold.
    pub fn is_large_discrepancy(&self) -> bool {
        self.residual.abs() > self.threshold * Decimal::TEN
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedRule {
    pub rule_id: String,
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IdentityReport {
    pub violations: Vec<IdentityViolation>,
    pub skipped: Vec<SkippedRule>,
    pub satisfied: Vec<String>,
}

/// Parses and validates a catalog document.
pub fn load_catalog(document: &str, options: LoadOptions) -> Result<OntologyCatalog, CatalogError> {
    let doc: CatalogDocument = toml::from_str(document).map_err(|e| CatalogError::Malformed(e.to_string()))?;

    let mut concept_index = BTreeMap::new();
    for (i, concept) in doc.concepts.iter().enumerate() {
        if concept.concept_id.is_empty() {
            return Err(CatalogError::Invalid("empty concept id".into()));
        }
        if concept_index.insert(concept.concept_id.clone(), i).is_some() {
            return Err(CatalogError::Invalid(format!(
                "duplicate concept id {:?}",
                concept.concept_id
            )));
        }
        if concept.aggregation != concept.statement.aggregation() {
            return Err(CatalogError::Invalid(format!(
                "concept {:?} on {} must use {:?} aggregation",
                concept.concept_id,
                concept.statement,
                concept.statement.aggregation()
            )));
        }
    }

    let mut seen_patterns = BTreeSet::new();
    let mut alias_index: BTreeMap<(Jurisdiction, String), Vec<usize>> = BTreeMap::new();
    for (i, alias) in doc.aliases.iter().enumerate() {
        if !concept_index.contains_key(&alias.concept_id) {
            return Err(CatalogError::Invalid(format!(
                "alias {:?} references unknown concept {:?}",
                alias.pattern, alias.concept_id
            )));
        }
        if !seen_patterns.insert((alias.jurisdiction, alias.pattern.clone())) {
            return Err(CatalogError::Invalid(format!(
                "duplicate alias {:?} for {}",
                alias.pattern, alias.jurisdiction
            )));
        }
        alias_index
            .entry((alias.jurisdiction, normalize_label(&alias.pattern)))
            .or_default()
            .push(i);
    }
    for hits in alias_index.values_mut() {
        hits.sort_by(|&a, &b| {
            let (a, b) = (&doc.aliases[a], &doc.aliases[b]);
            b.priority
                .cmp(&a.priority)
                .then_with(|| a.concept_id.cmp(&b.concept_id))
        });
    }

    let mut rule_ids = BTreeSet::new();
    for rule in &doc.identities {
        if !rule_ids.insert(rule.rule_id.clone()) {
            return Err(CatalogError::Invalid(format!(
                "duplicate identity rule {:?}",
                rule.rule_id
            )));
        }
        if rule.rhs.is_empty() {
            return Err(CatalogError::Invalid(format!(
                "identity rule {:?} has an empty right-hand side",
                rule.rule_id
            )));
        }
        if rule.tolerance_rel.is_sign_negative() {
            return Err(CatalogError::Invalid(format!(
                "identity rule {:?} has a negative tolerance",
                rule.rule_id
            )));
        }
        let mut aggregations = BTreeSet::new();
        for id in rule.concept_ids() {
            let Some(&idx) = concept_index.get(id) else {
                return Err(CatalogError::Invalid(format!(
                    "identity rule {:?} references unknown concept {id:?}",
                    rule.rule_id
                )));
            };
            aggregations.insert(doc.concepts[idx].aggregation);
        }
        if aggregations.len() > 1 && !rule.allow_mixed_aggregation {
            return Err(CatalogError::Invalid(format!(
                "identity rule {:?} mixes point and flow concepts",
                rule.rule_id
            )));
        }
    }

    let catalog = OntologyCatalog {
        version: doc.version,
        concepts: doc.concepts,
        aliases: doc.aliases,
        identities: doc.identities,
        alias_index,
        concept_index,
    };

    if options.strict18 {
        let counts = catalog.statement_counts();
        if counts != (5, 7, 6) {
            return Err(CatalogError::Invalid(format!(
                "strict18 expects IS/BS/CF counts (5, 7, 6), found {counts:?}"
            )));
        }
    }
    Ok(catalog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rust_decimal_macros::dec;

    fn values(pairs: &[(&str, Decimal)]) -> BTreeMap<String, Decimal> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn bs_only_catalog() -> OntologyCatalog {
        load_catalog(
            r#"
version = "t"
[[concepts]]
id = "total_assets"
statement = "BS"
display_name = "A"
aggregation = "point"
[[concepts]]
id = "total_liabilities"
statement = "BS"
display_name = "L"
aggregation = "point"
[[concepts]]
id = "total_equity"
statement = "BS"
display_name = "E"
aggregation = "point"
[[identities]]
id = "balance_sheet"
lhs = "total_assets"
rhs = [{ concept = "total_liabilities", sign = 1 }, { concept = "total_equity", sign = 1 }]
tolerance_rel = "0.000001"
"#,
            LoadOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn default_catalog_has_eighteen_targets() {
        let catalog = OntologyCatalog::default_catalog();
        assert_eq!(catalog.len(), 18);
        assert_eq!(catalog.statement_counts(), (5, 7, 6));
        assert_eq!(catalog.identities.len(), 5);
    }

    #[test]
    fn empty_catalog_is_valid_without_strict18() {
        let catalog = load_catalog("version = \"0\"\nconcepts = []\n", LoadOptions::default()).unwrap();
        assert!(catalog.is_empty());
        let err = load_catalog("version = \"0\"\n", LoadOptions { strict18: true }).unwrap_err();
        assert!(matches!(err, CatalogError::Invalid(_)));
    }

    #[test]
    fn dangling_alias_is_rejected() {
        let doc = r#"
version = "t"
[[concepts]]
id = "revenue"
statement = "IS"
display_name = "Revenue"
aggregation = "flow"
[[aliases]]
jurisdiction = "US"
pattern = "Foo"
concept = "X9"
"#;
        let err = load_catalog(doc, LoadOptions::default()).unwrap_err();
        assert!(matches!(err, CatalogError::Invalid(ref m) if m.contains("X9")), "{err}");
    }

    #[test]
    fn syntax_errors_are_malformed() {
        let err = load_catalog("version = ", LoadOptions::default()).unwrap_err();
        assert!(matches!(err, CatalogError::Malformed(_)));
    }

    #[test]
    fn duplicate_concepts_and_aliases_are_rejected() {
        let dup_concept = r#"
version = "t"
[[concepts]]
id = "a"
statement = "IS"
display_name = "A"
aggregation = "flow"
[[concepts]]
id = "a"
statement = "IS"
display_name = "A2"
aggregation = "flow"
"#;
        assert!(matches!(
            load_catalog(dup_concept, LoadOptions::default()),
            Err(CatalogError::Invalid(_))
        ));
        let dup_alias = r#"
version = "t"
[[concepts]]
id = "a"
statement = "IS"
display_name = "A"
aggregation = "flow"
[[aliases]]
jurisdiction = "US"
pattern = "X"
concept = "a"
[[aliases]]
jurisdiction = "US"
pattern = "X"
concept = "a"
"#;
        assert!(matches!(
            load_catalog(dup_alias, LoadOptions::default()),
            Err(CatalogError::Invalid(_))
        ));
    }

    #[test]
    fn statement_aggregation_mismatch_is_rejected() {
        let doc = r#"
version = "t"
[[concepts]]
id = "a"
statement = "BS"
display_name = "A"
aggregation = "flow"
"#;
        assert!(matches!(
            load_catalog(doc, LoadOptions::default()),
            Err(CatalogError::Invalid(_))
        ));
    }

    #[test]
    fn mixed_aggregation_needs_explicit_allowance() {
        let doc = |allow: bool| {
            format!(
                r#"
version = "t"
[[concepts]]
id = "cash"
statement = "BS"
display_name = "Cash"
aggregation = "point"
[[concepts]]
id = "flow"
statement = "CF"
display_name = "Flow"
aggregation = "flow"
[[identities]]
id = "r"
lhs = "cash"
rhs = [{{ concept = "flow", sign = 1 }}]
allow_mixed_aggregation = {allow}
"#
            )
        };
        assert!(load_catalog(&doc(false), LoadOptions::default()).is_err());
        assert!(load_catalog(&doc(true), LoadOptions::default()).is_ok());
    }

    #[test]
    fn alias_lookup_hits_and_misses() {
        let catalog = OntologyCatalog::default_catalog();
        let us = normalize_label("us-gaap:Revenues");
        assert_eq!(catalog.lookup_by_alias(Jurisdiction::US, &us), Some("revenue"));
        assert_eq!(catalog.lookup_by_alias(Jurisdiction::CN, "营业收入"), Some("revenue"));
        assert_eq!(catalog.lookup_by_alias(Jurisdiction::JP, "nonexistentlabel"), None);
        // jurisdiction scoping
        assert_eq!(catalog.lookup_by_alias(Jurisdiction::US, "营业收入"), None);
    }

    #[test]
    fn alias_ties_break_on_priority_then_concept_id() {
        let doc = r#"
version = "t"
[[concepts]]
id = "b"
statement = "IS"
display_name = "B"
aggregation = "flow"
[[concepts]]
id = "a"
statement = "IS"
display_name = "A"
aggregation = "flow"
[[concepts]]
id = "c"
statement = "IS"
display_name = "C"
aggregation = "flow"
[[aliases]]
jurisdiction = "US"
pattern = "Sales"
concept = "b"
priority = 1
[[aliases]]
jurisdiction = "US"
pattern = "sales"
concept = "a"
priority = 1
[[aliases]]
jurisdiction = "US"
pattern = "SALES "
concept = "c"
priority = 0
"#;
        let catalog = load_catalog(doc, LoadOptions::default()).unwrap();
        assert_eq!(catalog.lookup_by_alias(Jurisdiction::US, "sales"), Some("a"));
        // pure function
        assert_eq!(
            catalog.lookup_by_alias(Jurisdiction::US, "sales"),
            catalog.lookup_by_alias(Jurisdiction::US, "sales")
        );
    }

    #[test]
    fn identity_exact_balance_has_no_violation() {
        let catalog = bs_only_catalog();
        let report = catalog.check_identities(&values(&[
            ("total_assets", dec!(100)),
            ("total_liabilities", dec!(60)),
            ("total_equity", dec!(40)),
        ]));
        assert!(report.violations.is_empty());
        assert_eq!(report.satisfied, vec!["balance_sheet".to_string()]);
    }

    #[test]
    fn identity_violation_reports_residual() {
        let catalog = bs_only_catalog();
        let report = catalog.check_identities(&values(&[
            ("total_assets", dec!(100)),
            ("total_liabilities", dec!(60)),
            ("total_equity", dec!(35)),
        ]));
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].residual, dec!(5));
        assert_eq!(report.violations[0].rule_id, "balance_sheet");
    }

    #[test]
    fn identity_with_missing_operand_is_skipped() {
        let catalog = bs_only_catalog();
        let report = catalog.check_identities(&values(&[("total_assets", dec!(100)), ("total_liabilities", dec!(60))]));
        assert!(report.violations.is_empty());
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].missing, vec!["total_equity".to_string()]);
    }

    #[test]
    fn catalog_load_is_deterministic() {
        let a = load_catalog(DEFAULT_CATALOG, LoadOptions::default()).unwrap();
        let b = load_catalog(DEFAULT_CATALOG, LoadOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
