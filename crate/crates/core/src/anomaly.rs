//! Irregularities raised by ingestion, mapping and identity checks before
//! they are sequenced into a company's anomaly log.

use std::fmt;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ontology::{IdentityViolation, Severity, SkippedRule};

/// Open enumeration of anomaly kinds. Unknown names round-trip through
/// [`AnomalyKind::Other`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AnomalyKind {
    DanglingContext,
    DanglingUnit,
    MalformedFact,
    DuplicateFact,
    PeriodMismatch,
    ColumnFallback,
    UnitsAssumed,
    MalformedBlock,
    MissingStatement,
    DuplicateMapping,
    MixedCurrency,
    IdentityViolation,
    IdentitySkipped,
    UnknownApplicability,
    CompanyFailed,
    Other(String),
}

impl AnomalyKind {
    pub fn as_str(&self) -> &str {
        match self {
            AnomalyKind::DanglingContext => "DanglingContext",
            AnomalyKind::DanglingUnit => "DanglingUnit",
            AnomalyKind::MalformedFact => "MalformedFact",
            AnomalyKind::DuplicateFact => "DuplicateFact",
            AnomalyKind::PeriodMismatch => "PeriodMismatch",
            AnomalyKind::ColumnFallback => "ColumnFallback",
            AnomalyKind::UnitsAssumed => "UnitsAssumed",
            AnomalyKind::MalformedBlock => "MalformedBlock",
            AnomalyKind::MissingStatement => "MissingStatement",
            AnomalyKind::DuplicateMapping => "DuplicateMapping",
            AnomalyKind::MixedCurrency => "MixedCurrency",
            AnomalyKind::IdentityViolation => "IdentityViolation",
            AnomalyKind::IdentitySkipped => "IdentitySkipped",
            AnomalyKind::UnknownApplicability => "UnknownApplicability",
            AnomalyKind::CompanyFailed => "CompanyFailed",
            AnomalyKind::Other(name) => name,
        }
    }
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnomalyKind {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "DanglingContext" => AnomalyKind::DanglingContext,
            "DanglingUnit" => AnomalyKind::DanglingUnit,
            "MalformedFact" => AnomalyKind::MalformedFact,
            "DuplicateFact" => AnomalyKind::DuplicateFact,
            "PeriodMismatch" => AnomalyKind::PeriodMismatch,
            "ColumnFallback" => AnomalyKind::ColumnFallback,
            "UnitsAssumed" => AnomalyKind::UnitsAssumed,
            "MalformedBlock" => AnomalyKind::MalformedBlock,
            "MissingStatement" => AnomalyKind::MissingStatement,
            "DuplicateMapping" => AnomalyKind::DuplicateMapping,
            "MixedCurrency" => AnomalyKind::MixedCurrency,
            "IdentityViolation" => AnomalyKind::IdentityViolation,
            "IdentitySkipped" => AnomalyKind::IdentitySkipped,
            "UnknownApplicability" => AnomalyKind::UnknownApplicability,
            "CompanyFailed" => AnomalyKind::CompanyFailed,
            other => AnomalyKind::Other(other.to_string()),
        })
    }
}

impl Serialize for AnomalyKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for AnomalyKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(s.parse().unwrap_or_else(|e| match e {}))
    }
}

/// An anomaly that has not yet been assigned a sequence number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anomaly {
    pub kind: AnomalyKind,
    pub severity: Severity,
    /// Concept id, tag, or document region the anomaly concerns.
    pub target: String,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<Decimal>,
}

impl Anomaly {
    pub fn new(kind: AnomalyKind, severity: Severity, target: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            kind,
            severity,
            target: target.into(),
            detail: detail.into(),
            rule_id: None,
            residual: None,
        }
    }

    pub fn anomaly(kind: AnomalyKind, target: impl Into<String>, detail: impl Into<String>) -> Self {
        Self::new(kind, Severity::Anomaly, target, detail)
    }

    pub fn info(kind: AnomalyKind, target: impl Into<String>, detail: impl Into<String>) -> Self {
        Self::new(kind, Severity::Info, target, detail)
    }

    pub fn from_violation(v: &IdentityViolation) -> Self {
        Self {
            kind: AnomalyKind::IdentityViolation,
            severity: v.severity,
            target: v.concepts.first().cloned().unwrap_or_default(),
            detail: format!(
                "lhs {} vs rhs {} (threshold {}) over {}",
                v.lhs_value.normalize(),
                v.rhs_value.normalize(),
                v.threshold.normalize(),
                v.concepts.join(",")
            ),
            rule_id: Some(v.rule_id.clone()),
            residual: Some(v.residual.normalize()),
        }
    }

    pub fn from_skipped(s: &SkippedRule) -> Self {
        Self {
            kind: AnomalyKind::IdentitySkipped,
            severity: Severity::Info,
            target: s.rule_id.clone(),
            detail: format!("missing operands: {}", s.missing.join(",")),
            rule_id: Some(s.rule_id.clone()),
            residual: None,
        }
    }
}
