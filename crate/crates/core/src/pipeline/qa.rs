//! Template question answering over finished bundles. Answers are read
//! from the bundle as stored, never recomputed.

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::guardrail::Decision;
use crate::mapping::{FieldStatus, Provenance, StatementBundle};
use crate::ontology::{Jurisdiction, OntologyCatalog};

/// (template id, concept id, synonyms).
pub const TEMPLATES: &[(&str, &str, &[&str])] = &[
    (
        "revenue",
        "revenue",
        &[
            "revenue",
            "revenues",
            "sales",
            "net sales",
            "total revenue",
            "turnover",
            "营业收入",
            "营业总收入",
            "売上高",
        ],
    ),
    (
        "net_income",
        "net_income",
        &[
            "net income",
            "net profit",
            "net earnings",
            "profit for the year",
            "净利润",
            "当期純利益",
        ],
    ),
    (
        "operating_cash_flow",
        "cf_operating",
        &[
            "operating cash flow",
            "cash flow from operations",
            "cash flows from operating activities",
            "cash from operations",
            "operating cash",
            "经营活动产生的现金流量净额",
            "经营现金流",
            "営業キャッシュ・フロー",
        ],
    ),
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QaError {
    #[error("no bundle for {0}/{1}")]
    UnknownCompany(String, String),
    #[error("no template matches {0:?}")]
    UnknownTemplate(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaQuery {
    pub market: Jurisdiction,
    pub company_id: String,
    #[serde(default)]
    pub template_id: Option<String>,
    #[serde(default)]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaAnswer {
    pub market: Jurisdiction,
    pub company_id: String,
    pub template_id: String,
    pub concept_id: String,
    pub display_name: String,
    pub status: FieldStatus,
    pub value: Option<Decimal>,
    pub currency: String,
    pub evidence: Option<String>,
    pub provenance: Provenance,
    pub decision: Option<Decision>,
}

/// Resolves a template id, or the template whose longest synonym occurs in
/// the free text (case-insensitive).
pub fn match_template(template_id: Option<&str>, text: Option<&str>) -> Result<(&'static str, &'static str), QaError> {
    if let Some(id) = template_id {
        return TEMPLATES
            .iter()
            .find(|(t, _, _)| *t == id.trim())
            .map(|(t, c, _)| (*t, *c))
            .ok_or_else(|| QaError::UnknownTemplate(id.to_string()));
    }
    let raw = text.unwrap_or("");
    let query = raw.to_lowercase();
    let mut best: Option<(usize, &'static str, &'static str)> = None;
    for (t, c, synonyms) in TEMPLATES {
        for s in *synonyms {
            let len = s.chars().count();
            if query.contains(&s.to_lowercase()) && best.is_none_or(|(l, _, _)| len > l) {
                best = Some((len, t, c));
            }
        }
    }
    best.map(|(_, t, c)| (t, c))
        .ok_or_else(|| QaError::UnknownTemplate(raw.to_string()))
}

pub fn answer_template_query(
    bundles: &[StatementBundle],
    catalog: &OntologyCatalog,
    query: &QaQuery,
) -> Result<QaAnswer, QaError> {
    let bundle = bundles
        .iter()
        .find(|b| b.metadata.market == query.market && b.metadata.company_id == query.company_id)
        .ok_or_else(|| QaError::UnknownCompany(query.market.to_string(), query.company_id.clone()))?;
    let (template_id, concept_id) = match_template(query.template_id.as_deref(), query.text.as_deref())?;
    let field = bundle
        .field(concept_id)
        .ok_or_else(|| QaError::UnknownTemplate(template_id.to_string()))?;
    Ok(QaAnswer {
        market: query.market,
        company_id: query.company_id.clone(),
        template_id: template_id.to_string(),
        concept_id: concept_id.to_string(),
        display_name: catalog
            .concept(concept_id)
            .map(|c| c.display_name.clone())
            .unwrap_or_default(),
        status: field.status,
        value: field.value,
        currency: field.currency.clone(),
        evidence: field.evidence.as_ref().map(|e| e.to_string()),
        provenance: field.provenance,
        decision: field.decision,
    })
}
