//! Bounded-verifier protocol.
//!
//! The verifier may only answer KEEP, REPAIR or NEED_REVIEW. A REPAIR is
//! applied only when the field is repairable (R1), the quote occurs in the
//! context excerpt (R2) and the proposed value matches a number inside the
//! quote (R3). Every other path ends in KEEP or NEED_REVIEW.

mod verifier;

pub use verifier::{RemoteVerifier, ScriptEntry, ScriptedVerifier, Verifier, VerifierError, VerifierSpec};

use std::collections::BTreeSet;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::audit::{CompanyAudit, NewRecord, Stage};
use crate::mapping::{identity_report, ExtractedField, FieldStatus, Provenance, StatementBundle};
use crate::ontology::{CanonicalConcept, Jurisdiction, OntologyCatalog};
use crate::package::{ContextPackage, Evidence};
use crate::table::{normalize_number, numeric_tokens, NumericCell, UnitScale};

pub const PROTOCOL_VERSION: &str = "1";
pub const PROTOCOL_HEADER: &str = "X-FinRep-Proto";
pub const DEFAULT_CONTEXT_CAP: usize = 8000;
pub const DEFAULT_IN_FLIGHT: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GuardrailError {
    #[error("package has no text for the {0} statement")]
    EmptyContext(String),
    #[error("concept {0} is not part of the bundle")]
    UnknownConcept(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Keep,
    Repair,
    NeedReview,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Keep => "KEEP",
            Decision::Repair => "REPAIR",
            Decision::NeedReview => "NEED_REVIEW",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CheckName {
    R1,
    R2,
    R3,
    MalformedResponse,
    VerifierUnavailable,
    EmptyContext,
    IdentityEscalation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: CheckName,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: CheckName, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierRequest {
    pub protocol: String,
    pub market: Jurisdiction,
    pub company_id: String,
    pub field: ExtractedField,
    pub concept: CanonicalConcept,
    pub excerpt: String,
    /// Scale applied to numbers quoted from the excerpt.
    pub unit_scale: UnitScale,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierResponse {
    pub claimed_decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposed_value: Option<Decimal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_quote: Option<String>,
    #[serde(default)]
    pub rationale: String,
}

impl VerifierResponse {
    pub fn keep() -> Self {
        Self {
            claimed_decision: Decision::Keep,
            proposed_value: None,
            evidence_quote: None,
            rationale: String::new(),
        }
    }

    pub fn is_well_formed(&self) -> bool {
        self.claimed_decision != Decision::Repair || (self.proposed_value.is_some() && self.evidence_quote.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardrailResult {
    pub final_decision: Decision,
    pub checks: Vec<Check>,
    pub applied_value: Option<Decimal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<VerifierResponse>,
}

impl GuardrailResult {
    fn need_review(check: Check, response: Option<VerifierResponse>) -> Self {
        Self {
            final_decision: Decision::NeedReview,
            checks: vec![check],
            applied_value: None,
            response,
        }
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Builds the request for one field. The excerpt is a window around the
/// field's locator, or the statement region when the field has none.
pub fn build_request(
    market: Jurisdiction,
    company_id: &str,
    field: &ExtractedField,
    concept: &CanonicalConcept,
    package: &ContextPackage,
    cap: usize,
) -> Result<VerifierRequest, GuardrailError> {
    let region = package.statement_region(concept.statement);
    if region.trim().is_empty() {
        return Err(GuardrailError::EmptyContext(concept.statement.to_string()));
    }
    let span = field
        .evidence
        .as_ref()
        .and_then(Evidence::span)
        .filter(|s| s.end <= package.evidence_text.len());
    let excerpt = match span {
        Some(span) => package.window(span, cap),
        None => region.chars().take(cap).collect(),
    };
    Ok(VerifierRequest {
        protocol: PROTOCOL_VERSION.to_string(),
        market,
        company_id: company_id.to_string(),
        field: field.clone(),
        concept: concept.clone(),
        excerpt,
        unit_scale: package.unit_scale(concept.statement),
    })
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// True when `proposed` matches a number quoted in `quote` after scaling.
pub fn quote_supports_value(quote: &str, proposed: Decimal, scale: UnitScale) -> bool {
    let tolerance = Decimal::new(1, 9) * proposed.abs().max(Decimal::ONE);
    numeric_tokens(quote)
        .into_iter()
        .any(|token| match normalize_number(token, scale) {
            NumericCell::Value(v) => v.checked_sub(proposed).is_some_and(|d| d.abs() <= tolerance),
            _ => false,
        })
}

/// Applies checks R1 to R3 to a verifier response.
pub fn evaluate_response(
    field: &ExtractedField,
    response: &VerifierResponse,
    request: &VerifierRequest,
) -> GuardrailResult {
    if !response.is_well_formed() {
        return GuardrailResult::need_review(
            Check::new(CheckName::MalformedResponse, false, "REPAIR without value or quote"),
            Some(response.clone()),
        );
    }
    match response.claimed_decision {
        Decision::Keep => GuardrailResult {
            final_decision: Decision::Keep,
            checks: Vec::new(),
            applied_value: None,
            response: Some(response.clone()),
        },
        Decision::NeedReview => GuardrailResult {
            final_decision: Decision::NeedReview,
            checks: Vec::new(),
            applied_value: None,
            response: Some(response.clone()),
        },
        Decision::Repair => {
            let (Some(value), Some(quote)) = (response.proposed_value, response.evidence_quote.as_deref()) else {
                unreachable!("well-formed REPAIR carries value and quote")
            };
            let repairable = matches!(field.status, FieldStatus::Missing | FieldStatus::ParseError);
            let r1 = Check::new(CheckName::R1, repairable, format!("status {}", field.status));

            let needle = collapse_whitespace(quote);
            let grounded = !needle.is_empty() && collapse_whitespace(&request.excerpt).contains(&needle);
            let r2 = Check::new(
                CheckName::R2,
                grounded,
                if grounded {
                    "quote found in excerpt"
                } else {
                    "quote not found in excerpt"
                },
            );

            let consistent = quote_supports_value(quote, value, request.unit_scale);
            let r3 = Check::new(
                CheckName::R3,
                consistent,
                format!("proposed {value} at scale {}", request.unit_scale),
            );

            let all = repairable && grounded && consistent;
            GuardrailResult {
                final_decision: if all { Decision::Repair } else { Decision::NeedReview },
                checks: vec![r1, r2, r3],
                applied_value: all.then_some(value),
                response: Some(response.clone()),
            }
        }
    }
}

fn evidence_snippets(field: &ExtractedField, result: &GuardrailResult, excerpt: Option<&str>) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(e) = &field.evidence {
        out.push(e.to_string());
    }
    if let Some(q) = result.response.as_ref().and_then(|r| r.evidence_quote.as_ref()) {
        out.push(format!("quote:{q}"));
    }
    if let Some(x) = excerpt {
        let snippet: String = x.chars().take(240).collect();
        if !snippet.trim().is_empty() {
            out.push(format!("excerpt:{snippet}"));
        }
    }
    out
}

/// Applies a final decision to one field and records it. NEED_REVIEW
/// enqueues a review item.
pub fn apply_decision(
    bundle: &mut StatementBundle,
    concept_id: &str,
    result: &GuardrailResult,
    excerpt: Option<&str>,
    audit: &mut CompanyAudit,
) -> Result<(), GuardrailError> {
    let field = bundle
        .field_mut(concept_id)
        .ok_or_else(|| GuardrailError::UnknownConcept(concept_id.to_string()))?;
    let before = (field.status, field.value);
    let mut evidence = field.evidence.as_ref().map(|e| e.to_string());

    match result.final_decision {
        Decision::Keep => {}
        Decision::Repair => {
            let (Some(value), Some(quote)) = (
                result.applied_value,
                result.response.as_ref().and_then(|r| r.evidence_quote.clone()),
            ) else {
                unreachable!("REPAIR results carry a value and a quote")
            };
            debug_assert!(result.checks.iter().all(|c| c.passed));
            field.value = Some(value);
            field.status = FieldStatus::Ok;
            field.provenance = Provenance::Verifier;
            evidence = Some(format!("quote:{quote}"));
            field.evidence = Some(Evidence::Quote { text: quote });
        }
        Decision::NeedReview => {}
    }
    field.decision = Some(result.final_decision);

    let snapshot = field.clone();
    if result.final_decision == Decision::NeedReview {
        let snippets = evidence_snippets(&snapshot, result, excerpt);
        let reason = match result.failed_checks().next() {
            Some(c) => format!("check {:?} failed: {}", c.name, c.detail),
            None => "verifier requested review".to_string(),
        };
        audit.enqueue(&snapshot, result.response.as_ref(), &result.checks, &snippets, &reason);
    }

    let mut record = NewRecord::new(Stage::Verify, concept_id, result.final_decision.as_str().to_lowercase())
        .decision(result.final_decision)
        .detail(json!({
            "checks": result.checks,
            "claim": result.response,
            "old_status": before.0,
            "old_value": before.1,
            "new_status": snapshot.status,
            "new_value": snapshot.value,
        }));
    if let Some(e) = evidence {
        record = record.evidence(e);
    }
    audit.record(record);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationPolicy {
    pub verify_statuses: BTreeSet<FieldStatus>,
    pub context_cap: usize,
    pub in_flight: usize,
}

impl Default for VerificationPolicy {
    fn default() -> Self {
        Self {
            verify_statuses: FieldStatus::ALL.into_iter().collect(),
            context_cap: DEFAULT_CONTEXT_CAP,
            in_flight: DEFAULT_IN_FLIGHT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDecision {
    pub concept_id: String,
    pub result: GuardrailResult,
}

/// Verifies every field whose status is in the policy. Requests run
/// concurrently up to `policy.in_flight`; decisions are applied in field
/// order.
pub fn run_verification_pass(
    bundle: &mut StatementBundle,
    package: &ContextPackage,
    catalog: &OntologyCatalog,
    verifier: &dyn Verifier,
    policy: &VerificationPolicy,
    audit: &mut CompanyAudit,
) -> Vec<FieldDecision> {
    enum Job {
        Ask(VerifierRequest),
        Done(GuardrailResult),
    }

    let market = bundle.metadata.market;
    let company_id = bundle.metadata.company_id.clone();
    let jobs: Vec<(String, Job)> = bundle
        .fields
        .iter()
        .filter(|f| policy.verify_statuses.contains(&f.status))
        .filter_map(|f| {
            let concept = catalog.concept(&f.concept_id)?;
            let job = match build_request(market, &company_id, f, concept, package, policy.context_cap) {
                Ok(req) => Job::Ask(req),
                Err(e) => Job::Done(GuardrailResult::need_review(
                    Check::new(CheckName::EmptyContext, false, e.to_string()),
                    None,
                )),
            };
            Some((f.concept_id.clone(), job))
        })
        .collect();

    let answers: Vec<Mutex<Option<Result<VerifierResponse, VerifierError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = policy.in_flight.max(1).min(jobs.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((_, job)) = jobs.get(i) else { break };
                if let Job::Ask(req) = job {
                    let answer = verifier.verify(req);
                    *answers[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(answer);
                }
            });
        }
    });

    let mut decisions = Vec::with_capacity(jobs.len());
    for ((concept_id, job), answer) in jobs.into_iter().zip(answers) {
        let answer = answer.into_inner().unwrap_or_else(|p| p.into_inner());
        let (result, excerpt) = match (job, answer) {
            (Job::Done(result), _) => (result, None),
            (Job::Ask(req), Some(Ok(response))) => {
                let field = bundle.field(&concept_id).expect("field exists");
                (evaluate_response(field, &response, &req), Some(req.excerpt))
            }
            (Job::Ask(req), Some(Err(VerifierError::Malformed(msg)))) => (
                GuardrailResult::need_review(Check::new(CheckName::MalformedResponse, false, msg), None),
                Some(req.excerpt),
            ),
            (Job::Ask(req), Some(Err(e))) => (
                GuardrailResult::need_review(Check::new(CheckName::VerifierUnavailable, false, e.to_string()), None),
                Some(req.excerpt),
            ),
            (Job::Ask(req), None) => (
                GuardrailResult::need_review(Check::new(CheckName::VerifierUnavailable, false, "no answer"), None),
                Some(req.excerpt),
            ),
        };
        apply_decision(bundle, &concept_id, &result, excerpt.as_deref(), audit).expect("concept taken from the bundle");
        decisions.push(FieldDecision { concept_id, result });
    }
    decisions
}

/// Sends every field of an identity rule with a large residual to review.
/// Returns the escalated concept ids.
pub fn escalate_discrepancies(
    bundle: &mut StatementBundle,
    catalog: &OntologyCatalog,
    audit: &mut CompanyAudit,
) -> Vec<String> {
    let report = identity_report(bundle, catalog);
    let mut escalated = Vec::new();
    for violation in report.violations.iter().filter(|v| v.is_large_discrepancy()) {
        let check = Check::new(
            CheckName::IdentityEscalation,
            false,
            format!(
                "{}: residual {} exceeds 10x threshold {}",
                violation.rule_id, violation.residual, violation.threshold
            ),
        );
        for concept_id in &violation.concepts {
            let Some(field) = bundle.field_mut(concept_id) else {
                continue;
            };
            field.decision = Some(Decision::NeedReview);
            let snapshot = field.clone();
            let evidence: Vec<String> = snapshot.evidence.iter().map(|e| e.to_string()).collect();
            audit.enqueue(
                &snapshot,
                None,
                std::slice::from_ref(&check),
                &evidence,
                &format!("identity {} large discrepancy", violation.rule_id),
            );
            audit.record(
                NewRecord::new(Stage::Verify, concept_id.clone(), "escalate")
                    .decision(Decision::NeedReview)
                    .detail(json!({
                        "rule_id": violation.rule_id,
                        "residual": violation.residual,
                        "threshold": violation.threshold,
                    })),
            );
            if !escalated.contains(concept_id) {
                escalated.push(concept_id.clone());
            }
        }
    }
    escalated
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{assemble_bundle, map_to_canonical, BundleMetadata};
    use crate::ontology::Statement;
    use crate::package::{StatementBoundary, TextSpan};
    use chrono::NaiveDate;
    use rust_decimal_macros::dec;
    use std::collections::{BTreeMap, BTreeSet};

    const TEXT: &str = "利润表\n营业收入 1,234\n营业成本 800\n资产负债表\n资产总计 5,000\n";

    fn package(with_cf: bool) -> ContextPackage {
        let is_end = TEXT.find("资产负债表").unwrap();
        let mut boundaries = BTreeMap::new();
        boundaries.insert(
            Statement::IS,
            StatementBoundary {
                spans: vec![TextSpan::new(0, is_end)],
                ..Default::default()
            },
        );
        boundaries.insert(
            Statement::BS,
            StatementBoundary {
                spans: vec![TextSpan::new(is_end, TEXT.len())],
                ..Default::default()
            },
        );
        if with_cf {
            boundaries.insert(
                Statement::CF,
                StatementBoundary {
                    spans: vec![TextSpan::new(0, TEXT.len())],
                    ..Default::default()
                },
            );
        }
        ContextPackage {
            document_locator: "mem".into(),
            entity_name: "T".into(),
            fiscal_year_start: NaiveDate::from_ymd_opt(2023, 1, 1).unwrap(),
            fiscal_year_end: NaiveDate::from_ymd_opt(2023, 12, 31).unwrap(),
            currency: "CNY".into(),
            accounting_standard: "CAS".into(),
            statement_boundaries: boundaries,
            evidence_text: TEXT.into(),
        }
    }

    fn bundle() -> StatementBundle {
        let catalog = OntologyCatalog::default_catalog();
        let out = map_to_canonical(&[], &catalog, Jurisdiction::CN, &BTreeSet::new(), "CNY");
        let meta = BundleMetadata {
            market: Jurisdiction::CN,
            company_id: "600000".into(),
            entity_name: "T".into(),
            fiscal_year: 2023,
            fiscal_year_start: NaiveDate::from_ymd_opt(2023, 1, 1).unwrap(),
            fiscal_year_end: NaiveDate::from_ymd_opt(2023, 12, 31).unwrap(),
            currency: "CNY".into(),
            accounting_standard: "CAS".into(),
            filing_date: None,
            document_locator: "mem".into(),
        };
        assemble_bundle(out.fields, vec![], meta, &catalog).unwrap()
    }

    fn request_for(b: &StatementBundle, concept_id: &str) -> VerifierRequest {
        let catalog = OntologyCatalog::default_catalog();
        let field = b.field(concept_id).unwrap();
        build_request(
            Jurisdiction::CN,
            "600000",
            field,
            catalog.concept(concept_id).unwrap(),
            &package(true),
            DEFAULT_CONTEXT_CAP,
        )
        .unwrap()
    }

    fn repair(value: Decimal, quote: &str) -> VerifierResponse {
        VerifierResponse {
            claimed_decision: Decision::Repair,
            proposed_value: Some(value),
            evidence_quote: Some(quote.into()),
            rationale: "found".into(),
        }
    }

    #[test]
    fn grounded_consistent_repair_is_accepted() {
        let b = bundle();
        let req = request_for(&b, "revenue");
        let res = evaluate_response(b.field("revenue").unwrap(), &repair(dec!(1234), "营业收入 1,234"), &req);
        assert_eq!(res.final_decision, Decision::Repair);
        assert_eq!(res.applied_value, Some(dec!(1234)));
        assert!(res.checks.iter().all(|c| c.passed));
    }

    #[test]
    fn repair_on_ok_field_fails_r1() {
        let mut b = bundle();
        let f = b.field_mut("revenue").unwrap();
        f.status = FieldStatus::Ok;
        f.value = Some(dec!(1234));
        let req = request_for(&b, "revenue");
        let res = evaluate_response(b.field("revenue").unwrap(), &repair(dec!(1234), "营业收入 1,234"), &req);
        assert_eq!(res.final_decision, Decision::NeedReview);
        assert!(!res.checks[0].passed);
        assert_eq!(res.checks[0].name, CheckName::R1);
    }

    #[test]
    fn ungrounded_quote_fails_r2() {
        let b = bundle();
        let req = request_for(&b, "revenue");
        let res = evaluate_response(b.field("revenue").unwrap(), &repair(dec!(1234), "营业收入 1,235"), &req);
        assert_eq!(res.final_decision, Decision::NeedReview);
        assert!(res.failed_checks().any(|c| c.name == CheckName::R2));
    }

    #[test]
    fn inconsistent_value_fails_r3() {
        let b = bundle();
        let req = request_for(&b, "revenue");
        let res = evaluate_response(b.field("revenue").unwrap(), &repair(dec!(999), "营业收入 1,234"), &req);
        assert_eq!(res.final_decision, Decision::NeedReview);
        let failed: Vec<_> = res.failed_checks().map(|c| c.name).collect();
        assert_eq!(failed, vec![CheckName::R3]);
    }

    #[test]
    fn whitespace_in_quote_is_normalized() {
        let b = bundle();
        let req = request_for(&b, "revenue");
        let res = evaluate_response(
            b.field("revenue").unwrap(),
            &repair(dec!(1234), " 营业收入\n  1,234 "),
            &req,
        );
        assert_eq!(res.final_decision, Decision::Repair);
    }

    #[test]
    fn unit_scale_applies_to_quoted_numbers() {
        assert!(quote_supports_value(
            "营业收入 1,234",
            dec!(12340000),
            UnitScale::TEN_THOUSANDS
        ));
        assert!(!quote_supports_value(
            "营业收入 1,234",
            dec!(1234),
            UnitScale::TEN_THOUSANDS
        ));
    }

    #[test]
    fn malformed_and_claimed_review() {
        let b = bundle();
        let req = request_for(&b, "revenue");
        let field = b.field("revenue").unwrap();
        let malformed = VerifierResponse {
            claimed_decision: Decision::Repair,
            proposed_value: None,
            evidence_quote: Some("营业收入 1,234".into()),
            rationale: String::new(),
        };
        let res = evaluate_response(field, &malformed, &req);
        assert_eq!(res.final_decision, Decision::NeedReview);
        assert_eq!(res.checks[0].name, CheckName::MalformedResponse);

        let review = VerifierResponse {
            claimed_decision: Decision::NeedReview,
            ..VerifierResponse::keep()
        };
        assert_eq!(
            evaluate_response(field, &review, &req).final_decision,
            Decision::NeedReview
        );
        assert_eq!(
            evaluate_response(field, &VerifierResponse::keep(), &req).final_decision,
            Decision::Keep
        );
    }

    #[test]
    fn excerpt_is_clipped_and_empty_context_detected() {
        let catalog = OntologyCatalog::default_catalog();
        let b = bundle();
        let field = b.field("cf_operating").unwrap();
        let concept = catalog.concept("cf_operating").unwrap();
        let err = build_request(Jurisdiction::CN, "600000", field, concept, &package(false), 100).unwrap_err();
        assert!(matches!(err, GuardrailError::EmptyContext(_)));

        let mut pkg = package(true);
        pkg.evidence_text = "x".repeat(5000);
        pkg.statement_boundaries.get_mut(&Statement::CF).unwrap().spans = vec![TextSpan::new(0, 5000)];
        let req = build_request(Jurisdiction::CN, "600000", field, concept, &pkg, 100).unwrap();
        assert_eq!(req.excerpt.chars().count(), 100);
    }

    #[test]
    fn excerpt_centres_on_locator() {
        let catalog = OntologyCatalog::default_catalog();
        let mut b = bundle();
        let start = TEXT.find("营业成本").unwrap();
        b.field_mut("revenue").unwrap().evidence = Some(Evidence::Cell {
            page: 3,
            row: 7,
            column: 1,
            span: TextSpan::new(start, start + "营业成本 800".len()),
        });
        let req = build_request(
            Jurisdiction::CN,
            "600000",
            b.field("revenue").unwrap(),
            catalog.concept("revenue").unwrap(),
            &package(true),
            12,
        )
        .unwrap();
        assert!(req.excerpt.contains("营业成本 800"), "{}", req.excerpt);
    }

    #[test]
    fn apply_repair_and_review() {
        let mut b = bundle();
        let mut audit = CompanyAudit::new(Jurisdiction::CN, "600000");
        let req = request_for(&b, "revenue");
        let res = evaluate_response(b.field("revenue").unwrap(), &repair(dec!(1234), "营业收入 1,234"), &req);
        apply_decision(&mut b, "revenue", &res, Some(&req.excerpt), &mut audit).unwrap();
        let f = b.field("revenue").unwrap();
        assert_eq!(
            (f.status, f.value, f.provenance),
            (FieldStatus::Ok, Some(dec!(1234)), Provenance::Verifier)
        );
        assert_eq!(audit.trail.len(), 1);
        assert!(audit.queue.is_empty());

        let review = GuardrailResult::need_review(Check::new(CheckName::R2, false, "x"), None);
        apply_decision(&mut b, "net_income", &review, None, &mut audit).unwrap();
        assert_eq!(audit.queue.len(), 1);
        assert_eq!(audit.trail.len(), 2);
        assert!(matches!(
            apply_decision(&mut b, "nope", &review, None, &mut audit),
            Err(GuardrailError::UnknownConcept(_))
        ));
    }

    #[test]
    fn keep_leaves_values_unchanged() {
        let mut b = bundle();
        let before = b.clone();
        let mut audit = CompanyAudit::new(Jurisdiction::CN, "600000");
        let verifier = ScriptedVerifier::new(Decision::Keep, vec![]);
        let decisions = run_verification_pass(
            &mut b,
            &package(true),
            &OntologyCatalog::default_catalog(),
            &verifier,
            &VerificationPolicy::default(),
            &mut audit,
        );
        assert_eq!(decisions.len(), 18);
        assert!(decisions.iter().all(|d| d.result.final_decision == Decision::Keep));
        for (x, y) in before.fields.iter().zip(&b.fields) {
            assert_eq!((x.status, x.value), (y.status, y.value));
        }
        assert_eq!(audit.trail.len(), 18);
    }

    #[test]
    fn escalation_enqueues_rule_fields() {
        let catalog = OntologyCatalog::default_catalog();
        let mut b = bundle();
        for (id, v) in [
            ("total_assets", dec!(100)),
            ("total_liabilities", dec!(10)),
            ("total_equity", dec!(10)),
        ] {
            let f = b.field_mut(id).unwrap();
            f.status = FieldStatus::Ok;
            f.value = Some(v);
        }
        let mut audit = CompanyAudit::new(Jurisdiction::CN, "600000");
        let escalated = escalate_discrepancies(&mut b, &catalog, &mut audit);
        assert_eq!(escalated, vec!["total_assets", "total_liabilities", "total_equity"]);
        assert_eq!(audit.queue.len(), 3);
        assert_eq!(b.field("total_equity").unwrap().decision, Some(Decision::NeedReview));
    }
}
