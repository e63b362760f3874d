//! Append-only audit trail, anomaly log, review queue and human
//! resolutions.
//!
//! Records carry logical sequence numbers assigned by the log itself.
//! Wall-clock timestamps are added only when a clock is injected, so
//! default outputs are byte-reproducible.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex, MutexGuard};

use rust_decimal::Decimal;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::anomaly::Anomaly;
use crate::guardrail::{Check, Decision, VerifierResponse};
use crate::mapping::{ExtractedField, FieldStatus, Provenance, StatementBundle};
use crate::ontology::Jurisdiction;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("review item {0} not found")]
    ItemNotFound(String),
    #[error("review item {0} is already resolved")]
    AlreadyResolved(String),
    #[error("concept {0} is not part of the bundle")]
    UnknownConcept(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Acquire,
    Identify,
    Extract,
    Map,
    Verify,
    Review,
    Output,
}

/// Produces optional record timestamps.
pub type Clock = Arc<dyn Fn() -> String + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub seq: u64,
    pub stage: Stage,
    pub market: Jurisdiction,
    pub company_id: String,
    /// Concept id, or `document` for filing-level events.
    pub target: String,
    pub event: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<String>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub detail: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

/// A record before the trail assigns its sequence number.
#[derive(Debug, Clone, PartialEq)]
pub struct NewRecord {
    pub stage: Stage,
    pub target: String,
    pub event: String,
    pub decision: Option<Decision>,
    pub evidence: Option<String>,
    pub detail: Value,
}

impl NewRecord {
    pub fn new(stage: Stage, target: impl Into<String>, event: impl Into<String>) -> Self {
        Self {
            stage,
            target: target.into(),
            event: event.into(),
            decision: None,
            evidence: None,
            detail: Value::Null,
        }
    }

    pub fn decision(mut self, decision: Decision) -> Self {
        self.decision = Some(decision);
        self
    }

    pub fn evidence(mut self, evidence: impl Into<String>) -> Self {
        self.evidence = Some(evidence.into());
        self
    }

    pub fn detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// Audit trail of one company run. Appends are serialized internally.
pub struct AuditTrail {
    market: Jurisdiction,
    company_id: String,
    records: Mutex<Vec<AuditRecord>>,
    clock: Option<Clock>,
}

impl fmt::Debug for AuditTrail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AuditTrail")
            .field("market", &self.market)
            .field("company_id", &self.company_id)
            .field("len", &self.len())
            .finish()
    }
}

impl AuditTrail {
    pub fn new(market: Jurisdiction, company_id: impl Into<String>) -> Self {
        Self {
            market,
            company_id: company_id.into(),
            records: Mutex::new(Vec::new()),
            clock: None,
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = Some(clock);
        self
    }

    /// Resumes a trail from previously exported records.
    pub fn from_records(market: Jurisdiction, company_id: impl Into<String>, records: Vec<AuditRecord>) -> Self {
        let trail = Self::new(market, company_id);
        *lock(&trail.records) = records;
        trail
    }

    /// Appends a record and returns its sequence number.
    pub fn append(&self, record: NewRecord) -> u64 {
        let timestamp = self.clock.as_ref().map(|c| c());
        let mut records = lock(&self.records);
        let seq = records.last().map_or(1, |r| r.seq + 1);
        records.push(AuditRecord {
            seq,
            stage: record.stage,
            market: self.market,
            company_id: self.company_id.clone(),
            target: record.target,
            event: record.event,
            decision: record.decision,
            evidence: record.evidence,
            detail: record.detail,
            timestamp,
        });
        seq
    }

    pub fn records(&self) -> Vec<AuditRecord> {
        lock(&self.records).clone()
    }

    pub fn len(&self) -> usize {
        lock(&self.records).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyRecord {
    pub seq: u64,
    pub market: Jurisdiction,
    pub company_id: String,
    #[serde(flatten)]
    pub anomaly: Anomaly,
}

#[derive(Debug)]
pub struct AnomalyLog {
    market: Jurisdiction,
    company_id: String,
    records: Mutex<Vec<AnomalyRecord>>,
}

impl AnomalyLog {
    pub fn new(market: Jurisdiction, company_id: impl Into<String>) -> Self {
        Self {
            market,
            company_id: company_id.into(),
            records: Mutex::new(Vec::new()),
        }
    }

    pub fn append(&self, anomaly: Anomaly) -> u64 {
        let mut records = lock(&self.records);
        let seq = records.last().map_or(1, |r| r.seq + 1);
        records.push(AnomalyRecord {
            seq,
            market: self.market,
            company_id: self.company_id.clone(),
            anomaly,
        });
        seq
    }

    pub fn records(&self) -> Vec<AnomalyRecord> {
        lock(&self.records).clone()
    }

    pub fn len(&self) -> usize {
        lock(&self.records).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewState {
    Open,
    Resolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ResolutionAction {
    AcceptRuleValue,
    SetValue {
        #[serde(deserialize_with = "lenient_decimal")]
        value: Decimal,
    },
    MarkNotApplicable,
    Reject,
}

impl ResolutionAction {
    pub fn name(&self) -> &'static str {
        match self {
            ResolutionAction::AcceptRuleValue => "accept_rule_value",
            ResolutionAction::SetValue { .. } => "set_value",
            ResolutionAction::MarkNotApplicable => "mark_not_applicable",
            ResolutionAction::Reject => "reject",
        }
    }
}

// Accepts "500", 500 or 500.5.
fn lenient_decimal<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Decimal, D::Error> {
    use std::str::FromStr;
    match Value::deserialize(deserializer)? {
        Value::String(s) => Decimal::from_str(s.trim()).map_err(serde::de::Error::custom),
        Value::Number(n) => Decimal::from_str(&n.to_string())
            .or_else(|_| Decimal::from_scientific(&n.to_string()))
            .map_err(serde::de::Error::custom),
        other => Err(serde::de::Error::custom(format!("expected a decimal, got {other}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub item_id: String,
    #[serde(flatten)]
    pub action: ResolutionAction,
    pub reviewer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Reviewer template: the field, the rule value, the verifier claim, the
/// checks and the evidence gathered for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub item_id: String,
    pub market: Jurisdiction,
    pub company_id: String,
    pub concept_id: String,
    pub state: ReviewState,
    pub rule_status: FieldStatus,
    pub rule_value: Option<Decimal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verifier_claim: Option<VerifierResponse>,
    pub checks: Vec<Check>,
    pub evidence: Vec<String>,
    pub reasons: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<Resolution>,
}

pub fn review_item_id(market: Jurisdiction, company_id: &str, concept_id: &str) -> String {
    format!("{market}-{company_id}-{concept_id}")
}

/// Everything a reviewer needs to judge one field.
#[derive(Debug, Clone, Copy)]
pub struct ReviewRequest<'a> {
    pub market: Jurisdiction,
    pub company_id: &'a str,
    pub field: &'a ExtractedField,
    pub claim: Option<&'a VerifierResponse>,
    pub checks: &'a [Check],
    pub evidence: &'a [String],
    pub reason: &'a str,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewQueue {
    pub items: Vec<ReviewItem>,
}

impl ReviewQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an open item, or merges into the existing one for the field.
    pub fn enqueue(&mut self, request: ReviewRequest<'_>) -> String {
        let item_id = review_item_id(request.market, request.company_id, &request.field.concept_id);
        if let Some(item) = self.items.iter_mut().find(|i| i.item_id == item_id) {
            for e in request.evidence {
                if !item.evidence.contains(e) {
                    item.evidence.push(e.clone());
                }
            }
            for c in request.checks {
                if !item.checks.contains(c) {
                    item.checks.push(c.clone());
                }
            }
            if !item.reasons.iter().any(|r| r == request.reason) {
                item.reasons.push(request.reason.to_string());
            }
            if item.verifier_claim.is_none() {
                item.verifier_claim = request.claim.cloned();
            }
            return item_id;
        }
        self.items.push(ReviewItem {
            item_id: item_id.clone(),
            market: request.market,
            company_id: request.company_id.to_string(),
            concept_id: request.field.concept_id.clone(),
            state: ReviewState::Open,
            rule_status: request.field.status,
            rule_value: request.field.value,
            verifier_claim: request.claim.cloned(),
            checks: request.checks.to_vec(),
            evidence: request.evidence.to_vec(),
            reasons: vec![request.reason.to_string()],
            resolution: None,
        });
        item_id
    }

    pub fn get(&self, item_id: &str) -> Option<&ReviewItem> {
        self.items.iter().find(|i| i.item_id == item_id)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn open_count(&self) -> usize {
        self.items.iter().filter(|i| i.state == ReviewState::Open).count()
    }

    pub fn for_company(&self, market: Jurisdiction, company_id: &str) -> ReviewQueue {
        ReviewQueue {
            items: self
                .items
                .iter()
                .filter(|i| i.market == market && i.company_id == company_id)
                .cloned()
                .collect(),
        }
    }

    pub fn extend(&mut self, other: ReviewQueue) {
        for item in other.items {
            match self.items.iter_mut().find(|i| i.item_id == item.item_id) {
                Some(existing) => *existing = item,
                None => self.items.push(item),
            }
        }
    }
}

/// Audit state of one company run.
#[derive(Debug)]
pub struct CompanyAudit {
    pub market: Jurisdiction,
    pub company_id: String,
    pub trail: AuditTrail,
    pub anomalies: AnomalyLog,
    pub queue: ReviewQueue,
}

impl CompanyAudit {
    pub fn new(market: Jurisdiction, company_id: &str) -> Self {
        Self {
            market,
            company_id: company_id.to_string(),
            trail: AuditTrail::new(market, company_id),
            anomalies: AnomalyLog::new(market, company_id),
            queue: ReviewQueue::new(),
        }
    }

    pub fn with_clock(mut self, clock: Option<Clock>) -> Self {
        if let Some(clock) = clock {
            self.trail = self.trail.with_clock(clock);
        }
        self
    }

    pub fn record(&self, record: NewRecord) -> u64 {
        self.trail.append(record)
    }

    /// Logs an anomaly and a matching trail entry; returns the anomaly seq.
    pub fn anomaly(&self, stage: Stage, anomaly: Anomaly) -> u64 {
        let target = anomaly.target.clone();
        let event = format!("anomaly:{}", anomaly.kind);
        let severity = anomaly.severity;
        let seq = self.anomalies.append(anomaly);
        self.trail
            .append(NewRecord::new(stage, target, event).detail(json!({ "anomaly_seq": seq, "severity": severity })));
        seq
    }

    pub fn enqueue(
        &mut self,
        field: &ExtractedField,
        claim: Option<&VerifierResponse>,
        checks: &[Check],
        evidence: &[String],
        reason: &str,
    ) -> String {
        self.queue.enqueue(ReviewRequest {
            market: self.market,
            company_id: &self.company_id,
            field,
            claim,
            checks,
            evidence,
            reason,
        })
    }
}

/// Applies a reviewer's resolution to the bundle and closes the item.
pub fn apply_resolution(
    bundle: &mut StatementBundle,
    queue: &mut ReviewQueue,
    trail: &AuditTrail,
    resolution: Resolution,
) -> Result<u64, AuditError> {
    let item = queue
        .items
        .iter_mut()
        .find(|i| i.item_id == resolution.item_id)
        .ok_or_else(|| AuditError::ItemNotFound(resolution.item_id.clone()))?;
    if item.state == ReviewState::Resolved {
        return Err(AuditError::AlreadyResolved(item.item_id.clone()));
    }
    let field = bundle
        .field_mut(&item.concept_id)
        .ok_or_else(|| AuditError::UnknownConcept(item.concept_id.clone()))?;

    let before = (field.status, field.value);
    match &resolution.action {
        ResolutionAction::AcceptRuleValue => {}
        ResolutionAction::SetValue { value } => {
            field.value = Some(*value);
            field.status = FieldStatus::Ok;
            field.provenance = Provenance::Human;
        }
        ResolutionAction::MarkNotApplicable => {
            field.value = None;
            field.status = FieldStatus::NotApplicable;
            field.provenance = Provenance::Human;
        }
        ResolutionAction::Reject => {
            field.value = None;
            field.status = FieldStatus::Missing;
            field.provenance = Provenance::Human;
        }
    }
    let record = NewRecord::new(
        Stage::Review,
        item.concept_id.clone(),
        format!("resolve:{}", resolution.action.name()),
    )
    .detail(json!({
        "item_id": item.item_id,
        "reviewer": resolution.reviewer,
        "note": resolution.note,
        "old_status": before.0,
        "old_value": before.1,
        "new_status": field.status,
        "new_value": field.value,
    }));
    item.state = ReviewState::Resolved;
    item.resolution = Some(resolution);
    Ok(trail.append(record))
}

fn write_jsonl<T: Serialize>(records: &[T], mut out: impl Write) -> Result<(), AuditError> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(input: impl BufRead) -> Result<Vec<T>, AuditError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| AuditError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Writes one JSON record per line, in seq order.
pub fn export_trail(records: &[AuditRecord], out: impl Write) -> Result<(), AuditError> {
    write_jsonl(records, out)
}

pub fn import_trail(input: impl BufRead) -> Result<Vec<AuditRecord>, AuditError> {
    read_jsonl(input)
}

pub fn export_anomalies(records: &[AnomalyRecord], out: impl Write) -> Result<(), AuditError> {
    write_jsonl(records, out)
}

pub fn import_anomalies(input: impl BufRead) -> Result<Vec<AnomalyRecord>, AuditError> {
    read_jsonl(input)
}
