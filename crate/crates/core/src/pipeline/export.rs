//! Run-directory layout: per-company workbooks plus run-level files.
//!
//! ```text
//! <run>/run.json
//! <run>/metrics.json
//! <run>/review_queue.json
//! <run>/<market>/<company_id>/statements.json
//! <run>/<market>/<company_id>/{income_statement,balance_sheet,cash_flow}.csv
//! <run>/<market>/<company_id>/audit.jsonl
//! <run>/<market>/<company_id>/anomalies.jsonl
//! ```

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CompanyRun, PipelineError};
use crate::audit::{export_anomalies, export_trail, AnomalyRecord, AuditRecord, ReviewQueue};
use crate::guardrail::{VerifierSpec, PROTOCOL_VERSION};
use crate::mapping::{FieldStatus, StatementBundle};
use crate::metrics::{build_report, AccScope, MetricsReport, DEFAULT_ACC_TOLERANCE};
use crate::ontology::{Jurisdiction, OntologyCatalog, Statement};

pub const STATEMENTS_FILE: &str = "statements.json";
pub const AUDIT_FILE: &str = "audit.jsonl";
pub const ANOMALIES_FILE: &str = "anomalies.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const REVIEW_QUEUE_FILE: &str = "review_queue.json";
pub const RUN_FILE: &str = "run.json";

/// Files written for every company with a bundle.
pub const COMPANY_FILES: [&str; 6] = [
    STATEMENTS_FILE,
    "income_statement.csv",
    "balance_sheet.csv",
    "cash_flow.csv",
    AUDIT_FILE,
    ANOMALIES_FILE,
];

pub fn statement_file(statement: Statement) -> &'static str {
    match statement {
        Statement::IS => "income_statement.csv",
        Statement::BS => "balance_sheet.csv",
        Statement::CF => "cash_flow.csv",
    }
}

/// Writes via a sibling temp file and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        PipelineError::io(path, e)
    })
}

fn pretty_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("run artifacts serialize");
    out.push(b'\n');
    out
}

/// One statement as CSV; rows follow catalog order.
pub fn statement_csv(bundle: &StatementBundle, catalog: &OntologyCatalog, statement: Statement) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "concept_id",
        "display_name",
        "raw_label",
        "value",
        "currency",
        "status",
        "evidence",
        "decision",
    ])
    .expect("in-memory csv");
    for f in bundle.fields_for(catalog, statement) {
        let display = catalog.concept(&f.concept_id).map_or("", |c| c.display_name.as_str());
        w.write_record([
            f.concept_id.as_str(),
            display,
            f.raw_label.as_deref().unwrap_or(""),
            &f.value.map(|v| v.to_string()).unwrap_or_default(),
            f.currency.as_str(),
            f.status.as_str(),
            &f.evidence.as_ref().map(|e| e.to_string()).unwrap_or_default(),
            f.decision.map_or("", |d| d.as_str()),
        ])
        .expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

pub fn company_dir(run_dir: &Path, market: Jurisdiction, company_id: &str) -> PathBuf {
    run_dir.join(market.as_str()).join(company_id)
}

/// Writes the bundle file and the three statement CSVs.
pub fn write_bundle_files(
    dir: &Path,
    bundle: &StatementBundle,
    catalog: &OntologyCatalog,
) -> Result<(), PipelineError> {
    atomic_write(&dir.join(STATEMENTS_FILE), &pretty_json(bundle))?;
    for s in Statement::ALL {
        atomic_write(&dir.join(statement_file(s)), &statement_csv(bundle, catalog, s))?;
    }
    Ok(())
}

pub fn write_trail_file(dir: &Path, records: &[AuditRecord]) -> Result<(), PipelineError> {
    let mut buf = Vec::new();
    export_trail(records, &mut buf).map_err(|e| PipelineError::RunDir(dir.to_path_buf(), e.to_string()))?;
    atomic_write(&dir.join(AUDIT_FILE), &buf)
}

pub fn write_anomaly_file(dir: &Path, records: &[AnomalyRecord]) -> Result<(), PipelineError> {
    let mut buf = Vec::new();
    export_anomalies(records, &mut buf).map_err(|e| PipelineError::RunDir(dir.to_path_buf(), e.to_string()))?;
    atomic_write(&dir.join(ANOMALIES_FILE), &buf)
}

/// Writes a company's workbook. Failed companies get only their trail and
/// anomaly log.
pub fn write_company_outputs(run_dir: &Path, run: &CompanyRun, catalog: &OntologyCatalog) -> Result<(), PipelineError> {
    let dir = company_dir(run_dir, run.market, &run.company_id);
    if let Some(bundle) = &run.bundle {
        write_bundle_files(&dir, bundle, catalog)?;
    }
    write_trail_file(&dir, &run.audit.trail.records())?;
    write_anomaly_file(&dir, &run.audit.anomalies.records())
}

pub fn write_review_queue(run_dir: &Path, queue: &ReviewQueue) -> Result<(), PipelineError> {
    atomic_write(&run_dir.join(REVIEW_QUEUE_FILE), &pretty_json(queue))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompanySummary {
    pub company_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_name: Option<String>,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub statuses: BTreeMap<FieldStatus, usize>,
    pub review_items: usize,
}

impl CompanySummary {
    pub fn from_bundle(bundle: &StatementBundle, review_items: usize) -> Self {
        let mut statuses: BTreeMap<FieldStatus, usize> = FieldStatus::ALL.iter().map(|s| (*s, 0)).collect();
        for f in &bundle.fields {
            *statuses.entry(f.status).or_default() += 1;
        }
        Self {
            company_id: bundle.metadata.company_id.clone(),
            entity_name: Some(bundle.metadata.entity_name.clone()),
            ok: true,
            error: None,
            statuses,
            review_items,
        }
    }
}

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub protocol: String,
    pub catalog_version: String,
    pub verifier: String,
    pub acc_scope: AccScope,
    pub markets: BTreeMap<Jurisdiction, Vec<CompanySummary>>,
}

impl RunSummary {
    pub fn new(
        catalog: &OntologyCatalog,
        verifier: Option<&VerifierSpec>,
        markets: &[Jurisdiction],
        companies: &[CompanyRun],
        acc_scope: AccScope,
    ) -> Self {
        let mut by_market: BTreeMap<Jurisdiction, Vec<CompanySummary>> =
            markets.iter().map(|m| (*m, Vec::new())).collect();
        for c in companies {
            let summary = match &c.bundle {
                Some(b) => CompanySummary::from_bundle(b, c.audit.queue.len()),
                None => CompanySummary {
                    company_id: c.company_id.clone(),
                    entity_name: None,
                    ok: false,
                    error: c.error.clone(),
                    statuses: BTreeMap::new(),
                    review_items: 0,
                },
            };
            by_market.entry(c.market).or_default().push(summary);
        }
        Self {
            protocol: PROTOCOL_VERSION.to_string(),
            catalog_version: catalog.version.clone(),
            verifier: match verifier {
                None => "none",
                Some(VerifierSpec::Scripted(_)) => "scripted",
                Some(VerifierSpec::Http(_)) => "http",
            }
            .to_string(),
            acc_scope,
            markets: by_market,
        }
    }

    pub fn company(&self, market: Jurisdiction, company_id: &str) -> Option<&CompanySummary> {
        self.markets.get(&market)?.iter().find(|c| c.company_id == company_id)
    }

    pub fn company_mut(&mut self, market: Jurisdiction, company_id: &str) -> Option<&mut CompanySummary> {
        self.markets
            .get_mut(&market)?
            .iter_mut()
            .find(|c| c.company_id == company_id)
    }
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<&'a MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

pub fn write_metrics(run_dir: &Path, report: Option<&MetricsReport>) -> Result<(), PipelineError> {
    let body = match report {
        Some(r) => pretty_json(r),
        None => pretty_json(&MetricsFile {
            report: None,
            error: Some("no bundles were produced"),
        }),
    };
    atomic_write(&run_dir.join(METRICS_FILE), &body)
}

pub fn write_run_summary(run_dir: &Path, summary: &RunSummary) -> Result<(), PipelineError> {
    atomic_write(&run_dir.join(RUN_FILE), &pretty_json(summary))
}

pub(super) fn write_run_files(
    run_dir: &Path,
    summary: &RunSummary,
    queue: &ReviewQueue,
    report: Option<&MetricsReport>,
) -> Result<(), PipelineError> {
    write_metrics(run_dir, report)?;
    write_review_queue(run_dir, queue)?;
    write_run_summary(run_dir, summary)
}

fn read(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))
}

pub fn load_run(run_dir: &Path) -> Result<RunSummary, PipelineError> {
    let path = run_dir.join(RUN_FILE);
    serde_json::from_str(&read(&path)?).map_err(|e| PipelineError::RunDir(path, e.to_string()))
}

pub fn load_review_queue(run_dir: &Path) -> Result<ReviewQueue, PipelineError> {
    let path = run_dir.join(REVIEW_QUEUE_FILE);
    serde_json::from_str(&read(&path)?).map_err(|e| PipelineError::RunDir(path, e.to_string()))
}

pub fn load_bundle(run_dir: &Path, market: Jurisdiction, company_id: &str) -> Result<StatementBundle, PipelineError> {
    let path = company_dir(run_dir, market, company_id).join(STATEMENTS_FILE);
    serde_json::from_str(&read(&path)?).map_err(|e| PipelineError::RunDir(path, e.to_string()))
}

pub fn load_trail(run_dir: &Path, market: Jurisdiction, company_id: &str) -> Result<Vec<AuditRecord>, PipelineError> {
    let path = company_dir(run_dir, market, company_id).join(AUDIT_FILE);
    let text = read(&path)?;
    crate::audit::import_trail(text.as_bytes()).map_err(|e| PipelineError::RunDir(path, e.to_string()))
}

/// Every `statements.json` under `<dir>/<market>/<company>/`, in market
/// then company order.
pub fn load_bundles(dir: &Path) -> Result<Vec<StatementBundle>, PipelineError> {
    let mut out = Vec::new();
    for market in Jurisdiction::ALL {
        let market_dir = dir.join(market.as_str());
        if !market_dir.is_dir() {
            continue;
        }
        let mut companies: Vec<PathBuf> = std::fs::read_dir(&market_dir)
            .map_err(|e| PipelineError::io(&market_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(STATEMENTS_FILE).is_file())
            .collect();
        companies.sort();
        for c in companies {
            let path = c.join(STATEMENTS_FILE);
            out.push(serde_json::from_str(&read(&path)?).map_err(|e| PipelineError::RunDir(path, e.to_string()))?);
        }
    }
    Ok(out)
}

/// Files for a company download: the workbook files plus a metrics file
/// for that company alone.
pub fn company_archive_entries(
    run_dir: &Path,
    market: Jurisdiction,
    company_id: &str,
) -> Result<Vec<(String, Vec<u8>)>, PipelineError> {
    let dir = company_dir(run_dir, market, company_id);
    let mut entries = Vec::new();
    for name in COMPANY_FILES {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| PipelineError::io(&path, e))?;
        entries.push((name.to_string(), bytes));
    }
    let bundle = load_bundle(run_dir, market, company_id)?;
    let report = build_report(
        std::slice::from_ref(&bundle),
        None,
        DEFAULT_ACC_TOLERANCE,
        AccScope::All,
    )?;
    entries.push((METRICS_FILE.to_string(), pretty_json(&report)));
    Ok(entries)
}
