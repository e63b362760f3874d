//! End-to-end runs over a fixture tree.
//!
//! Fixtures live at `<root>/<market>/<company_id>/`: `instance.xml` for
//! tag-native markets, `tables.txt` plus a `company.toml` sidecar for
//! table markets. Each company is processed in isolation (acquire,
//! identify, extract, map, verify, output) and written to
//! `<output_dir>/<market>/<company_id>/`.

mod export;
mod qa;
mod review;

pub use export::{
    atomic_write, company_archive_entries, company_dir, load_bundle, load_bundles, load_review_queue, load_run,
    load_trail, statement_csv, statement_file, write_company_outputs, CompanySummary, RunSummary, ANOMALIES_FILE,
    AUDIT_FILE, COMPANY_FILES, METRICS_FILE, REVIEW_QUEUE_FILE, RUN_FILE, STATEMENTS_FILE,
};
pub use qa::{answer_template_query, match_template, QaAnswer, QaError, QaQuery, TEMPLATES};
pub use review::{resolve_in_run, ResolveError, ResolveOutcome};

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use chrono::{Datelike, NaiveDate};
use rust_decimal::Decimal;
use serde::Deserialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::anomaly::{Anomaly, AnomalyKind};
use crate::audit::{CompanyAudit, NewRecord, ReviewQueue, Stage};
use crate::guardrail::{
    escalate_discrepancies, run_verification_pass, RemoteVerifier, ScriptedVerifier, VerificationPolicy, Verifier,
    VerifierSpec, DEFAULT_CONTEXT_CAP, DEFAULT_IN_FLIGHT,
};
use crate::mapping::{
    assemble_bundle, map_to_canonical, run_identity_checks, Applicability, BundleMetadata, FieldStatus, MappingInput,
    StatementBundle,
};
use crate::metrics::{build_report, AccScope, GoldLabelSet, MetricsReport, DEFAULT_ACC_TOLERANCE};
use crate::ontology::{Jurisdiction, LoadOptions, OntologyCatalog, Statement};
use crate::package::ContextPackage;
use crate::table::{
    build_table_package, extract_line_items, parse_table_document, select_value_column, TableFilingInfo,
    DEFAULT_PERIOD_KEYWORDS,
};
use crate::xbrl::{build_context_package, extract_tagged, parse_instance};

pub const INSTANCE_FILE: &str = "instance.xml";
pub const TABLES_FILE: &str = "tables.txt";
pub const COMPANY_SIDECAR: &str = "company.toml";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("path does not exist: {0}")]
    MissingPath(PathBuf),
    #[error(transparent)]
    Catalog(#[from] crate::ontology::CatalogError),
    #[error(transparent)]
    Mapping(#[from] crate::mapping::MappingError),
    #[error(transparent)]
    Verifier(#[from] crate::guardrail::VerifierError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("run directory {0}: {1}")]
    RunDir(PathBuf, String),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifierConfig {
    /// `scripted:<path>` or `http:<url>`; absent means no verification.
    #[serde(default)]
    pub spec: Option<String>,
    #[serde(default = "default_context_cap")]
    pub context_cap: usize,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_in_flight")]
    pub in_flight: usize,
}

fn default_context_cap() -> usize {
    DEFAULT_CONTEXT_CAP
}
fn default_retries() -> u32 {
    RemoteVerifier::DEFAULT_RETRIES
}
fn default_backoff_ms() -> u64 {
    RemoteVerifier::DEFAULT_BACKOFF.as_millis() as u64
}
fn default_in_flight() -> usize {
    DEFAULT_IN_FLIGHT
}
fn default_true() -> bool {
    true
}
fn default_tolerance() -> Decimal {
    DEFAULT_ACC_TOLERANCE
}

impl Default for VerifierConfig {
    fn default() -> Self {
        Self {
            spec: None,
            context_cap: default_context_cap(),
            retries: default_retries(),
            backoff_ms: default_backoff_ms(),
            in_flight: default_in_flight(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    pub fixtures_root: PathBuf,
    /// Markets to run, in order; empty means every market present.
    #[serde(default)]
    pub markets: Vec<Jurisdiction>,
    #[serde(default)]
    pub ontology: Option<PathBuf>,
    #[serde(default)]
    pub strict18: bool,
    #[serde(default)]
    pub applicability: Option<PathBuf>,
    #[serde(default)]
    pub gold: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub require_consolidated: bool,
    #[serde(default)]
    pub acc_scope: AccScope,
    #[serde(default = "default_tolerance")]
    pub acc_tolerance: Decimal,
    #[serde(default)]
    pub period_keywords: Option<Vec<String>>,
    #[serde(default)]
    pub verifier: VerifierConfig,
}

impl PipelineConfig {
    /// Reads a TOML config; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut config: PipelineConfig = toml::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        fix(&mut self.fixtures_root);
        for p in [&mut self.ontology, &mut self.applicability, &mut self.gold]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        if let Some(spec) = &self.verifier.spec {
            if let Some(rest) = spec.strip_prefix("scripted:") {
                let p = Path::new(rest);
                if p.is_relative() {
                    self.verifier.spec = Some(format!("scripted:{}", base.join(p).display()));
                }
            }
        }
    }

    pub fn verifier_spec(&self) -> Result<Option<VerifierSpec>, PipelineError> {
        self.verifier
            .spec
            .as_deref()
            .map(VerifierSpec::from_str)
            .transpose()
            .map_err(PipelineError::from)
    }

    /// Checks that every referenced input path exists.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut paths: Vec<&Path> = vec![&self.fixtures_root];
        paths.extend(
            [&self.ontology, &self.applicability, &self.gold]
                .into_iter()
                .flatten()
                .map(PathBuf::as_path),
        );
        for p in paths {
            if !p.exists() {
                return Err(PipelineError::MissingPath(p.to_path_buf()));
            }
        }
        if let Some(VerifierSpec::Scripted(p)) = self.verifier_spec()? {
            if !p.exists() {
                return Err(PipelineError::MissingPath(p));
            }
        }
        if self.verifier.context_cap == 0 {
            return Err(PipelineError::Config("verifier.context_cap must be positive".into()));
        }
        Ok(())
    }

    pub fn load_catalog(&self) -> Result<OntologyCatalog, PipelineError> {
        Ok(match &self.ontology {
            Some(p) => OntologyCatalog::from_path(
                p,
                LoadOptions {
                    strict18: self.strict18,
                },
            )?,
            None => OntologyCatalog::default_catalog(),
        })
    }

    pub fn build_verifier(&self) -> Result<Option<Box<dyn Verifier>>, PipelineError> {
        Ok(match self.verifier_spec()? {
            None => None,
            Some(VerifierSpec::Scripted(p)) => Some(Box::new(ScriptedVerifier::from_path(&p)?)),
            Some(VerifierSpec::Http(url)) => Some(Box::new(
                RemoteVerifier::new(url)
                    .with_retries(self.verifier.retries)
                    .with_backoff(Duration::from_millis(self.verifier.backoff_ms)),
            )),
        })
    }

    fn markets_to_run(&self) -> Result<Vec<Jurisdiction>, PipelineError> {
        if self.markets.is_empty() {
            return Ok(Jurisdiction::ALL
                .into_iter()
                .filter(|m| self.fixtures_root.join(m.as_str()).is_dir())
                .collect());
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for m in &self.markets {
            let dir = self.fixtures_root.join(m.as_str());
            if !dir.is_dir() {
                return Err(PipelineError::MissingPath(dir));
            }
            if seen.insert(*m) {
                out.push(*m);
            }
        }
        Ok(out)
    }
}

/// Metadata sidecar for table filings.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompanySidecar {
    pub entity_name: String,
    pub fiscal_year_start: NaiveDate,
    pub fiscal_year_end: NaiveDate,
    pub currency: String,
    pub accounting_standard: String,
    #[serde(default)]
    pub filing_date: Option<NaiveDate>,
}

/// Shared inputs for processing companies.
pub struct RunContext<'a> {
    pub catalog: &'a OntologyCatalog,
    pub applicability: &'a Applicability,
    pub verifier: Option<&'a dyn Verifier>,
    pub policy: VerificationPolicy,
    pub require_consolidated: bool,
    pub period_keywords: Vec<String>,
}

/// Everything produced for one company.
#[derive(Debug)]
pub struct CompanyRun {
    pub market: Jurisdiction,
    pub company_id: String,
    pub bundle: Option<StatementBundle>,
    pub audit: CompanyAudit,
    pub error: Option<String>,
}

struct Acquired {
    package: ContextPackage,
    inputs: Vec<MappingInput>,
    metadata: BundleMetadata,
    /// Statements whose table blocks could not be parsed.
    broken: BTreeSet<Statement>,
}

fn read_text(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn locator(market: Jurisdiction, company_id: &str, file: &str) -> String {
    format!("{market}/{company_id}/{file}")
}

fn record_acquired(audit: &CompanyAudit, loc: &str, text: &str) {
    let digest = hex::encode(Sha256::digest(text.as_bytes()));
    audit.record(
        NewRecord::new(Stage::Acquire, "document", "acquired")
            .evidence(loc)
            .detail(json!({ "sha256": digest, "bytes": text.len() })),
    );
}

fn record_identified(audit: &CompanyAudit, package: &ContextPackage) {
    let statements: BTreeMap<String, serde_json::Value> = package
        .statement_boundaries
        .iter()
        .map(|(s, b)| {
            (
                s.to_string(),
                json!({ "spans": b.spans.len(), "tags": b.tags.len(), "pages": b.pages, "unit_scale": b.unit_scale }),
            )
        })
        .collect();
    audit.record(
        NewRecord::new(Stage::Identify, "document", "statements_identified")
            .evidence(package.document_locator.clone())
            .detail(json!(statements)),
    );
}

fn acquire_tagged(
    dir: &Path,
    market: Jurisdiction,
    company_id: &str,
    ctx: &RunContext<'_>,
    audit: &CompanyAudit,
) -> Result<Acquired, String> {
    let path = dir.join(INSTANCE_FILE);
    let text = read_text(&path)?;
    let loc = locator(market, company_id, INSTANCE_FILE);
    record_acquired(audit, &loc, &text);

    let parsed = parse_instance(&text).map_err(|e| e.to_string())?;
    for a in &parsed.anomalies {
        audit.anomaly(Stage::Extract, a.clone());
    }
    let package = build_context_package(&parsed, &text, &loc, ctx.catalog, market).map_err(|e| e.to_string())?;
    record_identified(audit, &package);

    let fy = parsed
        .metadata
        .fiscal_period()
        .expect("package build checked the fiscal year");
    let extraction = extract_tagged(&parsed, ctx.catalog, market, fy, ctx.require_consolidated);
    for a in &extraction.anomalies {
        audit.anomaly(Stage::Extract, a.clone());
    }
    let mut inputs: Vec<MappingInput> = extraction.selected.iter().map(|s| MappingInput::from(s.fact)).collect();
    inputs.extend(extraction.extras.iter().map(|f| MappingInput::from(*f)));
    audit.record(NewRecord::new(Stage::Extract, "document", "extracted").detail(json!({
        "facts": parsed.facts.len(),
        "selected": extraction.selected.len(),
        "extras": extraction.extras.len(),
    })));

    let meta = &parsed.metadata;
    Ok(Acquired {
        metadata: BundleMetadata {
            market,
            company_id: company_id.to_string(),
            entity_name: meta.entity_name.clone().unwrap_or_default(),
            fiscal_year: fy.end.year(),
            fiscal_year_start: fy.start,
            fiscal_year_end: fy.end,
            currency: package.currency.clone(),
            accounting_standard: package.accounting_standard.clone(),
            filing_date: meta.filing_date,
            document_locator: loc,
        },
        package,
        inputs,
        broken: BTreeSet::new(),
    })
}

fn acquire_table(
    dir: &Path,
    market: Jurisdiction,
    company_id: &str,
    ctx: &RunContext<'_>,
    audit: &CompanyAudit,
) -> Result<Acquired, String> {
    let sidecar_path = dir.join(COMPANY_SIDECAR);
    let sidecar: CompanySidecar =
        toml::from_str(&read_text(&sidecar_path)?).map_err(|e| format!("{}: {e}", sidecar_path.display()))?;
    if sidecar.fiscal_year_start >= sidecar.fiscal_year_end {
        return Err(format!(
            "{}: fiscal year start is not before end",
            sidecar_path.display()
        ));
    }
    let path = dir.join(TABLES_FILE);
    let text = read_text(&path)?;
    let loc = locator(market, company_id, TABLES_FILE);
    record_acquired(audit, &loc, &text);

    let doc = parse_table_document(&text).map_err(|e| e.to_string())?;
    let mut broken = BTreeSet::new();
    for b in &doc.broken {
        audit.anomaly(
            Stage::Identify,
            Anomaly::anomaly(
                AnomalyKind::MalformedBlock,
                b.statement_hint.to_string(),
                format!("block at line {}: {}", b.line, b.error),
            ),
        );
        if let Some(s) = b.statement_hint.statement() {
            broken.insert(s);
        }
    }
    let info = TableFilingInfo {
        document_locator: loc.clone(),
        entity_name: sidecar.entity_name.clone(),
        fiscal_year_start: sidecar.fiscal_year_start,
        fiscal_year_end: sidecar.fiscal_year_end,
        currency: sidecar.currency.clone(),
        accounting_standard: sidecar.accounting_standard.clone(),
    };
    let package = build_table_package(&doc, &text, &info);
    record_identified(audit, &package);

    let present: BTreeSet<Statement> = doc.tables.iter().filter_map(|t| t.statement_hint.statement()).collect();
    for s in Statement::ALL {
        if !present.contains(&s) && !broken.contains(&s) {
            audit.anomaly(
                Stage::Identify,
                Anomaly::anomaly(
                    AnomalyKind::MissingStatement,
                    s.to_string(),
                    "no table block for this statement",
                ),
            );
        }
    }

    let keywords: Vec<&str> = ctx.period_keywords.iter().map(String::as_str).collect();
    let fiscal_year = sidecar.fiscal_year_end.year();
    let mut inputs = Vec::new();
    for table in &doc.tables {
        if table.statement_hint.statement().is_none() {
            audit.anomaly(
                Stage::Identify,
                Anomaly::info(
                    AnomalyKind::Other("UnknownStatement".into()),
                    "document",
                    format!("block with pages {:?} has an unknown statement kind", table.page_range),
                ),
            );
            continue;
        }
        let choice = match select_value_column(table, fiscal_year, &keywords) {
            Ok(c) => c,
            Err(e) => {
                audit.anomaly(
                    Stage::Extract,
                    Anomaly::anomaly(
                        AnomalyKind::ColumnFallback,
                        table.statement_hint.to_string(),
                        e.to_string(),
                    ),
                );
                continue;
            }
        };
        if let Some(a) = choice.anomaly.clone() {
            audit.anomaly(Stage::Extract, a);
        }
        if !table.units_declared {
            audit.anomaly(
                Stage::Extract,
                Anomaly::info(
                    AnomalyKind::UnitsAssumed,
                    table.statement_hint.to_string(),
                    "no #UNITS directive; values taken in base units",
                ),
            );
        }
        let items = extract_line_items(table, choice.column, table.unit_scale);
        audit.record(
            NewRecord::new(Stage::Extract, table.statement_hint.to_string(), "table_extracted").detail(json!({
                "pages": table.page_range,
                "column": choice.column,
                "column_header": table.value_header(choice.column),
                "rule": choice.rule,
                "unit_scale": table.unit_scale,
                "rows": items.len(),
            })),
        );
        inputs.extend(items.iter().map(|item| {
            let mut input = MappingInput::from(item);
            input.currency = Some(sidecar.currency.clone());
            input
        }));
    }

    Ok(Acquired {
        metadata: BundleMetadata {
            market,
            company_id: company_id.to_string(),
            entity_name: sidecar.entity_name,
            fiscal_year,
            fiscal_year_start: sidecar.fiscal_year_start,
            fiscal_year_end: sidecar.fiscal_year_end,
            currency: sidecar.currency,
            accounting_standard: sidecar.accounting_standard,
            filing_date: sidecar.filing_date,
            document_locator: loc,
        },
        package,
        inputs,
        broken,
    })
}

/// Runs every stage for one company. Failures are recorded as a
/// `CompanyFailed` anomaly and leave the bundle empty.
pub fn process_company(dir: &Path, market: Jurisdiction, company_id: &str, ctx: &RunContext<'_>) -> CompanyRun {
    let mut audit = CompanyAudit::new(market, company_id);
    let result = process_inner(dir, market, company_id, ctx, &mut audit);
    let (bundle, error) = match result {
        Ok(b) => (Some(b), None),
        Err(e) => {
            audit.anomaly(
                Stage::Acquire,
                Anomaly::anomaly(AnomalyKind::CompanyFailed, "document", e.clone()),
            );
            (None, Some(e))
        }
    };
    CompanyRun {
        market,
        company_id: company_id.to_string(),
        bundle,
        audit,
        error,
    }
}

/// A mapped bundle before verification, with the package it came from.
#[derive(Debug, Clone)]
pub struct PreparedCompany {
    pub bundle: StatementBundle,
    pub package: ContextPackage,
}

/// Acquires, extracts and maps one company's filing.
pub fn prepare_company(
    dir: &Path,
    market: Jurisdiction,
    company_id: &str,
    ctx: &RunContext<'_>,
    audit: &CompanyAudit,
) -> Result<PreparedCompany, String> {
    let acquired = if market.is_tag_native() {
        acquire_tagged(dir, market, company_id, ctx, audit)?
    } else {
        acquire_table(dir, market, company_id, ctx, audit)?
    };

    let declared = ctx.applicability.for_company(market, company_id);
    for unknown in declared.iter().filter(|c| ctx.catalog.concept(c).is_none()) {
        audit.anomaly(
            Stage::Map,
            Anomaly::anomaly(
                AnomalyKind::UnknownApplicability,
                unknown.clone(),
                "declared not applicable but not in the catalog",
            ),
        );
    }
    let outcome = map_to_canonical(
        &acquired.inputs,
        ctx.catalog,
        market,
        &declared,
        &acquired.metadata.currency,
    );
    for a in &outcome.anomalies {
        audit.anomaly(Stage::Map, a.clone());
    }
    let mut fields = outcome.fields;
    for f in &mut fields {
        let statement = ctx.catalog.concept(&f.concept_id).map(|c| c.statement);
        if f.status == FieldStatus::Missing && statement.is_some_and(|s| acquired.broken.contains(&s)) {
            f.status = FieldStatus::ParseError;
        }
    }
    let mut metadata = acquired.metadata;
    metadata.currency = outcome.currency;
    let bundle = assemble_bundle(fields, outcome.extras, metadata, ctx.catalog).map_err(|e| e.to_string())?;
    for f in &bundle.fields {
        let mut record = NewRecord::new(Stage::Map, f.concept_id.clone(), "mapped").detail(json!({
            "status": f.status,
            "value": f.value,
            "raw_label": f.raw_label,
        }));
        if let Some(e) = &f.evidence {
            record = record.evidence(e.to_string());
        }
        audit.record(record);
    }
    Ok(PreparedCompany {
        bundle,
        package: acquired.package,
    })
}

fn process_inner(
    dir: &Path,
    market: Jurisdiction,
    company_id: &str,
    ctx: &RunContext<'_>,
    audit: &mut CompanyAudit,
) -> Result<StatementBundle, String> {
    let PreparedCompany { mut bundle, package } = prepare_company(dir, market, company_id, ctx, audit)?;
    if let Some(verifier) = ctx.verifier {
        run_verification_pass(&mut bundle, &package, ctx.catalog, verifier, &ctx.policy, audit);
    }
    for a in run_identity_checks(&bundle, ctx.catalog) {
        audit.anomaly(Stage::Verify, a);
    }
    escalate_discrepancies(&mut bundle, ctx.catalog, audit);

    bundle.anomalies = audit.anomalies.records().iter().map(|r| r.seq).collect();
    audit.record(
        NewRecord::new(Stage::Output, "document", "bundle_written").detail(json!({
            "files": COMPANY_FILES,
            "ok": bundle.fields.iter().filter(|f| f.status == FieldStatus::Ok).count(),
            "review_items": audit.queue.len(),
        })),
    );
    Ok(bundle)
}

/// Result of a full run.
#[derive(Debug)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub companies: Vec<CompanyRun>,
    pub queue: ReviewQueue,
    pub report: Option<MetricsReport>,
    pub summary: RunSummary,
}

impl RunOutcome {
    pub fn bundles(&self) -> Vec<StatementBundle> {
        self.companies.iter().filter_map(|c| c.bundle.clone()).collect()
    }
}

fn company_dirs(market_dir: &Path) -> Result<Vec<(String, PathBuf)>, PipelineError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(market_dir).map_err(|e| PipelineError::io(market_dir, e))? {
        let entry = entry.map_err(|e| PipelineError::io(market_dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                if !name.starts_with('.') {
                    out.push((name.to_string(), path.clone()));
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

fn prepare_output_dir(dir: &Path) -> Result<(), PipelineError> {
    if dir.exists() {
        let is_run = dir.join(RUN_FILE).exists();
        let empty = std::fs::read_dir(dir)
            .map_err(|e| PipelineError::io(dir, e))?
            .next()
            .is_none();
        if is_run {
            std::fs::remove_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        } else if !empty {
            return Err(PipelineError::RunDir(
                dir.to_path_buf(),
                "exists, is not empty and holds no previous run".into(),
            ));
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))
}

/// Runs every company under the configured markets and writes the run
/// directory. Only an unusable config fails the run.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunOutcome, PipelineError> {
    config.validate()?;
    let catalog = config.load_catalog()?;
    let applicability = match &config.applicability {
        Some(p) => Applicability::from_path(p)?,
        None => Applicability::default(),
    };
    let gold = config.gold.as_deref().map(GoldLabelSet::from_path).transpose()?;
    let verifier = config.build_verifier()?;
    let markets = config.markets_to_run()?;

    let ctx = RunContext {
        catalog: &catalog,
        applicability: &applicability,
        verifier: verifier.as_deref(),
        policy: VerificationPolicy {
            context_cap: config.verifier.context_cap,
            in_flight: config.verifier.in_flight,
            ..VerificationPolicy::default()
        },
        require_consolidated: config.require_consolidated,
        period_keywords: config
            .period_keywords
            .clone()
            .unwrap_or_else(|| DEFAULT_PERIOD_KEYWORDS.iter().map(|s| s.to_string()).collect()),
    };

    prepare_output_dir(&config.output_dir)?;
    let mut companies = Vec::new();
    for market in &markets {
        for (company_id, dir) in company_dirs(&config.fixtures_root.join(market.as_str()))? {
            let run = process_company(&dir, *market, &company_id, &ctx);
            write_company_outputs(&config.output_dir, &run, &catalog)?;
            companies.push(run);
        }
    }

    let mut queue = ReviewQueue::new();
    for c in &companies {
        queue.extend(c.audit.queue.clone());
    }
    let bundles: Vec<StatementBundle> = companies.iter().filter_map(|c| c.bundle.clone()).collect();
    let report = if bundles.is_empty() {
        None
    } else {
        Some(build_report(
            &bundles,
            gold.as_ref(),
            config.acc_tolerance,
            config.acc_scope,
        )?)
    };
    let summary = RunSummary::new(
        &catalog,
        config.verifier_spec()?.as_ref(),
        &markets,
        &companies,
        config.acc_scope,
    );
    export::write_run_files(&config.output_dir, &summary, &queue, report.as_ref())?;
    Ok(RunOutcome {
        output_dir: config.output_dir.clone(),
        companies,
        queue,
        report,
        summary,
    })
}
