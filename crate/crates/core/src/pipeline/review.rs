//! Applying reviewer resolutions to a finished run directory.

use thiserror::Error;

use super::export::{
    company_dir, load_bundle, load_review_queue, load_run, load_trail, write_bundle_files, write_review_queue,
    write_run_summary, write_trail_file, CompanySummary,
};
use super::PipelineError;
use crate::audit::{apply_resolution, AuditError, AuditTrail, Resolution, ReviewItem, ReviewState};
use crate::mapping::StatementBundle;
use crate::ontology::OntologyCatalog;

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("review item {0} not found")]
    ItemNotFound(String),
    #[error("review item {0} is already resolved")]
    AlreadyResolved(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("resolution failed: {0}")]
    Audit(String),
}

impl From<AuditError> for ResolveError {
    fn from(e: AuditError) -> Self {
        match e {
            AuditError::ItemNotFound(id) => ResolveError::ItemNotFound(id),
            AuditError::AlreadyResolved(id) => ResolveError::AlreadyResolved(id),
            other => ResolveError::Audit(other.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResolveOutcome {
    pub item: ReviewItem,
    pub bundle: StatementBundle,
    pub audit_seq: u64,
    pub open_items: usize,
}

/// Applies a resolution and persists the bundle, CSVs, trail, queue and
/// run summary. Callers must serialize calls per run directory.
pub fn resolve_in_run(
    run_dir: &std::path::Path,
    catalog: &OntologyCatalog,
    resolution: Resolution,
) -> Result<ResolveOutcome, ResolveError> {
    let mut queue = load_review_queue(run_dir)?;
    let item = queue
        .get(&resolution.item_id)
        .ok_or_else(|| ResolveError::ItemNotFound(resolution.item_id.clone()))?
        .clone();
    if item.state == ReviewState::Resolved {
        return Err(ResolveError::AlreadyResolved(item.item_id));
    }
    let (market, company_id) = (item.market, item.company_id.clone());
    let mut bundle = load_bundle(run_dir, market, &company_id)?;
    let trail = AuditTrail::from_records(market, &company_id, load_trail(run_dir, market, &company_id)?);

    let audit_seq = apply_resolution(&mut bundle, &mut queue, &trail, resolution)?;

    let dir = company_dir(run_dir, market, &company_id);
    write_bundle_files(&dir, &bundle, catalog)?;
    write_trail_file(&dir, &trail.records())?;
    write_review_queue(run_dir, &queue)?;
    let mut summary = load_run(run_dir)?;
    if let Some(c) = summary.company_mut(market, &company_id) {
        let review_items = c.review_items;
        *c = CompanySummary::from_bundle(&bundle, review_items);
    }
    write_run_summary(run_dir, &summary)?;

    let item = queue.get(&item.item_id).cloned().expect("item still queued");
    Ok(ResolveOutcome {
        item,
        bundle,
        audit_seq,
        open_items: queue.open_count(),
    })
}
