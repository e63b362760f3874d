//! Zip packaging of a company's workbook.

use std::fmt;
use std::io::{Cursor, Write};
use std::path::Path;

use finrep_core::ontology::Jurisdiction;
use finrep_core::pipeline::{company_archive_entries, PipelineError};
use zip::result::ZipError;
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, DateTime, ZipWriter};

#[derive(Debug)]
pub enum ArchiveError {
    Pipeline(PipelineError),
    Zip(ZipError),
}

impl fmt::Display for ArchiveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArchiveError::Pipeline(e) => write!(f, "{e}"),
            ArchiveError::Zip(e) => write!(f, "archive: {e}"),
        }
    }
}

impl std::error::Error for ArchiveError {}

impl From<ZipError> for ArchiveError {
    fn from(e: ZipError) -> Self {
        ArchiveError::Zip(e)
    }
}

impl From<std::io::Error> for ArchiveError {
    fn from(e: std::io::Error) -> Self {
        ArchiveError::Zip(ZipError::Io(e))
    }
}

/// Download name for a company archive.
pub fn archive_name(market: Jurisdiction, company_id: &str) -> String {
    format!("{market}_{company_id}_workbook.zip")
}

/// Builds the archive in memory. Entries are stored uncompressed under a
/// `<market>_<company>/` folder with a fixed timestamp, so identical runs
/// give identical bytes.
pub fn company_archive(run_dir: &Path, market: Jurisdiction, company_id: &str) -> Result<Vec<u8>, ArchiveError> {
    let entries = company_archive_entries(run_dir, market, company_id).map_err(ArchiveError::Pipeline)?;
    let options = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Stored)
        .last_modified_time(DateTime::default())
        .unix_permissions(0o644);
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    for (name, bytes) in entries {
        zip.start_file(format!("{market}_{company_id}/{name}"), options)?;
        zip.write_all(&bytes)?;
    }
    Ok(zip.finish()?.into_inner())
}
