//! Verifier clients: a scripted verifier read from a decision file and a
//! remote verifier reached over HTTP.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use rust_decimal::Decimal;
use serde::Deserialize;
use thiserror::Error;

use super::{Decision, VerifierRequest, VerifierResponse, PROTOCOL_HEADER, PROTOCOL_VERSION};
use crate::ontology::Jurisdiction;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifierError {
    #[error("verifier unavailable: {0}")]
    Unavailable(String),
    #[error("malformed verifier response: {0}")]
    Malformed(String),
    #[error("verifier script: {0}")]
    Script(String),
    #[error("invalid verifier spec {0:?}: expected scripted:<path> or http:<url>")]
    Spec(String),
}

/// A bounded verifier. Implementations must be safe to call from several
/// threads at once.
pub trait Verifier: Send + Sync {
    fn verify(&self, request: &VerifierRequest) -> Result<VerifierResponse, VerifierError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ScriptEntry {
    #[serde(default)]
    pub market: Option<Jurisdiction>,
    pub company_id: String,
    pub concept_id: String,
    pub decision: Decision,
    #[serde(default)]
    pub value: Option<Decimal>,
    #[serde(default)]
    pub quote: Option<String>,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Debug, Deserialize)]
struct ScriptDocument {
    #[serde(default = "default_decision")]
    default: Decision,
    #[serde(default)]
    entries: Vec<ScriptEntry>,
}

fn default_decision() -> Decision {
    Decision::Keep
}

/// Answers from a fixed script keyed by (company_id, concept_id), with an
/// optional market qualifier. Unlisted fields get the default decision.
#[derive(Debug, Clone)]
pub struct ScriptedVerifier {
    default: Decision,
    entries: BTreeMap<(String, String), Vec<ScriptEntry>>,
}

impl ScriptedVerifier {
    pub fn new(default: Decision, entries: Vec<ScriptEntry>) -> Self {
        let mut map: BTreeMap<(String, String), Vec<ScriptEntry>> = BTreeMap::new();
        for e in entries {
            map.entry((e.company_id.clone(), e.concept_id.clone()))
                .or_default()
                .push(e);
        }
        Self { default, entries: map }
    }

    pub fn parse(document: &str) -> Result<Self, VerifierError> {
        let doc: ScriptDocument = toml::from_str(document).map_err(|e| VerifierError::Script(e.to_string()))?;
        Ok(Self::new(doc.default, doc.entries))
    }

    pub fn from_path(path: &Path) -> Result<Self, VerifierError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| VerifierError::Script(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn entry(&self, market: Jurisdiction, company_id: &str, concept_id: &str) -> Option<&ScriptEntry> {
        let candidates = self.entries.get(&(company_id.to_string(), concept_id.to_string()))?;
        candidates
            .iter()
            .find(|e| e.market == Some(market))
            .or_else(|| candidates.iter().find(|e| e.market.is_none()))
    }
}

impl Verifier for ScriptedVerifier {
    fn verify(&self, request: &VerifierRequest) -> Result<VerifierResponse, VerifierError> {
        Ok(
            match self.entry(request.market, &request.company_id, &request.field.concept_id) {
                Some(e) => VerifierResponse {
                    claimed_decision: e.decision,
                    proposed_value: e.value,
                    evidence_quote: e.quote.clone(),
                    rationale: e.rationale.clone(),
                },
                None => VerifierResponse {
                    claimed_decision: self.default,
                    ..VerifierResponse::keep()
                },
            },
        )
    }
}

/// Posts each request as JSON with the protocol header and retries
/// transport failures with exponential backoff.
#[derive(Debug, Clone)]
pub struct RemoteVerifier {
    url: String,
    retries: u32,
    backoff: Duration,
    agent: ureq::Agent,
}

impl RemoteVerifier {
    pub const DEFAULT_RETRIES: u32 = 3;
    pub const DEFAULT_BACKOFF: Duration = Duration::from_millis(200);

    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            retries: Self::DEFAULT_RETRIES,
            backoff: Self::DEFAULT_BACKOFF,
            agent: ureq::AgentBuilder::new()
                .timeout_connect(Duration::from_secs(5))
                .timeout(Duration::from_secs(60))
                .build(),
        }
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn attempt(&self, request: &VerifierRequest) -> Result<VerifierResponse, Attempt> {
        let response = self
            .agent
            .post(&self.url)
            .set(PROTOCOL_HEADER, PROTOCOL_VERSION)
            .send_json(request);
        match response {
            Ok(r) => {
                let body = r.into_string().map_err(|e| Attempt::Retry(e.to_string()))?;
                serde_json::from_str(&body).map_err(|e| Attempt::Fatal(VerifierError::Malformed(e.to_string())))
            }
            Err(ureq::Error::Status(code, _)) if (400..500).contains(&code) && code != 429 => Err(Attempt::Fatal(
                VerifierError::Unavailable(format!("{} returned HTTP {code}", self.url)),
            )),
            Err(ureq::Error::Status(code, _)) => Err(Attempt::Retry(format!("HTTP {code}"))),
            Err(e) => Err(Attempt::Retry(e.to_string())),
        }
    }
}

enum Attempt {
    Retry(String),
    Fatal(VerifierError),
}

impl Verifier for RemoteVerifier {
    fn verify(&self, request: &VerifierRequest) -> Result<VerifierResponse, VerifierError> {
        let mut delay = self.backoff;
        let mut last = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay = delay.saturating_mul(2);
            }
            match self.attempt(request) {
                Ok(r) => return Ok(r),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(VerifierError::Unavailable(format!(
            "{} after {} retries: {last}",
            self.url, self.retries
        )))
    }
}

/// Parsed `--verifier` flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifierSpec {
    Scripted(PathBuf),
    Http(String),
}

impl FromStr for VerifierSpec {
    type Err = VerifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(path) = s.strip_prefix("scripted:") {
            if !path.is_empty() {
                return Ok(VerifierSpec::Scripted(PathBuf::from(path)));
            }
        }
        if let Some(url) = s.strip_prefix("http:") {
            // accept both http:<url> and a bare http://host form
            let url = if url.starts_with("//") {
                format!("http:{url}")
            } else {
                url.to_string()
            };
            if !url.is_empty() {
                return Ok(VerifierSpec::Http(url));
            }
        }
        Err(VerifierError::Spec(s.to_string()))
    }
}
