//! Cross-jurisdiction financial statement localization.
//!
//! Filings from tag-native (US, JP) and table-based (CN) markets are mapped
//! onto one canonical catalog of Income Statement, Balance Sheet and Cash
//! Flow concepts. A bounded verifier may repair missing or unreadable
//! values under evidence checks; everything is recorded in an append-only
//! audit trail and scored with Filled Rate, Conflict Rate and Accuracy.

pub mod anomaly;
pub mod audit;
pub mod guardrail;
pub mod mapping;
pub mod metrics;
pub mod ontology;
pub mod package;
pub mod pipeline;
pub mod table;
pub mod xbrl;
