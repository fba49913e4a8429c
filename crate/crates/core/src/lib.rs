//! Version control and change intelligence for operational spreadsheets.
//!
//! Snapshots of workbook content are stored content-addressed in an
//! append-only store, diffed cell by cell, checked against alert rules and
//! change manifests, and summarized for trend and retirement analysis.

pub mod alert;
pub mod analytics;
pub mod audit;
pub mod diff;
pub mod error;
pub mod ingest;
pub mod model;
pub mod store;

pub use error::{Error, Result};
