//! Two-tier pathology report triage.
//!
//! Reports are split into sections ([`sectioner`]), turned into two
//! complementary model inputs ([`preprocess`]), scored by pluggable binary
//! classifiers ([`backend`]) and combined per tier by an OR-ensemble
//! ([`cascade`]). Tier 1 separates cancer from non-cancer; tier 2 separates
//! reportable from non-reportable cancers. [`sampler`] builds the training
//! and test sets and [`metrics`] scores the results.

pub mod backend;
pub mod cascade;
pub mod corpus;
mod error;
pub mod labels;
pub mod metrics;
pub mod preprocess;
pub mod sampler;
pub mod sectioner;
pub mod synth;

pub use error::{BackendError, BackendErrorKind, Error, Result};
pub use labels::{Label, T1Label, T2Label, Task};
