//! Mode-centric validation of posterior predictions for inverse problems.
//!
//! The crate treats validation as an object-detection problem over posterior
//! modes: detect modes in predicted samples, localize them against reference
//! modes, assign predictions to references, and score the result with
//! detection-style and distribution-level metrics. A rule-based recommender
//! maps a problem fingerprint to an appropriate metric plan, and a synthetic
//! root-finding benchmark exercises the whole pipeline end to end.

pub mod aggregate;
pub mod assignment;
pub mod detect;
pub mod error;
pub mod localization;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod pipeline;
pub mod recommend;
pub mod report;
pub mod toybench;

pub use error::{Error, Result};
pub use model::{
    check_case_consistency, load_dataset, write_dataset, Availability, Diagnostic, Fingerprint,
    Mode, ModeSet, Observation, PeriodicDim, PosteriorSamples, Reference, ReferenceGranularity,
    ValidationCase,
};
