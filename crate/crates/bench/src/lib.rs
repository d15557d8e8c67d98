//! Evaluation tooling: strategy-comparison suites, plan validation, exhaustive
//! ground truth for small problems, and the KL diagnostic.

pub mod emit;
pub mod enumerate;
pub mod kl;
pub mod metrics;
pub mod micro;
pub mod suite;
pub mod validate;

pub use emit::{emit, to_csv, to_json, Format};
pub use enumerate::{explore, explore_from, EnumerateError, Exploration};
pub use kl::{kl_diagnostic, kl_divergence, KlError, KlReport};
pub use metrics::{depth_profile, profile_at, ProfileError};
pub use suite::{run_suite, ConfigError, LoadedSuite, SuiteConfig, SuiteReport};
pub use validate::{validate_plan, ValidationError};
