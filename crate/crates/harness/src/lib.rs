//! Experiment orchestration for the tmsk toolkit: spec files, study runs,
//! and CSV/JSON result records.

pub mod config;
pub mod error;
pub mod report;
pub mod run;
pub mod selftest;

pub use config::{load_spec, parse_spec, ExperimentKind, ExperimentSpec};
pub use error::{HarnessError, Result};
pub use report::{emit_report, Format, ResultRecord};
pub use run::run_experiment;

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "TMSK_THREADS";

/// Crate version plus the `TMSK_BUILD_ID` value seen at compile time.
pub fn build_id() -> String {
    format!(
        "tmsk-harness {} ({})",
        env!("CARGO_PKG_VERSION"),
        option_env!("TMSK_BUILD_ID").unwrap_or("local")
    )
}
