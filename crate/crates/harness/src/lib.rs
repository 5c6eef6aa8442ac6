//! Scenario runner for the qstop operator identities.
//!
//! A scenario fixes a grid, a cocycle recipe, two stop-time recipes and a
//! list of named checks. [`run_verify`] expands it into seeded instances and
//! reports the worst deviation per check; [`run_converge`] and
//! [`run_truncation_sweep`] run the refinement experiments.

pub mod checks;
pub mod error;
pub mod experiments;
pub mod report;
pub mod scenario;
pub mod suite;

pub use checks::CheckId;
pub use error::HarnessError;
pub use experiments::{run_converge, run_truncation_sweep};
pub use report::{write_files, ConvergeTable, Emit, Report, SweepTable};
pub use scenario::{Instance, Scenario};
pub use suite::{run_verify, Execution};

/// Directory holding the bundled scenario files.
pub fn bundled_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}
