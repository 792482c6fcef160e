//! File formats, the external trainer protocol, parallel sweeps and report
//! output for topicforge. The computation itself lives in `topicforge-core`.

pub mod config;
pub mod eval;
pub mod external;
pub mod io;
pub mod protocol;
pub mod report;
pub mod serve;
pub mod sweep;

pub use config::{ConfigError, ExperimentConfig};
pub use report::{emit_report, ReportFormat, RunManifest};
pub use sweep::{run_parallel, AnyTrainerFactory};
