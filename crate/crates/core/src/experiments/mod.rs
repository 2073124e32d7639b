//! Initial data, ensembles and the ε-sweep harness.

pub mod checks;
pub mod ensemble;
pub mod init;
pub mod limits;
pub mod report;

pub use ensemble::{run_ensemble, EnsembleConfig, Snapshot};
pub use init::{make_initial, E0Preset, InitSpec, LocalizedProfile};
pub use limits::{
    kinetic_limit_test, localized_limit_tests, ou_limit_test, weak_limit_test, KineticLimitConfig,
    LocalizedLimitConfig, LocalizedReports,
};
pub use report::{ReportRow, SweepReport, Verdict};
