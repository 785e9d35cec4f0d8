//! Verification harness: independent numerical oracles, Monte Carlo
//! estimators and the suite that ties them to the closed forms.

pub mod estimate;
pub mod oracle;
pub mod suite;

pub use estimate::{
    estimate_laplace, estimate_laplace_grid, estimate_pgf, estimate_pgf_grid, EstimateReport, LaplaceEngine,
};
pub use oracle::{ode_oracle_f, quad_oracle_phi, OracleReport};
pub use suite::{run_verification_suite, Record, SuiteReport, SuiteSpec};
