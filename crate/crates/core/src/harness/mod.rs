//! Evaluation of schemes: exact errors and false alarm, validation,
//! seeded Monte Carlo, the brute-force min-max oracle, and empirical error
//! exponents.

mod exact;
mod exponent;
mod montecarlo;
mod oracle;
mod sweep;

pub use exact::{
    exact_errors, validate, worst_case_false_alarm, ValidationReport, FALSE_ALARM_SLACK, MARGINAL_TOLERANCE,
};
pub use exponent::{empirical_exponent, fit_line, np_test, ExponentFit, ExponentPoint, LineFit, NpTest};
pub use montecarlo::{
    monte_carlo, simulate_asymptotic, simulate_bundle, wilson_interval, AsymptoticRunner, BundleRunner, Estimate,
    H0Source, SimConfig, SimReport, TrialRunner, ASYMPTOTIC_EXACT_LIMIT, BLOCK_TRIALS, NULL_STREAM_BIT, Z95,
};
pub use oracle::{brute_force_minmax, OracleReport, ORACLE_MAX_M, ORACLE_MAX_N};
pub use sweep::{bundle_exponent_bounds, bundle_joints, sweep_rows, SweepRow, SWEEP_COLUMNS};
