//! Analysis toolkit for detection-loophole-free Bell tests with photon pairs.
//!
//! The crate predicts coincidence and singles probabilities for the
//! non-maximally entangled state `(|HH> + r|VV>) / sqrt(1 + r^2)`, normalizes
//! measured counts to a common number of trials, fits the overall scale
//! `N * eta1 * eta2` by least squares, and reports per-setting deviations from
//! the quantum prediction. A Monte Carlo simulator produces synthetic records
//! for checking the pipeline end to end.

pub mod anomaly;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod quantum;
pub mod sim;

pub use anomaly::{
    anomaly_ratio, build_comparison, empirical_ch_counts, poisson_z_score, poisson_z_scores,
    ComparisonRow, ComparisonTable,
};
pub use error::{Error, Result};
pub use io::{parse_experiment_file, parse_sim_config, render_report, serialize_experiment, ReportFormat};
pub use pipeline::{
    fit_scale, normalize_count, normalize_record, predicted_counts, quantum_setting_probabilities,
    AliceSetting, BobSetting, ExperimentRecord, ScaleFit, SettingData, SettingPair, Singles,
    DEFAULT_REFERENCE_TRIALS,
};
pub use quantum::{
    ch_statistic, coincidence_probability, critical_efficiency, outcome_distribution,
    singles_probability, Angle, OutcomeDistribution, PairSourceModel, SettingsQuad,
};
pub use sim::{simulate_experiment, validate_pipeline, RecoveryStats, SimConfig};
