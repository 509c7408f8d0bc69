//! Calibration and routing engine for hybrid content + prosody alert detection.

pub mod calibration;
pub mod quantile;
pub mod types;

pub use calibration::{calibrate_hybrid, single_cutoff, union_rate, CalibrationError, SolverSettings};
pub use quantile::{QuantileError, ScoreSample};
pub use types::{
    validate_dataset, AlertCategory, CalibrationConfig, DatasetFingerprint, DatasetSummary, RoutingBudget,
    RoutingDecision, Score, ScoredResponse, TypeError,
};
pub mod io;
pub mod synthgen;
pub mod evaluation;
pub mod pipeline;
