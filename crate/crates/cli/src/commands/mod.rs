pub mod calibrate;
pub mod evaluate;
pub mod plugin_check;
pub mod route;
pub mod simulate;

use std::path::Path;

use alertroute_core::io::read_dataset;
use alertroute_core::{CalibrationError, ScoredResponse, SolverSettings};

use crate::CliError;

pub(crate) fn load_dataset(path: &Path) -> Result<Vec<ScoredResponse>, CliError> {
    Ok(read_dataset(path)?)
}

pub(crate) fn solver_settings(tolerance: Option<f64>, max_iter: u32) -> SolverSettings {
    SolverSettings {
        tolerance,
        max_iterations: max_iter,
        ..SolverSettings::default()
    }
}

pub(crate) fn calibration_error(e: CalibrationError) -> CliError {
    match e {
        CalibrationError::InvalidSettings(m) => CliError::Usage(m),
        CalibrationError::SolverDidNotConverge { .. } => CliError::NotConverged(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}
