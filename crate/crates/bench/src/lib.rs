//! Shared fixtures for the criterion benchmarks.

use alertroute_core::synthgen::{generate, preset, GeneratorSpec};
use alertroute_core::ScoredResponse;

/// The frozen preset scaled to `total` responses at the same parameters.
pub fn paperlike(total: usize) -> Vec<ScoredResponse> {
    let base = preset("paperlike-v1").expect("preset is in the manifest");
    let n_alert = (total / 869).max(1);
    let spec = GeneratorSpec {
        n_normal: total - n_alert,
        n_alert,
        ..base
    };
    generate(&spec).expect("preset parameters are valid")
}
