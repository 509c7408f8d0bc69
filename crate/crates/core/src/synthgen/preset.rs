use serde::{Deserialize, Serialize};

use super::{GeneratorSpec, SynthError};

const MANIFEST_JSON: &str = include_str!("../../presets/manifest.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub rng_algorithm: String,
    pub rng_test_vectors: Vec<RngTestVector>,
    pub presets: Vec<PresetEntry>,
}

/// First raw outputs and first standard-normal draws for a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngTestVector {
    pub seed: u64,
    pub first_u64: Vec<u64>,
    pub first_normals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetEntry {
    pub name: String,
    pub description: String,
    pub spec: GeneratorSpec,
    pub expected: PresetExpectation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetExpectation {
    pub total: usize,
    pub alerts: usize,
    pub fingerprint: String,
}

pub fn manifest() -> Manifest {
    serde_json::from_str(MANIFEST_JSON).expect("bundled preset manifest is valid JSON")
}

pub fn preset(name: &str) -> Result<GeneratorSpec, SynthError> {
    manifest()
        .presets
        .into_iter()
        .find(|p| p.name == name)
        .map(|p| p.spec)
        .ok_or_else(|| SynthError::UnknownPreset(name.to_string()))
}
