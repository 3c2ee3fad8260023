//! Machine-readable result document.

use prioloss::{AnalyticReport, ComparisonReport, SimulationReport};
use serde::{Deserialize, Serialize};

/// Everything one invocation produced, at full precision.
///
/// The JSON form is canonical: serializing, parsing, and serializing again
/// yields identical bytes, so records can be archived and diffed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Version of the tool that wrote the record.
    pub tool_version: String,
    /// Base RNG seed; present when a simulation ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Wall-clock duration of the run, in seconds.
    pub elapsed_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic: Option<AnalyticReport<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonReport>,
}

/// Renders a record as pretty-printed JSON with a trailing newline.
pub fn to_json_bytes(record: &OutputRecord) -> Result<Vec<u8>, serde_json::Error> {
    let mut bytes = serde_json::to_vec_pretty(record)?;
    bytes.push(b'\n');
    Ok(bytes)
}
