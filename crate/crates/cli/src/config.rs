//! Strict JSON ingestion for run configurations.
//!
//! Every document level rejects unknown keys, and parse errors carry the
//! path of the offending field so typos are easy to locate.

use std::fs;
use std::path::Path;

use prioloss::{
    Branch, GammaMode, PriorityClass, Protocol, ServiceDistribution, SimConfig, SystemModel,
};
use serde::Deserialize;

use crate::CliError;

/// Top-level run configuration document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub model: ModelConfig,
    pub simulation: Option<SimulationSection>,
    pub analysis: Option<AnalysisSection>,
}

/// The system description: servers, displacement protocol, and one entry per
/// priority class in precedence order (first entry displaces last).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub servers: u32,
    pub protocol: Protocol,
    pub classes: Vec<ClassConfig>,
}

/// One priority class: Poisson arrival rate and service-time distribution.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassConfig {
    pub rate: f64,
    pub service: ServiceConfig,
}

/// A service-time distribution, declared by `type` plus the fields that type
/// needs.
///
/// Parsed with every parameter optional so that misspelled keys are rejected
/// with their full path (serde cannot combine `deny_unknown_fields` with an
/// internally tagged enum); [`ServiceConfig::build`] then enforces which
/// fields each type requires and forbids the rest.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(rename = "type")]
    pub kind: String,
    pub rate: Option<f64>,
    pub value: Option<f64>,
    pub shape: Option<u32>,
    pub stage_rate: Option<f64>,
    pub branches: Option<Vec<BranchConfig>>,
    pub atom: Option<f64>,
}

/// One branch of a hyperexponential mixture.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchConfig {
    pub weight: f64,
    pub rate: f64,
}

/// Optional simulation defaults; command-line flags override these.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub arrivals_per_replication: Option<u64>,
    pub replications: Option<u32>,
    pub warmup_arrivals: Option<u64>,
    pub base_seed: Option<u64>,
    pub confidence_level: Option<f64>,
}

/// Optional analysis defaults; command-line flags override these.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub gamma_mode: Option<GammaMode>,
}

/// Reads and parses a configuration file, reporting the offending path on
/// schema violations.
pub fn load_config(path: &Path) -> Result<RunConfigFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        CliError::Config(format!(
            "invalid config {} at {}: {}",
            path.display(),
            e.path(),
            e.inner()
        ))
    })
}

/// Builds the validated model, optionally overriding the configured
/// displacement protocol. Returns ingestion warnings (currently only
/// hyperexponential weight normalization) alongside the model.
pub fn build_model(
    config: &ModelConfig,
    protocol_override: Option<Protocol>,
) -> Result<(SystemModel<f64>, Vec<String>), CliError> {
    let mut warnings = Vec::new();
    let mut classes = Vec::with_capacity(config.classes.len());
    for (pos, class) in config.classes.iter().enumerate() {
        let index = pos + 1;
        let service = class.service.build(index, &mut warnings)?;
        classes.push(PriorityClass {
            index,
            rate: class.rate,
            service,
        });
    }
    let protocol = protocol_override.unwrap_or(config.protocol);
    let model = SystemModel::new(config.servers, classes, protocol).map_err(|violations| {
        let list = violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ");
        CliError::Config(format!("invalid model: {list}"))
    })?;
    Ok((model, warnings))
}

impl ServiceConfig {
    fn present_fields(&self) -> Vec<&'static str> {
        let mut present = Vec::new();
        if self.rate.is_some() {
            present.push("rate");
        }
        if self.value.is_some() {
            present.push("value");
        }
        if self.shape.is_some() {
            present.push("shape");
        }
        if self.stage_rate.is_some() {
            present.push("stage_rate");
        }
        if self.branches.is_some() {
            present.push("branches");
        }
        if self.atom.is_some() {
            present.push("atom");
        }
        present
    }

    /// Converts to a validated distribution, enforcing that exactly the
    /// fields of the declared type are present.
    pub fn build(
        &self,
        class: usize,
        warnings: &mut Vec<String>,
    ) -> Result<ServiceDistribution<f64>, CliError> {
        let allowed: &[&str] = match self.kind.as_str() {
            "exponential" => &["rate"],
            "deterministic" => &["value"],
            "erlang_k" => &["shape", "stage_rate"],
            "hyperexponential" => &["branches"],
            "zero_exponential" => &["atom", "rate"],
            other => {
                return Err(CliError::Config(format!(
                    "class {class}: unknown service type {other:?} (expected one of \
                     exponential, deterministic, erlang_k, hyperexponential, zero_exponential)"
                )));
            }
        };
        let present = self.present_fields();
        if let Some(stray) = present.iter().find(|f| !allowed.contains(f)) {
            return Err(CliError::Config(format!(
                "class {class}: field {stray:?} does not apply to service type {:?}",
                self.kind
            )));
        }
        if let Some(missing) = allowed.iter().find(|f| !present.contains(f)) {
            return Err(CliError::Config(format!(
                "class {class}: service type {:?} requires field {missing:?}",
                self.kind
            )));
        }
        // unwrap: presence of every `allowed` field was checked just above.
        match self.kind.as_str() {
            "exponential" => ServiceDistribution::exponential(self.rate.unwrap()),
            "deterministic" => ServiceDistribution::deterministic(self.value.unwrap()),
            "erlang_k" => {
                ServiceDistribution::erlang_k(self.shape.unwrap(), self.stage_rate.unwrap())
            }
            "hyperexponential" => {
                let branches = self.branches.as_ref().unwrap();
                let total: f64 = branches.iter().map(|b| b.weight).sum();
                if (total - 1.0).abs() > 1e-12 {
                    warnings.push(format!(
                        "class {class}: hyperexponential weights sum to {total}; normalizing"
                    ));
                }
                ServiceDistribution::hyperexponential(
                    branches
                        .iter()
                        .map(|b| Branch {
                            weight: b.weight,
                            rate: b.rate,
                        })
                        .collect(),
                )
            }
            "zero_exponential" => {
                ServiceDistribution::zero_exponential(self.atom.unwrap(), self.rate.unwrap())
            }
            _ => unreachable!("kind was validated against the allowed list"),
        }
        .map_err(|e| CliError::Config(format!("class {class}: {e}")))
    }
}

/// Simulation parameters given on the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimFlags {
    pub arrivals: Option<u64>,
    pub replications: Option<u32>,
    pub seed: Option<u64>,
    pub warmup: Option<u64>,
}

/// Merges flag > file > default into a concrete simulation configuration.
/// The default warmup is a tenth of the resolved arrivals per replication.
pub fn resolve_sim_config(section: Option<&SimulationSection>, flags: &SimFlags) -> SimConfig {
    let file = section.cloned().unwrap_or_default();
    let defaults = SimConfig::default();
    let arrivals = flags
        .arrivals
        .or(file.arrivals_per_replication)
        .unwrap_or(defaults.arrivals_per_replication);
    SimConfig {
        arrivals_per_replication: arrivals,
        replications: flags
            .replications
            .or(file.replications)
            .unwrap_or(defaults.replications),
        warmup_arrivals: flags
            .warmup
            .or(file.warmup_arrivals)
            .unwrap_or(arrivals / 10),
        base_seed: flags.seed.or(file.base_seed).unwrap_or(defaults.base_seed),
        confidence_level: file.confidence_level.unwrap_or(defaults.confidence_level),
    }
}
