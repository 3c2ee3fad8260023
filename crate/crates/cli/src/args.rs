//! Command-line surface: subcommands and flags.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use prioloss::{GammaMode, Protocol};

/// Loss probabilities for multi-server preemptive-priority loss systems.
#[derive(Debug, Parser)]
#[command(name = "prioloss", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute per-class loss probabilities from the busy-period chain.
    Analyze {
        /// Path to the JSON run configuration.
        config: PathBuf,
        /// How the total loss is assembled: strict-eq8 or composed-eq7.
        #[arg(long, value_parser = parse_gamma_mode)]
        gamma_mode: Option<GammaMode>,
        /// Displacement protocol to use instead of the configured one.
        #[arg(long, value_parser = parse_protocol)]
        protocol_override: Option<Protocol>,
        /// Write the full-precision result document to this path.
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
    },
    /// Estimate the same probabilities by discrete-event simulation.
    Simulate {
        /// Path to the JSON run configuration.
        config: PathBuf,
        /// Counted arrivals per replication.
        #[arg(long)]
        arrivals: Option<u64>,
        /// Number of independent replications (at least 2).
        #[arg(long)]
        replications: Option<u32>,
        /// Base seed for the per-replication RNG streams.
        #[arg(long)]
        seed: Option<u64>,
        /// Arrivals discarded at the start of each replication.
        #[arg(long)]
        warmup: Option<u64>,
        /// Displacement protocol to use instead of the configured one.
        #[arg(long, value_parser = parse_protocol)]
        protocol_override: Option<Protocol>,
        /// Write the full-precision result document to this path.
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
        /// Write one CSV row per replication per class to this path.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Run both pipelines and tabulate deltas and CI coverage.
    Compare {
        /// Path to the JSON run configuration.
        config: PathBuf,
        /// How the total loss is assembled: strict-eq8 or composed-eq7.
        #[arg(long, value_parser = parse_gamma_mode)]
        gamma_mode: Option<GammaMode>,
        /// Counted arrivals per replication.
        #[arg(long)]
        arrivals: Option<u64>,
        /// Number of independent replications (at least 2).
        #[arg(long)]
        replications: Option<u32>,
        /// Base seed for the per-replication RNG streams.
        #[arg(long)]
        seed: Option<u64>,
        /// Arrivals discarded at the start of each replication.
        #[arg(long)]
        warmup: Option<u64>,
        /// Displacement protocol to use instead of the configured one.
        #[arg(long, value_parser = parse_protocol)]
        protocol_override: Option<Protocol>,
        /// Write the full-precision result document to this path.
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
        /// Write one CSV row per replication per class to this path.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
        /// Exit with status 5 if any analytic total loss falls outside its
        /// simulation confidence interval.
        #[arg(long)]
        fail_on_noncoverage: bool,
    },
}

fn parse_gamma_mode(s: &str) -> Result<GammaMode, String> {
    match s {
        "strict-eq8" => Ok(GammaMode::Strict),
        "composed-eq7" => Ok(GammaMode::Composed),
        other => Err(format!(
            "unknown gamma mode {other:?} (expected strict-eq8 or composed-eq7)"
        )),
    }
}

fn parse_protocol(s: &str) -> Result<Protocol, String> {
    match s {
        "fcfd" => Ok(Protocol::Fcfd),
        "lcfd" => Ok(Protocol::Lcfd),
        other => Err(format!(
            "unknown protocol {other:?} (expected fcfd or lcfd)"
        )),
    }
}
