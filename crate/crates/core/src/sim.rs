//! Discrete-event simulation of the exact loss system.
//!
//! The simulator exists to validate the analytic approximations, so it
//! implements the system definition directly: a merged Poisson arrival
//! stream (class chosen proportionally to the rates, which is equivalent to
//! independent streams), service sampled at acceptance, and displacement by
//! the protocol's victim rule. A displaced job is lost outright; nothing is
//! re-queued or resumed.
//!
//! Replications are independent: each owns a counter-seeded rng stream and
//! its own counters, so they run in parallel and aggregate in a fixed order
//! regardless of scheduling. Estimates are replication means with Student-t
//! confidence half-widths.

use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::analytic::AnalyticReport;
use crate::model::{Protocol, SystemModel, Violation};

/// Name of the generator behind every replication stream, recorded in
/// reports so a result can be reproduced by algorithm and seed alone.
const RNG_ALGORITHM: &str = "chacha8";

/// Failure surfaced by the simulation layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid model: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidModel(Vec<Violation>),
    #[error("at least 2 replications are needed for a variance estimate, got {0}")]
    TooFewReplications(u32),
    #[error("arrivals per replication must be at least 1")]
    NoArrivals,
    #[error("warmup ({warmup}) must be smaller than arrivals per replication ({arrivals})")]
    WarmupTooLong { warmup: u64, arrivals: u64 },
    #[error("confidence level must lie strictly between 0 and 1, got {0}")]
    InvalidConfidence(f64),
    #[error("replication indices must cover 0..{expected} exactly once")]
    InconsistentRecords { expected: u32 },
    #[error("analytic report covers {analytic} classes but the simulation has {simulation}")]
    ClassCountMismatch { analytic: usize, simulation: usize },
}

/// Simulation run parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub arrivals_per_replication: u64,
    pub replications: u32,
    pub warmup_arrivals: u64,
    pub base_seed: u64,
    pub confidence_level: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            arrivals_per_replication: 100_000,
            replications: 10,
            warmup_arrivals: 10_000,
            base_seed: 42,
            confidence_level: 0.95,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.arrivals_per_replication < 1 {
            return Err(SimError::NoArrivals);
        }
        if self.replications < 2 {
            return Err(SimError::TooFewReplications(self.replications));
        }
        if self.warmup_arrivals >= self.arrivals_per_replication {
            return Err(SimError::WarmupTooLong {
                warmup: self.warmup_arrivals,
                arrivals: self.arrivals_per_replication,
            });
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return Err(SimError::InvalidConfidence(self.confidence_level));
        }
        Ok(())
    }
}

/// An arrival, as seen by the victim rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    /// 1-based class index; smaller is higher precedence.
    pub class: usize,
    pub arrival_time: f64,
    /// Global arrival order; strictly increasing, so it breaks every tie.
    pub sequence: u64,
}

/// Post-warmup counters for one class in one replication.
///
/// Every counted arrival lands in exactly one of the four outcome buckets,
/// so `arrivals = blocked + preempted + completed + in_service_at_end` holds
/// exactly on every replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: usize,
    pub arrivals: u64,
    pub blocked: u64,
    pub preempted: u64,
    pub completed: u64,
    pub in_service_at_end: u64,
}

impl ClassStats {
    fn new(class: usize) -> Self {
        Self {
            class,
            arrivals: 0,
            blocked: 0,
            preempted: 0,
            completed: 0,
            in_service_at_end: 0,
        }
    }

    /// Loss fraction at the arrival instant.
    pub fn arrival_loss_fraction(&self) -> f64 {
        ratio(self.blocked, self.arrivals)
    }

    /// Displacement fraction among accepted jobs.
    pub fn preemption_fraction(&self) -> f64 {
        ratio(self.preempted, self.arrivals - self.blocked)
    }

    /// Total loss fraction.
    pub fn loss_fraction(&self) -> f64 {
        ratio(self.blocked + self.preempted, self.arrivals)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Everything one replication produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: u32,
    pub stream_seed: u64,
    pub per_class: Vec<ClassStats>,
    /// Time of the last arrival; the measurement horizon.
    pub end_time: f64,
    /// Integral of the number of busy servers over the horizon.
    pub busy_time: f64,
    /// Per-class service actually carried within the horizon, truncated at
    /// displacement or at the horizon. Sums to `busy_time`.
    pub carried_work: Vec<f64>,
}

/// A point estimate with its confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    /// Whether `value` lies inside the interval.
    pub fn contains(&self, value: f64) -> bool {
        (value - self.mean).abs() <= self.half_width
    }
}

/// Replication-mean estimates for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassEstimates {
    pub class: usize,
    /// Estimate of the loss fraction at the arrival instant (q).
    pub arrival_loss: Estimate,
    /// Estimate of the displacement fraction among accepted jobs (r).
    pub preemption: Estimate,
    /// Estimate of the total loss fraction (gamma).
    pub loss: Estimate,
}

/// Aggregated simulation output plus the raw per-replication records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub protocol: Protocol,
    pub rng_algorithm: String,
    pub base_seed: u64,
    pub arrivals_per_replication: u64,
    pub warmup_arrivals: u64,
    pub replications: u32,
    pub confidence_level: f64,
    pub total_simulated_time: f64,
    pub classes: Vec<ClassEstimates>,
    pub records: Vec<ReplicationRecord>,
}

/// Derives the rng seed for one replication stream from the base seed.
///
/// splitmix64 finalizer over base-plus-offset; any fixed bijective mix would
/// do, the point is reproducible, well-separated streams.
pub fn stream_seed(base_seed: u64, replication: u32) -> u64 {
    let mut z = base_seed.wrapping_add((replication as u64 + 1).wrapping_mul(0x9E3779B97F4A7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Picks which in-service job an arrival displaces, if any.
///
/// Both protocols target the lowest-precedence class present, `L`. Where
/// they differ: the first protocol displaces when `L` is the arriving class
/// or lower, and ejects the earliest-arrived job of class `L`; the second
/// displaces only when `L` is strictly lower, and ejects the latest-arrived.
/// Returns the position of the victim within `in_service`.
pub fn select_victim(
    in_service: &[Job],
    arriving_class: usize,
    protocol: Protocol,
) -> Option<usize> {
    victim_position(
        in_service,
        |j| (j.class, j.sequence),
        arriving_class,
        protocol,
    )
}

fn victim_position<T, F>(
    in_service: &[T],
    key: F,
    arriving_class: usize,
    protocol: Protocol,
) -> Option<usize>
where
    F: Fn(&T) -> (usize, u64),
{
    let lowest = in_service.iter().map(|x| key(x).0).max()?;
    let eligible = match protocol {
        Protocol::Fcfd => lowest >= arriving_class,
        Protocol::Lcfd => lowest > arriving_class,
    };
    if !eligible {
        return None;
    }
    in_service
        .iter()
        .enumerate()
        .filter(|(_, x)| key(x).0 == lowest)
        .map(|(pos, x)| (pos, key(x).1))
        .reduce(|a, b| {
            let earlier = if a.1 < b.1 { a } else { b };
            let later = if a.1 < b.1 { b } else { a };
            match protocol {
                Protocol::Fcfd => earlier,
                Protocol::Lcfd => later,
            }
        })
        .map(|(pos, _)| pos)
}

struct Slot {
    class: usize,
    sequence: u64,
    start: f64,
    departure: f64,
    counted: bool,
}

/// Runs one replication of the event loop.
///
/// `replication` only labels the returned record; all randomness comes from
/// `stream_seed`. The same seed always yields the same record.
///
/// Admission is decided before the service draw: an arrival is blocked (or
/// granted a server / a victim) purely from the occupancy it sees. A job
/// whose sampled service is zero completes at its arrival instant without
/// taking a server, so it never actually evicts the victim chosen for it.
pub fn run_replication(
    model: &SystemModel<f64>,
    config: &SimConfig,
    replication: u32,
    stream_seed: u64,
) -> ReplicationRecord {
    let n = model.class_count();
    let servers = model.servers as usize;
    let rates = model.rates();
    let total_rate: f64 = rates.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
    let mut stats: Vec<ClassStats> = (1..=n).map(ClassStats::new).collect();
    let mut carried_work = vec![0.0f64; n];
    let mut slots: Vec<Slot> = Vec::with_capacity(servers);
    let mut time = 0.0f64;

    for sequence in 1..=config.arrivals_per_replication {
        let u: f64 = rng.random();
        time += -(1.0 - u).ln() / total_rate;

        // Departures due before (or exactly at) this arrival go first,
        // earliest departure first, sequence breaking exact ties.
        drain_departures(&mut slots, time, &mut stats, &mut carried_work);

        let class = pick_class(rng.random(), &rates, total_rate);
        let counted = sequence > config.warmup_arrivals;
        if counted {
            stats[class].arrivals += 1;
        }

        // Admission: a free server, or a victim to displace. Blocking is
        // decided before the service draw, so it never depends on the
        // arriving job's own length.
        let admission: Option<Option<usize>> = if slots.len() < servers {
            Some(None)
        } else {
            victim_position(
                &slots,
                |s: &Slot| (s.class + 1, s.sequence),
                class + 1,
                model.protocol,
            )
            .map(Some)
        };
        match admission {
            None => {
                if counted {
                    stats[class].blocked += 1;
                }
            }
            Some(victim) => {
                let service: f64 = model.classes[class].service.sample(&mut rng);
                if service == 0.0 {
                    // A zero-length service needs no server: the job
                    // completes at its arrival instant and displaces
                    // nothing. Only a positive draw consummates the
                    // eviction.
                    if counted {
                        stats[class].completed += 1;
                    }
                } else {
                    if let Some(pos) = victim {
                        let out = slots.swap_remove(pos);
                        carried_work[out.class] += time - out.start;
                        if out.counted {
                            stats[out.class].preempted += 1;
                        }
                    }
                    slots.push(Slot {
                        class,
                        sequence,
                        start: time,
                        departure: time + service,
                        counted,
                    });
                }
            }
        }
    }

    let end_time = time;
    // Zero-length services accepted at the final arrival depart at the
    // horizon itself; they are completions, not in-flight work.
    drain_departures(&mut slots, end_time, &mut stats, &mut carried_work);
    for slot in &slots {
        carried_work[slot.class] += end_time - slot.start;
        if slot.counted {
            stats[slot.class].in_service_at_end += 1;
        }
    }
    let busy_time = carried_work.iter().sum();

    ReplicationRecord {
        replication,
        stream_seed,
        per_class: stats,
        end_time,
        busy_time,
        carried_work,
    }
}

fn pick_class(u: f64, rates: &[f64], total_rate: f64) -> usize {
    let target = u * total_rate;
    let mut acc = 0.0;
    for (i, &rate) in rates.iter().enumerate() {
        acc += rate;
        if target < acc {
            return i;
        }
    }
    rates.len() - 1
}

fn drain_departures(
    slots: &mut Vec<Slot>,
    now: f64,
    stats: &mut [ClassStats],
    carried_work: &mut [f64],
) {
    loop {
        let next = slots
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                a.departure
                    .total_cmp(&b.departure)
                    .then(a.sequence.cmp(&b.sequence))
            })
            .map(|(pos, slot)| (pos, slot.departure));
        match next {
            Some((pos, departure)) if departure <= now => {
                let done = slots.swap_remove(pos);
                carried_work[done.class] += done.departure - done.start;
                if done.counted {
                    stats[done.class].completed += 1;
                }
            }
            _ => return,
        }
    }
}

/// Runs all replications in parallel and aggregates them.
pub fn run(model: &SystemModel<f64>, config: &SimConfig) -> Result<SimulationReport, SimError> {
    model.validate().map_err(SimError::InvalidModel)?;
    config.validate()?;
    let records: Vec<ReplicationRecord> = (0..config.replications)
        .into_par_iter()
        .map(|i| run_replication(model, config, i, stream_seed(config.base_seed, i)))
        .collect();
    aggregate(model, config, records)
}

/// Folds replication records into a report.
///
/// Records are reordered by replication index first, so the report is
/// identical no matter what order the replications finished in.
pub fn aggregate(
    model: &SystemModel<f64>,
    config: &SimConfig,
    mut records: Vec<ReplicationRecord>,
) -> Result<SimulationReport, SimError> {
    config.validate()?;
    records.sort_by_key(|r| r.replication);
    let indices_ok = records.len() == config.replications as usize
        && records
            .iter()
            .enumerate()
            .all(|(i, r)| r.replication == i as u32);
    if !indices_ok {
        return Err(SimError::InconsistentRecords {
            expected: config.replications,
        });
    }

    let n = model.class_count();
    let df = (config.replications - 1) as f64;
    let student = StudentsT::new(0.0, 1.0, df).expect("valid degrees of freedom");
    let t_value = student.inverse_cdf(0.5 + config.confidence_level / 2.0);

    let estimate = |samples: &[f64]| -> Estimate {
        let count = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / count;
        let variance = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (count - 1.0);
        Estimate {
            mean,
            half_width: t_value * (variance / count).sqrt(),
        }
    };

    let classes = (0..n)
        .map(|i| {
            let q: Vec<f64> = records
                .iter()
                .map(|r| r.per_class[i].arrival_loss_fraction())
                .collect();
            let r: Vec<f64> = records
                .iter()
                .map(|r| r.per_class[i].preemption_fraction())
                .collect();
            let gamma: Vec<f64> = records
                .iter()
                .map(|r| r.per_class[i].loss_fraction())
                .collect();
            ClassEstimates {
                class: i + 1,
                arrival_loss: estimate(&q),
                preemption: estimate(&r),
                loss: estimate(&gamma),
            }
        })
        .collect();

    Ok(SimulationReport {
        protocol: model.protocol,
        rng_algorithm: RNG_ALGORITHM.to_string(),
        base_seed: config.base_seed,
        arrivals_per_replication: config.arrivals_per_replication,
        warmup_arrivals: config.warmup_arrivals,
        replications: config.replications,
        confidence_level: config.confidence_level,
        total_simulated_time: records.iter().map(|r| r.end_time).sum(),
        classes,
        records,
    })
}

/// How one metric's analytic value sits against its simulation interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub analytic: f64,
    pub simulated: f64,
    pub half_width: f64,
    /// analytic minus simulated.
    pub absolute_delta: f64,
    /// Delta over the simulated value; absent when the simulated value is 0.
    pub relative_delta: Option<f64>,
    /// Whether the analytic value lies inside the confidence interval.
    pub covered: bool,
}

fn metric_comparison(analytic: f64, estimate: Estimate) -> MetricComparison {
    let absolute_delta = analytic - estimate.mean;
    MetricComparison {
        analytic,
        simulated: estimate.mean,
        half_width: estimate.half_width,
        absolute_delta,
        relative_delta: (estimate.mean != 0.0).then(|| absolute_delta / estimate.mean),
        covered: estimate.contains(analytic),
    }
}

/// Side-by-side comparison for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassComparison {
    pub class: usize,
    pub arrival_loss: MetricComparison,
    pub preemption: MetricComparison,
    pub loss: MetricComparison,
}

/// Analytic predictions laid against simulation estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub classes: Vec<ClassComparison>,
}

impl ComparisonReport {
    /// True when every class's analytic total loss lies inside its interval.
    pub fn loss_covered(&self) -> bool {
        self.classes.iter().all(|c| c.loss.covered)
    }
}

/// Lines up an analytic report with a simulation of the same model.
pub fn compare(
    analytic: &AnalyticReport<f64>,
    sim: &SimulationReport,
) -> Result<ComparisonReport, SimError> {
    if analytic.loss.len() != sim.classes.len() {
        return Err(SimError::ClassCountMismatch {
            analytic: analytic.loss.len(),
            simulation: sim.classes.len(),
        });
    }
    let classes = sim
        .classes
        .iter()
        .enumerate()
        .map(|(i, est)| ClassComparison {
            class: est.class,
            arrival_loss: metric_comparison(analytic.arrival_loss[i], est.arrival_loss),
            preemption: metric_comparison(analytic.preemption[i], est.preemption),
            loss: metric_comparison(analytic.loss[i], est.loss),
        })
        .collect();
    Ok(ComparisonReport { classes })
}

/// Writes one CSV row per replication per class.
pub fn write_replications_csv<W: io::Write>(
    report: &SimulationReport,
    writer: &mut W,
) -> io::Result<()> {
    writeln!(
        writer,
        "replication,class,arrivals,blocked,preempted,completed,in_service_at_end"
    )?;
    for record in &report.records {
        for stats in &record.per_class {
            writeln!(
                writer,
                "{},{},{},{},{},{},{}",
                record.replication,
                stats.class,
                stats.arrivals,
                stats.blocked,
                stats.preempted,
                stats.completed,
                stats.in_service_at_end
            )?;
        }
    }
    Ok(())
}
