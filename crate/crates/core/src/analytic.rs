//! Analytic approximations for the per-class loss probabilities.
//!
//! The computation runs in three stages. First a per-class busy-period
//! recursion turns the service-time transforms into expected busy-period
//! contributions `g` and displacement-exposure times `d`; the recursion
//! differs between the two protocols. Second, each class's blocking
//! probability `c` comes from an Erlang-like ratio driven by the aggregate
//! load of that class and the classes above it. Third, the blocking vector is
//! folded into the operator-facing metrics: the probability `q` of being lost
//! at the arrival instant, the probability `r` of being displaced after
//! acceptance, and the total loss probability `gamma`.
//!
//! The approximation is exact for a single server, for exhaustive
//! common-exponential service (where `c` collapses to the Erlang-B formula),
//! and in several other degenerate regimes; elsewhere it is validated against
//! the simulator in this crate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::DistributionError;
use crate::model::{Protocol, SystemModel, Violation};
use crate::Real;

/// Above this many servers the Erlang-like ratio is evaluated in log space;
/// below it, incremental term ratios are cheaper and exact enough.
const LOG_SPACE_SERVER_THRESHOLD: u32 = 20;

/// How the total loss probability is assembled from the blocking vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GammaMode {
    /// Direct form: `gamma_i = c_{i-1} + (Lambda_i / lambda_i) (c_i - c_{i-1})`.
    #[default]
    #[serde(rename = "strict-eq8")]
    Strict,
    /// Two-stage form: `gamma_i = q_i + (1 - q_i) r_i`.
    #[serde(rename = "composed-eq7")]
    Composed,
}

impl std::fmt::Display for GammaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GammaMode::Strict => "strict-eq8",
            GammaMode::Composed => "composed-eq7",
        })
    }
}

/// Failure surfaced by the analytic layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("invalid model: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidModel(Vec<Violation>),
    #[error("class {class}: {source}")]
    Distribution {
        class: usize,
        source: DistributionError,
    },
    #[error("class {class}: busy-period denominator is not positive")]
    DegenerateBusyPeriod { class: usize },
    #[error("class {class}: blocking probability is 1, preemption fraction undefined")]
    SaturatedBlocking { class: usize },
    #[error("class {class}: {quantity} is not finite")]
    NonFinite {
        class: usize,
        quantity: &'static str,
    },
    #[error("offered load must be nonnegative and finite, got {0}")]
    InvalidOfferedLoad(String),
    #[error("chain covers {chain} classes but the model has {model}")]
    ClassCountMismatch { chain: usize, model: usize },
}

/// Output of the busy-period recursion.
///
/// `g[i]` is the expected time a class `i+1` arrival that finds all servers
/// busy must wait, in the approximating model, for the work ahead of it to
/// clear; `d[i]` is the expected length of the window during which an
/// accepted job of that class remains exposed to displacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusyPeriodChain<T> {
    pub protocol: Protocol,
    pub g: Vec<T>,
    pub d: Vec<T>,
}

impl<T: Real> BusyPeriodChain<T> {
    /// Largest residual of the flow identity tying `g` to the rate-weighted
    /// partial sums of `d`. Both recursions satisfy it exactly in real
    /// arithmetic; in floating point it should sit at rounding level.
    pub fn consistency_residual(&self, model: &SystemModel<T>) -> T {
        let rates = model.rates();
        let aggregate = model.cumulative_rates();
        let mut weighted = T::zero();
        let mut worst = T::zero();
        for i in 0..self.g.len() {
            weighted = weighted + rates[i] * self.d[i];
            let residual = (aggregate[i] * self.g[i] - weighted).abs();
            worst = worst.max(residual);
        }
        worst
    }
}

/// Erlang-B blocking probability for `servers` lines under offered load `a`,
/// by the standard stable recurrence.
pub fn erlang_b<T: Real>(servers: u32, a: T) -> Result<T, AnalyticError> {
    if !(a.is_finite() && a >= T::zero()) {
        return Err(AnalyticError::InvalidOfferedLoad(a.to_string()));
    }
    let mut b = T::one();
    for k in 1..=servers {
        let k = T::from_u32(k).expect("server count fits in scalar");
        b = a * b / (k + a * b);
    }
    Ok(b)
}

fn lst_at<T: Real>(model: &SystemModel<T>, class: usize, s: T) -> Result<T, AnalyticError> {
    model.classes[class]
        .service
        .lst(s)
        .map_err(|source| AnalyticError::Distribution {
            class: class + 1,
            source,
        })
}

/// Busy-period recursion for the protocol where an arrival may displace jobs
/// of its own class: the transform of class `i` is taken at the aggregate
/// rate of classes `1..=i` over the servers.
pub fn busy_period_chain_fcfd<T: Real>(
    model: &SystemModel<T>,
) -> Result<BusyPeriodChain<T>, AnalyticError> {
    let servers = T::from_u32(model.servers).expect("server count fits in scalar");
    let rates = model.rates();
    let aggregate = model.cumulative_rates();
    let n = model.class_count();
    let mut g = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let mut weighted_d = T::zero();
    for i in 0..n {
        let rate = rates[i];
        let agg = aggregate[i];
        let tail = T::one() - lst_at(model, i, agg / servers)?;
        let denom = T::one() - rate / agg * tail;
        if !(denom.is_finite() && denom > T::zero()) {
            return Err(AnalyticError::DegenerateBusyPeriod { class: i + 1 });
        }
        let gi = (weighted_d / agg + rate * tail / (agg * agg)) / denom;
        let di = tail * (T::one() / agg + gi);
        if !(gi.is_finite() && di.is_finite()) {
            return Err(AnalyticError::NonFinite {
                class: i + 1,
                quantity: "busy-period value",
            });
        }
        weighted_d = weighted_d + rate * di;
        g.push(gi);
        d.push(di);
    }
    Ok(BusyPeriodChain {
        protocol: Protocol::Fcfd,
        g,
        d,
    })
}

/// Busy-period recursion for the protocol where only strictly lower classes
/// are displaced: class `j >= 2` sees the aggregate rate of classes
/// `1..=j-1`, and the top class is never displaced once accepted.
pub fn busy_period_chain_lcfd<T: Real>(
    model: &SystemModel<T>,
) -> Result<BusyPeriodChain<T>, AnalyticError> {
    let servers = T::from_u32(model.servers).expect("server count fits in scalar");
    let rates = model.rates();
    let aggregate = model.cumulative_rates();
    let n = model.class_count();
    let mut g = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let mut weighted_d = T::zero();
    for i in 0..n {
        let di = if i == 0 {
            model.classes[0].service.mean() / servers
        } else {
            let above = aggregate[i - 1];
            let tail = T::one() - lst_at(model, i, above / servers)?;
            tail * (T::one() / above + g[i - 1])
        };
        weighted_d = weighted_d + rates[i] * di;
        let gi = weighted_d / aggregate[i];
        if !(gi.is_finite() && di.is_finite()) {
            return Err(AnalyticError::NonFinite {
                class: i + 1,
                quantity: "busy-period value",
            });
        }
        g.push(gi);
        d.push(di);
    }
    Ok(BusyPeriodChain {
        protocol: Protocol::Lcfd,
        g,
        d,
    })
}

/// Blocking ratio with the factorial divided through: terms `load^k / k!`
/// accumulated by incremental ratios. Stable while the largest term fits in
/// the scalar, which holds for small server counts.
fn blocking_ratio_linear<T: Real>(servers: u32, load: T, rate_times_g: T) -> T {
    let mut term = T::one();
    let mut sum = term;
    for k in 1..servers {
        term = term * load / T::from_u32(k).expect("server count fits in scalar");
        sum = sum + term;
    }
    // After the loop `term` is load^(servers-1) / (servers-1)!.
    let top = term * rate_times_g;
    top / (sum + top)
}

/// Same ratio in log space for large server counts, where the raw terms
/// overflow. The partial sum uses log-sum-exp around its running maximum.
fn blocking_ratio_log<T: Real>(servers: u32, load: T, rate_times_g: T) -> T {
    let ln_load = load.ln();
    let mut ln_term = T::zero();
    let mut ln_terms = Vec::with_capacity(servers as usize);
    ln_terms.push(ln_term);
    for k in 1..servers {
        let k = T::from_u32(k).expect("server count fits in scalar");
        ln_term = ln_term + ln_load - k.ln();
        ln_terms.push(ln_term);
    }
    let max = ln_terms.iter().cloned().fold(T::neg_infinity(), T::max);
    let rest: T = ln_terms.iter().map(|&x| (x - max).exp()).sum();
    let ln_sum = max + rest.ln();
    let ln_top = ln_terms[servers as usize - 1] + rate_times_g.ln();
    T::one() / (T::one() + (ln_sum - ln_top).exp())
}

/// Per-class blocking probabilities `c` from the busy-period chain.
pub fn blocking_probabilities<T: Real>(
    model: &SystemModel<T>,
    chain: &BusyPeriodChain<T>,
) -> Result<Vec<T>, AnalyticError> {
    if chain.g.len() != model.class_count() {
        return Err(AnalyticError::ClassCountMismatch {
            chain: chain.g.len(),
            model: model.class_count(),
        });
    }
    let aggregate = model.cumulative_rates();
    let loads = model.cumulative_loads();
    let mut blocking = Vec::with_capacity(chain.g.len());
    for i in 0..chain.g.len() {
        let rate_times_g = aggregate[i] * chain.g[i];
        let c = if model.servers <= LOG_SPACE_SERVER_THRESHOLD {
            blocking_ratio_linear(model.servers, loads[i], rate_times_g)
        } else {
            blocking_ratio_log(model.servers, loads[i], rate_times_g)
        };
        if !c.is_finite() {
            return Err(AnalyticError::NonFinite {
                class: i + 1,
                quantity: "blocking probability",
            });
        }
        blocking.push(c);
    }
    Ok(blocking)
}

/// Probability of being lost at the arrival instant: the top class is never
/// lost on arrival, and each other class is lost exactly when the system
/// looks blocked one precedence level up.
pub fn arrival_loss_probabilities<T: Real>(blocking: &[T]) -> Vec<T> {
    let mut q = Vec::with_capacity(blocking.len());
    let mut prev = T::zero();
    for &c in blocking {
        q.push(prev);
        prev = c;
    }
    q
}

/// Probability that an accepted job is displaced before finishing. The raw
/// value can fall below zero when the blocking vector is non-monotone; it is
/// returned untouched and flagged by [`analyze`] as a warning.
pub fn preemption_probabilities<T: Real>(
    model: &SystemModel<T>,
    blocking: &[T],
) -> Result<Vec<T>, AnalyticError> {
    if blocking.len() != model.class_count() {
        return Err(AnalyticError::ClassCountMismatch {
            chain: blocking.len(),
            model: model.class_count(),
        });
    }
    let rates = model.rates();
    let aggregate = model.cumulative_rates();
    let mut r = Vec::with_capacity(blocking.len());
    let mut prev = T::zero();
    for i in 0..blocking.len() {
        if blocking[i] == T::one() {
            return Err(AnalyticError::SaturatedBlocking { class: i + 1 });
        }
        let value = aggregate[i] * (blocking[i] - prev) / (rates[i] * (T::one() - blocking[i]));
        if !value.is_finite() {
            return Err(AnalyticError::NonFinite {
                class: i + 1,
                quantity: "preemption probability",
            });
        }
        r.push(value);
        prev = blocking[i];
    }
    Ok(r)
}

/// Total per-class loss probability in the requested mode.
pub fn loss_probabilities<T: Real>(
    model: &SystemModel<T>,
    blocking: &[T],
    mode: GammaMode,
) -> Result<Vec<T>, AnalyticError> {
    if blocking.len() != model.class_count() {
        return Err(AnalyticError::ClassCountMismatch {
            chain: blocking.len(),
            model: model.class_count(),
        });
    }
    match mode {
        GammaMode::Strict => {
            let rates = model.rates();
            let aggregate = model.cumulative_rates();
            let mut gamma = Vec::with_capacity(blocking.len());
            let mut prev = T::zero();
            for i in 0..blocking.len() {
                gamma.push(prev + aggregate[i] / rates[i] * (blocking[i] - prev));
                prev = blocking[i];
            }
            Ok(gamma)
        }
        GammaMode::Composed => {
            let q = arrival_loss_probabilities(blocking);
            let r = preemption_probabilities(model, blocking)?;
            Ok(q.iter()
                .zip(&r)
                .map(|(&qi, &ri)| qi + (T::one() - qi) * ri)
                .collect())
        }
    }
}

/// Everything the analytic layer produces for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReport<T> {
    pub gamma_mode: GammaMode,
    /// Busy-period chain of the occupancy equivalent of the input model
    /// (identical to the input's own chain when no class has mass at zero).
    pub chain: BusyPeriodChain<T>,
    /// Per-class blocking probability `c`.
    pub blocking: Vec<T>,
    /// Per-class probability `q` of loss at the arrival instant.
    pub arrival_loss: Vec<T>,
    /// Per-class probability `r` of displacement after acceptance.
    pub preemption: Vec<T>,
    /// Per-class total loss probability `gamma` in the requested mode.
    pub loss: Vec<T>,
    /// Human-readable notes on out-of-range raw values; never fatal.
    pub warnings: Vec<String>,
}

fn collect_warnings<T: Real>(blocking: &[T], preemption: &[T], loss: &[T]) -> Vec<String> {
    let mut warnings = Vec::new();
    for i in 1..blocking.len() {
        if blocking[i] < blocking[i - 1] {
            warnings.push(format!(
                "class {}: blocking probability fell below class {}; the raw preemption estimate is negative",
                i + 1,
                i
            ));
        }
    }
    for (name, values) in [("preemption", preemption), ("loss", loss)] {
        for (i, &v) in values.iter().enumerate() {
            if v < T::zero() || v > T::one() {
                warnings.push(format!(
                    "class {}: {} probability {} lies outside [0, 1]",
                    i + 1,
                    name,
                    v
                ));
            }
        }
    }
    warnings
}

/// Runs the full analytic pipeline: validation, busy-period chain for the
/// model's protocol, blocking vector, and the three loss metrics.
///
/// All stationary quantities are computed on the occupancy equivalent of the
/// model (see [`SystemModel::occupancy_equivalent`]): a zero-length job never
/// holds a server, so it contributes nothing to busy periods or blocking and
/// never displaces anyone. Per-arrival metrics are still normalized by the
/// full class rates — an arrival's fate at the door is decided before its
/// length is known, so zero draws face the same arrival-loss probability,
/// while only the positive draws can generate displacements. For models
/// without mass at zero the equivalent is the model itself and the pipeline
/// reduces to the plain composition of the functions above.
pub fn analyze<T: Real>(
    model: &SystemModel<T>,
    mode: GammaMode,
) -> Result<AnalyticReport<T>, AnalyticError> {
    model.validate().map_err(AnalyticError::InvalidModel)?;
    let (occupancy, retained) = model.occupancy_equivalent();
    let chain = match occupancy.protocol {
        Protocol::Fcfd => busy_period_chain_fcfd(&occupancy)?,
        Protocol::Lcfd => busy_period_chain_lcfd(&occupancy)?,
    };
    let blocking = blocking_probabilities(&occupancy, &chain)?;
    let arrival_loss = arrival_loss_probabilities(&blocking);
    // Displacement odds per occupying arrival, rescaled to the full stream:
    // a class-i arrival is a positive draw with probability retained_i.
    let preemption: Vec<T> = preemption_probabilities(&occupancy, &blocking)?
        .into_iter()
        .zip(&retained)
        .map(|(r, &kept)| r * kept)
        .collect();
    let loss = match mode {
        GammaMode::Strict => {
            // Same shape as the strict arm of `loss_probabilities`, but the
            // aggregate rate in the numerator counts only displacing
            // (positive-length) arrivals while the per-class denominator
            // keeps the full stream.
            let rates = model.rates();
            let aggregate = occupancy.cumulative_rates();
            let mut gamma = Vec::with_capacity(blocking.len());
            let mut prev = T::zero();
            for i in 0..blocking.len() {
                gamma.push(prev + aggregate[i] / rates[i] * (blocking[i] - prev));
                prev = blocking[i];
            }
            gamma
        }
        GammaMode::Composed => arrival_loss
            .iter()
            .zip(&preemption)
            .map(|(&qi, &ri)| qi + (T::one() - qi) * ri)
            .collect(),
    };
    let warnings = collect_warnings(&blocking, &preemption, &loss);
    Ok(AnalyticReport {
        gamma_mode: mode,
        chain,
        blocking,
        arrival_loss,
        preemption,
        loss,
        warnings,
    })
}
