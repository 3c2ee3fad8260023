//! Service-time distributions: means, Laplace-Stieltjes transforms, sampling.
//!
//! The analytic layer only ever touches a distribution through [`mean`] and
//! [`lst`]; the simulator only through [`sample`]. Keeping all three on one
//! enum guarantees the two layers describe the same workload.
//!
//! [`mean`]: ServiceDistribution::mean
//! [`lst`]: ServiceDistribution::lst
//! [`sample`]: ServiceDistribution::sample

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Real;

/// Why a distribution parameter set or transform argument was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DistributionError {
    #[error("rate must be positive and finite, got {0}")]
    InvalidRate(String),
    #[error("deterministic value must be nonnegative and finite, got {0}")]
    InvalidValue(String),
    #[error("erlang shape must be at least 1")]
    InvalidShape,
    #[error("hyperexponential needs at least one branch")]
    NoBranches,
    #[error("branch weight must be positive and finite, got {0}")]
    InvalidWeight(String),
    #[error("atom weight must lie in [0, 1), got {0}")]
    InvalidAtom(String),
    #[error("transform argument must be nonnegative and finite, got {0}")]
    InvalidTransformArgument(String),
}

/// One branch of a hyperexponential mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch<T> {
    pub weight: T,
    pub rate: T,
}

/// A nonnegative service-time distribution.
///
/// Build values through the checked constructors; fields are also reachable
/// via serde, in which case [`validate`](Self::validate) reports any
/// out-of-domain parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServiceDistribution<T> {
    /// Exponential with the given rate; mean `1 / rate`.
    Exponential { rate: T },
    /// Unit mass at `value`.
    Deterministic { value: T },
    /// Sum of `shape` independent exponential stages, each with `stage_rate`.
    ErlangK { shape: u32, stage_rate: T },
    /// Mixture of exponentials. Weights are normalized on construction.
    Hyperexponential { branches: Vec<Branch<T>> },
    /// With probability `atom` the service is zero, otherwise exponential.
    ZeroExponential { atom: T, rate: T },
}

fn check_rate<T: Real>(rate: T) -> Result<T, DistributionError> {
    if rate.is_finite() && rate > T::zero() {
        Ok(rate)
    } else {
        Err(DistributionError::InvalidRate(rate.to_string()))
    }
}

impl<T: Real> ServiceDistribution<T> {
    pub fn exponential(rate: T) -> Result<Self, DistributionError> {
        Ok(Self::Exponential {
            rate: check_rate(rate)?,
        })
    }

    pub fn deterministic(value: T) -> Result<Self, DistributionError> {
        if value.is_finite() && value >= T::zero() {
            Ok(Self::Deterministic { value })
        } else {
            Err(DistributionError::InvalidValue(value.to_string()))
        }
    }

    pub fn erlang_k(shape: u32, stage_rate: T) -> Result<Self, DistributionError> {
        if shape == 0 {
            return Err(DistributionError::InvalidShape);
        }
        Ok(Self::ErlangK {
            shape,
            stage_rate: check_rate(stage_rate)?,
        })
    }

    /// Builds a mixture, rescaling the weights so they sum to one.
    pub fn hyperexponential(branches: Vec<Branch<T>>) -> Result<Self, DistributionError> {
        if branches.is_empty() {
            return Err(DistributionError::NoBranches);
        }
        for b in &branches {
            if !(b.weight.is_finite() && b.weight > T::zero()) {
                return Err(DistributionError::InvalidWeight(b.weight.to_string()));
            }
            check_rate(b.rate)?;
        }
        let total: T = branches.iter().map(|b| b.weight).sum();
        let branches = branches
            .into_iter()
            .map(|b| Branch {
                weight: b.weight / total,
                rate: b.rate,
            })
            .collect();
        Ok(Self::Hyperexponential { branches })
    }

    pub fn zero_exponential(atom: T, rate: T) -> Result<Self, DistributionError> {
        if !(atom.is_finite() && atom >= T::zero() && atom < T::one()) {
            return Err(DistributionError::InvalidAtom(atom.to_string()));
        }
        Ok(Self::ZeroExponential {
            atom,
            rate: check_rate(rate)?,
        })
    }

    /// Checks the parameter domains, for values that bypassed the constructors.
    pub fn validate(&self) -> Result<(), DistributionError> {
        match self {
            Self::Exponential { rate } => check_rate(*rate).map(|_| ()),
            Self::Deterministic { value } => Self::deterministic(*value).map(|_| ()),
            Self::ErlangK { shape, stage_rate } => Self::erlang_k(*shape, *stage_rate).map(|_| ()),
            Self::Hyperexponential { branches } => {
                Self::hyperexponential(branches.clone()).map(|_| ())
            }
            Self::ZeroExponential { atom, rate } => {
                Self::zero_exponential(*atom, *rate).map(|_| ())
            }
        }
    }

    /// Expected service time.
    pub fn mean(&self) -> T {
        match self {
            Self::Exponential { rate } => T::one() / *rate,
            Self::Deterministic { value } => *value,
            Self::ErlangK { shape, stage_rate } => {
                T::from_u32(*shape).expect("shape fits in scalar") / *stage_rate
            }
            Self::Hyperexponential { branches } => branches.iter().map(|b| b.weight / b.rate).sum(),
            Self::ZeroExponential { atom, rate } => (T::one() - *atom) / *rate,
        }
    }

    /// Probability mass sitting exactly at zero service time.
    ///
    /// Only the zero-exponential family carries such an atom; the other
    /// families are either continuous or pinned to a strictly positive value
    /// (a deterministic zero is rejected at model validation).
    pub fn mass_at_zero(&self) -> T {
        match self {
            Self::ZeroExponential { atom, .. } => *atom,
            _ => T::zero(),
        }
    }

    /// The law conditioned on the draw being positive.
    ///
    /// For the zero-exponential family this strips the atom and leaves the
    /// exponential branch; every other family is returned unchanged.
    pub fn positive_part(&self) -> Self {
        match self {
            Self::ZeroExponential { rate, .. } => Self::Exponential { rate: *rate },
            other => other.clone(),
        }
    }

    /// Laplace-Stieltjes transform `E[exp(-s X)]`, defined for `s >= 0`.
    pub fn lst(&self, s: T) -> Result<T, DistributionError> {
        if !(s.is_finite() && s >= T::zero()) {
            return Err(DistributionError::InvalidTransformArgument(s.to_string()));
        }
        Ok(match self {
            Self::Exponential { rate } => *rate / (*rate + s),
            Self::Deterministic { value } => (-s * *value).exp(),
            Self::ErlangK { shape, stage_rate } => {
                (*stage_rate / (*stage_rate + s)).powi(*shape as i32)
            }
            Self::Hyperexponential { branches } => branches
                .iter()
                .map(|b| b.weight * b.rate / (b.rate + s))
                .sum(),
            Self::ZeroExponential { atom, rate } => {
                *atom + (T::one() - *atom) * *rate / (*rate + s)
            }
        })
    }

    /// Draws one service time.
    ///
    /// All randomness is consumed as `f64` uniforms and converted at the end,
    /// so a given rng state yields the same draw regardless of `T`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let value = match self {
            Self::Exponential { rate } => exp_draw(rng, to_f64(*rate)),
            Self::Deterministic { value } => to_f64(*value),
            Self::ErlangK { shape, stage_rate } => {
                let rate = to_f64(*stage_rate);
                (0..*shape).map(|_| exp_draw(rng, rate)).sum()
            }
            Self::Hyperexponential { branches } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = to_f64(branches[branches.len() - 1].rate);
                for b in branches {
                    acc += to_f64(b.weight);
                    if u < acc {
                        chosen = to_f64(b.rate);
                        break;
                    }
                }
                exp_draw(rng, chosen)
            }
            Self::ZeroExponential { atom, rate } => {
                let u: f64 = rng.random();
                if u < to_f64(*atom) {
                    0.0
                } else {
                    exp_draw(rng, to_f64(*rate))
                }
            }
        };
        T::from_f64(value).expect("sample fits in scalar")
    }
}

fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().expect("scalar converts to f64")
}

/// Inverse-transform exponential draw; `1 - u` keeps the log argument in (0, 1].
fn exp_draw<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}
