//! System description: servers, priority classes, displacement protocol.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distributions::ServiceDistribution;
use crate::Real;

/// Which job a blocked arrival displaces, if any.
///
/// Under [`Fcfd`](Protocol::Fcfd) an arrival that finds every server busy may
/// displace a job of its own or a lower-precedence class; among the jobs of
/// the least-precedence class present, the one that arrived earliest is lost.
/// Under [`Lcfd`](Protocol::Lcfd) only strictly lower-precedence jobs are
/// eligible and the latest-arrived of them is lost. Lower index means higher
/// precedence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Fcfd,
    Lcfd,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Fcfd => "fcfd",
            Protocol::Lcfd => "lcfd",
        })
    }
}

/// One priority class: 1-based index (1 = highest precedence), Poisson
/// arrival rate, and service-time distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityClass<T> {
    pub index: usize,
    pub rate: T,
    pub service: ServiceDistribution<T>,
}

/// A broken model invariant, phrased for the operator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation(pub String);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The loss system: `servers` identical servers, no waiting room, classes in
/// precedence order, and a displacement protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemModel<T> {
    pub servers: u32,
    pub classes: Vec<PriorityClass<T>>,
    pub protocol: Protocol,
}

impl<T: Real> SystemModel<T> {
    /// Builds and validates a model; all violations are reported at once.
    pub fn new(
        servers: u32,
        classes: Vec<PriorityClass<T>>,
        protocol: Protocol,
    ) -> Result<Self, Vec<Violation>> {
        let model = Self {
            servers,
            classes,
            protocol,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks every structural invariant, collecting all failures.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut violations = Vec::new();
        if self.servers < 1 {
            violations.push(Violation("servers must be >= 1".into()));
        }
        if self.classes.is_empty() {
            violations.push(Violation("at least one priority class is required".into()));
        }
        for (pos, class) in self.classes.iter().enumerate() {
            if class.index != pos + 1 {
                violations.push(Violation(format!(
                    "class indices must be contiguous from 1: position {} has index {}",
                    pos + 1,
                    class.index
                )));
            }
            if !(class.rate.is_finite() && class.rate > T::zero()) {
                violations.push(Violation(format!(
                    "class {}: rate must be positive, got {}",
                    pos + 1,
                    class.rate
                )));
            }
            let mean = class.service.mean();
            if let Err(e) = class.service.validate() {
                violations.push(Violation(format!("class {}: {}", pos + 1, e)));
            } else if !(mean.is_finite() && mean > T::zero()) {
                violations.push(Violation(format!(
                    "class {}: mean service time must be positive",
                    pos + 1
                )));
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Arrival rates in precedence order.
    pub fn rates(&self) -> Vec<T> {
        self.classes.iter().map(|c| c.rate).collect()
    }

    /// Mean service times in precedence order.
    pub fn mean_services(&self) -> Vec<T> {
        self.classes.iter().map(|c| c.service.mean()).collect()
    }

    /// Aggregate arrival rate of classes 1..=i, for each i.
    pub fn cumulative_rates(&self) -> Vec<T> {
        self.classes
            .iter()
            .scan(T::zero(), |acc, c| {
                *acc = *acc + c.rate;
                Some(*acc)
            })
            .collect()
    }

    /// Aggregate offered work of classes 1..=i (sum of rate times mean
    /// service), for each i.
    pub fn cumulative_loads(&self) -> Vec<T> {
        self.classes
            .iter()
            .scan(T::zero(), |acc, c| {
                *acc = *acc + c.rate * c.service.mean();
                Some(*acc)
            })
            .collect()
    }

    /// The model that drives server occupancy, plus the per-class fraction of
    /// arrivals it retains.
    ///
    /// A job of zero length completes at its arrival instant without seizing
    /// a server, so the occupancy process only sees each class's positive
    /// draws: rate `λ_i · (1 − P(X_i = 0))` with the service law conditioned
    /// on being positive. Offered loads are unchanged by the exchange, and for
    /// classes without mass at zero it is the identity. Class validation
    /// guarantees the atom is below one, so every retained rate stays
    /// positive.
    pub fn occupancy_equivalent(&self) -> (Self, Vec<T>) {
        let mut retained = Vec::with_capacity(self.classes.len());
        let classes = self
            .classes
            .iter()
            .map(|c| {
                let kept = T::one() - c.service.mass_at_zero();
                retained.push(kept);
                PriorityClass {
                    index: c.index,
                    rate: c.rate * kept,
                    service: c.service.positive_part(),
                }
            })
            .collect();
        (
            Self {
                servers: self.servers,
                classes,
                protocol: self.protocol,
            },
            retained,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class(index: usize, rate: f64, mu: f64) -> PriorityClass<f64> {
        PriorityClass {
            index,
            rate,
            service: ServiceDistribution::exponential(mu).unwrap(),
        }
    }

    #[test]
    fn valid_model_passes() {
        let m = SystemModel::new(
            2,
            vec![class(1, 1.0, 10.0), class(2, 1.0, 5.0), class(3, 1.0, 2.0)],
            Protocol::Fcfd,
        )
        .unwrap();
        assert_eq!(m.class_count(), 3);
    }

    #[test]
    fn cumulative_rates_and_loads() {
        let m = SystemModel::new(
            2,
            vec![class(1, 1.0, 10.0), class(2, 1.0, 5.0), class(3, 1.0, 2.0)],
            Protocol::Fcfd,
        )
        .unwrap();
        let cum = m.cumulative_rates();
        assert_eq!(cum, vec![1.0, 2.0, 3.0]);
        let loads = m.cumulative_loads();
        for (got, want) in loads.iter().zip([0.1, 0.3, 0.8]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn occupancy_equivalent_is_identity_without_zero_mass() {
        let m = SystemModel::new(
            2,
            vec![class(1, 1.0, 10.0), class(2, 1.0, 5.0), class(3, 1.0, 2.0)],
            Protocol::Fcfd,
        )
        .unwrap();
        let (occ, retained) = m.occupancy_equivalent();
        assert_eq!(occ, m);
        assert_eq!(retained, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn occupancy_equivalent_thins_zero_mass_and_keeps_loads() {
        let m = SystemModel::new(
            2,
            vec![
                PriorityClass {
                    index: 1,
                    rate: 1.0,
                    service: ServiceDistribution::zero_exponential(0.3, 2.0).unwrap(),
                },
                class(2, 1.5, 5.0),
            ],
            Protocol::Lcfd,
        )
        .unwrap();
        let (occ, retained) = m.occupancy_equivalent();
        assert!(occ.validate().is_ok());
        assert_eq!(retained, vec![0.7, 1.0]);
        assert_eq!(occ.classes[0].rate, 0.7);
        assert_eq!(
            occ.classes[0].service,
            ServiceDistribution::exponential(2.0).unwrap()
        );
        assert_eq!(occ.classes[1], m.classes[1]);
        for (got, want) in occ.cumulative_loads().iter().zip(m.cumulative_loads()) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_servers_rejected() {
        let err = SystemModel::new(0, vec![class(1, 1.0, 1.0)], Protocol::Fcfd).unwrap_err();
        assert!(err.iter().any(|v| v.0.contains("servers must be >= 1")));
    }

    #[test]
    fn empty_classes_rejected() {
        let err = SystemModel::<f64>::new(1, vec![], Protocol::Fcfd).unwrap_err();
        assert!(err
            .iter()
            .any(|v| v.0.contains("at least one priority class")));
    }

    #[test]
    fn noncontiguous_indices_rejected() {
        let err = SystemModel::new(
            1,
            vec![class(1, 1.0, 1.0), class(3, 1.0, 1.0)],
            Protocol::Fcfd,
        )
        .unwrap_err();
        assert!(err.iter().any(|v| v.0.contains("contiguous")));
    }

    #[test]
    fn nonpositive_rate_rejected() {
        let err = SystemModel::new(1, vec![class(1, 0.0, 1.0)], Protocol::Fcfd).unwrap_err();
        assert!(err.iter().any(|v| v.0.contains("rate must be positive")));
    }

    #[test]
    fn zero_mean_service_rejected() {
        let m = SystemModel {
            servers: 1,
            classes: vec![PriorityClass {
                index: 1,
                rate: 1.0,
                service: ServiceDistribution::Deterministic { value: 0.0 },
            }],
            protocol: Protocol::Fcfd,
        };
        let err = m.validate().unwrap_err();
        assert!(err.iter().any(|v| v.0.contains("mean service time")));
    }

    #[test]
    fn all_violations_reported_together() {
        let m = SystemModel {
            servers: 0,
            classes: vec![PriorityClass {
                index: 2,
                rate: -1.0,
                service: ServiceDistribution::Exponential { rate: 0.0 },
            }],
            protocol: Protocol::Lcfd,
        };
        let err = m.validate().unwrap_err();
        assert!(err.len() >= 3, "{err:?}");
    }

    #[test]
    fn protocol_serde_names() {
        assert_eq!(serde_json::to_string(&Protocol::Fcfd).unwrap(), r#""fcfd""#);
        assert_eq!(serde_json::to_string(&Protocol::Lcfd).unwrap(), r#""lcfd""#);
    }
}
