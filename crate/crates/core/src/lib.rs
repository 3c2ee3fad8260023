//! Loss probabilities for multi-server preemptive-priority loss systems.
//!
//! The system has `m` identical servers and no waiting room. Each of `N`
//! priority classes feeds the system with its own Poisson stream and its own
//! service-time distribution. An arrival that finds a free server starts
//! service immediately. An arrival that finds all servers busy may displace a
//! job of lower precedence, which is then lost; otherwise the arrival itself
//! is lost. Two displacement protocols are supported, differing in whether a
//! blocked arrival may displace jobs of its own class and in which of the
//! eligible jobs is chosen as the victim.
//!
//! The [`analytic`] module computes fast approximations for the per-class
//! loss probabilities from busy-period transforms; the [`sim`] module runs a
//! discrete-event simulation of the exact system so the approximations can be
//! validated against unbiased estimates.
//!
//! Analytic computations are generic over the floating-point scalar through
//! the [`Real`] trait, so they run in `f32` or `f64`. The simulator is
//! `f64`-only. [`Model`] is the concrete `f64` alias most callers want.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub mod analytic;
pub mod distributions;
pub mod model;
pub mod sim;

/// Floating-point scalar the analytic layer is generic over.
///
/// Blanket-implemented for anything float-like that can be built from
/// primitive constants; in practice `f32` and `f64`.
pub trait Real: Float + FromPrimitive + ToPrimitive + Sum + Display + Debug {}

impl<T> Real for T where T: Float + FromPrimitive + ToPrimitive + Sum + Display + Debug {}

pub use analytic::{
    analyze, arrival_loss_probabilities, blocking_probabilities, busy_period_chain_fcfd,
    busy_period_chain_lcfd, erlang_b, loss_probabilities, preemption_probabilities, AnalyticError,
    AnalyticReport, BusyPeriodChain, GammaMode,
};
pub use distributions::{Branch, DistributionError, ServiceDistribution};
pub use model::{PriorityClass, Protocol, SystemModel, Violation};
pub use sim::{
    aggregate, compare, run, run_replication, select_victim, stream_seed, write_replications_csv,
    ClassComparison, ClassEstimates, ClassStats, ComparisonReport, Estimate, Job, MetricComparison,
    ReplicationRecord, SimConfig, SimError, SimulationReport,
};

/// The system description at the default `f64` precision.
pub type Model = SystemModel<f64>;
