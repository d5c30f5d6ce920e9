//! Monte-Carlo simulator for real-time sampling and remote estimation of
//! random walks over a slotted collision channel.
//!
//! M nodes each observe a Gaussian random walk and decide every slot whether
//! to send their freshest sample to a fusion center. Two or more
//! simultaneous transmissions collide; a lone transmission is delivered
//! unless erased. The crate provides the slot engine, the policies (age- and
//! error-threshold thinning over pseudo-Bayesian ALOHA, stationary
//! randomized access, centralized max-weight and greedy schedulers), the
//! metrics and their interval decomposition, an independent first-passage
//! oracle, and the sweep harness behind the `rae` binary.

pub mod calibrate;
pub mod channel;
pub mod config;
pub mod error;
pub mod estimator;
pub mod metrics;
pub mod oracle;
pub mod policy;
pub mod process;
pub mod sim;
pub mod sweep;

pub use config::{Axis, SimConfig, SweepSpec};
pub use error::{Result, SimError};
pub use metrics::{IntervalRecord, MetricsReport};
pub use policy::{Policy, PolicyConfig};
pub use sim::{run_single, EngineParams, RunOutput};
