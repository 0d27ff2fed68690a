//! Simulation and inference for two-arm, binary-reward adaptive experiments.
//!
//! Trials are generated under Uniform Random, Thompson Sampling and
//! Epsilon-Greedy allocation ([`policy`], [`engine`]), analysed with MLE and
//! inverse-probability-weighted estimators and five tests ([`inference`]),
//! and aggregated into false-positive-rate, power, bias and allocation
//! summaries ([`metrics`], [`sweep`]).

pub mod domain;
pub mod engine;
pub mod error;
pub mod inference;
pub mod io;
pub mod metrics;
pub mod policy;
pub mod rng;
pub mod sweep;

pub use domain::{Arm, EnvSpec, StepRecord, TrialLog};
pub use engine::{run_trial, run_trial_with, summarize, ArmCounts};
pub use error::{Error, Result};
pub use policy::{PolicyKind, PolicySpec};
pub use rng::{derive_stream, RngStream};
