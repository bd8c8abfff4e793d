//! Budgeted bandits where each epoch picks an arm and a waiting limit.
//!
//! An epoch on pair `(k, j)` draws a reward `V` and a delay `tau` from arm
//! `k`, pays `V` only if `tau <= j`, and consumes `min(tau, j)` rounds of the
//! budget. The goal is to maximise the reward-per-round ratio.

pub mod coverage;
pub mod env;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod policies;
pub mod rng;
pub mod simulator;

pub use env::{ArmPair, Atom, EnvSpec, EpochOutcome, JointArmDistribution, RatioTable};
pub use error::{Error, Result};
pub use estimators::{DeviationParams, PairStats};
pub use policies::{BaselineKind, Policy, PolicyDecision, PolicySpec, PolicyState};
pub use rng::SimRng;
pub use simulator::{
    audit_constant_policy, run_game, run_many, AggregateResult, AuditReport, GameConfig, RunResult,
    TrajectoryPoint,
};
