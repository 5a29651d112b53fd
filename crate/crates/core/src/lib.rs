//! Automated curriculum learning over competing training tasks.
//!
//! A library and simulator for learning the task-mixing schedule of a
//! multi-task trainer with multi-armed bandits. The moving pieces:
//!
//! - [`bandit`]: the four data-selection policies (moving-average
//!   proportional sampling, exponential weights, static mixes, a two-phase
//!   warmup heuristic) behind one [`Scheduler`] contract;
//! - [`reward`]: the relative-loss-reduction reward and its streaming
//!   quantile normalizer;
//! - [`env`]: a synthetic multi-task trainer with a cross-task transfer
//!   matrix, plus skill-free stationary reward processes;
//! - [`curriculum`]: the per-step protocol tying those together and the
//!   trajectory/transfer bookkeeping;
//! - [`config`] / [`experiment`] / [`emit`]: experiment configs, parallel
//!   (scheduler, seed) sweeps, comparison reports and CSV/JSON/SVG output.
//!
//! Everything is deterministic given a seed: fixed draw budgets per step,
//! one ChaCha8 stream for the loop and one for the environment.

pub mod bandit;
pub mod config;
pub mod curriculum;
pub mod emit;
pub mod env;
pub mod error;
pub mod experiment;
pub mod policy;
pub mod reward;
pub mod rng;

pub use bandit::{Exp3, Fair, Scheduler, SchedulerConfig, StaticMix, Warmup};
pub use config::{EmitFlags, ExperimentConfig, ScenarioSpec, load_config};
pub use curriculum::{
    StepRecord, TrajectoryLog, TransferEstimator, TransferPoint, TransferSeries, curriculum_step,
    run, transfer_series,
};
pub use env::{
    ArmReward, Batch, EnvConfig, EnvState, Scenario, StationaryConfig, TaskTrainer, TransferPhase,
};
pub use error::{Error, Result};
pub use experiment::{ComparisonReport, SchedulerReport, recompute_from_disk, run_experiment};
pub use policy::{ArmId, PolicyVector, sample_arm};
pub use reward::{NormalizedReward, RawReward, RewardNormalizer, pgnorm, quantiles};
pub use rng::RngStream;
