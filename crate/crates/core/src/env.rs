//! Synthetic multi-task trainer.
//!
//! Stands in for a real trainer behind the [`TaskTrainer`] contract: draw a
//! batch for a task, evaluate a loss on a batch, take a gradient step on a
//! batch. Each task carries a scalar skill level; a gradient step on task
//! `j` raises the skill of every task `i` by `step_gain * transfer[i][j]`,
//! and the expected loss of task `i` decays exponentially from a ceiling to
//! a floor as its skill grows:
//!
//! `loss_i = max(LOSS_FLOOR, floor_i + (ceiling_i - floor_i) * exp(-skill_i) + noise)`
//!
//! Batch noise is additive Gaussian drawn once per batch, so evaluating the
//! same batch before and after a step shares the noise term, exactly as a
//! held-out batch would.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::ArmId;
use crate::rng::RngStream;

/// Losses never drop below this, keeping relative loss reductions defined
/// under arbitrary noise.
pub const LOSS_FLOOR: f64 = 1e-6;

/// Contract between the curriculum loop and whatever does the training.
/// A real trainer can implement this in place of [`EnvState`].
pub trait TaskTrainer {
    type Batch;

    fn n_tasks(&self) -> usize;

    /// Sample a fresh batch for `task`, advancing the trainer's own random
    /// stream. Panics if `task` is out of range.
    fn draw_batch(&mut self, task: ArmId) -> Self::Batch;

    /// Evaluate the loss of `batch` against the current parameters. Pure in
    /// the trainer state; strictly positive.
    fn loss(&self, batch: &Self::Batch) -> f64;

    /// Update parameters with one optimizer step on `batch`.
    fn gradient_step(&mut self, batch: &Self::Batch);
}

/// Piecewise-constant change to the transfer matrix: `transfer` becomes
/// active once the step counter reaches `at_step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferPhase {
    pub at_step: u64,
    pub transfer: Vec<Vec<f64>>,
}

/// Parameters of the simulated trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub n_tasks: usize,
    /// `transfer[i][j]`: skill gained on task `i` per gradient step on task
    /// `j` (dimensionless, scaled by `step_gain`).
    pub transfer: Vec<Vec<f64>>,
    /// Expected loss of each task before any training.
    pub ceilings: Vec<f64>,
    /// Asymptotic loss of each task.
    pub floors: Vec<f64>,
    /// Skill gained per gradient step, multiplying the transfer entries.
    pub step_gain: f64,
    /// Per-task batch-noise standard deviation.
    pub noise_sd: Vec<f64>,
    /// Optional time variation of the transfer matrix.
    #[serde(default)]
    pub schedule: Vec<TransferPhase>,
}

fn check_matrix(name: &str, m: &[Vec<f64>], n: usize) -> Result<()> {
    if m.len() != n {
        return Err(Error::InvalidConfig(format!(
            "{name} must have {n} rows, got {}",
            m.len()
        )));
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidConfig(format!(
                "{name} row {i} must have {n} entries, got {}",
                row.len()
            )));
        }
        if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "{name} row {i} contains non-finite entry {bad}"
            )));
        }
    }
    Ok(())
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_tasks < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_tasks must be >= 2, got {}",
                self.n_tasks
            )));
        }
        let n = self.n_tasks;
        check_matrix("transfer", &self.transfer, n)?;
        for (name, v) in [("ceilings", &self.ceilings), ("floors", &self.floors), ("noise_sd", &self.noise_sd)] {
            if v.len() != n {
                return Err(Error::InvalidConfig(format!(
                    "{name} must have {n} entries, got {}",
                    v.len()
                )));
            }
        }
        for i in 0..n {
            let (c, f) = (self.ceilings[i], self.floors[i]);
            if !(c.is_finite() && f.is_finite() && c > f && f > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "task {i}: need ceiling > floor > 0, got ceiling={c} floor={f}"
                )));
            }
            let sd = self.noise_sd[i];
            if !(sd.is_finite() && sd >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "task {i}: noise_sd must be >= 0, got {sd}"
                )));
            }
        }
        if !(self.step_gain.is_finite() && self.step_gain >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "step_gain must be finite and >= 0, got {}",
                self.step_gain
            )));
        }
        let mut last = None;
        for phase in &self.schedule {
            check_matrix("schedule transfer", &phase.transfer, n)?;
            if let Some(prev) = last
                && phase.at_step <= prev
            {
                return Err(Error::InvalidConfig(
                    "schedule phases must have strictly increasing at_step".into(),
                ));
            }
            last = Some(phase.at_step);
        }
        Ok(())
    }
}

/// The transfer matrix in effect at a given step count.
fn active_transfer(config: &EnvConfig, step_count: u64) -> &[Vec<f64>] {
    let mut active = &config.transfer;
    for phase in &config.schedule {
        if phase.at_step <= step_count {
            active = &phase.transfer;
        } else {
            break;
        }
    }
    active
}

/// One batch: the task it belongs to plus its noise realization, fixed at
/// creation so pre- and post-step loss evaluations share it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Batch {
    pub task: ArmId,
    pub noise: f64,
}

/// Simulated trainer state.
#[derive(Debug, Clone)]
pub struct EnvState {
    config: EnvConfig,
    skills: Vec<f64>,
    step_count: u64,
    rng: RngStream,
}

impl EnvState {
    pub fn new(config: EnvConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let n = config.n_tasks;
        Ok(Self {
            config,
            skills: vec![0.0; n],
            step_count: 0,
            rng: RngStream::seed_from_u64(seed),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn skills(&self) -> &[f64] {
        &self.skills
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Uniform draws consumed from the environment stream so far.
    pub fn draw_count(&self) -> u64 {
        self.rng.draw_count()
    }

    /// Noiseless loss of `task` at the current skills.
    pub fn expected_loss(&self, task: ArmId) -> f64 {
        let i = task.index();
        expected_loss_at(&self.config, i, self.skills[i])
    }

    /// Analytic relative loss reduction on `reward_task` for one noiseless
    /// gradient step on `step_task`, from the current state. Test oracle for
    /// the measured reward path.
    pub fn expected_pgnorm(&self, step_task: ArmId, reward_task: ArmId) -> f64 {
        let rho = reward_task.index();
        let transfer = active_transfer(&self.config, self.step_count);
        let delta = self.config.step_gain * transfer[rho][step_task.index()];
        let before = expected_loss_at(&self.config, rho, self.skills[rho]);
        let after = expected_loss_at(&self.config, rho, (self.skills[rho] + delta).max(0.0));
        1.0 - after / before
    }
}

fn raw_loss_at(config: &EnvConfig, task: usize, skill: f64) -> f64 {
    let c = config.ceilings[task];
    let f = config.floors[task];
    f + (c - f) * (-skill).exp()
}

fn expected_loss_at(config: &EnvConfig, task: usize, skill: f64) -> f64 {
    raw_loss_at(config, task, skill).max(LOSS_FLOOR)
}

impl TaskTrainer for EnvState {
    type Batch = Batch;

    fn n_tasks(&self) -> usize {
        self.config.n_tasks
    }

    /// Always consumes exactly two uniform draws (one Gaussian variate).
    fn draw_batch(&mut self, task: ArmId) -> Batch {
        assert!(
            task.index() < self.config.n_tasks,
            "task {task} out of range for {} tasks",
            self.config.n_tasks
        );
        let noise = self.config.noise_sd[task.index()] * self.rng.gaussian();
        Batch { task, noise }
    }

    fn loss(&self, batch: &Batch) -> f64 {
        let i = batch.task.index();
        (raw_loss_at(&self.config, i, self.skills[i]) + batch.noise).max(LOSS_FLOOR)
    }

    fn gradient_step(&mut self, batch: &Batch) {
        let transfer = active_transfer(&self.config, self.step_count);
        let j = batch.task.index();
        for (skill, row) in self.skills.iter_mut().zip(transfer) {
            *skill = (*skill + self.config.step_gain * row[j]).max(0.0);
        }
        self.step_count += 1;
    }
}

// ---------------------------------------------------------------------------
// Stationary reward processes
// ---------------------------------------------------------------------------

/// Per-arm reward distribution for skill-free bandit scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArmReward {
    Constant { value: f64 },
    Bernoulli { p: f64 },
    Gaussian { mean: f64, sd: f64 },
}

impl ArmReward {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ArmReward::Constant { value } if value.is_finite() => Ok(()),
            ArmReward::Bernoulli { p } if (0.0..=1.0).contains(&p) => Ok(()),
            ArmReward::Gaussian { mean, sd } if mean.is_finite() && sd.is_finite() && sd >= 0.0 => {
                Ok(())
            }
            _ => Err(Error::InvalidConfig(format!("invalid arm reward {self:?}"))),
        }
    }

    /// Draw budget: constant 0, bernoulli 1, gaussian 2 uniform draws.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            ArmReward::Constant { value } => value,
            ArmReward::Bernoulli { p } => {
                if rng.uniform() < p {
                    1.0
                } else {
                    0.0
                }
            }
            ArmReward::Gaussian { mean, sd } => mean + sd * rng.gaussian(),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ArmReward::Constant { value } => value,
            ArmReward::Bernoulli { p } => p,
            ArmReward::Gaussian { mean, .. } => mean,
        }
    }
}

/// Skill-free scenario: each arm pays out from a fixed distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryConfig {
    pub arms: Vec<ArmReward>,
}

impl StationaryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.arms.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "stationary scenario needs at least 2 arms, got {}",
                self.arms.len()
            )));
        }
        for arm in &self.arms {
            arm.validate()?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Scenarios and presets
// ---------------------------------------------------------------------------

/// What the curriculum loop runs against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Scenario {
    Env(EnvConfig),
    Stationary(StationaryConfig),
}

impl Scenario {
    pub fn n_arms(&self) -> usize {
        match self {
            Scenario::Env(cfg) => cfg.n_tasks,
            Scenario::Stationary(cfg) => cfg.arms.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Scenario::Env(cfg) => cfg.validate(),
            Scenario::Stationary(cfg) => cfg.validate(),
        }
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["two_task_paper_like", "scheduled_transfer", "stationary_bandit"]
    }

    /// Resolve a shipped scenario by name.
    pub fn preset(name: &str) -> Result<Scenario> {
        match name {
            "two_task_paper_like" => Ok(Scenario::Env(two_task_paper_like())),
            "scheduled_transfer" => Ok(Scenario::Env(scheduled_transfer())),
            "stationary_bandit" => Ok(Scenario::Stationary(stationary_bandit())),
            other => Err(Error::InvalidConfig(format!(
                "unknown scenario preset '{other}'; shipped presets: {}",
                Self::preset_names().join(", ")
            ))),
        }
    }
}

/// Two tasks, MT (arm 0) and LM (arm 1). The LM arm yields slightly greater
/// reward than the MT arm at every reachable skill level (its edge comes
/// from strong LM self-learning plus LM-to-MT transfer, so it never
/// exhausts first), MT steps still grow MT skill faster than LM steps do,
/// and MT steps carry substantial positive transfer to LM. Loss scales
/// differ between the tasks, which is what makes the relative (rather than
/// absolute) loss reduction the right reward.
pub fn two_task_paper_like() -> EnvConfig {
    EnvConfig {
        n_tasks: 2,
        transfer: vec![
            vec![0.60, 0.50], // MT skill: self-learning wins, big gain from LM steps too
            vec![0.35, 0.80], // LM skill: substantial transfer from MT, strong self-learning
        ],
        ceilings: vec![2.8, 3.6],
        floors: vec![0.9, 1.3],
        step_gain: 5e-5,
        noise_sd: vec![0.02, 0.02],
        schedule: vec![],
    }
}

/// Like the two-task scenario but noiseless and with the MT self-transfer
/// jumping from weak to strong at step 5000, so the MT-to-MT reward series
/// rises mid-run.
pub fn scheduled_transfer() -> EnvConfig {
    EnvConfig {
        n_tasks: 2,
        transfer: vec![vec![0.05, 0.50], vec![0.35, 0.80]],
        ceilings: vec![2.8, 3.6],
        floors: vec![0.9, 1.3],
        step_gain: 5e-5,
        noise_sd: vec![0.0, 0.0],
        schedule: vec![TransferPhase {
            at_step: 5000,
            transfer: vec![vec![0.80, 0.50], vec![0.35, 0.80]],
        }],
    }
}

/// Skill-free two-arm payouts with means 0.6 and 0.3, for bandit-level
/// checks against closed-form fixed points.
pub fn stationary_bandit() -> StationaryConfig {
    StationaryConfig {
        arms: vec![
            ArmReward::Gaussian { mean: 0.6, sd: 0.05 },
            ArmReward::Gaussian { mean: 0.3, sd: 0.05 },
        ],
    }
}
