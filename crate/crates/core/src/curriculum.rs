//! One curriculum iteration and the trajectory machinery around it.
//!
//! Per step, in order: snapshot the scheduler policy, sample the training
//! task, draw its batch, sample the reward task uniformly, draw the reward
//! batch, measure its loss, take the gradient step, measure the loss again,
//! turn the relative reduction into a normalized reward and feed it back to
//! the scheduler.
//!
//! # Random draw budget
//!
//! Two independent streams keep trajectories reproducible and comparable
//! across schedulers:
//!
//! - loop stream: 1 draw to sample the training task + 1 draw to sample the
//!   reward task = 2 draws per step;
//! - environment stream: 2 draws per batch (one Gaussian variate) x 2
//!   batches = 4 draws per step.
//!
//! Stationary scenarios skip the batches: 1 loop draw per step (the reward
//! task is the trained arm itself) plus the sampled arm's payout draws
//! (0 for constant, 1 for Bernoulli, 2 for Gaussian arms).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::bandit::{Scheduler, SchedulerConfig};
use crate::env::{EnvState, Scenario, StationaryConfig, TaskTrainer};
use crate::error::{Error, Result};
use crate::policy::{ArmId, PolicyVector, sample_arm};
use crate::reward::{NormalizedReward, RewardNormalizer, pgnorm};
use crate::rng::RngStream;

/// Window length of the per-pair transfer running averages.
pub const TRANSFER_WINDOW: usize = 500;

/// Salt XORed into the run seed to derive the loop stream, so the loop and
/// the environment never share draws.
const LOOP_STREAM_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// Everything observable about one curriculum step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    /// Task trained on.
    pub tau: ArmId,
    /// Task the reward was measured on.
    pub rho: ArmId,
    /// Loss of the reward batch before the gradient step.
    pub loss_before: f64,
    /// Loss of the same batch after the gradient step.
    pub loss_after: f64,
    /// Relative loss reduction `1 - loss_after / loss_before`.
    pub raw_reward: f64,
    /// What the scheduler actually saw, in `[0, 1]`.
    pub norm_reward: f64,
    /// Scheduler policy at sampling time.
    pub policy: PolicyVector,
}

/// A complete, replayable run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub scenario: String,
    pub scheduler: String,
    pub seed: u64,
    pub records: Vec<StepRecord>,
}

impl TrajectoryLog {
    pub fn n_arms(&self) -> Option<usize> {
        self.records.first().map(|r| r.policy.n_arms())
    }
}

/// Windowed running means of the raw reward per ordered `(trained task,
/// reward task)` pair, over the last [`TRANSFER_WINDOW`] observations of
/// that pair.
#[derive(Debug, Clone)]
pub struct TransferEstimator {
    n_arms: usize,
    windows: Vec<VecDeque<f64>>,
}

impl TransferEstimator {
    pub fn new(n_arms: usize) -> Self {
        Self {
            n_arms,
            windows: vec![VecDeque::with_capacity(TRANSFER_WINDOW); n_arms * n_arms],
        }
    }

    fn slot(&self, tau: ArmId, rho: ArmId) -> usize {
        tau.index() * self.n_arms + rho.index()
    }

    pub fn observe(&mut self, tau: ArmId, rho: ArmId, raw_reward: f64) {
        let slot = self.slot(tau, rho);
        let window = &mut self.windows[slot];
        if window.len() == TRANSFER_WINDOW {
            window.pop_front();
        }
        window.push_back(raw_reward);
    }

    /// Mean of the pair's window, summed oldest-first; `None` if the pair
    /// has never been observed.
    pub fn mean(&self, tau: ArmId, rho: ArmId) -> Option<f64> {
        let window = &self.windows[self.slot(tau, rho)];
        if window.is_empty() {
            None
        } else {
            Some(window.iter().sum::<f64>() / window.len() as f64)
        }
    }

    pub fn count(&self, tau: ArmId, rho: ArmId) -> usize {
        self.windows[self.slot(tau, rho)].len()
    }
}

/// One point of a transfer series: the pair's running mean as of `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferPoint {
    pub step: u64,
    pub mean: f64,
}

/// Per-pair transfer series extracted from a log.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferSeries {
    n_arms: usize,
    series: Vec<Vec<TransferPoint>>,
}

impl TransferSeries {
    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    /// Points for the ordered pair (trained task, reward task); empty if the
    /// pair never occurred.
    pub fn pair(&self, tau: ArmId, rho: ArmId) -> &[TransferPoint] {
        &self.series[tau.index() * self.n_arms + rho.index()]
    }
}

/// Window-mean series per ordered pair, one point at every step where the
/// pair occurs.
pub fn transfer_series(log: &TrajectoryLog) -> Result<TransferSeries> {
    let n_arms = log
        .n_arms()
        .ok_or_else(|| Error::Domain("cannot compute transfer series of an empty log".into()))?;
    let mut estimator = TransferEstimator::new(n_arms);
    let mut series = vec![Vec::new(); n_arms * n_arms];
    for record in &log.records {
        estimator.observe(record.tau, record.rho, record.raw_reward);
        let mean = estimator
            .mean(record.tau, record.rho)
            .expect("pair observed this step");
        series[record.tau.index() * n_arms + record.rho.index()].push(TransferPoint {
            step: record.step,
            mean,
        });
    }
    Ok(TransferSeries { n_arms, series })
}

/// Run one curriculum step against a trainer. Infallible by construction:
/// the sampled arms come from the scheduler's own policy and the loss floor
/// keeps every loss positive.
pub fn curriculum_step<T: TaskTrainer>(
    trainer: &mut T,
    scheduler: &mut dyn Scheduler,
    normalizer: &mut RewardNormalizer,
    rng: &mut RngStream,
    step: u64,
) -> StepRecord {
    let n = trainer.n_tasks();
    debug_assert_eq!(scheduler.n_arms(), n);

    let policy = scheduler.policy();
    let tau = sample_arm(&policy, rng);
    let train_batch = trainer.draw_batch(tau);
    let rho = ArmId(rng.index(n));
    let reward_batch = trainer.draw_batch(rho);
    let loss_before = trainer.loss(&reward_batch);
    trainer.gradient_step(&train_batch);
    let loss_after = trainer.loss(&reward_batch);
    let raw = pgnorm(loss_before, loss_after).expect("loss floor keeps losses positive");
    let norm = normalizer.observe(raw);
    scheduler
        .update(tau, norm, &policy)
        .expect("sampled arm is within the scheduler's range");
    scheduler.tick();

    StepRecord {
        step,
        tau,
        rho,
        loss_before,
        loss_after,
        raw_reward: raw.value(),
        norm_reward: norm.value(),
        policy,
    }
}

/// Run a full trajectory: `steps` records, fully determined by
/// `(scenario, scheduler_config, steps, seed)`.
pub fn run(
    scenario: &Scenario,
    scheduler_config: &SchedulerConfig,
    steps: u64,
    seed: u64,
) -> Result<TrajectoryLog> {
    if steps == 0 {
        return Err(Error::InvalidConfig("steps must be >= 1".into()));
    }
    scenario.validate()?;
    let n = scenario.n_arms();
    let mut scheduler = scheduler_config.build(n)?;
    let mut loop_rng = RngStream::seed_from_u64(seed ^ LOOP_STREAM_SALT);

    let records = match scenario {
        Scenario::Env(cfg) => {
            let mut env = EnvState::new(cfg.clone(), seed)?;
            let mut normalizer = RewardNormalizer::with_defaults();
            (0..steps)
                .map(|step| {
                    curriculum_step(&mut env, scheduler.as_mut(), &mut normalizer, &mut loop_rng, step)
                })
                .collect()
        }
        Scenario::Stationary(cfg) => {
            let mut payout_rng = RngStream::seed_from_u64(seed);
            (0..steps)
                .map(|step| stationary_step(cfg, scheduler.as_mut(), &mut loop_rng, &mut payout_rng, step))
                .collect()
        }
    };

    Ok(TrajectoryLog {
        scenario: scenario_id(scenario),
        scheduler: scheduler_config.id(),
        seed,
        records,
    })
}

/// Skill-free step: the pulled arm pays out directly, already on the
/// bandit's `[0, 1]` scale, so the quantile normalizer is bypassed. The
/// reward task is the trained arm itself, and the recorded losses are the
/// synthetic pair `(1, 1 - reward)` so the relative-reduction identity still
/// holds.
fn stationary_step(
    cfg: &StationaryConfig,
    scheduler: &mut dyn Scheduler,
    loop_rng: &mut RngStream,
    payout_rng: &mut RngStream,
    step: u64,
) -> StepRecord {
    let policy = scheduler.policy();
    let tau = sample_arm(&policy, loop_rng);
    let raw = cfg.arms[tau.index()].sample(payout_rng);
    let norm = NormalizedReward::clamped(raw);
    scheduler
        .update(tau, norm, &policy)
        .expect("sampled arm is within the scheduler's range");
    scheduler.tick();

    StepRecord {
        step,
        tau,
        rho: tau,
        loss_before: 1.0,
        loss_after: 1.0 - raw,
        raw_reward: raw,
        norm_reward: norm.value(),
        policy,
    }
}

fn scenario_id(scenario: &Scenario) -> String {
    for name in Scenario::preset_names() {
        if let Ok(preset) = Scenario::preset(name)
            && &preset == scenario
        {
            return (*name).into();
        }
    }
    match scenario {
        Scenario::Env(_) => "custom".into(),
        Scenario::Stationary(_) => "custom_stationary".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvConfig, two_task_paper_like};

    fn noiseless_config() -> EnvConfig {
        EnvConfig {
            n_tasks: 2,
            transfer: vec![vec![0.6, 0.25], vec![0.35, 0.9]],
            ceilings: vec![2.8, 3.6],
            floors: vec![0.9, 1.3],
            step_gain: 1e-4,
            noise_sd: vec![0.0, 0.0],
            schedule: vec![],
        }
    }

    #[test]
    fn run_produces_one_record_per_step() {
        let scenario = Scenario::Env(noiseless_config());
        let log = run(&scenario, &SchedulerConfig::fair(), 1, 0).unwrap();
        assert_eq!(log.records.len(), 1);
        assert_eq!(log.records[0].step, 0);
    }

    #[test]
    fn run_rejects_zero_steps() {
        let scenario = Scenario::Env(noiseless_config());
        assert!(run(&scenario, &SchedulerConfig::fair(), 0, 0).is_err());
    }

    #[test]
    fn identical_inputs_give_identical_logs() {
        let scenario = Scenario::Env(two_task_paper_like());
        for cfg in [SchedulerConfig::fair(), SchedulerConfig::exp3()] {
            let a = run(&scenario, &cfg, 300, 17).unwrap();
            let b = run(&scenario, &cfg, 300, 17).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn reward_matches_losses_at_every_step() {
        let scenario = Scenario::Env(two_task_paper_like());
        let log = run(&scenario, &SchedulerConfig::fair(), 2000, 5).unwrap();
        for r in &log.records {
            let expected = 1.0 - r.loss_after / r.loss_before;
            assert!((r.raw_reward - expected).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&r.norm_reward));
        }
    }

    #[test]
    fn first_step_reward_equals_the_analytic_oracle() {
        let cfg = noiseless_config();
        let oracle_env = EnvState::new(cfg.clone(), 0).unwrap();
        let mut oracle = [[0.0; 2]; 2];
        for (tau, row) in oracle.iter_mut().enumerate() {
            for (rho, cell) in row.iter_mut().enumerate() {
                *cell = oracle_env.expected_pgnorm(ArmId(tau), ArmId(rho));
            }
        }
        for seed in 0..20 {
            let log = run(&Scenario::Env(cfg.clone()), &SchedulerConfig::fair(), 1, seed).unwrap();
            let r = &log.records[0];
            let expected = oracle[r.tau.index()][r.rho.index()];
            assert!(
                (r.raw_reward - expected).abs() < 1e-12,
                "seed {seed}: {} vs {expected}",
                r.raw_reward
            );
        }
    }

    #[test]
    fn zero_transfer_yields_zero_rewards_and_a_near_uniform_policy() {
        let mut cfg = noiseless_config();
        cfg.transfer = vec![vec![0.0; 2]; 2];
        cfg.noise_sd = vec![0.5, 0.5]; // noise cancels: same batch both sides
        // 400 steps stay inside normalizer warmup, so the scheduler sees
        // forced zeros throughout. Both weights only decay; they drift apart
        // a little because only the sampled arm updates.
        let log = run(&Scenario::Env(cfg), &SchedulerConfig::fair(), 400, 3).unwrap();
        for r in &log.records {
            assert_eq!(r.raw_reward, 0.0);
            assert_eq!(r.norm_reward, 0.0);
            assert!((r.policy.probs()[0] - 0.5).abs() < 0.1, "{:?}", r.policy);
        }
    }

    #[test]
    fn loop_consumes_a_fixed_draw_budget_per_step() {
        let cfg = two_task_paper_like();
        for sched in SchedulerConfig::comparison_set() {
            let mut env = EnvState::new(cfg.clone(), 9).unwrap();
            let mut scheduler = sched.build(2).unwrap();
            let mut normalizer = RewardNormalizer::with_defaults();
            let mut rng = RngStream::seed_from_u64(1);
            for step in 0..50 {
                let loop_before = rng.draw_count();
                let env_before = env.draw_count();
                let _ = curriculum_step(&mut env, scheduler.as_mut(), &mut normalizer, &mut rng, step);
                assert_eq!(rng.draw_count() - loop_before, 2, "{}", sched.id());
                assert_eq!(env.draw_count() - env_before, 4, "{}", sched.id());
            }
        }
    }

    #[test]
    fn transfer_estimator_matches_brute_force_at_every_step() {
        let log = run(&Scenario::Env(two_task_paper_like()), &SchedulerConfig::exp3(), 3000, 2).unwrap();
        let mut estimator = TransferEstimator::new(2);
        let mut seen: Vec<(ArmId, ArmId, f64)> = Vec::new();
        for r in &log.records {
            estimator.observe(r.tau, r.rho, r.raw_reward);
            seen.push((r.tau, r.rho, r.raw_reward));
            for tau in 0..2 {
                for rho in 0..2 {
                    let brute: Vec<f64> = seen
                        .iter()
                        .filter(|(t, p, _)| t.index() == tau && p.index() == rho)
                        .map(|&(_, _, v)| v)
                        .collect();
                    let tail = &brute[brute.len().saturating_sub(TRANSFER_WINDOW)..];
                    let expected = if tail.is_empty() {
                        None
                    } else {
                        Some(tail.iter().sum::<f64>() / tail.len() as f64)
                    };
                    assert_eq!(estimator.mean(ArmId(tau), ArmId(rho)), expected);
                }
            }
        }
    }

    #[test]
    fn constant_rewards_give_a_constant_series() {
        let mut estimator = TransferEstimator::new(2);
        for _ in 0..1200 {
            estimator.observe(ArmId(0), ArmId(1), 0.25);
        }
        assert_eq!(estimator.count(ArmId(0), ArmId(1)), TRANSFER_WINDOW);
        assert_eq!(estimator.mean(ArmId(0), ArmId(1)), Some(0.25));
        assert_eq!(estimator.mean(ArmId(1), ArmId(0)), None);
    }

    #[test]
    fn transfer_series_emits_points_only_where_pairs_occur() {
        let log = run(&Scenario::Env(two_task_paper_like()), &SchedulerConfig::fair(), 500, 4).unwrap();
        let series = transfer_series(&log).unwrap();
        let mut total = 0;
        for tau in 0..2 {
            for rho in 0..2 {
                total += series.pair(ArmId(tau), ArmId(rho)).len();
            }
        }
        assert_eq!(total, log.records.len());
        assert!(transfer_series(&TrajectoryLog {
            scenario: "x".into(),
            scheduler: "y".into(),
            seed: 0,
            records: vec![],
        })
        .is_err());
    }

    #[test]
    fn stationary_runs_record_the_synthetic_loss_pair() {
        let scenario = Scenario::preset("stationary_bandit").unwrap();
        let log = run(&scenario, &SchedulerConfig::fair(), 200, 11).unwrap();
        assert_eq!(log.scenario, "stationary_bandit");
        for r in &log.records {
            assert_eq!(r.rho, r.tau);
            assert_eq!(r.loss_before, 1.0);
            assert!((r.raw_reward - (1.0 - r.loss_after / r.loss_before)).abs() < 1e-12);
        }
    }

    #[test]
    fn scenario_ids_resolve_presets_and_custom_configs() {
        assert_eq!(
            scenario_id(&Scenario::preset("two_task_paper_like").unwrap()),
            "two_task_paper_like"
        );
        assert_eq!(scenario_id(&Scenario::Env(noiseless_config())), "custom");
    }
}
