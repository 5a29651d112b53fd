//! Data-selection policies.
//!
//! Four ways to pick which task to train on next, all behind the
//! [`Scheduler`] contract (produce a policy, ingest a reward):
//!
//! - [`Fair`]: samples arms proportionally to an exponential moving average
//!   of their rewards, mixed with uniform exploration. Spreads probability
//!   across arms instead of collapsing onto the single best one.
//! - [`Exp3`]: exponential weights for adversarial bandits with an
//!   importance-weighted update. Concentrates on the best arm in hindsight.
//! - [`StaticMix`]: a fixed mixing ratio, two arms only.
//! - [`Warmup`]: two-phase heuristic, one ratio before a switch step and
//!   another after.
//!
//! `Fair` and `Exp3` accept any arm count `n >= 2`; the two baselines are
//! defined for exactly two arms and reject other counts at construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{ArmId, PolicyVector};
use crate::reward::NormalizedReward;

/// Initial arm weight for [`Fair`]; small enough that the first real reward
/// dominates the policy immediately after normalizer warmup.
pub const FAIR_INITIAL_WEIGHT: f64 = 1e-7;

/// One curriculum scheduler: emits a sampling policy over arms and learns
/// from `[0, 1]` rewards.
pub trait Scheduler: Send {
    fn n_arms(&self) -> usize;

    /// The current sampling distribution over arms.
    fn policy(&self) -> PolicyVector;

    /// Ingest the reward observed after training on `arm`. `policy` must be
    /// the snapshot the arm was sampled from.
    fn update(
        &mut self,
        arm: ArmId,
        reward: NormalizedReward,
        policy: &PolicyVector,
    ) -> Result<()>;

    /// Advance the step counter. Only step-dependent schedulers react.
    fn tick(&mut self) {}
}

fn check_rate(name: &str, value: f64, lo_open: bool) -> Result<()> {
    let in_range = if lo_open {
        value > 0.0 && value <= 1.0
    } else {
        (0.0..=1.0).contains(&value)
    };
    if value.is_finite() && in_range {
        Ok(())
    } else {
        let range = if lo_open { "(0, 1]" } else { "[0, 1]" };
        Err(Error::InvalidConfig(format!("{name} must lie in {range}, got {value}")))
    }
}

// ---------------------------------------------------------------------------
// Fair
// ---------------------------------------------------------------------------

/// Moving-average proportional sampler.
///
/// Policy: `(1 - gamma) * w_a / sum(w) + gamma / n`.
/// Update on the sampled arm only: `w_a <- (1 - mu) * w_a + mu * r`.
///
/// Weights stay strictly positive: they start positive and every update is a
/// convex combination of positive quantities for rewards in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Fair {
    weights: Vec<f64>,
    gamma: f64,
    mu: f64,
}

impl Fair {
    pub fn new(n_arms: usize, gamma: f64, mu: f64) -> Result<Self> {
        if n_arms < 2 {
            return Err(Error::InvalidConfig(format!(
                "fair scheduler needs at least 2 arms, got {n_arms}"
            )));
        }
        check_rate("exploration rate gamma", gamma, false)?;
        check_rate("moving-average rate mu", mu, true)?;
        Ok(Self {
            weights: vec![FAIR_INITIAL_WEIGHT; n_arms],
            gamma,
            mu,
        })
    }

    /// Resume from explicit weights; every weight must be strictly positive.
    pub fn with_weights(weights: Vec<f64>, gamma: f64, mu: f64) -> Result<Self> {
        if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "fair weights must be strictly positive, got {bad}"
            )));
        }
        let mut fair = Fair::new(weights.len(), gamma, mu)?;
        fair.weights = weights;
        Ok(fair)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Scheduler for Fair {
    fn n_arms(&self) -> usize {
        self.weights.len()
    }

    fn policy(&self) -> PolicyVector {
        let n = self.weights.len() as f64;
        let total: f64 = self.weights.iter().sum();
        let floor = self.gamma / n;
        let probs = self
            .weights
            .iter()
            .map(|w| (1.0 - self.gamma) * (w / total) + floor)
            .collect();
        PolicyVector::new(probs).expect("positive weights yield a valid policy")
    }

    fn update(
        &mut self,
        arm: ArmId,
        reward: NormalizedReward,
        _policy: &PolicyVector,
    ) -> Result<()> {
        arm.validate(self.weights.len())?;
        let w = &mut self.weights[arm.index()];
        // Clamp at the smallest normal so the strict-positivity invariant
        // survives arbitrarily long zero-reward streaks.
        *w = ((1.0 - self.mu) * *w + self.mu * reward.value()).max(f64::MIN_POSITIVE);
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Exp3
// ---------------------------------------------------------------------------

/// Exponential-weights adversarial bandit.
///
/// Policy: `(1 - gamma) * softmax(log_weights) + gamma / n`.
/// Update (gain-based, importance-weighted, sampled arm only):
/// `log_w_a += eta * r / policy_a`.
///
/// Weights live in the log domain; hundreds of thousands of multiplicative
/// updates overflow the linear domain.
#[derive(Debug, Clone)]
pub struct Exp3 {
    log_weights: Vec<f64>,
    eta: f64,
    gamma: f64,
}

impl Exp3 {
    pub fn new(n_arms: usize, eta: f64, gamma: f64) -> Result<Self> {
        if n_arms < 2 {
            return Err(Error::InvalidConfig(format!(
                "exp3 scheduler needs at least 2 arms, got {n_arms}"
            )));
        }
        if !eta.is_finite() || eta < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning rate eta must be finite and >= 0, got {eta}"
            )));
        }
        check_rate("exploration rate gamma", gamma, false)?;
        Ok(Self {
            log_weights: vec![0.0; n_arms],
            eta,
            gamma,
        })
    }

    /// Resume from explicit log weights; entries must be finite.
    pub fn with_log_weights(log_weights: Vec<f64>, eta: f64, gamma: f64) -> Result<Self> {
        if let Some(bad) = log_weights.iter().find(|lw| !lw.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "exp3 log weights must be finite, got {bad}"
            )));
        }
        let mut exp3 = Exp3::new(log_weights.len(), eta, gamma)?;
        exp3.log_weights = log_weights;
        Ok(exp3)
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Scheduler for Exp3 {
    fn n_arms(&self) -> usize {
        self.log_weights.len()
    }

    fn policy(&self) -> PolicyVector {
        let n = self.log_weights.len() as f64;
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = self.log_weights.iter().map(|&lw| (lw - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let floor = self.gamma / n;
        let probs = exps
            .iter()
            .map(|e| (1.0 - self.gamma) * (e / total) + floor)
            .collect();
        PolicyVector::new(probs).expect("softmax yields a valid policy")
    }

    fn update(
        &mut self,
        arm: ArmId,
        reward: NormalizedReward,
        policy: &PolicyVector,
    ) -> Result<()> {
        arm.validate(self.log_weights.len())?;
        let p = policy.prob(arm);
        if p <= 0.0 {
            return Err(Error::Domain(format!(
                "cannot importance-weight arm {arm} sampled with probability {p}"
            )));
        }
        self.log_weights[arm.index()] += self.eta * reward.value() / p;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Static and warmup baselines
// ---------------------------------------------------------------------------

/// Fixed two-arm mixing ratio; `lambda` is the probability of arm 0 (MT).
#[derive(Debug, Clone)]
pub struct StaticMix {
    lambda: f64,
}

impl StaticMix {
    pub fn new(n_arms: usize, lambda: f64) -> Result<Self> {
        if n_arms != 2 {
            return Err(Error::InvalidConfig(format!(
                "static mixing is defined for exactly 2 arms, got {n_arms}"
            )));
        }
        check_rate("lambda", lambda, false)?;
        Ok(Self { lambda })
    }
}

impl Scheduler for StaticMix {
    fn n_arms(&self) -> usize {
        2
    }

    fn policy(&self) -> PolicyVector {
        PolicyVector::new(vec![self.lambda, 1.0 - self.lambda]).expect("lambda in [0, 1]")
    }

    fn update(
        &mut self,
        arm: ArmId,
        _reward: NormalizedReward,
        _policy: &PolicyVector,
    ) -> Result<()> {
        arm.validate(2)
    }
}

/// Two-phase heuristic: `lambda_warm` on arm 0 until `switch_step`, then
/// `lambda_after`. The step counter advances once per curriculum step via
/// [`Scheduler::tick`].
#[derive(Debug, Clone)]
pub struct Warmup {
    lambda_warm: f64,
    lambda_after: f64,
    switch_step: u64,
    step: u64,
}

impl Warmup {
    pub fn new(n_arms: usize, lambda_warm: f64, lambda_after: f64, switch_step: u64) -> Result<Self> {
        if n_arms != 2 {
            return Err(Error::InvalidConfig(format!(
                "warmup scheduling is defined for exactly 2 arms, got {n_arms}"
            )));
        }
        check_rate("lambda_warm", lambda_warm, false)?;
        check_rate("lambda_after", lambda_after, false)?;
        Ok(Self {
            lambda_warm,
            lambda_after,
            switch_step,
            step: 0,
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

impl Scheduler for Warmup {
    fn n_arms(&self) -> usize {
        2
    }

    fn policy(&self) -> PolicyVector {
        let lambda = if self.step < self.switch_step {
            self.lambda_warm
        } else {
            self.lambda_after
        };
        PolicyVector::new(vec![lambda, 1.0 - lambda]).expect("lambda in [0, 1]")
    }

    fn update(
        &mut self,
        arm: ArmId,
        _reward: NormalizedReward,
        _policy: &PolicyVector,
    ) -> Result<()> {
        arm.validate(2)
    }

    fn tick(&mut self) {
        self.step += 1;
    }
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

fn default_fair_gamma() -> f64 {
    0.1
}
fn default_fair_mu() -> f64 {
    0.01
}
fn default_exp3_eta() -> f64 {
    1e-3
}
fn default_exp3_gamma() -> f64 {
    0.25
}
fn default_warm_lambda() -> f64 {
    0.4
}
fn default_after_lambda() -> f64 {
    0.1
}
fn default_switch_step() -> u64 {
    20_000
}

/// Declarative scheduler choice, as it appears in experiment config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchedulerConfig {
    Fair {
        #[serde(default = "default_fair_gamma")]
        gamma: f64,
        #[serde(default = "default_fair_mu")]
        mu: f64,
    },
    Exp3 {
        #[serde(default = "default_exp3_eta")]
        eta: f64,
        #[serde(default = "default_exp3_gamma")]
        gamma: f64,
    },
    Static {
        lambda: f64,
    },
    Warmup {
        #[serde(default = "default_warm_lambda")]
        lambda_warm: f64,
        #[serde(default = "default_after_lambda")]
        lambda_after: f64,
        #[serde(default = "default_switch_step")]
        switch_step: u64,
    },
}

impl SchedulerConfig {
    pub fn fair() -> Self {
        SchedulerConfig::Fair {
            gamma: default_fair_gamma(),
            mu: default_fair_mu(),
        }
    }

    pub fn exp3() -> Self {
        SchedulerConfig::Exp3 {
            eta: default_exp3_eta(),
            gamma: default_exp3_gamma(),
        }
    }

    pub fn warmup() -> Self {
        SchedulerConfig::Warmup {
            lambda_warm: default_warm_lambda(),
            lambda_after: default_after_lambda(),
            switch_step: default_switch_step(),
        }
    }

    /// The standard comparison set: three fixed mixes (all-LM, 10% MT,
    /// 50/50), the warmup heuristic and both bandits.
    pub fn comparison_set() -> Vec<SchedulerConfig> {
        vec![
            SchedulerConfig::Static { lambda: 0.0 },
            SchedulerConfig::Static { lambda: 0.1 },
            SchedulerConfig::Static { lambda: 0.5 },
            SchedulerConfig::warmup(),
            SchedulerConfig::exp3(),
            SchedulerConfig::fair(),
        ]
    }

    /// Instantiate for a given arm count, validating every parameter.
    pub fn build(&self, n_arms: usize) -> Result<Box<dyn Scheduler>> {
        Ok(match *self {
            SchedulerConfig::Fair { gamma, mu } => Box::new(Fair::new(n_arms, gamma, mu)?),
            SchedulerConfig::Exp3 { eta, gamma } => Box::new(Exp3::new(n_arms, eta, gamma)?),
            SchedulerConfig::Static { lambda } => Box::new(StaticMix::new(n_arms, lambda)?),
            SchedulerConfig::Warmup {
                lambda_warm,
                lambda_after,
                switch_step,
            } => Box::new(Warmup::new(n_arms, lambda_warm, lambda_after, switch_step)?),
        })
    }

    /// Short filename-safe identifier.
    pub fn id(&self) -> String {
        match self {
            SchedulerConfig::Fair { .. } => "fair".into(),
            SchedulerConfig::Exp3 { .. } => "exp3".into(),
            SchedulerConfig::Static { lambda } => format!("static-{lambda}"),
            SchedulerConfig::Warmup { .. } => "warmup".into(),
        }
    }

    /// Human-readable label for report tables.
    pub fn label(&self) -> String {
        match self {
            SchedulerConfig::Fair { .. } => "FAIR".into(),
            SchedulerConfig::Exp3 { .. } => "EXP3".into(),
            SchedulerConfig::Static { lambda } => format!(
                "LM ({:.0}%) - MT ({:.0}%)",
                (1.0 - lambda) * 100.0,
                lambda * 100.0
            ),
            SchedulerConfig::Warmup { .. } => "WARMUP".into(),
        }
    }
}
