//! Arms and policies: the shared vocabulary of every scheduler.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Tolerance on the policy simplex constraint.
pub const POLICY_SUM_TOLERANCE: f64 = 1e-9;

/// Index of a selectable task. Arm 0 is the MT task and arm 1 the LM task
/// in every two-arm scenario and report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArmId(pub usize);

impl ArmId {
    pub fn index(self) -> usize {
        self.0
    }

    /// Check the index against an arm count.
    pub fn validate(self, n_arms: usize) -> Result<()> {
        if self.0 < n_arms {
            Ok(())
        } else {
            Err(Error::InvalidArm {
                arm: self.0,
                n_arms,
            })
        }
    }
}

impl std::fmt::Display for ArmId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A probability distribution over arms: non-negative entries summing to 1
/// within [`POLICY_SUM_TOLERANCE`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyVector(Vec<f64>);

impl PolicyVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("policy must have at least one arm".into()));
        }
        let mut sum = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::Domain(format!(
                    "policy entry {i} is {p}, expected a probability"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > POLICY_SUM_TOLERANCE {
            return Err(Error::Domain(format!(
                "policy sums to {sum}, expected 1 within {POLICY_SUM_TOLERANCE}"
            )));
        }
        Ok(Self(probs))
    }

    pub fn uniform(n_arms: usize) -> Self {
        Self(vec![1.0 / n_arms as f64; n_arms])
    }

    pub fn n_arms(&self) -> usize {
        self.0.len()
    }

    pub fn prob(&self, arm: ArmId) -> f64 {
        self.0[arm.index()]
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }
}

/// Sample an arm by inverse CDF over arm index order, consuming exactly one
/// uniform draw. Single-draw sampling keeps trajectories bit-reproducible.
pub fn sample_arm(policy: &PolicyVector, rng: &mut RngStream) -> ArmId {
    let u = rng.uniform();
    let mut cumulative = 0.0;
    for (i, &p) in policy.probs().iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return ArmId(i);
        }
    }
    // Float slack in the cumulative sum; the last arm absorbs it.
    ArmId(policy.n_arms() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degenerate_policy_always_picks_the_unit_arm() {
        let policy = PolicyVector::new(vec![1.0, 0.0]).unwrap();
        let mut rng = RngStream::seed_from_u64(0);
        for _ in 0..1000 {
            assert_eq!(sample_arm(&policy, &mut rng), ArmId(0));
        }
        let policy = PolicyVector::new(vec![0.0, 1.0]).unwrap();
        for _ in 0..1000 {
            assert_eq!(sample_arm(&policy, &mut rng), ArmId(1));
        }
    }

    #[test]
    fn fair_coin_frequency_within_three_sigma() {
        // 3 sigma for 100k Bernoulli(0.5) draws: 3 * 0.5 / sqrt(100k) ~ 0.0047.
        let policy = PolicyVector::new(vec![0.5, 0.5]).unwrap();
        let mut rng = RngStream::seed_from_u64(42);
        let n = 100_000;
        let zeros = (0..n)
            .filter(|_| sample_arm(&policy, &mut rng) == ArmId(0))
            .count();
        let freq = zeros as f64 / n as f64;
        assert!((0.494..=0.506).contains(&freq), "freq {freq}");
    }

    #[test]
    fn same_seed_same_arm_sequence() {
        let policy = PolicyVector::new(vec![0.3, 0.2, 0.5]).unwrap();
        let mut a = RngStream::seed_from_u64(9);
        let mut b = RngStream::seed_from_u64(9);
        let seq_a: Vec<_> = (0..500).map(|_| sample_arm(&policy, &mut a)).collect();
        let seq_b: Vec<_> = (0..500).map(|_| sample_arm(&policy, &mut b)).collect();
        assert_eq!(seq_a, seq_b);
    }

    #[test]
    fn sampling_consumes_one_draw() {
        let policy = PolicyVector::uniform(3);
        let mut rng = RngStream::seed_from_u64(1);
        let before = rng.draw_count();
        let _ = sample_arm(&policy, &mut rng);
        assert_eq!(rng.draw_count(), before + 1);
    }

    #[test]
    fn rejects_negative_and_unnormalized() {
        assert!(PolicyVector::new(vec![0.5, -0.5, 1.0]).is_err());
        assert!(PolicyVector::new(vec![0.5, 0.4]).is_err());
        assert!(PolicyVector::new(vec![]).is_err());
        assert!(PolicyVector::new(vec![f64::NAN, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn sampled_arm_is_always_in_range(
            weights in proptest::collection::vec(0.0f64..1.0, 1..8),
            seed in any::<u64>(),
        ) {
            let total: f64 = weights.iter().sum();
            prop_assume!(total > 1e-9);
            let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
            let n = probs.len();
            let policy = PolicyVector::new(probs).unwrap();
            let mut rng = RngStream::seed_from_u64(seed);
            for _ in 0..50 {
                prop_assert!(sample_arm(&policy, &mut rng).index() < n);
            }
        }
    }
}
