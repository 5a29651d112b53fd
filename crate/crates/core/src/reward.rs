//! Reward computation and normalization.
//!
//! The raw reward for a training step is the relative loss reduction
//! `1 - loss_after / loss_before` measured on an independent batch. Relative
//! (rather than absolute) reduction makes rewards comparable across tasks
//! whose loss scales differ.
//!
//! Raw rewards are unbounded and noisy, so before they reach a bandit they
//! pass through [`RewardNormalizer`]: a bounded FIFO of the most recent raw
//! rewards whose 20th/80th percentiles define a clip-and-rescale map onto
//! `[0, 1]`. While the FIFO is under its fill threshold the normalizer is in
//! warmup and emits 0, which leaves the schedulers effectively untrained.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// FIFO capacity used by the curriculum loop.
pub const DEFAULT_QUEUE_LEN: usize = 5000;
/// Fraction of the queue that must fill before rescaling starts.
pub const DEFAULT_FILL_FRACTION: f64 = 0.1;

const LOWER_PERCENTILE: f64 = 0.2;
const UPPER_PERCENTILE: f64 = 0.8;

/// Relative loss reduction, before normalization. Finite but unbounded;
/// negative when the loss increased.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawReward(f64);

impl RawReward {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(Self(value))
        } else {
            Err(Error::Domain(format!("raw reward must be finite, got {value}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A reward already rescaled into `[0, 1]`, safe to feed to any scheduler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedReward(f64);

impl NormalizedReward {
    pub const ZERO: NormalizedReward = NormalizedReward(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::Domain(format!(
                "normalized reward must lie in [0, 1], got {value}"
            )))
        }
    }

    /// Clamp an arbitrary finite value into `[0, 1]`.
    pub fn clamped(value: f64) -> Self {
        Self(value.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Relative loss reduction `1 - loss_after / loss_before`.
///
/// Scale-free: multiplying both losses by a constant leaves the result
/// unchanged, so rewards from tasks with different loss magnitudes are
/// directly comparable.
pub fn pgnorm(loss_before: f64, loss_after: f64) -> Result<RawReward> {
    if !loss_before.is_finite() || !loss_after.is_finite() {
        return Err(Error::Domain(format!(
            "losses must be finite, got before={loss_before} after={loss_after}"
        )));
    }
    if loss_before <= 0.0 {
        return Err(Error::Domain(format!(
            "loss before the step must be positive, got {loss_before}"
        )));
    }
    RawReward::new(1.0 - loss_after / loss_before)
}

/// Empirical percentiles of a buffer by linear interpolation between closest
/// ranks on the sorted values (inclusive endpoints). Returns the 20th and
/// 80th percentiles; `q20 <= q80` always.
pub fn quantiles(buffer: &[f64]) -> Result<(f64, f64)> {
    if buffer.is_empty() {
        return Err(Error::Domain("cannot take quantiles of an empty buffer".into()));
    }
    let mut sorted = buffer.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((
        percentile_sorted(&sorted, LOWER_PERCENTILE),
        percentile_sorted(&sorted, UPPER_PERCENTILE),
    ))
}

/// Percentile of an ascending slice, linear interpolation between closest
/// ranks. `p` in [0, 1].
pub(crate) fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let rank = p * (m - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if lo + 1 < m {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[m - 1]
    }
}

/// Streaming quantile rescaler over a bounded FIFO of raw rewards.
///
/// Protocol per observation:
/// 1. While the queue (counting the incoming reward) is under its fill
///    threshold, emit 0.
/// 2. Otherwise clip the incoming reward to the current 20th/80th
///    percentiles and rescale linearly so the 20th percentile maps to 0 and
///    the 80th to 1. The percentiles in effect are those computed *before*
///    this observation was enqueued.
/// 3. Enqueue the raw reward (evicting the oldest once at capacity) and
///    recompute the percentiles.
///
/// A single normalizer is shared by all arms: rescaling against a pooled
/// history is what keeps cross-task rewards comparable.
#[derive(Debug, Clone)]
pub struct RewardNormalizer {
    /// Insertion-ordered contents, oldest first.
    buffer: VecDeque<f64>,
    /// Same contents kept ascending, for O(log n) percentile maintenance.
    sorted: Vec<f64>,
    capacity: usize,
    fill_threshold: usize,
    current: Option<(f64, f64)>,
}

impl RewardNormalizer {
    pub fn new(capacity: usize, fill_fraction: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("normalizer capacity must be >= 1".into()));
        }
        if !(fill_fraction > 0.0 && fill_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "normalizer fill fraction must lie in (0, 1], got {fill_fraction}"
            )));
        }
        let fill_threshold = ((fill_fraction * capacity as f64).ceil() as usize).max(1);
        Ok(Self {
            buffer: VecDeque::with_capacity(capacity),
            sorted: Vec::with_capacity(capacity),
            capacity,
            fill_threshold,
            current: None,
        })
    }

    pub fn with_defaults() -> Self {
        Self::new(DEFAULT_QUEUE_LEN, DEFAULT_FILL_FRACTION).expect("default parameters are valid")
    }

    /// Rescale one raw reward and absorb it into the history.
    pub fn observe(&mut self, raw: RawReward) -> NormalizedReward {
        let value = raw.value();
        let warming = self.current.is_none()
            && (self.buffer.is_empty() || self.buffer.len() + 1 < self.fill_threshold);
        if warming {
            self.enqueue(value);
            return NormalizedReward::ZERO;
        }
        // First non-warmup observation: percentiles cover everything seen
        // before it. Afterwards they are refreshed after every enqueue.
        let (q20, q80) = match self.current {
            Some(q) => q,
            None => self.percentiles_of_buffer(),
        };
        let out = if q80 > q20 {
            (value.clamp(q20, q80) - q20) / (q80 - q20)
        } else {
            // Degenerate window: every recent reward identical, nothing to
            // rank against. Emit the midpoint.
            0.5
        };
        self.enqueue(value);
        self.current = Some(self.percentiles_of_buffer());
        NormalizedReward::clamped(out)
    }

    /// Number of rewards currently held.
    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    /// Queue length at which warmup ends.
    pub fn fill_threshold(&self) -> usize {
        self.fill_threshold
    }

    /// True once the normalizer has left warmup.
    pub fn is_warmed_up(&self) -> bool {
        self.current.is_some()
    }

    /// The percentile pair that will rescale the next observation, if out of
    /// warmup.
    pub fn current_quantiles(&self) -> Option<(f64, f64)> {
        self.current
    }

    fn percentiles_of_buffer(&self) -> (f64, f64) {
        (
            percentile_sorted(&self.sorted, LOWER_PERCENTILE),
            percentile_sorted(&self.sorted, UPPER_PERCENTILE),
        )
    }

    fn enqueue(&mut self, value: f64) {
        if self.buffer.len() == self.capacity {
            let evicted = self.buffer.pop_front().expect("non-empty at capacity");
            let at = self.sorted.partition_point(|&x| x < evicted);
            debug_assert!(self.sorted[at] == evicted);
            self.sorted.remove(at);
        }
        self.buffer.push_back(value);
        let at = self.sorted.partition_point(|&x| x < value);
        self.sorted.insert(at, value);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pgnorm_matches_hand_evaluation() {
        assert!((pgnorm(10.0, 9.0).unwrap().value() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn pgnorm_is_zero_when_loss_unchanged() {
        for loss in [1e-6, 0.3, 1.0, 42.0, 1e9] {
            assert_eq!(pgnorm(loss, loss).unwrap().value(), 0.0);
        }
    }

    #[test]
    fn pgnorm_is_scale_invariant() {
        let (a, b) = (3.7, 2.9);
        let base = pgnorm(a, b).unwrap().value();
        for c in [1e-6, 1.0, 1e6] {
            let scaled = pgnorm(c * a, c * b).unwrap().value();
            assert!((scaled - base).abs() < 1e-12, "c={c}: {scaled} vs {base}");
        }
    }

    #[test]
    fn pgnorm_rejects_bad_domains() {
        assert!(pgnorm(0.0, 1.0).is_err());
        assert!(pgnorm(-1.0, 1.0).is_err());
        assert!(pgnorm(f64::NAN, 1.0).is_err());
        assert!(pgnorm(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn quantiles_of_singleton_and_constant() {
        assert_eq!(quantiles(&[5.0]).unwrap(), (5.0, 5.0));
        assert_eq!(quantiles(&[2.0, 2.0, 2.0]).unwrap(), (2.0, 2.0));
    }

    #[test]
    fn quantiles_of_uniform_grid() {
        let grid: Vec<f64> = (0..=100).map(f64::from).collect();
        let (q20, q80) = quantiles(&grid).unwrap();
        assert!((q20 - 20.0).abs() < 1e-12);
        assert!((q80 - 80.0).abs() < 1e-12);
    }

    #[test]
    fn quantiles_reject_empty_buffer() {
        assert!(quantiles(&[]).is_err());
    }

    #[test]
    fn warmup_forces_exactly_threshold_minus_one_zeros() {
        // capacity 50, fill 10% -> threshold 5 -> 4 forced zeros.
        let mut n = RewardNormalizer::new(50, 0.1).unwrap();
        assert_eq!(n.fill_threshold(), 5);
        let mut forced = 0;
        for i in 0..20 {
            let out = n.observe(RawReward::new(i as f64).unwrap());
            if !n.is_warmed_up() {
                forced += 1;
                assert_eq!(out.value(), 0.0);
            }
        }
        assert_eq!(forced, 4);
    }

    #[test]
    fn tiny_threshold_still_warms_up_on_first_observation() {
        let mut n = RewardNormalizer::new(3, 0.1).unwrap();
        assert_eq!(n.fill_threshold(), 1);
        assert_eq!(n.observe(RawReward::new(7.0).unwrap()).value(), 0.0);
        // Second observation rescales against the singleton history: degenerate.
        assert_eq!(n.observe(RawReward::new(9.0).unwrap()).value(), 0.5);
    }

    #[test]
    fn rescaling_maps_quantiles_to_unit_interval_ends() {
        let mut n = RewardNormalizer::new(1000, 0.1).unwrap();
        // Fill past warmup with a 0..1 ramp so q20 ~ 0.2 and q80 ~ 0.8.
        for i in 0..500 {
            n.observe(RawReward::new(i as f64 / 499.0).unwrap());
        }
        let (q20, q80) = n.current_quantiles().unwrap();
        let at_q20 = n.observe(RawReward::new(q20).unwrap()).value();
        let (q20b, q80b) = n.current_quantiles().unwrap();
        let at_q80 = n.observe(RawReward::new(q80b).unwrap()).value();
        let (q20c, q80c) = n.current_quantiles().unwrap();
        let at_mid = n.observe(RawReward::new((q20c + q80c) / 2.0).unwrap()).value();
        assert!((at_q20 - 0.0).abs() < 1e-12);
        assert!((at_q80 - 1.0).abs() < 1e-12);
        assert!((at_mid - 0.5).abs() < 1e-12);
        assert!(q20 <= q80 && q20b <= q80b);
    }

    #[test]
    fn values_beyond_quantiles_are_clipped() {
        let mut n = RewardNormalizer::new(100, 0.1).unwrap();
        for i in 0..60 {
            n.observe(RawReward::new(i as f64 / 59.0).unwrap());
        }
        assert_eq!(n.observe(RawReward::new(1e6).unwrap()).value(), 1.0);
        assert_eq!(n.observe(RawReward::new(-1e6).unwrap()).value(), 0.0);
    }

    #[test]
    fn degenerate_quantiles_emit_midpoint() {
        let mut n = RewardNormalizer::new(100, 0.1).unwrap();
        for _ in 0..50 {
            n.observe(RawReward::new(0.0).unwrap());
        }
        assert!(n.is_warmed_up());
        assert_eq!(n.observe(RawReward::new(0.3).unwrap()).value(), 0.5);
    }

    #[test]
    fn eviction_keeps_buffer_bounded_and_sorted_in_sync() {
        let mut n = RewardNormalizer::new(32, 0.5).unwrap();
        let mut reference: Vec<f64> = Vec::new();
        for i in 0..200 {
            let v = ((i * 7919) % 101) as f64 / 10.0;
            n.observe(RawReward::new(v).unwrap());
            reference.push(v);
            if reference.len() > 32 {
                reference.remove(0);
            }
            assert_eq!(n.len(), reference.len());
            if n.is_warmed_up() {
                let expected = quantiles(&reference).unwrap();
                let got = n.current_quantiles().unwrap();
                assert!((got.0 - expected.0).abs() < 1e-12);
                assert!((got.1 - expected.1).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn output_always_in_unit_interval(
            values in proptest::collection::vec(-1e6f64..1e6, 1..400),
        ) {
            let mut n = RewardNormalizer::new(64, 0.25).unwrap();
            for v in values {
                let out = n.observe(RawReward::new(v).unwrap()).value();
                prop_assert!((0.0..=1.0).contains(&out));
            }
        }

        #[test]
        fn output_is_monotone_in_raw_for_fixed_state(
            prefix in proptest::collection::vec(-100.0f64..100.0, 20..120),
            a in -200.0f64..200.0,
            b in -200.0f64..200.0,
        ) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let mut base = RewardNormalizer::new(64, 0.25).unwrap();
            for v in &prefix {
                base.observe(RawReward::new(*v).unwrap());
            }
            let mut n1 = base.clone();
            let mut n2 = base;
            let out_lo = n1.observe(RawReward::new(lo).unwrap()).value();
            let out_hi = n2.observe(RawReward::new(hi).unwrap()).value();
            prop_assert!(out_lo <= out_hi, "{out_lo} > {out_hi}");
        }

        #[test]
        fn maintained_quantiles_match_batch_computation(
            values in proptest::collection::vec(-50.0f64..50.0, 40..200),
        ) {
            let cap = 48;
            let mut n = RewardNormalizer::new(cap, 0.25).unwrap();
            let mut window: Vec<f64> = Vec::new();
            for v in values {
                n.observe(RawReward::new(v).unwrap());
                window.push(v);
                if window.len() > cap {
                    window.remove(0);
                }
            }
            if let Some((q20, q80)) = n.current_quantiles() {
                let (e20, e80) = quantiles(&window).unwrap();
                prop_assert!((q20 - e20).abs() < 1e-12);
                prop_assert!((q80 - e80).abs() < 1e-12);
            }
        }
    }
}
