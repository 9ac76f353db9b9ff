//! Shared domain types: play distributions, loss vectors, cumulative
//! estimates, per-round records, arm sampling and the importance-weighted
//! loss estimator.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Absolute tolerance on `sum(p) == 1` for a [`ProbabilityVector`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Smallest probability an arm may have when its loss is divided by it.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Random source owned by a single run.
pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("distribution needs at least 2 arms, got {0}")]
    TooFewArms(usize),
    #[error("probability {value} at arm {arm} is negative or not finite")]
    InvalidProbability { arm: usize, value: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("loss {value} at arm {arm} is outside [0, {bound}]")]
    LossOutOfRange { arm: usize, value: f64, bound: f64 },
    #[error("cumulative estimate {value} at arm {arm} is negative or not finite")]
    InvalidEstimate { arm: usize, value: f64 },
    #[error("played arm has probability {0}, below the floor {PROBABILITY_FLOOR}")]
    ProbabilityFloor(f64),
}

/// A point on the probability simplex over `K >= 2` arms.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(weights: Vec<f64>) -> Result<Self, CoreError> {
        if weights.len() < 2 {
            return Err(CoreError::TooFewArms(weights.len()));
        }
        for (arm, &value) in weights.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(CoreError::InvalidProbability { arm, value });
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(CoreError::NotNormalized(total));
        }
        Ok(Self(weights))
    }

    pub fn uniform(k: usize) -> Result<Self, CoreError> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;

    fn index(&self, arm: usize) -> &f64 {
        &self.0[arm]
    }
}

/// Cumulative importance-weighted loss estimates, one per arm.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEstimateVector(Vec<f64>);

impl LossEstimateVector {
    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn new(estimates: Vec<f64>) -> Result<Self, CoreError> {
        for (arm, &value) in estimates.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(CoreError::InvalidEstimate { arm, value });
            }
        }
        Ok(Self(estimates))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Adds a nonnegative increment to one arm.
    pub fn add(&mut self, arm: usize, increment: f64) {
        debug_assert!(increment >= 0.0);
        self.0[arm] += increment;
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Loss vector with entries in `[0, range_bound]`.
///
/// Environments emit per-round vectors with bound 1; a block of length `L`
/// aggregates to bound `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossVector {
    losses: Vec<f64>,
    range_bound: f64,
}

impl LossVector {
    pub fn new(losses: Vec<f64>, range_bound: f64) -> Result<Self, CoreError> {
        for (arm, &value) in losses.iter().enumerate() {
            if !(value.is_finite() && (0.0..=range_bound).contains(&value)) {
                return Err(CoreError::LossOutOfRange {
                    arm,
                    value,
                    bound: range_bound,
                });
            }
        }
        Ok(Self {
            losses,
            range_bound,
        })
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn range_bound(&self) -> f64 {
        self.range_bound
    }
}

/// What happened in one round of play. Arms are 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    pub round: u64,
    pub arm: usize,
    pub realized_loss: f64,
    pub switched: bool,
    pub switching_cost_paid: f64,
}

/// Tracks `J_{t-1}`; before the first round there is no previous arm, so
/// round 1 always counts as a switch.
#[derive(Debug, Clone, Copy, Default)]
pub struct SwitchTracker {
    previous: Option<usize>,
}

impl SwitchTracker {
    pub fn record(&mut self, arm: usize) -> bool {
        let switched = self.previous != Some(arm);
        self.previous = Some(arm);
        switched
    }
}

/// Inverse-CDF sampling of an arm for a given uniform draw `u` in `[0, 1)`.
pub fn arm_for_uniform(p: &ProbabilityVector, u: f64) -> usize {
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (arm, &w) in p.weights().iter().enumerate() {
        if w > 0.0 {
            last_positive = arm;
            cumulative += w;
            if u < cumulative {
                return arm;
            }
        }
    }
    // Rounding left the cumulative sum just below u.
    last_positive
}

/// Draws an arm with probability `p[i]`.
pub fn sample_arm<R: Rng + ?Sized>(p: &ProbabilityVector, rng: &mut R) -> usize {
    arm_for_uniform(p, rng.random::<f64>())
}

/// `c / p` for the played arm, zero otherwise.
pub fn importance_weighted_estimate(
    block_loss: f64,
    probability: f64,
    played: bool,
) -> Result<f64, CoreError> {
    if !played {
        return Ok(0.0);
    }
    if probability.is_nan() || probability <= PROBABILITY_FLOOR {
        return Err(CoreError::ProbabilityFloor(probability));
    }
    Ok(block_loss / probability)
}

/// Identifies one repetition of one experiment under a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RunSeed {
    pub master: u64,
    pub experiment: u64,
    pub repetition: u64,
}

impl RunSeed {
    const ENVIRONMENT_STREAM: u64 = 0;
    const POLICY_STREAM: u64 = 1;

    fn base(&self) -> SimRng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.master.to_le_bytes());
        seed[8..16].copy_from_slice(&self.experiment.to_le_bytes());
        seed[16..24].copy_from_slice(&self.repetition.to_le_bytes());
        SimRng::from_seed(seed)
    }

    /// Stream for the loss process. It does not depend on the algorithm, so
    /// all algorithms in one repetition face the same loss sequence.
    pub fn environment_rng(&self) -> SimRng {
        let mut rng = self.base();
        rng.set_stream(Self::ENVIRONMENT_STREAM);
        rng
    }

    pub fn policy_rng(&self) -> SimRng {
        let mut rng = self.base();
        rng.set_stream(Self::POLICY_STREAM);
        rng
    }
}

/// FNV-1a, used to turn experiment names into stream identifiers.
pub fn stable_hash(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_malformed_distributions() {
        assert_eq!(
            ProbabilityVector::new(vec![1.0]),
            Err(CoreError::TooFewArms(1))
        );
        assert!(matches!(
            ProbabilityVector::new(vec![0.6, 0.6]),
            Err(CoreError::NotNormalized(_))
        ));
        assert!(matches!(
            ProbabilityVector::new(vec![1.5, -0.5]),
            Err(CoreError::InvalidProbability { arm: 1, .. })
        ));
        assert!(ProbabilityVector::new(vec![f64::NAN, 1.0]).is_err());
        assert!(ProbabilityVector::new(vec![0.5, 0.5 + 1e-10]).is_ok());
    }

    #[test]
    fn degenerate_distribution_always_picks_its_arm() {
        let p = ProbabilityVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        let mut rng = SimRng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_eq!(sample_arm(&p, &mut rng), 0);
        }
        assert_eq!(arm_for_uniform(&p, 0.999_999_999), 0);
    }

    #[test]
    fn inverse_cdf_boundary() {
        let p = ProbabilityVector::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(arm_for_uniform(&p, 0.3), 0);
        assert_eq!(arm_for_uniform(&p, 0.5), 1);
        assert_eq!(arm_for_uniform(&p, 0.0), 0);
    }

    #[test]
    fn never_returns_zero_weight_arm_on_rounding() {
        let p = ProbabilityVector::new(vec![0.3, 0.7 - 1e-11, 0.0]).unwrap();
        assert_eq!(arm_for_uniform(&p, 0.999_999_999_999_9), 1);
    }

    #[test]
    fn uniform_sampling_frequencies() {
        let p = ProbabilityVector::uniform(8).unwrap();
        let mut rng = SimRng::seed_from_u64(20_240_801);
        let draws = 1_000_000;
        let mut counts = [0u64; 8];
        for _ in 0..draws {
            counts[sample_arm(&p, &mut rng)] += 1;
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.125).abs() <= 0.004, "frequency {freq}");
        }
    }

    #[test]
    fn estimator_branches() {
        assert!((importance_weighted_estimate(0.7, 0.35, true).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(importance_weighted_estimate(0.7, 0.35, false).unwrap(), 0.0);
        assert_eq!(
            importance_weighted_estimate(1.0, 1e-12, true),
            Err(CoreError::ProbabilityFloor(1e-12))
        );
        assert!(importance_weighted_estimate(1.0, 0.0, true).is_err());
        // The floor only matters for the played arm.
        assert_eq!(importance_weighted_estimate(1.0, 0.0, false).unwrap(), 0.0);
    }

    #[test]
    fn estimator_expectation_over_draws() {
        let p = [0.2, 0.3, 0.5];
        let c = [0.4, 0.6, 0.8];
        for arm in 0..3 {
            let expectation: f64 = (0..3)
                .map(|drawn| {
                    p[drawn] * importance_weighted_estimate(c[arm], p[arm], drawn == arm).unwrap()
                })
                .sum();
            assert!((expectation - c[arm]).abs() < 1e-12);
        }
    }

    #[test]
    fn first_round_switches() {
        let mut tracker = SwitchTracker::default();
        assert!(tracker.record(0));
        assert!(!tracker.record(0));
        assert!(tracker.record(2));
    }

    #[test]
    fn loss_vector_range() {
        assert!(LossVector::new(vec![0.0, 1.0], 1.0).is_ok());
        assert!(LossVector::new(vec![0.0, 3.0], 3.0).is_ok());
        assert!(matches!(
            LossVector::new(vec![0.0, 1.5], 1.0),
            Err(CoreError::LossOutOfRange { arm: 1, .. })
        ));
        assert!(LossEstimateVector::new(vec![0.0, -1.0]).is_err());
    }

    #[test]
    fn run_seeds_give_distinct_reproducible_streams() {
        let a = RunSeed {
            master: 7,
            experiment: stable_hash("easy"),
            repetition: 0,
        };
        let b = RunSeed { repetition: 1, ..a };
        let draw = |mut r: SimRng| -> u64 { r.random() };
        assert_eq!(draw(a.environment_rng()), draw(a.environment_rng()));
        assert_ne!(draw(a.environment_rng()), draw(b.environment_rng()));
        assert_ne!(draw(a.environment_rng()), draw(a.policy_rng()));
    }
}
