//! Oblivious loss processes and switching-cost sequences.
//!
//! Best arms always occupy the lowest indices. Every environment exposes the
//! expected loss of each arm at each round so the harness can account
//! pseudo-regret without Bernoulli noise.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{LossVector, SimRng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvironmentError {
    #[error("need at least 2 arms, got {0}")]
    TooFewArms(usize),
    #[error("gap must lie in [0, 0.5], got {0}")]
    GapOutOfRange(f64),
    #[error("number of best arms must be in [1, {max}], got {got}")]
    BestArmCount { got: usize, max: usize },
    #[error("phase growth base must exceed 1, got {0}")]
    PhaseGrowth(f64),
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("alternation period must be at least 1")]
    EmptyPeriod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Stochastic,
    StochasticallyConstrained,
    AdversarialDeterministic,
}

/// Oblivious loss process over `K` arms.
pub trait Environment: Send + Sync {
    fn arm_count(&self) -> usize;

    fn regime(&self) -> Regime;

    /// Writes the expected loss of every arm at round `t` (1-based).
    fn fill_expected(&self, t: u64, out: &mut [f64]);

    /// Writes the realized losses of round `t`.
    fn fill_losses(&self, t: u64, rng: &mut SimRng, out: &mut [f64]);

    fn loss_at(&self, t: u64, rng: &mut SimRng) -> LossVector {
        let mut out = vec![0.0; self.arm_count()];
        self.fill_losses(t, rng, &mut out);
        LossVector::new(out, 1.0).expect("environment emitted a loss outside [0, 1]")
    }

    fn expected_loss_at(&self, t: u64) -> Vec<f64> {
        let mut out = vec![0.0; self.arm_count()];
        self.fill_expected(t, &mut out);
        out
    }
}

fn fill_bernoulli(means: &[f64], rng: &mut SimRng, out: &mut [f64]) {
    for (o, &m) in out.iter_mut().zip(means) {
        *o = if rng.random::<f64>() < m { 1.0 } else { 0.0 };
    }
}

/// `m` best arms with mean `0.5 - gap`, the rest with mean 0.5.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapModel {
    arms: usize,
    gap: f64,
    best_arms: usize,
}

impl GapModel {
    pub fn new(arms: usize, gap: f64, best_arms: usize) -> Result<Self, EnvironmentError> {
        if arms < 2 {
            return Err(EnvironmentError::TooFewArms(arms));
        }
        if !(0.0..=0.5).contains(&gap) {
            return Err(EnvironmentError::GapOutOfRange(gap));
        }
        if best_arms < 1 || best_arms > arms - 1 {
            return Err(EnvironmentError::BestArmCount {
                got: best_arms,
                max: arms - 1,
            });
        }
        Ok(Self {
            arms,
            gap,
            best_arms,
        })
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn best_arms(&self) -> usize {
        self.best_arms
    }

    pub fn is_best(&self, arm: usize) -> bool {
        arm < self.best_arms
    }
}

/// I.i.d. Bernoulli losses.
#[derive(Debug, Clone)]
pub struct StochasticBernoulli {
    model: GapModel,
    means: Vec<f64>,
}

impl StochasticBernoulli {
    pub fn new(model: GapModel) -> Self {
        let means = (0..model.arms)
            .map(|i| {
                if model.is_best(i) {
                    0.5 - model.gap
                } else {
                    0.5
                }
            })
            .collect();
        Self { model, means }
    }

    pub fn model(&self) -> &GapModel {
        &self.model
    }
}

impl Environment for StochasticBernoulli {
    fn arm_count(&self) -> usize {
        self.model.arms
    }

    fn regime(&self) -> Regime {
        Regime::Stochastic
    }

    fn fill_expected(&self, _t: u64, out: &mut [f64]) {
        out.copy_from_slice(&self.means);
    }

    fn fill_losses(&self, _t: u64, rng: &mut SimRng, out: &mut [f64]) {
        fill_bernoulli(&self.means, rng, out);
    }
}

/// Phases of exponentially growing length: phase `i >= 1` covers rounds
/// `[ceil(g^i), ceil(g^(i+1)))`; rounds before `ceil(g)` are phase 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePlan {
    growth: f64,
    /// `starts[i - 1] = ceil(growth^i)`, deduplicated.
    starts: Vec<u64>,
}

impl PhasePlan {
    pub const DEFAULT_GROWTH: f64 = 1.6;

    pub fn new(growth: f64) -> Result<Self, EnvironmentError> {
        if !(growth.is_finite() && growth > 1.0) {
            return Err(EnvironmentError::PhaseGrowth(growth));
        }
        let mut starts = Vec::new();
        let mut i = 1;
        loop {
            let start = growth.powi(i);
            if start >= 1e18 {
                break;
            }
            starts.push(start.ceil() as u64);
            i += 1;
        }
        Ok(Self { growth, starts })
    }

    pub fn growth(&self) -> f64 {
        self.growth
    }

    /// First round of phases 1, 2, ...
    pub fn phase_starts(&self) -> &[u64] {
        &self.starts
    }

    pub fn phase_index(&self, t: u64) -> usize {
        // Number of phase starts at or before t; equal ceilings (only
        // possible for growth close to 1) collapse to the later phase.
        self.starts.partition_point(|&s| s <= t)
    }

    /// Even phases are the low-loss phase.
    pub fn is_low_phase(&self, t: u64) -> bool {
        self.phase_index(t).is_multiple_of(2)
    }
}

/// Stochastically constrained adversary alternating between a low phase
/// (best 0, others `gap`) and a high phase (best `1 - gap`, others 1).
#[derive(Debug, Clone)]
pub struct ConstrainedAdversarial {
    model: GapModel,
    plan: PhasePlan,
}

impl ConstrainedAdversarial {
    pub fn new(model: GapModel, plan: PhasePlan) -> Self {
        Self { model, plan }
    }

    pub fn plan(&self) -> &PhasePlan {
        &self.plan
    }
}

impl Environment for ConstrainedAdversarial {
    fn arm_count(&self) -> usize {
        self.model.arms
    }

    fn regime(&self) -> Regime {
        Regime::StochasticallyConstrained
    }

    fn fill_expected(&self, t: u64, out: &mut [f64]) {
        let (best, other) = if self.plan.is_low_phase(t) {
            (0.0, self.model.gap)
        } else {
            (1.0 - self.model.gap, 1.0)
        };
        for (i, o) in out.iter_mut().enumerate() {
            *o = if self.model.is_best(i) { best } else { other };
        }
    }

    fn fill_losses(&self, t: u64, rng: &mut SimRng, out: &mut [f64]) {
        self.fill_expected(t, out);
        for o in out.iter_mut() {
            *o = if rng.random::<f64>() < *o { 1.0 } else { 0.0 };
        }
    }
}

/// Arm 0 is perfect for the first `ceil(sqrt(K T ln(K T)))` rounds and
/// worst afterwards; every other arm mirrors it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipAdversary {
    arms: usize,
    horizon: u64,
    threshold: u64,
}

impl FlipAdversary {
    pub fn new(arms: usize, horizon: u64) -> Result<Self, EnvironmentError> {
        if arms < 2 {
            return Err(EnvironmentError::TooFewArms(arms));
        }
        if horizon == 0 {
            return Err(EnvironmentError::EmptyHorizon);
        }
        let kt = arms as f64 * horizon as f64;
        let threshold = (kt * kt.ln()).sqrt().ceil() as u64;
        Ok(Self {
            arms,
            horizon,
            threshold,
        })
    }

    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }
}

impl Environment for FlipAdversary {
    fn arm_count(&self) -> usize {
        self.arms
    }

    fn regime(&self) -> Regime {
        Regime::AdversarialDeterministic
    }

    fn fill_expected(&self, t: u64, out: &mut [f64]) {
        let first = if t <= self.threshold { 0.0 } else { 1.0 };
        out[0] = first;
        out[1..].fill(1.0 - first);
    }

    fn fill_losses(&self, t: u64, _rng: &mut SimRng, out: &mut [f64]) {
        self.fill_expected(t, out);
    }
}

/// Deterministic sequence where the zero-loss arm alternates between arms 0
/// and 1 every `period` rounds; the remaining arms always lose 1. The two
/// leading arms stay nearly tied, which keeps a learner switching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternatingAdversary {
    arms: usize,
    period: u64,
}

impl AlternatingAdversary {
    pub fn new(arms: usize, period: u64) -> Result<Self, EnvironmentError> {
        if arms < 2 {
            return Err(EnvironmentError::TooFewArms(arms));
        }
        if period == 0 {
            return Err(EnvironmentError::EmptyPeriod);
        }
        Ok(Self { arms, period })
    }
}

impl Environment for AlternatingAdversary {
    fn arm_count(&self) -> usize {
        self.arms
    }

    fn regime(&self) -> Regime {
        Regime::AdversarialDeterministic
    }

    fn fill_expected(&self, t: u64, out: &mut [f64]) {
        out.fill(1.0);
        let good = (((t - 1) / self.period) % 2) as usize;
        out[good] = 0.0;
    }

    fn fill_losses(&self, t: u64, _rng: &mut SimRng, out: &mut [f64]) {
        self.fill_expected(t, out);
    }
}

/// Switching-cost sequence `lambda_n`, indexed by block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSchedule {
    Fixed { lambda: f64 },
    Power { alpha: f64 },
}

impl CostSchedule {
    /// `lambda_n` for block `n >= 1`.
    pub fn cost_at(&self, n: u64) -> f64 {
        match *self {
            CostSchedule::Fixed { lambda } => lambda,
            CostSchedule::Power { alpha } => (n as f64).powf(alpha),
        }
    }

    /// `lambda_1, lambda_2, ...`
    pub fn stream(self) -> impl Iterator<Item = f64> + Send {
        (1u64..).map(move |n| self.cost_at(n))
    }
}

pub fn cost_at(schedule: &CostSchedule, n: u64) -> f64 {
    schedule.cost_at(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> SimRng {
        SimRng::seed_from_u64(99)
    }

    #[test]
    fn gap_model_validation() {
        assert!(GapModel::new(8, 0.2, 1).is_ok());
        assert!(GapModel::new(8, 0.2, 7).is_ok());
        assert_eq!(
            GapModel::new(8, 0.2, 8),
            Err(EnvironmentError::BestArmCount { got: 8, max: 7 })
        );
        assert!(GapModel::new(8, 0.2, 0).is_err());
        assert!(GapModel::new(8, 0.6, 1).is_err());
        assert!(GapModel::new(1, 0.1, 1).is_err());
    }

    #[test]
    fn stochastic_means() {
        let env = StochasticBernoulli::new(GapModel::new(8, 0.2, 1).unwrap());
        let mut expected = vec![0.3];
        expected.extend([0.5; 7]);
        assert_eq!(env.expected_loss_at(17), expected);

        let flat = StochasticBernoulli::new(GapModel::new(4, 0.0, 1).unwrap());
        assert_eq!(flat.expected_loss_at(1), vec![0.5; 4]);

        let multi = StochasticBernoulli::new(GapModel::new(8, 0.2, 3).unwrap());
        assert_eq!(&multi.expected_loss_at(1)[..4], &[0.3, 0.3, 0.3, 0.5]);
    }

    #[test]
    fn stochastic_empirical_mean() {
        let env = StochasticBernoulli::new(GapModel::new(8, 0.2, 1).unwrap());
        let mut r = rng();
        let mut out = vec![0.0; 8];
        let n = 1_000_000;
        let mut total = 0.0;
        for t in 1..=n {
            env.fill_losses(t, &mut r, &mut out);
            assert!(out.iter().all(|&x| x == 0.0 || x == 1.0));
            total += out[0];
        }
        assert!((total / n as f64 - 0.3).abs() <= 0.002);
    }

    #[test]
    fn phase_boundaries() {
        let plan = PhasePlan::new(1.6).unwrap();
        // ceil(1.6^i), i = 1..8, evaluated independently.
        assert_eq!(&plan.phase_starts()[..8], &[2, 3, 5, 7, 11, 17, 27, 43]);
        assert_eq!(plan.phase_index(1), 0);
        assert_eq!(plan.phase_index(2), 1);
        assert_eq!(plan.phase_index(16), 5);
        assert_eq!(plan.phase_index(17), 6);
        assert!(plan.is_low_phase(1));
        assert!(!plan.is_low_phase(2));
        assert!(PhasePlan::new(1.0).is_err());
    }

    #[test]
    fn constrained_gaps_are_constant() {
        let env = ConstrainedAdversarial::new(
            GapModel::new(8, 0.2, 1).unwrap(),
            PhasePlan::new(1.6).unwrap(),
        );
        let first = env.expected_loss_at(1);
        assert_eq!(first[0], 0.0);
        assert!((first[1] - 0.2).abs() < 1e-15);
        for t in 1..5000 {
            let e = env.expected_loss_at(t);
            for j in 1..8 {
                assert!((e[j] - e[0] - 0.2).abs() < 1e-12);
            }
        }
        let high = env.expected_loss_at(2);
        assert!((high[0] - 0.8).abs() < 1e-15);
        assert_eq!(high[1], 1.0);
    }

    #[test]
    fn constrained_empirical_means_track_expectation() {
        let env = ConstrainedAdversarial::new(
            GapModel::new(3, 0.3, 1).unwrap(),
            PhasePlan::new(1.6).unwrap(),
        );
        let mut r = rng();
        let mut out = vec![0.0; 3];
        let mut realized = [0.0; 3];
        let mut expected = [0.0; 3];
        for t in 1..=200_000 {
            env.fill_losses(t, &mut r, &mut out);
            let e = env.expected_loss_at(t);
            for i in 0..3 {
                realized[i] += out[i];
                expected[i] += e[i];
            }
        }
        for i in 0..3 {
            assert!((realized[i] - expected[i]).abs() / 200_000.0 < 0.005);
        }
    }

    #[test]
    fn flip_threshold_and_pattern() {
        let env = FlipAdversary::new(2, 100).unwrap();
        assert_eq!(env.threshold(), 33);
        assert_eq!(env.expected_loss_at(1), vec![0.0, 1.0]);
        assert_eq!(env.expected_loss_at(33), vec![0.0, 1.0]);
        assert_eq!(env.expected_loss_at(34), vec![1.0, 0.0]);
        assert_eq!(env.expected_loss_at(100), vec![1.0, 0.0]);

        let wide = FlipAdversary::new(8, 10_000).unwrap();
        assert_eq!(wide.threshold(), 951);
        assert_eq!(wide.expected_loss_at(1), {
            let mut v = vec![1.0; 8];
            v[0] = 0.0;
            v
        });
    }

    #[test]
    fn deterministic_environments_ignore_rng() {
        let env = FlipAdversary::new(4, 500).unwrap();
        let alt = AlternatingAdversary::new(4, 3).unwrap();
        let mut a = rng();
        let mut b = SimRng::seed_from_u64(12345);
        for t in 1..=500 {
            assert_eq!(env.loss_at(t, &mut a), env.loss_at(t, &mut b));
            assert_eq!(
                env.loss_at(t, &mut a).losses(),
                env.expected_loss_at(t).as_slice()
            );
            assert_eq!(alt.loss_at(t, &mut a), alt.loss_at(t, &mut b));
        }
    }

    #[test]
    fn alternating_pattern() {
        let env = AlternatingAdversary::new(3, 2).unwrap();
        assert_eq!(env.expected_loss_at(1), vec![0.0, 1.0, 1.0]);
        assert_eq!(env.expected_loss_at(2), vec![0.0, 1.0, 1.0]);
        assert_eq!(env.expected_loss_at(3), vec![1.0, 0.0, 1.0]);
        assert_eq!(env.expected_loss_at(5), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn cost_schedules() {
        let fixed = CostSchedule::Fixed { lambda: 1.0 };
        assert_eq!(cost_at(&fixed, 1), 1.0);
        assert_eq!(cost_at(&fixed, 1000), 1.0);
        assert_eq!(cost_at(&CostSchedule::Power { alpha: 1.0 }, 5), 5.0);
        assert!((cost_at(&CostSchedule::Power { alpha: 1.5 }, 4) - 8.0).abs() < 1e-12);
        let first: Vec<f64> = CostSchedule::Power { alpha: 1.0 }
            .stream()
            .take(3)
            .collect();
        assert_eq!(first, vec![1.0, 2.0, 3.0]);
    }
}
