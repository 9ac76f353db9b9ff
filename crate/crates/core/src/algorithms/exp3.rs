use crate::schedules::exp3_block_length;
use crate::types::{
    importance_weighted_estimate, sample_arm, LossEstimateVector, ProbabilityVector, SimRng,
};

use super::{Policy, PolicyError};

/// Anytime EXP3 rate `sqrt(ln K / (n K))`.
pub fn exp3_learning_rate(n: u64, arms: usize) -> f64 {
    let k = arms as f64;
    (k.ln() / (n as f64 * k)).sqrt()
}

/// Exponential weights `p_i ∝ exp(-eta (C_i - min C))`.
pub fn exp3_distribution(estimates: &[f64], eta: f64) -> ProbabilityVector {
    let min = estimates.iter().copied().fold(f64::INFINITY, f64::min);
    let mut weights: Vec<f64> = estimates
        .iter()
        .map(|&c| (-eta * (c - min)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    ProbabilityVector::new(weights).expect("softmax weights lie on the simplex")
}

/// EXP3 with a time-varying rate, optionally played over fixed-length blocks.
///
/// The blocked variant is tuned with the horizon: blocks have length
/// `L = exp3_block_length(lambda, T, K)` and block `n` uses
/// `eta_n = sqrt(ln K / (n K)) / L`, treating block losses as range `[0, L]`.
#[derive(Debug, Clone)]
pub struct Exp3 {
    estimates: LossEstimateVector,
    block_length: u64,
    block: u64,
    rounds_left: u64,
    block_loss: f64,
    arm: usize,
    probability: f64,
}

impl Exp3 {
    pub fn new(arms: usize) -> Self {
        Self::with_block_length(arms, 1)
    }

    pub fn blocked(arms: usize, lambda: f64, horizon: u64) -> Self {
        Self::with_block_length(arms, exp3_block_length(lambda, horizon, arms))
    }

    fn with_block_length(arms: usize, block_length: u64) -> Self {
        Self {
            estimates: LossEstimateVector::zeros(arms),
            block_length: block_length.max(1),
            block: 0,
            rounds_left: 0,
            block_loss: 0.0,
            arm: 0,
            probability: 1.0,
        }
    }

    pub fn block_length(&self) -> u64 {
        self.block_length
    }

    pub fn estimates(&self) -> &LossEstimateVector {
        &self.estimates
    }

    fn learning_rate(&self, n: u64) -> f64 {
        exp3_learning_rate(n, self.estimates.len()) / self.block_length as f64
    }

    fn close_block(&mut self) -> Result<(), PolicyError> {
        let estimate = importance_weighted_estimate(self.block_loss, self.probability, true)?;
        self.estimates.add(self.arm, estimate);
        self.block_loss = 0.0;
        self.rounds_left = 0;
        Ok(())
    }
}

impl Policy for Exp3 {
    fn arm_count(&self) -> usize {
        self.estimates.len()
    }

    fn choose_arm(&mut self, _t: u64, rng: &mut SimRng) -> Result<usize, PolicyError> {
        if self.rounds_left == 0 {
            self.block += 1;
            let p = exp3_distribution(self.estimates.as_slice(), self.learning_rate(self.block));
            self.arm = sample_arm(&p, rng);
            self.probability = p[self.arm];
            self.rounds_left = self.block_length;
        }
        self.rounds_left -= 1;
        Ok(self.arm)
    }

    fn observe(&mut self, _t: u64, arm: usize, loss: f64) -> Result<(), PolicyError> {
        debug_assert_eq!(arm, self.arm);
        self.block_loss += loss;
        if self.rounds_left == 0 {
            self.close_block()?;
        }
        Ok(())
    }

    fn block_index(&self) -> u64 {
        self.block
    }

    fn finish(&mut self) -> Result<(), PolicyError> {
        if self.rounds_left > 0 {
            self.close_block()?;
        }
        Ok(())
    }
}
