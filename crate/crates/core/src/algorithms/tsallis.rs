use crate::environments::CostSchedule;
use crate::ftrl::solve_step;
use crate::schedules::{BlockSpec, TsallisSchedule};
use crate::types::{
    importance_weighted_estimate, sample_arm, LossEstimateVector, ProbabilityVector, SimRng,
};

use super::{Policy, PolicyError};

/// Tsallis-INF run over blocks.
///
/// At each block start the FTRL distribution is computed from the
/// cumulative estimates, one arm is drawn and held for the whole block, and
/// the block's total loss on that arm is fed back importance-weighted. With
/// unit blocks and `eta_t = 2 / sqrt(t)` this is plain Tsallis-INF.
#[derive(Debug)]
pub struct TsallisSwitch {
    estimates: LossEstimateVector,
    schedule: TsallisSchedule,
    block: Option<BlockSpec>,
    rounds_left: u64,
    block_loss: f64,
    arm: usize,
    distribution: Option<ProbabilityVector>,
}

impl TsallisSwitch {
    pub fn with_schedule(arms: usize, schedule: TsallisSchedule) -> Self {
        Self {
            estimates: LossEstimateVector::zeros(arms),
            schedule,
            block: None,
            rounds_left: 0,
            block_loss: 0.0,
            arm: 0,
            distribution: None,
        }
    }

    /// Blocks and rates tuned for a fixed or growing switching cost.
    pub fn new(arms: usize, cost: &CostSchedule) -> Self {
        Self::with_schedule(arms, TsallisSchedule::for_cost(cost, arms))
    }

    /// Per-round Tsallis-INF with `eta_t = 2 / sqrt(t)`.
    pub fn tsallis_inf(arms: usize) -> Self {
        Self::with_schedule(arms, TsallisSchedule::unit())
    }

    pub fn estimates(&self) -> &LossEstimateVector {
        &self.estimates
    }

    pub fn current_block(&self) -> Option<&BlockSpec> {
        self.block.as_ref()
    }

    /// Distribution the current block's arm was drawn from.
    pub fn distribution(&self) -> Option<&ProbabilityVector> {
        self.distribution.as_ref()
    }

    fn start_block(&mut self, rng: &mut SimRng) -> Result<(), PolicyError> {
        let block = self.schedule.next().expect("block schedules are unbounded");
        let solution = solve_step(&self.estimates, block.learning_rate)?;
        self.arm = sample_arm(&solution.distribution, rng);
        self.distribution = Some(solution.distribution);
        self.rounds_left = block.length;
        self.block_loss = 0.0;
        self.block = Some(block);
        Ok(())
    }

    fn close_block(&mut self) -> Result<(), PolicyError> {
        let p = self
            .distribution
            .as_ref()
            .expect("a block is open")
            .weights()[self.arm];
        let estimate = importance_weighted_estimate(self.block_loss, p, true)?;
        self.estimates.add(self.arm, estimate);
        self.block_loss = 0.0;
        self.rounds_left = 0;
        Ok(())
    }
}

impl Policy for TsallisSwitch {
    fn arm_count(&self) -> usize {
        self.estimates.len()
    }

    fn choose_arm(&mut self, _t: u64, rng: &mut SimRng) -> Result<usize, PolicyError> {
        if self.rounds_left == 0 {
            self.start_block(rng)?;
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
        self.block.map_or(0, |b| b.index)
    }

    fn finish(&mut self) -> Result<(), PolicyError> {
        if self.rounds_left > 0 {
            self.close_block()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedules::fixed_block_length;
    use rand::SeedableRng;

    #[test]
    fn first_block_is_uniform() {
        let mut policy = TsallisSwitch::new(5, &CostSchedule::Fixed { lambda: 1.0 });
        let mut rng = SimRng::seed_from_u64(1);
        policy.choose_arm(1, &mut rng).unwrap();
        for &w in policy.distribution().unwrap().weights() {
            assert!((w - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_cost_is_per_round_with_importance_weight_two() {
        let mut policy = TsallisSwitch::new(2, &CostSchedule::Fixed { lambda: 0.0 });
        let mut rng = SimRng::seed_from_u64(2);
        let arm = policy.choose_arm(1, &mut rng).unwrap();
        assert_eq!(policy.current_block().unwrap().length, 1);
        policy.observe(1, arm, 1.0).unwrap();
        let mut expected = [0.0; 2];
        expected[arm] = 2.0;
        assert_eq!(policy.estimates().as_slice(), &expected);
    }

    #[test]
    fn arm_is_held_within_blocks() {
        let mut policy = TsallisSwitch::new(2, &CostSchedule::Fixed { lambda: 1.0 });
        let mut rng = SimRng::seed_from_u64(3);
        let mut t = 0;
        for n in 1..=40u64 {
            let expected_len = fixed_block_length(n, 1.0, 2);
            let mut arms = Vec::new();
            for _ in 0..expected_len {
                t += 1;
                let arm = policy.choose_arm(t, &mut rng).unwrap();
                assert_eq!(policy.block_index(), n);
                arms.push(arm);
                policy.observe(t, arm, 0.5).unwrap();
            }
            assert_eq!(policy.current_block().unwrap().length, expected_len);
            assert!(arms.iter().all(|&a| a == arms[0]));
        }
    }

    #[test]
    fn estimates_match_a_replay_of_the_blocks() {
        let mut policy = TsallisSwitch::new(3, &CostSchedule::Fixed { lambda: 2.0 });
        let mut rng = SimRng::seed_from_u64(4);
        let mut replay = [0.0; 3];
        let mut block_loss = 0.0;
        let mut last_block = 0;
        let mut p_played = 0.0;
        let mut played = 0;
        for t in 1..=500u64 {
            let arm = policy.choose_arm(t, &mut rng).unwrap();
            if policy.block_index() != last_block {
                if last_block != 0 {
                    replay[played] += block_loss / p_played;
                }
                last_block = policy.block_index();
                p_played = policy.distribution().unwrap()[arm];
                played = arm;
                block_loss = 0.0;
            }
            let loss = ((t * 7 + arm as u64 * 3) % 10) as f64 / 10.0;
            block_loss += loss;
            policy.observe(t, arm, loss).unwrap();
        }
        policy.finish().unwrap();
        replay[played] += block_loss / p_played;
        for (a, b) in policy.estimates().as_slice().iter().zip(replay) {
            assert!((a - b).abs() <= 1e-9 * b.max(1.0));
        }
    }

    #[test]
    fn tsallis_inf_rates() {
        let mut policy = TsallisSwitch::tsallis_inf(4);
        let mut rng = SimRng::seed_from_u64(5);
        for t in 1..=4 {
            let arm = policy.choose_arm(t, &mut rng).unwrap();
            policy.observe(t, arm, 0.0).unwrap();
        }
        assert_eq!(policy.current_block().unwrap().learning_rate, 1.0);
        assert_eq!(policy.block_index(), 4);
    }
}
