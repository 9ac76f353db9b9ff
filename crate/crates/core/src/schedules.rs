//! Block lengths and learning rates.
//!
//! Two anytime families drive Tsallis-Switch: a fixed switching cost
//! `lambda`, and a cost sequence `lambda_n` revealed at the start of each
//! block. Both are lazy iterators of [`BlockSpec`]; the horizon only enters
//! through [`blocks_covering`], which the harness uses for bookkeeping.

use thiserror::Error;

use crate::environments::CostSchedule;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("cumulative cost a_n must be positive, got {0}")]
    NonPositiveAccumulator(f64),
}

/// One block: index `n` (1-based), its length in rounds, its learning rate
/// and the switching cost charged if play switches at its start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSpec {
    pub index: u64,
    pub length: u64,
    pub learning_rate: f64,
    pub switching_cost: f64,
}

/// `ceil` that ignores floating-point noise just above an integer.
pub(crate) fn ceil_tolerant(x: f64) -> f64 {
    (x - 1e-9 * x.abs().max(1.0)).ceil()
}

fn fixed_scale(n: u64, lambda: f64, arms: usize) -> f64 {
    1.5 * lambda * (n as f64 / arms as f64).sqrt()
}

/// `max{ceil(3 lambda / 2 * sqrt(n / K)), 1}`.
pub fn fixed_block_length(n: u64, lambda: f64, arms: usize) -> u64 {
    (ceil_tolerant(fixed_scale(n, lambda, arms)) as u64).max(1)
}

/// `2 / (a_n + 1) * sqrt(2 / n)` with the un-ceiled `a_n`.
pub fn fixed_learning_rate(n: u64, lambda: f64, arms: usize) -> f64 {
    2.0 / (fixed_scale(n, lambda, arms) + 1.0) * (2.0 / n as f64).sqrt()
}

/// `a_n = a_{n-1} + lambda_n + sqrt(K / n)`.
pub fn varying_accumulate(prev: f64, n: u64, lambda_n: f64, arms: usize) -> f64 {
    prev + lambda_n + (arms as f64 / n as f64).sqrt()
}

/// `(max{ceil(sqrt(lambda_n a_n / K)), 1}, 2 sqrt(2K) / (3 a_n))`.
pub fn varying_block_and_rate(
    _n: u64,
    lambda_n: f64,
    accumulated: f64,
    arms: usize,
) -> Result<(u64, f64), ScheduleError> {
    if accumulated.is_nan() || accumulated <= 0.0 {
        return Err(ScheduleError::NonPositiveAccumulator(accumulated));
    }
    let k = arms as f64;
    let length = (ceil_tolerant((lambda_n * accumulated / k).sqrt()) as u64).max(1);
    let eta = 2.0 * (2.0 * k).sqrt() / (3.0 * accumulated);
    Ok((length, eta))
}

/// Block length of the horizon-tuned block-EXP3 baseline,
/// `max{ceil(lambda^(2/3) T^(1/3) / K^(1/3)), 1}`.
pub fn exp3_block_length(lambda: f64, horizon: u64, arms: usize) -> u64 {
    let raw = lambda.powf(2.0 / 3.0) * (horizon as f64 / arms as f64).cbrt();
    (ceil_tolerant(raw) as u64).max(1)
}

/// Blocks for a fixed switching cost.
#[derive(Debug, Clone)]
pub struct FixedCostBlocks {
    lambda: f64,
    arms: usize,
    next: u64,
}

impl FixedCostBlocks {
    pub fn new(lambda: f64, arms: usize) -> Self {
        Self {
            lambda,
            arms,
            next: 1,
        }
    }
}

impl Iterator for FixedCostBlocks {
    type Item = BlockSpec;

    fn next(&mut self) -> Option<BlockSpec> {
        let n = self.next;
        self.next += 1;
        Some(BlockSpec {
            index: n,
            length: fixed_block_length(n, self.lambda, self.arms),
            learning_rate: fixed_learning_rate(n, self.lambda, self.arms),
            switching_cost: self.lambda,
        })
    }
}

/// Blocks for a switching-cost stream. Pulls exactly one cost per block,
/// when the block starts.
pub struct VaryingCostBlocks<S> {
    costs: S,
    arms: usize,
    next: u64,
    accumulated: f64,
}

impl<S: Iterator<Item = f64>> VaryingCostBlocks<S> {
    pub fn new(costs: S, arms: usize) -> Self {
        Self {
            costs,
            arms,
            next: 1,
            accumulated: 0.0,
        }
    }

    /// Current `a_n`.
    pub fn accumulated(&self) -> f64 {
        self.accumulated
    }
}

impl<S: Iterator<Item = f64>> Iterator for VaryingCostBlocks<S> {
    type Item = BlockSpec;

    fn next(&mut self) -> Option<BlockSpec> {
        let lambda_n = self.costs.next()?;
        let n = self.next;
        self.next += 1;
        self.accumulated = varying_accumulate(self.accumulated, n, lambda_n, self.arms);
        let (length, learning_rate) =
            varying_block_and_rate(n, lambda_n, self.accumulated, self.arms)
                .expect("a_n >= sqrt(K) > 0");
        Some(BlockSpec {
            index: n,
            length,
            learning_rate,
            switching_cost: lambda_n,
        })
    }
}

/// Unit blocks with `eta_t = 2 / sqrt(t)` (plain Tsallis-INF, losses in [0, 1]).
#[derive(Debug, Clone)]
pub struct UnitBlocks {
    next: u64,
}

impl UnitBlocks {
    pub fn new() -> Self {
        Self { next: 1 }
    }
}

impl Default for UnitBlocks {
    fn default() -> Self {
        Self::new()
    }
}

impl Iterator for UnitBlocks {
    type Item = BlockSpec;

    fn next(&mut self) -> Option<BlockSpec> {
        let n = self.next;
        self.next += 1;
        Some(BlockSpec {
            index: n,
            length: 1,
            learning_rate: 2.0 / (n as f64).sqrt(),
            switching_cost: 0.0,
        })
    }
}

/// The schedule families a Tsallis policy can run on.
pub enum TsallisSchedule {
    FixedCost(FixedCostBlocks),
    VaryingCost(VaryingCostBlocks<Box<dyn Iterator<Item = f64> + Send>>),
    Unit(UnitBlocks),
}

impl TsallisSchedule {
    pub fn fixed(lambda: f64, arms: usize) -> Self {
        Self::FixedCost(FixedCostBlocks::new(lambda, arms))
    }

    pub fn varying(costs: impl Iterator<Item = f64> + Send + 'static, arms: usize) -> Self {
        Self::VaryingCost(VaryingCostBlocks::new(Box::new(costs), arms))
    }

    /// Picks the family matching a cost schedule.
    pub fn for_cost(cost: &CostSchedule, arms: usize) -> Self {
        match *cost {
            CostSchedule::Fixed { lambda } => Self::fixed(lambda, arms),
            power @ CostSchedule::Power { .. } => Self::varying(power.stream(), arms),
        }
    }

    pub fn unit() -> Self {
        Self::Unit(UnitBlocks::new())
    }
}

impl Iterator for TsallisSchedule {
    type Item = BlockSpec;

    fn next(&mut self) -> Option<BlockSpec> {
        match self {
            Self::FixedCost(s) => s.next(),
            Self::VaryingCost(s) => s.next(),
            Self::Unit(s) => s.next(),
        }
    }
}

impl std::fmt::Debug for TsallisSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::FixedCost(s) => f.debug_tuple("FixedCost").field(s).finish(),
            Self::VaryingCost(s) => f
                .debug_struct("VaryingCost")
                .field("next", &s.next)
                .field("accumulated", &s.accumulated)
                .finish(),
            Self::Unit(s) => f.debug_tuple("Unit").field(s).finish(),
        }
    }
}

/// Takes the fewest blocks whose lengths reach `horizon` and truncates the
/// last one so the lengths sum to exactly `horizon`.
pub fn blocks_covering(horizon: u64, schedule: impl Iterator<Item = BlockSpec>) -> Vec<BlockSpec> {
    let mut out = Vec::new();
    let mut covered = 0u64;
    for mut block in schedule {
        if covered >= horizon {
            break;
        }
        let remaining = horizon - covered;
        block.length = block.length.min(remaining);
        covered += block.length;
        out.push(block);
    }
    out
}
