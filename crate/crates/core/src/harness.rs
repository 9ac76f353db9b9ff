//! Seeded experiment runner.
//!
//! A run plays one policy against one environment for `T` rounds and records
//! pseudo-regret, switch count and switching cost at a fixed set of
//! checkpoints. Repetitions are independent; repetition `r` of experiment
//! `e` draws its randomness from `(master_seed, e, r)`, so results do not
//! depend on how runs are scheduled across threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{Base, BaseParams, Exp3, GridKind, Policy, PolicyError, TsallisSwitch};
use crate::environments::{
    AlternatingAdversary, ConstrainedAdversarial, CostSchedule, Environment, EnvironmentError,
    FlipAdversary, GapModel, PhasePlan, Regime, StochasticBernoulli,
};
use crate::types::{stable_hash, RoundRecord, RunSeed, SwitchTracker};

pub const DEFAULT_CHECKPOINTS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
    #[error(
        "{algorithm} failed at round {round} (master seed {master_seed}, repetition {repetition}): {source}"
    )]
    Run {
        algorithm: String,
        master_seed: u64,
        repetition: u64,
        round: u64,
        source: PolicyError,
    },
    #[error("could not build thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlgorithmKind {
    TsallisSwitch,
    TsallisInf,
    Exp3,
    Exp3Blocks,
    Base { grid: GridKind, params: BaseParams },
}

impl AlgorithmKind {
    pub fn id(&self) -> &'static str {
        match self {
            Self::TsallisSwitch => "tsallis_switch",
            Self::TsallisInf => "tsallis_inf",
            Self::Exp3 => "exp3",
            Self::Exp3Blocks => "exp3_blocks",
            Self::Base {
                grid: GridKind::Arithmetic,
                ..
            } => "base_arith",
            Self::Base {
                grid: GridKind::Geometric,
                ..
            } => "base_geom",
        }
    }

    /// Builds a fresh policy. Only the horizon-tuned baselines see `horizon`.
    pub fn build(
        &self,
        arms: usize,
        horizon: u64,
        cost: &CostSchedule,
    ) -> Result<Box<dyn Policy>, PolicyError> {
        Ok(match self {
            Self::TsallisSwitch => Box::new(TsallisSwitch::new(arms, cost)),
            Self::TsallisInf => Box::new(TsallisSwitch::tsallis_inf(arms)),
            Self::Exp3 => Box::new(Exp3::new(arms)),
            Self::Exp3Blocks => {
                // The blocked baseline is tuned for one constant cost.
                let lambda = match *cost {
                    CostSchedule::Fixed { lambda } => lambda,
                    CostSchedule::Power { .. } => cost.cost_at(1),
                };
                Box::new(Exp3::blocked(arms, lambda, horizon))
            }
            Self::Base { grid, params } => Box::new(Base::new(arms, horizon, *grid, *params)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmEntry {
    pub kind: AlgorithmKind,
    /// Name in traces; defaults to the algorithm id.
    pub label: String,
}

impl AlgorithmEntry {
    pub fn new(kind: AlgorithmKind) -> Self {
        let label = kind.id().to_string();
        Self { kind, label }
    }

    pub fn labeled(kind: AlgorithmKind, label: impl Into<String>) -> Self {
        Self {
            kind,
            label: label.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvironmentSpec {
    Stochastic {
        gap: f64,
        best_arms: usize,
    },
    Constrained {
        gap: f64,
        best_arms: usize,
        growth: f64,
    },
    Flip,
    Alternating {
        period: u64,
    },
}

impl EnvironmentSpec {
    pub fn build(
        &self,
        arms: usize,
        horizon: u64,
    ) -> Result<Box<dyn Environment>, EnvironmentError> {
        Ok(match *self {
            Self::Stochastic { gap, best_arms } => Box::new(StochasticBernoulli::new(
                GapModel::new(arms, gap, best_arms)?,
            )),
            Self::Constrained {
                gap,
                best_arms,
                growth,
            } => Box::new(ConstrainedAdversarial::new(
                GapModel::new(arms, gap, best_arms)?,
                PhasePlan::new(growth)?,
            )),
            Self::Flip => Box::new(FlipAdversary::new(arms, horizon)?),
            Self::Alternating { period } => Box::new(AlternatingAdversary::new(arms, period)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub arms: usize,
    pub horizon: u64,
    pub algorithms: Vec<AlgorithmEntry>,
    pub environment: EnvironmentSpec,
    pub cost: CostSchedule,
    pub reps: usize,
    pub master_seed: u64,
    pub checkpoints: Vec<u64>,
}

impl ExperimentConfig {
    /// Config with log-spaced default checkpoints.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        arms: usize,
        horizon: u64,
        algorithms: Vec<AlgorithmEntry>,
        environment: EnvironmentSpec,
        cost: CostSchedule,
        reps: usize,
        master_seed: u64,
    ) -> Self {
        Self {
            name: name.into(),
            arms,
            horizon,
            algorithms,
            environment,
            cost,
            reps,
            master_seed,
            checkpoints: log_checkpoints(horizon, DEFAULT_CHECKPOINTS),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::InvalidConfig(msg));
        if self.arms < 2 {
            return bad(format!("K must be at least 2, got {}", self.arms));
        }
        if self.horizon == 0 {
            return bad("T must be at least 1".into());
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return bad("algorithms must not be empty".into());
        }
        if self.checkpoints.is_empty()
            || self.checkpoints.len() as u64 > self.horizon
            || self.checkpoints[0] == 0
            || !self.checkpoints.windows(2).all(|w| w[0] < w[1])
            || *self.checkpoints.last().unwrap() != self.horizon
        {
            return bad("checkpoints must increase strictly from >= 1 up to T".into());
        }
        match self.cost {
            CostSchedule::Fixed { lambda } if !(lambda.is_finite() && lambda >= 0.0) => {
                return bad(format!("lambda must be nonnegative, got {lambda}"));
            }
            CostSchedule::Power { alpha } if !(alpha.is_finite() && alpha > 0.0) => {
                return bad(format!("alpha must be positive, got {alpha}"));
            }
            _ => {}
        }
        self.environment.build(self.arms, self.horizon)?;
        Ok(())
    }

    pub fn run_seed(&self, repetition: usize) -> RunSeed {
        RunSeed {
            master: self.master_seed,
            experiment: stable_hash(&self.name),
            repetition: repetition as u64,
        }
    }
}

/// Up to `count` log-spaced rounds in `[1, T]`, strictly increasing and
/// ending at `T`.
pub fn log_checkpoints(horizon: u64, count: usize) -> Vec<u64> {
    if horizon == 0 || count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![horizon];
    }
    let log_t = (horizon as f64).ln();
    let mut points: Vec<u64> = (0..count)
        .map(|i| {
            let x = (log_t * i as f64 / (count - 1) as f64).exp().round() as u64;
            x.clamp(1, horizon)
        })
        .collect();
    points.dedup();
    *points.last_mut().unwrap() = horizon;
    points
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: u64,
    pub regret: f64,
    pub switches: u64,
    pub weighted_cost: f64,
    pub regret_with_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub algorithm: String,
    pub repetition: usize,
    pub checkpoints: Vec<Checkpoint>,
}

impl RunTrace {
    pub fn last(&self) -> &Checkpoint {
        self.checkpoints.last().expect("traces are never empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation, summed in the given order.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregatePoint {
    pub t: u64,
    pub regret: MeanStd,
    pub switches: MeanStd,
    pub weighted_cost: MeanStd,
    pub regret_with_cost: MeanStd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateTrace {
    pub algorithm: String,
    pub reps: usize,
    pub points: Vec<AggregatePoint>,
}

impl AggregateTrace {
    /// Aggregates traces of one algorithm sharing the same checkpoints.
    pub fn from_runs(algorithm: &str, runs: &[&RunTrace]) -> Self {
        let points = (0..runs[0].checkpoints.len())
            .map(|i| {
                let column = |f: &dyn Fn(&Checkpoint) -> f64| -> MeanStd {
                    MeanStd::of(
                        &runs
                            .iter()
                            .map(|r| f(&r.checkpoints[i]))
                            .collect::<Vec<_>>(),
                    )
                };
                AggregatePoint {
                    t: runs[0].checkpoints[i].t,
                    regret: column(&|c| c.regret),
                    switches: column(&|c| c.switches as f64),
                    weighted_cost: column(&|c| c.weighted_cost),
                    regret_with_cost: column(&|c| c.regret_with_cost),
                }
            })
            .collect();
        Self {
            algorithm: algorithm.to_string(),
            reps: runs.len(),
            points,
        }
    }

    pub fn last(&self) -> &AggregatePoint {
        self.points.last().expect("aggregates are never empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub name: String,
    /// Ordered by algorithm (config order), then repetition.
    pub runs: Vec<RunTrace>,
    /// One per algorithm, in config order.
    pub aggregates: Vec<AggregateTrace>,
}

impl ExperimentOutput {
    pub fn aggregate(&self, label: &str) -> Option<&AggregateTrace> {
        self.aggregates.iter().find(|a| a.algorithm == label)
    }

    pub fn runs_of<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a RunTrace> + 'a {
        self.runs.iter().filter(move |r| r.algorithm == label)
    }
}

/// Per-round gap `E[l_{t,J}] - min_i E[l_{t,i}]`.
pub fn pseudo_regret_increment(expected: &[f64], arm: usize) -> f64 {
    let best = expected.iter().copied().fold(f64::INFINITY, f64::min);
    expected[arm] - best
}

/// Sum of `lambda_n` over the blocks whose arm differs from the previous
/// block's; the first block always counts.
pub fn weighted_switch_cost(block_arms: &[usize], cost: &CostSchedule) -> f64 {
    let mut tracker = SwitchTracker::default();
    block_arms
        .iter()
        .enumerate()
        .filter(|&(_, &arm)| tracker.record(arm))
        .map(|(n, _)| cost.cost_at(n as u64 + 1))
        .sum()
}

/// Regret bookkeeping for one run.
struct Ledger {
    regime: Regime,
    cost: CostSchedule,
    expected: Vec<f64>,
    gap_regret: f64,
    learner_loss: f64,
    arm_losses: Vec<f64>,
    switches: u64,
    varying_cost: f64,
    tracker: SwitchTracker,
}

impl Ledger {
    fn new(arms: usize, regime: Regime, cost: CostSchedule) -> Self {
        Self {
            regime,
            cost,
            expected: vec![0.0; arms],
            gap_regret: 0.0,
            learner_loss: 0.0,
            arm_losses: vec![0.0; arms],
            switches: 0,
            varying_cost: 0.0,
            tracker: SwitchTracker::default(),
        }
    }

    /// Records round `t`; returns `(switched, cost_paid)`.
    fn record(&mut self, env: &dyn Environment, t: u64, arm: usize, block: u64) -> (bool, f64) {
        env.fill_expected(t, &mut self.expected);
        match self.regime {
            Regime::Stochastic | Regime::StochasticallyConstrained => {
                self.gap_regret += pseudo_regret_increment(&self.expected, arm);
            }
            Regime::AdversarialDeterministic => {
                self.learner_loss += self.expected[arm];
                for (acc, e) in self.arm_losses.iter_mut().zip(&self.expected) {
                    *acc += e;
                }
            }
        }
        let switched = self.tracker.record(arm);
        let mut paid = 0.0;
        if switched {
            self.switches += 1;
            paid = self.cost.cost_at(block.max(1));
            self.varying_cost += paid;
        }
        (switched, paid)
    }

    fn checkpoint(&self, t: u64) -> Checkpoint {
        let regret = match self.regime {
            Regime::AdversarialDeterministic => {
                let best = self
                    .arm_losses
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
                self.learner_loss - best
            }
            _ => self.gap_regret,
        };
        let weighted_cost = match self.cost {
            CostSchedule::Fixed { lambda } => lambda * self.switches as f64,
            CostSchedule::Power { .. } => self.varying_cost,
        };
        Checkpoint {
            t,
            regret,
            switches: self.switches,
            weighted_cost,
            regret_with_cost: regret + weighted_cost,
        }
    }
}

fn simulate(
    config: &ExperimentConfig,
    algorithm: usize,
    repetition: usize,
    mut on_round: impl FnMut(RoundRecord),
) -> Result<RunTrace, HarnessError> {
    let entry = &config.algorithms[algorithm];
    let seed = config.run_seed(repetition);
    let fail = |round: u64, source: PolicyError| HarnessError::Run {
        algorithm: entry.label.clone(),
        master_seed: config.master_seed,
        repetition: repetition as u64,
        round,
        source,
    };
    let env = config.environment.build(config.arms, config.horizon)?;
    let mut policy = entry
        .kind
        .build(config.arms, config.horizon, &config.cost)
        .map_err(|e| fail(0, e))?;
    let mut env_rng = seed.environment_rng();
    let mut policy_rng = seed.policy_rng();
    let mut ledger = Ledger::new(config.arms, env.regime(), config.cost);
    let mut losses = vec![0.0; config.arms];
    let mut checkpoints = Vec::with_capacity(config.checkpoints.len());
    let mut next_checkpoint = config.checkpoints.iter().peekable();

    for t in 1..=config.horizon {
        let arm = policy
            .choose_arm(t, &mut policy_rng)
            .map_err(|e| fail(t, e))?;
        env.fill_losses(t, &mut env_rng, &mut losses);
        policy
            .observe(t, arm, losses[arm])
            .map_err(|e| fail(t, e))?;
        let (switched, paid) = ledger.record(env.as_ref(), t, arm, policy.block_index());
        on_round(RoundRecord {
            round: t,
            arm,
            realized_loss: losses[arm],
            switched,
            switching_cost_paid: paid,
        });
        if next_checkpoint.peek() == Some(&&t) {
            next_checkpoint.next();
            checkpoints.push(ledger.checkpoint(t));
        }
    }
    policy.finish().map_err(|e| fail(config.horizon, e))?;
    Ok(RunTrace {
        algorithm: entry.label.clone(),
        repetition,
        checkpoints,
    })
}

/// Plays one repetition of one algorithm.
pub fn run_single(
    config: &ExperimentConfig,
    algorithm: usize,
    repetition: usize,
) -> Result<RunTrace, HarnessError> {
    simulate(config, algorithm, repetition, |_| {})
}

/// Like [`run_single`], also returning every round.
pub fn run_single_with_rounds(
    config: &ExperimentConfig,
    algorithm: usize,
    repetition: usize,
) -> Result<(RunTrace, Vec<RoundRecord>), HarnessError> {
    let mut rounds = Vec::with_capacity(config.horizon as usize);
    let trace = simulate(config, algorithm, repetition, |r| rounds.push(r))?;
    Ok((trace, rounds))
}

/// Runs every (algorithm, repetition) pair and aggregates per algorithm.
///
/// `threads` caps the worker count; `None` uses the global pool.
pub fn run_experiment(
    config: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<ExperimentOutput, HarnessError> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.algorithms.len())
        .flat_map(|a| (0..config.reps).map(move |r| (a, r)))
        .collect();
    let execute = || -> Result<Vec<RunTrace>, HarnessError> {
        jobs.par_iter()
            .map(|&(a, r)| run_single(config, a, r))
            .collect()
    };
    let runs = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| HarnessError::ThreadPool(e.to_string()))?
            .install(execute)?,
        None => execute()?,
    };
    let aggregates = config
        .algorithms
        .iter()
        .enumerate()
        .map(|(a, entry)| {
            let group: Vec<&RunTrace> = runs[a * config.reps..(a + 1) * config.reps]
                .iter()
                .collect();
            AggregateTrace::from_runs(&entry.label, &group)
        })
        .collect();
    Ok(ExperimentOutput {
        name: config.name.clone(),
        runs,
        aggregates,
    })
}
