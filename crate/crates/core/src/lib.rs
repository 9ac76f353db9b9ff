//! Multi-armed bandits with switching costs.
//!
//! The library implements Tsallis-Switch (Tsallis-INF played over blocks of
//! growing length), the baselines it is usually compared against (Tsallis-INF,
//! EXP3, block EXP3 and batched successive elimination), the stochastic and
//! adversarial loss processes used to evaluate them, and a seeded harness that
//! records pseudo-regret, switches and switching-cost-inclusive regret.
//!
//! ```
//! use bandit_switch::environments::CostSchedule;
//! use bandit_switch::harness::{run_experiment, AlgorithmEntry, AlgorithmKind, EnvironmentSpec, ExperimentConfig};
//!
//! let config = ExperimentConfig::new(
//!     "demo",
//!     4,
//!     1_000,
//!     vec![AlgorithmEntry::new(AlgorithmKind::TsallisSwitch)],
//!     EnvironmentSpec::Stochastic { gap: 0.2, best_arms: 1 },
//!     CostSchedule::Fixed { lambda: 1.0 },
//!     2,
//!     42,
//! );
//! let out = run_experiment(&config, None).unwrap();
//! assert_eq!(out.aggregates[0].last().t, 1_000);
//! ```

pub mod algorithms;
pub mod cli;
pub mod config;
pub mod environments;
pub mod ftrl;
pub mod harness;
pub mod plot;
pub mod schedules;
pub mod trace_csv;
pub mod types;
