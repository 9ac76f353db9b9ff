//! Batched successive elimination (BaSE).
//!
//! The horizon is split by a grid `t_1 < ... < t_M = T`. Inside a batch the
//! active arms are played in contiguous runs, in index order, with rounds
//! shared as evenly as the batch length allows. At each grid point every
//! arm whose empirical mean loss exceeds the best by at least
//! `2 sqrt(gamma ln(T K) / pulls)` is eliminated for good.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::schedules::ceil_tolerant;
use crate::types::SimRng;

use super::{Policy, PolicyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Arithmetic,
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseParams {
    /// Number of batches `M`; `ceil(log2 T)` when absent.
    pub batches: Option<u64>,
    /// Elimination radius constant.
    pub gamma: f64,
}

impl Default for BaseParams {
    fn default() -> Self {
        Self {
            batches: None,
            gamma: 1.0,
        }
    }
}

/// Batch end times. Arithmetic: `ceil(j T / M)`; geometric: `ceil(T^(j/M))`
/// with duplicates dropped. The last point is always `T`.
pub fn grid_points(kind: GridKind, horizon: u64, batches: u64) -> Result<Vec<u64>, PolicyError> {
    if batches == 0 || batches > horizon {
        return Err(PolicyError::InvalidGrid { batches, horizon });
    }
    let mut points: Vec<u64> = (1..=batches)
        .map(|j| match kind {
            GridKind::Arithmetic => (j * horizon).div_ceil(batches),
            GridKind::Geometric => {
                let raw = (horizon as f64).powf(j as f64 / batches as f64);
                (ceil_tolerant(raw) as u64).clamp(1, horizon)
            }
        })
        .collect();
    points.dedup();
    *points.last_mut().expect("batches >= 1") = horizon;
    Ok(points)
}

/// Confidence radius `2 sqrt(gamma ln(T K) / pulls)`.
pub fn elimination_radius(gamma: f64, horizon: u64, arms: usize, pulls: u64) -> f64 {
    2.0 * (gamma * (horizon as f64 * arms as f64).ln() / pulls as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct Base {
    horizon: u64,
    gamma: f64,
    grid: Vec<u64>,
    batch: usize,
    active: Vec<bool>,
    pulls: Vec<u64>,
    loss_sums: Vec<f64>,
    runs: VecDeque<(usize, u64)>,
    arm: usize,
    round: u64,
}

impl Base {
    pub fn new(
        arms: usize,
        horizon: u64,
        kind: GridKind,
        params: BaseParams,
    ) -> Result<Self, PolicyError> {
        if arms < 2 {
            return Err(PolicyError::InvalidParameter(format!(
                "BaSE needs at least 2 arms, got {arms}"
            )));
        }
        if !(params.gamma.is_finite() && params.gamma > 0.0) {
            return Err(PolicyError::InvalidParameter(format!(
                "gamma must be positive, got {}",
                params.gamma
            )));
        }
        let batches = params.batches.unwrap_or_else(|| {
            let log = (horizon as f64).log2().ceil() as u64;
            log.max(2).min(horizon)
        });
        let grid = grid_points(kind, horizon, batches)?;
        let mut policy = Self {
            horizon,
            gamma: params.gamma,
            grid,
            batch: 0,
            active: vec![true; arms],
            pulls: vec![0; arms],
            loss_sums: vec![0.0; arms],
            runs: VecDeque::new(),
            arm: 0,
            round: 0,
        };
        policy.plan_batch(0);
        Ok(policy)
    }

    pub fn grid(&self) -> &[u64] {
        &self.grid
    }

    pub fn active_arms(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&i| self.active[i]).collect()
    }

    pub fn pulls(&self) -> &[u64] {
        &self.pulls
    }

    fn mean(&self, arm: usize) -> f64 {
        self.loss_sums[arm] / self.pulls[arm] as f64
    }

    /// Shares the batch between active arms: equal parts, with the leftover
    /// rounds going to the least-pulled arms.
    fn plan_batch(&mut self, start_after: u64) {
        self.runs.clear();
        let Some(&end) = self.grid.get(self.batch) else {
            return;
        };
        let length = end - start_after;
        let active = self.active_arms();
        let m = active.len() as u64;
        let mut counts: Vec<u64> = vec![length / m; active.len()];
        let mut by_pulls: Vec<usize> = (0..active.len()).collect();
        by_pulls.sort_by_key(|&j| (self.pulls[active[j]], active[j]));
        for &j in by_pulls.iter().take((length % m) as usize) {
            counts[j] += 1;
        }
        self.runs
            .extend(active.into_iter().zip(counts).filter(|&(_, c)| c > 0));
    }

    fn eliminate(&mut self) {
        let candidates: Vec<usize> = self
            .active_arms()
            .into_iter()
            .filter(|&i| self.pulls[i] > 0)
            .collect();
        let Some(&leader) = candidates
            .iter()
            .min_by(|&&a, &&b| self.mean(a).total_cmp(&self.mean(b)))
        else {
            return;
        };
        let best = self.mean(leader);
        let arms = self.active.len();
        for &i in &candidates {
            let radius = elimination_radius(self.gamma, self.horizon, arms, self.pulls[i]);
            if i != leader && self.mean(i) - best >= radius {
                self.active[i] = false;
            }
        }
        if !self.active.iter().any(|&a| a) {
            self.active[leader] = true;
        }
    }

    fn best_active(&self) -> usize {
        self.active_arms()
            .into_iter()
            .filter(|&i| self.pulls[i] > 0)
            .min_by(|&a, &b| self.mean(a).total_cmp(&self.mean(b)))
            .unwrap_or_else(|| self.active_arms()[0])
    }
}

impl Policy for Base {
    fn arm_count(&self) -> usize {
        self.active.len()
    }

    fn choose_arm(&mut self, t: u64, _rng: &mut SimRng) -> Result<usize, PolicyError> {
        self.round = t;
        self.arm = match self.runs.front_mut() {
            Some((arm, left)) => {
                let arm = *arm;
                *left -= 1;
                if *left == 0 {
                    self.runs.pop_front();
                }
                arm
            }
            // Past the last grid point.
            None => self.best_active(),
        };
        Ok(self.arm)
    }

    fn observe(&mut self, t: u64, arm: usize, loss: f64) -> Result<(), PolicyError> {
        debug_assert_eq!(arm, self.arm);
        self.pulls[arm] += 1;
        self.loss_sums[arm] += loss;
        if self.grid.get(self.batch) == Some(&t) {
            self.eliminate();
            self.batch += 1;
            self.plan_batch(t);
        }
        Ok(())
    }

    fn block_index(&self) -> u64 {
        self.round
    }
}
