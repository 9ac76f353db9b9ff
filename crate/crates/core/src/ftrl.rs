//! Exact FTRL step with the 1/2-Tsallis regularizer.
//!
//! The play distribution minimizes
//! `<p, C> - sum_i (4 sqrt(p_i) - 2 p_i) / eta` over the simplex. Its
//! stationarity conditions give every coordinate as a function of one
//! Lagrange multiplier `nu`:
//!
//! ```text
//! p_i(nu) = (eta / 2 * (C_i - nu) + 1)^(-2),     nu <= min_i C_i
//! ```
//!
//! `sum_i p_i(nu)` is smooth, convex and strictly increasing on
//! `(-inf, min C]`, so the normalizer is found with Newton's method kept
//! inside a bisection bracket.

use thiserror::Error;

use crate::types::{CoreError, LossEstimateVector, ProbabilityVector};

/// Required `|sum(p) - 1|` at the returned multiplier.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Newton keeps refining below the required tolerance until it stalls.
const TARGET_RESIDUAL: f64 = 1e-14;

pub const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("learning rate must be positive and finite, got {0}")]
    InvalidLearningRate(f64),
    #[error("estimate at arm {arm} is not finite: {value}")]
    NonFiniteEstimate { arm: usize, value: f64 },
    #[error("normalizer did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("objective undefined at a boundary point (arm {0} has zero probability)")]
    BoundaryPoint(usize),
    #[error(
        "dimension mismatch: distribution has {distribution} arms, estimates have {estimates}"
    )]
    DimensionMismatch {
        distribution: usize,
        estimates: usize,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FtrlSolution {
    pub distribution: ProbabilityVector,
    /// Lagrange multiplier `nu`, in loss units.
    pub normalizer: f64,
    pub iterations: usize,
    /// `|sum_i p_i(nu) - 1|` before the final renormalization.
    pub residual: f64,
}

/// Coordinate map `p_i(nu)`.
#[inline]
pub fn coordinate(estimate: f64, normalizer: f64, eta: f64) -> f64 {
    let x = 0.5 * eta * (estimate - normalizer) + 1.0;
    1.0 / (x * x)
}

/// `sum_i p_i(nu)` and its derivative in `nu`.
fn mass_and_slope(estimates: &[f64], normalizer: f64, eta: f64) -> (f64, f64) {
    estimates.iter().fold((0.0, 0.0), |(mass, slope), &c| {
        let x = 0.5 * eta * (c - normalizer) + 1.0;
        let inv = 1.0 / x;
        let p = inv * inv;
        (mass + p, slope + eta * p * inv)
    })
}

/// Computes the FTRL distribution for cumulative estimates `C` and rate `eta`.
pub fn solve_step(estimates: &LossEstimateVector, eta: f64) -> Result<FtrlSolution, SolverError> {
    solve_slice(estimates.as_slice(), eta)
}

pub(crate) fn solve_slice(estimates: &[f64], eta: f64) -> Result<FtrlSolution, SolverError> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(SolverError::InvalidLearningRate(eta));
    }
    if estimates.len() < 2 {
        return Err(CoreError::TooFewArms(estimates.len()).into());
    }
    if let Some((arm, &value)) = estimates.iter().enumerate().find(|(_, c)| !c.is_finite()) {
        return Err(SolverError::NonFiniteEstimate { arm, value });
    }
    let min_c = estimates.iter().copied().fold(f64::INFINITY, f64::min);

    // At nu = min C the smallest-estimate arm alone has mass 1.
    let mut hi = min_c;
    // Start where the leading arm has probability 1/4.
    let mut nu = min_c - 2.0 / eta;
    let mut step = 2.0 / eta;
    let mut lo = nu;
    while mass_and_slope(estimates, lo, eta).0 >= 1.0 {
        step *= 2.0;
        lo = min_c - step;
    }

    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (mass, slope) = mass_and_slope(estimates, nu, eta);
        let f = mass - 1.0;
        residual = f.abs();
        if residual <= TARGET_RESIDUAL {
            break;
        }
        if f < 0.0 {
            lo = nu;
        } else {
            hi = nu;
        }
        let newton = nu - f / slope;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == nu {
            break;
        }
        nu = next;
    }
    if residual.is_nan() || residual > RESIDUAL_TOLERANCE {
        return Err(SolverError::NoConvergence {
            iterations,
            residual,
        });
    }

    let mut weights: Vec<f64> = estimates.iter().map(|&c| coordinate(c, nu, eta)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(FtrlSolution {
        distribution: ProbabilityVector::new(weights)?,
        normalizer: nu,
        iterations,
        residual,
    })
}

/// FTRL objective `<p, C> - sum_i (4 sqrt(p_i) - 2 p_i) / eta` at an interior point.
pub fn objective_value(
    p: &ProbabilityVector,
    estimates: &LossEstimateVector,
    eta: f64,
) -> Result<f64, SolverError> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(SolverError::InvalidLearningRate(eta));
    }
    if p.len() != estimates.len() {
        return Err(SolverError::DimensionMismatch {
            distribution: p.len(),
            estimates: estimates.len(),
        });
    }
    if let Some(arm) = p.weights().iter().position(|&w| w <= 0.0) {
        return Err(SolverError::BoundaryPoint(arm));
    }
    let linear: f64 = p
        .weights()
        .iter()
        .zip(estimates.as_slice())
        .map(|(w, c)| w * c)
        .sum();
    let regularizer: f64 = p.weights().iter().map(|&w| 4.0 * w.sqrt() - 2.0 * w).sum();
    Ok(linear - regularizer / eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn est(v: &[f64]) -> LossEstimateVector {
        LossEstimateVector::new(v.to_vec()).unwrap()
    }

    /// Plain bisection on the normalizer, independent of the Newton path.
    fn bisection_oracle(c: &[f64], eta: f64) -> Vec<f64> {
        let min_c = c.iter().copied().fold(f64::INFINITY, f64::min);
        let mass = |nu: f64| -> f64 {
            c.iter()
                .map(|&ci| (eta / 2.0 * (ci - nu) + 1.0).powi(-2))
                .sum()
        };
        let (mut lo, mut hi) = (min_c - 10.0 / eta - 10.0, min_c);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if mass(mid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let nu = 0.5 * (lo + hi);
        c.iter()
            .map(|&ci| (eta / 2.0 * (ci - nu) + 1.0).powi(-2))
            .collect()
    }

    #[test]
    fn zero_estimates_give_uniform_and_known_normalizer() {
        let sol = solve_step(&est(&[0.0; 4]), 1.0).unwrap();
        for &w in sol.distribution.weights() {
            assert!((w - 0.25).abs() < 1e-12);
        }
        assert!((sol.normalizer + 2.0).abs() < 1e-12);
    }

    #[test]
    fn shift_moves_only_the_normalizer() {
        let a = solve_step(&est(&[0.0, 5.0, 3.0]), 0.5).unwrap();
        let b = solve_step(&est(&[10.0, 15.0, 13.0]), 0.5).unwrap();
        for (x, y) in a
            .distribution
            .weights()
            .iter()
            .zip(b.distribution.weights())
        {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((b.normalizer - a.normalizer - 10.0).abs() < 1e-9);
    }

    #[test]
    fn two_arm_case_matches_bisection() {
        let c = [0.0, 4.0];
        let sol = solve_step(&est(&c), 1.0).unwrap();
        let oracle = bisection_oracle(&c, 1.0);
        for (x, y) in sol.distribution.weights().iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
        // Frozen from the oracle.
        assert!((sol.distribution[0] - 0.893_075_688_878_711_6).abs() < 1e-9);
        assert!((sol.normalizer + 0.116_342_054_542_984_5).abs() < 1e-9);
    }

    #[test]
    fn coordinates_reproduce_from_normalizer() {
        let c = [3.0, 0.5, 7.25, 1.0, 0.0];
        let eta = 0.8;
        let sol = solve_step(&est(&c), eta).unwrap();
        assert!(sol.residual <= RESIDUAL_TOLERANCE);
        assert!(sol.normalizer <= 0.0);
        for (i, &ci) in c.iter().enumerate() {
            let p = coordinate(ci, sol.normalizer, eta);
            assert!((p - sol.distribution[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(
            solve_step(&est(&[0.0, 0.0]), 0.0),
            Err(SolverError::InvalidLearningRate(0.0))
        );
        assert!(solve_step(&est(&[0.0, 0.0]), f64::NAN).is_err());
        assert!(matches!(
            solve_slice(&[0.0, f64::INFINITY], 1.0),
            Err(SolverError::NonFiniteEstimate { arm: 1, .. })
        ));
    }

    #[test]
    fn objective_direct_evaluation() {
        let p = ProbabilityVector::uniform(2).unwrap();
        let v = objective_value(&p, &est(&[0.0, 0.0]), 1.0).unwrap();
        assert!((v - (2.0 - 4.0 * 2.0 * 0.5f64.sqrt())).abs() < 1e-12);
        assert!((v + 3.656_854_249_5).abs() < 1e-9);
        let corner = ProbabilityVector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(
            objective_value(&corner, &est(&[0.0, 0.0]), 1.0),
            Err(SolverError::BoundaryPoint(1))
        );
    }

    #[test]
    fn solution_dominates_random_simplex_points() {
        use rand::{Rng, SeedableRng};
        let c = est(&[0.0, 4.0]);
        let sol = solve_step(&c, 1.0).unwrap();
        let best = objective_value(&sol.distribution, &c, 1.0).unwrap();
        let mut rng = crate::types::SimRng::seed_from_u64(11);
        for _ in 0..1000 {
            let u: f64 = rng.random_range(1e-9..1.0 - 1e-9);
            let q = ProbabilityVector::new(vec![u, 1.0 - u]).unwrap();
            assert!(best <= objective_value(&q, &c, 1.0).unwrap() + 1e-12);
        }
    }

    #[test]
    fn large_scale_estimates_converge() {
        let c = [0.0, 5000.0, 4999.0, 12.0, 3.0];
        let sol = solve_slice(&c, 0.01).unwrap();
        assert!(sol.iterations < MAX_ITERATIONS);
        let oracle = bisection_oracle(&c, 0.01);
        for (x, y) in sol.distribution.weights().iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn stays_on_simplex_and_positive(
            c in proptest::collection::vec(0.0f64..500.0, 2..9),
            eta in 0.01f64..3.0,
        ) {
            let sol = solve_slice(&c, eta).unwrap();
            let sum: f64 = sol.distribution.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() <= RESIDUAL_TOLERANCE);
            prop_assert!(sol.distribution.weights().iter().all(|&w| w > 0.0));
            let min_c = c.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!(sol.normalizer <= min_c);
        }

        #[test]
        fn raising_an_estimate_never_raises_its_probability(
            c in proptest::collection::vec(0.0f64..100.0, 2..9),
            eta in 0.05f64..3.0,
            pick in 0usize..8,
            bump in 1e-3f64..50.0,
        ) {
            let j = pick % c.len();
            let before = solve_slice(&c, eta).unwrap();
            let mut raised = c.clone();
            raised[j] += bump;
            let after = solve_slice(&raised, eta).unwrap();
            prop_assert!(after.distribution[j] <= before.distribution[j] + 1e-12);
        }

        #[test]
        fn shift_invariance(
            c in proptest::collection::vec(0.0f64..100.0, 2..9),
            eta in 0.05f64..3.0,
            shift in 0.0f64..1000.0,
        ) {
            let base = solve_slice(&c, eta).unwrap();
            let moved: Vec<f64> = c.iter().map(|x| x + shift).collect();
            let shifted = solve_slice(&moved, eta).unwrap();
            for (x, y) in base.distribution.weights().iter().zip(shifted.distribution.weights()) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
    }
}
