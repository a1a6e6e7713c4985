//! Equilibria when the two players hold different, commonly known beliefs.
//!
//! Player `i` believes the partner is honest with probability `pi_i` and
//! cooperates iff their loss is at most `ell_i`. An equilibrium is a fixed
//! point of the composed best responses `ell1 = BR1(BR2(ell1))`, which is
//! continuous on `[0, upper]` and is scanned for every crossing.

use serde::{Deserialize, Serialize};

use crate::common::{best_response_threshold, psi_belief_slope, psi_slope};
use crate::curve::uniform_grid;
use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::numerics::scan_roots;
use crate::params::GameParams;

const SCAN_CELLS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymmetricEquilibrium {
    pub pi1: f64,
    pub pi2: f64,
    pub ell1_hat: f64,
    pub ell2_hat: f64,
    /// `pi1 < (b - 1) / m` and the scan found a single intersection.
    pub unique: bool,
}

fn check_beliefs(pi1: f64, pi2: f64) -> Result<()> {
    for pi in [pi1, pi2] {
        if !(0.0..1.0).contains(&pi) {
            return Err(Error::Domain(format!("beliefs must lie in [0, 1) (got {pi})")));
        }
    }
    Ok(())
}

/// Every intersection of the two best-response curves, ordered by `ell1_hat`.
pub fn enumerate_asymmetric(
    pi1: f64,
    pi2: f64,
    params: &GameParams,
    dist: &dyn Distribution,
    tol: f64,
) -> Result<Vec<AsymmetricEquilibrium>> {
    check_beliefs(pi1, pi2)?;
    let upper = dist.upper();
    let br1 = |l2: f64| best_response_threshold(pi1, l2, params, dist);
    let br2 = |l1: f64| best_response_threshold(pi2, l1, params, dist);
    let gap = |l1: f64| match br2(l1).and_then(br1) {
        Ok(v) => v - l1,
        Err(_) => f64::NAN,
    };
    let grid = uniform_grid(0.0, upper, SCAN_CELLS + 1)?;
    let mut roots = scan_roots(gap, &grid, 1e-15 * upper, tol)?;
    roots.dedup_by(|a, b| (a.x - b.x).abs() <= 1e-9 * upper);
    let found: Vec<AsymmetricEquilibrium> = roots
        .iter()
        .map(|r| {
            let ell2 = br2(r.x)?;
            Ok(AsymmetricEquilibrium {
                pi1,
                pi2,
                ell1_hat: br1(ell2)?,
                ell2_hat: ell2,
                unique: false,
            })
        })
        .collect::<Result<_>>()?;
    let unique = pi1 < params.pi_low() && found.len() == 1;
    Ok(found.into_iter().map(|e| AsymmetricEquilibrium { unique, ..e }).collect())
}

/// The equilibrium with the lowest `ell1_hat`; `unique` reports whether it is the only one.
pub fn solve_asymmetric(
    pi1: f64,
    pi2: f64,
    params: &GameParams,
    dist: &dyn Distribution,
    tol: f64,
) -> Result<AsymmetricEquilibrium> {
    let all = enumerate_asymmetric(pi1, pi2, params, dist, tol)?;
    all.first().copied().ok_or_else(|| {
        Error::InvariantViolation(format!(
            "no intersection of best responses at pi1 = {pi1}, pi2 = {pi2}"
        ))
    })
}

/// Largest violation of `ell1 = BR1(ell2)`, `ell2 = BR2(ell1)`.
pub fn asymmetric_residual(
    eq: &AsymmetricEquilibrium,
    params: &GameParams,
    dist: &dyn Distribution,
) -> Result<f64> {
    let r1 = best_response_threshold(eq.pi1, eq.ell2_hat, params, dist)? - eq.ell1_hat;
    let r2 = best_response_threshold(eq.pi2, eq.ell1_hat, params, dist)? - eq.ell2_hat;
    Ok(r1.abs().max(r2.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymmetricSensitivity {
    /// Central difference of `ell1_hat` in `pi2`.
    pub d_ell1_d_pi2: f64,
    /// Implicit-function value `A C / (1 - A B)` with `A = psi_l(ell2; pi1)`,
    /// `B = psi_l(ell1; pi2)`, `C = psi_pi(ell1; pi2)`.
    pub implicit: f64,
    /// `pi1 < (b - 1) / m < pi2`, under which the derivative is negative.
    pub hypothesis_holds: bool,
}

fn interior(eq: &AsymmetricEquilibrium, upper: f64) -> bool {
    eq.ell1_hat > 0.0 && eq.ell1_hat < upper && eq.ell2_hat > 0.0 && eq.ell2_hat < upper
}

pub fn asymmetric_sensitivity(
    pi1: f64,
    pi2: f64,
    params: &GameParams,
    dist: &dyn Distribution,
    step: f64,
) -> Result<AsymmetricSensitivity> {
    if !(step > 0.0) || pi2 - step < 0.0 || pi2 + step >= 1.0 {
        return Err(Error::Domain(format!(
            "step {step} does not fit around pi2 = {pi2}"
        )));
    }
    let upper = dist.upper();
    let tol = 1e-14 * upper;
    let mid = solve_asymmetric(pi1, pi2, params, dist, tol)?;
    let lo = solve_asymmetric(pi1, pi2 - step, params, dist, tol)?;
    let hi = solve_asymmetric(pi1, pi2 + step, params, dist, tol)?;
    for eq in [&mid, &lo, &hi] {
        if !interior(eq, upper) {
            return Err(Error::CornerSolution(format!(
                "thresholds ({}, {}) at pi2 = {} touch the support boundary",
                eq.ell1_hat, eq.ell2_hat, eq.pi2
            )));
        }
    }
    let a = psi_slope(mid.ell2_hat, pi1, params, dist)?;
    let b = psi_slope(mid.ell1_hat, pi2, params, dist)?;
    let c = psi_belief_slope(mid.ell1_hat, pi2, params, dist)?;
    let pi_low = params.pi_low();
    Ok(AsymmetricSensitivity {
        d_ell1_d_pi2: (hi.ell1_hat - lo.ell1_hat) / (2.0 * step),
        implicit: a * c / (1.0 - a * b),
        hypothesis_holds: pi1 < pi_low && pi_low < pi2,
    })
}
