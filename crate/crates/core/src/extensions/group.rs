//! One strategic player among `n` partners, each honest with probability `pi`.
//!
//! A cooperator earns 1 if every partner cooperates and `-ell` otherwise.
//! With `S` the probability that all partners cooperate, the indifference
//! condition for the cutoff `t` is
//!
//! * `consistent`: `(1 + t) S - t = b S - m pi^n`, which at `n = 1` is the
//!   two-player condition (a defector earns `b` only against cooperators);
//! * `as-printed`: `(1 - t) S - t = b - m pi^n`.
//!
//! `S = sum_j C(n, j) pi^j ((1 - pi) q)^(n - j)` where `q` is the probability
//! that a strategic partner cooperates.

use serde::{Deserialize, Serialize};

use crate::curve::{uniform_grid, ThresholdCurve, DEFAULT_GRID};
use crate::dist::{check_belief_distribution, Distribution};
use crate::error::{Error, Result};
use crate::numerics::{adaptive_simpson, bisect, scan_roots};
use crate::params::GameParams;

/// Largest `n` for which binomial coefficients are formed exactly.
pub const EXACT_BINOMIAL_MAX: usize = 60;
const SCAN_CELLS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupVariant {
    #[default]
    Consistent,
    AsPrinted,
}

impl GroupVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            GroupVariant::Consistent => "consistent",
            GroupVariant::AsPrinted => "as-printed",
        }
    }
}

/// `sum_j C(n, j) a^j c^(n - j)` for `a, c >= 0`.
pub fn binomial_sum(n: usize, a: f64, c: f64) -> f64 {
    if n <= EXACT_BINOMIAL_MAX {
        let mut coeff: u128 = 1;
        let mut total = 0.0;
        for j in 0..=n {
            total += coeff as f64 * a.powi(j as i32) * c.powi((n - j) as i32);
            coeff = coeff * (n - j) as u128 / (j + 1) as u128;
        }
        return total;
    }
    let (la, lc) = (a.ln(), c.ln());
    let mut log_coeff = 0.0;
    let mut total = 0.0;
    for j in 0..=n {
        let term = match (j, n - j) {
            (0, _) if a == 0.0 => c.powi(n as i32),
            (_, 0) if c == 0.0 => a.powi(n as i32),
            _ if a == 0.0 || c == 0.0 => 0.0,
            _ => (log_coeff + j as f64 * la + (n - j) as f64 * lc).exp(),
        };
        total += term;
        log_coeff += (((n - j) as f64) / ((j + 1) as f64)).ln();
    }
    total
}

/// Probability that all `n` partners cooperate.
pub fn all_cooperate(n: usize, pi: f64, q: f64) -> f64 {
    binomial_sum(n, pi, (1.0 - pi) * q)
}

/// Cooperation minus defection payoff at loss `t` given `S`.
pub fn group_advantage(t: f64, s: f64, n: usize, pi: f64, params: &GameParams, variant: GroupVariant) -> f64 {
    let moral = params.m() * pi.powi(n as i32);
    match variant {
        GroupVariant::Consistent => (1.0 + t) * s - t - (params.b() * s - moral),
        GroupVariant::AsPrinted => (1.0 - t) * s - t - (params.b() - moral),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupRootKind {
    Interior,
    /// Defection is optimal even at zero loss.
    CornerZero,
    /// Cooperation is optimal at every loss.
    CornerUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRoot {
    pub threshold: f64,
    pub kind: GroupRootKind,
    /// Equation value at the returned threshold.
    pub residual: f64,
}

fn check_group(n: usize, pi: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("group size n must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&pi) {
        return Err(Error::Domain(format!("belief must lie in [0, 1) (got {pi})")));
    }
    Ok(())
}

/// Lowest symmetric cutoff under a common belief, or a corner when the
/// equation has no root in `[0, upper]`.
pub fn solve_group_common(
    n: usize,
    pi: f64,
    params: &GameParams,
    dist: &dyn Distribution,
    variant: GroupVariant,
    tol: f64,
) -> Result<GroupRoot> {
    check_group(n, pi)?;
    let upper = dist.upper();
    let h = |t: f64| group_advantage(t, all_cooperate(n, pi, dist.cdf(t)), n, pi, params, variant);
    let at_zero = h(0.0);
    if at_zero <= 0.0 {
        return Ok(GroupRoot {
            threshold: 0.0,
            kind: if at_zero == 0.0 { GroupRootKind::Interior } else { GroupRootKind::CornerZero },
            residual: at_zero,
        });
    }
    let grid = uniform_grid(0.0, upper, SCAN_CELLS + 1)?;
    let roots = scan_roots(h, &grid, 1e-15 * upper, tol)?;
    match roots.first() {
        Some(r) => Ok(GroupRoot {
            threshold: r.x,
            kind: GroupRootKind::Interior,
            residual: r.residual,
        }),
        None => Ok(GroupRoot {
            threshold: upper,
            kind: GroupRootKind::CornerUpper,
            residual: h(upper),
        }),
    }
}

/// Cutoff at belief `pi` when partners cooperate with probability `q`;
/// the equation is linear in `t` because `S` does not depend on it.
pub fn group_cutoff_given_q(
    n: usize,
    pi: f64,
    q: f64,
    params: &GameParams,
    upper: f64,
    variant: GroupVariant,
) -> f64 {
    let s = all_cooperate(n, pi, q);
    // advantage(t) = advantage(0) - slope * t with slope > 0 unless S = 1
    let a0 = group_advantage(0.0, s, n, pi, params, variant);
    let slope = a0 - group_advantage(1.0, s, n, pi, params, variant);
    if slope <= 0.0 {
        return if a0 >= 0.0 { upper } else { 0.0 };
    }
    (a0 / slope).clamp(0.0, upper)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDiverseSolution {
    /// `pi -> ell_n(pi)` on `[0, 1]`.
    pub curve: ThresholdCurve,
    /// Probability that a strategic partner cooperates.
    pub q: f64,
    pub iterations: usize,
    /// `|Phi(q) - q|` per outer step.
    pub residuals: Vec<f64>,
}

/// `int F(ell_n(pi; q)) dG(pi)`.
fn population_cooperation(
    n: usize,
    q: f64,
    params: &GameParams,
    loss: &dyn Distribution,
    belief: &dyn Distribution,
    variant: GroupVariant,
) -> f64 {
    let upper = loss.upper();
    adaptive_simpson(
        |pi| {
            let t = group_cutoff_given_q(n, pi.min(1.0 - 1e-15), q, params, upper, variant);
            loss.cdf(t) * belief.pdf(pi)
        },
        0.0,
        1.0,
        1e-13,
    )
    .clamp(0.0, 1.0)
}

/// Cutoff curve under privately drawn beliefs. Starts from `q = 0` and
/// iterates `q <- Phi(q)`, halving the step whenever the residual stalls;
/// falls back to bisection on `Phi(q) - q` if iteration does not settle.
pub fn solve_group_diverse(
    n: usize,
    params: &GameParams,
    loss: &dyn Distribution,
    belief: &dyn Distribution,
    variant: GroupVariant,
    tol: f64,
) -> Result<GroupDiverseSolution> {
    check_group(n, 0.0)?;
    check_belief_distribution(belief)?;
    let phi = |q: f64| population_cooperation(n, q, params, loss, belief, variant);
    let max_iter = 500;
    let mut q = 0.0;
    let mut lambda = 1.0;
    let mut residuals = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let next = phi(q);
        let r = (next - q).abs();
        if let Some(&prev) = residuals.last() {
            if r >= 0.999 * prev {
                lambda *= 0.5;
            }
        }
        residuals.push(r);
        if r <= tol {
            q = next;
            converged = true;
            break;
        }
        q += lambda * (next - q);
    }
    if !converged {
        let root = bisect(|q| phi(q) - q, 0.0, 1.0, tol, tol).map_err(|_| Error::NonConvergence {
            what: "group cooperation fixed point",
            iterations: max_iter,
            residual: residuals.last().copied().unwrap_or(f64::NAN),
        })?;
        q = root.x;
        residuals.push(root.residual.abs());
    }
    let upper = loss.upper();
    let curve = ThresholdCurve::tabulate((0.0, 1.0), DEFAULT_GRID, (0.0, upper), |pi| {
        group_cutoff_given_q(n, pi.min(1.0 - 1e-15), q, params, upper, variant)
    })?;
    Ok(GroupDiverseSolution {
        curve,
        q,
        iterations,
        residuals,
    })
}
