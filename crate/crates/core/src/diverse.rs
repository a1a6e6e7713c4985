//! Equilibrium when each player privately draws a belief from `G`.
//!
//! A strategic player cooperates iff their belief is at least `pi_d(ell)`.
//! Given the partner's cooperation probability `p`, indifference gives
//! `pi_d(ell) = 1 - k / (m + (ell - (b - 1)) * (1 - p))` with `k = 1 + m - b`,
//! so the operator `T` acts on a curve only through the scalar
//! `I = int G(s(ell)) dF(ell) = 1 - p`.

use serde::{Deserialize, Serialize};

use crate::curve::{ThresholdCurve, DEFAULT_GRID};
use crate::dist::{check_belief_distribution, Distribution};
use crate::error::{Error, Result};
use crate::numerics::{bisect, simpson};
use crate::params::{check_probability, GameParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiverseConfig {
    pub grid_n: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DiverseConfig {
    fn default() -> Self {
        Self {
            grid_n: DEFAULT_GRID,
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// Converged belief threshold `pi_d(ell)` and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiverseSolution {
    pub threshold: ThresholdCurve,
    /// Probability that a strategic player cooperates.
    pub coop_prob: f64,
    pub iterations: usize,
    /// Sup-norm of the last update `|T(s) - s|`.
    pub residual: f64,
    /// `k * |G|_inf * |F|_inf / m^2`, with cdf sup-norms equal to 1.
    pub contraction_gamma: f64,
    /// Ratios of successive update norms.
    pub step_ratios: Vec<f64>,
    /// Some ratio after the first exceeded `contraction_gamma`.
    pub gamma_bound_exceeded: bool,
    /// Relaxation was used; uniqueness is then not certified by the bound.
    pub damped: bool,
    /// False only when nobody defects (`I = 0`) and the curve is flat.
    pub strictly_increasing: bool,
}

/// Contraction constant of `T` for cdfs `F`, `G`.
pub fn contraction_gamma(params: &GameParams) -> f64 {
    params.net_moral_cost() / (params.m() * params.m())
}

/// Belief above which cooperating is optimal for a player with loss `ell`
/// whose partner cooperates with probability `p`.
pub fn belief_best_response(ell: f64, p: f64, params: &GameParams) -> Result<f64> {
    check_probability(p)?;
    if ell < 0.0 {
        return Err(Error::Domain(format!("loss must be nonnegative (got {ell})")));
    }
    let x = (1.0 - p) * ell + p * (params.b() - 1.0);
    Ok(x / (params.net_moral_cost() + x))
}

fn check_curve(curve: &ThresholdCurve, dist: &dyn Distribution) -> Result<()> {
    let (a, b) = curve.domain();
    let upper = dist.upper();
    if a != 0.0 || (b - upper).abs() > 1e-12 * upper {
        return Err(Error::Domain(format!(
            "curve domain [{a}, {b}] must match the loss support [0, {upper}]"
        )));
    }
    let (lo, hi) = curve.codomain();
    if lo < 0.0 || hi > 1.0 {
        return Err(Error::Domain(format!(
            "belief curve codomain [{lo}, {hi}] must lie in [0, 1]"
        )));
    }
    Ok(())
}

/// `int G(curve(ell)) dF(ell)`: Simpson in the variable `u = F(ell)` on
/// the curve's own knots.
fn defection_mass(
    curve: &ThresholdCurve,
    loss: &dyn Distribution,
    belief: &dyn Distribution,
) -> f64 {
    let us: Vec<f64> = curve.knots().iter().map(|&l| loss.cdf(l)).collect();
    let ys: Vec<f64> = curve.values().iter().map(|&v| belief.cdf(v)).collect();
    simpson(&us, &ys).clamp(0.0, 1.0)
}

/// `1 - int G(curve(ell)) dF(ell)`.
pub fn cooperation_prob_given_strategy(
    curve: &ThresholdCurve,
    loss: &dyn Distribution,
    belief: &dyn Distribution,
) -> Result<f64> {
    check_curve(curve, loss)?;
    check_belief_distribution(belief)?;
    Ok(1.0 - defection_mass(curve, loss, belief))
}

fn image(knots: &[f64], i_mass: f64, params: &GameParams) -> Result<Vec<f64>> {
    let (k, m, bm1) = (params.net_moral_cost(), params.m(), params.b() - 1.0);
    knots
        .iter()
        .map(|&l| {
            let den = m + (l - bm1) * i_mass;
            if den <= 0.0 {
                return Err(Error::InvariantViolation(format!(
                    "T denominator {den:e} <= 0 at loss {l}"
                )));
            }
            let v = 1.0 - k / den;
            if !(-1e-15..1.0).contains(&v) {
                return Err(Error::InvariantViolation(format!(
                    "T produced belief {v} outside [0, 1) at loss {l}"
                )));
            }
            Ok(v.max(0.0))
        })
        .collect()
}

/// The best-response operator on belief-threshold curves.
pub fn apply_t(
    curve: &ThresholdCurve,
    params: &GameParams,
    loss: &dyn Distribution,
    belief: &dyn Distribution,
) -> Result<ThresholdCurve> {
    check_curve(curve, loss)?;
    check_belief_distribution(belief)?;
    let i_mass = defection_mass(curve, loss, belief);
    ThresholdCurve::new(
        curve.knots().to_vec(),
        image(curve.knots(), i_mass, params)?,
        (0.0, 1.0),
    )
}

/// Fixed point of [`apply_t`] with the default grid.
pub fn solve_diverse_threshold(
    params: &GameParams,
    loss: &dyn Distribution,
    belief: &dyn Distribution,
    tol: f64,
    max_iter: usize,
) -> Result<DiverseSolution> {
    let config = DiverseConfig {
        tol,
        max_iter,
        ..DiverseConfig::default()
    };
    solve_diverse_threshold_with(params, loss, belief, &config)
}

/// Iterates `T` from the constant curve `(b - 1) / m`.
///
/// Relaxation `s <- (1 - lambda) s + lambda T(s)` starts at `lambda = 1`
/// (or 1/2 when the contraction bound is not below 1) and halves whenever
/// the update norm stops shrinking.
pub fn solve_diverse_threshold_with(
    params: &GameParams,
    loss: &dyn Distribution,
    belief: &dyn Distribution,
    config: &DiverseConfig,
) -> Result<DiverseSolution> {
    check_belief_distribution(belief)?;
    if !(config.tol > 0.0) || config.max_iter == 0 {
        return Err(Error::Domain("tolerance and iteration cap must be positive".into()));
    }
    let gamma = contraction_gamma(params);
    let start = params.pi_low();
    let mut s =
        ThresholdCurve::tabulate((0.0, loss.upper()), config.grid_n, (0.0, 1.0), |_| start)?;

    let mut lambda: f64 = if gamma >= 1.0 { 0.5 } else { 1.0 };
    let mut damped = lambda < 1.0;
    let mut ratios = Vec::new();
    let mut prev: Option<f64> = None;
    let mut stalls = 0;
    let mut residual = f64::INFINITY;
    for it in 1..=config.max_iter {
        let t = apply_t(&s, params, loss, belief)?;
        residual = sup_distance(t.values(), s.values());
        if let Some(p) = prev {
            if p > 0.0 {
                ratios.push(residual / p);
            }
            if residual >= 0.999 * p {
                stalls += 1;
                if stalls >= 2 && lambda > 1e-6 {
                    lambda *= 0.5;
                    damped = true;
                    stalls = 0;
                }
            } else {
                stalls = 0;
            }
        }
        if residual <= config.tol {
            let gamma_bound_exceeded = !damped && ratios.iter().any(|&r| r > gamma + 1e-9);
            let coop_prob = cooperation_prob_given_strategy(&t, loss, belief)?;
            if !t.is_monotone() {
                return Err(Error::InvariantViolation(
                    "converged belief threshold decreases in the loss".into(),
                ));
            }
            return Ok(DiverseSolution {
                strictly_increasing: t.is_strictly_increasing(),
                threshold: t,
                coop_prob,
                iterations: it,
                residual,
                contraction_gamma: gamma,
                step_ratios: ratios,
                gamma_bound_exceeded,
                damped,
            });
        }
        prev = Some(residual);
        s = if lambda < 1.0 {
            let mixed = s
                .values()
                .iter()
                .zip(t.values())
                .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
                .collect();
            ThresholdCurve::new(s.knots().to_vec(), mixed, (0.0, 1.0))?
        } else {
            t
        };
    }
    Err(Error::NonConvergence {
        what: "diverse threshold iteration",
        iterations: config.max_iter,
        residual,
    })
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaBetaMode {
    Exact,
    #[default]
    Approximate,
}

/// Coefficients of the uniform-case threshold `pi_d(ell) = 1 - k / (alpha + beta * ell)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaBeta {
    pub alpha: f64,
    pub beta: f64,
    pub mode: AlphaBetaMode,
}

impl AlphaBeta {
    /// Belief below which every strategic player defects: `1 - k / alpha`.
    pub fn lower_kink(&self, params: &GameParams) -> f64 {
        1.0 - params.net_moral_cost() / self.alpha
    }

    /// Belief above which every strategic player cooperates: `1 - k / (alpha + beta)`.
    pub fn upper_kink(&self, params: &GameParams) -> f64 {
        1.0 - params.net_moral_cost() / (self.alpha + self.beta)
    }

    /// Residuals of the defining system for this pair's mode.
    pub fn residuals(&self, params: &GameParams) -> (f64, f64) {
        let (k, bm1) = (params.net_moral_cost(), params.b() - 1.0);
        let (a, b) = (self.alpha, self.beta);
        match self.mode {
            AlphaBetaMode::Approximate => (a - k * (1.0 + bm1 / a), b - (1.0 - k / a)),
            AlphaBetaMode::Exact => {
                let l = (b / a).ln_1p();
                (a - k * (1.0 + bm1 / b * l), b - (1.0 - k / b * l))
            }
        }
    }
}

/// `sqrt(1 + 4 (b - 1) / k)`.
pub fn gamma_aux(params: &GameParams) -> f64 {
    (1.0 + 4.0 * (params.b() - 1.0) / params.net_moral_cost()).sqrt()
}

/// Solves for `(alpha, beta)` with uniform losses and beliefs on `[0, 1]`.
///
/// The exact system reduces to `alpha = m - (b - 1) beta` and a scalar
/// equation in `beta`, solved by Newton from the approximate pair with a
/// bisection safeguard.
pub fn solve_alpha_beta(params: &GameParams, mode: AlphaBetaMode) -> Result<AlphaBeta> {
    let k = params.net_moral_cost();
    let g = gamma_aux(params);
    let approx = AlphaBeta {
        alpha: 0.5 * k * (1.0 + g),
        beta: (g - 1.0) / (g + 1.0),
        mode: AlphaBetaMode::Approximate,
    };
    if mode == AlphaBetaMode::Approximate {
        return Ok(approx);
    }
    let (m, bm1) = (params.m(), params.b() - 1.0);
    let h = |beta: f64| beta - 1.0 + k / beta * (beta / (m - bm1 * beta)).ln_1p();
    let dh = |beta: f64| {
        let a = m - bm1 * beta;
        let x = beta / a;
        1.0 - k / (beta * beta) * x.ln_1p() + k / beta * (m / (a * a)) / (1.0 + x)
    };
    let (mut lo, mut hi) = (1e-12, 1.0);
    if !(h(lo) < 0.0 && h(hi) > 0.0) {
        return Err(Error::InvariantViolation(
            "exact beta equation is not bracketed on (0, 1)".into(),
        ));
    }
    let mut beta = approx.beta.clamp(1e-12, 1.0 - 1e-12);
    let mut converged = false;
    for _ in 0..100 {
        let v = h(beta);
        if v == 0.0 {
            converged = true;
            break;
        }
        if v < 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let mut next = beta - v / dh(beta);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - beta).abs() <= 1e-15 * beta.max(1e-300) || hi - lo <= 4.0 * f64::EPSILON * hi {
            beta = next;
            converged = true;
            break;
        }
        beta = next;
    }
    if !converged {
        beta = bisect(h, lo, hi, 1e-16, 1e-15)?.x;
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvariantViolation(format!("exact beta {beta} left (0, 1)")));
    }
    Ok(AlphaBeta {
        alpha: m - bm1 * beta,
        beta,
        mode: AlphaBetaMode::Exact,
    })
}

/// Uniform-case loss cutoff as a function of belief: the inverse of
/// `pi_d(ell) = 1 - k / (alpha + beta * ell)`, clamped to `[0, 1]`.
pub fn closed_form_diverse_uniform(pi: f64, params: &GameParams, ab: &AlphaBeta) -> Result<f64> {
    if !(0.0..1.0).contains(&pi) {
        return Err(Error::Domain(format!("belief must lie in [0, 1) (got {pi})")));
    }
    let middle = (params.net_moral_cost() / (1.0 - pi) - ab.alpha) / ab.beta;
    Ok(middle.clamp(0.0, 1.0))
}

/// `d ell_d / d pi` on the middle branch.
pub fn closed_form_diverse_uniform_slope(pi: f64, params: &GameParams, ab: &AlphaBeta) -> f64 {
    params.net_moral_cost() / (ab.beta * (1.0 - pi) * (1.0 - pi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{Power, Tabulated, Uniform};
    use crate::numerics::adaptive_simpson;
    use crate::params::validate_params;

    fn unit() -> Uniform {
        Uniform::unit()
    }

    fn constant(c: f64) -> ThresholdCurve {
        ThresholdCurve::tabulate((0.0, 1.0), 101, (0.0, 1.0), |_| c).unwrap()
    }

    /// Scalar fixed point `I = int G(1 - k/(m + (l - (b-1)) I)) f(l) dl` by bisection.
    fn scalar_oracle(params: &GameParams, f: &dyn Distribution, g: &dyn Distribution) -> f64 {
        let (k, m, bm1) = (params.net_moral_cost(), params.m(), params.b() - 1.0);
        let phi = |i: f64| {
            adaptive_simpson(
                |l| g.cdf(1.0 - k / (m + (l - bm1) * i)) * f.pdf(l),
                0.0,
                f.upper(),
                1e-14,
            )
        };
        bisect(|i| phi(i) - i, 0.0, 1.0, 1e-15, 1e-14).unwrap().x
    }

    #[test]
    fn operator_on_trivial_curves() {
        let params = validate_params(2.0, 8.0).unwrap();
        let all_defect = apply_t(&constant(1.0), &params, &unit(), &unit()).unwrap();
        for (&l, &v) in all_defect.knots().iter().zip(all_defect.values()) {
            assert!((v - (1.0 - 7.0 / (8.0 + l - 1.0))).abs() < 1e-14);
        }
        let all_coop = apply_t(&constant(0.0), &params, &unit(), &unit()).unwrap();
        assert!(all_coop.values().iter().all(|&v| (v - 0.125).abs() < 1e-15));
    }

    #[test]
    fn operator_on_identity_curve() {
        let params = validate_params(2.0, 8.0).unwrap();
        let id = ThresholdCurve::tabulate((0.0, 1.0), 1001, (0.0, 1.0), |l| l).unwrap();
        let p = cooperation_prob_given_strategy(&id, &unit(), &unit()).unwrap();
        assert!((p - 0.5).abs() < 1e-10);
        let t = apply_t(&id, &params, &unit(), &unit()).unwrap();
        for (&l, &v) in t.knots().iter().zip(t.values()) {
            assert!((v - (1.0 - 7.0 / (8.0 + (l - 1.0) / 2.0))).abs() < 1e-10);
        }
    }

    #[test]
    fn cooperation_probability_extremes() {
        assert_eq!(cooperation_prob_given_strategy(&constant(1.0), &unit(), &unit()).unwrap(), 0.0);
        assert_eq!(cooperation_prob_given_strategy(&constant(0.0), &unit(), &unit()).unwrap(), 1.0);
        let wrong = ThresholdCurve::tabulate((0.0, 2.0), 11, (0.0, 1.0), |_| 0.5).unwrap();
        assert!(cooperation_prob_given_strategy(&wrong, &unit(), &unit()).is_err());
    }

    #[test]
    fn uniform_fixed_point_contracts() {
        let params = validate_params(2.0, 8.0).unwrap();
        let sol = solve_diverse_threshold(&params, &unit(), &unit(), 1e-10, 10_000).unwrap();
        assert!((sol.contraction_gamma - 7.0 / 64.0).abs() < 1e-15);
        assert!(sol.residual <= 1e-10);
        assert!(!sol.damped && !sol.gamma_bound_exceeded && sol.strictly_increasing);
        assert!(sol.step_ratios.iter().all(|&r| r <= 7.0 / 64.0 + 1e-9), "{:?}", sol.step_ratios);
        let i = scalar_oracle(&params, &unit(), &unit());
        assert!((1.0 - sol.coop_prob - i).abs() < 1e-9);
        for (&l, &v) in sol.threshold.knots().iter().zip(sol.threshold.values()) {
            assert!((v - (1.0 - 7.0 / (8.0 + (l - 1.0) * i))).abs() < 1e-9);
        }
    }

    #[test]
    fn fixed_point_is_idempotent_under_t() {
        let params = validate_params(3.0, 12.0).unwrap();
        let f = Power::new(1.0, 2.0).unwrap();
        let g = Power::new(1.0, 0.7).unwrap();
        let sol = solve_diverse_threshold(&params, &f, &g, 1e-11, 10_000).unwrap();
        let again = apply_t(&sol.threshold, &params, &f, &g).unwrap();
        assert!(sup_distance(again.values(), sol.threshold.values()) <= 1e-11);
        let i = scalar_oracle(&params, &f, &g);
        assert!((1.0 - sol.coop_prob - i).abs() < 1e-6, "{} vs {i}", 1.0 - sol.coop_prob);
    }

    #[test]
    fn coop_prob_complements_defection_mass() {
        let params = validate_params(2.5, 10.0).unwrap();
        let f = Uniform::new(3.0).unwrap();
        let sol = solve_diverse_threshold(&params, &f, &unit(), 1e-10, 10_000).unwrap();
        let defect = adaptive_simpson(
            |l| sol.threshold.eval(l).unwrap() * f.pdf(l),
            0.0,
            3.0,
            1e-12,
        );
        assert!((sol.coop_prob + defect - 1.0).abs() < 1e-8);
    }

    #[test]
    fn steep_belief_distribution_matches_common_case() {
        let params = validate_params(2.0, 8.0).unwrap();
        let pi_bar = 0.06;
        let w = 1e-4;
        let g = Tabulated::new(
            vec![0.0, pi_bar - w, pi_bar + w, 1.0],
            vec![0.0, 1e-9, 1.0 - 1e-9, 1.0],
        )
        .unwrap();
        let config = DiverseConfig {
            grid_n: 20_001,
            ..DiverseConfig::default()
        };
        let sol = solve_diverse_threshold_with(&params, &unit(), &g, &config).unwrap();
        let ell_c = crate::common::closed_form_common_uniform(pi_bar, &params).unwrap();
        // everybody with loss below ell_c sits above the point mass
        let ell_d = sol.threshold.invert(pi_bar).unwrap();
        assert!((ell_d - ell_c).abs() < 2e-3, "{ell_d} vs {ell_c}");
        assert!((sol.coop_prob - ell_c).abs() < 2e-3);
    }

    #[test]
    fn belief_best_response_matches_operator() {
        let params = validate_params(2.0, 8.0).unwrap();
        for &(l, p) in &[(0.0, 0.3), (0.4, 0.9), (1.0, 0.0)] {
            let v = belief_best_response(l, p, &params).unwrap();
            assert!((v - (1.0 - 7.0 / (8.0 + (l - 1.0) * (1.0 - p)))).abs() < 1e-14);
            let adv = crate::payoff::cooperation_advantage(l, v, p, &params).unwrap();
            assert!(adv.abs() < 1e-13);
        }
    }

    #[test]
    fn approximate_pair_solves_its_system() {
        let params = validate_params(2.0, 8.0).unwrap();
        let ab = solve_alpha_beta(&params, AlphaBetaMode::Approximate).unwrap();
        let s = (11.0f64 / 7.0).sqrt();
        assert!((ab.alpha - 3.5 * (1.0 + s)).abs() < 1e-13);
        assert!((ab.beta - (s - 1.0) / (s + 1.0)).abs() < 1e-15);
        let (ra, rb) = ab.residuals(&params);
        assert!(ra.abs() < 1e-9 && rb.abs() < 1e-9);
        // lower kink coincides with beta for the approximate pair
        assert!((ab.lower_kink(&params) - ab.beta).abs() < 1e-14);
    }

    #[test]
    fn exact_pair_matches_converged_curve() {
        let params = validate_params(2.0, 8.0).unwrap();
        let ab = solve_alpha_beta(&params, AlphaBetaMode::Exact).unwrap();
        let (ra, rb) = ab.residuals(&params);
        assert!(ra.abs() < 1e-12 && rb.abs() < 1e-12);
        let sol = solve_diverse_threshold(&params, &unit(), &unit(), 1e-12, 10_000).unwrap();
        let mean = simpson(sol.threshold.knots(), sol.threshold.values());
        assert!((mean - ab.beta).abs() < 2e-3);
        assert!((sol.threshold.values()[0] - ab.lower_kink(&params)).abs() < 1e-9);
        let closed = closed_form_diverse_uniform(0.12, &params, &ab).unwrap();
        assert!((sol.threshold.invert(0.12).unwrap() - closed).abs() < 1e-8);
    }

    #[test]
    fn exact_and_approximate_converge_for_large_moral_cost() {
        let mut last_gap = f64::INFINITY;
        for m in [1e2, 1e3, 1e4] {
            let params = validate_params(2.0, m).unwrap();
            let e = solve_alpha_beta(&params, AlphaBetaMode::Exact).unwrap();
            let a = solve_alpha_beta(&params, AlphaBetaMode::Approximate).unwrap();
            assert!(a.beta < 0.1 / m.sqrt());
            let gap = (e.alpha / a.alpha - 1.0).abs();
            assert!(gap < last_gap);
            last_gap = gap;
        }
        assert!(last_gap < 1e-4);
    }

    #[test]
    fn closed_form_kinks() {
        let params = validate_params(2.0, 8.0).unwrap();
        let ab = solve_alpha_beta(&params, AlphaBetaMode::Approximate).unwrap();
        assert!(closed_form_diverse_uniform(ab.beta, &params, &ab).unwrap().abs() < 1e-12);
        let up = ab.upper_kink(&params);
        assert!((closed_form_diverse_uniform(up, &params, &ab).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(closed_form_diverse_uniform(0.01, &params, &ab).unwrap(), 0.0);
        assert_eq!(closed_form_diverse_uniform(0.9, &params, &ab).unwrap(), 1.0);
        let sol = solve_diverse_threshold(&params, &unit(), &unit(), 1e-10, 10_000).unwrap();
        let approx = closed_form_diverse_uniform(0.5, &params, &ab).unwrap();
        assert!((sol.threshold.invert(0.5).unwrap_or(1.0) - approx).abs() < 5e-2);
    }
}
