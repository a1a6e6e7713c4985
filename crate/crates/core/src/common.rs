//! Symmetric equilibria when both players share a commonly known belief.
//!
//! A strategic player cooperates iff their loss is at most a cutoff. Given
//! the partner's cutoff, the indifferent loss is `psi`, so equilibria are
//! fixed points of the clamped best response. Below `(b - 1) / m` the best
//! response slopes down and the fixed point is unique; above it the map
//! slopes up, the full-cooperation corner sustains itself, and up to two
//! interior fixed points appear until they merge at the tangency belief.

use serde::{Deserialize, Serialize};

use crate::curve::uniform_grid;
use crate::dist::{hazard, Distribution};
use crate::error::{Error, Result};
use crate::numerics::{bisect, scan_roots};
use crate::params::{check_belief, odds, GameParams};

/// Cells in the root scan of `psi(l) - l`.
pub const SCAN_CELLS: usize = 2000;
/// Minimum separation, as a fraction of the support, for two interior roots
/// to count as distinct.
pub const MIN_SEPARATION: f64 = 1e-4;
/// Central-difference step, as a fraction of the support, used to classify roots.
pub const SLOPE_STEP: f64 = 1e-6;
/// Offset from the upper support bound where the scan stops.
const UPPER_INSET: f64 = 1e-12;

/// Critical beliefs separating the equilibrium regimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommonCriticals {
    /// `(b - 1) / m`.
    pub pi_low: f64,
    /// Loss at which `psi` is tangent to the diagonal.
    pub ell_prime: f64,
    /// Belief at which the tangency occurs.
    pub pi_prime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootKind {
    InteriorLow,
    InteriorHigh,
    CornerUpper,
    CornerZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    UniqueInterior,
    Triple,
    UniqueCorner,
    /// Belief exactly at `(b - 1) / m` with a support wider than `b - 1`:
    /// `psi` is flat at `b - 1`, giving one interior root plus the corner.
    Boundary,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::UniqueInterior => "unique-interior",
            Regime::Triple => "triple",
            Regime::UniqueCorner => "unique-corner",
            Regime::Boundary => "boundary",
        }
    }
}

/// Which equilibrium to report when several coexist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    #[default]
    Lowest,
    Highest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub threshold: f64,
    pub kind: RootKind,
}

/// All symmetric equilibria at one belief, in increasing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub pi: f64,
    pub roots: Vec<Equilibrium>,
    pub regime: Regime,
}

impl EquilibriumSet {
    pub fn select(&self, selection: Selection) -> f64 {
        match selection {
            Selection::Lowest => self.roots[0].threshold,
            Selection::Highest => self.roots[self.roots.len() - 1].threshold,
        }
    }

    /// Lowest non-corner-upper root (interior-low or zero).
    pub fn low(&self) -> Option<f64> {
        self.roots
            .iter()
            .find(|r| matches!(r.kind, RootKind::InteriorLow | RootKind::CornerZero))
            .map(|r| r.threshold)
    }

    pub fn high(&self) -> Option<f64> {
        self.roots
            .iter()
            .find(|r| r.kind == RootKind::InteriorHigh)
            .map(|r| r.threshold)
    }

    pub fn corner(&self) -> Option<f64> {
        self.roots
            .iter()
            .find(|r| r.kind == RootKind::CornerUpper)
            .map(|r| r.threshold)
    }
}

/// Reduced-form best response: the indifferent loss when the partner
/// cooperates with probability `F(ell)`.
pub fn psi(ell: f64, pi: f64, params: &GameParams, dist: &dyn Distribution) -> Result<f64> {
    let survival = survival_at(ell, dist)?;
    check_belief(pi)?;
    let fl = 1.0 - survival;
    Ok(params.net_moral_cost() / survival * odds(pi) - (params.b() - 1.0) * fl / survival)
}

/// `d psi / d ell`, from the closed-form derivative.
pub fn psi_slope(ell: f64, pi: f64, params: &GameParams, dist: &dyn Distribution) -> Result<f64> {
    let survival = survival_at(ell, dist)?;
    check_belief(pi)?;
    let gap = params.net_moral_cost() * odds(pi) - (params.b() - 1.0);
    Ok(dist.pdf(ell) / (survival * survival) * gap)
}

/// `d psi / d pi`; strictly positive.
pub fn psi_belief_slope(
    ell: f64,
    pi: f64,
    params: &GameParams,
    dist: &dyn Distribution,
) -> Result<f64> {
    let survival = survival_at(ell, dist)?;
    check_belief(pi)?;
    let rest = 1.0 - pi.min(1.0 - crate::params::BELIEF_EPS);
    Ok(params.net_moral_cost() / (survival * rest * rest))
}

fn survival_at(ell: f64, dist: &dyn Distribution) -> Result<f64> {
    let upper = dist.upper();
    if !(0.0..upper).contains(&ell) {
        return Err(Error::Domain(format!(
            "psi is defined for losses in [0, {upper}) (got {ell})"
        )));
    }
    let survival = 1.0 - dist.cdf(ell);
    if survival <= 0.0 {
        return Err(Error::Domain(format!("F({ell}) = 1: psi is singular")));
    }
    Ok(survival)
}

/// Partner cutoff above which defecting at every loss is optimal. Defined
/// for `pi < (b - 1) / m`.
pub fn chi_bound(pi: f64, params: &GameParams, dist: &dyn Distribution) -> Result<f64> {
    check_belief(pi)?;
    let inner = (params.m() / (params.b() - 1.0) - 1.0) * odds(pi);
    if pi >= params.pi_low() || !(0.0..=1.0).contains(&inner) {
        return Err(Error::Regime(format!(
            "chi is only defined for pi < (b - 1)/m = {}; at pi = {pi} the corner case applies",
            params.pi_low()
        )));
    }
    Ok(dist.quantile(inner))
}

/// Best-response cutoff against a partner who cooperates iff their loss is
/// at most `opponent_threshold`. Ties resolve to cooperation.
pub fn best_response_threshold(
    pi: f64,
    opponent_threshold: f64,
    params: &GameParams,
    dist: &dyn Distribution,
) -> Result<f64> {
    check_belief(pi)?;
    let upper = dist.upper();
    if !(0.0..=upper).contains(&opponent_threshold) {
        return Err(Error::Domain(format!(
            "opponent threshold must lie in [0, {upper}] (got {opponent_threshold})"
        )));
    }
    if pi >= 1.0 {
        return Ok(upper);
    }
    let below = pi < params.pi_low();
    if dist.cdf(opponent_threshold) >= 1.0 {
        return Ok(if below { 0.0 } else { upper });
    }
    if below && opponent_threshold > chi_bound(pi, params, dist)? {
        return Ok(0.0);
    }
    Ok(psi(opponent_threshold, pi, params, dist)?.clamp(0.0, upper))
}

/// Enumerates and classifies the symmetric equilibria at belief `pi`.
pub fn solve_common_equilibria(
    pi: f64,
    params: &GameParams,
    dist: &dyn Distribution,
    tol: f64,
) -> Result<EquilibriumSet> {
    if !(0.0..1.0).contains(&pi) {
        return Err(Error::Domain(format!("belief must lie in [0, 1) (got {pi})")));
    }
    let upper = dist.upper();
    if (pi - params.pi_low()).abs() <= 4.0 * f64::EPSILON * params.pi_low() {
        // psi is identically b - 1 here; a scan would only resolve rounding noise
        let bm1 = params.b() - 1.0;
        let mut roots = Vec::with_capacity(2);
        if bm1 < upper {
            roots.push(Equilibrium { threshold: bm1, kind: RootKind::InteriorLow });
        }
        roots.push(Equilibrium { threshold: upper, kind: RootKind::CornerUpper });
        let regime = if roots.len() == 2 { Regime::Boundary } else { Regime::UniqueCorner };
        return Ok(EquilibriumSet { pi, roots, regime });
    }
    let mut grid = uniform_grid(0.0, upper, SCAN_CELLS + 1)?;
    *grid.last_mut().unwrap() = upper * (1.0 - UPPER_INSET);

    let gap = |ell: f64| psi(ell, pi, params, dist).map_or(f64::NAN, |v| v - ell);
    let mut found = scan_roots(gap, &grid, 1e-15 * upper, tol)?;

    let above = pi > params.pi_low();
    if above {
        let sep = MIN_SEPARATION * upper;
        let mut kept = Vec::with_capacity(found.len());
        let mut i = 0;
        while i < found.len() {
            if i + 1 < found.len() && found[i + 1].x - found[i].x < sep {
                i += 2;
                continue;
            }
            kept.push(found[i]);
            i += 1;
        }
        found = kept;
    }

    let step = SLOPE_STEP * upper;
    let mut roots = Vec::with_capacity(found.len() + 1);
    for r in &found {
        let kind = if r.x <= 0.0 {
            RootKind::CornerZero
        } else {
            let slope = if r.x + step < grid[SCAN_CELLS] && r.x - step > 0.0 {
                (gap(r.x + step) - gap(r.x - step)) / (2.0 * step)
            } else if r.x - step > 0.0 {
                (gap(r.x) - gap(r.x - step)) / step
            } else {
                (gap(r.x + step) - gap(r.x)) / step
            };
            if slope > 0.0 {
                RootKind::InteriorHigh
            } else {
                RootKind::InteriorLow
            }
        };
        roots.push(Equilibrium { threshold: r.x, kind });
    }
    let corner = pi >= params.pi_low();
    if corner {
        roots.push(Equilibrium {
            threshold: upper,
            kind: RootKind::CornerUpper,
        });
    }

    let non_corner = found.len();
    let regime = match (corner, non_corner) {
        (false, 1) => Regime::UniqueInterior,
        (true, 0) => Regime::UniqueCorner,
        (true, 2) if above => Regime::Triple,
        (true, 1) if !above => Regime::Boundary,
        _ => {
            return Err(Error::InvariantViolation(format!(
                "found {non_corner} interior roots at pi = {pi} (corner: {corner}); \
                 the loss distribution may violate the monotone hazard condition"
            )))
        }
    };
    if above {
        if let [lo, hi, _] = roots.as_slice() {
            if lo.kind != RootKind::InteriorLow || hi.kind != RootKind::InteriorHigh {
                return Err(Error::InvariantViolation(format!(
                    "interior roots at pi = {pi} are not ordered low/high"
                )));
            }
        }
    }
    Ok(EquilibriumSet { pi, roots, regime })
}

/// Tangency point of `psi` with the diagonal and the belief at which it occurs.
pub fn critical_pair(
    params: &GameParams,
    dist: &dyn Distribution,
    tol: f64,
) -> Result<CommonCriticals> {
    let upper = dist.upper();
    let bm1 = params.b() - 1.0;
    if upper <= bm1 {
        return Err(Error::Regime(format!(
            "no tangency when the loss support [0, {upper}] does not exceed b - 1 = {bm1}"
        )));
    }
    let g = |ell: f64| match hazard(dist, ell) {
        Ok(h) if h > 0.0 => ell - 1.0 / h - bm1,
        Ok(_) => f64::NEG_INFINITY,
        Err(_) => f64::NAN,
    };
    let hi = upper * (1.0 - UPPER_INSET);
    let (glo, ghi) = (g(0.0), g(hi));
    if !(glo < 0.0 && ghi > 0.0) {
        return Err(Error::InvariantViolation(format!(
            "l - 1/h(l) = b - 1 is not bracketed on [0, {upper}) (values {glo:e}, {ghi:e}); \
             is the hazard rate increasing?"
        )));
    }
    let ell_prime = bisect(g, 0.0, hi, 1e-15 * upper, tol)?.x;
    let fl = dist.cdf(ell_prime);
    let k = ell_prime * (1.0 - fl) + bm1 * fl;
    Ok(CommonCriticals {
        pi_low: params.pi_low(),
        ell_prime,
        pi_prime: k / (params.net_moral_cost() + k),
    })
}

/// Unique equilibrium cutoff for losses uniform on `[0, 1]` and `b >= 2`.
pub fn closed_form_common_uniform(pi: f64, params: &GameParams) -> Result<f64> {
    let b = params.b();
    if b < 2.0 {
        return Err(Error::Domain(format!(
            "the closed form needs b >= 2 (got b = {b})"
        )));
    }
    if !(0.0..1.0).contains(&pi) {
        return Err(Error::Domain(format!("belief must lie in [0, 1) (got {pi})")));
    }
    if pi >= params.pi_low() {
        return Ok(1.0);
    }
    let disc = b * b / 4.0 - params.net_moral_cost() * pi / (1.0 - pi);
    if disc < 0.0 {
        return Err(Error::InvalidParams(format!(
            "negative discriminant {disc:e} at pi = {pi}"
        )));
    }
    Ok(b / 2.0 - disc.sqrt())
}

/// Derivative of [`closed_form_common_uniform`] in the interior branch.
pub fn closed_form_common_uniform_slope(pi: f64, params: &GameParams) -> Result<f64> {
    let b = params.b();
    let k = params.net_moral_cost();
    if pi >= params.pi_low() {
        return Ok(0.0);
    }
    let disc = b * b / 4.0 - k * pi / (1.0 - pi);
    Ok(k / (2.0 * (1.0 - pi).powi(2) * disc.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{Power, Uniform};
    use crate::params::validate_params;
    use crate::payoff::cooperation_advantage;

    fn fig1() -> (GameParams, Uniform) {
        (validate_params(3.0, 50.0).unwrap(), Uniform::new(8.0).unwrap())
    }

    #[test]
    fn psi_at_zero_loss_and_zero_belief() {
        let (params, f) = fig1();
        let v = psi(0.0, 0.05, &params, &f).unwrap();
        assert!((v - 48.0 * 0.05 / 0.95).abs() < 1e-12);
        for i in 0..20 {
            let ell = 0.39 * i as f64;
            let fl = ell / 8.0;
            let v = psi(ell, 0.0, &params, &f).unwrap();
            assert!((v + 2.0 * fl / (1.0 - fl)).abs() < 1e-12);
            assert!(v <= 0.0);
        }
    }

    #[test]
    fn psi_near_low_fixed_point_of_figure_one() {
        let (params, f) = fig1();
        // oracle: bisection of psi(l) - l on a bracket around the plotted point
        let root = bisect(|l| psi(l, 0.05, &params, &f).unwrap() - l, 2.0, 4.0, 1e-14, 1e-13)
            .unwrap()
            .x;
        assert!((root - 2.8).abs() < 0.05, "{root}");
        assert!((psi(2.8, 0.05, &params, &f).unwrap() - 2.8).abs() < 0.05);
        // quadratic l^2 - 10 l + 8 * 48 * pi/(1-pi) = 0 for this parametrisation
        let c: f64 = 8.0 * 48.0 * 0.05 / 0.95;
        assert!((root - (5.0 - (25.0 - c).sqrt())).abs() < 1e-12);
    }

    #[test]
    fn psi_rejects_upper_bound() {
        let (params, f) = fig1();
        assert!(matches!(psi(8.0, 0.05, &params, &f), Err(Error::Domain(_))));
    }

    #[test]
    fn chi_bound_values() {
        let (params, f) = fig1();
        assert_eq!(chi_bound(0.0, &params, &f).unwrap(), 0.0);
        let chi = chi_bound(0.02, &params, &f).unwrap();
        let inner = 24.0 * 0.02 / 0.98;
        assert!((chi - 8.0 * inner).abs() < 1e-12);
        assert!((f.cdf(chi) - inner).abs() < 1e-12);
        // psi vanishes at chi: the partner cutoff beyond which defecting is optimal
        assert!(psi(chi, 0.02, &params, &f).unwrap().abs() < 1e-12);
        let near = chi_bound(0.04 - 1e-12, &params, &f).unwrap();
        assert!((near - 8.0).abs() < 1e-8);
        assert!(matches!(chi_bound(0.05, &params, &f), Err(Error::Regime(_))));
    }

    #[test]
    fn best_response_cases() {
        let (params, f) = fig1();
        for opp in [0.0, 3.0, 8.0] {
            assert_eq!(best_response_threshold(1.0, opp, &params, &f).unwrap(), 8.0);
            assert_eq!(best_response_threshold(0.0, opp, &params, &f).unwrap(), 0.0);
        }
        assert_eq!(best_response_threshold(0.05, 8.0, &params, &f).unwrap(), 8.0);
        assert_eq!(best_response_threshold(0.03, 8.0, &params, &f).unwrap(), 0.0);
        // oracle: at the marginal loss 8 against a fully cooperative partner
        let adv = cooperation_advantage(8.0, 0.05, 1.0, &params).unwrap();
        assert!(adv >= 0.0);
        let chi = chi_bound(0.02, &params, &f).unwrap();
        assert_eq!(best_response_threshold(0.02, chi + 0.1, &params, &f).unwrap(), 0.0);
        assert!(best_response_threshold(0.02, chi - 0.1, &params, &f).unwrap() > 0.0);
    }

    #[test]
    fn figure_one_regimes() {
        let (params, f) = fig1();
        let a = solve_common_equilibria(0.03, &params, &f, 1e-12).unwrap();
        assert_eq!(a.regime, Regime::UniqueInterior);
        assert_eq!(a.roots.len(), 1);
        let b = solve_common_equilibria(0.05, &params, &f, 1e-12).unwrap();
        assert_eq!(b.regime, Regime::Triple);
        let kinds: Vec<_> = b.roots.iter().map(|r| r.kind).collect();
        assert_eq!(
            kinds,
            vec![RootKind::InteriorLow, RootKind::InteriorHigh, RootKind::CornerUpper]
        );
        let c: f64 = 8.0 * 48.0 * 0.05 / 0.95;
        assert!((b.roots[0].threshold - (5.0 - (25.0 - c).sqrt())).abs() < 1e-10);
        assert!((b.roots[1].threshold - (5.0 + (25.0 - c).sqrt())).abs() < 1e-10);
        let c = solve_common_equilibria(0.08, &params, &f, 1e-12).unwrap();
        assert_eq!(c.regime, Regime::UniqueCorner);
        assert_eq!(c.roots, vec![Equilibrium { threshold: 8.0, kind: RootKind::CornerUpper }]);
    }

    #[test]
    fn zero_belief_gives_zero_threshold() {
        let params = validate_params(2.0, 8.0).unwrap();
        let set = solve_common_equilibria(0.0, &params, &Uniform::unit(), 1e-12).unwrap();
        assert_eq!(set.regime, Regime::UniqueInterior);
        assert_eq!(set.roots[0].threshold, 0.0);
        assert_eq!(set.roots[0].kind, RootKind::CornerZero);
    }

    #[test]
    fn flat_best_response_at_switch_belief() {
        let (params, f) = fig1();
        let set = solve_common_equilibria(params.pi_low(), &params, &f, 1e-12).unwrap();
        assert_eq!(set.regime, Regime::Boundary);
        assert!((set.roots[0].threshold - 2.0).abs() < 1e-10);
        assert_eq!(set.corner(), Some(8.0));
    }

    #[test]
    fn uniform_tangency() {
        let (params, f) = fig1();
        let c = critical_pair(&params, &f, 1e-14).unwrap();
        assert!((c.ell_prime - 5.0).abs() < 1e-10);
        assert!((c.pi_prime - 3.125 / 51.125).abs() < 1e-12);
        assert!((c.pi_low - 0.04).abs() < 1e-15);
        for upper in [1.5, 4.0, 10.0] {
            let f = Uniform::new(upper).unwrap();
            let params = validate_params(1.5, 6.0).unwrap();
            let c = critical_pair(&params, &f, 1e-14).unwrap();
            assert!((c.ell_prime - (upper + 0.5) / 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn tangency_requires_wide_support() {
        let params = validate_params(2.0, 8.0).unwrap();
        assert!(matches!(
            critical_pair(&params, &Uniform::unit(), 1e-12),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn tangency_for_power_losses() {
        let params = validate_params(2.0, 30.0).unwrap();
        let f = Power::new(4.0, 2.0).unwrap();
        let c = critical_pair(&params, &f, 1e-13).unwrap();
        let h = hazard(&f, c.ell_prime).unwrap();
        assert!((c.ell_prime - 1.0 / h - 1.0).abs() < 1e-10);
        assert!((psi(c.ell_prime, c.pi_prime, &params, &f).unwrap() - c.ell_prime).abs() < 1e-8);
        assert!((psi_slope(c.ell_prime, c.pi_prime, &params, &f).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn closed_form_endpoints() {
        let params = validate_params(2.0, 8.0).unwrap();
        assert_eq!(closed_form_common_uniform(0.0, &params).unwrap(), 0.0);
        assert_eq!(closed_form_common_uniform(0.125, &params).unwrap(), 1.0);
        // the interior branch also reaches 1 at the boundary
        let k = params.net_moral_cost();
        let disc = 1.0 - k * 0.125 / 0.875;
        assert!((1.0 - disc.max(0.0).sqrt() - 1.0).abs() < 1e-7);
        let v = closed_form_common_uniform(0.05, &params).unwrap();
        assert!((v - (1.0 - (1.0 - 7.0 * 0.05 / 0.95f64).sqrt())).abs() < 1e-15);
        let set = solve_common_equilibria(0.05, &params, &Uniform::unit(), 1e-13).unwrap();
        assert!((set.roots[0].threshold - v).abs() < 1e-8);
        let small_b = validate_params(1.5, 8.0).unwrap();
        assert!(closed_form_common_uniform(0.01, &small_b).is_err());
    }

    #[test]
    fn psi_slope_matches_finite_differences() {
        let (params, f) = fig1();
        for &pi in &[0.01, 0.03, 0.05, 0.07] {
            for i in 1..40 {
                let ell = 0.19 * i as f64;
                let fd = crate::numerics::central_diff(|l| psi(l, pi, &params, &f).unwrap(), ell, 1e-6);
                let exact = psi_slope(ell, pi, &params, &f).unwrap();
                assert!((fd - exact).abs() < 1e-5 * (1.0 + exact.abs()));
                let fd_pi =
                    crate::numerics::central_diff(|p| psi(ell, p, &params, &f).unwrap(), pi, 1e-7);
                let exact_pi = psi_belief_slope(ell, pi, &params, &f).unwrap();
                assert!((fd_pi - exact_pi).abs() < 1e-5 * exact_pi);
            }
        }
    }
}
