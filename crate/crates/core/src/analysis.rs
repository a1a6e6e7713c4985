//! Comparison of common and diverse beliefs with uniform losses and beliefs
//! on `[0, 1]`: the crossing belief, ex-ante cooperation probabilities and
//! the region where diversity raises cooperation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::common::{closed_form_common_uniform, closed_form_common_uniform_slope};
use crate::curve::uniform_grid;
use crate::diverse::{
    closed_form_diverse_uniform, closed_form_diverse_uniform_slope, gamma_aux, solve_alpha_beta,
    AlphaBeta, AlphaBetaMode,
};
use crate::error::{Error, Result};
use crate::numerics::{adaptive_simpson, bisect};
use crate::params::GameParams;

/// Interior points used to check for a single crossing.
pub const CROSSING_SCAN: usize = 500;
/// Below this `gamma - 1` the diverse closed form switches to its series.
const SERIES_CUTOFF: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeBounds {
    /// Belief below which every strategic player defects under diverse beliefs.
    pub lower: f64,
    /// Belief above which every strategic player cooperates under diverse beliefs.
    pub upper: f64,
    /// `(b - 1) / m`.
    pub pi_low: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CooperationReport {
    pub pi_dagger: f64,
    pub p_common: f64,
    pub p_diverse: f64,
    /// `sqrt(1 + m - b + b^2 / 4)`.
    pub phi: f64,
    /// `sqrt(1 + 4 (b - 1) / (1 + m - b))`.
    pub gamma_aux: f64,
    pub regime_bounds: RegimeBounds,
    pub alpha_beta: AlphaBeta,
    /// The diverse closed form fell back to its series expansion.
    pub series_fallback: bool,
}

fn require_b_at_least_two(params: &GameParams) -> Result<()> {
    if params.b() < 2.0 {
        return Err(Error::Domain(format!(
            "uniform comparisons need b >= 2 (got b = {})",
            params.b()
        )));
    }
    Ok(())
}

pub fn regime_bounds(params: &GameParams, ab: &AlphaBeta) -> RegimeBounds {
    RegimeBounds {
        lower: ab.lower_kink(params),
        upper: ab.upper_kink(params),
        pi_low: params.pi_low(),
    }
}

/// `l_c(pi) - l_d(pi)` with both cutoffs in closed form.
pub fn crossing_gap(pi: f64, params: &GameParams, ab: &AlphaBeta) -> Result<f64> {
    Ok(closed_form_common_uniform(pi, params)? - closed_form_diverse_uniform(pi, params, ab)?)
}

/// One row of the crossing scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingPoint {
    pub pi: f64,
    pub ell_common: f64,
    pub ell_diverse: f64,
    /// `d l_c / d pi`.
    pub slope_common: f64,
    /// `d l_d / d pi`.
    pub slope_diverse: f64,
}

impl CrossingPoint {
    pub fn gap(&self) -> f64 {
        self.ell_common - self.ell_diverse
    }
}

/// `n` equally spaced interior beliefs of the open interval between the
/// diverse kinks.
pub fn crossing_scan(params: &GameParams, ab: &AlphaBeta, n: usize) -> Result<Vec<CrossingPoint>> {
    require_b_at_least_two(params)?;
    let RegimeBounds { lower, upper, .. } = regime_bounds(params, ab);
    if !(lower < upper) {
        return Err(Error::InvariantViolation(format!(
            "diverse kinks are not ordered: {lower} >= {upper}"
        )));
    }
    (1..=n)
        .map(|i| {
            let pi = lower + (upper - lower) * i as f64 / (n + 1) as f64;
            Ok(CrossingPoint {
                pi,
                ell_common: closed_form_common_uniform(pi, params)?,
                ell_diverse: closed_form_diverse_uniform(pi, params, ab)?,
                slope_common: closed_form_common_uniform_slope(pi, params)?,
                slope_diverse: closed_form_diverse_uniform_slope(pi, params, ab),
            })
        })
        .collect()
}

fn sign_changes(values: impl Iterator<Item = f64>) -> usize {
    let mut last = 0.0f64;
    let mut changes = 0;
    for v in values {
        if v == 0.0 {
            continue;
        }
        if last != 0.0 && v.signum() != last.signum() {
            changes += 1;
        }
        last = v;
    }
    changes
}

/// The belief at which common- and diverse-belief cutoffs cross.
pub fn solve_pi_dagger(params: &GameParams, ab: &AlphaBeta, tol: f64) -> Result<f64> {
    let scan = crossing_scan(params, ab, CROSSING_SCAN)?;
    let changes = sign_changes(scan.iter().map(CrossingPoint::gap));
    if changes != 1 {
        return Err(Error::InvariantViolation(format!(
            "expected one crossing of the cutoff curves, found {changes}"
        )));
    }
    let i = scan
        .windows(2)
        .position(|w| w[0].gap() > 0.0 && w[1].gap() <= 0.0)
        .ok_or_else(|| {
            Error::InvariantViolation("cutoff curves cross from below instead of above".into())
        })?;
    let root = bisect(
        |pi| crossing_gap(pi, params, ab).unwrap_or(f64::NAN),
        scan[i].pi,
        scan[i + 1].pi,
        tol,
        0.0,
    )?;
    Ok(root.x)
}

/// `sqrt(1 + m - b + b^2 / 4)`.
pub fn phi(params: &GameParams) -> f64 {
    (params.net_moral_cost() + 0.25 * params.b() * params.b()).sqrt()
}

/// Ex-ante probability that a strategic player cooperates under common
/// beliefs drawn uniformly: `k * int_0^1 dl / (k + b l - l^2)`.
pub fn ex_ante_p_common(params: &GameParams, method: Method) -> Result<f64> {
    require_b_at_least_two(params)?;
    let (k, b) = (params.net_moral_cost(), params.b());
    match method {
        Method::ClosedForm => {
            let f = phi(params);
            // phi (phi - 1) - (b/2)(b/2 - 1) rewritten to avoid cancellation
            let s = f + 0.5 * b;
            let den = k * (s - 1.0) / s;
            if den <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "logarithm argument is not positive for b = {b}, m = {}",
                    params.m()
                )));
            }
            Ok(k / (2.0 * f) * (2.0 * f / den).ln_1p())
        }
        Method::Quadrature => Ok(k * adaptive_simpson(|l| 1.0 / (k + b * l - l * l), 0.0, 1.0, 1e-14)),
    }
}

/// Whether the diverse closed form uses its series expansion.
pub fn series_fallback_active(params: &GameParams) -> bool {
    gamma_aux(params) - 1.0 < SERIES_CUTOFF
}

/// Ex-ante probability that a strategic player cooperates under diverse
/// beliefs: `int_0^1 k / (alpha + beta l) dl`.
///
/// The closed form is the integral of the approximate curve; quadrature
/// integrates whichever pair `ab` holds.
pub fn ex_ante_p_diverse(params: &GameParams, ab: &AlphaBeta, method: Method) -> Result<f64> {
    let k = params.net_moral_cost();
    match method {
        Method::ClosedForm => {
            let g = gamma_aux(params);
            let x = 2.0 * (g - 1.0) / (k * (g + 1.0) * (g + 1.0));
            if series_fallback_active(params) {
                return Ok(2.0 / (g + 1.0) * (1.0 - 0.5 * x));
            }
            Ok(k * (g + 1.0) / (g - 1.0) * x.ln_1p())
        }
        Method::Quadrature => {
            let (a, b) = (ab.alpha, ab.beta);
            Ok(adaptive_simpson(|l| k / (a + b * l), 0.0, 1.0, 1e-14))
        }
    }
}

pub fn cooperation_report(params: &GameParams, mode: AlphaBetaMode) -> Result<CooperationReport> {
    let ab = solve_alpha_beta(params, mode)?;
    let p_diverse = match mode {
        AlphaBetaMode::Approximate => ex_ante_p_diverse(params, &ab, Method::ClosedForm)?,
        AlphaBetaMode::Exact => ex_ante_p_diverse(params, &ab, Method::Quadrature)?,
    };
    let report = CooperationReport {
        pi_dagger: solve_pi_dagger(params, &ab, 1e-12)?,
        p_common: ex_ante_p_common(params, Method::ClosedForm)?,
        p_diverse,
        phi: phi(params),
        gamma_aux: gamma_aux(params),
        regime_bounds: regime_bounds(params, &ab),
        alpha_beta: ab,
        series_fallback: series_fallback_active(params),
    };
    let bounds = report.regime_bounds;
    if !(bounds.lower < bounds.upper && bounds.upper <= bounds.pi_low + 1e-12) {
        return Err(Error::InvariantViolation(format!(
            "regime bounds out of order: {bounds:?}"
        )));
    }
    Ok(report)
}

/// One cell of the diversity-advantage grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionCell {
    pub b: f64,
    pub m: f64,
    pub p_common: f64,
    pub p_diverse: f64,
    pub diverse_wins: bool,
    /// False when `(b, m)` fails validation or `b < 2`; the other fields are then NaN/false.
    pub valid: bool,
}

/// Grid cells in row-major order (one row per `b`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMask {
    pub rows: Vec<Vec<RegionCell>>,
}

impl RegionMask {
    pub fn cells(&self) -> impl Iterator<Item = &RegionCell> {
        self.rows.iter().flatten()
    }

    /// Every row's winning cells form one run of consecutive valid cells.
    pub fn rows_contiguous(&self) -> bool {
        self.rows.iter().all(|row| {
            let wins: Vec<bool> = row.iter().filter(|c| c.valid).map(|c| c.diverse_wins).collect();
            wins.windows(2).filter(|w| w[0] != w[1]).count() <= 2
                && !(wins.first() == Some(&true)
                    && wins.last() == Some(&true)
                    && wins.iter().any(|w| !w))
        })
    }

    pub fn invalid_count(&self) -> usize {
        self.cells().filter(|c| !c.valid).count()
    }
}

fn region_cell(b: f64, m: f64) -> RegionCell {
    let evaluate = || -> Result<(f64, f64)> {
        let params = GameParams::new(b, m)?;
        require_b_at_least_two(&params)?;
        let ab = solve_alpha_beta(&params, AlphaBetaMode::Approximate)?;
        Ok((
            ex_ante_p_common(&params, Method::ClosedForm)?,
            ex_ante_p_diverse(&params, &ab, Method::ClosedForm)?,
        ))
    };
    match evaluate() {
        Ok((pc, pd)) => RegionCell {
            b,
            m,
            p_common: pc,
            p_diverse: pd,
            diverse_wins: pd > pc,
            valid: true,
        },
        Err(_) => RegionCell {
            b,
            m,
            p_common: f64::NAN,
            p_diverse: f64::NAN,
            diverse_wins: false,
            valid: false,
        },
    }
}

/// Evaluates `p_d > p_c` on the product grid; invalid cells are kept and flagged.
pub fn diversity_region(b_grid: &[f64], m_grid: &[f64]) -> RegionMask {
    let rows = b_grid
        .par_iter()
        .map(|&b| m_grid.iter().map(|&m| region_cell(b, m)).collect())
        .collect();
    RegionMask { rows }
}

/// Default grid: `b` in `[b_lo, b_hi]` and, per row, `m` in `[b - 1 + eps, m_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionGrid {
    pub b_range: (f64, f64),
    pub m_max: f64,
    pub eps: f64,
    pub b_cells: usize,
    pub m_cells: usize,
}

impl Default for RegionGrid {
    fn default() -> Self {
        Self {
            b_range: (2.0, 6.0),
            m_max: 60.0,
            eps: 0.01,
            b_cells: 100,
            m_cells: 100,
        }
    }
}

/// Region mask on a grid whose `m` axis starts just above `b - 1` in each row.
pub fn diversity_region_grid(grid: &RegionGrid) -> Result<RegionMask> {
    let bs = uniform_grid(grid.b_range.0, grid.b_range.1, grid.b_cells)?;
    let rows = bs
        .par_iter()
        .map(|&b| {
            let ms = uniform_grid(b - 1.0 + grid.eps, grid.m_max, grid.m_cells)?;
            Ok(ms.iter().map(|&m| region_cell(b, m)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionMask { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiDaggerSensitivity {
    pub d_db: f64,
    pub d_dm: f64,
}

/// Central differences of the crossing belief (approximate pair) with
/// relative step `step`.
pub fn pi_dagger_sensitivity(params: &GameParams, step: f64) -> Result<PiDaggerSensitivity> {
    if !(step > 0.0) {
        return Err(Error::Domain(format!("step must be positive (got {step})")));
    }
    let (b, m) = (params.b(), params.m());
    let (hb, hm) = (step * b, step * m);
    let at = |b: f64, m: f64| -> Result<f64> {
        let p = GameParams::new(b, m).map_err(|e| {
            Error::Domain(format!("sensitivity step leaves the admissible region: {e}"))
        })?;
        if b < 2.0 {
            return Err(Error::Domain(format!(
                "sensitivity step pushes b = {b} below 2"
            )));
        }
        let ab = solve_alpha_beta(&p, AlphaBetaMode::Approximate)?;
        solve_pi_dagger(&p, &ab, 1e-14)
    };
    Ok(PiDaggerSensitivity {
        d_db: (at(b + hb, m)? - at(b - hb, m)?) / (2.0 * hb),
        d_dm: (at(b, m + hm)? - at(b, m - hm)?) / (2.0 * hm),
    })
}
