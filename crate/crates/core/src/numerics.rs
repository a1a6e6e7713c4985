//! Scalar root finding and quadrature shared by the solvers.

use crate::error::{Error, Result};

const MAX_BISECTIONS: usize = 400;

/// A root located by [`bisect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    /// `f(x)` at the returned point.
    pub residual: f64,
    pub iterations: usize,
}

/// Bisection on a sign-changing bracket `[lo, hi]`.
///
/// Stops once `|f(mid)| <= ftol` and the bracket is narrower than `xtol`,
/// or when the bracket has collapsed to adjacent floats (a sign change at
/// machine resolution).
pub fn bisect(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    xtol: f64,
    ftol: f64,
) -> Result<Root> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(Root { x: lo, residual: 0.0, iterations: 0 });
    }
    if fhi == 0.0 {
        return Ok(Root { x: hi, residual: 0.0, iterations: 0 });
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::Domain(format!(
            "no sign change on [{lo}, {hi}] (f = {flo:e}, {fhi:e})"
        )));
    }
    for it in 1..=MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if fmid == 0.0 || (fmid.abs() <= ftol && hi - lo <= xtol) || mid <= lo || mid >= hi {
            return Ok(Root { x: mid, residual: fmid, iterations: it });
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    Err(Error::NonConvergence {
        what: "bisection",
        iterations: MAX_BISECTIONS,
        residual: f(mid),
    })
}

/// Roots of `f` over `grid`: exact zeros at grid points plus every
/// sign-changing cell refined by [`bisect`]. Returned in increasing order.
pub fn scan_roots(f: impl Fn(f64) -> f64, grid: &[f64], xtol: f64, ftol: f64) -> Result<Vec<Root>> {
    let values: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let mut roots: Vec<Root> = Vec::new();
    for i in 0..grid.len() {
        if values[i] == 0.0 {
            if roots.last().is_none_or(|r| r.x < grid[i]) {
                roots.push(Root { x: grid[i], residual: 0.0, iterations: 0 });
            }
            continue;
        }
        if i + 1 < grid.len() && values[i + 1] != 0.0 && values[i].signum() != values[i + 1].signum() {
            roots.push(bisect(&f, grid[i], grid[i + 1], xtol, ftol)?);
        }
    }
    Ok(roots)
}

/// Composite Simpson rule for samples `ys` at abscissae `xs` (any spacing).
///
/// Pairs of intervals use the three-point quadratic fit; an odd trailing
/// interval is closed with the quadratic through the last three points.
pub fn simpson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "abscissae and samples differ in length");
    let n = xs.len();
    match n {
        0 | 1 => return 0.0,
        2 => return 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]),
        _ => {}
    }
    let intervals = n - 1;
    let paired = intervals - intervals % 2;
    let mut total = 0.0;
    let mut i = 0;
    while i < paired {
        let h0 = xs[i + 1] - xs[i];
        let h1 = xs[i + 2] - xs[i + 1];
        let s = h0 + h1;
        total += s / 6.0
            * ((2.0 - h1 / h0) * ys[i] + s * s / (h0 * h1) * ys[i + 1] + (2.0 - h0 / h1) * ys[i + 2]);
        i += 2;
    }
    if intervals % 2 == 1 {
        let h0 = xs[n - 2] - xs[n - 3];
        let h1 = xs[n - 1] - xs[n - 2];
        let alpha = (2.0 * h1 * h1 + 3.0 * h0 * h1) / (6.0 * (h0 + h1));
        let beta = (h1 * h1 + 3.0 * h1 * h0) / (6.0 * h0);
        let eta = h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
        total += alpha * ys[n - 1] + beta * ys[n - 2] - eta * ys[n - 3];
    }
    total
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(
        f: &impl Fn(f64) -> f64,
        (a, m, b): (f64, f64, f64),
        (fa, fm, fb): (f64, f64, f64),
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, (a, lm, m), (fa, flm, fm), left, 0.5 * tol, depth - 1)
            + recurse(f, (m, rm, b), (fm, frm, fb), right, 0.5 * tol, depth - 1)
    }

    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(&f, (a, m, b), (fa, fm, fb), whole, tol, 48)
}

/// Central difference `(f(x + h) - f(x - h)) / 2h`.
pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}
