use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of knots for threshold curves.
pub const DEFAULT_GRID: usize = 1001;

/// A piecewise-linear function on a closed interval.
///
/// Used for both threshold representations: loss cutoff as a function of
/// belief, and belief cutoff as a function of loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurve {
    knots: Vec<f64>,
    values: Vec<f64>,
    codomain: (f64, f64),
    monotone: bool,
}

impl ThresholdCurve {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, codomain: (f64, f64)) -> Result<Self> {
        if knots.len() != values.len() || knots.len() < 2 {
            return Err(Error::Domain(
                "curve needs at least two knots and one value per knot".into(),
            ));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("curve knots must be strictly increasing".into()));
        }
        let (lo, hi) = codomain;
        if let Some(v) = values.iter().find(|v| !(lo..=hi).contains(*v)) {
            return Err(Error::Domain(format!(
                "curve value {v} outside codomain [{lo}, {hi}]"
            )));
        }
        let monotone = values.windows(2).all(|w| w[1] >= w[0]);
        Ok(Self {
            knots,
            values,
            codomain,
            monotone,
        })
    }

    /// Tabulates `f` on `n` equally spaced knots over `domain`.
    pub fn tabulate(
        domain: (f64, f64),
        n: usize,
        codomain: (f64, f64),
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let knots = uniform_grid(domain.0, domain.1, n)?;
        let values = knots.iter().map(|&x| f(x)).collect();
        Self::new(knots, values, codomain)
    }

    /// Like [`tabulate`](Self::tabulate) with a fallible generator.
    pub fn try_tabulate(
        domain: (f64, f64),
        n: usize,
        codomain: (f64, f64),
        f: impl Fn(f64) -> Result<f64>,
    ) -> Result<Self> {
        let knots = uniform_grid(domain.0, domain.1, n)?;
        let values = knots.iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
        Self::new(knots, values, codomain)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    pub fn codomain(&self) -> (f64, f64) {
        self.codomain
    }

    /// Nondecreasing values.
    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] > w[0])
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (a, b) = self.domain();
        let slack = 1e-12 * (b - a);
        if !(x >= a - slack && x <= b + slack) {
            return Err(Error::Domain(format!(
                "curve evaluated at {x} outside domain [{a}, {b}]"
            )));
        }
        let x = x.clamp(a, b);
        let i = self
            .knots
            .partition_point(|&k| k <= x)
            .clamp(1, self.knots.len() - 1);
        let (x0, x1) = (self.knots[i - 1], self.knots[i]);
        let (y0, y1) = (self.values[i - 1], self.values[i]);
        Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }

    /// Preimage of `y`; flat stretches resolve to their left endpoint.
    pub fn invert(&self, y: f64) -> Result<f64> {
        if !self.monotone {
            return Err(Error::Domain("cannot invert a non-monotone curve".into()));
        }
        let (lo, hi) = (self.values[0], self.values[self.values.len() - 1]);
        if !(lo..=hi).contains(&y) {
            return Err(Error::Domain(format!(
                "value {y} outside curve range [{lo}, {hi}]"
            )));
        }
        let i = self.values.partition_point(|&v| v < y);
        if self.values[i] == y {
            return Ok(self.knots[i]);
        }
        let (x0, x1) = (self.knots[i - 1], self.knots[i]);
        let (y0, y1) = (self.values[i - 1], self.values[i]);
        Ok(x0 + (y - y0) / (y1 - y0) * (x1 - x0))
    }

    /// Applies `f` to every value, keeping the knots.
    pub fn map_values(&self, codomain: (f64, f64), f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.knots.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
            codomain,
        )
    }
}

/// `n` equally spaced points from `a` to `b` inclusive.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(b > a) {
        return Err(Error::Domain(format!(
            "grid needs n >= 2 and a < b (got n = {n}, [{a}, {b}])"
        )));
    }
    let h = (b - a) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| if i == n - 1 { b } else { a + h * i as f64 })
        .collect())
}
