//! Loss and belief distributions.
//!
//! Losses live on `[0, upper]` and beliefs on `[0, 1]`; both are represented
//! by the same [`Distribution`] trait. Built-in analytic families cover the
//! uniform and power cases, and [`Tabulated`] accepts any strictly increasing
//! piecewise-linear cdf.

use std::fmt::Debug;

use crate::error::{Error, Result};

/// A continuous distribution supported on `[0, upper]`.
///
/// `cdf` and `pdf` clamp arguments outside the support; `pdf` returns the
/// one-sided limit at the support endpoints.
pub trait Distribution: Debug + Send + Sync {
    fn upper(&self) -> f64;
    fn cdf(&self, x: f64) -> f64;
    fn pdf(&self, x: f64) -> f64;
    /// Inverse cdf on `[0, 1]`.
    fn quantile(&self, u: f64) -> f64;
    /// Whether `f / (1 - F)` is known to be nondecreasing on the support.
    fn monotone_hazard(&self) -> bool {
        false
    }
}

/// Loss distributions `F` on `[0, upper]`.
pub type LossDistribution = dyn Distribution;
/// Belief distributions `G` on `[0, 1]`.
pub type BeliefDistribution = dyn Distribution;

/// Hazard rate `f(x) / (1 - F(x))`, defined for `0 <= x < upper`.
pub fn hazard(dist: &dyn Distribution, x: f64) -> Result<f64> {
    let upper = dist.upper();
    if !(0.0..upper).contains(&x) {
        return Err(Error::Domain(format!(
            "hazard is defined on [0, {upper}) (got {x})"
        )));
    }
    let survival = 1.0 - dist.cdf(x);
    if survival <= 0.0 {
        return Err(Error::Domain(format!("survival function vanishes at {x}")));
    }
    Ok(dist.pdf(x) / survival)
}

/// Checks that `dist` can serve as a belief distribution.
pub fn check_belief_distribution(dist: &dyn Distribution) -> Result<()> {
    if (dist.upper() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "belief distributions must be supported on [0, 1] (upper = {})",
            dist.upper()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uniform {
    upper: f64,
}

impl Uniform {
    pub fn new(upper: f64) -> Result<Self> {
        if !(upper.is_finite() && upper > 0.0) {
            return Err(Error::Domain(format!(
                "uniform support must have a positive finite upper bound (got {upper})"
            )));
        }
        Ok(Self { upper })
    }

    /// Uniform on `[0, 1]`.
    pub fn unit() -> Self {
        Self { upper: 1.0 }
    }
}

impl Distribution for Uniform {
    fn upper(&self) -> f64 {
        self.upper
    }

    fn cdf(&self, x: f64) -> f64 {
        (x / self.upper).clamp(0.0, 1.0)
    }

    fn pdf(&self, _x: f64) -> f64 {
        1.0 / self.upper
    }

    fn quantile(&self, u: f64) -> f64 {
        u.clamp(0.0, 1.0) * self.upper
    }

    fn monotone_hazard(&self) -> bool {
        true
    }
}

/// `F(x) = (x / upper)^shape`. The hazard is increasing whenever `shape >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Power {
    upper: f64,
    shape: f64,
}

impl Power {
    pub fn new(upper: f64, shape: f64) -> Result<Self> {
        if !(upper.is_finite() && upper > 0.0 && shape.is_finite() && shape > 0.0) {
            return Err(Error::Domain(format!(
                "power distribution needs positive upper and shape (got {upper}, {shape})"
            )));
        }
        Ok(Self { upper, shape })
    }
}

impl Distribution for Power {
    fn upper(&self) -> f64 {
        self.upper
    }

    fn cdf(&self, x: f64) -> f64 {
        (x / self.upper).clamp(0.0, 1.0).powf(self.shape)
    }

    fn pdf(&self, x: f64) -> f64 {
        let z = (x / self.upper).clamp(0.0, 1.0);
        self.shape * z.powf(self.shape - 1.0) / self.upper
    }

    fn quantile(&self, u: f64) -> f64 {
        self.upper * u.clamp(0.0, 1.0).powf(1.0 / self.shape)
    }

    fn monotone_hazard(&self) -> bool {
        self.shape >= 1.0
    }
}

/// Piecewise-linear cdf through `(knots[i], values[i])`.
///
/// The first knot must be 0 with value 0 and the last value must be 1.
/// Values must be strictly increasing so the density is positive on every
/// segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    knots: Vec<f64>,
    values: Vec<f64>,
    densities: Vec<f64>,
    monotone_hazard: bool,
}

impl Tabulated {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() || knots.len() < 2 {
            return Err(Error::Domain(
                "tabulated cdf needs at least two (knot, value) pairs of equal length".into(),
            ));
        }
        if knots[0] != 0.0 || values[0] != 0.0 {
            return Err(Error::Domain("tabulated cdf must start at (0, 0)".into()));
        }
        if (values[values.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::Domain("tabulated cdf must end at value 1".into()));
        }
        if knots.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("tabulated cdf entries must be finite".into()));
        }
        let mut densities = Vec::with_capacity(knots.len() - 1);
        for i in 0..knots.len() - 1 {
            let dx = knots[i + 1] - knots[i];
            let dv = values[i + 1] - values[i];
            if dx <= 0.0 {
                return Err(Error::Domain(format!(
                    "tabulated knots must be strictly increasing (index {})",
                    i + 1
                )));
            }
            if dv <= 0.0 {
                return Err(Error::Domain(format!(
                    "tabulated cdf must be strictly increasing (index {})",
                    i + 1
                )));
            }
            densities.push(dv / dx);
        }
        // Within a segment the hazard rises because F does; across a knot it
        // rises iff the density does not drop.
        let monotone_hazard = densities.windows(2).all(|w| w[1] >= w[0]);
        Ok(Self {
            knots,
            values,
            densities,
            monotone_hazard,
        })
    }

    fn segment(&self, x: f64) -> usize {
        let i = self.knots.partition_point(|&k| k <= x);
        i.saturating_sub(1).min(self.densities.len() - 1)
    }
}

impl Distribution for Tabulated {
    fn upper(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= self.upper() {
            return 1.0;
        }
        let i = self.segment(x);
        (self.values[i] + self.densities[i] * (x - self.knots[i])).min(1.0)
    }

    fn pdf(&self, x: f64) -> f64 {
        self.densities[self.segment(x.clamp(0.0, self.upper()))]
    }

    fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let i = self
            .values
            .partition_point(|&v| v < u)
            .clamp(1, self.values.len() - 1);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        let (x0, x1) = (self.knots[i - 1], self.knots[i]);
        x0 + (u - v0) / (v1 - v0) * (x1 - x0)
    }

    fn monotone_hazard(&self) -> bool {
        self.monotone_hazard
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn midpoint_mass(d: &dyn Distribution, n: usize) -> f64 {
        let h = d.upper() / n as f64;
        (0..n).map(|i| h * d.pdf((i as f64 + 0.5) * h)).sum()
    }

    #[test]
    fn uniform_hazard_matches_closed_form() {
        let d = Uniform::new(8.0).unwrap();
        assert!((hazard(&d, 0.0).unwrap() - 0.125).abs() < 1e-15);
        assert!((hazard(&d, 4.0).unwrap() - 0.25).abs() < 1e-15);
        for i in 0..20 {
            let x = 8.0 * i as f64 / 20.0;
            let direct = d.pdf(x) / (1.0 - d.cdf(x));
            assert!((hazard(&d, x).unwrap() - 1.0 / (8.0 - x)).abs() < 1e-12);
            assert!((direct - 1.0 / (8.0 - x)).abs() < 1e-12);
        }
    }

    #[test]
    fn hazard_undefined_at_upper_bound() {
        let d = Uniform::new(8.0).unwrap();
        assert!(matches!(hazard(&d, 8.0), Err(Error::Domain(_))));
        assert!(hazard(&d, -0.1).is_err());
    }

    #[test]
    fn densities_integrate_to_one() {
        let dists: Vec<Box<dyn Distribution>> = vec![
            Box::new(Uniform::new(8.0).unwrap()),
            Box::new(Uniform::unit()),
            Box::new(Power::new(2.0, 2.5).unwrap()),
            Box::new(Tabulated::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.25, 1.0]).unwrap()),
        ];
        for d in &dists {
            let mass = midpoint_mass(d.as_ref(), 200_000);
            assert!((mass - 1.0).abs() < 1e-6, "{d:?}: {mass}");
            assert_eq!(d.cdf(0.0), 0.0);
            assert_eq!(d.cdf(d.upper()), 1.0);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let dists: Vec<Box<dyn Distribution>> = vec![
            Box::new(Uniform::new(3.0).unwrap()),
            Box::new(Power::new(1.5, 3.0).unwrap()),
            Box::new(Tabulated::new(vec![0.0, 0.2, 0.7, 1.0], vec![0.0, 0.1, 0.5, 1.0]).unwrap()),
        ];
        for d in &dists {
            for i in 0..=50 {
                let x = d.upper() * i as f64 / 50.0;
                assert!((d.quantile(d.cdf(x)) - x).abs() < 1e-12, "{d:?} at {x}");
            }
        }
    }

    #[test]
    fn monotone_hazard_flags() {
        for d in [
            &Uniform::new(8.0).unwrap() as &dyn Distribution,
            &Power::new(1.0, 2.0).unwrap(),
        ] {
            assert!(d.monotone_hazard());
            let mut prev = f64::NEG_INFINITY;
            for i in 0..1000 {
                let x = d.upper() * i as f64 / 1000.0;
                let h = hazard(d, x).unwrap();
                assert!(h >= prev);
                prev = h;
            }
        }
        assert!(!Power::new(1.0, 0.5).unwrap().monotone_hazard());
        // density drops from 2 to 0.5: hazard falls across the knot
        let t = Tabulated::new(vec![0.0, 0.25, 1.0], vec![0.0, 0.5, 1.0]).unwrap();
        assert!(!t.monotone_hazard());
        let t = Tabulated::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.25, 1.0]).unwrap();
        assert!(t.monotone_hazard());
    }

    #[test]
    fn tabulated_rejects_bad_tables() {
        assert!(Tabulated::new(vec![0.0, 1.0], vec![0.0, 0.9]).is_err());
        assert!(Tabulated::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 0.5]).is_err());
        assert!(Tabulated::new(vec![0.0, 0.5, 0.5], vec![0.0, 0.5, 1.0]).is_err());
        assert!(Tabulated::new(vec![0.1, 1.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn belief_support_check() {
        assert!(check_belief_distribution(&Uniform::unit()).is_ok());
        assert!(check_belief_distribution(&Uniform::new(2.0).unwrap()).is_err());
    }
}
