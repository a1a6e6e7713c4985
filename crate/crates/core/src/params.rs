use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of the belief clamp used wherever `pi / (1 - pi)` is evaluated.
pub const BELIEF_EPS: f64 = 1e-9;

/// Payoff primitives of the stage game.
///
/// `b` is the gain from defecting on a cooperating strategic partner and
/// `m` the moral cost of defecting on an honest one. Construction enforces
/// `b > 1` and `m > b - 1`; every other module relies on those bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    b: f64,
    m: f64,
}

impl GameParams {
    pub fn new(b: f64, m: f64) -> Result<Self> {
        if !b.is_finite() || !m.is_finite() {
            return Err(Error::InvalidParams(format!(
                "parameters must be finite (b = {b}, m = {m})"
            )));
        }
        if b <= 1.0 {
            return Err(Error::InvalidParams(format!(
                "defection benefit must satisfy b > 1 (got b = {b})"
            )));
        }
        if m <= b - 1.0 {
            return Err(Error::InvalidParams(format!(
                "moral cost must satisfy m > b - 1 (got b = {b}, m = {m})"
            )));
        }
        Ok(Self { b, m })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// `1 + m - b`, the net loss from defecting on an honest partner
    /// relative to mutual cooperation. Strictly positive.
    pub fn net_moral_cost(&self) -> f64 {
        1.0 + self.m - self.b
    }

    /// `(b - 1) / m`: the belief at which best responses switch from
    /// strategic substitutes to complements.
    pub fn pi_low(&self) -> f64 {
        (self.b - 1.0) / self.m
    }
}

/// Validates `(b, m)` and returns the parameter set.
pub fn validate_params(b: f64, m: f64) -> Result<GameParams> {
    GameParams::new(b, m)
}

/// `pi / (1 - pi)` with `pi` clamped to `[0, 1 - BELIEF_EPS]`.
pub(crate) fn odds(pi: f64) -> f64 {
    let pi = pi.clamp(0.0, 1.0 - BELIEF_EPS);
    pi / (1.0 - pi)
}

pub(crate) fn check_belief(pi: f64) -> Result<()> {
    if (0.0..=1.0).contains(&pi) {
        Ok(())
    } else {
        Err(Error::Domain(format!("belief must lie in [0, 1] (got {pi})")))
    }
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "cooperation probability must lie in [0, 1] (got {p})"
        )))
    }
}
