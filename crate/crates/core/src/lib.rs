//! Threshold equilibria of a one-shot prisoner's dilemma in which each
//! partner may be an honest type who always cooperates.
//!
//! Strategic players privately observe the loss they suffer when
//! cooperating against a defector. Beliefs about the partner's honesty are
//! either commonly known ([`common`]) or privately drawn ([`diverse`]);
//! [`analysis`] compares the two, [`extensions`] covers asymmetric beliefs
//! and larger groups, and [`montecarlo`] checks everything by simulation.

pub mod analysis;
pub mod common;
pub mod curve;
pub mod dist;
pub mod diverse;
pub mod error;
pub mod extensions;
pub mod montecarlo;
pub mod numerics;
pub mod params;
pub mod payoff;

pub use curve::ThresholdCurve;
pub use dist::{Distribution, Power, Tabulated, Uniform};
pub use error::{Error, Result};
pub use params::{validate_params, GameParams};
