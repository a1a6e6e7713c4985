//! Simulation and deviation checks for threshold strategies.
//!
//! Honesty is drawn with probability equal to the relevant belief, so the
//! belief is treated as the true share of honest partners. Draws come from
//! ChaCha8 keyed by the seed, with one stream per fixed-size tranche;
//! tranches run in parallel and are reduced in tranche order, so a report
//! depends only on the seed and the configuration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::common::solve_common_equilibria;
use crate::curve::{uniform_grid, ThresholdCurve};
use crate::dist::{check_belief_distribution, Distribution};
use crate::diverse::{cooperation_prob_given_strategy, solve_diverse_threshold};
use crate::error::{Error, Result};
use crate::extensions::asymmetric::solve_asymmetric;
use crate::params::{check_belief, GameParams};
use crate::payoff::cooperation_advantage;

/// Samples per RNG stream.
pub const TRANCHE: u64 = 1 << 16;
/// Grid used for the deviation check attached to simulation reports.
pub const REPORT_DEVIATION_GRID: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SimScenario {
    Common { pi: f64 },
    Diverse,
    /// The focal player holds `pi1`; the partner holds `pi2`.
    Asymmetric { pi1: f64, pi2: f64 },
}

/// Where the simulated players' strategy comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrategySource {
    /// Solve for the equilibrium of the scenario.
    Analytic,
    /// Loss cutoff over belief (common) or belief cutoff over loss (diverse).
    Supplied { curve: ThresholdCurve },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub scenario: SimScenario,
    pub strategy_source: StrategySource,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Domain("n_samples must be at least 1".into()));
        }
        let beliefs: Vec<f64> = match self.scenario {
            SimScenario::Common { pi } => vec![pi],
            SimScenario::Diverse => vec![],
            SimScenario::Asymmetric { pi1, pi2 } => vec![pi1, pi2],
        };
        for pi in beliefs {
            if !(0.0..1.0).contains(&pi) {
                return Err(Error::Domain(format!(
                    "scenario beliefs must lie in [0, 1) (got {pi})"
                )));
            }
        }
        if matches!(self.scenario, SimScenario::Asymmetric { .. })
            && self.strategy_source != StrategySource::Analytic
        {
            return Err(Error::Domain(
                "the asymmetric scenario only supports analytic strategies".into(),
            ));
        }
        Ok(())
    }
}

/// A concrete strategy profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    /// Both players cooperate iff their loss is at most `threshold`.
    Common { pi: f64, threshold: f64 },
    /// Cooperate iff the private belief is at least `curve(loss)`.
    Diverse { curve: ThresholdCurve },
    Asymmetric { pi1: f64, pi2: f64, ell1: f64, ell2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub scenario: SimScenario,
    pub n_samples: u64,
    pub seed: u64,
    pub strategic_cooperations: u64,
    /// Cooperation frequency of the focal strategic player.
    pub coop_rate_strategic: f64,
    /// 95% half-width `1.96 sqrt(p (1 - p) / n)`.
    pub half_width: f64,
    pub analytic_prediction: f64,
    /// Largest payoff gain from deviating, from [`deviation_check`].
    pub max_deviation_gain: f64,
    /// Mean realised payoff when the focal player cooperates.
    pub mean_payoff_cooperate: Option<f64>,
    /// Mean realised payoff when the focal player defects.
    pub mean_payoff_defect: Option<f64>,
}

impl SimReport {
    /// `|rate - prediction|` in units of the half-width.
    pub fn z_distance(&self) -> f64 {
        let gap = (self.coop_rate_strategic - self.analytic_prediction).abs();
        if self.half_width > 0.0 {
            gap / self.half_width
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Resolves the strategy profile and its predicted cooperation rate.
pub fn resolve_profile(
    config: &SimConfig,
    params: &GameParams,
    loss: &dyn Distribution,
    belief: &dyn Distribution,
) -> Result<(Profile, f64)> {
    match (&config.scenario, &config.strategy_source) {
        (SimScenario::Common { pi }, source) => {
            let threshold = match source {
                StrategySource::Analytic => {
                    solve_common_equilibria(*pi, params, loss, 1e-13)?.roots[0].threshold
                }
                StrategySource::Supplied { curve } => curve.eval(*pi)?,
            };
            let threshold = threshold.clamp(0.0, loss.upper());
            Ok((Profile::Common { pi: *pi, threshold }, loss.cdf(threshold)))
        }
        (SimScenario::Diverse, source) => {
            check_belief_distribution(belief)?;
            let curve = match source {
                StrategySource::Analytic => {
                    solve_diverse_threshold(params, loss, belief, 1e-12, 10_000)?.threshold
                }
                StrategySource::Supplied { curve } => curve.clone(),
            };
            let p = cooperation_prob_given_strategy(&curve, loss, belief)?;
            Ok((Profile::Diverse { curve }, p))
        }
        (SimScenario::Asymmetric { pi1, pi2 }, _) => {
            let eq = solve_asymmetric(*pi1, *pi2, params, loss, 1e-13)?;
            Ok((
                Profile::Asymmetric {
                    pi1: *pi1,
                    pi2: *pi2,
                    ell1: eq.ell1_hat,
                    ell2: eq.ell2_hat,
                },
                loss.cdf(eq.ell1_hat),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    cooperations: u64,
    payoff_cooperate: f64,
    payoff_defect: f64,
}

fn realised_payoff(cooperate: bool, partner_honest: bool, partner_cooperates: bool, ell: f64, params: &GameParams) -> f64 {
    match (cooperate, partner_honest || partner_cooperates) {
        (true, true) => 1.0,
        (true, false) => -ell,
        (false, _) if partner_honest => params.b() - params.m(),
        (false, true) => params.b(),
        (false, false) => 0.0,
    }
}

fn run_tranche(
    seed: u64,
    tranche: u64,
    count: u64,
    profile: &Profile,
    params: &GameParams,
    loss: &dyn Distribution,
    belief: &dyn Distribution,
) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tranche);
    let mut tally = Tally::default();
    for _ in 0..count {
        let ell = loss.quantile(rng.random::<f64>());
        let (cooperate, honest_prob) = match profile {
            Profile::Common { pi, threshold } => (ell <= *threshold, *pi),
            Profile::Diverse { curve } => {
                let pi = belief.quantile(rng.random::<f64>());
                (pi >= curve.eval(ell).unwrap_or(1.0), pi)
            }
            Profile::Asymmetric { pi1, ell1, .. } => (ell <= *ell1, *pi1),
        };
        let partner_honest = rng.random::<f64>() < honest_prob;
        let partner_ell = loss.quantile(rng.random::<f64>());
        let partner_cooperates = !partner_honest
            && match profile {
                Profile::Common { threshold, .. } => partner_ell <= *threshold,
                Profile::Diverse { curve } => {
                    let pi = belief.quantile(rng.random::<f64>());
                    pi >= curve.eval(partner_ell).unwrap_or(1.0)
                }
                Profile::Asymmetric { ell2, .. } => partner_ell <= *ell2,
            };
        let payoff = realised_payoff(cooperate, partner_honest, partner_cooperates, ell, params);
        if cooperate {
            tally.cooperations += 1;
            tally.payoff_cooperate += payoff;
        } else {
            tally.payoff_defect += payoff;
        }
    }
    tally
}

/// Plays `n_samples` independent matches and tallies the focal player's behaviour.
pub fn simulate(
    config: &SimConfig,
    params: &GameParams,
    loss: &dyn Distribution,
    belief: &dyn Distribution,
) -> Result<SimReport> {
    config.validate()?;
    let (profile, prediction) = resolve_profile(config, params, loss, belief)?;
    let n = config.n_samples;
    let tranches = n.div_ceil(TRANCHE);
    let parts: Vec<Tally> = (0..tranches)
        .into_par_iter()
        .map(|t| {
            let count = TRANCHE.min(n - t * TRANCHE);
            run_tranche(config.seed, t, count, &profile, params, loss, belief)
        })
        .collect();
    let total = parts.iter().fold(Tally::default(), |acc, p| Tally {
        cooperations: acc.cooperations + p.cooperations,
        payoff_cooperate: acc.payoff_cooperate + p.payoff_cooperate,
        payoff_defect: acc.payoff_defect + p.payoff_defect,
    });
    let rate = total.cooperations as f64 / n as f64;
    let defections = n - total.cooperations;
    Ok(SimReport {
        scenario: config.scenario,
        n_samples: n,
        seed: config.seed,
        strategic_cooperations: total.cooperations,
        coop_rate_strategic: rate,
        half_width: 1.96 * (rate * (1.0 - rate) / n as f64).sqrt(),
        analytic_prediction: prediction,
        max_deviation_gain: deviation_check(&profile, params, loss, belief, REPORT_DEVIATION_GRID)?,
        mean_payoff_cooperate: (total.cooperations > 0)
            .then(|| total.payoff_cooperate / total.cooperations as f64),
        mean_payoff_defect: (defections > 0).then(|| total.payoff_defect / defections as f64),
    })
}

fn gain(prescribed_cooperate: bool, advantage: f64) -> f64 {
    if prescribed_cooperate {
        -advantage
    } else {
        advantage
    }
}

/// Largest expected-payoff gain from switching action at any grid point,
/// computed exactly against the partner's cooperation probability. Zero or
/// negative at an equilibrium.
pub fn deviation_check(
    profile: &Profile,
    params: &GameParams,
    loss: &dyn Distribution,
    belief: &dyn Distribution,
    grid: usize,
) -> Result<f64> {
    let ells = uniform_grid(0.0, loss.upper(), grid)?;
    let mut worst = f64::NEG_INFINITY;
    match profile {
        Profile::Common { pi, threshold } => {
            check_belief(*pi)?;
            let p = loss.cdf(*threshold);
            for &l in &ells {
                worst = worst.max(gain(l <= *threshold, cooperation_advantage(l, *pi, p, params)?));
            }
        }
        Profile::Diverse { curve } => {
            let p = cooperation_prob_given_strategy(curve, loss, belief)?;
            let pis = uniform_grid(0.0, 1.0, grid)?;
            for &l in &ells {
                let cutoff = curve.eval(l)?;
                for &pi in &pis {
                    worst = worst.max(gain(pi >= cutoff, cooperation_advantage(l, pi, p, params)?));
                }
            }
        }
        Profile::Asymmetric { pi1, pi2, ell1, ell2 } => {
            let (p1, p2) = (loss.cdf(*ell1), loss.cdf(*ell2));
            for &l in &ells {
                worst = worst.max(gain(l <= *ell1, cooperation_advantage(l, *pi1, p2, params)?));
                worst = worst.max(gain(l <= *ell2, cooperation_advantage(l, *pi2, p1, params)?));
            }
        }
    }
    Ok(worst.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Uniform;
    use crate::params::validate_params;

    fn common_config(pi: f64, n: u64, seed: u64) -> SimConfig {
        SimConfig {
            n_samples: n,
            seed,
            scenario: SimScenario::Common { pi },
            strategy_source: StrategySource::Analytic,
        }
    }

    #[test]
    fn common_rate_matches_prediction() {
        let params = validate_params(2.0, 8.0).unwrap();
        let u = Uniform::unit();
        let r = simulate(&common_config(0.05, 200_000, 7), &params, &u, &u).unwrap();
        assert!(r.z_distance() <= 3.0, "{r:?}");
        assert!(r.max_deviation_gain <= 1e-6);
    }

    #[test]
    fn zero_belief_never_cooperates() {
        let params = validate_params(2.0, 8.0).unwrap();
        let u = Uniform::unit();
        let r = simulate(&common_config(0.0, 10_000, 1), &params, &u, &u).unwrap();
        assert_eq!(r.strategic_cooperations, 0);
        assert_eq!(r.half_width, 0.0);
        assert_eq!(r.mean_payoff_cooperate, None);
    }

    #[test]
    fn reports_are_reproducible() {
        let params = validate_params(3.0, 50.0).unwrap();
        let f = Uniform::new(8.0).unwrap();
        let cfg = common_config(0.03, 300_001, 42);
        let a = simulate(&cfg, &params, &f, &Uniform::unit()).unwrap();
        let b = simulate(&cfg, &params, &f, &Uniform::unit()).unwrap();
        assert_eq!(a, b);
        let c = simulate(&common_config(0.03, 300_001, 43), &params, &f, &Uniform::unit()).unwrap();
        assert_ne!(a.strategic_cooperations, c.strategic_cooperations);
    }

    #[test]
    fn payoff_means_match_expectations() {
        let params = validate_params(2.0, 8.0).unwrap();
        let u = Uniform::unit();
        let cfg = common_config(0.05, 400_000, 3);
        let r = simulate(&cfg, &params, &u, &u).unwrap();
        let t = crate::common::closed_form_common_uniform(0.05, &params).unwrap();
        let p = t;
        // E[payoff | C] averages u_C over losses below t; E[payoff | D] is u_D
        let mean_c = 0.05 + 0.95 * p - 0.95 * (1.0 - p) * t / 2.0;
        let mean_d = 0.05 * (2.0 - 8.0) + 0.95 * p * 2.0;
        assert!((r.mean_payoff_cooperate.unwrap() - mean_c).abs() < 0.02);
        assert!((r.mean_payoff_defect.unwrap() - mean_d).abs() < 0.02);
    }

    #[test]
    fn diverse_and_asymmetric_rates() {
        let params = validate_params(2.0, 8.0).unwrap();
        let u = Uniform::unit();
        let cfg = SimConfig {
            n_samples: 200_000,
            seed: 11,
            scenario: SimScenario::Diverse,
            strategy_source: StrategySource::Analytic,
        };
        let r = simulate(&cfg, &params, &u, &u).unwrap();
        assert!(r.z_distance() <= 3.0, "{r:?}");
        assert!(r.max_deviation_gain <= 1e-6);
        let params = validate_params(3.0, 50.0).unwrap();
        let f = Uniform::new(8.0).unwrap();
        let cfg = SimConfig {
            scenario: SimScenario::Asymmetric { pi1: 0.03, pi2: 0.05 },
            ..cfg
        };
        let r = simulate(&cfg, &params, &f, &u).unwrap();
        assert!(r.z_distance() <= 3.0, "{r:?}");
        assert!(r.max_deviation_gain <= 1e-6);
    }

    #[test]
    fn shifted_strategy_is_not_an_equilibrium() {
        let params = validate_params(2.0, 8.0).unwrap();
        let u = Uniform::unit();
        let t = crate::common::closed_form_common_uniform(0.05, &params).unwrap();
        let off = Profile::Common { pi: 0.05, threshold: t + 0.1 };
        assert!(deviation_check(&off, &params, &u, &u, 201).unwrap() > 1e-3);
        let sol = solve_diverse_threshold(&params, &u, &u, 1e-12, 10_000).unwrap();
        let shifted = sol.threshold.map_values((0.0, 1.0), |v| (v + 0.1).min(1.0)).unwrap();
        assert!(deviation_check(&Profile::Diverse { curve: shifted }, &params, &u, &u, 101).unwrap() > 1e-3);
    }

    #[test]
    fn certain_honesty_always_favours_cooperation() {
        let params = validate_params(2.0, 8.0).unwrap();
        let u = Uniform::unit();
        for l in [0.0, 0.5, 1.0] {
            for p in [0.0, 1.0] {
                assert!((cooperation_advantage(l, 1.0, p, &params).unwrap() - (1.0 - (2.0 - 8.0))).abs() < 1e-15);
            }
        }
        let profile = Profile::Common { pi: 0.999, threshold: 1.0 };
        assert_eq!(deviation_check(&profile, &params, &u, &u, 11).unwrap(), 0.0);
    }

    #[test]
    fn half_width_scales_with_sample_size() {
        let params = validate_params(2.0, 8.0).unwrap();
        let u = Uniform::unit();
        let widths: Vec<f64> = [10_000u64, 100_000, 1_000_000]
            .iter()
            .map(|&n| simulate(&common_config(0.05, n, 5), &params, &u, &u).unwrap().half_width)
            .collect();
        for w in widths.windows(2) {
            assert!((w[0] / w[1] / 10f64.sqrt() - 1.0).abs() < 0.2);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let params = validate_params(2.0, 8.0).unwrap();
        let u = Uniform::unit();
        assert!(simulate(&common_config(0.05, 0, 1), &params, &u, &u).is_err());
        assert!(simulate(&common_config(1.0, 10, 1), &params, &u, &u).is_err());
    }
}
