//! Expected stage payoffs of a strategic player.
//!
//! `pi` is the belief that the partner is honest and `p` the probability
//! that a strategic partner cooperates.

use crate::error::Result;
use crate::params::{check_belief, check_probability, GameParams};

/// Expected payoff from cooperating with loss `ell`.
pub fn payoff_cooperate(ell: f64, pi: f64, p: f64, _params: &GameParams) -> Result<f64> {
    check_belief(pi)?;
    check_probability(p)?;
    Ok(pi + (1.0 - pi) * p - (1.0 - pi) * (1.0 - p) * ell)
}

/// Expected payoff from defecting; independent of the loss.
pub fn payoff_defect(pi: f64, p: f64, params: &GameParams) -> Result<f64> {
    check_belief(pi)?;
    check_probability(p)?;
    Ok(pi * (params.b() - params.m()) + (1.0 - pi) * p * params.b())
}

/// `payoff_cooperate - payoff_defect`.
pub fn cooperation_advantage(ell: f64, pi: f64, p: f64, params: &GameParams) -> Result<f64> {
    Ok(payoff_cooperate(ell, pi, p, params)? - payoff_defect(pi, p, params)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::validate_params;

    #[test]
    fn certain_honest_partner_favours_cooperation() {
        let params = validate_params(3.0, 50.0).unwrap();
        for &(ell, p) in &[(0.0, 0.0), (7.5, 0.3), (2.0, 1.0)] {
            assert_eq!(payoff_cooperate(ell, 1.0, p, &params).unwrap(), 1.0);
            assert_eq!(payoff_defect(1.0, p, &params).unwrap(), -47.0);
        }
    }

    #[test]
    fn classical_dilemma_cell() {
        let params = validate_params(2.0, 8.0).unwrap();
        assert_eq!(payoff_cooperate(0.0, 0.0, 1.0, &params).unwrap(), 1.0);
        assert_eq!(payoff_defect(0.0, 1.0, &params).unwrap(), 2.0);
    }

    #[test]
    fn matches_enumeration_of_outcome_cells() {
        let params = validate_params(2.0, 8.0).unwrap();
        let (ell, pi, p) = (0.5, 0.2, 0.4);
        // partner honest / strategic cooperator / strategic defector
        let weights = [pi, (1.0 - pi) * p, (1.0 - pi) * (1.0 - p)];
        let coop_cells = [1.0, 1.0, -ell];
        let defect_cells = [2.0 - 8.0, 2.0, 0.0];
        let dot = |c: &[f64; 3]| weights.iter().zip(c).map(|(w, v)| w * v).sum::<f64>();
        let uc = payoff_cooperate(ell, pi, p, &params).unwrap();
        let ud = payoff_defect(pi, p, &params).unwrap();
        assert!((uc - dot(&coop_cells)).abs() < 1e-15);
        assert!((ud - dot(&defect_cells)).abs() < 1e-15);
        assert!((uc - 0.28).abs() < 1e-15);
        assert!((ud - (-1.2 + 0.64)).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_range_probabilities() {
        let params = validate_params(2.0, 8.0).unwrap();
        assert!(payoff_cooperate(0.1, 1.2, 0.5, &params).is_err());
        assert!(payoff_defect(0.5, -0.1, &params).is_err());
    }
}
