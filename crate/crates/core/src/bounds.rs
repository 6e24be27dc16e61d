//! Closed-form analysis: interference-plus-noise upper bound, sufficient
//! decoding conditions, minimum rounds and the chain-length limit.
//!
//! The bound replaces every unknown-interferer gain at node `i` by the largest
//! one, `|h_{(i-2),i}|²`. Each cancellation round then scales the residual
//! interference by the contraction factor
//!
//! ```text
//! ρ = |h_{(i-2),i}|² (i-2) / |h_{(i-1),i}|²
//! ```
//!
//! and the noise picked up along the way forms a geometric series in `ρ`.

use serde::Serialize;

use crate::channel::{to_db, ChannelModel};
use crate::error::{Error, Result};

/// `|ρ - 1|` below this is treated as `ρ = 1` (series limit `m + 1`).
const RHO_UNITY_TOL: f64 = 1e-12;
/// Slack subtracted before rounding the minimum-round bound up.
const CEIL_SLACK: f64 = 1e-12;

/// Contraction factor at node `i >= 3`.
pub fn rho(model: &ChannelModel, i: usize) -> Result<f64> {
    model.check_node(i, 3)?;
    Ok(model.gain(i - 2, i) * (i - 2) as f64 / model.gain(i - 1, i))
}

/// `1 + ρ + ... + ρ^m`
fn geometric(rho: f64, m: u32) -> f64 {
    if (rho - 1.0).abs() < RHO_UNITY_TOL {
        (m + 1) as f64
    } else {
        (1.0 - rho.powi(m as i32 + 1)) / (1.0 - rho)
    }
}

/// Upper bound on interference-plus-noise power after `m` rounds at node `i`.
pub fn interference_bound(model: &ChannelModel, i: usize, m: u32) -> Result<f64> {
    let r = rho(model, i)?;
    let worst = model.gain(i - 2, i) * (i - 2) as f64;
    Ok(worst * r.powi(m as i32) * model.tx_power() + model.noise_power() * geometric(r, m))
}

/// SINR implied by [`interference_bound`], in dB.
pub fn sinr_lower_bound(model: &ChannelModel, i: usize, m: u32) -> Result<f64> {
    let bound = interference_bound(model, i, m)?;
    Ok(to_db(model.gain(i - 1, i) * model.tx_power() / bound))
}

/// Condition under which some finite number of rounds provably reaches `gamma`:
///
/// ```text
/// i < |h_{(i-1),i}|²/|h_{(i-2),i}|² - γσ²/(|h_{(i-2),i}|² P_T) + 2
/// ```
pub fn feasibility_condition(model: &ChannelModel, i: usize, gamma: f64) -> Result<bool> {
    model.check_node(i, 3)?;
    let near = model.gain(i - 1, i);
    let two_hop = model.gain(i - 2, i);
    let rhs = near / two_hop - gamma * model.noise_power() / (two_hop * model.tx_power()) + 2.0;
    Ok((i as f64) < rhs)
}

/// Unrounded lower bound on `m` from the sufficient condition.
pub fn min_rounds_bound(model: &ChannelModel, i: usize, gamma: f64) -> Result<f64> {
    if !feasibility_condition(model, i, gamma)? {
        return Err(Error::Infeasible { node: i });
    }
    let r = rho(model, i)?;
    let p_t = model.tx_power();
    let near = model.gain(i - 1, i);
    let excess = model.noise_power() / (near - model.gain(i - 2, i) * (i - 2) as f64);
    let ratio = (p_t / gamma - excess) / (p_t - excess);
    Ok(ratio.ln() / r.ln() - 1.0)
}

/// Fewest rounds satisfying the sufficient condition at node `i`.
pub fn min_rounds(model: &ChannelModel, i: usize, gamma: f64) -> Result<u32> {
    let bound = min_rounds_bound(model, i, gamma)?;
    Ok((bound - CEIL_SLACK).ceil().max(0.0) as u32)
}

/// `γσ² / (|h_{(i-2),i}|² P_T)`: how far the two-hop link is from decodable.
pub fn placement_b(model: &ChannelModel, i: usize, gamma: f64) -> Result<f64> {
    model.check_node(i, 3)?;
    Ok(gamma * model.noise_power() / (model.gain(i - 2, i) * model.tx_power()))
}

/// Longest equally spaced chain for which every node passes the feasibility
/// condition.
///
/// With equal spacing the condition at every node reduces to
/// `i < 2^α - B + 2`. `b = None` uses `B = 2 - ε`, i.e. `i < 2^α + ε`. An
/// explicit `B` is an extension of that special case. Node 2 has no unknown
/// interference, so the result is never below 2.
pub fn max_chain_length(alpha: f64, b: Option<f64>, epsilon: f64) -> Result<usize> {
    if !(alpha > 0.0) {
        return Err(Error::config(format!("path-loss exponent must be > 0 (got {alpha})")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::config(format!("epsilon must be > 0 (got {epsilon})")));
    }
    let b = b.unwrap_or(2.0 - epsilon);
    if !(b > 0.0) {
        return Err(Error::config(format!("B must be > 0 (got {b})")));
    }
    if b <= 1.0 {
        log::warn!("B = {b} <= 1: nodes two hops apart could communicate directly");
    }
    let limit = 2f64.powf(alpha) - b + 2.0;
    // largest integer strictly below `limit`
    let largest = limit.ceil() - 1.0;
    Ok(largest.max(2.0) as usize)
}

/// One row of the bounds report for node `i` at `m` rounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub node: usize,
    pub rounds: u32,
    pub rho: f64,
    pub pi_upper_bound: f64,
    pub sinr_lower_bound_db: f64,
    pub feasible: bool,
    pub min_rounds: Option<u32>,
}

impl BoundReport {
    pub fn new(model: &ChannelModel, i: usize, m: u32, gamma: f64) -> Result<Self> {
        let feasible = feasibility_condition(model, i, gamma)?;
        Ok(BoundReport {
            node: i,
            rounds: m,
            rho: rho(model, i)?,
            pi_upper_bound: interference_bound(model, i, m)?,
            sinr_lower_bound_db: sinr_lower_bound(model, i, m)?,
            feasible,
            min_rounds: if feasible { Some(min_rounds(model, i, gamma)?) } else { None },
        })
    }

    pub const CSV_HEADER: [&'static str; 7] =
        ["i", "m", "rho", "pi_bound", "sinr_lb_db", "feasible", "min_rounds"];

    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.node.to_string(),
            self.rounds.to_string(),
            self.rho.to_string(),
            self.pi_upper_bound.to_string(),
            self.sinr_lower_bound_db.to_string(),
            self.feasible.to_string(),
            self.min_rounds.map_or_else(|| "infeasible".to_string(), |m| m.to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::from_db;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn scenario(n: usize, alpha: f64) -> ChannelModel {
        ChannelModel::equally_spaced(n, alpha, 1.0, 1.0, 20.0).unwrap()
    }

    #[test]
    fn rho_examples() {
        assert_relative_eq!(rho(&scenario(4, 3.0), 3).unwrap(), 0.125, max_relative = 1e-15);
        assert_relative_eq!(rho(&scenario(4, 3.0), 4).unwrap(), 0.25, max_relative = 1e-15);
        for alpha in [0.7, 2.1, 5.5] {
            assert_relative_eq!(rho(&scenario(3, alpha), 3).unwrap(), 2f64.powf(-alpha), max_relative = 1e-14);
        }
        assert!(rho(&scenario(4, 3.0), 2).is_err());
    }

    #[test]
    fn bound_examples() {
        let m = scenario(3, 3.0);
        assert_relative_eq!(interference_bound(&m, 3, 0).unwrap(), 0.135, max_relative = 1e-14);
        assert_relative_eq!(interference_bound(&m, 3, 1).unwrap(), 0.026875, max_relative = 1e-14);
        assert_relative_eq!(sinr_lower_bound(&m, 3, 0).unwrap(), 8.696_662_315_049_938, epsilon = 1e-9);
        assert_relative_eq!(sinr_lower_bound(&m, 3, 1).unwrap(), 15.706_515_270_763_383, epsilon = 1e-9);
    }

    #[test]
    fn bound_at_unit_rho_uses_series_limit() {
        // |h34|² = 1 and |h24|² = 1/2 gives ρ = (1/2)·2/1 = 1 at node 4
        let p2 = 2.5 - 2f64.sqrt();
        let m = ChannelModel::from_positions(vec![0.0, p2, 1.5, 2.5], 2.0, 1.0, 0.01).unwrap();
        let r = rho(&m, 4).unwrap();
        assert!((r - 1.0).abs() < 1e-12, "rho = {r}");
        let worst = m.gain(2, 4) * 2.0;
        for k in 0..4 {
            let want = worst * r.powi(k as i32) + 0.01 * (k + 1) as f64;
            assert_relative_eq!(interference_bound(&m, 4, k).unwrap(), want, max_relative = 1e-10);
        }
    }

    #[test]
    fn feasibility_examples() {
        assert!(feasibility_condition(&scenario(3, 3.0), 3, 10.0).unwrap());
        assert!(!feasibility_condition(&scenario(3, 0.1), 3, 10.0).unwrap());
    }

    #[test]
    fn min_rounds_examples() {
        let m = scenario(3, 3.0);
        assert_relative_eq!(min_rounds_bound(&m, 3, 10.0).unwrap(), 0.160_143_972, epsilon = 1e-8);
        assert_eq!(min_rounds(&m, 3, 10.0).unwrap(), 1);

        let quiet = scenario(4, 3.0).with_noise_power(0.0).unwrap();
        assert_eq!(min_rounds(&quiet, 3, 1.0).unwrap(), 0);
        assert_eq!(min_rounds(&quiet, 4, 1.0).unwrap(), 0);

        assert!(matches!(min_rounds(&scenario(3, 0.1), 3, 10.0), Err(Error::Infeasible { node: 3 })));
    }

    #[test]
    fn min_rounds_is_minimal_against_bound() {
        for alpha in [2.1, 3.0, 4.0, 5.0] {
            let model = scenario(10, alpha);
            for gamma_db in [0.0, 5.0, 10.0, 15.0] {
                let gamma = from_db(gamma_db);
                for i in 3..=10 {
                    if !feasibility_condition(&model, i, gamma).unwrap() {
                        continue;
                    }
                    let k = min_rounds(&model, i, gamma).unwrap();
                    assert!(from_db(sinr_lower_bound(&model, i, k).unwrap()) >= gamma * (1.0 - 1e-9));
                    if k > 0 {
                        assert!(from_db(sinr_lower_bound(&model, i, k - 1).unwrap()) < gamma);
                    }
                }
            }
        }
    }

    #[test]
    fn chain_length_examples() {
        assert_eq!(max_chain_length(4.0, None, 1e-9).unwrap(), 16);
        assert_eq!(max_chain_length(2.0, None, 1e-9).unwrap(), 4);
        assert_eq!(max_chain_length(3.0, None, 1e-9).unwrap(), 8);
        // explicit B: i < 2^3 - 1.5 + 2 = 8.5
        assert_eq!(max_chain_length(3.0, Some(1.5), 1e-9).unwrap(), 8);
        assert_eq!(max_chain_length(3.0, Some(1.0), 1e-9).unwrap(), 8);
        assert_eq!(max_chain_length(0.1, Some(1.9), 1e-9).unwrap(), 2);
        assert!(max_chain_length(3.0, Some(-1.0), 1e-9).is_err());
    }

    #[test]
    fn chain_length_agrees_with_feasibility() {
        // With B fixed per node the condition is exactly i < 2^α - B + 2.
        for alpha in [2.5, 3.0, 4.0] {
            let n = 40;
            let model = scenario(n, alpha);
            let gamma = 10.0;
            let b = placement_b(&model, 3, gamma).unwrap();
            let limit = max_chain_length(alpha, Some(b), 1e-9).unwrap();
            for i in 3..=n {
                assert_eq!(feasibility_condition(&model, i, gamma).unwrap(), i <= limit, "alpha={alpha} i={i}");
            }
        }
    }

    #[test]
    fn report_row() {
        let r = BoundReport::new(&scenario(3, 3.0), 3, 1, 10.0).unwrap();
        assert!(r.feasible);
        assert_eq!(r.min_rounds, Some(1));
        assert_eq!(r.csv_fields()[0..2], ["3".to_string(), "1".to_string()]);
        let r = BoundReport::new(&scenario(3, 0.1), 3, 1, 10.0).unwrap();
        assert_eq!(r.csv_fields()[6], "infeasible");
    }

    proptest! {
        #[test]
        fn feasible_implies_contraction(alpha in 0.3f64..6.0, snr in 0.0f64..40.0, gamma_db in 0.0f64..20.0, i in 3usize..20) {
            let model = ChannelModel::equally_spaced(i, alpha, 1.0, 1.0, snr).unwrap();
            let gamma = from_db(gamma_db);
            if feasibility_condition(&model, i, gamma).unwrap() {
                prop_assert!(rho(&model, i).unwrap() < 1.0);
            }
        }

        #[test]
        fn contraction_iff_gain_ratio(alpha in 0.3f64..6.0, i in 3usize..20) {
            let model = ChannelModel::equally_spaced(i, alpha, 1.0, 1.0, 20.0).unwrap();
            let r = rho(&model, i).unwrap();
            let ratio = model.gain(i - 1, i) / model.gain(i - 2, i);
            prop_assume!((r - 1.0).abs() > 1e-9);
            prop_assert_eq!(r < 1.0, (i as f64) < ratio + 2.0);
        }

        #[test]
        fn lower_bound_strictly_increasing(alpha in 0.3f64..6.0, snr in 0.0f64..40.0, gamma_db in 0.0f64..20.0, i in 3usize..16, m in 0u32..8) {
            let model = ChannelModel::equally_spaced(i, alpha, 1.0, 1.0, snr).unwrap();
            let gamma = from_db(gamma_db);
            prop_assume!(feasibility_condition(&model, i, gamma).unwrap());
            let a = interference_bound(&model, i, m).unwrap();
            let b = interference_bound(&model, i, m + 1).unwrap();
            prop_assert!(b < a);
        }

        #[test]
        fn sufficient_conditions_reach_threshold(alpha in 0.3f64..6.0, snr in 0.0f64..40.0, gamma_db in 0.0f64..20.0, i in 3usize..16) {
            let model = ChannelModel::equally_spaced(i, alpha, 1.0, 1.0, snr).unwrap();
            let gamma = from_db(gamma_db);
            prop_assume!(feasibility_condition(&model, i, gamma).unwrap());
            let k = min_rounds(&model, i, gamma).unwrap();
            for extra in 0..3 {
                let lb = from_db(sinr_lower_bound(&model, i, k + extra).unwrap());
                prop_assert!(lb >= gamma * (1.0 - 1e-9));
            }
        }
    }
}
