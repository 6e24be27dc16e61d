//! Sample-level check of the symbolic cancellation.
//!
//! Each trial draws the packets and noise samples that `g_{i,m}(t)` touches,
//! then evaluates the cancelled signal two ways:
//!
//! 1. substitute the samples into the symbolic expression;
//! 2. build the received samples `y_i(t + s)` and combine them with the
//!    round-by-round weights `(-1)^k h_{j_1 i}···h_{j_k i} / h_{(i-1),i}^k`.
//!
//! The two must agree to rounding error. Averaging the residual power over
//! trials checks the predicted interference-plus-noise power.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelModel;
use crate::engine::cancel_rounds_recursive;
use crate::error::{Error, Result};
use crate::schedule::Schedule;
use crate::signal::{Slot, Term};

const TRIALS_PER_CHUNK: u64 = 2048;
const PATH_AGREEMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolModel {
    #[default]
    CircularGaussian,
    Qpsk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub symbol_model: SymbolModel,
}

impl McConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        McConfig { trials, seed, symbol_model: SymbolModel::CircularGaussian }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub node: usize,
    pub rounds: u32,
    pub trials: u64,
    pub seed: u64,
    pub empirical_useful_power: f64,
    pub empirical_residual_power: f64,
    pub predicted_useful_power: f64,
    pub predicted_residual_power: f64,
    pub predicted_interference_power: f64,
    pub predicted_noise_power: f64,
    /// `|empirical - predicted| / predicted` on the residual power.
    pub rel_error: f64,
}

impl McReport {
    pub const CSV_HEADER: [&'static str; 7] =
        ["i", "m", "trials", "seed", "pred_residual", "emp_residual", "rel_err"];

    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.node.to_string(),
            self.rounds.to_string(),
            self.trials.to_string(),
            self.seed.to_string(),
            self.predicted_residual_power.to_string(),
            self.empirical_residual_power.to_string(),
            self.rel_error.to_string(),
        ]
    }
}

/// Everything one trial needs, with terms resolved to sample indices.
struct Plan {
    data_slots: Vec<Slot>,
    noise_slots: Vec<Slot>,
    /// Symbolic expression: (is_data, index, coefficient).
    symbolic: Vec<(bool, usize, Complex64)>,
    /// Received samples: weight and its (data index, gain) list plus noise index.
    received: Vec<(Complex64, Vec<(usize, Complex64)>, usize)>,
    useful_index: usize,
    useful_gain: Complex64,
}

/// Weights on `y_i(t + s)` from summing every round's multi-index terms.
fn received_weights(model: &ChannelModel, schedule: &Schedule, i: usize, m: u32) -> BTreeMap<Slot, Complex64> {
    let strong = model.h(i - 1, i);
    let offsets = schedule.offsets(i);
    let k_max = offsets.len();
    let mut weights = BTreeMap::new();
    weights.insert(0, Complex64::new(1.0, 0.0));
    for round in 1..=m as usize {
        let sign = if round % 2 == 0 { 1.0 } else { -1.0 };
        let mut idx = vec![0usize; round];
        loop {
            let mut prod = Complex64::new(sign, 0.0);
            let mut shift: Slot = 0;
            for &j in &idx {
                prod *= model.h(j + 1, i) / strong;
                shift += offsets[j] as Slot;
            }
            *weights.entry(shift).or_insert_with(Complex64::default) += prod;
            // odometer over {0..k_max}^round
            let mut pos = 0;
            while pos < round {
                idx[pos] += 1;
                if idx[pos] < k_max {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == round {
                break;
            }
        }
    }
    weights
}

fn plan(model: &ChannelModel, schedule: &Schedule, i: usize, m: u32) -> Result<(Plan, crate::engine::CancellationResult)> {
    let result = cancel_rounds_recursive(model, schedule, i, m)?;
    let weights = received_weights(model, schedule, i, m);

    let mut data: BTreeMap<Slot, usize> = BTreeMap::new();
    let mut noise: BTreeMap<Slot, usize> = BTreeMap::new();
    let mut received = Vec::with_capacity(weights.len());
    for (&s, &w) in &weights {
        let mut parts = Vec::with_capacity(i - 1);
        for j in 1..i {
            let slot = s - schedule.delay(j) as Slot;
            let next = data.len();
            let idx = *data.entry(slot).or_insert(next);
            parts.push((idx, model.h(j, i)));
        }
        let next = noise.len();
        let n_idx = *noise.entry(s).or_insert(next);
        received.push((w, parts, n_idx));
    }

    let mut symbolic = Vec::with_capacity(result.expr.len());
    for (term, &c) in result.expr.iter() {
        let entry = match *term {
            Term::DataSymbol { slot } => data.get(&slot).map(|&k| (true, k, c)),
            Term::NoiseSample { node, slot } if node == i => noise.get(&slot).map(|&k| (false, k, c)),
            Term::NoiseSample { .. } => None,
        };
        symbolic.push(entry.ok_or_else(|| {
            Error::Consistency(format!("term {term} of g_{{{i},{m}}} is not carried by any received slot"))
        })?);
    }
    let useful_index = *data
        .get(&result.useful_slot)
        .ok_or_else(|| Error::Consistency("useful packet not received".into()))?;

    let mut data_slots = vec![0; data.len()];
    for (s, k) in data {
        data_slots[k] = s;
    }
    let mut noise_slots = vec![0; noise.len()];
    for (s, k) in noise {
        noise_slots[k] = s;
    }
    let plan = Plan {
        data_slots,
        noise_slots,
        symbolic,
        received,
        useful_index,
        useful_gain: model.h(i - 1, i),
    };
    Ok((plan, result))
}

fn gaussian(rng: &mut ChaCha8Rng, power: f64) -> Complex64 {
    let scale = (power / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * scale, im * scale)
}

fn qpsk(rng: &mut ChaCha8Rng, power: f64) -> Complex64 {
    use rand::Rng;
    let a = (power / 2.0).sqrt();
    let re = if rng.random::<bool>() { a } else { -a };
    let im = if rng.random::<bool>() { a } else { -a };
    Complex64::new(re, im)
}

#[derive(Default, Clone, Copy)]
struct Sums {
    useful: f64,
    residual: f64,
}

fn run_chunk(plan: &Plan, model: &ChannelModel, cfg: &McConfig, first: u64, count: u64) -> Result<Sums> {
    let mut sums = Sums::default();
    let mut x = vec![Complex64::default(); plan.data_slots.len()];
    let mut z = vec![Complex64::default(); plan.noise_slots.len()];
    let (p_t, sigma2) = (model.tx_power(), model.noise_power());
    for trial in first..first + count {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(trial);
        for v in x.iter_mut() {
            *v = match cfg.symbol_model {
                SymbolModel::CircularGaussian => gaussian(&mut rng, p_t),
                SymbolModel::Qpsk => qpsk(&mut rng, p_t),
            };
        }
        for v in z.iter_mut() {
            *v = gaussian(&mut rng, sigma2);
        }

        let symbolic: Complex64 = plan
            .symbolic
            .iter()
            .map(|&(is_data, k, c)| c * if is_data { x[k] } else { z[k] })
            .sum();
        let combined: Complex64 = plan
            .received
            .iter()
            .map(|(w, parts, n)| {
                let y: Complex64 = parts.iter().map(|&(k, h)| h * x[k]).sum::<Complex64>() + z[*n];
                w * y
            })
            .sum();
        if (symbolic - combined).norm() > PATH_AGREEMENT_TOL * symbolic.norm().max(1.0) {
            return Err(Error::Consistency(format!(
                "trial {trial}: symbolic {symbolic} vs received-sample {combined}"
            )));
        }
        let useful = plan.useful_gain * x[plan.useful_index];
        sums.useful += useful.norm_sqr();
        sums.residual += (symbolic - useful).norm_sqr();
    }
    Ok(sums)
}

/// Empirical vs predicted powers of `g_{i,m}(t)` over `cfg.trials` draws.
///
/// Trial `k` always uses stream `k` of a generator seeded with `cfg.seed`, so
/// the report does not depend on how trials are split across threads.
pub fn run_monte_carlo(
    model: &ChannelModel,
    schedule: &Schedule,
    i: usize,
    m: u32,
    cfg: &McConfig,
) -> Result<McReport> {
    if cfg.trials == 0 {
        return Err(Error::config("monte carlo needs at least one trial"));
    }
    let (plan, result) = plan(model, schedule, i, m)?;
    let chunks: Vec<(u64, u64)> = (0..cfg.trials)
        .step_by(TRIALS_PER_CHUNK as usize)
        .map(|start| (start, TRIALS_PER_CHUNK.min(cfg.trials - start)))
        .collect();

    #[cfg(feature = "parallel")]
    let partial: Vec<Result<Sums>> = {
        use rayon::prelude::*;
        chunks.par_iter().map(|&(s, n)| run_chunk(&plan, model, cfg, s, n)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let partial: Vec<Result<Sums>> = chunks.iter().map(|&(s, n)| run_chunk(&plan, model, cfg, s, n)).collect();

    let mut total = Sums::default();
    for p in partial {
        let p = p?;
        total.useful += p.useful;
        total.residual += p.residual;
    }
    let n = cfg.trials as f64;
    let predicted = result.coherent;
    let empirical_residual_power = total.residual / n;
    let pred_residual = predicted.residual();
    let diff = (empirical_residual_power - pred_residual).abs();
    Ok(McReport {
        node: i,
        rounds: m,
        trials: cfg.trials,
        seed: cfg.seed,
        empirical_useful_power: total.useful / n,
        empirical_residual_power,
        predicted_useful_power: predicted.useful,
        predicted_residual_power: pred_residual,
        predicted_interference_power: predicted.interference,
        predicted_noise_power: predicted.noise,
        rel_error: if pred_residual > 0.0 { diff / pred_residual } else { diff },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::interference_bound;

    fn scenario(n: usize, alpha: f64) -> ChannelModel {
        ChannelModel::equally_spaced(n, alpha, 1.0, 1.0, 20.0).unwrap()
    }

    #[test]
    fn node3_one_round_matches_prediction() {
        let model = scenario(3, 3.0);
        let s = Schedule::uniform(3, 1).unwrap();
        let r = run_monte_carlo(&model, &s, 3, 1, &McConfig::new(100_000, 11)).unwrap();
        assert!((r.predicted_residual_power - 0.026875).abs() < 1e-12);
        assert!(r.rel_error < 0.02, "{r:?}");
        assert!((r.empirical_useful_power - 1.0).abs() < 0.02);
    }

    #[test]
    fn noise_free_residual_is_pure_interference() {
        let model = scenario(5, 3.0).with_noise_power(0.0).unwrap();
        let s = Schedule::uniform(5, 1).unwrap();
        let trials = 20_000;
        let r = run_monte_carlo(&model, &s, 5, 1, &McConfig::new(trials, 5)).unwrap();
        assert_eq!(r.predicted_noise_power, 0.0);
        assert_eq!(r.predicted_residual_power, r.predicted_interference_power);
        assert!(r.rel_error < 3.0 / (trials as f64).sqrt(), "{r:?}");
    }

    #[test]
    fn single_trial_is_reproducible() {
        let model = scenario(4, 2.1);
        let s = Schedule::uniform(4, 2).unwrap();
        let cfg = McConfig::new(1, 99);
        let a = run_monte_carlo(&model, &s, 4, 2, &cfg).unwrap();
        let b = run_monte_carlo(&model, &s, 4, 2, &cfg).unwrap();
        assert_eq!(a, b);
        let c = run_monte_carlo(&model, &s, 4, 2, &McConfig::new(1, 100)).unwrap();
        assert_ne!(a.empirical_residual_power, c.empirical_residual_power);
    }

    #[test]
    fn qpsk_symbols() {
        let model = scenario(4, 3.0);
        let s = Schedule::uniform(4, 1).unwrap();
        let cfg = McConfig { trials: 50_000, seed: 3, symbol_model: SymbolModel::Qpsk };
        let r = run_monte_carlo(&model, &s, 4, 1, &cfg).unwrap();
        // |h x|² is constant for QPSK
        assert!((r.empirical_useful_power - 1.0).abs() < 1e-12);
        assert!(r.rel_error < 0.03, "{r:?}");
    }

    #[test]
    fn random_phases_still_agree() {
        let model = scenario(5, 3.0).with_random_phases(21);
        let s = Schedule::uniform(5, 2).unwrap();
        let r = run_monte_carlo(&model, &s, 5, 2, &McConfig::new(20_000, 8)).unwrap();
        assert!(r.rel_error < 0.05, "{r:?}");
    }

    #[test]
    fn empirical_residual_within_bound() {
        let trials = 10_000u64;
        for alpha in [2.1, 3.0, 4.0] {
            let model = scenario(6, alpha);
            for m in 0..=3 {
                let s = Schedule::uniform(6, m).unwrap();
                for i in 3..=6 {
                    let r = run_monte_carlo(&model, &s, i, m, &McConfig::new(trials, 1)).unwrap();
                    let bound = interference_bound(&model, i, m).unwrap();
                    let slack = 1.0 + 5.0 / (trials as f64).sqrt();
                    assert!(r.empirical_residual_power <= bound * slack, "alpha={alpha} i={i} m={m}");
                    assert!(r.rel_error < 5.0 / (trials as f64).sqrt(), "alpha={alpha} i={i} m={m}: {r:?}");
                }
            }
        }
    }

    #[test]
    fn zero_trials_rejected() {
        let model = scenario(3, 3.0);
        let s = Schedule::uniform(3, 1).unwrap();
        assert!(run_monte_carlo(&model, &s, 3, 1, &McConfig::new(0, 1)).is_err());
    }
}
