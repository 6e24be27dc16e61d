//! Chain topology and channel coefficients.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// A chain of `n` nodes, node 1 the source and node `n` the destination.
///
/// Channel gains are stored for every forward pair `j < i`; nodes are indexed
/// from 1 throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    n: usize,
    alpha: f64,
    /// Node positions along the line.
    positions: Vec<f64>,
    /// Row-major `n × n`; entry `(j-1)*n + (i-1)` holds `h_{ji}`.
    h: Vec<Complex64>,
    p_t: f64,
    sigma2: f64,
}

impl ChannelModel {
    /// Equally spaced chain with unit adjacent-hop gain, `|h_{ji}|² = (i-j)^-α`,
    /// and noise set so that the single-hop SNR equals `single_hop_snr_db`.
    pub fn equally_spaced(
        n: usize,
        alpha: f64,
        spacing: f64,
        p_t: f64,
        single_hop_snr_db: f64,
    ) -> Result<Self> {
        let mut errs = Vec::new();
        if !(spacing > 0.0 && spacing.is_finite()) {
            errs.push(format!("spacing must be > 0 (got {spacing})"));
        }
        if !single_hop_snr_db.is_finite() {
            errs.push(format!("single-hop SNR must be finite (got {single_hop_snr_db})"));
        }
        validate_common(n, alpha, p_t, &mut errs);
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let positions: Vec<f64> = (0..n).map(|k| k as f64 * spacing).collect();
        // Normalise so the adjacent gain is exactly 1 whatever the spacing.
        let sigma2 = p_t / from_db(single_hop_snr_db);
        Ok(Self::assemble(n, alpha, positions, p_t, sigma2, |hops, _| {
            (hops as f64).powf(-alpha / 2.0)
        }))
    }

    /// Arbitrary positions (strictly increasing), raw path loss `|h|² = d^-α`,
    /// explicit noise power.
    pub fn from_positions(positions: Vec<f64>, alpha: f64, p_t: f64, sigma2: f64) -> Result<Self> {
        let n = positions.len();
        let mut errs = Vec::new();
        validate_common(n, alpha, p_t, &mut errs);
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            errs.push(format!("noise power must be >= 0 (got {sigma2})"));
        }
        if positions.windows(2).any(|w| !(w[1] > w[0])) || positions.iter().any(|p| !p.is_finite()) {
            errs.push("positions must be finite and strictly increasing".into());
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        Ok(Self::assemble(n, alpha, positions, p_t, sigma2, |_, d| d.powf(-alpha / 2.0)))
    }

    fn assemble(
        n: usize,
        alpha: f64,
        positions: Vec<f64>,
        p_t: f64,
        sigma2: f64,
        amplitude: impl Fn(usize, f64) -> f64,
    ) -> Self {
        let mut h = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 1..=n {
            for i in (j + 1)..=n {
                let d = positions[i - 1] - positions[j - 1];
                h[(j - 1) * n + (i - 1)] = Complex64::new(amplitude(i - j, d), 0.0);
            }
        }
        ChannelModel { n, alpha, positions, h, p_t, sigma2 }
    }

    /// Rotate every coefficient by an independent uniform phase.
    pub fn with_random_phases(mut self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.n;
        for j in 1..=n {
            for i in (j + 1)..=n {
                let phi = rng.random::<f64>() * std::f64::consts::TAU;
                let k = (j - 1) * n + (i - 1);
                self.h[k] *= Complex64::from_polar(1.0, phi);
            }
        }
        self
    }

    pub fn with_noise_power(mut self, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::config(format!("noise power must be >= 0 (got {sigma2})")));
        }
        self.sigma2 = sigma2;
        Ok(self)
    }

    /// Multiply both transmit and noise power by `k`; all ratios are unchanged.
    pub fn with_power_scale(mut self, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::config(format!("power scale must be > 0 (got {k})")));
        }
        self.p_t *= k;
        self.sigma2 *= k;
        Ok(self)
    }

    pub fn nodes(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn tx_power(&self) -> f64 {
        self.p_t
    }

    pub fn noise_power(&self) -> f64 {
        self.sigma2
    }

    /// `h_{ji}` for `1 <= j < i <= n`.
    ///
    /// Panics on an out-of-range or backwards pair; callers index by
    /// construction.
    pub fn h(&self, j: usize, i: usize) -> Complex64 {
        assert!(
            1 <= j && j < i && i <= self.n,
            "channel index h({j},{i}) outside 1 <= j < i <= {}",
            self.n
        );
        self.h[(j - 1) * self.n + (i - 1)]
    }

    /// `|h_{ji}|²`
    pub fn gain(&self, j: usize, i: usize) -> f64 {
        self.h(j, i).norm_sqr()
    }

    pub(crate) fn check_node(&self, i: usize, min: usize) -> Result<()> {
        if i < min || i > self.n {
            return Err(Error::NodeOutOfRange { node: i, min, max: self.n });
        }
        Ok(())
    }

    /// Interference-free SNR of the hop `(i-1) → i`, in dB.
    pub fn snr_single_hop(&self, i: usize) -> Result<f64> {
        self.check_node(i, 2)?;
        Ok(to_db(self.gain(i - 1, i) * self.p_t / self.sigma2))
    }
}

fn validate_common(n: usize, alpha: f64, p_t: f64, errs: &mut Vec<String>) {
    if n < 2 {
        errs.push(format!("node count must be >= 2 (got {n})"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        errs.push(format!("path-loss exponent must be > 0 (got {alpha})"));
    }
    if !(p_t > 0.0 && p_t.is_finite()) {
        errs.push(format!("transmit power must be > 0 (got {p_t})"));
    }
}

/// How many cancellation rounds each node runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundsPolicy {
    /// Same number of rounds at every node.
    Uniform(u32),
    /// Per node, the fewest rounds the analytic sufficient condition accepts.
    AdaptiveMin,
}

/// Decoding threshold and the rounds policy, plus the optional placement
/// quantities used only by the chain-length analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Linear SINR threshold, `>= 1`.
    pub gamma: f64,
    pub single_hop_snr_db: f64,
    pub policy: RoundsPolicy,
    pub b: Option<f64>,
    pub epsilon: Option<f64>,
}

impl ScenarioConfig {
    pub fn new(gamma: f64, single_hop_snr_db: f64, policy: RoundsPolicy) -> Result<Self> {
        let cfg = ScenarioConfig { gamma, single_hop_snr_db, policy, b: None, epsilon: None };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.gamma >= 1.0) {
            errs.push(format!("gamma must be >= 1 linear / >= 0 dB (got {})", self.gamma));
        }
        if let Some(b) = self.b {
            if !(b > 0.0) {
                errs.push(format!("B must be > 0 (got {b})"));
            }
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0) {
                errs.push(format!("epsilon must be > 0 (got {eps})"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}
