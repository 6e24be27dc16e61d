//! Received signals and iterative cancellation of unknown interference.
//!
//! All cancellation output is expressed relative to the decoding slot `t`,
//! which is taken as slot 0: node `i` is after `x(-Δ_{i-1})`, interference
//! from node `j` shows up as `x(-Δ_j)`, and the noise ladder sits at
//! `z_i(0), z_i(δ), ...`.
//!
//! Each round takes every unknown-interference term `c·x(τ)` still present and
//! subtracts `(c / h_{(i-1),i}) · y_i(τ + Δ_{i-1})`, the later received slot in
//! which node `i-1` forwards `x(τ)` over the strong link. That removes `x(τ)`
//! and brings in weaker interference plus one more noise sample.
//! [`cancel_rounds_expanded`] builds the same signal straight from the
//! multi-index sum and serves as a cross-check.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{from_db, ChannelModel};
use crate::error::{Error, Result};
use crate::schedule::Schedule;
use crate::signal::{LinComb, PathExpr, PathTerm, PowerSplit, SignalExpr, Slot, Term, TermKey};

pub const DEFAULT_TERM_BUDGET: u128 = 1_000_000;

/// How interference-plus-noise power is totalled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinrAccounting {
    /// Every summand of the multi-index expansion counts as its own power
    /// contribution, even when several land on the same symbol.
    #[default]
    PerPath,
    /// Contributions on the same symbol add as amplitudes first.
    Coherent,
}

impl std::str::FromStr for SinrAccounting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_path" | "per-path" => Ok(SinrAccounting::PerPath),
            "coherent" => Ok(SinrAccounting::Coherent),
            other => Err(Error::config(format!(
                "unknown accounting `{other}` (expected per_path or coherent)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CancellationResult {
    pub node: usize,
    pub rounds: u32,
    /// `g_{i,m}(t)` with `t = 0`.
    pub expr: SignalExpr,
    /// Slot of the wanted packet, `-Δ_{i-1}`.
    pub useful_slot: Slot,
    /// Powers of `expr` (coincident contributions merged).
    pub coherent: PowerSplit,
    /// Powers with every expansion path counted separately.
    pub per_path: PowerSplit,
    /// `m · Δ_{i-1}`
    pub slots_waited: u64,
}

impl CancellationResult {
    pub fn powers(&self, accounting: SinrAccounting) -> PowerSplit {
        match accounting {
            SinrAccounting::PerPath => self.per_path,
            SinrAccounting::Coherent => self.coherent,
        }
    }

    pub fn sinr_db(&self, accounting: SinrAccounting) -> f64 {
        self.powers(accounting).sinr_db()
    }
}

fn as_slot(v: u64) -> Slot {
    Slot::try_from(v).expect("slot offset exceeds i64")
}

fn check_nodes(model: &ChannelModel, schedule: &Schedule, i: usize, min: usize) -> Result<()> {
    model.check_node(i, min)?;
    if i > schedule.nodes() {
        return Err(Error::NodeOutOfRange { node: i, min, max: schedule.nodes() });
    }
    Ok(())
}

/// `y_i(t)` after all known signals are removed, in absolute slots.
///
/// Only steady-state slots are accepted: every upstream node must already be
/// forwarding, i.e. `t > Δ_{i-1}`.
pub fn received_signal(model: &ChannelModel, schedule: &Schedule, i: usize, t: Slot) -> Result<SignalExpr> {
    check_nodes(model, schedule, i, 2)?;
    let first = as_slot(schedule.delay(i - 1)) + 1;
    if t < first {
        return Err(Error::Transient { node: i, slot: t, first });
    }
    Ok(received_at(model, schedule, i, t))
}

fn received_at(model: &ChannelModel, schedule: &Schedule, i: usize, t: Slot) -> SignalExpr {
    let mut y = SignalExpr::new();
    for j in 1..i {
        y.add_term(Term::data(t - as_slot(schedule.delay(j))), model.h(j, i));
    }
    y.add_term(Term::noise(i, t), Complex64::new(1.0, 0.0));
    y
}

/// One component of `y_i(s)`: the symbol and which interferer carried it
/// (`None` for the strong link and for noise).
struct Component {
    term: Term,
    via: Option<u16>,
    coef: Complex64,
}

fn components(model: &ChannelModel, schedule: &Schedule, i: usize, s: Slot) -> Vec<Component> {
    let mut out = Vec::with_capacity(i);
    for j in 1..i {
        out.push(Component {
            term: Term::data(s - as_slot(schedule.delay(j))),
            via: (j < i - 1).then_some(j as u16),
            coef: model.h(j, i),
        });
    }
    out.push(Component { term: Term::noise(i, s), via: None, coef: Complex64::new(1.0, 0.0) });
    out
}

trait Labeling {
    type Key: TermKey;

    fn label(&self, parent: Option<&Self::Key>, term: Term, via: Option<u16>) -> Self::Key;
}

struct Merged;

impl Labeling for Merged {
    type Key = Term;

    fn label(&self, _: Option<&Term>, term: Term, _: Option<u16>) -> Term {
        term
    }
}

struct ByPath;

impl Labeling for ByPath {
    type Key = PathTerm;

    fn label(&self, parent: Option<&PathTerm>, term: Term, via: Option<u16>) -> PathTerm {
        let mut path = parent.map(|p| p.path.clone()).unwrap_or_default();
        path.extend(via);
        PathTerm { term, path }
    }
}

fn run_rounds<L: Labeling>(
    model: &ChannelModel,
    schedule: &Schedule,
    i: usize,
    m: u32,
    labels: &L,
) -> LinComb<L::Key> {
    let last = as_slot(schedule.delay(i - 1));
    let useful_slot = -last;
    let strong = model.h(i - 1, i);

    let mut g = LinComb::new();
    for c in components(model, schedule, i, 0) {
        g.add_term(labels.label(None, c.term, c.via), c.coef);
    }

    for _round in 0..m {
        let targets: Vec<(L::Key, Complex64)> = g
            .iter()
            .filter(|(k, _)| matches!(k.term(), Term::DataSymbol { slot } if *slot != useful_slot))
            .map(|(k, c)| (k.clone(), *c))
            .collect();
        if targets.is_empty() {
            break;
        }
        let mut update = LinComb::new();
        for (key, c) in &targets {
            let Term::DataSymbol { slot } = *key.term() else { unreachable!() };
            let factor = -c / strong;
            for comp in components(model, schedule, i, slot + last) {
                // The strong component reproduces `key` with coefficient `-c`;
                // it is applied below by removing the entry outright.
                if comp.via.is_none() && comp.term.is_data() {
                    continue;
                }
                update.add_term(labels.label(Some(key), comp.term, comp.via), comp.coef * factor);
            }
        }
        for (key, c) in &targets {
            g.add_term(key.clone(), -c);
        }
        g += &update;
    }
    g
}

fn check_budget(i: usize, m: u32, budget: u128) -> Result<()> {
    let needed = ((i - 2) as u128).checked_pow(m + 1).unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::TermBudget { needed, budget });
    }
    Ok(())
}

/// `g_{i,m}(t)` by applying the cancellation round `m` times.
pub fn cancel_rounds_recursive(
    model: &ChannelModel,
    schedule: &Schedule,
    i: usize,
    m: u32,
) -> Result<CancellationResult> {
    cancel_rounds_recursive_with_budget(model, schedule, i, m, DEFAULT_TERM_BUDGET)
}

pub fn cancel_rounds_recursive_with_budget(
    model: &ChannelModel,
    schedule: &Schedule,
    i: usize,
    m: u32,
    budget: u128,
) -> Result<CancellationResult> {
    check_nodes(model, schedule, i, 3)?;
    check_budget(i, m, budget)?;
    let expr = run_rounds(model, schedule, i, m, &Merged);
    let paths: PathExpr = run_rounds(model, schedule, i, m, &ByPath);
    let useful_slot = -as_slot(schedule.delay(i - 1));
    let (p_t, sigma2) = (model.tx_power(), model.noise_power());
    Ok(CancellationResult {
        node: i,
        rounds: m,
        coherent: expr.power_split(useful_slot, p_t, sigma2),
        per_path: paths.power_split(useful_slot, p_t, sigma2),
        expr,
        useful_slot,
        slots_waited: m as u64 * schedule.delay(i - 1),
    })
}

/// Path-resolved `g_{i,m}(t)`: every summand of the expansion is kept apart.
pub fn cancel_rounds_by_path(
    model: &ChannelModel,
    schedule: &Schedule,
    i: usize,
    m: u32,
) -> Result<PathExpr> {
    check_nodes(model, schedule, i, 3)?;
    check_budget(i, m, DEFAULT_TERM_BUDGET)?;
    Ok(run_rounds(model, schedule, i, m, &ByPath))
}

/// `g_{i,m}(t)` built directly from the closed multi-index expansion.
pub fn cancel_rounds_expanded(
    model: &ChannelModel,
    schedule: &Schedule,
    i: usize,
    m: u32,
) -> Result<SignalExpr> {
    cancel_rounds_expanded_with_budget(model, schedule, i, m, DEFAULT_TERM_BUDGET)
}

pub fn cancel_rounds_expanded_with_budget(
    model: &ChannelModel,
    schedule: &Schedule,
    i: usize,
    m: u32,
    budget: u128,
) -> Result<SignalExpr> {
    check_nodes(model, schedule, i, 3)?;
    check_budget(i, m, budget)?;
    let strong = model.h(i - 1, i);
    let useful_slot = -as_slot(schedule.delay(i - 1));
    let gains: Vec<Complex64> = (1..=i - 2).map(|j| model.h(j, i)).collect();
    let offsets: Vec<Slot> = schedule.offsets(i).into_iter().map(as_slot).collect();

    let mut g = SignalExpr::new();
    g.add_term(Term::data(useful_slot), strong);

    // Noise ladder: level θ carries sign (-1)^θ and θ interferer factors.
    for level in 0..=m {
        let sign = if level % 2 == 0 { 1.0 } else { -1.0 };
        let denom = strong.powi(level as i32);
        for_each_sequence(&gains, &offsets, level as usize, |prod, shift| {
            g.add_term(Term::noise(i, shift), prod * sign / denom);
        });
    }
    // Residual data interference: m+1 factors, sign (-1)^m.
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let denom = strong.powi(m as i32);
    for_each_sequence(&gains, &offsets, m as usize + 1, |prod, shift| {
        g.add_term(Term::data(useful_slot + shift), prod * sign / denom);
    });
    Ok(g)
}

/// Visit every length-`len` index sequence with the product of its gains and
/// the sum of its offsets.
fn for_each_sequence(
    gains: &[Complex64],
    offsets: &[Slot],
    len: usize,
    mut visit: impl FnMut(Complex64, Slot),
) {
    fn go(
        gains: &[Complex64],
        offsets: &[Slot],
        left: usize,
        prod: Complex64,
        shift: Slot,
        visit: &mut dyn FnMut(Complex64, Slot),
    ) {
        if left == 0 {
            visit(prod, shift);
            return;
        }
        for (g, o) in gains.iter().zip(offsets) {
            go(gains, offsets, left - 1, prod * g, shift + o, visit);
        }
    }
    go(gains, offsets, len, Complex64::new(1.0, 0.0), 0, &mut visit);
}

/// Linear SINR at or above the threshold.
pub fn decode(sinr_db: f64, gamma: f64) -> bool {
    from_db(sinr_db) >= gamma
}

/// Post-cancellation SINR at node `i` using the node's rounds from `schedule`.
///
/// Node 2 sees no unknown interference and reports its single-hop SNR.
pub fn node_sinr_db(
    model: &ChannelModel,
    schedule: &Schedule,
    i: usize,
    accounting: SinrAccounting,
) -> Result<f64> {
    check_nodes(model, schedule, i, 2)?;
    if i == 2 {
        return model.snr_single_hop(2);
    }
    Ok(cancel_rounds_recursive(model, schedule, i, schedule.rounds(i))?.sinr_db(accounting))
}
