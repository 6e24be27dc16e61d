//! First-transmission delays along the chain and the resulting slot schedule.

use std::fmt::Write as _;

use serde::Serialize;

use crate::bounds;
use crate::channel::{ChannelModel, RoundsPolicy, ScenarioConfig};
use crate::error::{Error, Result};

/// Per-node cancellation rounds and first-transmission delays `Δ_i`.
///
/// Node `i` forwards packet `x(t - Δ_i)` in slot `t`. Indexing is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schedule {
    rounds: Vec<u32>,
    delay: Vec<u64>,
}

impl Schedule {
    /// Build from per-node rounds (entry `k` is node `k+1`); nodes 1 and 2
    /// never cancel unknown interference, so their entries are forced to 0.
    pub fn from_rounds(mut rounds: Vec<u32>) -> Result<Self> {
        if rounds.len() < 2 {
            return Err(Error::config(format!("node count must be >= 2 (got {})", rounds.len())));
        }
        rounds[0] = 0;
        rounds[1] = 0;
        let mut delay = Vec::with_capacity(rounds.len());
        delay.push(0u64);
        for (k, &m) in rounds.iter().enumerate().skip(1) {
            let prev = delay[k - 1];
            let next = (m as u64 + 1)
                .checked_mul(prev)
                .and_then(|v| v.checked_add(1))
                .ok_or(Error::Overflow { node: k + 1, rounds: m })?;
            delay.push(next);
        }
        Ok(Schedule { rounds, delay })
    }

    pub fn uniform(n: usize, m: u32) -> Result<Self> {
        Self::from_rounds(vec![m; n])
    }

    pub fn nodes(&self) -> usize {
        self.delay.len()
    }

    /// `Δ_i`
    pub fn delay(&self, i: usize) -> u64 {
        self.delay[i - 1]
    }

    pub fn delays(&self) -> &[u64] {
        &self.delay
    }

    pub fn rounds(&self, i: usize) -> u32 {
        self.rounds[i - 1]
    }

    /// `δ_j = Δ_{i-1} - Δ_j` for `j = 1..=i-2`; empty for `i < 3`.
    pub fn offsets(&self, i: usize) -> Vec<u64> {
        if i < 3 {
            return Vec::new();
        }
        let last = self.delay(i - 1);
        (1..=i - 2).map(|j| last - self.delay(j)).collect()
    }
}

/// Schedule for `model` under the scenario's rounds policy.
pub fn build_schedule(model: &ChannelModel, scenario: &ScenarioConfig) -> Result<Schedule> {
    scenario.validate()?;
    let n = model.nodes();
    match scenario.policy {
        RoundsPolicy::Uniform(m) => Schedule::uniform(n, m),
        RoundsPolicy::AdaptiveMin => {
            let mut rounds = vec![0; n];
            for i in 3..=n {
                rounds[i - 1] = bounds::min_rounds(model, i, scenario.gamma)?;
            }
            Schedule::from_rounds(rounds)
        }
    }
}

/// `Δ_i` under a uniform round count: `i-1` when `m = 0`, otherwise
/// `((m+1)^(i-1) - 1) / m`.
pub fn delay_closed_form(i: usize, m: u32) -> Result<u64> {
    if i == 0 {
        return Err(Error::NodeOutOfRange { node: 0, min: 1, max: usize::MAX });
    }
    if m == 0 {
        return Ok((i - 1) as u64);
    }
    let exp = u32::try_from(i - 1).map_err(|_| Error::Overflow { node: i, rounds: m })?;
    (m as u64 + 1)
        .checked_pow(exp)
        .map(|p| (p - 1) / m as u64)
        .ok_or(Error::Overflow { node: i, rounds: m })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TraceEntry {
    pub slot: u64,
    pub node: usize,
    /// Index of the packet sent, `None` while idle.
    pub packet: Option<u64>,
}

/// Who sends what in every slot, slots `1..=slots`, nodes `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransmissionTrace {
    pub nodes: usize,
    pub slots: u64,
    pub entries: Vec<TraceEntry>,
}

impl TransmissionTrace {
    pub fn packet(&self, slot: u64, node: usize) -> Option<u64> {
        self.entries
            .iter()
            .find(|e| e.slot == slot && e.node == node)
            .and_then(|e| e.packet)
    }

    /// First slot in which `node` transmits, if any.
    pub fn first_active(&self, node: usize) -> Option<u64> {
        self.entries
            .iter()
            .filter(|e| e.node == node && e.packet.is_some())
            .map(|e| e.slot)
            .min()
    }

    /// `slot,node,packet_index` with `-` for idle.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("slot,node,packet_index\n");
        for e in &self.entries {
            match e.packet {
                Some(p) => writeln!(out, "{},{},{}", e.slot, e.node, p),
                None => writeln!(out, "{},{},-", e.slot, e.node),
            }
            .expect("writing to a String cannot fail");
        }
        out
    }
}

/// Slot-by-slot transmissions for the first `n` nodes of `schedule`.
///
/// Node `i < n` sends `x(t - Δ_i)` once `t > Δ_i`; the destination (node `n`)
/// only receives and is always listed idle.
pub fn trace_schedule(schedule: &Schedule, n: usize, slots: u64) -> Result<TransmissionTrace> {
    if n < 2 || n > schedule.nodes() {
        return Err(Error::NodeOutOfRange { node: n, min: 2, max: schedule.nodes() });
    }
    if slots == 0 {
        return Err(Error::config("trace needs at least one slot"));
    }
    let mut entries = Vec::with_capacity(slots as usize * n);
    for t in 1..=slots {
        for i in 1..=n {
            let d = schedule.delay(i);
            let packet = (i < n && t > d).then(|| t - d);
            entries.push(TraceEntry { slot: t, node: i, packet });
        }
    }
    Ok(TransmissionTrace { nodes: n, slots, entries })
}
