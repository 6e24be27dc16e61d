//! Iterative cancellation of unknown multi-hop interference on a full-duplex
//! relay chain.
//!
//! In a chain `1 → 2 → … → N` every node forwards one packet per slot while
//! still receiving. Node `i` can subtract everything it already knows, but the
//! packets still in flight from nodes `1..=i-2` reach it as unknown
//! interference. The node waits for later slots in which node `i-1` forwards
//! those same packets over the strong link, and uses them to cancel the
//! interference round by round.
//!
//! * [`signal`]: exact linear combinations of packets and noise samples
//! * [`channel`]: chain geometry and channel coefficients
//! * [`schedule`]: per-node delays and the slot-by-slot transmission trace
//! * [`engine`]: received signals and the cancellation rounds
//! * [`bounds`]: interference bound, decoding conditions, chain-length limit
//! * [`montecarlo`]: sample-level validation of the symbolic results
//! * [`experiment`]: config parsing and dataset generation

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod channel;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod montecarlo;
pub mod schedule;
pub mod signal;

pub use channel::{from_db, to_db, ChannelModel, RoundsPolicy, ScenarioConfig};
pub use engine::{
    cancel_rounds_expanded, cancel_rounds_recursive, decode, received_signal, CancellationResult,
    SinrAccounting,
};
pub use error::{Error, Result};
pub use schedule::{build_schedule, delay_closed_form, trace_schedule, Schedule, TransmissionTrace};
pub use signal::{PowerSplit, SignalExpr, Term};
