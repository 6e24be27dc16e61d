//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export takes plain numbers and returns a JSON string, so the page
//! needs no bundler and no generated TypeScript types.

use kic_core::bounds;
use kic_core::engine::{cancel_rounds_recursive, SinrAccounting};
use kic_core::{delay_closed_form, ChannelModel, Schedule};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest chain the page may request; keeps the expansion small.
pub const MAX_NODES: usize = 10;
pub const MAX_ROUNDS: u32 = 4;

#[derive(Debug, Serialize)]
pub struct SinrCurve {
    pub rounds: u32,
    pub nodes: Vec<usize>,
    pub actual_db: Vec<f64>,
    pub lower_bound_db: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct DelayCurve {
    pub rounds: u32,
    pub nodes: Vec<usize>,
    pub delay_slots: Vec<u64>,
}

#[derive(Debug, Serialize)]
pub struct NodeFeasibility {
    pub node: usize,
    pub rho: f64,
    pub feasible: bool,
    pub min_rounds: Option<u32>,
}

#[derive(Debug, Serialize)]
pub struct Feasibility {
    pub max_chain_length: usize,
    pub nodes: Vec<NodeFeasibility>,
}

fn check_size(nodes: usize, max_rounds: u32) -> Result<(), String> {
    if !(3..=MAX_NODES).contains(&nodes) {
        return Err(format!("nodes must be in 3..={MAX_NODES}"));
    }
    if max_rounds > MAX_ROUNDS {
        return Err(format!("rounds must be at most {MAX_ROUNDS}"));
    }
    Ok(())
}

/// Actual and lower-bound SINR at nodes `3..=nodes`, one curve per `m` in `0..=max_rounds`.
pub fn sinr_curves_impl(
    nodes: usize,
    alpha: f64,
    snr_db: f64,
    max_rounds: u32,
    coherent: bool,
) -> Result<Vec<SinrCurve>, String> {
    check_size(nodes, max_rounds)?;
    let model = ChannelModel::equally_spaced(nodes, alpha, 1.0, 1.0, snr_db).map_err(|e| e.to_string())?;
    let acc = if coherent { SinrAccounting::Coherent } else { SinrAccounting::PerPath };
    let mut out = Vec::new();
    for m in 0..=max_rounds {
        let schedule = Schedule::uniform(nodes, m).map_err(|e| e.to_string())?;
        let mut curve = SinrCurve { rounds: m, nodes: vec![], actual_db: vec![], lower_bound_db: vec![] };
        for i in 3..=nodes {
            let r = cancel_rounds_recursive(&model, &schedule, i, m).map_err(|e| e.to_string())?;
            curve.nodes.push(i);
            curve.actual_db.push(r.sinr_db(acc));
            curve.lower_bound_db.push(bounds::sinr_lower_bound(&model, i, m).map_err(|e| e.to_string())?);
        }
        out.push(curve);
    }
    Ok(out)
}

pub fn delay_curves_impl(nodes: usize, max_rounds: u32) -> Result<Vec<DelayCurve>, String> {
    check_size(nodes, max_rounds)?;
    (0..=max_rounds)
        .map(|m| {
            let delay_slots = (1..=nodes)
                .map(|i| delay_closed_form(i, m))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            Ok(DelayCurve { rounds: m, nodes: (1..=nodes).collect(), delay_slots })
        })
        .collect()
}

pub fn feasibility_impl(nodes: usize, alpha: f64, snr_db: f64, gamma_db: f64) -> Result<Feasibility, String> {
    check_size(nodes, 0)?;
    let model = ChannelModel::equally_spaced(nodes, alpha, 1.0, 1.0, snr_db).map_err(|e| e.to_string())?;
    let gamma = kic_core::from_db(gamma_db);
    let max_chain_length = bounds::max_chain_length(alpha, None, 1e-9).map_err(|e| e.to_string())?;
    let nodes = (3..=nodes)
        .map(|i| {
            Ok(NodeFeasibility {
                node: i,
                rho: bounds::rho(&model, i)?,
                feasible: bounds::feasibility_condition(&model, i, gamma)?,
                min_rounds: bounds::min_rounds(&model, i, gamma).ok(),
            })
        })
        .collect::<Result<Vec<_>, kic_core::Error>>()
        .map_err(|e| e.to_string())?;
    Ok(Feasibility { max_chain_length, nodes })
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn sinr_curves(nodes: usize, alpha: f64, snr_db: f64, max_rounds: u32, coherent: bool) -> Result<String, JsError> {
    to_json(sinr_curves_impl(nodes, alpha, snr_db, max_rounds, coherent))
}

#[wasm_bindgen]
pub fn delay_curves(nodes: usize, max_rounds: u32) -> Result<String, JsError> {
    to_json(delay_curves_impl(nodes, max_rounds))
}

#[wasm_bindgen]
pub fn feasibility(nodes: usize, alpha: f64, snr_db: f64, gamma_db: f64) -> Result<String, JsError> {
    to_json(feasibility_impl(nodes, alpha, snr_db, gamma_db))
}
