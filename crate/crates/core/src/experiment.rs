//! Experiment configuration and the dataset generators behind the CLI.
//!
//! Every generator returns a [`Dataset`] whose rows are sorted before they are
//! written, so identical configs give byte-identical CSV.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundReport};
use crate::channel::{from_db, ChannelModel, RoundsPolicy, ScenarioConfig};
use crate::engine::{cancel_rounds_recursive_with_budget, SinrAccounting};
use crate::error::{Error, Result};
use crate::montecarlo::{run_monte_carlo, McConfig, McReport, SymbolModel};
use crate::schedule::{build_schedule, delay_closed_form, trace_schedule, Schedule, TransmissionTrace};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyChoice {
    /// One run per entry of `m_list`, same rounds at every node.
    #[default]
    Uniform,
    AdaptiveMin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSettings {
    pub trials: u64,
    pub seed: u64,
    pub symbol_model: SymbolModel,
    /// Highest node index simulated.
    pub max_node: usize,
    pub rounds: Vec<u32>,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings {
            trials: 100_000,
            seed: 1,
            symbol_model: SymbolModel::CircularGaussian,
            max_node: 6,
            rounds: vec![0, 1, 2, 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(alias = "N")]
    pub nodes: usize,
    #[serde(alias = "alpha_list")]
    pub alphas: Vec<f64>,
    pub single_hop_snr_db: f64,
    pub gamma_db: f64,
    pub m_list: Vec<u32>,
    pub m_policy: PolicyChoice,
    pub accounting: SinrAccounting,
    pub spacing: f64,
    pub tx_power: f64,
    /// Replaces the noise power derived from the single-hop SNR.
    pub noise_power: Option<f64>,
    pub b: Option<f64>,
    pub epsilon: f64,
    pub term_budget: u64,
    pub monte_carlo: Option<McSettings>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            nodes: 8,
            alphas: vec![2.1, 3.0, 4.0],
            single_hop_snr_db: 20.0,
            gamma_db: 10.0,
            m_list: vec![0, 1, 2, 3, 4],
            m_policy: PolicyChoice::Uniform,
            accounting: SinrAccounting::PerPath,
            spacing: 1.0,
            tx_power: 1.0,
            noise_power: None,
            b: None,
            epsilon: 1e-9,
            term_budget: 1_000_000,
            monte_carlo: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Check every invariant and report all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.nodes < 2 {
            errs.push(format!("nodes: must be >= 2 (got {})", self.nodes));
        }
        if self.alphas.is_empty() {
            errs.push("alphas: must not be empty".into());
        }
        for a in &self.alphas {
            if !(*a > 0.0 && a.is_finite()) {
                errs.push(format!("alphas: path-loss exponent must be > 0 (got {a})"));
            }
        }
        if self.m_list.is_empty() {
            errs.push("m_list: must not be empty".into());
        }
        if !self.single_hop_snr_db.is_finite() {
            errs.push("single_hop_snr_db: must be finite".into());
        }
        if !(self.gamma_db >= 0.0 && self.gamma_db.is_finite()) {
            errs.push(format!("gamma_db: must be >= 0 dB (got {})", self.gamma_db));
        }
        if !(self.spacing > 0.0) {
            errs.push(format!("spacing: must be > 0 (got {})", self.spacing));
        }
        if !(self.tx_power > 0.0) {
            errs.push(format!("tx_power: must be > 0 (got {})", self.tx_power));
        }
        if let Some(n) = self.noise_power {
            if !(n >= 0.0) {
                errs.push(format!("noise_power: must be >= 0 (got {n})"));
            }
        }
        if let Some(b) = self.b {
            if !(b > 0.0) {
                errs.push(format!("b: must be > 0 (got {b})"));
            }
        }
        if !(self.epsilon > 0.0) {
            errs.push(format!("epsilon: must be > 0 (got {})", self.epsilon));
        }
        if let Some(mc) = &self.monte_carlo {
            if mc.trials == 0 {
                errs.push("monte_carlo.trials: must be >= 1".into());
            }
            if mc.rounds.is_empty() {
                errs.push("monte_carlo.rounds: must not be empty".into());
            }
            if mc.max_node < 3 {
                errs.push(format!("monte_carlo.max_node: must be >= 3 (got {})", mc.max_node));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn gamma(&self) -> f64 {
        from_db(self.gamma_db)
    }

    pub fn model(&self, alpha: f64) -> Result<ChannelModel> {
        let model = ChannelModel::equally_spaced(
            self.nodes,
            alpha,
            self.spacing,
            self.tx_power,
            self.single_hop_snr_db,
        )?;
        match self.noise_power {
            Some(n) => model.with_noise_power(n),
            None => Ok(model),
        }
    }

    fn sorted_rounds(&self) -> Vec<u32> {
        let mut m = self.m_list.clone();
        m.sort_unstable();
        m.dedup();
        m
    }
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// A header plus string rows, ready for CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Dataset {
    fn new(header: &[&str]) -> Self {
        Dataset { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

#[cfg(feature = "parallel")]
fn map_cells<T: Sync, R: Send>(cells: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    cells.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_cells<T, R>(cells: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    cells.iter().map(f).collect()
}

/// One cell of the SINR sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinrCell {
    pub alpha: f64,
    pub node: usize,
    pub rounds: u32,
    /// `None` when the expansion exceeded the term budget.
    pub sinr_actual_db: Option<f64>,
    pub sinr_lb_db: f64,
}

fn sinr_cell(
    model: &ChannelModel,
    schedule: &Schedule,
    i: usize,
    accounting: SinrAccounting,
    budget: u128,
) -> Result<SinrCell> {
    let m = schedule.rounds(i);
    let alpha = model.alpha();
    if i == 2 {
        let snr = model.snr_single_hop(2)?;
        return Ok(SinrCell { alpha, node: 2, rounds: m, sinr_actual_db: Some(snr), sinr_lb_db: snr });
    }
    let sinr_lb_db = bounds::sinr_lower_bound(model, i, m)?;
    let sinr_actual_db = match cancel_rounds_recursive_with_budget(model, schedule, i, m, budget) {
        Ok(r) => Some(r.sinr_db(accounting)),
        Err(Error::TermBudget { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(SinrCell { alpha, node: i, rounds: m, sinr_actual_db, sinr_lb_db })
}

/// Actual and lower-bound SINR at every node for every configured `m`
/// (or the adaptive per-node rounds).
pub fn sinr_cells(cfg: &ExperimentConfig) -> Result<Vec<SinrCell>> {
    cfg.validate()?;
    let gamma = cfg.gamma();
    let budget = cfg.term_budget as u128;
    let mut jobs: Vec<(usize, ChannelModel, Schedule, usize)> = Vec::new();
    for (a_idx, &alpha) in cfg.alphas.iter().enumerate() {
        let model = cfg.model(alpha)?;
        let schedules = match cfg.m_policy {
            PolicyChoice::Uniform => cfg
                .sorted_rounds()
                .into_iter()
                .map(|m| Schedule::uniform(cfg.nodes, m))
                .collect::<Result<Vec<_>>>()?,
            PolicyChoice::AdaptiveMin => {
                let scenario = ScenarioConfig::new(gamma, cfg.single_hop_snr_db, RoundsPolicy::AdaptiveMin)?;
                vec![build_schedule(&model, &scenario)?]
            }
        };
        for s in schedules {
            for i in 2..=cfg.nodes {
                jobs.push((a_idx, model.clone(), s.clone(), i));
            }
        }
    }
    let mut cells: Vec<(usize, SinrCell)> = map_cells(&jobs, |(a_idx, model, s, i)| {
        sinr_cell(model, s, *i, cfg.accounting, budget).map(|c| (*a_idx, c))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    cells.sort_by_key(|(a, c)| (*a, c.node, c.rounds));
    Ok(cells.into_iter().map(|(_, c)| c).collect())
}

/// Rows `alpha,i,m,sinr_actual_db,sinr_lb_db`.
pub fn run_sinr_sweep(cfg: &ExperimentConfig) -> Result<Dataset> {
    let mut ds = Dataset::new(&["alpha", "i", "m", "sinr_actual_db", "sinr_lb_db"]);
    for c in sinr_cells(cfg)? {
        ds.rows.push(vec![
            c.alpha.to_string(),
            c.node.to_string(),
            c.rounds.to_string(),
            c.sinr_actual_db.map_or_else(|| "skipped".to_string(), |v| v.to_string()),
            c.sinr_lb_db.to_string(),
        ]);
    }
    Ok(ds)
}

/// Rows `i,m,delay_slots` from the closed-form delay.
pub fn run_delay_table(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut ds = Dataset::new(&["i", "m", "delay_slots"]);
    for i in 1..=cfg.nodes {
        for m in cfg.sorted_rounds() {
            ds.rows.push(vec![i.to_string(), m.to_string(), delay_closed_form(i, m)?.to_string()]);
        }
    }
    Ok(ds)
}

pub struct BoundsOutput {
    /// `alpha,i,m,rho,pi_bound,sinr_lb_db,feasible,min_rounds`
    pub nodes: Dataset,
    /// `alpha,b_source,b,max_chain_length`
    pub chain: Dataset,
}

pub fn run_bounds_report(cfg: &ExperimentConfig) -> Result<BoundsOutput> {
    cfg.validate()?;
    let gamma = cfg.gamma();
    let mut header = vec!["alpha"];
    header.extend(BoundReport::CSV_HEADER);
    let mut nodes = Dataset::new(&header);
    let mut chain = Dataset::new(&["alpha", "b_source", "b", "max_chain_length"]);
    for &alpha in &cfg.alphas {
        let model = cfg.model(alpha)?;
        for i in 3..=cfg.nodes {
            for m in cfg.sorted_rounds() {
                let mut row = vec![alpha.to_string()];
                row.extend(BoundReport::new(&model, i, m, gamma)?.csv_fields());
                nodes.rows.push(row);
            }
        }
        let eps = cfg.epsilon;
        let mut choices = vec![("two_minus_epsilon", 2.0 - eps)];
        if cfg.nodes >= 3 {
            choices.push(("scenario", bounds::placement_b(&model, 3, gamma)?));
        }
        if let Some(b) = cfg.b {
            choices.push(("config", b));
        }
        for (source, b) in choices {
            let len = bounds::max_chain_length(alpha, Some(b), eps)?;
            chain.rows.push(vec![alpha.to_string(), source.to_string(), b.to_string(), len.to_string()]);
        }
    }
    Ok(BoundsOutput { nodes, chain })
}

/// The five-node, two-round walk-through over 20 slots.
pub fn run_example_n5() -> Result<TransmissionTrace> {
    let schedule = Schedule::uniform(5, 2)?;
    trace_schedule(&schedule, 5, 20)
}

/// Monte Carlo reports over the configured node / rounds grid, for every α.
pub fn monte_carlo_reports(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<Vec<(f64, McReport)>> {
    cfg.validate()?;
    let settings = cfg
        .monte_carlo
        .clone()
        .ok_or_else(|| Error::config("monte_carlo: section required for this command"))?;
    let mc = McConfig {
        trials: settings.trials,
        seed: seed.unwrap_or(settings.seed),
        symbol_model: settings.symbol_model,
    };
    let mut rounds = settings.rounds.clone();
    rounds.sort_unstable();
    rounds.dedup();
    let mut out = Vec::new();
    for &alpha in &cfg.alphas {
        let model = cfg.model(alpha)?;
        for i in 3..=settings.max_node.min(cfg.nodes) {
            for &m in &rounds {
                let schedule = Schedule::uniform(cfg.nodes, m)?;
                out.push((alpha, run_monte_carlo(&model, &schedule, i, m, &mc)?));
            }
        }
    }
    Ok(out)
}

/// Rows `alpha,i,m,trials,seed,pred_residual,emp_residual,rel_err`.
pub fn run_monte_carlo_cmd(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<Dataset> {
    let mut header = vec!["alpha"];
    header.extend(McReport::CSV_HEADER);
    let mut ds = Dataset::new(&header);
    for (alpha, r) in monte_carlo_reports(cfg, seed)? {
        let mut row = vec![alpha.to_string()];
        row.extend(r.csv_fields());
        ds.rows.push(row);
    }
    Ok(ds)
}
