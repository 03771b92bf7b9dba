//! Ratio experiments: run the engine against the offline optimum over a grid
//! of seeds, stability rewards, and lookaheads, and report per-trial rows
//! with aggregate statistics.

use rayon::prelude::*;
use serde_json::{Value as Json, json};
use thiserror::Error;

use crate::engine::{EngineConfig, EngineError, run};
use crate::gen::{GenError, GeneratorParams, gen_random};
use crate::model::Value;
use crate::oracle::{OracleError, check_guarantee_bound, offline_optimal};
use crate::ratio::Rho;
use crate::solvers::{SolverError, solver_by_name};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("sweep needs at least one trial, one delta, and one lookahead")]
    EmptyGrid,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Sizes, density, churn, value range, and the base seed. Seeds count up
    /// from `base.seed`, one per trial.
    pub base: GeneratorParams,
    pub trials: u32,
    pub lookaheads: Vec<u32>,
    pub deltas: Vec<Value>,
    pub solver: String,
    pub rho: Rho,
}

/// One engine-vs-offline comparison.
#[derive(Debug, Clone)]
pub struct TrialRow {
    pub seed: u64,
    pub lookahead: u32,
    pub delta: Value,
    pub engine_nu: Value,
    pub engine_lambda_interval: Value,
    pub engine_lambda_pairwise: Value,
    pub engine_total_interval: Value,
    pub engine_total_pairwise: Value,
    /// Absent when the horizon exceeds the offline oracle's caps.
    pub offline_total: Option<Value>,
    /// Interval-scored engine total over the offline total.
    pub ratio: Option<f64>,
    /// The guaranteed floor `(1 - c0) * rho` for this row's lookahead.
    pub ratio_floor: f64,
    /// Exact-arithmetic certificate of the guarantee; absent when the solver
    /// declares no usable factor or the offline optimum is unavailable.
    pub certified: Option<bool>,
    pub periods: usize,
    pub solver_calls: u64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub rows: usize,
    pub with_offline: usize,
    pub min_ratio: Option<f64>,
    pub mean_ratio: Option<f64>,
    pub certified_failures: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub rows: Vec<TrialRow>,
    pub summary: SweepSummary,
}

/// Runs the full grid. Trials execute in parallel; row order is the grid
/// order (seed-major, then delta, then lookahead), so reports are stable.
pub fn run_sweep(config: &SweepConfig) -> Result<ExperimentReport, SweepError> {
    config.base.validate()?;
    if config.trials == 0 || config.deltas.is_empty() || config.lookaheads.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    let mut grid = Vec::new();
    for trial in 0..config.trials {
        for &delta in &config.deltas {
            for &w in &config.lookaheads {
                grid.push((config.base.seed + trial as u64, delta, w));
            }
        }
    }
    let rows: Result<Vec<TrialRow>, SweepError> = grid
        .par_iter()
        .map(|&(seed, delta, w)| run_trial(config, seed, delta, w))
        .collect();
    let rows = rows?;

    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let summary = SweepSummary {
        rows: rows.len(),
        with_offline: rows.iter().filter(|r| r.offline_total.is_some()).count(),
        min_ratio: ratios.iter().copied().reduce(f64::min),
        mean_ratio: (!ratios.is_empty())
            .then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
        certified_failures: rows.iter().filter(|r| r.certified == Some(false)).count(),
    };
    Ok(ExperimentReport { rows, summary })
}

fn run_trial(
    config: &SweepConfig,
    seed: u64,
    delta: Value,
    w: u32,
) -> Result<TrialRow, SweepError> {
    let mut params = config.base;
    params.seed = seed;
    params.delta = delta;
    params.lookahead = w;
    let horizon = gen_random(&params)?;
    let solver = solver_by_name(&config.solver)?;
    let engine_config = EngineConfig::new(w, delta, config.rho)?;

    let started = std::time::Instant::now();
    let trace = run(&horizon, solver.as_ref(), &engine_config)?;
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;

    let offline = match offline_optimal(&horizon) {
        Ok(sol) => Some(sol),
        Err(OracleError::StateSpaceTooLarge { .. } | OracleError::HorizonTooLong { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let offline_total = offline.as_ref().map(|o| o.total);
    let ratio = offline_total.and_then(|t| {
        (t > 0).then(|| trace.total_interval() as f64 / t as f64)
    });
    let certified = offline
        .as_ref()
        .and_then(|o| check_guarantee_bound(&trace, o, &engine_config).ok());

    Ok(TrialRow {
        seed,
        lookahead: w,
        delta,
        engine_nu: trace.nu_total,
        engine_lambda_interval: trace.lambda_interval_total,
        engine_lambda_pairwise: trace.lambda_pairwise_total,
        engine_total_interval: trace.total_interval(),
        engine_total_pairwise: trace.total_pairwise(),
        offline_total,
        ratio,
        ratio_floor: engine_config.threshold().competitive_ratio_f64(),
        certified,
        periods: trace.periods.len(),
        solver_calls: trace.solver_calls,
        wall_ms,
    })
}

pub const CSV_HEADER: &str = "seed,lookahead,delta,engine_nu,engine_lambda_interval,\
engine_lambda_pairwise,engine_total_interval,engine_total_pairwise,offline_total,ratio,\
ratio_floor,certified,periods,solver_calls,wall_ms";

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or(String::new(), T::to_string)
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{:.9},{},{},{},{:.3}\n",
                r.seed,
                r.lookahead,
                r.delta,
                r.engine_nu,
                r.engine_lambda_interval,
                r.engine_lambda_pairwise,
                r.engine_total_interval,
                r.engine_total_pairwise,
                opt(&r.offline_total),
                r.ratio.map_or(String::new(), |x| format!("{x:.9}")),
                r.ratio_floor,
                opt(&r.certified),
                r.periods,
                r.solver_calls,
                r.wall_ms,
            ));
        }
        out
    }

    pub fn to_json(&self) -> Json {
        json!({
            "rows": self.rows.iter().map(|r| json!({
                "seed": r.seed,
                "lookahead": r.lookahead,
                "delta": r.delta,
                "engine_nu": r.engine_nu,
                "engine_lambda_interval": r.engine_lambda_interval,
                "engine_lambda_pairwise": r.engine_lambda_pairwise,
                "engine_total_interval": r.engine_total_interval,
                "engine_total_pairwise": r.engine_total_pairwise,
                "offline_total": r.offline_total,
                "ratio": r.ratio,
                "ratio_floor": r.ratio_floor,
                "certified": r.certified,
                "periods": r.periods,
                "solver_calls": r.solver_calls,
                "wall_ms": r.wall_ms,
            })).collect::<Vec<_>>(),
            "summary": {
                "rows": self.summary.rows,
                "with_offline": self.summary.with_offline,
                "min_ratio": self.summary.min_ratio,
                "mean_ratio": self.summary.mean_ratio,
                "certified_failures": self.summary.certified_failures,
            },
        })
    }
}
