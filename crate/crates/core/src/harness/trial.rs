//! One Monte-Carlo trial: channels, solver, final metrics.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::Scenario;
use crate::harness::config::{ExperimentConfig, SolverKind, SweepAxis};
use crate::metrics::StreamSelection;
use crate::pli::pli_solve;
use crate::wmmse_ts::{evaluate, wmmse_ts_solve, SelectionPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    pub t_s: usize,
    pub hpc_w: f64,
    pub tx_power_w: f64,
    pub objective: f64,
    pub iters_inner: usize,
    pub iters_outer: Option<usize>,
    pub penalty_final: Option<f64>,
    pub wall_ms: Option<f64>,
    /// Set when the solver hit an iteration limit.
    pub warning: bool,
}

/// One point of a solver trace: objective and, for the discrete solver, the
/// relative penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub objective: f64,
    pub penalty: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub trace: Vec<TracePoint>,
}

/// Runs the configured solver on one scenario. Rates are always evaluated on
/// the hybrid (analog times baseband) precoders.
pub fn run_trial(scenario: &Scenario, cfg: &ExperimentConfig, seed: u64, timing: bool) -> Result<TrialOutcome> {
    let start = Instant::now();
    let sc = cfg.solver_config();
    let channels = scenario.channels(cfg.channel)?;
    let (eval, selection, iters_inner, iters_outer, penalty_final, warning, trace) = match cfg.solver {
        SolverKind::WmmseTs | SolverKind::FixedStreams => {
            let policy = if cfg.solver == SolverKind::FixedStreams {
                SelectionPolicy::Frozen(StreamSelection::leading(
                    cfg.k_users,
                    cfg.streams_per_user(),
                    cfg.fixed_stream_count(),
                ))
            } else {
                SelectionPolicy::Adaptive
            };
            let sol = wmmse_ts_solve(&channels, &sc, &policy)?;
            let eff = sol.factorization.hybrid.effective_precoders();
            let eval = evaluate(&channels, &eff, &sol.state.selection, &sc)?;
            let trace = sol
                .trace
                .iter()
                .map(|&objective| TracePoint {
                    objective,
                    penalty: None,
                })
                .collect();
            (
                eval,
                sol.state.selection,
                sol.iterations,
                None,
                None,
                !sol.converged,
                trace,
            )
        }
        SolverKind::Pli => {
            let sol = pli_solve(&channels, &sc)?;
            let trace = sol
                .objective_trace
                .iter()
                .zip(&sol.penalty_trace)
                .map(|(&objective, &p)| TracePoint {
                    objective,
                    penalty: Some(p),
                })
                .collect();
            (
                sol.evaluation,
                sol.selection,
                sol.inner_iterations,
                Some(sol.outer_iterations),
                Some(sol.penalty_final),
                !sol.converged,
                trace,
            )
        }
    };
    let record = TrialRecord {
        sweep_axis: None,
        sweep_value: 0.0,
        trial: 0,
        seed,
        sum_rate: eval.rates.iter().sum(),
        rates: eval.rates,
        t_s: selection.active_count(),
        hpc_w: eval.hpc,
        tx_power_w: eval.tx_power,
        objective: eval.objective,
        iters_inner,
        iters_outer,
        penalty_final,
        wall_ms: timing.then(|| start.elapsed().as_secs_f64() * 1e3),
        warning,
    };
    Ok(TrialOutcome { record, trace })
}
