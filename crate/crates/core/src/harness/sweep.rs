//! Parameter sweeps over Monte-Carlo trials.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, SweepAxis};
use crate::harness::sample::sample_scenario;
use crate::harness::trial::{run_trial, TrialRecord};

/// Seed of trial `index`; shared across sweep points so every point sees the
/// same scenarios.
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    seed ^ index as u64
}

pub fn run_single(cfg: &ExperimentConfig, index: usize, timing: bool) -> Result<crate::harness::trial::TrialOutcome> {
    let seed = trial_seed(cfg.seed, index);
    let scenario = sample_scenario(cfg, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let mut out = run_trial(&scenario, cfg, seed, timing)?;
    out.record.trial = index;
    Ok(out)
}

#[derive(Debug)]
pub struct SweepResult {
    /// Records in sweep-value order, then trial order. On failure, the
    /// records that completed.
    pub records: Vec<TrialRecord>,
    pub failure: Option<Error>,
}

/// Runs `cfg.trials` trials at each sweep value, in parallel.
pub fn run_sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64], timing: bool) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let points: Vec<(f64, ExperimentConfig)> = order
        .iter()
        .map(|&i| Ok((values[i], cfg.with_axis(axis, values[i])?)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();
    let mut results: Vec<((usize, usize), Result<TrialRecord>)> = jobs
        .par_iter()
        .map(|&(p, t)| {
            let (value, pc) = &points[p];
            let rec = run_single(pc, t, timing).map(|o| {
                let mut r = o.record;
                r.sweep_axis = Some(axis);
                r.sweep_value = *value;
                r
            });
            ((p, t), rec)
        })
        .collect();
    results.sort_by_key(|(key, _)| *key);
    let mut records = Vec::with_capacity(results.len());
    let mut failure = None;
    for (_, r) in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                if failure.is_none() {
                    failure = Some(e);
                }
            }
        }
    }
    Ok(SweepResult { records, failure })
}

/// Mean and sample standard deviation of every numeric record field at one
/// sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_value: f64,
    pub trials: usize,
    /// `(column name, mean, std)` in CSV column order.
    pub fields: Vec<(String, f64, f64)>,
}

impl SummaryRow {
    pub fn mean(&self, name: &str) -> Option<f64> {
        self.fields.iter().find(|f| f.0 == name).map(|f| f.1)
    }

    pub fn std(&self, name: &str) -> Option<f64> {
        self.fields.iter().find(|f| f.0 == name).map(|f| f.2)
    }
}

fn numeric_fields(r: &TrialRecord) -> Vec<(String, Option<f64>)> {
    let mut v = vec![("sum_rate_bps_hz".to_string(), Some(r.sum_rate))];
    for (k, x) in r.rates.iter().enumerate() {
        v.push((format!("rate_u{}", k + 1), Some(*x)));
    }
    v.extend([
        ("t_s".to_string(), Some(r.t_s as f64)),
        ("hpc_w".to_string(), Some(r.hpc_w)),
        ("tx_power_w".to_string(), Some(r.tx_power_w)),
        ("objective".to_string(), Some(r.objective)),
        ("iters_inner".to_string(), Some(r.iters_inner as f64)),
        ("iters_outer".to_string(), r.iters_outer.map(|x| x as f64)),
        ("penalty_final".to_string(), r.penalty_final),
        ("wall_ms".to_string(), r.wall_ms),
    ]);
    v
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups consecutive records with equal sweep value.
pub fn aggregate(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    let mut i = 0;
    while i < records.len() {
        let mut j = i;
        while j < records.len() && records[j].sweep_value == records[i].sweep_value {
            j += 1;
        }
        let group = &records[i..j];
        let names: Vec<String> = numeric_fields(&group[0]).into_iter().map(|f| f.0).collect();
        let per: Vec<Vec<(String, Option<f64>)>> = group.iter().map(numeric_fields).collect();
        let fields = names
            .iter()
            .enumerate()
            .filter_map(|(c, name)| {
                let xs: Vec<f64> = per.iter().filter_map(|f| f.get(c).and_then(|x| x.1)).collect();
                if xs.is_empty() {
                    None
                } else {
                    let (m, s) = mean_std(&xs);
                    Some((name.clone(), m, s))
                }
            })
            .collect();
        rows.push(SummaryRow {
            sweep_axis: group[0].sweep_axis,
            sweep_value: group[0].sweep_value,
            trials: group.len(),
            fields,
        });
        i = j;
    }
    rows
}
