//! CSV files consumed by the plotting scripts.

use std::f64::consts::FRAC_PI_2;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{
    analytic_dof, assemble_channel, edof, free_space_gain, ChannelMode, Placement, Scenario, UpaConfig, UserTerminal,
};
use crate::harness::config::ExperimentConfig;
use crate::harness::sweep::SummaryRow;
use crate::harness::trial::{TracePoint, TrialRecord};
use crate::metrics::dbm_to_watts;

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn result_header(users: usize) -> Vec<String> {
    let mut h: Vec<String> = ["sweep_axis", "sweep_value", "trial", "seed", "sum_rate_bps_hz"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((1..=users).map(|k| format!("rate_u{k}")));
    h.extend(
        [
            "t_s",
            "hpc_w",
            "tx_power_w",
            "objective",
            "iters_inner",
            "iters_outer",
            "penalty_final",
            "wall_ms",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    h
}

pub fn result_row(r: &TrialRecord, users: usize) -> Vec<String> {
    let mut row = vec![
        opt(r.sweep_axis),
        r.sweep_value.to_string(),
        r.trial.to_string(),
        r.seed.to_string(),
        r.sum_rate.to_string(),
    ];
    row.extend((0..users).map(|k| opt(r.rates.get(k))));
    row.extend([
        r.t_s.to_string(),
        r.hpc_w.to_string(),
        r.tx_power_w.to_string(),
        r.objective.to_string(),
        r.iters_inner.to_string(),
        opt(r.iters_outer),
        opt(r.penalty_final),
        opt(r.wall_ms),
    ]);
    row
}

/// One row per trial. An empty record list still writes the header.
pub fn write_results(path: &Path, records: &[TrialRecord], users: usize) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(result_header(users)).map_err(csv_err(path))?;
    for r in records {
        w.write_record(result_row(r, users)).map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// `results.csv` becomes `results_summary.csv`.
pub fn summary_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = path
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    path.with_file_name(format!("{stem}_summary{ext}"))
}

/// `results.csv` becomes `results_config.txt`.
pub fn config_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}_config.txt"))
}

/// Writes the run's configuration in the loadable `key = value` format, with
/// the fixed sampling laws as comments.
pub fn write_run_config(path: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let text = format!(
        "# solver {:?}, channel {:?}\n\
         # user and scatterer azimuth uniform in [-pi/2, pi/2] rad\n\
         # user and scatterer elevation uniform in [pi/4, 3pi/4] rad\n{}",
        cfg.solver,
        cfg.channel,
        cfg.to_text()
    );
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_summary(path: &Path, rows: &[SummaryRow], users: usize) -> Result<()> {
    let names: Vec<String> = result_header(users)
        .into_iter()
        .skip(4)
        .filter(|n| n != "seed")
        .collect();
    let mut header = vec![
        "sweep_axis".to_string(),
        "sweep_value".to_string(),
        "trials".to_string(),
    ];
    for n in &names {
        header.push(format!("{n}_mean"));
        header.push(format!("{n}_std"));
    }
    let mut w = writer(path)?;
    w.write_record(&header).map_err(csv_err(path))?;
    for r in rows {
        let mut row = vec![opt(r.sweep_axis), r.sweep_value.to_string(), r.trials.to_string()];
        for n in &names {
            row.push(opt(r.mean(n)));
            row.push(opt(r.std(n)));
        }
        w.write_record(&row).map_err(csv_err(path))?;
    }
    finish(w, path)
}

pub fn write_trace(path: &Path, trace: &[TracePoint]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["iteration", "objective", "penalty"])
        .map_err(csv_err(path))?;
    for (i, t) in trace.iter().enumerate() {
        w.write_record([i.to_string(), t.objective.to_string(), opt(t.penalty)])
            .map_err(csv_err(path))?;
    }
    finish(w, path)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdofRow {
    pub distance_m: f64,
    pub edof_near: f64,
    pub edof_far: f64,
    pub dof_analytic: f64,
}

/// Single broadside user without scatterers at each distance.
pub fn edof_table(cfg: &ExperimentConfig, distances: &[f64]) -> Result<Vec<EdofRow>> {
    let lambda = cfg.wavelength();
    let bs = UpaConfig::new(cfg.mt_v, cfg.mt_h, lambda / 2.0)?;
    let ue = UpaConfig::new(cfg.mr_v, cfg.mr_h, lambda / 2.0)?;
    distances
        .iter()
        .map(|&d| {
            let user = UserTerminal {
                array: ue,
                placement: Placement::new(d, 0.0, FRAC_PI_2)?,
                gain: free_space_gain(lambda, d),
            };
            let s = Scenario::new(bs, vec![user], Vec::new(), cfg.carrier_hz, dbm_to_watts(cfg.noise_dbm))?;
            Ok(EdofRow {
                distance_m: d,
                edof_near: edof(&assemble_channel(&s, 0, ChannelMode::Near)?)?,
                edof_far: edof(&assemble_channel(&s, 0, ChannelMode::Far)?)?,
                dof_analytic: analytic_dof(&s, 0)?,
            })
        })
        .collect()
}

pub fn write_edof(path: &Path, rows: &[EdofRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["distance_m", "edof_near", "edof_far", "dof_analytic"])
        .map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            r.distance_m.to_string(),
            r.edof_near.to_string(),
            r.edof_far.to_string(),
            r.dof_analytic.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    finish(w, path)
}

/// Writes the record as a two-line CSV to any sink.
pub fn print_record<W: Write>(out: &mut W, r: &TrialRecord, users: usize) -> std::io::Result<()> {
    writeln!(out, "{}", result_header(users).join(","))?;
    writeln!(out, "{}", result_row(r, users).join(","))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::SweepAxis;

    fn record() -> TrialRecord {
        TrialRecord {
            sweep_axis: Some(SweepAxis::Beta),
            sweep_value: 0.5,
            trial: 2,
            seed: 7,
            rates: vec![1.25, 2.0],
            sum_rate: 3.25,
            t_s: 3,
            hpc_w: 0.1,
            tx_power_w: 0.0316,
            objective: 2.0,
            iters_inner: 4,
            iters_outer: None,
            penalty_final: None,
            wall_ms: None,
            warning: false,
        }
    }

    #[test]
    fn empty_results_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_results(&p, &[], 4).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.trim_end().split(',').count(), 5 + 4 + 8);
    }

    #[test]
    fn rows_have_fixed_width_and_empty_optionals() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_results(&p, &[record()], 2).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
        assert_eq!(lines[1], "beta,0.5,2,7,3.25,1.25,2,3,0.1,0.0316,2,4,,,");
    }

    #[test]
    fn summary_sits_next_to_results() {
        assert_eq!(
            summary_path(Path::new("out/res.csv")),
            PathBuf::from("out/res_summary.csv")
        );
        assert_eq!(summary_path(Path::new("res")), PathBuf::from("res_summary"));
    }

    #[test]
    fn run_config_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let p = config_path(&dir.path().join("res.csv"));
        assert!(p.ends_with("res_config.txt"));
        let cfg = ExperimentConfig {
            seed: 99,
            beta: 0.4,
            ..ExperimentConfig::default()
        };
        write_run_config(&p, &cfg).unwrap();
        let back = ExperimentConfig::load(&p).unwrap();
        assert_eq!(back.seed, 99);
        assert_eq!(back.beta, 0.4);
        assert!(std::fs::read_to_string(&p).unwrap().contains("[pi/4, 3pi/4]"));
    }

    #[test]
    fn edof_far_is_rank_one() {
        let cfg = ExperimentConfig::default();
        let rows = edof_table(&cfg, &[2.0, 20.0]).unwrap();
        for r in &rows {
            assert!((r.edof_far - 1.0).abs() < 1e-9);
            assert!(r.edof_near >= 1.0 - 1e-9);
            assert!(r.dof_analytic > 0.0);
        }
        assert!(rows[0].edof_near > rows[1].edof_near);
        assert!(rows[0].dof_analytic > rows[1].dof_analytic);
    }

    #[test]
    fn io_error_names_path() {
        let p = Path::new("/nonexistent-dir/x.csv");
        let e = write_trace(p, &[]).unwrap_err();
        assert!(e.to_string().contains("/nonexistent-dir/x.csv"));
    }
}
