//! Invariant checks on one seeded scenario.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::harness::config::ExperimentConfig;
use crate::harness::sample::sample_scenario;
use crate::linalg::CMat;
use crate::metrics::{achievable_rate, HybridBeamformer};
use crate::pli::pli_solve;
use crate::wmmse_ts::{relative_residual, wmmse_ts_solve, SelectionPolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, limit: f64) -> Check {
    Check {
        name,
        passed: value <= limit,
        detail: format!("{value:.3e} (limit {limit:.0e})"),
    }
}

fn unit_modulus_error(h: &HybridBeamformer) -> f64 {
    h.shifter_a
        .iter()
        .chain(h.shifter_b.iter())
        .map(|z| (z.norm() - 1.0).abs())
        .fold(0.0, f64::max)
}

fn rate_gap(
    channels: &[CMat],
    a: &[CMat],
    b: &[CMat],
    sel: &crate::metrics::StreamSelection,
    noise: f64,
) -> Result<f64> {
    let ra: f64 = achievable_rate(channels, a, sel, noise)?.iter().sum();
    let rb: f64 = achievable_rate(channels, b, sel, noise)?.iter().sum();
    Ok((ra - rb).abs() / ra.abs().max(1e-12))
}

/// Largest distance of a shifter phase from the `2^bits` grid, in radians.
fn grid_error(h: &HybridBeamformer, bits: u32) -> f64 {
    let step = 2.0 * PI / (1u32 << bits) as f64;
    h.shifter_a
        .iter()
        .chain(h.shifter_b.iter())
        .map(|z| {
            let t = z.arg().rem_euclid(2.0 * PI) / step;
            (t - t.round()).abs() * step
        })
        .fold(0.0, f64::max)
}

/// Runs both solvers on the scenario drawn from `seed` and checks the
/// structural invariants of their outputs.
pub fn validate_seed(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Check>> {
    let scenario = sample_scenario(cfg, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let channels = scenario.channels(cfg.channel)?;
    let sc = cfg.solver_config();
    let mut out = Vec::new();

    let w = wmmse_ts_solve(&channels, &sc, &SelectionPolicy::Adaptive)?;
    let hybrid = &w.factorization.hybrid;
    out.push(check(
        "factorization residual",
        relative_residual(&w.factorization, &w.state.fully_digital),
        1e-9,
    ));
    out.push(check("phase split", hybrid.split_error(), 1e-12));
    out.push(check("unit modulus", unit_modulus_error(hybrid), 1e-12));
    out.push(check(
        "hybrid rate",
        rate_gap(
            &channels,
            &w.state.fully_digital,
            &hybrid.effective_precoders(),
            &w.state.selection,
            sc.noise,
        )?,
        1e-8,
    ));
    let budget = sc.power.budget_watts;
    out.push(check(
        "power budget",
        (w.evaluation.tx_power - budget).max(0.0) / budget,
        1e-6,
    ));
    let drop = w
        .trace
        .windows(2)
        .map(|p| (p[0] - p[1]) / p[0].abs().max(1.0))
        .fold(0.0, f64::max);
    out.push(check("monotone objective", drop, 1e-6));
    out.push(Check {
        name: "chain count",
        passed: w.state.selection.active_count() <= sc.rf_chains,
        detail: format!("{} of {}", w.state.selection.active_count(), sc.rf_chains),
    });
    let again = wmmse_ts_solve(&channels, &sc, &SelectionPolicy::Adaptive)?;
    out.push(Check {
        name: "repeatable",
        passed: again.trace == w.trace,
        detail: format!("{} iterations", w.iterations),
    });

    let p = pli_solve(&channels, &sc)?;
    out.push(check("discrete phase grid", grid_error(&p.hybrid, sc.bits), 1e-9));
    out.push(check("discrete unit modulus", unit_modulus_error(&p.hybrid), 1e-12));
    out.push(check(
        "discrete power budget",
        (p.evaluation.tx_power - budget).max(0.0) / budget,
        1e-6,
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_passes() {
        let checks = validate_seed(&ExperimentConfig::default(), 5).unwrap();
        for c in &checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn grid_error_detects_off_grid_phase() {
        let mut h = HybridBeamformer {
            analog: CMat::zeros(1, 1),
            shifter_a: CMat::from_element(1, 1, crate::linalg::cis(PI / 2.0)),
            shifter_b: CMat::from_element(1, 1, crate::linalg::cis(-PI / 2.0)),
            baseband: Vec::new(),
        };
        assert!(grid_error(&h, 2) < 1e-12);
        h.shifter_a[(0, 0)] = crate::linalg::cis(0.3);
        assert!((grid_error(&h, 2) - 0.3).abs() < 1e-12);
    }
}
