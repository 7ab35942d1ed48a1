//! Solver parameters shared by the continuous and discrete solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{dbm_to_watts, PowerModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Rate versus hardware-power tradeoff weight in `[0, 1]`.
    pub beta: f64,
    pub mu: f64,
    /// Receiver noise power in watts.
    pub noise: f64,
    pub power: PowerModel,
    pub rf_chains: usize,
    /// Bisection tolerance on the transmit power, in watts.
    pub eps1: f64,
    /// Relative objective change that stops the WMMSE loop.
    pub eps2: f64,
    /// Relative objective change that stops the inner penalty loop.
    pub eps3: f64,
    /// Penalty level, relative to the power budget, that stops the outer loop.
    pub eps4: f64,
    pub xi_max: f64,
    pub max_iters: usize,
    pub rho0: f64,
    pub shrink: f64,
    pub bits: u32,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Continuous iterations used to seed the discrete solver.
    pub warm_start_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            beta: 0.7,
            mu: 1.5,
            noise: dbm_to_watts(-105.0),
            power: PowerModel {
                rf_chain_watts: 0.2,
                shifter_watts: 0.01,
                budget_watts: dbm_to_watts(15.0),
            },
            rf_chains: 8,
            eps1: 1e-6,
            eps2: 1e-2,
            eps3: 1e-2,
            eps4: 1e-2,
            xi_max: 1e8,
            max_iters: 500,
            rho0: 100.0,
            shrink: 0.75,
            bits: 3,
            max_outer: 60,
            max_inner: 50,
            warm_start_iters: 5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta {} outside [0, 1]", self.beta));
        }
        if !(self.mu > 0.0) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.noise > 0.0) {
            return bad(format!("noise power must be positive, got {}", self.noise));
        }
        PowerModel::new(
            self.power.rf_chain_watts,
            self.power.shifter_watts,
            self.power.budget_watts,
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        if self.rf_chains == 0 {
            return bad("at least one RF chain is required".into());
        }
        for (name, v) in [
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("eps3", self.eps3),
            ("eps4", self.eps4),
            ("rho0", self.rho0),
            ("xi_max", self.xi_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad(format!("shrink {} outside (0, 1)", self.shrink));
        }
        if !(1..=8).contains(&self.bits) {
            return bad(format!("bits {} outside 1..=8", self.bits));
        }
        if self.max_iters == 0 || self.max_outer == 0 || self.max_inner == 0 {
            return bad("iteration limits must be positive".into());
        }
        Ok(())
    }

    /// Checks that every potential stream can get its own RF chain.
    pub fn validate_streams(&self, users: usize, streams: usize) -> Result<()> {
        if users * streams > self.rf_chains {
            return Err(Error::Config(format!(
                "{users} users x {streams} streams exceed {} RF chains",
                self.rf_chains
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = SolverConfig::default();
        c.validate().unwrap();
        assert!((c.noise - 3.162e-14).abs() < 1e-17);
        c.validate_streams(2, 4).unwrap();
        assert!(c.validate_streams(3, 4).is_err());
    }

    #[test]
    fn rejects_out_of_range() {
        let mut c = SolverConfig {
            beta: 1.2,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.beta = 0.5;
        c.shrink = 1.0;
        assert!(c.validate().is_err());
        c.shrink = 0.5;
        c.bits = 0;
        assert!(c.validate().is_err());
    }
}
