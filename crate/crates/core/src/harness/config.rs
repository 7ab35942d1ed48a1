//! Experiment configuration and its flat `key = value` file format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::geometry::{ChannelMode, SPEED_OF_LIGHT};
use crate::metrics::{dbm_to_watts, PowerModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverKind {
    WmmseTs,
    Pli,
    FixedStreams,
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wmmse-ts" => Ok(Self::WmmseTs),
            "pli" => Ok(Self::Pli),
            "fixed" => Ok(Self::FixedStreams),
            other => Err(Error::Config(format!("unknown solver '{other}' (wmmse-ts|pli|fixed)"))),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::WmmseTs => "wmmse-ts",
            Self::Pli => "pli",
            Self::FixedStreams => "fixed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    PmaxDbm,
    Beta,
    Mu,
    Bits,
    Distance,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p_max_dbm" => Ok(Self::PmaxDbm),
            "beta" => Ok(Self::Beta),
            "mu" => Ok(Self::Mu),
            "bits" => Ok(Self::Bits),
            "distance" => Ok(Self::Distance),
            other => Err(Error::Config(format!(
                "unknown sweep axis '{other}' (p_max_dbm|beta|mu|bits|distance)"
            ))),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PmaxDbm => "p_max_dbm",
            Self::Beta => "beta",
            Self::Mu => "mu",
            Self::Bits => "bits",
            Self::Distance => "distance",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mt_v: usize,
    pub mt_h: usize,
    pub mr_v: usize,
    pub mr_h: usize,
    pub k_users: usize,
    pub l_scatterers: usize,
    pub rf_chains: usize,
    pub carrier_hz: f64,
    pub noise_dbm: f64,
    pub p_max_dbm: f64,
    pub beta: f64,
    pub mu: f64,
    pub rho0: f64,
    pub shrink: f64,
    pub bits: u32,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub eps4: f64,
    pub ring_inner_m: f64,
    pub ring_width_m: f64,
    pub scatter_radius_m: f64,
    pub p_rf_w: f64,
    pub p_ps_w: f64,
    pub trials: usize,
    pub seed: u64,
    pub solver: SolverKind,
    pub channel: ChannelMode,
    /// Streams per user for the fixed-stream baseline; all of them if unset.
    pub fixed_streams: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mt_v: 8,
            mt_h: 8,
            mr_v: 2,
            mr_h: 2,
            k_users: 2,
            l_scatterers: 5,
            rf_chains: 8,
            carrier_hz: 28e9,
            noise_dbm: -105.0,
            p_max_dbm: 15.0,
            beta: 0.7,
            mu: 1.5,
            rho0: 100.0,
            shrink: 0.75,
            bits: 3,
            eps1: 1e-6,
            eps2: 1e-2,
            eps3: 1e-2,
            eps4: 1e-2,
            ring_inner_m: 5.0,
            ring_width_m: 5.0,
            scatter_radius_m: 10.0,
            p_rf_w: 0.2,
            p_ps_w: 0.01,
            trials: 20,
            seed: 0,
            solver: SolverKind::WmmseTs,
            channel: ChannelMode::Near,
            fixed_streams: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

impl ExperimentConfig {
    pub fn streams_per_user(&self) -> usize {
        self.mr_v * self.mr_h
    }

    pub fn fixed_stream_count(&self) -> usize {
        self.fixed_streams.unwrap_or(self.streams_per_user())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "mt_v" => self.mt_v = parse(key, value)?,
            "mt_h" => self.mt_h = parse(key, value)?,
            "mr_v" => self.mr_v = parse(key, value)?,
            "mr_h" => self.mr_h = parse(key, value)?,
            "k_users" => self.k_users = parse(key, value)?,
            "l_scatterers" => self.l_scatterers = parse(key, value)?,
            "rf_chains" => self.rf_chains = parse(key, value)?,
            "carrier_hz" => self.carrier_hz = parse(key, value)?,
            "noise_dbm" => self.noise_dbm = parse(key, value)?,
            "p_max_dbm" => self.p_max_dbm = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "mu" => self.mu = parse(key, value)?,
            "rho0" => self.rho0 = parse(key, value)?,
            "shrink" => self.shrink = parse(key, value)?,
            "bits" => self.bits = parse(key, value)?,
            "eps1" => self.eps1 = parse(key, value)?,
            "eps2" => self.eps2 = parse(key, value)?,
            "eps3" => self.eps3 = parse(key, value)?,
            "eps4" => self.eps4 = parse(key, value)?,
            "ring_inner_m" => self.ring_inner_m = parse(key, value)?,
            "ring_width_m" => self.ring_width_m = parse(key, value)?,
            "scatter_radius_m" => self.scatter_radius_m = parse(key, value)?,
            "p_rf_w" => self.p_rf_w = parse(key, value)?,
            "p_ps_w" => self.p_ps_w = parse(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines on top of the defaults. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Serializes the file-backed keys in the same format `parse_text` reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        put("mt_v", self.mt_v.to_string());
        put("mt_h", self.mt_h.to_string());
        put("mr_v", self.mr_v.to_string());
        put("mr_h", self.mr_h.to_string());
        put("k_users", self.k_users.to_string());
        put("l_scatterers", self.l_scatterers.to_string());
        put("rf_chains", self.rf_chains.to_string());
        put("carrier_hz", self.carrier_hz.to_string());
        put("noise_dbm", self.noise_dbm.to_string());
        put("p_max_dbm", self.p_max_dbm.to_string());
        put("beta", self.beta.to_string());
        put("mu", self.mu.to_string());
        put("rho0", self.rho0.to_string());
        put("shrink", self.shrink.to_string());
        put("bits", self.bits.to_string());
        put("eps1", self.eps1.to_string());
        put("eps2", self.eps2.to_string());
        put("eps3", self.eps3.to_string());
        put("eps4", self.eps4.to_string());
        put("ring_inner_m", self.ring_inner_m.to_string());
        put("ring_width_m", self.ring_width_m.to_string());
        put("scatter_radius_m", self.scatter_radius_m.to_string());
        put("p_rf_w", self.p_rf_w.to_string());
        put("p_ps_w", self.p_ps_w.to_string());
        put("trials", self.trials.to_string());
        put("seed", self.seed.to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, v) in [
            ("mt_v", self.mt_v),
            ("mt_h", self.mt_h),
            ("mr_v", self.mr_v),
            ("mr_h", self.mr_h),
            ("k_users", self.k_users),
            ("trials", self.trials),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if !(self.carrier_hz > 0.0) {
            return bad(format!("carrier_hz must be positive, got {}", self.carrier_hz));
        }
        if !(self.ring_inner_m > 0.0 && self.ring_width_m >= 0.0) {
            return bad("ring must have a positive inner radius and non-negative width".into());
        }
        if !(self.scatter_radius_m > 0.0) {
            return bad("scatter_radius_m must be positive".into());
        }
        let t = self.fixed_stream_count();
        if t == 0 || t > self.streams_per_user() {
            return bad(format!(
                "fixed stream count {t} outside 1..={}",
                self.streams_per_user()
            ));
        }
        self.solver_config().validate()?;
        self.solver_config()
            .validate_streams(self.k_users, self.streams_per_user())
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            beta: self.beta,
            mu: self.mu,
            noise: dbm_to_watts(self.noise_dbm),
            power: PowerModel {
                rf_chain_watts: self.p_rf_w,
                shifter_watts: self.p_ps_w,
                budget_watts: dbm_to_watts(self.p_max_dbm),
            },
            rf_chains: self.rf_chains,
            eps1: self.eps1,
            eps2: self.eps2,
            eps3: self.eps3,
            eps4: self.eps4,
            rho0: self.rho0,
            shrink: self.shrink,
            bits: self.bits,
            ..SolverConfig::default()
        }
    }

    /// Copy of the configuration with one swept parameter replaced.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let mut c = self.clone();
        match axis {
            SweepAxis::PmaxDbm => c.p_max_dbm = value,
            SweepAxis::Beta => c.beta = value,
            SweepAxis::Mu => c.mu = value,
            SweepAxis::Bits => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::Config(format!("bit depth {value} is not a positive integer")));
                }
                c.bits = value as u32;
            }
            SweepAxis::Distance => {
                c.ring_inner_m = value;
                c.ring_width_m = 0.0;
            }
        }
        c.validate()?;
        Ok(c)
    }
}
