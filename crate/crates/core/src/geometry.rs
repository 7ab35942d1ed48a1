//! Array geometry and spherical-wave channel synthesis.
//!
//! All planar arrays lie in the y-o-z plane. The BS element in the first row
//! and first column sits at the origin; user arrays are translated to their
//! placement. Element order is row-major everywhere: the vertical index is the
//! outer loop and the horizontal index the inner one.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cis, frobenius_sq, CMat, CVec};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type Point3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpaConfig {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
}

impl UpaConfig {
    pub fn new(rows: usize, cols: usize, spacing: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "UPA needs at least one element, got {rows}x{cols}"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "UPA spacing must be positive, got {spacing}"
            )));
        }
        Ok(Self { rows, cols, spacing })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Diagonal extent of the array.
    pub fn aperture(&self) -> f64 {
        let v = (self.rows - 1) as f64 * self.spacing;
        let h = (self.cols - 1) as f64 * self.spacing;
        v.hypot(h)
    }
}

/// Spherical position relative to the origin: range, azimuth from the x axis
/// in the x-y plane, and elevation measured from the z axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub range: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

impl Placement {
    pub fn new(range: f64, azimuth: f64, elevation: f64) -> Result<Self> {
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::InvalidArgument(format!("range must be positive, got {range}")));
        }
        if !(-PI / 2.0..=PI / 2.0).contains(&azimuth) {
            return Err(Error::InvalidArgument(format!(
                "azimuth {azimuth} outside [-pi/2, pi/2]"
            )));
        }
        if !(elevation > 0.0 && elevation < PI) {
            return Err(Error::InvalidArgument(format!("elevation {elevation} outside (0, pi)")));
        }
        Ok(Self {
            range,
            azimuth,
            elevation,
        })
    }

    pub fn position(&self) -> Point3 {
        let (r, t, p) = (self.range, self.azimuth, self.elevation);
        [r * t.cos() * p.sin(), r * t.sin() * p.sin(), r * p.cos()]
    }

    pub fn direction(&self) -> Point3 {
        let [x, y, z] = self.position();
        [x / self.range, y / self.range, z / self.range]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserTerminal {
    pub array: UpaConfig,
    pub placement: Placement,
    pub gain: Complex64,
}

/// Single-bounce scatterer. The path amplitude depends on the user it
/// illuminates, so only the random phase of the complex gain is stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub placement: Placement,
    pub phase: f64,
}

impl Scatterer {
    /// Complex gain of the BS -> scatterer -> user path.
    pub fn gain_for(&self, user: &UserTerminal, wavelength: f64) -> Complex64 {
        let p = self.placement.position();
        let path = self.placement.range + pairwise_distance(&p, &user.placement.position());
        free_space_gain(wavelength, path) * cis(self.phase)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub bs: UpaConfig,
    pub users: Vec<UserTerminal>,
    pub scatterers: Vec<Scatterer>,
    pub carrier_hz: f64,
    pub wavelength: f64,
    pub noise_power: f64,
}

impl Scenario {
    pub fn new(
        bs: UpaConfig,
        users: Vec<UserTerminal>,
        scatterers: Vec<Scatterer>,
        carrier_hz: f64,
        noise_power: f64,
    ) -> Result<Self> {
        if !(carrier_hz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "carrier must be positive, got {carrier_hz}"
            )));
        }
        if !(noise_power > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise power must be positive, got {noise_power}"
            )));
        }
        let scenario = Self {
            bs,
            users,
            scatterers,
            carrier_hz,
            wavelength: SPEED_OF_LIGHT / carrier_hz,
            noise_power,
        };
        let outside = scenario.rayleigh_violations();
        if let Some(&k) = outside.first() {
            // Sweeps build thousands of scenarios; only the first report is loud.
            static REPORTED: AtomicBool = AtomicBool::new(false);
            let level = if REPORTED.swap(true, Ordering::Relaxed) {
                log::Level::Debug
            } else {
                log::Level::Warn
            };
            log::log!(
                level,
                "{} of {} users beyond the Rayleigh distance {:.3} m (user {k} at {:.3} m)",
                outside.len(),
                scenario.users.len(),
                scenario.rayleigh_distance(k),
                scenario.users[k].placement.range
            );
        }
        Ok(scenario)
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn rayleigh_distance(&self, user: usize) -> f64 {
        let d = self.bs.aperture() + self.users[user].array.aperture();
        2.0 * d * d / self.wavelength
    }

    /// Users placed at or beyond the Rayleigh distance.
    pub fn rayleigh_violations(&self) -> Vec<usize> {
        (0..self.users.len())
            .filter(|&k| self.users[k].placement.range >= self.rayleigh_distance(k))
            .collect()
    }

    pub fn channels(&self, mode: ChannelMode) -> Result<Vec<CMat>> {
        (0..self.users.len()).map(|k| assemble_channel(self, k, mode)).collect()
    }
}

pub fn free_space_gain(wavelength: f64, distance: f64) -> Complex64 {
    Complex64::new(wavelength / (4.0 * PI * distance), 0.0)
}

/// Element coordinates of a UPA. `None` anchors the first element at the
/// origin (BS convention); a placement translates the array there.
pub fn antenna_positions(upa: &UpaConfig, anchor: Option<&Placement>) -> Vec<Point3> {
    let base = anchor.map(Placement::position).unwrap_or([0.0; 3]);
    let d = upa.spacing;
    let mut out = Vec::with_capacity(upa.len());
    for v in 0..upa.rows {
        for h in 0..upa.cols {
            out.push([base[0], base[1] + v as f64 * d, base[2] + h as f64 * d]);
        }
    }
    out
}

pub fn pairwise_distance(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Expanded form of the BS-element to user-element distance, with zero-based
/// row/column offsets `(m, n)` at the user and `(v, h)` at the BS.
pub fn expanded_distance(user: &Placement, spacing: f64, m: usize, n: usize, v: usize, h: usize) -> f64 {
    let (r, t, p) = (user.range, user.azimuth, user.elevation);
    let dm = m as f64 - v as f64;
    let dn = n as f64 - h as f64;
    let d = spacing;
    (r * r + dm * dm * d * d + dn * dn * d * d + 2.0 * r * t.sin() * p.sin() * dm * d + 2.0 * r * p.cos() * dn * d)
        .sqrt()
}

/// Spherical-wave response `exp(-j 2 pi / lambda * |focal - tx_i|)`.
pub fn array_response(tx_positions: &[Point3], focal: &Point3, wavelength: f64) -> CVec {
    let k0 = 2.0 * PI / wavelength;
    CVec::from_iterator(
        tx_positions.len(),
        tx_positions.iter().map(|p| cis(-k0 * pairwise_distance(focal, p))),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelMode {
    Near,
    Far,
}

impl std::str::FromStr for ChannelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "near" => Ok(Self::Near),
            "far" => Ok(Self::Far),
            other => Err(Error::Config(format!("unknown channel mode '{other}' (near|far)"))),
        }
    }
}

impl std::fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Near => "near",
            Self::Far => "far",
        })
    }
}

fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Channel matrix (user elements x BS elements) for one user.
///
/// `Near` evaluates exact spherical path lengths. `Far` linearizes every path
/// around the array reference points, giving one rank-one term per path.
pub fn assemble_channel(scenario: &Scenario, user_index: usize, mode: ChannelMode) -> Result<CMat> {
    let user = scenario.users.get(user_index).ok_or(Error::UserIndex {
        index: user_index,
        count: scenario.users.len(),
    })?;
    let lambda = scenario.wavelength;
    let k0 = 2.0 * PI / lambda;
    let bs_pos = antenna_positions(&scenario.bs, None);
    let user_pos = antenna_positions(&user.array, Some(&user.placement));
    let user_ref = user.placement.position();
    let offsets: Vec<Point3> = user_pos.iter().map(|p| sub(p, &user_ref)).collect();
    let (mr, mt) = (user_pos.len(), bs_pos.len());
    let r_k = user.placement.range;
    let los_gain = user.gain * cis(-k0 * r_k);

    let mut h = CMat::zeros(mr, mt);
    match mode {
        ChannelMode::Near => {
            for (i, rx) in user_pos.iter().enumerate() {
                for (j, tx) in bs_pos.iter().enumerate() {
                    h[(i, j)] = los_gain * cis(-k0 * pairwise_distance(rx, tx));
                }
            }
            for s in &scenario.scatterers {
                let p = s.placement.position();
                let a_rx = array_response(&user_pos, &p, lambda);
                let a_tx = array_response(&bs_pos, &p, lambda);
                h += (a_rx * a_tx.transpose()) * s.gain_for(user, lambda);
            }
        }
        ChannelMode::Far => {
            let u = user.placement.direction();
            let a_rx = CVec::from_iterator(mr, offsets.iter().map(|o| cis(-k0 * dot(&u, o))));
            let a_tx = CVec::from_iterator(mt, bs_pos.iter().map(|s| cis(k0 * dot(&u, s))));
            h += (a_rx * a_tx.transpose()) * (los_gain * cis(-k0 * r_k));
            for s in &scenario.scatterers {
                let p = s.placement.position();
                let ul = s.placement.direction();
                let to_user = sub(&user_ref, &p);
                let d_lk = dot(&to_user, &to_user).sqrt();
                let v = [to_user[0] / d_lk, to_user[1] / d_lk, to_user[2] / d_lk];
                let a_rx = CVec::from_iterator(mr, offsets.iter().map(|o| cis(-k0 * dot(&v, o))));
                let a_tx = CVec::from_iterator(mt, bs_pos.iter().map(|b| cis(k0 * dot(&ul, b))));
                let phase = cis(-k0 * (d_lk + s.placement.range));
                h += (a_rx * a_tx.transpose()) * (s.gain_for(user, lambda) * phase);
            }
        }
    }
    Ok(h)
}

/// Closed-form DoF estimate for a user, without clamping.
pub fn analytic_dof(scenario: &Scenario, user_index: usize) -> Result<f64> {
    let user = scenario.users.get(user_index).ok_or(Error::UserIndex {
        index: user_index,
        count: scenario.users.len(),
    })?;
    let bs = &scenario.bs;
    let ua = &user.array;
    let l = scenario.scatterers.len() as f64;
    let d = bs.spacing;
    let quartic = 2.0
        * (bs.rows as f64 - 1.0)
        * (bs.cols as f64 - 1.0)
        * (ua.rows as f64 - 1.0)
        * (ua.cols as f64 - 1.0)
        * d.powi(4)
        / (scenario.wavelength * user.placement.range).powi(2);
    Ok((quartic + l).min(ua.len() as f64 + l).min(bs.len() as f64 + l))
}

/// Participation ratio of the squared singular values,
/// `(sum s_i^2)^2 / sum s_i^4`, evaluated through `H H^H`.
pub fn edof(h: &CMat) -> Result<f64> {
    let g = if h.nrows() <= h.ncols() {
        h * h.adjoint()
    } else {
        h.adjoint() * h
    };
    let tr: f64 = (0..g.nrows()).map(|i| g[(i, i)].re).sum();
    let fro = frobenius_sq(&g);
    if tr <= 0.0 || fro <= 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(tr * tr / fro)
}
