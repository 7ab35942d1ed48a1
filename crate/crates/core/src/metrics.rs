//! Rates, power accounting and the MSE matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, cis, frobenius_sq, hermitize, identity, ln_det_hpd, CMat};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Per-user stream flags (the diagonals of the selection matrices).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamSelection {
    flags: Vec<Vec<bool>>,
}

impl StreamSelection {
    pub fn new(flags: Vec<Vec<bool>>) -> Self {
        Self { flags }
    }

    pub fn all(users: usize, streams: usize, on: bool) -> Self {
        Self {
            flags: vec![vec![on; streams]; users],
        }
    }

    /// First `per_user` streams of every user switched on.
    pub fn leading(users: usize, streams: usize, per_user: usize) -> Self {
        Self {
            flags: (0..users)
                .map(|_| (0..streams).map(|j| j < per_user).collect())
                .collect(),
        }
    }

    /// Decodes bit `k * streams + j` of `mask`.
    pub fn from_mask(users: usize, streams: usize, mask: u64) -> Self {
        Self {
            flags: (0..users)
                .map(|k| (0..streams).map(|j| mask >> (k * streams + j) & 1 == 1).collect())
                .collect(),
        }
    }

    pub fn flags(&self) -> &[Vec<bool>] {
        &self.flags
    }

    pub fn user(&self, k: usize) -> &[bool] {
        &self.flags[k]
    }

    pub fn is_on(&self, k: usize, j: usize) -> bool {
        self.flags[k][j]
    }

    pub fn set(&mut self, k: usize, j: usize, on: bool) {
        self.flags[k][j] = on;
    }

    pub fn num_users(&self) -> usize {
        self.flags.len()
    }

    pub fn active_count(&self) -> usize {
        self.flags.iter().flatten().filter(|&&f| f).count()
    }

    /// Active `(user, stream)` pairs in user-major order.
    pub fn active(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.flags
            .iter()
            .enumerate()
            .flat_map(|(k, u)| u.iter().enumerate().filter(|(_, &f)| f).map(move |(j, _)| (k, j)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub rf_chain_watts: f64,
    pub shifter_watts: f64,
    pub budget_watts: f64,
}

impl PowerModel {
    pub fn new(rf_chain_watts: f64, shifter_watts: f64, budget_watts: f64) -> Result<Self> {
        for (name, v) in [
            ("RF chain power", rf_chain_watts),
            ("phase shifter power", shifter_watts),
            ("power budget", budget_watts),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            rf_chain_watts,
            shifter_watts,
            budget_watts,
        })
    }

    /// Hardware cost of one active RF chain with its two shifters per antenna.
    pub fn per_chain(&self, mt: usize) -> f64 {
        self.rf_chain_watts + 2.0 * mt as f64 * self.shifter_watts
    }
}

/// Analog network `P = P1 + P2` (antennas x RF chains) with per-user baseband
/// precoders (RF chains x user streams).
#[derive(Debug, Clone, PartialEq)]
pub struct HybridBeamformer {
    pub analog: CMat,
    pub shifter_a: CMat,
    pub shifter_b: CMat,
    pub baseband: Vec<CMat>,
}

impl HybridBeamformer {
    pub fn effective_precoders(&self) -> Vec<CMat> {
        self.baseband.iter().map(|w| &self.analog * w).collect()
    }

    /// Largest `|P - (P1 + P2)|` over all entries.
    pub fn split_error(&self) -> f64 {
        self.analog
            .iter()
            .zip(self.shifter_a.iter().zip(self.shifter_b.iter()))
            .map(|(p, (a, b))| (p - a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Splits `a e^{j theta}` into two unit phasors summing to it.
pub fn phase_split(amplitude: f64, phase: f64) -> Result<(num_complex::Complex64, num_complex::Complex64)> {
    if !(0.0..=2.0).contains(&amplitude) {
        return Err(Error::InvalidArgument(format!("amplitude {amplitude} outside [0, 2]")));
    }
    let half = (amplitude / 2.0).acos();
    Ok((cis(half + phase), cis(-(half - phase))))
}

/// Zeroes the columns of `v` whose flag is off.
pub fn masked(v: &CMat, flags: &[bool]) -> CMat {
    let mut out = v.clone();
    for (j, &on) in flags.iter().enumerate() {
        if !on {
            out.column_mut(j).fill(c(0.0, 0.0));
        }
    }
    out
}

fn check_shapes(channels: &[CMat], precoders: &[CMat], selection: &StreamSelection) -> Result<()> {
    if channels.len() != precoders.len() || channels.len() != selection.num_users() {
        return Err(Error::Dimension(format!(
            "{} channels, {} precoders, {} selection rows",
            channels.len(),
            precoders.len(),
            selection.num_users()
        )));
    }
    for (k, (h, v)) in channels.iter().zip(precoders).enumerate() {
        if h.ncols() != v.nrows() || v.ncols() != selection.user(k).len() {
            return Err(Error::Dimension(format!(
                "user {k}: channel {}x{}, precoder {}x{}, {} flags",
                h.nrows(),
                h.ncols(),
                v.nrows(),
                v.ncols(),
                selection.user(k).len()
            )));
        }
    }
    Ok(())
}

/// Noise plus multi-user interference seen by user `k`.
pub fn interference_covariance(
    channels: &[CMat],
    precoders: &[CMat],
    selection: &StreamSelection,
    k: usize,
    noise: f64,
) -> Result<CMat> {
    check_shapes(channels, precoders, selection)?;
    let h = &channels[k];
    let mut q = identity(h.nrows()).scale(noise);
    for (i, v) in precoders.iter().enumerate() {
        if i == k {
            continue;
        }
        let s = h * masked(v, selection.user(i));
        q += &s * s.adjoint();
    }
    Ok(hermitize(&q))
}

pub fn achievable_rate(
    channels: &[CMat],
    precoders: &[CMat],
    selection: &StreamSelection,
    noise: f64,
) -> Result<Vec<f64>> {
    if !(noise > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise power must be positive, got {noise}"
        )));
    }
    check_shapes(channels, precoders, selection)?;
    (0..channels.len())
        .map(|k| {
            let q = interference_covariance(channels, precoders, selection, k, noise)?;
            let s = &channels[k] * masked(&precoders[k], selection.user(k));
            let total = &q + &s * s.adjoint();
            let r = (ln_det_hpd(&total)? - ln_det_hpd(&q)?) / std::f64::consts::LN_2;
            Ok(r.max(0.0))
        })
        .collect()
}

pub fn hardware_power(selection: &StreamSelection, model: &PowerModel, mt: usize) -> f64 {
    model.per_chain(mt) * selection.active_count() as f64
}

pub fn transmit_power(precoders: &[CMat], selection: &StreamSelection) -> f64 {
    precoders
        .iter()
        .enumerate()
        .map(|(k, v)| frobenius_sq(&masked(v, selection.user(k))))
        .sum()
}

pub fn network_objective(rates: &[f64], hpc_watts: f64, beta: f64) -> f64 {
    beta * rates.iter().sum::<f64>() - (1.0 - beta) * hpc_watts
}

/// `Z^H Q Z + (I - Z^H H V T)(I - Z^H H V T)^H`.
pub fn mse_matrix(z: &CMat, h: &CMat, v: &CMat, flags: &[bool], qdot: &CMat) -> Result<CMat> {
    let mr = z.ncols();
    if z.nrows() != h.nrows() || h.ncols() != v.nrows() || v.ncols() != flags.len() || flags.len() != mr {
        return Err(Error::Dimension(format!(
            "combiner {}x{}, channel {}x{}, precoder {}x{}, {} flags",
            z.nrows(),
            z.ncols(),
            h.nrows(),
            h.ncols(),
            v.nrows(),
            v.ncols(),
            flags.len()
        )));
    }
    if qdot.nrows() != h.nrows() || qdot.ncols() != h.nrows() {
        return Err(Error::Dimension("interference covariance shape".into()));
    }
    let e = identity(mr) - z.adjoint() * h * masked(v, flags);
    Ok(hermitize(&(z.adjoint() * qdot * z + &e * e.adjoint())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigen, hermitian_solve, trace_re, CVec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(rows, cols, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn dbm_conversion() {
        assert!((dbm_to_watts(-105.0) - 3.162e-14).abs() < 1e-17);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((watts_to_dbm(dbm_to_watts(15.0)) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn zero_precoders_give_zero_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = vec![random(2, 4, &mut rng), random(2, 4, &mut rng)];
        let v = vec![CMat::zeros(4, 2), CMat::zeros(4, 2)];
        let r = achievable_rate(&h, &v, &StreamSelection::all(2, 2, true), 1e-3).unwrap();
        assert!(r.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn scalar_rate() {
        let h = vec![CMat::from_element(1, 1, c(0.3, -0.4))];
        let w = vec![CMat::from_element(1, 1, c(2.0, 1.0))];
        let r = achievable_rate(&h, &w, &StreamSelection::all(1, 1, true), 0.1).unwrap()[0];
        let hw = c(0.3, -0.4) * c(2.0, 1.0);
        assert!((r - (1.0 + hw.norm_sqr() / 0.1).log2()).abs() < 1e-12);
    }

    #[test]
    fn rate_drops_with_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = vec![random(2, 6, &mut rng), random(2, 6, &mut rng)];
        let v = vec![random(6, 2, &mut rng), random(6, 2, &mut rng)];
        let sel = StreamSelection::all(2, 2, true);
        let a = achievable_rate(&h, &v, &sel, 0.5).unwrap();
        let b = achievable_rate(&h, &v, &sel, 1.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(x > y);
        }
    }

    #[test]
    fn rate_dimension_mismatch() {
        let h = vec![CMat::zeros(2, 4)];
        let v = vec![CMat::zeros(3, 2)];
        assert!(matches!(
            achievable_rate(&h, &v, &StreamSelection::all(1, 2, true), 1.0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn hpc_values() {
        let pm = PowerModel::new(0.2, 0.01, 1.0).unwrap();
        assert_eq!(hardware_power(&StreamSelection::all(2, 2, false), &pm, 512), 0.0);
        let one = StreamSelection::leading(1, 2, 1);
        assert!((hardware_power(&one, &pm, 512) - 10.44).abs() < 1e-12);
        let two = StreamSelection::leading(1, 2, 2);
        assert_eq!(hardware_power(&two, &pm, 64), 2.0 * hardware_power(&one, &pm, 64));
    }

    #[test]
    fn transmit_power_column_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = vec![random(5, 3, &mut rng), random(5, 3, &mut rng)];
        let sel = StreamSelection::new(vec![vec![true, false, true], vec![false, true, false]]);
        let oracle: f64 = sel.active().map(|(k, j)| v[k].column(j).norm_squared()).sum();
        assert!((transmit_power(&v, &sel) - oracle).abs() < 1e-12);
        assert_eq!(transmit_power(&v, &StreamSelection::all(2, 3, false)), 0.0);
        let all = StreamSelection::all(2, 3, true);
        assert_eq!(transmit_power(&v, &all), frobenius_sq(&v[0]) + frobenius_sq(&v[1]));
        let mut unit = CMat::zeros(4, 1);
        unit[(2, 0)] = c(0.0, 1.0);
        assert_eq!(transmit_power(&[unit], &StreamSelection::all(1, 1, true)), 1.0);
    }

    #[test]
    fn objective_arithmetic() {
        assert_eq!(network_objective(&[4.0, 6.0], 12.0, 1.0), 10.0);
        assert_eq!(network_objective(&[4.0, 6.0], 12.0, 0.0), -12.0);
        assert!((network_objective(&[4.0, 6.0], 12.0, 0.7) - 3.4).abs() < 1e-12);
    }

    #[test]
    fn mse_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random(2, 5, &mut rng);
        let v = random(5, 2, &mut rng);
        let q = identity(2).scale(0.3);
        let flags = [true, true];
        let f0 = mse_matrix(&CMat::zeros(2, 2), &h, &v, &flags, &q).unwrap();
        assert!((f0 - identity(2)).norm() < 1e-15);

        let s = &h * &v;
        let z = hermitian_solve(&(&q + &s * s.adjoint()), &s).unwrap();
        let f = mse_matrix(&z, &h, &v, &flags, &q).unwrap();
        assert!(trace_re(&f) < 2.0);
        assert!((&f - f.adjoint()).norm() < 1e-12);
        assert!(hermitian_eigen(&f).unwrap().values.iter().all(|&e| e >= -1e-10));
    }

    #[test]
    fn phase_split_cases() {
        let (a, b) = phase_split(2.0, 0.4).unwrap();
        assert!((a - cis(0.4)).norm() < 1e-15 && (b - cis(0.4)).norm() < 1e-15);
        let (a, b) = phase_split(0.0, 1.3).unwrap();
        assert!((a + b).norm() < 1e-15);
        let (a, b) = phase_split(1.0, 0.0).unwrap();
        let t = std::f64::consts::PI / 3.0;
        assert!((a - cis(t)).norm() < 1e-15 && (b - cis(-t)).norm() < 1e-15);
        assert!((a + b - c(1.0, 0.0)).norm() < 1e-15);
        assert!(phase_split(2.0 + 1e-9, 0.0).is_err());
        assert!(phase_split(-0.1, 0.0).is_err());
    }

    #[test]
    fn selection_helpers() {
        let s = StreamSelection::from_mask(2, 2, 0b1001);
        assert_eq!(s.flags(), &[vec![true, false], vec![false, true]]);
        assert_eq!(s.active().collect::<Vec<_>>(), vec![(0, 0), (1, 1)]);
        assert_eq!(StreamSelection::leading(3, 4, 2).active_count(), 6);
        let _ = CVec::zeros(1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn phase_split_inverts_addition(a in 0.0f64..=2.0, t in -10.0f64..10.0) {
                let (p1, p2) = phase_split(a, t).unwrap();
                prop_assert!((p1.norm() - 1.0).abs() < 1e-15);
                prop_assert!((p2.norm() - 1.0).abs() < 1e-15);
                prop_assert!((p1 + p2 - cis(t) * a).norm() <= 1e-12);
            }

            #[test]
            fn objective_is_affine_in_beta(r in 0.0f64..50.0, p in 0.0f64..50.0, b1 in 0.0f64..1.0, b2 in 0.0f64..1.0) {
                let mid = network_objective(&[r], p, 0.5 * (b1 + b2));
                let avg = 0.5 * (network_objective(&[r], p, b1) + network_objective(&[r], p, b2));
                prop_assert!((mid - avg).abs() < 1e-9);
            }

            #[test]
            fn rates_are_finite_and_nonnegative(seed in any::<u64>(), noise in 1e-6f64..10.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let h = vec![random(2, 4, &mut rng), random(2, 4, &mut rng)];
                let v = vec![random(4, 2, &mut rng), random(4, 2, &mut rng)];
                let sel = StreamSelection::from_mask(2, 2, seed & 15);
                for r in achievable_rate(&h, &v, &sel, noise).unwrap() {
                    prop_assert!(r.is_finite() && r >= 0.0);
                }
            }
        }
    }
}
