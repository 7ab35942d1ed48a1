//! Random scenario drawing.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::Result;
use crate::geometry::{free_space_gain, Placement, Scatterer, Scenario, UpaConfig, UserTerminal};
use crate::harness::config::ExperimentConfig;
use crate::metrics::dbm_to_watts;

fn angles<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    (
        rng.random_range(-PI / 2.0..=PI / 2.0),
        rng.random_range(PI / 4.0..=3.0 * PI / 4.0),
    )
}

/// Users on a ring around the BS and scatterers inside a disk, all angles
/// uniform. Elevation is kept within `[pi/4, 3pi/4]`.
pub fn sample_scenario<R: Rng + ?Sized>(cfg: &ExperimentConfig, rng: &mut R) -> Result<Scenario> {
    let lambda = cfg.wavelength();
    let d = lambda / 2.0;
    let bs = UpaConfig::new(cfg.mt_v, cfg.mt_h, d)?;
    let ue = UpaConfig::new(cfg.mr_v, cfg.mr_h, d)?;
    let mut users = Vec::with_capacity(cfg.k_users);
    for _ in 0..cfg.k_users {
        let r = rng.random_range(cfg.ring_inner_m..=cfg.ring_inner_m + cfg.ring_width_m);
        let (az, el) = angles(rng);
        users.push(UserTerminal {
            array: ue,
            placement: Placement::new(r, az, el)?,
            gain: free_space_gain(lambda, r),
        });
    }
    let mut scatterers = Vec::with_capacity(cfg.l_scatterers);
    for _ in 0..cfg.l_scatterers {
        // Uniform on (0, R]: flip the half-open [0, 1) draw.
        let r = cfg.scatter_radius_m * (1.0 - rng.random::<f64>());
        let (az, el) = angles(rng);
        scatterers.push(Scatterer {
            placement: Placement::new(r, az, el)?,
            phase: rng.random_range(-PI..PI),
        });
    }
    Scenario::new(bs, users, scatterers, cfg.carrier_hz, dbm_to_watts(cfg.noise_dbm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_seed_same_bytes() {
        let cfg = ExperimentConfig::default();
        let a = sample_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = sample_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = sample_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sample_bounds() {
        let cfg = ExperimentConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let s = sample_scenario(&cfg, &mut rng).unwrap();
            for u in &s.users {
                assert!((5.0..=10.0).contains(&u.placement.range));
                assert!((-PI / 2.0..=PI / 2.0).contains(&u.placement.azimuth));
                assert!((PI / 4.0..=3.0 * PI / 4.0).contains(&u.placement.elevation));
            }
            for sc in &s.scatterers {
                assert!(sc.placement.range > 0.0 && sc.placement.range <= 10.0);
                assert!((-PI..PI).contains(&sc.phase));
            }
        }
    }

    #[test]
    fn no_scatterers_when_l_is_zero() {
        let cfg = ExperimentConfig {
            l_scatterers: 0,
            ..Default::default()
        };
        let s = sample_scenario(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!(s.scatterers.is_empty());
    }
}
