//! Circular protection-region rule with localization error, the
//! conventional geolocation database the pipeline is compared against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvws_core::radio::{interference_power_limit_dbm, InterferenceParams, Location};
use tvws_core::reuse::Mpep;
use tvws_core::scenario::ScenarioConfig;
use tvws_core::Result;

use crate::metrics::{compare_mpep, MpepComparison};
use crate::pipeline::Truth;

/// Localization errors of GPS, Wi-Fi and cellular positioning, meters.
pub const LOCALIZATION_ERRORS_M: [f64; 3] = [50.0, 150.0, 1000.0];

/// MPEP granted by the circular rule to a device that believes it is at
/// `dev_loc` displaced by a random error of at most `loc_error_max_m`.
/// Inside the protection radius nothing may transmit; outside, the
/// limit is taken towards the nearest point of the protection circle.
pub fn baseline_circular_mpep(
    dev_loc: &Location,
    loc_error_max_m: f64,
    d_p_km: f64,
    tx_loc: &Location,
    ip: &InterferenceParams,
    seed: u64,
) -> Result<Mpep> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    let r_km = if loc_error_max_m > 0.0 {
        rng.random_range(0.0..=loc_error_max_m) / 1000.0
    } else {
        0.0
    };
    let reported = dev_loc.offset(r_km * theta.cos(), r_km * theta.sin());
    let d = reported.distance_to(tx_loc);
    if d <= d_p_km {
        return Ok(Mpep::NoTransmission);
    }
    let k = d_p_km / d;
    let edge = Location::new(tx_loc.x + (reported.x - tx_loc.x) * k, tx_loc.y + (reported.y - tx_loc.y) * k);
    let limit = interference_power_limit_dbm(&reported, &edge, ip)?;
    Ok(Mpep::Dbm(limit.min(ip.p_peak_dbm)))
}

/// Seed of the error draw for in-cell grid `k`.
fn grid_seed(seed: u64, k: usize) -> u64 {
    (seed ^ 0xba5e_11ae).wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(k as u64)
}

/// Baseline MPEP of every in-cell grid, in the order of `truth.cell`.
pub fn baseline_database(cfg: &ScenarioConfig, truth: &Truth, loc_error_max_m: f64, seed: u64) -> Result<Vec<Mpep>> {
    truth
        .cell
        .iter()
        .enumerate()
        .map(|(k, &(r, c))| {
            baseline_circular_mpep(
                &cfg.grid.center(r, c),
                loc_error_max_m,
                cfg.d_p_km,
                &cfg.tx.loc,
                &cfg.interference,
                grid_seed(seed, k),
            )
        })
        .collect()
}

/// MPEP comparison and interference-probability bias of the baseline,
/// with protection judged at the device's true position.
pub fn score_baseline(
    cfg: &ScenarioConfig,
    truth: &Truth,
    loc_error_max_m: f64,
    seed: u64,
) -> Result<(MpepComparison, Vec<f64>)> {
    let derived = baseline_database(cfg, truth, loc_error_max_m, seed)?;
    let nu = cfg.interference.int_threshold;
    let ip_bias = derived
        .iter()
        .enumerate()
        .map(|(k, p)| Ok(truth.achieved_ip(cfg, k, p.as_power_dbm())? - nu))
        .collect::<Result<Vec<_>>>()?;
    let oracle: Vec<_> = truth.oracle.iter().map(|(_, _, e)| e.power).collect();
    Ok((compare_mpep(&derived, &oracle), ip_bias))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tvws_core::radio::worst_case_interference_range_km;

    fn ip() -> InterferenceParams {
        ScenarioConfig::scenario_one().interference
    }

    #[test]
    fn inside_protection_is_silent() {
        let tx = Location::new(0.0, 0.0);
        let p = baseline_circular_mpep(&Location::new(100.0, 0.0), 1000.0, 134.2, &tx, &ip(), 3).unwrap();
        assert_eq!(p, Mpep::NoTransmission);
    }

    #[test]
    fn keep_out_equals_worst_case_range() {
        let tx = Location::new(0.0, 0.0);
        let ip = ip();
        let d = 134.2 + worst_case_interference_range_km(&ip);
        let p = baseline_circular_mpep(&Location::new(0.0, d), 0.0, 134.2, &tx, &ip, 0).unwrap();
        assert!((p.as_power_dbm() - ip.p_peak_dbm).abs() < 1e-9);
        let nearer = baseline_circular_mpep(&Location::new(0.0, d - 0.5), 0.0, 134.2, &tx, &ip, 0).unwrap();
        assert!(nearer.as_power_dbm() < ip.p_peak_dbm);
    }

    #[test]
    fn error_magnitude_is_bounded() {
        // with the device 40 m outside the circle, a 30 m error never crosses it
        let tx = Location::new(0.0, 0.0);
        for seed in 0..200 {
            let p = baseline_circular_mpep(&Location::new(134.24, 0.0), 30.0, 134.2, &tx, &ip(), seed).unwrap();
            assert!(matches!(p, Mpep::Dbm(_)));
        }
    }
}
