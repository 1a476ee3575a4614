//! Crowd-sensed energy-detector reports and their aggregation into a
//! partially observed spectrum matrix.
//!
//! A device reports `y = T + a` where `T = p + v` is the detector output
//! (`p` the received DTV power in Watts, `v ~ N(N₀, (p + N₀)² / N_sam)`)
//! and `a` is an abnormal component, zero for honest reports.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::matrix::{PartialSpectrumMatrix, SpectrumMatrix};
use crate::radio::{dbm_to_watt, watt_to_dbm, Location};

/// Smallest signal power kept after noise-floor subtraction.
pub const SIGNAL_FLOOR_W: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingParams {
    /// Reports per sampled grid, also the detector's sample count.
    pub n_sam: usize,
    /// Probability that a grid is sampled at all.
    pub sampling_rate: f64,
    /// Fewest reports for a grid to count as known.
    pub min_count: usize,
    pub abnormal_rate: f64,
    /// Abnormal components are uniform in `[0, abnormal_magnitude_w]`.
    pub abnormal_magnitude_w: f64,
}

impl Default for SensingParams {
    fn default() -> Self {
        SensingParams {
            n_sam: 100,
            sampling_rate: 0.5,
            min_count: 10,
            abnormal_rate: 0.0,
            abnormal_magnitude_w: 0.0,
        }
    }
}

impl SensingParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_sam == 0 {
            return Err(Error::domain("n_sam must be at least 1"));
        }
        if !(self.sampling_rate > 0.0 && self.sampling_rate <= 1.0) {
            return Err(Error::domain(format!("sampling rate must be in (0, 1], got {}", self.sampling_rate)));
        }
        if !(0.0..=1.0).contains(&self.abnormal_rate) {
            return Err(Error::domain(format!("abnormal rate must be in [0, 1], got {}", self.abnormal_rate)));
        }
        if !(self.abnormal_magnitude_w >= 0.0 && self.abnormal_magnitude_w.is_finite()) {
            return Err(Error::domain("abnormal magnitude must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingReport {
    pub device_id: u64,
    pub loc: Location,
    /// Energy-detector output `T` in Watts.
    pub detector_watts: f64,
    /// Abnormal component `a` in Watts, zero for normal reports.
    pub abnormal_watts: f64,
}

impl SensingReport {
    /// What the base station receives: `T + a`.
    pub fn reported_watts(&self) -> f64 {
        self.detector_watts + self.abnormal_watts
    }
}

/// Draws reports for a random subset of grids. Each grid is sampled
/// independently with probability `sampling_rate` and then receives
/// `n_sam` reports located at its center.
pub fn synthesize_reports(
    truth: &SpectrumMatrix,
    grid: &GridSpec,
    params: &SensingParams,
    noise_floor_dbm: f64,
    seed: u64,
) -> Result<Vec<SensingReport>> {
    params.validate()?;
    if truth.shape() != grid.shape() {
        return Err(Error::Dimension {
            expected: grid.shape(),
            got: truth.shape(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n0 = dbm_to_watt(noise_floor_dbm);
    let sqrt_n = (params.n_sam as f64).sqrt();
    let mut reports = Vec::new();
    let mut next_id = 0u64;
    for (r, c, center) in grid.centers() {
        if !rng.random_bool(params.sampling_rate) {
            continue;
        }
        let p = dbm_to_watt(truth.get(r, c));
        let noise = Normal::new(n0, (p + n0) / sqrt_n).map_err(|e| Error::domain(e.to_string()))?;
        for _ in 0..params.n_sam {
            let detector = (p + noise.sample(&mut rng)).max(0.0);
            let abnormal = if params.abnormal_rate > 0.0 && rng.random_bool(params.abnormal_rate) {
                rng.random_range(0.0..=params.abnormal_magnitude_w)
            } else {
                0.0
            };
            reports.push(SensingReport {
                device_id: next_id,
                loc: center,
                detector_watts: detector,
                abnormal_watts: abnormal,
            });
            next_id += 1;
        }
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    pub matrix: PartialSpectrumMatrix,
    /// Reports whose location fell outside the grid.
    pub dropped: usize,
}

/// Averages reports per grid, subtracts the noise floor and converts to
/// dBm. Grids with fewer than `min_count` reports stay unknown.
pub fn aggregate_to_grid(
    reports: &[SensingReport],
    grid: &GridSpec,
    min_count: usize,
    noise_floor_dbm: f64,
) -> Result<Aggregation> {
    let mut sums = vec![0.0f64; grid.len()];
    let mut counts = vec![0usize; grid.len()];
    let mut dropped = 0;
    for rep in reports {
        match grid.cell_of(&rep.loc) {
            Some((r, c)) => {
                let k = r * grid.cols + c;
                sums[k] += rep.reported_watts();
                counts[k] += 1;
            }
            None => dropped += 1,
        }
    }
    let n0 = dbm_to_watt(noise_floor_dbm);
    let mut matrix = PartialSpectrumMatrix::unknown(grid.rows, grid.cols);
    for (k, (&sum, &n)) in sums.iter().zip(&counts).enumerate() {
        if n == 0 || n < min_count {
            continue;
        }
        let signal = (sum / n as f64 - n0).max(SIGNAL_FLOOR_W);
        matrix.set(k / grid.cols, k % grid.cols, watt_to_dbm(signal)?);
    }
    Ok(Aggregation { matrix, dropped })
}

/// Cell-wide and per-device uplink rates in bits/s for `n_cell` reports
/// of `bits_per_report` bits each, sent once per `period_s` by `m_cell`
/// devices.
pub fn uplink_overhead(n_cell: u64, bits_per_report: u64, period_s: f64, m_cell: u64) -> Result<(f64, f64)> {
    if n_cell == 0 || bits_per_report == 0 || m_cell == 0 || !(period_s > 0.0) {
        return Err(Error::domain("uplink overhead inputs must be positive"));
    }
    let cell = n_cell as f64 * bits_per_report as f64 / period_s;
    Ok((cell, cell / m_cell as f64))
}

const REPORT_HEADER: [&str; 5] = ["device_id", "x_km", "y_km", "detector_watts", "abnormal_watts"];

pub fn write_reports_csv<W: Write>(reports: &[SensingReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        w.write_record([
            r.device_id.to_string(),
            r.loc.x.to_string(),
            r.loc.y.to_string(),
            r.detector_watts.to_string(),
            r.abnormal_watts.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_reports_csv<R: Read>(input: R) -> Result<Vec<SensingReport>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(REPORT_HEADER) {
        return Err(Error::parse(1, format!("expected header {}", REPORT_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != REPORT_HEADER.len() {
            return Err(Error::parse(line, format!("expected 5 fields, got {}", rec.len())));
        }
        let num = |k: usize| {
            rec[k]
                .parse::<f64>()
                .map_err(|e| Error::parse(line, format!("{}: {e}", REPORT_HEADER[k])))
        };
        let device_id = rec[0]
            .parse::<u64>()
            .map_err(|e| Error::parse(line, format!("device_id: {e}")))?;
        let detector_watts = num(3)?;
        if !(detector_watts >= 0.0) {
            return Err(Error::parse(line, "detector output must be non-negative"));
        }
        out.push(SensingReport {
            device_id,
            loc: Location::new(num(1)?, num(2)?),
            detector_watts,
            abnormal_watts: num(4)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(Location::new(0.0, 0.0), 80.0, n, n).unwrap()
    }

    #[test]
    fn overhead_formula() {
        assert_eq!(uplink_overhead(1000, 100, 100.0, 10).unwrap(), (1000.0, 100.0));
        let (c, d) = uplink_overhead(500_000, 64, 86_400.0, 1000).unwrap();
        assert_relative_eq!(c, 370.37, max_relative = 1e-4);
        assert_relative_eq!(d, 0.37037, max_relative = 1e-4);
        assert!(uplink_overhead(0, 1, 1.0, 1).is_err());
    }

    #[test]
    fn sparse_grids_stay_unknown() {
        let g = grid(3);
        let mk = |r: usize, c: usize, n: usize| {
            (0..n).map(move |i| SensingReport {
                device_id: i as u64,
                loc: g.center(r, c),
                detector_watts: 1e-9,
                abnormal_watts: 0.0,
            })
        };
        let mut reps: Vec<_> = mk(0, 0, 5).chain(mk(1, 1, 10)).collect();
        reps.push(SensingReport {
            device_id: 99,
            loc: Location::new(-5.0, 0.0),
            detector_watts: 1.0,
            abnormal_watts: 0.0,
        });
        let agg = aggregate_to_grid(&reps, &g, 10, -95.2).unwrap();
        assert_eq!(agg.dropped, 1);
        assert_eq!(agg.matrix.get(0, 0), None);
        assert_eq!(agg.matrix.get(2, 2), None);
        assert!(agg.matrix.get(1, 1).is_some());
    }

    #[test]
    fn subtraction_is_floored() {
        let g = grid(2);
        let reps: Vec<_> = (0..10)
            .map(|i| SensingReport {
                device_id: i,
                loc: g.center(0, 0),
                detector_watts: 0.0,
                abnormal_watts: 0.0,
            })
            .collect();
        let agg = aggregate_to_grid(&reps, &g, 10, -95.2).unwrap();
        assert_relative_eq!(agg.matrix.get(0, 0).unwrap(), -130.0, epsilon = 1e-9);
    }

    #[test]
    fn exact_mean_inverts() {
        let g = grid(2);
        let n0 = dbm_to_watt(-95.2);
        let reps: Vec<_> = (0..100)
            .map(|i| SensingReport {
                device_id: i,
                loc: g.center(1, 0),
                detector_watts: dbm_to_watt(-78.23) + n0,
                abnormal_watts: 0.0,
            })
            .collect();
        let agg = aggregate_to_grid(&reps, &g, 10, -95.2).unwrap();
        assert_relative_eq!(agg.matrix.get(1, 0).unwrap(), -78.23, epsilon = 1e-9);
    }

    #[test]
    fn detector_statistics() {
        let g = grid(2);
        let truth = SpectrumMatrix::new(DMatrix::from_element(2, 2, -78.23));
        let params = SensingParams {
            n_sam: 20_000,
            sampling_rate: 1.0,
            ..SensingParams::default()
        };
        let reps = synthesize_reports(&truth, &g, &params, -95.2, 3).unwrap();
        assert_eq!(reps.len(), 80_000);
        let p = dbm_to_watt(-78.23);
        let n0 = dbm_to_watt(-95.2);
        let xs: Vec<f64> = reps.iter().map(|r| r.detector_watts).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert_relative_eq!(mean, p + n0, max_relative = 1e-3);
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert_relative_eq!(var.sqrt(), (p + n0) / (20_000f64).sqrt(), max_relative = 0.02);
    }

    #[test]
    fn sampling_fraction_and_determinism() {
        let g = grid(100);
        let truth = SpectrumMatrix::new(DMatrix::from_element(100, 100, -80.0));
        let params = SensingParams {
            n_sam: 1,
            min_count: 1,
            ..SensingParams::default()
        };
        let a = synthesize_reports(&truth, &g, &params, -95.2, 11).unwrap();
        let b = synthesize_reports(&truth, &g, &params, -95.2, 11).unwrap();
        assert_eq!(a, b);
        assert!((a.len() as i64 - 5000).abs() <= 150, "{}", a.len());
    }

    #[test]
    fn abnormal_reports_raise_the_level() {
        let g = grid(4);
        let truth = SpectrumMatrix::new(DMatrix::from_element(4, 4, -90.0));
        let params = SensingParams {
            sampling_rate: 1.0,
            abnormal_rate: 0.5,
            abnormal_magnitude_w: 1e-9,
            ..SensingParams::default()
        };
        let reps = synthesize_reports(&truth, &g, &params, -95.2, 5).unwrap();
        let bad = reps.iter().filter(|r| r.abnormal_watts > 0.0).count();
        assert!(bad > 600 && bad < 1000, "{bad}");
        assert!(reps.iter().all(|r| r.abnormal_watts <= 1e-9 && r.detector_watts >= 0.0));
        let agg = aggregate_to_grid(&reps, &g, 10, -95.2).unwrap();
        assert!(agg.matrix.get(0, 0).unwrap() > -70.0);
    }

    #[test]
    fn csv_roundtrip() {
        let reps = vec![
            SensingReport {
                device_id: 4,
                loc: Location::new(148.9, -0.25),
                detector_watts: 3.02e-13,
                abnormal_watts: 0.0,
            },
            SensingReport {
                device_id: 5,
                loc: Location::new(1.0 / 3.0, 2.0),
                detector_watts: 1.234e-10,
                abnormal_watts: 1e-12,
            },
        ];
        let mut out = Vec::new();
        write_reports_csv(&reps, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("device_id,x_km,y_km,detector_watts,abnormal_watts\n"));
        assert_eq!(read_reports_csv(text.as_bytes()).unwrap(), reps);
        assert!(read_reports_csv("id,x\n1,2\n".as_bytes()).is_err());
        assert!(read_reports_csv("device_id,x_km,y_km,detector_watts,abnormal_watts\n1,0,0,-1,0\n".as_bytes()).is_err());
    }
}
