//! One pass of sensing → completion → boundary detection → spatial
//! reuse, scored against the ground truth of its scenario.

use log::debug;
use tvws_core::boundary::{
    detection_probability, hypothesis_labels, train_svm_with, BoundaryModel, KernelSpec, SvmOptions, DEFAULT_C,
    DEFAULT_SUBSAMPLE,
};
use tvws_core::completion::{fpca_complete, rse_db, Completion, FpcaConfig};
use tvws_core::grid::{Coverage, CoverageLabelGrid};
use tvws_core::matrix::{PartialSpectrumMatrix, SpectrumMatrix};
use tvws_core::radio::{interference_probability, Location};
use tvws_core::reuse::{build_database, covered_set, MpepMap, ReuseConfig};
use tvws_core::scenario::{ground_truth_labels, ground_truth_matrix, oracle_mpep, ScenarioConfig};
use tvws_core::sensing::{aggregate_to_grid, synthesize_reports};
use tvws_core::{Error, Result};

use crate::metrics::{compare_mpep, MpepComparison};

/// Default multiplier of the noise-matched final shrinkage level.
pub const NOISE_FLOOR_SCALE: f64 = 1.5;

/// How the completion chooses its final shrinkage level `τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauFloor {
    /// `FpcaConfig::tau_floor_factor · τ₁` as configured.
    Relative,
    /// `scale · σ · √(p · max(rows, cols))`, where `σ` is the dB standard
    /// deviation of an aggregated grid at the coverage threshold and `p`
    /// the observed fraction. Continuing below it would fit the sensing
    /// noise on known grids; stopping well above it leaves shrinkage bias.
    NoiseMatched { scale: f64 },
}

/// Standard deviation in dB of one aggregated grid whose signal sits at
/// `signal_dbm`: `n_sam` detector outputs, each with standard deviation
/// `(p + N₀)/√n_sam`, are averaged.
pub fn aggregated_noise_db(signal_dbm: f64, noise_floor_dbm: f64, n_sam: usize) -> f64 {
    let snr_inv = 10f64.powf((noise_floor_dbm - signal_dbm) / 10.0);
    10.0 / std::f64::consts::LN_10 * (1.0 + snr_inv) / n_sam as f64
}

/// Completion settings for one observation matrix under `rule`.
pub fn fpca_for(cfg: &ScenarioConfig, base: &FpcaConfig, rule: TauFloor, obs: &PartialSpectrumMatrix) -> FpcaConfig {
    match rule {
        TauFloor::Relative => *base,
        TauFloor::NoiseMatched { scale } => {
            let (rows, cols) = obs.shape();
            let sigma = aggregated_noise_db(cfg.p_bar_min_dbm(), cfg.noise_floor_dbm, cfg.sensing.n_sam);
            let tau = scale * sigma * (obs.known_fraction() * rows.max(cols) as f64).sqrt();
            FpcaConfig {
                tau_floor_abs: (tau > 0.0).then_some(tau),
                ..*base
            }
        }
    }
}

/// Knobs of the detection and reuse stages.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub delta_p_db: f64,
    pub kernel: KernelSpec,
    pub c_reg: f64,
    pub subsample: usize,
    pub fpca: FpcaConfig,
    pub tau_floor: TauFloor,
    pub reuse: ReuseConfig,
    pub svm: SvmOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            delta_p_db: 0.0,
            kernel: KernelSpec::rbf_auto(),
            c_reg: DEFAULT_C,
            subsample: DEFAULT_SUBSAMPLE,
            fpca: FpcaConfig::default(),
            tau_floor: TauFloor::NoiseMatched {
                scale: NOISE_FLOOR_SCALE,
            },
            reuse: ReuseConfig::default(),
            svm: SvmOptions::default(),
        }
    }
}

/// Seed-independent reference data for one scenario configuration.
#[derive(Debug, Clone)]
pub struct Truth {
    pub matrix: SpectrumMatrix,
    pub labels: CoverageLabelGrid,
    pub p_bar_min: f64,
    /// Oracle MPEP restricted to the serving cell.
    pub oracle: MpepMap,
    /// In-cell grids as `(row, col)`, row-major.
    pub cell: Vec<(usize, usize)>,
    /// For each in-cell grid, the nearest truly covered grid center
    /// other than its own, if any grid is covered.
    nearest_covered: Vec<Option<Location>>,
}

impl Truth {
    pub fn build(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let matrix = ground_truth_matrix(cfg)?;
        let p_bar_min = cfg.p_bar_min_dbm();
        let labels = ground_truth_labels(&matrix, p_bar_min);
        let oracle = oracle_mpep(cfg, &labels)?.restricted_to_cell(&cfg.bs_loc, cfg.r_cell_km);
        let cell: Vec<(usize, usize)> = oracle.iter().map(|(r, c, _)| (r, c)).collect();
        let g = &cfg.grid;
        let covered: Vec<(usize, usize, Location)> =
            g.centers().filter(|(r, c, _)| labels.get(*r, *c).is_covered()).collect();
        let nearest_covered = cell
            .iter()
            .map(|&(r, c)| {
                let dev = g.center(r, c);
                covered
                    .iter()
                    .filter(|(cr, cc, _)| (*cr, *cc) != (r, c))
                    .map(|(_, _, loc)| *loc)
                    .min_by(|a, b| dev.distance_to(a).total_cmp(&dev.distance_to(b)))
            })
            .collect();
        Ok(Truth {
            matrix,
            labels,
            p_bar_min,
            oracle,
            cell,
            nearest_covered,
        })
    }

    /// Interference probability that a device at in-cell grid `k`
    /// transmitting `power_dbm` causes to the worst truly covered
    /// receiver. A device transmitting inside covered area scores 1.
    pub fn achieved_ip(&self, cfg: &ScenarioConfig, k: usize, power_dbm: f64) -> Result<f64> {
        if power_dbm == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        let (r, c) = self.cell[k];
        if self.labels.get(r, c).is_covered() {
            return Ok(1.0);
        }
        match self.nearest_covered[k] {
            // interference probability falls with distance under a uniform
            // mean shadow, so the nearest covered center is the worst case
            Some(rx) => interference_probability(&cfg.grid.center(r, c), power_dbm, &rx, &cfg.interference),
            None => Ok(0.0),
        }
    }
}

/// Result of one seed.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub known_fraction: f64,
    pub completion: Completion,
    pub rse_db: f64,
    pub hypothesis: CoverageLabelGrid,
    pub model: BoundaryModel,
    pub detected: CoverageLabelGrid,
    pub detection_probability: f64,
    pub database: MpepMap,
    pub mpep: MpepComparison,
    /// Achieved interference probability minus `ν_int`, per in-cell grid.
    pub ip_bias: Vec<f64>,
}

impl SeedOutcome {
    /// Fraction of in-cell grids whose achieved interference
    /// probability stays within the threshold.
    pub fn ip_satisfied_fraction(&self) -> f64 {
        satisfied_fraction(&self.ip_bias)
    }
}

pub fn satisfied_fraction(ip_bias: &[f64]) -> f64 {
    if ip_bias.is_empty() {
        return 1.0;
    }
    ip_bias.iter().filter(|b| **b <= 1e-9).count() as f64 / ip_bias.len() as f64
}

/// Seed used for sensing draws; mixes the scenario seed with the run seed.
pub fn sensing_seed(cfg: &ScenarioConfig, seed: u64) -> u64 {
    cfg.rng_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ seed
}

/// Synthesizes, aggregates and completes one seed.
pub fn sense_and_complete(
    cfg: &ScenarioConfig,
    truth: &Truth,
    pcfg: &PipelineConfig,
    seed: u64,
) -> Result<(f64, Completion, f64)> {
    let reports = synthesize_reports(&truth.matrix, &cfg.grid, &cfg.sensing, cfg.noise_floor_dbm, sensing_seed(cfg, seed))?;
    let agg = aggregate_to_grid(&reports, &cfg.grid, cfg.sensing.min_count, cfg.noise_floor_dbm)?;
    let known = agg.matrix.known_fraction();
    let fpca = fpca_for(cfg, &pcfg.fpca, pcfg.tau_floor, &agg.matrix);
    let completion = fpca_complete(&agg.matrix, &fpca)?;
    let rse = rse_db(&completion.matrix, &truth.matrix)?;
    if !completion.converged {
        debug!("seed {seed}: completion hit the iteration cap");
    }
    Ok((known, completion, rse))
}

/// Trains the boundary on thresholded labels. A single-class labeling
/// yields a constant model for that class.
pub fn detect_boundary(
    cfg: &ScenarioConfig,
    recovered: &SpectrumMatrix,
    p_bar_min: f64,
    pcfg: &PipelineConfig,
) -> Result<(CoverageLabelGrid, BoundaryModel)> {
    let hyp = hypothesis_labels(recovered, p_bar_min, pcfg.delta_p_db);
    let model = match train_svm_with(&hyp, &cfg.grid, pcfg.kernel, pcfg.c_reg, pcfg.subsample, &pcfg.svm) {
        Ok(m) => m,
        Err(Error::SingleClass) => {
            let class = if hyp.covered_count() > 0 { Coverage::Covered } else { Coverage::Uncovered };
            debug!("single-class labels, using a constant {class:?} boundary");
            BoundaryModel::constant(class)
        }
        Err(e) => return Err(e),
    };
    Ok((hyp, model))
}

/// Runs every stage for `seed` from an already completed matrix.
pub fn finish_seed(
    cfg: &ScenarioConfig,
    truth: &Truth,
    pcfg: &PipelineConfig,
    seed: u64,
    known_fraction: f64,
    completion: Completion,
    rse: f64,
) -> Result<SeedOutcome> {
    let (hypothesis, model) = detect_boundary(cfg, &completion.matrix, truth.p_bar_min, pcfg)?;
    let detected = covered_set(&model, &cfg.grid);
    let detection = detection_probability(&detected, &truth.labels)?;
    let database = build_database(&cfg.bs_loc, cfg.r_cell_km, &model, &cfg.grid, &cfg.interference, &pcfg.reuse)?;
    let (mpep, ip_bias) = score_database(cfg, truth, &database)?;
    Ok(SeedOutcome {
        seed,
        known_fraction,
        completion,
        rse_db: rse,
        hypothesis,
        model,
        detected,
        detection_probability: detection,
        database,
        mpep,
        ip_bias,
    })
}

/// MPEP comparison against the oracle and IP bias of a database.
pub fn score_database(cfg: &ScenarioConfig, truth: &Truth, database: &MpepMap) -> Result<(MpepComparison, Vec<f64>)> {
    let nu = cfg.interference.int_threshold;
    let mut derived = Vec::with_capacity(truth.cell.len());
    let mut ip_bias = Vec::with_capacity(truth.cell.len());
    for (k, &(r, c)) in truth.cell.iter().enumerate() {
        let e = database
            .get(r, c)
            .ok_or_else(|| Error::Format(format!("grid ({r}, {c}) missing from the database")))?;
        derived.push(e.power);
        ip_bias.push(truth.achieved_ip(cfg, k, e.power.as_power_dbm())? - nu);
    }
    let oracle: Vec<_> = truth.oracle.iter().map(|(_, _, e)| e.power).collect();
    Ok((compare_mpep(&derived, &oracle), ip_bias))
}

/// Full pipeline for one seed.
pub fn run_seed(cfg: &ScenarioConfig, truth: &Truth, pcfg: &PipelineConfig, seed: u64) -> Result<SeedOutcome> {
    let (known, completion, rse) = sense_and_complete(cfg, truth, pcfg, seed)?;
    finish_seed(cfg, truth, pcfg, seed, known, completion, rse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tvws_core::grid::GridSpec;
    use tvws_core::sensing::SensingParams;

    #[test]
    fn noise_model_matches_simulated_aggregates() {
        let grid = GridSpec::new(Location::new(0.0, 0.0), 100.0, 40, 40).unwrap();
        for (signal, n_sam) in [(-85.15, 100), (-85.15, 10), (-70.0, 50)] {
            let mut full = PartialSpectrumMatrix::unknown(40, 40);
            for r in 0..40 {
                for c in 0..40 {
                    full.set(r, c, signal);
                }
            }
            let truth = full.into_complete().unwrap();
            let params = SensingParams {
                n_sam,
                sampling_rate: 1.0,
                min_count: 1,
                ..SensingParams::default()
            };
            let reports = synthesize_reports(&truth, &grid, &params, -95.2, 3).unwrap();
            let agg = aggregate_to_grid(&reports, &grid, 1, -95.2).unwrap();
            let errs: Vec<f64> = agg.matrix.values.iter().map(|v| v - signal).collect();
            let m = errs.iter().sum::<f64>() / errs.len() as f64;
            let sd = (errs.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (errs.len() - 1) as f64).sqrt();
            let model = aggregated_noise_db(signal, -95.2, n_sam);
            assert!((sd / model - 1.0).abs() < 0.1, "signal {signal} n_sam {n_sam}: {sd} vs {model}");
        }
    }

    #[test]
    fn noise_matched_floor_scales_with_observations() {
        let cfg = ScenarioConfig::scenario_one();
        let mut obs = PartialSpectrumMatrix::unknown(100, 100);
        for r in 0..50 {
            for c in 0..100 {
                obs.set(r, c, -80.0);
            }
        }
        let base = FpcaConfig::default();
        let rule = TauFloor::NoiseMatched { scale: 2.0 };
        let f = fpca_for(&cfg, &base, rule, &obs).tau_floor_abs.unwrap();
        let sigma = aggregated_noise_db(cfg.p_bar_min_dbm(), cfg.noise_floor_dbm, 100);
        assert!((f - 2.0 * sigma * 50f64.sqrt()).abs() < 1e-12);
        assert_eq!(fpca_for(&cfg, &base, TauFloor::Relative, &obs), base);
    }
}
