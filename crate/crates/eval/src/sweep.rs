//! Experiment sweeps over sensing, grid and detection parameters.
//!
//! A run is the cartesian product of its axes. Completion only depends
//! on the scenario, grid size, sampling rate, `n_sam` and seed, so each
//! completed matrix is shared by every kernel and offset evaluated on it.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use tvws_core::boundary::KernelSpec;
use tvws_core::completion::Completion;
use tvws_core::scenario::{ScenarioConfig, ScenarioId};
use tvws_core::{Error, Result};

use crate::baseline::score_baseline;
use crate::metrics::{mean, BiasReport};
use crate::pipeline::{finish_seed, sense_and_complete, PipelineConfig, Truth};

/// Offsets of the three protection setups, dB.
pub const DEFAULT_DELTAS_DB: [f64; 3] = [0.0, 3.0, 6.0];
pub const DEFAULT_SEEDS: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    SamplingRate,
    NSam,
    GridSize,
    DeltaP,
    Kernel,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "rate" | "sampling_rate" => SweepParam::SamplingRate,
            "n_sam" => SweepParam::NSam,
            "grid" | "grid_size_m" => SweepParam::GridSize,
            "delta" | "delta_p_db" => SweepParam::DeltaP,
            "kernel" => SweepParam::Kernel,
            _ => return Err(Error::Format(format!("unknown sweep parameter {s:?}"))),
        })
    }
}

/// Short kernel name used in tables.
pub fn kernel_label(k: &KernelSpec) -> String {
    match *k {
        KernelSpec::Rbf { sigma } if sigma == 0.0 => "rbf".into(),
        KernelSpec::Polynomial { c, degree: 2 } if c == 1.0 => "quadratic".into(),
        other => other.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub scenario: ScenarioConfig,
    pub pipeline: PipelineConfig,
    pub sampling_rates: Vec<f64>,
    pub n_sams: Vec<usize>,
    pub grid_sizes_m: Vec<f64>,
    pub deltas_db: Vec<f64>,
    pub kernels: Vec<KernelSpec>,
    pub seeds: u64,
    pub first_seed: u64,
    /// Localization errors for the circular baseline; empty skips it.
    pub baseline_errors_m: Vec<f64>,
    pub output_dir: Option<PathBuf>,
}

impl RunSpec {
    /// Every axis holds the single value of `scenario` and `pipeline`.
    pub fn new(scenario: ScenarioConfig, pipeline: PipelineConfig, seeds: u64) -> Self {
        RunSpec {
            sampling_rates: vec![scenario.sensing.sampling_rate],
            n_sams: vec![scenario.sensing.n_sam],
            grid_sizes_m: vec![scenario.grid.cell_size_m],
            deltas_db: vec![pipeline.delta_p_db],
            kernels: vec![pipeline.kernel],
            scenario,
            pipeline,
            seeds,
            first_seed: 0,
            baseline_errors_m: Vec::new(),
            output_dir: None,
        }
    }

    /// Replaces one axis with a comma-separated list of values.
    pub fn set_axis(&mut self, param: SweepParam, values: &str) -> Result<()> {
        let items: Vec<&str> = values.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        if items.is_empty() {
            return Err(Error::Domain(format!("empty value list for {param:?}")));
        }
        fn parse_all<T: FromStr>(items: &[&str]) -> Result<Vec<T>> {
            items
                .iter()
                .map(|s| s.parse().map_err(|_| Error::Format(format!("bad sweep value {s:?}"))))
                .collect()
        }
        match param {
            SweepParam::SamplingRate => self.sampling_rates = parse_all(&items)?,
            SweepParam::NSam => self.n_sams = parse_all(&items)?,
            SweepParam::GridSize => self.grid_sizes_m = parse_all(&items)?,
            SweepParam::DeltaP => self.deltas_db = parse_all(&items)?,
            SweepParam::Kernel => {
                self.kernels = items.iter().map(|s| s.parse()).collect::<Result<_>>()?;
            }
        }
        self.validate()
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (self.first_seed..self.first_seed + self.seeds).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(Error::Domain("at least one seed is required".into()));
        }
        if self.sampling_rates.is_empty()
            || self.n_sams.is_empty()
            || self.grid_sizes_m.is_empty()
            || self.deltas_db.is_empty()
            || self.kernels.is_empty()
        {
            return Err(Error::Domain("every sweep axis needs at least one value".into()));
        }
        for &g in &self.grid_sizes_m {
            self.scenario.clone().with_grid_size(g)?;
        }
        for &rate in &self.sampling_rates {
            let mut s = self.scenario.sensing;
            s.sampling_rate = rate;
            s.validate()?;
        }
        for &n_sam in &self.n_sams {
            let mut s = self.scenario.sensing;
            s.n_sam = n_sam;
            s.validate()?;
        }
        for k in &self.kernels {
            k.validate()?;
        }
        if self.deltas_db.iter().any(|d| !d.is_finite()) {
            return Err(Error::Domain("offsets must be finite".into()));
        }
        if self.baseline_errors_m.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(Error::Domain("localization errors must be finite and non-negative".into()));
        }
        self.scenario.validate()
    }
}

/// Sensing configuration shared by one completion batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingKey {
    pub scenario: ScenarioId,
    pub grid_size_m: f64,
    pub sampling_rate: f64,
    pub n_sam: usize,
}

impl fmt::Display for SensingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "scenario={} grid={}m rate={} n_sam={}",
            self.scenario, self.grid_size_m, self.sampling_rate, self.n_sam
        )
    }
}

/// Scenario with the sensing axes of `key` applied.
pub fn configure(base: &ScenarioConfig, key: &SensingKey) -> Result<ScenarioConfig> {
    let mut cfg = base.clone().with_grid_size(key.grid_size_m)?;
    cfg.sensing.sampling_rate = key.sampling_rate;
    cfg.sensing.n_sam = key.n_sam;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone)]
pub struct SeedCompletion {
    pub seed: u64,
    pub known_fraction: f64,
    pub completion: Completion,
    pub rse_db: f64,
}

/// Completes every seed; failed seeds are logged and left out.
pub fn complete_seeds(cfg: &ScenarioConfig, truth: &Truth, pcfg: &PipelineConfig, seeds: &[u64]) -> Vec<SeedCompletion> {
    seeds
        .par_iter()
        .filter_map(|&seed| match sense_and_complete(cfg, truth, pcfg, seed) {
            Ok((known_fraction, completion, rse_db)) => Some(SeedCompletion {
                seed,
                known_fraction,
                completion,
                rse_db,
            }),
            Err(e) => {
                warn!("seed {seed} dropped during completion: {e}");
                None
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RseRow {
    pub key: SensingKey,
    /// `(seed, RSE dB)` in seed order.
    pub rse_db: Vec<(u64, f64)>,
    pub mean_known_fraction: f64,
    pub failed: usize,
}

impl RseRow {
    pub fn from_completions(key: SensingKey, done: &[SeedCompletion], requested: usize) -> Self {
        let known: Vec<f64> = done.iter().map(|s| s.known_fraction).collect();
        RseRow {
            key,
            rse_db: done.iter().map(|s| (s.seed, s.rse_db)).collect(),
            mean_known_fraction: mean(&known),
            failed: requested - done.len(),
        }
    }

    pub fn mean_rse_db(&self) -> f64 {
        mean(&self.rse_db.iter().map(|r| r.1).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedDetection {
    pub seed: u64,
    pub detection_probability: f64,
    pub ip_satisfied_fraction: f64,
    pub kkt_residual: f64,
    pub dual_equality_residual: f64,
    pub svm_converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRow {
    pub key: SensingKey,
    pub kernel: KernelSpec,
    pub delta_p_db: f64,
    pub seeds: Vec<SeedDetection>,
    pub bias: BiasReport,
    pub failed: usize,
}

impl DetectionRow {
    pub fn mean_detection(&self) -> f64 {
        mean(&self.seeds.iter().map(|s| s.detection_probability).collect::<Vec<_>>())
    }
}

/// Detection and reuse for every completed seed under one kernel and offset.
pub fn detect_row(
    key: SensingKey,
    cfg: &ScenarioConfig,
    truth: &Truth,
    pcfg: &PipelineConfig,
    done: &[SeedCompletion],
) -> DetectionRow {
    let outcomes: Vec<_> = done
        .par_iter()
        .filter_map(|s| {
            match finish_seed(cfg, truth, pcfg, s.seed, s.known_fraction, s.completion.clone(), s.rse_db) {
                Ok(o) => Some(o),
                Err(e) => {
                    warn!("seed {} dropped during detection: {e}", s.seed);
                    None
                }
            }
        })
        .collect();
    let mut bias = BiasReport::default();
    let mut seeds = Vec::with_capacity(outcomes.len());
    for o in &outcomes {
        bias.add(&o.mpep, &o.ip_bias);
        seeds.push(SeedDetection {
            seed: o.seed,
            detection_probability: o.detection_probability,
            ip_satisfied_fraction: o.ip_satisfied_fraction(),
            kkt_residual: o.model.kkt_residual,
            dual_equality_residual: o.model.dual_equality_residual(),
            svm_converged: o.model.converged,
        });
    }
    DetectionRow {
        key,
        kernel: pcfg.kernel,
        delta_p_db: pcfg.delta_p_db,
        seeds,
        bias,
        failed: done.len() - outcomes.len(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub scenario: ScenarioId,
    pub grid_size_m: f64,
    pub loc_error_m: f64,
    pub bias: BiasReport,
}

/// Circular baseline pooled over seeds.
pub fn baseline_row(cfg: &ScenarioConfig, truth: &Truth, loc_error_m: f64, seeds: &[u64]) -> Result<BaselineRow> {
    let mut bias = BiasReport::default();
    for &seed in seeds {
        let (cmp, ip) = score_baseline(cfg, truth, loc_error_m, seed)?;
        bias.add(&cmp, &ip);
    }
    Ok(BaselineRow {
        scenario: cfg.scenario,
        grid_size_m: cfg.grid.cell_size_m,
        loc_error_m,
        bias,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub rse: Vec<RseRow>,
    pub detection: Vec<DetectionRow>,
    pub baseline: Vec<BaselineRow>,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Stages {
    Completion,
    Detection,
    Full,
}

/// RSE for every sensing configuration of `spec`.
pub fn sweep_rse(spec: &RunSpec) -> Result<EvalReport> {
    run(spec, Stages::Completion)
}

/// RSE plus detection and reuse for every kernel and offset.
pub fn sweep_detection(spec: &RunSpec) -> Result<EvalReport> {
    run(spec, Stages::Detection)
}

/// Everything in [`sweep_detection`] plus the circular baseline.
pub fn run_pipeline(spec: &RunSpec) -> Result<EvalReport> {
    run(spec, Stages::Full)
}

fn run(spec: &RunSpec, stages: Stages) -> Result<EvalReport> {
    spec.validate()?;
    let seeds = spec.seed_list();
    let mut report = EvalReport::default();
    for &grid_size_m in &spec.grid_sizes_m {
        let grid_cfg = spec.scenario.clone().with_grid_size(grid_size_m)?;
        let truth = Truth::build(&grid_cfg)?;
        if stages == Stages::Full {
            for &err in &spec.baseline_errors_m {
                report.baseline.push(baseline_row(&grid_cfg, &truth, err, &seeds)?);
            }
        }
        for &sampling_rate in &spec.sampling_rates {
            for &n_sam in &spec.n_sams {
                let key = SensingKey {
                    scenario: spec.scenario.scenario,
                    grid_size_m,
                    sampling_rate,
                    n_sam,
                };
                let cfg = configure(&spec.scenario, &key)?;
                info!("completing {key}");
                let done = complete_seeds(&cfg, &truth, &spec.pipeline, &seeds);
                report.rse.push(RseRow::from_completions(key, &done, seeds.len()));
                if stages < Stages::Detection {
                    continue;
                }
                for kernel in &spec.kernels {
                    for &delta_p_db in &spec.deltas_db {
                        let pcfg = PipelineConfig {
                            kernel: *kernel,
                            delta_p_db,
                            ..spec.pipeline.clone()
                        };
                        report.detection.push(detect_row(key, &cfg, &truth, &pcfg, &done));
                    }
                }
            }
        }
    }
    Ok(report)
}
