use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::info;
use tvws_core::boundary::{detection_probability, BoundaryModel, KernelSpec, DEFAULT_C, DEFAULT_SUBSAMPLE};
use tvws_core::completion::{fpca_complete, rse_db};
use tvws_core::matrix::PartialSpectrumMatrix;
use tvws_core::reuse::{build_database, covered_set, SpaceClass};
use tvws_core::scenario::{ScenarioConfig, ScenarioId};
use tvws_core::sensing::{aggregate_to_grid, read_reports_csv, synthesize_reports, write_reports_csv};
use tvws_db::{DatabaseHandle, Server};
use tvws_eval::baseline::LOCALIZATION_ERRORS_M;
use tvws_eval::output::emit_csv;
use tvws_eval::pipeline::{detect_boundary, fpca_for, run_seed, sensing_seed, PipelineConfig, TauFloor, Truth};
use tvws_eval::sweep::{kernel_label, run_pipeline, RunSpec, SweepParam, DEFAULT_DELTAS_DB, DEFAULT_SEEDS};

const TRUTH_FILE: &str = "truth.csv";
const REPORTS_FILE: &str = "reports.csv";
const COMPLETED_FILE: &str = "completed.csv";
const MODEL_FILE: &str = "boundary.svm";
const MPEP_FILE: &str = "mpep.csv";
const DB_FILE: &str = "tvws.db";

/// TV white space database construction from crowd-sensed measurements.
#[derive(Parser)]
#[command(name = "tvws", version)]
struct Cli {
    /// Scenario file in key=value format.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Preset used when no config file is given: I or II.
    #[arg(long, global = true, default_value = "I")]
    scenario: String,
    /// Run seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Writes the ground-truth field and one seed of sensing reports.
    Simulate,
    /// Aggregates reports and completes the spectrum matrix.
    Complete {
        /// Reports CSV; defaults to the one in --out.
        #[arg(long)]
        reports: Option<PathBuf>,
    },
    /// Trains the coverage boundary on a completed matrix.
    Detect {
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[command(flatten)]
        detection: DetectionArgs,
    },
    /// Derives the MPEP map of the cell from a boundary model.
    Reuse {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Builds the persisted database, from a model or by running the whole pipeline.
    Builddb {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        db: Option<PathBuf>,
        #[command(flatten)]
        detection: DetectionArgs,
    },
    /// Serves database lookups over TCP.
    Serve {
        #[arg(long, env = "TVWS_DB_PATH")]
        db: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: String,
    },
    /// Runs seeded sweeps and writes the result tables.
    Eval {
        /// Axis to sweep as name=v1,v2,...; names: rate, n_sam, grid, delta, kernel.
        #[arg(long = "sweep")]
        sweeps: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_SEEDS)]
        seeds: u64,
        /// Localization errors of the circular baseline, meters.
        #[arg(long, value_delimiter = ',', default_values_t = LOCALIZATION_ERRORS_M)]
        baseline: Vec<f64>,
        #[command(flatten)]
        detection: DetectionArgs,
    },
}

#[derive(Args, Clone)]
struct DetectionArgs {
    /// Kernel: rbf, quadratic, linear, "rbf <sigma>" or "poly <c> <degree>".
    #[arg(long, default_value = "rbf")]
    kernel: String,
    /// Detection threshold offset, dB.
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = DEFAULT_C)]
    c: f64,
    #[arg(long, default_value_t = DEFAULT_SUBSAMPLE)]
    subsample: usize,
    /// Final completion shrinkage as a fraction of the first; by default it
    /// is matched to the sensing noise.
    #[arg(long)]
    tau_floor: Option<f64>,
}

impl DetectionArgs {
    fn pipeline(&self) -> anyhow::Result<PipelineConfig> {
        let mut p = PipelineConfig {
            kernel: self.kernel.parse::<KernelSpec>()?,
            delta_p_db: self.delta,
            c_reg: self.c,
            subsample: self.subsample,
            ..PipelineConfig::default()
        };
        if let Some(f) = self.tau_floor {
            p.fpca.tau_floor_factor = f;
            p.tau_floor = TauFloor::Relative;
        }
        p.fpca.validate()?;
        Ok(p)
    }
}

fn scenario(cli: &Cli) -> anyhow::Result<ScenarioConfig> {
    let cfg = match &cli.config {
        Some(path) => ScenarioConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?,
        None => match ScenarioId::parse(&cli.scenario) {
            Some(id) => ScenarioConfig::preset(id),
            None => bail!("unknown scenario {:?}", cli.scenario),
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn read_model(path: &Path) -> anyhow::Result<BoundaryModel> {
    Ok(BoundaryModel::read_text(open(path)?)?)
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = scenario(&cli)?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let out = |name: &str| cli.out.join(name);

    match &cli.command {
        Command::Simulate => {
            let truth = Truth::build(&cfg)?;
            truth.matrix.to_partial().write_text(create(&out(TRUTH_FILE))?)?;
            let reports = synthesize_reports(
                &truth.matrix,
                &cfg.grid,
                &cfg.sensing,
                cfg.noise_floor_dbm,
                sensing_seed(&cfg, cli.seed),
            )?;
            write_reports_csv(&reports, create(&out(REPORTS_FILE))?)?;
            println!(
                "scenario {}: {} grids, {} covered, {} reports",
                cfg.scenario,
                cfg.grid.len(),
                truth.labels.covered_count(),
                reports.len()
            );
        }
        Command::Complete { reports } => {
            let path = reports.clone().unwrap_or_else(|| out(REPORTS_FILE));
            let reports = read_reports_csv(open(&path)?)?;
            let agg = aggregate_to_grid(&reports, &cfg.grid, cfg.sensing.min_count, cfg.noise_floor_dbm)?;
            let pcfg = PipelineConfig::default();
            let fpca = fpca_for(&cfg, &pcfg.fpca, pcfg.tau_floor, &agg.matrix);
            let done = fpca_complete(&agg.matrix, &fpca)?;
            done.matrix.to_partial().write_text(create(&out(COMPLETED_FILE))?)?;
            let truth = Truth::build(&cfg)?;
            println!(
                "known {:.1}% ({} reports dropped), {} iterations, RSE {:.2} dB",
                100.0 * agg.matrix.known_fraction(),
                agg.dropped,
                done.iterations,
                rse_db(&done.matrix, &truth.matrix)?
            );
        }
        Command::Detect { matrix, detection } => {
            let pcfg = detection.pipeline()?;
            let path = matrix.clone().unwrap_or_else(|| out(COMPLETED_FILE));
            let recovered = PartialSpectrumMatrix::read_text(open(&path)?)?
                .into_complete()
                .with_context(|| format!("{} has unknown entries", path.display()))?;
            let truth = Truth::build(&cfg)?;
            let (_, model) = detect_boundary(&cfg, &recovered, truth.p_bar_min, &pcfg)?;
            model.write_text(create(&out(MODEL_FILE))?)?;
            let detected = covered_set(&model, &cfg.grid);
            println!(
                "{} kernel, {} support vectors, detection probability {:.4}",
                kernel_label(&pcfg.kernel),
                model.alphas.len(),
                detection_probability(&detected, &truth.labels)?
            );
        }
        Command::Reuse { model } => {
            let model = read_model(&model.clone().unwrap_or_else(|| out(MODEL_FILE)))?;
            let pcfg = PipelineConfig::default();
            let map = build_database(&cfg.bs_loc, cfg.r_cell_km, &model, &cfg.grid, &cfg.interference, &pcfg.reuse)?;
            map.write_csv(create(&out(MPEP_FILE))?)?;
            print_classes(&map);
        }
        Command::Builddb { model, db, detection } => {
            let map = match model {
                Some(path) => {
                    let model = read_model(path)?;
                    let reuse = detection.pipeline()?.reuse;
                    build_database(&cfg.bs_loc, cfg.r_cell_km, &model, &cfg.grid, &cfg.interference, &reuse)?
                }
                None => {
                    let truth = Truth::build(&cfg)?;
                    let o = run_seed(&cfg, &truth, &detection.pipeline()?, cli.seed)?;
                    println!(
                        "RSE {:.2} dB, detection probability {:.4}, IP satisfied at {:.1}% of in-cell grids",
                        o.rse_db,
                        o.detection_probability,
                        100.0 * o.ip_satisfied_fraction()
                    );
                    o.database
                }
            };
            print_classes(&map);
            let path = db.clone().unwrap_or_else(|| out(DB_FILE));
            tvws_db::save(&DatabaseHandle::new(map, &cfg), &path)?;
            println!("wrote {}", path.display());
        }
        Command::Serve { db, listen } => {
            let handle = tvws_db::load(db).with_context(|| format!("loading {}", db.display()))?;
            if !handle.matches_config(&cfg) {
                log::warn!("database digest does not match the active configuration");
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let server = Server::bind(Arc::new(handle), listen.as_str()).await?;
                info!("listening on {}", server.local_addr()?);
                server
                    .run_until(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
            })?;
        }
        Command::Eval {
            sweeps,
            seeds,
            baseline,
            detection,
        } => {
            let mut spec = RunSpec::new(cfg, detection.pipeline()?, *seeds);
            spec.first_seed = cli.seed;
            spec.deltas_db = DEFAULT_DELTAS_DB.to_vec();
            spec.baseline_errors_m = baseline.clone();
            spec.output_dir = Some(cli.out.clone());
            for s in sweeps {
                let (name, values) = s.split_once('=').with_context(|| format!("expected name=values, got {s:?}"))?;
                spec.set_axis(name.trim().parse::<SweepParam>()?, values)?;
            }
            spec.validate()?;
            let report = run_pipeline(&spec)?;
            for row in &report.rse {
                println!("{}  RSE {:.2} dB", row.key, row.mean_rse_db());
            }
            for row in &report.detection {
                println!(
                    "{} {} delta={}  detection {:.4}  IP satisfied {:.1}%",
                    row.key,
                    kernel_label(&row.kernel),
                    row.delta_p_db,
                    row.mean_detection(),
                    100.0 * row.bias.ip_satisfied_fraction()
                );
            }
            for row in &report.baseline {
                println!(
                    "circular baseline err={}m  IP satisfied {:.1}%",
                    row.loc_error_m,
                    100.0 * row.bias.ip_satisfied_fraction()
                );
            }
            for p in emit_csv(&report, &cli.out)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn print_classes(map: &tvws_core::reuse::MpepMap) {
    let count = |class| map.iter().filter(|(_, _, e)| e.class == class).count();
    println!(
        "{} in-cell grids: {} black, {} gray, {} white",
        map.in_cell_count(),
        count(SpaceClass::Black),
        count(SpaceClass::Gray),
        count(SpaceClass::White)
    );
}
