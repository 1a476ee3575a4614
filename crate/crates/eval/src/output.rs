//! CSV tables of an evaluation run, one file per figure.

use std::fs;
use std::path::{Path, PathBuf};

use tvws_core::Result;

use crate::metrics::{empirical_cdf, BiasReport};
use crate::sweep::{kernel_label, DetectionRow, EvalReport};

pub const RSE_FILE: &str = "rse_sweep.csv";
pub const DETECTION_FILE: &str = "detection_sweep.csv";
pub const MPEP_CDF_FILE: &str = "mpep_bias_cdf.csv";
pub const IP_CDF_FILE: &str = "ip_bias_cdf.csv";

const RSE_HEADER: [&str; 8] = [
    "scenario",
    "grid_size_m",
    "sampling_rate",
    "n_sam",
    "seeds",
    "failed",
    "mean_known_fraction",
    "mean_rse_db",
];
const DETECTION_HEADER: [&str; 12] = [
    "scenario",
    "grid_size_m",
    "sampling_rate",
    "n_sam",
    "kernel",
    "delta_p_db",
    "seeds",
    "failed",
    "mean_detection_probability",
    "ip_satisfied_fraction",
    "violations",
    "conservative",
];
const MPEP_CDF_HEADER: [&str; 4] = ["scenario", "setup", "bias_db", "cdf"];
const IP_CDF_HEADER: [&str; 4] = ["scenario", "setup", "ip_bias", "cdf"];

fn setup_label(row: &DetectionRow) -> String {
    format!(
        "{} delta={} rate={} n_sam={} grid={}",
        kernel_label(&row.kernel),
        row.delta_p_db,
        row.key.sampling_rate,
        row.key.n_sam,
        row.key.grid_size_m
    )
}

/// Writes the four tables into `dir` and returns their paths. Every
/// file has a header row even when the report is empty.
pub fn emit_csv(report: &EvalReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let paths: Vec<PathBuf> = [RSE_FILE, DETECTION_FILE, MPEP_CDF_FILE, IP_CDF_FILE]
        .iter()
        .map(|f| dir.join(f))
        .collect();

    let mut w = csv::Writer::from_path(&paths[0])?;
    w.write_record(RSE_HEADER)?;
    for row in &report.rse {
        w.write_record([
            row.key.scenario.to_string(),
            row.key.grid_size_m.to_string(),
            row.key.sampling_rate.to_string(),
            row.key.n_sam.to_string(),
            row.rse_db.len().to_string(),
            row.failed.to_string(),
            row.mean_known_fraction.to_string(),
            row.mean_rse_db().to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(&paths[1])?;
    w.write_record(DETECTION_HEADER)?;
    for row in &report.detection {
        w.write_record([
            row.key.scenario.to_string(),
            row.key.grid_size_m.to_string(),
            row.key.sampling_rate.to_string(),
            row.key.n_sam.to_string(),
            kernel_label(&row.kernel),
            row.delta_p_db.to_string(),
            row.seeds.len().to_string(),
            row.failed.to_string(),
            row.mean_detection().to_string(),
            row.bias.ip_satisfied_fraction().to_string(),
            row.bias.violations.to_string(),
            row.bias.conservative.to_string(),
        ])?;
    }
    w.flush()?;

    let mut biases: Vec<(String, String, &BiasReport)> = report
        .detection
        .iter()
        .map(|r| (r.key.scenario.to_string(), setup_label(r), &r.bias))
        .collect();
    biases.extend(
        report
            .baseline
            .iter()
            .map(|b| (b.scenario.to_string(), format!("circular err={}m grid={}", b.loc_error_m, b.grid_size_m), &b.bias)),
    );
    write_cdfs(&paths[2], MPEP_CDF_HEADER, &biases, |b| &b.mpep_bias_db)?;
    write_cdfs(&paths[3], IP_CDF_HEADER, &biases, |b| &b.ip_bias)?;
    Ok(paths)
}

fn write_cdfs(
    path: &Path,
    header: [&str; 4],
    reports: &[(String, String, &BiasReport)],
    values: impl Fn(&BiasReport) -> &[f64],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for (scenario, setup, report) in reports {
        for (x, f) in empirical_cdf(values(report)) {
            w.write_record([scenario.as_str(), setup.as_str(), &x.to_string(), &f.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
