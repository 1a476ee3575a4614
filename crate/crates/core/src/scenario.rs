//! Ground-truth radio environments: the shadow field, the scenario
//! configuration and its text form, the ground-truth spectrum matrix
//! and labels, and the brute-force MPEP oracle.
//!
//! The configuration file is a flat list of `key = value` lines. Blank
//! lines and `#` comments are ignored and unknown keys are rejected. A
//! `scenario = I` or `scenario = II` line selects the preset that the
//! other keys override, wherever it appears in the file. `zone` may be
//! repeated; any `zone` line replaces the preset zone list.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::{Coverage, CoverageLabelGrid, GridSpec};
use crate::matrix::SpectrumMatrix;
use crate::radio::{
    coverage_threshold_dbm, distance_for_path_loss_km, interference_power_limit_dbm, mean_received_power_dbm,
    worst_case_interference_range_km, DtvTransmitter, InterferenceParams, Location, PropagationParams,
};
use crate::reuse::{MpepEntry, MpepMap};
use crate::sensing::SensingParams;

/// One region of extra mean loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShadowZone {
    /// Vertical band between `x_start` and `x_end` whose attenuation
    /// varies linearly from `atten_start_db` to `atten_end_db`,
    /// optionally limited to `y_min ..= y_max`.
    Band {
        x_start: f64,
        x_end: f64,
        atten_start_db: f64,
        atten_end_db: f64,
        y_range: Option<(f64, f64)>,
    },
    /// Constant attenuation inside a disc.
    Disc {
        center: Location,
        radius_km: f64,
        atten_db: f64,
    },
}

impl ShadowZone {
    pub fn attenuation_at(&self, loc: &Location) -> f64 {
        match *self {
            ShadowZone::Band {
                x_start,
                x_end,
                atten_start_db,
                atten_end_db,
                y_range,
            } => {
                if let Some((lo, hi)) = y_range {
                    if loc.y < lo || loc.y > hi {
                        return 0.0;
                    }
                }
                if x_start == x_end {
                    return if loc.x == x_start { atten_start_db.max(atten_end_db) } else { 0.0 };
                }
                let t = (loc.x - x_start) / (x_end - x_start);
                if (0.0..=1.0).contains(&t) {
                    atten_start_db + t * (atten_end_db - atten_start_db)
                } else {
                    0.0
                }
            }
            ShadowZone::Disc {
                center,
                radius_km,
                atten_db,
            } => {
                if center.distance_to(loc) <= radius_km {
                    atten_db
                } else {
                    0.0
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ShadowZone::Band {
                x_start,
                x_end,
                atten_start_db,
                atten_end_db,
                y_range,
            } => {
                x_start.is_finite()
                    && x_end.is_finite()
                    && atten_start_db >= 0.0
                    && atten_end_db >= 0.0
                    && y_range.is_none_or(|(lo, hi)| lo <= hi)
            }
            ShadowZone::Disc {
                center,
                radius_km,
                atten_db,
            } => center.is_finite() && radius_km > 0.0 && atten_db >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid shadow zone {self:?}")))
        }
    }

    fn to_config_value(self) -> String {
        match self {
            ShadowZone::Band {
                x_start,
                x_end,
                atten_start_db,
                atten_end_db,
                y_range,
            } => {
                let mut s = format!("band {x_start} {x_end} {atten_start_db} {atten_end_db}");
                if let Some((lo, hi)) = y_range {
                    let _ = write!(s, " {lo} {hi}");
                }
                s
            }
            ShadowZone::Disc {
                center,
                radius_km,
                atten_db,
            } => format!("disc {} {} {radius_km} {atten_db}", center.x, center.y),
        }
    }

    fn parse_config_value(value: &str) -> std::result::Result<Option<Self>, String> {
        let mut parts = value.split_whitespace();
        let kind = parts.next().ok_or("empty zone")?;
        let nums: Vec<f64> = parts
            .map(|p| p.parse::<f64>().map_err(|e| format!("bad zone number {p:?}: {e}")))
            .collect::<std::result::Result<_, _>>()?;
        match (kind, nums.as_slice()) {
            ("none", []) => Ok(None),
            ("band", &[x0, x1, a0, a1]) => Ok(Some(ShadowZone::Band {
                x_start: x0,
                x_end: x1,
                atten_start_db: a0,
                atten_end_db: a1,
                y_range: None,
            })),
            ("band", &[x0, x1, a0, a1, y0, y1]) => Ok(Some(ShadowZone::Band {
                x_start: x0,
                x_end: x1,
                atten_start_db: a0,
                atten_end_db: a1,
                y_range: Some((y0, y1)),
            })),
            ("disc", &[cx, cy, r, a]) => Ok(Some(ShadowZone::Disc {
                center: Location::new(cx, cy),
                radius_km: r,
                atten_db: a,
            })),
            _ => Err(format!("unrecognized zone {value:?}")),
        }
    }
}

/// Azimuthal ripple `amplitude · sin(k·θ + φ)` about the transmitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ripple {
    pub amplitude_db: f64,
    pub angular_freq: f64,
    pub phase_rad: f64,
}

impl Default for Ripple {
    fn default() -> Self {
        Ripple {
            amplitude_db: 3.0,
            angular_freq: 5.0,
            phase_rad: 0.0,
        }
    }
}

/// Location-dependent mean excess loss `S̄`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShadowFieldSpec {
    pub zones: Vec<ShadowZone>,
    pub ripple: Ripple,
}

impl ShadowFieldSpec {
    /// Field with neither zones nor ripple.
    pub fn flat() -> Self {
        ShadowFieldSpec {
            zones: Vec::new(),
            ripple: Ripple {
                amplitude_db: 0.0,
                ..Ripple::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ripple.amplitude_db >= 0.0 && self.ripple.angular_freq.is_finite() && self.ripple.phase_rad.is_finite()) {
            return Err(Error::domain(format!("invalid ripple {:?}", self.ripple)));
        }
        self.zones.iter().try_for_each(ShadowZone::validate)
    }
}

/// Mean shadowing at `loc`: the sum of zone attenuations plus the
/// azimuthal ripple evaluated at the bearing of `loc` from `tx_loc`.
pub fn mean_shadow_at(spec: &ShadowFieldSpec, loc: &Location, tx_loc: &Location) -> f64 {
    let zones: f64 = spec.zones.iter().map(|z| z.attenuation_at(loc)).sum();
    let r = &spec.ripple;
    if r.amplitude_db == 0.0 {
        return zones;
    }
    let theta = (loc.y - tx_loc.y).atan2(loc.x - tx_loc.x);
    zones + r.amplitude_db * (r.angular_freq * theta + r.phase_rad).sin()
}

/// Side of the square area that holds a cell and every receiver a
/// device inside it can reach: `2·(R_cell + r_int)`.
pub fn cell_area_side_km(r_cell_km: f64, r_int_km: f64) -> f64 {
    2.0 * (r_cell_km + r_int_km)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioId {
    /// Cell straddling the coverage edge of a transmitter in open terrain.
    One,
    /// Cell deep inside nominal coverage with a shadowed band.
    Two,
}

impl ScenarioId {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::One => "I",
            ScenarioId::Two => "II",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "I" | "1" => Some(ScenarioId::One),
            "II" | "2" => Some(ScenarioId::Two),
            _ => None,
        }
    }
}

impl std::fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything needed to simulate one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    pub tx: DtvTransmitter,
    pub shadow: ShadowFieldSpec,
    pub bs_loc: Location,
    pub r_cell_km: f64,
    /// Interference radius used to size the area (not the search radius,
    /// which is always computed from the interference parameters).
    pub r_int_km: f64,
    pub interference: InterferenceParams,
    pub grid: GridSpec,
    /// Protection radius of the circular model.
    pub d_p_km: f64,
    pub noise_floor_dbm: f64,
    pub sensing: SensingParams,
    /// Draw one static per-grid shadowing realization on top of the mean field.
    pub static_shadowing: bool,
    pub rng_seed: u64,
}

const KEYS: &[&str] = &[
    "scenario",
    "tx_x_km",
    "tx_y_km",
    "tx_power_dbm",
    "freq_mhz",
    "alpha_dtv",
    "alpha_d2d",
    "sigma_db",
    "p_min_dbm",
    "nu_cov",
    "i_max_dbm",
    "nu_int",
    "p_peak_dbm",
    "mean_shadow_d2d_db",
    "noise_dbm",
    "d_p_km",
    "bs_x_km",
    "bs_y_km",
    "r_cell_km",
    "r_int_km",
    "grid_size_m",
    "sampling_rate",
    "n_sam",
    "min_count",
    "abnormal_rate",
    "abnormal_magnitude_w",
    "ripple_amp_db",
    "ripple_freq",
    "ripple_phase_rad",
    "zone",
    "static_shadowing",
    "seed",
];

impl ScenarioConfig {
    /// Base station on the average-power coverage contour of a
    /// transmitter at the origin, no shadow zones.
    pub fn scenario_one() -> Self {
        let tx = default_tx();
        let d_cov = coverage_contour_km(&tx);
        Self::assemble(ScenarioId::One, tx, Vec::new(), Location::new(d_cov, 0.0))
    }

    /// Base station 119.2 km east of the transmitter with a band of
    /// extra loss falling from 20 dB at x = 116.2 km to 0 dB at 120.2 km.
    pub fn scenario_two() -> Self {
        let zone = ShadowZone::Band {
            x_start: 116.2,
            x_end: 120.2,
            atten_start_db: 20.0,
            atten_end_db: 0.0,
            y_range: None,
        };
        Self::assemble(ScenarioId::Two, default_tx(), vec![zone], Location::new(119.2, 0.0))
    }

    pub fn preset(id: ScenarioId) -> Self {
        match id {
            ScenarioId::One => Self::scenario_one(),
            ScenarioId::Two => Self::scenario_two(),
        }
    }

    fn assemble(scenario: ScenarioId, tx: DtvTransmitter, zones: Vec<ShadowZone>, bs_loc: Location) -> Self {
        let d2d = PropagationParams {
            alpha: 2.5,
            ..tx.prop
        };
        let r_cell_km = 2.0;
        let r_int_km = 2.0;
        let grid = GridSpec::centered_square(bs_loc, cell_area_side_km(r_cell_km, r_int_km), 80.0)
            .expect("preset grid is valid");
        ScenarioConfig {
            scenario,
            tx,
            shadow: ShadowFieldSpec {
                zones,
                ripple: Ripple::default(),
            },
            bs_loc,
            r_cell_km,
            r_int_km,
            interference: InterferenceParams {
                i_max_dbm: -98.2,
                int_threshold: 0.1,
                p_peak_dbm: -10.0,
                prop_d2d: d2d,
                mean_shadow_d2d_db: 0.0,
            },
            grid,
            d_p_km: 134.2,
            noise_floor_dbm: -95.2,
            sensing: SensingParams::default(),
            static_shadowing: false,
            rng_seed: 0,
        }
    }

    /// Recomputes the grid for a new cell size, keeping it centered on
    /// the base station.
    pub fn with_grid_size(mut self, cell_size_m: f64) -> Result<Self> {
        self.grid = GridSpec::centered_square(self.bs_loc, self.area_side_km(), cell_size_m)?;
        Ok(self)
    }

    pub fn area_side_km(&self) -> f64 {
        cell_area_side_km(self.r_cell_km, self.r_int_km)
    }

    pub fn p_bar_min_dbm(&self) -> f64 {
        coverage_threshold_dbm(&self.tx)
    }

    pub fn validate(&self) -> Result<()> {
        self.tx.validate()?;
        self.interference.validate()?;
        self.shadow.validate()?;
        self.grid.validate()?;
        self.sensing.validate()?;
        if !(self.r_cell_km > 0.0 && self.r_int_km > 0.0 && self.d_p_km > 0.0) {
            return Err(Error::domain("cell radius, interference radius and protection radius must be positive"));
        }
        if !self.bs_loc.is_finite() || !self.noise_floor_dbm.is_finite() {
            return Err(Error::domain("base station and noise floor must be finite"));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut seen = HashSet::new();
        let mut preset = ScenarioId::One;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected key = value, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::parse(i + 1, format!("unknown key {k:?}")));
            }
            if k != "zone" && !seen.insert(k) {
                return Err(Error::parse(i + 1, format!("duplicate key {k:?}")));
            }
            if k == "scenario" {
                preset = ScenarioId::parse(v).ok_or_else(|| Error::parse(i + 1, format!("unknown scenario {v:?}")))?;
            }
            pairs.push((i + 1, k, v));
        }

        let mut cfg = Self::preset(preset);
        let mut zones: Option<Vec<ShadowZone>> = None;
        let mut grid_size_m = cfg.grid.cell_size_m;
        for (line, k, v) in pairs {
            let num = || v.parse::<f64>().map_err(|e| Error::parse(line, format!("{k}: {e}")));
            let int = || v.parse::<u64>().map_err(|e| Error::parse(line, format!("{k}: {e}")));
            match k {
                "scenario" => {}
                "tx_x_km" => cfg.tx.loc.x = num()?,
                "tx_y_km" => cfg.tx.loc.y = num()?,
                "tx_power_dbm" => cfg.tx.power_dbm = num()?,
                "freq_mhz" => {
                    cfg.tx.prop.freq_mhz = num()?;
                    cfg.interference.prop_d2d.freq_mhz = cfg.tx.prop.freq_mhz;
                }
                "alpha_dtv" => cfg.tx.prop.alpha = num()?,
                "alpha_d2d" => cfg.interference.prop_d2d.alpha = num()?,
                "sigma_db" => {
                    cfg.tx.prop.sigma_shadow_db = num()?;
                    cfg.interference.prop_d2d.sigma_shadow_db = cfg.tx.prop.sigma_shadow_db;
                }
                "p_min_dbm" => cfg.tx.p_min_dbm = num()?,
                "nu_cov" => cfg.tx.cov_threshold = num()?,
                "i_max_dbm" => cfg.interference.i_max_dbm = num()?,
                "nu_int" => cfg.interference.int_threshold = num()?,
                "p_peak_dbm" => cfg.interference.p_peak_dbm = num()?,
                "mean_shadow_d2d_db" => cfg.interference.mean_shadow_d2d_db = num()?,
                "noise_dbm" => cfg.noise_floor_dbm = num()?,
                "d_p_km" => cfg.d_p_km = num()?,
                "bs_x_km" => cfg.bs_loc.x = num()?,
                "bs_y_km" => cfg.bs_loc.y = num()?,
                "r_cell_km" => cfg.r_cell_km = num()?,
                "r_int_km" => cfg.r_int_km = num()?,
                "grid_size_m" => grid_size_m = num()?,
                "sampling_rate" => cfg.sensing.sampling_rate = num()?,
                "n_sam" => cfg.sensing.n_sam = int()? as usize,
                "min_count" => cfg.sensing.min_count = int()? as usize,
                "abnormal_rate" => cfg.sensing.abnormal_rate = num()?,
                "abnormal_magnitude_w" => cfg.sensing.abnormal_magnitude_w = num()?,
                "ripple_amp_db" => cfg.shadow.ripple.amplitude_db = num()?,
                "ripple_freq" => cfg.shadow.ripple.angular_freq = num()?,
                "ripple_phase_rad" => cfg.shadow.ripple.phase_rad = num()?,
                "zone" => {
                    let z = ShadowZone::parse_config_value(v).map_err(|m| Error::parse(line, m))?;
                    zones.get_or_insert_with(Vec::new).extend(z);
                }
                "static_shadowing" => {
                    cfg.static_shadowing = v
                        .parse::<bool>()
                        .map_err(|e| Error::parse(line, format!("{k}: {e}")))?
                }
                "seed" => cfg.rng_seed = int()?,
                _ => unreachable!("key list checked above"),
            }
        }
        if let Some(z) = zones {
            cfg.shadow.zones = z;
        }
        cfg.grid = GridSpec::centered_square(cfg.bs_loc, cfg.area_side_km(), grid_size_m)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every parameter in a fixed order, one `key = value` per line.
    /// Reading the text back gives an identical configuration.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("scenario", self.scenario.to_string());
        kv("tx_x_km", self.tx.loc.x.to_string());
        kv("tx_y_km", self.tx.loc.y.to_string());
        kv("tx_power_dbm", self.tx.power_dbm.to_string());
        kv("freq_mhz", self.tx.prop.freq_mhz.to_string());
        kv("alpha_dtv", self.tx.prop.alpha.to_string());
        kv("alpha_d2d", self.interference.prop_d2d.alpha.to_string());
        kv("sigma_db", self.tx.prop.sigma_shadow_db.to_string());
        kv("p_min_dbm", self.tx.p_min_dbm.to_string());
        kv("nu_cov", self.tx.cov_threshold.to_string());
        kv("i_max_dbm", self.interference.i_max_dbm.to_string());
        kv("nu_int", self.interference.int_threshold.to_string());
        kv("p_peak_dbm", self.interference.p_peak_dbm.to_string());
        kv("mean_shadow_d2d_db", self.interference.mean_shadow_d2d_db.to_string());
        kv("noise_dbm", self.noise_floor_dbm.to_string());
        kv("d_p_km", self.d_p_km.to_string());
        kv("bs_x_km", self.bs_loc.x.to_string());
        kv("bs_y_km", self.bs_loc.y.to_string());
        kv("r_cell_km", self.r_cell_km.to_string());
        kv("r_int_km", self.r_int_km.to_string());
        kv("grid_size_m", self.grid.cell_size_m.to_string());
        kv("sampling_rate", self.sensing.sampling_rate.to_string());
        kv("n_sam", self.sensing.n_sam.to_string());
        kv("min_count", self.sensing.min_count.to_string());
        kv("abnormal_rate", self.sensing.abnormal_rate.to_string());
        kv("abnormal_magnitude_w", self.sensing.abnormal_magnitude_w.to_string());
        kv("ripple_amp_db", self.shadow.ripple.amplitude_db.to_string());
        kv("ripple_freq", self.shadow.ripple.angular_freq.to_string());
        kv("ripple_phase_rad", self.shadow.ripple.phase_rad.to_string());
        if self.shadow.zones.is_empty() {
            kv("zone", "none".to_string());
        }
        for z in &self.shadow.zones {
            kv("zone", z.to_config_value());
        }
        kv("static_shadowing", self.static_shadowing.to_string());
        kv("seed", self.rng_seed.to_string());
        s
    }

    /// 64-bit FNV-1a digest of [`Self::canonical_text`].
    pub fn digest(&self) -> u64 {
        let mut h = FnvHasher::default();
        h.write(self.canonical_text().as_bytes());
        h.finish()
    }
}

fn default_tx() -> DtvTransmitter {
    DtvTransmitter {
        loc: Location::new(0.0, 0.0),
        power_dbm: 90.0,
        p_min_dbm: -92.2,
        cov_threshold: 0.9,
        prop: PropagationParams {
            alpha: 4.0,
            freq_mhz: 615.0,
            sigma_shadow_db: 5.5,
        },
    }
}

/// Distance at which the shadow-free mean power meets the coverage threshold.
pub fn coverage_contour_km(tx: &DtvTransmitter) -> f64 {
    distance_for_path_loss_km(tx.power_dbm - coverage_threshold_dbm(tx), &tx.prop)
}

// Stream offset so the static shadow draw never shares a sequence with sensing.
const STATIC_SHADOW_STREAM: u64 = 0x5eed_5ad0;

/// Mean received power at every grid center under the scenario field.
pub fn ground_truth_matrix(cfg: &ScenarioConfig) -> Result<SpectrumMatrix> {
    let g = &cfg.grid;
    let mut values = DMatrix::zeros(g.rows, g.cols);
    let mut static_draw = if cfg.static_shadowing && cfg.tx.prop.sigma_shadow_db > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        rng.set_stream(STATIC_SHADOW_STREAM);
        let normal = Normal::new(0.0, cfg.tx.prop.sigma_shadow_db).map_err(|e| Error::domain(e.to_string()))?;
        Some((rng, normal))
    } else {
        None
    };
    for (r, c, center) in g.centers() {
        let mut shadow = mean_shadow_at(&cfg.shadow, &center, &cfg.tx.loc);
        if let Some((rng, normal)) = static_draw.as_mut() {
            shadow += normal.sample(rng);
        }
        values[(r, c)] = mean_received_power_dbm(&cfg.tx, &center, shadow)?;
    }
    Ok(SpectrumMatrix::new(values))
}

/// Covered where the entry reaches `p_bar_min`; a tie counts as covered.
pub fn ground_truth_labels(g: &SpectrumMatrix, p_bar_min: f64) -> CoverageLabelGrid {
    let (rows, cols) = g.shape();
    CoverageLabelGrid::from_fn(rows, cols, |r, c| {
        if g.get(r, c) >= p_bar_min {
            Coverage::Covered
        } else {
            Coverage::Uncovered
        }
    })
}

/// Brute-force MPEP for every grid of `cfg.grid`: each uncovered
/// device is checked against every covered grid center in the area.
pub fn oracle_mpep(cfg: &ScenarioConfig, truth: &CoverageLabelGrid) -> Result<MpepMap> {
    let g = &cfg.grid;
    if truth.shape() != g.shape() {
        return Err(Error::Dimension {
            expected: g.shape(),
            got: truth.shape(),
        });
    }
    let ip = &cfg.interference;
    let range = worst_case_interference_range_km(ip);
    let covered: Vec<Location> = g
        .centers()
        .filter(|(r, c, _)| truth.get(*r, *c).is_covered())
        .map(|(_, _, loc)| loc)
        .collect();
    let mut entries = Vec::with_capacity(g.len());
    for (r, c, dev) in g.centers() {
        if truth.get(r, c).is_covered() {
            entries.push(Some(MpepEntry::black()));
            continue;
        }
        let mut best: Option<(Location, f64)> = None;
        for rx in &covered {
            if dev.distance_to(rx) > range {
                continue;
            }
            let limit = interference_power_limit_dbm(&dev, rx, ip)?;
            if best.is_none_or(|(_, b)| limit < b) {
                best = Some((*rx, limit));
            }
        }
        let entry = match best {
            Some((wcrp, limit)) if limit < ip.p_peak_dbm => MpepEntry::gray(limit, wcrp),
            _ => MpepEntry::white(ip.p_peak_dbm),
        };
        entries.push(Some(entry));
    }
    MpepMap::from_entries(*g, ip.p_peak_dbm, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn area_side() {
        assert_abs_diff_eq!(cell_area_side_km(2.0, 2.0), 8.0);
        assert_abs_diff_eq!(cell_area_side_km(0.5, 0.5), 2.0);
        assert_abs_diff_eq!(cell_area_side_km(2.0, 1.909), 7.818);
    }

    #[test]
    fn band_ramp_endpoints() {
        let cfg = ScenarioConfig::scenario_two();
        let spec = ShadowFieldSpec {
            ripple: Ripple {
                amplitude_db: 0.0,
                ..Ripple::default()
            },
            ..cfg.shadow.clone()
        };
        let at = |x| mean_shadow_at(&spec, &Location::new(x, 0.5), &cfg.tx.loc);
        assert_abs_diff_eq!(at(116.2), 20.0, epsilon = 1e-9);
        assert_abs_diff_eq!(at(120.2), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(at(118.2), 10.0, epsilon = 1e-9);
        assert_eq!(at(116.0), 0.0);
    }

    #[test]
    fn ripple_follows_bearing() {
        let spec = ShadowFieldSpec::default();
        let tx = Location::new(0.0, 0.0);
        assert_abs_diff_eq!(mean_shadow_at(&spec, &Location::new(10.0, 0.0), &tx), 0.0, epsilon = 1e-12);
        let theta = std::f64::consts::PI / 10.0;
        let loc = Location::new(theta.cos(), theta.sin());
        assert_abs_diff_eq!(mean_shadow_at(&spec, &loc, &tx), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn scenario_one_sits_on_contour() {
        let cfg = ScenarioConfig::scenario_one();
        assert_abs_diff_eq!(cfg.bs_loc.x, 148.97, epsilon = 0.01);
        let p = mean_received_power_dbm(&cfg.tx, &cfg.bs_loc, 0.0).unwrap();
        assert_abs_diff_eq!(p, cfg.p_bar_min_dbm(), epsilon = 1e-9);
        assert_eq!(cfg.grid.shape(), (100, 100));
    }

    #[test]
    fn scenario_two_shadow_core_is_uncovered() {
        let cfg = ScenarioConfig::scenario_two();
        let g = ground_truth_matrix(&cfg).unwrap();
        let labels = ground_truth_labels(&g, cfg.p_bar_min_dbm());
        // column 12 sits at x ≈ 116.2 km
        let (r, c) = cfg.grid.cell_of(&Location::new(116.25, 0.0)).unwrap();
        assert!(g.get(r, c) < -99.0, "{}", g.get(r, c));
        assert_eq!(labels.get(r, c), Coverage::Uncovered);
        let (r, c) = cfg.grid.cell_of(&Location::new(122.0, 0.0)).unwrap();
        assert_eq!(labels.get(r, c), Coverage::Covered);
    }

    #[test]
    fn labels_break_ties_toward_covered() {
        let g = SpectrumMatrix::new(DMatrix::from_row_slice(1, 3, &[-78.23, -100.83, -85.15]));
        let l = ground_truth_labels(&g, -85.15);
        assert_eq!(l.get(0, 0), Coverage::Covered);
        assert_eq!(l.get(0, 1), Coverage::Uncovered);
        assert_eq!(l.get(0, 2), Coverage::Covered);
    }

    #[test]
    fn entry_at_hundred_km() {
        let mut cfg = ScenarioConfig::scenario_one();
        cfg.shadow = ShadowFieldSpec::flat();
        cfg.bs_loc = Location::new(100.0 - 0.04, -0.04);
        let cfg = cfg.with_grid_size(80.0).unwrap();
        let g = ground_truth_matrix(&cfg).unwrap();
        let (r, c) = cfg.grid.cell_of(&Location::new(100.0, 0.0)).unwrap();
        let center = cfg.grid.center(r, c);
        assert_abs_diff_eq!(center.x, 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(center.y, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(g.get(r, c), -78.2276, epsilon = 1e-4);
    }

    #[test]
    fn text_roundtrip() {
        for cfg in [ScenarioConfig::scenario_one(), ScenarioConfig::scenario_two()] {
            let text = cfg.canonical_text();
            let back = ScenarioConfig::from_text(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.digest(), cfg.digest());
        }
        assert_ne!(ScenarioConfig::scenario_one().digest(), ScenarioConfig::scenario_two().digest());
    }

    #[test]
    fn text_overrides_preset() {
        let cfg = ScenarioConfig::from_text(
            "# coarse grid\ngrid_size_m = 160\nscenario = II\nzone = disc 118 0 1 15\nzone = band 1 2 3 4 -1 1\nseed = 7\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario, ScenarioId::Two);
        assert_eq!(cfg.grid.shape(), (50, 50));
        assert_eq!(cfg.shadow.zones.len(), 2);
        assert_eq!(cfg.rng_seed, 7);
        assert_abs_diff_eq!(cfg.bs_loc.x, 119.2);
        let cleared = ScenarioConfig::from_text("scenario = II\nzone = none\n").unwrap();
        assert!(cleared.shadow.zones.is_empty());
    }

    #[test]
    fn text_rejects_bad_input() {
        for bad in [
            "colour = blue\n",
            "seed = 1\nseed = 2\n",
            "n_sam = -3\n",
            "scenario = III\n",
            "zone = blob 1 2\n",
            "grid_size_m\n",
            "nu_cov = 1.5\n",
        ] {
            assert!(ScenarioConfig::from_text(bad).is_err(), "{bad:?}");
        }
        match ScenarioConfig::from_text("\n\nbogus = 1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn static_shadowing_is_seeded() {
        let mut cfg = ScenarioConfig::scenario_one().with_grid_size(400.0).unwrap();
        let mean = ground_truth_matrix(&cfg).unwrap();
        cfg.static_shadowing = true;
        let a = ground_truth_matrix(&cfg).unwrap();
        let b = ground_truth_matrix(&cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, mean);
        let diff = &a.values - &mean.values;
        let sd = (diff.iter().map(|d| d * d).sum::<f64>() / diff.len() as f64).sqrt();
        assert!((sd - 5.5).abs() < 1.0, "{sd}");
    }

    #[test]
    fn oracle_cases() {
        let cfg = ScenarioConfig::scenario_one().with_grid_size(160.0).unwrap();
        let g = &cfg.grid;
        let mut truth = CoverageLabelGrid::filled(g.rows, g.cols, Coverage::Uncovered);
        truth.labels[(25, 10)] = Coverage::Covered;
        let map = oracle_mpep(&cfg, &truth).unwrap();
        assert_eq!(*map.get(25, 10).unwrap(), MpepEntry::black());
        // seven cells (1.12 km) from the covered cell
        let e = map.get(25, 17).unwrap();
        let lim = interference_power_limit_dbm(&g.center(25, 17), &g.center(25, 10), &cfg.interference).unwrap();
        assert_eq!(*e, MpepEntry::gray(lim, g.center(25, 10)));
        // 2.4 km away
        assert_eq!(*map.get(25, 25).unwrap(), MpepEntry::white(-10.0));
        map.check_trichotomy().unwrap();
    }
}
