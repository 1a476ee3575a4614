//! Opportunistic spatial reuse: per-grid maximum permitted emission
//! power (MPEP) from a detected coverage set.
//!
//! A device in a covered grid may not transmit (black space). A device
//! with no covered grid center inside its worst-case interference range
//! may use its peak power (white space). Otherwise the binding receiver
//! position is the covered grid center with the lowest interference
//! limit, and that limit is the MPEP (gray space).

use std::fmt;
use std::io::Write;

use crate::boundary::BoundaryModel;
use crate::error::{Error, Result};
use crate::grid::{CoverageLabelGrid, GridSpec};
use crate::radio::{interference_power_limit_dbm, worst_case_interference_range_km, InterferenceParams, Location};

/// Default power below which a gray entry is treated as black.
pub const DEFAULT_FLOOR_DBM: f64 = -60.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mpep {
    NoTransmission,
    Dbm(f64),
}

impl Mpep {
    pub fn dbm(self) -> Option<f64> {
        match self {
            Mpep::NoTransmission => None,
            Mpep::Dbm(v) => Some(v),
        }
    }

    /// Transmit power with the no-transmission marker mapped to −∞.
    pub fn as_power_dbm(self) -> f64 {
        self.dbm().unwrap_or(f64::NEG_INFINITY)
    }
}

impl fmt::Display for Mpep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mpep::NoTransmission => f.write_str("NOTX"),
            Mpep::Dbm(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceClass {
    Black,
    Gray,
    White,
}

impl SpaceClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SpaceClass::Black => "BLACK",
            SpaceClass::Gray => "GRAY",
            SpaceClass::White => "WHITE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "BLACK" => Some(SpaceClass::Black),
            "GRAY" => Some(SpaceClass::Gray),
            "WHITE" => Some(SpaceClass::White),
            _ => None,
        }
    }
}

impl fmt::Display for SpaceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpepEntry {
    pub power: Mpep,
    pub class: SpaceClass,
    /// Worst-case receiver position, present exactly for gray entries.
    pub wcrp: Option<Location>,
}

impl MpepEntry {
    pub fn black() -> Self {
        MpepEntry {
            power: Mpep::NoTransmission,
            class: SpaceClass::Black,
            wcrp: None,
        }
    }

    pub fn white(p_peak_dbm: f64) -> Self {
        MpepEntry {
            power: Mpep::Dbm(p_peak_dbm),
            class: SpaceClass::White,
            wcrp: None,
        }
    }

    pub fn gray(power_dbm: f64, wcrp: Location) -> Self {
        MpepEntry {
            power: Mpep::Dbm(power_dbm),
            class: SpaceClass::Gray,
            wcrp: Some(wcrp),
        }
    }
}

/// Per-grid MPEP database. Entries are stored row-major; `None` marks a
/// grid outside the serving cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MpepMap {
    pub grid: GridSpec,
    pub p_peak_dbm: f64,
    entries: Vec<Option<MpepEntry>>,
}

impl MpepMap {
    pub fn new(grid: GridSpec, p_peak_dbm: f64) -> Self {
        MpepMap {
            grid,
            p_peak_dbm,
            entries: vec![None; grid.len()],
        }
    }

    pub fn from_entries(grid: GridSpec, p_peak_dbm: f64, entries: Vec<Option<MpepEntry>>) -> Result<Self> {
        if entries.len() != grid.len() {
            return Err(Error::Dimension {
                expected: grid.shape(),
                got: (entries.len(), 1),
            });
        }
        Ok(MpepMap {
            grid,
            p_peak_dbm,
            entries,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&MpepEntry> {
        self.entries[row * self.grid.cols + col].as_ref()
    }

    pub fn set(&mut self, row: usize, col: usize, entry: Option<MpepEntry>) {
        self.entries[row * self.grid.cols + col] = entry;
    }

    pub fn entries(&self) -> &[Option<MpepEntry>] {
        &self.entries
    }

    /// Iterates `(row, col, entry)` over in-cell grids.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &MpepEntry)> + '_ {
        let cols = self.grid.cols;
        self.entries
            .iter()
            .enumerate()
            .filter_map(move |(k, e)| e.as_ref().map(|e| (k / cols, k % cols, e)))
    }

    pub fn in_cell_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    /// Copy keeping only grids whose centers lie within `r_cell_km` of `bs`.
    pub fn restricted_to_cell(&self, bs: &Location, r_cell_km: f64) -> MpepMap {
        let mut out = MpepMap::new(self.grid, self.p_peak_dbm);
        for (r, c, e) in self.iter() {
            if self.grid.center(r, c).distance_to(bs) <= r_cell_km {
                out.set(r, c, Some(*e));
            }
        }
        out
    }

    /// Checks the black/gray/white trichotomy on every in-cell entry.
    pub fn check_trichotomy(&self) -> Result<()> {
        for (r, c, e) in self.iter() {
            let ok = match (e.class, e.power) {
                (SpaceClass::Black, Mpep::NoTransmission) => e.wcrp.is_none(),
                (SpaceClass::White, Mpep::Dbm(v)) => v == self.p_peak_dbm && e.wcrp.is_none(),
                (SpaceClass::Gray, Mpep::Dbm(v)) => v < self.p_peak_dbm && e.wcrp.is_some(),
                _ => false,
            };
            if !ok {
                return Err(Error::Format(format!("entry ({r}, {c}) breaks the space-class trichotomy: {e:?}")));
            }
        }
        Ok(())
    }

    /// Writes `x_km,y_km,mpep_dbm,class,wcrp_x,wcrp_y` for every in-cell grid.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x_km", "y_km", "mpep_dbm", "class", "wcrp_x", "wcrp_y"])?;
        for (r, c, e) in self.iter() {
            let loc = self.grid.center(r, c);
            let (wx, wy) = match e.wcrp {
                Some(p) => (p.x.to_string(), p.y.to_string()),
                None => (String::new(), String::new()),
            };
            w.write_record([
                loc.x.to_string(),
                loc.y.to_string(),
                e.power.to_string(),
                e.class.to_string(),
                wx,
                wy,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reuse policy knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReuseConfig {
    /// Gray entries at or below this power degrade to black.
    pub floor_dbm: f64,
}

impl Default for ReuseConfig {
    fn default() -> Self {
        ReuseConfig {
            floor_dbm: DEFAULT_FLOOR_DBM,
        }
    }
}

/// Classifies every grid center with the trained boundary.
pub fn covered_set(model: &BoundaryModel, grid: &GridSpec) -> CoverageLabelGrid {
    CoverageLabelGrid::from_fn(grid.rows, grid.cols, |r, c| model.classify(&grid.center(r, c)))
}

/// Worst-case receiver position for a device at `dev_loc`: the covered
/// grid center within the worst-case interference range whose
/// interference limit is lowest. Scan order is row-major and ties keep
/// the first hit.
pub fn wcrp_search(
    dev_loc: &Location,
    covered: &CoverageLabelGrid,
    grid: &GridSpec,
    ip: &InterferenceParams,
) -> Result<Option<(Location, f64)>> {
    check_shape(covered, grid)?;
    let range = worst_case_interference_range_km(ip);
    let (rows, cols) = grid.window(dev_loc, range);
    let mut best: Option<(Location, f64)> = None;
    for r in rows {
        for c in cols.clone() {
            if !covered.get(r, c).is_covered() {
                continue;
            }
            let rx = grid.center(r, c);
            if dev_loc.distance_to(&rx) > range {
                continue;
            }
            let limit = interference_power_limit_dbm(dev_loc, &rx, ip)?;
            if best.is_none_or(|(_, b)| limit < b) {
                best = Some((rx, limit));
            }
        }
    }
    Ok(best)
}

fn check_shape(covered: &CoverageLabelGrid, grid: &GridSpec) -> Result<()> {
    if covered.shape() != grid.shape() {
        return Err(Error::Dimension {
            expected: grid.shape(),
            got: covered.shape(),
        });
    }
    Ok(())
}

/// MPEP of a device at `dev_loc` against the covered set.
pub fn compute_mpep(
    dev_loc: &Location,
    covered: &CoverageLabelGrid,
    grid: &GridSpec,
    ip: &InterferenceParams,
    cfg: &ReuseConfig,
) -> Result<MpepEntry> {
    let (row, col) = grid.cell_of(dev_loc).ok_or(Error::OutsideGrid {
        x: dev_loc.x,
        y: dev_loc.y,
    })?;
    check_shape(covered, grid)?;
    if covered.get(row, col).is_covered() {
        return Ok(MpepEntry::black());
    }
    let Some((wcrp, limit)) = wcrp_search(dev_loc, covered, grid, ip)? else {
        return Ok(MpepEntry::white(ip.p_peak_dbm));
    };
    let power = limit.min(ip.p_peak_dbm);
    if power >= ip.p_peak_dbm {
        Ok(MpepEntry::white(ip.p_peak_dbm))
    } else if power <= cfg.floor_dbm {
        Ok(MpepEntry::black())
    } else {
        Ok(MpepEntry::gray(power, wcrp))
    }
}

/// MPEP database for every grid whose center lies within `r_cell_km`
/// of the serving base station, given an explicit covered set.
pub fn build_database_from_coverage(
    cell_bs: &Location,
    r_cell_km: f64,
    covered: &CoverageLabelGrid,
    grid: &GridSpec,
    ip: &InterferenceParams,
    cfg: &ReuseConfig,
) -> Result<MpepMap> {
    check_shape(covered, grid)?;
    let mut map = MpepMap::new(*grid, ip.p_peak_dbm);
    for (r, c, center) in grid.centers() {
        if center.distance_to(cell_bs) <= r_cell_km {
            map.set(r, c, Some(compute_mpep(&center, covered, grid, ip, cfg)?));
        }
    }
    Ok(map)
}

/// MPEP database from a trained boundary model.
pub fn build_database(
    cell_bs: &Location,
    r_cell_km: f64,
    model: &BoundaryModel,
    grid: &GridSpec,
    ip: &InterferenceParams,
    cfg: &ReuseConfig,
) -> Result<MpepMap> {
    let covered = covered_set(model, grid);
    build_database_from_coverage(cell_bs, r_cell_km, &covered, grid, ip, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Coverage;
    use crate::radio::PropagationParams;
    use approx::assert_abs_diff_eq;

    fn ip() -> InterferenceParams {
        InterferenceParams {
            i_max_dbm: -98.2,
            int_threshold: 0.1,
            p_peak_dbm: -10.0,
            prop_d2d: PropagationParams::new(2.5, 615.0, 5.5).unwrap(),
            mean_shadow_d2d_db: 0.0,
        }
    }

    // 100 m cells over 10 km so distances land on round numbers.
    fn grid() -> GridSpec {
        GridSpec::new(Location::new(0.0, 0.0), 100.0, 100, 100).unwrap()
    }

    fn covered_at(cells: &[(usize, usize)]) -> CoverageLabelGrid {
        let mut g = CoverageLabelGrid::filled(100, 100, Coverage::Uncovered);
        for &(r, c) in cells {
            g.labels[(r, c)] = Coverage::Covered;
        }
        g
    }

    #[test]
    fn own_grid_covered_is_black() {
        let g = grid();
        let cov = covered_at(&[(50, 50)]);
        let e = compute_mpep(&g.center(50, 50), &cov, &g, &ip(), &ReuseConfig::default()).unwrap();
        assert_eq!(e, MpepEntry::black());
    }

    #[test]
    fn nearest_covered_at_one_km_is_gray() {
        let g = grid();
        let cov = covered_at(&[(50, 60)]);
        let dev = g.center(50, 50);
        let e = compute_mpep(&dev, &cov, &g, &ip(), &ReuseConfig::default()).unwrap();
        assert_eq!(e.class, SpaceClass::Gray);
        assert_abs_diff_eq!(e.power.dbm().unwrap(), -17.0209, epsilon = 1e-3);
        assert_eq!(e.wcrp, Some(g.center(50, 60)));
    }

    #[test]
    fn covered_beyond_range_is_white() {
        let g = grid();
        let cov = covered_at(&[(50, 70)]);
        let e = compute_mpep(&g.center(50, 50), &cov, &g, &ip(), &ReuseConfig::default()).unwrap();
        assert_eq!(e, MpepEntry::white(-10.0));
        assert!(wcrp_search(&g.center(50, 50), &cov, &g, &ip()).unwrap().is_none());
    }

    #[test]
    fn wcrp_prefers_closer_receiver() {
        let g = grid();
        let cov = covered_at(&[(50, 58), (50, 35)]);
        let (w, _) = wcrp_search(&g.center(50, 50), &cov, &g, &ip()).unwrap().unwrap();
        assert_eq!(w, g.center(50, 58));
    }

    #[test]
    fn outside_grid_is_an_error() {
        let g = grid();
        let cov = covered_at(&[]);
        let r = compute_mpep(&Location::new(-1.0, 5.0), &cov, &g, &ip(), &ReuseConfig::default());
        assert!(matches!(r, Err(Error::OutsideGrid { .. })));
    }

    #[test]
    fn floor_degrades_to_black() {
        let g = grid();
        let cov = covered_at(&[(50, 51)]);
        let cfg = ReuseConfig { floor_dbm: -30.0 };
        // 100 m away: limit ≈ -42 dBm, below the -30 dBm floor
        let e = compute_mpep(&g.center(50, 50), &cov, &g, &ip(), &cfg).unwrap();
        assert_eq!(e, MpepEntry::black());
    }

    #[test]
    fn database_extremes() {
        let g = grid();
        let bs = Location::new(5.0, 5.0);
        let all = CoverageLabelGrid::filled(100, 100, Coverage::Covered);
        let none = CoverageLabelGrid::filled(100, 100, Coverage::Uncovered);
        let cfg = ReuseConfig::default();
        let black = build_database_from_coverage(&bs, 2.0, &all, &g, &ip(), &cfg).unwrap();
        assert!(black.iter().all(|(_, _, e)| e.class == SpaceClass::Black));
        let white = build_database_from_coverage(&bs, 2.0, &none, &g, &ip(), &cfg).unwrap();
        assert!(white.iter().all(|(_, _, e)| *e == MpepEntry::white(-10.0)));
        assert_eq!(white.in_cell_count(), black.in_cell_count());
        // ~ π·20² cells
        let n = white.in_cell_count() as f64;
        assert!((n - std::f64::consts::PI * 400.0).abs() < 40.0, "{n}");
        white.check_trichotomy().unwrap();
    }

    #[test]
    fn csv_marks_notx() {
        let g = grid();
        let mut map = MpepMap::new(g, -10.0);
        map.set(0, 0, Some(MpepEntry::black()));
        map.set(0, 1, Some(MpepEntry::gray(-17.5, Location::new(1.0, 2.0))));
        let mut out = Vec::new();
        map.write_csv(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], "x_km,y_km,mpep_dbm,class,wcrp_x,wcrp_y");
        assert_eq!(lines[1], "0.05,0.05,NOTX,BLACK,,");
        assert_eq!(lines[2], "0.15000000000000002,0.05,-17.5,GRAY,1,2");
    }
}
