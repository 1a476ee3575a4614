//! Square-grid discretization of the area of interest and the per-grid
//! coverage labels defined on it.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::radio::Location;

/// A `rows × cols` grid of square cells. Row `i` runs north, column `j`
/// runs east; cell `(0, 0)` touches `origin`, the south-west corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Location,
    pub cell_size_m: f64,
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    pub fn new(origin: Location, cell_size_m: f64, rows: usize, cols: usize) -> Result<Self> {
        let g = GridSpec {
            origin,
            cell_size_m,
            rows,
            cols,
        };
        g.validate()?;
        Ok(g)
    }

    /// Square grid of side `side_km` centered on `center`, with the cell
    /// count rounded to the nearest integer.
    pub fn centered_square(center: Location, side_km: f64, cell_size_m: f64) -> Result<Self> {
        let n = (side_km * 1000.0 / cell_size_m).round() as usize;
        let half = 0.5 * n as f64 * cell_size_m / 1000.0;
        GridSpec::new(center.offset(-half, -half), cell_size_m, n, n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows < 2 || self.cols < 2 {
            return Err(Error::domain(format!(
                "grid needs at least 2x2 cells, got {}x{}",
                self.rows, self.cols
            )));
        }
        if !(self.cell_size_m > 0.0 && self.cell_size_m.is_finite()) {
            return Err(Error::domain(format!("cell size must be positive, got {}", self.cell_size_m)));
        }
        if !self.origin.is_finite() {
            return Err(Error::domain("grid origin must be finite"));
        }
        Ok(())
    }

    pub fn cell_size_km(&self) -> f64 {
        self.cell_size_m / 1000.0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width_km(&self) -> f64 {
        self.cols as f64 * self.cell_size_km()
    }

    pub fn height_km(&self) -> f64 {
        self.rows as f64 * self.cell_size_km()
    }

    pub fn center(&self, row: usize, col: usize) -> Location {
        let s = self.cell_size_km();
        Location::new(
            self.origin.x + (col as f64 + 0.5) * s,
            self.origin.y + (row as f64 + 0.5) * s,
        )
    }

    /// Cell containing `loc`; cells are half-open on their north and east edges.
    pub fn cell_of(&self, loc: &Location) -> Option<(usize, usize)> {
        let s = self.cell_size_km();
        let fx = ((loc.x - self.origin.x) / s).floor();
        let fy = ((loc.y - self.origin.y) / s).floor();
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (col, row) = (fx as usize, fy as usize);
        (row < self.rows && col < self.cols).then_some((row, col))
    }

    pub fn centers(&self) -> impl Iterator<Item = (usize, usize, Location)> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| (r, c, self.center(r, c))))
    }

    /// Inclusive index window of cells whose centers can lie within
    /// `radius_km` of `loc`, clipped to the grid.
    pub fn window(&self, loc: &Location, radius_km: f64) -> (std::ops::RangeInclusive<usize>, std::ops::RangeInclusive<usize>) {
        let s = self.cell_size_km();
        let clip = |v: f64, n: usize| -> usize { v.max(0.0).min((n - 1) as f64) as usize };
        let c0 = clip(((loc.x - radius_km - self.origin.x) / s - 0.5).floor(), self.cols);
        let c1 = clip(((loc.x + radius_km - self.origin.x) / s - 0.5).ceil(), self.cols);
        let r0 = clip(((loc.y - radius_km - self.origin.y) / s - 0.5).floor(), self.rows);
        let r1 = clip(((loc.y + radius_km - self.origin.y) / s - 0.5).ceil(), self.rows);
        (r0..=r1, c0..=c1)
    }
}

/// Binary coverage declaration of a grid: `-1` covered, `+1` uncovered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coverage {
    Covered,
    Uncovered,
}

impl Coverage {
    pub fn sign(self) -> f64 {
        match self {
            Coverage::Covered => -1.0,
            Coverage::Uncovered => 1.0,
        }
    }

    /// Sign of a raw decision score; an exact zero is resolved as covered.
    pub fn from_score(score: f64) -> Self {
        if score > 0.0 {
            Coverage::Uncovered
        } else {
            Coverage::Covered
        }
    }

    pub fn is_covered(self) -> bool {
        self == Coverage::Covered
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageLabelGrid {
    pub labels: DMatrix<Coverage>,
}

impl CoverageLabelGrid {
    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Coverage) -> Self {
        CoverageLabelGrid {
            labels: DMatrix::from_fn(rows, cols, f),
        }
    }

    pub fn filled(rows: usize, cols: usize, value: Coverage) -> Self {
        CoverageLabelGrid {
            labels: DMatrix::from_element(rows, cols, value),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.labels.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> Coverage {
        self.labels[(row, col)]
    }

    pub fn covered_count(&self) -> usize {
        self.labels.iter().filter(|c| c.is_covered()).count()
    }

    pub fn negated(&self) -> Self {
        CoverageLabelGrid {
            labels: self.labels.map(|c| match c {
                Coverage::Covered => Coverage::Uncovered,
                Coverage::Uncovered => Coverage::Covered,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(Location::new(10.0, -4.0), 80.0, 100, 100).unwrap()
    }

    #[test]
    fn centers_follow_half_cell_offset() {
        let g = grid();
        let c = g.center(0, 0);
        assert!((c.x - 10.04).abs() < 1e-12 && (c.y + 3.96).abs() < 1e-12);
        let c = g.center(2, 5);
        assert!((c.x - (10.0 + 5.5 * 0.08)).abs() < 1e-12);
        assert!((c.y - (-4.0 + 2.5 * 0.08)).abs() < 1e-12);
    }

    #[test]
    fn cell_of_roundtrips_centers() {
        let g = grid();
        for (r, c, loc) in g.centers() {
            assert_eq!(g.cell_of(&loc), Some((r, c)));
        }
        assert_eq!(g.cell_of(&Location::new(9.99, 0.0)), None);
        assert_eq!(g.cell_of(&Location::new(18.0, 0.0)), None);
        assert_eq!(g.cell_of(&Location::new(f64::NAN, 0.0)), None);
    }

    #[test]
    fn centered_square_matches_side() {
        let g = GridSpec::centered_square(Location::new(119.2, 0.0), 8.0, 80.0).unwrap();
        assert_eq!(g.shape(), (100, 100));
        assert!((g.origin.x - 115.2).abs() < 1e-9 && (g.origin.y + 4.0).abs() < 1e-9);
        let coarse = GridSpec::centered_square(Location::new(0.0, 0.0), 8.0, 160.0).unwrap();
        assert_eq!(coarse.shape(), (50, 50));
    }

    #[test]
    fn window_contains_every_center_in_radius() {
        let g = grid();
        let loc = Location::new(13.3, -1.1);
        let r = 1.909;
        let (rows, cols) = g.window(&loc, r);
        for (row, col, c) in g.centers() {
            if c.distance_to(&loc) <= r {
                assert!(rows.contains(&row) && cols.contains(&col), "missed {row},{col}");
            }
        }
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(GridSpec::new(Location::default(), 80.0, 1, 10).is_err());
        assert!(GridSpec::new(Location::default(), 0.0, 10, 10).is_err());
    }

    #[test]
    fn score_ties_resolve_covered() {
        assert_eq!(Coverage::from_score(0.0), Coverage::Covered);
        assert_eq!(Coverage::from_score(-0.0), Coverage::Covered);
        assert_eq!(Coverage::from_score(1e-300), Coverage::Uncovered);
    }
}
