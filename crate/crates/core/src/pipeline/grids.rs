use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{SensedArea, SurfacePoint};

pub const CELL_WIDTH_MM: f64 = 18.0;
pub const CELL_HEIGHT_MM: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GridName {
    /// Standard grid.
    Sg,
    /// Shifted vertically by half a cell.
    Vsg,
    /// Shifted horizontally by half a cell.
    Hsg,
    /// Shifted diagonally by half a cell.
    Dsg,
}

impl GridName {
    pub const ALL: [GridName; 4] = [GridName::Sg, GridName::Vsg, GridName::Hsg, GridName::Dsg];

    pub fn as_str(self) -> &'static str {
        match self {
            GridName::Sg => "SG",
            GridName::Vsg => "VSG",
            GridName::Hsg => "HSG",
            GridName::Dsg => "DSG",
        }
    }
}

impl fmt::Display for GridName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GridName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GridName::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown grid {s:?}")))
    }
}

/// A virtual classification grid over the sensed area.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub name: GridName,
    /// Offset of the grid origin from the area's lower-left corner, mm.
    pub offset: [f64; 2],
    pub cell: [f64; 2],
    pub cols: usize,
    pub rows: usize,
    pub area: SensedArea,
}

impl GridSpec {
    /// Grid whose origin sits at `offset` from the area corner and whose
    /// columns/rows extend just far enough to cover the area.
    pub fn covering(name: GridName, area: SensedArea, offset: [f64; 2], cell: [f64; 2]) -> Self {
        let cols = ((area.width() - offset[0]) / cell[0] - 1e-9).ceil() as usize;
        let rows = ((area.height() - offset[1]) / cell[1] - 1e-9).ceil() as usize;
        Self { name, offset, cell, cols, rows, area }
    }

    pub fn cell_count(&self) -> usize {
        self.cols * self.rows
    }

    pub fn origin(&self) -> SurfacePoint {
        SurfacePoint::new(self.area.x_min + self.offset[0], self.area.y_min + self.offset[1])
    }

    /// Rectangle `[x0, x1) × [y0, y1)` of cell `index`.
    pub fn cell_bounds(&self, index: usize) -> [f64; 4] {
        let (row, col) = (index / self.cols, index % self.cols);
        let o = self.origin();
        let x0 = o.x + col as f64 * self.cell[0];
        let y0 = o.y + row as f64 * self.cell[1];
        [x0, x0 + self.cell[0], y0, y0 + self.cell[1]]
    }

    pub fn cell_center(&self, index: usize) -> SurfacePoint {
        let [x0, x1, y0, y1] = self.cell_bounds(index);
        SurfacePoint::new(0.5 * (x0 + x1), 0.5 * (y0 + y1))
    }
}

/// The standard grid plus its vertical, horizontal and diagonal half-cell shifts.
pub fn build_grids(area: SensedArea) -> [GridSpec; 4] {
    let cell = [CELL_WIDTH_MM, CELL_HEIGHT_MM];
    let (hx, hy) = (-0.5 * CELL_WIDTH_MM, -0.5 * CELL_HEIGHT_MM);
    [
        GridSpec::covering(GridName::Sg, area, [0.0, 0.0], cell),
        GridSpec::covering(GridName::Vsg, area, [0.0, hy], cell),
        GridSpec::covering(GridName::Hsg, area, [hx, 0.0], cell),
        GridSpec::covering(GridName::Dsg, area, [hx, hy], cell),
    ]
}

/// Class index (`row·cols + col`) of the half-open cell containing `point`.
/// Points on the closed upper edges of the area fall into the last cell.
pub fn cell_of(grid: &GridSpec, point: SurfacePoint) -> Result<usize> {
    grid.area.check(point)?;
    let o = grid.origin();
    let col = ((point.x - o.x) / grid.cell[0]).floor().max(0.0) as usize;
    let row = ((point.y - o.y) / grid.cell[1]).floor().max(0.0) as usize;
    Ok(row.min(grid.rows - 1) * grid.cols + col.min(grid.cols - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_default_layout;

    fn grids() -> [GridSpec; 4] {
        build_grids(build_default_layout().area())
    }

    #[test]
    fn published_cell_counts() {
        let counts: Vec<usize> = grids().iter().map(GridSpec::cell_count).collect();
        assert_eq!(counts, vec![30, 35, 36, 42]);
        let shapes: Vec<(usize, usize)> = grids().iter().map(|g| (g.cols, g.rows)).collect();
        assert_eq!(shapes, vec![(5, 6), (5, 7), (6, 6), (6, 7)]);
    }

    #[test]
    fn cell_examples() {
        let [sg, vsg, ..] = grids();
        // Rebased (0.1, 0.1) is centered (-44.9, 0.1).
        assert_eq!(cell_of(&sg, SurfacePoint::new(-44.9, 0.1)).unwrap(), 0);
        assert_eq!(cell_of(&sg, SurfacePoint::new(-45.0, 0.0)).unwrap(), 0);
        assert_eq!(cell_of(&sg, SurfacePoint::new(44.999, 119.999)).unwrap(), 29);
        assert_eq!(cell_of(&vsg, SurfacePoint::new(-45.0, 0.0)).unwrap(), 0);
        assert_eq!(cell_of(&vsg, SurfacePoint::new(-45.0, 10.0)).unwrap(), 5);
        assert_eq!(cell_of(&sg, SurfacePoint::new(45.0, 120.0)).unwrap(), 29);
        assert!(matches!(cell_of(&sg, SurfacePoint::new(46.0, 10.0)), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn half_shift_enumeration_matches_counts() {
        // Independent enumeration: count distinct cells hit by a fine raster.
        for g in grids() {
            let mut hit = std::collections::BTreeSet::new();
            for i in 0..=180 {
                for j in 0..=240 {
                    let p = SurfacePoint::new(-45.0 + 0.5 * i as f64, 0.5 * j as f64);
                    hit.insert(cell_of(&g, p).unwrap());
                }
            }
            assert_eq!(hit.len(), g.cell_count(), "{}", g.name);
        }
    }

    #[test]
    fn names_parse() {
        for g in GridName::ALL {
            assert_eq!(g.as_str().parse::<GridName>().unwrap(), g);
        }
        assert!("XSG".parse::<GridName>().is_err());
    }
}
