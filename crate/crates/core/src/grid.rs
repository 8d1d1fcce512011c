//! Cell-centred periodic grids and permittivity maps.
//!
//! Cells are indexed x-fastest: `index = ix + nx * iy`. Cell `(ix, iy)` has its
//! centre at `origin + (i + 1/2) * cell_size` along each axis, so a grid whose
//! origin is `-extent / 2` is mirror symmetric about zero.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Smallest number of cells accepted along any axis.
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Dimension {
    One,
    Two,
}

impl Dimension {
    pub fn rank(self) -> usize {
        match self {
            Dimension::One => 1,
            Dimension::Two => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dimension: Dimension,
    counts: [usize; 2],
    cell_size: [f64; 2],
    origin: [f64; 2],
}

impl Grid {
    pub fn new_1d(cells: usize, cell_size: f64, origin: f64) -> Result<Self> {
        check_axis("x", cells, cell_size, origin)?;
        Ok(Self {
            dimension: Dimension::One,
            counts: [cells, 1],
            cell_size: [cell_size, 1.0],
            origin: [origin, 0.0],
        })
    }

    pub fn new_2d(counts: [usize; 2], cell_size: [f64; 2], origin: [f64; 2]) -> Result<Self> {
        check_axis("x", counts[0], cell_size[0], origin[0])?;
        check_axis("y", counts[1], cell_size[1], origin[1])?;
        Ok(Self {
            dimension: Dimension::Two,
            counts,
            cell_size,
            origin,
        })
    }

    /// A 1D grid of `cells` cells covering `[-length/2, length/2)`.
    pub fn centered_1d(cells: usize, length: f64) -> Result<Self> {
        Self::new_1d(cells, length / cells as f64, -0.5 * length)
    }

    /// A 2D grid covering `[-lx/2, lx/2) x [-ly/2, ly/2)`.
    pub fn centered_2d(counts: [usize; 2], extent: [f64; 2]) -> Result<Self> {
        Self::new_2d(
            counts,
            [extent[0] / counts[0] as f64, extent[1] / counts[1] as f64],
            [-0.5 * extent[0], -0.5 * extent[1]],
        )
    }

    pub fn dimension(&self) -> Dimension {
        self.dimension
    }

    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }

    pub fn cell_size(&self) -> [f64; 2] {
        self.cell_size
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// Number of degrees of freedom (one scalar unknown per cell).
    pub fn dof(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    /// Length of the periodic box along each axis.
    pub fn extent(&self) -> [f64; 2] {
        [
            self.counts[0] as f64 * self.cell_size[0],
            self.counts[1] as f64 * self.cell_size[1],
        ]
    }

    /// Cell length (1D) or area (2D).
    pub fn cell_volume(&self) -> f64 {
        match self.dimension {
            Dimension::One => self.cell_size[0],
            Dimension::Two => self.cell_size[0] * self.cell_size[1],
        }
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix + self.counts[0] * iy
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.counts[0], index / self.counts[0])
    }

    pub fn cell_center(&self, index: usize) -> [f64; 2] {
        let (ix, iy) = self.coords(index);
        let x = self.origin[0] + (ix as f64 + 0.5) * self.cell_size[0];
        match self.dimension {
            Dimension::One => [x, 0.0],
            Dimension::Two => [x, self.origin[1] + (iy as f64 + 0.5) * self.cell_size[1]],
        }
    }

    pub fn contains(&self, point: [f64; 2]) -> bool {
        let ext = self.extent();
        (0..self.dimension.rank()).all(|a| {
            let u = point[a] - self.origin[a];
            u >= 0.0 && u < ext[a]
        })
    }

    /// Cell containing `point`, if it lies inside the box.
    pub fn cell_at(&self, point: [f64; 2]) -> Option<usize> {
        if !self.contains(point) {
            return None;
        }
        let ix = ((point[0] - self.origin[0]) / self.cell_size[0]).floor() as usize;
        let ix = ix.min(self.counts[0] - 1);
        let iy = match self.dimension {
            Dimension::One => 0,
            Dimension::Two => {
                let iy = ((point[1] - self.origin[1]) / self.cell_size[1]).floor() as usize;
                iy.min(self.counts[1] - 1)
            }
        };
        Some(self.index(ix, iy))
    }

    /// Minimum-image displacement `to - from` on the periodic box.
    pub fn periodic_delta(&self, from: [f64; 2], to: [f64; 2]) -> [f64; 2] {
        let ext = self.extent();
        let mut d = [0.0; 2];
        for a in 0..self.dimension.rank() {
            let raw = to[a] - from[a];
            d[a] = raw - ext[a] * (raw / ext[a]).round();
        }
        d
    }
}

fn check_axis(axis: &str, cells: usize, size: f64, origin: f64) -> Result<()> {
    if cells < MIN_CELLS {
        return Err(Error::InvalidGrid(format!(
            "{axis}: {cells} cells, need at least {MIN_CELLS}"
        )));
    }
    if !(size.is_finite() && size > 0.0) {
        return Err(Error::InvalidGrid(format!("{axis}: cell size {size} must be > 0")));
    }
    if !origin.is_finite() {
        return Err(Error::InvalidGrid(format!("{axis}: origin {origin} is not finite")));
    }
    Ok(())
}

/// Relative permittivity per cell of a lossless, dispersionless medium.
#[derive(Debug, Clone, PartialEq)]
pub struct PermittivityMap {
    grid: Grid,
    eps: Vec<f64>,
}

impl PermittivityMap {
    pub fn new(grid: Grid, eps: Vec<f64>) -> Result<Self> {
        if eps.len() != grid.dof() {
            return Err(Error::LengthMismatch {
                expected: grid.dof(),
                found: eps.len(),
            });
        }
        if let Some((cell, &value)) = eps
            .iter()
            .enumerate()
            .find(|(_, e)| !(e.is_finite() && **e >= 1.0))
        {
            return Err(Error::InvalidPermittivity { cell, value });
        }
        Ok(Self { grid, eps })
    }

    pub fn uniform(grid: Grid, eps: f64) -> Result<Self> {
        let n = grid.dof();
        Self::new(grid, vec![eps; n])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn max_eps(&self) -> f64 {
        self.eps.iter().copied().fold(1.0, f64::max)
    }

    /// Parses the dense CSV form: a header line `eps1d,nx` or `eps2d,nx,ny`
    /// followed by permittivity values, row-major with x varying fastest.
    /// Values may be spread over any number of lines.
    pub fn from_csv(text: &str, cell_size: [f64; 2], origin: [f64; 2]) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty permittivity CSV".into()))?;
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        let parse_count = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad cell count {s:?} in header")))
        };
        let grid = match fields.as_slice() {
            ["eps1d", nx] => Grid::new_1d(parse_count(nx)?, cell_size[0], origin[0])?,
            ["eps2d", nx, ny] => {
                Grid::new_2d([parse_count(nx)?, parse_count(ny)?], cell_size, origin)?
            }
            _ => {
                return Err(Error::Parse(format!(
                    "header must be `eps1d,nx` or `eps2d,nx,ny`, got {header:?}"
                )))
            }
        };
        let mut eps = Vec::with_capacity(grid.dof());
        for line in lines {
            for tok in line.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                let v = tok
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad permittivity value {tok:?}")))?;
                eps.push(v);
            }
        }
        Self::new(grid, eps)
    }

    pub fn to_csv(&self) -> String {
        let [nx, ny] = self.grid.counts();
        let mut out = match self.grid.dimension() {
            Dimension::One => format!("eps1d,{nx}\n"),
            Dimension::Two => format!("eps2d,{nx},{ny}\n"),
        };
        for row in self.eps.chunks(nx) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_degenerate_grids() {
        assert!(Grid::new_1d(7, 1.0, 0.0).is_err());
        assert!(Grid::new_1d(8, 0.0, 0.0).is_err());
        assert!(Grid::new_1d(8, -1.0, 0.0).is_err());
        assert!(Grid::new_2d([8, 4], [1.0, 1.0], [0.0, 0.0]).is_err());
    }

    #[test]
    fn centered_grid_is_mirror_symmetric() {
        let g = Grid::centered_1d(10, 1.0).unwrap();
        for j in 0..10 {
            let a = g.cell_center(j)[0];
            let b = g.cell_center(9 - j)[0];
            assert!((a + b).abs() < 1e-15);
        }
    }

    #[test]
    fn x_fastest_ordering() {
        let g = Grid::centered_2d([8, 9], [8.0, 9.0]).unwrap();
        assert_eq!(g.index(3, 2), 3 + 8 * 2);
        assert_eq!(g.coords(19), (3, 2));
        let c = g.cell_center(g.index(0, 0));
        assert_eq!(c, [-3.5, -4.0]);
        assert_eq!(g.cell_at([-3.4, -3.9]), Some(0));
        assert_eq!(g.cell_at([4.1, 0.0]), None);
    }

    #[test]
    fn periodic_delta_wraps() {
        let g = Grid::centered_1d(10, 1.0).unwrap();
        let d = g.periodic_delta([0.45, 0.0], [-0.45, 0.0]);
        assert!((d[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn permittivity_validation() {
        let g = Grid::centered_1d(8, 1.0).unwrap();
        assert!(matches!(
            PermittivityMap::new(g.clone(), vec![1.0; 7]),
            Err(Error::LengthMismatch { .. })
        ));
        let mut eps = vec![1.0; 8];
        eps[3] = 0.5;
        assert!(matches!(
            PermittivityMap::new(g.clone(), eps.clone()),
            Err(Error::InvalidPermittivity { cell: 3, .. })
        ));
        eps[3] = f64::NAN;
        assert!(PermittivityMap::new(g, eps).is_err());
    }

    #[test]
    fn csv_round_trip_2d() {
        let g = Grid::centered_2d([8, 8], [1.0, 1.0]).unwrap();
        let eps: Vec<f64> = (0..64).map(|i| 1.0 + (i % 5) as f64 * 0.75).collect();
        let map = PermittivityMap::new(g.clone(), eps).unwrap();
        let text = map.to_csv();
        assert!(text.starts_with("eps2d,8,8\n"));
        let back = PermittivityMap::from_csv(&text, g.cell_size(), g.origin()).unwrap();
        assert_eq!(back, map);
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(PermittivityMap::from_csv("eps3d,8\n1,1", [1.0, 1.0], [0.0, 0.0]).is_err());
        assert!(PermittivityMap::from_csv("", [1.0, 1.0], [0.0, 0.0]).is_err());
    }
}
