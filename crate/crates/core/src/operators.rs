//! Finite-difference stiffness and mass operators on periodic grids.
//!
//! Units use `c = 1`, so the stiffness carries 1/m² and eigenvalues of
//! `S x = w² M x` are squared angular wavenumbers in rad²/m².

use faer::Mat;

use crate::error::{Error, Result};
use crate::grid::{Dimension, Grid, PermittivityMap};

/// Compressed sparse row matrix with `f64` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles from per-row `(col, value)` lists; duplicate columns are summed.
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m.write(i, j, v);
            }
        }
        m
    }

    /// `self * x` for a dense `x` with `dim()` rows.
    pub fn mul_dense(&self, x: &Mat<f64>) -> Mat<f64> {
        assert_eq!(x.nrows(), self.n);
        let mut out = Mat::zeros(self.n, x.ncols());
        for k in 0..x.ncols() {
            let xc = x.col(k);
            for i in 0..self.n {
                let s: f64 = self.row(i).map(|(j, v)| v * xc.read(j)).sum();
                out.write(i, k, s);
            }
        }
        out
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteOperators {
    grid: Grid,
    stiffness: CsrMatrix,
    mass: Vec<f64>,
}

impl DiscreteOperators {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// Diagonal of the mass matrix (the cell permittivities).
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }
}

/// Periodic three-point `-d²/dx²` and `M = diag(eps)`.
pub fn build_operators_1d(map: &PermittivityMap) -> Result<DiscreteOperators> {
    let grid = map.grid();
    if grid.dimension() != Dimension::One {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: grid.dimension().rank(),
        });
    }
    let n = grid.dof();
    let h2 = grid.cell_size()[0].powi(2);
    let rows = (0..n)
        .map(|j| {
            vec![
                ((j + n - 1) % n, -1.0 / h2),
                (j, 2.0 / h2),
                ((j + 1) % n, -1.0 / h2),
            ]
        })
        .collect();
    Ok(DiscreteOperators {
        grid: grid.clone(),
        stiffness: CsrMatrix::from_rows(rows),
        mass: map.eps().to_vec(),
    })
}

/// Periodic five-point `-(d²/dx² + d²/dy²)` for the scalar TMz field, with
/// x-fastest ordering, and `M = diag(eps)`.
pub fn build_operators_2d_tmz(map: &PermittivityMap) -> Result<DiscreteOperators> {
    let grid = map.grid();
    if grid.dimension() != Dimension::Two {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: grid.dimension().rank(),
        });
    }
    let [nx, ny] = grid.counts();
    let [dx, dy] = grid.cell_size();
    let (cx, cy) = (1.0 / (dx * dx), 1.0 / (dy * dy));
    let mut rows = Vec::with_capacity(nx * ny);
    for iy in 0..ny {
        for ix in 0..nx {
            rows.push(vec![
                (grid.index(ix, iy), 2.0 * cx + 2.0 * cy),
                (grid.index((ix + nx - 1) % nx, iy), -cx),
                (grid.index((ix + 1) % nx, iy), -cx),
                (grid.index(ix, (iy + ny - 1) % ny), -cy),
                (grid.index(ix, (iy + 1) % ny), -cy),
            ]);
        }
    }
    Ok(DiscreteOperators {
        grid: grid.clone(),
        stiffness: CsrMatrix::from_rows(rows),
        mass: map.eps().to_vec(),
    })
}

/// Dispatches on the map's dimension.
pub fn build_operators(map: &PermittivityMap) -> Result<DiscreteOperators> {
    match map.grid().dimension() {
        Dimension::One => build_operators_1d(map),
        Dimension::Two => build_operators_2d_tmz(map),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_1d(n: usize, dx: f64, eps: f64) -> PermittivityMap {
        PermittivityMap::uniform(Grid::new_1d(n, dx, 0.0).unwrap(), eps).unwrap()
    }

    #[test]
    fn periodic_stencil_1d() {
        let ops = build_operators_1d(&uniform_1d(8, 1.0, 1.0)).unwrap();
        let s = ops.stiffness();
        for j in 0..8 {
            assert_eq!(s.get(j, j), 2.0);
            assert_eq!(s.get(j, (j + 1) % 8), -1.0);
            assert_eq!(s.get(j, (j + 7) % 8), -1.0);
            assert_eq!(s.row(j).count(), 3);
        }
        assert_eq!(s.get(0, 7), -1.0);
        assert_eq!(s.get(7, 0), -1.0);
        assert_eq!(s.max_asymmetry(), 0.0);
    }

    #[test]
    fn stencil_scales_with_cell_size() {
        let ops = build_operators_1d(&uniform_1d(8, 0.5, 1.0)).unwrap();
        assert_eq!(ops.stiffness().get(3, 3), 8.0);
        assert_eq!(ops.stiffness().get(3, 4), -4.0);
    }

    #[test]
    fn mass_is_permittivity() {
        let ops = build_operators_1d(&uniform_1d(8, 1.0, 4.0)).unwrap();
        assert!(ops.mass().iter().all(|&m| m == 4.0));

        let grid = Grid::new_1d(10, 1.0, 0.0).unwrap();
        let mut eps = vec![1.0; 10];
        eps[4] = 12.0;
        let ops = build_operators_1d(&PermittivityMap::new(grid, eps.clone()).unwrap()).unwrap();
        assert_eq!(ops.mass(), eps.as_slice());
    }

    #[test]
    fn dimension_mismatch() {
        let map2 = PermittivityMap::uniform(
            Grid::new_2d([8, 8], [1.0, 1.0], [0.0, 0.0]).unwrap(),
            1.0,
        )
        .unwrap();
        assert!(matches!(
            build_operators_1d(&map2),
            Err(Error::DimensionMismatch { expected: 1, found: 2 })
        ));
        assert!(matches!(
            build_operators_2d_tmz(&uniform_1d(8, 1.0, 1.0)),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn five_point_stencil() {
        let grid = Grid::new_2d([8, 8], [1.0, 1.0], [0.0, 0.0]).unwrap();
        let ops = build_operators_2d_tmz(&PermittivityMap::uniform(grid, 1.0).unwrap()).unwrap();
        let s = ops.stiffness();
        for i in 0..64 {
            assert_eq!(s.get(i, i), 4.0);
            let sum: f64 = s.row(i).map(|(_, v)| v).sum();
            assert_eq!(sum, 0.0);
        }
        assert_eq!(s.max_asymmetry(), 0.0);
        // x-fastest: (0,0) couples to (7,0) = 7 and (0,7) = 56.
        assert_eq!(s.get(0, 7), -1.0);
        assert_eq!(s.get(0, 56), -1.0);
        assert_eq!(s.get(0, 1), -1.0);
        assert_eq!(s.get(0, 8), -1.0);
    }

    #[test]
    fn anisotropic_diagonal() {
        let grid = Grid::new_2d([8, 10], [0.5, 0.25], [0.0, 0.0]).unwrap();
        let ops = build_operators_2d_tmz(&PermittivityMap::uniform(grid, 1.0).unwrap()).unwrap();
        let want = 2.0 / 0.25 + 2.0 / 0.0625;
        assert!((ops.stiffness().get(5, 5) - want).abs() < 1e-12);
    }
}
