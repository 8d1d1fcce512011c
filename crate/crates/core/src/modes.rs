//! Normal modes of a discretised dielectric domain.
//!
//! The generalized problem `S phi = w² M phi` with diagonal `M > 0` is
//! reduced to the symmetric standard problem `M^-1/2 S M^-1/2 y = w² y` and
//! solved densely; `phi = M^-1/2 y` is then `M`-orthonormal.

use std::fmt::Write as _;
use std::ops::Range;

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, PermittivityMap};
use crate::operators::DiscreteOperators;

/// Eigenvalues below `-NEGATIVE_TOLERANCE * max|w²|` are rejected; smaller
/// negatives are round-off and clipped to zero.
pub const NEGATIVE_TOLERANCE: f64 = 1e-9;

/// Eigenvalues with `|w²| <= ZERO_TOLERANCE * max|w²|` are treated as exact
/// zeros (the DC mode), so round-off never survives the frequency floor.
pub const ZERO_TOLERANCE: f64 = 1e-12;

/// Retained normal modes with their eigenfrequencies, ascending.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    grid: Grid,
    mass: Vec<f64>,
    omegas: Vec<f64>,
    modes: Mat<f64>,
    residual: f64,
}

impl ModeBasis {
    /// Builds a basis from precomputed parts. `modes` holds one column per
    /// retained mode; `mass` is the permittivity per cell.
    pub fn from_parts(grid: Grid, mass: Vec<f64>, omegas: Vec<f64>, modes: Mat<f64>) -> Result<Self> {
        if mass.len() != grid.dof() {
            return Err(Error::LengthMismatch {
                expected: grid.dof(),
                found: mass.len(),
            });
        }
        if modes.nrows() != grid.dof() || modes.ncols() != omegas.len() {
            return Err(Error::LengthMismatch {
                expected: omegas.len(),
                found: modes.ncols(),
            });
        }
        if omegas.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Numerical("mode frequencies must be positive".into()));
        }
        Ok(Self {
            grid,
            mass,
            omegas,
            modes,
            residual: f64::NAN,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    /// Mode matrix, one column per retained mode.
    pub fn modes(&self) -> &Mat<f64> {
        &self.modes
    }

    pub fn kept_count(&self) -> usize {
        self.omegas.len()
    }

    /// `||S phi - M phi w²||_F / ||S phi||_F` measured at solve time
    /// (`NaN` for bases built with [`ModeBasis::from_parts`]).
    pub fn eigen_residual(&self) -> f64 {
        self.residual
    }

    pub fn mode_value(&self, cell: usize, mode: usize) -> f64 {
        self.modes.read(cell, mode)
    }

    fn check_cell(&self, cell: usize) -> Result<()> {
        if cell >= self.grid.dof() {
            return Err(Error::IndexOutOfRange {
                what: "cell",
                index: cell,
                len: self.grid.dof(),
            });
        }
        Ok(())
    }

    /// `sqrt(1 / 2w_i) phi_i(r_j) exp(-i w_i t)`, the coefficient of `a_i` in
    /// the positive-frequency field at cell `j` and time `t` (hbar = c = 1).
    pub fn field_coefficient(&self, cell: usize, time: f64, mode: usize) -> Result<Complex64> {
        self.check_cell(cell)?;
        if mode >= self.kept_count() {
            return Err(Error::IndexOutOfRange {
                what: "mode",
                index: mode,
                len: self.kept_count(),
            });
        }
        Ok(self.coefficient_unchecked(cell, time, mode))
    }

    fn coefficient_unchecked(&self, cell: usize, time: f64, mode: usize) -> Complex64 {
        let w = self.omegas[mode];
        let amp = (0.5 / w).sqrt() * self.modes.read(cell, mode);
        Complex64::from_polar(amp, -w * time)
    }

    /// Field coefficients of every retained mode at one detection event.
    pub fn field_row(&self, cell: usize, time: f64) -> Result<Vec<Complex64>> {
        self.check_cell(cell)?;
        Ok((0..self.kept_count())
            .map(|i| self.coefficient_unchecked(cell, time, i))
            .collect())
    }

    /// Index ranges of (near-)degenerate eigenfrequencies, `|dw| <= tol * w`.
    pub fn degenerate_groups(&self, tol: f64) -> Vec<Range<usize>> {
        let mut groups = Vec::new();
        let mut start = 0;
        for i in 1..=self.omegas.len() {
            let split = i == self.omegas.len()
                || (self.omegas[i] - self.omegas[i - 1]).abs() > tol * self.omegas[i];
            if split {
                groups.push(start..i);
                start = i;
            }
        }
        groups
    }

    /// Largest entry of `|Phi^T M Phi - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let weighted = Mat::<f64>::from_fn(self.modes.nrows(), self.modes.ncols(), |i, k| {
            self.mass[i] * self.modes.read(i, k)
        });
        let gram = self.modes.transpose() * &weighted;
        max_offset(&gram, |_| 1.0)
    }

    /// Largest entry of `|Phi^T S Phi - diag(w²)|` divided by `max w²`.
    pub fn hamiltonian_error(&self, ops: &DiscreteOperators) -> f64 {
        let s_phi = ops.stiffness().mul_dense(&self.modes);
        let h = self.modes.transpose() * &s_phi;
        let scale = self.omegas.last().map_or(1.0, |w| w * w);
        max_offset(&h, |i| self.omegas[i].powi(2)) / scale
    }

    /// Writes `omegas.csv` (`index,omega`) and `modes.csv` (one row per cell,
    /// one column per mode) into `dir`.
    pub fn export_csv(&self, dir: &std::path::Path) -> Result<()> {
        let mut om = String::from("index,omega\n");
        for (i, w) in self.omegas.iter().enumerate() {
            let _ = writeln!(om, "{i},{w:.16e}");
        }
        std::fs::write(dir.join("omegas.csv"), om)?;

        let mut md = String::from("cell");
        for k in 0..self.kept_count() {
            let _ = write!(md, ",mode_{k}");
        }
        md.push('\n');
        for j in 0..self.modes.nrows() {
            let _ = write!(md, "{j}");
            for k in 0..self.kept_count() {
                let _ = write!(md, ",{:.16e}", self.modes.read(j, k));
            }
            md.push('\n');
        }
        std::fs::write(dir.join("modes.csv"), md)?;
        Ok(())
    }
}

fn max_offset(m: &Mat<f64>, diag: impl Fn(usize) -> f64) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let target = if i == j { diag(i) } else { 0.0 };
            worst = worst.max((m.read(i, j) - target).abs());
        }
    }
    worst
}

/// Lowest nonzero frequency of a uniform periodic grid with the same cell
/// sizes and the largest permittivity of `map`, scaled by `1e-6`.
pub fn default_omega_floor(map: &PermittivityMap) -> f64 {
    let g = map.grid();
    let rank = g.dimension().rank();
    let lowest = (0..rank)
        .map(|a| {
            let n = g.counts()[a] as f64;
            2.0 / g.cell_size()[a] * (std::f64::consts::PI / n).sin()
        })
        .fold(f64::INFINITY, f64::min);
    1e-6 * lowest / map.max_eps().sqrt()
}

/// Dense generalized symmetric eigensolve; keeps modes with `w > omega_floor`.
pub fn solve_modes(ops: &DiscreteOperators, omega_floor: f64) -> Result<ModeBasis> {
    if !(omega_floor >= 0.0) {
        return Err(Error::Numerical(format!("omega floor {omega_floor} must be >= 0")));
    }
    let n = ops.grid().dof();
    let inv_sqrt_m: Vec<f64> = ops.mass().iter().map(|m| 1.0 / m.sqrt()).collect();

    let mut a = Mat::<f64>::zeros(n, n);
    let s = ops.stiffness();
    for i in 0..n {
        for (j, v) in s.row(i) {
            a.write(i, j, inv_sqrt_m[i] * v * inv_sqrt_m[j]);
        }
    }
    let eig = a.selfadjoint_eigendecomposition(Side::Lower);
    drop(a);
    let lambdas: Vec<f64> = (0..n).map(|i| eig.s().column_vector().read(i)).collect();
    let u = eig.u();

    let lam_max = lambdas.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let threshold = NEGATIVE_TOLERANCE * lam_max.max(f64::MIN_POSITIVE);
    if let Some(&bad) = lambdas.iter().find(|&&l| l < -threshold) {
        return Err(Error::NotPositiveSemidefinite(bad));
    }

    let omega_of = |l: f64| {
        if l.abs() <= ZERO_TOLERANCE * lam_max {
            0.0
        } else {
            l.max(0.0).sqrt()
        }
    };
    let kept: Vec<usize> = (0..n).filter(|&i| omega_of(lambdas[i]) > omega_floor).collect();
    let omegas: Vec<f64> = kept.iter().map(|&i| omega_of(lambdas[i])).collect();

    let mut modes = Mat::<f64>::zeros(n, kept.len());
    for (k, &i) in kept.iter().enumerate() {
        let mut norm2 = 0.0;
        for j in 0..n {
            let y = u.read(j, i);
            norm2 += y * y;
        }
        if !(norm2.is_finite() && norm2 > 0.5) {
            return Err(Error::Numerical(format!("eigenvector {i} has norm² {norm2}")));
        }
        let scale = 1.0 / norm2.sqrt();
        // Largest-magnitude entry made positive; ties go to the lowest index.
        let mut pivot = 0;
        let mut best = -1.0;
        for j in 0..n {
            let v = u.read(j, i).abs();
            if v > best * (1.0 + 1e-12) {
                best = v;
                pivot = j;
            }
        }
        let sign = if u.read(pivot, i) < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            modes.write(j, k, sign * scale * inv_sqrt_m[j] * u.read(j, i));
        }
    }
    drop(eig);

    let residual = eigen_residual(ops, &modes, &omegas);
    Ok(ModeBasis {
        grid: ops.grid().clone(),
        mass: ops.mass().to_vec(),
        omegas,
        modes,
        residual,
    })
}

fn eigen_residual(ops: &DiscreteOperators, modes: &Mat<f64>, omegas: &[f64]) -> f64 {
    let s_phi = ops.stiffness().mul_dense(modes);
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..modes.ncols() {
        let w2 = omegas[k] * omegas[k];
        for j in 0..modes.nrows() {
            let sp = s_phi.read(j, k);
            let r = sp - ops.mass()[j] * modes.read(j, k) * w2;
            num += r * r;
            den += sp * sp;
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}
