//! One-dimensional phase-sensing sweep: two counter-propagating packets meet
//! on a central 50:50 slab and are detected symmetrically beyond it.

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::beamsplitter::{calibrate_beamsplitter, lattice_splitter_eps};
use super::{at_point, check_photons, normalize_to_max, SweepResult};
use crate::correlation::{coherent_intensity, finish, noon_terms, BranchAmplitudes, CfTerms, Regularization};
use crate::error::{Error, Result};
use crate::grid::{Grid, PermittivityMap};
use crate::modes::{default_omega_floor, solve_modes, ModeBasis};
use crate::operators::build_operators_1d;
use crate::wavepackets::{overlap, packet_profile, project_packet, SpectralAmplitudes, WavepacketSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseSweepConfig {
    /// Periodic domain length (m), centred on the origin.
    pub domain_length: f64,
    /// Cell count; `None` picks `cells_per_wavelength` at the packet carrier.
    pub cells: Option<usize>,
    pub cells_per_wavelength: f64,
    /// Packets start at `-x_g` (moving right) and `+x_g` (moving left).
    pub packet_offset: f64,
    pub center_frequency: f64,
    pub spectral_std: f64,
    pub splitter_center: f64,
    pub splitter_eps: f64,
    /// Slab thickness (m); `None` calibrates it to 50:50 at the carrier.
    pub splitter_thickness: Option<f64>,
    /// Re-tune the slab cells so the lattice itself splits 50:50.
    pub splitter_lattice_calibration: bool,
    /// Detectors sit at `-x_det` (alpha) and `+x_det` (beta).
    pub detector_offset: f64,
    /// Detection time; `None` uses the ballistic transit `x_g + x_det`.
    pub detection_time: Option<f64>,
    pub photon_numbers: Vec<u32>,
    pub theta_samples: usize,
    pub eps_reg: f64,
    pub mean_photon_number: f64,
}

impl Default for PhaseSweepConfig {
    fn default() -> Self {
        Self {
            domain_length: 1.5,
            cells: None,
            cells_per_wavelength: 12.0,
            packet_offset: 0.375,
            center_frequency: 526.0,
            spectral_std: 1.59,
            splitter_center: 0.0,
            splitter_eps: 12.0,
            splitter_thickness: None,
            splitter_lattice_calibration: true,
            detector_offset: 0.7,
            detection_time: None,
            photon_numbers: vec![2, 4, 6],
            theta_samples: 192,
            eps_reg: crate::correlation::DEFAULT_EPS_REG,
            mean_photon_number: 1.0,
        }
    }
}

impl PhaseSweepConfig {
    pub fn cell_count(&self) -> usize {
        self.cells.unwrap_or_else(|| {
            let lambda = 2.0 * PI / self.center_frequency;
            // Odd, so a cell centre sits on the splitter axis.
            let n = (self.cells_per_wavelength * self.domain_length / lambda).ceil() as usize;
            n + 1 - n % 2
        })
    }

    pub fn detection_time(&self) -> f64 {
        self.detection_time
            .unwrap_or(self.packet_offset + self.detector_offset)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("{v} must be finite and > 0")))
            }
        };
        positive("domain_length", self.domain_length)?;
        positive("cells_per_wavelength", self.cells_per_wavelength)?;
        positive("center_frequency", self.center_frequency)?;
        positive("spectral_std", self.spectral_std)?;
        positive("mean_photon_number", self.mean_photon_number)?;
        positive("eps_reg", self.eps_reg)?;
        if !(self.splitter_eps.is_finite() && self.splitter_eps >= 1.0) {
            return Err(Error::config("splitter_eps", format!("{} must be >= 1", self.splitter_eps)));
        }
        if let Some(d) = self.splitter_thickness {
            positive("splitter_thickness", d)?;
        }
        if let Some(t) = self.detection_time {
            if !t.is_finite() {
                return Err(Error::config("detection_time", "must be finite"));
            }
        }
        check_photons(&self.photon_numbers)?;
        let max_n = *self.photon_numbers.iter().max().unwrap_or(&2) as usize;
        if self.theta_samples < 16 * max_n {
            return Err(Error::config(
                "theta_samples",
                format!("{} is below 16 * max(N) = {}", self.theta_samples, 16 * max_n),
            ));
        }
        let half = 0.5 * self.domain_length;
        for (key, x) in [("packet_offset", self.packet_offset), ("detector_offset", self.detector_offset)] {
            if !(x > 0.0 && x < half) {
                return Err(Error::config(key, format!("{x} must lie in (0, {half})")));
            }
        }
        Ok(())
    }
}

/// Everything the sweep needs after the single eigensolve.
#[derive(Debug, Clone)]
pub struct PhaseSetup {
    pub basis: ModeBasis,
    pub left: SpectralAmplitudes,
    pub right: SpectralAmplitudes,
    pub capture: [f64; 2],
    pub alpha_cell: usize,
    pub beta_cell: usize,
    pub detection_time: f64,
    /// Amplitudes of both packets at the two detection events.
    pub alpha: BranchAmplitudes,
    pub beta: BranchAmplitudes,
    pub splitter_cells: Vec<usize>,
    pub splitter_cell_eps: f64,
    pub solve_seconds: f64,
}

impl PhaseSetup {
    pub fn gamma(&self) -> Result<num_complex::Complex64> {
        overlap(&self.left, &self.right)
    }
}

/// Cells whose centres lie within `half` of `center`.
fn slab_cells(grid: &Grid, center: f64, half: f64) -> Vec<usize> {
    (0..grid.dof())
        .filter(|&j| (grid.cell_center(j)[0] - center).abs() < half)
        .collect()
}

pub fn prepare_phase_sweep(cfg: &PhaseSweepConfig) -> Result<PhaseSetup> {
    cfg.validate()?;
    let grid = Grid::centered_1d(cfg.cell_count(), cfg.domain_length)?;
    let dx = grid.cell_size()[0];
    let wg = cfg.center_frequency;

    let thickness = match cfg.splitter_thickness {
        Some(d) => d,
        None => calibrate_beamsplitter(wg, cfg.splitter_eps)?,
    };
    let (cells, cell_eps) = if cfg.splitter_lattice_calibration {
        // Symmetric odd run of cells at least as thick as the slab.
        let mut m = (thickness / dx).ceil().max(1.0) as usize;
        m += 1 - m % 2;
        let cells = slab_cells(&grid, cfg.splitter_center, 0.5 * m as f64 * dx);
        let eps = lattice_splitter_eps(dx, cells.len(), wg)?;
        (cells, eps)
    } else {
        (slab_cells(&grid, cfg.splitter_center, 0.5 * thickness), cfg.splitter_eps)
    };
    if cells.is_empty() {
        return Err(Error::Geometry("beamsplitter covers no cell centres".into()));
    }
    let mut eps = vec![1.0; grid.dof()];
    for &j in &cells {
        eps[j] = cell_eps;
    }
    let detector = |x: f64| {
        let cell = grid
            .cell_at([x, 0.0])
            .ok_or_else(|| Error::config("detector_offset", format!("{x} is outside the domain")))?;
        if cells.contains(&cell) {
            return Err(Error::config("detector_offset", "detector lies inside the splitter"));
        }
        Ok(cell)
    };
    let alpha_cell = detector(cfg.splitter_center - cfg.detector_offset)?;
    let beta_cell = detector(cfg.splitter_center + cfg.detector_offset)?;
    let map = PermittivityMap::new(grid.clone(), eps)?;

    let started = Instant::now();
    let ops = build_operators_1d(&map)?;
    let basis = solve_modes(&ops, default_omega_floor(&map))?;
    let solve_seconds = started.elapsed().as_secs_f64();

    let project = |x: f64, rightward: bool| -> Result<(SpectralAmplitudes, f64)> {
        let spec = WavepacketSpec::along_x(x, rightward, wg, cfg.spectral_std);
        let p = project_packet(&basis, &packet_profile(&spec, &grid)?)?;
        Ok((p.amplitudes, p.capture))
    };
    let (left, cap_l) = project(cfg.splitter_center - cfg.packet_offset, true)?;
    let (right, cap_r) = project(cfg.splitter_center + cfg.packet_offset, false)?;

    let t = cfg.detection_time();
    let fa = basis.field_row(alpha_cell, t)?;
    let fb = basis.field_row(beta_cell, t)?;
    let alpha = BranchAmplitudes::from_field(&fa, &left, &right)?;
    let beta = BranchAmplitudes::from_field(&fb, &left, &right)?;

    Ok(PhaseSetup {
        basis,
        left,
        right,
        capture: [cap_l, cap_r],
        alpha_cell,
        beta_cell,
        detection_time: t,
        alpha,
        beta,
        splitter_cells: cells,
        splitter_cell_eps: cell_eps,
        solve_seconds,
    })
}

/// Uniform phase samples over `[0, 2 pi)`.
pub fn theta_grid(samples: usize) -> Vec<f64> {
    (0..samples)
        .map(|k| 2.0 * PI * k as f64 / samples as f64)
        .collect()
}

/// Evaluates the sweep over the prepared setup for an arbitrary phase grid.
pub fn sweep_phases(cfg: &PhaseSweepConfig, setup: &PhaseSetup, thetas: &[f64]) -> Result<SweepResult> {
    let started = Instant::now();
    let gamma = setup.gamma()?;
    let mut result = SweepResult::new("theta", thetas.to_vec());
    for &n in &cfg.photons_sorted() {
        let terms: Vec<CfTerms> = thetas
            .par_iter()
            .map(|&th| noon_terms(n, th, gamma, setup.alpha, setup.beta))
            .collect::<Result<_>>()?;
        let reg = Regularization::from_peaks(cfg.eps_reg, &terms);
        let comps = terms
            .into_iter()
            .enumerate()
            .map(|(i, t)| finish(t, &reg).map_err(|e| at_point(i, n, e)))
            .collect::<Result<Vec<_>>>()?;
        result.push_cf(n, comps)?;
    }
    let classical: Vec<f64> = thetas
        .iter()
        .map(|&th| coherent_intensity(cfg.mean_photon_number, th, setup.beta))
        .collect();
    result.push_column("classical_norm", normalize_to_max(&classical))?;
    result.meta.label = "phase-sweep".into();
    result.meta.mode_count = setup.basis.kept_count();
    result.meta.eigen_residual = setup.basis.eigen_residual();
    result.meta.capture = setup.capture.to_vec();
    result.meta.solve_seconds = setup.solve_seconds;
    result.meta.sweep_seconds = started.elapsed().as_secs_f64();
    Ok(result)
}

impl PhaseSweepConfig {
    /// Photon numbers in ascending order without repeats.
    pub fn photons_sorted(&self) -> Vec<u32> {
        let mut v = self.photon_numbers.clone();
        v.sort_unstable();
        v.dedup();
        v
    }
}

pub fn run_phase_sweep(cfg: &PhaseSweepConfig) -> Result<SweepResult> {
    let setup = prepare_phase_sweep(cfg)?;
    sweep_phases(cfg, &setup, &theta_grid(cfg.theta_samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odd_automatic_cell_count() {
        let cfg = PhaseSweepConfig::default();
        assert_eq!(cfg.cell_count() % 2, 1);
        let lambda = 2.0 * PI / cfg.center_frequency;
        assert!(cfg.cell_count() as f64 >= 12.0 * cfg.domain_length / lambda);
        assert!((cfg.detection_time() - 1.075).abs() < 1e-15);
    }

    #[test]
    fn validation_names_keys() {
        let key = |cfg: PhaseSweepConfig| match cfg.validate() {
            Err(Error::Config { key, .. }) => key,
            other => panic!("unexpected {other:?}"),
        };
        let d = PhaseSweepConfig::default();
        assert_eq!(key(PhaseSweepConfig { domain_length: 0.0, ..d.clone() }), "domain_length");
        assert_eq!(key(PhaseSweepConfig { photon_numbers: vec![2, 5], ..d.clone() }), "photon_numbers");
        assert_eq!(key(PhaseSweepConfig { theta_samples: 95, ..d.clone() }), "theta_samples");
        assert_eq!(key(PhaseSweepConfig { packet_offset: 0.8, ..d.clone() }), "packet_offset");
        assert_eq!(key(PhaseSweepConfig { splitter_eps: 0.5, ..d }), "splitter_eps");
    }

    #[test]
    fn theta_grid_is_half_open() {
        let t = theta_grid(8);
        assert_eq!(t.len(), 8);
        assert_eq!(t[0], 0.0);
        assert!((t[7] - 2.0 * PI * 7.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn photons_sorted_dedups() {
        let cfg = PhaseSweepConfig { photon_numbers: vec![6, 2, 6, 4], ..Default::default() };
        assert_eq!(cfg.photons_sorted(), vec![2, 4, 6]);
    }
}
