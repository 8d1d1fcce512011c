//! End-to-end drivers for the phase-sensing and ghost-imaging sweeps.

pub mod beamsplitter;
pub mod ghost;
pub mod metrics;
pub mod phase;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::correlation::CfComponents;
use crate::error::{Error, Result};

pub use beamsplitter::{calibrate_beamsplitter, lattice_splitter_eps, lattice_transmission, slab_transmission};
pub use ghost::{build_ghost_geometry, run_ghost_scan, GhostGeometry, GhostScanConfig};
pub use metrics::{edge_sharpness, estimate_fringe_period, fit_cosine, visibility};
pub use phase::{prepare_phase_sweep, run_phase_sweep, PhaseSetup, PhaseSweepConfig};

/// Per-run facts that accompany the CSV columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepMeta {
    pub label: String,
    pub mode_count: usize,
    pub eigen_residual: f64,
    /// Capture fraction of every projected packet (left, right, per point).
    pub capture: Vec<f64>,
    /// Full correlation components per photon number, one per sweep point.
    pub components: BTreeMap<u32, Vec<CfComponents>>,
    pub solve_seconds: f64,
    pub sweep_seconds: f64,
}

impl SweepMeta {
    pub fn min_capture(&self) -> f64 {
        self.capture.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Regularisation flags per photon number.
    pub fn regularized(&self) -> BTreeMap<u32, Vec<bool>> {
        self.components
            .iter()
            .map(|(n, c)| (*n, c.iter().map(|x| x.regularized).collect()))
            .collect()
    }
}

/// A sweep variable with its named data columns, in CSV order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub variable: String,
    pub values: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
    pub meta: SweepMeta,
}

impl SweepResult {
    pub fn new(variable: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            variable: variable.into(),
            values,
            columns: Vec::new(),
            meta: SweepMeta::default(),
        }
    }

    pub fn push_column(&mut self, name: impl Into<String>, data: Vec<f64>) -> Result<()> {
        if data.len() != self.values.len() {
            return Err(Error::LengthMismatch {
                expected: self.values.len(),
                found: data.len(),
            });
        }
        self.columns.push((name.into(), data));
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d.as_slice())
    }

    pub fn header(&self) -> Vec<String> {
        std::iter::once(self.variable.clone())
            .chain(self.columns.iter().map(|(n, _)| n.clone()))
            .collect()
    }

    /// Adds `cf_N<n>` and `cf_N<n>_norm` from the components of each point.
    pub(crate) fn push_cf(&mut self, photons: u32, comps: Vec<CfComponents>) -> Result<()> {
        let raw: Vec<f64> = comps.iter().map(|c| c.value).collect();
        self.push_column(format!("cf_N{photons}"), raw.clone())?;
        self.push_column(format!("cf_N{photons}_norm"), normalize_to_max(&raw))?;
        self.meta.components.insert(photons, comps);
        Ok(())
    }
}

/// Divides by the maximum; all-zero data is returned unchanged.
pub fn normalize_to_max(v: &[f64]) -> Vec<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m > 0.0 {
        v.iter().map(|x| x / m).collect()
    } else {
        v.to_vec()
    }
}

/// Tags an indeterminate point with its position in the sweep.
pub(crate) fn at_point(index: usize, photons: u32, err: Error) -> Error {
    match err {
        Error::IndeterminateCorrelation { .. } => {
            Error::Numerical(format!("sweep point {index}, N = {photons}: {err}"))
        }
        other => other,
    }
}

pub(crate) fn check_photons(list: &[u32]) -> Result<()> {
    if list.is_empty() {
        return Err(Error::config("photon_numbers", "at least one photon number required"));
    }
    if let Some(&n) = list.iter().find(|&&n| n == 0 || n % 2 != 0) {
        return Err(Error::config("photon_numbers", format!("{n} is not a positive even number")));
    }
    Ok(())
}
