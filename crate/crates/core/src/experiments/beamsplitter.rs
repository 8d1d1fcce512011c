//! Dielectric-slab beamsplitter: analytic calibration and its realisation
//! on a finite-difference lattice.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Power transmission of a lossless slab in vacuum at normal incidence,
/// `1 / (1 + ((n - 1/n)/2)² sin²(n w d))`.
pub fn slab_transmission(eps: f64, thickness: f64, omega: f64) -> f64 {
    let n = eps.sqrt();
    let k = 0.5 * (n - 1.0 / n);
    let s = (n * omega * thickness).sin();
    1.0 / (1.0 + k * k * s * s)
}

/// Thinnest slab of permittivity `eps` whose transmission at `omega` is one
/// half, found by bisection on the thickness in `(0, lambda/2)`.
pub fn calibrate_beamsplitter(omega: f64, eps: f64) -> Result<f64> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Calibration(format!("frequency {omega} must be > 0")));
    }
    if !(eps > 1.0 && eps.is_finite()) {
        return Err(Error::Calibration(format!(
            "eps_bs = {eps}: transmission is identically 1"
        )));
    }
    let n = eps.sqrt();
    // |t|² falls monotonically until n w d = pi/2, which lies inside (0, lambda/2).
    let hi_limit = (0.5 * PI / (n * omega)).min(PI / omega);
    let f = |d: f64| slab_transmission(eps, d, omega) - 0.5;
    if f(hi_limit) > 0.0 {
        return Err(Error::Calibration(format!(
            "eps_bs = {eps} cannot reach 50% transmission (minimum {:.4})",
            f(hi_limit) + 0.5
        )));
    }
    let (mut lo, mut hi) = (0.0, hi_limit);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi_limit {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Transmission of a run of cells with permittivities `eps_cells` embedded
/// in the vacuum lattice `-(u[j+1] - 2u[j] + u[j-1])/h² = w² eps_j u[j]`.
pub fn lattice_transmission(cell_size: f64, eps_cells: &[f64], omega: f64) -> Result<f64> {
    let wh2 = (omega * cell_size).powi(2);
    if wh2 >= 4.0 {
        return Err(Error::Calibration(format!(
            "frequency {omega} is above the lattice cutoff {}",
            2.0 / cell_size
        )));
    }
    let kappa = (1.0 - 0.5 * wh2).acos();
    let m = eps_cells.len() as i64;
    // Cells 0..m hold the slab; vacuum outside. Start from a pure transmitted
    // wave at m, m+1 and run the recurrence leftwards to -2, -1.
    let wave = |j: i64| Complex64::from_polar(1.0, kappa * j as f64);
    let mut right = wave(m + 1);
    let mut here = wave(m);
    let mut j = m;
    while j > -1 {
        let eps = if (0..m).contains(&j) { eps_cells[j as usize] } else { 1.0 };
        let left = (2.0 - wh2 * eps) * here - right;
        right = here;
        here = left;
        j -= 1;
    }
    // here = u[-1], right = u[0]; both in vacuum.
    let (a, ua, ub) = (-1i64, here, right);
    let denom = wave(a + 1) - wave(a - 1);
    let incident = (ub - ua * Complex64::from_polar(1.0, -kappa)) / denom;
    Ok(1.0 / incident.norm_sqr())
}

/// Permittivity that makes `cells` uniform cells a 50:50 splitter at
/// `omega` on the lattice. Searches upward from 1 for the first crossing.
pub fn lattice_splitter_eps(cell_size: f64, cells: usize, omega: f64) -> Result<f64> {
    if cells == 0 {
        return Err(Error::Calibration("splitter needs at least one cell".into()));
    }
    let f = |e: f64| -> Result<f64> { Ok(lattice_transmission(cell_size, &vec![e; cells], omega)? - 0.5) };
    let mut lo = 1.0;
    let mut hi = 1.0;
    let mut step = 0.05;
    loop {
        let next = hi + step;
        if f(next)? <= 0.0 {
            hi = next;
            break;
        }
        lo = next;
        hi = next;
        step *= 1.2;
        if hi > 1e4 {
            return Err(Error::Calibration(format!(
                "no 50:50 permittivity for {cells} cells of size {cell_size}"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
