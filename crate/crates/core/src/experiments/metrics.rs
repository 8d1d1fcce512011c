//! Fringe and edge metrics on sampled sweep data.

use faer::prelude::SpSolverLstsq;
use faer::Mat;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

fn check_uniform(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::LengthMismatch { expected: 2, found: x.len() });
    }
    let step = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    if !(step > 0.0) {
        return Err(Error::Numerical("samples must be strictly increasing".into()));
    }
    let worst = x
        .windows(2)
        .map(|w| ((w[1] - w[0]) - step).abs())
        .fold(0.0, f64::max);
    if worst > 1e-9 * step.max(1.0) {
        return Err(Error::Numerical("samples are not uniformly spaced".into()));
    }
    Ok(step)
}

/// Period of the dominant fringe in a uniformly sampled series: the largest
/// nonzero DFT bin of the mean-removed data, refined by a parabola through
/// the peak and its neighbours.
pub fn estimate_fringe_period(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), found: y.len() });
    }
    if x.len() < 16 {
        return Err(Error::Numerical(format!("need at least 16 samples, got {}", x.len())));
    }
    let step = check_uniform(x)?;
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(hi - lo >= 1e-9 * scale) || scale == 0.0 {
        return Err(Error::NoFringe);
    }
    let n = y.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = y.iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mag: Vec<f64> = buf.iter().map(|z| z.norm()).collect();
    let half = n / 2;
    let k = (1..=half)
        .max_by(|&a, &b| mag[a].total_cmp(&mag[b]))
        .ok_or(Error::NoFringe)?;
    let mut kf = k as f64;
    if k > 1 && k < half {
        let (a, b, c) = (mag[k - 1], mag[k], mag[k + 1]);
        let curv = a - 2.0 * b + c;
        if curv < 0.0 {
            kf += 0.5 * (a - c) / curv;
        }
    }
    Ok(n as f64 * step / kf)
}

/// Least-squares fit of `a + b cos(n x + phi)`. Returns `(a, b, phi)` and
/// the residual norm relative to the data norm.
pub fn fit_cosine(x: &[f64], y: &[f64], harmonic: f64) -> Result<([f64; 3], f64)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), found: y.len() });
    }
    if x.len() < 3 {
        return Err(Error::Numerical("need at least 3 samples for a cosine fit".into()));
    }
    let design = Mat::<f64>::from_fn(x.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => (harmonic * x[i]).cos(),
        _ => (harmonic * x[i]).sin(),
    });
    let rhs = Mat::<f64>::from_fn(y.len(), 1, |i, _| y[i]);
    let coef = design.qr().solve_lstsq(&rhs);
    let (c0, c1, c2) = (coef[(0, 0)], coef[(1, 0)], coef[(2, 0)]);
    let resid: f64 = (0..x.len())
        .map(|i| {
            let f = c0 + c1 * (harmonic * x[i]).cos() + c2 * (harmonic * x[i]).sin();
            (y[i] - f).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rel = if norm > 0.0 { resid / norm } else { resid };
    // c1 cos + c2 sin = b cos(n x + phi) with b cos phi = c1, -b sin phi = c2.
    Ok(([c0, c1.hypot(c2), (-c2).atan2(c1)], rel))
}

/// `(max - min) / (max + min)`.
pub fn visibility(y: &[f64]) -> f64 {
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi + lo == 0.0 {
        0.0
    } else {
        (hi - lo) / (hi + lo)
    }
}

/// Distance between the 10% and 90% crossings of the first transition in
/// `y`, normalised to its own range, with linear interpolation between
/// samples. Never smaller than the local sample spacing.
pub fn edge_sharpness(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), found: y.len() });
    }
    if x.len() < 5 {
        return Err(Error::NoTransition(format!("{} samples, need at least 5", x.len())));
    }
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return Err(Error::NoTransition("series is flat".into()));
    }
    let t: Vec<f64> = y.iter().map(|v| (v - lo) / (hi - lo)).collect();
    let first_low = t.iter().position(|&v| v <= 0.1);
    let first_high = t.iter().position(|&v| v >= 0.9);
    let (Some(il), Some(ih)) = (first_low, first_high) else {
        return Err(Error::NoTransition("no 10%/90% crossings".into()));
    };
    // Orient the series so the transition rises.
    let u: Vec<f64> = if il < ih { t } else { t.iter().map(|v| 1.0 - v).collect() };
    let end = il.max(ih);
    let start = u[..end].iter().rposition(|&v| v <= 0.1).unwrap_or(0);
    let crossing = |level: f64| -> Option<f64> {
        (start..end).find_map(|k| {
            let (a, b) = (u[k], u[k + 1]);
            (a < level && b >= level || a <= level && b > level)
                .then(|| x[k] + (level - a) / (b - a) * (x[k + 1] - x[k]))
        })
    };
    let (Some(x10), Some(x90)) = (crossing(0.1), crossing(0.9)) else {
        return Err(Error::NoTransition("crossings not found".into()));
    };
    let spacing = (x[end] - x[end - 1]).abs();
    Ok((x90 - x10).abs().max(spacing))
}
