//! Gaussian wavepackets expanded over a [`ModeBasis`] and the photon states
//! built from them.

use std::fmt::Write as _;

use faer::Mat;
use num_complex::Complex64;

use crate::correlation::DetectorSpec;
use crate::error::{Error, Result};
use crate::grid::{Dimension, Grid};
use crate::modes::ModeBasis;

/// Below this captured fraction a projection is an error.
pub const CAPTURE_ERROR: f64 = 0.90;
/// Below this captured fraction a projection logs a warning.
pub const CAPTURE_WARN: f64 = 0.99;

/// Quasi-monochromatic Gaussian packet: amplitude envelope
/// `exp(-u²/(4 sx²)) exp(-v²/(4 w²))` times the carrier `exp(i wg u)`, where
/// `u` is the coordinate along `direction`, `v` the transverse one and
/// `sx = 1 / (2 spectral_std)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WavepacketSpec {
    pub center: [f64; 2],
    pub direction: [f64; 2],
    pub center_frequency: f64,
    pub spectral_std: f64,
    /// Transverse amplitude std; required in 2D, ignored in 1D.
    pub transverse_std: Option<f64>,
}

impl WavepacketSpec {
    pub fn along_x(center: f64, rightward: bool, center_frequency: f64, spectral_std: f64) -> Self {
        Self {
            center: [center, 0.0],
            direction: [if rightward { 1.0 } else { -1.0 }, 0.0],
            center_frequency,
            spectral_std,
            transverse_std: None,
        }
    }

    /// Longitudinal amplitude std in metres.
    pub fn spatial_std(&self) -> f64 {
        0.5 / self.spectral_std
    }

    fn unit_direction(&self) -> Result<[f64; 2]> {
        let norm = self.direction[0].hypot(self.direction[1]);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Geometry("packet direction must be nonzero".into()));
        }
        Ok([self.direction[0] / norm, self.direction[1] / norm])
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let (wg, sw) = (self.center_frequency, self.spectral_std);
        if !(wg.is_finite() && wg > 0.0) {
            return Err(Error::Geometry(format!("center frequency {wg} must be > 0")));
        }
        if !(sw > 0.0 && sw < wg / 3.0) {
            return Err(Error::Geometry(format!(
                "spectral std {sw} must lie in (0, {})",
                wg / 3.0
            )));
        }
        let dir = self.unit_direction()?;
        if !grid.contains(self.center) {
            return Err(Error::Geometry(format!(
                "packet center {:?} outside the grid",
                self.center
            )));
        }
        // The 4-sigma envelope (+-2 std) must fit inside one period of the box.
        let ext = grid.extent();
        let sx = self.spatial_std();
        match grid.dimension() {
            Dimension::One => {
                if 4.0 * sx > ext[0] {
                    return Err(Error::Geometry(format!(
                        "4-sigma envelope {} exceeds the domain length {}",
                        4.0 * sx,
                        ext[0]
                    )));
                }
            }
            Dimension::Two => {
                let w = self.transverse_std.ok_or_else(|| {
                    Error::Geometry("2D packets need a transverse std".into())
                })?;
                if !(w > 0.0) {
                    return Err(Error::Geometry(format!("transverse std {w} must be > 0")));
                }
                for a in 0..2 {
                    let span = 4.0 * (sx * dir[a].abs()).hypot(w * dir[1 - a].abs());
                    if span > ext[a] {
                        return Err(Error::Geometry(format!(
                            "4-sigma envelope {span} exceeds the domain extent {} on axis {a}",
                            ext[a]
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Samples the packet at every cell centre, using minimum-image distances
/// on the periodic box.
pub fn packet_profile(spec: &WavepacketSpec, grid: &Grid) -> Result<Vec<Complex64>> {
    spec.validate(grid)?;
    let dir = spec.unit_direction()?;
    let perp = [-dir[1], dir[0]];
    let sx = spec.spatial_std();
    let w = spec.transverse_std.unwrap_or(f64::INFINITY);
    let two_d = grid.dimension() == Dimension::Two;
    Ok((0..grid.dof())
        .map(|j| {
            let d = grid.periodic_delta(spec.center, grid.cell_center(j));
            let u = d[0] * dir[0] + d[1] * dir[1];
            let mut env = -(u * u) / (4.0 * sx * sx);
            if two_d {
                let v = d[0] * perp[0] + d[1] * perp[1];
                env -= v * v / (4.0 * w * w);
            }
            Complex64::from_polar(env.exp(), spec.center_frequency * u)
        })
        .collect())
}

/// Complex amplitudes `g_i` of a single photon over the retained modes,
/// normalised so that `sum |g_i|² = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAmplitudes(Vec<Complex64>);

impl SpectralAmplitudes {
    /// Wraps an already normalised vector.
    pub fn new(g: Vec<Complex64>) -> Result<Self> {
        let n2: f64 = g.iter().map(Complex64::norm_sqr).sum();
        if (n2 - 1.0).abs() > 1e-12 {
            return Err(Error::Numerical(format!("amplitudes have norm² {n2}, expected 1")));
        }
        Ok(Self(g))
    }

    /// Normalises `g`; fails on a (near) zero vector.
    pub fn normalized(g: Vec<Complex64>) -> Result<Self> {
        let n2: f64 = g.iter().map(Complex64::norm_sqr).sum();
        if !(n2.is_finite() && n2.sqrt() >= 1e-12) {
            return Err(Error::EmptyProjection);
        }
        let inv = 1.0 / n2.sqrt();
        Ok(Self(g.into_iter().map(|z| z * inv).collect()))
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Multiplies every amplitude by a unit phase `exp(i phi)`.
    pub fn with_phase(&self, phi: f64) -> Self {
        let p = Complex64::from_polar(1.0, phi);
        Self(self.0.iter().map(|z| z * p).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,re,im\n");
        for (i, z) in self.0.iter().enumerate() {
            let _ = writeln!(out, "{i},{:.16e},{:.16e}", z.re, z.im);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub amplitudes: SpectralAmplitudes,
    /// Fraction of the packet's `M`-norm carried by the retained modes.
    pub capture: f64,
}

/// `g_i ∝ sum_j eps_j phi_i(r_j) psi(r_j) dV`, normalised.
pub fn project_packet(basis: &ModeBasis, profile: &[Complex64]) -> Result<Projection> {
    let grid = basis.grid();
    let n = grid.dof();
    if profile.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: profile.len(),
        });
    }
    let dv = grid.cell_volume();
    let mass = basis.mass();
    let weighted = Mat::<f64>::from_fn(n, 2, |j, c| {
        let z = profile[j] * mass[j] * dv;
        if c == 0 {
            z.re
        } else {
            z.im
        }
    });
    let raw_mat = basis.modes().transpose() * &weighted;
    let raw: Vec<Complex64> = (0..basis.kept_count())
        .map(|i| Complex64::new(raw_mat.read(i, 0), raw_mat.read(i, 1)))
        .collect();
    let raw_norm2: f64 = raw.iter().map(Complex64::norm_sqr).sum();
    if !(raw_norm2.sqrt() >= 1e-12) {
        return Err(Error::EmptyProjection);
    }
    let total: f64 = profile
        .iter()
        .zip(mass)
        .map(|(z, m)| m * z.norm_sqr())
        .sum::<f64>()
        * dv
        * dv;
    let capture = raw_norm2 / total;
    if capture < CAPTURE_ERROR {
        return Err(Error::LowCapture(capture));
    }
    if capture < CAPTURE_WARN {
        log::warn!("retained modes capture {capture:.4} of the packet");
    }
    Ok(Projection {
        amplitudes: SpectralAmplitudes::normalized(raw)?,
        capture,
    })
}

/// Real-space field `sum_i g_i phi_i(r) exp(-i w_i t)` of a packet.
pub fn field_snapshot(basis: &ModeBasis, g: &SpectralAmplitudes, time: f64) -> Result<Vec<Complex64>> {
    let k = basis.kept_count();
    if g.len() != k {
        return Err(Error::LengthMismatch {
            expected: k,
            found: g.len(),
        });
    }
    let coeff = Mat::<f64>::from_fn(k, 2, |i, c| {
        let z = g.as_slice()[i] * Complex64::from_polar(1.0, -basis.omegas()[i] * time);
        if c == 0 {
            z.re
        } else {
            z.im
        }
    });
    let field = basis.modes() * &coeff;
    Ok((0..field.nrows())
        .map(|j| Complex64::new(field.read(j, 0), field.read(j, 1)))
        .collect())
}

/// `gamma = sum_i conj(a_i) b_i`.
pub fn overlap(a: &SpectralAmplitudes, b: &SpectralAmplitudes) -> Result<Complex64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(a.0.iter().zip(&b.0).map(|(x, y)| x.conj() * y).sum())
}

/// Positive-frequency field amplitude `sum_i c_i(r_det, t_det) g_i` of the
/// packet at a detection event.
pub fn detector_amplitude(
    basis: &ModeBasis,
    g: &SpectralAmplitudes,
    det: &DetectorSpec,
) -> Result<Complex64> {
    let row = basis.field_row(det.cell, det.time)?;
    dot_amplitude(&row, g)
}

pub(crate) fn dot_amplitude(row: &[Complex64], g: &SpectralAmplitudes) -> Result<Complex64> {
    if row.len() != g.len() {
        return Err(Error::LengthMismatch {
            expected: row.len(),
            found: g.len(),
        });
    }
    Ok(row.iter().zip(&g.0).map(|(c, x)| c * x).sum())
}

/// Two-path N00N input with a phase `theta` on the left branch:
/// `[(e^{i theta} A_L†)^N + (A_R†)^N] |0> / sqrt(2 N!)`.
#[derive(Debug, Clone)]
pub struct NoonStateSpec {
    photons: u32,
    left: SpectralAmplitudes,
    right: SpectralAmplitudes,
    theta: f64,
}

impl NoonStateSpec {
    pub fn new(
        photons: u32,
        left: SpectralAmplitudes,
        right: SpectralAmplitudes,
        theta: f64,
    ) -> Result<Self> {
        if photons == 0 || !photons.is_multiple_of(2) {
            return Err(Error::OddPhotonNumber(photons));
        }
        if left.len() != right.len() {
            return Err(Error::LengthMismatch {
                expected: left.len(),
                found: right.len(),
            });
        }
        Ok(Self {
            photons,
            left,
            right,
            theta,
        })
    }

    pub fn photons(&self) -> u32 {
        self.photons
    }

    pub fn left(&self) -> &SpectralAmplitudes {
        &self.left
    }

    pub fn right(&self) -> &SpectralAmplitudes {
        &self.right
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self {
            theta,
            ..self.clone()
        }
    }
}

/// Coherent-state input split over the same two packets.
#[derive(Debug, Clone)]
pub struct CoherentStateSpec {
    pub mean_photon_number: f64,
    pub left: SpectralAmplitudes,
    pub right: SpectralAmplitudes,
    pub theta: f64,
}

impl CoherentStateSpec {
    pub fn new(
        mean_photon_number: f64,
        left: SpectralAmplitudes,
        right: SpectralAmplitudes,
        theta: f64,
    ) -> Result<Self> {
        if !(mean_photon_number.is_finite() && mean_photon_number > 0.0) {
            return Err(Error::Numerical(format!(
                "mean photon number {mean_photon_number} must be > 0"
            )));
        }
        if left.len() != right.len() {
            return Err(Error::LengthMismatch {
                expected: left.len(),
                found: right.len(),
            });
        }
        Ok(Self {
            mean_photon_number,
            left,
            right,
            theta,
        })
    }
}
