//! N-th order correlation function of two-path N00N inputs.
//!
//! With `p = N/2` detections per detector, let `a_zX` be the amplitude of
//! packet `X` (left/right) at detector `z` and `gamma = <g_L, g_R>`. Normal
//! ordering the field products against the two-branch state leaves
//!
//! ```text
//! numerator = N!/2 |e^{iN theta} (a_aL a_bL)^p + (a_aR a_bR)^p|²
//! denom_z   = N!/(2 p!) [|a_zL|^2p + |a_zR|^2p
//!                        + 2 Re(e^{iN theta} conj(a_zR)^p a_zL^p conj(gamma)^p)]
//! norm      = 1 + Re(e^{iN theta} conj(gamma)^N)
//! value     = numerator * norm / (denom_a * denom_b)
//! ```
//!
//! [`noon_cf_oracle`] evaluates the same four quantities by brute-force Wick
//! contraction of the explicit ladder-operator products.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::modes::ModeBasis;
use crate::wavepackets::{dot_amplitude, overlap, CoherentStateSpec, NoonStateSpec, SpectralAmplitudes};
use crate::wick::{vacuum_expectation, LadderForm};

/// Default regularisation threshold relative to the sweep peak.
pub const DEFAULT_EPS_REG: f64 = 1e-9;

/// Imaginary parts above this fraction of the magnitude are inconsistent.
const IMAG_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FieldComponent {
    X,
    Y,
    Z,
}

/// A photodetection event: cell, time and the number of photons it counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpec {
    pub cell: usize,
    pub time: f64,
    /// Scalar models carry a single (z) component.
    pub component: FieldComponent,
    pub fold: u32,
}

impl DetectorSpec {
    pub fn new(cell: usize, time: f64, fold: u32) -> Self {
        Self {
            cell,
            time,
            component: FieldComponent::Z,
            fold,
        }
    }
}

/// Amplitudes of the left and right packets at one detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchAmplitudes {
    pub left: Complex64,
    pub right: Complex64,
}

impl BranchAmplitudes {
    pub fn from_field(field: &[Complex64], left: &SpectralAmplitudes, right: &SpectralAmplitudes) -> Result<Self> {
        Ok(Self {
            left: dot_amplitude(field, left)?,
            right: dot_amplitude(field, right)?,
        })
    }
}

/// Unnormalised pieces of the correlation function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CfTerms {
    pub numerator: f64,
    pub denom_alpha: f64,
    pub denom_beta: f64,
    pub state_norm: f64,
}

impl CfTerms {
    /// Componentwise sum, used for incoherent pixel sums over a bucket.
    pub fn accumulate_alpha(&mut self, other: &CfTerms) {
        self.numerator += other.numerator;
        self.denom_alpha += other.denom_alpha;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CfComponents {
    pub numerator: f64,
    pub denom_alpha: f64,
    pub denom_beta: f64,
    pub state_norm: f64,
    pub value: f64,
    pub regularized: bool,
}

/// Zero-over-zero handling. A denominator is "vanishing" below
/// `eps * scale_z`; the numerator below `eps * scale_alpha * scale_beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regularization {
    pub eps: f64,
    pub scale_alpha: f64,
    pub scale_beta: f64,
}

impl Regularization {
    pub fn new(eps: f64, scale_alpha: f64, scale_beta: f64) -> Self {
        Self {
            eps,
            scale_alpha,
            scale_beta,
        }
    }

    /// Unit scales, for isolated evaluations.
    pub fn absolute(eps: f64) -> Self {
        Self::new(eps, 1.0, 1.0)
    }

    /// One common scale for both detectors: the largest single-detector
    /// response anywhere in the sweep. A detector that is dark at every
    /// point still reads as vanishing against the other one.
    pub fn from_peaks<'a>(eps: f64, terms: impl IntoIterator<Item = &'a CfTerms>) -> Self {
        let peak = terms
            .into_iter()
            .fold(0.0f64, |m, t| m.max(t.denom_alpha).max(t.denom_beta));
        Self::new(eps, peak, peak)
    }
}

impl Default for Regularization {
    fn default() -> Self {
        Self::absolute(DEFAULT_EPS_REG)
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn check_folds(state: &NoonStateSpec, alpha: &DetectorSpec, beta: &DetectorSpec) -> Result<()> {
    let p = state.photons() / 2;
    if alpha.fold != p || beta.fold != p {
        return Err(Error::FoldMismatch {
            alpha: alpha.fold,
            beta: beta.fold,
            expected: p,
        });
    }
    Ok(())
}

/// Closed-form terms from the packet amplitudes at both detectors.
pub fn noon_terms(
    photons: u32,
    theta: f64,
    gamma: Complex64,
    alpha: BranchAmplitudes,
    beta: BranchAmplitudes,
) -> Result<CfTerms> {
    if photons == 0 || !photons.is_multiple_of(2) {
        return Err(Error::OddPhotonNumber(photons));
    }
    let p = photons / 2;
    let pi = p as i32;
    let n_fact = factorial(photons);
    let phase = Complex64::from_polar(1.0, f64::from(photons) * theta);
    let gamma_p = gamma.conj().powi(pi);

    let branch = phase * (alpha.left * beta.left).powi(pi) + (alpha.right * beta.right).powi(pi);
    let numerator = 0.5 * n_fact * branch.norm_sqr();

    let denom = |a: BranchAmplitudes| {
        let cross = phase * a.right.conj().powi(pi) * a.left.powi(pi) * gamma_p;
        0.5 * n_fact / factorial(p)
            * (a.left.norm_sqr().powi(pi) + a.right.norm_sqr().powi(pi) + 2.0 * cross.re)
    };
    let state_norm = 1.0 + (phase * gamma.conj().powi(photons as i32)).re;
    Ok(CfTerms {
        numerator,
        denom_alpha: denom(alpha),
        denom_beta: denom(beta),
        state_norm,
    })
}

/// Applies the normalisation and the zero-over-zero convention.
pub fn finish(terms: CfTerms, reg: &Regularization) -> Result<CfComponents> {
    let CfTerms {
        numerator,
        denom_alpha,
        denom_beta,
        state_norm,
    } = terms;
    let small_a = denom_alpha < reg.eps * reg.scale_alpha;
    let small_b = denom_beta < reg.eps * reg.scale_beta;
    let small_num = numerator < reg.eps * reg.scale_alpha * reg.scale_beta;
    let indeterminate = || Error::IndeterminateCorrelation {
        numerator,
        denom_alpha,
        denom_beta,
    };
    let (value, regularized) = if small_num && (small_a || small_b) {
        (1.0, true)
    } else if (small_a && small_b) || denom_alpha <= 0.0 || denom_beta <= 0.0 {
        return Err(indeterminate());
    } else {
        (numerator * state_norm / (denom_alpha * denom_beta), false)
    };
    if !value.is_finite() {
        return Err(indeterminate());
    }
    Ok(CfComponents {
        numerator,
        denom_alpha,
        denom_beta,
        state_norm,
        value,
        regularized,
    })
}

/// Closed-form terms for detection events given as field-coefficient rows
/// (`c_i(r, t)` for every mode).
pub fn noon_terms_from_fields(
    state: &NoonStateSpec,
    field_alpha: &[Complex64],
    field_beta: &[Complex64],
) -> Result<CfTerms> {
    let gamma = overlap(state.left(), state.right())?;
    noon_terms(
        state.photons(),
        state.theta(),
        gamma,
        BranchAmplitudes::from_field(field_alpha, state.left(), state.right())?,
        BranchAmplitudes::from_field(field_beta, state.left(), state.right())?,
    )
}

/// Normalised N-th order correlation function of a N00N input.
pub fn noon_cf(
    basis: &ModeBasis,
    state: &NoonStateSpec,
    det_alpha: &DetectorSpec,
    det_beta: &DetectorSpec,
    reg: &Regularization,
) -> Result<CfComponents> {
    check_folds(state, det_alpha, det_beta)?;
    let fa = basis.field_row(det_alpha.cell, det_alpha.time)?;
    let fb = basis.field_row(det_beta.cell, det_beta.time)?;
    finish(noon_terms_from_fields(state, &fa, &fb)?, reg)
}

/// Largest photon number the Wick oracle accepts (4N ladder forms).
pub const ORACLE_MAX_PHOTONS: u32 = 4;

/// Brute-force terms: expands both branches of the state and contracts the
/// explicit operator products with [`vacuum_expectation`].
pub fn noon_terms_oracle(
    state: &NoonStateSpec,
    field_alpha: &[Complex64],
    field_beta: &[Complex64],
) -> Result<CfTerms> {
    let n = state.photons();
    if n > ORACLE_MAX_PHOTONS {
        return Err(Error::OracleSize(4 * n as usize));
    }
    let p = (n / 2) as usize;
    let n = n as usize;
    let phases = [Complex64::from_polar(1.0, state.theta()), Complex64::new(1.0, 0.0)];
    let branches = [state.left(), state.right()];

    let scaled = |g: &SpectralAmplitudes, s: Complex64| -> Vec<Complex64> {
        g.as_slice().iter().map(|z| z * s).collect()
    };
    let conj = |v: &[Complex64]| -> Vec<Complex64> { v.iter().map(|z| z.conj()).collect() };
    let mut bras = Vec::new();
    let mut kets = Vec::new();
    for (g, s) in branches.iter().zip(phases) {
        let ket = scaled(g, s);
        bras.push(LadderForm::annihilation(conj(&ket))?);
        kets.push(LadderForm::creation(ket)?);
    }
    let e_a = LadderForm::annihilation(field_alpha.to_vec())?;
    let e_b = LadderForm::annihilation(field_beta.to_vec())?;
    let e_a_dag = LadderForm::creation(conj(field_alpha))?;
    let e_b_dag = LadderForm::creation(conj(field_beta))?;

    let norm = 1.0 / (2.0 * factorial(n as u32));
    let expect = |quantity: &'static str, middle: &[LadderForm]| -> Result<f64> {
        let mut total = Complex64::new(0.0, 0.0);
        for bra in &bras {
            for ket in &kets {
                let mut seq = vec![bra.clone(); n];
                seq.extend_from_slice(middle);
                seq.extend(std::iter::repeat_n(ket.clone(), n));
                total += vacuum_expectation(&seq)?;
            }
        }
        let z = total * norm;
        if z.im.abs() > IMAG_TOLERANCE * z.norm().max(f64::MIN_POSITIVE) && z.im.abs() > 1e-300 {
            return Err(Error::ImaginaryResidue {
                quantity,
                real: z.re,
                imag: z.im,
            });
        }
        Ok(z.re)
    };

    let rep = |f: &LadderForm| vec![f.clone(); p];
    let numerator_ops: Vec<LadderForm> = [rep(&e_a_dag), rep(&e_b_dag), rep(&e_b), rep(&e_a)].concat();
    let denom_a_ops = [rep(&e_a_dag), rep(&e_a)].concat();
    let denom_b_ops = [rep(&e_b_dag), rep(&e_b)].concat();
    Ok(CfTerms {
        numerator: expect("numerator", &numerator_ops)?,
        denom_alpha: expect("alpha denominator", &denom_a_ops)?,
        denom_beta: expect("beta denominator", &denom_b_ops)?,
        state_norm: expect("state norm", &[])?,
    })
}

/// Oracle counterpart of [`noon_cf`].
pub fn noon_cf_oracle(
    basis: &ModeBasis,
    state: &NoonStateSpec,
    det_alpha: &DetectorSpec,
    det_beta: &DetectorSpec,
    reg: &Regularization,
) -> Result<CfComponents> {
    check_folds(state, det_alpha, det_beta)?;
    let fa = basis.field_row(det_alpha.cell, det_alpha.time)?;
    let fb = basis.field_row(det_beta.cell, det_beta.time)?;
    finish(noon_terms_oracle(state, &fa, &fb)?, reg)
}

/// Classical interference intensity `n |e^{i theta} a_L + a_R|²` of a
/// coherent input at one detector.
pub fn coherent_baseline(basis: &ModeBasis, state: &CoherentStateSpec, det: &DetectorSpec) -> Result<f64> {
    let field = basis.field_row(det.cell, det.time)?;
    let amps = BranchAmplitudes::from_field(&field, &state.left, &state.right)?;
    Ok(coherent_intensity(state.mean_photon_number, state.theta, amps))
}

pub fn coherent_intensity(mean_photon_number: f64, theta: f64, amps: BranchAmplitudes) -> f64 {
    mean_photon_number * (Complex64::from_polar(1.0, theta) * amps.left + amps.right).norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn amps(l: Complex64, r: Complex64) -> BranchAmplitudes {
        BranchAmplitudes { left: l, right: r }
    }

    #[test]
    fn equal_branches_follow_one_plus_cos() {
        let a = amps(c(0.6, 0.0), c(0.6, 0.0));
        let reg = Regularization::absolute(1e-12);
        for n in [2u32, 4, 6] {
            let v0 = finish(noon_terms(n, 0.0, c(0.0, 0.0), a, a).unwrap(), &reg).unwrap().value;
            for k in 0..12 {
                let theta = k as f64 * PI / 12.0;
                let v = finish(noon_terms(n, theta, c(0.0, 0.0), a, a).unwrap(), &reg).unwrap().value;
                let want = v0 * (1.0 + (f64::from(n) * theta).cos()) / 2.0;
                assert!((v - want).abs() < 1e-12 * v0);
            }
        }
    }

    #[test]
    fn blocked_paths_zero_numerator() {
        let alpha = amps(c(0.0, 0.0), c(0.3, 0.1));
        let beta = amps(c(0.2, -0.4), c(0.0, 0.0));
        let t = noon_terms(4, 0.3, c(0.01, 0.0), alpha, beta).unwrap();
        assert_eq!(t.numerator, 0.0);
        assert!(t.denom_alpha > 0.0 && t.denom_beta > 0.0);
        let v = finish(t, &Regularization::absolute(1e-12)).unwrap();
        assert_eq!(v.value, 0.0);
        assert!(!v.regularized);
    }

    #[test]
    fn zero_over_zero_is_one() {
        let dark = amps(c(0.0, 0.0), c(0.0, 0.0));
        let lit = amps(c(0.5, 0.0), c(0.5, 0.0));
        let t = noon_terms(2, 0.0, c(0.0, 0.0), dark, lit).unwrap();
        let v = finish(t, &Regularization::absolute(1e-9)).unwrap();
        assert_eq!(v.value, 1.0);
        assert!(v.regularized);
        let t = noon_terms(2, 0.0, c(0.0, 0.0), dark, dark).unwrap();
        let v = finish(t, &Regularization::absolute(1e-9)).unwrap();
        assert!(v.regularized && v.value == 1.0);
    }

    #[test]
    fn vanishing_denominators_with_numerator_is_an_error() {
        let t = CfTerms {
            numerator: 1.0,
            denom_alpha: 0.0,
            denom_beta: 0.0,
            state_norm: 1.0,
        };
        assert!(matches!(
            finish(t, &Regularization::absolute(1e-9)),
            Err(Error::IndeterminateCorrelation { .. })
        ));
    }

    #[test]
    fn odd_photon_number_rejected() {
        let a = amps(c(1.0, 0.0), c(1.0, 0.0));
        assert!(matches!(noon_terms(3, 0.0, c(0.0, 0.0), a, a), Err(Error::OddPhotonNumber(3))));
    }

    #[test]
    fn state_norm_with_identical_packets() {
        let g = SpectralAmplitudes::normalized(vec![c(1.0, 0.0), c(0.0, 1.0), c(0.5, 0.5)]).unwrap();
        let state = NoonStateSpec::new(2, g.clone(), g, 0.0).unwrap();
        let f = vec![c(0.2, 0.0), c(0.1, 0.3), c(-0.4, 0.1)];
        let closed = noon_terms_from_fields(&state, &f, &f).unwrap();
        let oracle = noon_terms_oracle(&state, &f, &f).unwrap();
        assert!((closed.state_norm - 2.0).abs() < 1e-14);
        assert!((oracle.state_norm - 2.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_matches_closed_form_small_case() {
        let gl = SpectralAmplitudes::normalized(vec![c(0.3, 0.2), c(-0.7, 0.1), c(0.2, -0.5)]).unwrap();
        let gr = SpectralAmplitudes::normalized(vec![c(0.1, 0.9), c(0.4, 0.0), c(-0.2, 0.3)]).unwrap();
        let fa = vec![c(0.5, -0.2), c(0.1, 0.7), c(-0.3, 0.3)];
        let fb = vec![c(-0.6, 0.1), c(0.2, 0.2), c(0.9, -0.4)];
        for n in [2u32, 4] {
            let state = NoonStateSpec::new(n, gl.clone(), gr.clone(), 0.77).unwrap();
            let a = noon_terms_from_fields(&state, &fa, &fb).unwrap();
            let b = noon_terms_oracle(&state, &fa, &fb).unwrap();
            for (x, y) in [
                (a.numerator, b.numerator),
                (a.denom_alpha, b.denom_alpha),
                (a.denom_beta, b.denom_beta),
                (a.state_norm, b.state_norm),
            ] {
                assert!((x - y).abs() <= 1e-10 * y.abs(), "N={n}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn oracle_size_guard() {
        let g = SpectralAmplitudes::normalized(vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let state = NoonStateSpec::new(6, g.clone(), g, 0.0).unwrap();
        let f = vec![c(1.0, 0.0), c(1.0, 0.0)];
        assert!(matches!(noon_terms_oracle(&state, &f, &f), Err(Error::OracleSize(24))));
    }

    #[test]
    fn coherent_intensity_fringe() {
        let a = amps(c(0.5, 0.0), c(0.5, 0.0));
        for k in 0..8 {
            let theta = k as f64 * PI / 4.0;
            let i = coherent_intensity(3.0, theta, a);
            assert!((i - 3.0 * 0.5 * (1.0 + theta.cos())).abs() < 1e-14);
        }
        let one_sided = amps(c(0.0, 0.0), c(0.4, 0.2));
        let i0 = coherent_intensity(1.0, 0.0, one_sided);
        assert!((coherent_intensity(1.0, 2.1, one_sided) - i0).abs() < 1e-15);
    }

    #[test]
    fn dark_detector_regularizes_against_the_other() {
        let dark = |num: f64, a: f64| CfTerms {
            numerator: num,
            denom_alpha: a,
            denom_beta: 0.5,
            state_norm: 1.0,
        };
        let sweep = [dark(1e-30, 1e-20), dark(2e-30, 3e-20)];
        let reg = Regularization::from_peaks(1e-9, &sweep);
        assert_eq!((reg.scale_alpha, reg.scale_beta), (0.5, 0.5));
        for t in sweep {
            let c = finish(t, &reg).unwrap();
            assert!(c.regularized && c.value == 1.0);
        }
    }
}
