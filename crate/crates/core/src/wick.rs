//! Vacuum expectation values of products of linear ladder forms by explicit
//! enumeration of full contractions.
//!
//! A form `a(u) = sum_i u_i a_i` or `a†(v) = sum_i v_i a_i†` stores the
//! coefficients exactly as they multiply the raw operators; any complex
//! conjugation belongs to whoever builds the form. The only nonvanishing
//! contraction in a vacuum expectation is an annihilation form with a
//! creation form to its right, `<0| a(u) a†(v) |0> = sum_i u_i v_i`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Longest sequence the enumerator accepts.
pub const MAX_FORMS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderKind {
    Creation,
    Annihilation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderForm {
    kind: LadderKind,
    coeffs: Vec<Complex64>,
}

impl LadderForm {
    pub fn new(kind: LadderKind, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Numerical("ladder form has non-finite coefficients".into()));
        }
        if coeffs.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            return Err(Error::Numerical("ladder form has zero norm".into()));
        }
        Ok(Self { kind, coeffs })
    }

    pub fn creation(coeffs: Vec<Complex64>) -> Result<Self> {
        Self::new(LadderKind::Creation, coeffs)
    }

    pub fn annihilation(coeffs: Vec<Complex64>) -> Result<Self> {
        Self::new(LadderKind::Annihilation, coeffs)
    }

    pub fn kind(&self) -> LadderKind {
        self.kind
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }
}

/// `<0| ops[0] ops[1] ... |0>` as the sum over every complete pairing of
/// annihilation forms with creation forms to their right.
pub fn vacuum_expectation(ops: &[LadderForm]) -> Result<Complex64> {
    if ops.len() > MAX_FORMS {
        return Err(Error::OracleSize(ops.len()));
    }
    let Some(first) = ops.first() else {
        return Ok(Complex64::new(1.0, 0.0));
    };
    let modes = first.coeffs.len();
    if let Some(bad) = ops.iter().find(|f| f.coeffs.len() != modes) {
        return Err(Error::LengthMismatch {
            expected: modes,
            found: bad.coeffs.len(),
        });
    }
    let creations = ops.iter().filter(|f| f.kind == LadderKind::Creation).count();
    if 2 * creations != ops.len() {
        return Ok(Complex64::new(0.0, 0.0));
    }

    // contraction[a][c] for annihilation position a left of creation c.
    let n = ops.len();
    let mut contraction = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for a in 0..n {
        if ops[a].kind != LadderKind::Annihilation {
            continue;
        }
        for c in a + 1..n {
            if ops[c].kind == LadderKind::Creation {
                contraction[a][c] = ops[a]
                    .coeffs
                    .iter()
                    .zip(&ops[c].coeffs)
                    .map(|(u, v)| u * v)
                    .sum();
            }
        }
    }

    let mut open = Vec::with_capacity(n / 2);
    Ok(enumerate(ops, &contraction, 0, &mut open))
}

/// Walks left to right; each creation form closes one of the annihilation
/// forms still open to its left.
fn enumerate(
    ops: &[LadderForm],
    contraction: &[Vec<Complex64>],
    pos: usize,
    open: &mut Vec<usize>,
) -> Complex64 {
    if pos == ops.len() {
        return if open.is_empty() {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    match ops[pos].kind {
        LadderKind::Annihilation => {
            open.push(pos);
            let v = enumerate(ops, contraction, pos + 1, open);
            open.pop();
            v
        }
        LadderKind::Creation => {
            let mut total = Complex64::new(0.0, 0.0);
            for k in 0..open.len() {
                let a = open.swap_remove(k);
                let w = contraction[a][pos];
                if w != Complex64::new(0.0, 0.0) {
                    total += w * enumerate(ops, contraction, pos + 1, open);
                }
                open.push(a);
                let last = open.len() - 1;
                open.swap(k, last);
            }
            total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dot(u: &[Complex64], v: &[Complex64]) -> Complex64 {
        u.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn single_contraction() {
        let u = vec![c(1.0, 0.5), c(-0.3, 2.0)];
        let v = vec![c(0.7, -1.0), c(0.1, 0.2)];
        let ops = [
            LadderForm::annihilation(u.clone()).unwrap(),
            LadderForm::creation(v.clone()).unwrap(),
        ];
        assert!((vacuum_expectation(&ops).unwrap() - dot(&u, &v)).norm() < 1e-15);
    }

    #[test]
    fn normal_ordered_pair_vanishes() {
        let ops = [
            LadderForm::creation(vec![c(1.0, 0.0)]).unwrap(),
            LadderForm::annihilation(vec![c(1.0, 0.0)]).unwrap(),
        ];
        assert_eq!(vacuum_expectation(&ops).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn two_by_two_counts_both_pairings() {
        let u = vec![c(0.3, 0.1), c(1.2, -0.4), c(0.0, 0.9)];
        let v = vec![c(-0.5, 0.2), c(0.8, 0.0), c(0.3, 0.3)];
        let a = LadderForm::annihilation(u.clone()).unwrap();
        let cr = LadderForm::creation(v.clone()).unwrap();
        let ops = [a.clone(), a, cr.clone(), cr];
        let want = 2.0 * dot(&u, &v) * dot(&u, &v);
        assert!((vacuum_expectation(&ops).unwrap() - want).norm() < 1e-14);
    }

    #[test]
    fn fock_norm_is_factorial() {
        // <0| a^n (a†)^n |0> = n! for a single normalised mode.
        for n in 1..=8usize {
            let mut ops = vec![LadderForm::annihilation(vec![c(1.0, 0.0)]).unwrap(); n];
            ops.extend(vec![LadderForm::creation(vec![c(1.0, 0.0)]).unwrap(); n]);
            let fact: f64 = (1..=n).map(|k| k as f64).product();
            assert!((vacuum_expectation(&ops).unwrap().re - fact).abs() < 1e-9 * fact);
        }
    }

    #[test]
    fn unbalanced_sequence_is_zero() {
        let ops = [
            LadderForm::annihilation(vec![c(1.0, 0.0)]).unwrap(),
            LadderForm::annihilation(vec![c(1.0, 0.0)]).unwrap(),
            LadderForm::creation(vec![c(1.0, 0.0)]).unwrap(),
        ];
        assert_eq!(vacuum_expectation(&ops).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn guards() {
        let f = LadderForm::annihilation(vec![c(1.0, 0.0)]).unwrap();
        assert!(matches!(
            vacuum_expectation(&vec![f.clone(); 17]),
            Err(Error::OracleSize(17))
        ));
        let g = LadderForm::creation(vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        assert!(vacuum_expectation(&[f, g]).is_err());
        assert!(LadderForm::creation(vec![c(0.0, 0.0)]).is_err());
        assert!(LadderForm::creation(vec![c(f64::NAN, 0.0)]).is_err());
    }
}
