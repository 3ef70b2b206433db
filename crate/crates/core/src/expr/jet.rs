use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

/// Largest jet order accepted by [`super::eval_jet`] and friends.
pub const MAX_JET_ORDER: usize = 64;

/// Logarithm with imaginary part in `(-π, π]`; `-1 - 0i` maps to `iπ`.
pub(crate) fn principal_ln(z: Complex64) -> Complex64 {
    let mut v = z.ln();
    if v.im == -std::f64::consts::PI {
        v.im = std::f64::consts::PI;
    }
    v
}

/// Truncated Taylor expansion `c_0 + c_1 h + ... + c_order h^order` about some point.
///
/// All arithmetic keeps the order fixed; terms beyond it are discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    coeffs: Vec<Complex64>,
}

impl Jet {
    pub fn constant(c: Complex64, order: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); order + 1];
        coeffs[0] = c;
        Jet { coeffs }
    }

    /// The identity jet `center + h`.
    pub fn variable(center: Complex64, order: usize) -> Self {
        let mut jet = Jet::constant(center, order);
        if order >= 1 {
            jet.coeffs[1] = Complex64::new(1.0, 0.0);
        }
        jet
    }

    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least one coefficient");
        Jet { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn value(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn scale(&self, s: Complex64) -> Jet {
        Jet {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Substitute `h -> s h`, i.e. multiply coefficient k by `s^k`.
    pub fn rescale_argument(&self, s: Complex64) -> Jet {
        let mut power = Complex64::new(1.0, 0.0);
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                let out = c * power;
                power *= s;
                out
            })
            .collect();
        Jet { coeffs }
    }

    /// Quotient; the caller guarantees a non-zero leading denominator coefficient.
    pub fn div(&self, rhs: &Jet) -> Jet {
        let n = self.coeffs.len();
        let b0 = rhs.coeffs[0];
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            let mut acc = self.coeffs[k];
            for i in 1..=k {
                acc -= rhs.coeffs[i] * out[k - i];
            }
            out[k] = acc / b0;
        }
        Jet { coeffs: out }
    }

    pub fn exp(&self) -> Jet {
        let n = self.coeffs.len();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        out[0] = self.coeffs[0].exp();
        for k in 1..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 1..=k {
                acc += self.coeffs[i] * out[k - i] * i as f64;
            }
            out[k] = acc / k as f64;
        }
        Jet { coeffs: out }
    }

    /// Principal logarithm; the caller guarantees a non-zero leading coefficient.
    pub fn ln(&self) -> Jet {
        let n = self.coeffs.len();
        let a0 = self.coeffs[0];
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        out[0] = principal_ln(a0);
        for k in 1..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 1..k {
                acc += out[i] * self.coeffs[k - i] * i as f64;
            }
            out[k] = (self.coeffs[k] - acc / k as f64) / a0;
        }
        Jet { coeffs: out }
    }

    pub fn sin_cos(&self) -> (Jet, Jet) {
        let n = self.coeffs.len();
        let mut s = vec![Complex64::new(0.0, 0.0); n];
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        s[0] = self.coeffs[0].sin();
        c[0] = self.coeffs[0].cos();
        for k in 1..n {
            let mut acc_s = Complex64::new(0.0, 0.0);
            let mut acc_c = Complex64::new(0.0, 0.0);
            for i in 1..=k {
                let ia = self.coeffs[i] * i as f64;
                acc_s += ia * c[k - i];
                acc_c += ia * s[k - i];
            }
            s[k] = acc_s / k as f64;
            c[k] = -acc_c / k as f64;
        }
        (Jet { coeffs: s }, Jet { coeffs: c })
    }

    /// Evaluate the truncated polynomial at offset `h` from the expansion point.
    pub fn eval_offset(&self, h: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * h + c)
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet {
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet {
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let n = self.coeffs.len();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().take(n - i).enumerate() {
                out[i + j] += a * b;
            }
        }
        Jet { coeffs: out }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn geometric_series_by_division() {
        let one = Jet::constant(r(1.0), 5);
        let x = Jet::variable(r(0.0), 5);
        let g = one.div(&(&one - &x));
        for c in g.coeffs() {
            assert!((c - r(1.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn log_inverts_exp() {
        let x = Jet::variable(r(0.3), 8);
        let back = x.exp().ln();
        for (a, b) in back.coeffs().iter().zip(x.coeffs()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn pythagorean_identity() {
        let x = Jet::variable(Complex64::new(0.2, -0.7), 10);
        let (s, c) = x.sin_cos();
        let one = &(&s * &s) + &(&c * &c);
        assert!((one.coeffs()[0] - r(1.0)).norm() < 1e-14);
        for k in 1..=10 {
            assert!(one.coeffs()[k].norm() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn rescale_and_eval_offset() {
        let x = Jet::variable(r(0.0), 4).exp();
        let y = x.rescale_argument(r(2.0));
        let approx = y.eval_offset(r(0.01));
        assert!((approx - r(0.02_f64.exp())).norm() < 1e-10);
    }
}
