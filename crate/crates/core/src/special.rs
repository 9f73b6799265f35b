//! Complex log-gamma and the completed archimedean factors Γ_ℝ, Γ_ℂ.

use std::f64::consts::PI;

use num_complex::Complex64;

const LN_2PI_HALF: f64 = 0.918_938_533_204_672_8;
const SHIFT_TO: f64 = 15.0;

// B_{2k} / (2k(2k-1)) for k = 1..8
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
];

/// ln Γ(z) on the branch continued from the real axis through upward shifts.
/// Returns None at the poles z = 0, -1, -2, ….
pub fn ln_gamma(z: Complex64) -> Option<Complex64> {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return None;
    }
    let mut shift = Complex64::new(0.0, 0.0);
    let mut w = z;
    while w.re < SHIFT_TO {
        shift += w.ln();
        w += 1.0;
    }
    let inv = 1.0 / w;
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut pow = inv;
    for c in STIRLING {
        series += pow * c;
        pow *= inv2;
    }
    Some((w - 0.5) * w.ln() - w + LN_2PI_HALF + series - shift)
}

pub fn gamma(z: Complex64) -> Option<Complex64> {
    ln_gamma(z).map(|l| l.exp())
}

/// ln Γ_ℝ(s) = -(s/2) ln π + ln Γ(s/2).
pub fn ln_gamma_r(s: Complex64) -> Option<Complex64> {
    ln_gamma(s / 2.0).map(|l| l - s / 2.0 * PI.ln())
}

/// ln Γ_ℂ(s) = ln 2 - s ln(2π) + ln Γ(s).
pub fn ln_gamma_c(s: Complex64) -> Option<Complex64> {
    ln_gamma(s).map(|l| l + 2f64.ln() - s * (2.0 * PI).ln())
}

/// Archimedean L-factor Π Γ_ℝ(s + a_i) · Π Γ_ℂ(s + b_j).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ArchFactor {
    pub gamma_r: Vec<Complex64>,
    pub gamma_c: Vec<Complex64>,
}

impl ArchFactor {
    pub fn ln_eval(&self, s: Complex64) -> Option<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for &a in &self.gamma_r {
            acc += ln_gamma_r(s + a)?;
        }
        for &b in &self.gamma_c {
            acc += ln_gamma_c(s + b)?;
        }
        Some(acc)
    }

    pub fn eval(&self, s: Complex64) -> Option<Complex64> {
        self.ln_eval(s).map(|l| l.exp())
    }

    /// Number of Γ_ℝ-equivalents (degree of the factor).
    pub fn degree(&self) -> usize {
        self.gamma_r.len() + 2 * self.gamma_c.len()
    }

    /// Rightmost real part of a pole: poles of Γ_ℝ(s + a) sit at s = -a - 2k,
    /// poles of Γ_ℂ(s + b) at s = -b - k.
    pub fn rightmost_pole(&self) -> f64 {
        self.gamma_r.iter().chain(self.gamma_c.iter()).map(|a| -a.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// All poles with real part ≥ `floor`.
    pub fn poles_above(&self, floor: f64) -> Vec<Complex64> {
        let mut out = Vec::new();
        for (list, step) in [(&self.gamma_r, 2.0), (&self.gamma_c, 1.0)] {
            for &a in list {
                let mut k = 0.0;
                while -a.re - k * step >= floor {
                    out.push(-a - k * step);
                    k += 1.0;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn real_values() {
        assert!((gamma(c(0.5, 0.0)).unwrap().re - PI.sqrt()).abs() < 1e-13);
        let mut fact = 1.0;
        for n in 1..20 {
            let g = gamma(c(n as f64, 0.0)).unwrap();
            assert!((g.re / fact - 1.0).abs() < 1e-12, "n = {n}");
            fact *= n as f64;
        }
        assert!((gamma(c(-0.5, 0.0)).unwrap().re + 2.0 * PI.sqrt()).abs() < 1e-12);
        assert!(ln_gamma(c(-3.0, 0.0)).is_none());
    }

    #[test]
    fn recurrence_and_reflection() {
        for &(x, y) in &[(0.3, 1.7), (-2.4, 0.5), (5.0, -30.0), (0.5, 80.0), (-7.3, -2.2)] {
            let z = c(x, y);
            let lhs = gamma(z + 1.0).unwrap();
            let rhs = z * gamma(z).unwrap();
            assert!((lhs / rhs - 1.0).norm() < 1e-11, "z = {z}");
            if y.abs() < 20.0 {
                let refl = gamma(z).unwrap() * gamma(1.0 - z).unwrap() * (PI * z).sin();
                assert!((refl / PI - 1.0).norm() < 1e-10, "z = {z}");
            }
        }
    }

    #[test]
    fn critical_line_modulus() {
        for t in [0.1, 1.0, 5.0, 20.0, 50.0] {
            let g = gamma(c(0.5, t)).unwrap();
            let expected = PI / (PI * t).cosh();
            assert!((g.norm_sqr() / expected - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn completed_factors() {
        // Γ_ℝ(1) = 1, Γ_ℂ(1) = 1/π, Γ_ℝ(s)Γ_ℝ(s+1) = Γ_ℂ(s)
        assert!((ln_gamma_r(c(1.0, 0.0)).unwrap().exp().re - 1.0).abs() < 1e-13);
        assert!((ln_gamma_c(c(1.0, 0.0)).unwrap().exp().re - 1.0 / PI).abs() < 1e-13);
        for s in [c(0.7, 2.0), c(3.0, -11.0)] {
            let lhs = ln_gamma_r(s).unwrap() + ln_gamma_r(s + 1.0).unwrap();
            let rhs = ln_gamma_c(s).unwrap();
            assert!((lhs.exp() / rhs.exp() - 1.0).norm() < 1e-11);
        }
    }

    #[test]
    fn arch_factor_poles() {
        let f = ArchFactor { gamma_r: vec![c(1.0, 0.0)], gamma_c: vec![c(11.0, 0.0)] };
        assert_eq!(f.rightmost_pole(), -1.0);
        let poles = f.poles_above(-5.0);
        assert!(poles.contains(&c(-1.0, 0.0)) && poles.contains(&c(-3.0, 0.0)));
        assert_eq!(f.degree(), 3);
    }
}
