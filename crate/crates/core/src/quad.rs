//! Adaptive Gauss-Kronrod quadrature for complex-valued integrands.

use num_complex::Complex64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
}

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        kron += s * WGK[i];
        if i % 2 == 1 {
            gauss += s * WG[i / 2];
        }
    }
    (kron * h, ((kron - gauss) * h).norm())
}

/// ∫_a^b f by globally adaptive bisection until the error estimate falls
/// below max(abs_tol, rel_tol·|value|).
pub fn integrate<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> QuadResult {
    let mut segs = vec![{
        let (v, e) = gk15(&f, a, b);
        (a, b, v, e)
    }];
    let mut evals = 15;
    for _ in 0..2000 {
        let total: Complex64 = segs.iter().map(|s| s.2).sum();
        let err: f64 = segs.iter().map(|s| s.3).sum();
        if err <= abs_tol.max(rel_tol * total.norm()) {
            break;
        }
        let (i, _) = segs.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).unwrap();
        let (sa, sb, _, _) = segs.swap_remove(i);
        let mid = 0.5 * (sa + sb);
        let (v1, e1) = gk15(&f, sa, mid);
        let (v2, e2) = gk15(&f, mid, sb);
        evals += 30;
        segs.push((sa, mid, v1, e1));
        segs.push((mid, sb, v2, e2));
    }
    segs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let vals: Vec<Complex64> = segs.iter().map(|s| s.2).collect();
    QuadResult { value: crate::arith::pairwise_sum_c(&vals), error: segs.iter().map(|s| s.3).sum(), evaluations: evals }
}

/// ∫_{-∞}^{∞} f for integrands decaying at least like |t|^{-2}, via t = u/(1-u²).
pub fn integrate_real_line<F: Fn(f64) -> Complex64>(f: F, abs_tol: f64, rel_tol: f64) -> QuadResult {
    integrate(
        |u| {
            let d = 1.0 - u * u;
            if d <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let t = u / d;
            let v = f(t);
            if v.norm() == 0.0 {
                return v;
            }
            v * ((1.0 + u * u) / (d * d))
        },
        -1.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

/// ∫_0^∞ f via y = u/(1-u).
pub fn integrate_half_line<F: Fn(f64) -> Complex64>(f: F, abs_tol: f64, rel_tol: f64) -> QuadResult {
    integrate(
        |u| {
            let d = 1.0 - u;
            if d <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let v = f(u / d);
            if v.norm() == 0.0 {
                return v;
            }
            v / (d * d)
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_and_oscillatory() {
        let r = integrate(|x| Complex64::new(x * x, 0.0), 0.0, 3.0, 1e-14, 1e-14);
        assert!((r.value.re - 9.0).abs() < 1e-12);
        let r = integrate(|x| Complex64::new(0.0, 30.0 * x).exp(), 0.0, 1.0, 1e-13, 1e-13);
        let exact = (Complex64::new(0.0, 30.0).exp() - 1.0) / Complex64::new(0.0, 30.0);
        assert!((r.value - exact).norm() < 1e-12);
    }

    #[test]
    fn infinite_ranges() {
        let r = integrate_real_line(|t| Complex64::new((-t * t).exp(), 0.0), 1e-13, 1e-13);
        assert!((r.value.re - PI.sqrt()).abs() < 1e-11);
        let r = integrate_real_line(|t| Complex64::new(1.0 / (1.0 + t * t), 0.0), 1e-12, 1e-12);
        assert!((r.value.re - PI).abs() < 1e-9);
        let r = integrate_half_line(|y| Complex64::new((-y).exp() * y, 0.0), 1e-13, 1e-13);
        assert!((r.value.re - 1.0).abs() < 1e-11);
    }
}
