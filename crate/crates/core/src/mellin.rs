//! Archimedean Mellin transforms on ℝ^×, the dual kernel g*_∞ and the
//! coefficient function λ_∞.
//!
//! Conventions: ĝ(s, η_m) = ∫_{ℝ^×} g(y) sgn(y)^m |y|^s d^×y with d^×y = dy/|y|,
//! and g(y) = (1/2) Σ_m ∫_{(σ)} ĝ(s, η_m) sgn(y)^m |y|^{-s} ds/2πi.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::special::ArchFactor;

pub const C_R: f64 = 0.5;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Even test profiles on ℝ^×.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    /// exp(1 - 1/(1 - z²)), z = (|y| - center)/radius, radius < center.
    Bump { center: f64, radius: f64 },
    /// exp(-(log|y|)²/(2w²)).
    LogGaussian { width: f64 },
    /// exp(-π y²), whose transform is Γ_ℝ(s).
    Gaussian,
    /// |y|^{-β} on |y| < 1/2, smoothly cut to 0 on [1/2, 2].
    Coda { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchMellinProfile {
    pub kind: ProfileKind,
    /// The profile is y ↦ g(scale·y).
    pub scale: f64,
    pub amplitude: f64,
}

fn smooth_step(t: f64) -> f64 {
    // 0 for t ≤ 0, 1 for t ≥ 1
    let f = |x: f64| if x <= 0.0 { 0.0 } else { (-1.0 / x).exp() };
    let a = f(t);
    let b = f(1.0 - t);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

impl ArchMellinProfile {
    pub fn new(kind: ProfileKind) -> Result<Self> {
        match kind {
            ProfileKind::Bump { center, radius } if !(radius > 0.0 && radius < center) => {
                return Err(Error::Unsupported("bump needs 0 < radius < center".into()))
            }
            ProfileKind::LogGaussian { width } if width <= 0.0 => {
                return Err(Error::Unsupported("width must be positive".into()))
            }
            ProfileKind::Coda { beta } if !(beta > 0.0 && beta < 0.5) => {
                return Err(Error::Unsupported("coda profile needs 0 < β < 1/2".into()))
            }
            _ => {}
        }
        Ok(ArchMellinProfile { kind, scale: 1.0, amplitude: 1.0 })
    }

    pub fn scaled(self, scale: f64) -> Self {
        ArchMellinProfile { scale: self.scale * scale, ..self }
    }

    pub fn times(self, a: f64) -> Self {
        ArchMellinProfile { amplitude: self.amplitude * a, ..self }
    }

    fn base(&self, y: f64) -> f64 {
        let y = y.abs();
        if y == 0.0 {
            return 0.0;
        }
        match self.kind {
            ProfileKind::Bump { center, radius } => {
                let z = (y - center) / radius;
                if z.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - z * z)).exp()
                }
            }
            ProfileKind::LogGaussian { width } => {
                let l = y.ln();
                (-l * l / (2.0 * width * width)).exp()
            }
            ProfileKind::Gaussian => (-PI * y * y).exp(),
            ProfileKind::Coda { beta } => y.powf(-beta) * smooth_step((2.0 - y) / 1.5),
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.amplitude * self.base(self.scale * y)
    }

    /// Left edge of the half-plane where the defining integral converges.
    pub fn strip_left(&self) -> f64 {
        match self.kind {
            ProfileKind::Bump { .. } | ProfileKind::LogGaussian { .. } => f64::NEG_INFINITY,
            ProfileKind::Gaussian => 0.0,
            ProfileKind::Coda { beta } => beta,
        }
    }

    /// Support of the base profile on (0, ∞), when bounded.
    fn support(&self) -> Option<(f64, f64)> {
        match self.kind {
            ProfileKind::Bump { center, radius } => Some((center - radius, center + radius)),
            ProfileKind::Coda { .. } => Some((0.0, 2.0)),
            _ => None,
        }
    }

    /// M(s) = ∫_0^∞ g(y) y^{s-1} dy, closed form or quadrature, continued
    /// meromorphically for the coda profile.
    pub fn mellin_half(&self, s: Complex64) -> Result<Complex64> {
        let base = match self.kind {
            ProfileKind::LogGaussian { width } => (2.0 * PI).sqrt() * width * (width * width * s * s / 2.0).exp(),
            ProfileKind::Gaussian => {
                if s.re <= 0.0 {
                    return Err(Error::StripViolation(format!("Re s = {} ≤ 0", s.re)));
                }
                // (1/2) π^{-s/2} Γ(s/2)
                0.5 * crate::special::ln_gamma_r(s).expect("Re s > 0").exp()
            }
            ProfileKind::Coda { beta } => {
                if (s - beta).norm() < 1e-300 {
                    return Err(Error::PoleAt(format!("{s}")));
                }
                // ∫_0^{1/2} y^{s-β-1} dy + ∫_{1/2}^{2} y^{s-β-1} ρ(y) dy
                let head = (-(s - beta) * 2f64.ln()).exp() / (s - beta);
                let tail = quad::integrate(
                    |y| ((s - beta - 1.0) * y.ln()).exp() * smooth_step((2.0 - y) / 1.5),
                    0.5,
                    2.0,
                    1e-15,
                    1e-13,
                )
                .value;
                head + tail
            }
            ProfileKind::Bump { .. } => self.mellin_half_numeric_base(s)?,
        };
        Ok(self.amplitude * (-s * self.scale.ln()).exp() * base)
    }

    fn mellin_half_numeric_base(&self, s: Complex64) -> Result<Complex64> {
        if s.re <= self.strip_left() {
            return Err(Error::StripViolation(format!("Re s = {} outside the strip", s.re)));
        }
        let f = |y: f64| {
            if y <= 0.0 {
                return c(0.0, 0.0);
            }
            ((s - 1.0) * y.ln()).exp() * self.base(y)
        };
        let v = match self.support() {
            Some((a, b)) => {
                // split at 1/2 for the coda singularity at 0
                if a == 0.0 {
                    let head = quad::integrate_half_line(|u| f(0.5 * (-u).exp()) * (0.5 * (-u).exp()), 1e-15, 1e-13);
                    head.value + quad::integrate(f, 0.5, b, 1e-15, 1e-13).value
                } else {
                    quad::integrate(f, a, b, 1e-15, 1e-13).value
                }
            }
            None => {
                // log coordinates
                quad::integrate_real_line(
                    |u| {
                        let b = self.base(u.exp());
                        if b == 0.0 {
                            c(0.0, 0.0)
                        } else {
                            (s * u).exp() * b
                        }
                    },
                    1e-15,
                    1e-13,
                )
                .value
            }
        };
        Ok(v)
    }

    /// M(s) by direct quadrature (valid inside the strip only).
    pub fn mellin_half_numeric(&self, s: Complex64) -> Result<Complex64> {
        Ok(self.amplitude * (-s * self.scale.ln()).exp() * self.mellin_half_numeric_base(s)?)
    }

    /// ĝ(s, η_m); zero for odd m since every profile is even.
    pub fn arch_mellin(&self, s: Complex64, m: u8) -> Result<Complex64> {
        if !matches!(self.kind, ProfileKind::Coda { .. }) && s.re <= self.strip_left() {
            return Err(Error::StripViolation(format!("Re s = {} outside the strip", s.re)));
        }
        if m % 2 == 1 {
            return Ok(c(0.0, 0.0));
        }
        Ok(2.0 * self.mellin_half(s)?)
    }

    /// (1/2)∫_{(σ)} ĝ(s, η_0)|y|^{-s} ds/2πi.
    pub fn inverse(&self, y: f64, sigma: f64) -> Result<Complex64> {
        self.arch_mellin(c(sigma, 0.0), 0)?;
        if let ProfileKind::Bump { center, radius } = self.kind {
            return self.inverse_compact(y, sigma, (center - radius) / self.scale, (center + radius) / self.scale);
        }
        let ly = y.abs().ln();
        let r = quad::integrate_real_line(
            |t| {
                let s = c(sigma, t);
                let v = self.arch_mellin(s, 0).unwrap_or(c(0.0, 0.0));
                C_R * v * (-s * ly).exp() / (2.0 * PI)
            },
            1e-13,
            1e-12,
        );
        Ok(r.value)
    }

    /// Trapezoid rule in t for a profile supported in [lo, hi]. In u = log y the
    /// integrand is the Fourier transform of g(e^u)e^{σu}; once 2π/h exceeds the
    /// distance from log y to either end of the support, every Poisson alias
    /// misses it and only the truncation in t is left.
    fn inverse_compact(&self, y: f64, sigma: f64, lo: f64, hi: f64) -> Result<Complex64> {
        let ly = y.abs().ln();
        let (la, lb) = (lo.ln(), hi.ln());
        let reach = (ly - la).abs().max((lb - ly).abs());
        let h = 2.0 * PI / (1.01 * reach + 0.05);
        // M(σ + it)|y|^{-σ-it} = |y|^{-σ} ∫ G(u) e^{it(u - log y)} du with G(u) = g(e^u)e^{σu};
        // G is flat at both ends, so the trapezoid rule in u converges faster than any power
        let n = 8192;
        let du = (lb - la) / n as f64;
        let weight: Vec<f64> = (1..n)
            .map(|j| {
                let u = la + j as f64 * du;
                self.eval(u.exp()) * (sigma * u).exp() * du
            })
            .collect();
        let rot: Vec<Complex64> = (1..n).map(|j| Complex64::from_polar(1.0, h * (la + j as f64 * du - ly))).collect();
        let mut phase = vec![c(1.0, 0.0); n - 1];
        let damp = (-sigma * ly).exp();
        let term = |phase: &[Complex64]| -> Complex64 {
            damp * weight.iter().zip(phase).map(|(w, p)| w * p).sum::<Complex64>()
        };
        let t0 = term(&phase);
        let floor = 1e-14 * t0.norm();
        let mut acc = t0.re;
        let mut quiet = 0;
        for k in 1..=20_000u32 {
            if k as f64 * h * du > 2.0 {
                break;
            }
            phase.iter_mut().zip(&rot).for_each(|(p, r)| *p *= r);
            let v = term(&phase);
            // M(σ - it) is the conjugate of M(σ + it)
            acc += 2.0 * v.re;
            quiet = if v.norm() <= floor { quiet + 1 } else { 0 };
            if quiet == 8 {
                return Ok(c(acc * h / (2.0 * PI), 0.0));
            }
        }
        Err(Error::NonConvergent("Mellin inversion did not settle before the grid's Nyquist limit".into()))
    }
}

/// γ(1-2s) = L_∞(2s, π̃)/L_∞(1-2s, π) for the archimedean sym² factor.
pub fn arch_gamma_ratio(arch: &ArchFactor, s: Complex64) -> Option<Complex64> {
    let dual = ArchFactor {
        gamma_r: arch.gamma_r.iter().map(|a| a.conj()).collect(),
        gamma_c: arch.gamma_c.iter().map(|a| a.conj()).collect(),
    };
    Some((dual.ln_eval(2.0 * s)? - arch.ln_eval(1.0 - 2.0 * s)?).exp())
}

/// The archimedean dual g*_∞(y) = ∫_{(σ)} M(1/2-s) γ(1-2s) |y|^{-s} ds/2πi for an
/// even profile (only η_0 contributes, and c_ℝ cancels the factor 2 in ĝ).
#[derive(Debug, Clone)]
pub struct ArchDual {
    pub profile: ArchMellinProfile,
    pub arch: ArchFactor,
    /// (σ, C(σ)) with |g*_∞(y)| ≤ C(σ)|y|^{-σ}.
    pub certificates: Vec<(f64, f64)>,
    tables: Vec<KernelTable>,
}

/// K(σ + ijh), j ≥ 0, for the trapezoid rule on a vertical line.
#[derive(Debug, Clone)]
struct KernelTable {
    sigma: f64,
    h: f64,
    k: Vec<Complex64>,
}

/// |log y| up to which the tabulated trapezoid rule is trusted.
const FAST_LOG_RANGE: f64 = 60.0;

pub const DUAL_SIGMAS: [f64; 12] = [0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0];

impl ArchDual {
    pub fn new(profile: ArchMellinProfile, arch: ArchFactor) -> Result<Self> {
        let left = arch.rightmost_pole() / 2.0;
        let mut d = ArchDual { profile, arch, certificates: Vec::new(), tables: Vec::new() };
        for &sigma in DUAL_SIGMAS.iter() {
            if sigma <= left + 0.05 {
                continue;
            }
            if 0.5 - sigma <= profile.strip_left() && !matches!(profile.kind, ProfileKind::Coda { .. }) {
                continue;
            }
            let r = quad::integrate_real_line(|t| c(d.integrand_abs(sigma, t), 0.0), 1e-300, 1e-10);
            if r.value.re.is_finite() {
                d.certificates.push((sigma, r.value.re / (2.0 * PI) * (1.0 + 1e-6)));
            }
        }
        if d.certificates.is_empty() {
            return Err(Error::ContourTooClose { sigma: DUAL_SIGMAS[0], pole: left, gap: DUAL_SIGMAS[0] - left });
        }
        d.tables = d.certificates.iter().map(|&(sigma, cst)| d.tabulate(sigma, cst, left)).collect();
        Ok(d)
    }

    fn tabulate(&self, sigma: f64, cst: f64, left: f64) -> KernelTable {
        // half-width of the strip of analyticity around Re s = σ
        let right = 0.5 - self.profile.strip_left();
        let dist = (sigma - left).min((right - sigma).abs()).min(2.0);
        // aliasing error ~ exp(-2π·dist/h + dist·|log y|)
        let h = 2.0 * PI * dist / (40.0 + dist * FAST_LOG_RANGE);
        let floor = cst * 1e-18;
        let mut k = Vec::new();
        let mut small = 0;
        let mut j = 0usize;
        while small < 200 && j < 2_000_000 {
            let v = self.kernel(c(sigma, j as f64 * h));
            small = if v.norm() < floor { small + 1 } else { 0 };
            k.push(v);
            j += 1;
        }
        k.truncate(k.len() - small.min(k.len() - 1));
        KernelTable { sigma, h, k }
    }

    /// Trapezoid rule on the tabulated kernel (g* is real, so K(σ - it) = conj K(σ + it)).
    fn eval_table(&self, tab: &KernelTable, ly: f64) -> f64 {
        let step = Complex64::from_polar(1.0, -tab.h * ly);
        let mut w = c(1.0, 0.0);
        let mut acc = 0.5 * tab.k[0].re;
        for (j, kv) in tab.k.iter().enumerate().skip(1) {
            w = if j % 64 == 0 { Complex64::from_polar(1.0, -tab.h * ly * j as f64) } else { w * step };
            acc += (kv * w).re;
        }
        acc * tab.h / PI * (-tab.sigma * ly).exp()
    }

    fn kernel(&self, s: Complex64) -> Complex64 {
        match (self.profile.mellin_half(0.5 - s), arch_gamma_ratio(&self.arch, s)) {
            (Ok(m), Some(g)) => m * g,
            _ => c(0.0, 0.0),
        }
    }

    fn integrand_abs(&self, sigma: f64, t: f64) -> f64 {
        self.kernel(c(sigma, t)).norm()
    }

    /// Contour with the smallest certified bound at |y|.
    pub fn best_sigma(&self, y: f64) -> (f64, f64) {
        let ly = y.abs().ln();
        self.certificates.iter().map(|&(s, cst)| (s, cst * (-s * ly).exp())).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap()
    }

    /// Certified |g*_∞(y)| ≤ bound.
    pub fn bound(&self, y: f64) -> f64 {
        self.best_sigma(y).1
    }

    pub fn eval_at(&self, y: f64, sigma: f64) -> Complex64 {
        let ly = y.abs().ln();
        let scale = self.certificates.iter().find(|c| c.0 == sigma).map_or(1.0, |c| c.1) * (-sigma * ly).exp();
        quad::integrate_real_line(
            |t| {
                let s = c(sigma, t);
                self.kernel(s) * (-s * ly).exp() / (2.0 * PI)
            },
            1e-14 * scale,
            1e-11,
        )
        .value
    }

    pub fn eval(&self, y: f64) -> Complex64 {
        let (sigma, _) = self.best_sigma(y);
        let ly = y.abs().ln();
        if ly.abs() <= FAST_LOG_RANGE {
            if let Some(tab) = self.tables.iter().find(|t| t.sigma == sigma) {
                return c(self.eval_table(tab, ly), 0.0);
            }
        }
        self.eval_at(y, sigma)
    }
}

/// Archimedean local data of π at one real place, through its sym² factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchPlace {
    pub sym2: ArchFactor,
    /// m(π, v): largest Langlands exponent of π at v.
    pub nontempered: f64,
}

impl ArchPlace {
    /// From Langlands parameters μ_i of π_v (Γ_ℝ(s + μ_i) each).
    pub fn from_langlands(mu: &[Complex64]) -> Self {
        let mut sym = Vec::new();
        for i in 0..mu.len() {
            for j in i..mu.len() {
                sym.push(mu[i] + mu[j]);
            }
        }
        let nontempered = mu.iter().map(|m| m.re.abs()).fold(0.0, f64::max);
        ArchPlace { sym2: ArchFactor { gamma_r: sym, gamma_c: Vec::new() }, nontempered }
    }

    /// Smallest admissible contour: right of m(π,v) and of every pole of L(2s).
    pub fn threshold(&self) -> f64 {
        self.nontempered.max(self.sym2.rightmost_pole() / 2.0)
    }
}

/// λ_v(x) = (1/2)∫_{(σ)} L(2s, π_v, sym²)|x|^{-s} ds/2πi.
pub fn lambda_arch(place: &ArchPlace, x: f64, sigma: f64) -> Result<Complex64> {
    let pole = place.threshold();
    if sigma - pole < 0.05 {
        return Err(Error::ContourTooClose { sigma, pole, gap: sigma - pole });
    }
    let lx = x.abs().ln();
    let r = quad::integrate_real_line(
        |t| {
            let s = c(sigma, t);
            match place.sym2.ln_eval(2.0 * s) {
                Some(l) => C_R * (l - s * lx).exp() / (2.0 * PI),
                None => c(0.0, 0.0),
            }
        },
        1e-300,
        1e-12,
    );
    Ok(r.value)
}

/// Fitted exponent κ in |λ_v(x)| ≈ C|x|^{-κ} along x = 2^{-k}, k ∈ ks.
pub fn lambda_arch_blowup(place: &ArchPlace, sigma: f64, ks: &[u32]) -> Result<f64> {
    let mut pts = Vec::new();
    for &k in ks {
        let x = 2f64.powi(-(k as i32));
        let v = lambda_arch(place, x, sigma)?;
        pts.push((x.ln(), v.norm().ln()));
    }
    Ok(-fit_slope(&pts))
}

/// Least-squares slope.
pub fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
