//! Voronoi summation for sym²Δ over ℚ twisted at a prime modulus, the pole
//! scan for its completed L-function, and the amplifier demonstration.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::arith::primes_up_to;
use crate::delta::DeltaSym2Data;
use crate::error::{Error, Result};
use crate::local::GqStar;
use crate::mellin::{ArchDual, ArchMellinProfile};
use crate::nf::QuadField;
use crate::quad;
use crate::residue::{build_residue_field, ResidueFieldTable};
use crate::special::ArchFactor;

/// |λ(n)| ≤ d₃(n) ≤ d(n)² ≤ 4n for sym² of a form satisfying Deligne's bound.
fn coeff_bound(n: u64) -> f64 {
    4.0 * n as f64
}

/// x = (x_∞ = y, x_{p₀} = p₀^ℓ, 1 elsewhere), so |x| = y·p₀^{-ℓ}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalePoint {
    pub p0: u64,
    pub ell: u32,
    pub y: f64,
}

impl ScalePoint {
    pub fn big_p(&self) -> f64 {
        (self.p0 as f64).powi(2 * self.ell as i32)
    }

    pub fn abs_x(&self) -> f64 {
        self.y * (self.p0 as f64).powi(-(self.ell as i32))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PoleScan {
    /// max_y |θ(1/y) - yθ(y)| over the grid.
    pub defect: f64,
    /// max_y |θ(y)|, for scale.
    pub theta_scale: f64,
    pub tolerance: f64,
    /// Number of ω ∈ Ĉ¹(𝔮) with ω² = 1 (ω_π trivial, n = 2).
    pub omega_count: u64,
    /// Poles of the completed L-function found by the scan.
    pub poles: usize,
    pub r_pairs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct VoronoiReport {
    pub q: u64,
    pub point: ScalePoint,
    pub lhs: f64,
    pub lhs_terms: u64,
    pub lhs_tail: f64,
    pub rhs: f64,
    pub rhs_terms: u64,
    pub rhs_tail: f64,
    pub r_term: f64,
    pub diff: f64,
    pub rel_diff: f64,
}

/// The Voronoi check for L(s, sym²Δ) over ℚ with S = {∞, q}, g_q = 1_{U_q^{(1)}}
/// and an even archimedean profile.
pub struct DeltaVoronoi {
    pub data: DeltaSym2Data,
    pub q: u64,
    pub table: ResidueFieldTable,
    pub gq: GqStar,
    pub profile: ArchMellinProfile,
    pub dual: ArchDual,
    gq_max: Vec<f64>,
    gq_suffix_max: Vec<f64>,
}

impl DeltaVoronoi {
    pub fn new(q: u64, n_max: usize, profile: ArchMellinProfile) -> Result<Self> {
        Self::with_data(DeltaSym2Data::new(n_max)?, q, profile)
    }

    pub fn with_data(data: DeltaSym2Data, q: u64, profile: ArchMellinProfile) -> Result<Self> {
        let field = QuadField::new(1)?;
        let prime = field.factor_rational_prime(q)?.into_iter().next().ok_or(Error::NotPrime(q))?;
        let table = build_residue_field(&field, &prime)?;
        let gq = GqStar::new(&data.local_factor(q as usize)?, table.clone(), 24)?;
        let dual = ArchDual::new(profile, DeltaSym2Data::arch())?;
        let gq_max: Vec<f64> = (-(2 * gq.m as i64)..=gq.v_max)
            .map(|v| table.units().map(|u| gq.eval(v, u).norm()).fold(0.0, f64::max))
            .collect();
        let mut gq_suffix_max = gq_max.clone();
        for i in (0..gq_suffix_max.len().saturating_sub(1)).rev() {
            gq_suffix_max[i] = gq_suffix_max[i].max(gq_suffix_max[i + 1]);
        }
        Ok(DeltaVoronoi { data, q, table, gq, profile, dual, gq_max, gq_suffix_max })
    }

    fn gq_max_at(&self, v: i64) -> f64 {
        let i = v + 2 * self.gq.m as i64;
        if i < 0 {
            0.0
        } else {
            self.gq_max.get(i as usize).copied().unwrap_or(f64::INFINITY)
        }
    }

    /// Smallest N with Σ_{a > N} of the envelope below `tol`, or TruncationInsufficient past `cap`.
    fn truncation<E: Fn(u64) -> f64>(&self, env: E, tol: f64, cap: u64) -> Result<(u64, f64)> {
        let first = env(cap + 1);
        if first >= tol {
            return Err(Error::TruncationInsufficient { tail: first, budget: tol });
        }
        // tails are summed backwards from a point where the envelope is far below tol
        let mut far = cap.max(16);
        while env(far) > 1e-40 && far < 1u64 << 40 {
            far *= 2;
        }
        let mut tail = 0.0;
        let mut n = far;
        while n > 0 {
            let e = env(n);
            if tail + e >= tol {
                if n > cap {
                    // the envelope mass beyond the cap is at least tail + e
                    return Err(Error::TruncationInsufficient { tail: tail + e, budget: tol });
                }
                break;
            }
            tail += e;
            n -= 1;
        }
        Ok((n, tail))
    }

    fn lhs_envelope(&self, pt: &ScalePoint, a: u64) -> f64 {
        let z = a as f64 * a as f64 * pt.y * pt.y / pt.big_p();
        if a % self.q == 0 {
            0.0
        } else {
            2.0 * coeff_bound(a) * self.profile.eval(z).abs()
        }
    }

    fn dual_envelope(&self, pt: &ScalePoint, b: u64) -> f64 {
        if b % self.q == 0 {
            return 0.0;
        }
        let z = b as f64 * b as f64 * pt.big_p() / (pt.y * pt.y);
        let qf = self.q as f64;
        let m2 = 2 * self.gq.m as i64;
        let s: f64 =
            (-m2..=self.gq.v_max).map(|k| self.gq_max_at(k) * 2.0 * self.dual.bound(qf.powi(k as i32) * z)).sum();
        coeff_bound(b) * s
    }

    /// Σ_{(a,q)=1, a ≤ N} λ(a) Σ_± g_∞(a²y²/P) 1[±a²/P ≡ 1 (q)].
    pub fn lhs(&self, pt: &ScalePoint, n: u64) -> Result<f64> {
        if n as usize > self.data.n_max {
            return Err(Error::Unsupported(format!("coefficient table ends at {}", self.data.n_max)));
        }
        let t = &self.table;
        let p_res = self.residue(pt.big_p());
        let mut total = 0.0;
        for a in (1..=n).filter(|a| a % self.q != 0) {
            let a2 = self.residue((a * a) as f64);
            let hits = (a2 == p_res) as u32 + (t.neg(a2) == p_res) as u32;
            if hits > 0 {
                let z = a as f64 * a as f64 * pt.y * pt.y / pt.big_p();
                total += self.data.lambda[a as usize] * hits as f64 * self.profile.eval(z);
            }
        }
        Ok(total)
    }

    fn residue(&self, x: f64) -> u32 {
        // exact for the integers used here (< 2^53)
        self.table.from_int((x as u128 % self.q as u128) as i128)
    }

    /// G*(1/x²) = Σ_{(b,q)=1, b ≤ N} λ(b) Σ_{k ≥ -2m} Σ_± g*_∞(q^k b²P/y²) g*_q(k, ±b²P).
    pub fn dual_sum(&self, pt: &ScalePoint, n: u64) -> Result<f64> {
        if n as usize > self.data.n_max {
            return Err(Error::Unsupported(format!("coefficient table ends at {}", self.data.n_max)));
        }
        let t = &self.table;
        let qf = self.q as f64;
        let m2 = 2 * self.gq.m as i64;
        let p_res = self.residue(pt.big_p());
        let mut total = 0.0;
        for b in (1..=n).filter(|b| b % self.q != 0) {
            let z = b as f64 * b as f64 * pt.big_p() / (pt.y * pt.y);
            let u = t.mul(self.residue((b * b) as f64), p_res);
            let mut row = 0.0;
            for k in -m2..=self.gq.v_max {
                let arg = qf.powi(k as i32) * z;
                if arg > 1.0 && self.gq_suffix_max[(k + m2) as usize] * self.dual.bound(arg) < 1e-40 {
                    break;
                }
                let g = self.gq.eval(k, u) + self.gq.eval(k, t.neg(u));
                if g.norm() > 0.0 {
                    row += (self.dual.eval(arg) * g).re;
                }
            }
            total += self.data.lambda[b as usize] * row;
        }
        Ok(total)
    }

    /// G(x²) alone: (value, terms, certified tail).
    pub fn coefficient_side(&self, pt: &ScalePoint, cap: u64, tail_tol: f64) -> Result<(f64, u64, f64)> {
        let (n, tail) = self.truncation(|a| self.lhs_envelope(pt, a), tail_tol, cap)?;
        Ok((self.lhs(pt, n)?, n, tail))
    }

    /// Both sides with truncations chosen from the envelopes so that each tail
    /// is below `tail_tol` (relative to the coefficient-side value).
    pub fn check(&self, pt: &ScalePoint, cap: u64, tail_tol: f64, pole_scan: &PoleScan) -> Result<VoronoiReport> {
        let (lhs, n_lhs, lhs_tail) = self.coefficient_side(pt, cap, tail_tol)?;
        let inv = 1.0 / pt.abs_x();
        let (n_rhs, dual_tail) = self.truncation(|b| inv * self.dual_envelope(pt, b), tail_tol, cap)?;
        let g_star = self.dual_sum(pt, n_rhs)?;
        // R: residues over the (ω, ρ) pairs located by the scan
        if pole_scan.r_pairs > 0 {
            return Err(Error::Unsupported("residue evaluation at located poles".into()));
        }
        let r_term = 0.0;
        let rhs = inv * r_term + inv * g_star;
        let diff = (lhs - rhs).abs();
        Ok(VoronoiReport {
            q: self.q,
            point: *pt,
            lhs,
            lhs_terms: n_lhs,
            lhs_tail,
            rhs,
            rhs_terms: n_rhs,
            rhs_tail: dual_tail,
            r_term,
            diff,
            rel_diff: diff / lhs.abs().max(1e-300),
        })
    }
}

/// K(y) = ∫_{(σ)} L_∞(s) y^{-s} ds/2πi, whose Mellin transform is L_∞.
pub fn theta_kernel(arch: &ArchFactor, y: f64, sigma: f64) -> f64 {
    let ly = y.ln();
    quad::integrate_real_line(
        |t| {
            let s = Complex64::new(sigma, t);
            match arch.ln_eval(s) {
                Some(l) => (l - s * ly).exp() / (2.0 * PI),
                None => Complex64::new(0.0, 0.0),
            }
        },
        1e-300,
        1e-12,
    )
    .value
    .re
}

/// The same kernel by the trapezoid rule on a fixed t-grid (L_∞ is analytic
/// in a strip of half-width σ - rightmost pole around the contour).
pub struct ThetaKernel {
    sigma: f64,
    h: f64,
    vals: Vec<Complex64>,
}

impl ThetaKernel {
    pub fn new(arch: &ArchFactor, sigma: f64, max_log: f64) -> Self {
        let dist = (sigma - arch.rightmost_pole()).min(4.0);
        let h = 2.0 * PI * dist / (40.0 + dist * max_log);
        let peak = arch.eval(Complex64::new(sigma, 0.0)).map_or(1.0, |v| v.norm());
        let mut vals = Vec::new();
        let mut j = 0;
        loop {
            let v = arch.eval(Complex64::new(sigma, j as f64 * h)).unwrap_or_default();
            if v.norm() < 1e-24 * peak && j > 0 {
                break;
            }
            vals.push(v);
            j += 1;
        }
        ThetaKernel { sigma, h, vals }
    }

    pub fn eval(&self, y: f64) -> f64 {
        let ly = y.ln();
        let mut acc = 0.5 * self.vals[0].re;
        for (j, v) in self.vals.iter().enumerate().skip(1) {
            acc += (v * Complex64::from_polar(1.0, -(j as f64) * self.h * ly)).re;
        }
        acc * self.h / PI * (-self.sigma * ly).exp()
    }
}

/// θ(y) = Σ λ(n) K(ny); the completed L-function is entire and symmetric
/// exactly when θ(1/y) = yθ(y). Any pole would leave a nonzero defect built
/// from powers y^ρ (and logs), so a defect at quadrature level means no poles.
pub fn delta_pole_scan(data: &DeltaSym2Data, omega_count: u64, grid: usize) -> Result<PoleScan> {
    let kernel = ThetaKernel::new(&DeltaSym2Data::arch(), 2.0, 8.0);
    let k_scale = kernel.eval(1.0).abs();
    let theta = |y: f64| -> Result<f64> {
        let mut s = 0.0;
        let mut quiet = 0;
        for n in 1..=data.n_max {
            let k = kernel.eval(n as f64 * y);
            s += data.lambda[n] * k;
            quiet = if k.abs() < 1e-18 * k_scale { quiet + 1 } else { 0 };
            if quiet > 5 {
                return Ok(s);
            }
        }
        Err(Error::TruncationInsufficient { tail: f64::NAN, budget: 0.0 })
    };
    let mut defect: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..=grid {
        let y = 0.5 * 4f64.powf(i as f64 / grid as f64);
        let a = theta(1.0 / y)?;
        let b = theta(y)?;
        defect = defect.max((a - y * b).abs());
        scale = scale.max(a.abs()).max(b.abs());
    }
    let tolerance = 1e-9 * scale;
    let poles = if defect <= tolerance { 0 } else { 1 };
    Ok(PoleScan { defect, theta_scale: scale, tolerance, omega_count, poles, r_pairs: omega_count as usize * poles })
}

/// Primes q ∈ [lo, 2·lo) with q ≠ p₀.
pub fn modulus_window(lo: u64, p0: u64) -> Vec<u64> {
    primes_up_to(2 * lo - 1).into_iter().filter(|&q| q >= lo && q != p0).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct AmplifierModulus {
    pub q: u64,
    pub lhs: f64,
    pub lhs_terms: u64,
    pub lhs_tail: f64,
    /// The full two-sided check, when the dual truncation fits under the cap.
    pub dual: Option<VoronoiReport>,
    /// Lower bound for the dual envelope mass past the cap otherwise.
    pub dual_tail_past_cap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AmplifierReport {
    pub p0: u64,
    pub ell: u32,
    pub q_lo: u64,
    pub moduli: Vec<u64>,
    /// |𝒬| / (Q / log Q).
    pub count_constant: f64,
    /// |𝒬| for the doubled window [2Q, 4Q) and whether a trial-division count agrees.
    pub doubled_count: usize,
    pub sieve_agrees: bool,
    /// F(x²) from the coefficient side with its certified tail.
    pub f_direct: f64,
    pub f_tail: f64,
    /// F(x²) from the dual side, when every modulus fits under the cap.
    pub f_dual: Option<f64>,
    /// max relative |lhs - rhs| over the moduli checked on both sides.
    pub dual_rel_diff: Option<f64>,
    pub dual_checked: usize,
    /// Σ_{q ∈ 𝒬} G_{S_q}(1).
    pub main_weight: f64,
    /// Σ_{a ≠ p₀^ℓ} |λ(a)| W(a²/P) G_{S'}(a²/P), certified tail included.
    pub e_bound: f64,
    /// max over a of W(a²/P), and whether W ≤ log|a² ∓ P| / log Q held throughout.
    pub w_max: usize,
    pub w_log_bound_ok: bool,
    pub implied_bound: f64,
    pub lambda_true: f64,
    pub bound_holds: bool,
    /// |F| / (N(p₀)^ℓ + Q^{(m+1)/2}).
    pub rhs_constant: f64,
    pub per_modulus: Vec<AmplifierModulus>,
}

/// F(x²) = Σ_{q ∈ 𝒬} G(x²; q) with x_∞ = 1, x_{p₀} = p₀^ℓ, and the upper bound
/// on |λ(p₀^ℓ)| it implies through |F| ≥ |λ(p₀^ℓ)| Σ G_{S_q}(1) - |E|. Each
/// G(x²; q) is also evaluated on the dual side when that fits under `cap`.
#[allow(clippy::too_many_arguments)]
pub fn amplifier_demo(
    data: &DeltaSym2Data,
    profile: ArchMellinProfile,
    p0: u64,
    ell: u32,
    q_lo: u64,
    cap: u64,
    tail_tol: f64,
    scan: &PoleScan,
) -> Result<AmplifierReport> {
    let moduli = modulus_window(q_lo, p0);
    if moduli.is_empty() {
        return Err(Error::Unsupported(format!("no primes in [{q_lo}, {})", 2 * q_lo)));
    }
    let pt = ScalePoint { p0, ell, y: 1.0 };
    let big_p = p0.checked_pow(2 * ell).ok_or(Error::Overflow("amplifier_demo"))? as i128;
    let center = p0.pow(ell);
    let mut per_modulus = Vec::new();
    let (mut f_direct, mut f_tail, mut main_weight) = (0.0, 0.0, 0.0);
    let mut f_dual = Some(0.0);
    let mut dual_rel_diff: Option<f64> = None;
    for &q in &moduli {
        let dv = DeltaVoronoi::with_data(data.clone(), q, profile)?;
        let (lhs, lhs_terms, lhs_tail) = dv.coefficient_side(&pt, cap, tail_tol)?;
        f_direct += lhs;
        f_tail += lhs_tail;
        // only u = ±1 keep v_q(u) = 0; u = -1 needs -1 ≡ 1 (q)
        main_weight += profile.eval(1.0) * if q == 2 { 2.0 } else { 1.0 };
        let (dual, dual_tail_past_cap) = match dv.check(&pt, cap, tail_tol, scan) {
            Ok(rep) => {
                f_dual = f_dual.map(|f| f + rep.rhs);
                dual_rel_diff = Some(dual_rel_diff.unwrap_or(0.0).max(rep.rel_diff));
                (Some(rep), None)
            }
            Err(Error::TruncationInsufficient { tail, .. }) => {
                f_dual = None;
                (None, Some(tail))
            }
            Err(e) => return Err(e),
        };
        per_modulus.push(AmplifierModulus { q, lhs, lhs_terms, lhs_tail, dual, dual_tail_past_cap });
    }
    let log_q = (q_lo as f64).ln();
    let g_at = |a: u64| profile.eval((a as f64 / center as f64).powi(2)).abs();
    let mut e_bound = 0.0;
    let mut w_max = 0;
    let mut w_log_bound_ok = true;
    let mut a = 1u64;
    loop {
        if a != center {
            let g = g_at(a);
            if g > 0.0 {
                let mut w = 0;
                for diff in [a as i128 * a as i128 - big_p, a as i128 * a as i128 + big_p] {
                    let count = moduli.iter().filter(|&&q| diff % q as i128 == 0).count();
                    if count as f64 > (diff.unsigned_abs() as f64).ln() / log_q + 1e-12 {
                        w_log_bound_ok = false;
                    }
                    w = w.max(count);
                }
                w_max = w_max.max(w);
                let lam = if (a as usize) <= data.n_max { data.lambda[a as usize].abs() } else { coeff_bound(a) };
                e_bound += lam * w as f64 * 2.0 * g;
            }
        }
        if a > 2 * center && 8.0 * a as f64 * moduli.len() as f64 * g_at(a) < 1e-30 {
            break;
        }
        a += 1;
        if a > 1 << 32 {
            return Err(Error::NonConvergent("E-sum did not terminate".into()));
        }
    }
    // dyadic blocks past the last a, with W ≤ |𝒬| and |λ| ≤ 4a
    let mut block = a as f64;
    loop {
        let b = block * 8.0 * 2.0 * block * moduli.len() as f64 * profile.eval((block / center as f64).powi(2)).abs();
        e_bound += b;
        if b < 1e-40 || block > 1e150 {
            break;
        }
        block *= 2.0;
    }
    let implied_bound = (f_direct.abs() + f_tail + e_bound) / main_weight;
    let lambda_true = data.lambda_prime_power_via_tau(p0 as usize, ell);
    let doubled = modulus_window(2 * q_lo, p0);
    let trial =
        (2 * q_lo..4 * q_lo).filter(|&n| n != p0 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0)).count();
    let m = 3.0;
    Ok(AmplifierReport {
        p0,
        ell,
        q_lo,
        count_constant: moduli.len() as f64 / (q_lo as f64 / log_q),
        doubled_count: doubled.len(),
        sieve_agrees: trial == doubled.len(),
        moduli,
        f_direct,
        f_tail,
        f_dual,
        dual_rel_diff,
        dual_checked: per_modulus.iter().filter(|m| m.dual.is_some()).count(),
        main_weight,
        e_bound,
        w_max,
        w_log_bound_ok,
        implied_bound,
        lambda_true,
        bound_holds: implied_bound >= lambda_true.abs(),
        rhs_constant: f_direct.abs() / ((p0 as f64).powi(ell as i32) + (q_lo as f64).powf((m + 1.0) / 2.0)),
        per_modulus,
    })
}
