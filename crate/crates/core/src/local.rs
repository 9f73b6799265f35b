//! Synthetic automorphic data, symmetric-square local factors, γ-factors and
//! the exact dual test function g*_𝔮 at an unramified prime.

use std::collections::HashMap;
use std::sync::RwLock;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nf::{IdealHNF, PrimeIdealData, QuadField};
use crate::residue::{self, kloosterman_by_element, MultChar, ResidueFieldTable};
use crate::special::ArchFactor;

pub const R_MAX: usize = 24;

/// Satake parameters of π at one place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatakeLocal {
    pub norm: f64,
    pub alpha: Vec<Complex64>,
}

impl SatakeLocal {
    pub fn new(norm: f64, alpha: Vec<Complex64>) -> Self {
        SatakeLocal { norm, alpha }
    }

    /// max_i |log|α_i|| / log N(𝔭).
    pub fn nontempered_measure(&self) -> f64 {
        self.alpha.iter().map(|a| a.norm().ln().abs()).fold(0.0, f64::max) / self.norm.ln()
    }

    /// True when {α_i} is closed under α ↦ 1/ᾱ (as a multiset, within tol).
    pub fn is_unitary_closed(&self, tol: f64) -> bool {
        let mut rest: Vec<Complex64> = self.alpha.iter().map(|a| 1.0 / a.conj()).collect();
        for a in &self.alpha {
            match rest.iter().position(|b| (a - b).norm() < tol) {
                Some(i) => {
                    rest.swap_remove(i);
                }
                None => return false,
            }
        }
        true
    }

    /// LRS-type bound 1/2 - 1/(n² + 1).
    pub fn is_lrs_admissible(&self) -> bool {
        let n = self.alpha.len() as f64;
        self.nontempered_measure() <= 0.5 - 1.0 / (n * n + 1.0) + 1e-12
    }

    pub fn sym2_eigenvalues(&self) -> Vec<Complex64> {
        sym2_eigenvalues(&self.alpha)
    }

    pub fn sym2_factor(&self) -> LocalSym2Factor {
        LocalSym2Factor::new(self.norm, self.sym2_eigenvalues())
    }
}

/// {α_i α_j : i ≤ j}.
pub fn sym2_eigenvalues(alpha: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(alpha.len() * (alpha.len() + 1) / 2);
    for i in 0..alpha.len() {
        for j in i..alpha.len() {
            out.push(alpha[i] * alpha[j]);
        }
    }
    out
}

/// Local factor Π(1 - β_j X)^{-1} with X = N(𝔭)^{-s}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSym2Factor {
    pub norm: f64,
    pub beta: Vec<Complex64>,
    /// c_j = (-1)^j e_j(β), so that Π(1 - β_j X) = Σ c_j X^j.
    pub poly: Vec<Complex64>,
    /// λ(𝔭^r) = h_r(β) for r ≤ R_MAX.
    pub lambda: Vec<Complex64>,
}

impl LocalSym2Factor {
    pub fn new(norm: f64, beta: Vec<Complex64>) -> Self {
        let mut poly = vec![Complex64::new(1.0, 0.0)];
        for &b in &beta {
            let mut next = poly.clone();
            next.push(Complex64::new(0.0, 0.0));
            for j in 0..poly.len() {
                next[j + 1] -= b * poly[j];
            }
            poly = next;
        }
        // product of geometric series Σ β^k X^k, truncated at R_MAX
        let mut lambda = vec![Complex64::new(0.0, 0.0); R_MAX + 1];
        lambda[0] = Complex64::new(1.0, 0.0);
        for &b in &beta {
            for r in 1..=R_MAX {
                let prev = lambda[r - 1];
                lambda[r] += b * prev;
            }
        }
        LocalSym2Factor { norm, beta, poly, lambda }
    }

    pub fn m(&self) -> usize {
        self.beta.len()
    }

    pub fn lambda_coeff(&self, r: usize) -> Result<Complex64> {
        self.lambda.get(r).copied().ok_or_else(|| Error::Unsupported(format!("r = {r} exceeds r_max = {R_MAX}")))
    }

    /// P(X) = Π(1 - β_j X).
    pub fn poly_eval(&self, x: Complex64) -> Complex64 {
        self.poly.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    /// Same polynomial for π̃: coefficients conjugated.
    pub fn dual_poly_eval(&self, x: Complex64) -> Complex64 {
        self.poly.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c.conj())
    }

    /// L(s) = 1/P(N^{-s}).
    pub fn l_value(&self, s: Complex64) -> Complex64 {
        1.0 / self.poly_eval(self.x_of(s))
    }

    fn x_of(&self, s: Complex64) -> Complex64 {
        (-s * self.norm.ln()).exp()
    }

    /// γ(s) = L(1-s, π̃)/L(s, π) = P(N^{-s}) / P̃(N^{-(1-s)}).
    pub fn gamma_unramified(&self, s: Complex64) -> Result<Complex64> {
        let num = self.poly_eval(self.x_of(s));
        let den = self.dual_poly_eval(self.x_of(1.0 - s));
        if den.norm() < 1e-300 {
            return Err(Error::PoleAt(format!("{s}")));
        }
        Ok(num / den)
    }

    /// Conjugate data (π̃).
    pub fn dual(&self) -> LocalSym2Factor {
        LocalSym2Factor::new(self.norm, self.beta.iter().map(|b| b.conj()).collect())
    }
}

/// N(𝔮)^{-ms} τ(χ²)^m. The flag is true when χ² is trivial (τ = -1 path).
pub fn gamma_twisted(tab: &ResidueFieldTable, chi: &MultChar, m: u32, s: Complex64) -> Result<(Complex64, bool)> {
    if chi.is_trivial() {
        return Err(Error::TrivialCharacter);
    }
    let chi2 = chi.pow(2);
    let tau = residue::gauss_sum(tab, &chi2);
    let nq = (tab.q as f64).ln();
    Ok(((-(m as f64) * s * nq).exp() * tau.powu(m), chi2.is_trivial()))
}

/// How unramified Satake parameters are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SatakeMode {
    /// Pairs (e^{iθ}, e^{-iθ}) plus 1 when n is odd: π self-dual, λ real.
    SelfDual,
    /// Unit-modulus α with Π α = 1.
    Generic,
}

/// A non-tempered pair (N^σ e^{iθ}, N^{-σ} e^{iθ}) planted at one prime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedPrime {
    pub hnf: IdealHNF,
    pub sigma: f64,
}

/// Synthetic stand-in for π: deterministic Satake data keyed by (seed, 𝔭).
#[derive(Debug, Serialize, Deserialize)]
pub struct ToyAutomorphicData {
    pub d: i64,
    pub n: usize,
    pub seed: u64,
    pub mode: SatakeMode,
    pub ramified: Vec<IdealHNF>,
    pub planted: Vec<PlantedPrime>,
    /// sym² archimedean factor at each real place.
    pub arch: Vec<ArchFactor>,
    #[serde(skip)]
    cache: RwLock<HashMap<IdealHNF, LocalSym2Factor>>,
}

impl Clone for ToyAutomorphicData {
    fn clone(&self) -> Self {
        ToyAutomorphicData {
            d: self.d,
            n: self.n,
            seed: self.seed,
            mode: self.mode,
            ramified: self.ramified.clone(),
            planted: self.planted.clone(),
            arch: self.arch.clone(),
            cache: RwLock::new(HashMap::new()),
        }
    }
}

impl ToyAutomorphicData {
    /// Tempered data of degree n with archimedean parameters μ_i = 0 at every real place.
    pub fn new(field: &QuadField, n: usize, seed: u64, mode: SatakeMode) -> Self {
        let m = n * (n + 1) / 2;
        let arch =
            vec![ArchFactor { gamma_r: vec![Complex64::new(0.0, 0.0); m], gamma_c: Vec::new() }; field.num_real_places];
        ToyAutomorphicData {
            d: field.d,
            n,
            seed,
            mode,
            ramified: Vec::new(),
            planted: Vec::new(),
            arch,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn with_planted(mut self, planted: Vec<PlantedPrime>) -> Self {
        self.planted = planted;
        self.cache = RwLock::new(HashMap::new());
        self
    }

    pub fn with_ramified(mut self, ramified: Vec<IdealHNF>) -> Self {
        self.ramified = ramified;
        self
    }

    pub fn m(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn is_ramified(&self, p: &IdealHNF) -> bool {
        self.ramified.contains(p)
    }

    fn rng_for(&self, prime: &PrimeIdealData) -> ChaCha20Rng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.seed.to_le_bytes());
        seed[8..16].copy_from_slice(&prime.p.to_le_bytes());
        seed[16..24].copy_from_slice(&(prime.hnf.b as u64).to_le_bytes());
        seed[24..32].copy_from_slice(&(prime.hnf.c as u64).to_le_bytes());
        ChaCha20Rng::from_seed(seed)
    }

    pub fn satake_at(&self, prime: &PrimeIdealData) -> Result<SatakeLocal> {
        if self.is_ramified(&prime.hnf) {
            return Err(Error::NotCoprime);
        }
        let mut rng = self.rng_for(prime);
        let norm = prime.norm() as f64;
        let n = self.n;
        let mut alpha = Vec::with_capacity(n);
        let planted = self.planted.iter().find(|p| p.hnf == prime.hnf).map(|p| p.sigma);
        let theta = |rng: &mut ChaCha20Rng| rng.gen_range(0.0..std::f64::consts::TAU);
        match self.mode {
            SatakeMode::SelfDual => {
                for i in 0..n / 2 {
                    let t = theta(&mut rng);
                    if i == 0 && planted.is_some() {
                        // real pair N^{±σ}
                        let s = planted.unwrap();
                        alpha.push(Complex64::new(norm.powf(s), 0.0));
                        alpha.push(Complex64::new(norm.powf(-s), 0.0));
                    } else {
                        alpha.push(Complex64::from_polar(1.0, t));
                        alpha.push(Complex64::from_polar(1.0, -t));
                    }
                }
                if n % 2 == 1 {
                    alpha.push(Complex64::new(1.0, 0.0));
                }
            }
            SatakeMode::Generic => {
                // planted pair shares one phase so that {α} stays closed under 1/ᾱ
                let mut total = 0.0;
                let mut free = n - 1;
                if let Some(s) = planted {
                    let t = if n == 2 { [0.0, std::f64::consts::PI][rng.gen_range(0..2)] } else { theta(&mut rng) };
                    alpha.push(Complex64::from_polar(norm.powf(s), t));
                    alpha.push(Complex64::from_polar(norm.powf(-s), t));
                    total += 2.0 * t;
                    free = n.saturating_sub(3);
                }
                for _ in 0..free {
                    let t = theta(&mut rng);
                    total += t;
                    alpha.push(Complex64::from_polar(1.0, t));
                }
                if alpha.len() < n {
                    alpha.push(Complex64::from_polar(1.0, -total));
                }
            }
        }
        Ok(SatakeLocal::new(norm, alpha))
    }

    /// Memoized sym² factor at 𝔭 (first writer wins; values are deterministic).
    pub fn factor_at(&self, prime: &PrimeIdealData) -> Result<LocalSym2Factor> {
        if let Some(f) = self.cache.read().unwrap().get(&prime.hnf) {
            return Ok(f.clone());
        }
        let f = self.satake_at(prime)?.sym2_factor();
        let mut w = self.cache.write().unwrap();
        Ok(w.entry(prime.hnf).or_insert(f).clone())
    }

    /// Multiplicative extension λ(𝔞) = Π λ(𝔭^r), 𝔞 coprime to B_π and to `excluded`.
    pub fn lambda_ideal(&self, field: &QuadField, a: &IdealHNF, excluded: &[IdealHNF]) -> Result<Complex64> {
        let mut acc = Complex64::new(1.0, 0.0);
        for (p, r) in factor_ideal(field, a)? {
            if self.is_ramified(&p.hnf) || excluded.contains(&p.hnf) {
                return Err(Error::NotCoprime);
            }
            acc *= self.factor_at(&p)?.lambda_coeff(r as usize)?;
        }
        Ok(acc)
    }

    /// JSON description sufficient to rebuild identical data.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Unsupported(e.to_string()))
    }
}

/// Prime ideal factorization of a nonzero integral ideal.
pub fn factor_ideal(field: &QuadField, a: &IdealHNF) -> Result<Vec<(PrimeIdealData, u32)>> {
    let mut out = Vec::new();
    for (p, _) in crate::arith::factorize(a.norm()) {
        for q in field.factor_rational_prime(p)? {
            let mut r = 0;
            let mut pw = q.hnf;
            while contains_ideal(&pw, a) {
                r += 1;
                pw = field.ideal_mul(&pw, &q.hnf);
            }
            if r > 0 {
                out.push((q, r));
            }
        }
    }
    Ok(out)
}

/// a ⊆ b as lattices.
pub fn contains_ideal(b: &IdealHNF, a: &IdealHNF) -> bool {
    a.z_basis().iter().all(|&x| b.contains_int(x))
}

/// The dual function g*_𝔮(x) for g_𝔮 = 1_{U^{(1)}}, in terms of v = v_𝔮(x)
/// and the residue class u of the unit part.
///
/// With η₂ the quadratic character of (O/𝔮)^× and c_j the coefficients of P,
/// φ·g*(x) = (1 + η₂(u))·A(v) + [v = -2m]·N^{-m}·(Σ_{η≠1} τ(η²)^m η̄(u) - (-1)^m η₂(u)),
/// where A(v) = Σ_{r - j = v/2} λ̄(r) c_j N^{-j}. The η₂ term sits with A
/// because χ² is unramified when χ restricted to units is quadratic.
#[derive(Debug, Clone)]
pub struct GqStar {
    pub m: usize,
    pub norm: f64,
    pub phi: f64,
    pub v_max: i64,
    a_part: Vec<Complex64>,
    /// Σ_{η≠1} τ(η²)^m η̄(u), indexed by dlog(u).
    eta_sum: Vec<Complex64>,
    table: ResidueFieldTable,
}

impl GqStar {
    pub fn new(factor: &LocalSym2Factor, table: ResidueFieldTable, v_max: i64) -> Result<Self> {
        let m = factor.m();
        if table.q % 2 == 0 {
            return Err(Error::Unsupported("g*_q needs odd residue characteristic".into()));
        }
        let norm = table.q as f64;
        let v_min = -2 * m as i64;
        let r_needed = (v_max / 2 + m as i64).max(0) as usize;
        if r_needed > R_MAX {
            return Err(Error::Unsupported(format!("v_max = {v_max} needs λ beyond r_max")));
        }
        let mut a_part = Vec::new();
        for v in v_min..=v_max {
            a_part.push(a_part_exact(factor, v));
        }
        let eta_sum = residue::eta_square_sums(&table, m as u32);
        Ok(GqStar { m, norm, phi: table.order() as f64, v_max, a_part, eta_sum, table })
    }

    pub fn table(&self) -> &ResidueFieldTable {
        &self.table
    }

    pub fn a_part(&self, v: i64) -> Complex64 {
        let v_min = -2 * self.m as i64;
        if v < v_min || v > self.v_max {
            return Complex64::new(0.0, 0.0);
        }
        self.a_part[(v - v_min) as usize]
    }

    fn eta2(&self, u: u32) -> f64 {
        if self.table.is_square(u) {
            1.0
        } else {
            -1.0
        }
    }

    /// Σ_{η≠1} τ(η²)^m η̄(u) - (-1)^m η₂(u).
    pub fn b_sum(&self, u: u32) -> Complex64 {
        let l = self.table.dlog(u).expect("unit class") as usize;
        let sign = if self.m % 2 == 0 { 1.0 } else { -1.0 };
        self.eta_sum[l] - sign * self.eta2(u)
    }

    /// Same quantity through the Kloosterman route: φ·Σ_{z²=u} Kl(z) - (-1)^m - (-1)^m η₂(u).
    pub fn b_sum_via_kloosterman(&self, kl_by_element: &[Complex64], u: u32) -> Complex64 {
        let sign = if self.m % 2 == 0 { 1.0 } else { -1.0 };
        let conv: Complex64 = self.table.sqrt(u).into_iter().map(|z| kl_by_element[z as usize]).sum();
        conv * self.phi - sign - sign * self.eta2(u)
    }

    /// g*_𝔮 at valuation v and unit class u (u ≠ 0).
    pub fn eval(&self, v: i64, u: u32) -> Complex64 {
        if v < -2 * (self.m as i64) || v % 2 != 0 {
            return Complex64::new(0.0, 0.0);
        }
        let mut total = self.a_part(v) * (1.0 + self.eta2(u));
        if v == -2 * self.m as i64 {
            total += self.b_sum(u) * self.norm.powi(-(self.m as i32));
        }
        total / self.phi
    }

    /// |x|_𝔮 = N^{-v}.
    pub fn abs_x(&self, v: i64) -> f64 {
        self.norm.powf(-(v as f64))
    }
}

/// A(v) = Σ_{r - j = v/2, 0 ≤ j ≤ m, r ≥ 0} λ̄(r) c_j N^{-j}.
pub fn a_part_exact(factor: &LocalSym2Factor, v: i64) -> Complex64 {
    let m = factor.m() as i64;
    if v % 2 != 0 || v < -2 * m {
        return Complex64::new(0.0, 0.0);
    }
    let h = v / 2;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..=m {
        let r = h + j;
        if r < 0 || r as usize > R_MAX {
            continue;
        }
        acc += factor.lambda[r as usize].conj() * factor.poly[j as usize] * factor.norm.powi(-(j as i32));
    }
    acc
}

/// A(v) by numerically integrating L(2s, π̃)/L(1-2s, π)|x|^{-s} over one period.
pub fn a_part_by_contour(factor: &LocalSym2Factor, v: i64, sigma: f64) -> Complex64 {
    let ln_n = factor.norm.ln();
    let period = std::f64::consts::PI / ln_n;
    let dual = factor.dual();
    let f = |t: f64| {
        let s = Complex64::new(sigma, t);
        let num = dual.l_value(2.0 * s);
        let den = factor.l_value(1.0 - 2.0 * s);
        let xs = (s * (v as f64) * ln_n).exp();
        num / den * xs * ln_n / (2.0 * std::f64::consts::PI)
    };
    crate::quad::integrate(f, -period, period, 1e-14, 1e-13).value
}

#[derive(Debug, Clone, Serialize)]
pub struct DualAuditRow {
    pub v: i64,
    pub abs_x: f64,
    pub max_abs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DualAudit {
    pub norm: u64,
    pub m: usize,
    pub eps: f64,
    pub constant: f64,
    pub max_ratio: f64,
    pub zero_outside_support: bool,
    pub zero_on_odd: bool,
    pub rows: Vec<DualAuditRow>,
    pub pass: bool,
}

/// Sweeps v ∈ [-2m - 4, v_max] and all unit classes, comparing φ|g*| with
/// |x|^{-1/2-ε} + |x|^{-1/4+1/(4m)}.
pub fn dual_bounds_audit(g: &GqStar, eps: f64, constant: f64) -> DualAudit {
    let m = g.m as f64;
    let mut rows = Vec::new();
    let mut zero_outside = true;
    let mut zero_odd = true;
    let mut max_ratio: f64 = 0.0;
    for v in (-2 * g.m as i64 - 4)..=g.v_max {
        let ax = g.abs_x(v);
        let mut mx: f64 = 0.0;
        for u in g.table.units() {
            let val = g.eval(v, u);
            mx = mx.max(val.norm());
            if v < -2 * g.m as i64 && val != Complex64::new(0.0, 0.0) {
                zero_outside = false;
            }
            if v % 2 != 0 && val != Complex64::new(0.0, 0.0) {
                zero_odd = false;
            }
        }
        let bound = ax.powf(-0.5 - eps) + ax.powf(-0.25 + 1.0 / (4.0 * m));
        let ratio = mx * g.phi / bound;
        if v >= -2 * g.m as i64 {
            max_ratio = max_ratio.max(ratio);
        }
        rows.push(DualAuditRow { v, abs_x: ax, max_abs: mx, ratio });
    }
    DualAudit {
        norm: g.table.q,
        m: g.m,
        eps,
        constant,
        max_ratio,
        zero_outside_support: zero_outside,
        zero_on_odd: zero_odd,
        pass: max_ratio <= constant && zero_outside && zero_odd,
        rows,
    }
}

/// Convenience: g*_𝔮 for toy data at a prime of K.
pub fn gq_star_for(pi: &ToyAutomorphicData, field: &QuadField, prime: &PrimeIdealData, v_max: i64) -> Result<GqStar> {
    let table = residue::build_residue_field(field, prime)?;
    let factor = pi.factor_at(prime)?;
    GqStar::new(&factor, table, v_max)
}

/// Kloosterman table for the B-part cross-check.
pub fn kl_table(g: &GqStar) -> Vec<Complex64> {
    kloosterman_by_element(&g.table, g.m as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// h_r by naive power-series inversion of P.
    fn series_inverse(poly: &[Complex64], r_max: usize) -> Vec<Complex64> {
        let mut out = vec![c(0.0, 0.0); r_max + 1];
        out[0] = c(1.0, 0.0) / poly[0];
        for r in 1..=r_max {
            let mut s = c(0.0, 0.0);
            for j in 1..poly.len().min(r + 1) {
                s += poly[j] * out[r - j];
            }
            out[r] = -s / poly[0];
        }
        out
    }

    #[test]
    fn sym2_examples() {
        let th = 0.7f64;
        let a = [Complex64::from_polar(1.0, th), Complex64::from_polar(1.0, -th)];
        let b = sym2_eigenvalues(&a);
        assert!((b[0] - Complex64::from_polar(1.0, 2.0 * th)).norm() < 1e-15);
        assert!((b[1] - 1.0).norm() < 1e-15);
        assert!((b[2] - Complex64::from_polar(1.0, -2.0 * th)).norm() < 1e-15);
        assert_eq!(sym2_eigenvalues(&[c(1.0, 0.0), c(1.0, 0.0)]), vec![c(1.0, 0.0); 3]);
        let a3 = [c(0.3, 1.1), c(-0.7, 0.2), c(1.5, -0.4)];
        let b3 = sym2_eigenvalues(&a3);
        assert_eq!(b3.len(), 6);
        let pb: Complex64 = b3.iter().product();
        let pa: Complex64 = a3.iter().product();
        assert!((pb - pa.powu(4)).norm() < 1e-12);
    }

    #[test]
    fn lambda_examples() {
        let f = LocalSym2Factor::new(7.0, vec![c(1.0, 0.0); 3]);
        assert_eq!(f.lambda_coeff(0).unwrap(), c(1.0, 0.0));
        assert!((f.lambda_coeff(2).unwrap() - 6.0).norm() < 1e-12);
        // Δ at p = 2: α + 1/α = τ(2)/2^{11/2} with τ(2) = -24
        let x = -24.0 / 2f64.powf(5.5);
        let alpha = Complex64::new(x / 2.0, 0.0) + Complex64::new(x * x / 4.0 - 1.0, 0.0).sqrt();
        let sat = SatakeLocal::new(2.0, vec![alpha, 1.0 / alpha]);
        let l = sat.sym2_factor().lambda_coeff(1).unwrap();
        assert!((l - c(-0.71875, 0.0)).norm() < 1e-12);
        assert!((l.re - (576.0 / 2048.0 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn h_r_matches_series_division() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for n in [2, 3, 4] {
            for _ in 0..50 {
                let alpha: Vec<Complex64> =
                    (0..n).map(|_| Complex64::from_polar(rng.gen_range(0.5..1.5), rng.gen_range(0.0..6.3))).collect();
                let f = SatakeLocal::new(11.0, alpha).sym2_factor();
                let oracle = series_inverse(&f.poly, 12);
                for r in 0..=12 {
                    let scale = 1.0 + oracle[r].norm();
                    assert!((f.lambda[r] - oracle[r]).norm() < 1e-10 * scale);
                }
            }
        }
    }

    #[test]
    fn gamma_unramified_properties() {
        let k = QuadField::new(5).unwrap();
        let pi = ToyAutomorphicData::new(&k, 3, 9, SatakeMode::Generic);
        let q = k.factor_rational_prime(11).unwrap()[0];
        let f = pi.factor_at(&q).unwrap();
        let fd = f.dual();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let s = c(rng.gen_range(-3.0..3.0), rng.gen_range(-20.0..20.0));
            let g1 = f.gamma_unramified(s).unwrap();
            let g2 = fd.gamma_unramified(1.0 - s).unwrap();
            assert!((g1 * g2 - 1.0).norm() < 1e-9);
            let crit = c(0.5, s.im);
            assert!((f.gamma_unramified(crit).unwrap().norm() - 1.0).abs() < 1e-9);
        }
        let ones = LocalSym2Factor::new(11.0, vec![c(1.0, 0.0); 3]);
        let direct = ((1.0 - 11f64.powi(-2)) / (1.0 - 11.0)).powi(3);
        assert!((ones.gamma_unramified(c(2.0, 0.0)).unwrap().re - direct).abs() < 1e-12);
        assert!(ones.gamma_unramified(c(-1.5, 3.0)).unwrap().norm().is_finite());
    }

    #[test]
    fn gamma_twisted_examples() {
        let t = ResidueFieldTable::new(11, 1, 0, 0).unwrap();
        let chi = MultChar::new(1, 10);
        let (g0, flag) = gamma_twisted(&t, &chi, 3, c(0.0, 0.0)).unwrap();
        assert!(!flag);
        assert!((g0 - residue::gauss_sum(&t, &chi.pow(2)).powu(3)).norm() < 1e-9);
        let (gh, _) = gamma_twisted(&t, &chi, 3, c(0.5, 4.0)).unwrap();
        assert!((gh.norm() - 1.0).abs() < 1e-9);
        let (gq, flag) = gamma_twisted(&t, &MultChar::quadratic(10), 3, c(0.0, 0.0)).unwrap();
        assert!(flag);
        assert!((gq - c(-1.0, 0.0)).norm() < 1e-12);
        assert_eq!(gamma_twisted(&t, &MultChar::trivial(10), 3, c(0.0, 0.0)).unwrap_err(), Error::TrivialCharacter);
    }

    #[test]
    fn lambda_ideal_is_multiplicative() {
        let k = QuadField::new(2).unwrap();
        let pi = ToyAutomorphicData::new(&k, 2, 1, SatakeMode::Generic);
        let p7 = k.factor_rational_prime(7).unwrap();
        let p17 = k.factor_rational_prime(17).unwrap()[1];
        let (a, b) = (p7[0], p17);
        let ab = k.ideal_mul(&a.hnf, &b.hnf);
        let lab = pi.lambda_ideal(&k, &ab, &[]).unwrap();
        let la = pi.factor_at(&a).unwrap().lambda[1];
        let lb = pi.factor_at(&b).unwrap().lambda[1];
        assert!((lab - la * lb).norm() < 1e-12);
        let a2 = k.ideal_mul(&a.hnf, &a.hnf);
        assert!((pi.lambda_ideal(&k, &a2, &[]).unwrap() - pi.factor_at(&a).unwrap().lambda[2]).norm() < 1e-12);
        assert_eq!(pi.lambda_ideal(&k, &IdealHNF::unit(), &[]).unwrap(), c(1.0, 0.0));
        assert_eq!(pi.lambda_ideal(&k, &ab, &[a.hnf]).unwrap_err(), Error::NotCoprime);
    }

    #[test]
    fn satake_data_is_deterministic_and_unitary() {
        let k = QuadField::new(5).unwrap();
        let q = k.factor_rational_prime(19).unwrap()[1];
        for mode in [SatakeMode::SelfDual, SatakeMode::Generic] {
            let pi =
                ToyAutomorphicData::new(&k, 3, 42, mode).with_planted(vec![PlantedPrime { hnf: q.hnf, sigma: 0.2 }]);
            let s1 = pi.satake_at(&q).unwrap();
            let s2 = pi.clone().satake_at(&q).unwrap();
            assert_eq!(s1, s2);
            assert!(s1.is_unitary_closed(1e-12));
            assert!((s1.nontempered_measure() - 0.2).abs() < 1e-12);
            assert!(s1.is_lrs_admissible());
            let back = ToyAutomorphicData::from_json(&pi.to_json()).unwrap();
            assert_eq!(back.satake_at(&q).unwrap(), s1);
        }
    }

    #[test]
    fn coefficient_growth_bound() {
        let k = QuadField::new(1).unwrap();
        for seed in 0..5 {
            let pi = ToyAutomorphicData::new(&k, 2, seed, SatakeMode::Generic);
            for p in [3u64, 5, 7, 11, 13] {
                let q = k.factor_rational_prime(p).unwrap()[0];
                let pi = pi.clone().with_planted(vec![PlantedPrime { hnf: q.hnf, sigma: 0.15 }]);
                let sat = pi.satake_at(&q).unwrap();
                let f = sat.sym2_factor();
                let mu = sat.nontempered_measure();
                for r in 0..=12 {
                    let bound = ((r + 1) as f64).powi(f.m() as i32) * (p as f64).powf(2.0 * r as f64 * mu);
                    assert!(f.lambda[r].norm() <= bound * (1.0 + 1e-12));
                }
            }
        }
    }

    fn setup(p: u64, seed: u64, n: usize) -> GqStar {
        let k = QuadField::new(1).unwrap();
        let pi = ToyAutomorphicData::new(&k, n, seed, SatakeMode::Generic);
        let q = k.factor_rational_prime(p).unwrap()[0];
        gq_star_for(&pi, &k, &q, 10).unwrap()
    }

    #[test]
    fn a_part_matches_contour_integral() {
        let k = QuadField::new(1).unwrap();
        let pi = ToyAutomorphicData::new(&k, 2, 7, SatakeMode::Generic);
        let q = k.factor_rational_prime(11).unwrap()[0];
        let f = pi.factor_at(&q).unwrap();
        for v in -8..=6 {
            let exact = a_part_exact(&f, v);
            let num = a_part_by_contour(&f, v, 1.0);
            // integrand size on Re s = 1 is about N^v
            let scale = 11f64.powi(v as i32).max(1.0);
            assert!((exact - num).norm() < 1e-12 * scale, "v = {v}: {exact} vs {num}");
        }
    }

    #[test]
    fn gq_star_support_and_single_term() {
        for (p, seed) in [(11, 1), (13, 2), (19, 3)] {
            let g = setup(p, seed, 2);
            let m = g.m as i64;
            for u in g.table().units() {
                for v in -2 * m - 6..-2 * m {
                    assert_eq!(g.eval(v, u), c(0.0, 0.0));
                }
                for v in (-2 * m..=10).filter(|v| v % 2 != 0) {
                    assert_eq!(g.eval(v, u), c(0.0, 0.0));
                }
            }
            // at v = -2m only r = 0, j = m contributes to A
            let expected = {
                let k = QuadField::new(1).unwrap();
                let pi = ToyAutomorphicData::new(&k, 2, seed, SatakeMode::Generic);
                let q = k.factor_rational_prime(p).unwrap()[0];
                let fac = pi.factor_at(&q).unwrap();
                fac.poly[g.m] * (p as f64).powi(-(g.m as i32))
            };
            assert!((g.a_part(-2 * m) - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn b_part_kloosterman_route_agrees() {
        for p in [7u64, 11, 13] {
            let g = setup(p, 4, 2);
            let kl = kl_table(&g);
            for u in g.table().units() {
                assert!((g.b_sum(u) - g.b_sum_via_kloosterman(&kl, u)).norm() < 1e-8);
            }
        }
    }

    /// g* from its definition: sum over all characters of (O/𝔮)^× with the
    /// appropriate γ-factor, each integrated over the unramified twists.
    #[test]
    fn gq_star_matches_character_expansion() {
        let p = 11u64;
        let k = QuadField::new(1).unwrap();
        let pi = ToyAutomorphicData::new(&k, 2, 5, SatakeMode::Generic);
        let q = k.factor_rational_prime(p).unwrap()[0];
        let g = gq_star_for(&pi, &k, &q, 6).unwrap();
        let fac = pi.factor_at(&q).unwrap();
        let t = g.table();
        let phi = (p - 1) as f64;
        let m = g.m as u32;
        for v in [-6i64, -4, -2, 0, 2] {
            for u in [1u32, 2, 3, 10] {
                let mut total = c(0.0, 0.0);
                for kk in 0..(p - 1) {
                    let eta = MultChar::new(kk as i64, p - 1);
                    let weight = eta.conj().eval(t, u);
                    let val = if eta.pow(2).is_trivial() {
                        a_part_exact(&fac, v)
                    } else if v == -2 * m as i64 {
                        residue::gauss_sum(t, &eta.pow(2)).powu(m) * (p as f64).powi(-(m as i32))
                    } else {
                        c(0.0, 0.0)
                    };
                    total += weight * val;
                }
                total /= phi;
                assert!((total - g.eval(v, u)).norm() < 1e-10, "v={v} u={u}");
            }
        }
    }

    #[test]
    fn dual_bounds_pass() {
        for seed in 0..3 {
            let g = setup(11, seed, 2);
            let audit = dual_bounds_audit(&g, 0.01, 10.0);
            assert!(audit.pass, "seed {seed}: {}", audit.max_ratio);
            assert!(audit.zero_outside_support && audit.zero_on_odd);
        }
    }
}
