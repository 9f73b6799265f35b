//! Residue fields O_K/𝔮, their characters, Gauss sums and hyper-Kloosterman sums.
//!
//! The additive character is ψ(x) = e(Tr(x)/p) with Tr the trace down to the
//! prime field. Only the magnitudes and full character sums depend on it being
//! nontrivial, so this choice is harmless for unramified 𝔮.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::arith;
use crate::error::{Error, Result};
use crate::nf::{PrimeIdealData, QuadField};

pub const TABLE_BUDGET: u64 = 1 << 20;
pub const BRUTE_FORCE_BUDGET: u64 = 200_000_000;
const NAIVE_CONVOLUTION_LIMIT: usize = 1 << 12;

/// e(x) = exp(2πi x).
pub fn e(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * x)
}

/// F_q with q = p^f, f ∈ {1, 2}. Elements are indices u + v·p standing for
/// u + v·θ where θ² = t·θ + n.
#[derive(Debug, Clone)]
pub struct ResidueFieldTable {
    pub p: u64,
    pub f: u32,
    pub q: u64,
    pub t: u64,
    pub n: u64,
    pub generator: u32,
    exp: Vec<u32>,
    log: Vec<u32>,
    trace: Vec<u32>,
    roots_p: Vec<Complex64>,
    /// The prime ideal this table reduces from, if any.
    pub prime: Option<PrimeIdealData>,
    /// Minimal polynomial data of ω over Z, for reducing field elements.
    omega_root: Option<u64>,
}

impl ResidueFieldTable {
    /// Field F_p (f = 1) or F_p[θ]/(θ² - tθ - n) (f = 2; the polynomial must be irreducible).
    pub fn new(p: u64, f: u32, t: u64, n: u64) -> Result<Self> {
        if !arith::is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        let q = p.checked_pow(f).ok_or(Error::TableBudgetExceeded { size: u64::MAX, budget: TABLE_BUDGET })?;
        if q > TABLE_BUDGET {
            return Err(Error::TableBudgetExceeded { size: q, budget: TABLE_BUDGET });
        }
        let (t, n) = (t % p, n % p);
        if f == 2 && (0..p).any(|x| (x * x + p * p - t * x % p - n) % p == 0) {
            return Err(Error::Unsupported(format!("θ² - {t}θ - {n} is reducible mod {p}")));
        }
        if f > 2 || f == 0 {
            return Err(Error::Unsupported(format!("residue degree {f}")));
        }
        let mut tab = ResidueFieldTable {
            p,
            f,
            q,
            t,
            n,
            generator: 0,
            exp: Vec::new(),
            log: Vec::new(),
            trace: Vec::new(),
            roots_p: (0..p).map(|j| e(j as f64 / p as f64)).collect(),
            prime: None,
            omega_root: None,
        };
        tab.trace = (0..q as u32)
            .map(|x| {
                let (u, v) = tab.coords(x);
                if f == 1 {
                    u as u32
                } else {
                    ((2 * u + v * t) % p) as u32
                }
            })
            .collect();
        let order = q - 1;
        let factors: Vec<u64> = arith::factorize(order).into_iter().map(|(l, _)| l).collect();
        let g =
            (1..q as u32).find(|&x| factors.iter().all(|&l| tab.pow_raw(x, order / l) != 1)).expect("F_q^× is cyclic");
        tab.generator = g;
        tab.exp = Vec::with_capacity(order as usize);
        tab.log = vec![u32::MAX; q as usize];
        let mut x = 1u32;
        for k in 0..order {
            tab.exp.push(x);
            tab.log[x as usize] = k as u32;
            x = tab.mul_raw(x, g);
        }
        debug_assert_eq!(x, 1);
        Ok(tab)
    }

    pub fn coords(&self, x: u32) -> (u64, u64) {
        (x as u64 % self.p, x as u64 / self.p)
    }

    pub fn index(&self, u: u64, v: u64) -> u32 {
        ((u % self.p) + (v % self.p) * self.p) as u32
    }

    fn mul_raw(&self, x: u32, y: u32) -> u32 {
        let p = self.p;
        let (a, b) = self.coords(x);
        let (c, d) = self.coords(y);
        if self.f == 1 {
            return (a * c % p) as u32;
        }
        let bd = b * d % p;
        let u = (a * c + self.n * bd) % p;
        let v = (a * d + b * c + self.t * bd) % p;
        self.index(u, v)
    }

    fn pow_raw(&self, x: u32, mut k: u64) -> u32 {
        let mut acc = 1u32;
        let mut b = x;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul_raw(acc, b);
            }
            b = self.mul_raw(b, b);
            k >>= 1;
        }
        acc
    }

    pub fn order(&self) -> u64 {
        self.q - 1
    }

    pub fn mul(&self, x: u32, y: u32) -> u32 {
        if x == 0 || y == 0 {
            return 0;
        }
        let k = (self.log[x as usize] as u64 + self.log[y as usize] as u64) % self.order();
        self.exp[k as usize]
    }

    pub fn add(&self, x: u32, y: u32) -> u32 {
        let (a, b) = self.coords(x);
        let (c, d) = self.coords(y);
        self.index(a + c, b + d)
    }

    pub fn neg(&self, x: u32) -> u32 {
        let (a, b) = self.coords(x);
        self.index(self.p - a, self.p - b)
    }

    pub fn inv(&self, x: u32) -> Option<u32> {
        (x != 0).then(|| {
            let k = (self.order() - self.log[x as usize] as u64) % self.order();
            self.exp[k as usize]
        })
    }

    pub fn from_int(&self, a: i128) -> u32 {
        a.rem_euclid(self.p as i128) as u32
    }

    /// Discrete log to base `generator`; None for 0.
    pub fn dlog(&self, x: u32) -> Option<u64> {
        let l = self.log[x as usize];
        (l != u32::MAX).then_some(l as u64)
    }

    pub fn exp(&self, k: u64) -> u32 {
        self.exp[(k % self.order()) as usize]
    }

    pub fn trace(&self, x: u32) -> u64 {
        self.trace[x as usize] as u64
    }

    /// ψ(x) = e(Tr(x)/p).
    pub fn psi(&self, x: u32) -> Complex64 {
        self.roots_p[self.trace[x as usize] as usize]
    }

    pub fn is_square(&self, x: u32) -> bool {
        x == 0 || self.p == 2 || self.log[x as usize] % 2 == 0
    }

    /// Square roots of x (empty when x is a non-square).
    pub fn sqrt(&self, x: u32) -> Vec<u32> {
        if x == 0 {
            return vec![0];
        }
        let l = self.log[x as usize] as u64;
        if self.p == 2 {
            // odd group order: squaring is a bijection
            let h = if l % 2 == 0 { l / 2 } else { (l + self.order()) / 2 };
            return vec![self.exp(h)];
        }
        if l % 2 == 1 {
            return Vec::new();
        }
        let r = self.exp(l / 2);
        vec![r, self.neg(r)]
    }

    /// Reduction of an integral element x + yω of the field this table came from.
    pub fn reduce(&self, x: (i128, i128)) -> u32 {
        let p = self.p as i128;
        match (self.f, self.omega_root) {
            (1, Some(r)) => self.from_int(x.0 + x.1 * r as i128),
            (1, None) => self.from_int(x.0),
            _ => self.index(x.0.rem_euclid(p) as u64, x.1.rem_euclid(p) as u64),
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = u32> {
        0..self.q as u32
    }

    pub fn units(&self) -> impl Iterator<Item = u32> + '_ {
        self.exp.iter().copied()
    }
}

/// Residue field of an unramified prime ideal of K.
pub fn build_residue_field(field: &QuadField, prime: &PrimeIdealData) -> Result<ResidueFieldTable> {
    if prime.e == 2 {
        return Err(Error::RamifiedPrime(prime.p));
    }
    let q = prime.norm();
    if q > TABLE_BUDGET {
        return Err(Error::TableBudgetExceeded { size: q, budget: TABLE_BUDGET });
    }
    let mut tab = if prime.f == 1 {
        ResidueFieldTable::new(prime.p, 1, 0, 0)?
    } else {
        let p = prime.p as i128;
        ResidueFieldTable::new(prime.p, 2, field.basis.t.rem_euclid(p) as u64, field.basis.n.rem_euclid(p) as u64)?
    };
    tab.prime = Some(*prime);
    tab.omega_root = prime.root.map(|r| r.rem_euclid(prime.p as i128) as u64);
    if field.is_rational() {
        tab.omega_root = None;
    }
    Ok(tab)
}

/// Multiplicative character x ↦ e(k·dlog(x)/(q-1)).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct MultChar {
    pub k: u64,
    pub modulus: u64,
}

impl MultChar {
    pub fn new(k: i64, modulus: u64) -> Self {
        MultChar { k: k.rem_euclid(modulus as i64) as u64, modulus }
    }

    pub fn trivial(modulus: u64) -> Self {
        MultChar { k: 0, modulus }
    }

    pub fn quadratic(modulus: u64) -> Self {
        assert!(modulus % 2 == 0);
        MultChar { k: modulus / 2, modulus }
    }

    /// 0 for the trivial character, 1 otherwise.
    pub fn degree(&self) -> u32 {
        u32::from(self.k != 0)
    }

    pub fn is_trivial(&self) -> bool {
        self.k == 0
    }

    pub fn mul(&self, o: &MultChar) -> MultChar {
        MultChar { k: (self.k + o.k) % self.modulus, modulus: self.modulus }
    }

    pub fn pow(&self, n: i64) -> MultChar {
        let m = self.modulus as i128;
        MultChar { k: ((self.k as i128 * n as i128).rem_euclid(m)) as u64, modulus: self.modulus }
    }

    pub fn conj(&self) -> MultChar {
        self.pow(-1)
    }

    pub fn order(&self) -> u64 {
        self.modulus / arith::gcd_u64(self.k, self.modulus)
    }

    pub fn eval(&self, tab: &ResidueFieldTable, x: u32) -> Complex64 {
        match tab.dlog(x) {
            None => Complex64::new(0.0, 0.0),
            Some(l) => e(((self.k as u128 * l as u128) % self.modulus as u128) as f64 / self.modulus as f64),
        }
    }
}

/// τ(χ) = Σ_{x≠0} χ(x) ψ(x).
pub fn gauss_sum(tab: &ResidueFieldTable, chi: &MultChar) -> Complex64 {
    let terms: Vec<Complex64> = (0..tab.order())
        .map(|j| {
            let x = tab.exp(j);
            let ph = ((chi.k as u128 * j as u128) % chi.modulus as u128) as f64 / chi.modulus as f64;
            e(ph) * tab.psi(x)
        })
        .collect();
    arith::pairwise_sum_c(&terms)
}

/// τ(χ_k) for every k ∈ Z/(q-1) by one discrete Fourier transform.
pub fn gauss_sums_all(tab: &ResidueFieldTable) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = (0..tab.order()).map(|j| tab.psi(tab.exp(j))).collect();
    let mut planner = FftPlanner::new();
    // inverse transform: Σ_j x_j e(+jk/n)
    planner.plan_fft_inverse(buf.len()).process(&mut buf);
    buf
}

/// Degree-m hyper-Kloosterman sum Σ_{y₁⋯y_m = y} ψ(y₁ + ⋯ + y_m) by direct summation.
pub fn kloosterman(tab: &ResidueFieldTable, m: u32, y: u32) -> Result<Complex64> {
    if m == 0 {
        return Err(Error::Unsupported("m = 0".into()));
    }
    if y == 0 {
        return Err(Error::Unsupported("y must be nonzero".into()));
    }
    let n = tab.order();
    let cost = n.checked_pow(m - 1).unwrap_or(u64::MAX);
    if cost > BRUTE_FORCE_BUDGET {
        return Err(Error::CostBudgetExceeded { cost, budget: BRUTE_FORCE_BUDGET });
    }
    // work in the dlog domain: exponents j₁..j_{m-1}, last one forced
    let ly = tab.dlog(y).unwrap();
    let mut idx = vec![0u64; (m - 1) as usize];
    let mut total = Complex64::new(0.0, 0.0);
    loop {
        let mut s = 0u32;
        let mut ls = 0u64;
        for &j in &idx {
            s = tab.add(s, tab.exp(j));
            ls += j;
        }
        let last = tab.exp((ly + n * (m as u64) - ls % n) % n);
        total += tab.psi(tab.add(s, last));
        // odometer
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return Ok(total);
            }
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Kl_m(y) for every nonzero y, indexed by dlog(y): the m-fold cyclic
/// convolution of j ↦ ψ(g^j).
pub fn kloosterman_all(tab: &ResidueFieldTable, m: u32) -> Vec<Complex64> {
    let base: Vec<Complex64> = (0..tab.order()).map(|j| tab.psi(tab.exp(j))).collect();
    cyclic_power(&base, m)
}

/// Same table re-indexed by the element: out[y] = Kl_m(y), out[0] = 0.
pub fn kloosterman_by_element(tab: &ResidueFieldTable, m: u32) -> Vec<Complex64> {
    let by_log = kloosterman_all(tab, m);
    let mut out = vec![Complex64::new(0.0, 0.0); tab.q as usize];
    for (j, v) in by_log.into_iter().enumerate() {
        out[tab.exp(j as u64) as usize] = v;
    }
    out
}

fn cyclic_power(base: &[Complex64], m: u32) -> Vec<Complex64> {
    let n = base.len();
    if m <= 1 {
        return base.to_vec();
    }
    if n < NAIVE_CONVOLUTION_LIMIT {
        let mut acc = base.to_vec();
        for _ in 1..m {
            let mut next = vec![Complex64::new(0.0, 0.0); n];
            for (i, &a) in acc.iter().enumerate() {
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (j, &b) in base.iter().enumerate() {
                    next[(i + j) % n] += a * b;
                }
            }
            acc = next;
        }
        return acc;
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf = base.to_vec();
    fwd.process(&mut buf);
    for v in buf.iter_mut() {
        *v = v.powu(m);
    }
    inv.process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|v| v * scale).collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub diff: f64,
}

/// Σ_{η≠1} τ(η²)^m η̄(y) for every nonzero y, indexed by dlog(y).
pub fn eta_square_sums(tab: &ResidueFieldTable, m: u32) -> Vec<Complex64> {
    let n = tab.order() as usize;
    let taus = gauss_sums_all(tab);
    let mut coeff: Vec<Complex64> = (0..n).map(|k| taus[(2 * k) % n].powu(m)).collect();
    coeff[0] = Complex64::new(0.0, 0.0);
    // Σ_k c_k e(-k·l/n): a forward transform
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut coeff);
    coeff
}

/// Both sides of (1/φ)((−1)^m + Σ_{η≠1} τ(η²)^m η̄(y)) = Σ_{z² = y} Kl_m(z).
pub fn convolution_identity_check(tab: &ResidueFieldTable, m: u32, y: u32) -> Result<IdentityCheck> {
    if y == 0 {
        return Err(Error::Unsupported("y must be nonzero".into()));
    }
    if tab.q % 2 == 0 {
        return Err(Error::Unsupported("identity needs odd q".into()));
    }
    let phi = tab.order() as f64;
    let l = tab.dlog(y).unwrap() as usize;
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    let lhs = (eta_square_sums(tab, m)[l] + sign) / phi;
    let kl = kloosterman_all(tab, m);
    let rhs = tab.sqrt(y).into_iter().map(|z| kl[tab.dlog(z).unwrap() as usize]).sum::<Complex64>();
    Ok(IdentityCheck { lhs, rhs, diff: (lhs - rhs).norm() })
}

/// One row of a Kloosterman bound audit.
#[derive(Debug, Clone, Serialize)]
pub struct KlAuditRow {
    pub q: u64,
    pub f: u32,
    pub m: u32,
    pub y: u32,
    pub re: f64,
    pub im: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// |Kl_m(y)| against m·q^{(m-1)/2} for every nonzero y.
pub fn deligne_audit(tab: &ResidueFieldTable, m: u32) -> Vec<KlAuditRow> {
    let bound = m as f64 * (tab.q as f64).powf((m as f64 - 1.0) / 2.0);
    kloosterman_all(tab, m)
        .into_iter()
        .enumerate()
        .map(|(j, v)| KlAuditRow {
            q: tab.q,
            f: tab.f,
            m,
            y: tab.exp(j as u64),
            re: v.re,
            im: v.im,
            bound,
            ratio: v.norm() / bound,
        })
        .collect()
}

pub fn write_kl_csv<W: Write>(out: &mut W, rows: &[KlAuditRow]) -> std::io::Result<()> {
    writeln!(out, "q,f,m,y,re,im,bound,ratio")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{:.12e},{:.12e},{:.12e},{:.12e}", r.q, r.f, r.m, r.y, r.re, r.im, r.bound, r.ratio)?;
    }
    Ok(())
}
