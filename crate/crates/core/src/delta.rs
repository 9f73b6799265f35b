//! Ramanujan's Δ: τ(n) from the η-product and the normalized coefficients of
//! L(s, sym²Δ).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::local::{LocalSym2Factor, SatakeLocal};
use crate::special::ArchFactor;

/// τ(1..=n_max) from Δ = q·J⁸ with J = Π(1 - q^k)³ = Σ (-1)^k (2k+1) q^{k(k+1)/2}.
pub fn tau_table(n_max: usize) -> Result<Vec<i128>> {
    // J mod q^{n_max}; τ(n) is the coefficient of q^{n-1} in J⁸
    let len = n_max;
    let mut sparse = Vec::new();
    let mut k = 0usize;
    while k * (k + 1) / 2 < len {
        let sign = if k % 2 == 0 { 1 } else { -1 };
        sparse.push((k * (k + 1) / 2, sign * (2 * k as i128 + 1)));
        k += 1;
    }
    let mut acc = vec![0i128; len];
    for &(e, c) in &sparse {
        acc[e] = c;
    }
    for _ in 1..8 {
        let mut next = vec![0i128; len];
        for &(e, c) in &sparse {
            for i in 0..len - e {
                if acc[i] != 0 {
                    let t = acc[i].checked_mul(c).ok_or(Error::Overflow("tau_table"))?;
                    next[i + e] = next[i + e].checked_add(t).ok_or(Error::Overflow("tau_table"))?;
                }
            }
        }
        acc = next;
    }
    let mut out = vec![0i128; n_max + 1];
    out[1..=n_max].copy_from_slice(&acc[..n_max]);
    Ok(out)
}

/// Tables for L(s, sym²Δ): λ(p) = τ(p)²/p¹¹ - 1, extended multiplicatively.
#[derive(Debug, Clone)]
pub struct DeltaSym2Data {
    pub n_max: usize,
    pub tau: Vec<i128>,
    /// λ(n), n ≤ n_max (index 0 unused).
    pub lambda: Vec<f64>,
    spf: Vec<u32>,
}

impl DeltaSym2Data {
    pub fn new(n_max: usize) -> Result<Self> {
        let n_max = n_max.max(2);
        let tau = tau_table(n_max)?;
        let mut spf = vec![0u32; n_max + 1];
        for i in 2..=n_max {
            if spf[i] == 0 {
                let mut j = i;
                while j <= n_max {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                    j += i;
                }
            }
        }
        let mut lambda = vec![0.0; n_max + 1];
        lambda[1] = 1.0;
        for n in 2..=n_max {
            let p = spf[n] as usize;
            let mut m = n;
            let mut k = 0;
            while m % p == 0 {
                m /= p;
                k += 1;
            }
            lambda[n] = if m == 1 { Self::prime_power(&tau, p, k) } else { lambda[m] * lambda[n / m] };
        }
        Ok(DeltaSym2Data { n_max, tau, lambda, spf })
    }

    fn normalized_ap(tau: &[i128], p: usize) -> f64 {
        tau[p] as f64 / (p as f64).powf(5.5)
    }

    /// h_k(α², 1, α⁻²) via e₁ = e₂ = λ(p), e₃ = 1.
    fn prime_power(tau: &[i128], p: usize, k: u32) -> f64 {
        let a = Self::normalized_ap(tau, p);
        let l1 = a * a - 1.0;
        let mut h = vec![1.0, l1];
        for r in 2..=k as usize {
            let h3 = if r >= 3 { h[r - 3] } else { 0.0 };
            h.push(l1 * h[r - 1] - l1 * h[r - 2] + h3);
        }
        h[k as usize]
    }

    pub fn is_prime(&self, n: usize) -> bool {
        n >= 2 && self.spf[n] as usize == n
    }

    /// Satake pair (α, 1/α) of Δ at p with α + 1/α = τ(p)/p^{11/2}.
    pub fn satake(&self, p: usize) -> Result<SatakeLocal> {
        if p > self.n_max || !self.is_prime(p) {
            return Err(Error::NotPrime(p as u64));
        }
        let a = Self::normalized_ap(&self.tau, p);
        let disc = Complex64::new(a * a - 4.0, 0.0).sqrt();
        let alpha = (Complex64::new(a, 0.0) + disc) / 2.0;
        Ok(SatakeLocal::new(p as f64, vec![alpha, 1.0 / alpha]))
    }

    pub fn local_factor(&self, p: usize) -> Result<LocalSym2Factor> {
        Ok(self.satake(p)?.sym2_factor())
    }

    /// Γ_ℝ(s+1)Γ_ℂ(s+11).
    pub fn arch() -> ArchFactor {
        ArchFactor { gamma_r: vec![Complex64::new(1.0, 0.0)], gamma_c: vec![Complex64::new(11.0, 0.0)] }
    }

    /// λ(p^k) by the τ Hecke recursion instead of the Satake route.
    pub fn lambda_prime_power_via_tau(&self, p: usize, k: u32) -> f64 {
        // normalized a(p^{j+1}) = a(p)a(p^j) - a(p^{j-1})
        let a = Self::normalized_ap(&self.tau, p);
        let mut an = vec![1.0, a];
        for j in 1..(2 * k as usize).max(1) {
            an.push(a * an[j] - an[j - 1]);
        }
        sym2_from_hecke(&an, k as usize)
    }

    pub fn deligne_ok(&self, p: usize) -> bool {
        (self.tau[p] as f64).abs() <= 2.0 * (p as f64).powf(5.5) * (1.0 + 1e-12)
    }
}

/// Σ_j a(p^{2j}) Y^j = (1+Y)/((1-α²Y)(1-α⁻²Y)), so Σ h_k Y^k is that series
/// divided by 1 - Y², i.e. h_k = a(p^{2k}) + a(p^{2k-4}) + ….
fn sym2_from_hecke(a: &[f64], k: usize) -> f64 {
    let mut total = 0.0;
    let mut j = k as i64;
    while j >= 0 {
        total += a[2 * j as usize];
        j -= 2;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_values() {
        let t = tau_table(30).unwrap();
        let known: [i128; 12] = [1, -24, 252, -1472, 4830, -6048, -16744, 84480, -113643, -115920, 534612, -370944];
        assert_eq!(&t[1..13], &known);
        assert_eq!(t[23], 18643272);
    }

    #[test]
    fn hecke_relations_and_deligne() {
        let d = DeltaSym2Data::new(5000).unwrap();
        let t = &d.tau;
        for (m, n) in [(2usize, 3usize), (5, 7), (4, 9), (11, 13), (8, 25)] {
            assert_eq!(t[m * n], t[m] * t[n]);
        }
        for p in [2usize, 3, 5, 7] {
            let p11 = (p as i128).pow(11);
            assert_eq!(t[p * p], t[p] * t[p] - p11);
            if p * p * p <= 5000 {
                assert_eq!(t[p * p * p], t[p] * t[p * p] - p11 * t[p]);
            }
        }
        for p in 2..=5000 {
            if d.is_prime(p) {
                assert!(d.deligne_ok(p), "{p}");
            }
        }
    }

    #[test]
    fn sym2_coefficients() {
        let d = DeltaSym2Data::new(2000).unwrap();
        assert!((d.lambda[2] + 0.71875).abs() < 1e-14);
        for p in [2usize, 3, 5, 7, 11, 13] {
            let a = d.tau[p] as f64 / (p as f64).powf(5.5);
            assert!((d.lambda[p] - (a * a - 1.0)).abs() < 1e-12);
            let f = d.local_factor(p).unwrap();
            for k in 1..=4u32 {
                if p.pow(k) <= 2000 {
                    assert!((d.lambda[p.pow(k)] - f.lambda[k as usize].re).abs() < 1e-10);
                    assert!((d.lambda[p.pow(k)] - d.lambda_prime_power_via_tau(p, k)).abs() < 1e-10);
                }
            }
        }
        assert!((d.lambda[6] - d.lambda[2] * d.lambda[3]).abs() < 1e-14);
        assert!((d.lambda[45] - d.lambda[9] * d.lambda[5]).abs() < 1e-14);
    }
}
