//! Integral ideals as Z-lattices in Hermite normal form.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Basis, FieldElement, QuadField};
use crate::arith;
use crate::error::{Error, Result};

/// The lattice Z·a + Z·(b + c·ω) with c | a, c | b and 0 ≤ b < a.
///
/// Over Q the ideal (a) is stored as {a, 0, 1}.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IdealHNF {
    pub a: i128,
    pub b: i128,
    pub c: i128,
}

impl fmt::Debug for IdealHNF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {} + {}ω]", self.a, self.b, self.c)
    }
}

impl IdealHNF {
    pub fn unit() -> Self {
        IdealHNF { a: 1, b: 0, c: 1 }
    }

    pub fn norm(&self) -> u64 {
        (self.a * self.c) as u64
    }

    /// Smallest positive rational integer in the ideal.
    pub fn min_int(&self) -> i128 {
        self.a
    }

    pub fn is_unit(&self) -> bool {
        self.a == 1 && self.c == 1
    }

    pub fn contains_int(&self, x: (i128, i128)) -> bool {
        let (u, v) = x;
        if v % self.c != 0 {
            return false;
        }
        (u - (v / self.c) * self.b) % self.a == 0
    }

    pub fn contains(&self, x: &FieldElement) -> bool {
        x.to_int().is_some_and(|p| self.contains_int(p))
    }

    /// Canonical representative of x modulo the lattice.
    pub fn reduce_int(&self, x: (i128, i128)) -> (i128, i128) {
        let (u, v) = x;
        let vr = v.rem_euclid(self.c);
        let k = (v - vr) / self.c;
        let ur = (u - k * self.b).rem_euclid(self.a);
        (ur, vr)
    }

    /// HNF of the Z-span of the given vectors (which must span a full lattice).
    pub(crate) fn from_z_span(vectors: &[(i128, i128)]) -> Self {
        let mut a: i128 = 0;
        let (mut b, mut c): (i128, i128) = (0, 0);
        for &(x, y) in vectors {
            if y == 0 && c == 0 {
                a = arith::gcd(a, x);
                continue;
            }
            let (g, s, u) = arith::ext_gcd(c, y);
            let nb = s * b + u * x;
            let x0 = (y / g) * b - (c / g) * x;
            a = arith::gcd(a, x0);
            b = nb;
            c = g;
            if a != 0 {
                b = b.rem_euclid(a);
            }
        }
        assert!(a > 0 && c > 0, "generators do not span a full lattice");
        IdealHNF { a, b: b.rem_euclid(a), c }
    }

    pub(crate) fn z_basis(&self) -> [(i128, i128); 2] {
        [(self.a, 0), (self.b, self.c)]
    }
}

impl QuadField {
    /// Ideal generated (as an O_K-module) by integral elements.
    pub fn ideal_from_generators(&self, gens: &[FieldElement]) -> Result<IdealHNF> {
        let ints: Vec<(i128, i128)> = gens
            .iter()
            .map(|g| g.to_int().ok_or_else(|| Error::Unsupported("non-integral generator".into())))
            .collect::<Result<_>>()?;
        if ints.iter().all(|&(x, y)| x == 0 && y == 0) {
            return Err(Error::Unsupported("zero ideal".into()));
        }
        Ok(ideal_from_int_generators(&self.basis, &ints))
    }

    pub fn principal_ideal(&self, g: &FieldElement) -> Result<IdealHNF> {
        self.ideal_from_generators(std::slice::from_ref(g))
    }

    pub fn ideal_from_int(&self, n: i128) -> IdealHNF {
        ideal_from_int_generators(&self.basis, &[(n.abs(), 0)])
    }

    pub fn ideal_mul(&self, i: &IdealHNF, j: &IdealHNF) -> IdealHNF {
        ideal_mul(&self.basis, i, j)
    }

    pub fn ideal_pow(&self, i: &IdealHNF, k: u32) -> IdealHNF {
        let mut acc = IdealHNF::unit();
        for _ in 0..k {
            acc = self.ideal_mul(&acc, i);
        }
        acc
    }

    pub fn ideal_conj(&self, i: &IdealHNF) -> IdealHNF {
        if self.is_rational() {
            return *i;
        }
        let gens: Vec<_> = i.z_basis().iter().map(|&x| self.basis.conj_int(x)).collect();
        ideal_from_int_generators(&self.basis, &gens)
    }

    /// Checks that a Z-lattice HNF is closed under multiplication by ω.
    pub fn is_ideal_hnf(&self, i: &IdealHNF) -> bool {
        if i.a <= 0 || i.c <= 0 || i.a % i.c != 0 || i.b % i.c != 0 || i.b < 0 || i.b >= i.a {
            return false;
        }
        if self.is_rational() {
            return i.c == 1 && i.b == 0;
        }
        let w = (0, 1);
        i.z_basis().iter().all(|&x| i.contains_int(self.basis.mul_int(x, w)))
    }

    /// All integral ideals of norm exactly `norm`.
    pub fn ideals_of_norm(&self, norm: u64) -> Vec<IdealHNF> {
        let norm = norm as i128;
        let mut out = Vec::new();
        if self.is_rational() {
            out.push(IdealHNF { a: norm, b: 0, c: 1 });
            return out;
        }
        for c in 1..=arith::isqrt(norm) {
            if norm % c != 0 {
                continue;
            }
            let a = norm / c;
            if a % c != 0 {
                continue;
            }
            let mut b = 0;
            while b < a {
                let cand = IdealHNF { a, b, c };
                if self.is_ideal_hnf(&cand) {
                    out.push(cand);
                }
                b += c;
            }
        }
        out
    }

    /// Reduction O_K → O_K/𝔭 = Z/p for a degree-one prime with root r.
    pub fn reduce_mod_degree_one(&self, x: (i128, i128), p: u64, r: i128) -> u64 {
        (x.0 + x.1 * r).rem_euclid(p as i128) as u64
    }

    /// Every prime ideal of norm at most `bound`, sorted by norm.
    pub fn primes_up_to_norm(&self, bound: u64) -> Vec<PrimeIdealData> {
        let mut out = Vec::new();
        for p in arith::primes_up_to(bound) {
            if let Ok(list) = self.factor_rational_prime(p) {
                out.extend(list.into_iter().filter(|q| q.norm() <= bound));
            }
        }
        out.sort_by_key(|q| (q.norm(), q.hnf));
        out
    }
}

pub(crate) fn ideal_from_int_generators(basis: &Basis, gens: &[(i128, i128)]) -> IdealHNF {
    if basis.is_rational() {
        let a = gens.iter().fold(0, |g, x| arith::gcd(g, x.0));
        return IdealHNF { a, b: 0, c: 1 };
    }
    let mut vecs = Vec::with_capacity(gens.len() * 2);
    for &g in gens {
        vecs.push(g);
        vecs.push(basis.mul_int(g, (0, 1)));
    }
    IdealHNF::from_z_span(&vecs)
}

pub(crate) fn ideal_mul(basis: &Basis, i: &IdealHNF, j: &IdealHNF) -> IdealHNF {
    if basis.is_rational() {
        return IdealHNF { a: i.a * j.a, b: 0, c: 1 };
    }
    let mut gens = Vec::with_capacity(4);
    for x in i.z_basis() {
        for y in j.z_basis() {
            gens.push(basis.mul_int(x, y));
        }
    }
    ideal_from_int_generators(basis, &gens)
}

/// A prime ideal above p together with its splitting data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrimeIdealData {
    pub p: u64,
    pub f: u32,
    pub e: u32,
    pub hnf: IdealHNF,
    /// Root r of the minimal polynomial of ω mod p, so that ω ≡ r mod 𝔭 (f = 1).
    pub root: Option<i128>,
}

impl PrimeIdealData {
    pub fn norm(&self) -> u64 {
        self.p.pow(self.f)
    }

    pub fn is_ramified(&self) -> bool {
        self.e == 2
    }
}

pub(crate) fn factor_rational_prime(field: &QuadField, p: u64) -> Result<Vec<PrimeIdealData>> {
    if !arith::is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    let pi = p as i128;
    if field.is_rational() {
        return Ok(vec![PrimeIdealData { p, f: 1, e: 1, hnf: IdealHNF { a: pi, b: 0, c: 1 }, root: Some(0) }]);
    }
    let (t, n) = (field.basis.t, field.basis.n);
    // roots of x² - t x - n mod p by exhaustion for small p, quadratic formula otherwise
    let roots = poly_roots_mod_p(t, n, p);
    let mk = |r: i128, e: u32| PrimeIdealData {
        p,
        f: 1,
        e,
        hnf: IdealHNF { a: pi, b: (-r).rem_euclid(pi), c: 1 },
        root: Some(r),
    };
    Ok(match roots.len() {
        0 => vec![PrimeIdealData { p, f: 2, e: 1, hnf: IdealHNF { a: pi, b: 0, c: pi }, root: None }],
        1 => vec![mk(roots[0], 2)],
        _ => roots.iter().map(|&r| mk(r, 1)).collect(),
    })
}

/// Distinct roots of x² - t x - n in Z/p.
fn poly_roots_mod_p(t: i128, n: i128, p: u64) -> Vec<i128> {
    let pi = p as i128;
    let f = |x: i128| (x * x - t * x - n).rem_euclid(pi);
    if p <= 3 {
        return (0..pi).filter(|&x| f(x) == 0).collect();
    }
    // x = (t ± sqrt(t² + 4n)) / 2
    let disc = (t * t + 4 * n).rem_euclid(pi);
    let inv2 = arith::mod_inv(2, pi).unwrap();
    if disc == 0 {
        return vec![(t * inv2).rem_euclid(pi)];
    }
    match sqrt_mod_p(disc as u64, p) {
        None => Vec::new(),
        Some(s) => {
            let s = s as i128;
            let mut r = vec![((t + s) * inv2).rem_euclid(pi), ((t - s) * inv2).rem_euclid(pi)];
            r.sort();
            r
        }
    }
}

/// Tonelli-Shanks square root modulo an odd prime.
pub fn sqrt_mod_p(a: u64, p: u64) -> Option<u64> {
    let a = a % p;
    if a == 0 {
        return Some(0);
    }
    if p == 2 {
        return Some(a);
    }
    if arith::mod_pow(a, (p - 1) / 2, p) != 1 {
        return None;
    }
    let mut q = p - 1;
    let mut s = 0;
    while q % 2 == 0 {
        q /= 2;
        s += 1;
    }
    let mut z = 2;
    while arith::mod_pow(z, (p - 1) / 2, p) != p - 1 {
        z += 1;
    }
    let mulm = |x: u64, y: u64| ((x as u128 * y as u128) % p as u128) as u64;
    let mut m = s;
    let mut c = arith::mod_pow(z, q, p);
    let mut t = arith::mod_pow(a, q, p);
    let mut r = arith::mod_pow(a, (q + 1) / 2, p);
    while t != 1 {
        let mut i = 0;
        let mut tt = t;
        while tt != 1 {
            tt = mulm(tt, tt);
            i += 1;
        }
        let b = arith::mod_pow(c, 1 << (m - i - 1), p);
        m = i;
        c = mulm(b, b);
        t = mulm(t, c);
        r = mulm(r, b);
    }
    Some(r)
}
