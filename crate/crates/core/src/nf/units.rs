//! Fundamental units and the image of the unit group modulo an ideal.

use super::{FieldElement, IdealHNF, PrimeIdealData, QuadField};
use crate::arith;
use crate::error::{Error, Result};

const CF_MAX_STEPS: usize = 1_000_000;

/// Fundamental unit ε > 1 (under μ) from the continued fraction of ω_μ.
///
/// The first convergent p/q with N(p - qω) = ±1 yields the smallest unit
/// greater than one, namely the conjugate (p - qt) + qω.
pub(crate) fn fundamental_unit_cf(field: &QuadField) -> Result<FieldElement> {
    if field.is_rational() {
        return Err(Error::NoUnits);
    }
    let basis = field.basis;
    let dd = field.d as i128;
    let s = arith::isqrt(dd);
    let (mut pp, mut qq) = if basis.t == 1 { (1i128, 2i128) } else { (0, 1) };
    let (mut p_prev, mut p_cur) = (0i128, 1i128);
    let (mut q_prev, mut q_cur) = (1i128, 0i128);
    for _ in 0..CF_MAX_STEPS {
        let a = (pp + s).div_euclid(qq);
        let p_next =
            a.checked_mul(p_cur).and_then(|x| x.checked_add(p_prev)).ok_or(Error::Overflow("fundamental unit"))?;
        let q_next =
            a.checked_mul(q_cur).and_then(|x| x.checked_add(q_prev)).ok_or(Error::Overflow("fundamental unit"))?;
        (p_prev, p_cur) = (p_cur, p_next);
        (q_prev, q_cur) = (q_cur, q_next);
        let x = (p_cur, -q_cur);
        let nrm = checked_norm(&basis, x).ok_or(Error::Overflow("fundamental unit"))?;
        if nrm == 1 || nrm == -1 {
            let eps = basis.conj_int(x);
            return Ok(FieldElement::from_int(basis, eps.0, eps.1));
        }
        let p_new = a * qq - pp;
        qq = (dd - p_new * p_new) / qq;
        pp = p_new;
    }
    Err(Error::NonConvergent("continued fraction of ω".into()))
}

fn checked_norm(basis: &super::Basis, x: (i128, i128)) -> Option<i128> {
    let (a, b) = x;
    a.checked_mul(a)?
        .checked_add(basis.t.checked_mul(a)?.checked_mul(b)?)?
        .checked_sub(basis.n.checked_mul(b)?.checked_mul(b)?)
}

pub(crate) fn mul_mod(field: &QuadField, m: &IdealHNF, x: (i128, i128), y: (i128, i128)) -> (i128, i128) {
    m.reduce_int(field.basis.mul_int(x, y))
}

pub(crate) fn pow_mod(field: &QuadField, m: &IdealHNF, x: (i128, i128), mut k: u64) -> (i128, i128) {
    let mut acc = m.reduce_int((1, 0));
    let mut b = m.reduce_int(x);
    while k > 0 {
        if k & 1 == 1 {
            acc = mul_mod(field, m, acc, b);
        }
        k >>= 1;
        if k > 0 {
            b = mul_mod(field, m, b, b);
        }
    }
    acc
}

/// |image of O_K^× in (O_K/m)^×| by generating the cyclic group of ε and
/// testing whether -1 lies in it.
pub fn unit_image_mod(field: &QuadField, m: &IdealHNF) -> Result<u64> {
    let one = m.reduce_int((1, 0));
    let minus_one = m.reduce_int((-1, 0));
    let sign_factor = |found: bool| if found || one == minus_one { 1 } else { 2 };
    if field.is_rational() {
        return Ok(sign_factor(false));
    }
    let eps = field.fundamental_unit()?.to_int().expect("units are integral");
    let e = m.reduce_int(eps);
    let mut x = e;
    let mut k: u64 = 1;
    let mut found = false;
    let cap = m.norm() + 1;
    while x != one {
        if x == minus_one {
            found = true;
        }
        x = mul_mod(field, m, x, e);
        k += 1;
        if k > cap {
            return Err(Error::NonConvergent("unit order exceeds |(O/m)^×|".into()));
        }
    }
    Ok(k * sign_factor(found))
}

/// Same count for a squarefree modulus given by its distinct prime factors,
/// using per-prime orders and a congruence test for -1.
pub fn unit_image_mod_squarefree(field: &QuadField, primes: &[PrimeIdealData]) -> Result<u64> {
    let divides_two = primes.iter().all(|q| q.p == 2);
    if field.is_rational() {
        return Ok(if divides_two { 1 } else { 2 });
    }
    let eps = field.fundamental_unit()?.to_int().expect("units are integral");
    let mut order: u64 = 1;
    let mut congruences = Vec::new();
    let mut minus_one_reachable = true;
    for q in primes {
        let o = order_mod_prime(field, q, eps);
        order = arith::lcm_u64(order, o);
        if q.p != 2 {
            // -1 is the unique element of order 2 in the cyclic group (O/𝔭)^×
            if o % 2 == 0 {
                congruences.push((o / 2, o));
            } else {
                minus_one_reachable = false;
            }
        }
    }
    if minus_one_reachable && arith::crt(&congruences).is_none() {
        minus_one_reachable = false;
    }
    Ok(if minus_one_reachable || divides_two { order } else { 2 * order })
}

/// Multiplicative order of x modulo a prime ideal.
pub fn order_mod_prime(field: &QuadField, q: &PrimeIdealData, x: (i128, i128)) -> u64 {
    let group = q.norm() - 1;
    let mut o = group;
    for (l, _) in arith::factorize(group) {
        while o % l == 0 && pow_mod(field, &q.hnf, x, o / l) == q.hnf.reduce_int((1, 0)) {
            o /= l;
        }
    }
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fundamental_unit_examples() {
        let k5 = QuadField::new(5).unwrap();
        assert_eq!(k5.fundamental_unit().unwrap(), k5.elem(0, 1));
        let k2 = QuadField::new(2).unwrap();
        assert_eq!(k2.fundamental_unit().unwrap(), k2.elem(1, 1));
        let k3 = QuadField::new(3).unwrap();
        let e3 = k3.fundamental_unit().unwrap();
        assert_eq!(e3, k3.elem(2, 1));
        assert_eq!(e3.norm(), super::super::Rational::from_integer(1));
    }

    #[test]
    fn unit_is_minimal_by_brute_force() {
        // smallest unit > 1 found by scanning x + yω with small coordinates
        for d in [2, 3, 5, 6, 7, 10, 11, 13, 14, 15, 17, 19, 21, 22, 23, 29, 31, 46] {
            let k = QuadField::new(d).unwrap();
            let eps = k.fundamental_unit().unwrap();
            let em = eps.embeddings().0;
            assert!(em > 1.0);
            assert_eq!(super::super::abs_rat(&eps.norm()), super::super::Rational::from_integer(1));
            let mut best = f64::INFINITY;
            for y in 1..=3000i128 {
                for sgn in [1, -1] {
                    let (wm, _) = k.basis.omega_embeddings();
                    let x = (-(y as f64) * wm).round() as i128;
                    for dx in -2..=2 {
                        let n = k.basis.norm_int((x + dx, y));
                        if n == sgn {
                            let v = k.elem(x + dx, y).embeddings();
                            for val in [v.0.abs(), 1.0 / v.0.abs()] {
                                if val > 1.0 + 1e-9 && val < best {
                                    best = val;
                                }
                            }
                        }
                    }
                }
            }
            if best.is_finite() {
                assert!(em <= best * (1.0 + 1e-9), "d = {d}: ε_μ = {em}, found {best}");
            }
        }
    }

    #[test]
    fn unit_image_examples() {
        let k5 = QuadField::new(5).unwrap();
        let q11 = k5.factor_rational_prime(11).unwrap();
        let q = q11.iter().find(|q| q.root == Some(4)).unwrap();
        assert_eq!(unit_image_mod(&k5, &q.hnf).unwrap(), 10);
        let k2 = QuadField::new(2).unwrap();
        let q7 = k2.factor_rational_prime(7).unwrap();
        let q = q7.iter().find(|q| q.root == Some(3)).unwrap();
        assert_eq!(unit_image_mod(&k2, &q.hnf).unwrap(), 6);
        assert_eq!(unit_image_mod(&k2, &IdealHNF::unit()).unwrap(), 1);
    }

    /// Subgroup generated by {-1, ε} in (O/m)^× by closure.
    fn image_by_closure(k: &QuadField, m: &IdealHNF) -> u64 {
        let mut seen = std::collections::BTreeSet::new();
        let one = m.reduce_int((1, 0));
        let gens = [m.reduce_int((-1, 0)), m.reduce_int(k.fundamental_unit().unwrap().to_int().unwrap())];
        let mut stack = vec![one];
        seen.insert(one);
        while let Some(x) = stack.pop() {
            for g in gens {
                let y = mul_mod(k, m, x, g);
                if seen.insert(y) {
                    stack.push(y);
                }
            }
        }
        seen.len() as u64
    }

    #[test]
    fn unit_image_agrees_with_closure_and_crt() {
        for d in [2, 3, 5, 10] {
            let k = QuadField::new(d).unwrap();
            let primes = k.primes_up_to_norm(60);
            for n in 2..200 {
                for m in k.ideals_of_norm(n) {
                    assert_eq!(unit_image_mod(&k, &m).unwrap(), image_by_closure(&k, &m), "d={d} m={m:?}");
                }
            }
            for i in 0..primes.len() {
                for j in i + 1..primes.len() {
                    let set = [primes[i], primes[j]];
                    let m = k.ideal_mul(&set[0].hnf, &set[1].hnf);
                    assert_eq!(
                        unit_image_mod_squarefree(&k, &set).unwrap(),
                        unit_image_mod(&k, &m).unwrap(),
                        "d={d} {:?}",
                        set
                    );
                }
            }
        }
    }

    #[test]
    fn powers_reduce_consistently() {
        for d in [2, 5] {
            let k = QuadField::new(d).unwrap();
            let eps = k.fundamental_unit().unwrap();
            for n in 2..500 {
                for m in k.ideals_of_norm(n) {
                    let r = m.reduce_int(eps.to_int().unwrap());
                    for e in 0..=50u64 {
                        let direct = eps.pow(e as i64).unwrap().to_int().unwrap();
                        let cd = k.basis.checked_mul_int(direct, (1, 0));
                        if let Some(direct) = cd {
                            assert_eq!(m.reduce_int(direct), pow_mod(&k, &m, r, e));
                        }
                    }
                }
            }
        }
    }
}
