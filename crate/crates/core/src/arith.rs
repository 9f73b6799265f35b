//! Small exact integer helpers shared by the number-field and finite-field code.

pub fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn gcd_u64(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn lcm_u64(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        return 0;
    }
    a / gcd_u64(a, b) * b
}

/// Extended Euclid: returns (g, x, y) with a*x + b*y = g >= 0.
pub fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let q = old_r.div_euclid(r);
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

/// Floor of the square root of a non-negative integer.
pub fn isqrt(n: i128) -> i128 {
    assert!(n >= 0, "isqrt of negative");
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as i128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

pub fn is_square(n: i128) -> bool {
    n >= 0 && {
        let r = isqrt(n);
        r * r == n
    }
}

pub fn mod_pow(base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut result = 1u128;
    let mut b = (base % m) as u128;
    let m = m as u128;
    while exp > 0 {
        if exp & 1 == 1 {
            result = result * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    result as u64
}

pub fn mod_inv(a: i128, m: i128) -> Option<i128> {
    let (g, x, _) = ext_gcd(a.rem_euclid(m), m);
    (g == 1).then(|| x.rem_euclid(m))
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    // deterministic Miller-Rabin for u64
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = mod_pow(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = ((x as u128 * x as u128) % n as u128) as u64;
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Primes up to and including `n`.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut sieve = vec![true; n + 1];
    sieve[0] = false;
    sieve[1] = false;
    let mut i = 2;
    while i * i <= n {
        if sieve[i] {
            let mut j = i * i;
            while j <= n {
                sieve[j] = false;
                j += i;
            }
        }
        i += 1;
    }
    sieve.iter().enumerate().filter_map(|(k, &p)| p.then_some(k as u64)).collect()
}

/// Prime factorization as (prime, exponent) pairs in increasing order.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn is_squarefree(n: u64) -> bool {
    factorize(n).iter().all(|&(_, e)| e == 1)
}

/// Legendre symbol (a/p) for an odd prime p, returned as -1, 0 or 1.
pub fn legendre(a: i128, p: u64) -> i32 {
    let a = a.rem_euclid(p as i128) as u64;
    if a == 0 {
        return 0;
    }
    if mod_pow(a, (p - 1) / 2, p) == 1 {
        1
    } else {
        -1
    }
}

/// Solves x ≡ r_i (mod m_i) for a list of congruences with arbitrary moduli.
/// Returns (r, lcm) or None when the system is inconsistent.
pub fn crt(congruences: &[(u64, u64)]) -> Option<(u64, u64)> {
    let mut r: i128 = 0;
    let mut m: i128 = 1;
    for &(ri, mi) in congruences {
        let (ri, mi) = (ri as i128, mi as i128);
        let (g, p, _) = ext_gcd(m, mi);
        if (ri - r) % g != 0 {
            return None;
        }
        let lcm = m / g * mi;
        let t = ((ri - r) / g % (mi / g)) * (p % (mi / g)) % (mi / g);
        r = (r + m * t).rem_euclid(lcm);
        m = lcm;
    }
    Some((r as u64, m as u64))
}

/// Sum of a slice in a fixed pairwise tree shape; the result depends only on
/// the slice contents and order, never on how the slice was produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

pub fn pairwise_sum_c(xs: &[num_complex::Complex64]) -> num_complex::Complex64 {
    match xs.len() {
        0 => num_complex::Complex64::new(0.0, 0.0),
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let mid = n / 2;
            pairwise_sum_c(&xs[..mid]) + pairwise_sum_c(&xs[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_and_squares() {
        assert_eq!(isqrt(0), 0);
        assert_eq!(isqrt(15), 3);
        assert_eq!(isqrt(16), 4);
        assert!(is_square(1_000_000));
        assert!(!is_square(1_000_001));
    }

    #[test]
    fn primality_matches_sieve() {
        let sieve = primes_up_to(2000);
        let direct: Vec<u64> = (0..=2000).filter(|&n| is_prime(n)).collect();
        assert_eq!(sieve, direct);
    }

    #[test]
    fn crt_solves_and_detects_inconsistency() {
        assert_eq!(crt(&[(2, 3), (3, 5)]), Some((8, 15)));
        assert_eq!(crt(&[(1, 4), (3, 6)]), Some((9, 12)));
        assert_eq!(crt(&[(1, 4), (2, 6)]), None);
    }

    #[test]
    fn legendre_symbol() {
        assert_eq!(legendre(2, 7), 1);
        assert_eq!(legendre(3, 7), -1);
        assert_eq!(legendre(14, 7), 0);
    }
}
