//! The coda family over real quadratic K: characters χ ∈ X_ε(𝔮) trivial at ν,
//! their weights c(χ) = ĝ_μ(β, χ_μ) and truncated twisted Dirichlet sums
//! L^S(s, sym²×χ²), averaged over a window of split primes.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hecke::{enumerate_x_eps, loglog_slope, CharContext, HeckeCharacter};
use crate::local::{SatakeMode, ToyAutomorphicData};
use crate::mellin::{ArchMellinProfile, ProfileKind};
use crate::nf::{PrimeIdealData, QuadField};
use crate::residue::{build_residue_field, e};
use crate::sunit::canonical_generators_up_to;
use crate::unfold::unfolding_constant;

/// Degree-one unramified primes with lo ≤ N𝔮 < hi.
pub fn split_primes(field: &QuadField, lo: u64, hi: u64) -> Vec<PrimeIdealData> {
    field
        .primes_up_to_norm(hi.saturating_sub(1))
        .into_iter()
        .filter(|q| q.f == 1 && q.e == 1 && q.norm() >= lo)
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct XEpsGrowth {
    pub d: i64,
    pub exponent: f64,
    /// (N𝔮, |X_ε(𝔮)|) with T_μ = N𝔮^exponent.
    pub points: Vec<(u64, usize)>,
    pub slope: f64,
}

/// |X_ε(𝔮)| against N𝔮 over split primes in [lo, hi) and its log-log slope.
pub fn x_eps_growth(field: &QuadField, lo: u64, hi: u64, exponent: f64) -> Result<XEpsGrowth> {
    let mut points = Vec::new();
    for q in split_primes(field, lo, hi) {
        let ctx = CharContext::new(field, Some(&q))?;
        let n = q.norm();
        points.push((n, enumerate_x_eps(&ctx, (n as f64).powf(exponent))?.len()));
    }
    if points.len() < 2 {
        return Err(Error::Unsupported("need at least two split primes in the window".into()));
    }
    let pts: Vec<(f64, f64)> = points.iter().map(|&(n, c)| (n as f64, c.max(1) as f64)).collect();
    Ok(XEpsGrowth { d: field.d, exponent, slope: loglog_slope(&pts), points })
}

#[derive(Debug, Clone, Serialize)]
pub struct CodaPrimeRow {
    pub q_norm: u64,
    pub root: Option<i128>,
    pub phi: u64,
    pub family: usize,
    /// (1/φ) Σ_{χ ∈ X_ε} |L(χ)|.
    pub average: f64,
    /// c_K/φ Σ_χ c(χ) L(χ), the spectral term at |x| = 1.
    pub spectral: (f64, f64),
    pub c_sup: f64,
    /// L at the trivial character.
    pub trivial: (f64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct CodaReport {
    pub d: i64,
    pub beta: f64,
    /// The series are evaluated at 2β + shift, where they converge absolutely.
    pub s_eval: f64,
    pub window: (u64, u64),
    pub t_mu_exponent: f64,
    pub ideals: usize,
    pub truncation: u64,
    /// max over rows of |L_X - L_{X/2}| at the trivial character.
    pub tail_estimate: f64,
    /// ∫ g_μ |y|^β d^×y, the a priori bound for every |c(χ)|.
    pub c_bound: f64,
    pub c_within_bound: bool,
    pub rows: Vec<CodaPrimeRow>,
    pub total: f64,
    pub q_over_log_q: f64,
    pub ratio: f64,
}

struct Ideal {
    gen: (i128, i128),
    log_mu: f64,
    norm: u64,
    lambda: Complex64,
}

fn twisted_sum(
    ideals: &[Ideal],
    q: &PrimeIdealData,
    chi: Option<(&HeckeCharacter, &dyn Fn((i128, i128)) -> u64)>,
    s: f64,
    x: u64,
) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for a in ideals.iter().filter(|a| a.norm <= x && !q.hnf.contains_int(a.gen)) {
        let mut term = a.lambda * (a.norm as f64).powf(-s);
        if let Some((c, dlog)) = chi {
            // χ²((α)) = χ_f(α)^{-2} |α_μ|^{-2iT_μ}; the sign character squares away
            let l = dlog(a.gen);
            let fin = -2.0 * (c.k as f64) * (l as f64) / c.group_order as f64;
            term *= e(fin) * Complex64::from_polar(1.0, -2.0 * c.full_frequencies().0 * a.log_mu);
        }
        acc += term;
    }
    acc
}

/// Averages (1/φ(𝔮)) Σ_{χ ∈ X_ε(𝔮)} |L_X(2β + shift, sym²×χ²)| over split 𝔮 in
/// the window, for tempered synthetic data with the given seed.
pub fn coda_average(
    field: &QuadField,
    beta: f64,
    window: (u64, u64),
    t_mu_exponent: f64,
    truncation: u64,
    shift: f64,
    seed: u64,
) -> Result<CodaReport> {
    if field.is_rational() {
        return Err(Error::Unsupported("the coda family needs two real places".into()));
    }
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::Unsupported("β must lie in (0, 1/2)".into()));
    }
    let s_eval = 2.0 * beta + shift;
    if s_eval <= 1.0 {
        return Err(Error::NonConvergent(format!("2β + shift = {s_eval} ≤ 1")));
    }
    let g_mu = ArchMellinProfile::new(ProfileKind::Bump { center: 1.0, radius: 0.5 })?;
    let c_bound = 2.0 * g_mu.mellin_half(Complex64::new(beta, 0.0))?.re;
    let data = ToyAutomorphicData::new(field, 2, seed, SatakeMode::Generic);
    let mut ideals = Vec::new();
    for (gen, norm) in canonical_generators_up_to(field, truncation) {
        let ideal = field.principal_ideal(&field.elem(gen.0, gen.1))?;
        let lambda = data.lambda_ideal(field, &ideal, &[])?;
        let log_mu = field.elem(gen.0, gen.1).embeddings().0.abs().ln();
        ideals.push(Ideal { gen, log_mu, norm, lambda });
    }
    let c_k = unfolding_constant(field);
    let mut rows = Vec::new();
    let mut tail_estimate: f64 = 0.0;
    let mut c_sup_all: f64 = 0.0;
    for q in split_primes(field, window.0, window.1) {
        let ctx = CharContext::new(field, Some(&q))?;
        let table = build_residue_field(field, &q)?;
        let dlog = |g: (i128, i128)| table.dlog(table.reduce(g)).expect("coprime to 𝔮");
        let n = q.norm();
        let chars = enumerate_x_eps(&ctx, (n as f64).powf(t_mu_exponent))?;
        let phi = ctx.group_order;
        let mut abs_sum = 0.0;
        let mut spectral = Complex64::new(0.0, 0.0);
        let mut c_sup: f64 = 0.0;
        for c in &chars {
            let l = twisted_sum(&ideals, &q, Some((c, &dlog)), s_eval, truncation);
            abs_sum += l.norm();
            let weight = if c.signs.0 == 0 {
                2.0 * g_mu.mellin_half(Complex64::new(beta, c.full_frequencies().0))?
            } else {
                Complex64::new(0.0, 0.0)
            };
            c_sup = c_sup.max(weight.norm());
            spectral += weight * l;
        }
        c_sup_all = c_sup_all.max(c_sup);
        let trivial = twisted_sum(&ideals, &q, None, s_eval, truncation);
        let half = twisted_sum(&ideals, &q, None, s_eval, truncation / 2);
        tail_estimate = tail_estimate.max((trivial - half).norm());
        let spectral = spectral * (c_k / phi as f64);
        rows.push(CodaPrimeRow {
            q_norm: n,
            root: q.root,
            phi,
            family: chars.len(),
            average: abs_sum / phi as f64,
            spectral: (spectral.re, spectral.im),
            c_sup,
            trivial: (trivial.re, trivial.im),
        });
    }
    let total: f64 = rows.iter().map(|r| r.average).sum();
    let q = window.0 as f64;
    let q_over_log_q = q / q.ln();
    Ok(CodaReport {
        d: field.d,
        beta,
        s_eval,
        window,
        t_mu_exponent,
        ideals: ideals.len(),
        truncation,
        tail_estimate,
        c_bound,
        c_within_bound: c_sup_all <= c_bound * (1.0 + 1e-9),
        rows,
        total,
        q_over_log_q,
        ratio: total / q_over_log_q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_matches_enumeration_and_weights_are_bounded() {
        let k = QuadField::new(5).unwrap();
        let r = coda_average(&k, 0.3, (20, 60), 0.5, 400, 1.0, 3).unwrap();
        assert!(!r.rows.is_empty());
        for row in &r.rows {
            let q = split_primes(&k, row.q_norm, row.q_norm + 1).into_iter().find(|q| q.root == row.root).unwrap();
            let ctx = CharContext::new(&k, Some(&q)).unwrap();
            let xs = enumerate_x_eps(&ctx, (row.q_norm as f64).powf(0.5)).unwrap();
            assert_eq!(row.family, xs.len());
        }
        assert!(r.c_within_bound, "{r:?}");
        assert!(r.total > 0.0);
    }

    #[test]
    fn trivial_character_reproduces_untwisted_sum() {
        let k = QuadField::new(5).unwrap();
        let q = split_primes(&k, 11, 12)[0];
        let data = ToyAutomorphicData::new(&k, 2, 3, SatakeMode::Generic);
        let r = coda_average(&k, 0.3, (11, 12), 0.5, 300, 1.0, 3).unwrap();
        let row = r.rows.iter().find(|row| row.root == q.root).unwrap();
        let mut direct = Complex64::new(0.0, 0.0);
        for n in 1..=300u64 {
            for a in k.ideals_of_norm(n) {
                if crate::local::contains_ideal(&q.hnf, &a) {
                    continue;
                }
                direct += data.lambda_ideal(&k, &a, &[]).unwrap() * (n as f64).powf(-1.6);
            }
        }
        assert!(
            (direct.re - row.trivial.0).abs() < 1e-10 && (direct.im - row.trivial.1).abs() < 1e-10,
            "{direct} {row:?}"
        );
    }

    #[test]
    fn rejects_divergent_regime() {
        let k = QuadField::new(5).unwrap();
        assert!(matches!(coda_average(&k, 0.3, (11, 20), 0.5, 100, 0.2, 1), Err(Error::NonConvergent(_))));
        assert!(coda_average(&QuadField::new(1).unwrap(), 0.3, (11, 20), 0.5, 100, 1.0, 1).is_err());
    }

    #[test]
    fn x_eps_growth_is_roughly_linear() {
        let k = QuadField::new(5).unwrap();
        let g = x_eps_growth(&k, 50, 200, 0.1).unwrap();
        assert!(g.points.len() >= 5);
        assert!(g.slope > 0.8 && g.slope < 1.5, "{}", g.slope);
    }
}
