//! The unfolding identity G(x) = Σ_{γ ∈ K^×} g(γx) against its spectral
//! expansion over characters of C¹ of conductor dividing 𝔮.
//!
//! g = λ^S × g_S with g_𝔮 = 1_{U^{(1)}}, log-Gaussian archimedean profiles and
//! λ_𝔭 supported on even valuations. Both sides are truncated at the same set
//! of ideals N𝔞 ≤ X; the shared truncation tail is certified separately.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hecke::{solve_unit_lattice, CharContext};
use crate::local::{SatakeMode, ToyAutomorphicData};
use crate::mellin::{ArchMellinProfile, ProfileKind};
use crate::nf::{PrimeIdealData, QuadField};
use crate::residue::e;
use crate::sunit::{
    canonical_generators_up_to, sunit_average, Envelope, FiniteComponent, SPoint, SPrime, TestFunctionSpec,
};

/// Volume normalization of the dual of C¹ for unit-volume local measures:
/// 1/vol(C¹) = w/(2^{r₁} h R).
pub fn unfolding_constant(field: &QuadField) -> f64 {
    if field.is_rational() {
        1.0
    } else {
        field.roots_of_unity as f64 / (4.0 * field.class_number() as f64 * field.regulator)
    }
}

/// An idele class representative: real coordinates and the residue of x_𝔮.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdeleClassPoint {
    pub arch: (f64, f64),
    pub u: u32,
}

#[derive(Debug, Clone)]
struct IdealTerm {
    gen: (i128, i128),
    emb: (f64, f64),
    norm: u64,
    lambda: Complex64,
    dlog: u64,
}

/// g = λ^S × g_S for tempered synthetic data; the truncation X is chosen so that
/// the certified tail is below `tol / 10` at every point with |x| ≥ `min_abs_x`.
#[derive(Debug, Clone)]
pub struct UnfoldingAssembly {
    pub sp: SPrime,
    pub ctx: CharContext,
    pub spec: TestFunctionSpec,
    pub width: f64,
    pub x_max: u64,
    pub c_k: f64,
    terms: Vec<IdealTerm>,
    lambda_l1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnfoldingReport {
    pub d: i64,
    pub q_norm: u64,
    pub point: IdeleClassPoint,
    pub ideals: usize,
    pub x_max: u64,
    pub lhs: (f64, f64),
    pub rhs: (f64, f64),
    pub diff: f64,
    pub truncation_tail: f64,
    pub lhs_error: f64,
    pub rhs_error: f64,
    pub characters: usize,
    pub c_k: f64,
}

impl UnfoldingAssembly {
    pub fn new(
        field: &QuadField,
        prime: &PrimeIdealData,
        seed: u64,
        width: f64,
        tol: f64,
        min_abs_x: f64,
    ) -> Result<Self> {
        let sp = SPrime::new(field, prime)?;
        let ctx = CharContext::new(field, Some(prime))?;
        let lg = ArchMellinProfile::new(ProfileKind::LogGaussian { width })?;
        let env = Envelope { a: 1.0, b: 1.0, constant: (width * width / 2.0).exp() };
        let spec =
            TestFunctionSpec { finite: FiniteComponent::PrincipalUnits, arch: vec![(lg, env); field.num_real_places] };
        let mut x_max = 16u64;
        while truncation_tail(field, width, x_max, min_abs_x) > tol / 10.0 {
            x_max *= 2;
            if x_max > 1 << 16 {
                return Err(Error::CertificationFailed(format!("no truncation below 2^16 reaches {tol}")));
            }
        }
        let data = ToyAutomorphicData::new(field, 2, seed, SatakeMode::Generic);
        let mut terms = Vec::new();
        for (gen, norm) in canonical_generators_up_to(field, x_max) {
            if prime.hnf.contains_int(gen) {
                continue;
            }
            let ideal = field.principal_ideal(&field.elem(gen.0, gen.1))?;
            let lambda = data.lambda_ideal(field, &ideal, &[prime.hnf])?;
            let dlog = sp.table.dlog(sp.table.reduce(gen)).ok_or(Error::NotCoprime)?;
            terms.push(IdealTerm { gen, emb: field.elem(gen.0, gen.1).embeddings(), norm, lambda, dlog });
        }
        let lambda_l1 = terms.iter().map(|t| t.lambda.norm()).sum();
        Ok(UnfoldingAssembly { c_k: unfolding_constant(field), sp, ctx, spec, width, x_max, terms, lambda_l1 })
    }

    pub fn ideal_count(&self) -> usize {
        self.terms.len()
    }

    fn abs_x(&self, x: &IdeleClassPoint) -> f64 {
        if self.sp.rational() {
            x.arch.0.abs()
        } else {
            (x.arch.0 * x.arch.1).abs()
        }
    }

    /// Σ_{N𝔞 ≤ X} λ(𝔞) G_S(α²x), each G_S a certified S-unit lattice sum.
    pub fn lhs(&self, x: &IdeleClassPoint, tol: f64) -> Result<(Complex64, f64)> {
        let t = &self.sp.table;
        let per_term = tol / (10.0 * self.terms.len().max(1) as f64 * self.lambda_l1.max(1.0));
        let mut total = Complex64::new(0.0, 0.0);
        let mut err = 0.0;
        for term in &self.terms {
            let r = t.reduce(term.gen);
            let pt = SPoint {
                arch: (term.emb.0 * term.emb.0 * x.arch.0, term.emb.1 * term.emb.1 * x.arch.1),
                v: 0,
                u: t.mul(t.mul(r, r), x.u),
            };
            let g = sunit_average(&self.sp, &self.spec, pt, per_term)?;
            total += term.lambda * g.value;
            err += term.lambda.norm() * g.error_bound;
        }
        Ok((total, err))
    }

    /// Admissible frequencies t_μ of the even characters with finite part k, each
    /// with its certified bound; the dropped remainder is returned separately.
    fn frequencies(&self, k: u64, cutoff: f64) -> Option<(Vec<f64>, f64)> {
        let lat = solve_unit_lattice(&self.ctx, k, (0, 0))?;
        let Some(step) = lat.step else {
            return Some((vec![lat.t0], 0.0));
        };
        let w2 = self.width * self.width;
        let weight = |t: f64| (-w2 * t * t).exp();
        let mut ts = Vec::new();
        let mut rest = 0.0;
        for dir in [1i64, -1] {
            let mut j = if dir == 1 { 0 } else { -1 };
            loop {
                let t = lat.t(j);
                if weight(t) < cutoff && t * dir as f64 > 0.0 {
                    // Σ_{i ≥ 0} e^{-w²(|t| + i·step)²} ≤ e^{-w²t²} / (1 - e^{-2w²|t|step})
                    rest += weight(t) / (1.0 - (-2.0 * w2 * t.abs() * step).exp());
                    break;
                }
                ts.push(t);
                j += dir;
            }
        }
        Some((ts, rest))
    }

    /// c_K/φ(𝔮) Σ_ω ω̄(x) ∫_{(0)} ĝ(s, ω)|x|^{-s} ds/2πi with ĝ(s, ω) =
    /// L^S_X(2s, sym²×ω²) Π_v 2M(s + it_v), by trapezoid quadrature checked at two step sizes.
    pub fn rhs(&self, x: &IdeleClassPoint, tol: f64) -> Result<(Complex64, f64, usize)> {
        let t = &self.sp.table;
        let phi = t.order();
        let rational = self.sp.rational();
        let w = self.width;
        let ax = self.abs_x(x);
        let lu = t.dlog(x.u).ok_or(Error::NotCoprime)?;
        let log_x = (ax.ln(), x.arch.0.abs().ln() - if rational { 0.0 } else { x.arch.1.abs().ln() });
        let lam_max = self.terms.iter().map(|term| (2.0 * (term.norm as f64).ln() + log_x.0).abs()).fold(0.0, f64::max);
        let h = 2.0 * PI / (lam_max + 20.0 * w);
        let places = if rational { 1 } else { 2 };
        // ∫ Π_v |2M(iτ + it_v)| dτ/2π at t = 0; it carries e^{-w²t²} otherwise
        let arch_mass = if rational { 2.0 } else { 4.0 * w * PI.sqrt() };
        let scale = self.c_k / phi as f64;
        let cutoff = tol * 1e-3 / (scale * arch_mass * self.lambda_l1.max(1.0) * phi as f64);
        let tau_max = (-(cutoff.max(1e-300)).ln() + 40.0).sqrt() / w;
        let mut total = Complex64::new(0.0, 0.0);
        let mut quad_err = 0.0;
        let mut dropped = 0.0;
        let mut count = 0;
        for k in 0..phi {
            let Some((ts, rest)) = self.frequencies(k, cutoff) else { continue };
            dropped += rest * scale * arch_mass * self.lambda_l1;
            for tm in ts {
                count += 1;
                let tv = if rational { 0.0 } else { -tm };
                // coefficient of e^{-iτΛ_𝔞} after absorbing ω²(𝔞)ω̄(x)
                let coeffs: Vec<(f64, Complex64)> = self
                    .terms
                    .iter()
                    .map(|term| {
                        let lam = 2.0 * (term.norm as f64).ln() + log_x.0;
                        let fin = -((2 * term.dlog + lu) as f64 * k as f64 / phi as f64);
                        let arch_t = if rational {
                            0.0
                        } else {
                            2.0 * (term.emb.0.abs().ln() - term.emb.1.abs().ln()) + log_x.1
                        };
                        (lam, term.lambda * e(fin) * Complex64::from_polar(1.0, -tm * arch_t))
                    })
                    .collect();
                let arch = |tau: f64| -> Result<Complex64> {
                    let mut a =
                        Complex64::new(2.0, 0.0) * self.spec.arch[0].0.mellin_half(Complex64::new(0.0, tau + tm))?;
                    if places == 2 {
                        a *= 2.0 * self.spec.arch[1].0.mellin_half(Complex64::new(0.0, tau + tv))?;
                    }
                    Ok(a)
                };
                let integrand = |tau: f64| -> Result<Complex64> {
                    let d: Complex64 = coeffs.iter().map(|(lam, c)| c * Complex64::from_polar(1.0, -tau * lam)).sum();
                    Ok(arch(tau)? * d)
                };
                let trap = |step: f64| -> Result<Complex64> {
                    let n = (tau_max / step).ceil() as i64;
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j in -n..=n {
                        acc += integrand(j as f64 * step)?;
                    }
                    Ok(acc * step / (2.0 * PI))
                };
                let coarse = trap(h)?;
                let fine = trap(h / 2.0)?;
                quad_err += scale * (fine - coarse).norm();
                total += scale * fine;
            }
        }
        Ok((total, quad_err + dropped, count))
    }

    pub fn check(&self, x: &IdeleClassPoint, tol: f64) -> Result<UnfoldingReport> {
        let ax = self.abs_x(x);
        let tail = truncation_tail(&self.sp.field, self.width, self.x_max, ax);
        let (lhs, lhs_error) = self.lhs(x, tol)?;
        let (rhs, rhs_error, characters) = self.rhs(x, tol)?;
        let budget = tail + lhs_error + rhs_error;
        if !(budget < tol) {
            return Err(Error::CertificationFailed(format!(
                "error budget {budget:.3e} (tail {tail:.1e}, lhs {lhs_error:.1e}, rhs {rhs_error:.1e}) exceeds {tol:.1e}"
            )));
        }
        Ok(UnfoldingReport {
            d: self.sp.field.d,
            q_norm: self.sp.prime.norm(),
            point: *x,
            ideals: self.terms.len(),
            x_max: self.x_max,
            lhs: (lhs.re, lhs.im),
            rhs: (rhs.re, rhs.im),
            diff: (lhs - rhs).norm(),
            truncation_tail: tail,
            lhs_error,
            rhs_error,
            characters,
            c_k: self.c_k,
        })
    }
}

/// Bound for Σ_{N𝔞 > X} |λ(𝔞) G_S(α²x)| with |x| ≥ abs_x, using at most 2√n
/// ideals of norm n, |λ(𝔞)| ≤ 16 N𝔞² for tempered sym² data, and
/// |G_S(z)| ≤ 2(1 + w√π/R) exp(-(log|Nz|)²/(4w²)) (2 exp(-(log|z|)²/(2w²)) over ℚ).
pub fn truncation_tail(field: &QuadField, width: f64, x_max: u64, abs_x: f64) -> f64 {
    let env = |z: f64| {
        let l = z.ln();
        if field.is_rational() {
            2.0 * (-l * l / (2.0 * width * width)).exp()
        } else {
            2.0 * (1.0 + width * PI.sqrt() / field.regulator) * (-l * l / (4.0 * width * width)).exp()
        }
    };
    let mut a = x_max as f64;
    if a * a * abs_x < 1.0 {
        return f64::INFINITY;
    }
    let mut total = 0.0;
    loop {
        // block [a, 2a): the envelope is decreasing there
        let block = a * 2.0 * (2.0 * a).sqrt() * 16.0 * (2.0 * a).powi(2) * env(a * a * abs_x);
        total += block;
        if block < 1e-40 || a > 1e150 {
            break;
        }
        a *= 2.0;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assembly(d: i64, p: u64, width: f64) -> UnfoldingAssembly {
        let k = QuadField::new(d).unwrap();
        let q = k.factor_rational_prime(p).unwrap()[0];
        UnfoldingAssembly::new(&k, &q, 1, width, 1e-6, 0.25).unwrap()
    }

    #[test]
    fn unfolding_over_q() {
        let a = assembly(1, 7, 0.8);
        let one = a.sp.table.from_int(1);
        let r = a.check(&IdeleClassPoint { arch: (1.0, 1.0), u: one }, 1e-6).unwrap();
        assert!(r.diff < 1e-6, "{r:?}");
        assert!(r.lhs.0 > 0.5);
    }

    #[test]
    fn unfolding_over_sqrt5() {
        let a = assembly(5, 11, 0.8);
        let t = &a.sp.table;
        for x in [
            IdeleClassPoint { arch: (1.0, 1.0), u: t.from_int(1) },
            IdeleClassPoint { arch: (1.7, 0.4), u: t.from_int(3) },
        ] {
            let r = a.check(&x, 1e-6).unwrap();
            assert!(r.diff < 1e-5, "{r:?}");
        }
    }

    #[test]
    fn unit_translate_leaves_both_sides_fixed() {
        let a = assembly(5, 11, 0.8);
        let t = &a.sp.table;
        let x = IdeleClassPoint { arch: (1.3, 0.6), u: t.from_int(4) };
        let (em, en) = a.sp.eps_emb;
        let ux = IdeleClassPoint { arch: (x.arch.0 * em, x.arch.1 * en), u: t.mul(x.u, a.sp.eps_res) };
        let r0 = a.check(&x, 1e-6).unwrap();
        let r1 = a.check(&ux, 1e-6).unwrap();
        assert!((r0.lhs.0 - r1.lhs.0).abs() < 1e-12);
        assert!((r0.rhs.0 - r1.rhs.0).abs() <= 2.0 * (r0.rhs_error + r1.rhs_error) + 1e-13);
    }

    #[test]
    fn wrong_normalization_is_detected() {
        let k = QuadField::new(5).unwrap();
        let a = assembly(5, 11, 0.8);
        let x = IdeleClassPoint { arch: (1.0, 1.0), u: a.sp.table.from_int(1) };
        let r = a.check(&x, 1e-6).unwrap();
        // 1/Res ζ_K differs by √D under unit-volume local measures
        let alt = k.c_k() / a.c_k;
        assert!((alt - 5f64.sqrt()).abs() < 1e-12);
        assert!((r.rhs.0 * alt - r.lhs.0).abs() > 0.1);
    }

    #[test]
    fn certification_failure_aborts() {
        let a = assembly(2, 7, 0.8);
        let x = IdeleClassPoint { arch: (1.0, 1.0), u: a.sp.table.from_int(1) };
        assert!(matches!(a.check(&x, 1e-14), Err(Error::CertificationFailed(_))));
        let k = QuadField::new(2).unwrap();
        assert_eq!(truncation_tail(&k, 0.8, 4, 0.01), f64::INFINITY);
    }
}
