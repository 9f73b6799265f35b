//! S-unit geometry: the unit fundamental domain, canonical generators,
//! condition (cond 1), S-unit averages G_S and G*_S, the Bruggeman–Miatello
//! audit, the S-adic decay audit and the Rohrlich moduli scan.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local::{contains_ideal, GqStar};
use crate::mellin::{fit_slope, ArchDual, ArchMellinProfile};
use crate::nf::unit_image_mod_squarefree;
use crate::nf::{FieldElement, IdealHNF, PrimeIdealData, QuadField};
use crate::residue::{build_residue_field, ResidueFieldTable};

const SNAP: f64 = 1e-9;

/// {x : x_μ > 0, t(x) ∈ [0, period)} with t = log|x_μ| - log|x_ν|.
/// The period is 2R for O_K^× and 4R for its squares; over ℚ it is the ray x > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FundamentalDomain {
    pub regulator: f64,
    pub period: f64,
    pub rational: bool,
}

impl FundamentalDomain {
    pub fn for_units(field: &QuadField) -> Self {
        FundamentalDomain { regulator: field.regulator, period: 2.0 * field.regulator, rational: field.is_rational() }
    }

    pub fn for_squares(field: &QuadField) -> Self {
        FundamentalDomain { regulator: field.regulator, period: 4.0 * field.regulator, rational: field.is_rational() }
    }

    pub fn t_coord(x: (f64, f64)) -> f64 {
        x.0.abs().ln() - x.1.abs().ln()
    }

    pub fn contains(&self, x: (f64, f64)) -> bool {
        if x.0 <= 0.0 {
            return false;
        }
        if self.rational {
            return true;
        }
        let t = Self::t_coord(x);
        t >= -SNAP && t < self.period - SNAP
    }

    /// k with ε^k·x in the slab (ignoring the sign), for the unit action t ↦ t + 2Rk.
    pub fn unit_shift(&self, x: (f64, f64)) -> i64 {
        if self.rational {
            return 0;
        }
        let t = Self::t_coord(x);
        let k = -((t + SNAP) / (2.0 * self.regulator)).floor();
        k as i64
    }
}

fn t_in_generator_slab(field: &QuadField, e: (f64, f64)) -> bool {
    if e.0 <= 0.0 {
        return false;
    }
    if field.is_rational() {
        return true;
    }
    let t = FundamentalDomain::t_coord(e);
    t >= -SNAP && t < 2.0 * field.regulator - SNAP
}

/// The generator α₀ of 𝔞 with α₀² in the square domain and α₀^{(μ)} > 0.
pub fn canonical_generator(field: &QuadField, ideal: &IdealHNF) -> Result<FieldElement> {
    let g = field.is_principal(ideal)?.ok_or(Error::NotPrincipal)?;
    normalize_generator(field, &g)
}

/// u·γ for the unique unit u putting (uγ)² in the square domain.
pub fn normalize_generator(field: &QuadField, g: &FieldElement) -> Result<FieldElement> {
    let mut a = g.clone();
    if let Some(eps) = &field.fund_unit {
        // t(α²) = 2t(α) ∈ [0, 4R) ⇔ t(α) ∈ [0, 2R)
        let dom = FundamentalDomain::for_units(field);
        let k = dom.unit_shift(a.embeddings());
        let u = eps.pow(k).ok_or(Error::Overflow("unit power"))?;
        a = &u * &a;
        let mut guard = 0;
        while !t_in_generator_slab(field, (a.embeddings().0.abs(), a.embeddings().1)) && guard < 4 {
            let t = FundamentalDomain::t_coord(a.embeddings());
            let step = if t < 0.0 { eps.clone() } else { eps.inv().unwrap() };
            a = &step * &a;
            guard += 1;
        }
    }
    if a.embeddings().0 < 0.0 {
        a = -&a;
    }
    Ok(a)
}

/// Residue-field data for 𝔮 shared by cond1 and S-unit sums.
#[derive(Debug, Clone)]
pub struct SPrime {
    pub field: QuadField,
    pub prime: PrimeIdealData,
    pub table: ResidueFieldTable,
    /// Generator ϖ of 𝔮, normalized, with its embeddings.
    pub uniformizer: FieldElement,
    pub uniformizer_emb: (f64, f64),
    /// Residues of -1 and ε.
    pub minus_one: u32,
    pub eps_res: u32,
    pub eps_emb: (f64, f64),
}

impl SPrime {
    pub fn new(field: &QuadField, prime: &PrimeIdealData) -> Result<Self> {
        let table = build_residue_field(field, prime)?;
        let uniformizer = canonical_generator(field, &prime.hnf)?;
        let uniformizer_emb = uniformizer.embeddings();
        let minus_one = table.from_int(-1);
        let (eps_res, eps_emb) = match &field.fund_unit {
            Some(e) => (table.reduce(e.to_int().unwrap()), e.embeddings()),
            None => (table.from_int(1), (1.0, 1.0)),
        };
        Ok(SPrime {
            field: field.clone(),
            prime: *prime,
            table,
            uniformizer,
            uniformizer_emb,
            minus_one,
            eps_res,
            eps_emb,
        })
    }

    pub fn rational(&self) -> bool {
        self.field.is_rational()
    }

    /// Residue of ε^k (k may be negative).
    pub fn eps_pow(&self, k: i64) -> u32 {
        let t = &self.table;
        let l = t.dlog(self.eps_res).unwrap() as i128;
        let n = t.order() as i128;
        t.exp((l * k as i128).rem_euclid(n) as u64)
    }

    pub fn is_one_or_minus_one(&self, r: u32) -> bool {
        r == self.table.from_int(1) || r == self.minus_one
    }
}

/// α₀² ≡ 1 (mod 𝔮) for the canonical generator of 𝔞.
pub fn cond1_indicator(sp: &SPrime, ideal: &IdealHNF) -> Result<bool> {
    if contains_ideal(&sp.prime.hnf, ideal) {
        return Err(Error::NotCoprime);
    }
    let a0 = canonical_generator(&sp.field, ideal)?;
    let r = sp.table.reduce(a0.to_int().ok_or(Error::NotPrincipal)?);
    Ok(sp.is_one_or_minus_one(r))
}

/// Every canonical generator α₀ = a + bω of norm ≤ x (one per nonzero principal ideal).
pub fn canonical_generators_up_to(field: &QuadField, x: u64) -> Vec<((i128, i128), u64)> {
    let mut out = Vec::new();
    if field.is_rational() {
        for a in 1..=x as i128 {
            out.push(((a, 0), a as u64));
        }
        return out;
    }
    let (wm, wn) = field.basis.omega_embeddings();
    let eps = field.fund_unit.as_ref().unwrap().embeddings().0;
    let sx = (x as f64).sqrt();
    let bmax = ((eps * sx + sx) / (wm - wn)).ceil() as i128 + 1;
    for b in -bmax..=bmax {
        let bf = b as f64;
        let lo = (-bf * wm).max(-sx - bf * wn).floor() as i128 - 1;
        let hi = (eps * sx - bf * wm).min(sx - bf * wn).ceil() as i128 + 1;
        for a in lo..=hi {
            if a == 0 && b == 0 {
                continue;
            }
            let e = (a as f64 + bf * wm, a as f64 + bf * wn);
            if !t_in_generator_slab(field, e) {
                continue;
            }
            let nm = field.basis.norm_int((a, b)).unsigned_abs();
            if nm as u64 <= x && nm > 0 {
                out.push(((a, b), nm as u64));
            }
        }
    }
    out.sort_by_key(|&(ab, n)| (n, ab));
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityReport {
    pub d: i64,
    pub q_norm: u64,
    pub ideals: usize,
    pub max_norm: u64,
    pub hits: usize,
    pub density: f64,
    pub expected: f64,
    pub sigma: f64,
    pub z_score: f64,
    pub within_3_sigma: bool,
}

/// Empirical density of (cond 1) over the first `count` principal ideals coprime to 𝔮.
pub fn cond1_density(sp: &SPrime, count: usize) -> DensityReport {
    let field = &sp.field;
    let res = field.zeta_residue() * (1.0 - 1.0 / sp.prime.norm() as f64);
    let mut x = ((count as f64 / res) * 1.2) as u64 + 100;
    loop {
        let gens = canonical_generators_up_to(field, x);
        let coprime: Vec<_> = gens.into_iter().filter(|(ab, _)| !sp.prime.hnf.contains_int(*ab)).collect();
        if coprime.len() >= count {
            let take = &coprime[..count];
            let hits = take.iter().filter(|(ab, _)| sp.is_one_or_minus_one(sp.table.reduce(*ab))).count();
            let p = 2.0 / sp.table.order() as f64;
            let density = hits as f64 / count as f64;
            let sigma = (p * (1.0 - p) / count as f64).sqrt();
            return DensityReport {
                d: field.d,
                q_norm: sp.prime.norm(),
                ideals: count,
                max_norm: take.last().map_or(0, |t| t.1),
                hits,
                density,
                expected: p,
                sigma,
                z_score: (density - p) / sigma,
                within_3_sigma: (density - p).abs() <= 3.0 * sigma,
            };
        }
        x *= 2;
    }
}

/// |g(y)| ≤ constant·min(|y|^a, |y|^{-b}) at one real place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub a: f64,
    pub b: f64,
    pub constant: f64,
}

impl Envelope {
    pub fn eval(&self, y: f64) -> f64 {
        let y = y.abs();
        self.constant * y.powf(self.a).min(y.powf(-self.b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiniteComponent {
    /// 1_{U_𝔮}.
    Units,
    /// 1_{U_𝔮^{(1)}}.
    PrincipalUnits,
}

/// g_S = g_𝔮 × Π_{v|∞} g_v with a certified envelope at each real place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    pub finite: FiniteComponent,
    pub arch: Vec<(ArchMellinProfile, Envelope)>,
}

impl TestFunctionSpec {
    pub fn validate(&self, field: &QuadField) -> Result<()> {
        if self.arch.len() != field.num_real_places {
            return Err(Error::Unsupported("one archimedean component per real place".into()));
        }
        for (_, env) in &self.arch {
            if env.a + env.b <= 0.0 {
                return Err(Error::NonConvergent(format!("a + b = {} ≤ 0", env.a + env.b)));
            }
        }
        Ok(())
    }
}

/// A point of K_S^×: real coordinates plus x_𝔮 = ϖ^v·(unit with residue u).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SPoint {
    pub arch: (f64, f64),
    pub v: i64,
    pub u: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifiedValue {
    pub value: f64,
    pub error_bound: f64,
    pub terms: usize,
}

/// Sums f(k) + env(k) tails over k ∈ ℤ, walking outwards until the envelope of
/// the next term is below tol·(1 - ρ) in both directions, where ρ is the
/// observed geometric ratio once the envelope is monotone.
fn certified_unit_sum<F, E>(f: F, env: E, tol: f64, rational: bool) -> (f64, f64, usize)
where
    F: Fn(i64) -> f64,
    E: Fn(i64) -> f64,
{
    if rational {
        return (f(0), 0.0, 1);
    }
    let mut total = f(0);
    let mut bound = 0.0;
    let mut terms = 1;
    for dir in [1i64, -1] {
        let mut k = dir;
        let mut prev = env(0);
        loop {
            total += f(k);
            terms += 1;
            let e = env(k);
            let next = env(k + dir);
            if next < e && e < prev {
                let rho = next / e;
                let tail = next / (1.0 - rho);
                if tail < tol / 2.0 {
                    bound += tail;
                    break;
                }
            }
            prev = e;
            k += dir;
            if k.abs() > 100_000 {
                bound = f64::INFINITY;
                break;
            }
        }
    }
    (total, bound, terms)
}

/// G_S(x) = Σ_{u ∈ O_S^×} g_S(ux) with a certified truncation bound.
pub fn sunit_average(sp: &SPrime, spec: &TestFunctionSpec, x: SPoint, tol: f64) -> Result<CertifiedValue> {
    spec.validate(&sp.field)?;
    // only u with v_𝔮(u) = -v survive
    let j = -x.v;
    let (pm, pn) = sp.uniformizer_emb;
    let am = x.arch.0 * pm.powi(j as i32);
    let an = x.arch.1 * pn.powi(j as i32);
    let (em, en) = sp.eps_emb;
    let table = &sp.table;
    let pieces = |k: i64, envelope: bool| -> f64 {
        let ym = am * em.powi(k as i32);
        let yn = an * en.powi(k as i32);
        let (gm, envm) = &spec.arch[0];
        let arch = if sp.rational() {
            if envelope {
                envm.eval(ym)
            } else {
                gm.eval(ym)
            }
        } else {
            let (gn, envn) = &spec.arch[1];
            if envelope {
                envm.eval(ym) * envn.eval(yn)
            } else {
                gm.eval(ym) * gn.eval(yn)
            }
        };
        arch
    };
    // sign ±: the arch profiles are even, only g_𝔮 sees the sign
    let finite = |k: i64, sign: u32| -> f64 {
        match spec.finite {
            FiniteComponent::Units => 1.0,
            FiniteComponent::PrincipalUnits => {
                let r = table.mul(table.mul(sign, sp.eps_pow(k)), x.u);
                if r == table.from_int(1) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    };
    let one = table.from_int(1);
    let f = |k: i64| pieces(k, false) * (finite(k, one) + finite(k, sp.minus_one));
    let e = |k: i64| 2.0 * pieces(k, true);
    let (value, error_bound, terms) = certified_unit_sum(f, e, tol, sp.rational());
    Ok(CertifiedValue { value, error_bound, terms })
}

/// Σ_{u ∈ O_K^×} Π_v min(|u x_v|^a, |u x_v|^{-b}).
pub fn bm_unit_sum(field: &QuadField, a: f64, b: f64, x: (f64, f64)) -> f64 {
    let env = |y: f64| {
        let y = y.abs();
        y.powf(a).min(y.powf(-b))
    };
    if field.is_rational() {
        return 2.0 * env(x.0);
    }
    let (em, en) = field.fund_unit.as_ref().unwrap().embeddings();
    let term = |k: i64| 2.0 * env(x.0 * em.powi(k as i32)) * env(x.1 * en.powi(k as i32));
    certified_unit_sum(term, term, 1e-15, false).0
}

/// Σ_u envelope(ux) / ((1 + |log|x||^{r-1}) min(|x|^a, |x|^{-b})), r = number of
/// real places; the log factor is dropped when r = 1.
pub fn bm_ratio(field: &QuadField, a: f64, b: f64, x: (f64, f64)) -> f64 {
    let r = field.num_real_places;
    let norm = if r == 1 { x.0.abs() } else { (x.0 * x.1).abs() };
    let logf = if r == 1 { 1.0 } else { 1.0 + norm.ln().abs().powi(r as i32 - 1) };
    bm_unit_sum(field, a, b, x) / (logf * norm.powf(a).min(norm.powf(-b)))
}

#[derive(Debug, Clone, Serialize)]
pub struct BmScan {
    pub d: i64,
    pub a: f64,
    pub b: f64,
    pub log_range: f64,
    pub step: f64,
    pub max_ratio: f64,
    pub argmax: (f64, f64),
}

/// Max ratio over the grid log|x_μ|, log|x_ν| ∈ [-range, range] with the given step.
pub fn bm_ratio_scan(field: &QuadField, a: f64, b: f64, range: f64, step: f64) -> Result<BmScan> {
    if a + b <= 0.0 {
        return Err(Error::NonConvergent(format!("a + b = {} ≤ 0", a + b)));
    }
    let n = (2.0 * range / step).round() as i64;
    let grid: Vec<f64> = (0..=n).map(|i| -range + step * i as f64).collect();
    let ys: Vec<f64> = if field.is_rational() { vec![0.0] } else { grid.clone() };
    let best = grid
        .par_iter()
        .flat_map_iter(|&lm| ys.iter().map(move |&ln| (lm, ln)))
        .map(|(lm, ln)| (bm_ratio(field, a, b, (lm.exp(), ln.exp())), (lm, ln)))
        .reduce(|| (0.0, (0.0, 0.0)), |p, q| if q.0 > p.0 { q } else { p });
    Ok(BmScan { d: field.d, a, b, log_range: range, step, max_ratio: best.0, argmax: best.1 })
}

/// g*_S = g*_𝔮 × Π g*_v and its S-unit average.
#[derive(Debug, Clone)]
pub struct DualS {
    pub sp: SPrime,
    pub gq: GqStar,
    pub arch: Vec<ArchDual>,
}

impl DualS {
    pub fn new(sp: SPrime, gq: GqStar, arch: Vec<ArchDual>) -> Result<Self> {
        if arch.len() != sp.field.num_real_places {
            return Err(Error::Unsupported("one archimedean dual per real place".into()));
        }
        Ok(DualS { sp, gq, arch })
    }

    fn gq_max_abs(&self, v: i64) -> f64 {
        self.sp.table.units().map(|u| self.gq.eval(v, u).norm()).fold(0.0, f64::max)
    }

    /// G*_S(x) = Σ_{j ≥ -2m - v, k, ±} g*_𝔮 · Π_v g*_v, truncated with certificates.
    /// The j-sum stops once the envelope summed over every remaining tabulated
    /// valuation is negligible; past v_max it is extrapolated geometrically.
    pub fn average(&self, x: SPoint, tol: f64) -> CertifiedValue {
        let sp = &self.sp;
        let m = self.gq.m as i64;
        let (pm, pn) = sp.uniformizer_emb;
        let (em, en) = sp.eps_emb;
        let t = &sp.table;
        let j0 = -2 * m - x.v;
        let j_max = self.gq.v_max - x.v;
        let gmax: Vec<f64> = (j0..=j_max).map(|j| self.gq_max_abs(j + x.v)).collect();
        let coords = |j: i64| (x.arch.0 * pm.powi(j as i32), x.arch.1 * pn.powi(j as i32));
        let env_at = |j: i64, k: i64| {
            let (am, an) = coords(j);
            let mut e = gmax[(j - j0) as usize] * 2.0 * self.arch[0].bound(am * em.powi(k as i32));
            if !sp.rational() {
                e *= self.arch[1].bound(an * en.powi(k as i32));
            }
            e
        };
        let row_env =
            |j: i64| if sp.rational() { env_at(j, 0) } else { (-3..=3).map(|k| env_at(j, k)).fold(0.0, f64::max) };
        let rows: Vec<f64> = (j0..=j_max).map(row_env).collect();
        // suffix sums of the row envelopes
        let mut suffix = vec![0.0; rows.len() + 1];
        for i in (0..rows.len()).rev() {
            suffix[i] = suffix[i + 1] + rows[i];
        }
        let beyond = {
            let nz: Vec<f64> = rows.iter().rev().copied().filter(|&r| r > 0.0).take(4).collect();
            if nz.len() < 2 || nz[0] >= nz[1] {
                f64::INFINITY
            } else {
                let rho = nz[0] / nz[1];
                nz[0] * rho / (1.0 - rho)
            }
        };
        let mut total = 0.0;
        let mut bound = 0.0;
        let mut terms = 0;
        for j in j0..=j_max {
            let idx = (j - j0) as usize;
            if j > 0 && suffix[idx] + beyond < tol * 1e-2 {
                bound += suffix[idx] + beyond;
                return CertifiedValue { value: total, error_bound: bound, terms };
            }
            if gmax[idx] == 0.0 {
                continue;
            }
            let v = j + x.v;
            let (am, an) = coords(j);
            let f = |k: i64| {
                let mut a = self.arch[0].eval(am * em.powi(k as i32));
                if !sp.rational() {
                    a *= self.arch[1].eval(an * en.powi(k as i32));
                }
                let r = t.mul(sp.eps_pow(k), x.u);
                let g = self.gq.eval(v, r) + self.gq.eval(v, t.mul(sp.minus_one, r));
                (a * g).re
            };
            let (val, b, n) = certified_unit_sum(f, |k| env_at(j, k), tol * 1e-2, sp.rational());
            total += val;
            bound += b;
            terms += n;
        }
        CertifiedValue { value: total, error_bound: bound + beyond, terms }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayAudit {
    pub q_norm: u64,
    pub m: usize,
    /// (|x|_S, G*_S(x), certified truncation error).
    pub points: Vec<(f64, f64, f64)>,
    /// Least-squares slope of log|G*| against log|x| on [1, N^{2m}].
    pub slope: f64,
    pub slope_pass: bool,
    /// max |G*|·|x|^{1/2} / N^{(m-1)/2} on [1, N^{2m}].
    pub prefactor: f64,
    pub far_eps: f64,
    /// Log-slopes over [N^{2m-1}, N^{2m}] and [N^{2m+ε}, N^{2m+1}].
    pub near_tail_slope: f64,
    pub far_slope: f64,
    pub far_margin: f64,
    pub far_pass: bool,
    pub pass: bool,
}

/// G*_S on the diagonal x_μ = x_ν = |x|^{1/2} (x_𝔮 = 1), |x|_S ∈ [1, N^{2m+1}].
///
/// Far range: every value past N^{2m+ε} must lie under the |x|^{-3} envelope
/// pinned to the first-range bound prefactor·N^{(m-1)/2}|x|^{-1/2} at |x| = N^{2m}.
/// The two tail slopes are reported only: G*_S changes sign out there, so a
/// log-slope over a few points is not a decay measure.
pub fn gstar_s_decay_audit(ds: &DualS, points_per_unit: usize, far_eps: f64) -> DecayAudit {
    let n = ds.sp.prime.norm() as f64;
    let m = ds.gq.m as f64;
    let top = 2.0 * m + 1.0;
    let count = (top * points_per_unit as f64).round() as usize;
    let one = ds.sp.table.from_int(1);
    let pts: Vec<(f64, f64, f64)> = (0..=count)
        .into_par_iter()
        .map(|i| {
            let e = top * i as f64 / count as f64;
            let x = n.powf(e);
            let arch = if ds.sp.rational() { (x, 1.0) } else { (x.sqrt(), x.sqrt()) };
            let r = ds.average(SPoint { arch, v: 0, u: one }, 1e-14);
            (x, r.value, r.error_bound)
        })
        .collect();
    let exp_of = |x: f64| x.ln() / n.ln();
    let in_range = |x: f64, lo: f64, hi: f64| exp_of(x) >= lo - 1e-9 && exp_of(x) <= hi + 1e-9;
    let fit = |lo: f64, hi: f64| {
        let v: Vec<(f64, f64)> =
            pts.iter().filter(|p| in_range(p.0, lo, hi)).map(|p| (p.0.ln(), p.1.abs().ln())).collect();
        fit_slope(&v)
    };
    let slope = fit(0.0, 2.0 * m);
    let first_bound = n.powf((m - 1.0) / 2.0);
    let prefactor = pts
        .iter()
        .filter(|p| in_range(p.0, 0.0, 2.0 * m))
        .map(|p| p.1.abs() * p.0.sqrt() / first_bound)
        .fold(0.0, f64::max);
    let x0 = n.powf(2.0 * m);
    let env_const = prefactor * first_bound * x0.powf(-0.5) * x0.powi(3);
    // smallest envelope/|G*| past N^{2m+ε}; the far check needs it ≥ 1
    let far_margin = pts
        .iter()
        .filter(|p| in_range(p.0, 2.0 * m + far_eps, top))
        .map(|p| env_const * p.0.powi(-3) / p.1.abs())
        .fold(f64::INFINITY, f64::min);
    let near_tail_slope = fit(2.0 * m - 1.0, 2.0 * m);
    let far_slope = fit(2.0 * m + far_eps, top);
    let far_pass = far_margin >= 1.0;
    let slope_pass = slope <= -0.4;
    DecayAudit {
        q_norm: ds.sp.prime.norm(),
        m: ds.gq.m,
        points: pts,
        slope,
        slope_pass,
        prefactor,
        far_eps,
        near_tail_slope,
        far_slope,
        far_margin,
        far_pass,
        pass: slope_pass && far_pass,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RohrlichRow {
    pub norm: u64,
    pub primes: Vec<IdealHNF>,
    pub image: u64,
    pub ratio: f64,
}

/// Every squarefree 𝔪 with N(𝔪) ≤ x with its unit image, sorted by
/// log|image|/log N(𝔪).
pub fn rohrlich_scan(field: &QuadField, x: u64) -> Result<Vec<RohrlichRow>> {
    if x > 1_000_000 {
        return Err(Error::Unsupported("Rohrlich scan is limited to X ≤ 10^6".into()));
    }
    let primes = field.primes_up_to_norm(x);
    let mut moduli: Vec<Vec<usize>> = vec![Vec::new()];
    let mut stack: Vec<(Vec<usize>, u64, usize)> = vec![(Vec::new(), 1, 0)];
    while let Some((set, nm, start)) = stack.pop() {
        for i in start..primes.len() {
            let nn = nm * primes[i].norm();
            if nn > x {
                break;
            }
            let mut s = set.clone();
            s.push(i);
            moduli.push(s.clone());
            stack.push((s, nn, i + 1));
        }
    }
    let mut rows: Vec<RohrlichRow> = moduli
        .par_iter()
        .map(|set| {
            let ps: Vec<PrimeIdealData> = set.iter().map(|&i| primes[i]).collect();
            let norm: u64 = ps.iter().map(|p| p.norm()).product();
            let image = if ps.is_empty() { 1 } else { unit_image_mod_squarefree(field, &ps)? };
            let ratio = if norm == 1 { 0.0 } else { (image as f64).ln() / (norm as f64).ln() };
            Ok(RohrlichRow { norm, primes: ps.iter().map(|p| p.hnf).collect(), image, ratio })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.ratio.total_cmp(&b.ratio).then(a.norm.cmp(&b.norm)).then(a.primes.cmp(&b.primes)));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local::{gq_star_for, SatakeMode, ToyAutomorphicData};
    use crate::mellin::{ArchPlace, ProfileKind};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    #[test]
    fn canonical_generator_examples() {
        let k5 = QuadField::new(5).unwrap();
        assert_eq!(canonical_generator(&k5, &k5.ideal_from_int(2)).unwrap(), k5.elem(2, 0));
        let q = QuadField::new(1).unwrap();
        assert_eq!(canonical_generator(&q, &q.ideal_from_int(3)).unwrap(), q.elem(3, 0));
        let k2 = QuadField::new(2).unwrap();
        let eps = k2.fundamental_unit().unwrap();
        let g = &eps.pow(5).unwrap() * &k2.elem(7, 0);
        assert_eq!(normalize_generator(&k2, &g).unwrap(), k2.elem(7, 0));
        let id = k2.principal_ideal(&g).unwrap();
        assert_eq!(canonical_generator(&k2, &id).unwrap(), k2.elem(7, 0));
    }

    #[test]
    fn canonical_generator_is_unit_invariant() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for d in [2, 5, 13] {
            let k = QuadField::new(d).unwrap();
            let eps = k.fundamental_unit().unwrap();
            for _ in 0..50 {
                let g = k.random_integral(&mut rng, 40);
                if g.is_zero() {
                    continue;
                }
                let base = normalize_generator(&k, &g).unwrap();
                let e = rng.gen_range(-6..=6);
                let sign = if rng.gen_bool(0.5) { k.elem(1, 0) } else { k.elem(-1, 0) };
                let u = &sign * &eps.pow(e).unwrap();
                assert_eq!(normalize_generator(&k, &(&u * &g)).unwrap(), base);
                let sq = &base * &base;
                assert!(FundamentalDomain::for_squares(&k).contains(sq.embeddings()));
            }
        }
    }

    #[test]
    fn tiling() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for d in [2, 5] {
            let k = QuadField::new(d).unwrap();
            let dom = FundamentalDomain::for_units(&k);
            let (em, en) = k.fundamental_unit().unwrap().embeddings();
            for _ in 0..1000 {
                let x = (
                    rng.gen_range(-5.0..5.0f64).exp() * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                    rng.gen_range(-5.0..5.0f64).exp() * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                );
                let mut hits = 0;
                for k in -40..=40 {
                    for s in [1.0, -1.0] {
                        if dom.contains((s * x.0 * em.powi(k), s * x.1 * en.powi(k))) {
                            hits += 1;
                        }
                    }
                }
                assert_eq!(hits, 1);
            }
        }
    }

    #[test]
    fn enumeration_matches_canonical_generator() {
        for d in [2, 5] {
            let k = QuadField::new(d).unwrap();
            let list = canonical_generators_up_to(&k, 300);
            for &(ab, n) in list.iter().filter(|x| x.1 <= 120) {
                let id = k.principal_ideal(&k.elem(ab.0, ab.1)).unwrap();
                assert_eq!(id.norm(), n);
                assert_eq!(canonical_generator(&k, &id).unwrap(), k.elem(ab.0, ab.1));
            }
            let total: usize = (1..=120).map(|n| k.ideals_of_norm(n).len()).sum();
            assert_eq!(list.iter().filter(|x| x.1 <= 120).count(), total);
        }
    }

    #[test]
    fn cond1_examples() {
        let k = QuadField::new(5).unwrap();
        let q = k.factor_rational_prime(11).unwrap()[0];
        let sp = SPrime::new(&k, &q).unwrap();
        assert!(cond1_indicator(&sp, &IdealHNF::unit()).unwrap());
        assert_eq!(cond1_indicator(&sp, &q.hnf).unwrap_err(), Error::NotCoprime);
        let g = sp.table.generator;
        assert!(!sp.is_one_or_minus_one(sp.table.mul(g, g)) || sp.table.order() <= 2);
        let rep = cond1_density(&sp, 10_000);
        assert!(rep.within_3_sigma, "{rep:?}");
    }

    fn bump_spec(field: &QuadField, finite: FiniteComponent, radius: f64) -> TestFunctionSpec {
        let p = ArchMellinProfile::new(ProfileKind::Bump { center: 1.0, radius }).unwrap();
        // the bump is ≤ 1 and vanishes off [1-r, 1+r]
        let env = Envelope { a: 8.0, b: 8.0, constant: (1.0 - radius).powf(-8.0) };
        TestFunctionSpec { finite, arch: vec![(p, env); field.num_real_places] }
    }

    #[test]
    fn sunit_average_examples() {
        let k = QuadField::new(5).unwrap();
        let q = k.factor_rational_prime(11).unwrap()[0];
        let sp = SPrime::new(&k, &q).unwrap();
        let one = sp.table.from_int(1);
        let spec = bump_spec(&k, FiniteComponent::PrincipalUnits, 0.2);
        let x = SPoint { arch: (1.0, 1.0), v: 0, u: one };
        let r = sunit_average(&sp, &spec, x, 1e-12).unwrap();
        assert!(r.value >= 1.0 && (r.value - 1.0).abs() < 1e-12, "{r:?}");
        let x = SPoint { arch: (1.1, 0.95), v: 0, u: one };
        let r = sunit_average(&sp, &spec, x, 1e-12).unwrap();
        let direct = spec.arch[0].0.eval(1.1) * spec.arch[1].0.eval(0.95);
        assert!((r.value - direct).abs() < 1e-12);
        let bad = TestFunctionSpec {
            finite: FiniteComponent::Units,
            arch: vec![(spec.arch[0].0, Envelope { a: 0.5, b: -0.5, constant: 1.0 }); 2],
        };
        assert!(matches!(sunit_average(&sp, &bad, x, 1e-9), Err(Error::NonConvergent(_))));
    }

    #[test]
    fn certified_error_is_honest() {
        let k = QuadField::new(2).unwrap();
        let q = k.factor_rational_prime(7).unwrap()[0];
        let sp = SPrime::new(&k, &q).unwrap();
        let lg = ArchMellinProfile::new(ProfileKind::LogGaussian { width: 3.0 }).unwrap();
        let env = Envelope { a: 0.6, b: 0.6, constant: 20.0 };
        let spec = TestFunctionSpec { finite: FiniteComponent::Units, arch: vec![(lg, env); 2] };
        let x = SPoint { arch: (2.0, 0.3), v: 0, u: sp.table.from_int(3) };
        let coarse = sunit_average(&sp, &spec, x, 1e-4).unwrap();
        let fine = sunit_average(&sp, &spec, x, 1e-5).unwrap();
        assert!((coarse.value - fine.value).abs() <= coarse.error_bound);
    }

    #[test]
    fn bm_examples() {
        let q = QuadField::new(1).unwrap();
        for x in [0.01, 1.0, 37.0] {
            assert!((bm_ratio(&q, 0.5, 0.5, (x, 1.0)) - 2.0).abs() < 1e-12);
        }
        let k2 = QuadField::new(2).unwrap();
        let expected = 2.0 + 2.0 * 2f64.sqrt();
        assert!((bm_ratio(&k2, 0.5, 0.5, (1.0, 1.0)) - expected).abs() < 1e-9);
        assert!(matches!(bm_ratio_scan(&k2, 0.5, -0.6, 5.0, 1.0), Err(Error::NonConvergent(_))));
    }

    #[test]
    fn rohrlich_examples() {
        let k = QuadField::new(5).unwrap();
        let rows = rohrlich_scan(&k, 2000).unwrap();
        assert_eq!(rows[0].norm, 1);
        assert_eq!(rows[0].ratio, 0.0);
        let med = rows[rows.len() / 2].ratio;
        assert!(rows[1].ratio < med);
        for r in rows.iter().filter(|r| r.primes.len() == 1 && r.image + 1 == r.norm) {
            assert!((r.ratio - ((r.norm - 1) as f64).ln() / (r.norm as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn gstar_average_matches_brute_force() {
        let k = QuadField::new(1).unwrap();
        let pi = ToyAutomorphicData::new(&k, 2, 1, SatakeMode::Generic);
        let q = k.factor_rational_prime(11).unwrap()[0];
        let sp = SPrime::new(&k, &q).unwrap();
        let gq = gq_star_for(&pi, &k, &q, 30).unwrap();
        let lg = ArchMellinProfile::new(ProfileKind::LogGaussian { width: 0.6 }).unwrap();
        let place = ArchPlace::from_langlands(&[Complex64::new(0.0, 0.0); 2]);
        let ad = ArchDual::new(lg, place.sym2.clone()).unwrap();
        let ds = DualS::new(sp.clone(), gq.clone(), vec![ad.clone()]).unwrap();
        let one = sp.table.from_int(1);
        let cert = ds.average(SPoint { arch: (1.0, 1.0), v: 0, u: one }, 1e-12);
        // brute force: u = ±11^j, j from -6 to 30
        let mut brute = 0.0;
        for j in -6..=30i64 {
            let a = ad.eval(11f64.powi(j as i32));
            let g = gq.eval(j, one) + gq.eval(j, sp.minus_one);
            brute += (a * g).re;
        }
        assert!((cert.value - brute).abs() < 1e-6, "{} vs {brute}", cert.value);
    }

    #[test]
    fn decay_audit_real_quadratic() {
        let k = QuadField::new(5).unwrap();
        let q = k.factor_rational_prime(11).unwrap()[0];
        let sp = SPrime::new(&k, &q).unwrap();
        let pi = ToyAutomorphicData::new(&k, 2, 1, SatakeMode::Generic);
        let gq = gq_star_for(&pi, &k, &q, 24).unwrap();
        let lg = ArchMellinProfile::new(ProfileKind::LogGaussian { width: 1.5 }).unwrap();
        let place = ArchPlace::from_langlands(&[Complex64::new(0.0, 0.0); 2]);
        let ad = ArchDual::new(lg, place.sym2.clone()).unwrap();
        let ds = DualS::new(sp.clone(), gq.clone(), vec![ad.clone(), ad.clone()]).unwrap();
        let audit = gstar_s_decay_audit(&ds, 4, 0.5);
        assert!(audit.pass, "{audit:?}");
        // |x| = 1 against a plain box sum with quadrature evaluation
        let (em, en) = sp.eps_emb;
        let (pm, pn) = sp.uniformizer_emb;
        let one = sp.table.from_int(1);
        let mut brute = 0.0;
        for j in -6..=6i32 {
            for kk in -40..=40i32 {
                let ym = em.powi(kk) * pm.powi(j);
                let yn = en.powi(kk) * pn.powi(j);
                let a = ad.eval_at(ym, ad.best_sigma(ym).0) * ad.eval_at(yn, ad.best_sigma(yn).0);
                let r = sp.table.mul(sp.eps_pow(kk as i64), one);
                let g = gq.eval(j as i64, r) + gq.eval(j as i64, sp.table.mul(sp.minus_one, r));
                brute += (a * g).re;
            }
        }
        assert!((audit.points[0].1 - brute).abs() < 1e-6, "{} vs {brute}", audit.points[0].1);
    }
}
