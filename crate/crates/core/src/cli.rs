//! Command-line dispatch. Exit codes: 0 success or PASS, 1 check FAIL, 2 usage
//! or input error.

use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::coda::{coda_average, x_eps_growth};
use crate::delta::DeltaSym2Data;
use crate::error::Error;
use crate::hecke::{count_nth_roots, enumerate_c1, unit_compat_residual, CharContext, HeckeCharacter};
use crate::local::{dual_bounds_audit, gq_star_for, SatakeMode, ToyAutomorphicData};
use crate::mellin::{ArchDual, ArchMellinProfile, ArchPlace, ProfileKind};
use crate::nf::{rat_to_f64, unit_image_mod, PrimeIdealData, QuadField};
use crate::report::{parse_config_text, write_artifact, Artifact, Format, RunConfig, Verdict};
use crate::residue::{
    build_residue_field, convolution_identity_check, deligne_audit, gauss_sum, gauss_sums_all, kloosterman, MultChar,
};
use crate::sunit::{
    bm_ratio_scan, canonical_generators_up_to, cond1_density, gstar_s_decay_audit, rohrlich_scan, sunit_average, DualS,
    Envelope, FiniteComponent, SPoint, SPrime, TestFunctionSpec,
};
use crate::unfold::{unfolding_constant, IdeleClassPoint, UnfoldingAssembly};
use crate::voronoi::{amplifier_demo, delta_pole_scan, DeltaVoronoi, ScalePoint};

/// Default worker count when `--threads` is absent.
pub const THREADS_ENV: &str = "GL1KIT_THREADS";

const GLOBAL_VALUED: [&str; 4] = ["--threads", "--out", "--format", "--config"];

#[derive(Parser, Debug)]
#[command(name = "gl1kit", version, about = "GL(1) audits, scans and identity checks over Q and real quadratic fields")]
pub struct Cli {
    /// Key-value file mirroring the flags (`key = value` per line); flags win.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Worker threads; defaults to $GL1KIT_THREADS, else all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the artifact here and print a one-line summary instead.
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct PrimeSel {
    /// Rational prime below 𝔮.
    #[arg(long)]
    p: Option<u64>,
    /// Norm of 𝔮.
    #[arg(long = "q-norm")]
    q_norm: Option<u64>,
    /// Which prime when several share the selector.
    #[arg(long = "prime-index", default_value_t = 0)]
    prime_index: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct FieldArgs {
    #[arg(long, default_value_t = 1)]
    d: i64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct FactorArgs {
    #[arg(long, default_value_t = 1)]
    d: i64,
    #[arg(long)]
    p: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct UnitImageArgs {
    #[arg(long, default_value_t = 1)]
    d: i64,
    #[command(flatten)]
    #[serde(flatten)]
    prime: PrimeSel,
    /// Modulus 𝔮^power.
    #[arg(long, default_value_t = 1)]
    power: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BoundArgs {
    #[arg(long, default_value_t = 1)]
    d: i64,
    /// Norm bound.
    #[arg(long = "X", default_value_t = 1000)]
    #[serde(rename = "X")]
    x: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct GaussArgs {
    #[arg(long, default_value_t = 1)]
    d: i64,
    #[command(flatten)]
    #[serde(flatten)]
    prime: PrimeSel,
    /// Character index k (χ = e(k·dlog/φ)); all characters when absent.
    #[arg(long)]
    k: Option<i64>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct KlArgs {
    #[arg(long, default_value_t = 1)]
    d: i64,
    #[command(flatten)]
    #[serde(flatten)]
    prime: PrimeSel,
    #[arg(long, default_value_t = 2)]
    m: u32,
    /// Rational integer representing y in the residue field; every y when absent.
    #[arg(long)]
    y: Option<i64>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct HeckeEnumArgs {
    #[arg(long, default_value_t = 1)]
    d: i64,
    /// Modulus prime; conductor 1 when absent.
    #[command(flatten)]
    #[serde(flatten)]
    prime: PrimeSel,
    /// Analytic conductor bound.
    #[arg(long = "t-bound", default_value_t = 20.0)]
    t_bound: f64,
    #[arg(long, default_value_t = 100_000)]
    cap: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct HeckeCountArgs {
    #[arg(long, default_value_t = 1)]
    d: i64,
    #[command(flatten)]
    #[serde(flatten)]
    prime: PrimeSel,
    #[arg(long, default_value_t = 2)]
    n: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct XEpsArgs {
    #[arg(long, default_value_t = 5)]
    d: i64,
    #[arg(long, default_value_t = 50)]
    lo: u64,
    #[arg(long, default_value_t = 500)]
    hi: u64,
    /// T_μ = N𝔮^exponent.
    #[arg(long, default_value_t = 0.1)]
    exponent: f64,
    #[arg(long = "slope-lo", default_value_t = 0.95)]
    slope_lo: f64,
    #[arg(long = "slope-hi", default_value_t = 1.15)]
    slope_hi: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct Cond1Args {
    #[arg(long, default_value_t = 5)]
    d: i64,
    #[command(flatten)]
    #[serde(flatten)]
    prime: PrimeSel,
    /// Number of principal ideals coprime to 𝔮.
    #[arg(long = "X", default_value_t = 100_000)]
    #[serde(rename = "X")]
    x: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FiniteArg {
    Units,
    PrincipalUnits,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SunitArgs {
    #[arg(long, default_value_t = 1)]
    d: i64,
    #[command(flatten)]
    #[serde(flatten)]
    prime: PrimeSel,
    /// Width of the log-Gaussian profile at every real place.
    #[arg(long, default_value_t = 0.8)]
    width: f64,
    #[arg(long = "x-mu", default_value_t = 1.0)]
    x_mu: f64,
    #[arg(long = "x-nu", default_value_t = 1.0)]
    x_nu: f64,
    /// v_𝔮(x).
    #[arg(long, default_value_t = 0)]
    v: i64,
    /// Residue of the 𝔮-unit part of x, as a rational integer.
    #[arg(long, default_value_t = 1)]
    u: i64,
    #[arg(long, value_enum, default_value_t = FiniteArg::PrincipalUnits)]
    finite: FiniteArg,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct GqArgs {
    #[arg(long, default_value_t = 1)]
    d: i64,
    #[command(flatten)]
    #[serde(flatten)]
    prime: PrimeSel,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Degree of the synthetic π.
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long = "v-max", default_value_t = 12)]
    v_max: i64,
    /// Residue of the unit part, as a rational integer.
    #[arg(long, default_value_t = 1)]
    u: i64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct DualAuditArgs {
    #[arg(long, default_value_t = 1)]
    d: i64,
    #[command(flatten)]
    #[serde(flatten)]
    prime: PrimeSel,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long = "v-max", default_value_t = 24)]
    v_max: i64,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    /// Allowed implied constant.
    #[arg(long, default_value_t = 10.0)]
    constant: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SadicArgs {
    #[arg(long, default_value_t = 5)]
    d: i64,
    #[command(flatten)]
    #[serde(flatten)]
    prime: PrimeSel,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long = "v-max", default_value_t = 24)]
    v_max: i64,
    #[arg(long, default_value_t = 1.5)]
    width: f64,
    #[arg(long = "points-per-unit", default_value_t = 4)]
    points_per_unit: usize,
    #[arg(long = "far-eps", default_value_t = 0.5)]
    far_eps: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct BmArgs {
    #[arg(long, default_value_t = 5)]
    d: i64,
    #[arg(long, default_value_t = 0.5)]
    a: f64,
    #[arg(long, default_value_t = 0.5)]
    b: f64,
    /// Grid half-width in log|x_v|.
    #[arg(long, default_value_t = 6.0)]
    range: f64,
    #[arg(long, default_value_t = 0.25)]
    step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileArg {
    LogGaussian,
    Bump,
    Gaussian,
    Coda,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct MellinArgs {
    #[arg(long, value_enum, default_value_t = ProfileArg::LogGaussian)]
    profile: ProfileArg,
    #[arg(long, default_value_t = 1.0)]
    width: f64,
    #[arg(long, default_value_t = 1.0)]
    center: f64,
    #[arg(long, default_value_t = 0.5)]
    radius: f64,
    #[arg(long, default_value_t = 0.3)]
    beta: f64,
    #[arg(long = "s-re", default_value_t = 0.5)]
    s_re: f64,
    #[arg(long = "s-im", default_value_t = 0.0)]
    s_im: f64,
    /// Point for the Mellin inversion round trip.
    #[arg(long, default_value_t = 1.3)]
    y: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct UnfoldArgs {
    #[arg(long, default_value_t = 5)]
    d: i64,
    #[command(flatten)]
    #[serde(flatten)]
    prime: PrimeSel,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    width: f64,
    #[arg(long = "x-mu", default_value_t = 1.0)]
    x_mu: f64,
    #[arg(long = "x-nu", default_value_t = 1.0)]
    x_nu: f64,
    #[arg(long, default_value_t = 1)]
    u: i64,
    /// Certification budget for both sides.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Largest two-sided difference accepted.
    #[arg(long, default_value_t = 1e-5)]
    accept: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct VoronoiArgs {
    #[arg(long, default_value_t = 11)]
    q: u64,
    #[arg(long = "n-max", default_value_t = 100_000)]
    n_max: usize,
    #[arg(long, default_value_t = 0.5)]
    width: f64,
    #[arg(long, default_value_t = 2)]
    p0: u64,
    #[arg(long, default_value_t = 3)]
    ell: u32,
    #[arg(long, default_value_t = 0.5)]
    y: f64,
    /// Largest number of terms on either side.
    #[arg(long, default_value_t = 100_000)]
    cap: u64,
    #[arg(long = "tail-tol", default_value_t = 1e-9)]
    tail_tol: f64,
    #[arg(long = "pole-grid", default_value_t = 20)]
    pole_grid: usize,
    #[arg(long, default_value_t = 1e-3)]
    accept: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct AmpArgs {
    #[arg(long, default_value_t = 2)]
    p0: u64,
    #[arg(long, default_value_t = 2)]
    ell: u32,
    /// Moduli are the primes in [Q, 2Q).
    #[arg(long = "q-lo", default_value_t = 20)]
    q_lo: u64,
    #[arg(long, default_value_t = 0.5)]
    width: f64,
    #[arg(long = "n-max", default_value_t = 100_000)]
    n_max: usize,
    #[arg(long, default_value_t = 100_000)]
    cap: u64,
    #[arg(long = "tail-tol", default_value_t = 1e-9)]
    tail_tol: f64,
    #[arg(long = "pole-grid", default_value_t = 20)]
    pole_grid: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CodaArgs {
    #[arg(long, default_value_t = 5)]
    d: i64,
    #[arg(long, default_value_t = 0.3)]
    beta: f64,
    #[arg(long, default_value_t = 20)]
    lo: u64,
    #[arg(long, default_value_t = 60)]
    hi: u64,
    /// T_μ = N𝔮^exponent.
    #[arg(long, default_value_t = 0.5)]
    exponent: f64,
    #[arg(long, default_value_t = 400)]
    truncation: u64,
    /// Series are evaluated at 2β + shift.
    #[arg(long, default_value_t = 1.0)]
    shift: f64,
    #[arg(long, default_value_t = 3)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Discriminant, fundamental unit, regulator, class number.
    FieldInfo(FieldArgs),
    /// Prime ideals above a rational prime.
    Factor(FactorArgs),
    /// Size of the image of the units in (O/𝔮^k)^×.
    UnitImage(UnitImageArgs),
    /// Unit images for every squarefree modulus of norm ≤ X.
    Rohrlich(BoundArgs),
    /// Gauss sums over the residue field and |τ|² = q.
    Gauss(GaussArgs),
    /// Hyper-Kloosterman sums against the Deligne bound.
    Kloosterman(KlArgs),
    /// The η²-twisted Gauss sum convolution identity for every y.
    IdentityCheck(KlArgs),
    /// Hecke characters of bounded analytic conductor.
    HeckeEnum(HeckeEnumArgs),
    /// Number of n-th roots of the trivial character.
    HeckeCount(HeckeCountArgs),
    /// Growth of the family X_ε(𝔮) over split primes.
    XEps(XEpsArgs),
    /// Empirical density of principal ideals whose generator is ±1 mod 𝔮.
    Cond1Density(Cond1Args),
    /// Canonical generators of principal ideals of norm ≤ X.
    CanonicalGen(BoundArgs),
    /// Certified S-unit average of a log-Gaussian test function.
    SunitAvg(SunitArgs),
    /// The local dual g*_𝔮 along valuations.
    Gqstar(GqArgs),
    /// Support and size bounds for g*_𝔮.
    DualAudit(DualAuditArgs),
    /// Decay of the S-adic dual average.
    SadicAudit(SadicArgs),
    /// Unit sum against min(|x|^a, |x|^{-b}) with the log factor.
    BmScan(BmArgs),
    /// Mellin transform of an archimedean profile and its inversion.
    Mellin(MellinArgs),
    /// Both sides of the unfolding identity at one point.
    UnfoldCheck(UnfoldArgs),
    /// Voronoi summation for sym² of Δ at one scale point.
    VoronoiDelta(VoronoiArgs),
    /// Amplifier bound on λ(p₀^ℓ) for sym² of Δ.
    AmpDemo(AmpArgs),
    /// Averages of twisted sym² sums over the coda family.
    CodaDemo(CodaArgs),
}

enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type Out = std::result::Result<Artifact, CliError>;

fn usage<T>(msg: impl Into<String>) -> std::result::Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

fn field(d: i64) -> std::result::Result<QuadField, CliError> {
    if d > 100_000 {
        return usage(format!("--d {d} is too large (supported: d ≤ 100000)"));
    }
    Ok(QuadField::new(d)?)
}

fn select_prime(k: &QuadField, sel: &PrimeSel) -> std::result::Result<PrimeIdealData, CliError> {
    let list: Vec<PrimeIdealData> = match (sel.p, sel.q_norm) {
        (Some(_), Some(_)) => return usage("give either --p or --q-norm, not both"),
        (None, None) => return usage("a prime is required: pass --p <rational prime> or --q-norm <norm>"),
        (Some(p), None) => k.factor_rational_prime(p)?,
        (None, Some(n)) => {
            if !(2..=10_000_000).contains(&n) {
                return usage(format!("--q-norm {n} is outside [2, 10^7]"));
            }
            k.primes_up_to_norm(n).into_iter().filter(|q| q.norm() == n).collect()
        }
    };
    if list.is_empty() {
        return usage(format!("Q(√{}) has no prime ideal of norm {}", k.d, sel.q_norm.unwrap_or(0)));
    }
    match list.get(sel.prime_index) {
        Some(q) => Ok(*q),
        None => usage(format!(
            "--prime-index {} is out of range: the selector matches {} prime(s)",
            sel.prime_index,
            list.len()
        )),
    }
}

fn synthetic(k: &QuadField, n: usize, seed: u64) -> std::result::Result<ToyAutomorphicData, CliError> {
    if !(2..=4).contains(&n) {
        return usage(format!("--n {n} is unsupported (use 2, 3 or 4)"));
    }
    Ok(ToyAutomorphicData::new(k, n, seed, SatakeMode::Generic))
}

fn positive(name: &str, x: f64) -> std::result::Result<(), CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        usage(format!("--{name} must be a positive number, got {x}"))
    }
}

fn c(z: Complex64) -> (f64, f64) {
    (z.re, z.im)
}

fn field_info(cfg: &RunConfig, a: &FieldArgs) -> Out {
    let k = field(a.d)?;
    let unit = k.fund_unit.as_ref().map(|e| (e.to_int(), e.embeddings(), rat_to_f64(&e.norm())));
    let res = json!({
        "d": k.d,
        "disc": k.disc,
        "degree": k.degree(),
        "class_number": k.class_number,
        "regulator": k.regulator,
        "fundamental_unit": unit.map(|u| json!({"basis_coords": u.0, "embeddings": u.1, "norm": u.2})),
        "roots_of_unity": k.roots_of_unity,
        "zeta_residue": k.zeta_residue(),
        "unfolding_constant": unfolding_constant(&k),
        "minkowski_bound": k.minkowski_bound(),
    });
    let summary = format!("Q(√{}): disc {}, h = {}, R = {:.12}", k.d, k.disc, k.class_number, k.regulator);
    Ok(Artifact::new(cfg, Verdict::Info, summary, &res))
}

fn factor(cfg: &RunConfig, a: &FactorArgs) -> Out {
    let k = field(a.d)?;
    let primes = k.factor_rational_prime(a.p)?;
    let rows: Vec<_> = primes
        .iter()
        .map(|q| json!({"p": q.p, "e": q.e, "f": q.f, "norm": q.norm(), "hnf": [q.hnf.a, q.hnf.b, q.hnf.c], "root": q.root}))
        .collect();
    let kind = match (primes.len(), primes[0].e) {
        (2, _) => "splits",
        (_, 2) => "ramifies",
        _ => "is inert",
    };
    let summary = format!("{} {kind} in Q(√{})", a.p, k.d);
    Ok(Artifact::new(cfg, Verdict::Info, summary, &json!({"count": rows.len()})).with_rows(&rows))
}

fn unit_image(cfg: &RunConfig, a: &UnitImageArgs) -> Out {
    let k = field(a.d)?;
    let q = select_prime(&k, &a.prime)?;
    if a.power == 0 || a.power > 8 {
        return usage("--power must lie in 1..=8");
    }
    let m = k.ideal_pow(&q.hnf, a.power);
    let image = unit_image_mod(&k, &m)?;
    let n = q.norm() as u128;
    let phi = n.pow(a.power - 1) * (n - 1);
    let res = json!({"modulus_norm": m.norm(), "phi": phi, "image": image, "index": phi / image as u128});
    let summary = format!("units cover {image} of the {phi} classes mod 𝔮^{}", a.power);
    Ok(Artifact::new(cfg, Verdict::Info, summary, &res))
}

fn rohrlich(cfg: &RunConfig, a: &BoundArgs) -> Out {
    let k = field(a.d)?;
    let rows = rohrlich_scan(&k, a.x)?;
    let nontrivial: Vec<_> = rows.iter().filter(|r| r.norm > 1).collect();
    let min = nontrivial.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let summary = format!("{} squarefree moduli; smallest log|image|/log N = {:.6}", rows.len(), min);
    let res = json!({"moduli": rows.len(), "min_ratio": if min.is_finite() { Some(min) } else { None }});
    Ok(Artifact::new(cfg, Verdict::Info, summary, &res).with_rows(&rows))
}

fn gauss(cfg: &RunConfig, a: &GaussArgs) -> Out {
    let k = field(a.d)?;
    let q = select_prime(&k, &a.prime)?;
    let tab = build_residue_field(&k, &q)?;
    let n = tab.order();
    let qf = tab.q as f64;
    if let Some(j) = a.k {
        let chi = MultChar::new(j, n);
        let tau = gauss_sum(&tab, &chi);
        let expect = if chi.is_trivial() { 1.0 } else { qf };
        let dev = (tau.norm_sqr() - expect).abs() / expect;
        let summary = format!("τ(χ_{}) = {:.12} {:+.12}i, |τ|² = {:.12}", chi.k, tau.re, tau.im, tau.norm_sqr());
        let res = json!({"q": tab.q, "k": chi.k, "tau": c(tau), "abs_sq": tau.norm_sqr(), "rel_dev": dev});
        return Ok(Artifact::new(cfg, Verdict::from_bool(dev < a.tol), summary, &res).sides(
            tau.norm_sqr(),
            expect,
            dev,
            0.0,
        ));
    }
    let all = gauss_sums_all(&tab);
    let rows: Vec<_> =
        all.iter().enumerate().map(|(j, t)| json!({"k": j, "re": t.re, "im": t.im, "abs_sq": t.norm_sqr()})).collect();
    let dev = all.iter().skip(1).map(|t| (t.norm_sqr() - qf).abs() / qf).fold(0.0, f64::max);
    let summary = format!("{} nontrivial characters mod 𝔮 (q = {}); max ||τ|²/q - 1| = {:.3e}", n - 1, tab.q, dev);
    let res = json!({"q": tab.q, "characters": n, "max_rel_dev": dev});
    Ok(Artifact::new(cfg, Verdict::from_bool(dev < a.tol), summary, &res).with_rows(&rows))
}

fn kloosterman_cmd(cfg: &RunConfig, a: &KlArgs) -> Out {
    let k = field(a.d)?;
    let q = select_prime(&k, &a.prime)?;
    if a.m == 0 || a.m > 12 {
        return usage("--m must lie in 1..=12");
    }
    let tab = build_residue_field(&k, &q)?;
    let bound = a.m as f64 * (tab.q as f64).powf((a.m as f64 - 1.0) / 2.0);
    if let Some(y) = a.y {
        let yy = tab.from_int(y as i128);
        let v = kloosterman(&tab, a.m, yy)?;
        let ok = v.norm() <= bound * (1.0 + a.tol);
        let summary = format!("Kl_{}({y}) = {:.12} {:+.12}i, bound {:.6}", a.m, v.re, v.im, bound);
        let res = json!({"q": tab.q, "m": a.m, "y": y, "value": c(v), "abs": v.norm(), "bound": bound});
        return Ok(Artifact::new(cfg, Verdict::from_bool(ok), summary, &res));
    }
    let rows = deligne_audit(&tab, a.m);
    let worst = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let violations = rows.iter().filter(|r| r.ratio > 1.0 + a.tol).count();
    let summary = format!("{} values of y, max |Kl|/bound = {:.6}, {} violations", rows.len(), worst, violations);
    let res = json!({"q": tab.q, "m": a.m, "bound": bound, "max_ratio": worst, "violations": violations});
    Ok(Artifact::new(cfg, Verdict::from_bool(violations == 0), summary, &res).with_rows(&rows))
}

fn identity_check(cfg: &RunConfig, a: &KlArgs) -> Out {
    let k = field(a.d)?;
    let q = select_prime(&k, &a.prime)?;
    if a.m == 0 || a.m > 12 {
        return usage("--m must lie in 1..=12");
    }
    let tab = build_residue_field(&k, &q)?;
    let ys: Vec<u32> = match a.y {
        Some(y) => vec![tab.from_int(y as i128)],
        None => tab.units().collect(),
    };
    let mut rows = Vec::new();
    let (mut worst, mut at) = (0.0f64, (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)));
    for y in ys {
        let r = convolution_identity_check(&tab, a.m, y)?;
        if r.diff >= worst {
            worst = r.diff;
            at = (r.lhs, r.rhs);
        }
        rows.push(json!({"y": y, "lhs": c(r.lhs), "rhs": c(r.rhs), "diff": r.diff}));
    }
    let summary = format!("{} values of y, max |lhs - rhs| = {:.3e}", rows.len(), worst);
    let res = json!({"q": tab.q, "m": a.m, "max_diff": worst, "tol": a.tol});
    Ok(Artifact::new(cfg, Verdict::from_bool(worst < a.tol), summary, &res)
        .sides(at.0.norm(), at.1.norm(), worst, 0.0)
        .with_rows(&rows))
}

fn context(k: &QuadField, sel: &PrimeSel) -> std::result::Result<CharContext, CliError> {
    if sel.p.is_none() && sel.q_norm.is_none() {
        return Ok(CharContext::new(k, None)?);
    }
    let q = select_prime(k, sel)?;
    Ok(CharContext::new(k, Some(&q))?)
}

fn hecke_enum(cfg: &RunConfig, a: &HeckeEnumArgs) -> Out {
    let k = field(a.d)?;
    positive("t-bound", a.t_bound)?;
    let ctx = context(&k, &a.prime)?;
    let chars = enumerate_c1(&ctx, a.t_bound, a.cap)?;
    let residual = chars.iter().map(|x| unit_compat_residual(&ctx, x)).fold(0.0, f64::max);
    let summary = format!(
        "{} characters with analytic conductor ≤ {}; max unit residual {:.3e}",
        chars.len(),
        a.t_bound,
        residual
    );
    let res = json!({"modulus_norm": ctx.modulus_norm(), "group_order": ctx.group_order, "count": chars.len(), "max_unit_residual": residual});
    Ok(Artifact::new(cfg, Verdict::from_bool(residual < 1e-8), summary, &res).with_rows(&chars))
}

fn hecke_count(cfg: &RunConfig, a: &HeckeCountArgs) -> Out {
    let k = field(a.d)?;
    let ctx = context(&k, &a.prime)?;
    let xi = HeckeCharacter::trivial(&ctx);
    let count = count_nth_roots(&ctx, a.n, &xi)?;
    let bound = 4 * a.n;
    let summary = format!("{count} characters χ with χ^{} = 1 (bound {bound})", a.n);
    let res = json!({"modulus_norm": ctx.modulus_norm(), "n": a.n, "count": count, "bound": bound});
    Ok(Artifact::new(cfg, Verdict::from_bool(count <= bound), summary, &res))
}

fn x_eps(cfg: &RunConfig, a: &XEpsArgs) -> Out {
    let k = field(a.d)?;
    if a.lo >= a.hi || a.hi > 1_000_000 {
        return usage("need --lo < --hi ≤ 10^6");
    }
    let g = x_eps_growth(&k, a.lo, a.hi, a.exponent)?;
    let ok = g.slope >= a.slope_lo && g.slope <= a.slope_hi;
    let rows: Vec<_> = g.points.iter().map(|&(n, s)| json!({"q_norm": n, "size": s})).collect();
    let summary =
        format!("{} split primes, log-log slope {:.4} (window [{}, {}])", rows.len(), g.slope, a.slope_lo, a.slope_hi);
    let res = json!({"d": g.d, "exponent": g.exponent, "slope": g.slope});
    Ok(Artifact::new(cfg, Verdict::from_bool(ok), summary, &res).with_rows(&rows))
}

fn cond1(cfg: &RunConfig, a: &Cond1Args) -> Out {
    let k = field(a.d)?;
    let q = select_prime(&k, &a.prime)?;
    if a.x == 0 || a.x > 5_000_000 {
        return usage("--X must lie in 1..=5000000");
    }
    let sp = SPrime::new(&k, &q)?;
    let r = cond1_density(&sp, a.x);
    let summary = format!("density {:.6} against 2/φ = {:.6} (z = {:+.3})", r.density, r.expected, r.z_score);
    Ok(Artifact::new(cfg, Verdict::from_bool(r.within_3_sigma), summary, &r).sides(
        r.density,
        r.expected,
        (r.density - r.expected).abs(),
        3.0 * r.sigma,
    ))
}

fn canonical_gen(cfg: &RunConfig, a: &BoundArgs) -> Out {
    let k = field(a.d)?;
    if a.x == 0 || a.x > 1_000_000 {
        return usage("--X must lie in 1..=1000000");
    }
    let rows: Vec<_> = canonical_generators_up_to(&k, a.x)
        .into_iter()
        .map(|((x, y), n)| json!({"norm": n, "gen": [x, y], "embeddings": k.elem(x, y).embeddings()}))
        .collect();
    let summary = format!("{} principal ideals of norm ≤ {}", rows.len(), a.x);
    Ok(Artifact::new(cfg, Verdict::Info, summary, &json!({"count": rows.len()})).with_rows(&rows))
}

fn log_gaussian_spec(
    k: &QuadField,
    width: f64,
    finite: FiniteComponent,
) -> std::result::Result<TestFunctionSpec, CliError> {
    let lg = ArchMellinProfile::new(ProfileKind::LogGaussian { width })?;
    let env = Envelope { a: 1.0, b: 1.0, constant: (width * width / 2.0).exp() };
    Ok(TestFunctionSpec { finite, arch: vec![(lg, env); k.num_real_places] })
}

fn sunit_avg(cfg: &RunConfig, a: &SunitArgs) -> Out {
    let k = field(a.d)?;
    let q = select_prime(&k, &a.prime)?;
    positive("width", a.width)?;
    positive("tol", a.tol)?;
    if a.x_mu == 0.0 || a.x_nu == 0.0 || !a.x_mu.is_finite() || !a.x_nu.is_finite() {
        return usage("--x-mu and --x-nu must be finite and nonzero");
    }
    let sp = SPrime::new(&k, &q)?;
    let u = sp.table.from_int(a.u as i128);
    if sp.table.dlog(u).is_none() {
        return usage(format!("--u {} is not a unit mod 𝔮", a.u));
    }
    let finite = match a.finite {
        FiniteArg::Units => FiniteComponent::Units,
        FiniteArg::PrincipalUnits => FiniteComponent::PrincipalUnits,
    };
    let spec = log_gaussian_spec(&k, a.width, finite)?;
    let v = sunit_average(&sp, &spec, SPoint { arch: (a.x_mu, a.x_nu), v: a.v, u }, a.tol)?;
    let summary = format!("G_S(x) = {:.12} ± {:.1e} ({} terms)", v.value, v.error_bound, v.terms);
    Ok(Artifact::new(cfg, Verdict::Info, summary, &v))
}

fn gq_for(
    k: &QuadField,
    sel: &PrimeSel,
    n: usize,
    seed: u64,
    v_max: i64,
) -> std::result::Result<(PrimeIdealData, crate::local::GqStar), CliError> {
    let q = select_prime(k, sel)?;
    if !(0..=64).contains(&v_max) {
        return usage("--v-max must lie in 0..=64");
    }
    let pi = synthetic(k, n, seed)?;
    let g = gq_star_for(&pi, k, &q, v_max)?;
    Ok((q, g))
}

fn gqstar(cfg: &RunConfig, a: &GqArgs) -> Out {
    let k = field(a.d)?;
    let (q, g) = gq_for(&k, &a.prime, a.n, a.seed, a.v_max)?;
    let u = g.table().from_int(a.u as i128);
    if g.table().dlog(u).is_none() {
        return usage(format!("--u {} is not a unit mod 𝔮", a.u));
    }
    let lo = -2 * g.m as i64 - 4;
    let rows: Vec<_> = (lo..=a.v_max)
        .map(|v| {
            let z = g.eval(v, u);
            json!({"v": v, "abs_x": g.abs_x(v), "re": z.re, "im": z.im, "a_part": c(g.a_part(v))})
        })
        .collect();
    let summary = format!("g*_𝔮 at N𝔮 = {}, m = {}, v ∈ [{lo}, {}]", q.norm(), g.m, a.v_max);
    Ok(Artifact::new(cfg, Verdict::Info, summary, &json!({"q_norm": q.norm(), "m": g.m, "phi": g.phi}))
        .with_rows(&rows))
}

fn dual_audit(cfg: &RunConfig, a: &DualAuditArgs) -> Out {
    let k = field(a.d)?;
    positive("eps", a.eps)?;
    let (_, g) = gq_for(&k, &a.prime, a.n, a.seed, a.v_max)?;
    let audit = dual_bounds_audit(&g, a.eps, a.constant);
    let summary = format!(
        "support {}, odd valuations {}, max ratio {:.4} (allowed {})",
        if audit.zero_outside_support { "clean" } else { "VIOLATED" },
        if audit.zero_on_odd { "clean" } else { "VIOLATED" },
        audit.max_ratio,
        a.constant
    );
    Ok(Artifact::new(
        cfg,
        Verdict::from_bool(audit.pass),
        summary,
        &json!({
            "norm": audit.norm, "m": audit.m, "max_ratio": audit.max_ratio,
            "zero_outside_support": audit.zero_outside_support, "zero_on_odd": audit.zero_on_odd,
        }),
    )
    .with_rows(&audit.rows))
}

fn sadic_audit(cfg: &RunConfig, a: &SadicArgs) -> Out {
    let k = field(a.d)?;
    positive("width", a.width)?;
    positive("far-eps", a.far_eps)?;
    if a.points_per_unit == 0 || a.points_per_unit > 64 {
        return usage("--points-per-unit must lie in 1..=64");
    }
    let (q, g) = gq_for(&k, &a.prime, a.n, a.seed, a.v_max)?;
    let sp = SPrime::new(&k, &q)?;
    let lg = ArchMellinProfile::new(ProfileKind::LogGaussian { width: a.width })?;
    let place = ArchPlace::from_langlands(&vec![Complex64::new(0.0, 0.0); a.n]);
    let ad = ArchDual::new(lg, place.sym2.clone())?;
    let ds = DualS::new(sp, g, vec![ad; k.num_real_places])?;
    let audit = gstar_s_decay_audit(&ds, a.points_per_unit, a.far_eps);
    let rows: Vec<_> = audit.points.iter().map(|&(x, v, e)| json!({"abs_x": x, "value": v, "error": e})).collect();
    let summary = format!("slope {:.4} on [1, N^2m], far envelope margin {:.1}", audit.slope, audit.far_margin);
    let mut res = serde_json::to_value(&audit).unwrap_or_default();
    if let Some(m) = res.as_object_mut() {
        m.remove("points");
    }
    Ok(Artifact::new(cfg, Verdict::from_bool(audit.pass), summary, &res).with_rows(&rows))
}

fn bm_scan(cfg: &RunConfig, a: &BmArgs) -> Out {
    let k = field(a.d)?;
    positive("range", a.range)?;
    positive("step", a.step)?;
    if a.range / a.step > 2000.0 {
        return usage("grid too fine: --range/--step must be ≤ 2000");
    }
    let s = bm_ratio_scan(&k, a.a, a.b, a.range, a.step)?;
    let summary = format!("max ratio {:.6} at log|x| = ({:.2}, {:.2})", s.max_ratio, s.argmax.0, s.argmax.1);
    Ok(Artifact::new(cfg, Verdict::from_bool(s.max_ratio.is_finite()), summary, &s))
}

fn mellin(cfg: &RunConfig, a: &MellinArgs) -> Out {
    let kind = match a.profile {
        ProfileArg::LogGaussian => ProfileKind::LogGaussian { width: a.width },
        ProfileArg::Bump => ProfileKind::Bump { center: a.center, radius: a.radius },
        ProfileArg::Gaussian => ProfileKind::Gaussian,
        ProfileArg::Coda => ProfileKind::Coda { beta: a.beta },
    };
    let p = ArchMellinProfile::new(kind)?;
    let s = Complex64::new(a.s_re, a.s_im);
    let closed = p.mellin_half(s)?;
    let numeric = p.mellin_half_numeric(s)?;
    let inv = p.inverse(a.y, a.sigma)?;
    let direct = p.eval(a.y);
    let d1 = (closed - numeric).norm();
    let d2 = (inv - direct).norm();
    let ok = d1 <= a.tol * closed.norm().max(1.0) && d2 <= a.tol * direct.abs().max(1.0);
    let summary =
        format!("M(s) = {:.12} {:+.12}i; quadrature diff {:.1e}, inversion diff {:.1e}", closed.re, closed.im, d1, d2);
    let res = json!({
        "profile": p, "s": c(s), "mellin": c(closed), "mellin_numeric": c(numeric), "quadrature_diff": d1,
        "y": a.y, "sigma": a.sigma, "inverse": c(inv), "direct": direct, "inversion_diff": d2,
    });
    Ok(Artifact::new(cfg, Verdict::from_bool(ok), summary, &res).sides(closed.norm(), numeric.norm(), d1, a.tol))
}

fn unfold_check(cfg: &RunConfig, a: &UnfoldArgs) -> Out {
    let k = field(a.d)?;
    let q = select_prime(&k, &a.prime)?;
    positive("width", a.width)?;
    positive("tol", a.tol)?;
    let x_nu = if k.is_rational() { 1.0 } else { a.x_nu };
    let abs_x = (a.x_mu * x_nu).abs();
    if !(abs_x.is_finite() && abs_x > 0.0) {
        return usage("--x-mu and --x-nu must be finite and nonzero");
    }
    let asm = UnfoldingAssembly::new(&k, &q, a.seed, a.width, a.tol, abs_x)?;
    let u = asm.sp.table.from_int(a.u as i128);
    if asm.sp.table.dlog(u).is_none() {
        return usage(format!("--u {} is not a unit mod 𝔮", a.u));
    }
    let r = asm.check(&IdeleClassPoint { arch: (a.x_mu, x_nu), u }, a.tol)?;
    let budget = r.truncation_tail + r.lhs_error + r.rhs_error;
    let summary = format!(
        "lhs {:.12}, rhs {:.12}, |diff| {:.2e} ({} ideals, {} characters)",
        r.lhs.0, r.rhs.0, r.diff, r.ideals, r.characters
    );
    Ok(Artifact::new(cfg, Verdict::from_bool(r.diff < a.accept), summary, &r).sides(r.lhs.0, r.rhs.0, r.diff, budget))
}

fn delta_data(n_max: usize, grid: usize) -> std::result::Result<(DeltaSym2Data, crate::voronoi::PoleScan), CliError> {
    if !(1000..=400_000).contains(&n_max) {
        return usage("--n-max must lie in 1000..=400000");
    }
    if !(2..=200).contains(&grid) {
        return usage("--pole-grid must lie in 2..=200");
    }
    let data = DeltaSym2Data::new(n_max)?;
    let scan = delta_pole_scan(&data, 2, grid)?;
    Ok((data, scan))
}

fn voronoi_delta(cfg: &RunConfig, a: &VoronoiArgs) -> Out {
    positive("width", a.width)?;
    positive("y", a.y)?;
    if a.p0 == a.q || !crate::arith::is_prime(a.p0) || !crate::arith::is_prime(a.q) {
        return usage("--q and --p0 must be distinct primes");
    }
    if a.ell == 0 || a.ell > 12 {
        return usage("--ell must lie in 1..=12");
    }
    let (data, scan) = delta_data(a.n_max, a.pole_grid)?;
    let lg = ArchMellinProfile::new(ProfileKind::LogGaussian { width: a.width })?;
    let v = DeltaVoronoi::with_data(data, a.q, lg)?;
    let r = v.check(&ScalePoint { p0: a.p0, ell: a.ell, y: a.y }, a.cap, a.tail_tol, &scan)?;
    let ok = r.rel_diff <= a.accept && scan.poles == 0;
    let summary = format!(
        "lhs {:.12e}, rhs {:.12e}, rel diff {:.2e}, {} + {} terms, poles {}",
        r.lhs, r.rhs, r.rel_diff, r.lhs_terms, r.rhs_terms, scan.poles
    );
    Ok(Artifact::new(cfg, Verdict::from_bool(ok), summary, &json!({"voronoi": r, "pole_scan": scan})).sides(
        r.lhs,
        r.rhs,
        r.diff,
        r.lhs_tail + r.rhs_tail,
    ))
}

fn amp_demo(cfg: &RunConfig, a: &AmpArgs) -> Out {
    positive("width", a.width)?;
    if !crate::arith::is_prime(a.p0) {
        return usage("--p0 must be prime");
    }
    if a.ell == 0 || a.ell > 12 {
        return usage("--ell must lie in 1..=12");
    }
    if !(2..=1000).contains(&a.q_lo) {
        return usage("--q-lo must lie in 2..=1000");
    }
    let (data, scan) = delta_data(a.n_max, a.pole_grid)?;
    if a.p0 as usize > data.n_max {
        return usage("--p0 exceeds --n-max");
    }
    let lg = ArchMellinProfile::new(ProfileKind::LogGaussian { width: a.width })?;
    let r = amplifier_demo(&data, lg, a.p0, a.ell, a.q_lo, a.cap, a.tail_tol, &scan)?;
    let summary = format!(
        "|λ({}^{})| = {:.6} ≤ implied {:.6} over {} moduli",
        a.p0,
        a.ell,
        r.lambda_true.abs(),
        r.implied_bound,
        r.moduli.len()
    );
    let diff = r.implied_bound - r.lambda_true.abs();
    Ok(Artifact::new(cfg, Verdict::from_bool(r.bound_holds), summary, &r).sides(
        r.lambda_true.abs(),
        r.implied_bound,
        diff,
        r.f_tail,
    ))
}

fn coda_demo(cfg: &RunConfig, a: &CodaArgs) -> Out {
    let k = field(a.d)?;
    if a.lo >= a.hi || a.hi > 100_000 {
        return usage("need --lo < --hi ≤ 100000");
    }
    if !(2..=200_000).contains(&a.truncation) {
        return usage("--truncation must lie in 2..=200000");
    }
    let r = coda_average(&k, a.beta, (a.lo, a.hi), a.exponent, a.truncation, a.shift, a.seed)?;
    let summary = format!("Σ averages {:.6} over {} primes; ratio to Q/log Q {:.4}", r.total, r.rows.len(), r.ratio);
    Ok(Artifact::new(cfg, Verdict::from_bool(r.c_within_bound), summary, &r))
}

fn dispatch(cmd: &Command) -> (RunConfig, Out) {
    macro_rules! go {
        ($name:expr, $f:ident, $a:expr) => {{
            let cfg = RunConfig::from_args($name, $a);
            let out = $f(&cfg, $a);
            (cfg, out)
        }};
    }
    match cmd {
        Command::FieldInfo(a) => go!("field-info", field_info, a),
        Command::Factor(a) => go!("factor", factor, a),
        Command::UnitImage(a) => go!("unit-image", unit_image, a),
        Command::Rohrlich(a) => go!("rohrlich", rohrlich, a),
        Command::Gauss(a) => go!("gauss", gauss, a),
        Command::Kloosterman(a) => go!("kloosterman", kloosterman_cmd, a),
        Command::IdentityCheck(a) => go!("identity-check", identity_check, a),
        Command::HeckeEnum(a) => go!("hecke-enum", hecke_enum, a),
        Command::HeckeCount(a) => go!("hecke-count", hecke_count, a),
        Command::XEps(a) => go!("x-eps", x_eps, a),
        Command::Cond1Density(a) => go!("cond1-density", cond1, a),
        Command::CanonicalGen(a) => go!("canonical-gen", canonical_gen, a),
        Command::SunitAvg(a) => go!("sunit-avg", sunit_avg, a),
        Command::Gqstar(a) => go!("gqstar", gqstar, a),
        Command::DualAudit(a) => go!("dual-audit", dual_audit, a),
        Command::SadicAudit(a) => go!("sadic-audit", sadic_audit, a),
        Command::BmScan(a) => go!("bm-scan", bm_scan, a),
        Command::Mellin(a) => go!("mellin", mellin, a),
        Command::UnfoldCheck(a) => go!("unfold-check", unfold_check, a),
        Command::VoronoiDelta(a) => go!("voronoi-delta", voronoi_delta, a),
        Command::AmpDemo(a) => go!("amp-demo", amp_demo, a),
        Command::CodaDemo(a) => go!("coda-demo", coda_demo, a),
    }
}

fn has_flag(argv: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    argv.iter().any(|t| *t == flag || t.starts_with(&format!("{flag}=")))
}

/// Splices `--config` entries into argv: globals up front, the rest right after
/// the subcommand, skipping any key already given on the command line.
fn expand_config(argv: Vec<String>) -> std::result::Result<Vec<String>, String> {
    let mut rest = Vec::new();
    let mut path = None;
    let mut it = argv.into_iter();
    let prog = it.next().unwrap_or_else(|| "gl1kit".into());
    while let Some(t) = it.next() {
        if t == "--config" {
            path = Some(it.next().ok_or("--config needs a file path")?);
        } else if let Some(p) = t.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            rest.push(t);
        }
    }
    let Some(path) = path else {
        let mut out = vec![prog];
        out.extend(rest);
        return Ok(out);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config file {path}: {e}"))?;
    let pairs = parse_config_text(&text).map_err(|e| format!("{path}: {e}"))?;
    let mut sub = None;
    let mut i = 0;
    while i < rest.len() {
        let t = &rest[i];
        if GLOBAL_VALUED.contains(&t.as_str()) {
            i += 2;
        } else if t.starts_with('-') {
            i += 1;
        } else {
            sub = Some(i);
            break;
        }
    }
    let mut front = Vec::new();
    let mut local = Vec::new();
    for (k, v) in pairs {
        if has_flag(&rest, &k) {
            continue;
        }
        let target = if GLOBAL_VALUED.contains(&format!("--{k}").as_str()) { &mut front } else { &mut local };
        target.push(format!("--{k}"));
        target.push(v);
    }
    let mut out = vec![prog];
    out.extend(front);
    match sub {
        Some(s) => {
            out.extend(rest[..=s].iter().cloned());
            out.extend(local);
            out.extend(rest[s + 1..].iter().cloned());
        }
        None => out.extend(rest),
    }
    Ok(out)
}

fn thread_count(flag: Option<usize>) -> std::result::Result<Option<usize>, String> {
    if let Some(n) = flag {
        return if n == 0 { Err("--threads must be at least 1".into()) } else { Ok(Some(n)) };
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("{THREADS_ENV}={s} is not a positive integer")),
        },
        Err(_) => Ok(None),
    }
}

/// Runs one invocation and returns its exit code.
pub fn run(argv: Vec<String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return code;
        }
    };
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 2;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: cannot start thread pool: {e}");
            return 2;
        }
    };
    let (cfg, out) = pool.install(|| dispatch(&cli.command));
    let artifact = match out {
        Ok(a) => a,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            return 2;
        }
        Err(CliError::Lib(e @ (Error::CertificationFailed(_) | Error::TruncationInsufficient { .. }))) => {
            let _ = writeln!(stderr, "check could not be certified: {e}");
            Artifact::new(&cfg, Verdict::Fail, e.to_string(), &json!({"error": e.to_string()}))
        }
        Err(CliError::Lib(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            return 2;
        }
    };
    let code = artifact.verdict.exit_code();
    match &cli.out {
        Some(path) => {
            let written = std::fs::File::create(path).and_then(|mut f| write_artifact(&mut f, &artifact, cli.format));
            if let Err(e) = written {
                let _ = writeln!(stderr, "error: cannot write {path}: {e}");
                return 2;
            }
            let verdict = format!("{:?}", artifact.verdict).to_uppercase();
            let _ = writeln!(stdout, "{} {verdict}: {}", artifact.check, artifact.summary);
        }
        None => {
            if let Err(e) = write_artifact(stdout, &artifact, cli.format) {
                let _ = writeln!(stderr, "error: {e}");
                return 2;
            }
        }
    }
    code
}
