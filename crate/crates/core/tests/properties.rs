use gl1kit::arith::{is_prime, primes_up_to};
use gl1kit::hecke::{enumerate_c1, unit_compat_residual, CharContext};
use gl1kit::local::{SatakeLocal, SatakeMode, ToyAutomorphicData};
use gl1kit::mellin::{ArchMellinProfile, ProfileKind};
use gl1kit::nf::{QuadField, Rational};
use gl1kit::report::{parse_config_text, RunConfig};
use gl1kit::residue::{build_residue_field, gauss_sum, kloosterman_all, MultChar};
use gl1kit::sunit::{
    normalize_generator, sunit_average, Envelope, FiniteComponent, FundamentalDomain, SPoint, SPrime, TestFunctionSpec,
};
use gl1kit::unfold::{IdeleClassPoint, UnfoldingAssembly};
use num_complex::Complex64;
use proptest::prelude::*;

fn real_quadratic() -> impl Strategy<Value = i64> {
    prop::sample::select(vec![2i64, 3, 5, 7, 10])
}

fn small_prime() -> impl Strategy<Value = u64> {
    prop::sample::select(primes_up_to(2000).into_iter().filter(|&p| p > 2).collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_is_multiplicative(d in real_quadratic(), a in -10_000i128..10_000, b in -10_000i128..10_000,
                              c in -10_000i128..10_000, e in -10_000i128..10_000) {
        let k = QuadField::new(d).unwrap();
        let (x, y) = (k.elem(a, b), k.elem(c, e));
        prop_assert_eq!((&x * &y).norm(), x.norm() * y.norm());
    }

    #[test]
    fn principal_ideals_return_an_associate(d in prop::sample::select(vec![2i64, 3, 5, 7, 13]),
                                            a in -60i128..60, b in -60i128..60) {
        prop_assume!(a != 0 || b != 0);
        let k = QuadField::new(d).unwrap();
        let g = k.elem(a, b);
        let ideal = k.principal_ideal(&g).unwrap();
        let h = k.is_principal(&ideal).unwrap().expect("principal");
        let u = &h * &g.inv().unwrap();
        prop_assert!(u.is_integral());
        let one = Rational::from_integer(1);
        prop_assert!(u.norm() == one || u.norm() == -one);
    }

    #[test]
    fn generator_normalization_ignores_units(d in prop::sample::select(vec![2i64, 5, 13]), a in -40i128..40,
                                             b in -40i128..40, e in -6i64..=6, neg in any::<bool>()) {
        prop_assume!(a != 0 || b != 0);
        let k = QuadField::new(d).unwrap();
        let g = k.elem(a, b);
        let eps = k.fundamental_unit().unwrap().pow(e).unwrap();
        let u = if neg { &k.elem(-1, 0) * &eps } else { eps };
        prop_assert_eq!(normalize_generator(&k, &(&u * &g)).unwrap(), normalize_generator(&k, &g).unwrap());
    }

    #[test]
    fn unit_orbits_meet_the_domain_once(d in prop::sample::select(vec![2i64, 5]), lm in -5.0f64..5.0, ln in -5.0f64..5.0,
                                        sm in any::<bool>(), sn in any::<bool>()) {
        let k = QuadField::new(d).unwrap();
        let dom = FundamentalDomain::for_units(&k);
        let (em, en) = k.fundamental_unit().unwrap().embeddings();
        let x = (lm.exp() * if sm { 1.0 } else { -1.0 }, ln.exp() * if sn { 1.0 } else { -1.0 });
        let mut hits = 0;
        for j in -40..=40 {
            for s in [1.0, -1.0] {
                if dom.contains((s * x.0 * em.powi(j), s * x.1 * en.powi(j))) {
                    hits += 1;
                }
            }
        }
        prop_assert_eq!(hits, 1);
    }

    #[test]
    fn gauss_sums_have_modulus_sqrt_q(p in small_prime(), j in 1u64..1_000_000, d in prop::sample::select(vec![1i64, 5])) {
        let k = QuadField::new(d).unwrap();
        for q in k.factor_rational_prime(p).unwrap().into_iter().filter(|q| !q.is_ramified() && q.norm() < 2000) {
            let tab = build_residue_field(&k, &q).unwrap();
            let n = tab.order();
            let chi = MultChar::new((1 + j % (n - 1)) as i64, n);
            let t = gauss_sum(&tab, &chi);
            let qf = q.norm() as f64;
            prop_assert!((t.norm_sqr() - qf).abs() <= 1e-9 * qf);
        }
    }

    #[test]
    fn kloosterman_sums_over_y_add_to_one(p in small_prime()) {
        let k = QuadField::new(1).unwrap();
        let q = k.factor_rational_prime(p).unwrap()[0];
        let tab = build_residue_field(&k, &q).unwrap();
        let s: Complex64 = kloosterman_all(&tab, 2).into_iter().sum();
        prop_assert!((s - 1.0).norm() < 1e-9, "{}", s);
    }

    #[test]
    fn conductor_one_characters_form_a_group(d in prop::sample::select(vec![2i64, 5]), i in any::<prop::sample::Index>(),
                                             j in any::<prop::sample::Index>()) {
        let ctx = CharContext::new(&QuadField::new(d).unwrap(), None).unwrap();
        let list = enumerate_c1(&ctx, 500.0, 100_000).unwrap();
        let (x, y) = (i.get(&list), j.get(&list));
        let mut z = x.clone();
        z.t_mu += y.t_mu;
        z.t_nu += y.t_nu;
        z.signs = ((x.signs.0 + y.signs.0) % 2, (x.signs.1 + y.signs.1) % 2);
        prop_assert!(unit_compat_residual(&ctx, &z) < 1e-9);
    }

    #[test]
    fn sym2_coefficients_invert_the_local_polynomial(n in 2usize..=4, r in prop::collection::vec(0.5f64..1.5, 4),
                                                      th in prop::collection::vec(0.0f64..6.3, 4)) {
        let alpha: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(r[i], th[i])).collect();
        let f = SatakeLocal::new(11.0, alpha).sym2_factor();
        // 1/Σ c_j X^j by the recursion h_r = -Σ_{j≥1} c_j h_{r-j}
        let mut h = vec![Complex64::new(1.0, 0.0)];
        for k in 1..=12 {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 1..f.poly.len().min(k + 1) {
                acc -= f.poly[j] * h[k - j];
            }
            h.push(acc);
        }
        for k in 0..=12 {
            prop_assert!((f.lambda[k] - h[k]).norm() < 1e-10 * (1.0 + h[k].norm()));
        }
    }

    #[test]
    fn local_gamma_is_self_dual(seed in 0u64..1000, re in -3.0f64..3.0, im in -20.0f64..20.0) {
        let k = QuadField::new(5).unwrap();
        let pi = ToyAutomorphicData::new(&k, 3, seed, SatakeMode::Generic);
        let q = k.factor_rational_prime(11).unwrap()[0];
        let f = pi.factor_at(&q).unwrap();
        let s = Complex64::new(re, im);
        let g = f.gamma_unramified(s).unwrap() * f.dual().gamma_unramified(1.0 - s).unwrap();
        prop_assert!((g - 1.0).norm() < 1e-9);
    }

    #[test]
    fn mellin_inversion_recovers_the_profile(y in 0.55f64..1.45, w in 0.4f64..1.5) {
        let bump = ArchMellinProfile::new(ProfileKind::Bump { center: 1.0, radius: 0.5 }).unwrap();
        prop_assert!((bump.inverse(y, 0.5).unwrap().re - bump.eval(y)).abs() < 1e-7);
        let lg = ArchMellinProfile::new(ProfileKind::LogGaussian { width: w }).unwrap();
        prop_assert!((lg.inverse(y, 0.3).unwrap().re - lg.eval(y)).abs() < 1e-7);
    }

    #[test]
    fn config_text_round_trips(params in prop::collection::btree_map("[a-z][a-z-]{0,8}", "[0-9a-z.+-]{1,12}", 0..6)) {
        let cfg = RunConfig { command: "probe".into(), params };
        let back: Vec<(String, String)> = parse_config_text(&cfg.to_text()).unwrap();
        let expect: Vec<(String, String)> = cfg.params.clone().into_iter().collect();
        prop_assert_eq!(back, expect);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn refining_the_tolerance_stays_within_the_bound(lm in -1.5f64..1.5, ln in -1.5f64..1.5, u in 1i128..7) {
        let k = QuadField::new(2).unwrap();
        let q = k.factor_rational_prime(7).unwrap()[0];
        let sp = SPrime::new(&k, &q).unwrap();
        let lg = ArchMellinProfile::new(ProfileKind::LogGaussian { width: 3.0 }).unwrap();
        let env = Envelope { a: 0.6, b: 0.6, constant: 20.0 };
        let spec = TestFunctionSpec { finite: FiniteComponent::Units, arch: vec![(lg, env); 2] };
        let x = SPoint { arch: (lm.exp(), ln.exp()), v: 0, u: sp.table.from_int(u) };
        let coarse = sunit_average(&sp, &spec, x, 1e-4).unwrap();
        let fine = sunit_average(&sp, &spec, x, 1e-5).unwrap();
        prop_assert!((coarse.value - fine.value).abs() <= coarse.error_bound);
    }

    #[test]
    fn unfolding_holds_at_random_points(lm in -1.0f64..1.0, ln in -1.0f64..1.0, u in 1i128..11, seed in 0u64..50) {
        let k = QuadField::new(5).unwrap();
        let q = k.factor_rational_prime(11).unwrap()[0];
        let asm = UnfoldingAssembly::new(&k, &q, seed, 0.8, 1e-6, 0.1).unwrap();
        let r = asm.check(&IdeleClassPoint { arch: (lm.exp(), ln.exp()), u: asm.sp.table.from_int(u) }, 1e-6).unwrap();
        prop_assert!(r.diff < 1e-5, "{:?}", r);
    }
}

#[test]
fn selected_primes_are_prime() {
    assert!(primes_up_to(2000).into_iter().all(is_prime));
}
