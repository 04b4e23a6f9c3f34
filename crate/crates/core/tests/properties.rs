use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use thermobeam::analysis::{fit_decay_exponent, least_squares_line};
use thermobeam::io::{fmt_num, RunConfig};
use thermobeam::{
    assemble, build_generator, classify_regime, rayleigh_dispersion, step_cn, BcMode, DofMap, EnergyTrace, Mesh,
    PhysicalParams, RegimeTag, StateVector,
};

fn params_strategy() -> impl Strategy<Value = PhysicalParams> {
    (
        (0.2f64..5.0, 0.2f64..5.0, 0.0f64..3.0, 0.0f64..3.0),
        (0.2f64..5.0, 0.2f64..5.0, 0.2f64..5.0, 0.05f64..3.0),
        (-3.0f64..3.0, 0.1f64..0.9, 0.5f64..2.0),
    )
        .prop_map(|((rho1, rho2, alpha1, alpha2), (beta1, beta2, rho0, kappa), (gamma, frac, l))| PhysicalParams {
            rho1,
            rho2,
            alpha1: alpha1 + 0.01,
            alpha2: alpha2 + 0.01,
            beta1,
            beta2,
            rho0,
            kappa,
            gamma,
            l0: frac * l,
            l,
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn dissipation_identity_holds(p in params_strategy(), n1 in 2usize..7, n2 in 2usize..7, seed in any::<u64>(), pinned in any::<bool>()) {
        let mesh = Mesh::new(&p, n1, n2).unwrap();
        let bc = if pinned { BcMode::Pinned } else { BcMode::Clamped };
        let map = DofMap::new(&mesh, bc);
        let gen = build_generator(assemble(&p, &mesh, &map).unwrap(), p.gamma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = StateVector::random(gen.n_beam(), gen.n_heat(), &mut rng);
        let lhs = gen.inner(&gen.apply(&s).unwrap(), &s).unwrap() + gen.dissipation(&s).unwrap();
        prop_assert!(lhs.abs() <= 1e-11 * gen.energy_norm(&s).unwrap().powi(2));
    }

    #[test]
    fn cn_step_never_gains_energy(p in params_strategy(), dt in 1e-4f64..0.5, seed in any::<u64>()) {
        let mesh = Mesh::new(&p, 4, 4).unwrap();
        let map = DofMap::new(&mesh, BcMode::Clamped);
        let gen = build_generator(assemble(&p, &mesh, &map).unwrap(), p.gamma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = StateVector::random(gen.n_beam(), gen.n_heat(), &mut rng);
        let e0 = gen.energy(&s).unwrap();
        let next = step_cn(&gen, &s, dt).unwrap();
        prop_assert!(gen.energy(&next).unwrap() <= e0 * (1.0 + 1e-11));
    }

    #[test]
    fn regime_follows_the_inequalities(p in params_strategy()) {
        let r = classify_regime(&p);
        let fast = p.rho1 >= p.rho2 && p.alpha1 >= p.alpha2;
        prop_assert_eq!(r.tag == RegimeTag::Fast, fast);
        prop_assert_eq!(r.ell, if fast { 1 } else { 2 });
    }

    #[test]
    fn dispersion_increases_with_mode(rho in 0.1f64..10.0, alpha in 0.0f64..10.0, beta in 0.1f64..10.0, span in 0.1f64..10.0, n in 1u32..40) {
        let a = rayleigh_dispersion(rho, alpha, beta, span, n).unwrap();
        let b = rayleigh_dispersion(rho, alpha, beta, span, n + 1).unwrap();
        prop_assert!(b > a);
    }

    #[test]
    fn decay_fit_is_scale_invariant(c in 1e-6f64..1e6, p in 0.2f64..3.0) {
        let times: Vec<f64> = (1..=400).map(|i| i as f64 * 0.1).collect();
        let e: Vec<f64> = times.iter().map(|t| t.powf(-p) * (1.0 + 0.1 * (t * 3.0).sin())).collect();
        let scaled: Vec<f64> = e.iter().map(|v| v * c).collect();
        let a = fit_decay_exponent(&EnergyTrace::from_samples(times.clone(), e).unwrap(), (10.0, 40.0)).unwrap();
        let b = fit_decay_exponent(&EnergyTrace::from_samples(times, scaled).unwrap(), (10.0, 40.0)).unwrap();
        prop_assert!((a.alpha - b.alpha).abs() <= 1e-9);
    }

    #[test]
    fn exact_lines_are_recovered(slope in -5.0f64..5.0, icpt in -5.0f64..5.0) {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| slope * x + icpt).collect();
        let line = least_squares_line(&xs, &ys).unwrap();
        prop_assert!((line.slope - slope).abs() <= 1e-12 * slope.abs().max(1.0));
    }

    #[test]
    fn numbers_round_trip_through_text(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let text = fmt_num(v);
        prop_assert_eq!(text.parse::<f64>().unwrap(), v);
    }

    #[test]
    fn configs_round_trip(p in params_strategy(), n1 in 2usize..40, n2 in 2usize..40, dt in 1e-5f64..1.0) {
        let mut cfg = RunConfig::default();
        cfg.params = p;
        cfg.mesh.n1 = n1;
        cfg.mesh.n2 = n2;
        cfg.time.dt = dt;
        let back = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash(), cfg.hash());
    }
}
