use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use thermobeam::fem::interpolate_heat;
use thermobeam::{assemble, build_generator, BcMode, DofMap, Mesh, PhysicalParams, StateVector};

fn generator(params: &PhysicalParams, n1: usize, n2: usize, bc: BcMode) -> thermobeam::Generator {
    let mesh = Mesh::new(params, n1, n2).unwrap();
    let map = DofMap::new(&mesh, bc);
    build_generator(assemble(params, &mesh, &map).unwrap(), params.gamma).unwrap()
}

#[test]
fn dissipativity_identity_for_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = [
        (PhysicalParams::default(), BcMode::Clamped),
        (PhysicalParams { gamma: -2.5, kappa: 0.1, rho2: 3.0, ..PhysicalParams::default() }, BcMode::Pinned),
        (PhysicalParams { l0: 0.2, l: 2.0, alpha1: 0.01, beta2: 7.0, ..PhysicalParams::default() }, BcMode::Clamped),
    ];
    for (p, bc) in cases {
        let gen = generator(&p, 7, 9, bc);
        for _ in 0..100 {
            let s = StateVector::random(gen.n_beam(), gen.n_heat(), &mut rng);
            let lhs = gen.inner(&gen.apply(&s).unwrap(), &s).unwrap();
            let diss = gen.dissipation(&s).unwrap();
            assert!(diss >= 0.0);
            assert!((lhs + diss).abs() <= 1e-12 * gen.energy_norm(&s).unwrap().powi(2));
        }
    }
}

#[test]
fn energy_is_half_the_metric_form() {
    let gen = generator(&PhysicalParams::default(), 6, 6, BcMode::Clamped);
    let g = gen.energy_metric();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let s = StateVector::random(gen.n_beam(), gen.n_heat(), &mut rng);
        let flat = s.to_flat();
        let direct = 0.5 * (flat.transpose() * &g * &flat)[(0, 0)];
        let e = gen.energy(&s).unwrap();
        assert!((e - direct).abs() <= 1e-13 * direct);
    }
}

#[test]
fn sine_dirichlet_energy_converges() {
    let p = PhysicalParams { l0: 1.0, l: 2.0, kappa: 1.0, ..PhysicalParams::default() };
    let target = std::f64::consts::PI.powi(2) / 2.0;
    let mut errors = Vec::new();
    for n in [8, 16, 32, 64] {
        let mesh = Mesh::new(&p, n, 4).unwrap();
        let map = DofMap::new(&mesh, BcMode::Clamped);
        let gen = build_generator(assemble(&p, &mesh, &map).unwrap(), p.gamma).unwrap();
        let mut s = gen.zero_state();
        let th = interpolate_heat(&mesh, &map, |x| Ok((std::f64::consts::PI * x).sin())).unwrap();
        s.th.copy_from_slice(&th);
        errors.push((gen.dissipation(&s).unwrap() - target).abs());
    }
    assert!(errors[3] < 2e-3, "{errors:?}");
    for w in errors.windows(2) {
        // P1 interpolation: second order in the Dirichlet energy
        assert!(w[0] / w[1] > 3.9, "{errors:?}");
    }
}

#[test]
fn solve_inverts_apply() {
    let gen = generator(&PhysicalParams { gamma: 3.0, ..PhysicalParams::default() }, 10, 6, BcMode::Pinned);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let s = StateVector::random(gen.n_beam(), gen.n_heat(), &mut rng);
        let back = gen.solve(&gen.apply(&s).unwrap()).unwrap();
        let err = gen.energy_norm(&back.axpy(-1.0, &s)).unwrap();
        assert!(err <= 1e-10 * gen.energy_norm(&s).unwrap());
    }
}

#[test]
fn decoupled_blocks_when_gamma_is_zero() {
    let gen = generator(&PhysicalParams { gamma: 0.0, ..PhysicalParams::default() }, 5, 5, BcMode::Clamped);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut s = StateVector::random(gen.n_beam(), gen.n_heat(), &mut rng);
    s.th.fill(0.0);
    let a = gen.apply(&s).unwrap();
    assert!(a.th.iter().all(|&v| v == 0.0));
    assert_eq!(a.q, s.p);
}

#[test]
fn dense_matrix_agrees_with_apply() {
    let gen = generator(&PhysicalParams::default(), 4, 3, BcMode::Clamped);
    let a = gen.dense_matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let s = StateVector::random(gen.n_beam(), gen.n_heat(), &mut rng);
    let via_dense = &a * s.to_flat();
    let via_apply = gen.apply(&s).unwrap().to_flat();
    assert!((via_dense - &via_apply).amax() <= 1e-11 * via_apply.amax());
}

#[test]
fn wrong_sized_states_are_rejected() {
    let gen = generator(&PhysicalParams::default(), 4, 4, BcMode::Clamped);
    let s = StateVector::zeros(gen.n_beam() + 1, gen.n_heat());
    assert!(gen.apply(&s).is_err());
    assert!(gen.energy(&s).is_err());
}
