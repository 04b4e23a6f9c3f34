use nalgebra::DVector;

use thermobeam::fem::{gauss_legendre, hermite_shapes, interpolate_beam, interpolate_heat};
use thermobeam::{assemble, BcMode, DofMap, Mesh, PhysicalParams};

fn params() -> PhysicalParams {
    PhysicalParams {
        rho1: 1.4,
        rho2: 0.6,
        alpha1: 0.3,
        alpha2: 0.9,
        beta1: 2.2,
        beta2: 0.8,
        rho0: 1.3,
        kappa: 0.7,
        gamma: 0.5,
        l0: 0.7,
        l: 1.6,
    }
}

/// 20-point Gauss integral of `f` over `[a, b]`.
fn quad<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let (x, w) = gauss_legendre(20);
    x.iter().zip(&w).map(|(x, w)| w * f(a + (b - a) * x)).sum::<f64>() * (b - a)
}

#[test]
fn linear_field_is_reproduced_on_an_element() {
    let h = 0.37;
    let (xl, xr) = (1.1, 1.1 + h);
    for xi in [0.0, 0.13, 0.5, 0.91, 1.0] {
        let n = hermite_shapes(xi, h).unwrap();
        let c = [xl, 1.0, xr, 1.0];
        let v: f64 = (0..4).map(|a| c[a] * n[a][0]).sum();
        let dv: f64 = (0..4).map(|a| c[a] * n[a][1]).sum();
        assert!((v - (xl + xi * h)).abs() < 1e-14);
        assert!((dv - 1.0).abs() < 1e-13);
    }
}

/// Quadratic forms of an exactly representable piecewise-cubic field must
/// match closed integrals of that field.
#[test]
fn quadratic_forms_match_continuum_energies_for_cubics() {
    let p = params();
    let mesh = Mesh::new(&p, 5, 7).unwrap();
    let map = DofMap::new(&mesh, BcMode::Pinned);
    let w = |x: f64| x * (p.l - x) * (x + 1.0);
    let dw = |x: f64| -3.0 * x * x + 2.0 * (p.l - 1.0) * x + p.l;
    let ddw = |x: f64| -6.0 * x + 2.0 * (p.l - 1.0);
    let q = interpolate_beam(&mesh, &map, |x| Ok((w(x), dw(x))), |x| Ok((w(x), dw(x)))).unwrap();
    let q = DVector::from_vec(q);
    let sys = assemble(&p, &mesh, &map).unwrap();

    let bend = p.beta1 * quad(|x| ddw(x).powi(2), 0.0, p.l0) + p.beta2 * quad(|x| ddw(x).powi(2), p.l0, p.l);
    let kin = quad(|x| p.rho1 * w(x).powi(2) + p.alpha1 * dw(x).powi(2), 0.0, p.l0)
        + quad(|x| p.rho2 * w(x).powi(2) + p.alpha2 * dw(x).powi(2), p.l0, p.l);
    let kq = (q.transpose() * &sys.kb * &q)[(0, 0)];
    let mq = (q.transpose() * &sys.mb * &q)[(0, 0)];
    assert!((kq - bend).abs() <= 1e-12 * bend, "{kq} vs {bend}");
    assert!((mq - kin).abs() <= 1e-12 * kin, "{mq} vs {kin}");

    // D couples heat gradients with the beam slope on span 1
    let th = |x: f64| x * (p.l0 - x);
    let t = DVector::from_vec(interpolate_heat(&mesh, &map, |x| Ok(th(x))).unwrap());
    let coupling = (t.transpose() * &sys.d * &q)[(0, 0)];
    // theta is quadratic, so compare with the integral of its P1 interpolant
    let nodes = mesh.nodes();
    let mut exact = 0.0;
    for k in 0..mesh.n1 {
        let (a, b) = (nodes[k], nodes[k + 1]);
        let slope = (th(b) - th(a)) / (b - a);
        exact += quad(|x| slope * dw(x), a, b);
    }
    assert!((coupling - exact).abs() <= 1e-12 * exact.abs().max(1.0), "{coupling} vs {exact}");
}

#[test]
fn heat_matrices_match_p1_integrals() {
    let p = params();
    let mesh = Mesh::new(&p, 6, 3).unwrap();
    let map = DofMap::new(&mesh, BcMode::Clamped);
    let sys = assemble(&p, &mesh, &map).unwrap();
    let h = p.l0 / 6.0;
    for i in 0..map.n_heat() {
        assert!((sys.mth[(i, i)] - p.rho0 * 2.0 * h / 3.0).abs() < 1e-14);
        assert!((sys.kth[(i, i)] - p.kappa * 2.0 / h).abs() < 1e-12);
        if i + 1 < map.n_heat() {
            assert!((sys.mth[(i, i + 1)] - p.rho0 * h / 6.0).abs() < 1e-14);
            assert!((sys.kth[(i, i + 1)] + p.kappa / h).abs() < 1e-12);
        }
    }
}

#[test]
fn rigid_translation_mass_per_span() {
    let p = params();
    let mesh = Mesh::new(&p, 4, 4).unwrap();
    // pinned ends drop the end values, so "all free values 1" is a rigid
    // translation except on the two end elements
    let map = DofMap::new(&mesh, BcMode::Pinned);
    let sys = assemble(&p, &mesh, &map).unwrap();
    let mut one = DVector::zeros(map.n_beam());
    for node in 0..mesh.n_nodes() {
        if let Some(i) = map.beam_dof(node, false) {
            one[i] = 1.0;
        }
    }
    let total = (one.transpose() * &sys.mb * &one)[(0, 0)];
    // end element field is 3t^2 - 2t^3
    let (h1, h2) = mesh.steps();
    let end_el = |rho: f64, alpha: f64, h: f64| rho * h * 13.0 / 35.0 + alpha * 6.0 / (5.0 * h);
    let exact = p.rho1 * (p.l0 - h1) + p.rho2 * (p.l - p.l0 - h2) + end_el(p.rho1, p.alpha1, h1) + end_el(p.rho2, p.alpha2, h2);
    assert!((total - exact).abs() < 1e-12 * exact, "{total} vs {exact}");
}

#[test]
fn interface_is_one_shared_pair_of_dofs() {
    let p = params();
    let mesh = Mesh::new(&p, 3, 5).unwrap();
    for bc in [BcMode::Clamped, BcMode::Pinned] {
        let map = DofMap::new(&mesh, bc);
        let (v, s) = map.interface_dofs();
        assert_eq!(map.beam_dof(3, false), Some(v));
        assert_eq!(map.beam_dof(3, true), Some(s));
        let sys = assemble(&p, &mesh, &map).unwrap();
        // both spans contribute to the interface diagonal
        let (h1, h2) = mesh.steps();
        let k_expect = 12.0 * p.beta1 / h1.powi(3) + 12.0 * p.beta2 / h2.powi(3);
        assert!((sys.kb[(v, v)] - k_expect).abs() < 1e-10 * k_expect);
    }
}

#[test]
fn bad_meshes_are_rejected() {
    let p = params();
    assert!(Mesh::new(&p, 1, 4).is_err());
    assert!(Mesh::new(&p, 4, 0).is_err());
    assert!(Mesh::from_lengths(1.0, 1.0, 4, 4).is_err());
}
