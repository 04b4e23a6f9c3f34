//! First-order form of the semi-discrete system.
//!
//! The state is `(q, p, th)`: beam displacement coefficients, beam velocity
//! coefficients and temperature coefficients. The generator acts as
//!
//! ```text
//! q'  = p
//! Mb p'  = -Kb q + g D^T th
//! Mth th' = -Kth th - g D p
//! ```
//!
//! and the energy inner product is `blockdiag(Kb, Mb, Mth)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::error::{Error, Result};
use crate::fem::SystemMatrices;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
    pub th: DVector<f64>,
}

impl StateVector {
    pub fn zeros(n_beam: usize, n_heat: usize) -> Self {
        Self {
            q: DVector::zeros(n_beam),
            p: DVector::zeros(n_beam),
            th: DVector::zeros(n_heat),
        }
    }

    /// Entries uniform in `[-1, 1)`.
    pub fn random<R: Rng + ?Sized>(n_beam: usize, n_heat: usize, rng: &mut R) -> Self {
        let mut draw = |n| DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        Self {
            q: draw(n_beam),
            p: draw(n_beam),
            th: draw(n_heat),
        }
    }

    /// Splits a flat `[q, p, th]` vector.
    pub fn from_flat(flat: &[f64], n_beam: usize, n_heat: usize) -> Result<Self> {
        let expected = 2 * n_beam + n_heat;
        if flat.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: flat.len(),
            });
        }
        Ok(Self {
            q: DVector::from_column_slice(&flat[..n_beam]),
            p: DVector::from_column_slice(&flat[n_beam..2 * n_beam]),
            th: DVector::from_column_slice(&flat[2 * n_beam..]),
        })
    }

    pub fn to_flat(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.q.iter().chain(self.p.iter()).chain(self.th.iter()).copied(),
        )
    }

    pub fn len(&self) -> usize {
        self.q.len() + self.p.len() + self.th.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.p.iter()).chain(self.th.iter()).all(|v| v.is_finite())
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &StateVector) -> StateVector {
        StateVector {
            q: &self.q + &other.q * a,
            p: &self.p + &other.p * a,
            th: &self.th + &other.th * a,
        }
    }

    pub fn scale(&self, a: f64) -> StateVector {
        StateVector {
            q: &self.q * a,
            p: &self.p * a,
            th: &self.th * a,
        }
    }
}

/// The discrete evolution operator with cached factorizations.
#[derive(Debug, Clone)]
pub struct Generator {
    system: SystemMatrices,
    gamma: f64,
    mb_chol: Cholesky<f64, Dyn>,
    mth_chol: Cholesky<f64, Dyn>,
    kb_chol: Cholesky<f64, Dyn>,
    kth_chol: Cholesky<f64, Dyn>,
}

fn factor(m: &DMatrix<f64>, name: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| Error::Factorization(format!("{name} is not symmetric positive definite")))
}

pub fn build_generator(system: SystemMatrices, gamma: f64) -> Result<Generator> {
    Generator::new(system, gamma)
}

impl Generator {
    pub fn new(system: SystemMatrices, gamma: f64) -> Result<Self> {
        system.validate()?;
        if !gamma.is_finite() {
            return Err(Error::InvalidArgument("gamma must be finite".into()));
        }
        Ok(Self {
            mb_chol: factor(&system.mb, "beam mass matrix")?,
            mth_chol: factor(&system.mth, "heat mass matrix")?,
            kb_chol: factor(&system.kb, "beam stiffness matrix")?,
            kth_chol: factor(&system.kth, "heat conductivity matrix")?,
            system,
            gamma,
        })
    }

    pub fn system(&self) -> &SystemMatrices {
        &self.system
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_beam(&self) -> usize {
        self.system.n_beam()
    }

    pub fn n_heat(&self) -> usize {
        self.system.n_heat()
    }

    pub fn dim(&self) -> usize {
        self.system.state_dim()
    }

    pub fn zero_state(&self) -> StateVector {
        StateVector::zeros(self.n_beam(), self.n_heat())
    }

    pub fn check_state(&self, s: &StateVector) -> Result<()> {
        let (nb, nh) = (self.n_beam(), self.n_heat());
        for (got, expected) in [(s.q.len(), nb), (s.p.len(), nb), (s.th.len(), nh)] {
            if got != expected {
                return Err(Error::DimensionMismatch { expected, got });
            }
        }
        Ok(())
    }

    /// Right-hand side of the mass-weighted form: `(p, -Kb q + g D^T th, -Kth th - g D p)`.
    pub(crate) fn weighted_rhs(&self, s: &StateVector) -> StateVector {
        let sys = &self.system;
        StateVector {
            q: s.p.clone(),
            p: -(&sys.kb * &s.q) + sys.d.tr_mul(&s.th) * self.gamma,
            th: -(&sys.kth * &s.th) - (&sys.d * &s.p) * self.gamma,
        }
    }

    pub fn apply(&self, s: &StateVector) -> Result<StateVector> {
        self.check_state(s)?;
        let mut out = self.weighted_rhs(s);
        self.mb_chol.solve_mut(&mut out.p);
        self.mth_chol.solve_mut(&mut out.th);
        Ok(out)
    }

    /// Solves `A s = f`.
    pub fn solve(&self, f: &StateVector) -> Result<StateVector> {
        self.check_state(f)?;
        let sys = &self.system;
        let p = f.q.clone();
        // Kth th = -Mth f_th - g D p
        let mut th = -(&sys.mth * &f.th) - (&sys.d * &p) * self.gamma;
        self.kth_chol.solve_mut(&mut th);
        // Kb q = g D^T th - Mb f_p
        let mut q = sys.d.tr_mul(&th) * self.gamma - &sys.mb * &f.p;
        self.kb_chol.solve_mut(&mut q);
        Ok(StateVector { q, p, th })
    }

    /// Energy inner product `a^T blockdiag(Kb, Mb, Mth) b`.
    pub fn inner(&self, a: &StateVector, b: &StateVector) -> Result<f64> {
        self.check_state(a)?;
        self.check_state(b)?;
        let sys = &self.system;
        Ok(a.q.dot(&(&sys.kb * &b.q)) + a.p.dot(&(&sys.mb * &b.p)) + a.th.dot(&(&sys.mth * &b.th)))
    }

    pub fn energy_norm(&self, s: &StateVector) -> Result<f64> {
        Ok(self.inner(s, s)?.max(0.0).sqrt())
    }

    /// Discrete energy `(q^T Kb q + p^T Mb p + th^T Mth th) / 2`.
    pub fn energy(&self, s: &StateVector) -> Result<f64> {
        Ok(0.5 * self.inner(s, s)?)
    }

    /// `th^T Kth th`, the discrete `kappa * int |theta_x|^2`.
    pub fn dissipation(&self, s: &StateVector) -> Result<f64> {
        self.check_state(s)?;
        Ok(s.th.dot(&(&self.system.kth * &s.th)))
    }

    /// Dense `blockdiag(Kb, Mb, Mth)`.
    pub fn energy_metric(&self) -> DMatrix<f64> {
        let (nb, nh) = (self.n_beam(), self.n_heat());
        let mut g = DMatrix::zeros(self.dim(), self.dim());
        g.view_mut((0, 0), (nb, nb)).copy_from(&self.system.kb);
        g.view_mut((nb, nb), (nb, nb)).copy_from(&self.system.mb);
        g.view_mut((2 * nb, 2 * nb), (nh, nh)).copy_from(&self.system.mth);
        g
    }

    /// Dense matrix of the generator in `(q, p, th)` ordering.
    pub fn dense_matrix(&self) -> DMatrix<f64> {
        let (nb, nh) = (self.n_beam(), self.n_heat());
        let sys = &self.system;
        let mut a = DMatrix::zeros(self.dim(), self.dim());
        a.view_mut((0, nb), (nb, nb)).fill_with_identity();

        let mut pq = -&sys.kb;
        self.mb_chol.solve_mut(&mut pq);
        a.view_mut((nb, 0), (nb, nb)).copy_from(&pq);
        let mut pth = sys.d.transpose() * self.gamma;
        self.mb_chol.solve_mut(&mut pth);
        a.view_mut((nb, 2 * nb), (nb, nh)).copy_from(&pth);

        let mut thp = &sys.d * (-self.gamma);
        self.mth_chol.solve_mut(&mut thp);
        a.view_mut((2 * nb, nb), (nh, nb)).copy_from(&thp);
        let mut thth = -&sys.kth;
        self.mth_chol.solve_mut(&mut thth);
        a.view_mut((2 * nb, 2 * nb), (nh, nh)).copy_from(&thth);
        a
    }

    /// Same matrices with a different coupling constant.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::InvalidArgument("gamma must be finite".into()));
        }
        Ok(Self {
            gamma,
            ..self.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, BcMode, DofMap, Mesh};
    use crate::model::PhysicalParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn generator(gamma: f64, n1: usize, n2: usize) -> Generator {
        let params = PhysicalParams {
            gamma,
            rho2: 1.5,
            alpha1: 0.8,
            ..PhysicalParams::default()
        };
        let mesh = Mesh::new(&params, n1, n2).unwrap();
        let map = DofMap::new(&mesh, BcMode::Clamped);
        build_generator(assemble(&params, &mesh, &map).unwrap(), gamma).unwrap()
    }

    #[test]
    fn zero_maps_to_zero() {
        let g = generator(1.0, 3, 3);
        let out = g.apply(&g.zero_state()).unwrap();
        assert_eq!(out, g.zero_state());
    }

    #[test]
    fn decoupled_heat_ignores_beam() {
        let g = generator(0.0, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = StateVector::random(g.n_beam(), g.n_heat(), &mut rng);
        s.th.fill(0.0);
        let out = g.apply(&s).unwrap();
        assert_eq!(out.th.amax(), 0.0);
    }

    #[test]
    fn displacement_only_state() {
        let g = generator(0.7, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = StateVector::random(g.n_beam(), g.n_heat(), &mut rng);
        s.p.fill(0.0);
        s.th.fill(0.0);
        let out = g.apply(&s).unwrap();
        let expected = g.system().mb.clone().lu().solve(&(-&g.system().kb * &s.q)).unwrap();
        assert_eq!(out.q.amax(), 0.0);
        assert!((&out.p - &expected).amax() < 1e-10 * expected.amax());
        assert_eq!(out.th.amax(), 0.0);
    }

    #[test]
    fn dense_matrix_matches_apply() {
        let g = generator(1.3, 3, 4);
        let a = g.dense_matrix();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = StateVector::random(g.n_beam(), g.n_heat(), &mut rng);
        let lhs = &a * s.to_flat();
        let rhs = g.apply(&s).unwrap().to_flat();
        assert!((&lhs - &rhs).amax() <= 1e-10 * rhs.amax());
    }

    #[test]
    fn energy_is_half_metric_norm() {
        let g = generator(1.0, 4, 4);
        let metric = g.energy_metric();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let s = StateVector::random(g.n_beam(), g.n_heat(), &mut rng);
            let x = s.to_flat();
            let e = g.energy(&s).unwrap();
            let direct = 0.5 * x.dot(&(&metric * &x));
            assert!((e - direct).abs() <= 1e-13 * e);
        }
        assert_eq!(g.energy(&g.zero_state()).unwrap(), 0.0);
    }

    #[test]
    fn pure_temperature_energy() {
        let g = generator(1.0, 5, 3);
        let mut s = g.zero_state();
        s.th.fill(1.0);
        let mass_sum = g.system().mth.sum();
        assert!((g.energy(&s).unwrap() - 0.5 * mass_sum).abs() < 1e-15);
    }

    #[test]
    fn gamma_sign_flips_coupling_only() {
        let g = generator(0.9, 3, 3);
        let gm = g.with_gamma(-0.9).unwrap();
        let g0 = g.with_gamma(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = StateVector::random(g.n_beam(), g.n_heat(), &mut rng);
        let (a, b, c) = (g.apply(&s).unwrap(), gm.apply(&s).unwrap(), g0.apply(&s).unwrap());
        // coupling part of (+g) is the negative of the coupling part of (-g)
        let plus = a.axpy(-1.0, &c).to_flat();
        let minus = b.axpy(-1.0, &c).to_flat();
        assert!((&plus + &minus).amax() < 1e-12 * plus.amax().max(1.0));
        assert_eq!(a.q, b.q);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let g = generator(1.0, 3, 3);
        let bad = StateVector::zeros(g.n_beam() + 1, g.n_heat());
        assert!(matches!(g.energy(&bad), Err(Error::DimensionMismatch { .. })));
        assert!(g.dissipation(&bad).is_err());
        assert!(g.apply(&bad).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = StateVector::random(5, 2, &mut rng);
        let back = StateVector::from_flat(s.to_flat().as_slice(), 5, 2).unwrap();
        assert_eq!(s, back);
        assert!(StateVector::from_flat(&[0.0; 3], 5, 2).is_err());
    }
}
