//! Implicit midpoint (Crank-Nicolson) integration of the first-order system.
//!
//! The step is solved in mass-weighted form
//! `(M - dt/2 K) s+ = (M + dt/2 K) s` with `M = blockdiag(I, Mb, Mth)`, so
//! mass matrices are never inverted. On the quadratic energy the scheme
//! satisfies `E(s+) - E(s) = -dt * dissipation((s + s+) / 2)` exactly.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{interpolate_beam, interpolate_heat, DofMap, Mesh};
use crate::generator::{Generator, StateVector};
use crate::model::{InitialData, Provenance};

/// Nodal interpolation of closed-form initial data.
pub fn project_initial(data: &InitialData, mesh: &Mesh, dofmap: &DofMap) -> Result<StateVector> {
    let geo = mesh.geometry();
    let interp = |velocity: bool| {
        interpolate_beam(
            mesh,
            dofmap,
            |x| data.eval_span1(geo, velocity, x),
            |x| data.eval_span2(geo, velocity, x),
        )
    };
    let q = interp(false)?;
    let p = interp(true)?;
    let th = interpolate_heat(mesh, dofmap, |x| data.eval_theta(geo, x))?;
    Ok(StateVector {
        q: DVector::from_vec(q),
        p: DVector::from_vec(p),
        th: DVector::from_vec(th),
    })
}

/// Crank-Nicolson stepper holding the factored step matrix for one `dt`.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    gen: &'a Generator,
    dt: f64,
    lu: LU<f64, Dyn, Dyn>,
}

impl<'a> Stepper<'a> {
    /// `dt` may be negative (backward in time) but must be nonzero.
    pub fn new(gen: &'a Generator, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be finite and nonzero, got {dt}")));
        }
        let lu = step_matrix(gen, dt).lu();
        if !lu.is_invertible() {
            return Err(Error::Singular(format!("Crank-Nicolson matrix singular for dt={dt}")));
        }
        Ok(Self { gen, dt, lu })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Refactors only when the step size actually changes.
    pub fn set_dt(&mut self, dt: f64) -> Result<()> {
        if dt != self.dt {
            *self = Self::new(self.gen, dt)?;
        }
        Ok(())
    }

    pub fn step(&self, s: &StateVector) -> Result<StateVector> {
        self.gen.check_state(s)?;
        let sys = self.gen.system();
        let half = 0.5 * self.dt;
        let k = self.gen.weighted_rhs(s);
        let rhs = StateVector {
            q: &s.q + &k.q * half,
            p: &sys.mb * &s.p + &k.p * half,
            th: &sys.mth * &s.th + &k.th * half,
        };
        let x = self
            .lu
            .solve(&rhs.to_flat())
            .ok_or_else(|| Error::Singular("Crank-Nicolson solve failed".into()))?;
        let out = StateVector::from_flat(x.as_slice(), self.gen.n_beam(), self.gen.n_heat())?;
        if !out.is_finite() {
            return Err(Error::Singular("Crank-Nicolson step produced non-finite values".into()));
        }
        Ok(out)
    }
}

/// `M - dt/2 K` in `(q, p, th)` ordering.
fn step_matrix(gen: &Generator, dt: f64) -> DMatrix<f64> {
    let sys = gen.system();
    let (nb, nh) = (gen.n_beam(), gen.n_heat());
    let half = 0.5 * dt;
    let g = gen.gamma();
    let mut m = DMatrix::zeros(gen.dim(), gen.dim());
    m.view_mut((0, 0), (nb, nb)).fill_with_identity();
    m.view_mut((0, nb), (nb, nb)).fill_diagonal(-half);
    m.view_mut((nb, 0), (nb, nb)).copy_from(&(&sys.kb * half));
    m.view_mut((nb, nb), (nb, nb)).copy_from(&sys.mb);
    m.view_mut((nb, 2 * nb), (nb, nh)).copy_from(&(sys.d.transpose() * (-half * g)));
    m.view_mut((2 * nb, nb), (nh, nb)).copy_from(&(&sys.d * (half * g)));
    m.view_mut((2 * nb, 2 * nb), (nh, nh)).copy_from(&(&sys.mth + &sys.kth * half));
    m
}

/// One implicit midpoint step.
pub fn step_cn(gen: &Generator, s: &StateVector, dt: f64) -> Result<StateVector> {
    Stepper::new(gen, dt)?.step(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub dt: f64,
    pub horizon: f64,
    pub steps: usize,
    pub sample_every: usize,
    /// Largest `|dE + dt * dissipation(mid)|` over every step.
    pub max_abs_balance_residual: f64,
    /// Largest single-step energy increase (0 when monotone).
    pub max_energy_increase: f64,
    pub provenance: Option<Provenance>,
}

/// Sampled energies of a simulation.
///
/// Row `i` holds the energy at `times[i]` together with the midpoint
/// dissipation and balance residual of the step that ended there (zero for
/// the initial row).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub dissipations: Vec<f64>,
    pub residuals: Vec<f64>,
    pub meta: TraceMeta,
}

impl EnergyTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial_energy(&self) -> f64 {
        self.energies[0]
    }

    pub fn final_energy(&self) -> f64 {
        *self.energies.last().expect("trace has at least the initial sample")
    }
}

/// Runs `round(horizon / dt)` Crank-Nicolson steps from `s0`.
pub fn simulate(gen: &Generator, s0: &StateVector, dt: f64, horizon: f64, sample_every: usize) -> Result<EnergyTrace> {
    simulate_with(gen, s0, dt, horizon, sample_every, |_, _| {})
}

/// Like [`simulate`], calling `observer(step, state)` after every step.
pub fn simulate_with<F>(
    gen: &Generator,
    s0: &StateVector,
    dt: f64,
    horizon: f64,
    sample_every: usize,
    mut observer: F,
) -> Result<EnergyTrace>
where
    F: FnMut(usize, &StateVector),
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be > 0, got {horizon}")));
    }
    if sample_every == 0 {
        return Err(Error::InvalidArgument("sample_every must be >= 1".into()));
    }
    gen.check_state(s0)?;
    let steps = ((horizon / dt).round() as usize).max(1);
    let stepper = Stepper::new(gen, dt)?;

    let e0 = gen.energy(s0)?;
    let mut trace = EnergyTrace {
        times: vec![0.0],
        energies: vec![e0],
        dissipations: vec![0.0],
        residuals: vec![0.0],
        meta: TraceMeta {
            dt,
            horizon,
            steps,
            sample_every,
            max_abs_balance_residual: 0.0,
            max_energy_increase: 0.0,
            provenance: None,
        },
    };

    let mut s = s0.clone();
    let mut e = e0;
    for k in 1..=steps {
        let next = stepper.step(&s)?;
        let e_next = gen.energy(&next)?;
        let mid = s.axpy(1.0, &next).scale(0.5);
        let diss = gen.dissipation(&mid)?;
        let resid = (e_next - e) + dt * diss;
        trace.meta.max_abs_balance_residual = trace.meta.max_abs_balance_residual.max(resid.abs());
        trace.meta.max_energy_increase = trace.meta.max_energy_increase.max(e_next - e);
        if k % sample_every == 0 || k == steps {
            trace.times.push(k as f64 * dt);
            trace.energies.push(e_next);
            trace.dissipations.push(diss);
            trace.residuals.push(resid);
        }
        observer(k, &next);
        s = next;
        e = e_next;
    }
    Ok(trace)
}
