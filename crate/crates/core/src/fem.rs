//! Finite element discretization of the variational form.
//!
//! Beam displacements on both spans use C1 cubic Hermite elements with
//! (value, slope) degrees of freedom at every node. The node at `L0` is shared
//! by both spans, so continuity of displacement and slope across the
//! interface holds by construction; the moment and shear balances at `L0`
//! are natural and never appear in the assembled matrices.
//!
//! Temperature lives on span 1 only, discretized with continuous
//! piecewise-linear elements on the span-1 partition; the Dirichlet values at
//! `0` and `L0` are eliminated.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Geometry, PhysicalParams};

/// Number of Gauss points used by [`assemble`]. Exact for every integrand in
/// the system (degree at most 6 for the Hermite mass term).
pub const DEFAULT_GAUSS_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BcMode {
    /// Displacement and slope vanish at both outer ends.
    #[default]
    Clamped,
    /// Only the displacement vanishes at the outer ends.
    Pinned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Span {
    Thermoelastic,
    Elastic,
}

/// Uniform partition of each span; node `n1` sits exactly at `L0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub n1: usize,
    pub n2: usize,
    pub l0: f64,
    pub l: f64,
    nodes: Vec<f64>,
}

impl Mesh {
    pub fn new(params: &PhysicalParams, n1: usize, n2: usize) -> Result<Self> {
        Self::from_lengths(params.l0, params.l, n1, n2)
    }

    pub fn from_lengths(l0: f64, l: f64, n1: usize, n2: usize) -> Result<Self> {
        if n1 < 2 || n2 < 2 {
            return Err(Error::InvalidMesh(format!(
                "need at least 2 elements per span (n1={n1}, n2={n2})"
            )));
        }
        if !(0.0 < l0 && l0 < l) {
            return Err(Error::InvalidMesh(format!("require 0 < L0 < L (L0={l0}, L={l})")));
        }
        let h1 = l0 / n1 as f64;
        let h2 = (l - l0) / n2 as f64;
        let nodes = (0..=n1)
            .map(|i| if i == n1 { l0 } else { i as f64 * h1 })
            .chain((1..=n2).map(|j| if j == n2 { l } else { l0 + j as f64 * h2 }))
            .collect();
        Ok(Self { n1, n2, l0, l, nodes })
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            l0: self.l0,
            l: self.l,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.n1 + self.n2
    }

    /// Span-1 step and span-2 step.
    pub fn steps(&self) -> (f64, f64) {
        (self.l0 / self.n1 as f64, (self.l - self.l0) / self.n2 as f64)
    }

    /// Left node coordinate, length and span of element `e`.
    pub fn element(&self, e: usize) -> (f64, f64, Span) {
        let span = if e < self.n1 {
            Span::Thermoelastic
        } else {
            Span::Elastic
        };
        (self.nodes[e], self.nodes[e + 1] - self.nodes[e], span)
    }
}

/// Global numbering of the free beam and heat unknowns.
///
/// Node `k` owns raw beam slots `2k` (value) and `2k + 1` (slope). Raw slots
/// removed by the end conditions map to `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub bc_mode: BcMode,
    raw_to_free: Vec<Option<usize>>,
    removed: Vec<usize>,
    n_beam: usize,
    n_heat: usize,
    interface_node: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh, bc_mode: BcMode) -> Self {
        let n_nodes = mesh.n_nodes();
        let last = n_nodes - 1;
        let removed: Vec<usize> = match bc_mode {
            BcMode::Clamped => vec![0, 1, 2 * last, 2 * last + 1],
            BcMode::Pinned => vec![0, 2 * last],
        };
        let mut raw_to_free = vec![None; 2 * n_nodes];
        let mut next = 0;
        for (raw, slot) in raw_to_free.iter_mut().enumerate() {
            if !removed.contains(&raw) {
                *slot = Some(next);
                next += 1;
            }
        }
        Self {
            bc_mode,
            raw_to_free,
            removed,
            n_beam: next,
            n_heat: mesh.n1 - 1,
            interface_node: mesh.n1,
        }
    }

    pub fn n_beam(&self) -> usize {
        self.n_beam
    }

    pub fn n_heat(&self) -> usize {
        self.n_heat
    }

    /// Dimension of the first-order state `(q, p, th)`.
    pub fn state_dim(&self) -> usize {
        2 * self.n_beam + self.n_heat
    }

    /// Raw slots eliminated by the end conditions.
    pub fn removed(&self) -> &[usize] {
        &self.removed
    }

    /// Free index of node `node`'s value (`slope = false`) or slope DOF.
    pub fn beam_dof(&self, node: usize, slope: bool) -> Option<usize> {
        self.raw_to_free
            .get(2 * node + slope as usize)
            .copied()
            .flatten()
    }

    /// The (value, slope) pair shared by both spans at `L0`.
    pub fn interface_dofs(&self) -> (usize, usize) {
        (
            self.beam_dof(self.interface_node, false)
                .expect("interface value is never constrained"),
            self.beam_dof(self.interface_node, true)
                .expect("interface slope is never constrained"),
        )
    }

    /// Heat index of node `node` (interior span-1 nodes only).
    pub fn heat_dof(&self, node: usize) -> Option<usize> {
        (node >= 1 && node <= self.n_heat).then(|| node - 1)
    }

    /// Free indices of the four Hermite DOFs of element `e`.
    pub fn element_beam_dofs(&self, e: usize) -> [Option<usize>; 4] {
        [
            self.beam_dof(e, false),
            self.beam_dof(e, true),
            self.beam_dof(e + 1, false),
            self.beam_dof(e + 1, true),
        ]
    }

    /// Rebuilds `(w, w_x, w_xx)` of the beam field at `x` from free
    /// coefficients. At `L0` the `span` argument selects the side.
    pub fn eval_beam(&self, mesh: &Mesh, coeffs: &[f64], x: f64, span: Span) -> Result<[f64; 3]> {
        if coeffs.len() != self.n_beam {
            return Err(Error::DimensionMismatch {
                expected: self.n_beam,
                got: coeffs.len(),
            });
        }
        let e = locate_element(mesh, x, span)?;
        let (xl, h, _) = mesh.element(e);
        let xi = ((x - xl) / h).clamp(0.0, 1.0);
        let shapes = hermite_shapes(xi, h)?;
        let mut out = [0.0; 3];
        for (dof, shape) in self.element_beam_dofs(e).iter().zip(shapes.iter()) {
            if let Some(i) = dof {
                for k in 0..3 {
                    out[k] += coeffs[*i] * shape[k];
                }
            }
        }
        Ok(out)
    }

    /// `(theta, theta_x)` of the heat field at `x` in `[0, L0]`.
    pub fn eval_heat(&self, mesh: &Mesh, coeffs: &[f64], x: f64) -> Result<[f64; 2]> {
        if coeffs.len() != self.n_heat {
            return Err(Error::DimensionMismatch {
                expected: self.n_heat,
                got: coeffs.len(),
            });
        }
        let e = locate_element(mesh, x, Span::Thermoelastic)?;
        let (xl, h, _) = mesh.element(e);
        let xi = ((x - xl) / h).clamp(0.0, 1.0);
        let nodal = |n: usize| self.heat_dof(n).map_or(0.0, |i| coeffs[i]);
        let (a, b) = (nodal(e), nodal(e + 1));
        Ok([a * (1.0 - xi) + b * xi, (b - a) / h])
    }
}

fn locate_element(mesh: &Mesh, x: f64, span: Span) -> Result<usize> {
    let (h1, h2) = mesh.steps();
    let e = match span {
        Span::Thermoelastic => {
            if !(0.0..=mesh.l0).contains(&x) {
                return Err(Error::InvalidArgument(format!("x={x} outside [0, L0]")));
            }
            ((x / h1).floor() as usize).min(mesh.n1 - 1)
        }
        Span::Elastic => {
            if !(mesh.l0..=mesh.l).contains(&x) {
                return Err(Error::InvalidArgument(format!("x={x} outside [L0, L]")));
            }
            mesh.n1 + (((x - mesh.l0) / h2).floor() as usize).min(mesh.n2 - 1)
        }
    };
    Ok(e)
}

/// Cubic Hermite basis on an element of length `h` at local coordinate `xi`.
///
/// Returns `[value, d/dx, d2/dx2]` for the four functions attached to
/// (left value, left slope, right value, right slope).
pub fn hermite_shapes(xi: f64, h: f64) -> Result<[[f64; 3]; 4]> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::InvalidArgument(format!("local coordinate {xi} outside [0, 1]")));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("element length {h} must be > 0")));
    }
    let (x2, x3) = (xi * xi, xi * xi * xi);
    let ih = 1.0 / h;
    let ih2 = ih * ih;
    Ok([
        [1.0 - 3.0 * x2 + 2.0 * x3, (-6.0 * xi + 6.0 * x2) * ih, (-6.0 + 12.0 * xi) * ih2],
        [h * (xi - 2.0 * x2 + x3), 1.0 - 4.0 * xi + 3.0 * x2, (-4.0 + 6.0 * xi) * ih],
        [3.0 * x2 - 2.0 * x3, (6.0 * xi - 6.0 * x2) * ih, (6.0 - 12.0 * xi) * ih2],
        [h * (-x2 + x3), -2.0 * xi + 3.0 * x2, (-2.0 + 6.0 * xi) * ih],
    ])
}

/// Gauss-Legendre rule with `n` points mapped to `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one Gauss point");
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-like initial guess, then Newton on P_n
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * z * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        points[i] = 0.5 * (1.0 - z);
        points[n - 1 - i] = 0.5 * (1.0 + z);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (points, weights)
}

/// Dense matrices of the semi-discrete system
/// `Mb q'' + Kb q - g D^T th = 0`, `Mth th' + Kth th + g D q' = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    /// `rho int phi phi + alpha int phi' phi'`, both spans.
    pub mb: DMatrix<f64>,
    /// `beta int phi'' phi''`, both spans.
    pub kb: DMatrix<f64>,
    /// `rho0 int psi psi` on span 1.
    pub mth: DMatrix<f64>,
    /// `kappa int psi' psi'` on span 1.
    pub kth: DMatrix<f64>,
    /// `D[j, i] = int_0^L0 psi_j' phi_i'` (heat rows, beam columns).
    pub d: DMatrix<f64>,
}

impl SystemMatrices {
    pub fn n_beam(&self) -> usize {
        self.mb.nrows()
    }

    pub fn n_heat(&self) -> usize {
        self.mth.nrows()
    }

    pub fn state_dim(&self) -> usize {
        2 * self.n_beam() + self.n_heat()
    }

    fn check_shapes(&self) -> Result<()> {
        let (nb, nh) = (self.n_beam(), self.n_heat());
        let ok = self.mb.is_square()
            && self.kb.shape() == (nb, nb)
            && self.mth.is_square()
            && self.kth.shape() == (nh, nh)
            && self.d.shape() == (nh, nb);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "inconsistent system matrix shapes: Mb {:?}, Kb {:?}, Mth {:?}, Kth {:?}, D {:?}",
                self.mb.shape(),
                self.kb.shape(),
                self.mth.shape(),
                self.kth.shape(),
                self.d.shape()
            )))
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.check_shapes()
    }
}

pub fn assemble(params: &PhysicalParams, mesh: &Mesh, dofmap: &DofMap) -> Result<SystemMatrices> {
    assemble_with(params, mesh, dofmap, DEFAULT_GAUSS_POINTS)
}

/// Assembly with an explicit number of Gauss points per element.
pub fn assemble_with(
    params: &PhysicalParams,
    mesh: &Mesh,
    dofmap: &DofMap,
    gauss_points: usize,
) -> Result<SystemMatrices> {
    params.check()?;
    if dofmap.n_heat() != mesh.n1 - 1 || dofmap.raw_to_free.len() != 2 * mesh.n_nodes() {
        return Err(Error::InvalidArgument(format!(
            "DOF map ({} beam, {} heat) does not fit mesh ({} nodes, n1={})",
            dofmap.n_beam(),
            dofmap.n_heat(),
            mesh.n_nodes(),
            mesh.n1
        )));
    }
    if gauss_points == 0 {
        return Err(Error::InvalidArgument("need at least one Gauss point".into()));
    }
    let (nb, nh) = (dofmap.n_beam(), dofmap.n_heat());
    let mut mb = DMatrix::zeros(nb, nb);
    let mut kb = DMatrix::zeros(nb, nb);
    let mut mth = DMatrix::zeros(nh, nh);
    let mut kth = DMatrix::zeros(nh, nh);
    let mut d = DMatrix::zeros(nh, nb);
    let (gp, gw) = gauss_legendre(gauss_points);

    for e in 0..mesh.n_elements() {
        let (_, h, span) = mesh.element(e);
        let (rho, alpha, beta) = match span {
            Span::Thermoelastic => (params.rho1, params.alpha1, params.beta1),
            Span::Elastic => (params.rho2, params.alpha2, params.beta2),
        };
        let mut me = [[0.0; 4]; 4];
        let mut ke = [[0.0; 4]; 4];
        // heat: [psi_left, psi_right] values/derivatives
        let mut mhe = [[0.0; 2]; 2];
        let mut khe = [[0.0; 2]; 2];
        let mut de = [[0.0; 4]; 2];
        for (&xi, &w) in gp.iter().zip(&gw) {
            let n = hermite_shapes(xi, h)?;
            let wh = w * h;
            for a in 0..4 {
                for b in a..4 {
                    me[a][b] += wh * (rho * (n[a][0] * n[b][0]) + alpha * (n[a][1] * n[b][1]));
                    ke[a][b] += wh * beta * (n[a][2] * n[b][2]);
                }
            }
            if span == Span::Thermoelastic {
                let psi = [1.0 - xi, xi];
                let dpsi = [-1.0 / h, 1.0 / h];
                for a in 0..2 {
                    for b in a..2 {
                        mhe[a][b] += wh * params.rho0 * (psi[a] * psi[b]);
                        khe[a][b] += wh * params.kappa * (dpsi[a] * dpsi[b]);
                    }
                    for b in 0..4 {
                        de[a][b] += wh * dpsi[a] * n[b][1];
                    }
                }
            }
        }

        mirror_upper(&mut me);
        mirror_upper(&mut ke);
        mirror_upper(&mut mhe);
        mirror_upper(&mut khe);

        let beam = dofmap.element_beam_dofs(e);
        for (a, ra) in beam.iter().enumerate() {
            let Some(i) = ra else { continue };
            for (b, rb) in beam.iter().enumerate() {
                let Some(j) = rb else { continue };
                mb[(*i, *j)] += me[a][b];
                kb[(*i, *j)] += ke[a][b];
            }
        }
        if span == Span::Thermoelastic {
            let heat = [dofmap.heat_dof(e), dofmap.heat_dof(e + 1)];
            for (a, ra) in heat.iter().enumerate() {
                let Some(i) = ra else { continue };
                for (b, rb) in heat.iter().enumerate() {
                    let Some(j) = rb else { continue };
                    mth[(*i, *j)] += mhe[a][b];
                    kth[(*i, *j)] += khe[a][b];
                }
                for (b, rb) in beam.iter().enumerate() {
                    let Some(j) = rb else { continue };
                    d[(*i, *j)] += de[a][b];
                }
            }
        }
    }
    Ok(SystemMatrices { mb, kb, mth, kth, d })
}

fn mirror_upper<const N: usize>(m: &mut [[f64; N]; N]) {
    for a in 0..N {
        for b in 0..a {
            m[a][b] = m[b][a];
        }
    }
}

/// Values and slopes of `f` at the mesh nodes, restricted to free DOFs.
///
/// `span1` is sampled on `[0, L0]` and `span2` on `[L0, L]`; at the interface
/// node the span-1 value is used (callers guarantee the two agree).
pub fn interpolate_beam<F, G>(mesh: &Mesh, dofmap: &DofMap, span1: F, span2: G) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<(f64, f64)>,
    G: Fn(f64) -> Result<(f64, f64)>,
{
    let mut out = vec![0.0; dofmap.n_beam()];
    for (k, &x) in mesh.nodes().iter().enumerate() {
        let (v, s) = if k <= mesh.n1 { span1(x)? } else { span2(x)? };
        if let Some(i) = dofmap.beam_dof(k, false) {
            out[i] = v;
        }
        if let Some(i) = dofmap.beam_dof(k, true) {
            out[i] = s;
        }
    }
    Ok(out)
}

/// Nodal values of `f` at the interior span-1 nodes.
pub fn interpolate_heat<F>(mesh: &Mesh, dofmap: &DofMap, f: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    (1..mesh.n1)
        .map(|k| {
            debug_assert_eq!(dofmap.heat_dof(k), Some(k - 1));
            f(mesh.nodes()[k])
        })
        .collect()
}

/// Raw (value, slope) interpolation of a single span with `n` uniform
/// elements on `[a, b]`, no constraints applied: `[v0, s0, v1, s1, ...]`.
pub fn interpolate_span<F>(a: f64, b: f64, n: usize, f: F) -> Vec<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let h = (b - a) / n as f64;
    (0..=n)
        .flat_map(|k| {
            let x = if k == n { b } else { a + k as f64 * h };
            let (v, s) = f(x);
            [v, s]
        })
        .collect()
}
