//! Spectrum of the discrete generator and its resolvent along the imaginary
//! axis, measured in the energy norm.

use nalgebra::{Cholesky, Complex, DMatrix, DVector, Dyn, Schur, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::least_squares_line;
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::model::Provenance;

pub type C64 = Complex<f64>;

/// Largest state dimension for which the dense eigensolver is attempted.
pub const DEFAULT_DENSE_LIMIT: usize = 3000;

/// Samples whose shifted operator has an estimated 2-norm condition number
/// above this are treated as hitting an eigenvalue.
pub const COLLISION_CONDITION: f64 = 1e14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    /// `(re, im)` pairs sorted by `|im|`, then `re`, then `im`.
    pub eigenvalues: Vec<(f64, f64)>,
    pub dim: usize,
    pub n_beam: usize,
    pub n_heat: usize,
    pub spectral_abscissa: f64,
    pub provenance: Option<Provenance>,
}

impl EigenResult {
    fn from_values(mut values: Vec<(f64, f64)>, n_beam: usize, n_heat: usize) -> Self {
        sort_spectrum(&mut values);
        let spectral_abscissa = values.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
        Self {
            dim: values.len(),
            eigenvalues: values,
            n_beam,
            n_heat,
            spectral_abscissa,
            provenance: None,
        }
    }

    /// Largest `|im|` in the spectrum.
    pub fn omega_max(&self) -> f64 {
        self.eigenvalues.iter().map(|v| v.1.abs()).fold(0.0, f64::max)
    }

    /// Worst distance from an eigenvalue to the nearest conjugate of another
    /// eigenvalue, relative to `max(1, |lambda|)`.
    pub fn conjugate_defect(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|&(re, im)| {
                let best = self
                    .eigenvalues
                    .iter()
                    .map(|&(r2, i2)| ((re - r2).powi(2) + (im + i2).powi(2)).sqrt())
                    .fold(f64::INFINITY, f64::min);
                best / (re.hypot(im)).max(1.0)
            })
            .fold(0.0, f64::max)
    }

    /// Smallest positive imaginary part among oscillatory eigenvalues.
    ///
    /// Eigenvalues with `|im| <= rel_tol * omega_max` count as real.
    pub fn lowest_frequency(&self, rel_tol: f64) -> Option<f64> {
        let cut = rel_tol * self.omega_max();
        self.eigenvalues
            .iter()
            .filter(|v| v.1 > cut)
            .map(|v| v.1)
            .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x))))
    }
}

fn sort_spectrum(values: &mut [(f64, f64)]) {
    values.sort_by(|a, b| {
        a.1.abs()
            .total_cmp(&b.1.abs())
            .then(a.0.total_cmp(&b.0))
            .then(a.1.total_cmp(&b.1))
    });
}

fn dense_eigenvalues(a: DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    let n = a.nrows();
    let schur = Schur::try_new(a, f64::EPSILON, 200 * n.max(10))
        .ok_or_else(|| Error::Eigensolver("Schur iteration did not converge".into()))?;
    let values: Vec<(f64, f64)> = schur.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
    if values.iter().any(|v| !(v.0.is_finite() && v.1.is_finite())) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    Ok(values)
}

pub fn eigenvalues(gen: &Generator) -> Result<EigenResult> {
    eigenvalues_with_limit(gen, DEFAULT_DENSE_LIMIT)
}

pub fn eigenvalues_with_limit(gen: &Generator, limit: usize) -> Result<EigenResult> {
    if gen.dim() > limit {
        return Err(Error::InvalidArgument(format!(
            "state dimension {} exceeds the dense limit {limit}",
            gen.dim()
        )));
    }
    let values = dense_eigenvalues(gen.dense_matrix())?;
    Ok(EigenResult::from_values(values, gen.n_beam(), gen.n_heat()))
}

/// Eigenvalues of the beam and heat diagonal blocks of the generator,
/// computed separately. With `gamma = 0` these are the full spectrum.
pub fn block_eigenvalues(gen: &Generator) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    let a = gen.dense_matrix();
    let (nb, nh) = (gen.n_beam(), gen.n_heat());
    let mut beam = dense_eigenvalues(a.view((0, 0), (2 * nb, 2 * nb)).into_owned())?;
    let mut heat = dense_eigenvalues(a.view((2 * nb, 2 * nb), (nh, nh)).into_owned())?;
    sort_spectrum(&mut beam);
    sort_spectrum(&mut heat);
    Ok((beam, heat))
}

/// Undamped beam frequencies, ascending: the square roots of the eigenvalues
/// of the pencil `Kb v = w^2 Mb v`. These are the beam-block eigenvalues
/// `+-i w` of the generator when gamma is zero. Solved in inverse form through
/// the Cholesky factor of `Kb` so the low end keeps full relative accuracy.
pub fn beam_frequencies(gen: &Generator) -> Result<Vec<f64>> {
    let sys = gen.system();
    let chol = Cholesky::new(sys.kb.clone())
        .ok_or_else(|| Error::Factorization("Kb is not symmetric positive definite".into()))?;
    let l = chol.l();
    let n = sys.n_beam();
    let x = l
        .solve_lower_triangular(&sys.mb)
        .ok_or_else(|| Error::Singular("Kb factor is singular".into()))?;
    let c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::Singular("Kb factor is singular".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let mut w: Vec<f64> = c
        .symmetric_eigenvalues()
        .iter()
        .map(|&mu| {
            if mu > 0.0 {
                Ok(1.0 / mu.sqrt())
            } else {
                Err(Error::Eigensolver(format!("non-positive pencil eigenvalue {mu:e}")))
            }
        })
        .collect::<Result<_>>()?;
    debug_assert_eq!(w.len(), n);
    w.sort_by(f64::total_cmp);
    Ok(w)
}

/// Inverse iteration for the eigenvector of the dense generator closest to
/// `shift`. Returns the vector normalized to unit energy norm.
pub fn eigenvector(gen: &Generator, shift: C64) -> Result<DVector<C64>> {
    let n = gen.dim();
    let a = gen.dense_matrix().map(|v| C64::new(v, 0.0));
    let nudge = C64::new(1e-10, 1e-10) * shift.norm().max(1.0);
    let shifted = &a - DMatrix::<C64>::identity(n, n) * (shift + nudge);
    let lu = shifted.lu();
    let metric = gen.energy_metric().map(|v| C64::new(v, 0.0));
    let norm = |v: &DVector<C64>| (v.adjoint() * &metric * v)[(0, 0)].re.max(0.0).sqrt();
    let mut v = DVector::from_fn(n, |i, _| C64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.05));
    for _ in 0..4 {
        v = lu
            .solve(&v)
            .ok_or_else(|| Error::Singular("inverse iteration solve failed".into()))?;
        let s = norm(&v);
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Eigensolver("inverse iteration breakdown".into()));
        }
        v /= C64::new(s, 0.0);
    }
    Ok(v)
}

/// `||A v - mu v||_E / ||v||_E` for a complex vector.
pub fn eigen_residual(gen: &Generator, mu: C64, v: &DVector<C64>) -> f64 {
    let a = gen.dense_matrix().map(|x| C64::new(x, 0.0));
    let metric = gen.energy_metric().map(|x| C64::new(x, 0.0));
    let norm = |w: &DVector<C64>| (w.adjoint() * &metric * w)[(0, 0)].re.max(0.0).sqrt();
    let r = &a * v - v * mu;
    norm(&r) / norm(v)
}

/// The generator conjugated into Euclidean coordinates of the energy norm.
///
/// With `G = F F^T` the energy metric, `T = F^T A F^{-T}` satisfies
/// `||(i lambda - A)^{-1}||_E = 1 / sigma_min(i lambda - T)`.
#[derive(Debug, Clone)]
pub struct EnergyResolvent {
    conjugated: DMatrix<f64>,
}

impl EnergyResolvent {
    pub fn new(gen: &Generator) -> Result<Self> {
        let chol: Cholesky<f64, Dyn> = Cholesky::new(gen.energy_metric())
            .ok_or_else(|| Error::Factorization("energy metric is not positive definite".into()))?;
        let f = chol.l();
        // F^T A, then multiply by F^{-T} from the right: X F^{-T} = (F^{-1} X^T)^T
        let fta = f.tr_mul(&gen.dense_matrix());
        let tmp = f
            .solve_lower_triangular(&fta.transpose())
            .ok_or_else(|| Error::Factorization("energy factor is singular".into()))?;
        Ok(Self {
            conjugated: tmp.transpose(),
        })
    }

    pub fn conjugated(&self) -> &DMatrix<f64> {
        &self.conjugated
    }

    /// Smallest and largest singular values of `i lambda - T`.
    pub fn singular_range(&self, lambda: f64) -> Result<(f64, f64)> {
        let n = self.conjugated.nrows();
        let m = DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { lambda } else { 0.0 };
            C64::new(-self.conjugated[(i, j)], d)
        });
        let svd = SVD::try_new(m, false, false, f64::EPSILON, 0)
            .ok_or_else(|| Error::Singular(format!("SVD did not converge at lambda={lambda}")))?;
        let s = &svd.singular_values;
        Ok((s.min(), s.max()))
    }

    pub fn norm(&self, lambda: f64) -> Result<f64> {
        if !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be finite, got {lambda}")));
        }
        let (smin, smax) = self.singular_range(lambda)?;
        if !(smin > 0.0) || smax / smin > COLLISION_CONDITION {
            return Err(Error::Singular(format!(
                "i*{lambda} is numerically an eigenvalue (condition {:.3e})",
                smax / smin
            )));
        }
        Ok(1.0 / smin)
    }
}

/// `||(i lambda - A)^{-1}||` in the energy norm.
pub fn resolvent_norm(gen: &Generator, lambda: f64) -> Result<f64> {
    EnergyResolvent::new(gen)?.norm(lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventScan {
    pub lambdas: Vec<f64>,
    pub norms: Vec<f64>,
    pub ell: u32,
    /// `norms[i] / lambdas[i]^ell`.
    pub scaled: Vec<f64>,
    /// Grid points skipped because they sit on an eigenvalue.
    pub skipped: Vec<f64>,
    pub provenance: Option<Provenance>,
}

impl ResolventScan {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// `points` logarithmically spaced values in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || points == 0 {
        return Err(Error::InvalidArgument(format!(
            "log grid needs 0 < lo <= hi and points >= 1 (lo={lo}, hi={hi}, points={points})"
        )));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..points)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == points - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect())
}

/// Default scan grid: 200 log points on `[0.1, omega_max / 3]`.
pub fn default_grid(eig: &EigenResult) -> Result<Vec<f64>> {
    log_grid(0.1, eig.omega_max() / 3.0, 200)
}

pub fn resolvent_scan(gen: &Generator, grid: &[f64], ell: u32) -> Result<ResolventScan> {
    resolvent_scan_with_threads(gen, grid, ell, None)
}

/// Scan with at most `threads` worker threads (`None` uses the global pool).
pub fn resolvent_scan_with_threads(
    gen: &Generator,
    grid: &[f64],
    ell: u32,
    threads: Option<usize>,
) -> Result<ResolventScan> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    if !(ell == 1 || ell == 2) {
        return Err(Error::InvalidArgument(format!("ell must be 1 or 2, got {ell}")));
    }
    if grid.iter().any(|&l| !(l > 0.0 && l.is_finite())) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("lambda grid must be positive and increasing".into()));
    }
    let res = EnergyResolvent::new(gen)?;
    let eval = || -> Vec<Result<f64>> { grid.par_iter().map(|&l| res.norm(l)).collect() };
    let samples = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(eval),
        None => eval(),
    };

    let mut scan = ResolventScan {
        lambdas: Vec::with_capacity(grid.len()),
        norms: Vec::with_capacity(grid.len()),
        ell,
        scaled: Vec::with_capacity(grid.len()),
        skipped: Vec::new(),
        provenance: None,
    };
    for (&lambda, sample) in grid.iter().zip(samples) {
        match sample {
            Ok(r) => {
                scan.lambdas.push(lambda);
                scan.norms.push(r);
                scan.scaled.push(r / lambda.powi(ell as i32));
            }
            Err(Error::Singular(_)) => scan.skipped.push(lambda),
            Err(e) => return Err(e),
        }
    }
    Ok(scan)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    pub points: usize,
}

/// Slope of `log(-re)` against `log(im)` for eigenvalues with `re < 0` and
/// `im` inside `band`.
pub fn branch_fit(eig: &EigenResult, band: (f64, f64)) -> Result<BranchFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = eig
        .eigenvalues
        .iter()
        .filter(|&&(re, im)| re < 0.0 && im > 0.0 && im >= band.0 && im <= band.1)
        .map(|&(re, im)| (im.ln(), (-re).ln()))
        .unzip();
    if xs.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "branch fit needs at least 5 eigenvalues in band, found {}",
            xs.len()
        )));
    }
    let line = least_squares_line(&xs, &ys)?;
    Ok(BranchFit {
        slope: line.slope,
        intercept: line.intercept,
        residual: line.rms_residual,
        points: xs.len(),
    })
}

/// Builds an [`EigenResult`] from a list of eigenvalues (for synthetic data
/// and external spectra).
pub fn eigen_result_from(values: Vec<(f64, f64)>) -> EigenResult {
    EigenResult::from_values(values, 0, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(0.1, 10.0, 5).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[4], 10.0);
        assert!((g[2] - 1.0).abs() < 1e-14);
        assert_eq!(log_grid(0.5, 0.5, 1).unwrap(), vec![0.5]);
        assert!(log_grid(0.0, 1.0, 3).is_err());
    }

    #[test]
    fn sorting_is_by_modulus_of_imaginary_part() {
        let e = eigen_result_from(vec![(-1.0, 3.0), (-2.0, 0.0), (-1.0, -3.0), (-0.5, 1.0), (-0.5, -1.0)]);
        let ims: Vec<f64> = e.eigenvalues.iter().map(|v| v.1).collect();
        assert_eq!(ims, vec![0.0, -1.0, 1.0, -3.0, 3.0]);
        assert_eq!(e.spectral_abscissa, -0.5);
        assert_eq!(e.conjugate_defect(), 0.0);
        assert_eq!(e.lowest_frequency(1e-9), Some(1.0));
    }

    fn cloud(f: impl Fn(f64) -> f64) -> EigenResult {
        let mut v = Vec::new();
        for k in 1..=20 {
            let im = 3.0 * k as f64;
            v.push((f(im), im));
            v.push((f(im), -im));
        }
        eigen_result_from(v)
    }

    #[test]
    fn branch_fit_recovers_power_laws() {
        let fit = branch_fit(&cloud(|im| -1.0 / im), (1.0, 100.0)).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        let fit = branch_fit(&cloud(|im| -1.0 / (im * im)), (1.0, 100.0)).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12);
    }

    #[test]
    fn branch_fit_needs_points() {
        assert!(matches!(
            branch_fit(&cloud(|im| -1.0 / im), (1.0, 10.0)),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn perturbed_branch_fit() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut v = Vec::new();
        for k in 1..=40 {
            let im = 2.0 * k as f64;
            let eps: f64 = rng.gen_range(-1.0..1.0);
            v.push((-(1.0 + 0.01 * eps) / im, im));
        }
        let fit = branch_fit(&eigen_result_from(v), (1.0, 1000.0)).unwrap();
        assert!((-1.05..=-0.95).contains(&fit.slope), "{}", fit.slope);
    }
}
