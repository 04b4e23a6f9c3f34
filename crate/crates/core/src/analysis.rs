//! Decay fits, mesh-convergence studies and regime reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble, BcMode, DofMap, Mesh};
use crate::generator::build_generator;
use crate::model::{classify_regime, rayleigh_dispersion, PhysicalParams, Provenance, RegimeClass};
use crate::spectral::{beam_frequencies, eigenvalues, EigenResult, ResolventScan};
use crate::timestepper::{EnergyTrace, TraceMeta};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn least_squares_line(xs: &[f64], ys: &[f64]) -> Result<Line> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData("a line fit needs at least 2 points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    Ok(Line {
        slope,
        intercept,
        rms_residual: (ss / n).sqrt(),
    })
}

impl EnergyTrace {
    /// A trace built from raw `(t, E)` samples, e.g. for synthetic data.
    pub fn from_samples(times: Vec<f64>, energies: Vec<f64>) -> Result<Self> {
        if times.len() != energies.len() || times.is_empty() {
            return Err(Error::InvalidArgument("times and energies must be non-empty and equally long".into()));
        }
        let n = times.len();
        let horizon = *times.last().unwrap_or(&0.0);
        Ok(Self {
            times,
            energies,
            dissipations: vec![0.0; n],
            residuals: vec![0.0; n],
            meta: TraceMeta {
                dt: 0.0,
                horizon,
                steps: n.saturating_sub(1),
                sample_every: 1,
                max_abs_balance_residual: 0.0,
                max_energy_increase: 0.0,
                provenance: None,
            },
        })
    }
}

/// Number of geometric target times used to pick samples in a decay window.
pub const DECAY_FIT_TARGETS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Slope of `log E` against `log t`.
    pub alpha: f64,
    pub intercept: f64,
    pub residual: f64,
    pub window: (f64, f64),
    pub samples: usize,
    /// Always true for fits on a fixed discretization.
    pub pre_asymptotic: bool,
}

/// Indices of trace samples nearest to geometrically spaced times in the
/// window, deduplicated and in increasing order.
pub fn geometric_window_samples(times: &[f64], window: (f64, f64), targets: usize) -> Vec<usize> {
    let (ta, tb) = window;
    let inside: Vec<usize> = (0..times.len())
        .filter(|&i| times[i] >= ta && times[i] <= tb)
        .collect();
    if inside.is_empty() || targets < 2 || !(ta > 0.0) {
        return inside;
    }
    let mut picked: Vec<usize> = (0..targets)
        .map(|k| {
            let t = ta * (tb / ta).powf(k as f64 / (targets - 1) as f64);
            *inside
                .iter()
                .min_by(|&&a, &&b| (times[a] - t).abs().total_cmp(&(times[b] - t).abs()))
                .expect("non-empty")
        })
        .collect();
    picked.dedup();
    picked
}

/// Least-squares decay exponent of `E(t)` on `window`.
pub fn fit_decay_exponent(trace: &EnergyTrace, window: (f64, f64)) -> Result<DecayFit> {
    let (ta, tb) = window;
    if !(ta > 0.0 && tb > ta) {
        return Err(Error::InvalidArgument(format!("decay window must satisfy 0 < ta < tb, got {window:?}")));
    }
    let first = trace.times.first().copied().unwrap_or(f64::NAN);
    let last = trace.times.last().copied().unwrap_or(f64::NAN);
    if ta < first || tb > last * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "window {window:?} outside trace [{first}, {last}]"
        )));
    }
    let idx = geometric_window_samples(&trace.times, window, DECAY_FIT_TARGETS);
    if idx.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "decay fit needs at least 10 samples in window, found {}",
            idx.len()
        )));
    }
    if idx.iter().any(|&i| !(trace.energies[i] > 0.0)) {
        return Err(Error::InvalidArgument("energies in the fit window must be > 0".into()));
    }
    let xs: Vec<f64> = idx.iter().map(|&i| trace.times[i].ln()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| trace.energies[i].ln()).collect();
    let line = least_squares_line(&xs, &ys)?;
    Ok(DecayFit {
        alpha: line.slope,
        intercept: line.intercept,
        residual: line.rms_residual,
        window,
        samples: idx.len(),
        pre_asymptotic: true,
    })
}

/// `log2(e_i / e_{i+1})` for successive errors of a halving mesh sequence.
/// Entries are `None` where the ratio is undefined.
pub fn observed_orders(errors: &[f64]) -> Vec<Option<f64>> {
    errors
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].abs(), w[1].abs());
            (a > 0.0 && b > 0.0).then(|| (a / b).log2())
        })
        .collect()
}

/// Richardson order estimate `log2(|v0 - v1| / |v1 - v2|)` from successive
/// triples of probe values.
pub fn richardson_orders(values: &[f64]) -> Vec<Option<f64>> {
    values
        .windows(3)
        .map(|w| {
            let (d1, d2) = ((w[0] - w[1]).abs(), (w[1] - w[2]).abs());
            (d1 > 0.0 && d2 > 0.0).then(|| (d1 / d2).log2())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    /// Elements per span (`n1 = n2`).
    pub sizes: Vec<usize>,
    pub bc_mode: BcMode,
    /// Lowest oscillatory eigenfrequency at each size.
    pub probes: Vec<f64>,
    /// Closed-form frequency when the configuration has one.
    pub reference: Option<f64>,
    pub errors: Option<Vec<f64>>,
    /// Orders from errors against `reference`.
    pub orders: Vec<Option<f64>>,
    /// Orders from successive probe differences.
    pub richardson: Vec<Option<f64>>,
}

/// Closed-form lowest frequency, available for a decoupled pinned beam
/// whose spans share one material.
pub fn dispersion_reference(params: &PhysicalParams, bc_mode: BcMode) -> Option<f64> {
    let uniform = params.rho1 == params.rho2 && params.alpha1 == params.alpha2 && params.beta1 == params.beta2;
    if bc_mode == BcMode::Pinned && uniform && params.gamma == 0.0 {
        rayleigh_dispersion(params.rho1, params.alpha1, params.beta1, params.l, 1).ok()
    } else {
        None
    }
}

/// Lowest eigenfrequency of the discrete generator on an `n x n` mesh.
pub fn lowest_eigenfrequency(params: &PhysicalParams, n: usize, bc_mode: BcMode) -> Result<f64> {
    let mesh = Mesh::new(params, n, n)?;
    let map = DofMap::new(&mesh, bc_mode);
    let gen = build_generator(assemble(params, &mesh, &map)?, params.gamma)?;
    if params.gamma == 0.0 {
        return beam_frequencies(&gen)?
            .first()
            .copied()
            .ok_or_else(|| Error::Eigensolver("empty beam spectrum".into()));
    }
    eigenvalues(&gen)?
        .lowest_frequency(1e-9)
        .ok_or_else(|| Error::Eigensolver("no oscillatory eigenvalue found".into()))
}

pub fn convergence_study(params: &PhysicalParams, sizes: &[usize], bc_mode: BcMode) -> Result<ConvergenceStudy> {
    params.check()?;
    if sizes.len() < 3 {
        return Err(Error::InvalidArgument("convergence study needs at least 3 mesh sizes".into()));
    }
    if sizes.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::InvalidArgument(format!(
            "mesh sizes must double at every step, got {sizes:?}"
        )));
    }
    let probes = sizes
        .iter()
        .map(|&n| lowest_eigenfrequency(params, n, bc_mode))
        .collect::<Result<Vec<_>>>()?;
    let reference = dispersion_reference(params, bc_mode);
    let errors = reference.map(|r| probes.iter().map(|p| (p - r).abs()).collect::<Vec<_>>());
    let orders = errors.as_deref().map(observed_orders).unwrap_or_default();
    Ok(ConvergenceStudy {
        sizes: sizes.to_vec(),
        bc_mode,
        richardson: richardson_orders(&probes),
        probes,
        reference,
        errors,
        orders,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

/// Shape of the scaled resolvent curve on a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanShape {
    pub max_scaled: f64,
    pub argmax_lambda: f64,
    pub argmax_index: usize,
    /// True when the maximum sits in the first third of the grid.
    pub max_in_lower_third: bool,
    /// `max over i < j in the upper half of scaled[j] / scaled[i]`.
    pub upper_half_growth: f64,
    /// Log-log slope of the raw norms over the upper half.
    pub tail_slope: f64,
}

/// Ripple tolerance for the almost-decreasing test on the upper half.
pub const SCAN_RIPPLE: f64 = 1.5;

pub fn scan_shape(scan: &ResolventScan) -> Result<ScanShape> {
    let n = scan.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!("scan has only {n} samples")));
    }
    let (argmax_index, &max_scaled) = scan
        .scaled
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let upper = &scan.scaled[n / 2..];
    let mut running_min = f64::INFINITY;
    let mut growth = 0.0f64;
    for &v in upper {
        if running_min.is_finite() {
            growth = growth.max(v / running_min);
        }
        running_min = running_min.min(v);
    }
    let xs: Vec<f64> = scan.lambdas[n / 2..].iter().map(|l| l.ln()).collect();
    let ys: Vec<f64> = scan.norms[n / 2..].iter().map(|r| r.ln()).collect();
    let tail_slope = least_squares_line(&xs, &ys)?.slope;
    Ok(ScanShape {
        max_scaled,
        argmax_lambda: scan.lambdas[argmax_index],
        argmax_index,
        max_in_lower_third: 3 * argmax_index < n,
        upper_half_growth: growth,
        tail_slope,
    })
}

impl ScanShape {
    /// Maximum in the lower third and almost-decreasing upper half.
    pub fn is_regime_consistent(&self) -> bool {
        self.max_in_lower_third && self.upper_half_growth <= SCAN_RIPPLE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub initial_energy: f64,
    pub final_energy: f64,
    pub horizon: f64,
    pub decay_fit: Option<DecayFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub config_hash: Option<String>,
    pub params: PhysicalParams,
    pub regime: RegimeClass,
    pub spectral_abscissa: f64,
    pub scan: ScanShape,
    pub trace: TraceSummary,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl RegimeReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.verdict != Verdict::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Relative slack on per-step energy checks.
pub const ENERGY_SLACK: f64 = 1e-10;

fn shared_provenance<'a>(
    params: &PhysicalParams,
    items: [Option<&'a Provenance>; 3],
) -> Result<Option<&'a Provenance>> {
    let present: Vec<&Provenance> = items.into_iter().flatten().collect();
    if let Some(first) = present.first() {
        if present.iter().any(|p| p.config_hash != first.config_hash) {
            let hashes: Vec<&str> = present.iter().map(|p| p.config_hash.as_str()).collect();
            return Err(Error::ConfigMismatch(format!("inputs come from different configs: {hashes:?}")));
        }
        if first.params != *params {
            return Err(Error::ConfigMismatch("report parameters differ from the inputs' config".into()));
        }
    }
    Ok(present.first().copied())
}

pub fn regime_report(
    params: &PhysicalParams,
    trace: &EnergyTrace,
    scan: &ResolventScan,
    eig: &EigenResult,
) -> Result<RegimeReport> {
    let prov = shared_provenance(
        params,
        [trace.meta.provenance.as_ref(), scan.provenance.as_ref(), eig.provenance.as_ref()],
    )?;
    let regime = classify_regime(params);
    let coupled = params.gamma != 0.0;
    let e0 = trace.initial_energy();
    let e_end = trace.final_energy();
    let mut checks = Vec::new();
    let mut notes = vec![
        "resolvent scan is sampled evidence on a finite discretization, not a bound on the continuous operator".to_string(),
    ];

    let slack = ENERGY_SLACK * e0;
    checks.push(Check {
        name: "energy_balance".into(),
        verdict: Verdict::from_bool(trace.meta.max_abs_balance_residual <= slack),
        detail: format!(
            "max |dE + dt*dissipation| = {:.3e} (limit {:.3e})",
            trace.meta.max_abs_balance_residual, slack
        ),
    });
    checks.push(Check {
        name: "energy_monotone".into(),
        verdict: Verdict::from_bool(trace.meta.max_energy_increase <= slack),
        detail: format!("largest step increase {:.3e}", trace.meta.max_energy_increase),
    });
    checks.push(Check {
        name: "spectral_abscissa_negative".into(),
        verdict: if coupled {
            Verdict::from_bool(eig.spectral_abscissa < 0.0)
        } else {
            Verdict::NotApplicable
        },
        detail: format!("spectral abscissa {:.6e}", eig.spectral_abscissa),
    });
    checks.push(Check {
        name: "energy_decreases".into(),
        verdict: if coupled && e0 > 0.0 {
            Verdict::from_bool(e_end < e0)
        } else {
            Verdict::NotApplicable
        },
        detail: format!("E(T)/E(0) = {:.6e}", if e0 > 0.0 { e_end / e0 } else { f64::NAN }),
    });
    if !coupled {
        notes.push("gamma = 0: stability checks do not apply to the decoupled system".into());
    }

    let shape = scan_shape(scan)?;
    let verdict = if !coupled {
        Verdict::NotApplicable
    } else if scan.ell != regime.ell {
        notes.push(format!(
            "scan used ell = {} but the parameters select ell = {}",
            scan.ell, regime.ell
        ));
        Verdict::NotApplicable
    } else {
        Verdict::from_bool(shape.is_regime_consistent())
    };
    checks.push(Check {
        name: "resolvent_scan_regime".into(),
        verdict,
        detail: format!(
            "max r/lambda^{} = {:.4e} at lambda = {:.4e} (index {} of {}), upper-half growth {:.3}",
            scan.ell,
            shape.max_scaled,
            shape.argmax_lambda,
            shape.argmax_index,
            scan.len(),
            shape.upper_half_growth
        ),
    });

    let horizon = *trace.times.last().unwrap_or(&0.0);
    let decay_fit = fit_decay_exponent(trace, (horizon / 4.0, horizon)).ok();
    if decay_fit.is_some() {
        notes.push(format!(
            "decay exponent fitted on [T/4, T] is pre-asymptotic; expected continuous rate t^{}",
            regime.decay_exponent()
        ));
    }

    Ok(RegimeReport {
        config_hash: prov.map(|p| p.config_hash.clone()),
        params: *params,
        regime,
        spectral_abscissa: eig.spectral_abscissa,
        scan: shape,
        trace: TraceSummary {
            initial_energy: e0,
            final_energy: e_end,
            horizon,
            decay_fit,
        },
        checks,
        notes,
    })
}
