//! Run configuration, artifact formats and command orchestration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::analysis::{convergence_study, fit_decay_exponent, regime_report};
use crate::error::{Error, Result};
use crate::fem::{assemble, BcMode, DofMap, Mesh, SystemMatrices};
use crate::generator::{build_generator, Generator};
use crate::model::{classify_regime, InitialData, PhysicalParams, Provenance, Severity};
use crate::spectral::{eigenvalues, log_grid, resolvent_scan_with_threads, EigenResult, ResolventScan};
use crate::timestepper::{project_initial, simulate, EnergyTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub n1: usize,
    pub n2: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { n1: 20, n2: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub dt: f64,
    pub horizon: f64,
    pub sample_every: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 5.0,
            sample_every: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub lambda_min: f64,
    /// `None` means a third of the largest resolved frequency.
    pub lambda_max: Option<f64>,
    pub points: usize,
    /// Overrides the exponent chosen by the regime classification.
    pub ell: Option<u32>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            lambda_min: 0.1,
            lambda_max: None,
            points: 200,
            ell: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    /// Elements per span; each entry doubles the previous one.
    pub sizes: Vec<usize>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self { sizes: vec![8, 16, 32] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: PhysicalParams,
    pub mesh: MeshConfig,
    pub bc_mode: BcMode,
    pub initial: InitialData,
    pub time: TimeConfig,
    pub scan: ScanConfig,
    pub convergence: ConvergenceConfig,
    pub outputs: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: PhysicalParams::default(),
            mesh: MeshConfig::default(),
            bc_mode: BcMode::Clamped,
            initial: InitialData::default(),
            time: TimeConfig::default(),
            scan: ScanConfig::default(),
            convergence: ConvergenceConfig::default(),
            outputs: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// JSON with object keys sorted, compact.
    pub fn canonical_json(&self) -> String {
        // serde_json::Value keeps keys in a BTreeMap, so this is sorted
        let value = serde_json::to_value(self).expect("config is always serializable");
        value.to_string()
    }

    /// 64-bit FNV-1a of the canonical JSON, as 16 hex digits. The output
    /// directory is left out so that relocating a run keeps its hash.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config is always serializable");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("outputs");
        }
        format!("{:016x}", fnv1a64(value.to_string().as_bytes()))
    }

    /// Parameter, mesh, time and scan validation. Warnings are returned.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.params.check()?;
        self.initial.validate(&self.params)?;
        if self.mesh.n1 < 2 || self.mesh.n2 < 2 {
            return Err(Error::Config("mesh needs n1 >= 2 and n2 >= 2".into()));
        }
        let t = &self.time;
        if !(t.dt > 0.0 && t.dt.is_finite() && t.horizon > 0.0 && t.horizon.is_finite()) || t.sample_every == 0 {
            return Err(Error::Config("time needs dt > 0, horizon > 0 and sample_every >= 1".into()));
        }
        let s = &self.scan;
        if !(s.lambda_min > 0.0) || s.points == 0 || s.lambda_max.is_some_and(|m| !(m >= s.lambda_min)) {
            return Err(Error::Config("scan needs 0 < lambda_min <= lambda_max and points >= 1".into()));
        }
        if s.ell.is_some_and(|l| l != 1 && l != 2) {
            return Err(Error::Config("scan.ell must be 1 or 2".into()));
        }
        Ok(self
            .params
            .validate()
            .into_iter()
            .filter(|v| v.severity == Severity::Warning)
            .map(|v| v.message)
            .collect())
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            config_hash: self.hash(),
            params: self.params,
            n1: self.mesh.n1,
            n2: self.mesh.n2,
            bc_mode: self.bc_mode,
        }
    }

    pub fn discretize(&self) -> Result<(Mesh, DofMap, SystemMatrices)> {
        let mesh = Mesh::new(&self.params, self.mesh.n1, self.mesh.n2)?;
        let map = DofMap::new(&mesh, self.bc_mode);
        let sys = assemble(&self.params, &mesh, &map)?;
        Ok((mesh, map, sys))
    }

    pub fn generator(&self) -> Result<(Mesh, DofMap, Generator)> {
        let (mesh, map, sys) = self.discretize()?;
        let gen = build_generator(sys, self.params.gamma)?;
        Ok((mesh, map, gen))
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// 17 significant digits, scientific notation, `.` as decimal separator.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv<const N: usize>(header: [&str; N], rows: impl Iterator<Item = [f64; N]>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_num(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Columns `t,E,dissipation_mid,balance_residual`.
pub fn energy_trace_csv(trace: &EnergyTrace) -> String {
    csv(
        ["t", "E", "dissipation_mid", "balance_residual"],
        (0..trace.len()).map(|i| {
            [
                trace.times[i],
                trace.energies[i],
                trace.dissipations[i],
                trace.residuals[i],
            ]
        }),
    )
}

/// Columns `re,im`.
pub fn eigen_csv(eig: &EigenResult) -> String {
    csv(["re", "im"], eig.eigenvalues.iter().map(|&(re, im)| [re, im]))
}

/// Columns `lambda,norm,scaled`.
pub fn scan_csv(scan: &ResolventScan) -> String {
    csv(
        ["lambda", "norm", "scaled"],
        (0..scan.len()).map(|i| [scan.lambdas[i], scan.norms[i], scan.scaled[i]]),
    )
}

/// MatrixMarket `array real general` (column-major values).
pub fn matrix_market(m: &DMatrix<f64>, comment: &str) -> String {
    let mut out = String::from("%%MatrixMarket matrix array real general\n");
    for line in comment.lines() {
        let _ = writeln!(out, "% {line}");
    }
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out.push_str(&fmt_num(m[(i, j)]));
            out.push('\n');
        }
    }
    out
}

/// Parses a MatrixMarket `array real general` file.
pub fn parse_matrix_market(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if !header.to_ascii_lowercase().starts_with("%%matrixmarket matrix array real general") {
        return Err(Error::Config(format!("unsupported MatrixMarket header: {header}")));
    }
    let mut body = lines.filter(|l| !l.starts_with('%') && !l.trim().is_empty());
    let dims = body.next().ok_or_else(|| Error::Config("missing size line".into()))?;
    let dims: Vec<usize> = dims
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Config(format!("bad size token {t}"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Config("size line needs two entries".into()));
    };
    let values: Vec<f64> = body
        .map(|t| t.trim().parse().map_err(|_| Error::Config(format!("bad value {t}"))))
        .collect::<Result<_>>()?;
    if values.len() != rows * cols {
        return Err(Error::Config(format!("expected {} values, found {}", rows * cols, values.len())));
    }
    Ok(DMatrix::from_column_slice(rows, cols, &values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Spectrum,
    Resolvent,
    Decay,
    Report,
    Convergence,
    ExportMatrices,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Spectrum => "spectrum",
            Command::Resolvent => "resolvent",
            Command::Decay => "decay",
            Command::Report => "report",
            Command::Convergence => "convergence",
            Command::ExportMatrices => "export-matrices",
        }
    }
}

impl std::str::FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "simulate" => Command::Simulate,
            "spectrum" => Command::Spectrum,
            "resolvent" => Command::Resolvent,
            "decay" => Command::Decay,
            "report" => Command::Report,
            "convergence" => Command::Convergence,
            "export-matrices" => Command::ExportMatrices,
            other => return Err(Error::Config(format!("unknown command '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
    pub warnings: Vec<String>,
}

/// Exit status for an error: 1 for bad input, 2 for numerical failure.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        2
    } else {
        1
    }
}

fn write_artifact(dir: &Path, name: String, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    files.push(path);
    Ok(())
}

pub fn run_simulation(cfg: &RunConfig) -> Result<EnergyTrace> {
    let (mesh, map, gen) = cfg.generator()?;
    let s0 = project_initial(&cfg.initial, &mesh, &map)?;
    let mut trace = simulate(&gen, &s0, cfg.time.dt, cfg.time.horizon, cfg.time.sample_every)?;
    trace.meta.provenance = Some(cfg.provenance());
    Ok(trace)
}

pub fn run_spectrum(cfg: &RunConfig) -> Result<EigenResult> {
    let (_, _, gen) = cfg.generator()?;
    let mut eig = eigenvalues(&gen)?;
    eig.provenance = Some(cfg.provenance());
    Ok(eig)
}

/// Scan grid from the config, resolving the automatic upper bound from the
/// spectrum.
pub fn scan_grid(cfg: &RunConfig, eig: &EigenResult) -> Result<Vec<f64>> {
    let hi = cfg.scan.lambda_max.unwrap_or(eig.omega_max() / 3.0);
    log_grid(cfg.scan.lambda_min, hi, cfg.scan.points)
}

pub fn run_resolvent(cfg: &RunConfig, eig: &EigenResult, threads: Option<usize>) -> Result<ResolventScan> {
    let (_, _, gen) = cfg.generator()?;
    let ell = cfg.scan.ell.unwrap_or(classify_regime(&cfg.params).ell);
    let grid = scan_grid(cfg, eig)?;
    let mut scan = resolvent_scan_with_threads(&gen, &grid, ell, threads)?;
    scan.provenance = Some(cfg.provenance());
    Ok(scan)
}

/// Executes one command, writing `<command>-<hash>.<ext>` files into the
/// output directory.
pub fn run(command: Command, cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let warnings = cfg.validate()?;
    let hash = cfg.hash();
    let dir = cfg.outputs.clone();
    fs::create_dir_all(&dir)?;
    let stem = format!("{}-{hash}", command.name());
    let mut files = Vec::new();

    let summary = match command {
        Command::Simulate => {
            let trace = run_simulation(cfg)?;
            write_artifact(&dir, format!("{stem}.csv"), &energy_trace_csv(&trace), &mut files)?;
            format!(
                "simulate: {} samples, E(0)={:.6e}, E(T)={:.6e}, max balance residual {:.3e}",
                trace.len(),
                trace.initial_energy(),
                trace.final_energy(),
                trace.meta.max_abs_balance_residual
            )
        }
        Command::Spectrum => {
            let eig = run_spectrum(cfg)?;
            write_artifact(&dir, format!("{stem}.csv"), &eigen_csv(&eig), &mut files)?;
            format!(
                "spectrum: {} eigenvalues, spectral abscissa {:.6e}, omega_max {:.6e}",
                eig.dim,
                eig.spectral_abscissa,
                eig.omega_max()
            )
        }
        Command::Resolvent => {
            let eig = run_spectrum(cfg)?;
            let scan = run_resolvent(cfg, &eig, opts.threads)?;
            write_artifact(&dir, format!("{stem}.csv"), &scan_csv(&scan), &mut files)?;
            let max = scan.scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            format!(
                "resolvent: {} samples ({} skipped), ell={}, max scaled {:.6e}",
                scan.len(),
                scan.skipped.len(),
                scan.ell,
                max
            )
        }
        Command::Decay => {
            let trace = run_simulation(cfg)?;
            let t = cfg.time.horizon;
            let fit = fit_decay_exponent(&trace, (t / 4.0, t))?;
            let doc = serde_json::json!({
                "config_hash": hash,
                "regime": classify_regime(&cfg.params),
                "fit": fit,
                "mesh": cfg.mesh,
                "dt": cfg.time.dt,
            });
            write_artifact(&dir, format!("{stem}.json"), &to_json(&doc)?, &mut files)?;
            format!(
                "decay: alpha={:.6} on [{}, {}] (pre-asymptotic), residual {:.3e}",
                fit.alpha, fit.window.0, fit.window.1, fit.residual
            )
        }
        Command::Report => {
            let trace = run_simulation(cfg)?;
            let eig = run_spectrum(cfg)?;
            let scan = run_resolvent(cfg, &eig, opts.threads)?;
            let report = regime_report(&cfg.params, &trace, &scan, &eig)?;
            write_artifact(&dir, format!("{stem}.json"), &to_json(&report)?, &mut files)?;
            let failed: Vec<&str> = report
                .checks
                .iter()
                .filter(|c| c.verdict == crate::analysis::Verdict::Fail)
                .map(|c| c.name.as_str())
                .collect();
            format!(
                "report: regime {:?} (ell={}), {} checks, failed: {}",
                report.regime.tag,
                report.regime.ell,
                report.checks.len(),
                if failed.is_empty() { "none".to_string() } else { failed.join(",") }
            )
        }
        Command::Convergence => {
            let study = convergence_study(&cfg.params, &cfg.convergence.sizes, cfg.bc_mode)?;
            write_artifact(&dir, format!("{stem}.json"), &to_json(&study)?, &mut files)?;
            let orders: Vec<String> = study
                .orders
                .iter()
                .chain(study.richardson.iter())
                .map(|o| o.map_or("undefined".into(), |v| format!("{v:.3}")))
                .collect();
            format!("convergence: probes {:?}, orders [{}]", study.probes, orders.join(", "))
        }
        Command::ExportMatrices => {
            let (_, _, sys) = cfg.discretize()?;
            let comment = format!("config {hash}");
            for (name, m) in [("mb", &sys.mb), ("kb", &sys.kb), ("mth", &sys.mth), ("kth", &sys.kth), ("d", &sys.d)] {
                write_artifact(&dir, format!("{stem}-{name}.mtx"), &matrix_market(m, &comment), &mut files)?;
            }
            format!(
                "export-matrices: {} beam DOFs, {} heat DOFs",
                sys.n_beam(),
                sys.n_heat()
            )
        }
    };
    Ok(RunOutcome {
        files,
        summary,
        warnings,
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_num(-0.1), "-1.0000000000000001e-1");
        let v = 0.1 + 0.2;
        assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn config_round_trip_and_unknown_keys() {
        let cfg = RunConfig::default();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back = RunConfig::from_json(&json).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        let bad = json.replacen("\"mesh\"", "\"meshes\"", 1);
        assert!(RunConfig::from_json(&bad).is_err());
        assert!(RunConfig::from_json("{ not json").is_err());
    }

    #[test]
    fn hash_ignores_key_order_but_not_values() {
        let a = RunConfig::from_json(r#"{"mesh": {"n1": 4, "n2": 6}, "bc_mode": "pinned"}"#).unwrap();
        let b = RunConfig::from_json(r#"{"bc_mode": "pinned", "mesh": {"n2": 6, "n1": 4}}"#).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig::from_json(r#"{"bc_mode": "pinned", "mesh": {"n2": 6, "n1": 5}}"#).unwrap();
        assert_ne!(a.hash(), c.hash());
        let mut d = a.clone();
        d.outputs = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), d.hash());
    }

    #[test]
    fn matrix_market_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -2.5, 3.25, 1e-300, 0.0, 7.0]);
        let text = matrix_market(&m, "test");
        assert!(text.starts_with("%%MatrixMarket matrix array real general\n% test\n2 3\n"));
        assert_eq!(parse_matrix_market(&text).unwrap(), m);
    }

    #[test]
    fn command_names_round_trip() {
        for c in [
            Command::Simulate,
            Command::Spectrum,
            Command::Resolvent,
            Command::Decay,
            Command::Report,
            Command::Convergence,
            Command::ExportMatrices,
        ] {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert!("plot".parse::<Command>().is_err());
    }

    #[test]
    fn invalid_config_values() {
        let mut cfg = RunConfig::default();
        cfg.params.kappa = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.scan.ell = Some(3);
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.params.gamma = 0.0;
        assert_eq!(cfg.validate().unwrap().len(), 1);
    }
}
