//! Physical constants, regime classification, initial-data presets and the
//! closed-form dispersion relation of a single Rayleigh beam.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::BcMode;

/// The eleven constants of the coupled system.
///
/// Span 1 occupies `(0, l0)` and carries the heat equation; span 2 occupies
/// `(l0, l)` and is purely elastic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub rho1: f64,
    pub rho2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub rho0: f64,
    pub kappa: f64,
    pub gamma: f64,
    #[serde(rename = "L0")]
    pub l0: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            rho1: 1.0,
            rho2: 1.0,
            alpha1: 1.0,
            alpha2: 1.0,
            beta1: 1.0,
            beta2: 1.0,
            rho0: 1.0,
            kappa: 1.0,
            gamma: 1.0,
            l0: 0.5,
            l: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
    pub severity: Severity,
}

impl Violation {
    fn error(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.to_owned(),
            message: message.into(),
            severity: Severity::Error,
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl PhysicalParams {
    /// Every violated invariant. `gamma == 0` shows up as a warning only.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let positive = [
            ("rho1", self.rho1),
            ("rho2", self.rho2),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("rho0", self.rho0),
            ("kappa", self.kappa),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                out.push(Violation::error(name, format!("{name} must be > 0")));
            }
        }
        if !(self.l0.is_finite() && self.l.is_finite() && 0.0 < self.l0 && self.l0 < self.l) {
            out.push(Violation::error("L0", "require 0 < L0 < L"));
        }
        if !self.gamma.is_finite() {
            out.push(Violation::error("gamma", "gamma must be finite"));
        } else if self.gamma == 0.0 {
            out.push(Violation {
                field: "gamma".into(),
                message: "gamma = 0 decouples heat from the beam (conservative oracle mode)".into(),
                severity: Severity::Warning,
            });
        }
        out
    }

    /// `Ok` unless `validate` reports an error-severity violation.
    pub fn check(&self) -> Result<()> {
        let errors: Vec<String> = self
            .validate()
            .into_iter()
            .filter(|v| v.severity == Severity::Error)
            .map(|v| v.message)
            .collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(errors.join("; ")))
        }
    }

    pub fn classify_regime(&self) -> RegimeClass {
        classify_regime(self)
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            l0: self.l0,
            l: self.l,
        }
    }
}

/// Interface position and total length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub l0: f64,
    pub l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RegimeTag {
    /// Expected energy decay `t^-2`.
    Fast,
    /// Expected energy decay `t^-1`.
    Slow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeClass {
    pub tag: RegimeTag,
    pub ell: u32,
}

impl RegimeClass {
    /// Exponent of the polynomial energy decay, `2 / ell`.
    pub fn decay_exponent(&self) -> f64 {
        -2.0 / self.ell as f64
    }
}

/// `Fast` (ell = 1) when the thermoelastic span is at least as heavy, in both
/// density and rotary inertia, as the elastic one; `Slow` (ell = 2) otherwise.
pub fn classify_regime(params: &PhysicalParams) -> RegimeClass {
    if params.rho1 >= params.rho2 && params.alpha1 >= params.alpha2 {
        RegimeClass {
            tag: RegimeTag::Fast,
            ell: 1,
        }
    } else {
        RegimeClass {
            tag: RegimeTag::Slow,
            ell: 2,
        }
    }
}

/// Angular frequency of mode `n` of a pinned-pinned Rayleigh beam,
/// `omega^2 = beta k^4 / (rho + alpha k^2)` with `k = n pi / span`.
///
/// `alpha = 0` is accepted and gives the Euler-Bernoulli limit.
pub fn rayleigh_dispersion(rho: f64, alpha: f64, beta: f64, span: f64, n: u32) -> Result<f64> {
    if !(rho > 0.0 && beta > 0.0 && span > 0.0) || !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dispersion needs rho, beta, span > 0 and alpha >= 0 (rho={rho}, alpha={alpha}, beta={beta}, span={span})"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("mode index must be >= 1".into()));
    }
    let k = n as f64 * PI / span;
    let k2 = k * k;
    Ok((beta * k2 * k2 / (rho + alpha * k2)).sqrt())
}

/// Where an analysis product came from: the config hash plus the inputs
/// that determine the discrete operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub params: PhysicalParams,
    pub n1: usize,
    pub n2: usize,
    pub bc_mode: BcMode,
}

/// A closed-form field: a preset name plus its coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Descriptor {
    pub preset: String,
    #[serde(default)]
    pub coeffs: Vec<f64>,
}

impl Descriptor {
    pub fn new(preset: &str, coeffs: &[f64]) -> Self {
        Self {
            preset: preset.to_owned(),
            coeffs: coeffs.to_vec(),
        }
    }

    pub fn zero() -> Self {
        Self::new("zero", &[])
    }

    fn scale(&self) -> f64 {
        self.coeffs.iter().fold(1.0f64, |m, c| m.max(c.abs()))
    }

    fn single_coeff(&self) -> Result<f64> {
        match self.coeffs.as_slice() {
            [] => Ok(1.0),
            [c] => Ok(*c),
            _ => Err(Error::InvalidInitialData(format!(
                "preset '{}' takes at most one coefficient, got {}",
                self.preset,
                self.coeffs.len()
            ))),
        }
    }
}

/// Presets accepted for the span-1 beam fields `u0`, `u1`.
pub const SPAN1_PRESETS: &[&str] = &["zero", "poly-clamped", "clamped-series"];
/// Presets accepted for the span-2 beam fields `y0`, `y1`.
pub const SPAN2_PRESETS: &[&str] = &["zero", "poly-clamped", "clamped-series", "matched-spline"];
/// Presets accepted for the temperature `theta0`.
pub const THETA_PRESETS: &[&str] = &["zero", "sine-bump", "sine-series"];

/// Initial state `(u0, u1, theta0)` on span 1 and `(y0, y1)` on span 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub u0: Descriptor,
    pub u1: Descriptor,
    pub y0: Descriptor,
    pub y1: Descriptor,
    pub theta0: Descriptor,
}

impl Default for InitialData {
    /// Clamped polynomial displacement on span 1 with a sine temperature bump.
    fn default() -> Self {
        Self {
            u0: Descriptor::new("poly-clamped", &[1.0]),
            u1: Descriptor::zero(),
            y0: Descriptor::zero(),
            y1: Descriptor::zero(),
            theta0: Descriptor::new("sine-bump", &[1.0]),
        }
    }
}

impl InitialData {
    pub fn zero() -> Self {
        Self {
            u0: Descriptor::zero(),
            u1: Descriptor::zero(),
            y0: Descriptor::zero(),
            y1: Descriptor::zero(),
            theta0: Descriptor::zero(),
        }
    }

    /// `(value, slope)` of the span-1 displacement (`velocity = false`) or
    /// velocity (`velocity = true`) at `x`.
    pub fn eval_span1(&self, geo: Geometry, velocity: bool, x: f64) -> Result<(f64, f64)> {
        let d = if velocity { &self.u1 } else { &self.u0 };
        eval_span1(d, geo, x)
    }

    pub fn eval_span2(&self, geo: Geometry, velocity: bool, x: f64) -> Result<(f64, f64)> {
        let (d, partner) = if velocity {
            (&self.y1, &self.u1)
        } else {
            (&self.y0, &self.u0)
        };
        eval_span2(d, partner, geo, x)
    }

    pub fn eval_theta(&self, geo: Geometry, x: f64) -> Result<f64> {
        let d = &self.theta0;
        let l0 = geo.l0;
        match d.preset.as_str() {
            "zero" => Ok(0.0),
            "sine-bump" => Ok(d.single_coeff()? * (PI * x / l0).sin()),
            "sine-series" => Ok(d
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, a)| a * ((k + 1) as f64 * PI * x / l0).sin())
                .sum()),
            other => Err(unknown_preset("theta0", other)),
        }
    }

    /// Checks clamping, transmission and Dirichlet conditions at the end
    /// points and the interface.
    pub fn validate(&self, params: &PhysicalParams) -> Result<()> {
        params.check()?;
        let geo = params.geometry();
        let (l0, l) = (geo.l0, geo.l);
        let mut problems = Vec::new();
        for velocity in [false, true] {
            let (u_name, y_name) = if velocity { ("u1", "y1") } else { ("u0", "y0") };
            let tol_u = 1e-14 * self.field(velocity, 1).scale();
            let tol = 1e-14 * self.field(velocity, 1).scale().max(self.field(velocity, 2).scale());
            let (u_a, du_a) = self.eval_span1(geo, velocity, 0.0)?;
            let (u_b, du_b) = self.eval_span1(geo, velocity, l0)?;
            let (y_a, dy_a) = self.eval_span2(geo, velocity, l0)?;
            let (y_b, dy_b) = self.eval_span2(geo, velocity, l)?;
            if u_a.abs() > tol_u || du_a.abs() > tol_u {
                problems.push(format!("{u_name} must be clamped at x = 0"));
            }
            if y_b.abs() > tol || dy_b.abs() > tol {
                problems.push(format!("{y_name} must be clamped at x = L"));
            }
            if (u_b - y_a).abs() > tol {
                problems.push(format!("{u_name}(L0) must equal {y_name}(L0)"));
            }
            if (du_b - dy_a).abs() > tol {
                problems.push(format!("{u_name}'(L0) must equal {y_name}'(L0)"));
            }
        }
        let tol_t = 1e-14 * self.theta0.scale();
        if self.eval_theta(geo, 0.0)?.abs() > tol_t || self.eval_theta(geo, l0)?.abs() > tol_t {
            problems.push("theta0 must vanish at x = 0 and x = L0".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInitialData(problems.join("; ")))
        }
    }

    fn field(&self, velocity: bool, span: u8) -> &Descriptor {
        match (velocity, span) {
            (false, 1) => &self.u0,
            (true, 1) => &self.u1,
            (false, _) => &self.y0,
            (true, _) => &self.y1,
        }
    }
}

fn unknown_preset(field: &str, name: &str) -> Error {
    Error::InvalidInitialData(format!("unknown preset '{name}' for {field}"))
}

fn eval_span1(d: &Descriptor, geo: Geometry, x: f64) -> Result<(f64, f64)> {
    let l0 = geo.l0;
    match d.preset.as_str() {
        "zero" => Ok((0.0, 0.0)),
        // c x^2 (x - L0)^2
        "poly-clamped" => {
            let c = d.single_coeff()?;
            let s = x - l0;
            Ok((c * x * x * s * s, c * 2.0 * x * s * (s + x)))
        }
        // sum_k a_k x^(k+2)
        "clamped-series" => Ok(power_series(&d.coeffs, x)),
        other => Err(unknown_preset("span-1 field", other)),
    }
}

fn eval_span2(d: &Descriptor, partner: &Descriptor, geo: Geometry, x: f64) -> Result<(f64, f64)> {
    let (l0, l) = (geo.l0, geo.l);
    match d.preset.as_str() {
        "zero" => Ok((0.0, 0.0)),
        // c (x - L0)^2 (x - L)^2
        "poly-clamped" => {
            let c = d.single_coeff()?;
            let a = x - l0;
            let b = x - l;
            Ok((c * a * a * b * b, c * 2.0 * a * b * (a + b)))
        }
        // sum_k a_k (L - x)^(k+2)
        "clamped-series" => {
            let (v, dv) = power_series(&d.coeffs, l - x);
            Ok((v, -dv))
        }
        // cubic Hermite blend from the span-1 partner's interface value and
        // slope down to a clamped zero at L
        "matched-spline" => {
            if !d.coeffs.is_empty() {
                return Err(Error::InvalidInitialData(
                    "preset 'matched-spline' takes no coefficients".into(),
                ));
            }
            let (v0, s0) = eval_span1(partner, geo, l0)?;
            let h = l - l0;
            let t = (x - l0) / h;
            let h00 = 2.0 * t.powi(3) - 3.0 * t * t + 1.0;
            let h10 = t.powi(3) - 2.0 * t * t + t;
            let dh00 = (6.0 * t * t - 6.0 * t) / h;
            let dh10 = (3.0 * t * t - 4.0 * t + 1.0) / h;
            Ok((v0 * h00 + s0 * h * h10, v0 * dh00 + s0 * h * dh10))
        }
        other => Err(unknown_preset("span-2 field", other)),
    }
}

/// Value and derivative of `sum_k a_k x^(k+2)`.
fn power_series(coeffs: &[f64], x: f64) -> (f64, f64) {
    coeffs.iter().enumerate().fold((0.0, 0.0), |(v, dv), (k, a)| {
        let p = (k + 2) as i32;
        (v + a * x.powi(p), dv + a * p as f64 * x.powi(p - 1))
    })
}
