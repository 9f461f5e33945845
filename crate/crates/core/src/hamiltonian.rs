//! Hamiltonians `H(t, x)` and control functions `γ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dual::{self, Dual, Scalar};
use crate::error::{Error, Result};
use crate::expr::{parse_expression, theta_halfsine, ParsedExpr};
use crate::quadrature::integrate_adaptive;
use crate::spectral::SystemSpec;

/// Closed-form Hamiltonians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builtin", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Builtin {
    /// `θ(t)·ln^{3/2}(1+|x|²)` with the half-sine profile `θ`.
    #[serde(rename = "EXAMPLE_3_1")]
    Example31,
    /// `(3/2 + sin(2πt/T))·ln^{5/2}(1+|x|²)`.
    #[serde(rename = "EXAMPLE_4_1")]
    Example41,
    /// `(λ/2)|x|²`.
    Quadratic { lambda: f64 },
    /// `h0`.
    Constant { h0: f64 },
}

impl Builtin {
    fn eval<S: Scalar>(&self, t: f64, period: f64, x: &[S]) -> S {
        let r2 = || x.iter().fold(S::from_f64(0.0), |acc, &v| acc + v * v);
        match *self {
            Builtin::Example31 => {
                let th = theta_halfsine(t, period);
                (S::from_f64(1.0) + r2()).ln().powf(1.5).scale(th)
            }
            Builtin::Example41 => {
                let a = 1.5 + (2.0 * PI * t / period).sin();
                (S::from_f64(1.0) + r2()).ln().powf(2.5).scale(a)
            }
            Builtin::Quadratic { lambda } => r2().scale(0.5 * lambda),
            Builtin::Constant { h0 } => S::from_f64(h0),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Builtin::Example31 => "EXAMPLE_3_1".into(),
            Builtin::Example41 => "EXAMPLE_4_1".into(),
            Builtin::Quadratic { lambda } => format!("QUADRATIC({lambda})"),
            Builtin::Constant { h0 } => format!("CONSTANT({h0})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianBody {
    Builtin(Builtin),
    Expression(ParsedExpr),
}

/// A `T`-periodic Hamiltonian on `ℝ^{2N}`.
///
/// `reversed` marks the transform `H̃(t, x) = −H(−t, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub system: SystemSpec,
    pub body: HamiltonianBody,
    pub reversed: bool,
}

impl HamiltonianSpec {
    pub fn builtin(system: SystemSpec, b: Builtin) -> Self {
        Self {
            system,
            body: HamiltonianBody::Builtin(b),
            reversed: false,
        }
    }

    pub fn example_3_1(system: SystemSpec) -> Self {
        Self::builtin(system, Builtin::Example31)
    }

    pub fn example_4_1(system: SystemSpec) -> Self {
        Self::builtin(system, Builtin::Example41)
    }

    pub fn quadratic(system: SystemSpec, lambda: f64) -> Self {
        Self::builtin(system, Builtin::Quadratic { lambda })
    }

    pub fn constant(system: SystemSpec, h0: f64) -> Self {
        Self::builtin(system, Builtin::Constant { h0 })
    }

    /// Parses and validates an expression Hamiltonian.
    pub fn expression(system: SystemSpec, text: &str) -> Result<Self> {
        let e = parse_expression(text)?;
        e.validate(system.state_dim())?;
        Ok(Self {
            system,
            body: HamiltonianBody::Expression(e),
            reversed: false,
        })
    }

    pub fn period(&self) -> f64 {
        self.system.period
    }

    pub fn describe(&self) -> String {
        let base = match &self.body {
            HamiltonianBody::Builtin(b) => b.name(),
            HamiltonianBody::Expression(e) => e.text.clone(),
        };
        if self.reversed {
            format!("reverse[{base}]")
        } else {
            base
        }
    }

    /// Depends on `x` only through `|x|²`, hence commutes with `exp(φJ)`.
    pub fn is_radial(&self) -> bool {
        match &self.body {
            HamiltonianBody::Builtin(_) => true,
            HamiltonianBody::Expression(e) => e.root.is_radial(),
        }
    }

    pub fn is_autonomous(&self) -> bool {
        match &self.body {
            HamiltonianBody::Builtin(b) => {
                matches!(b, Builtin::Quadratic { .. } | Builtin::Constant { .. })
            }
            HamiltonianBody::Expression(e) => !e.root.depends_on_time(),
        }
    }

    /// Identically zero (the fully degenerate case).
    pub fn is_zero(&self) -> bool {
        match &self.body {
            HamiltonianBody::Builtin(Builtin::Constant { .. }) => true,
            HamiltonianBody::Builtin(Builtin::Quadratic { lambda }) => *lambda == 0.0,
            HamiltonianBody::Builtin(_) => false,
            HamiltonianBody::Expression(e) => !e.root.depends_on_state(),
        }
    }

    /// `H̃(t, x) = −H(−t, x)`; an involution.
    pub fn time_reverse(&self) -> Self {
        let mut out = self.clone();
        match &mut out.body {
            HamiltonianBody::Builtin(Builtin::Constant { h0 }) => *h0 = -*h0,
            HamiltonianBody::Builtin(Builtin::Quadratic { lambda }) => *lambda = -*lambda,
            _ => out.reversed = !out.reversed,
        }
        out
    }

    fn eval_generic<S: Scalar>(&self, t: f64, x: &[S]) -> Result<S> {
        let period = self.period();
        let (tau, sign) = if self.reversed {
            ((-t).rem_euclid(period), -1.0)
        } else {
            (t.rem_euclid(period), 1.0)
        };
        let v = match &self.body {
            HamiltonianBody::Builtin(b) => b.eval(tau, period, x),
            HamiltonianBody::Expression(e) => e
                .root
                .eval(tau, period, x)
                .map_err(|message| eval_error(t, x, message))?,
        };
        if !v.is_finite() {
            return Err(eval_error(t, x, "non-finite value or derivative".into()));
        }
        Ok(if sign < 0.0 { -v } else { v })
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.system.state_dim() {
            return Err(Error::Config(format!(
                "state has {} components, expected {}",
                x.len(),
                self.system.state_dim()
            )));
        }
        Ok(())
    }

    pub fn eval_h(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.eval_generic(t, x)
    }

    /// Exact gradient `H'(t, x)` by forward-mode duals.
    pub fn grad_h(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        if let HamiltonianBody::Builtin(Builtin::Quadratic { lambda }) = self.body {
            return Ok(x.iter().map(|v| lambda * v).collect());
        }
        dual::gradient(x, |xd: &[Dual<f64>]| self.eval_generic(t, xd))
    }

    /// Hessian `H''(t, x)` (row-major, `2N × 2N`) by nested duals.
    pub fn hessian_h(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        dual::hessian(x, |xd: &[Dual<Dual<f64>>]| self.eval_generic(t, xd))
    }
}

fn eval_error<S: Scalar>(t: f64, x: &[S], message: String) -> Error {
    Error::Evaluation {
        t,
        x: x.iter().map(|v| v.value()).collect(),
        message,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GammaKind {
    /// `ln^{1/2}(1 + t²)`.
    LogSqrt,
    /// `t^α`.
    Power(f64),
    /// Expression in the variable `t`.
    Expression(ParsedExpr),
}

/// A control function `γ` with its claimed constants.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSpec {
    pub kind: GammaKind,
    /// Envelope `γ(t) ≤ a·t^α + b`.
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    /// Quasi-subadditivity `γ(s+t) ≤ c(γ(s) + γ(t))`.
    pub c: f64,
    pub c0: Option<f64>,
}

impl GammaSpec {
    pub fn log_sqrt() -> Self {
        Self {
            kind: GammaKind::LogSqrt,
            a: 2f64.sqrt(),
            b: 1.0,
            alpha: 0.5,
            c: 2f64.sqrt(),
            c0: None,
        }
    }

    pub fn power(alpha: f64) -> Self {
        Self {
            kind: GammaKind::Power(alpha),
            a: 1.0,
            b: 0.0,
            alpha,
            c: 1.0,
            c0: None,
        }
    }

    pub fn expression(text: &str) -> Result<Self> {
        let e = parse_expression(text)?;
        if e.root.depends_on_state() {
            return Err(Error::Config(
                "gamma expressions may only use the variable t".into(),
            ));
        }
        Ok(Self {
            kind: GammaKind::Expression(e),
            a: 1.0,
            b: 0.0,
            alpha: 0.5,
            c: 1.0,
            c0: None,
        })
    }

    pub fn with_envelope(mut self, a: f64, b: f64, alpha: f64) -> Self {
        self.a = a;
        self.b = b;
        self.alpha = alpha;
        self
    }

    pub fn with_subadditivity(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            GammaKind::LogSqrt => "LOG_SQRT".into(),
            GammaKind::Power(a) => format!("POWER({a})"),
            GammaKind::Expression(e) => e.text.clone(),
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let v = match &self.kind {
            GammaKind::LogSqrt => (t * t).ln_1p().sqrt(),
            GammaKind::Power(a) => {
                if *a == 0.0 {
                    1.0
                } else {
                    t.powf(*a)
                }
            }
            GammaKind::Expression(e) => e
                .root
                .eval::<f64>(t, 1.0, &[])
                .map_err(|message| Error::Evaluation {
                    t,
                    x: vec![],
                    message,
                })?,
        };
        if !v.is_finite() {
            return Err(Error::Evaluation {
                t,
                x: vec![],
                message: "gamma is not finite".into(),
            });
        }
        Ok(v)
    }
}

/// `γ(t)`.
pub fn gamma_eval(gamma: &GammaSpec, t: f64) -> Result<f64> {
    gamma.eval(t)
}

/// `F_c(r) = (1/γ²(r))·[∫₁^r γ²(u)/u du − c·ln r]`.
///
/// The integral is taken in the variable `v = ln u` by adaptive
/// Gauss–Kronrod at relative tolerance 1e−8.
pub fn gamma_iv_functional(gamma: &GammaSpec, c: f64, r: f64) -> Result<f64> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::Config(format!("F_c needs r ≥ 1, got {r}")));
    }
    let g_r = gamma.eval(r)?;
    if g_r == 0.0 {
        return Err(Error::Evaluation {
            t: r,
            x: vec![],
            message: "gamma vanishes; F_c is undefined".into(),
        });
    }
    let mut failure = None;
    let lr = r.ln();
    let out = integrate_adaptive(
        |v| match gamma.eval(v.exp()) {
            Ok(g) => g * g,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        0.0,
        lr,
        1e-8,
        1e-300,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if !out.converged {
        return Err(Error::Evaluation {
            t: r,
            x: vec![],
            message: format!("quadrature did not converge (error estimate {})", out.error),
        });
    }
    Ok((out.value - c * lr) / (g_r * g_r))
}
