//! Run configuration: one JSON document describing the system, the
//! Hamiltonian, `γ` and the solver, scan and audit settings.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audit::AuditConfig;
use crate::error::{Error, Result};
use crate::hamiltonian::{Builtin, GammaKind, GammaSpec, HamiltonianBody, HamiltonianSpec};
use crate::saddle::SolverOptions;
use crate::scan::ScanConfig;
use crate::spectral::SystemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(rename = "T", default = "default_period")]
    pub period: f64,
    #[serde(rename = "N", default = "default_half_dim")]
    pub half_dim: usize,
}

fn default_period() -> f64 {
    4.0 * PI
}

fn default_half_dim() -> usize {
    1
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            period: default_period(),
            half_dim: default_half_dim(),
        }
    }
}

/// Accepted spellings of the Hamiltonian: a builtin name such as
/// `"EXAMPLE_4_1"`, a tagged builtin object, or `{"expression": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HamiltonianConfig {
    Name(String),
    Expression {
        expression: String,
        #[serde(default)]
        reversed: bool,
    },
    Builtin {
        #[serde(flatten)]
        builtin: Builtin,
        #[serde(default)]
        reversed: bool,
    },
}

impl Default for HamiltonianConfig {
    fn default() -> Self {
        Self::Builtin {
            builtin: Builtin::Example41,
            reversed: false,
        }
    }
}

impl HamiltonianConfig {
    pub fn build(&self, system: SystemSpec) -> Result<HamiltonianSpec> {
        let (h, reversed) = match self {
            Self::Name(name) => {
                let b: Builtin = serde_json::from_value(serde_json::json!({ "builtin": name }))
                    .map_err(|_| Error::Config(format!("unknown builtin Hamiltonian `{name}`")))?;
                (HamiltonianSpec::builtin(system, b), false)
            }
            Self::Expression {
                expression,
                reversed,
            } => (HamiltonianSpec::expression(system, expression)?, *reversed),
            Self::Builtin { builtin, reversed } => (HamiltonianSpec::builtin(system, *builtin), *reversed),
        };
        Ok(if reversed { h.time_reverse() } else { h })
    }

    /// Canonical object form of a built Hamiltonian.
    pub fn resolved(h: &HamiltonianSpec) -> Self {
        match &h.body {
            HamiltonianBody::Builtin(b) => Self::Builtin {
                builtin: *b,
                reversed: h.reversed,
            },
            HamiltonianBody::Expression(e) => Self::Expression {
                expression: e.text.clone(),
                reversed: h.reversed,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaConfig {
    Name(String),
    Spec(GammaFields),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaFields {
    /// `LOG_SQRT`, `POWER` or `EXPRESSION`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
}

impl Default for GammaConfig {
    fn default() -> Self {
        Self::Name("LOG_SQRT".into())
    }
}

impl GammaConfig {
    pub fn build(&self) -> Result<GammaSpec> {
        let fields = match self {
            Self::Name(n) => GammaFields {
                kind: n.clone(),
                ..Default::default()
            },
            Self::Spec(f) => f.clone(),
        };
        let mut g = match fields.kind.as_str() {
            "LOG_SQRT" => GammaSpec::log_sqrt(),
            "POWER" => {
                let p = fields
                    .power
                    .ok_or_else(|| Error::Config("POWER gamma needs `power`".into()))?;
                if !(0.0..1.0).contains(&p) {
                    return Err(Error::Config(format!("POWER exponent must lie in [0, 1), got {p}")));
                }
                GammaSpec::power(p)
            }
            "EXPRESSION" => GammaSpec::expression(
                fields
                    .expression
                    .as_deref()
                    .ok_or_else(|| Error::Config("EXPRESSION gamma needs `expression`".into()))?,
            )?,
            other => return Err(Error::Config(format!("unknown gamma kind `{other}`"))),
        };
        g.a = fields.a.unwrap_or(g.a);
        g.b = fields.b.unwrap_or(g.b);
        g.alpha = fields.alpha.unwrap_or(g.alpha);
        g.c = fields.c.unwrap_or(g.c);
        g.c0 = fields.c0.or(g.c0);
        Ok(g)
    }

    pub fn resolved(g: &GammaSpec) -> Self {
        let (kind, expression, power) = match &g.kind {
            GammaKind::LogSqrt => ("LOG_SQRT", None, None),
            GammaKind::Power(p) => ("POWER", None, Some(*p)),
            GammaKind::Expression(e) => ("EXPRESSION", Some(e.text.clone()), None),
        };
        Self::Spec(GammaFields {
            kind: kind.into(),
            expression,
            power,
            a: Some(g.a),
            b: Some(g.b),
            alpha: Some(g.alpha),
            c: Some(g.c),
            c0: g.c0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub hamiltonian: HamiltonianConfig,
    pub gamma: GammaConfig,
    pub solver: SolverOptions,
    pub scan: ScanConfig,
    pub audit: AuditConfig,
}

/// A validated configuration with its built objects.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub system: SystemSpec,
    pub hamiltonian: HamiltonianSpec,
    pub gamma: GammaSpec,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Builds and validates everything; the returned config has every
    /// field spelled out.
    pub fn resolve(&self) -> Result<Resolved> {
        let system = SystemSpec::new(self.system.period, self.system.half_dim)?;
        let hamiltonian = self.hamiltonian.build(system)?;
        let gamma = self.gamma.build()?;
        self.solver.validate()?;
        self.audit.validate()?;
        let mut scan = self.scan.clone();
        scan.solver = self.solver.clone();
        scan.validate()?;
        let config = RunConfig {
            system: self.system,
            hamiltonian: HamiltonianConfig::resolved(&hamiltonian),
            gamma: GammaConfig::resolved(&gamma),
            solver: self.solver.clone(),
            scan,
            audit: self.audit.clone(),
        };
        Ok(Resolved {
            config,
            system,
            hamiltonian,
            gamma,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}
