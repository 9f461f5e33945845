//! Sampled checks of the growth hypotheses on `H` and the control function `γ`.
//!
//! Sampling can refute a pointwise inequality but never prove an asymptotic
//! statement, so every entry carries a three-valued verdict.

use std::fmt::Write as _;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse_expression, ParsedExpr};
use crate::hamiltonian::{gamma_iv_functional, Builtin, GammaSpec, HamiltonianBody, HamiltonianSpec};
use crate::quadrature::CompositeRule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    /// Largest radius of the log-spaced grid on `[1, r_max]`.
    pub r_max: f64,
    pub radial_points: usize,
    pub directions: usize,
    pub time_points: usize,
    /// Envelope `p(t)` for (H1); expression in `t` or a number. `None` picks
    /// the builtin default.
    pub p: Option<String>,
    pub q: Option<String>,
    /// Subset `C` of `[0, T]` as intervals.
    pub subset_c: Option<Vec<[f64; 2]>>,
    pub lower_bound_f: String,
    /// Minimum value a diverging trend must reach at `r_max`.
    pub divergence_threshold: f64,
    /// Last trend increment must be at least this share of the largest one.
    pub persistence: f64,
    pub gamma_grid_points: usize,
    pub gamma_grid_min: f64,
    pub gamma_grid_max: f64,
    pub iv_constants: Vec<f64>,
    pub iv_r_max: f64,
    pub iv_points: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            r_max: 1e6,
            radial_points: 40,
            directions: 16,
            time_points: 128,
            p: None,
            q: None,
            subset_c: None,
            lower_bound_f: "0".into(),
            divergence_threshold: 0.0,
            persistence: 0.1,
            gamma_grid_points: 200,
            gamma_grid_min: 1e-4,
            gamma_grid_max: 1e8,
            iv_constants: vec![0.0, 1.0, 10.0, 100.0],
            iv_r_max: 1e150,
            iv_points: 40,
        }
    }
}

impl AuditConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_max > 1.0) || !(self.iv_r_max > 1.0) {
            return Err(Error::Config("r_max must exceed 1".into()));
        }
        if self.radial_points < 11 || self.iv_points < 11 {
            return Err(Error::Config("trend grids need at least 11 radii".into()));
        }
        if self.directions == 0 || self.time_points == 0 || self.gamma_grid_points == 0 {
            return Err(Error::Config("audit grids must be nonempty".into()));
        }
        if !(self.gamma_grid_min > 0.0 && self.gamma_grid_max > self.gamma_grid_min) {
            return Err(Error::Config("gamma grid bounds must satisfy 0 < min < max".into()));
        }
        Ok(())
    }
}

/// A `T`-periodic scalar function of time: an expression in `t`, optionally
/// evaluated at `−t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub expr: ParsedExpr,
    pub reflect: bool,
}

impl Envelope {
    pub fn parse(text: &str) -> Result<Self> {
        let expr = parse_expression(text)?;
        if expr.root.depends_on_state() {
            return Err(Error::Config(format!("`{text}` must depend on t only")));
        }
        Ok(Self {
            expr,
            reflect: false,
        })
    }

    pub fn eval(&self, t: f64, period: f64) -> Result<f64> {
        let s = if self.reflect { -t } else { t };
        self.expr
            .root
            .eval::<f64>(s.rem_euclid(period), period, &[])
            .map_err(|message| Error::Evaluation {
                t,
                x: vec![],
                message,
            })
    }

    pub fn describe(&self) -> String {
        if self.reflect {
            format!("({})(-t)", self.expr.text)
        } else {
            self.expr.text.clone()
        }
    }
}

/// Envelope and subset defaults, resolved against a Hamiltonian.
#[derive(Debug, Clone)]
pub struct ResolvedAudit {
    pub p: Option<Envelope>,
    pub q: Option<Envelope>,
    pub subset_c: Vec<[f64; 2]>,
    pub f: Envelope,
}

type Defaults = (Option<&'static str>, Option<&'static str>, Option<Vec<[f64; 2]>>);

fn builtin_defaults(h: &HamiltonianSpec) -> Defaults {
    let t = h.period();
    match &h.body {
        HamiltonianBody::Builtin(Builtin::Example31) => {
            (Some("1.5*theta_halfsine"), Some("0"), Some(vec![[0.0, 0.5 * t]]))
        }
        HamiltonianBody::Builtin(Builtin::Example41) => (Some("10"), Some("0"), None),
        HamiltonianBody::Builtin(Builtin::Constant { .. }) => (Some("0"), Some("0"), None),
        _ => (None, None, None),
    }
}

impl ResolvedAudit {
    pub fn new(h: &HamiltonianSpec, cfg: &AuditConfig) -> Result<Self> {
        let t = h.period();
        let (dp, dq, dc) = builtin_defaults(h);
        let env = |user: &Option<String>, default: Option<&str>| -> Result<Option<Envelope>> {
            match (user, default) {
                (Some(text), _) => Envelope::parse(text).map(Some),
                (None, Some(text)) => {
                    let mut e = Envelope::parse(text)?;
                    e.reflect = h.reversed;
                    Ok(Some(e))
                }
                (None, None) => Ok(None),
            }
        };
        let subset_c = match (&cfg.subset_c, dc) {
            (Some(c), _) => c.clone(),
            (None, Some(c)) if h.reversed => c.iter().map(|[a, b]| [t - b, t - a]).collect(),
            (None, Some(c)) => c,
            (None, None) => vec![[0.0, t]],
        };
        if subset_c.is_empty() || subset_c.iter().any(|[a, b]| !(a < b) || *a < 0.0 || *b > t) {
            return Err(Error::Config("subset_c must be nonempty intervals inside [0, T]".into()));
        }
        Ok(Self {
            p: env(&cfg.p, dp)?,
            q: env(&cfg.q, dq)?,
            subset_c,
            f: Envelope::parse(&cfg.lower_bound_f)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Supported,
    Violated,
    Inconclusive,
}

/// Which branch of an either/or hypothesis the data supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Divergence to `+∞`.
    #[serde(rename = "i")]
    I,
    /// Divergence to `−∞`.
    #[serde(rename = "ii")]
    II,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub x: Vec<f64>,
    /// Named quantities at the witness (e.g. `lhs`, `rhs`).
    pub values: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub r: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub condition: String,
    pub verdict: Verdict,
    pub variant: Option<Variant>,
    pub witness: Option<Witness>,
    /// Smallest slack of a pointwise inequality, or the last trend value.
    pub margin: Option<f64>,
    pub trend: Vec<TrendRow>,
    pub message: String,
}

impl AuditEntry {
    fn new(condition: &str, verdict: Verdict, message: impl Into<String>) -> Self {
        Self {
            condition: condition.into(),
            verdict,
            variant: None,
            witness: None,
            margin: None,
            trend: vec![],
            message: message.into(),
        }
    }

    fn inconclusive_from(condition: &str, e: &Error) -> Self {
        Self::new(condition, Verdict::Inconclusive, format!("evaluation failed: {e}"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub hamiltonian: String,
    pub gamma: String,
    pub grid: String,
    pub divergence_threshold: f64,
    pub caveat: String,
    pub entries: Vec<AuditEntry>,
}

impl AuditReport {
    pub fn entry(&self, condition: &str) -> Option<&AuditEntry> {
        self.entries.iter().find(|e| e.condition == condition)
    }

    pub fn any_violated(&self) -> bool {
        self.entries.iter().any(|e| e.verdict == Verdict::Violated)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "hamiltonian: {}", self.hamiltonian);
        let _ = writeln!(s, "gamma:       {}", self.gamma);
        let _ = writeln!(s, "grid:        {}", self.grid);
        let _ = writeln!(s, "divergence threshold: {:e}", self.divergence_threshold);
        let _ = writeln!(s, "note: {}", self.caveat);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<12} {:<13} {:<8} {:>14}  message", "condition", "verdict", "variant", "margin");
        for e in &self.entries {
            let variant = match e.variant {
                Some(Variant::I) => "(i)",
                Some(Variant::II) => "(ii)",
                None => "",
            };
            let margin = e.margin.map(|m| format!("{m:.6e}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{:<12} {:<13} {:<8} {:>14}  {}",
                e.condition,
                format!("{:?}", e.verdict).to_uppercase(),
                variant,
                margin,
                e.message
            );
            if let Some(w) = &e.witness {
                let vals: Vec<String> = w.values.iter().map(|(k, v)| format!("{k}={v:.6e}")).collect();
                let _ = writeln!(s, "{:<12} witness t={:.6e} x={:?} {}", "", w.t, w.x, vals.join(" "));
            }
        }
        s
    }

    /// Trend tables as CSV (`condition,r,value`).
    pub fn trends_csv(&self) -> String {
        let mut s = String::from("condition,r,value\n");
        for e in &self.entries {
            for row in &e.trend {
                let _ = writeln!(s, "{},{:.16e},{:.16e}", e.condition, row.r, row.value);
            }
        }
        s
    }
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Unit directions in `ℝ^dim`: equally spaced angles in the plane, the
/// coordinate axes plus seeded random directions otherwise.
pub fn directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    if dim == 2 {
        return (0..count)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    (0..count)
        .map(|i| {
            if i < dim {
                let mut v = vec![0.0; dim];
                v[i] = 1.0;
                v
            } else {
                let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / n).collect()
            }
        })
        .collect()
}

/// Divergence to `+∞` as seen on a finite table: strictly increasing over
/// the last ten radii, positive and above `threshold` at the end, and the
/// last increment still at least `persistence` times the largest one.
pub fn diverges_up(values: &[f64], threshold: f64, persistence: f64) -> bool {
    let n = values.len();
    if n < 11 || values.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let incs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let last = values[n - 1];
    let max_inc = incs.iter().copied().fold(f64::MIN, f64::max);
    incs[incs.len() - 10..].iter().all(|d| *d > 0.0)
        && last > 0.0
        && last >= threshold
        && incs[incs.len() - 1] >= persistence * max_inc
}

fn trend_rows(radii: &[f64], values: &[f64]) -> Vec<TrendRow> {
    radii
        .iter()
        .zip(values)
        .map(|(&r, &value)| TrendRow { r, value })
        .collect()
}

/// Picks variant (i) from the `lower` table or (ii) from the `upper` one.
fn trend_entry(
    condition: &str,
    radii: &[f64],
    lower: &[f64],
    upper: &[f64],
    cfg: &AuditConfig,
    what: &str,
) -> AuditEntry {
    let neg: Vec<f64> = upper.iter().map(|v| -v).collect();
    let (verdict, variant, table, msg) = if diverges_up(lower, cfg.divergence_threshold, cfg.persistence) {
        (Verdict::Supported, Some(Variant::I), lower, format!("{what} increases without sign of saturation"))
    } else if diverges_up(&neg, cfg.divergence_threshold, cfg.persistence) {
        (Verdict::Supported, Some(Variant::II), upper, format!("{what} decreases without sign of saturation"))
    } else {
        (Verdict::Inconclusive, None, lower, format!("{what} shows no divergence trend"))
    };
    AuditEntry {
        condition: condition.into(),
        verdict,
        variant,
        witness: None,
        margin: table.last().copied(),
        trend: trend_rows(radii, table),
        message: format!("{msg} (sampled; divergence is never proven)"),
    }
}

/// Shared sampling grids.
struct Grids {
    period: f64,
    times: Vec<f64>,
    radii: Vec<f64>,
    /// Radii for pointwise inequalities: small radii plus `radii`.
    all_radii: Vec<f64>,
    dirs: Vec<Vec<f64>>,
}

impl Grids {
    fn new(h: &HamiltonianSpec, cfg: &AuditConfig) -> Self {
        let period = h.period();
        let radii = log_grid(1.0, cfg.r_max, cfg.radial_points);
        let mut all_radii = vec![0.0, 1e-3, 1e-2, 0.1, 0.3, 0.6];
        all_radii.extend(&radii);
        Self {
            period,
            times: (0..cfg.time_points)
                .map(|j| period * j as f64 / cfg.time_points as f64)
                .collect(),
            radii,
            all_radii,
            dirs: directions(h.system.state_dim(), cfg.directions),
        }
    }

    fn point(&self, r: f64, d: usize) -> Vec<f64> {
        self.dirs[d].iter().map(|v| r * v).collect()
    }

    fn in_c(&self, t: f64, c: &[[f64; 2]]) -> bool {
        c.iter().any(|[a, b]| t > *a && t < *b)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

const REL_TOL: f64 = 1e-10;

/// `|H'(t,x)| <= p(t)γ(|x|) + q(t)` on the grid; with `bounded`, `p` is
/// replaced by its grid maximum (the variant with `p ∈ L^∞`).
fn check_envelope(
    h: &HamiltonianSpec,
    gamma: &GammaSpec,
    p: &Envelope,
    q: &Envelope,
    g: &Grids,
    bounded: bool,
    condition: &str,
) -> Result<AuditEntry> {
    let pv: Vec<f64> = g.times.iter().map(|&t| p.eval(t, g.period)).collect::<Result<_>>()?;
    let qv: Vec<f64> = g.times.iter().map(|&t| q.eval(t, g.period)).collect::<Result<_>>()?;
    if pv.iter().chain(&qv).any(|v| !(*v >= 0.0)) {
        return Ok(AuditEntry::new(
            condition,
            Verdict::Inconclusive,
            "envelopes p and q must be nonnegative",
        ));
    }
    let p_sup = pv.iter().copied().fold(0.0, f64::max);
    let mut worst: Option<(f64, Witness)> = None;
    let mut slack_min = f64::INFINITY;
    for (j, &t) in g.times.iter().enumerate() {
        let pj = if bounded { p_sup } else { pv[j] };
        for &r in &g.all_radii {
            let gr = gamma.eval(r)?;
            let rhs = pj * gr + qv[j];
            for d in 0..g.dirs.len() {
                let x = g.point(r, d);
                let lhs = norm(&h.grad_h(t, &x)?);
                let slack = rhs - lhs;
                slack_min = slack_min.min(slack);
                if lhs > rhs * (1.0 + REL_TOL) + 1e-300 {
                    let excess = (lhs - rhs) / (1.0 + rhs);
                    if worst.as_ref().is_none_or(|(e, _)| excess > *e) {
                        worst = Some((
                            excess,
                            Witness {
                                t,
                                x,
                                values: vec![("lhs".into(), lhs), ("rhs".into(), rhs)],
                            },
                        ));
                    }
                }
                if r == 0.0 {
                    break;
                }
            }
        }
    }
    let desc = format!(
        "|H'| <= p·γ + q with p = {}{}, q = {}",
        p.describe(),
        if bounded { format!(" (sup {p_sup:.6e})") } else { String::new() },
        q.describe()
    );
    Ok(match worst {
        Some((_, w)) => AuditEntry {
            witness: Some(w),
            margin: Some(slack_min),
            ..AuditEntry::new(condition, Verdict::Violated, format!("{desc} fails"))
        },
        None => AuditEntry {
            margin: Some(slack_min),
            ..AuditEntry::new(condition, Verdict::Supported, format!("{desc} holds on the grid"))
        },
    })
}

/// (H1) and its bounded-`p` variant (H1').
pub fn audit_h1(h: &HamiltonianSpec, gamma: &GammaSpec, cfg: &AuditConfig) -> Vec<AuditEntry> {
    let g = Grids::new(h, cfg);
    let resolved = match ResolvedAudit::new(h, cfg) {
        Ok(r) => r,
        Err(e) => {
            return vec![
                AuditEntry::inconclusive_from("H1", &e),
                AuditEntry::inconclusive_from("H1'", &e),
            ]
        }
    };
    let (Some(p), Some(q)) = (&resolved.p, &resolved.q) else {
        let msg = "no envelope p, q supplied";
        return vec![
            AuditEntry::new("H1", Verdict::Inconclusive, msg),
            AuditEntry::new("H1'", Verdict::Inconclusive, msg),
        ];
    };
    ["H1", "H1'"]
        .iter()
        .map(|c| {
            check_envelope(h, gamma, p, q, &g, *c == "H1'", c)
                .unwrap_or_else(|e| AuditEntry::inconclusive_from(c, &e))
        })
        .collect()
}

/// (H2): `(1/γ²(r))∫₀ᵀ H(t, rω) dt` as `r` grows.
pub fn audit_h2(h: &HamiltonianSpec, gamma: &GammaSpec, cfg: &AuditConfig) -> AuditEntry {
    let g = Grids::new(h, cfg);
    let rule = CompositeRule::period(g.period);
    let table = || -> Result<(Vec<f64>, Vec<f64>)> {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for &r in &g.radii {
            let g2 = gamma.eval(r)?.powi(2);
            let mut mn = f64::INFINITY;
            let mut mx = f64::NEG_INFINITY;
            for d in 0..g.dirs.len() {
                let x = g.point(r, d);
                let mut err = None;
                let integral = rule.integrate(|t| {
                    h.eval_h(t, &x).unwrap_or_else(|e| {
                        err.get_or_insert(e);
                        0.0
                    })
                });
                if let Some(e) = err {
                    return Err(e);
                }
                let v = integral / g2;
                mn = mn.min(v);
                mx = mx.max(v);
            }
            lo.push(mn);
            hi.push(mx);
        }
        Ok((lo, hi))
    };
    match table() {
        Ok((lo, hi)) => trend_entry("H2", &g.radii, &lo, &hi, cfg, "(1/γ²)∫H dt"),
        Err(e) => AuditEntry::inconclusive_from("H2", &e),
    }
}

/// (H3) and (H4): divergence of `H` and `H/γ²` on `t ∈ C`, plus the global
/// one-sided bound by `f`.
pub fn audit_h3_h4(h: &HamiltonianSpec, gamma: &GammaSpec, cfg: &AuditConfig) -> Vec<AuditEntry> {
    let g = Grids::new(h, cfg);
    let resolved = match ResolvedAudit::new(h, cfg) {
        Ok(r) => r,
        Err(e) => return vec![AuditEntry::inconclusive_from("H3", &e), AuditEntry::inconclusive_from("H4", &e)],
    };
    let c_times: Vec<f64> = g.times.iter().copied().filter(|&t| g.in_c(t, &resolved.subset_c)).collect();
    if c_times.is_empty() {
        let msg = "no time samples fall inside C";
        return vec![
            AuditEntry::new("H3", Verdict::Inconclusive, msg),
            AuditEntry::new("H4", Verdict::Inconclusive, msg),
        ];
    }
    let tables = || -> Result<[Vec<f64>; 4]> {
        let mut out: [Vec<f64>; 4] = Default::default();
        for &r in &g.radii {
            let g2 = gamma.eval(r)?.powi(2);
            let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
            for &t in &c_times {
                for d in 0..g.dirs.len() {
                    let v = h.eval_h(t, &g.point(r, d))?;
                    mn = mn.min(v);
                    mx = mx.max(v);
                }
            }
            out[0].push(mn);
            out[1].push(mx);
            out[2].push(mn / g2);
            out[3].push(mx / g2);
        }
        Ok(out)
    };
    let [lo, hi, lo4, hi4] = match tables() {
        Ok(t) => t,
        Err(e) => return vec![AuditEntry::inconclusive_from("H3", &e), AuditEntry::inconclusive_from("H4", &e)],
    };
    let c_desc = format!("C = {:?}", resolved.subset_c);
    let mut out = vec![
        trend_entry("H3", &g.radii, &lo, &hi, cfg, &format!("H on {c_desc}")),
        trend_entry("H4", &g.radii, &lo4, &hi4, cfg, &format!("H/γ² on {c_desc}")),
    ];
    for e in &mut out {
        let Some(variant) = e.variant else { continue };
        match bound_check(h, &resolved.f, &g, variant) {
            Ok(None) => e.message.push_str(&format!(
                "; H {} f = {} on the full grid",
                if variant == Variant::I { ">=" } else { "<=" },
                resolved.f.describe()
            )),
            Ok(Some(w)) => {
                e.verdict = Verdict::Violated;
                e.message = format!(
                    "one-sided bound by f = {} fails ({})",
                    resolved.f.describe(),
                    e.message
                );
                e.witness = Some(w);
            }
            Err(err) => *e = AuditEntry::inconclusive_from(&e.condition, &err),
        }
    }
    out
}

/// Worst violation of `H >= f` (variant i) or `H <= f` (variant ii).
fn bound_check(h: &HamiltonianSpec, f: &Envelope, g: &Grids, variant: Variant) -> Result<Option<Witness>> {
    let sign = if variant == Variant::I { 1.0 } else { -1.0 };
    let mut worst: Option<(f64, Witness)> = None;
    for &t in &g.times {
        let fv = f.eval(t, g.period)?;
        for &r in &g.all_radii {
            for d in 0..g.dirs.len() {
                let x = g.point(r, d);
                let hv = h.eval_h(t, &x)?;
                let gap = sign * (hv - fv);
                if gap < -REL_TOL * (1.0 + fv.abs()) && worst.as_ref().is_none_or(|(w, _)| gap < *w) {
                    worst = Some((
                        gap,
                        Witness {
                            t,
                            x,
                            values: vec![("H".into(), hv), ("f".into(), fv)],
                        },
                    ));
                }
                if r == 0.0 {
                    break;
                }
            }
        }
    }
    Ok(worst.map(|(_, w)| w))
}

/// (H5): `H'(t, rω)·rω / γ²(r)`, uniform in `t` through the grid extremum.
pub fn audit_h5(h: &HamiltonianSpec, gamma: &GammaSpec, cfg: &AuditConfig) -> AuditEntry {
    let g = Grids::new(h, cfg);
    let table = || -> Result<(Vec<f64>, Vec<f64>)> {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for &r in &g.radii {
            let g2 = gamma.eval(r)?.powi(2);
            let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
            for &t in &g.times {
                for d in 0..g.dirs.len() {
                    let x = g.point(r, d);
                    let v = h.grad_h(t, &x)?.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / g2;
                    mn = mn.min(v);
                    mx = mx.max(v);
                }
            }
            lo.push(mn);
            hi.push(mx);
        }
        Ok((lo, hi))
    };
    match table() {
        Ok((lo, hi)) => trend_entry("H5", &g.radii, &lo, &hi, cfg, "min_t H'·x/γ²"),
        Err(e) => AuditEntry::inconclusive_from("H5", &e),
    }
}

/// Properties (i)–(iv) of `γ` plus monotonicity.
pub fn audit_gamma(gamma: &GammaSpec, cfg: &AuditConfig) -> Vec<AuditEntry> {
    let pts = log_grid(cfg.gamma_grid_min, cfg.gamma_grid_max, cfg.gamma_grid_points);
    let mut grid = vec![0.0];
    grid.extend(&pts);
    let run = |name: &str, f: &dyn Fn() -> Result<AuditEntry>| {
        f().unwrap_or_else(|e| AuditEntry::inconclusive_from(name, &e))
    };
    let values = |ts: &[f64]| -> Result<Vec<f64>> { ts.iter().map(|&t| gamma.eval(t)).collect() };

    let monotone = run("gamma_monotone", &|| {
        let v = values(&grid)?;
        let bad = v
            .windows(2)
            .zip(grid.windows(2))
            .find(|(w, _)| w[1] < w[0] - REL_TOL * w[0].abs());
        Ok(match bad {
            Some((w, t)) => AuditEntry {
                witness: Some(Witness {
                    t: t[1],
                    x: vec![],
                    values: vec![("gamma(t_prev)".into(), w[0]), ("gamma(t)".into(), w[1]), ("t_prev".into(), t[0])],
                }),
                ..AuditEntry::new("gamma_monotone", Verdict::Violated, "γ decreases between consecutive samples")
            },
            None => AuditEntry::new("gamma_monotone", Verdict::Supported, "γ is nondecreasing on the grid"),
        })
    });

    let sub = run("gamma(i)", &|| {
        let v = values(&grid)?;
        let mut worst: Option<(f64, Witness)> = None;
        let mut slack = f64::INFINITY;
        for (i, &s) in grid.iter().enumerate() {
            for (j, &t) in grid.iter().enumerate().skip(i) {
                let lhs = gamma.eval(s + t)?;
                let rhs = gamma.c * (v[i] + v[j]);
                slack = slack.min(rhs - lhs);
                if lhs > rhs * (1.0 + REL_TOL) && worst.as_ref().is_none_or(|(e, _)| lhs - rhs > *e) {
                    worst = Some((
                        lhs - rhs,
                        Witness {
                            t: s,
                            x: vec![t],
                            values: vec![("gamma(s+t)".into(), lhs), ("c(gamma(s)+gamma(t))".into(), rhs)],
                        },
                    ));
                }
            }
        }
        let msg = format!("γ(s+t) <= {}·(γ(s)+γ(t))", gamma.c);
        Ok(match worst {
            Some((_, w)) => AuditEntry {
                witness: Some(w),
                margin: Some(slack),
                ..AuditEntry::new("gamma(i)", Verdict::Violated, format!("{msg} fails (witness: s = t, t = x[0])"))
            },
            None => AuditEntry {
                margin: Some(slack),
                ..AuditEntry::new("gamma(i)", Verdict::Supported, format!("{msg} on the grid"))
            },
        })
    });

    let env = run("gamma(ii)", &|| {
        let v = values(&grid)?;
        let mut worst: Option<(f64, Witness)> = None;
        let mut slack = f64::INFINITY;
        for (&t, &gt) in grid.iter().zip(&v) {
            let rhs = gamma.a * t.powf(gamma.alpha) + gamma.b;
            slack = slack.min((rhs - gt).min(gt));
            let bad = gt < 0.0 || gt > rhs * (1.0 + REL_TOL);
            if bad && worst.as_ref().is_none_or(|(e, _)| gt - rhs > *e) {
                worst = Some((
                    gt - rhs,
                    Witness {
                        t,
                        x: vec![],
                        values: vec![("gamma".into(), gt), ("a t^alpha + b".into(), rhs)],
                    },
                ));
            }
        }
        let msg = format!("0 <= γ(t) <= {}·t^{} + {}", gamma.a, gamma.alpha, gamma.b);
        let alpha_ok = (0.0..1.0).contains(&gamma.alpha);
        Ok(match worst {
            Some((_, w)) => AuditEntry {
                witness: Some(w),
                margin: Some(slack),
                ..AuditEntry::new("gamma(ii)", Verdict::Violated, format!("{msg} fails"))
            },
            None if !alpha_ok => AuditEntry::new(
                "gamma(ii)",
                Verdict::Inconclusive,
                format!("{msg} holds but α = {} is outside [0, 1)", gamma.alpha),
            ),
            None => AuditEntry {
                margin: Some(slack),
                ..AuditEntry::new("gamma(ii)", Verdict::Supported, format!("{msg} on the grid"))
            },
        })
    });

    let growth = run("gamma(iii)", &|| {
        let radii = log_grid(1.0, cfg.gamma_grid_max, cfg.radial_points);
        let v = values(&radii)?;
        let up = diverges_up(&v, cfg.divergence_threshold, cfg.persistence);
        Ok(AuditEntry {
            margin: v.last().copied(),
            trend: trend_rows(&radii, &v),
            ..AuditEntry::new(
                "gamma(iii)",
                if up { Verdict::Supported } else { Verdict::Inconclusive },
                if up { "γ(t) grows without sign of saturation" } else { "γ(t) shows no divergence trend" },
            )
        })
    });

    let iv = run("gamma(iv)", &|| {
        let radii = log_grid(10.0, cfg.iv_r_max, cfg.iv_points);
        let floor = gamma.c0.unwrap_or(0.0);
        let mut worst_last = f64::INFINITY;
        let mut trend = Vec::new();
        let mut ok = true;
        for &c in &cfg.iv_constants {
            let v: Vec<f64> = radii.iter().map(|&r| gamma_iv_functional(gamma, c, r)).collect::<Result<_>>()?;
            let tail = &v[v.len() - 10..];
            let nondecreasing = tail.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[0].abs());
            let last = *v.last().expect("nonempty");
            ok &= nondecreasing && last > floor && last > 0.0;
            if last < worst_last {
                worst_last = last;
                trend = trend_rows(&radii, &v);
            }
        }
        Ok(AuditEntry {
            margin: Some(worst_last),
            trend,
            ..AuditEntry::new(
                "gamma(iv)",
                if ok { Verdict::Supported } else { Verdict::Inconclusive },
                format!(
                    "F_c(r) for c in {:?} {} (smallest value at r = {:e}: {:.6e})",
                    cfg.iv_constants,
                    if ok { "is eventually nondecreasing and positive" } else { "is not eventually positive and nondecreasing" },
                    cfg.iv_r_max,
                    worst_last
                ),
            )
        })
    });

    vec![monotone, sub, env, growth, iv]
}

/// Every audit for `(H, γ)`.
pub fn audit(h: &HamiltonianSpec, gamma: &GammaSpec, cfg: &AuditConfig) -> Result<AuditReport> {
    cfg.validate()?;
    let mut entries = audit_h1(h, gamma, cfg);
    entries.push(audit_h2(h, gamma, cfg));
    entries.extend(audit_h3_h4(h, gamma, cfg));
    entries.push(audit_h5(h, gamma, cfg));
    entries.extend(audit_gamma(gamma, cfg));
    Ok(AuditReport {
        hamiltonian: h.describe(),
        gamma: gamma.describe(),
        grid: format!(
            "{} log radii on [1, {:e}], {} directions, {} times on [0, T), T = {}",
            cfg.radial_points, cfg.r_max, cfg.directions, cfg.time_points, h.period()
        ),
        divergence_threshold: cfg.divergence_threshold,
        caveat: "SUPPORTED means consistent with the required trend on the probed grid; sampling never proves a limit".into(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SystemSpec;
    use std::f64::consts::PI;

    fn sys() -> SystemSpec {
        SystemSpec::new(2.0 * PI, 1).unwrap()
    }

    #[test]
    fn trend_rule() {
        let grow: Vec<f64> = (1..=40).map(|i| (i as f64).sqrt()).collect();
        assert!(diverges_up(&grow, 0.0, 0.1));
        let saturate: Vec<f64> = (1..=40).map(|i| 1.0 - (-(i as f64)).exp()).collect();
        assert!(!diverges_up(&saturate, 0.0, 0.1));
        let fall: Vec<f64> = grow.iter().map(|v| -v).collect();
        assert!(!diverges_up(&fall, 0.0, 0.1));
    }

    #[test]
    fn quadratic_violates_h1_with_witness() {
        let h = HamiltonianSpec::quadratic(sys(), 1.0);
        let cfg = AuditConfig {
            p: Some("1".into()),
            q: Some("1".into()),
            r_max: 1e3,
            ..Default::default()
        };
        let e = &audit_h1(&h, &GammaSpec::log_sqrt(), &cfg)[0];
        assert_eq!(e.verdict, Verdict::Violated);
        let w = e.witness.as_ref().unwrap();
        let lhs = norm(&h.grad_h(w.t, &w.x).unwrap());
        let rhs = GammaSpec::log_sqrt().eval(norm(&w.x)).unwrap() + 1.0;
        assert!(lhs > rhs);
    }

    #[test]
    fn constant_hamiltonian() {
        let h = HamiltonianSpec::constant(sys(), 2.0);
        let g = GammaSpec::log_sqrt();
        let cfg = AuditConfig::default();
        assert_eq!(audit_h1(&h, &g, &cfg)[0].verdict, Verdict::Supported);
        assert_eq!(audit_h2(&h, &g, &cfg).verdict, Verdict::Inconclusive);
        assert_eq!(audit_h5(&h, &g, &cfg).verdict, Verdict::Inconclusive);
        let z = HamiltonianSpec::constant(sys(), 0.0);
        assert!(audit_h3_h4(&z, &g, &cfg).iter().all(|e| e.verdict == Verdict::Inconclusive));
    }

    #[test]
    fn power_gamma_properties() {
        let cfg = AuditConfig::default();
        let entries = audit_gamma(&GammaSpec::power(0.5), &cfg);
        assert!(entries.iter().all(|e| e.verdict == Verdict::Supported), "{entries:#?}");
        let bad = GammaSpec::power(0.99).with_envelope(2f64.sqrt(), 1.0, 0.5);
        let e = audit_gamma(&bad, &cfg).into_iter().find(|e| e.condition == "gamma(ii)").unwrap();
        assert_eq!(e.verdict, Verdict::Violated);
        let w = e.witness.unwrap();
        assert!(w.t.powf(0.99) > 2f64.sqrt() * w.t.sqrt() + 1.0);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1.0, 1e6, 40);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[39], 1e6);
        assert_eq!(directions(2, 16).len(), 16);
        assert!(directions(4, 16).iter().all(|d| (norm(d) - 1.0).abs() < 1e-14));
    }
}
