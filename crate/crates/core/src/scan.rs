//! Sweeps over the subharmonic index `k` with orbit verification.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSpec;
use crate::saddle::{solve, SaddleResult, SolveStatus, SolverOptions};
use crate::spectral::{apply_j, rescale_to_long_period, sup_norm, time_shift, SpectralLoop};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub k_values: Vec<u32>,
    pub solver: SolverOptions,
    /// Relative threshold for significant Fourier modes.
    pub period_tol: f64,
    /// Classical RK4 steps per base period `T`.
    pub closure_steps: usize,
    /// Cold-start every `k` in parallel instead of warm-starting serially.
    pub parallel: bool,
    /// Fresh-perturbation retries when a prime `k` lands on a `T`-periodic orbit.
    pub max_restarts: u32,
    /// Records with a larger closure error are demoted to non-converged.
    pub closure_limit: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            k_values: (1..=6).collect(),
            solver: SolverOptions::default(),
            period_tol: 1e-8,
            closure_steps: 4096,
            parallel: false,
            max_restarts: 3,
            closure_limit: 1e-4,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() {
            return Err(Error::Config("k range is empty".into()));
        }
        if self.k_values.contains(&0) {
            return Err(Error::Config("k values must be positive".into()));
        }
        if self.k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("k values must be strictly ascending".into()));
        }
        if self.closure_steps == 0 {
            return Err(Error::Config("closure_steps must be positive".into()));
        }
        self.solver.validate()
    }

    /// Mode significance threshold, never below the Newton noise floor.
    pub fn mode_tol(&self) -> f64 {
        self.period_tol.max(10.0 * self.solver.newton_tol)
    }
}

/// Primes `<= p`.
pub fn primes_up_to(p: u32) -> Vec<u32> {
    (2..=p)
        .filter(|&n| (2..).take_while(|d| d * d <= n).all(|d| n % d != 0))
        .collect()
}

pub fn is_prime(n: u32) -> bool {
    n >= 2 && primes_up_to(n).last() == Some(&n)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Minimal period multiple `r` of a loop `x` on the base period `kT`, from
/// the gcd of `k` with its significant nonzero modes. `0` means constant.
pub fn minimal_period(x: &SpectralLoop, k: u32, tol: f64) -> u32 {
    let g = x
        .significant_modes(tol)
        .into_iter()
        .filter(|&m| m != 0)
        .fold(0u64, |acc, m| gcd(acc, m.unsigned_abs()));
    if g == 0 {
        return 0;
    }
    (k as u64 / gcd(k as u64, g)) as u32
}

/// Shift tolerance matching the mode threshold `tol`.
pub fn shift_tolerance(x: &SpectralLoop, tol: f64) -> f64 {
    let scale = 1.0 + x.h_half();
    2.0 * (2 * x.n_max() + 1) as f64 * tol * scale + 1e-12 * scale
}

/// Minimal period multiple by the shift test: the smallest divisor `r` of
/// `k` with `sup|x(t + rT) − x(t)| <= delta`. `0` means constant.
pub fn minimal_period_shift(x: &SpectralLoop, k: u32, delta: f64) -> u32 {
    let mut centered = x.clone();
    centered.mode_mut(0).iter_mut().for_each(|c| *c = 0.0);
    if sup_norm(&centered) <= delta {
        return 0;
    }
    let base = x.period() / k as f64;
    (1..=k)
        .filter(|r| k.is_multiple_of(*r))
        .find(|&r| sup_norm(&time_shift(x, r as f64 * base).sub(x)) <= delta)
        .unwrap_or(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureReport {
    /// `|x_num(kT) − x(0)| / (1 + sup|x|)`.
    pub closure_error: f64,
    /// Largest `|x_num(t_i) − x(t_i)|` over 64 checkpoints.
    pub max_deviation: f64,
    pub failed: bool,
}

fn rk4_field(h: &HamiltonianSpec, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    Ok(apply_j(&h.grad_h(t, x)?))
}

/// Integrates `ẋ = J H'(t, x)` from `x(0)` over `[0, kT]` with classical RK4
/// and compares with the spectral orbit `x` (base period `kT`).
pub fn closure_check(
    x: &SpectralLoop,
    h: &HamiltonianSpec,
    k: u32,
    steps_per_period: usize,
) -> Result<ClosureReport> {
    let total = steps_per_period * k as usize;
    let dt = x.period() / total as f64;
    let sup = sup_norm(x);
    let x0 = x.eval(0.0);
    let mut y = x0.clone();
    let mut dev: f64 = 0.0;
    let checkpoints = 64usize;
    let mut next_check = 1usize;
    let mut tmp = vec![0.0; y.len()];
    for i in 0..total {
        let t = i as f64 * dt;
        let k1 = rk4_field(h, t, &y)?;
        tmp.iter_mut().zip(&y).zip(&k1).for_each(|((o, a), b)| *o = a + 0.5 * dt * b);
        let k2 = rk4_field(h, t + 0.5 * dt, &tmp)?;
        tmp.iter_mut().zip(&y).zip(&k2).for_each(|((o, a), b)| *o = a + 0.5 * dt * b);
        let k3 = rk4_field(h, t + 0.5 * dt, &tmp)?;
        tmp.iter_mut().zip(&y).zip(&k3).for_each(|((o, a), b)| *o = a + dt * b);
        let k4 = rk4_field(h, t + dt, &tmp)?;
        for (j, v) in y.iter_mut().enumerate() {
            *v += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm <= 1e12) {
            return Ok(ClosureReport {
                closure_error: f64::INFINITY,
                max_deviation: f64::INFINITY,
                failed: true,
            });
        }
        while next_check <= checkpoints && (i + 1) * checkpoints >= next_check * total {
            let tc = (i + 1) as f64 * dt;
            let xs = x.eval(tc);
            let d = y.iter().zip(&xs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            dev = dev.max(d);
            next_check += 1;
        }
    }
    let gap = y.iter().zip(&x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(ClosureReport {
        closure_error: gap / (1.0 + sup),
        max_deviation: dev,
        failed: false,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRecord {
    pub k: u32,
    pub level_ck: f64,
    pub level_per_k: f64,
    pub sup_norm: f64,
    pub residual: f64,
    /// From mode-support arithmetic.
    pub minimal_r: u32,
    /// From the shift test.
    pub minimal_r_shift: u32,
    pub closure_error: f64,
    pub closure_deviation: f64,
    pub converged: bool,
    pub t_periodic: bool,
    pub status: SolveStatus,
    pub attempts: u32,
    pub flow_steps: usize,
    pub newton_steps: usize,
    pub note: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanSummary {
    pub all_converged: bool,
    /// `C_k/k` strictly increases along the converged records.
    pub level_per_k_increasing: bool,
    pub sup_norm_increasing: bool,
    pub first_level_per_k: Option<f64>,
    pub last_level_per_k: Option<f64>,
    /// Prime `k` whose orbit has minimal period exactly `kT`.
    pub primes_with_minimal_period_k: Vec<u32>,
    /// Prime `k` that only produced `T`-periodic orbits.
    pub t_periodic_primes: Vec<u32>,
    pub caveat: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanReport {
    pub records: Vec<ScanRecord>,
    pub summary: ScanSummary,
    #[serde(skip)]
    pub results: Vec<Option<SaddleResult>>,
}

pub const CSV_HEADER: &str = "k,C_k,C_k_over_k,sup_norm,residual,minimal_r,closure_error,converged";

impl ScanReport {
    /// CSV with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{}\n",
                r.k,
                r.level_ck,
                r.level_per_k,
                r.sup_norm,
                r.residual,
                r.minimal_r,
                r.closure_error,
                r.converged
            ));
        }
        out
    }
}

struct Attempt {
    result: SaddleResult,
    record: ScanRecord,
}

fn evaluate(h: &HamiltonianSpec, k: u32, cfg: &ScanConfig, mut result: SaddleResult, attempts: u32) -> Result<Attempt> {
    let u = result.loop_();
    let x = rescale_to_long_period(&u, k);
    let tol = cfg.mode_tol();
    let minimal_r = minimal_period(&x, k, tol);
    let minimal_r_shift = minimal_period_shift(&x, k, shift_tolerance(&x, tol));
    let closure = closure_check(&x, h, k, cfg.closure_steps)?;
    result.closure_error = Some(closure.closure_error);
    let mut converged = result.converged;
    let mut note = result.note.clone();
    if converged && !(closure.closure_error <= cfg.closure_limit) {
        converged = false;
        note = format!(
            "demoted: closure error {:.3e} exceeds {:.1e}; {note}",
            closure.closure_error, cfg.closure_limit
        );
    }
    if minimal_r != minimal_r_shift {
        note.push_str(&format!(
            "; gcd period {minimal_r} disagrees with shift period {minimal_r_shift}"
        ));
    }
    let level_per_k = result.level_ck / k as f64;
    let record = ScanRecord {
        k,
        level_ck: level_per_k * k as f64,
        level_per_k,
        sup_norm: sup_norm(&x),
        residual: result.residual,
        minimal_r,
        minimal_r_shift,
        closure_error: closure.closure_error,
        closure_deviation: closure.max_deviation,
        converged,
        t_periodic: minimal_r == 1,
        status: result.status,
        attempts,
        flow_steps: result.flow_steps,
        newton_steps: result.newton_steps,
        note,
    };
    result.level_ck = record.level_ck;
    Ok(Attempt { result, record })
}

fn failed_record(k: u32, e: &Error, attempts: u32) -> ScanRecord {
    ScanRecord {
        k,
        level_ck: f64::NAN,
        level_per_k: f64::NAN,
        sup_norm: f64::NAN,
        residual: f64::NAN,
        minimal_r: 0,
        minimal_r_shift: 0,
        closure_error: f64::NAN,
        closure_deviation: f64::NAN,
        converged: false,
        t_periodic: false,
        status: SolveStatus::NonConverged,
        attempts,
        flow_steps: 0,
        newton_steps: 0,
        note: format!("failed: {e}"),
    }
}

/// Solves one `k`, retrying a prime `k` that lands on a `T`-periodic orbit.
fn solve_one(
    h: &HamiltonianSpec,
    k: u32,
    cfg: &ScanConfig,
    warm: Option<&SpectralLoop>,
) -> (ScanRecord, Option<SaddleResult>) {
    let run = |opts: &SolverOptions, warm: Option<&SpectralLoop>, attempts: u32| {
        solve(h, k, opts, warm).and_then(|r| evaluate(h, k, cfg, r, attempts))
    };
    let mut attempts = 1;
    let mut current = run(&cfg.solver, warm, attempts);
    if warm.is_some() && !matches!(&current, Ok(a) if a.record.converged) {
        attempts += 1;
        current = run(&cfg.solver, None, attempts);
    }
    let needs_restart =
        |a: &Attempt| k > 1 && is_prime(k) && a.record.converged && a.record.minimal_r == 1;
    let mut restarts = 0;
    while restarts < cfg.max_restarts && matches!(&current, Ok(a) if needs_restart(a)) {
        restarts += 1;
        attempts += 1;
        let opts = SolverOptions {
            seed: cfg.solver.seed.wrapping_add(restarts as u64),
            ..cfg.solver.clone()
        };
        if let Ok(a) = run(&opts, None, attempts) {
            if a.record.converged {
                current = Ok(a);
            }
        }
    }
    match current {
        Ok(mut a) => {
            a.record.attempts = attempts;
            if needs_restart(&a) {
                a.record.note.push_str("; T-periodic branch after restarts");
            }
            (a.record, Some(a.result))
        }
        Err(e) => (failed_record(k, &e, attempts), None),
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.len() >= 2 && v.windows(2).all(|w| w[1] > w[0])
}

fn summarize(records: &[ScanRecord]) -> ScanSummary {
    let ok: Vec<&ScanRecord> = records.iter().filter(|r| r.converged).collect();
    let per_k: Vec<f64> = ok.iter().map(|r| r.level_per_k).collect();
    let sups: Vec<f64> = ok.iter().map(|r| r.sup_norm).collect();
    let primes = |pred: &dyn Fn(&ScanRecord) -> bool| {
        ok.iter()
            .filter(|r| r.k > 1 && is_prime(r.k) && pred(r))
            .map(|r| r.k)
            .collect()
    };
    ScanSummary {
        all_converged: ok.len() == records.len(),
        level_per_k_increasing: strictly_increasing(&per_k),
        sup_norm_increasing: strictly_increasing(&sups),
        first_level_per_k: per_k.first().copied(),
        last_level_per_k: per_k.last().copied(),
        primes_with_minimal_period_k: primes(&|r| r.minimal_r == r.k),
        t_periodic_primes: primes(&|r| r.minimal_r == 1),
        caveat: "finite-k trends on the branch the solver found; not a verification of the asymptotic limits".into(),
    }
}

/// Solves every `k` in `cfg.k_values` and assembles the report.
pub fn scan(h: &HamiltonianSpec, cfg: &ScanConfig) -> Result<ScanReport> {
    cfg.validate()?;
    let pairs: Vec<(ScanRecord, Option<SaddleResult>)> = if cfg.parallel {
        cfg.k_values
            .par_iter()
            .map(|&k| solve_one(h, k, cfg, None))
            .collect()
    } else {
        let mut out = Vec::with_capacity(cfg.k_values.len());
        let mut warm: Option<SpectralLoop> = None;
        for &k in &cfg.k_values {
            let (rec, res) = solve_one(h, k, cfg, warm.as_ref());
            if rec.converged {
                warm = res.as_ref().map(|r| r.loop_());
            }
            out.push((rec, res));
        }
        out
    };
    let (records, results): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok(ScanReport {
        summary: summarize(&records),
        records,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SystemSpec;
    use std::f64::consts::PI;

    #[test]
    fn primes() {
        assert_eq!(primes_up_to(20), vec![2, 3, 5, 7, 11, 13, 17, 19]);
        assert!(is_prime(5) && !is_prime(1) && !is_prime(9));
    }

    #[test]
    fn mode_support_arithmetic() {
        let s = SystemSpec::new(4.0, 1).unwrap();
        let x = SpectralLoop::single_mode(s, 6, 2, &[1.0, 0.0]);
        assert_eq!(minimal_period(&x, 4, 1e-8), 2);
        assert_eq!(minimal_period_shift(&x, 4, 1e-10), 2);
        let x = SpectralLoop::single_mode(s, 6, 3, &[0.0, 1.0]);
        assert_eq!(minimal_period(&x, 5, 1e-8), 5);
        let c = SpectralLoop::constant(s, 6, &[1.0, 2.0]);
        assert_eq!(minimal_period(&c, 7, 1e-8), 0);
        assert_eq!(minimal_period_shift(&c, 7, 1e-10), 0);
    }

    #[test]
    fn closure_of_exact_circle() {
        let s = SystemSpec::new(2.0 * PI, 1).unwrap();
        let h = HamiltonianSpec::quadratic(s, 1.0);
        let x = SpectralLoop::single_mode(s, 4, 1, &[1.0, 0.0]);
        let c = closure_check(&x, &h, 1, 4096).unwrap();
        assert!(c.closure_error <= 1e-8 && c.max_deviation <= 1e-8, "{c:?}");
        let eq = SpectralLoop::constant(s, 4, &[0.0, 0.0]);
        let c = closure_check(&eq, &h, 1, 256).unwrap();
        assert_eq!(c.closure_error, 0.0);
    }

    #[test]
    fn closure_reports_blow_up() {
        let s = SystemSpec::new(1.0, 1).unwrap();
        // q' = -q² escapes in finite time from q < 0
        let h = HamiltonianSpec::expression(s, "x1^2 * x2").unwrap();
        let x = SpectralLoop::constant(s, 2, &[-30.0, 1.0]);
        let c = closure_check(&x, &h, 1, 4096).unwrap();
        assert!(c.failed);
    }

    #[test]
    fn empty_scan_is_rejected() {
        let s = SystemSpec::new(1.0, 1).unwrap();
        let h = HamiltonianSpec::quadratic(s, 1.0);
        let cfg = ScanConfig {
            k_values: vec![],
            ..Default::default()
        };
        assert!(scan(&h, &cfg).is_err());
    }
}
