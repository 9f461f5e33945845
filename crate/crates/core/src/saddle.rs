//! Critical points of `Φ_k` by Galerkin continuation, a sign-flipped
//! preconditioned flow and Newton refinement.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::{precondition, ActionConfig, ActionEvaluator};
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSpec;
use crate::spectral::{rotate_in_place, LoopRecord, SpectralLoop, StateSeries, SystemSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub galerkin_schedule: Vec<usize>,
    pub flow_tol: f64,
    pub newton_tol: f64,
    pub max_flow_steps: usize,
    pub max_newton_steps: usize,
    pub initial_step: f64,
    pub seed: u64,
    pub perturbation_scale: f64,
    /// Quadrature points per stage; `None` picks `max(512, 4·(2n+1))` rounded up to a power of two.
    pub quad_points: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            galerkin_schedule: vec![8, 16, 32, 64],
            flow_tol: 1e-4,
            newton_tol: 1e-10,
            max_flow_steps: 20_000,
            max_newton_steps: 50,
            initial_step: 1e-2,
            seed: 0,
            perturbation_scale: 1e-2,
            quad_points: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.galerkin_schedule.is_empty() {
            return Err(Error::Config("galerkin_schedule is empty".into()));
        }
        if self.galerkin_schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "galerkin_schedule must be strictly increasing".into(),
            ));
        }
        for (name, v) in [
            ("flow_tol", self.flow_tol),
            ("newton_tol", self.newton_tol),
            ("initial_step", self.initial_step),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.perturbation_scale >= 0.0) {
            return Err(Error::Config("perturbation_scale must be nonnegative".into()));
        }
        Ok(())
    }

    fn action_config(&self, k: u32, n_max: usize) -> ActionConfig {
        let cfg = ActionConfig::new(k, n_max);
        match self.quad_points {
            Some(m) => cfg.with_quad_points(m),
            None => cfg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SolveStatus {
    Converged,
    NonConverged,
    /// The Jacobian is singular along constant loops.
    Degenerate,
}

/// Per-stage diagnostics of [`solve`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageReport {
    pub n_max: usize,
    pub flow_steps: usize,
    pub flow_merit: f64,
    pub flow_converged: bool,
    pub newton_steps: usize,
    pub residual: f64,
    pub level: f64,
    pub kernel_dim: usize,
    pub aliasing_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SaddleResult {
    pub k: u32,
    #[serde(rename = "loop")]
    pub loop_record: LoopRecord,
    #[serde(skip)]
    pub solution: Option<SpectralLoop>,
    pub level_ck: f64,
    pub residual: f64,
    pub converged: bool,
    pub status: SolveStatus,
    pub flow_steps: usize,
    pub newton_steps: usize,
    pub final_n_max: usize,
    /// Numerical kernel dimension of the final Newton Jacobian.
    pub kernel_dim: usize,
    pub closure_error: Option<f64>,
    pub stages: Vec<StageReport>,
    pub note: String,
}

impl SaddleResult {
    /// The solution loop (rebuilt from the record after deserialization).
    pub fn loop_(&self) -> SpectralLoop {
        match &self.solution {
            Some(u) => u.clone(),
            None => SpectralLoop::try_from(&self.loop_record).expect("validated record"),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut r: SaddleResult = serde_json::from_str(text)?;
        r.solution = Some(SpectralLoop::try_from(&r.loop_record)?);
        Ok(r)
    }
}

/// `e(t) = (1/√π)·exp((2π/T)tJ)e₁`, the unit element of `E⁻` on mode 1.
pub fn unit_e(system: SystemSpec, n_max: usize) -> SpectralLoop {
    let mut c = vec![0.0; system.state_dim()];
    c[0] = 1.0 / std::f64::consts::PI.sqrt();
    SpectralLoop::single_mode(system, n_max.max(1), 1, &c)
}

/// `√k·e + ζ` with `ζ ∈ E⁰ ⊕ E⁺` random and `h_half(ζ) = scale·√k`.
pub fn initial_guess(
    k: u32,
    system: SystemSpec,
    n_max: usize,
    seed: u64,
    perturbation_scale: f64,
) -> SpectralLoop {
    let sk = (k as f64).sqrt();
    let mut u = unit_e(system, n_max).scaled(sk);
    if perturbation_scale == 0.0 {
        return u;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut zeta = SpectralLoop::zeros(system, u.n_max());
    for m in -(u.n_max() as i64)..=0 {
        let w = 1.0 / (1.0 + m.abs() as f64).powi(2);
        zeta.mode_mut(m)
            .iter_mut()
            .for_each(|c| *c = w * rng.random_range(-1.0..1.0));
    }
    let norm = zeta.h_half();
    if norm > 0.0 {
        u.axpy(perturbation_scale * sk / norm, &zeta);
    }
    u
}

/// `(P⁻ − P⁺ − P⁰)` applied in place: negate modes `m <= 0`.
fn flip_signs(g: &mut SpectralLoop) {
    for m in -(g.n_max() as i64)..=0 {
        g.mode_mut(m).iter_mut().for_each(|c| *c = -*c);
    }
}

/// Flow direction `D(u)` and merit `‖precondition(∇Φ_k(u))‖`.
pub fn flow_direction(eval: &ActionEvaluator<'_>, u: &SpectralLoop) -> Result<(SpectralLoop, f64)> {
    let mut d = precondition(&eval.gradient(u)?);
    let merit = d.h_half();
    flip_signs(&mut d);
    Ok((d, merit))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FlowRegime {
    /// Error-controlled integration while the merit may still rise.
    Transit,
    /// Strictly merit-decreasing backtracking.
    Settling,
}

/// Merit and regime of every accepted flow step (index 0 is the start).
#[derive(Debug, Clone, Default, Serialize)]
pub struct FlowTrace {
    pub merit: Vec<f64>,
    pub regime: Vec<Option<FlowRegime>>,
}

#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub loop_: SpectralLoop,
    pub merit: f64,
    pub steps: usize,
    pub converged: bool,
    pub trace: FlowTrace,
}

const TRANSIT_TOL: f64 = 1e-3;
const SETTLE_RUN: usize = 5;
const MIN_STEP: f64 = 1e-12;
const MAX_STEP: f64 = 1e3;

fn nonfinite(steps: usize, merit: f64, u: &SpectralLoop) -> Error {
    Error::NonFinite {
        steps,
        merit,
        state: u.to_json(),
    }
}

/// Sign-flipped preconditioned flow: descent on `E⁰ ⊕ E⁺`, ascent on `E⁻`.
///
/// Runs an embedded Heun–Euler integration until the merit has fallen for
/// several consecutive steps below half its peak, then switches to plain
/// steps accepted only when the merit decreases.
pub fn flow_search(
    u0: &SpectralLoop,
    eval: &ActionEvaluator<'_>,
    opts: &SolverOptions,
) -> Result<FlowOutcome> {
    let mut u = u0.clone();
    let (mut d, mut merit) = flow_direction(eval, &u)?;
    let mut trace = FlowTrace {
        merit: vec![merit],
        regime: vec![None],
    };
    let mut h = opts.initial_step;
    let mut regime = FlowRegime::Transit;
    let mut peak = merit;
    let mut run = 0usize;
    let mut steps = 0usize;
    while merit > opts.flow_tol && steps < opts.max_flow_steps {
        if !merit.is_finite() || !d.is_finite() {
            return Err(nonfinite(steps, merit, &u));
        }
        if h < MIN_STEP {
            break;
        }
        let accepted = match regime {
            FlowRegime::Transit => {
                let mut u1 = u.clone();
                u1.axpy(h, &d);
                let (d1, _) = match flow_direction(eval, &u1) {
                    Ok(v) => v,
                    Err(Error::Evaluation { .. }) => {
                        h *= 0.5;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let err = 0.5 * h * d1.sub(&d).h_half();
                let bound = TRANSIT_TOL * (1.0 + u.h_half());
                if !(err <= bound) {
                    h *= 0.5;
                    None
                } else {
                    let mut un = u.clone();
                    un.axpy(0.5 * h, &d);
                    un.axpy(0.5 * h, &d1);
                    let factor = if err == 0.0 {
                        2.0
                    } else {
                        (0.9 * (bound / err).sqrt()).clamp(0.5, 2.0)
                    };
                    h = (h * factor).min(MAX_STEP);
                    Some(un)
                }
            }
            FlowRegime::Settling => {
                let mut un = u.clone();
                un.axpy(h, &d);
                match flow_direction(eval, &un) {
                    Ok((_, m)) if m < merit => {
                        h = (2.0 * h).min(MAX_STEP);
                        Some(un)
                    }
                    Ok(_) | Err(Error::Evaluation { .. }) => {
                        h *= 0.5;
                        None
                    }
                    Err(e) => return Err(e),
                }
            }
        };
        let Some(un) = accepted else { continue };
        let (dn, mn) = flow_direction(eval, &un)?;
        steps += 1;
        if mn < merit {
            run += 1;
        } else {
            run = 0;
        }
        u = un;
        d = dn;
        merit = mn;
        peak = peak.max(merit);
        trace.merit.push(merit);
        trace.regime.push(Some(regime));
        if regime == FlowRegime::Transit && run >= SETTLE_RUN && merit < 0.5 * peak {
            regime = FlowRegime::Settling;
        }
    }
    if !merit.is_finite() || !u.is_finite() {
        return Err(nonfinite(steps, merit, &u));
    }
    Ok(FlowOutcome {
        converged: merit <= opts.flow_tol,
        loop_: u,
        merit,
        steps,
        trace,
    })
}

/// Jacobian of the projected residual `F_m = −(2π/T)m c_m + [k H'(kt, u)]_m`
/// with respect to the flat coefficient vector.
pub fn collocation_jacobian(eval: &ActionEvaluator<'_>, u: &SpectralLoop) -> Result<DMatrix<f64>> {
    let system = *u.system();
    let n = u.n_max() as i64;
    let d = system.state_dim();
    let size = u.coeffs().len();
    let hs = eval.hessian_samples(u)?;
    let tr = eval.transformer();
    let grid = *tr.grid();
    let w = system.omega();
    let mut jac = DMatrix::zeros(size, size);
    let mut col = StateSeries::zeros(grid.samples(), d);
    let mut e = vec![0.0; d];
    for m in -n..=n {
        for b in 0..d {
            for (j, hj) in hs.iter().enumerate() {
                e.iter_mut().for_each(|v| *v = 0.0);
                e[b] = 1.0;
                rotate_in_place(&mut e, w * m as f64 * grid.time(j));
                let p = col.point_mut(j);
                for (a, pa) in p.iter_mut().enumerate() {
                    *pa = (0..d).map(|c| hj[a * d + c] * e[c]).sum();
                }
            }
            let proj = tr.analyze(&col, u.n_max(), system)?;
            let ci = (m + n) as usize * d + b;
            for (ri, v) in proj.coeffs().iter().enumerate() {
                jac[(ri, ci)] = *v;
            }
            jac[(ci, ci)] -= w * m as f64;
        }
    }
    Ok(jac)
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub loop_: SpectralLoop,
    /// Grid residual `‖J u̇ + k H'‖_{L²}`.
    pub residual: f64,
    /// Projected residual after each accepted step (index 0 is the start).
    pub history: Vec<f64>,
    pub steps: usize,
    pub converged: bool,
    pub degenerate: bool,
    pub kernel_dim: usize,
}

fn projected_norm(g: &SpectralLoop) -> f64 {
    g.l2_dot(g).sqrt()
}

/// Damped Newton iteration on the spectral collocation system, solved in the
/// least-squares sense through an SVD.
pub fn newton_refine(
    u0: &SpectralLoop,
    eval: &ActionEvaluator<'_>,
    opts: &SolverOptions,
) -> Result<NewtonOutcome> {
    let mut u = u0.clone();
    let mut g = eval.gradient(&u)?;
    let mut r = projected_norm(&g);
    let mut history = vec![r];
    let mut steps = 0;
    let mut kernel_dim = 0;
    let mut grid_res = eval.residual_norm(&u)?;
    let d = u.system().state_dim();
    let n = u.n_max();
    for iter in 0..=opts.max_newton_steps {
        let jac = collocation_jacobian(eval, &u)?;
        let svd = jac.clone().svd(true, true);
        let smax = svd.singular_values.max();
        kernel_dim = svd
            .singular_values
            .iter()
            .filter(|s| **s <= 1e-8 * smax)
            .count();
        if iter == 0 {
            let block = jac.columns(n * d, d).clone_owned();
            let smin0 = block.svd(false, false).singular_values.min();
            if !(smin0 >= 1e-12 * smax) || smax == 0.0 {
                return Ok(NewtonOutcome {
                    residual: grid_res,
                    loop_: u,
                    history,
                    steps,
                    converged: false,
                    degenerate: true,
                    kernel_dim: kernel_dim.max(d),
                });
            }
        }
        if r <= 1e-2 * opts.newton_tol * (1.0 + u.h_half()) || iter == opts.max_newton_steps {
            break;
        }
        let rhs = DVector::from_iterator(g.coeffs().len(), g.coeffs().iter().map(|v| -v));
        let delta = svd
            .solve(&rhs, 1e-12 * smax)
            .map_err(|e| Error::Config(format!("linear solve failed: {e}")))?;
        let step = SpectralLoop::from_flat(*u.system(), n, delta.iter().copied().collect())
            .map_err(|_| nonfinite(steps, r, &u))?;
        let mut lambda = 1.0;
        let mut next = None;
        while lambda >= 1.0 / 1024.0 {
            let mut trial = u.clone();
            trial.axpy(lambda, &step);
            if let Ok(gt) = eval.gradient(&trial) {
                let rt = projected_norm(&gt);
                if rt < r {
                    next = Some((trial, gt, rt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((un, gn, rn)) = next else { break };
        let ratio = rn / r;
        u = un;
        g = gn;
        r = rn;
        steps += 1;
        history.push(r);
        grid_res = eval.residual_norm(&u)?;
        if grid_res <= opts.newton_tol * (1.0 + u.h_half()) && ratio > 0.5 {
            break;
        }
    }
    grid_res = eval.residual_norm(&u)?;
    Ok(NewtonOutcome {
        converged: grid_res <= opts.newton_tol * (1.0 + u.h_half()),
        residual: grid_res,
        loop_: u,
        history,
        steps,
        degenerate: false,
        kernel_dim,
    })
}

/// Galerkin continuation over `opts.galerkin_schedule`: flow then Newton at
/// each order, lifting each stage's result into the next.
pub fn solve(
    h: &HamiltonianSpec,
    k: u32,
    opts: &SolverOptions,
    warm_start: Option<&SpectralLoop>,
) -> Result<SaddleResult> {
    opts.validate()?;
    if k == 0 {
        return Err(Error::Config("k must be a positive integer".into()));
    }
    let first = opts.galerkin_schedule[0];
    let mut u = match warm_start {
        Some(w) => {
            if !w.system().same_as(&h.system) {
                return Err(Error::Config("warm start belongs to a different system".into()));
            }
            w.with_order(first)
        }
        None => initial_guess(k, h.system, first, opts.seed, opts.perturbation_scale),
    };
    let mut stages = Vec::new();
    let mut flow_steps = 0;
    let mut newton_steps = 0;
    let mut last = None;
    for &n in &opts.galerkin_schedule {
        u = u.with_order(n);
        let eval = ActionEvaluator::new(h, opts.action_config(k, n))?;
        let flow = flow_search(&u, &eval, opts)?;
        flow_steps += flow.steps;
        let newton = newton_refine(&flow.loop_, &eval, opts)?;
        newton_steps += newton.steps;
        let level = eval.value(&newton.loop_)?.total;
        let aliasing_ratio = eval.gradient_eval(&newton.loop_)?.aliasing_ratio;
        stages.push(StageReport {
            n_max: n,
            flow_steps: flow.steps,
            flow_merit: flow.merit,
            flow_converged: flow.converged,
            newton_steps: newton.steps,
            residual: newton.residual,
            level,
            kernel_dim: newton.kernel_dim,
            aliasing_ratio,
        });
        if newton.degenerate {
            let note = "DEGENERATE: the Jacobian is singular along constant loops".to_string();
            return Ok(assemble(
                k,
                newton.loop_,
                level,
                newton.residual,
                SolveStatus::Degenerate,
                (flow_steps, newton_steps, newton.kernel_dim),
                stages,
                note,
            ));
        }
        u = newton.loop_.clone();
        last = Some((newton, level));
    }
    let (newton, level) = last.expect("schedule is nonempty");
    let status = if newton.converged {
        SolveStatus::Converged
    } else {
        SolveStatus::NonConverged
    };
    let mut note = String::from(
        "critical point found by flow and Newton; whether it realizes the minimax level is not checked",
    );
    if let Some(s) = stages.last() {
        if s.aliasing_ratio > 1e-6 {
            note.push_str(&format!(
                "; nonlinear term energy above n_max is {:.2e} of the gradient",
                s.aliasing_ratio
            ));
        }
    }
    Ok(assemble(
        k,
        newton.loop_,
        level,
        newton.residual,
        status,
        (flow_steps, newton_steps, newton.kernel_dim),
        stages,
        note,
    ))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    k: u32,
    u: SpectralLoop,
    level: f64,
    residual: f64,
    status: SolveStatus,
    (flow_steps, newton_steps, kernel_dim): (usize, usize, usize),
    stages: Vec<StageReport>,
    note: String,
) -> SaddleResult {
    SaddleResult {
        k,
        loop_record: LoopRecord::from(&u),
        final_n_max: u.n_max(),
        solution: Some(u),
        level_ck: level,
        residual,
        converged: status == SolveStatus::Converged,
        status,
        flow_steps,
        newton_steps,
        kernel_dim,
        closure_error: None,
        stages,
        note,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sys(t: f64) -> SystemSpec {
        SystemSpec::new(t, 1).unwrap()
    }

    #[test]
    fn initial_guess_norms() {
        let s = sys(2.0 * PI);
        let e = initial_guess(1, s, 8, 0, 0.0);
        assert!((e.h_half() - 1.0).abs() < 1e-15);
        assert_eq!(e.significant_modes(1e-13), vec![1]);
        let e4 = initial_guess(4, s, 8, 0, 0.0);
        assert!((e4.h_half() - 2.0).abs() < 1e-15);
        let p = initial_guess(4, s, 8, 3, 1e-2);
        let zeta = p.sub(&e4);
        assert!((zeta.h_half() - 2e-2).abs() < 1e-15);
        assert!(zeta.modes().all(|(m, c)| m <= 0 || c.iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn flow_stays_at_critical_points() {
        let s = sys(2.0 * PI);
        let opts = SolverOptions::default();
        let q = HamiltonianSpec::quadratic(s, 1.0);
        let eval = ActionEvaluator::new(&q, ActionConfig::new(1, 8)).unwrap();
        let u0 = SpectralLoop::single_mode(s, 8, 1, &[1.0, 0.0]);
        let out = flow_search(&u0, &eval, &opts).unwrap();
        assert_eq!(out.steps, 0);
        assert_eq!(out.loop_, u0);
        let z = HamiltonianSpec::constant(s, 0.0);
        let eval = ActionEvaluator::new(&z, ActionConfig::new(1, 8)).unwrap();
        let c = SpectralLoop::constant(s, 8, &[0.5, -2.0]);
        let out = flow_search(&c, &eval, &opts).unwrap();
        assert_eq!(out.loop_, c);
    }

    #[test]
    fn sign_flipped_flow_contracts_to_the_saddle() {
        let s = sys(2.0 * PI);
        let z = HamiltonianSpec::constant(s, 0.0);
        let eval = ActionEvaluator::new(&z, ActionConfig::new(1, 4)).unwrap();
        let mut u = SpectralLoop::single_mode(s, 4, -1, &[1.0, 0.0]);
        u.mode_mut(1).copy_from_slice(&[0.0, 1.0]);
        let opts = SolverOptions {
            max_flow_steps: 50,
            ..Default::default()
        };
        let out = flow_search(&u, &eval, &opts).unwrap();
        assert!(out.trace.merit.windows(2).all(|w| w[1] < w[0]));
        assert!(out.loop_.mode_norm_sq(-1) < 1.0 && out.loop_.mode_norm_sq(1) < 1.0);
    }

    #[test]
    fn newton_on_quadratic() {
        let s = sys(2.0 * PI);
        let q = HamiltonianSpec::quadratic(s, 1.0);
        let eval = ActionEvaluator::new(&q, ActionConfig::new(1, 8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut u = SpectralLoop::single_mode(s, 8, 1, &[1.0, 0.5]);
        for c in u.coeffs_mut() {
            *c += 1e-3 * rng.random_range(-1.0..1.0);
        }
        let out = newton_refine(&u, &eval, &SolverOptions::default()).unwrap();
        assert!(out.converged && !out.degenerate);
        assert!(out.residual <= 1e-12, "{}", out.residual);
        assert!(out.steps <= 5);
        assert_eq!(out.kernel_dim, 2);
    }

    #[test]
    fn zero_hamiltonian_is_degenerate() {
        let s = sys(2.0 * PI);
        let z = HamiltonianSpec::constant(s, 0.0);
        let opts = SolverOptions {
            galerkin_schedule: vec![4],
            ..Default::default()
        };
        let r = solve(&z, 1, &opts, None).unwrap();
        assert_eq!(r.status, SolveStatus::Degenerate);
        assert!(!r.converged);
    }

    #[test]
    fn result_json_roundtrip() {
        let s = sys(2.0 * PI);
        let q = HamiltonianSpec::quadratic(s, 1.0);
        let opts = SolverOptions {
            galerkin_schedule: vec![4, 8],
            ..Default::default()
        };
        let r = solve(&q, 1, &opts, None).unwrap();
        assert!(r.converged);
        let back = SaddleResult::from_json(&r.to_json()).unwrap();
        assert_eq!(back.loop_(), r.loop_());
        assert_eq!(back.level_ck, r.level_ck);
    }
}
