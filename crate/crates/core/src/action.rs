//! The action `Φ_k(u) = Q(u) + k∫₀ᵀ H(kt, u(t)) dt` and its gradient.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSpec;
use crate::spectral::{quadratic_form, SpectralLoop, StateSeries, SystemSpec, TimeGrid, Transformer};

/// Quadrature grid size used when none is given.
pub fn default_quad_points(n_max: usize) -> usize {
    (4 * (2 * n_max + 1)).next_power_of_two().max(512)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ActionConfig {
    /// Subharmonic index.
    pub k: u32,
    pub quad_points: usize,
    pub n_max: usize,
}

impl ActionConfig {
    pub fn new(k: u32, n_max: usize) -> Self {
        Self {
            k,
            quad_points: default_quad_points(n_max),
            n_max,
        }
    }

    pub fn with_quad_points(mut self, m: usize) -> Self {
        self.quad_points = m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be a positive integer".into()));
        }
        let needed = 4 * (2 * self.n_max + 1);
        if self.quad_points < needed {
            return Err(Error::Config(format!(
                "quad_points = {} is below 4·(2·n_max+1) = {needed}",
                self.quad_points
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionValue {
    pub total: f64,
    pub quadratic_part: f64,
    pub potential_part: f64,
}

/// Gradient together with the share of the nonlinear term that the
/// truncation discards.
#[derive(Debug, Clone)]
pub struct GradientEval {
    pub gradient: SpectralLoop,
    /// Norm of `k·H'` above `n_max` relative to the norm of `k·H'`.
    pub aliasing_ratio: f64,
}

/// Evaluates `Φ_k` and friends for one Hamiltonian and configuration,
/// reusing the FFT plans.
#[derive(Debug, Clone)]
pub struct ActionEvaluator<'a> {
    h: &'a HamiltonianSpec,
    cfg: ActionConfig,
    tr: Transformer,
    /// `k·t_j mod T`, computed from integer indices.
    tau: Vec<f64>,
}

impl<'a> ActionEvaluator<'a> {
    pub fn new(h: &'a HamiltonianSpec, cfg: ActionConfig) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.quad_points;
        let period = h.period();
        let grid = TimeGrid::new(m, period)?;
        let k = cfg.k as usize;
        let tau = (0..m)
            .map(|j| ((k * j) % m) as f64 * period / m as f64)
            .collect();
        Ok(Self {
            h,
            cfg,
            tr: Transformer::new(grid),
            tau,
        })
    }

    pub fn config(&self) -> &ActionConfig {
        &self.cfg
    }

    pub fn hamiltonian(&self) -> &HamiltonianSpec {
        self.h
    }

    pub fn transformer(&self) -> &Transformer {
        &self.tr
    }

    /// Reduced Hamiltonian time at grid point `j`.
    pub fn tau(&self, j: usize) -> f64 {
        self.tau[j]
    }

    fn system(&self) -> SystemSpec {
        self.h.system
    }

    fn check(&self, u: &SpectralLoop) -> Result<()> {
        if !u.system().same_as(&self.h.system) {
            return Err(Error::Config(format!(
                "loop system (T = {}, N = {}) differs from the Hamiltonian's (T = {}, N = {})",
                u.period(),
                u.system().half_dim,
                self.h.period(),
                self.h.system.half_dim
            )));
        }
        if u.n_max() != self.cfg.n_max {
            return Err(Error::Config(format!(
                "loop has n_max = {}, configuration expects {}",
                u.n_max(),
                self.cfg.n_max
            )));
        }
        Ok(())
    }

    pub fn samples(&self, u: &SpectralLoop) -> Result<StateSeries> {
        self.check(u)?;
        self.tr.synthesize(u)
    }

    pub fn value(&self, u: &SpectralLoop) -> Result<ActionValue> {
        let s = self.samples(u)?;
        let mut sum = 0.0;
        for (j, x) in s.points().enumerate() {
            sum += self.h.eval_h(self.tau[j], x)?;
        }
        let m = self.cfg.quad_points as f64;
        let quadratic_part = quadratic_form(u);
        let potential_part = self.cfg.k as f64 * self.h.period() / m * sum;
        Ok(ActionValue {
            total: quadratic_part + potential_part,
            quadratic_part,
            potential_part,
        })
    }

    /// Samples of `k·H'(k t_j, u(t_j))`.
    pub fn force_samples(&self, samples: &StateSeries) -> Result<StateSeries> {
        let k = self.cfg.k as f64;
        let mut out = StateSeries::zeros(samples.len(), samples.dim());
        for (j, x) in samples.points().enumerate() {
            let g = self.h.grad_h(self.tau[j], x)?;
            for (o, v) in out.point_mut(j).iter_mut().zip(g) {
                *o = k * v;
            }
        }
        Ok(out)
    }

    /// Row-major `k·H''(k t_j, u(t_j))` at every grid point.
    pub fn hessian_samples(&self, u: &SpectralLoop) -> Result<Vec<Vec<f64>>> {
        let s = self.samples(u)?;
        let k = self.cfg.k as f64;
        s.points()
            .enumerate()
            .map(|(j, x)| {
                let mut h = self.h.hessian_h(self.tau[j], x)?;
                h.iter_mut().for_each(|v| *v *= k);
                Ok(h)
            })
            .collect()
    }

    pub fn gradient_eval(&self, u: &SpectralLoop) -> Result<GradientEval> {
        let s = self.samples(u)?;
        let f = self.force_samples(&s)?;
        let full_order = (self.cfg.quad_points - 1) / 2;
        let full = self.tr.analyze(&f, full_order, self.system())?;
        let n = self.cfg.n_max as i64;
        let mut g = full.with_order(self.cfg.n_max);
        let w = self.system().omega();
        for m in -n..=n {
            let (c, gm) = (u.mode(m).to_vec(), g.mode_mut(m));
            for (gi, ci) in gm.iter_mut().zip(c) {
                *gi -= w * m as f64 * ci;
            }
        }
        let dropped: f64 = full
            .modes()
            .filter(|(m, _)| m.abs() > n)
            .flat_map(|(_, c)| c.iter().map(|x| x * x))
            .sum();
        let total: f64 = full.coeffs().iter().map(|x| x * x).sum();
        let aliasing_ratio = if dropped == 0.0 {
            0.0
        } else {
            (dropped / total).sqrt()
        };
        Ok(GradientEval {
            gradient: g,
            aliasing_ratio,
        })
    }

    /// `L²`-representer of `Φ_k'(u)` in the truncated space.
    pub fn gradient(&self, u: &SpectralLoop) -> Result<SpectralLoop> {
        Ok(self.gradient_eval(u)?.gradient)
    }

    /// `‖J u̇ + k H'(kt, u)‖_{L²(0,T)}` on the quadrature grid.
    pub fn residual_norm(&self, u: &SpectralLoop) -> Result<f64> {
        let s = self.samples(u)?;
        let f = self.force_samples(&s)?;
        let lin = self.tr.synthesize(&linear_part(u))?;
        let sum: f64 = f
            .points()
            .zip(lin.points())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x + y).powi(2)).sum::<f64>())
            .sum();
        Ok((self.h.period() / self.cfg.quad_points as f64 * sum).sqrt())
    }
}

/// Coefficients of `J u̇`: mode `m` is `-(2π/T)·m·c_m`.
pub fn linear_part(u: &SpectralLoop) -> SpectralLoop {
    let w = u.system().omega();
    let mut out = u.clone();
    for m in u.mode_range() {
        out.mode_mut(m).iter_mut().for_each(|c| *c *= -w * m as f64);
    }
    out
}

pub fn action_value(u: &SpectralLoop, h: &HamiltonianSpec, cfg: &ActionConfig) -> Result<ActionValue> {
    ActionEvaluator::new(h, *cfg)?.value(u)
}

pub fn action_gradient(u: &SpectralLoop, h: &HamiltonianSpec, cfg: &ActionConfig) -> Result<SpectralLoop> {
    ActionEvaluator::new(h, *cfg)?.gradient(u)
}

pub fn residual_norm(u: &SpectralLoop, h: &HamiltonianSpec, cfg: &ActionConfig) -> Result<f64> {
    ActionEvaluator::new(h, *cfg)?.residual_norm(u)
}

/// `H^{1/2}` preconditioner: mode `m` scaled by `1/max(1, π|m|)`.
pub fn precondition(g: &SpectralLoop) -> SpectralLoop {
    let mut out = g.clone();
    for m in g.mode_range() {
        let s = 1.0 / (std::f64::consts::PI * m.abs() as f64).max(1.0);
        out.mode_mut(m).iter_mut().for_each(|c| *c *= s);
    }
    out
}

/// Action of the long-period problem on `x` over `[0, kT]` by direct
/// quadrature: `(1/2)∫ Jẋ·x + ∫ H(t, x)`.
pub fn long_period_action(x: &SpectralLoop, h: &HamiltonianSpec, samples: usize) -> Result<f64> {
    let period = x.period();
    let grid = TimeGrid::new(samples, period)?;
    let tr = Transformer::new(grid);
    let xs = tr.synthesize(x)?;
    // J ẋ has the coefficients of the linear part on the long period
    let jx = tr.synthesize(&linear_part(x))?;
    let dt = period / samples as f64;
    let mut q = 0.0;
    let mut pot = 0.0;
    for (j, (p, v)) in xs.points().zip(jx.points()).enumerate() {
        q += p.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        pot += h.eval_h(grid.time(j), p)?;
    }
    Ok(0.5 * q * dt + pot * dt)
}

/// One directional-derivative comparison.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GradCheck {
    pub finite_difference: f64,
    pub analytic: f64,
    pub rel_error: f64,
}

/// Central difference `(Φ(u+εv) − Φ(u−εv))/(2ε)` against `T·Σ g_m·v_m`.
pub fn grad_check(
    eval: &ActionEvaluator<'_>,
    u: &SpectralLoop,
    v: &SpectralLoop,
    step: f64,
) -> Result<GradCheck> {
    let mut up = u.clone();
    up.axpy(step, v);
    let mut um = u.clone();
    um.axpy(-step, v);
    let fd = (eval.value(&up)?.total - eval.value(&um)?.total) / (2.0 * step);
    let an = eval.gradient(u)?.l2_dot(v);
    let scale = fd.abs().max(an.abs()).max(1e-300);
    Ok(GradCheck {
        finite_difference: fd,
        analytic: an,
        rel_error: (fd - an).abs() / scale,
    })
}

/// A random loop with coefficients decaying like `1/(1+|m|)²`.
pub fn random_loop(system: SystemSpec, n_max: usize, amplitude: f64, rng: &mut ChaCha8Rng) -> SpectralLoop {
    let mut u = SpectralLoop::zeros(system, n_max);
    for m in u.mode_range() {
        let w = amplitude / (1.0 + m.abs() as f64).powi(2);
        u.mode_mut(m)
            .iter_mut()
            .for_each(|c| *c = w * rng.random_range(-1.0..1.0));
    }
    u
}

/// Summary of randomized gradient checks.
#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub trials: usize,
    pub max_rel_error: f64,
    pub worst_k: u32,
}

/// Randomized directional-derivative checks over the given `k` values.
pub fn grad_check_random(
    h: &HamiltonianSpec,
    k_values: &[u32],
    n_max: usize,
    trials: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (0.0, k_values.first().copied().unwrap_or(1));
    for &k in k_values {
        let eval = ActionEvaluator::new(h, ActionConfig::new(k, n_max))?;
        for _ in 0..trials {
            let u = random_loop(h.system, n_max, 2.0, &mut rng);
            let v = random_loop(h.system, n_max, 1.0, &mut rng);
            let c = grad_check(&eval, &u, &v, 1e-5)?;
            if c.rel_error > worst.0 {
                worst = (c.rel_error, k);
            }
        }
    }
    Ok(GradCheckReport {
        trials: trials * k_values.len(),
        max_rel_error: worst.0,
        worst_k: worst.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::rescale_to_long_period;
    use std::f64::consts::PI;

    fn sys(t: f64) -> SystemSpec {
        SystemSpec::new(t, 1).unwrap()
    }

    fn unit_e(s: SystemSpec, n: usize) -> SpectralLoop {
        SpectralLoop::single_mode(s, n, 1, &[1.0 / PI.sqrt(), 0.0])
    }

    #[test]
    fn config_rejects_undersampling() {
        assert!(ActionConfig::new(1, 8).with_quad_points(60).validate().is_err());
        assert!(ActionConfig::new(0, 8).validate().is_err());
        assert!(ActionConfig::new(1, 8).validate().is_ok());
    }

    #[test]
    fn zero_and_constant_hamiltonians() {
        let s = sys(2.0 * PI);
        let u = unit_e(s, 4).scaled(2.0);
        let cfg = ActionConfig::new(3, 4);
        let zero = HamiltonianSpec::constant(s, 0.0);
        let v = action_value(&u, &zero, &cfg).unwrap();
        assert!((v.total + 4.0).abs() < 1e-14);
        let h0 = 0.75;
        let c = HamiltonianSpec::constant(s, h0);
        let v = action_value(&u, &c, &cfg).unwrap();
        assert!((v.total - (-4.0 + 3.0 * 2.0 * PI * h0)).abs() < 1e-12);
        assert_eq!(v.total, v.quadratic_part + v.potential_part);
    }

    #[test]
    fn linear_gradient_and_residual() {
        let s = sys(3.0);
        let u = SpectralLoop::single_mode(s, 5, -2, &[0.3, 0.4]);
        let zero = HamiltonianSpec::constant(s, 0.0);
        let cfg = ActionConfig::new(1, 5);
        let g = action_gradient(&u, &zero, &cfg).unwrap();
        let w = 2.0 * PI / 3.0;
        assert!((g.mode(-2)[0] - 2.0 * w * 0.3).abs() < 1e-14);
        assert!((g.mode(-2)[1] - 2.0 * w * 0.4).abs() < 1e-14);
        let r = residual_norm(&u, &zero, &cfg).unwrap();
        assert!((r - w * 2.0 * 0.5 * 3f64.sqrt()).abs() < 1e-12);
        let c = SpectralLoop::constant(s, 5, &[1.0, 2.0]);
        assert_eq!(residual_norm(&c, &zero, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_mode_one_is_critical() {
        let s = sys(2.0 * PI);
        let h = HamiltonianSpec::quadratic(s, 1.0);
        let u = SpectralLoop::single_mode(s, 8, 1, &[0.6, -1.2]);
        let cfg = ActionConfig::new(1, 8);
        let g = action_gradient(&u, &h, &cfg).unwrap();
        assert!(g.coeffs().iter().all(|c| c.abs() < 1e-14));
        assert!(residual_norm(&u, &h, &cfg).unwrap() < 1e-12);
    }

    #[test]
    fn precondition_scaling() {
        let s = sys(1.0);
        let mut g = SpectralLoop::zeros(s, 10);
        g.mode_mut(0).copy_from_slice(&[1.0, 2.0]);
        g.mode_mut(10).copy_from_slice(&[1.0, -1.0]);
        let p = precondition(&g);
        assert_eq!(p.mode(0), &[1.0, 2.0]);
        assert!((p.mode(10)[0] - 1.0 / (10.0 * PI)).abs() < 1e-16);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let s = sys(4.0 * PI);
        for h in [HamiltonianSpec::example_3_1(s), HamiltonianSpec::example_4_1(s)] {
            let r = grad_check_random(&h, &[1, 3], 6, 4, 11).unwrap();
            assert!(r.max_rel_error < 1e-6, "{}: {r:?}", h.describe());
        }
    }

    #[test]
    fn long_period_identity() {
        let s = sys(2.0);
        let h = HamiltonianSpec::example_4_1(s);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_loop(s, 6, 1.5, &mut rng);
        for k in [1u32, 2, 3] {
            let v = action_value(&u, &h, &ActionConfig::new(k, 6)).unwrap().total;
            let x = rescale_to_long_period(&u, k);
            let w = long_period_action(&x, &h, 512 * k as usize).unwrap();
            assert!((v - w).abs() <= 1e-8 * v.abs(), "k={k}: {v} vs {w}");
        }
    }
}
