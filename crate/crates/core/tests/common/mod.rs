#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subharmonic::hamiltonian::HamiltonianSpec;
use subharmonic::scan::{minimal_period, minimal_period_shift, shift_tolerance};
use subharmonic::spectral::{apply_j, synthesize, SpectralLoop, SystemSpec, TimeGrid};

pub fn system(period: f64) -> SystemSpec {
    SystemSpec::new(period, 1).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Coefficients uniform in `[-1, 1]`.
pub fn random_loop(system: SystemSpec, n_max: usize, rng: &mut ChaCha8Rng) -> SpectralLoop {
    let mut u = SpectralLoop::zeros(system, n_max);
    u.coeffs_mut().iter_mut().for_each(|c| *c = rng.random_range(-1.0..1.0));
    u
}

/// `u̇` in coefficient space: mode `m` maps to `ω·m·J c_m`.
pub fn derivative(u: &SpectralLoop) -> SpectralLoop {
    let mut out = u.clone();
    let w = u.system().omega();
    for m in u.mode_range() {
        let jc = apply_j(u.mode(m));
        out.mode_mut(m)
            .iter_mut()
            .zip(jc)
            .for_each(|(o, v)| *o = w * m as f64 * v);
    }
    out
}

/// `(1/2)∫₀ᵀ J u̇ · v dt` by the trapezoid rule on `samples` points.
pub fn bilinear_quadrature(u: &SpectralLoop, v: &SpectralLoop, samples: usize) -> f64 {
    let grid = TimeGrid::new(samples, u.period()).unwrap();
    let du = synthesize(&derivative(u), &grid).unwrap();
    let vs = synthesize(v, &grid).unwrap();
    let dt = u.period() / samples as f64;
    0.5 * dt
        * du
            .points()
            .zip(vs.points())
            .map(|(a, b)| apply_j(a).iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum::<f64>()
}

/// `∫₀ᵀ |u|² dt` by the trapezoid rule.
pub fn l2_quadrature(u: &SpectralLoop, samples: usize) -> f64 {
    let grid = TimeGrid::new(samples, u.period()).unwrap();
    let dt = u.period() / samples as f64;
    synthesize(u, &grid)
        .unwrap()
        .points()
        .map(|p| p.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        * dt
}

/// Relative error of the central-difference gradient of `H` at `(t, x)`
/// with step `1e-6·(1+|x|)`.
pub fn fd_gradient_error(h: &HamiltonianSpec, t: f64, x: &[f64]) -> f64 {
    let g = h.grad_h(t, x).unwrap();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let step = 1e-6 * (1.0 + norm);
    let mut err = 0.0f64;
    for i in 0..x.len() {
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[i] += step;
        xm[i] -= step;
        let fd = (h.eval_h(t, &xp).unwrap() - h.eval_h(t, &xm).unwrap()) / (2.0 * step);
        err = err.max((fd - g[i]).abs());
    }
    let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    err / gnorm.max(1e-3)
}

/// A random smooth expression in `t`, `x1`, `x2`, `r2`.
pub fn random_expression(rng: &mut ChaCha8Rng) -> String {
    const ATOMS: &[&str] = &[
        "ln(1+r2)",
        "ln(1+r2)^1.5",
        "(1+r2)^0.5",
        "sqrt(2+x1^2)",
        "exp(-r2)",
        "x1*x2",
        "x1^2 - x2^2",
        "cos(x1)*sin(x2)",
        "r2",
        "x2",
        "1/(1+r2)",
        "exp(0.1*x1)",
    ];
    const TIMES: &[&str] = &[
        "1",
        "sin(2*pi*t/T)",
        "(1.5 + cos(2*pi*t/T))",
        "theta_halfsine",
        "cos(4*pi*t/T)",
    ];
    let terms = rng.random_range(1..=3);
    (0..terms)
        .map(|_| {
            let c: f64 = rng.random_range(-2.0..2.0);
            let a = ATOMS[rng.random_range(0..ATOMS.len())];
            let b = ATOMS[rng.random_range(0..ATOMS.len())];
            let tt = TIMES[rng.random_range(0..TIMES.len())];
            if rng.random_bool(0.5) {
                format!("({c:.3})*{tt}*{a}")
            } else {
                format!("({c:.3})*{tt}*({a})*({b})")
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Loop over base period `k·period` whose nonzero modes are drawn from
/// multiples of a random divisor structure of `k`.
pub fn planted_loop(k: u32, period: f64, rng: &mut ChaCha8Rng) -> (SpectralLoop, u32) {
    let sys = SystemSpec::new(period * k as f64, 1).unwrap();
    let n_max = 12usize;
    let mut u = SpectralLoop::zeros(sys, n_max);
    let count = rng.random_range(1..=3);
    let mut modes = Vec::new();
    for _ in 0..count {
        let m: i64 = rng.random_range(1..=n_max as i64) * if rng.random_bool(0.5) { 1 } else { -1 };
        modes.push(m);
        u.mode_mut(m)
            .iter_mut()
            .for_each(|c| *c = rng.random_range(0.2..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    }
    if rng.random_bool(0.5) {
        u.mode_mut(0).iter_mut().for_each(|c| *c = rng.random_range(-1.0..1.0));
    }
    let g = modes.iter().fold(k as u64, |a, &m| gcd(a, m.unsigned_abs()));
    (u, k / g as u32)
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Agreement count of the gcd and shift tests over `cases` planted loops.
pub fn minimal_period_agreement(cases: usize, seed: u64) -> (usize, usize) {
    let mut rng = rng(seed);
    let mut agree = 0;
    let mut planted_ok = 0;
    for _ in 0..cases {
        let k = rng.random_range(1..=30u32);
        let (x, expected) = planted_loop(k, 2.0 * PI, &mut rng);
        let tol = 1e-8;
        let r = minimal_period(&x, k, tol);
        let rs = minimal_period_shift(&x, k, shift_tolerance(&x, tol));
        agree += usize::from(r == rs);
        planted_ok += usize::from(r == expected);
    }
    (agree, planted_ok)
}
