mod common;

use std::f64::consts::PI;

use common::*;
use proptest::prelude::*;
use rand::RngExt;
use subharmonic::action::{action_value, residual_norm, ActionConfig};
use subharmonic::hamiltonian::{gamma_iv_functional, GammaSpec, HamiltonianSpec};
use subharmonic::spectral::{time_reflect, SpectralLoop};

fn builtins(period: f64) -> Vec<HamiltonianSpec> {
    let s = system(period);
    vec![
        HamiltonianSpec::example_3_1(s),
        HamiltonianSpec::example_4_1(s),
        HamiltonianSpec::quadratic(s, 1.7),
        HamiltonianSpec::constant(s, -0.4),
    ]
}

#[test]
fn dual_gradients_match_finite_differences() {
    let mut r = rng(3);
    let mut hs = builtins(2.0 * PI);
    for _ in 0..50 {
        let text = random_expression(&mut r);
        hs.push(HamiltonianSpec::expression(system(2.0 * PI), &text).unwrap());
    }
    for h in &hs {
        for _ in 0..20 {
            let t = r.random_range(0.0..2.0 * PI);
            let x = [r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)];
            let err = fd_gradient_error(h, t, &x);
            assert!(err <= 1e-6, "{}: error {err} at t = {t}, x = {x:?}", h.describe());
        }
    }
}

#[test]
fn expression_reproduces_example_4_1() {
    let s = system(4.0 * PI);
    let b = HamiltonianSpec::example_4_1(s);
    let e = HamiltonianSpec::expression(s, "(3/2 + sin(2*pi*t/T)) * ln(1+r2)^(5/2)").unwrap();
    let mut r = rng(5);
    for _ in 0..100 {
        let t = r.random_range(-20.0..20.0);
        let x = [r.random_range(-10.0..10.0), r.random_range(-10.0..10.0)];
        let (hb, he) = (b.eval_h(t, &x).unwrap(), e.eval_h(t, &x).unwrap());
        assert!((hb - he).abs() <= 1e-12 * (1.0 + hb.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn periodicity_and_reversal(t in -30.0f64..30.0, x1 in -5.0f64..5.0, x2 in -5.0f64..5.0, period in 0.5f64..15.0) {
        let x = [x1, x2];
        for h in builtins(period) {
            let (a, b) = (h.eval_h(t + period, &x).unwrap(), h.eval_h(t, &x).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            let back = h.time_reverse().time_reverse();
            prop_assert_eq!(back.eval_h(t, &x).unwrap(), h.eval_h(t, &x).unwrap());
            prop_assert_eq!(h.time_reverse().eval_h(t, &x).unwrap(), -h.eval_h(-t, &x).unwrap());
        }
        let e = HamiltonianSpec::expression(system(period), "cos(2*pi*t/T)*x1*x2 + sin(4*pi*t/T)*ln(1+r2)").unwrap();
        let (a, b) = (e.eval_h(t + period, &x).unwrap(), e.eval_h(t, &x).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn periodicity_is_exact_on_dyadic_times(j in -4096i64..4096, p in 1u32..64, x1 in -5.0f64..5.0, x2 in -5.0f64..5.0) {
        let (t, period) = (j as f64 / 64.0, p as f64 / 4.0);
        for h in builtins(period) {
            prop_assert_eq!(h.eval_h(t + period, &[x1, x2]).unwrap(), h.eval_h(t, &[x1, x2]).unwrap());
        }
    }

    #[test]
    fn radial_gradients_are_odd(t in 0.0f64..6.0, x1 in -5.0f64..5.0, x2 in -5.0f64..5.0) {
        let e = HamiltonianSpec::expression(system(6.0), "sin(2*pi*t/T)*ln(1+r2)^1.5 + exp(-r2)").unwrap();
        let g = e.grad_h(t, &[x1, x2]).unwrap();
        let gm = e.grad_h(t, &[-x1, -x2]).unwrap();
        prop_assert!(g.iter().zip(&gm).all(|(a, b)| (a + b).abs() <= 1e-14 * (1.0 + a.abs())));
    }

    #[test]
    fn reversed_residual_of_reflected_loop(seed in any::<u64>(), k in 1u32..4) {
        let mut r = rng(seed);
        let s = system(2.0 * PI);
        let u = random_loop(s, 6, &mut r).scaled(0.5);
        let cfg = ActionConfig::new(k, 6);
        for h in [HamiltonianSpec::example_3_1(s), HamiltonianSpec::example_4_1(s)] {
            let rho = residual_norm(&u, &h, &cfg).unwrap();
            let rev = residual_norm(&time_reflect(&u), &h.time_reverse(), &cfg).unwrap();
            prop_assert!(rev <= rho + 1e-10 && rho <= rev + 1e-10, "{rho} vs {rev}");
        }
    }
}

#[test]
fn reflected_exact_solution_stays_exact() {
    let s = system(2.0 * PI);
    let h = HamiltonianSpec::quadratic(s, 1.0);
    let u = SpectralLoop::single_mode(s, 4, 1, &[0.7, -0.2]);
    let cfg = ActionConfig::new(1, 4);
    assert!(residual_norm(&u, &h, &cfg).unwrap() <= 1e-12);
    assert!(residual_norm(&time_reflect(&u), &h.time_reverse(), &cfg).unwrap() <= 1e-12);
    assert_eq!(h.time_reverse(), HamiltonianSpec::quadratic(s, -1.0));
}

#[test]
fn gamma_functional_trends() {
    let g = GammaSpec::log_sqrt();
    for c in [0.0, 1.0, 10.0] {
        let v: Vec<f64> = [1e4, 1e6, 1e8].iter().map(|&r| gamma_iv_functional(&g, c, r).unwrap()).collect();
        assert!(v[0] < v[1] && v[1] < v[2], "c = {c}: {v:?}");
    }
    assert!(gamma_iv_functional(&g, 10.0, 1e8).unwrap() > 1.0);
    let p = GammaSpec::power(0.5);
    assert!((gamma_iv_functional(&p, 0.0, 1e6).unwrap() - (1.0 - 1e-6)).abs() < 1e-8);
}

#[test]
fn power_subadditivity_on_grid() {
    let grid: Vec<f64> = (0..200).map(|i| 1e-4 * (1e12f64).powf(i as f64 / 199.0)).collect();
    for alpha in [0.3, 0.5, 0.9] {
        let g = GammaSpec::power(alpha);
        for &s in &grid {
            for &t in &grid {
                let lhs = g.eval(s + t).unwrap();
                assert!(lhs <= (g.eval(s).unwrap() + g.eval(t).unwrap()) * (1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn quadrature_stability_under_doubling() {
    let s = system(4.0 * PI);
    let h = HamiltonianSpec::example_4_1(s);
    let u = subharmonic::action::random_loop(s, 8, 2.0, &mut rng(9));
    let value = |h: &HamiltonianSpec, k: u32, m: usize| {
        action_value(&u, h, &ActionConfig::new(k, 8).with_quad_points(m)).unwrap().total
    };
    let (a, b) = (value(&h, 2, 512), value(&h, 2, 1024));
    assert!((a - b).abs() <= 1e-9 * a.abs(), "{a} vs {b}");
}

/// The kinks of the half-sine profile limit the trapezoid rule to second
/// order: successive changes shrink by four and fall below 1e-6 relative
/// from M = 4096.
#[test]
fn kinked_profile_converges_at_second_order() {
    let s = system(4.0 * PI);
    let h = HamiltonianSpec::example_3_1(s);
    for (seed, amp, k) in [(9u64, 2.0, 2u32), (9, 1.0, 1), (1, 0.5, 1), (2, 2.0, 3)] {
        let u = subharmonic::action::random_loop(s, 8, amp, &mut rng(seed));
        let v: Vec<f64> = [1024, 2048, 4096, 8192]
            .iter()
            .map(|&m| action_value(&u, &h, &ActionConfig::new(k, 8).with_quad_points(m)).unwrap().total)
            .collect();
        let d: Vec<f64> = v.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        assert!((d[0] / d[1] - 4.0).abs() < 0.4 && (d[1] / d[2] - 4.0).abs() < 0.4, "{d:?}");
        assert!(d[2] <= 1e-6 * v[3].abs(), "{d:?}");
    }
}
