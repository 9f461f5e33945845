mod common;

use std::f64::consts::PI;

use common::*;
use subharmonic::audit::{audit, AuditConfig, AuditReport, Variant, Verdict};
use subharmonic::hamiltonian::{GammaSpec, HamiltonianSpec};

fn run(h: &HamiltonianSpec, g: &GammaSpec, cfg: &AuditConfig) -> AuditReport {
    audit(h, g, cfg).unwrap()
}

fn verdict(rep: &AuditReport, id: &str) -> (Verdict, Option<Variant>) {
    let e = rep.entry(id).unwrap_or_else(|| panic!("missing {id}"));
    (e.verdict, e.variant)
}

fn trend_matches(rep: &AuditReport, id: &str, f: impl Fn(f64) -> f64) {
    let e = rep.entry(id).unwrap();
    assert!(!e.trend.is_empty());
    for row in &e.trend {
        let want = f(row.r);
        assert!(
            (row.value - want).abs() <= 1e-8 * want.abs().max(1e-12),
            "{id} at r = {}: {} vs {want}",
            row.r,
            row.value
        );
    }
}

const SUPPORTED_I: (Verdict, Option<Variant>) = (Verdict::Supported, Some(Variant::I));
const SUPPORTED_II: (Verdict, Option<Variant>) = (Verdict::Supported, Some(Variant::II));

#[test]
fn example_3_1_verdicts_and_tables() {
    let t = 4.0 * PI;
    let h = HamiltonianSpec::example_3_1(system(t));
    let rep = run(&h, &GammaSpec::log_sqrt(), &AuditConfig::default());
    assert_eq!(verdict(&rep, "H1").0, Verdict::Supported);
    assert_eq!(verdict(&rep, "H1'").0, Verdict::Supported);
    assert_eq!(verdict(&rep, "H2"), SUPPORTED_I);
    assert_eq!(verdict(&rep, "H3"), SUPPORTED_I);
    assert_eq!(verdict(&rep, "H4"), SUPPORTED_I);
    assert_eq!(verdict(&rep, "H5").0, Verdict::Inconclusive);
    for id in ["gamma(i)", "gamma(ii)", "gamma(iii)", "gamma(iv)"] {
        assert_eq!(verdict(&rep, id).0, Verdict::Supported, "{id}");
    }
    assert!(!rep.any_violated());
    trend_matches(&rep, "H2", |r| t / PI * (r * r).ln_1p().sqrt());
}

#[test]
fn example_4_1_verdicts_and_tables() {
    let h = HamiltonianSpec::example_4_1(system(4.0 * PI));
    let rep = run(&h, &GammaSpec::log_sqrt(), &AuditConfig::default());
    for id in ["H1", "H1'", "gamma(i)", "gamma(ii)", "gamma(iii)", "gamma(iv)"] {
        assert_eq!(verdict(&rep, id).0, Verdict::Supported, "{id}");
    }
    for id in ["H2", "H3", "H4", "H5"] {
        assert_eq!(verdict(&rep, id), SUPPORTED_I, "{id}");
    }
    trend_matches(&rep, "H4", |r| 0.5 * (r * r).ln_1p().powf(1.5));
    trend_matches(&rep, "H5", |r| 2.5 * (r * r).ln_1p().sqrt() * r * r / (1.0 + r * r));
}

#[test]
fn time_reversal_flips_the_variant() {
    let h = HamiltonianSpec::example_3_1(system(4.0 * PI)).time_reverse();
    let rep = run(&h, &GammaSpec::log_sqrt(), &AuditConfig::default());
    for id in ["H2", "H3", "H4"] {
        assert_eq!(verdict(&rep, id), SUPPORTED_II, "{id}");
    }
    assert_eq!(verdict(&rep, "H1").0, Verdict::Supported);
    assert!(!rep.any_violated());
}

#[test]
fn constant_hamiltonian_has_no_trend() {
    let t = 2.0 * PI;
    let h = HamiltonianSpec::constant(system(t), 0.75);
    let rep = run(&h, &GammaSpec::log_sqrt(), &AuditConfig::default());
    assert_eq!(verdict(&rep, "H2").0, Verdict::Inconclusive);
    trend_matches(&rep, "H2", |r| t * 0.75 / (r * r).ln_1p());
}

#[test]
fn quadratic_with_square_root_gamma() {
    let h = HamiltonianSpec::quadratic(system(2.0 * PI), 1.0);
    let rep = run(&h, &GammaSpec::power(0.5), &AuditConfig::default());
    assert_eq!(verdict(&rep, "H5"), SUPPORTED_I);
    trend_matches(&rep, "H5", |r| r);
}

#[test]
fn violation_witness_reproduces() {
    let h = HamiltonianSpec::quadratic(system(2.0 * PI), 1.0);
    let g = GammaSpec::log_sqrt();
    let cfg = AuditConfig {
        p: Some("1".into()),
        q: Some("1".into()),
        ..Default::default()
    };
    let rep = run(&h, &g, &cfg);
    let e = rep.entry("H1").unwrap();
    assert_eq!(e.verdict, Verdict::Violated);
    assert!(rep.any_violated());
    let w = e.witness.as_ref().unwrap();
    let lhs = h.grad_h(w.t, &w.x).unwrap().iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = w.x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rhs = g.eval(r).unwrap() + 1.0;
    assert!(lhs > rhs);
    let stored: Vec<f64> = w.values.iter().map(|(_, v)| *v).collect();
    assert!((stored[0] - lhs).abs() <= 1e-12 * lhs);
    assert!((stored[1] - rhs).abs() <= 1e-12 * rhs);
}

#[test]
fn report_serializations() {
    let h = HamiltonianSpec::example_4_1(system(4.0 * PI));
    let rep = run(&h, &GammaSpec::log_sqrt(), &AuditConfig::default());
    let v: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
    assert!(v["entries"].as_array().unwrap().len() >= 11);
    assert!(rep.to_text().contains("H5"));
    let csv = rep.trends_csv();
    assert!(csv.lines().count() > 40);
}
