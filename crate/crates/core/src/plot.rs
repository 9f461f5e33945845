//! SVG renderings of written artifacts. Plots read back the CSV/JSON files,
//! never the in-memory results.

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::SpectralLoop;

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Config(format!("plot: {e}"))
}

fn padded(lo: f64, hi: f64) -> std::ops::Range<f64> {
    let span = (hi - lo).abs().max(1e-12 * (1.0 + hi.abs()));
    (lo - 0.05 * span)..(hi + 0.05 * span)
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)))
}

/// `(x₁, x₂)` projection and `|x(t)|` over one period of the loop.
pub fn orbit_svg(u: &SpectralLoop, samples: usize, title: &str) -> Result<String> {
    let period = u.period();
    let pts: Vec<(f64, Vec<f64>)> = (0..=samples)
        .map(|j| {
            let t = period * j as f64 / samples as f64;
            (t, u.eval(t))
        })
        .collect();
    let n = u.system().half_dim;
    let proj: Vec<(f64, f64)> = pts.iter().map(|(_, x)| (x[0], x[n])).collect();
    let mag: Vec<(f64, f64)> = pts
        .iter()
        .map(|(t, x)| (*t, x.iter().map(|v| v * v).sum::<f64>().sqrt()))
        .collect();
    let mut s = String::new();
    {
        let root = SVGBackend::with_string(&mut s, (1000, 480)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let root = root.titled(title, ("sans-serif", 20)).map_err(plot_err)?;
        let (left, right) = root.split_horizontally(480);

        let r = proj.iter().map(|(a, b)| a.abs().max(b.abs())).fold(0.0, f64::max);
        let mut c = ChartBuilder::on(&left)
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(50)
            .build_cartesian_2d(padded(-r, r), padded(-r, r))
            .map_err(plot_err)?;
        c.configure_mesh().x_desc("x1").y_desc(format!("x{}", n + 1)).draw().map_err(plot_err)?;
        c.draw_series(LineSeries::new(proj, &BLUE)).map_err(plot_err)?;

        let (lo, hi) = bounds(mag.iter().map(|p| p.1));
        let mut c = ChartBuilder::on(&right)
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(60)
            .build_cartesian_2d(0.0..period, padded(lo, hi))
            .map_err(plot_err)?;
        c.configure_mesh().x_desc("t").y_desc("|x(t)|").draw().map_err(plot_err)?;
        c.draw_series(LineSeries::new(mag, &RED)).map_err(plot_err)?;
    }
    Ok(s)
}

/// One column of a scan CSV against `k`, with optional marker labels.
pub fn trend_svg(points: &[(f64, f64)], labels: &[String], title: &str, y_desc: &str) -> Result<String> {
    let mut s = String::new();
    {
        let root = SVGBackend::with_string(&mut s, (720, 480)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let (klo, khi) = bounds(points.iter().map(|p| p.0));
        let (lo, hi) = bounds(points.iter().map(|p| p.1));
        let mut c = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(15)
            .x_label_area_size(30)
            .y_label_area_size(70)
            .build_cartesian_2d(padded(klo, khi), padded(lo, hi))
            .map_err(plot_err)?;
        c.configure_mesh().x_desc("k").y_desc(y_desc).draw().map_err(plot_err)?;
        c.draw_series(LineSeries::new(points.iter().copied(), &BLUE)).map_err(plot_err)?;
        c.draw_series(points.iter().map(|&p| Circle::new(p, 4, BLUE.filled())))
            .map_err(plot_err)?;
        c.draw_series(points.iter().zip(labels).map(|(&p, l)| {
            Text::new(l.clone(), p, ("sans-serif", 13).into_font().color(&BLACK))
        }))
        .map_err(plot_err)?;
    }
    Ok(s)
}
