//! Trajectories as truncated Fourier series in the symplectic rotating basis.
//!
//! A loop of period `T` is stored as real coefficient vectors `c_m`,
//! `|m| <= n_max`, and represents
//!
//! ```text
//! u(t) = sum_m exp((2π/T)·m·t·J) c_m,    J = [[0, -I], [I, 0]].
//! ```
//!
//! Identifying the real state `(q, p)` with the complex vector `z = q + i·p`
//! turns `J` into multiplication by `i`, so `u(t)` is the inverse DFT of the
//! complex coefficients and all transforms reduce to FFTs.
//!
//! Sign convention, fixed here and nowhere else: the quadratic form
//! `Q(u) = ½∫ Ju̇·u dt` is diagonal with per-mode value `-π·m·|c_m|²`, so
//! `E⁺` (Q > 0) is the span of negative modes, `E⁻` (Q < 0) the span of
//! positive modes and `E⁰` the constants.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Period and half-dimension of the phase space `ℝ^{2N}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub period: f64,
    pub half_dim: usize,
}

impl SystemSpec {
    pub fn new(period: f64, half_dim: usize) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Config(format!("period must be positive, got {period}")));
        }
        if half_dim == 0 {
            return Err(Error::Config("half dimension N must be at least 1".into()));
        }
        Ok(Self { period, half_dim })
    }

    /// Dimension `2N` of state vectors.
    pub fn state_dim(&self) -> usize {
        2 * self.half_dim
    }

    /// Base angular frequency `2π/T`.
    pub fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn same_as(&self, other: &SystemSpec) -> bool {
        self.half_dim == other.half_dim
            && (self.period - other.period).abs() <= 1e-14 * self.period.max(other.period)
    }
}

/// Applies the symplectic matrix: `J(q, p) = (-p, q)`.
pub fn apply_j(x: &[f64]) -> Vec<f64> {
    let n = x.len() / 2;
    let mut out = vec![0.0; x.len()];
    for i in 0..n {
        out[i] = -x[n + i];
        out[n + i] = x[i];
    }
    out
}

/// Rotates `x` in place by `exp(θJ)`.
pub fn rotate_in_place(x: &mut [f64], theta: f64) {
    let n = x.len() / 2;
    let (s, c) = theta.sin_cos();
    for i in 0..n {
        let (q, p) = (x[i], x[n + i]);
        x[i] = c * q - s * p;
        x[n + i] = s * q + c * p;
    }
}

/// A `T`-periodic trajectory truncated to modes `|m| <= n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLoop {
    system: SystemSpec,
    n_max: usize,
    /// Mode `m` occupies `[(m + n_max)·2N, (m + n_max + 1)·2N)`.
    coeffs: Vec<f64>,
}

impl SpectralLoop {
    pub fn zeros(system: SystemSpec, n_max: usize) -> Self {
        Self {
            system,
            n_max,
            coeffs: vec![0.0; (2 * n_max + 1) * system.state_dim()],
        }
    }

    /// Builds a loop from a flat coefficient vector in mode order `-n_max..=n_max`.
    pub fn from_flat(system: SystemSpec, n_max: usize, coeffs: Vec<f64>) -> Result<Self> {
        let expected = (2 * n_max + 1) * system.state_dim();
        if coeffs.len() != expected {
            return Err(Error::Config(format!(
                "expected {expected} coefficients for n_max = {n_max}, got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("loop coefficients must be finite".into()));
        }
        Ok(Self {
            system,
            n_max,
            coeffs,
        })
    }

    /// A loop with a single nonzero mode.
    pub fn single_mode(system: SystemSpec, n_max: usize, m: i64, c: &[f64]) -> Self {
        let mut out = Self::zeros(system, n_max);
        out.mode_mut(m).copy_from_slice(c);
        out
    }

    /// A constant loop `u(t) = v`.
    pub fn constant(system: SystemSpec, n_max: usize, v: &[f64]) -> Self {
        Self::single_mode(system, n_max, 0, v)
    }

    pub fn system(&self) -> &SystemSpec {
        &self.system
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.system.state_dim()
    }

    pub fn period(&self) -> f64 {
        self.system.period
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    fn offset(&self, m: i64) -> usize {
        assert!(
            m.unsigned_abs() as usize <= self.n_max,
            "mode {m} outside |m| <= {}",
            self.n_max
        );
        (m + self.n_max as i64) as usize * self.dim()
    }

    pub fn mode(&self, m: i64) -> &[f64] {
        let o = self.offset(m);
        &self.coeffs[o..o + self.dim()]
    }

    pub fn mode_mut(&mut self, m: i64) -> &mut [f64] {
        let o = self.offset(m);
        let d = self.dim();
        &mut self.coeffs[o..o + d]
    }

    /// Mode indices `-n_max..=n_max`.
    pub fn mode_range(&self) -> std::ops::RangeInclusive<i64> {
        -(self.n_max as i64)..=self.n_max as i64
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, &[f64])> {
        let n = self.n_max as i64;
        self.coeffs
            .chunks_exact(self.dim())
            .enumerate()
            .map(move |(i, c)| (i as i64 - n, c))
    }

    pub fn mode_norm_sq(&self, m: i64) -> f64 {
        self.mode(m).iter().map(|c| c * c).sum()
    }

    /// Complex form `q + i·p` of mode `m`.
    pub fn mode_complex(&self, m: i64) -> Vec<Complex64> {
        let c = self.mode(m);
        let n = self.system.half_dim;
        (0..n).map(|i| Complex64::new(c[i], c[n + i])).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Zero-pads (or truncates) to a new truncation order.
    pub fn with_order(&self, n_max: usize) -> Self {
        let mut out = Self::zeros(self.system, n_max);
        let keep = self.n_max.min(n_max) as i64;
        for m in -keep..=keep {
            out.mode_mut(m).copy_from_slice(self.mode(m));
        }
        out
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }

    /// `self += a·other`.
    pub fn axpy(&mut self, a: f64, other: &SpectralLoop) {
        self.check_compatible(other);
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }

    pub fn add(&self, other: &SpectralLoop) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &SpectralLoop) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    fn check_compatible(&self, other: &SpectralLoop) {
        assert_eq!(self.n_max, other.n_max, "truncation orders differ");
        assert_eq!(self.dim(), other.dim(), "state dimensions differ");
    }

    /// `L²(0,T)` inner product: `T·Σ_m c_m·d_m`.
    pub fn l2_dot(&self, other: &SpectralLoop) -> f64 {
        self.check_compatible(other);
        self.period()
            * self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    /// Largest coefficient difference, for coefficientwise comparisons.
    pub fn max_abs_diff(&self, other: &SpectralLoop) -> f64 {
        self.check_compatible(other);
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `h_half` norm: `sqrt(Σ_{m≠0} π|m||c_m|² + |c_0|²)`.
    pub fn h_half(&self) -> f64 {
        self.modes()
            .map(|(m, c)| {
                let w = if m == 0 { 1.0 } else { PI * m.abs() as f64 };
                w * c.iter().map(|x| x * x).sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Modes whose coefficient norm exceeds `tol·(1 + h_half)`.
    pub fn significant_modes(&self, tol: f64) -> Vec<i64> {
        let threshold = tol * (1.0 + self.h_half());
        self.modes()
            .filter(|(_, c)| c.iter().map(|x| x * x).sum::<f64>().sqrt() > threshold)
            .map(|(m, _)| m)
            .collect()
    }

    /// Evaluates `u(t)` directly (no FFT).
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        let w = self.system.omega();
        let mut buf = vec![0.0; self.dim()];
        for (m, c) in self.modes() {
            if c.iter().all(|x| *x == 0.0) {
                continue;
            }
            buf.copy_from_slice(c);
            rotate_in_place(&mut buf, w * m as f64 * t);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += b;
            }
        }
        out
    }
}

/// Uniform collocation grid `t_j = j·T/M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    samples: usize,
    period: f64,
}

impl TimeGrid {
    pub fn new(samples: usize, period: f64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::Config("time grid needs at least one sample".into()));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Config(format!("period must be positive, got {period}")));
        }
        Ok(Self { samples, period })
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.period / self.samples as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples).map(|j| self.time(j))
    }
}

/// Samples of a `2N`-vector valued function on a time grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSeries {
    dim: usize,
    data: Vec<f64>,
}

impl StateSeries {
    pub fn zeros(len: usize, dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; len * dim],
        }
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::Config("samples must be nonempty 2N-vectors".into()));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Config("samples have inconsistent dimension".into()));
        }
        Ok(Self {
            dim,
            data: points.concat(),
        })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn point_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.points().map(<[f64]>::to_vec).collect()
    }
}

/// FFT plans for one grid size; reused across many transforms.
#[derive(Clone)]
pub struct Transformer {
    grid: TimeGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Transformer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transformer").field("grid", &self.grid).finish()
    }
}

impl Transformer {
    pub fn new(grid: TimeGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.samples),
            inverse: planner.plan_fft_inverse(grid.samples),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `u(t_j)` for every grid point.
    pub fn synthesize(&self, u: &SpectralLoop) -> Result<StateSeries> {
        if (u.period() - self.grid.period).abs() > 1e-14 * u.period() {
            return Err(Error::Config(format!(
                "loop period {} does not match grid period {}",
                u.period(),
                self.grid.period
            )));
        }
        let m_len = self.grid.samples;
        let n = u.system().half_dim;
        let mut out = StateSeries::zeros(m_len, 2 * n);
        let mut buf = vec![Complex64::new(0.0, 0.0); m_len];
        for i in 0..n {
            buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            for (m, c) in u.modes() {
                let slot = m.rem_euclid(m_len as i64) as usize;
                buf[slot] += Complex64::new(c[i], c[n + i]);
            }
            self.inverse.process(&mut buf);
            for (j, z) in buf.iter().enumerate() {
                let p = out.point_mut(j);
                p[i] = z.re;
                p[n + i] = z.im;
            }
        }
        Ok(out)
    }

    /// DFT projection onto modes `|m| <= n_max`.
    pub fn analyze(
        &self,
        samples: &StateSeries,
        n_max: usize,
        system: SystemSpec,
    ) -> Result<SpectralLoop> {
        let m_len = self.grid.samples;
        let needed = 2 * n_max + 1;
        if m_len < needed {
            return Err(Error::Aliasing {
                samples: m_len,
                n_max,
                needed,
            });
        }
        if samples.len() != m_len {
            return Err(Error::Config(format!(
                "expected {m_len} samples, got {}",
                samples.len()
            )));
        }
        if samples.dim() != system.state_dim() {
            return Err(Error::Config("sample dimension does not match system".into()));
        }
        let n = system.half_dim;
        let mut out = SpectralLoop::zeros(system, n_max);
        let mut buf = vec![Complex64::new(0.0, 0.0); m_len];
        let scale = 1.0 / m_len as f64;
        for i in 0..n {
            for (b, p) in buf.iter_mut().zip(samples.points()) {
                *b = Complex64::new(p[i], p[n + i]);
            }
            self.forward.process(&mut buf);
            for m in -(n_max as i64)..=n_max as i64 {
                let z = buf[m.rem_euclid(m_len as i64) as usize] * scale;
                let c = out.mode_mut(m);
                c[i] = z.re;
                c[n + i] = z.im;
            }
        }
        Ok(out)
    }
}

/// `u(t_j)` on `grid`; plans a fresh FFT, so prefer [`Transformer`] in loops.
pub fn synthesize(u: &SpectralLoop, grid: &TimeGrid) -> Result<StateSeries> {
    Transformer::new(*grid).synthesize(u)
}

/// Inverse of [`synthesize`] for band-limited samples.
pub fn analyze(samples: &StateSeries, n_max: usize, system: SystemSpec) -> Result<SpectralLoop> {
    let grid = TimeGrid::new(samples.len(), system.period)?;
    Transformer::new(grid).analyze(samples, n_max, system)
}

/// `Q(u) = Σ_m -π·m·|c_m|²`.
pub fn quadratic_form(u: &SpectralLoop) -> f64 {
    u.modes()
        .map(|(m, c)| -PI * m as f64 * c.iter().map(|x| x * x).sum::<f64>())
        .sum()
}

/// Decomposition `u = plus + minus + zero` along `E⁺ ⊕ E⁻ ⊕ E⁰`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitLoop {
    /// Negative modes (`Q >= 0`).
    pub plus: SpectralLoop,
    /// Positive modes (`Q <= 0`).
    pub minus: SpectralLoop,
    /// Mode 0.
    pub zero: Vec<f64>,
}

impl SplitLoop {
    pub fn recombine(&self) -> SpectralLoop {
        let mut out = self.plus.add(&self.minus);
        out.mode_mut(0).copy_from_slice(&self.zero);
        out
    }
}

pub fn split(u: &SpectralLoop) -> SplitLoop {
    let mut plus = SpectralLoop::zeros(*u.system(), u.n_max());
    let mut minus = plus.clone();
    for (m, c) in u.modes() {
        match m.cmp(&0) {
            std::cmp::Ordering::Less => plus.mode_mut(m).copy_from_slice(c),
            std::cmp::Ordering::Greater => minus.mode_mut(m).copy_from_slice(c),
            std::cmp::Ordering::Equal => {}
        }
    }
    SplitLoop {
        plus,
        minus,
        zero: u.mode(0).to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoopNorms {
    pub h_half: f64,
    pub l2: f64,
    /// Dense-sample maximum of `|u(t)|`: a lower bound of the true sup.
    pub sup: f64,
}

/// Dense sampling size used for sup norms (oversampling factor 8).
pub fn sup_grid_size(n_max: usize) -> usize {
    (8 * (2 * n_max + 1)).next_power_of_two()
}

pub fn sup_norm(u: &SpectralLoop) -> f64 {
    let grid = TimeGrid::new(sup_grid_size(u.n_max()), u.period()).expect("valid grid");
    let samples = synthesize(u, &grid).expect("matching period");
    samples
        .points()
        .map(|p| p.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

pub fn norms(u: &SpectralLoop) -> LoopNorms {
    let sum_sq: f64 = u.coeffs().iter().map(|c| c * c).sum();
    LoopNorms {
        h_half: u.h_half(),
        l2: (u.period() * sum_sq).sqrt(),
        sup: sup_norm(u),
    }
}

/// `t ↦ u(t + s)`, exact in coefficient space.
pub fn time_shift(u: &SpectralLoop, s: f64) -> SpectralLoop {
    let mut out = u.clone();
    let w = u.system().omega();
    for m in u.mode_range() {
        if m != 0 {
            rotate_in_place(out.mode_mut(m), w * m as f64 * s);
        }
    }
    out
}

/// `t ↦ u(-t)`: mode `m` of the result is mode `-m` of `u`.
pub fn time_reflect(u: &SpectralLoop) -> SpectralLoop {
    let mut out = SpectralLoop::zeros(*u.system(), u.n_max());
    for (m, c) in u.modes() {
        out.mode_mut(-m).copy_from_slice(c);
    }
    out
}

/// `x(t) = u(t/k)` on the long period `kT`; coefficients are unchanged.
pub fn rescale_to_long_period(u: &SpectralLoop, k: u32) -> SpectralLoop {
    assert!(k >= 1, "subharmonic index must be positive");
    let system = SystemSpec {
        period: u.period() * k as f64,
        half_dim: u.system().half_dim,
    };
    SpectralLoop {
        system,
        n_max: u.n_max(),
        coeffs: u.coeffs().to_vec(),
    }
}

/// Plain JSON form of a loop: `{T, N, n_max, coeffs: [[m, c...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopRecord {
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(rename = "N")]
    pub half_dim: usize,
    pub n_max: usize,
    pub coeffs: Vec<Vec<f64>>,
}

impl From<&SpectralLoop> for LoopRecord {
    fn from(u: &SpectralLoop) -> Self {
        LoopRecord {
            period: u.period(),
            half_dim: u.system().half_dim,
            n_max: u.n_max(),
            coeffs: u
                .modes()
                .map(|(m, c)| std::iter::once(m as f64).chain(c.iter().copied()).collect())
                .collect(),
        }
    }
}

impl TryFrom<&LoopRecord> for SpectralLoop {
    type Error = Error;

    fn try_from(rec: &LoopRecord) -> Result<Self> {
        let system = SystemSpec::new(rec.period, rec.half_dim)?;
        let mut out = SpectralLoop::zeros(system, rec.n_max);
        let mut seen = vec![false; 2 * rec.n_max + 1];
        for row in &rec.coeffs {
            if row.len() != 1 + system.state_dim() {
                return Err(Error::Config(format!(
                    "coefficient row has {} entries, expected {}",
                    row.len(),
                    1 + system.state_dim()
                )));
            }
            let m = row[0];
            if m.fract() != 0.0 || m.abs() > rec.n_max as f64 {
                return Err(Error::Config(format!("invalid mode index {m}")));
            }
            let m = m as i64;
            let slot = (m + rec.n_max as i64) as usize;
            if seen[slot] {
                return Err(Error::Config(format!("mode {m} listed twice")));
            }
            seen[slot] = true;
            out.mode_mut(m).copy_from_slice(&row[1..]);
        }
        if !out.is_finite() {
            return Err(Error::Config("loop coefficients must be finite".into()));
        }
        Ok(out)
    }
}

impl SpectralLoop {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&LoopRecord::from(self)).expect("loop serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: LoopRecord = serde_json::from_str(text)?;
        SpectralLoop::try_from(&rec)
    }
}
