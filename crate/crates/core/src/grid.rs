//! The cyclic group `Z_N^d` as a finite model of `R^d`.
//!
//! Signals are stored row-major (last axis fastest). Every operation here is
//! a pure function returning a new value.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Largest number of cells a grid may hold.
pub const MAX_CELLS: usize = 1 << 28;

/// Shape and sample spacing of a finite grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Points per axis.
    pub n: Vec<usize>,
    /// Sample spacing per axis; the Riemann cell volume is their product.
    #[serde(default)]
    pub step: Vec<f64>,
}

impl GridSpec {
    pub fn new(n: &[usize]) -> Result<Self> {
        Self::with_step(n, &vec![1.0; n.len()])
    }

    pub fn with_step(n: &[usize], step: &[f64]) -> Result<Self> {
        let grid = GridSpec {
            n: n.to_vec(),
            step: step.to_vec(),
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Fills in unit steps when deserialized without them, then checks the
    /// invariants.
    pub fn normalized(mut self) -> Result<Self> {
        if self.step.is_empty() {
            self.step = vec![1.0; self.n.len()];
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        if self.step.len() != self.n.len() {
            return Err(Error::InvalidGrid(format!(
                "{} steps for {} axes",
                self.step.len(),
                self.n.len()
            )));
        }
        if let Some(&bad) = self.n.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidGrid(format!("axis length {bad} < 2")));
        }
        if let Some(&bad) = self.step.iter().find(|&&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidGrid(format!("step {bad} is not positive")));
        }
        let mut total: usize = 1;
        for &n in &self.n {
            total = total
                .checked_mul(n)
                .filter(|&t| t <= MAX_CELLS)
                .ok_or_else(|| Error::InvalidGrid("more than 2^28 cells".into()))?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    /// Total number of cells.
    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.step.iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.n)
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        ravel(&self.n, idx)
    }

    pub fn unravel(&self, flat: usize) -> Vec<usize> {
        unravel(&self.n, flat)
    }

    /// Reduce a signed multi-index componentwise modulo the axis lengths.
    pub fn reduce(&self, idx: &[i64]) -> Result<Vec<usize>> {
        if idx.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: idx.len(),
            });
        }
        Ok(idx
            .iter()
            .zip(&self.n)
            .map(|(&j, &n)| j.rem_euclid(n as i64) as usize)
            .collect())
    }

    /// Physical coordinates of a cell: symmetric representatives times steps.
    pub fn position(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .zip(&self.n)
            .zip(&self.step)
            .map(|((&j, &n), &h)| symmetric_rep(j, n) as f64 * h)
            .collect()
    }

    /// Grid of the same shape with every step equal to one.
    pub fn unit(&self) -> GridSpec {
        GridSpec {
            n: self.n.clone(),
            step: vec![1.0; self.n.len()],
        }
    }

    /// The `2d`-dimensional grid carrying phase-space arrays (time axes,
    /// then frequency axes), with unit steps.
    pub fn phase_space(&self) -> GridSpec {
        let mut n = self.n.clone();
        n.extend_from_slice(&self.n);
        GridSpec {
            step: vec![1.0; n.len()],
            n,
        }
    }
}

/// Representative of `j mod n` in `[-n/2, n/2)`.
pub fn symmetric_rep(j: usize, n: usize) -> i64 {
    let j = (j % n) as i64;
    if 2 * j >= n as i64 {
        j - n as i64
    } else {
        j
    }
}

pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

pub fn ravel(shape: &[usize], idx: &[usize]) -> usize {
    idx.iter().zip(shape).fold(0, |acc, (&i, &n)| acc * n + i)
}

pub fn unravel(shape: &[usize], mut flat: usize) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for k in (0..shape.len()).rev() {
        idx[k] = flat % shape[k];
        flat /= shape[k];
    }
    idx
}

/// A complex signal on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalNd {
    pub grid: GridSpec,
    pub data: Vec<Complex64>,
}

impl SignalNd {
    pub fn new(grid: GridSpec, data: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        if data.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a grid of {} cells",
                data.len(),
                grid.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("signal"));
        }
        Ok(SignalNd { grid, data })
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        SignalNd {
            grid: grid.clone(),
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(&[usize]) -> Complex64) -> Self {
        let data = (0..grid.len()).map(|i| f(&grid.unravel(i))).collect();
        SignalNd {
            grid: grid.clone(),
            data,
        }
    }

    pub fn from_real(grid: &GridSpec, values: &[f64]) -> Result<Self> {
        Self::new(
            grid.clone(),
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn at(&self, idx: &[usize]) -> Complex64 {
        self.data[self.grid.ravel(idx)]
    }

    /// Plain Euclidean norm of the samples (no cell volume).
    pub fn norm_l2(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self, other> = sum self * conj(other)`.
    pub fn inner(&self, other: &SignalNd) -> Complex64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    pub fn scale(&self, c: Complex64) -> SignalNd {
        SignalNd {
            grid: self.grid.clone(),
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn add(&self, other: &SignalNd) -> SignalNd {
        SignalNd {
            grid: self.grid.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &SignalNd) -> SignalNd {
        SignalNd {
            grid: self.grid.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn conj(&self) -> SignalNd {
        SignalNd {
            grid: self.grid.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    /// Largest `|rep(j_i)|` over the support, per axis; `None` for the zero
    /// signal.
    pub fn support_radius(&self) -> Option<Vec<usize>> {
        let mut radius: Option<Vec<usize>> = None;
        for (i, z) in self.data.iter().enumerate() {
            if z.norm_sqr() == 0.0 {
                continue;
            }
            let idx = self.grid.unravel(i);
            let r = radius.get_or_insert_with(|| vec![0; idx.len()]);
            for (k, (&j, &n)) in idx.iter().zip(&self.grid.n).enumerate() {
                r[k] = r[k].max(symmetric_rep(j, n).unsigned_abs() as usize);
            }
        }
        radius
    }

    pub(crate) fn ensure_same_grid(&self, other: &SignalNd) -> Result<()> {
        if self.grid.n != other.grid.n {
            return Err(Error::ShapeMismatch(format!(
                "grids {:?} and {:?} differ",
                self.grid.n, other.grid.n
            )));
        }
        Ok(())
    }
}

/// Values on `Z_N^d x Z_N^d`, indexed `(x, xi)` with the time multi-index
/// first.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceSignal {
    pub grid: GridSpec,
    pub data: Vec<Complex64>,
}

impl PhaseSpaceSignal {
    pub fn new(grid: GridSpec, data: Vec<Complex64>) -> Result<Self> {
        let expected = grid.len() * grid.len();
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a phase space of {expected} cells",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("phase-space signal"));
        }
        Ok(PhaseSpaceSignal { grid, data })
    }

    pub fn at(&self, x: &[usize], xi: &[usize]) -> Complex64 {
        let n = self.grid.len();
        self.data[self.grid.ravel(x) * n + self.grid.ravel(xi)]
    }

    pub fn norm_l2(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// View as a signal on the `2d`-dimensional phase-space grid with unit
    /// steps.
    pub fn to_signal(&self) -> SignalNd {
        SignalNd {
            grid: self.grid.phase_space(),
            data: self.data.clone(),
        }
    }

    /// Same as [`to_signal`](Self::to_signal) with explicit steps.
    pub fn to_signal_with_step(&self, step: &[f64]) -> Result<SignalNd> {
        let mut grid = self.grid.phase_space();
        grid.step = step.to_vec();
        grid.validate()?;
        Ok(SignalNd {
            grid,
            data: self.data.clone(),
        })
    }
}

/// Unnormalized in-place FFT along every axis of a row-major array.
pub(crate) fn fft_nd(data: &mut [Complex64], shape: &[usize], direction: FftDirection) {
    let mut planner = FftPlanner::<f64>::new();
    let st = strides(shape);
    let total: usize = shape.iter().product();
    for (axis, &n) in shape.iter().enumerate() {
        if n == 1 {
            continue;
        }
        let fft = planner.plan_fft(n, direction);
        let stride = st[axis];
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let block = n * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (t, v) in line.iter_mut().enumerate() {
                    *v = data[base + t * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (t, v) in line.iter().enumerate() {
                    data[base + t * stride] = *v;
                }
            }
        }
    }
}

fn check_finite(f: &SignalNd) -> Result<()> {
    if f.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("signal"));
    }
    Ok(())
}

/// Unitary DFT: `f^(k) = N^{-1/2} sum_m f(m) e^{-2 pi i <m,k>/N}`, with
/// `N` the total number of cells.
pub fn dft(f: &SignalNd) -> Result<SignalNd> {
    check_finite(f)?;
    let mut data = f.data.clone();
    fft_nd(&mut data, &f.grid.n, FftDirection::Forward);
    let scale = 1.0 / (f.len() as f64).sqrt();
    data.iter_mut().for_each(|z| *z *= scale);
    Ok(SignalNd {
        grid: f.grid.clone(),
        data,
    })
}

/// Inverse of [`dft`].
pub fn idft(f: &SignalNd) -> Result<SignalNd> {
    check_finite(f)?;
    let mut data = f.data.clone();
    fft_nd(&mut data, &f.grid.n, FftDirection::Inverse);
    let scale = 1.0 / (f.len() as f64).sqrt();
    data.iter_mut().for_each(|z| *z *= scale);
    Ok(SignalNd {
        grid: f.grid.clone(),
        data,
    })
}

/// Cyclic shift: `out[k] = f[k - j mod N]`.
pub fn translate(f: &SignalNd, j: &[i64]) -> Result<SignalNd> {
    let shift = f.grid.reduce(j)?;
    let n = &f.grid.n;
    let mut out = vec![Complex64::new(0.0, 0.0); f.len()];
    for (flat, v) in f.data.iter().enumerate() {
        let idx = unravel(n, flat);
        let target: Vec<usize> = idx
            .iter()
            .zip(&shift)
            .zip(n)
            .map(|((&i, &s), &len)| (i + s) % len)
            .collect();
        out[ravel(n, &target)] = *v;
    }
    Ok(SignalNd {
        grid: f.grid.clone(),
        data: out,
    })
}

/// `out[m] = e^{2 pi i sum_i m_i k_i / N_i} f[m]`.
pub fn modulate(f: &SignalNd, k: &[i64]) -> Result<SignalNd> {
    let freq = f.grid.reduce(k)?;
    let n = &f.grid.n;
    let data = f
        .data
        .iter()
        .enumerate()
        .map(|(flat, v)| v * character(&unravel(n, flat), &freq, n))
        .collect();
    Ok(SignalNd {
        grid: f.grid.clone(),
        data,
    })
}

/// `e^{2 pi i sum_i m_i k_i / N_i}` with the exponent reduced exactly in
/// integer arithmetic before the trigonometric call.
pub(crate) fn character(m: &[usize], k: &[usize], n: &[usize]) -> Complex64 {
    // Reduce each term to a fraction r/N_i in [0, 1), then sum.
    let mut phase = 0.0;
    for ((&mi, &ki), &ni) in m.iter().zip(k).zip(n) {
        let r = ((mi as u128 * ki as u128) % ni as u128) as f64;
        phase += r / ni as f64;
    }
    let phase = phase.fract();
    Complex64::from_polar(1.0, 2.0 * PI * phase)
}

/// Time-frequency shift `pi(j, k) f = modulate(translate(f, j), k)`.
pub fn tf_shift(f: &SignalNd, j: &[i64], k: &[i64]) -> Result<SignalNd> {
    modulate(&translate(f, j)?, k)
}

/// Closed set of test-signal generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalKind {
    /// Periodized Gaussian `sum_k e^{-pi (t + kN)^2 / w}` per axis; `width`
    /// defaults to `N` on each axis.
    Gaussian {
        #[serde(default)]
        width: Option<Vec<f64>>,
    },
    /// Gaussian followed by `order[i]` applications of the discrete creation
    /// stencil along axis `i`, normalized to unit l2 norm.
    Hermite {
        order: Vec<usize>,
        #[serde(default)]
        width: Option<Vec<f64>>,
    },
    /// Unit spike at `at` (default the origin).
    Delta {
        #[serde(default)]
        at: Option<Vec<usize>>,
    },
    /// Complex entries uniform in `[-1,1) + i[-1,1)`.
    Random { seed: u64 },
    /// Indicator of `|rep(j_i)| <= radius[i]` on every axis.
    Block { radius: Vec<usize> },
}

impl SignalKind {
    /// Parse from a JSON value, mapping unknown `kind` tags to
    /// [`Error::UnknownKind`].
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        const KNOWN: [&str; 5] = ["gaussian", "hermite", "delta", "random", "block"];
        let kind = value
            .get("kind")
            .and_then(|k| k.as_str())
            .ok_or_else(|| Error::InvalidParameter("signal needs a `kind`".into()))?;
        if !KNOWN.contains(&kind) {
            return Err(Error::UnknownKind(kind.to_string()));
        }
        serde_json::from_value(value.clone()).map_err(|e| Error::InvalidParameter(e.to_string()))
    }
}

/// Periodized Gaussian sample at symmetric representative `t`. Terms are
/// summed in `|k|`-pairs so `g(t) == g(-t)` bit for bit.
fn periodized_gaussian(t: f64, n: f64, width: f64) -> f64 {
    let term = |k: f64| (-PI * (t + k * n).powi(2) / width).exp();
    let mut sum = term(0.0);
    for k in 1..=8 {
        let k = k as f64;
        sum += term(k) + term(-k);
    }
    sum
}

fn gaussian_axis(n: usize, width: f64) -> Vec<f64> {
    (0..n)
        .map(|j| periodized_gaussian(symmetric_rep(j, n) as f64, n as f64, width))
        .collect()
}

/// One step of `(2 pi / w) t h - h'` with a centered cyclic difference.
fn creation_step(h: &[f64], width: f64) -> Vec<f64> {
    let n = h.len();
    let out: Vec<f64> = (0..n)
        .map(|j| {
            let t = symmetric_rep(j, n) as f64;
            let deriv = (h[(j + 1) % n] - h[(j + n - 1) % n]) / 2.0;
            2.0 * PI / width * t * h[j] - deriv
        })
        .collect();
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    out.iter().map(|v| v / norm).collect()
}

fn per_axis(grid: &GridSpec, v: &Option<Vec<f64>>, default: impl Fn(usize) -> f64) -> Result<Vec<f64>> {
    match v {
        None => Ok(grid.n.iter().map(|&n| default(n)).collect()),
        Some(v) if v.len() == grid.dim() => Ok(v.clone()),
        Some(v) => Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: v.len(),
        }),
    }
}

fn separable(grid: &GridSpec, factors: &[Vec<f64>]) -> SignalNd {
    SignalNd::from_fn(grid, |idx| {
        let v: f64 = idx.iter().zip(factors).map(|(&j, f)| f[j]).product();
        Complex64::new(v, 0.0)
    })
}

/// Deterministic test signal of the requested kind.
pub fn standard_signal(grid: &GridSpec, kind: &SignalKind) -> Result<SignalNd> {
    grid.validate()?;
    match kind {
        SignalKind::Gaussian { width } => {
            let w = per_axis(grid, width, |n| n as f64)?;
            if w.iter().any(|&w| w.is_nan() || w <= 0.0) {
                return Err(Error::InvalidParameter("gaussian width must be positive".into()));
            }
            let factors: Vec<_> = grid.n.iter().zip(&w).map(|(&n, &w)| gaussian_axis(n, w)).collect();
            Ok(separable(grid, &factors))
        }
        SignalKind::Hermite { order, width } => {
            if order.len() != grid.dim() {
                return Err(Error::DimensionMismatch {
                    expected: grid.dim(),
                    got: order.len(),
                });
            }
            let w = per_axis(grid, width, |n| n as f64)?;
            let factors: Vec<_> = grid
                .n
                .iter()
                .zip(&w)
                .zip(order)
                .map(|((&n, &w), &ord)| {
                    let mut h = gaussian_axis(n, w);
                    let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
                    h.iter_mut().for_each(|v| *v /= norm);
                    for _ in 0..ord {
                        h = creation_step(&h, w);
                    }
                    h
                })
                .collect();
            Ok(separable(grid, &factors))
        }
        SignalKind::Delta { at } => {
            let at = at.clone().unwrap_or_else(|| vec![0; grid.dim()]);
            if at.len() != grid.dim() {
                return Err(Error::DimensionMismatch {
                    expected: grid.dim(),
                    got: at.len(),
                });
            }
            let at: Vec<usize> = at.iter().zip(&grid.n).map(|(&j, &n)| j % n).collect();
            let mut f = SignalNd::zeros(grid);
            f.data[grid.ravel(&at)] = Complex64::new(1.0, 0.0);
            Ok(f)
        }
        SignalKind::Random { seed } => {
            let mut r = rng::seeded(*seed);
            Ok(SignalNd {
                grid: grid.clone(),
                data: rng::complex_vec(&mut r, grid.len()),
            })
        }
        SignalKind::Block { radius } => {
            if radius.len() != grid.dim() {
                return Err(Error::DimensionMismatch {
                    expected: grid.dim(),
                    got: radius.len(),
                });
            }
            Ok(SignalNd::from_fn(grid, |idx| {
                let inside = idx
                    .iter()
                    .zip(&grid.n)
                    .zip(radius)
                    .all(|((&j, &n), &r)| symmetric_rep(j, n).unsigned_abs() as usize <= r);
                Complex64::new(if inside { 1.0 } else { 0.0 }, 0.0)
            }))
        }
    }
}
