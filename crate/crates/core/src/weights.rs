//! Closed-form weight families and empirical moderateness certificates.
//!
//! A weight `omega` is `v`-moderate when `omega(x + y) <= C omega(x) v(y)`.
//! The certificates here sample that ratio on a finite box and report the
//! largest value seen; they are regression guards, not proofs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, GridSpec};

/// Largest admissible `ln` of a weight value on a grid (`e^700 < 1e300`).
pub const MAX_LOG_WEIGHT: f64 = 690.0;

/// Anything that can be evaluated as a positive weight. [`Weight`] is the only
/// shipped implementation; the trait lets tests feed hand-built
/// counterexamples to the certificate routines.
pub trait WeightFn {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
}

/// The shipped weight families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Weight {
    /// `c > 0` everywhere.
    Constant { c: f64, dim: usize },
    /// `<x>^s = (1 + |x|^2)^{s/2}`.
    Polynomial { s: f64, dim: usize },
    /// `exp(r |x|^{1/s})` with `s >= 1`.
    Exponential { r: f64, s: f64, dim: usize },
    /// `prod_i w_i(x_i)` with one-dimensional factors.
    Anisotropic { factors: Vec<Weight> },
    Product { left: Box<Weight>, right: Box<Weight> },
    Reciprocal { inner: Box<Weight> },
    Sum { left: Box<Weight>, right: Box<Weight> },
}

fn bracket_sq(x: &[f64]) -> f64 {
    1.0 + x.iter().map(|v| v * v).sum::<f64>()
}

fn euclid(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl Weight {
    pub fn constant(c: f64, dim: usize) -> Result<Self> {
        let w = Weight::Constant { c, dim };
        w.validate()?;
        Ok(w)
    }

    pub fn one(dim: usize) -> Self {
        Weight::Constant { c: 1.0, dim }
    }

    pub fn polynomial(s: f64, dim: usize) -> Result<Self> {
        let w = Weight::Polynomial { s, dim };
        w.validate()?;
        Ok(w)
    }

    pub fn exponential(r: f64, s: f64, dim: usize) -> Result<Self> {
        let w = Weight::Exponential { r, s, dim };
        w.validate()?;
        Ok(w)
    }

    pub fn anisotropic(factors: Vec<Weight>) -> Result<Self> {
        let w = Weight::Anisotropic { factors };
        w.validate()?;
        Ok(w)
    }

    pub fn product(left: Weight, right: Weight) -> Result<Self> {
        let w = Weight::Product {
            left: Box::new(left),
            right: Box::new(right),
        };
        w.validate()?;
        Ok(w)
    }

    pub fn reciprocal(inner: Weight) -> Self {
        Weight::Reciprocal {
            inner: Box::new(inner),
        }
    }

    pub fn sum(left: Weight, right: Weight) -> Result<Self> {
        let w = Weight::Sum {
            left: Box::new(left),
            right: Box::new(right),
        };
        w.validate()?;
        Ok(w)
    }

    pub fn dim(&self) -> usize {
        match self {
            Weight::Constant { dim, .. }
            | Weight::Polynomial { dim, .. }
            | Weight::Exponential { dim, .. } => *dim,
            Weight::Anisotropic { factors } => factors.len(),
            Weight::Product { left, .. } | Weight::Sum { left, .. } => left.dim(),
            Weight::Reciprocal { inner } => inner.dim(),
        }
    }

    /// Structural checks: positive finite parameters, matching dimensions,
    /// `s >= 1` for the exponential family.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            Weight::Constant { c, dim } => {
                if !(*c > 0.0 && c.is_finite()) {
                    return bad(format!("constant weight {c} must be positive"));
                }
                if *dim == 0 {
                    return bad("weight dimension must be positive".into());
                }
            }
            Weight::Polynomial { s, dim } => {
                if !s.is_finite() {
                    return bad(format!("polynomial exponent {s} is not finite"));
                }
                if *dim == 0 {
                    return bad("weight dimension must be positive".into());
                }
            }
            Weight::Exponential { r, s, dim } => {
                if !r.is_finite() {
                    return bad(format!("exponential rate {r} is not finite"));
                }
                if !(*s >= 1.0 && s.is_finite()) {
                    return bad(format!("exponential weights need s >= 1, got {s}"));
                }
                if *dim == 0 {
                    return bad("weight dimension must be positive".into());
                }
            }
            Weight::Anisotropic { factors } => {
                if factors.is_empty() {
                    return bad("anisotropic weight needs at least one factor".into());
                }
                for f in factors {
                    f.validate()?;
                    if f.dim() != 1 {
                        return bad("anisotropic factors must be one-dimensional".into());
                    }
                }
            }
            Weight::Product { left, right } | Weight::Sum { left, right } => {
                left.validate()?;
                right.validate()?;
                if left.dim() != right.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: left.dim(),
                        got: right.dim(),
                    });
                }
            }
            Weight::Reciprocal { inner } => inner.validate()?,
        }
        Ok(())
    }

    /// Upper bound for `|ln w(x)|` over `|x| <= radius` (per-axis radius for
    /// anisotropic weights is taken as the same scalar).
    pub fn log_bound(&self, radius: f64) -> f64 {
        match self {
            Weight::Constant { c, .. } => c.ln().abs(),
            Weight::Polynomial { s, .. } => 0.5 * s.abs() * (1.0 + radius * radius).ln(),
            Weight::Exponential { r, s, .. } => r.abs() * radius.powf(1.0 / s),
            Weight::Anisotropic { factors } => factors.iter().map(|f| f.log_bound(radius)).sum(),
            Weight::Product { left, right } => left.log_bound(radius) + right.log_bound(radius),
            Weight::Sum { left, right } => {
                left.log_bound(radius).max(right.log_bound(radius)) + std::f64::consts::LN_2
            }
            Weight::Reciprocal { inner } => inner.log_bound(radius),
        }
    }

    /// Reject parameters that would overflow on the given grid (values are
    /// kept inside `(1e-300, 1e300)`).
    pub fn validate_for_grid(&self, grid: &GridSpec) -> Result<()> {
        self.validate()?;
        if self.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                got: self.dim(),
            });
        }
        let radius = grid
            .n
            .iter()
            .zip(&grid.step)
            .map(|(&n, &h)| (n as f64 / 2.0 * h).powi(2))
            .sum::<f64>()
            .sqrt();
        let bound = self.log_bound(radius);
        if bound > MAX_LOG_WEIGHT {
            return Err(Error::InvalidParameter(format!(
                "weight grows to e^{bound:.1} on this grid (limit e^{MAX_LOG_WEIGHT})"
            )));
        }
        Ok(())
    }

    /// Weight values at every grid cell (symmetric representatives times
    /// steps), row-major.
    pub fn sample_grid(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        self.validate_for_grid(grid)?;
        Ok((0..grid.len())
            .map(|i| self.eval(&grid.position(&grid.unravel(i))))
            .collect())
    }

    /// Checked evaluation.
    pub fn try_eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.eval(x))
    }
}

impl WeightFn for Weight {
    fn dim(&self) -> usize {
        Weight::dim(self)
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Weight::Constant { c, .. } => *c,
            Weight::Polynomial { s, .. } => bracket_sq(x).powf(s / 2.0),
            Weight::Exponential { r, s, .. } => (r * euclid(x).powf(1.0 / s)).exp(),
            Weight::Anisotropic { factors } => factors
                .iter()
                .zip(x)
                .map(|(f, &xi)| f.eval(std::slice::from_ref(&xi)))
                .product(),
            Weight::Product { left, right } => left.eval(x) * right.eval(x),
            Weight::Reciprocal { inner } => 1.0 / inner.eval(x),
            Weight::Sum { left, right } => left.eval(x) + right.eval(x),
        }
    }
}

/// Outcome of sampling `omega(x + y) / (omega(x) v(y))` on a box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModerationCertificate {
    /// Largest sampled ratio.
    pub c_estimate: f64,
    /// Half-width of the sampled box.
    pub radius: f64,
    pub samples_per_axis: usize,
    /// Bound the estimate was compared against.
    pub bound: f64,
    /// Evenness of `v` on the samples; always `true` for plain moderation
    /// checks.
    pub even: bool,
    pub passed: bool,
}

fn box_samples(dim: usize, radius: f64, samples: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = if samples <= 1 {
        vec![0.0]
    } else {
        (0..samples)
            .map(|i| -radius + 2.0 * radius * i as f64 / (samples - 1) as f64)
            .collect()
    };
    let total = axis.len().pow(dim as u32);
    let shape = vec![axis.len(); dim];
    (0..total)
        .map(|flat| grid::unravel(&shape, flat).iter().map(|&i| axis[i]).collect())
        .collect()
}

/// Largest sampled `omega(x + y) / (omega(x) v(y))` over `x, y` on a
/// `samples_per_axis`-point grid of `[-radius, radius]^d`.
pub fn moderation_constant(
    omega: &impl WeightFn,
    v: &impl WeightFn,
    radius: f64,
    samples_per_axis: usize,
) -> Result<ModerationCertificate> {
    moderation_constant_bounded(omega, v, radius, samples_per_axis, f64::INFINITY)
}

/// [`moderation_constant`] compared against `bound`.
pub fn moderation_constant_bounded(
    omega: &impl WeightFn,
    v: &impl WeightFn,
    radius: f64,
    samples_per_axis: usize,
    bound: f64,
) -> Result<ModerationCertificate> {
    if omega.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: omega.dim(),
            got: v.dim(),
        });
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("radius {radius}")));
    }
    let pts = box_samples(omega.dim(), radius, samples_per_axis);
    let w: Vec<f64> = pts.iter().map(|x| omega.eval(x)).collect();
    let vv: Vec<f64> = pts.iter().map(|y| v.eval(y)).collect();
    let mut c: f64 = 0.0;
    let mut sum = vec![0.0; omega.dim()];
    for (x, wx) in pts.iter().zip(&w) {
        for (y, vy) in pts.iter().zip(&vv) {
            for k in 0..sum.len() {
                sum[k] = x[k] + y[k];
            }
            c = c.max(omega.eval(&sum) / (wx * vy));
        }
    }
    Ok(ModerationCertificate {
        c_estimate: c,
        radius,
        samples_per_axis,
        bound,
        even: true,
        passed: c.is_finite() && c <= bound,
    })
}

/// Moderation certificate of `v` against itself plus an evenness check
/// `v(-x) = v(x)` (relative tolerance `1e-12`) on the same samples. An odd
/// weight yields `passed = false`, not an error.
pub fn check_submultiplicative(
    v: &impl WeightFn,
    radius: f64,
    samples_per_axis: usize,
    bound: f64,
) -> Result<ModerationCertificate> {
    let mut cert = moderation_constant_bounded(v, v, radius, samples_per_axis, bound)?;
    let even = box_samples(v.dim(), radius, samples_per_axis).iter().all(|x| {
        let neg: Vec<f64> = x.iter().map(|t| -t).collect();
        let (a, b) = (v.eval(x), v.eval(&neg));
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
    });
    cert.even = even;
    cert.passed = cert.passed && even;
    Ok(cert)
}

/// Smallest `rho` that the enlargement `v <x,xi>^rho` must strictly exceed so
/// that the `M^1` window class embeds into `M^r`: `2d(1 - r)/r`.
pub fn required_rho(d: usize, r: f64) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidParameter(format!("exponent r = {r} must lie in (0, 1]")));
    }
    Ok(2.0 * d as f64 * (1.0 - r) / r)
}

/// `v(z) <z>^rho` with the Japanese bracket `<z> = (1 + |z|^2)^{1/2}`.
pub fn theta_rho(v: &Weight, rho: f64) -> Result<Weight> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!("rho = {rho} must be >= 0")));
    }
    if !v.dim().is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "phase-space weight must have even dimension, got {}",
            v.dim()
        )));
    }
    Weight::product(v.clone(), Weight::polynomial(rho, v.dim())?)
}

/// One representative of every weight family, in dimension `dim`, with
/// parameters drawn from `rng`. Used by randomized tests.
pub fn random_family_members(rng: &mut crate::rng::SeededRng, dim: usize) -> Vec<Weight> {
    use rand::Rng;
    let s = rng.gen_range(-2.0..2.0);
    let r = rng.gen_range(-0.3..0.3);
    let es = rng.gen_range(1.0..3.0);
    let poly = Weight::Polynomial { s, dim };
    let expo = Weight::Exponential { r, s: es, dim };
    let factors = (0..dim)
        .map(|_| Weight::Polynomial {
            s: rng.gen_range(-1.0..1.0),
            dim: 1,
        })
        .collect();
    vec![
        Weight::Constant {
            c: rng.gen_range(0.5..2.0),
            dim,
        },
        poly.clone(),
        expo.clone(),
        Weight::Anisotropic { factors },
        Weight::Product {
            left: Box::new(poly.clone()),
            right: Box::new(expo.clone()),
        },
        Weight::Reciprocal { inner: Box::new(poly) },
        Weight::Sum {
            left: Box::new(Weight::one(dim)),
            right: Box::new(expo),
        },
    ]
}
