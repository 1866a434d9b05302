//! Discrete and semi-discrete convolutions, dilation pullbacks, and numerical
//! checkers for the convolution estimates in weighted mixed-norm and Wiener
//! spaces.
//!
//! Every checker draws one random instance from a seed, evaluates both sides
//! of an inequality `lhs <= C * prod(factors)` and reports
//! `ratio = lhs / (C * prod(factors))`. The constant `C` is always an
//! explicit certificate computed on the torus, so a ratio above `1 + tol`
//! means a bug or a genuine counterexample.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, GridSpec, SignalNd};
use crate::mixed_norms::{
    collapse_values, iterated_lebesgue_norm, ratio_or_one, wiener_norm, wiener_norm_by,
    Exponent, ExponentVector, MixedNormSpec, Permutation, SequenceNd,
};
use crate::rng::{self, SeededRng};
use crate::weights::{Weight, WeightFn};

/// Boundary handling for [`conv`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvMode {
    /// Indices wrap around the common box.
    Cyclic,
    /// Inputs extended by zero; the output box is the Minkowski sum.
    ZeroPadded,
}

/// `(a * b)(j) = sum_m a(m) b(j - m)`.
pub fn conv(a: &SequenceNd, b: &SequenceNd, mode: ConvMode) -> Result<SequenceNd> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let zero = Complex64::new(0.0, 0.0);
    match mode {
        ConvMode::Cyclic => {
            if a.shape != b.shape {
                return Err(Error::ShapeMismatch(format!(
                    "cyclic convolution needs equal boxes, got {:?} and {:?}",
                    a.shape, b.shape
                )));
            }
            let shape = &a.shape;
            let mut out = vec![zero; a.len()];
            for (m, &am) in a.data.iter().enumerate() {
                if am == zero {
                    continue;
                }
                let mi = grid::unravel(shape, m);
                for (k, &bk) in b.data.iter().enumerate() {
                    let ki = grid::unravel(shape, k);
                    let j: Vec<usize> = mi
                        .iter()
                        .zip(&ki)
                        .zip(shape)
                        .map(|((x, y), n)| (x + y) % n)
                        .collect();
                    out[grid::ravel(shape, &j)] += am * bk;
                }
            }
            SequenceNd::new(shape.clone(), a.origin.clone(), out)
        }
        ConvMode::ZeroPadded => {
            let shape: Vec<usize> = a.shape.iter().zip(&b.shape).map(|(x, y)| x + y - 1).collect();
            let origin: Vec<i64> = a.origin.iter().zip(&b.origin).map(|(x, y)| x + y).collect();
            let mut out = vec![zero; shape.iter().product()];
            for (m, &am) in a.data.iter().enumerate() {
                if am == zero {
                    continue;
                }
                let mi = grid::unravel(&a.shape, m);
                for (k, &bk) in b.data.iter().enumerate() {
                    let ki = grid::unravel(&b.shape, k);
                    let j: Vec<usize> = mi.iter().zip(&ki).map(|(x, y)| x + y).collect();
                    out[grid::ravel(&shape, &j)] += am * bk;
                }
            }
            SequenceNd::new(shape, origin, out)
        }
    }
}

fn check_divides(values: &[usize], n: &[usize]) -> Result<()> {
    if values.len() != n.len() {
        return Err(Error::DimensionMismatch {
            expected: n.len(),
            got: values.len(),
        });
    }
    for (axis, (&t, &len)) in values.iter().zip(n).enumerate() {
        if t == 0 || len % t != 0 {
            return Err(Error::Divisibility { axis, step: t, len });
        }
    }
    Ok(())
}

/// Semi-discrete convolution `(a *_[theta] f)(x) = sum_j a(j) f(x - T_theta j)`
/// on the torus. Coefficient indices are reduced modulo `N / theta`.
pub fn semidiscrete_conv(a: &SequenceNd, f: &SignalNd, theta: &[usize]) -> Result<SignalNd> {
    let n = &f.grid.n;
    check_divides(theta, n)?;
    if a.dim() != n.len() {
        return Err(Error::DimensionMismatch {
            expected: n.len(),
            got: a.dim(),
        });
    }
    let mut out = SignalNd::zeros(&f.grid);
    for (flat, &coef) in a.data.iter().enumerate() {
        if coef == Complex64::new(0.0, 0.0) {
            continue;
        }
        let shift: Vec<usize> = a
            .coords(flat)
            .iter()
            .zip(theta)
            .zip(n)
            .map(|((&j, &t), &len)| (j * t as i64).rem_euclid(len as i64) as usize)
            .collect();
        for (src, &v) in f.data.iter().enumerate() {
            let idx = grid::unravel(n, src);
            let dst: Vec<usize> = idx
                .iter()
                .zip(&shift)
                .zip(n)
                .map(|((&i, &s), &len)| (i + s) % len)
                .collect();
            out.data[grid::ravel(n, &dst)] += coef * v;
        }
    }
    Ok(out)
}

/// `T_theta^* f`: `out[j] = f[T_theta j]` on the grid of `N / theta` points
/// per axis (same steps).
pub fn dilation_pullback(f: &SignalNd, theta: &[usize]) -> Result<SignalNd> {
    check_divides(theta, &f.grid.n)?;
    let small: Vec<usize> = f.grid.n.iter().zip(theta).map(|(n, t)| n / t).collect();
    let grid = GridSpec {
        n: small.clone(),
        step: f.grid.step.clone(),
    };
    if small.iter().any(|&n| n < 2) {
        return Err(Error::InvalidParameter(format!(
            "pullback grid {small:?} has an axis shorter than 2"
        )));
    }
    Ok(SignalNd::from_fn(&grid, |idx| {
        let src: Vec<usize> = idx.iter().zip(theta).map(|(i, t)| i * t).collect();
        f.at(&src)
    }))
}

/// `max_{x, j} omega(x) / (omega(x - T_theta j) v(T_theta j))` over every
/// cell `x` and lattice translate `T_theta j` of the torus, at physical
/// positions. This is the constant in `omega(x) <= C omega(x - y) v(y)`
/// for exactly the translates a semi-discrete convolution uses.
pub fn lattice_moderation_constant(
    omega: &Weight,
    v: &Weight,
    grid: &GridSpec,
    theta: &[usize],
) -> Result<f64> {
    check_divides(theta, &grid.n)?;
    let w = omega.sample_grid(grid)?;
    v.validate_for_grid(grid)?;
    let lattice: Vec<usize> = grid.n.iter().zip(theta).map(|(n, t)| n / t).collect();
    let shifts: Vec<Vec<usize>> = (0..lattice.iter().product())
        .map(|k| {
            grid::unravel(&lattice, k)
                .iter()
                .zip(theta)
                .map(|(j, t)| j * t)
                .collect()
        })
        .collect();
    let mut c: f64 = 0.0;
    for y in &shifts {
        let vy = v.eval(&grid.position(y));
        for x in 0..grid.len() {
            let xi = grid.unravel(x);
            let diff: Vec<usize> = xi
                .iter()
                .zip(y)
                .zip(&grid.n)
                .map(|((&a, &b), &n)| (a + n - b) % n)
                .collect();
            c = c.max(w[x] / (w[grid.ravel(&diff)] * vy));
        }
    }
    Ok(c)
}

/// One named factor on the right-hand side of an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedNorm {
    pub name: String,
    pub value: f64,
}

/// Both sides of one checked instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvEstimateReport {
    pub kind: String,
    pub seed: u64,
    pub lhs: f64,
    pub rhs_factors: Vec<NamedNorm>,
    /// The certified constant `C`.
    pub constant: f64,
    /// `C * prod(rhs_factors)`.
    pub constant_bound: f64,
    pub ratio: f64,
    /// `lhs / prod(rhs_factors)`: the constant this instance alone needs.
    pub fitted_constant: f64,
    pub tol: f64,
    pub passed: bool,
    pub params: serde_json::Value,
}

impl ConvEstimateReport {
    fn build(
        kind: &str,
        seed: u64,
        lhs: f64,
        rhs_factors: Vec<NamedNorm>,
        constant: f64,
        tol: f64,
        params: serde_json::Value,
    ) -> Result<Self> {
        let product: f64 = rhs_factors.iter().map(|f| f.value).product();
        let constant_bound = constant * product;
        let ratio = ratio_or_one(lhs, constant_bound)?;
        let fitted_constant = ratio_or_one(lhs, product)?;
        for (v, what) in [(lhs, "lhs"), (constant_bound, "bound"), (ratio, "ratio")] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{kind}: {what} is not finite")));
            }
        }
        Ok(ConvEstimateReport {
            kind: kind.to_string(),
            seed,
            lhs,
            rhs_factors,
            constant,
            constant_bound,
            ratio,
            fitted_constant,
            tol,
            passed: ratio <= 1.0 + tol,
            params,
        })
    }

    /// Column names of [`csv_row`](Self::csv_row).
    pub const CSV_HEADER: &'static str =
        "kind,seed,lhs,constant,constant_bound,ratio,fitted_constant,tol,passed,rhs_factors,params";

    /// Flat CSV record; floats with 17 significant digits.
    pub fn csv_row(&self) -> String {
        let factors: Vec<String> = self
            .rhs_factors
            .iter()
            .map(|f| format!("{}={}", f.name, fmt17(f.value)))
            .collect();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.kind,
            self.seed,
            fmt17(self.lhs),
            fmt17(self.constant),
            fmt17(self.constant_bound),
            fmt17(self.ratio),
            fmt17(self.fitted_constant),
            fmt17(self.tol),
            self.passed,
            csv_quote(&factors.join(";")),
            csv_quote(&self.params.to_string()),
        )
    }
}

/// `{:.16e}`: 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// How the random inputs of a checker are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Draw {
    /// Uniform complex entries.
    #[default]
    Complex,
    /// Uniform entries in `[0, 1)`.
    NonNegative,
    /// Coefficient sequence `a = delta_0`, signal drawn as `Complex`.
    DeltaCoefficients,
}

fn draw_values(rng: &mut SeededRng, len: usize, draw: Draw) -> Vec<Complex64> {
    match draw {
        Draw::NonNegative => rng::complex_vec(rng, len)
            .into_iter()
            .map(|z| Complex64::new(0.5 * (z.re + 1.0), 0.0))
            .collect(),
        _ => rng::complex_vec(rng, len),
    }
}

fn draw_coefficients(rng: &mut SeededRng, shape: &[usize], draw: Draw) -> SequenceNd {
    match draw {
        Draw::DeltaCoefficients => SequenceNd::delta(shape),
        _ => {
            let len = shape.iter().product();
            SequenceNd::from_data(shape, draw_values(rng, len, draw)).expect("finite draws")
        }
    }
}

fn draw_signal(rng: &mut SeededRng, grid: &GridSpec, draw: Draw) -> SignalNd {
    let draw = if draw == Draw::DeltaCoefficients { Draw::Complex } else { draw };
    SignalNd {
        grid: grid.clone(),
        data: draw_values(rng, grid.len(), draw),
    }
}

/// Mixed norm of `|a(j)| v(T_theta j)` with `a` indexed on `Z_{N/theta}^d` and
/// positions taken as symmetric representatives on the torus.
fn lattice_sequence_norm(
    a: &SequenceNd,
    v: &Weight,
    grid: &GridSpec,
    theta: &[usize],
    p: &ExponentVector,
    sigma: &Permutation,
) -> Result<f64> {
    let values: Vec<f64> = (0..a.len())
        .map(|flat| {
            let cell: Vec<usize> = a
                .coords(flat)
                .iter()
                .zip(theta)
                .zip(&grid.n)
                .map(|((&j, &t), &n)| (j * t as i64).rem_euclid(n as i64) as usize)
                .collect();
            a.data[flat].norm() * v.eval(&grid.position(&cell))
        })
        .collect();
    collapse_values(&values, &a.shape, p, sigma, None)
}

/// Instance parameters for the semi-discrete convolution estimate
/// `||a *_[theta] f||_{L^p_{sigma,(omega)}} <= C ||a||_{l^r_{sigma,(v_theta)}} ||f||_{L^p_{sigma,(omega)}}`
/// with `r_k = min_{m<=k}(1, p_m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemidiscreteParams {
    pub seed: u64,
    pub n: Vec<usize>,
    /// Lattice step in cells per axis.
    pub theta: Vec<usize>,
    pub p: ExponentVector,
    pub sigma: Permutation,
    pub omega: Weight,
    pub v: Weight,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub draw: Draw,
}

fn default_tol() -> f64 {
    1e-10
}

pub fn check_semidiscrete_estimate(params: &SemidiscreteParams) -> Result<ConvEstimateReport> {
    let grid = GridSpec::new(&params.n)?;
    check_divides(&params.theta, &grid.n)?;
    let spec = MixedNormSpec::new(params.p.clone(), params.sigma.clone(), params.omega.clone())?;
    if params.v.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: params.v.dim(),
        });
    }
    let mut rng = rng::seeded(params.seed);
    let lattice: Vec<usize> = grid.n.iter().zip(&params.theta).map(|(n, t)| n / t).collect();
    let a = draw_coefficients(&mut rng, &lattice, params.draw);
    let f = draw_signal(&mut rng, &grid, params.draw);

    let out = semidiscrete_conv(&a, &f, &params.theta)?;
    let lhs = iterated_lebesgue_norm(&out, &spec)?;
    let r = params.p.cumulative_r();
    let a_norm = lattice_sequence_norm(&a, &params.v, &grid, &params.theta, &r, &params.sigma)?;
    let f_norm = iterated_lebesgue_norm(&f, &spec)?;
    let c = lattice_moderation_constant(&params.omega, &params.v, &grid, &params.theta)?;
    ConvEstimateReport::build(
        "semidiscrete",
        params.seed,
        lhs,
        vec![
            NamedNorm {
                name: "a_lr_sigma_v_theta".into(),
                value: a_norm,
            },
            NamedNorm {
                name: "f_Lp_sigma_omega".into(),
                value: f_norm,
            },
        ],
        c,
        params.tol,
        serde_json::to_value(params).expect("serializable params"),
    )
}

/// Which convolution the Wiener-space estimate is about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum WienerConvCase {
    /// `f1 * f2` with `f1 in W^{q1}(v, l^{p1})`, `f2 in W^{q2}(omega, l^{p2})`,
    /// output in `W^{q0}(omega, l^{p0})`. Requires `q0, q1, q2 >= 1` and
    /// `1 + 1/q0 = 1/q1 + 1/q2`.
    Functions {
        q0: Exponent,
        q1: Exponent,
        q2: Exponent,
        p0: ExponentVector,
        p1: ExponentVector,
        p2: ExponentVector,
    },
    /// `a *_[theta] f` with `a in l^{p1}(v)`, `f in W^q(omega, l^{p2})`, output
    /// in `W^q(omega, l^{p0})`. Requires `q >= 1` and `theta` a multiple of
    /// the block.
    SemiDiscrete {
        theta: Vec<usize>,
        q: Exponent,
        p0: ExponentVector,
        p1: ExponentVector,
        p2: ExponentVector,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerConvParams {
    pub seed: u64,
    pub n: Vec<usize>,
    /// Cells per block; the block is the unit cube, so steps are `1/block`.
    pub block: Vec<usize>,
    #[serde(flatten)]
    pub case: WienerConvCase,
    pub sigma: Permutation,
    pub omega: Weight,
    pub v: Weight,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub draw: Draw,
}

/// Sequence-level hypothesis `l^{p1} * l^{p2} -> l^{p0}` on `Z^d`, per
/// collapse step: either Young (`all >= 1`, `1/p1 + 1/p2 >= 1 + 1/p0`) on
/// every axis, or the quasi-Banach form `p2 = p0`, `p1 <= r(p0)`.
pub fn sequence_conv_admissible(p0: &ExponentVector, p1: &ExponentVector, p2: &ExponentVector) -> bool {
    if p0.len() != p1.len() || p0.len() != p2.len() {
        return false;
    }
    let young = p0.0.iter().zip(&p1.0).zip(&p2.0).all(|((a, b), c)| {
        a.value() >= 1.0
            && b.value() >= 1.0
            && c.value() >= 1.0
            && b.recip() + c.recip() >= 1.0 + a.recip() - 1e-12
    });
    let quasi = p2 == p0 && p1.le(&p0.cumulative_r());
    young || quasi
}

fn young_q(q0: Exponent, q1: Exponent, q2: Exponent) -> bool {
    [q0, q1, q2].iter().all(|q| q.value() >= 1.0)
        && (q1.recip() + q2.recip() - 1.0 - q0.recip()).abs() < 1e-12
}

/// `max omega(x) / (v(y) omega(x - y - e))` over block corners `x, y` and
/// `e in {0,1}^d` (or `e = 0` only), at physical positions.
fn block_pair_constant(omega: &Weight, v: &Weight, grid: &GridSpec, block: &[usize], with_carry: bool) -> f64 {
    let bshape: Vec<usize> = grid.n.iter().zip(block).map(|(n, b)| n / b).collect();
    let nb: usize = bshape.iter().product();
    let corner = |k: usize| -> Vec<usize> {
        grid::unravel(&bshape, k).iter().zip(block).map(|(j, b)| j * b).collect()
    };
    let w: Vec<f64> = (0..nb).map(|k| omega.eval(&grid.position(&corner(k)))).collect();
    let vv: Vec<f64> = (0..nb).map(|k| v.eval(&grid.position(&corner(k)))).collect();
    let d = grid.dim();
    let carries: Vec<Vec<usize>> = if with_carry {
        (0..1usize << d).map(|m| (0..d).map(|i| (m >> i) & 1).collect()).collect()
    } else {
        vec![vec![0; d]]
    };
    let mut c: f64 = 0.0;
    for x in 0..nb {
        let xi = grid::unravel(&bshape, x);
        for (y, vy) in vv.iter().enumerate() {
            let yi = grid::unravel(&bshape, y);
            for e in &carries {
                let z: Vec<usize> = (0..d)
                    .map(|i| (xi[i] + 2 * bshape[i] - yi[i] - e[i]) % bshape[i])
                    .collect();
                c = c.max(w[x] / (vy * w[grid::ravel(&bshape, &z)]));
            }
        }
    }
    c
}

/// `max omega(x) / (v(T_theta m) omega(x - T_theta m))` over block corners `x`
/// and lattice translates.
fn block_lattice_constant(omega: &Weight, v: &Weight, grid: &GridSpec, block: &[usize], theta: &[usize]) -> f64 {
    let bshape: Vec<usize> = grid.n.iter().zip(block).map(|(n, b)| n / b).collect();
    let lattice: Vec<usize> = grid.n.iter().zip(theta).map(|(n, t)| n / t).collect();
    let mut c: f64 = 0.0;
    for x in 0..bshape.iter().product() {
        let corner: Vec<usize> = grid::unravel(&bshape, x).iter().zip(block).map(|(j, b)| j * b).collect();
        let wx = omega.eval(&grid.position(&corner));
        for m in 0..lattice.iter().product() {
            let shift: Vec<usize> = grid::unravel(&lattice, m).iter().zip(theta).map(|(j, t)| j * t).collect();
            let diff: Vec<usize> = corner
                .iter()
                .zip(&shift)
                .zip(&grid.n)
                .map(|((&a, &b), &n)| (a + n - b) % n)
                .collect();
            c = c.max(wx / (v.eval(&grid.position(&shift)) * omega.eval(&grid.position(&diff))));
        }
    }
    c
}

/// Riemann convolution `h^d sum_y f1(y) f2(x - y)` on the torus.
fn function_conv(f1: &SignalNd, f2: &SignalNd) -> Result<SignalNd> {
    let shape = &f1.grid.n;
    let a = SequenceNd::from_data(shape, f1.data.clone())?;
    let b = SequenceNd::from_data(shape, f2.data.clone())?;
    let c = conv(&a, &b, ConvMode::Cyclic)?;
    let vol = f1.grid.cell_volume();
    Ok(SignalNd {
        grid: f1.grid.clone(),
        data: c.data.iter().map(|z| z * vol).collect(),
    })
}

pub fn check_wiener_conv_estimate(params: &WienerConvParams) -> Result<ConvEstimateReport> {
    let d = params.n.len();
    check_divides(&params.block, &params.n)?;
    let step: Vec<f64> = params.block.iter().map(|&b| 1.0 / b as f64).collect();
    let grid = GridSpec::with_step(&params.n, &step)?;
    params.omega.validate_for_grid(&grid)?;
    params.v.validate_for_grid(&grid)?;
    if params.sigma.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: params.sigma.len(),
        });
    }
    let mut rng = rng::seeded(params.seed);
    let sigma = &params.sigma;
    let block = &params.block;
    let param_json = serde_json::to_value(params).expect("serializable params");

    match &params.case {
        WienerConvCase::Functions { q0, q1, q2, p0, p1, p2 } => {
            if !young_q(*q0, *q1, *q2) {
                return Err(Error::Hypothesis(format!(
                    "local exponents need q >= 1 and 1 + 1/q0 = 1/q1 + 1/q2, got ({q0}, {q1}, {q2})"
                )));
            }
            if !sequence_conv_admissible(p0, p1, p2) || p0.len() != d {
                return Err(Error::Hypothesis(format!(
                    "l^{:?} * l^{:?} is not known to map into l^{:?}",
                    p1.values(),
                    p2.values(),
                    p0.values()
                )));
            }
            let f1 = draw_signal(&mut rng, &grid, params.draw);
            let f2 = draw_signal(&mut rng, &grid, params.draw);
            let g = function_conv(&f1, &f2)?;
            let lhs = wiener_norm(&g, &params.omega, *q0, p0, sigma, block)?;
            let n1 = wiener_norm(&f1, &params.v, *q1, p1, sigma, block)?;
            let n2 = wiener_norm(&f2, &params.omega, *q2, p2, sigma, block)?;
            let k = block_pair_constant(&params.omega, &params.v, &grid, block, true);
            let r0 = p0.triangle_exponent();
            let constant = k * 2f64.powf(d as f64 / r0);
            ConvEstimateReport::build(
                "wiener_functions",
                params.seed,
                lhs,
                vec![
                    NamedNorm {
                        name: "f1_W_q1_v_p1".into(),
                        value: n1,
                    },
                    NamedNorm {
                        name: "f2_W_q2_omega_p2".into(),
                        value: n2,
                    },
                ],
                constant,
                params.tol,
                param_json,
            )
        }
        WienerConvCase::SemiDiscrete { theta, q, p0, p1, p2 } => {
            check_divides(theta, &params.n)?;
            if theta.iter().zip(block).any(|(t, b)| t % b != 0) {
                return Err(Error::Hypothesis(format!(
                    "lattice step {theta:?} must be a multiple of the block {block:?}"
                )));
            }
            if q.value() < 1.0 {
                return Err(Error::Hypothesis(format!("local exponent q = {q} must be >= 1")));
            }
            if !sequence_conv_admissible(p0, p1, p2) || p0.len() != d {
                return Err(Error::Hypothesis(format!(
                    "l^{:?} * l^{:?} is not known to map into l^{:?}",
                    p1.values(),
                    p2.values(),
                    p0.values()
                )));
            }
            let lattice: Vec<usize> = params.n.iter().zip(theta).map(|(n, t)| n / t).collect();
            let a = draw_coefficients(&mut rng, &lattice, params.draw);
            let f = draw_signal(&mut rng, &grid, params.draw);
            let g = semidiscrete_conv(&a, &f, theta)?;
            let lhs = wiener_norm(&g, &params.omega, *q, p0, sigma, block)?;
            let na = lattice_sequence_norm(&a, &params.v, &grid, theta, p1, sigma)?;
            let nf = wiener_norm(&f, &params.omega, *q, p2, sigma, block)?;
            let constant = block_lattice_constant(&params.omega, &params.v, &grid, block, theta);
            ConvEstimateReport::build(
                "wiener_semidiscrete",
                params.seed,
                lhs,
                vec![
                    NamedNorm {
                        name: "a_lp1_sigma_v".into(),
                        value: na,
                    },
                    NamedNorm {
                        name: "f_W_q_omega_p2".into(),
                        value: nf,
                    },
                ],
                constant,
                params.tol,
                param_json,
            )
        }
    }
}

/// Instance parameters for the dilation estimate
/// `||T_theta^* f||_{W^q(T_theta^* omega, l^p_sigma)} <= C prod_k theta_k^{-1/q} floor(1 + 1/theta_k)^{1/p_sigma(k)} ||f||_{W^q(omega, l^p_sigma)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilationParams {
    pub seed: u64,
    pub n: Vec<usize>,
    /// Cells per block (the unit cube); steps are `1/block`.
    pub block: Vec<usize>,
    pub theta: Vec<usize>,
    /// Upper bound `R >= max theta` on which the constant may depend.
    pub radius: usize,
    pub q: Exponent,
    pub p: ExponentVector,
    pub sigma: Permutation,
    pub omega: Weight,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub draw: Draw,
}

/// `prod_k theta_k^{-1/q} floor(1 + 1/theta_k)^{1/p_{sigma(k)}}`.
pub fn dilation_factor(theta: &[usize], q: Exponent, p: &ExponentVector, sigma: &Permutation) -> f64 {
    theta
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let t = t as f64;
            let floor = (1.0 + 1.0 / t).floor();
            t.powf(-q.recip()) * floor.powf(p.0[sigma.as_slice()[k]].recip())
        })
        .product()
}

/// `max omega(x) / omega(x + u)` over block corners `x` and block offsets
/// `u in [0, R)^d`.
pub fn local_weight_constant(omega: &Weight, grid: &GridSpec, block: &[usize], radius: usize) -> f64 {
    let bshape: Vec<usize> = grid.n.iter().zip(block).map(|(n, b)| n / b).collect();
    let offsets = vec![radius; grid.dim()];
    let corner = |b: &[usize]| -> Vec<usize> { b.iter().zip(block).map(|(j, s)| j * s).collect() };
    let mut c: f64 = 0.0;
    for x in 0..bshape.iter().product() {
        let xi = grid::unravel(&bshape, x);
        let wx = omega.eval(&grid.position(&corner(&xi)));
        for u in 0..offsets.iter().product() {
            let ui = grid::unravel(&offsets, u);
            let yi: Vec<usize> = xi.iter().zip(&ui).zip(&bshape).map(|((a, b), n)| (a + b) % n).collect();
            c = c.max(wx / omega.eval(&grid.position(&corner(&yi))));
        }
    }
    c
}

/// The `(omega, R)`-dependent constant of the dilation estimate on the
/// torus:
/// `K_R * R^{d (1/q + (1/q - 1)_+ + 1/r)}` with `r = min(1, min p)`.
///
/// Sampling `f` at `T_theta j` cannot gain the factor `theta^{-d/q}` that a
/// change of variables gives for functions, and one pulled-back block meets
/// up to `prod theta_k` blocks of `f`; both losses are bounded by powers
/// of `R`.
pub fn dilation_constant(omega: &Weight, grid: &GridSpec, block: &[usize], radius: usize, q: Exponent, p: &ExponentVector) -> f64 {
    let d = grid.dim() as f64;
    let k = local_weight_constant(omega, grid, block, radius);
    let iq = q.recip();
    let r = p.triangle_exponent();
    k * (radius as f64).powf(d * (iq + (iq - 1.0).max(0.0) + 1.0 / r))
}

pub fn check_dilation_estimate(params: &DilationParams) -> Result<ConvEstimateReport> {
    let d = params.n.len();
    check_divides(&params.block, &params.n)?;
    check_divides(&params.theta, &params.n)?;
    if params.p.len() != d || params.sigma.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: params.p.len(),
        });
    }
    if params.theta.iter().any(|&t| t > params.radius) {
        return Err(Error::InvalidParameter(format!(
            "theta {:?} exceeds R = {}",
            params.theta, params.radius
        )));
    }
    let step: Vec<f64> = params.block.iter().map(|&b| 1.0 / b as f64).collect();
    let grid = GridSpec::with_step(&params.n, &step)?;
    params.omega.validate_for_grid(&grid)?;
    let small: Vec<usize> = params.n.iter().zip(&params.theta).map(|(n, t)| n / t).collect();
    check_divides(&params.block, &small)?;

    let mut rng = rng::seeded(params.seed);
    let f = draw_signal(&mut rng, &grid, params.draw);
    let g = dilation_pullback(&f, &params.theta)?;
    let theta_f: Vec<f64> = params.theta.iter().map(|&t| t as f64).collect();
    let lhs = wiener_norm_by(&g, params.q, &params.p, &params.sigma, &params.block, |x| {
        let scaled: Vec<f64> = x.iter().zip(&theta_f).map(|(a, t)| a * t).collect();
        params.omega.eval(&scaled)
    })?;
    let f_norm = wiener_norm(&f, &params.omega, params.q, &params.p, &params.sigma, &params.block)?;
    let factor = dilation_factor(&params.theta, params.q, &params.p, &params.sigma);
    let constant = dilation_constant(&params.omega, &grid, &params.block, params.radius, params.q, &params.p);
    ConvEstimateReport::build(
        "dilation",
        params.seed,
        lhs,
        vec![
            NamedNorm {
                name: "dilation_factor".into(),
                value: factor,
            },
            NamedNorm {
                name: "f_W_q_omega_p".into(),
                value: f_norm,
            },
        ],
        constant,
        params.tol,
        serde_json::to_value(params).expect("serializable params"),
    )
}

/// Aggregate of a randomized sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub kind: String,
    pub master_seed: u64,
    pub count: usize,
    pub failures: usize,
    pub all_passed: bool,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Largest `lhs / prod(factors)` seen.
    pub max_fitted_constant: f64,
    /// `max fitted / min fitted` over instances with a nonzero left side.
    pub fitted_spread: f64,
    pub reports: Vec<ConvEstimateReport>,
}

impl SweepSummary {
    pub fn from_reports(kind: &str, master_seed: u64, reports: Vec<ConvEstimateReport>) -> Self {
        let failures = reports.iter().filter(|r| !r.passed).count();
        let ratio_min = reports.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
        let ratio_max = reports.iter().map(|r| r.ratio).fold(0.0, f64::max);
        let fitted: Vec<f64> = reports.iter().map(|r| r.fitted_constant).filter(|&c| c > 0.0).collect();
        let fmax = fitted.iter().copied().fold(0.0, f64::max);
        let fmin = fitted.iter().copied().fold(f64::INFINITY, f64::min);
        SweepSummary {
            kind: kind.to_string(),
            master_seed,
            count: reports.len(),
            failures,
            all_passed: failures == 0,
            ratio_min,
            ratio_max,
            max_fitted_constant: fmax,
            fitted_spread: if fitted.is_empty() { 1.0 } else { fmax / fmin },
            reports,
        }
    }
}

fn pick<'a, T>(rng: &mut SeededRng, items: &'a [T]) -> &'a T {
    use rand::Rng;
    &items[rng.gen_range(0..items.len())]
}

fn random_permutation(rng: &mut SeededRng, d: usize) -> Permutation {
    pick(rng, &Permutation::all(d)).clone()
}

fn random_exponents(rng: &mut SeededRng, choices: &[f64], d: usize) -> ExponentVector {
    ExponentVector::new(&(0..d).map(|_| *pick(rng, choices)).collect::<Vec<_>>()).expect("valid choices")
}

fn divisors_up_to(n: usize, max: usize) -> Vec<usize> {
    (1..=max.min(n)).filter(|t| n.is_multiple_of(*t)).collect()
}

/// Parameter space of the semi-discrete sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SemidiscreteSweep {
    pub dims: Vec<usize>,
    pub sizes: Vec<usize>,
    pub thetas: Vec<usize>,
    pub exponents: Vec<f64>,
    /// `(omega, v)` pairs as polynomial orders `s` of `<x>^s`.
    pub weight_orders: Vec<f64>,
    #[serde(default)]
    pub draw: Draw,
}

impl Default for SemidiscreteSweep {
    fn default() -> Self {
        SemidiscreteSweep {
            dims: vec![1],
            sizes: vec![16, 32],
            thetas: vec![1, 2, 4],
            exponents: vec![0.5, 1.0, 2.0, f64::INFINITY],
            weight_orders: vec![1.0],
            draw: Draw::Complex,
        }
    }
}

pub fn semidiscrete_sweep(master_seed: u64, count: usize, domain: &SemidiscreteSweep) -> Result<SweepSummary> {
    let mut reports = Vec::with_capacity(count);
    for i in 0..count {
        let seed = rng::child_seed(master_seed, i as u64);
        let mut r = rng::seeded(seed);
        let d = *pick(&mut r, &domain.dims);
        let n = *pick(&mut r, &domain.sizes);
        let theta: Vec<usize> = (0..d)
            .map(|_| {
                let ok: Vec<usize> = domain.thetas.iter().copied().filter(|t| n.is_multiple_of(*t) && n / t >= 1).collect();
                *pick(&mut r, &ok)
            })
            .collect();
        let s = *pick(&mut r, &domain.weight_orders);
        let params = SemidiscreteParams {
            seed,
            n: vec![n; d],
            theta,
            p: random_exponents(&mut r, &domain.exponents, d),
            sigma: random_permutation(&mut r, d),
            omega: Weight::polynomial(s, d)?,
            v: Weight::polynomial(s.abs(), d)?,
            tol: default_tol(),
            draw: domain.draw,
        };
        reports.push(check_semidiscrete_estimate(&params)?);
    }
    Ok(SweepSummary::from_reports("semidiscrete", master_seed, reports))
}

/// Parameter space of the dilation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DilationSweep {
    pub dims: Vec<usize>,
    pub size: usize,
    pub blocks: Vec<usize>,
    pub thetas: Vec<usize>,
    pub qs: Vec<f64>,
    pub exponents: Vec<f64>,
    pub weight_orders: Vec<f64>,
}

impl Default for DilationSweep {
    fn default() -> Self {
        DilationSweep {
            dims: vec![1],
            size: 32,
            blocks: vec![1, 2],
            thetas: vec![1, 2, 4],
            qs: vec![1.0, 2.0, f64::INFINITY],
            exponents: vec![0.5, 1.0, 2.0, f64::INFINITY],
            weight_orders: vec![0.0, 1.0, -1.0],
        }
    }
}

pub fn dilation_sweep(master_seed: u64, count: usize, domain: &DilationSweep) -> Result<SweepSummary> {
    let radius = *domain.thetas.iter().max().unwrap_or(&1);
    let mut reports = Vec::with_capacity(count);
    for i in 0..count {
        let seed = rng::child_seed(master_seed, i as u64);
        let mut r = rng::seeded(seed);
        let d = *pick(&mut r, &domain.dims);
        let n = domain.size;
        let theta: Vec<usize> = (0..d).map(|_| *pick(&mut r, &domain.thetas)).collect();
        let block_choices: Vec<usize> = domain
            .blocks
            .iter()
            .copied()
            .filter(|b| theta.iter().all(|t| (n / t).is_multiple_of(*b)))
            .collect();
        let b = *pick(&mut r, &block_choices);
        let s = *pick(&mut r, &domain.weight_orders);
        let params = DilationParams {
            seed,
            n: vec![n; d],
            block: vec![b; d],
            theta,
            radius,
            q: Exponent::new(*pick(&mut r, &domain.qs))?,
            p: random_exponents(&mut r, &domain.exponents, d),
            sigma: random_permutation(&mut r, d),
            omega: Weight::polynomial(s, d)?,
            tol: default_tol(),
            draw: Draw::Complex,
        };
        reports.push(check_dilation_estimate(&params)?);
    }
    Ok(SweepSummary::from_reports("dilation", master_seed, reports))
}

/// Parameter space of the Wiener convolution sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WienerSweep {
    pub dims: Vec<usize>,
    pub size: usize,
    pub blocks: Vec<usize>,
    pub weight_orders: Vec<f64>,
}

impl Default for WienerSweep {
    fn default() -> Self {
        WienerSweep {
            dims: vec![1],
            size: 32,
            blocks: vec![1, 2, 4],
            weight_orders: vec![0.0, 1.0],
        }
    }
}

/// Admissible `(q0, q1, q2)` with `1 + 1/q0 = 1/q1 + 1/q2`.
const Q_TRIPLES: [(f64, f64, f64); 5] = [
    (1.0, 1.0, 1.0),
    (2.0, 1.0, 2.0),
    (f64::INFINITY, 2.0, 2.0),
    (f64::INFINITY, 1.0, f64::INFINITY),
    (4.0, 2.0, 4.0 / 3.0),
];

/// Per-axis Young triples `(p0, p1, p2)`.
const P_TRIPLES: [(f64, f64, f64); 4] = [
    (1.0, 1.0, 1.0),
    (2.0, 1.0, 2.0),
    (f64::INFINITY, 2.0, 2.0),
    (f64::INFINITY, 1.0, f64::INFINITY),
];

fn random_sequence_triple(r: &mut SeededRng, d: usize) -> (ExponentVector, ExponentVector, ExponentVector) {
    use rand::Rng;
    if r.gen_bool(0.5) {
        let picks: Vec<(f64, f64, f64)> = (0..d).map(|_| *pick(r, &P_TRIPLES)).collect();
        let e = |f: fn(&(f64, f64, f64)) -> f64| ExponentVector::new(&picks.iter().map(f).collect::<Vec<_>>()).expect("valid");
        (e(|t| t.0), e(|t| t.1), e(|t| t.2))
    } else {
        let p0 = random_exponents(r, &[0.5, 1.0, 2.0, f64::INFINITY], d);
        let p1 = p0.cumulative_r();
        (p0.clone(), p1, p0)
    }
}

pub fn wiener_sweep(master_seed: u64, count: usize, domain: &WienerSweep) -> Result<SweepSummary> {
    use rand::Rng;
    let mut reports = Vec::with_capacity(count);
    for i in 0..count {
        let seed = rng::child_seed(master_seed, i as u64);
        let mut r = rng::seeded(seed);
        let d = *pick(&mut r, &domain.dims);
        let n = domain.size;
        let b = *pick(&mut r, &domain.blocks);
        let (p0, p1, p2) = random_sequence_triple(&mut r, d);
        let case = if r.gen_bool(0.5) {
            let (q0, q1, q2) = *pick(&mut r, &Q_TRIPLES);
            WienerConvCase::Functions {
                q0: Exponent::new(q0)?,
                q1: Exponent::new(q1)?,
                q2: Exponent::new(q2)?,
                p0,
                p1,
                p2,
            }
        } else {
            let thetas: Vec<usize> = divisors_up_to(n, 8).into_iter().filter(|t| t % b == 0).collect();
            let theta: Vec<usize> = (0..d).map(|_| *pick(&mut r, &thetas)).collect();
            WienerConvCase::SemiDiscrete {
                theta,
                q: Exponent::new(*pick(&mut r, &[1.0, 2.0, f64::INFINITY]))?,
                p0,
                p1,
                p2,
            }
        };
        let s = *pick(&mut r, &domain.weight_orders);
        let params = WienerConvParams {
            seed,
            n: vec![n; d],
            block: vec![b; d],
            case,
            sigma: random_permutation(&mut r, d),
            omega: Weight::polynomial(s, d)?,
            v: Weight::polynomial(s.abs(), d)?,
            tol: default_tol(),
            draw: Draw::Complex,
        };
        reports.push(check_wiener_conv_estimate(&params)?);
    }
    Ok(SweepSummary::from_reports("wiener", master_seed, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{dft, standard_signal, SignalKind};

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    fn random_seq(shape: &[usize], seed: u64) -> SequenceNd {
        let mut r = rng::seeded(seed);
        SequenceNd::from_data(shape, rng::complex_vec(&mut r, shape.iter().product())).unwrap()
    }

    #[test]
    fn delta_is_the_unit() {
        let b = random_seq(&[5, 3], 1);
        let out = conv(&SequenceNd::delta(&[5, 3]), &b, ConvMode::Cyclic).unwrap();
        assert_eq!(out.data, b.data);
        let out = conv(&SequenceNd::delta(&[1, 1]), &b, ConvMode::ZeroPadded).unwrap();
        assert_eq!(out.data, b.data);
    }

    #[test]
    fn padded_ones() {
        let a = SequenceNd::from_real(&[2], &[1.0, 1.0]).unwrap();
        let out = conv(&a, &a, ConvMode::ZeroPadded).unwrap();
        assert_eq!(out.data, vec![c(1.0), c(2.0), c(1.0)]);
        assert_eq!(out.shape, vec![3]);
    }

    #[test]
    fn convolution_theorem_unitary() {
        let a = random_seq(&[32], 2);
        let b = random_seq(&[32], 3);
        let ab = conv(&a, &b, ConvMode::Cyclic).unwrap();
        let g = GridSpec::new(&[32]).unwrap();
        let to_sig = |s: &SequenceNd| SignalNd::new(g.clone(), s.data.clone()).unwrap();
        let lhs = dft(&to_sig(&ab)).unwrap();
        let (fa, fb) = (dft(&to_sig(&a)).unwrap(), dft(&to_sig(&b)).unwrap());
        for k in 0..32 {
            let rhs = 32f64.sqrt() * fa.data[k] * fb.data[k];
            assert!((lhs.data[k] - rhs).norm() < 1e-10);
        }
    }

    #[test]
    fn cyclic_conv_commutes_and_is_bilinear() {
        let a = random_seq(&[4, 6], 4);
        let b = random_seq(&[4, 6], 5);
        let e = random_seq(&[4, 6], 6);
        let ab = conv(&a, &b, ConvMode::Cyclic).unwrap();
        let ba = conv(&b, &a, ConvMode::Cyclic).unwrap();
        for (x, y) in ab.data.iter().zip(&ba.data) {
            assert!((x - y).norm() < 1e-12);
        }
        let lam = Complex64::new(0.3, -1.2);
        let combo = SequenceNd::from_data(
            &[4, 6],
            a.data.iter().zip(&e.data).map(|(x, y)| x * lam + y).collect(),
        )
        .unwrap();
        let lhs = conv(&combo, &b, ConvMode::Cyclic).unwrap();
        let eb = conv(&e, &b, ConvMode::Cyclic).unwrap();
        for k in 0..lhs.len() {
            assert!((lhs.data[k] - (ab.data[k] * lam + eb.data[k])).norm() < 1e-12);
        }
    }

    #[test]
    fn conv_rejects_mismatches() {
        assert!(conv(&random_seq(&[4], 1), &random_seq(&[4, 1], 1), ConvMode::Cyclic).is_err());
        assert!(conv(&random_seq(&[4], 1), &random_seq(&[5], 1), ConvMode::Cyclic).is_err());
    }

    #[test]
    fn semidiscrete_examples() {
        let g = GridSpec::new(&[16]).unwrap();
        let f = standard_signal(&g, &SignalKind::Random { seed: 8 }).unwrap();
        let out = semidiscrete_conv(&SequenceNd::delta(&[4]), &f, &[4]).unwrap();
        assert_eq!(out, f);
        let mut a = SequenceNd::delta(&[4]);
        a.data.swap(0, 3);
        let out = semidiscrete_conv(&a, &f, &[4]).unwrap();
        assert_eq!(out, crate::grid::translate(&f, &[12]).unwrap());
        assert!(matches!(
            semidiscrete_conv(&a, &f, &[3]),
            Err(Error::Divisibility { .. })
        ));
    }

    #[test]
    fn semidiscrete_matches_double_loop() {
        let g = GridSpec::new(&[16]).unwrap();
        let f = standard_signal(&g, &SignalKind::Random { seed: 9 }).unwrap();
        let a = random_seq(&[4], 10);
        let out = semidiscrete_conv(&a, &f, &[4]).unwrap();
        for x in 0..16usize {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..4usize {
                acc += a.data[j] * f.data[(x + 16 - 4 * j) % 16];
            }
            assert!((out.data[x] - acc).norm() < 1e-12);
        }
    }

    #[test]
    fn pullback_examples() {
        let g = GridSpec::new(&[8]).unwrap();
        let f = SignalNd::from_real(&g, &[0., 1., 2., 3., 4., 5., 6., 7.]).unwrap();
        let out = dilation_pullback(&f, &[2]).unwrap();
        assert_eq!(out.data, vec![c(0.0), c(2.0), c(4.0), c(6.0)]);
        assert_eq!(dilation_pullback(&f, &[1]).unwrap(), f);
        let k = SignalNd::from_real(&GridSpec::new(&[4, 6]).unwrap(), &[2.5; 24]).unwrap();
        let out = dilation_pullback(&k, &[2, 3]).unwrap();
        assert!(out.data.iter().all(|&z| z == c(2.5)));
        assert_eq!(out.grid.n, vec![2, 2]);
        assert!(dilation_pullback(&f, &[3]).is_err());
    }

    fn semidiscrete_params(p: &[f64], omega: Weight, v: Weight, draw: Draw) -> SemidiscreteParams {
        SemidiscreteParams {
            seed: 77,
            n: vec![16],
            theta: vec![2],
            p: ExponentVector::new(p).unwrap(),
            sigma: Permutation::identity(1),
            omega,
            v,
            tol: 1e-10,
            draw,
        }
    }

    #[test]
    fn young_case_is_sharp() {
        let params = semidiscrete_params(&[1.0], Weight::one(1), Weight::one(1), Draw::NonNegative);
        let rep = check_semidiscrete_estimate(&params).unwrap();
        assert_eq!(rep.constant, 1.0);
        // nonnegative data: equality in l^1 * L^1
        assert!((rep.ratio - 1.0).abs() < 1e-12, "{}", rep.ratio);
        assert!(rep.passed);
        let params = semidiscrete_params(&[1.0], Weight::one(1), Weight::one(1), Draw::Complex);
        let rep = check_semidiscrete_estimate(&params).unwrap();
        assert!(rep.ratio <= 1.0 + 1e-10);
    }

    #[test]
    fn delta_coefficients_pass() {
        for p in [0.5, 1.0, 2.0, f64::INFINITY] {
            let w = Weight::polynomial(1.0, 1).unwrap();
            let params = semidiscrete_params(&[p], w.clone(), w, Draw::DeltaCoefficients);
            let rep = check_semidiscrete_estimate(&params).unwrap();
            assert!((rep.lhs - rep.rhs_factors[1].value).abs() < 1e-12 * rep.lhs);
            assert!(rep.passed);
        }
    }

    #[test]
    fn ratio_is_scale_invariant() {
        // The checker's inputs are drawn internally; scaling is tested on the
        // norms it is assembled from.
        let g = GridSpec::new(&[16]).unwrap();
        let f = standard_signal(&g, &SignalKind::Random { seed: 3 }).unwrap();
        let a = random_seq(&[8], 4);
        let spec = MixedNormSpec::new(
            ExponentVector::new(&[0.5]).unwrap(),
            Permutation::identity(1),
            Weight::polynomial(1.0, 1).unwrap(),
        )
        .unwrap();
        let ratio = |a: &SequenceNd, f: &SignalNd| {
            let lhs = iterated_lebesgue_norm(&semidiscrete_conv(a, f, &[2]).unwrap(), &spec).unwrap();
            lhs / (crate::mixed_norms::iterated_seq_norm(a, &MixedNormSpec::plain(&[0.5]).unwrap()).unwrap()
                * iterated_lebesgue_norm(f, &spec).unwrap())
        };
        let base = ratio(&a, &f);
        let lam = Complex64::new(-3.0, 0.25);
        assert!((ratio(&a.scale(lam), &f) - base).abs() < 1e-12 * base);
        assert!((ratio(&a, &f.scale(lam)) - base).abs() < 1e-12 * base);
    }

    #[test]
    fn semidiscrete_sweep_passes_in_two_dimensions() {
        let domain = SemidiscreteSweep {
            dims: vec![2],
            sizes: vec![8, 16],
            thetas: vec![1, 2, 4],
            exponents: vec![0.5, 1.0, 2.0, f64::INFINITY],
            weight_orders: vec![1.0, -1.0, 2.0],
            draw: Draw::Complex,
        };
        let sweep = semidiscrete_sweep(2024, 40, &domain).unwrap();
        assert!(sweep.all_passed, "{:?}", sweep.reports.iter().find(|r| !r.passed));
    }

    #[test]
    fn lattice_moderation_of_constant_weights_is_one() {
        let g = GridSpec::new(&[8, 8]).unwrap();
        let one = Weight::one(2);
        assert_eq!(lattice_moderation_constant(&one, &one, &g, &[2, 4]).unwrap(), 1.0);
        let e = Weight::exponential(0.3, 1.0, 2).unwrap();
        assert!(lattice_moderation_constant(&e, &e, &g, &[1, 1]).unwrap() <= 1.0 + 1e-12);
    }

    fn wiener_params(case: WienerConvCase, block: usize, draw: Draw) -> WienerConvParams {
        WienerConvParams {
            seed: 5,
            n: vec![16],
            block: vec![block],
            case,
            sigma: Permutation::identity(1),
            omega: Weight::one(1),
            v: Weight::one(1),
            tol: 1e-10,
            draw,
        }
    }

    fn ones_case() -> WienerConvCase {
        let one = ExponentVector::new(&[1.0]).unwrap();
        let q = Exponent::new(1.0).unwrap();
        WienerConvCase::Functions {
            q0: q,
            q1: q,
            q2: q,
            p0: one.clone(),
            p1: one.clone(),
            p2: one,
        }
    }

    #[test]
    fn wiener_young_case() {
        for block in [1, 4, 16] {
            let rep = check_wiener_conv_estimate(&wiener_params(ones_case(), block, Draw::NonNegative)).unwrap();
            assert!(rep.ratio <= 1.0 + 1e-10);
            // W^1(l^1) is L^1, so nonnegative data attains the Young bound
            assert!((rep.fitted_constant - 1.0).abs() < 1e-12, "{}", rep.fitted_constant);
        }
    }

    #[test]
    fn wiener_hypotheses_are_enforced() {
        let one = ExponentVector::new(&[1.0]).unwrap();
        let two = ExponentVector::new(&[2.0]).unwrap();
        let bad_q = WienerConvCase::Functions {
            q0: Exponent::new(1.0).unwrap(),
            q1: Exponent::new(2.0).unwrap(),
            q2: Exponent::new(2.0).unwrap(),
            p0: one.clone(),
            p1: one.clone(),
            p2: one.clone(),
        };
        assert!(matches!(
            check_wiener_conv_estimate(&wiener_params(bad_q, 1, Draw::Complex)),
            Err(Error::Hypothesis(_))
        ));
        let bad_p = WienerConvCase::Functions {
            q0: Exponent::new(1.0).unwrap(),
            q1: Exponent::new(1.0).unwrap(),
            q2: Exponent::new(1.0).unwrap(),
            p0: one.clone(),
            p1: two.clone(),
            p2: two,
        };
        assert!(check_wiener_conv_estimate(&wiener_params(bad_p, 1, Draw::Complex)).is_err());
        let misaligned = WienerConvCase::SemiDiscrete {
            theta: vec![2],
            q: Exponent::new(1.0).unwrap(),
            p0: one.clone(),
            p1: one.clone(),
            p2: one,
        };
        assert!(check_wiener_conv_estimate(&wiener_params(misaligned, 4, Draw::Complex)).is_err());
    }

    #[test]
    fn admissibility() {
        let e = |v: &[f64]| ExponentVector::new(v).unwrap();
        assert!(sequence_conv_admissible(&e(&[2.0]), &e(&[1.0]), &e(&[2.0])));
        assert!(sequence_conv_admissible(&e(&[0.5, 2.0]), &e(&[0.5, 0.5]), &e(&[0.5, 2.0])));
        assert!(!sequence_conv_admissible(&e(&[0.5, 2.0]), &e(&[0.5, 1.0]), &e(&[0.5, 2.0])));
        assert!(!sequence_conv_admissible(&e(&[1.0]), &e(&[2.0]), &e(&[2.0])));
    }

    fn dilation_params(theta: usize, q: f64, p: f64, block: usize, draw: Draw) -> DilationParams {
        DilationParams {
            seed: 11,
            n: vec![16],
            block: vec![block],
            theta: vec![theta],
            radius: 2,
            q: Exponent::new(q).unwrap(),
            p: ExponentVector::new(&[p]).unwrap(),
            sigma: Permutation::identity(1),
            omega: Weight::one(1),
            tol: 1e-10,
            draw,
        }
    }

    #[test]
    fn identity_dilation() {
        let rep = check_dilation_estimate(&dilation_params(1, 2.0, 1.0, 2, Draw::Complex)).unwrap();
        assert!((rep.lhs - rep.rhs_factors[1].value).abs() < 1e-12 * rep.lhs);
        assert_eq!(rep.rhs_factors[0].value, 2.0);
        assert!(rep.passed);
    }

    #[test]
    fn dilation_of_a_constant_in_closed_form() {
        // f = 1 on 16 cells of size 1/2; theta = 2 leaves 8 cells, i.e. 4
        // unit blocks each with local norm 1. ||f|| has 8 such blocks.
        let (q, p) = (2.0f64, 3.0f64);
        let g = GridSpec::with_step(&[16], &[0.5]).unwrap();
        let f = SignalNd::from_real(&g, &[1.0; 16]).unwrap();
        let pulled = dilation_pullback(&f, &[2]).unwrap();
        let qe = Exponent::new(q).unwrap();
        let pe = ExponentVector::new(&[p]).unwrap();
        let id = Permutation::identity(1);
        let lhs = wiener_norm(&pulled, &Weight::one(1), qe, &pe, &id, &[2]).unwrap();
        let rhs_norm = wiener_norm(&f, &Weight::one(1), qe, &pe, &id, &[2]).unwrap();
        assert!((lhs - 4f64.powf(1.0 / p)).abs() < 1e-12);
        assert!((rhs_norm - 8f64.powf(1.0 / p)).abs() < 1e-12);
        let factor = dilation_factor(&[2], qe, &pe, &id);
        assert!((factor - 2f64.powf(-1.0 / q)).abs() < 1e-15);
        let constant = dilation_constant(&Weight::one(1), &g, &[2], 2, qe, &pe);
        // K_R = 1, exponent 1/q + 0 + 1/r with r = 1
        assert!((constant - 2f64.powf(1.0 / q + 1.0)).abs() < 1e-12);
        let ratio = lhs / (factor * constant * rhs_norm);
        assert!((ratio - 2f64.powf(-1.0 / p - 1.0)).abs() < 1e-12);
        assert!(ratio <= 1.0);
    }

    #[test]
    fn dilation_rejects_bad_theta() {
        let mut params = dilation_params(4, 1.0, 1.0, 1, Draw::Complex);
        assert!(check_dilation_estimate(&params).is_err()); // theta > R
        params.radius = 4;
        params.theta = vec![3];
        assert!(check_dilation_estimate(&params).is_err());
    }

    #[test]
    fn small_sweeps_pass() {
        let s = dilation_sweep(1, 30, &DilationSweep::default()).unwrap();
        assert!(s.all_passed, "{:?}", s.reports.iter().find(|r| !r.passed));
        let s = wiener_sweep(2, 30, &WienerSweep::default()).unwrap();
        assert!(s.all_passed, "{:?}", s.reports.iter().find(|r| !r.passed));
        let s = semidiscrete_sweep(3, 30, &SemidiscreteSweep::default()).unwrap();
        assert!(s.all_passed, "{:?}", s.reports.iter().find(|r| !r.passed));
    }

    #[test]
    fn checkers_never_pass_above_tolerance() {
        let s = wiener_sweep(9, 20, &WienerSweep::default()).unwrap();
        for r in &s.reports {
            assert_eq!(r.passed, r.ratio <= 1.0 + r.tol);
        }
    }

    #[test]
    fn csv_row_has_fixed_precision() {
        let rep = check_dilation_estimate(&dilation_params(1, 2.0, 1.0, 2, Draw::Complex)).unwrap();
        let row = rep.csv_row();
        assert!(row.starts_with("dilation,11,"));
        assert!(row.contains("2.0000000000000000e0"));
        assert_eq!(ConvEstimateReport::CSV_HEADER.split(',').count(), 11);
    }
}
