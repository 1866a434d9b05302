//! Iterated weighted mixed quasi-norms.
//!
//! For a permutation `sigma` and exponents `p = (p_1, ..., p_d)` the norm of
//! `a` is obtained by weighting `|a|` with `omega` at the (unpermuted) lattice
//! point, then collapsing data axis `sigma(1)` with `l^{p_1}`, data axis
//! `sigma(2)` with `l^{p_2}`, and so on. `p_k = inf` is a maximum.
//!
//! The Lebesgue variant multiplies each `l^{p_k}` collapse by
//! `step^{1/p_k}` (Riemann sums) and evaluates the weight at cell corners.

pub mod oracle;

use std::fmt;

use num_complex::Complex64;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, SignalNd};
use crate::weights::{Weight, WeightFn};

/// A Lebesgue exponent in `(0, inf]`. Serialized as a number, or the
/// string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(f64);

impl Exponent {
    pub const INF: Exponent = Exponent(f64::INFINITY);

    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && !p.is_nan() {
            Ok(Exponent(p))
        } else {
            Err(Error::InvalidParameter(format!("exponent {p} must lie in (0, inf]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_inf(self) -> bool {
        self.0.is_infinite()
    }

    /// `1/p`, zero for `p = inf`.
    pub fn recip(self) -> f64 {
        if self.is_inf() {
            0.0
        } else {
            1.0 / self.0
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_inf() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_inf() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        let p = match Raw::deserialize(d)? {
            Raw::Num(p) => p,
            Raw::Str(s) if s == "inf" => f64::INFINITY,
            Raw::Str(s) => return Err(de::Error::custom(format!("bad exponent `{s}`"))),
        };
        Exponent::new(p).map_err(de::Error::custom)
    }
}

/// Exponent vector `p in (0, inf]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExponentVector(pub Vec<Exponent>);

impl ExponentVector {
    pub fn new(p: &[f64]) -> Result<Self> {
        p.iter().map(|&v| Exponent::new(v)).collect::<Result<Vec<_>>>().map(ExponentVector)
    }

    pub fn uniform(p: f64, d: usize) -> Result<Self> {
        Self::new(&vec![p; d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().map(|e| e.0).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().map(|e| e.0).fold(0.0, f64::max)
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &ExponentVector) -> bool {
        self.len() == other.len() && self.0.iter().zip(&other.0).all(|(a, b)| a.0 <= b.0)
    }

    /// `min(1, min p)`, the exponent of the quasi-triangle inequality.
    pub fn triangle_exponent(&self) -> f64 {
        self.min().min(1.0)
    }

    /// `r_k = min_{m <= k} (1, p_m)`, the largest admissible convolution
    /// exponents.
    pub fn cumulative_r(&self) -> ExponentVector {
        let mut acc = 1.0f64;
        ExponentVector(
            self.0
                .iter()
                .map(|e| {
                    acc = acc.min(e.0);
                    Exponent(acc)
                })
                .collect(),
        )
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.iter().map(|e| e.0).collect()
    }
}

/// A permutation of the axes. Stored 0-based; serialized 1-based.
///
/// `perm[k]` is the data axis collapsed at step `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(d: usize) -> Self {
        Permutation((0..d).collect())
    }

    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &k in &perm {
            if k >= perm.len() || seen[k] {
                return Err(Error::InvalidParameter(format!("{perm:?} is not a permutation")));
            }
            seen[k] = true;
        }
        Ok(Permutation(perm))
    }

    pub fn from_one_based(perm: &[usize]) -> Result<Self> {
        if perm.contains(&0) {
            return Err(Error::InvalidParameter("permutations are 1-based".into()));
        }
        Self::new(perm.iter().map(|k| k - 1).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.0.len()];
        for (k, &a) in self.0.iter().enumerate() {
            inv[a] = k;
        }
        Permutation(inv)
    }

    /// `(self o other)(k) = self(other(k))`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        Permutation(other.0.iter().map(|&k| self.0[k]).collect())
    }

    /// All permutations of `d` elements in lexicographic order.
    pub fn all(d: usize) -> Vec<Permutation> {
        fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Permutation>) {
            if prefix.len() == used.len() {
                out.push(Permutation(prefix.clone()));
                return;
            }
            for k in 0..used.len() {
                if !used[k] {
                    used[k] = true;
                    prefix.push(k);
                    rec(prefix, used, out);
                    prefix.pop();
                    used[k] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), &mut vec![false; d], &mut out);
        out
    }
}

impl Serialize for Permutation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let one_based: Vec<usize> = self.0.iter().map(|k| k + 1).collect();
        one_based.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        Permutation::from_one_based(&v).map_err(de::Error::custom)
    }
}

/// Everything needed to evaluate an iterated quasi-norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedNormSpec {
    pub p: ExponentVector,
    pub sigma: Permutation,
    pub omega: Weight,
    /// Lattice steps `theta` for sequence norms. Empty means all ones.
    #[serde(default)]
    pub step: Vec<f64>,
}

impl MixedNormSpec {
    pub fn new(p: ExponentVector, sigma: Permutation, omega: Weight) -> Result<Self> {
        let d = p.len();
        let spec = MixedNormSpec {
            p,
            sigma,
            omega,
            step: vec![1.0; d],
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Unweighted spec with the identity permutation.
    pub fn plain(p: &[f64]) -> Result<Self> {
        Self::new(ExponentVector::new(p)?, Permutation::identity(p.len()), Weight::one(p.len()))
    }

    pub fn with_step(mut self, step: &[f64]) -> Result<Self> {
        self.step = step.to_vec();
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn steps(&self) -> Vec<f64> {
        if self.step.is_empty() {
            vec![1.0; self.dim()]
        } else {
            self.step.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.p.len();
        if d == 0 {
            return Err(Error::InvalidParameter("empty exponent vector".into()));
        }
        for (got, what) in [(self.sigma.len(), "sigma"), (self.omega.dim(), "omega")] {
            if got != d {
                return Err(Error::ShapeMismatch(format!("{what} has dimension {got}, p has {d}")));
            }
        }
        if !self.step.is_empty() {
            if self.step.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: self.step.len(),
                });
            }
            if self.step.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
                return Err(Error::InvalidParameter("steps must be positive".into()));
            }
        }
        self.omega.validate()
    }
}

/// Complex values on the box `origin + prod [0, shape_i)` of `Z^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceNd {
    pub shape: Vec<usize>,
    pub origin: Vec<i64>,
    pub data: Vec<Complex64>,
}

impl SequenceNd {
    pub fn new(shape: Vec<usize>, origin: Vec<i64>, data: Vec<Complex64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::ShapeMismatch(format!("bad box shape {shape:?}")));
        }
        if origin.len() != shape.len() {
            return Err(Error::DimensionMismatch {
                expected: shape.len(),
                got: origin.len(),
            });
        }
        if data.len() != shape.iter().product::<usize>() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for box {shape:?}",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("sequence"));
        }
        Ok(SequenceNd { shape, origin, data })
    }

    /// Box anchored at the origin.
    pub fn from_data(shape: &[usize], data: Vec<Complex64>) -> Result<Self> {
        Self::new(shape.to_vec(), vec![0; shape.len()], data)
    }

    pub fn from_real(shape: &[usize], values: &[f64]) -> Result<Self> {
        Self::from_data(shape, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Delta at lattice point zero on a box of the given shape.
    pub fn delta(shape: &[usize]) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); shape.iter().product()];
        data[0] = Complex64::new(1.0, 0.0);
        SequenceNd {
            shape: shape.to_vec(),
            origin: vec![0; shape.len()],
            data,
        }
    }

    /// Re-index a torus signal onto the centered box `[-N/2, N/2)^d` so that
    /// lattice positions coincide with symmetric representatives.
    pub fn from_torus(f: &SignalNd) -> Self {
        let n = &f.grid.n;
        let shape = n.clone();
        let origin: Vec<i64> = n.iter().map(|&len| -((len / 2) as i64)).collect();
        let data = (0..f.len())
            .map(|flat| {
                let box_idx = grid::unravel(&shape, flat);
                let torus: Vec<usize> = box_idx
                    .iter()
                    .zip(&origin)
                    .zip(n)
                    .map(|((&i, &o), &len)| (i as i64 + o).rem_euclid(len as i64) as usize)
                    .collect();
                f.data[grid::ravel(n, &torus)]
            })
            .collect();
        SequenceNd { shape, origin, data }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Integer lattice coordinates of box entry `flat`.
    pub fn coords(&self, flat: usize) -> Vec<i64> {
        grid::unravel(&self.shape, flat)
            .iter()
            .zip(&self.origin)
            .map(|(&i, &o)| i as i64 + o)
            .collect()
    }

    pub fn scale(&self, c: Complex64) -> SequenceNd {
        SequenceNd {
            shape: self.shape.clone(),
            origin: self.origin.clone(),
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }
}

/// `(sum x^p)^{1/p}` with max-scaling; `max` for `p = inf`.
fn lp_reduce(chunk: &[f64], p: Exponent) -> f64 {
    let m = chunk.iter().copied().fold(0.0, f64::max);
    if p.is_inf() || m == 0.0 {
        return m;
    }
    let p = p.value();
    if p == 1.0 {
        return chunk.iter().sum();
    }
    let s: f64 = chunk.iter().map(|&x| (x / m).powf(p)).sum();
    m * s.powf(1.0 / p)
}

/// Collapse a nonnegative array axis by axis in `sigma` order. When `cell` is
/// given, the collapse of data axis `i` with exponent `p` is multiplied by
/// `cell[i]^{1/p}`.
pub fn collapse_values(
    values: &[f64],
    shape: &[usize],
    p: &ExponentVector,
    sigma: &Permutation,
    cell: Option<&[f64]>,
) -> Result<f64> {
    let d = shape.len();
    if p.len() != d || sigma.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if p.len() != d { p.len() } else { sigma.len() },
        });
    }
    if values.len() != shape.iter().product::<usize>() {
        return Err(Error::ShapeMismatch(format!(
            "{} values for shape {shape:?}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("norm input"));
    }
    // Transpose so that sigma(1) is the fastest axis and sigma(d) the slowest.
    let order: Vec<usize> = sigma.as_slice().iter().rev().copied().collect();
    let new_shape: Vec<usize> = order.iter().map(|&a| shape[a]).collect();
    let src_strides = grid::strides(shape);
    let perm_strides: Vec<usize> = order.iter().map(|&a| src_strides[a]).collect();
    let mut cur: Vec<f64> = Vec::with_capacity(values.len());
    let mut idx = vec![0usize; d];
    for _ in 0..values.len() {
        let src: usize = idx.iter().zip(&perm_strides).map(|(i, s)| i * s).sum();
        cur.push(values[src]);
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < new_shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    for (k, &axis) in sigma.as_slice().iter().enumerate() {
        let len = shape[axis];
        let factor = match cell {
            Some(c) if !p.0[k].is_inf() => c[axis].powf(p.0[k].recip()),
            _ => 1.0,
        };
        cur = cur
            .chunks_exact(len)
            .map(|chunk| lp_reduce(chunk, p.0[k]) * factor)
            .collect();
    }
    Ok(cur[0])
}

/// Mixed norm `||a||_{l^p_{sigma,(omega)}(T_theta Z^d)}` with `omega`
/// evaluated at `T_theta j`.
pub fn iterated_seq_norm(a: &SequenceNd, spec: &MixedNormSpec) -> Result<f64> {
    spec.validate()?;
    if a.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: a.dim(),
        });
    }
    let step = spec.steps();
    let values: Vec<f64> = (0..a.len())
        .map(|flat| {
            let pos: Vec<f64> = a
                .coords(flat)
                .iter()
                .zip(&step)
                .map(|(&j, &t)| j as f64 * t)
                .collect();
            a.data[flat].norm() * spec.omega.eval(&pos)
        })
        .collect();
    collapse_values(&values, &a.shape, &spec.p, &spec.sigma, None)
}

/// Riemann model of `||f||_{L^p_{sigma,(omega)}}`: cell volumes from the
/// signal's grid steps, weight at the cell corner (symmetric
/// representative times step). `spec.step` is not used here.
pub fn iterated_lebesgue_norm(f: &SignalNd, spec: &MixedNormSpec) -> Result<f64> {
    spec.validate()?;
    if f.grid.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: f.grid.dim(),
        });
    }
    let w = spec.omega.sample_grid(&f.grid)?;
    let values: Vec<f64> = f.data.iter().zip(&w).map(|(z, w)| z.norm() * w).collect();
    collapse_values(&values, &f.grid.n, &spec.p, &spec.sigma, Some(&f.grid.step))
}

/// Local `L^q` (Riemann) norm of `|f|` on every block of `block` cells,
/// row-major over the block index. `q = inf` takes the maximum.
pub fn block_norms(f: &SignalNd, q: Exponent, block: &[usize]) -> Result<(Vec<usize>, Vec<f64>)> {
    let g = &f.grid;
    if block.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: block.len(),
        });
    }
    for (axis, (&b, &n)) in block.iter().zip(&g.n).enumerate() {
        if b == 0 || n % b != 0 {
            return Err(Error::Divisibility { axis, step: b, len: n });
        }
    }
    let bshape: Vec<usize> = g.n.iter().zip(block).map(|(n, b)| n / b).collect();
    let nblocks: usize = bshape.iter().product();
    let mut acc = vec![0.0f64; nblocks];
    let mut scale = vec![0.0f64; nblocks];
    // two passes: max per block, then scaled power sums
    for (flat, z) in f.data.iter().enumerate() {
        let idx = g.unravel(flat);
        let bidx: Vec<usize> = idx.iter().zip(block).map(|(i, b)| i / b).collect();
        let k = grid::ravel(&bshape, &bidx);
        scale[k] = scale[k].max(z.norm());
    }
    if q.is_inf() {
        return Ok((bshape, scale));
    }
    let qv = q.value();
    for (flat, z) in f.data.iter().enumerate() {
        let idx = g.unravel(flat);
        let bidx: Vec<usize> = idx.iter().zip(block).map(|(i, b)| i / b).collect();
        let k = grid::ravel(&bshape, &bidx);
        if scale[k] > 0.0 {
            acc[k] += (z.norm() / scale[k]).powf(qv);
        }
    }
    let vol = g.cell_volume();
    let out = acc
        .iter()
        .zip(&scale)
        .map(|(&s, &m)| m * (vol * s).powf(1.0 / qv))
        .collect();
    Ok((bshape, out))
}

/// Wiener amalgam norm `W^q(omega, l^p_sigma)`: local `L^q` norms over the
/// blocks `j + Q`, times `omega` at the block's corner cell, collapsed with
/// the unweighted `l^p_sigma` counting norm.
pub fn wiener_norm(
    f: &SignalNd,
    omega: &Weight,
    q: Exponent,
    p: &ExponentVector,
    sigma: &Permutation,
    block: &[usize],
) -> Result<f64> {
    omega.validate_for_grid(&f.grid)?;
    wiener_norm_by(f, q, p, sigma, block, |x| omega.eval(x))
}

/// [`wiener_norm`] with the block weight given as a closure of the corner's
/// physical position.
pub fn wiener_norm_by(
    f: &SignalNd,
    q: Exponent,
    p: &ExponentVector,
    sigma: &Permutation,
    block: &[usize],
    weight: impl Fn(&[f64]) -> f64,
) -> Result<f64> {
    let (bshape, local) = block_norms(f, q, block)?;
    let values: Vec<f64> = local
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let corner: Vec<usize> = grid::unravel(&bshape, k)
                .iter()
                .zip(block)
                .map(|(j, b)| j * b)
                .collect();
            c * weight(&f.grid.position(&corner))
        })
        .collect();
    collapse_values(&values, &bshape, p, sigma, None)
}

/// `||a||_{spec2} / ||a||_{spec1}`, with `0/0 = 1`.
pub fn norm_embedding_ratio(a: &SequenceNd, spec1: &MixedNormSpec, spec2: &MixedNormSpec) -> Result<f64> {
    if spec1.sigma != spec2.sigma || spec1.steps() != spec2.steps() {
        return Err(Error::InvalidParameter(
            "embedding ratio needs matching permutations and lattices".into(),
        ));
    }
    let n1 = iterated_seq_norm(a, spec1)?;
    let n2 = iterated_seq_norm(a, spec2)?;
    ratio_or_one(n2, n1)
}

/// `num / den` with `0/0 = 1`; a zero denominator under a nonzero numerator
/// is an error.
pub fn ratio_or_one(num: f64, den: f64) -> Result<f64> {
    if den == 0.0 {
        if num == 0.0 {
            Ok(1.0)
        } else {
            Err(Error::InvalidParameter(format!("ratio {num}/0")))
        }
    } else {
        Ok(num / den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{standard_signal, GridSpec, SignalKind};

    fn ones(shape: &[usize]) -> SequenceNd {
        SequenceNd::from_real(shape, &vec![1.0; shape.iter().product()]).unwrap()
    }

    #[test]
    fn exponent_serde() {
        let p: ExponentVector = serde_json::from_str(r#"[0.5, 1, "inf"]"#).unwrap();
        assert!(p.0[2].is_inf());
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"[0.5,1.0,"inf"]"#);
        assert!(serde_json::from_str::<Exponent>("0").is_err());
        assert!(serde_json::from_str::<Exponent>(r#""infinity""#).is_err());
    }

    #[test]
    fn permutation_serde_is_one_based() {
        let s: Permutation = serde_json::from_str("[2, 1, 3]").unwrap();
        assert_eq!(s.as_slice(), &[1, 0, 2]);
        assert_eq!(serde_json::to_string(&s).unwrap(), "[2,1,3]");
        assert!(serde_json::from_str::<Permutation>("[0, 1]").is_err());
        assert!(serde_json::from_str::<Permutation>("[1, 1]").is_err());
        assert_eq!(Permutation::all(3).len(), 6);
    }

    #[test]
    fn cumulative_r() {
        let p = ExponentVector::new(&[2.0, 0.5, f64::INFINITY, 0.25]).unwrap();
        assert_eq!(p.cumulative_r().values(), vec![1.0, 0.5, 0.5, 0.25]);
        assert_eq!(p.triangle_exponent(), 0.25);
    }

    #[test]
    fn double_sum_and_sup() {
        let a = ones(&[3, 3]);
        assert_eq!(iterated_seq_norm(&a, &MixedNormSpec::plain(&[1.0, 1.0]).unwrap()).unwrap(), 9.0);
        let a = SequenceNd::from_real(&[2, 2], &[1.0, -5.0, 3.0, 2.0]).unwrap();
        let inf = MixedNormSpec::plain(&[f64::INFINITY, f64::INFINITY]).unwrap();
        assert_eq!(iterated_seq_norm(&a, &inf).unwrap(), 5.0);
    }

    #[test]
    fn mixed_one_two() {
        let a = ones(&[2, 2]);
        let spec = MixedNormSpec::plain(&[1.0, 2.0]).unwrap();
        let v = iterated_seq_norm(&a, &spec).unwrap();
        assert!((v - 8f64.sqrt()).abs() < 1e-15);
        let swapped = MixedNormSpec::new(
            spec.p.clone(),
            Permutation::new(vec![1, 0]).unwrap(),
            Weight::one(2),
        )
        .unwrap();
        assert!((iterated_seq_norm(&a, &swapped).unwrap() - 8f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sigma_selects_the_collapse_order() {
        // rows (1,0) and (0,1)... a = [[3, 4], [0, 0]]: l^1 over axis 1 then
        // l^inf over axis 0 gives 7; l^1 over axis 0 then l^inf gives 4.
        let a = SequenceNd::from_real(&[2, 2], &[3.0, 4.0, 0.0, 0.0]).unwrap();
        let p = ExponentVector::new(&[1.0, f64::INFINITY]).unwrap();
        let along_axis1 =
            MixedNormSpec::new(p.clone(), Permutation::new(vec![1, 0]).unwrap(), Weight::one(2)).unwrap();
        let along_axis0 = MixedNormSpec::new(p, Permutation::identity(2), Weight::one(2)).unwrap();
        assert_eq!(iterated_seq_norm(&a, &along_axis1).unwrap(), 7.0);
        assert_eq!(iterated_seq_norm(&a, &along_axis0).unwrap(), 4.0);
    }

    #[test]
    fn weight_uses_lattice_positions() {
        let a = SequenceNd::new(vec![1, 1], vec![3, 4], vec![Complex64::new(2.0, 0.0)]).unwrap();
        let spec = MixedNormSpec::new(
            ExponentVector::uniform(1.0, 2).unwrap(),
            Permutation::identity(2),
            Weight::polynomial(2.0, 2).unwrap(),
        )
        .unwrap();
        assert!((iterated_seq_norm(&a, &spec).unwrap() - 52.0).abs() < 1e-12);
        // theta = (2, 1): weight at (6, 4) -> 1 + 36 + 16 = 53
        let spec = spec.with_step(&[2.0, 1.0]).unwrap();
        assert!((iterated_seq_norm(&a, &spec).unwrap() - 106.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let a = ones(&[2, 2]);
        assert!(iterated_seq_norm(&a, &MixedNormSpec::plain(&[1.0]).unwrap()).is_err());
        assert!(SequenceNd::from_real(&[2], &[f64::NAN, 1.0]).is_err());
        assert!(MixedNormSpec::new(
            ExponentVector::uniform(1.0, 2).unwrap(),
            Permutation::identity(3),
            Weight::one(2)
        )
        .is_err());
    }

    #[test]
    fn lebesgue_cell_volume() {
        let g = GridSpec::with_step(&[4, 4], &[0.5, 0.25]).unwrap();
        let mut f = SignalNd::zeros(&g);
        f.data[5] = Complex64::new(1.0, 0.0);
        let l1 = iterated_lebesgue_norm(&f, &MixedNormSpec::plain(&[1.0, 1.0]).unwrap()).unwrap();
        assert!((l1 - 0.125).abs() < 1e-15);
        let linf = MixedNormSpec::plain(&[f64::INFINITY, f64::INFINITY]).unwrap();
        assert_eq!(iterated_lebesgue_norm(&f, &linf).unwrap(), 1.0);
    }

    #[test]
    fn lebesgue_with_unit_steps_matches_sequence_norm() {
        let g = GridSpec::new(&[6, 4]).unwrap();
        let f = standard_signal(&g, &SignalKind::Random { seed: 4 }).unwrap();
        let spec = MixedNormSpec::new(
            ExponentVector::new(&[0.5, 3.0]).unwrap(),
            Permutation::new(vec![1, 0]).unwrap(),
            Weight::polynomial(1.5, 2).unwrap(),
        )
        .unwrap();
        let a = iterated_lebesgue_norm(&f, &spec).unwrap();
        let b = iterated_seq_norm(&SequenceNd::from_torus(&f), &spec).unwrap();
        assert!((a - b).abs() <= 1e-12 * b);
    }

    #[test]
    fn lebesgue_scaling_under_refinement() {
        // A piecewise-constant function resampled on a grid twice as fine
        // has the same L^p norm.
        let coarse = GridSpec::with_step(&[8], &[1.0]).unwrap();
        let fine = GridSpec::with_step(&[16], &[0.5]).unwrap();
        let vals: Vec<f64> = (0..8).map(|i| (i as f64 - 3.0).abs() + 0.5).collect();
        let fc = SignalNd::from_real(&coarse, &vals).unwrap();
        let ff = SignalNd::from_real(&fine, &(0..16).map(|i| vals[i / 2]).collect::<Vec<_>>()).unwrap();
        for p in [0.5, 1.0, 2.0, 3.5] {
            let spec = MixedNormSpec::plain(&[p]).unwrap();
            let a = iterated_lebesgue_norm(&fc, &spec).unwrap();
            let b = iterated_lebesgue_norm(&ff, &spec).unwrap();
            assert!((a - b).abs() < 1e-12 * a, "p = {p}");
        }
    }

    #[test]
    fn wiener_examples() {
        let g = GridSpec::new(&[8, 8]).unwrap();
        let one = SignalNd::from_real(&g, &[1.0; 64]).unwrap();
        let inf = ExponentVector::uniform(f64::INFINITY, 2).unwrap();
        let id = Permutation::identity(2);
        let w = wiener_norm(&one, &Weight::one(2), Exponent::INF, &inf, &id, &[2, 4]).unwrap();
        assert_eq!(w, 1.0);

        let delta = standard_signal(&g, &SignalKind::Delta { at: Some(vec![3, 5]) }).unwrap();
        let l1 = ExponentVector::uniform(1.0, 2).unwrap();
        assert_eq!(wiener_norm(&delta, &Weight::one(2), Exponent::INF, &l1, &id, &[2, 2]).unwrap(), 1.0);

        assert!(matches!(
            wiener_norm(&one, &Weight::one(2), Exponent::INF, &l1, &id, &[3, 2]),
            Err(Error::Divisibility { axis: 0, .. })
        ));
    }

    #[test]
    fn wiener_with_unit_blocks_is_the_sequence_norm() {
        let g = GridSpec::new(&[8, 6]).unwrap();
        let f = standard_signal(&g, &SignalKind::Random { seed: 12 }).unwrap();
        let omega = Weight::exponential(0.2, 1.0, 2).unwrap();
        let p = ExponentVector::new(&[2.0, 0.5]).unwrap();
        let sigma = Permutation::new(vec![1, 0]).unwrap();
        let w = wiener_norm(&f, &omega, Exponent::INF, &p, &sigma, &[1, 1]).unwrap();
        let spec = MixedNormSpec::new(p, sigma, omega).unwrap();
        let s = iterated_seq_norm(&SequenceNd::from_torus(&f), &spec).unwrap();
        assert!((w - s).abs() <= 1e-12 * s);
    }

    #[test]
    fn embedding_ratio() {
        let a = SequenceNd::from_real(&[3, 2], &[1.0, -2.0, 0.5, 0.0, 3.0, 1.0]).unwrap();
        let s1 = MixedNormSpec::plain(&[1.0, 1.0]).unwrap();
        assert_eq!(norm_embedding_ratio(&a, &s1, &s1).unwrap(), 1.0);
        let s2 = MixedNormSpec::plain(&[2.0, 2.0]).unwrap();
        assert!(norm_embedding_ratio(&a, &s1, &s2).unwrap() <= 1.0 + 1e-12);
        let zero = SequenceNd::from_real(&[2], &[0.0, 0.0]).unwrap();
        let z = MixedNormSpec::plain(&[1.0]).unwrap();
        assert_eq!(norm_embedding_ratio(&zero, &z, &z).unwrap(), 1.0);
        assert!(ratio_or_one(1.0, 0.0).is_err());
    }
}
