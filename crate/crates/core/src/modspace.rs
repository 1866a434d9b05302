//! Modulation, amalgam and Fourier-Lebesgue norms, and ensemble reports that
//! test the norm equivalences and embeddings between them.
//!
//! Phase space is the grid `Z_N^d x Z_N^d` with unit steps, time axes first.
//! Weights on phase space have dimension `2d` and are evaluated at the
//! symmetric representatives `(x, xi)`.
//!
//! An equivalence `A ~ B` is checked as a bounded spread of `A/B` over a
//! random ensemble; exact one-sided inequalities are checked as such.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::convolution::{csv_quote, fmt17};
use crate::error::{Error, Result};
use crate::gabor::{self, GaborSystem, LatticeSpec};
use crate::grid::{self, dft, standard_signal, GridSpec, PhaseSpaceSignal, SignalKind, SignalNd};
use crate::mixed_norms::{
    collapse_values, iterated_lebesgue_norm, ratio_or_one, wiener_norm, Exponent, ExponentVector,
    MixedNormSpec, Permutation,
};
use crate::rng;
use crate::weights::{Weight, WeightFn};

/// Default spread budget for equivalence reports.
pub const DEFAULT_SPREAD_BOUND: f64 = 1e3;

/// Version tag written into every report.
pub const REPORT_SCHEMA: &str = "v1";

/// Mixed norm on phase space together with the analysing window.
#[derive(Debug, Clone, PartialEq)]
pub struct ModNormSpec {
    /// Exponents, permutation and weight over the `2d` phase-space axes.
    pub norm: MixedNormSpec,
    pub window: SignalNd,
}

impl ModNormSpec {
    pub fn new(norm: MixedNormSpec, window: SignalNd) -> Result<Self> {
        let spec = ModNormSpec { norm, window };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.norm.validate()?;
        let d2 = 2 * self.window.grid.dim();
        if self.norm.dim() != d2 {
            return Err(Error::DimensionMismatch {
                expected: d2,
                got: self.norm.dim(),
            });
        }
        if self.window.norm_l2() == 0.0 {
            return Err(Error::InvalidParameter("window is identically zero".into()));
        }
        Ok(())
    }
}

fn phase_norm(v: &PhaseSpaceSignal, norm: &MixedNormSpec) -> Result<f64> {
    let d2 = 2 * v.grid.dim();
    if norm.dim() != d2 {
        return Err(Error::DimensionMismatch {
            expected: d2,
            got: norm.dim(),
        });
    }
    iterated_lebesgue_norm(&v.to_signal(), norm)
}

/// `||V_phi f||_{L^p_{sigma,(omega)}}` on the unit-step phase space.
pub fn modulation_norm(f: &SignalNd, spec: &ModNormSpec) -> Result<f64> {
    spec.validate()?;
    phase_norm(&gabor::stft(f, &spec.window)?, &spec.norm)
}

/// `||V_phi f omega||_{L^{p,q}_*}`: the `l^q` norm over frequency first,
/// then `l^p` over time.
pub fn amalgam_norm(f: &SignalNd, p: Exponent, q: Exponent, omega: &Weight, window: &SignalNd) -> Result<f64> {
    let d = f.grid.dim();
    if omega.dim() != 2 * d {
        return Err(Error::DimensionMismatch {
            expected: 2 * d,
            got: omega.dim(),
        });
    }
    let v = gabor::stft(f, window)?;
    let grid = &f.grid;
    let n = grid.len();
    let mut outer = 0.0f64;
    for x in 0..n {
        let xp = grid.position(&grid.unravel(x));
        let mut inner = 0.0f64;
        for xi in 0..n {
            let mut z = xp.clone();
            z.extend(grid.position(&grid.unravel(xi)));
            let a = v.data[x * n + xi].norm() * omega.eval(&z);
            if q.is_inf() {
                inner = inner.max(a);
            } else {
                inner += a.powf(q.value());
            }
        }
        if !q.is_inf() {
            inner = inner.powf(q.recip());
        }
        if p.is_inf() {
            outer = outer.max(inner);
        } else {
            outer += inner.powf(p.value());
        }
    }
    Ok(if p.is_inf() { outer } else { outer.powf(p.recip()) })
}

/// Exponents and permutation that make [`modulation_norm`] compute
/// [`amalgam_norm`]: frequency axes collapsed first with `q`.
pub fn amalgam_as_mixed(d: usize, p: Exponent, q: Exponent) -> (ExponentVector, Permutation) {
    let mut e = vec![q; d];
    e.extend(vec![p; d]);
    let perm: Vec<usize> = (d..2 * d).chain(0..d).collect();
    (ExponentVector(e), Permutation::new(perm).expect("valid permutation"))
}

/// `(sum_xi |f^(xi)|^q omega(x0, xi)^q)^{1/q}` over the unit-step frequency
/// grid.
pub fn fourier_lebesgue_norm(f: &SignalNd, q: Exponent, omega: &Weight, x_anchor: &[f64]) -> Result<f64> {
    let d = f.grid.dim();
    if omega.dim() != 2 * d || x_anchor.len() != d {
        return Err(Error::DimensionMismatch {
            expected: 2 * d,
            got: omega.dim(),
        });
    }
    let fh = dft(f)?;
    let unit = f.grid.unit();
    let values: Vec<f64> = (0..unit.len())
        .map(|k| {
            let mut z = x_anchor.to_vec();
            z.extend(unit.position(&unit.unravel(k)));
            fh.data[k].norm() * omega.eval(&z)
        })
        .collect();
    let p = ExponentVector(vec![q; d]);
    collapse_values(&values, &unit.n, &p, &Permutation::identity(d), None)
}

/// Weighted mixed `l^p` norm of Gabor coefficients, the weight sampled at
/// the lattice points `(a j, b k)`.
pub fn coefficient_norm(c: &gabor::GaborCoeffs, grid: &GridSpec, norm: &MixedNormSpec) -> Result<f64> {
    let d = grid.dim();
    if norm.dim() != 2 * d {
        return Err(Error::DimensionMismatch {
            expected: 2 * d,
            got: norm.dim(),
        });
    }
    let lattice = &c.lattice;
    let unit = grid.unit();
    let mut shape = c.time_shape.clone();
    shape.extend(&c.freq_shape);
    let nk: usize = c.freq_shape.iter().product();
    let values: Vec<f64> = c
        .data
        .iter()
        .enumerate()
        .map(|(flat, z)| {
            let j: Vec<usize> = grid::unravel(&c.time_shape, flat / nk).iter().zip(&lattice.a).map(|(j, a)| j * a).collect();
            let k: Vec<usize> = grid::unravel(&c.freq_shape, flat % nk).iter().zip(&lattice.b).map(|(k, b)| k * b).collect();
            let mut pos = unit.position(&j);
            pos.extend(unit.position(&k));
            z.norm() * norm.omega.eval(&pos)
        })
        .collect();
    collapse_values(&values, &shape, &norm.p, &norm.sigma, None)
}

/// A named list of per-signal ratios and its extremes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSeries {
    pub name: String,
    pub ratios: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub spread: f64,
}

impl RatioSeries {
    pub fn new(name: &str, ratios: Vec<f64>) -> Self {
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let spread = if ratios.is_empty() {
            1.0
        } else if min > 0.0 {
            max / min
        } else if max == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        RatioSeries {
            name: name.to_string(),
            ratios,
            min,
            max,
            spread,
        }
    }

    fn finite(&self) -> bool {
        self.ratios.iter().all(|r| r.is_finite())
    }
}

/// Outcome of one ensemble experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub schema: String,
    pub experiment: String,
    pub ensemble_size: usize,
    pub ratios: Vec<f64>,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub spread: f64,
    pub bound: f64,
    /// Further ratio series that must also stay within `bound`.
    pub secondary: Vec<RatioSeries>,
    /// Named constants (certified or empirical) the report relies on.
    pub constants: BTreeMap<String, f64>,
    /// Extra pass conditions beyond the spread rule, by name.
    pub checks: BTreeMap<String, bool>,
    pub passed: bool,
    pub metadata: serde_json::Value,
}

impl EquivalenceReport {
    fn build(
        experiment: &str,
        primary: RatioSeries,
        secondary: Vec<RatioSeries>,
        bound: f64,
        constants: BTreeMap<String, f64>,
        checks: BTreeMap<String, bool>,
        metadata: serde_json::Value,
    ) -> Self {
        let spreads_ok = std::iter::once(&primary)
            .chain(&secondary)
            .all(|s| s.finite() && s.spread <= bound);
        let passed = spreads_ok && checks.values().all(|&c| c);
        EquivalenceReport {
            schema: REPORT_SCHEMA.to_string(),
            experiment: experiment.to_string(),
            ensemble_size: primary.ratios.len(),
            ratio_min: primary.min,
            ratio_max: primary.max,
            spread: primary.spread,
            ratios: primary.ratios,
            bound,
            secondary,
            constants,
            checks,
            passed,
            metadata,
        }
    }

    /// Header of [`to_csv`](Self::to_csv).
    pub fn csv_header(&self) -> String {
        let mut cols = vec!["experiment".to_string(), "index".into(), "ratio".into()];
        cols.extend(self.secondary.iter().map(|s| s.name.clone()));
        cols.join(",")
    }

    /// One row per signal; floats with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for (i, r) in self.ratios.iter().enumerate() {
            let mut row = vec![csv_quote(&self.experiment), i.to_string(), fmt17(*r)];
            row.extend(self.secondary.iter().map(|s| s.ratios.get(i).map_or(String::new(), |v| fmt17(*v))));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// A reproducible list of test signals.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub seed: u64,
    pub signals: Vec<SignalNd>,
}

impl Ensemble {
    /// `count` random complex signals; signal `i` uses `child_seed(seed, i)`.
    pub fn random(grid: &GridSpec, seed: u64, count: usize) -> Result<Self> {
        let signals = (0..count)
            .map(|i| standard_signal(grid, &SignalKind::Random { seed: rng::child_seed(seed, i as u64) }))
            .collect::<Result<_>>()?;
        Ok(Ensemble { seed, signals })
    }

    /// Random signals supported where every `|rep(j_i)| <= radius`.
    pub fn supported(grid: &GridSpec, seed: u64, count: usize, radius: usize) -> Result<Self> {
        let mask = standard_signal(
            grid,
            &SignalKind::Block {
                radius: vec![radius; grid.dim()],
            },
        )?;
        let mut e = Self::random(grid, seed, count)?;
        for f in &mut e.signals {
            for (z, m) in f.data.iter_mut().zip(&mask.data) {
                *z *= m;
            }
        }
        Ok(e)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Ensemble {
            seed: self.seed,
            signals: self.signals.iter().map(|f| f.scale(c)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    fn grid(&self) -> Result<&GridSpec> {
        self.signals
            .first()
            .map(|f| &f.grid)
            .ok_or_else(|| Error::InvalidParameter("empty ensemble".into()))
    }
}

fn ensemble_meta(e: &Ensemble, extra: serde_json::Value) -> serde_json::Value {
    let mut m = serde_json::json!({ "ensemble_seed": e.seed, "ensemble_size": e.len() });
    if let (Some(obj), serde_json::Value::Object(x)) = (m.as_object_mut(), extra) {
        obj.extend(x);
    }
    m
}

fn spec_meta(spec: &MixedNormSpec) -> serde_json::Value {
    serde_json::to_value(spec).unwrap_or(serde_json::Value::Null)
}

/// Ratios `||f||_{M, phi1} / ||f||_{M, phi2}`.
pub fn window_independence_report(
    ensemble: &Ensemble,
    phi1: &SignalNd,
    phi2: &SignalNd,
    norm: &MixedNormSpec,
    bound: f64,
) -> Result<EquivalenceReport> {
    let s1 = ModNormSpec::new(norm.clone(), phi1.clone())?;
    let s2 = ModNormSpec::new(norm.clone(), phi2.clone())?;
    let ratios = ensemble
        .signals
        .iter()
        .map(|f| ratio_or_one(modulation_norm(f, &s1)?, modulation_norm(f, &s2)?))
        .collect::<Result<Vec<_>>>()?;
    let primary = RatioSeries::new("window_ratio", ratios);
    let mut constants = BTreeMap::new();
    constants.insert("c_empirical".into(), primary.max);
    Ok(EquivalenceReport::build(
        "window_independence",
        primary,
        vec![],
        bound,
        constants,
        BTreeMap::new(),
        ensemble_meta(ensemble, serde_json::json!({ "norm": spec_meta(norm) })),
    ))
}

/// `max omega2 / omega1` over the phase-space grid.
pub fn weight_domination_constant(omega2: &Weight, omega1: &Weight, grid: &GridSpec) -> Result<f64> {
    let phase = grid.unit().phase_space();
    let w1 = omega1.sample_grid(&phase)?;
    let w2 = omega2.sample_grid(&phase)?;
    Ok(w1.iter().zip(&w2).map(|(a, b)| b / a).fold(0.0, f64::max))
}

/// Ratios `||f||_{spec2} / ||f||_{spec1}` for the same window. With
/// `p1 <= p2` and `omega2 <= c omega1` every ratio is at most `c`.
pub fn embedding_report(
    ensemble: &Ensemble,
    spec1: &MixedNormSpec,
    spec2: &MixedNormSpec,
    window: &SignalNd,
    tol: f64,
    bound: f64,
) -> Result<EquivalenceReport> {
    if !spec1.p.le(&spec2.p) {
        return Err(Error::Hypothesis(format!(
            "exponents {:?} are not below {:?}",
            spec1.p.values(),
            spec2.p.values()
        )));
    }
    if spec1.sigma != spec2.sigma {
        return Err(Error::Hypothesis("embedding needs one permutation for both norms".into()));
    }
    let m1 = ModNormSpec::new(spec1.clone(), window.clone())?;
    let m2 = ModNormSpec::new(spec2.clone(), window.clone())?;
    let c = weight_domination_constant(&spec2.omega, &spec1.omega, ensemble.grid()?)?;
    let ratios = ensemble
        .signals
        .iter()
        .map(|f| ratio_or_one(modulation_norm(f, &m2)?, modulation_norm(f, &m1)?))
        .collect::<Result<Vec<_>>>()?;
    let primary = RatioSeries::new("embedding_ratio", ratios);
    let mut checks = BTreeMap::new();
    checks.insert("ratio_max_below_c".into(), primary.max <= c * (1.0 + tol));
    let mut constants = BTreeMap::new();
    constants.insert("c_weight".into(), c);
    Ok(EquivalenceReport::build(
        "embedding",
        primary,
        vec![],
        bound,
        constants,
        checks,
        ensemble_meta(
            ensemble,
            serde_json::json!({ "spec1": spec_meta(spec1), "spec2": spec_meta(spec2), "tol": tol }),
        ),
    ))
}

/// Ratios of the modulation norm to the lattice coefficient norms with the
/// window (primary) and with the dual window (secondary).
pub fn gabor_equivalence_report(
    ensemble: &Ensemble,
    sys: &GaborSystem,
    norm: &MixedNormSpec,
    bound: f64,
) -> Result<EquivalenceReport> {
    let psi = sys.dual_window()?;
    let spec = ModNormSpec::new(norm.clone(), sys.window.clone())?;
    let grid = sys.grid();
    let mut by_window = Vec::with_capacity(ensemble.len());
    let mut by_dual = Vec::with_capacity(ensemble.len());
    for f in &ensemble.signals {
        let cont = modulation_norm(f, &spec)?;
        let cw = coefficient_norm(&gabor::analysis_with(f, &sys.window, &sys.lattice)?, grid, norm)?;
        let cd = coefficient_norm(&gabor::analysis_with(f, psi, &sys.lattice)?, grid, norm)?;
        by_window.push(ratio_or_one(cont, cw)?);
        by_dual.push(ratio_or_one(cont, cd)?);
    }
    let mut constants = BTreeMap::new();
    constants.insert("redundancy".into(), sys.redundancy());
    Ok(EquivalenceReport::build(
        "gabor_equivalence",
        RatioSeries::new("continuous_over_window_coefficients", by_window),
        vec![RatioSeries::new("continuous_over_dual_coefficients", by_dual)],
        bound,
        constants,
        BTreeMap::new(),
        ensemble_meta(
            ensemble,
            serde_json::json!({ "norm": spec_meta(norm), "lattice": sys.lattice }),
        ),
    ))
}

/// Ratios `||V_phi1 f||_{L^p_{sigma,(omega)}} / ||V_phi2 f||_{W(omega, l^p_sigma)}`.
///
/// The block is the unit cube, so phase space is given steps `1/block` for
/// both norms (the weight is evaluated at the rescaled positions). With
/// `phi1 = phi2` and `omega = 1` every ratio is at most one, which is
/// recorded as the check `sup_domination`.
pub fn wiener_equivalence_report(
    ensemble: &Ensemble,
    phi1: &SignalNd,
    phi2: &SignalNd,
    norm: &MixedNormSpec,
    block: &[usize],
    bound: f64,
) -> Result<EquivalenceReport> {
    let grid = ensemble.grid()?;
    let d2 = 2 * grid.dim();
    if block.len() != d2 {
        return Err(Error::DimensionMismatch {
            expected: d2,
            got: block.len(),
        });
    }
    let step: Vec<f64> = block.iter().map(|&b| 1.0 / b as f64).collect();
    let inf = Exponent::INF;
    let mut ratios = Vec::with_capacity(ensemble.len());
    for f in &ensemble.signals {
        let v1 = gabor::stft(f, phi1)?.to_signal_with_step(&step)?;
        let v2 = gabor::stft(f, phi2)?.to_signal_with_step(&step)?;
        let plain = iterated_lebesgue_norm(&v1, norm)?;
        let w = wiener_norm(&v2, &norm.omega, inf, &norm.p, &norm.sigma, block)?;
        ratios.push(ratio_or_one(plain, w)?);
    }
    let primary = RatioSeries::new("plain_over_wiener", ratios);
    let mut checks = BTreeMap::new();
    let unweighted = norm.omega.sample_grid(&grid.phase_space())?.iter().all(|&w| w == 1.0);
    if phi1 == phi2 && unweighted {
        checks.insert("sup_domination".into(), primary.max <= 1.0 + 1e-12);
    }
    Ok(EquivalenceReport::build(
        "wiener_equivalence",
        primary,
        vec![],
        bound,
        BTreeMap::new(),
        checks,
        ensemble_meta(ensemble, serde_json::json!({ "norm": spec_meta(norm), "block": block })),
    ))
}

/// Parameters of [`compact_support_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompactSupportSpec {
    pub support_radius: usize,
    pub q: Exponent,
    pub p_list: Vec<Exponent>,
    /// Weight on phase space.
    pub omega: Weight,
    pub window: SignalNd,
}

/// For signals supported in a centered block, compares the lattice
/// `M^{p,q}` and `W^{p,q}` norms for every `p` in `p_list` with `FL^q`.
///
/// The time lattice is `a = N/2`, `b = 1`. Supports are required to satisfy
/// `R_f + R_phi < N/2` on every axis, so every time shift other than the
/// origin misses the support of `f` and only `x = 0` contributes. The
/// per-signal ratio is the max over min of all these norms.
pub fn compact_support_report(ensemble: &Ensemble, spec: &CompactSupportSpec, bound: f64) -> Result<EquivalenceReport> {
    let grid = ensemble.grid()?.clone();
    let d = grid.dim();
    let rphi = spec
        .window
        .support_radius()
        .ok_or_else(|| Error::InvalidParameter("window is identically zero".into()))?;
    for (axis, &n) in grid.n.iter().enumerate() {
        if n % 2 != 0 || 2 * (spec.support_radius + rphi[axis]) >= n {
            return Err(Error::InvalidParameter(format!(
                "axis {axis}: supports {} + {} do not fit in half of {n}",
                spec.support_radius, rphi[axis]
            )));
        }
    }
    for f in &ensemble.signals {
        if let Some(r) = f.support_radius() {
            if r.iter().any(|&r| r > spec.support_radius) {
                return Err(Error::InvalidParameter(format!(
                    "signal support {r:?} exceeds radius {}",
                    spec.support_radius
                )));
            }
        }
    }
    if spec.p_list.is_empty() {
        return Err(Error::InvalidParameter("p_list is empty".into()));
    }
    let a: Vec<usize> = grid.n.iter().map(|n| n / 2).collect();
    let sys = GaborSystem::new(spec.window.clone(), LatticeSpec::new(&a, &vec![1; d]))?;
    let anchor = vec![0.0; d];

    let specs: Vec<(String, MixedNormSpec)> = spec
        .p_list
        .iter()
        .flat_map(|&p| {
            let m = MixedNormSpec {
                p: ExponentVector([vec![p; d], vec![spec.q; d]].concat()),
                sigma: Permutation::identity(2 * d),
                omega: spec.omega.clone(),
                step: vec![],
            };
            let (wp, ws) = amalgam_as_mixed(d, p, spec.q);
            let w = MixedNormSpec {
                p: wp,
                sigma: ws,
                omega: spec.omega.clone(),
                step: vec![],
            };
            [(format!("M^{{{p},{}}}", spec.q), m), (format!("W^{{{p},{}}}", spec.q), w)]
        })
        .collect();

    let mut ratios = Vec::with_capacity(ensemble.len());
    let mut fl_over_first = Vec::with_capacity(ensemble.len());
    for f in &ensemble.signals {
        let c = gabor::analysis(f, &sys)?;
        let mut norms = specs
            .iter()
            .map(|(_, s)| coefficient_norm(&c, &grid, s))
            .collect::<Result<Vec<_>>>()?;
        let fl = fourier_lebesgue_norm(f, spec.q, &spec.omega, &anchor)?;
        fl_over_first.push(ratio_or_one(fl, norms[0])?);
        norms.push(fl);
        let hi = norms.iter().copied().fold(0.0, f64::max);
        let lo = norms.iter().copied().fold(f64::INFINITY, f64::min);
        ratios.push(ratio_or_one(hi, lo)?);
    }
    let mut constants = BTreeMap::new();
    constants.insert("max_per_signal_spread".into(), ratios.iter().copied().fold(0.0, f64::max));
    Ok(EquivalenceReport::build(
        "compact_support",
        RatioSeries::new("max_over_min_norm", ratios),
        vec![RatioSeries::new("fourier_lebesgue_over_first_modulation", fl_over_first)],
        bound,
        constants,
        BTreeMap::new(),
        ensemble_meta(
            ensemble,
            serde_json::json!({
                "support_radius": spec.support_radius,
                "q": spec.q,
                "p_list": spec.p_list,
                "norms": specs.iter().map(|(n, _)| n.clone()).chain(std::iter::once(format!("FL^{}", spec.q))).collect::<Vec<_>>(),
            }),
        ),
    ))
}

/// Parameters of [`local_bound_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBoundSpec {
    /// Gaussian width per axis; `None` means `N`.
    pub width: Option<Vec<f64>>,
    pub p: Exponent,
    /// Euclidean ball radius in phase-space cells.
    pub radius: f64,
    pub n_centers: usize,
    pub center_seed: u64,
}

/// `|V f(z0)| / ||V f||_{l^p(B_r(z0))}` on the discrete ball.
pub fn local_ratio(v: &PhaseSpaceSignal, center: &[usize], radius: f64, p: Exponent) -> f64 {
    let phase = v.grid.phase_space();
    let r = radius.floor() as i64;
    let d2 = phase.dim();
    let span = vec![(2 * r + 1) as usize; d2];
    let mut acc = 0.0f64;
    for o in 0..span.iter().product() {
        let off: Vec<i64> = grid::unravel(&span, o).iter().map(|&u| u as i64 - r).collect();
        if off.iter().map(|&u| (u * u) as f64).sum::<f64>() > radius * radius {
            continue;
        }
        let idx: Vec<usize> = center
            .iter()
            .zip(&off)
            .zip(&phase.n)
            .map(|((&c, &u), &n)| (c as i64 + u).rem_euclid(n as i64) as usize)
            .collect();
        let a = v.data[phase.ravel(&idx)].norm();
        if p.is_inf() {
            acc = acc.max(a);
        } else {
            acc += a.powf(p.value());
        }
    }
    let ball = if p.is_inf() { acc } else { acc.powf(p.recip()) };
    let at = v.data[phase.ravel(center)].norm();
    if ball == 0.0 {
        0.0
    } else {
        at / ball
    }
}

/// Local bound of the Gaussian STFT by its `l^p` norm on a ball. For each
/// signal the primary series holds the max ratio over random centers and the
/// secondary series the ratio at the origin. The check `center_independent`
/// requires the two batch maxima to agree within a factor 2.
pub fn local_bound_report(ensemble: &Ensemble, spec: &LocalBoundSpec, bound: f64) -> Result<EquivalenceReport> {
    let grid = ensemble.grid()?.clone();
    if grid.n.iter().any(|&n| 2.0 * spec.radius >= n as f64) {
        return Err(Error::InvalidParameter(format!(
            "ball radius {} exceeds the half period of {:?}",
            spec.radius, grid.n
        )));
    }
    if spec.radius.is_nan() || spec.radius < 0.0 || spec.n_centers == 0 {
        return Err(Error::InvalidParameter("need a radius >= 0 and at least one center".into()));
    }
    let phi = standard_signal(&grid, &SignalKind::Gaussian { width: spec.width.clone() })?;
    let phase = grid.phase_space();
    let mut crng = rng::seeded(spec.center_seed);
    let centers: Vec<Vec<usize>> = (0..spec.n_centers)
        .map(|_| {
            use rand::Rng;
            phase.n.iter().map(|&n| crng.gen_range(0..n)).collect()
        })
        .collect();
    let origin = vec![0; phase.dim()];
    let mut off = Vec::with_capacity(ensemble.len());
    let mut at_origin = Vec::with_capacity(ensemble.len());
    for f in &ensemble.signals {
        let v = gabor::stft(f, &phi)?;
        off.push(centers.iter().map(|c| local_ratio(&v, c, spec.radius, spec.p)).fold(0.0, f64::max));
        at_origin.push(local_ratio(&v, &origin, spec.radius, spec.p));
    }
    let max_off = off.iter().copied().fold(0.0, f64::max);
    let max_origin = at_origin.iter().copied().fold(0.0, f64::max);
    let mut checks = BTreeMap::new();
    checks.insert(
        "center_independent".into(),
        max_off <= 2.0 * max_origin && max_origin <= 2.0 * max_off,
    );
    let mut constants = BTreeMap::new();
    constants.insert("max_ratio_random_centers".into(), max_off);
    constants.insert("max_ratio_origin".into(), max_origin);
    Ok(EquivalenceReport::build(
        "local_bound",
        RatioSeries::new("max_ratio_random_centers", off),
        vec![RatioSeries::new("ratio_at_origin", at_origin)],
        bound,
        constants,
        checks,
        ensemble_meta(
            ensemble,
            serde_json::json!({ "p": spec.p, "radius": spec.radius, "n_centers": spec.n_centers, "center_seed": spec.center_seed }),
        ),
    ))
}

/// Least-squares quadratic fit of `log|V_phi phi|` on a 1-d grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    /// Coefficients of `1, x, xi, x^2, x xi, xi^2`.
    pub coefficients: [f64; 6],
    pub r_squared: f64,
    pub negative_definite: bool,
    pub points: usize,
}

/// Fits `log|V_phi phi(x, xi)|` for the Gaussian window over the central
/// region `|x|, |xi| <= N/4`.
pub fn gaussian_decay_fit(n: usize, width: Option<f64>) -> Result<QuadraticFit> {
    let grid = GridSpec::new(&[n])?;
    let phi = standard_signal(&grid, &SignalKind::Gaussian { width: width.map(|w| vec![w]) })?;
    let v = gabor::stft(&phi, &phi)?;
    let half = (n / 4) as i64;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for x in 0..n {
        let xr = grid::symmetric_rep(x, n);
        for xi in 0..n {
            let kr = grid::symmetric_rep(xi, n);
            if xr.abs() > half || kr.abs() > half {
                continue;
            }
            let a = v.at(&[x], &[xi]).norm();
            if a <= 0.0 {
                continue;
            }
            let (xf, kf) = (xr as f64, kr as f64);
            rows.push([1.0, xf, kf, xf * xf, xf * kf, kf * kf]);
            rhs.push(a.ln());
        }
    }
    let m = rows.len();
    let design = DMatrix::from_fn(m, 6, |i, j| rows[i][j]);
    let y = DVector::from_vec(rhs);
    let sol = design
        .clone()
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let fitted = &design * &sol;
    let mean = y.mean();
    let ss_res: f64 = (&y - &fitted).iter().map(|e| e * e).sum();
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let c: [f64; 6] = std::array::from_fn(|i| sol[i]);
    Ok(QuadraticFit {
        coefficients: c,
        r_squared: 1.0 - ss_res / ss_tot,
        negative_definite: c[3] < 0.0 && c[5] < 0.0 && 4.0 * c[3] * c[5] - c[4] * c[4] > 0.0,
        points: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gabor::canonical_tight_window;

    fn g1(n: usize) -> GridSpec {
        GridSpec::new(&[n]).unwrap()
    }

    fn delta(g: &GridSpec) -> SignalNd {
        standard_signal(g, &SignalKind::Delta { at: None }).unwrap()
    }

    fn gaussian(g: &GridSpec) -> SignalNd {
        standard_signal(g, &SignalKind::Gaussian { width: None }).unwrap()
    }

    fn bump(g: &GridSpec, r: usize) -> SignalNd {
        standard_signal(g, &SignalKind::Block { radius: vec![r; g.dim()] }).unwrap()
    }

    fn mixed(p: &[f64], sigma: &[usize], omega: Weight) -> MixedNormSpec {
        MixedNormSpec::new(
            ExponentVector::new(p).unwrap(),
            Permutation::new(sigma.to_vec()).unwrap(),
            omega,
        )
        .unwrap()
    }

    fn ex(p: f64) -> Exponent {
        Exponent::new(p).unwrap()
    }

    #[test]
    fn zero_signal_has_zero_norm() {
        let g = g1(8);
        let spec = ModNormSpec::new(MixedNormSpec::plain(&[0.5, 1.0]).unwrap(), gaussian(&g)).unwrap();
        assert_eq!(modulation_norm(&SignalNd::zeros(&g), &spec).unwrap(), 0.0);
    }

    #[test]
    fn exponent_two_is_moyal_for_every_order() {
        let g = GridSpec::new(&[4, 6]).unwrap();
        let f = standard_signal(&g, &SignalKind::Random { seed: 1 }).unwrap();
        let phi = standard_signal(&g, &SignalKind::Random { seed: 2 }).unwrap();
        for sigma in Permutation::all(4) {
            let spec = ModNormSpec::new(
                MixedNormSpec::new(ExponentVector::uniform(2.0, 4).unwrap(), sigma, Weight::one(4)).unwrap(),
                phi.clone(),
            )
            .unwrap();
            let v = modulation_norm(&f, &spec).unwrap();
            let expected = f.norm_l2() * phi.norm_l2();
            assert!((v - expected).abs() < 1e-10 * expected);
        }
    }

    #[test]
    fn delta_pair_values() {
        // V_delta delta(x, xi) = N^{-1/2} [x = 0]
        let g = g1(16);
        let d = delta(&g);
        let value = |p: &[f64]| {
            let spec = ModNormSpec::new(MixedNormSpec::plain(p).unwrap(), d.clone()).unwrap();
            modulation_norm(&d, &spec).unwrap()
        };
        assert!((value(&[1.0, f64::INFINITY]) - 0.25).abs() < 1e-14);
        assert!((value(&[f64::INFINITY, 1.0]) - 4.0).abs() < 1e-12);
        let one = Weight::one(2);
        assert!((amalgam_norm(&d, ex(1.0), Exponent::INF, &one, &d).unwrap() - 0.25).abs() < 1e-14);
        assert!((amalgam_norm(&d, Exponent::INF, ex(1.0), &one, &d).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn amalgam_matches_interchanged_modulation_norm() {
        let g = GridSpec::new(&[8, 4]).unwrap();
        let f = standard_signal(&g, &SignalKind::Random { seed: 5 }).unwrap();
        let phi = gaussian(&g);
        let omega = Weight::polynomial(1.5, 4).unwrap();
        for (p, q) in [(1.0, 2.0), (0.5, f64::INFINITY), (f64::INFINITY, 0.7)] {
            let a = amalgam_norm(&f, ex(p), ex(q), &omega, &phi).unwrap();
            let (pv, sigma) = amalgam_as_mixed(2, ex(p), ex(q));
            let spec = ModNormSpec::new(MixedNormSpec::new(pv, sigma, omega.clone()).unwrap(), phi.clone()).unwrap();
            let m = modulation_norm(&f, &spec).unwrap();
            assert!((a - m).abs() < 1e-12 * m, "{a} vs {m}");
        }
    }

    #[test]
    fn amalgam_with_equal_exponents() {
        let g = g1(16);
        let f = standard_signal(&g, &SignalKind::Random { seed: 6 }).unwrap();
        let phi = gaussian(&g);
        for p in [0.5, 1.0, 3.0] {
            let a = amalgam_norm(&f, ex(p), ex(p), &Weight::one(2), &phi).unwrap();
            let spec = ModNormSpec::new(MixedNormSpec::plain(&[p, p]).unwrap(), phi.clone()).unwrap();
            let m = modulation_norm(&f, &spec).unwrap();
            assert!((a - m).abs() < 1e-12 * m);
        }
    }

    #[test]
    fn fourier_lebesgue_examples() {
        let g = g1(16);
        let f = standard_signal(&g, &SignalKind::Random { seed: 7 }).unwrap();
        let v = fourier_lebesgue_norm(&f, ex(2.0), &Weight::one(2), &[0.0]).unwrap();
        assert!((v - f.norm_l2()).abs() < 1e-12 * v);

        let omega = Weight::polynomial(2.0, 2).unwrap();
        let q = 1.5;
        let v = fourier_lebesgue_norm(&delta(&g), ex(q), &omega, &[3.0]).unwrap();
        let mut s = 0.0;
        for k in 0..16 {
            s += omega.eval(&[3.0, grid::symmetric_rep(k, 16) as f64]).powf(q);
        }
        assert!((v - 0.25 * s.powf(1.0 / q)).abs() < 1e-12 * v);

        // moving the anchor costs at most the Peetre factor <x1 - x0>^s
        let (x0, x1) = (1.0, -4.0);
        let a = fourier_lebesgue_norm(&f, ex(q), &omega, &[x0]).unwrap();
        let b = fourier_lebesgue_norm(&f, ex(q), &omega, &[x1]).unwrap();
        let c = (1.0 + (x1 - x0) * (x1 - x0)).powf(1.0);
        assert!(b / a <= c && a / b <= c);
    }

    #[test]
    fn window_independence_trivial_cases() {
        let g = g1(16);
        let e = Ensemble::random(&g, 3, 10).unwrap();
        let phi = gaussian(&g);
        let norm = mixed(&[1.0, 2.0], &[0, 1], Weight::polynomial(1.0, 2).unwrap());
        let rep = window_independence_report(&e, &phi, &phi, &norm, DEFAULT_SPREAD_BOUND).unwrap();
        assert!(rep.ratios.iter().all(|&r| r == 1.0));
        assert_eq!(rep.spread, 1.0);
        let lam = Complex64::new(0.0, -2.5);
        let rep = window_independence_report(&e, &phi, &phi.scale(lam), &norm, DEFAULT_SPREAD_BOUND).unwrap();
        assert!(rep.ratios.iter().all(|&r| (r - 0.4).abs() < 1e-12));
        assert!((rep.spread - 1.0).abs() < 1e-12);
        assert!(rep.passed);
    }

    #[test]
    fn reports_are_scale_invariant() {
        let g = g1(16);
        let e = Ensemble::random(&g, 4, 6).unwrap();
        let lam = Complex64::new(3.0, 1.0);
        let norm = mixed(&[0.5, 2.0], &[1, 0], Weight::polynomial(1.0, 2).unwrap());
        let a = window_independence_report(&e, &gaussian(&g), &bump(&g, 3), &norm, 1e3).unwrap();
        let b = window_independence_report(&e.scaled(lam), &gaussian(&g), &bump(&g, 3), &norm, 1e3).unwrap();
        for (x, y) in a.ratios.iter().zip(&b.ratios) {
            assert!((x - y).abs() < 1e-12 * x);
        }
    }

    #[test]
    fn embedding_examples() {
        let g = g1(16);
        let e = Ensemble::random(&g, 8, 10).unwrap();
        let phi = gaussian(&g);
        let s = mixed(&[1.0, 2.0], &[0, 1], Weight::polynomial(1.0, 2).unwrap());
        let rep = embedding_report(&e, &s, &s, &phi, 1e-10, 1e3).unwrap();
        assert!(rep.ratios.iter().all(|&r| r == 1.0));

        let s1 = MixedNormSpec::plain(&[1.0, 1.0]).unwrap();
        let s2 = MixedNormSpec::plain(&[2.0, 2.0]).unwrap();
        let rep = embedding_report(&e, &s1, &s2, &phi, 1e-10, 1e3).unwrap();
        assert!(rep.ratio_max <= 1.0 + 1e-10 && rep.passed);

        let s1 = mixed(&[0.5, 1.0], &[1, 0], Weight::polynomial(2.0, 2).unwrap());
        let s2 = mixed(&[1.0, f64::INFINITY], &[1, 0], Weight::polynomial(1.0, 2).unwrap());
        let rep = embedding_report(&e, &s1, &s2, &phi, 1e-10, 1e3).unwrap();
        assert_eq!(rep.constants["c_weight"], 1.0);
        assert!(rep.passed);

        assert!(matches!(
            embedding_report(&e, &s2, &s1, &phi, 1e-10, 1e3),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn gabor_equivalence_full_lattice_and_tight() {
        let g = g1(16);
        let e = Ensemble::random(&g, 9, 8).unwrap();
        let norm = mixed(&[1.0, 0.5], &[1, 0], Weight::polynomial(1.0, 2).unwrap());
        let full = GaborSystem::new(gaussian(&g), LatticeSpec::uniform(1, 1, 1))
            .unwrap()
            .with_canonical_dual()
            .unwrap();
        let rep = gabor_equivalence_report(&e, &full, &norm, 1e3).unwrap();
        assert!((rep.spread - 1.0).abs() < 1e-12);
        assert!(rep.ratios.iter().all(|r| (r - 1.0).abs() < 1e-12));

        let base = GaborSystem::new(gaussian(&g), LatticeSpec::uniform(2, 2, 1)).unwrap();
        let tight = GaborSystem::new(canonical_tight_window(&base).unwrap(), base.lattice.clone())
            .unwrap()
            .with_canonical_dual()
            .unwrap();
        let rep = gabor_equivalence_report(&e, &tight, &MixedNormSpec::plain(&[2.0, 2.0]).unwrap(), 1e3).unwrap();
        assert!(rep.spread <= 1.0 + 1e-9);
        assert!(rep.secondary[0].spread <= 1.0 + 1e-9);
        assert!(matches!(
            gabor_equivalence_report(&e, &base, &norm, 1e3),
            Err(Error::MissingDual)
        ));
    }

    #[test]
    fn wiener_equivalence_examples() {
        let g = g1(16);
        let e = Ensemble::random(&g, 10, 8).unwrap();
        let phi = gaussian(&g);
        let norm = mixed(&[1.0, 2.0], &[0, 1], Weight::one(2));
        let rep = wiener_equivalence_report(&e, &phi, &phi, &norm, &[1, 1], 1e3).unwrap();
        assert!(rep.ratios.iter().all(|r| (r - 1.0).abs() < 1e-12));
        let rep = wiener_equivalence_report(&e, &phi, &phi, &norm, &[2, 2], 1e3).unwrap();
        assert!(rep.ratio_max <= 1.0 + 1e-12);
        assert_eq!(rep.checks.get("sup_domination"), Some(&true));
        assert!(wiener_equivalence_report(&e, &phi, &phi, &norm, &[3, 2], 1e3).is_err());
    }

    #[test]
    fn compact_support_with_flat_window_is_exact() {
        let g = g1(32);
        let e = Ensemble::supported(&g, 11, 10, 4).unwrap();
        let spec = CompactSupportSpec {
            support_radius: 4,
            q: ex(1.0),
            p_list: [0.5, 1.0, 2.0, f64::INFINITY].iter().map(|&p| ex(p)).collect(),
            omega: Weight::polynomial(1.0, 2).unwrap(),
            window: bump(&g, 4),
        };
        let rep = compact_support_report(&e, &spec, 1e3).unwrap();
        assert!(rep.ratios.iter().all(|r| (r - 1.0).abs() < 1e-12), "{:?}", rep.ratios);
    }

    #[test]
    fn compact_support_spread_is_stable_in_p() {
        let g = g1(32);
        let e = Ensemble::supported(&g, 12, 10, 4).unwrap();
        let window = bump(&g, 6);
        let mut spec = CompactSupportSpec {
            support_radius: 4,
            q: ex(2.0),
            p_list: vec![ex(1.0)],
            omega: Weight::polynomial(1.0, 2).unwrap(),
            window,
        };
        let small = compact_support_report(&e, &spec, 1e3).unwrap();
        spec.p_list = [0.5, 1.0, 2.0, f64::INFINITY].iter().map(|&p| ex(p)).collect();
        let large = compact_support_report(&e, &spec, 1e3).unwrap();
        assert!(large.spread <= small.spread + 1e-9);
        for (a, b) in small.ratios.iter().zip(&large.ratios) {
            assert!((a - b).abs() < 1e-9);
        }
        spec.support_radius = 12;
        assert!(compact_support_report(&e, &spec, 1e3).is_err());
    }

    #[test]
    fn compact_support_spike() {
        let g = g1(32);
        let e = Ensemble {
            seed: 0,
            signals: vec![delta(&g), delta(&g).scale(Complex64::new(0.0, 3.0))],
        };
        let spec = CompactSupportSpec {
            support_radius: 0,
            q: ex(1.0),
            p_list: [0.5, 1.0, 2.0, f64::INFINITY].iter().map(|&p| ex(p)).collect(),
            omega: Weight::one(2),
            window: standard_signal(&g, &SignalKind::Hermite { order: vec![0], width: Some(vec![4.0]) })
                .unwrap()
                .scale(Complex64::new(1.0, 0.0)),
        };
        // Gaussian window is not compactly supported in the discrete sense
        assert!(compact_support_report(&e, &spec, 1e3).is_err());
        let spec = CompactSupportSpec { window: bump(&g, 2), ..spec };
        let rep = compact_support_report(&e, &spec, 1e3).unwrap();
        assert!((rep.ratios[0] - rep.ratios[1]).abs() < 1e-9);
    }

    #[test]
    fn local_bound_examples() {
        let g = g1(32);
        let phi = gaussian(&g);
        let v = gabor::stft(&phi, &phi).unwrap();
        let r = local_ratio(&v, &[0, 0], 3.0, Exponent::INF);
        assert!((r - 1.0).abs() < 1e-12);
        let zero = gabor::stft(&SignalNd::zeros(&g), &phi).unwrap();
        assert_eq!(local_ratio(&zero, &[4, 5], 3.0, ex(0.5)), 0.0);
        let e = Ensemble::random(&g, 13, 5).unwrap();
        let spec = LocalBoundSpec {
            width: None,
            p: ex(0.5),
            radius: 3.0,
            n_centers: 10,
            center_seed: 1,
        };
        let rep = local_bound_report(&e, &spec, 1e3).unwrap();
        assert!(rep.ratio_max <= 1.0);
        assert!(rep.passed, "{:?}", rep.constants);
        let too_big = LocalBoundSpec { radius: 16.0, ..spec };
        assert!(local_bound_report(&e, &too_big, 1e3).is_err());
    }

    #[test]
    fn gaussian_stft_is_log_quadratic() {
        let fit = gaussian_decay_fit(64, None).unwrap();
        assert!(fit.r_squared >= 0.999, "{}", fit.r_squared);
        assert!(fit.negative_definite);
    }

    #[test]
    fn report_json_and_csv() {
        let g = g1(8);
        let e = Ensemble::random(&g, 1, 3).unwrap();
        let norm = MixedNormSpec::plain(&[1.0, 1.0]).unwrap();
        let rep = window_independence_report(&e, &gaussian(&g), &bump(&g, 2), &norm, 1e3).unwrap();
        let v = serde_json::to_value(&rep).unwrap();
        assert_eq!(v["schema"], "v1");
        let back: EquivalenceReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, rep);
        let csv = rep.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("experiment,index,ratio\n"));
    }
}
