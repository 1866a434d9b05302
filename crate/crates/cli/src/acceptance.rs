//! The shipped acceptance suite (`gabmod verify --builtin`).
//!
//! Each criterion draws from fixed seeds and returns one pass/fail line.
//! Wall-clock budgets are part of the pass condition.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use gabmod::convolution::{
    check_semidiscrete_estimate, check_wiener_conv_estimate, dilation_sweep, semidiscrete_sweep, wiener_sweep,
    DilationSweep, Draw, SemidiscreteParams, SemidiscreteSweep, WienerConvCase, WienerConvParams, WienerSweep,
};
use gabmod::gabor::{self, GaborSystem, LatticeSpec, DEFAULT_FRAME_TOL};
use gabmod::grid::{standard_signal, GridSpec, SignalKind, SignalNd};
use gabmod::mixed_norms::oracle::iterated_seq_norm_oracle;
use gabmod::mixed_norms::{iterated_seq_norm, Exponent, ExponentVector, MixedNormSpec, Permutation, SequenceNd};
use gabmod::modspace::{self, CompactSupportSpec, Ensemble, DEFAULT_SPREAD_BOUND};
use gabmod::rng::{self, child_seed, SeededRng};
use gabmod::weights::{random_family_members, Weight};
use rand::Rng;

/// Spreads pinned from the reference run of criterion 7, one per
/// configuration in [`window_configs`].
pub const PINNED_WINDOW_SPREADS: [f64; 3] = [1.0396932104977539, 1.1076830566369429, 1.1163115867186468];
/// Spread pinned from the reference run of the generic case of criterion 9.
pub const PINNED_GABOR_SPREAD: f64 = 1.0663507569572936;
/// Relative band around a pinned value.
pub const PIN_BAND: f64 = 0.10;

const EXPONENTS: [f64; 4] = [0.5, 1.0, 2.0, f64::INFINITY];

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub number: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {} {:<32} {:>6.2}s/{:>3}s  {}",
            self.number,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.budget,
            self.detail
        )
    }
}

type Check = fn() -> Result<String, String>;

const CRITERIA: [(usize, &str, f64, Check); 11] = [
    (1, "mixed-norm oracle equivalence", 10.0, oracle_equivalence),
    (2, "quasi-norm laws", 10.0, quasi_norm_laws),
    (3, "gabor reconstruction", 60.0, gabor_reconstruction),
    (4, "frame-operator structure", 30.0, frame_operator_structure),
    (5, "moyal identity", 10.0, moyal),
    (6, "convolution estimate sweeps", 60.0, convolution_sweeps),
    (7, "window independence", 30.0, window_independence),
    (8, "embedding", 30.0, embedding),
    (9, "gabor norm equivalence", 30.0, gabor_norm_equivalence),
    (10, "compact-support p-independence", 30.0, compact_support),
    (11, "cli determinism and exit codes", 10.0, cli_contract),
];

/// Runs one criterion by number.
pub fn run_criterion(number: usize) -> Option<CriterionResult> {
    let &(number, name, budget, check) = CRITERIA.iter().find(|c| c.0 == number)?;
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(check).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match outcome {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if seconds > budget {
        passed = false;
        detail = format!("over budget; {detail}");
    }
    Some(CriterionResult {
        number,
        name,
        passed,
        detail,
        seconds,
        budget,
    })
}

/// Runs the criteria in `only` (all of them when empty), in order.
pub fn run_selected(only: &[usize]) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .filter(|c| only.is_empty() || only.contains(&c.0))
        .filter_map(|c| run_criterion(c.0))
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn pick<T: Copy>(r: &mut SeededRng, items: &[T]) -> T {
    items[r.gen_range(0..items.len())]
}

fn random_box(r: &mut SeededRng, d: usize, max_side: usize) -> SequenceNd {
    let shape: Vec<usize> = (0..d).map(|_| r.gen_range(1..=max_side)).collect();
    let origin: Vec<i64> = (0..d).map(|_| r.gen_range(-4..=4)).collect();
    let len = shape.iter().product();
    SequenceNd::new(shape, origin, rng::complex_vec(r, len)).expect("valid box")
}

fn random_exponents(r: &mut SeededRng, d: usize) -> Vec<f64> {
    (0..d).map(|_| pick(r, &EXPONENTS)).collect()
}

fn gaussian(grid: &GridSpec) -> SignalNd {
    standard_signal(grid, &SignalKind::Gaussian { width: None }).expect("gaussian")
}

fn grid(n: &[usize]) -> GridSpec {
    GridSpec::new(n).expect("grid")
}

fn rel_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn oracle_equivalence() -> Result<String, String> {
    let mut r = rng::seeded(0xA11CE);
    let mut compared = 0;
    let mut worst = 0.0f64;
    for i in 0..200 {
        let d = 1 + i % 3;
        let a = random_box(&mut r, d, 8);
        let p = ExponentVector::new(&random_exponents(&mut r, d)).map_err(e2s)?;
        let families = random_family_members(&mut r, d);
        let omega = families[i % families.len()].clone();
        let step: Vec<f64> = if i % 2 == 0 {
            vec![]
        } else {
            (0..d).map(|_| pick(&mut r, &[0.5, 1.0, 2.0])).collect()
        };
        for sigma in Permutation::all(d) {
            let mut spec = MixedNormSpec::new(p.clone(), sigma, omega.clone()).map_err(e2s)?;
            spec.step = step.clone();
            let fast = iterated_seq_norm(&a, &spec).map_err(e2s)?;
            let slow = iterated_seq_norm_oracle(&a, &spec).map_err(e2s)?;
            let gap = rel_gap(fast, slow);
            worst = worst.max(gap);
            ensure(gap <= 1e-12, || format!("instance {i}: fast {fast:e} vs oracle {slow:e}"))?;
            compared += 1;
        }
    }
    Ok(format!("200 instances, {compared} (instance, sigma) pairs, worst rel gap {worst:.1e}"))
}

fn quasi_norm_laws() -> Result<String, String> {
    let mut r = rng::seeded(0xB0B);
    let mut worst_tri = 0.0f64;
    let mut worst_mono = 0.0f64;
    for i in 0..500 {
        let d = 1 + i % 3;
        let a = random_box(&mut r, d, 6);
        let b = SequenceNd::new(a.shape.clone(), a.origin.clone(), rng::complex_vec(&mut r, a.len())).map_err(e2s)?;
        let sum = SequenceNd::new(
            a.shape.clone(),
            a.origin.clone(),
            a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect(),
        )
        .map_err(e2s)?;
        let pv = random_exponents(&mut r, d);
        let all = Permutation::all(d);
        let sigma = all[r.gen_range(0..all.len())].clone();
        let omega = Weight::polynomial(r.gen_range(-2.0..2.0), d).map_err(e2s)?;
        let spec = MixedNormSpec::new(ExponentVector::new(&pv).map_err(e2s)?, sigma.clone(), omega.clone()).map_err(e2s)?;
        let rr = spec.p.triangle_exponent();
        let n = |x: &SequenceNd, s: &MixedNormSpec| iterated_seq_norm(x, s).map_err(e2s);
        let lhs = n(&sum, &spec)?.powf(rr);
        let rhs = n(&a, &spec)?.powf(rr) + n(&b, &spec)?.powf(rr);
        worst_tri = worst_tri.max(lhs / rhs - 1.0);
        ensure(lhs <= rhs * (1.0 + 1e-10), || format!("pair {i}: quasi-triangle {lhs:e} > {rhs:e}"))?;
        // raise each exponent along the ladder
        let qv: Vec<f64> = pv
            .iter()
            .map(|&p| {
                let k = EXPONENTS.iter().position(|&e| e == p).unwrap_or(0);
                EXPONENTS[(k + r.gen_range(0..4)).min(3)]
            })
            .collect();
        let big = MixedNormSpec::new(ExponentVector::new(&qv).map_err(e2s)?, sigma, omega).map_err(e2s)?;
        let small_norm = n(&a, &spec)?;
        let big_norm = n(&a, &big)?;
        worst_mono = worst_mono.max(big_norm / small_norm - 1.0);
        ensure(big_norm <= small_norm * (1.0 + 1e-10), || {
            format!("pair {i}: monotonicity {big_norm:e} > {small_norm:e}")
        })?;
    }
    Ok(format!(
        "500 pairs, max excess triangle {:.1e}, monotonicity {:.1e}",
        worst_tri.max(0.0),
        worst_mono.max(0.0)
    ))
}

fn gabor_reconstruction() -> Result<String, String> {
    let mut used = 0;
    let mut excluded = Vec::new();
    let mut worst_cg = 0.0f64;
    let mut worst_rec = 0.0f64;
    let mut worst_agree = 0.0f64;
    for n in [16usize, 32, 64] {
        let g = grid(&[n]);
        for (a, b) in [(1usize, 1usize), (2, 2), (2, 4), (4, 4)] {
            let sys = GaborSystem::new(gaussian(&g), LatticeSpec::uniform(a, b, 1)).map_err(e2s)?;
            let red = sys.redundancy();
            ensure(red >= 1.0, || format!("N={n} ({a},{b}): redundancy {red} < 1"))?;
            let (lower, _) = gabor::frame_bounds(&sys).map_err(e2s)?;
            if lower <= DEFAULT_FRAME_TOL {
                ensure(red == 1.0, || format!("N={n} ({a},{b}) excluded with redundancy {red}"))?;
                excluded.push(format!("N={n} ({a},{b})"));
                continue;
            }
            let sol = gabor::canonical_dual(&sys, 1e-12, 5000).map_err(|e| format!("N={n} ({a},{b}): {e}"))?;
            ensure(sol.residual <= 1e-12, || format!("N={n} ({a},{b}): CG residual {:e}", sol.residual))?;
            worst_cg = worst_cg.max(sol.residual);
            let mut sys = sys;
            sys.dual = Some(sol.dual);
            let probes = Ensemble::random(&g, child_seed(0xC3, (n * 100 + a * 10 + b) as u64), 20).map_err(e2s)?;
            for f in &probes.signals {
                let rec = gabor::reconstruct(f, &sys).map_err(e2s)?;
                let agree = rec.via_dual.sub(&rec.via_window).norm_l2() / f.norm_l2();
                worst_rec = worst_rec.max(rec.residual);
                worst_agree = worst_agree.max(agree);
                ensure(rec.residual <= 1e-9, || format!("N={n} ({a},{b}): residual {:e}", rec.residual))?;
                ensure(agree <= 1e-9, || format!("N={n} ({a},{b}): expansions differ by {agree:e}"))?;
            }
            used += 1;
        }
    }
    Ok(format!(
        "{used} configs, excluded (redundancy 1, singular) [{}], CG {:.1e}, reconstruction {:.1e}, expansions {:.1e}",
        excluded.join(", "),
        worst_cg,
        worst_rec,
        worst_agree
    ))
}

fn random_lattice_shift(r: &mut SeededRng, lattice: &LatticeSpec, g: &GridSpec) -> (Vec<i64>, Vec<i64>) {
    let u = lattice
        .a
        .iter()
        .zip(&g.n)
        .map(|(&a, &n)| a as i64 * r.gen_range(0..(n / a) as i64))
        .collect();
    let eta = lattice
        .b
        .iter()
        .zip(&g.n)
        .map(|(&b, &n)| b as i64 * r.gen_range(0..(n / b) as i64))
        .collect();
    (u, eta)
}

fn frame_operator_structure() -> Result<String, String> {
    let mut r = rng::seeded(0xF4A3);
    let configs: Vec<(GridSpec, SignalNd, LatticeSpec, bool)> = vec![
        (grid(&[32]), gaussian(&grid(&[32])), LatticeSpec::uniform(2, 2, 1), false),
        (
            grid(&[32]),
            standard_signal(&grid(&[32]), &SignalKind::Random { seed: 41 }).map_err(e2s)?,
            LatticeSpec::uniform(2, 4, 1),
            true,
        ),
        (
            grid(&[24]),
            standard_signal(&grid(&[24]), &SignalKind::Random { seed: 42 }).map_err(e2s)?,
            LatticeSpec::uniform(3, 2, 1),
            true,
        ),
        (grid(&[8, 8]), gaussian(&grid(&[8, 8])), LatticeSpec::uniform(2, 2, 2), false),
    ];
    let mut worst = 0.0f64;
    let mut off_probes = 0;
    let mut off_hits = 0;
    for (ci, (g, phi, lattice, negative_control)) in configs.into_iter().enumerate() {
        let sys = GaborSystem::new(phi, lattice.clone()).map_err(e2s)?;
        let (_, upper) = gabor::frame_bounds(&sys).map_err(e2s)?;
        for k in 0..20 {
            let f = standard_signal(&g, &SignalKind::Random { seed: child_seed(ci as u64, 2 * k) }).map_err(e2s)?;
            let h = standard_signal(&g, &SignalKind::Random { seed: child_seed(ci as u64, 2 * k + 1) }).map_err(e2s)?;
            let sf = gabor::frame_operator_apply(&f, &sys).map_err(e2s)?;
            let sh = gabor::frame_operator_apply(&h, &sys).map_err(e2s)?;
            let scale = upper * f.norm_l2() * h.norm_l2();
            let adj = (sf.inner(&h) - f.inner(&sh)).norm() / scale;
            let quad = sf.inner(&f);
            let fscale = upper * f.norm_l2().powi(2);
            let psd_excess = (-quad.re / fscale).max(quad.im.abs() / fscale);
            let (u, eta) = random_lattice_shift(&mut r, &lattice, &g);
            let cov = gabor::frame_op_covariance_residual(&sys, &f, &u, &eta).map_err(e2s)? / upper;
            for (what, v) in [("self-adjointness", adj), ("positivity", psd_excess), ("covariance", cov)] {
                worst = worst.max(v);
                ensure(v <= 1e-10, || format!("config {ci}: {what} residual {v:e}"))?;
            }
            if negative_control {
                let d = g.dim();
                let mut shift = || loop {
                    let u: Vec<i64> = g.n.iter().map(|&n| r.gen_range(0..n as i64)).collect();
                    let eta: Vec<i64> = g.n.iter().map(|&n| r.gen_range(0..n as i64)).collect();
                    if !lattice.contains(&u, &eta) {
                        return (u, eta);
                    }
                };
                let (u, eta) = shift();
                debug_assert_eq!(u.len(), d);
                let off = gabor::covariance_residual_any_shift(&sys, &f, &u, &eta).map_err(e2s)? / upper;
                off_probes += 1;
                if off > 1e-6 {
                    off_hits += 1;
                }
            }
        }
    }
    let frac = off_hits as f64 / off_probes as f64;
    ensure(frac >= 0.9, || format!("off-lattice control exceeded 1e-6 in only {off_hits}/{off_probes} probes"))?;
    Ok(format!(
        "4 configs x 20 probes, worst residual {worst:.1e}, off-lattice > 1e-6 in {off_hits}/{off_probes}"
    ))
}

fn moyal() -> Result<String, String> {
    let mut r = rng::seeded(0x3011A1);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let n: Vec<usize> = if i % 4 == 3 {
            let s = r.gen_range(2..=11);
            vec![s, r.gen_range(2..=128 / s)]
        } else {
            vec![r.gen_range(2..=128)]
        };
        let g = grid(&n);
        let f = standard_signal(&g, &SignalKind::Random { seed: r.gen() }).map_err(e2s)?;
        let phi = standard_signal(&g, &SignalKind::Random { seed: r.gen() }).map_err(e2s)?;
        let v = gabor::stft(&f, &phi).map_err(e2s)?;
        let gap = rel_gap(v.norm_l2(), f.norm_l2() * phi.norm_l2());
        worst = worst.max(gap);
        ensure(gap <= 1e-10, || format!("pair {i} on {n:?}: relative gap {gap:e}"))?;
    }
    Ok(format!("100 pairs, worst relative gap {worst:.1e}"))
}

fn convolution_sweeps() -> Result<String, String> {
    let semi = semidiscrete_sweep(0x5E41, 500, &SemidiscreteSweep::default()).map_err(e2s)?;
    let dil = dilation_sweep(0xD11A, 100, &DilationSweep::default()).map_err(e2s)?;
    let wie = wiener_sweep(0x3E4E, 200, &WienerSweep::default()).map_err(e2s)?;
    for s in [&semi, &dil, &wie] {
        ensure(s.all_passed, || {
            let bad = s.reports.iter().find(|r| !r.passed);
            format!("{}: {} failures, first {:?}", s.kind, s.failures, bad.map(|b| (&b.params, b.ratio)))
        })?;
    }
    // exact Young cases: l^1 * L^1 and W^1(l^1) * W^1(l^1) without weights
    let one = |d| Weight::one(d);
    let mut young_worst = 0.0f64;
    for (k, n) in [16usize, 32, 64].into_iter().enumerate() {
        for theta in [1usize, 2, 4] {
            for draw in [Draw::NonNegative, Draw::Complex] {
                let rep = check_semidiscrete_estimate(&SemidiscreteParams {
                    seed: child_seed(0x7, (k * 10 + theta) as u64),
                    n: vec![n],
                    theta: vec![theta],
                    p: ExponentVector::new(&[1.0]).map_err(e2s)?,
                    sigma: Permutation::identity(1),
                    omega: one(1),
                    v: one(1),
                    tol: 1e-10,
                    draw,
                })
                .map_err(e2s)?;
                young_worst = young_worst.max(rep.ratio);
                ensure(rep.ratio <= 1.0 + 1e-10, || format!("young semidiscrete N={n} theta={theta}: {}", rep.ratio))?;
            }
        }
        let p1 = ExponentVector::new(&[1.0]).map_err(e2s)?;
        let q1 = Exponent::new(1.0).map_err(e2s)?;
        for block in [1usize, 2, 4] {
            let rep = check_wiener_conv_estimate(&WienerConvParams {
                seed: child_seed(0x8, (k * 10 + block) as u64),
                n: vec![n],
                block: vec![block],
                case: WienerConvCase::Functions {
                    q0: q1,
                    q1,
                    q2: q1,
                    p0: p1.clone(),
                    p1: p1.clone(),
                    p2: p1.clone(),
                },
                sigma: Permutation::identity(1),
                omega: one(1),
                v: one(1),
                tol: 1e-10,
                draw: Draw::NonNegative,
            })
            .map_err(e2s)?;
            young_worst = young_worst.max(rep.ratio);
            ensure(rep.ratio <= 1.0 + 1e-10, || format!("young wiener N={n} block={block}: {}", rep.ratio))?;
        }
    }
    Ok(format!(
        "semidiscrete {}/{} (fitted spread {:.3}), dilation {}/{} ({:.3}), wiener {}/{} ({:.3}); Young max ratio {:.12}",
        semi.count - semi.failures,
        semi.count,
        semi.fitted_spread,
        dil.count - dil.failures,
        dil.count,
        dil.fitted_spread,
        wie.count - wie.failures,
        wie.count,
        wie.fitted_spread,
        young_worst
    ))
}

/// The three `(p, sigma, omega)` configurations of criterion 7 on `Z_32`.
pub fn window_configs() -> Vec<MixedNormSpec> {
    let mk = |p: &[f64], sigma: &[usize], omega: Weight| {
        MixedNormSpec::new(
            ExponentVector::new(p).expect("exponents"),
            Permutation::from_one_based(sigma).expect("permutation"),
            omega,
        )
        .expect("spec")
    };
    vec![
        mk(&[1.0, 1.0], &[2, 1], Weight::exponential(0.1, 2.0, 2).expect("weight")),
        mk(&[1.0, f64::INFINITY], &[1, 2], Weight::polynomial(1.0, 2).expect("weight")),
        mk(&[0.5, 2.0], &[2, 1], Weight::polynomial(-1.0, 2).expect("weight")),
    ]
}

fn within_pin(value: f64, pinned: f64) -> bool {
    (value - pinned).abs() <= PIN_BAND * pinned
}

fn window_independence() -> Result<String, String> {
    let g = grid(&[32]);
    let ens = Ensemble::random(&g, 0x71, 50).map_err(e2s)?;
    let gauss = gaussian(&g);
    let bump = standard_signal(&g, &SignalKind::Block { radius: vec![4] }).map_err(e2s)?;
    let mut spreads = Vec::new();
    for (i, spec) in window_configs().iter().enumerate() {
        let rep = modspace::window_independence_report(&ens, &gauss, &bump, spec, DEFAULT_SPREAD_BOUND).map_err(e2s)?;
        ensure(rep.spread.is_finite(), || format!("config {i}: spread not finite"))?;
        spreads.push(rep.spread);
    }
    for (i, (&s, &pin)) in spreads.iter().zip(&PINNED_WINDOW_SPREADS).enumerate() {
        ensure(within_pin(s, pin), || format!("config {i}: spread {s:.17} vs pinned {pin:.17} (spreads {spreads:?})"))?;
    }
    Ok(format!("spreads {:?} within {:.0}% of pins", spreads, PIN_BAND * 100.0))
}

fn embedding() -> Result<String, String> {
    let mk = |p: &[f64], omega: Weight| {
        let d = p.len();
        MixedNormSpec::new(ExponentVector::new(p).map_err(e2s)?, Permutation::identity(d), omega).map_err(e2s)
    };
    let poly = |s: f64, d: usize| Weight::polynomial(s, d).map_err(e2s);
    let g1 = grid(&[32]);
    let g2 = grid(&[8, 8]);
    let configs = [
        (g1.clone(), mk(&[1.0, 1.0], Weight::one(2))?, mk(&[2.0, 2.0], Weight::one(2))?),
        (g1, mk(&[0.5, 2.0], poly(1.0, 2)?)?, mk(&[1.0, f64::INFINITY], poly(0.5, 2)?)?),
        (
            g2,
            mk(&[1.0, 1.0, 1.0, 2.0], poly(2.0, 4)?)?,
            mk(&[2.0, 1.0, 2.0, f64::INFINITY], Weight::constant(3.0, 4).map_err(e2s)?)?,
        ),
    ];
    let mut summary = Vec::new();
    for (i, (g, s1, s2)) in configs.iter().enumerate() {
        let ens = Ensemble::random(g, child_seed(0x8E, i as u64), 100).map_err(e2s)?;
        let rep = modspace::embedding_report(&ens, s1, s2, &gaussian(g), 1e-10, DEFAULT_SPREAD_BOUND).map_err(e2s)?;
        let c = rep.constants["c_weight"];
        ensure(rep.ratios.iter().all(|&r| r <= c * (1.0 + 1e-10)), || {
            format!("config {i}: ratio_max {} > c = {c}", rep.ratio_max)
        })?;
        summary.push(format!("max {:.4} <= c {:.4}", rep.ratio_max, c));
    }
    Ok(format!("100 signals x 3 configs: {}", summary.join("; ")))
}

/// Spread of the generic case of criterion 9: `d = 2`, `8 x 8`, `a = b = 2`,
/// `p = (1, 1, 2, 2)`, `omega = <z>`.
pub fn generic_gabor_spread() -> Result<f64, String> {
    let g = grid(&[8, 8]);
    let sys = GaborSystem::new(gaussian(&g), LatticeSpec::uniform(2, 2, 2))
        .and_then(|s| s.with_canonical_dual())
        .map_err(e2s)?;
    let spec = MixedNormSpec::new(
        ExponentVector::new(&[1.0, 1.0, 2.0, 2.0]).map_err(e2s)?,
        Permutation::identity(4),
        Weight::polynomial(1.0, 4).map_err(e2s)?,
    )
    .map_err(e2s)?;
    let ens = Ensemble::random(&g, 0x9A, 40).map_err(e2s)?;
    let rep = modspace::gabor_equivalence_report(&ens, &sys, &spec, DEFAULT_SPREAD_BOUND).map_err(e2s)?;
    Ok(rep.spread)
}

fn gabor_norm_equivalence() -> Result<String, String> {
    // full lattice: the coefficient norm is the continuous norm, sampled
    let g = grid(&[16]);
    let full = GaborSystem::new(gaussian(&g), LatticeSpec::uniform(1, 1, 1))
        .and_then(|s| s.with_canonical_dual())
        .map_err(e2s)?;
    let spec = MixedNormSpec::new(
        ExponentVector::new(&[1.0, 2.0]).map_err(e2s)?,
        Permutation::identity(2),
        Weight::polynomial(1.0, 2).map_err(e2s)?,
    )
    .map_err(e2s)?;
    let ens = Ensemble::random(&g, 0x91, 30).map_err(e2s)?;
    let rep = modspace::gabor_equivalence_report(&ens, &full, &spec, DEFAULT_SPREAD_BOUND).map_err(e2s)?;
    let full_spread = std::iter::once(rep.spread).chain(rep.secondary.iter().map(|s| s.spread)).fold(1.0, f64::max);
    ensure(full_spread - 1.0 <= 1e-12, || format!("full lattice spread {full_spread:.17}"))?;

    // tight frame, p = 2: Parseval makes every ratio the same constant
    let g = grid(&[32]);
    let base = GaborSystem::new(gaussian(&g), LatticeSpec::uniform(2, 2, 1)).map_err(e2s)?;
    let tight_window = gabor::canonical_tight_window(&base).map_err(e2s)?;
    let tight = GaborSystem::new(tight_window, LatticeSpec::uniform(2, 2, 1))
        .and_then(|s| s.with_canonical_dual())
        .map_err(e2s)?;
    let l2 = MixedNormSpec::plain(&[2.0, 2.0]).map_err(e2s)?;
    let ens = Ensemble::random(&g, 0x92, 30).map_err(e2s)?;
    let rep = modspace::gabor_equivalence_report(&ens, &tight, &l2, DEFAULT_SPREAD_BOUND).map_err(e2s)?;
    let tight_spread = std::iter::once(rep.spread).chain(rep.secondary.iter().map(|s| s.spread)).fold(1.0, f64::max);
    ensure(tight_spread <= 1.0 + 1e-9, || format!("tight spread {tight_spread:.17}"))?;

    let generic = generic_gabor_spread()?;
    ensure(generic.is_finite() && within_pin(generic, PINNED_GABOR_SPREAD), || {
        format!("generic spread {generic:.17} vs pinned {PINNED_GABOR_SPREAD:.17}")
    })?;
    Ok(format!(
        "full lattice 1+{:.1e}, tight 1+{:.1e}, generic {generic:.6} (pinned {PINNED_GABOR_SPREAD:.6})",
        full_spread - 1.0,
        tight_spread - 1.0
    ))
}

fn compact_support() -> Result<String, String> {
    let g = grid(&[64]);
    let radius = 8;
    let mut tapered = gaussian(&g);
    let mask = standard_signal(&g, &SignalKind::Block { radius: vec![12] }).map_err(e2s)?;
    for (z, m) in tapered.data.iter_mut().zip(&mask.data) {
        *z *= m;
    }
    let hermite = standard_signal(&g, &SignalKind::Hermite { order: vec![1], width: Some(vec![32.0]) }).map_err(e2s)?;
    let mut odd = hermite;
    for (z, m) in odd.data.iter_mut().zip(&mask.data) {
        *z *= m;
    }
    let ens = Ensemble::supported(&g, 0x10C, 30, radius).map_err(e2s)?;
    let exps = |v: &[f64]| v.iter().map(|&p| Exponent::new(p).map_err(e2s)).collect::<Result<Vec<_>, _>>();
    let base = exps(&[1.0, 2.0])?;
    let extended = exps(&EXPONENTS)?;
    let mut worst_growth = 0.0f64;
    let mut spreads = Vec::new();
    for (wname, window) in [("tapered gaussian", &tapered), ("truncated hermite", &odd)] {
        for q in [1.0, 2.0, f64::INFINITY] {
            let q = Exponent::new(q).map_err(e2s)?;
            let spec = |p_list: Vec<Exponent>| CompactSupportSpec {
                support_radius: radius,
                q,
                p_list,
                omega: Weight::one(2),
                window: window.clone(),
            };
            let small = modspace::compact_support_report(&ens, &spec(base.clone()), DEFAULT_SPREAD_BOUND).map_err(e2s)?;
            let large = modspace::compact_support_report(&ens, &spec(extended.clone()), DEFAULT_SPREAD_BOUND).map_err(e2s)?;
            ensure(large.ratios.iter().all(|r| r.is_finite()), || format!("{wname} q={}: non-finite", q.value()))?;
            for (i, (s, l)) in small.ratios.iter().zip(&large.ratios).enumerate() {
                let growth = l / s - 1.0;
                worst_growth = worst_growth.max(growth);
                ensure(growth <= 1e-9, || {
                    format!("{wname} q={}: signal {i} spread grew {s:.17} -> {l:.17}", q.value())
                })?;
            }
            spreads.push(large.spread);
        }
    }
    let max_spread = spreads.iter().copied().fold(1.0, f64::max);
    Ok(format!(
        "30 signals, 2 windows x 3 q: extending p_list grew per-signal spread by at most {worst_growth:.1e}; max ensemble spread {max_spread:.4}"
    ))
}

static SCRATCH: AtomicUsize = AtomicUsize::new(0);

/// Fresh scratch directory under the system temp dir, removed on drop.
struct Scratch(PathBuf);

impl Scratch {
    fn new() -> std::io::Result<Self> {
        let k = SCRATCH.fetch_add(1, Ordering::Relaxed);
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_nanos());
        let p = std::env::temp_dir().join(format!("gabmod-verify-{}-{k}-{nanos}", std::process::id()));
        std::fs::create_dir_all(&p)?;
        Ok(Scratch(p))
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

/// Config exercising every kind; all experiments pass.
pub const PASSING_CONFIG: &str = r#"[
  {"kind": "norm", "output": "delta", "format": "both", "grid": {"n": [16]},
   "measure": "modulation", "signal": {"kind": "delta"}, "window": {"kind": "delta"}, "p": [1, "inf"]},
  {"kind": "norm", "output": "gauss", "plot": true, "grid": {"n": [16]},
   "measure": "modulation", "signal": {"kind": "gaussian"}, "p": [2, 2]},
  {"kind": "gabor-dual", "output": "dual", "format": "both", "grid": {"n": [16]}, "seed": 5,
   "window": {"kind": "gaussian"}, "lattice": {"a": [2], "b": [2]}, "probes": 4},
  {"kind": "conv-sweep", "output": "delta-sweep", "format": "both", "seed": 9,
   "estimate": "semidiscrete", "count": 12, "domain": {"sizes": [16], "draw": "delta_coefficients"}},
  {"kind": "verify-suite", "output": "suite", "format": "both", "grid": {"n": [16]}, "seed": 3,
   "reports": [{"type": "embedding", "signals": 6, "window": {"kind": "gaussian"},
                "spec1": {"p": [1, 2]}, "spec2": {"p": [1, 2]}}]},
  {"kind": "report", "output": "window", "grid": {"n": [16]}, "seed": 4,
   "report": {"type": "window_independence", "signals": 5, "window1": {"kind": "gaussian"},
              "window2": {"kind": "block", "radius": [3]}, "p": [1, 2]}}
]"#;

/// A report whose spread bound cannot be met.
pub const FAILING_CONFIG: &str = r#"{"kind": "report", "grid": {"n": [16]}, "seed": 4,
  "report": {"type": "window_independence", "signals": 8, "window1": {"kind": "gaussian"},
             "window2": {"kind": "block", "radius": [2]}, "p": [1, 2], "bound": 1.0000001}}"#;

/// Stray comma on line 3.
pub const MALFORMED_CONFIG: &str = "{\n  \"kind\": \"norm\",\n  \"grid\": {\"n\": [16],},\n  \"seed\": 1\n}\n";

pub const UNKNOWN_KIND_CONFIG: &str = r#"{"kind": "wavelet-packet", "grid": {"n": [16]}}"#;

fn read_results(dir: &std::path::Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).map_err(e2s)? {
        let e = e.map_err(e2s)?;
        let name = e.file_name().to_string_lossy().into_owned();
        if name != crate::MANIFEST_NAME {
            out.insert(name, std::fs::read(e.path()).map_err(e2s)?);
        }
    }
    Ok(out)
}

fn cli_contract() -> Result<String, String> {
    let (a, b) = (Scratch::new().map_err(e2s)?, Scratch::new().map_err(e2s)?);
    let first = crate::run(PASSING_CONFIG.as_bytes(), &a.0, Some(2), None);
    ensure(first.exit_code == crate::EXIT_OK, || format!("passing config exited {}: {:?}", first.exit_code, first.messages))?;
    let second = crate::run(PASSING_CONFIG.as_bytes(), &b.0, Some(1), None);
    ensure(second.exit_code == crate::EXIT_OK, || format!("rerun exited {}", second.exit_code))?;
    let (ra, rb) = (read_results(&a.0)?, read_results(&b.0)?);
    ensure(ra == rb, || "repeated runs differ".to_string())?;
    let manifest = first.manifest.ok_or("no manifest")?;
    ensure(manifest.missing_files(&a.0).is_empty(), || "manifest lists missing files".into())?;
    ensure(ra.contains_key("gauss.svg"), || "heatmap not written".into())?;

    let delta: serde_json::Value = serde_json::from_slice(&ra["delta.json"]).map_err(e2s)?;
    let value = delta["value"].as_f64().ok_or("norm value missing")?;
    ensure((value - 0.25).abs() < 1e-12, || format!("delta/delta M^(1,inf) norm {value}"))?;
    let suite: serde_json::Value = serde_json::from_slice(&ra["suite.json"]).map_err(e2s)?;
    let ratios = suite["reports"][0]["ratios"].as_array().ok_or("suite ratios missing")?;
    ensure(ratios.iter().all(|r| r.as_f64() == Some(1.0)), || "spec1 = spec2 ratios are not all 1".into())?;

    let c = Scratch::new().map_err(e2s)?;
    let failing = crate::run(FAILING_CONFIG.as_bytes(), &c.0, None, None);
    ensure(failing.exit_code == crate::EXIT_FAILED, || format!("failing report exited {}", failing.exit_code))?;
    let malformed = crate::run(MALFORMED_CONFIG.as_bytes(), &c.0, None, None);
    ensure(malformed.exit_code == crate::EXIT_CONFIG, || format!("malformed exited {}", malformed.exit_code))?;
    ensure(malformed.messages.iter().any(|m| m.contains("line 3")), || format!("{:?}", malformed.messages))?;
    let unknown = crate::run(UNKNOWN_KIND_CONFIG.as_bytes(), &c.0, None, None);
    ensure(unknown.exit_code == crate::EXIT_CONFIG, || format!("unknown kind exited {}", unknown.exit_code))?;
    ensure(unknown.messages.iter().any(|m| m.contains("wavelet-packet")), || format!("{:?}", unknown.messages))?;
    Ok(format!(
        "{} result files byte-identical across runs; exit codes 0/1/2 as specified",
        ra.len()
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_criterion_is_registered_once() {
        let numbers: Vec<usize> = CRITERIA.iter().map(|c| c.0).collect();
        assert_eq!(numbers, (1..=11).collect::<Vec<_>>());
    }

    #[test]
    fn lines_carry_number_and_verdict() {
        let r = CriterionResult {
            number: 3,
            name: "x",
            passed: false,
            detail: "why".into(),
            seconds: 1.0,
            budget: 60.0,
        };
        let line = r.line();
        assert!(line.starts_with("criterion  3 FAIL"));
        assert!(line.ends_with("why"));
    }

    #[test]
    fn pin_band_is_relative() {
        assert!(within_pin(1.09, 1.0));
        assert!(!within_pin(1.11, 1.0));
        assert!(!within_pin(1.0, f64::NAN));
    }

    #[test]
    fn scratch_dirs_are_removed() {
        let p = {
            let s = Scratch::new().unwrap();
            assert!(s.0.is_dir());
            s.0.clone()
        };
        assert!(!p.exists());
    }
}
