//! Executes validated experiments.

use gabmod::convolution::{
    csv_quote, dilation_sweep, fmt17, semidiscrete_sweep, wiener_sweep, ConvEstimateReport, SweepSummary,
};
use gabmod::gabor::{self, GaborSystem, DEFAULT_FRAME_TOL};
use gabmod::grid::{standard_signal, GridSpec, PhaseSpaceSignal, SignalKind, SignalNd};
use gabmod::mixed_norms::iterated_lebesgue_norm;
use gabmod::modspace::{self, CompactSupportSpec, Ensemble, EquivalenceReport, LocalBoundSpec, ModNormSpec};
use gabmod::rng::child_seed;
use gabmod::weights::Weight;
use gabmod::Error;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, GaborDualTask, Measure, NormTask, ReportSpec, SweepDomain, Task};

/// Everything one experiment produces before it is written out.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub json: Value,
    pub csv: String,
    pub plot: Option<PhaseSpaceSignal>,
}

/// Why an experiment produced no outcome.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecError {
    /// The parameters are inconsistent (bad shapes, violated hypotheses).
    #[error("configuration: {0}")]
    Config(String),
    /// The numerics gave up (no convergence, not a frame).
    #[error("numerical: {0}")]
    Numeric(String),
}

impl From<Error> for ExecError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotAFrame { .. } | Error::NoConvergence { .. } | Error::NonFinite(_) => {
                ExecError::Numeric(e.to_string())
            }
            _ => ExecError::Config(e.to_string()),
        }
    }
}

type Exec<T> = Result<T, ExecError>;

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn gaussian(grid: &GridSpec) -> Exec<SignalNd> {
    Ok(standard_signal(grid, &SignalKind::Gaussian { width: None })?)
}

fn signal(grid: &GridSpec, kind: &SignalKind) -> Exec<SignalNd> {
    Ok(standard_signal(grid, kind)?)
}

fn required<T: Clone>(v: &Option<T>, field: &str, measure: &str) -> Exec<T> {
    v.clone()
        .ok_or_else(|| ExecError::Config(format!("measure `{measure}` needs `{field}`")))
}

/// Runs one experiment with the given (already overridden) seed.
pub fn execute(cfg: &ExperimentConfig, seed: u64) -> Exec<Outcome> {
    match &cfg.task {
        Task::Norm(t) => norm(cfg.grid.as_ref().expect("validated"), t),
        Task::GaborDual(t) => gabor_dual(cfg.grid.as_ref().expect("validated"), t, seed),
        Task::ConvSweep(t) => {
            let domain = t.domain().map_err(|e| ExecError::Config(e.to_string()))?;
            let summary = match domain {
                SweepDomain::Semidiscrete(d) => semidiscrete_sweep(seed, t.count, &d)?,
                SweepDomain::Dilation(d) => dilation_sweep(seed, t.count, &d)?,
                SweepDomain::Wiener(d) => wiener_sweep(seed, t.count, &d)?,
            };
            Ok(sweep_outcome(&summary))
        }
        Task::Report(t) => {
            let r = report(cfg.grid.as_ref().expect("validated"), &t.report, seed)?;
            Ok(Outcome {
                passed: r.passed,
                csv: r.to_csv(),
                json: to_value(&r),
                plot: None,
            })
        }
        Task::VerifySuite(t) => {
            let grid = cfg.grid.as_ref().expect("validated");
            let reports = t
                .reports
                .iter()
                .enumerate()
                .map(|(i, spec)| report(grid, spec, child_seed(seed, i as u64)))
                .collect::<Exec<Vec<_>>>()?;
            let passed = reports.iter().all(|r| r.passed);
            let mut csv = String::from("index,experiment,ensemble_size,ratio_min,ratio_max,spread,bound,passed\n");
            for (i, r) in reports.iter().enumerate() {
                csv.push_str(&format!(
                    "{i},{},{},{},{},{},{},{}\n",
                    csv_quote(&r.experiment),
                    r.ensemble_size,
                    fmt17(r.ratio_min),
                    fmt17(r.ratio_max),
                    fmt17(r.spread),
                    fmt17(r.bound),
                    r.passed
                ));
            }
            Ok(Outcome {
                passed,
                json: json!({
                    "schema": modspace::REPORT_SCHEMA,
                    "kind": "verify-suite",
                    "seed": seed,
                    "passed": passed,
                    "reports": reports,
                }),
                csv,
                plot: None,
            })
        }
    }
}

fn norm(grid: &GridSpec, t: &NormTask) -> Exec<Outcome> {
    let d = grid.dim();
    let f = signal(grid, &t.signal)?;
    let window = match &t.window {
        Some(k) => signal(grid, k)?,
        None => gaussian(grid)?,
    };
    let name = serde_json::to_value(t.measure).ok().and_then(|v| v.as_str().map(String::from));
    let name = name.unwrap_or_default();
    let mut plot = None;
    let value = match t.measure {
        Measure::Modulation => {
            let p = required(&t.p, "p", &name)?;
            let fields = crate::config::NormFields {
                p,
                sigma: t.sigma.clone(),
                omega: t.omega.clone(),
            };
            let spec = ModNormSpec::new(fields.to_spec()?, window.clone())?;
            if d == 1 {
                plot = Some(gabor::stft(&f, &window)?);
            }
            modspace::modulation_norm(&f, &spec)?
        }
        Measure::Amalgam => {
            let p = required(&t.amalgam_p, "amalgam_p", &name)?;
            let q = required(&t.q, "q", &name)?;
            let omega = t.omega.clone().unwrap_or_else(|| Weight::one(2 * d));
            if d == 1 {
                plot = Some(gabor::stft(&f, &window)?);
            }
            modspace::amalgam_norm(&f, p, q, &omega, &window)?
        }
        Measure::FourierLebesgue => {
            let q = required(&t.q, "q", &name)?;
            let omega = t.omega.clone().unwrap_or_else(|| Weight::one(d));
            let anchor = t.x_anchor.clone().unwrap_or_else(|| vec![0.0; d]);
            modspace::fourier_lebesgue_norm(&f, q, &omega, &anchor)?
        }
        Measure::Lebesgue => {
            let p = required(&t.p, "p", &name)?;
            let fields = crate::config::NormFields {
                p,
                sigma: t.sigma.clone(),
                omega: t.omega.clone(),
            };
            iterated_lebesgue_norm(&f, &fields.to_spec()?)?
        }
    };
    Ok(Outcome {
        passed: value.is_finite(),
        json: json!({
            "schema": modspace::REPORT_SCHEMA,
            "kind": "norm",
            "measure": name,
            "value": value,
            "grid": grid,
            "params": t,
        }),
        csv: format!("measure,value\n{name},{}\n", fmt17(value)),
        plot,
    })
}

fn gabor_dual(grid: &GridSpec, t: &GaborDualTask, seed: u64) -> Exec<Outcome> {
    let window = signal(grid, &t.window)?;
    let mut sys = GaborSystem::new(window, t.lattice.clone())?;
    let redundancy = sys.redundancy();
    let (lower, upper) = if redundancy < 1.0 - 1e-12 {
        (0.0, f64::NAN)
    } else {
        gabor::frame_bounds(&sys)?
    };
    let is_frame = redundancy >= 1.0 - 1e-12 && lower > DEFAULT_FRAME_TOL;
    let mut out = json!({
        "schema": modspace::REPORT_SCHEMA,
        "kind": "gabor-dual",
        "seed": seed,
        "grid": grid,
        "lattice": t.lattice,
        "redundancy": redundancy,
        "frame_bounds": [lower, upper],
        "is_frame": is_frame,
    });
    if !is_frame {
        out["passed"] = json!(false);
        return Ok(Outcome {
            passed: false,
            json: out,
            csv: "index,re,im\n".into(),
            plot: None,
        });
    }
    let sol = gabor::canonical_dual(&sys, t.tol, t.max_iter)?;
    sys.dual = Some(sol.dual.clone());
    let probes = Ensemble::random(grid, seed, t.probes)?;
    let mut worst = 0.0f64;
    for f in &probes.signals {
        worst = worst.max(gabor::reconstruct(f, &sys)?.residual);
    }
    let passed = sol.residual <= t.tol && worst <= t.reconstruction_tol;
    let dual: Vec<[f64; 2]> = sol.dual.data.iter().map(|z| [z.re, z.im]).collect();
    let obj = out.as_object_mut().expect("object");
    obj.insert("cg_iterations".into(), json!(sol.iterations));
    obj.insert("cg_residual".into(), json!(sol.residual));
    obj.insert("probes".into(), json!(t.probes));
    obj.insert("reconstruction_residual".into(), json!(worst));
    obj.insert("passed".into(), json!(passed));
    obj.insert("dual".into(), json!(dual));
    let mut csv = String::from("index,re,im\n");
    for (i, z) in sol.dual.data.iter().enumerate() {
        csv.push_str(&format!("{i},{},{}\n", fmt17(z.re), fmt17(z.im)));
    }
    let plot = if grid.dim() == 1 {
        Some(gabor::stft(&sol.dual, &sys.window)?)
    } else {
        None
    };
    Ok(Outcome {
        passed,
        json: out,
        csv,
        plot,
    })
}

fn sweep_outcome(summary: &SweepSummary) -> Outcome {
    let mut csv = String::from(ConvEstimateReport::CSV_HEADER);
    csv.push('\n');
    for r in &summary.reports {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    let mut json = to_value(summary);
    json["schema"] = json!(modspace::REPORT_SCHEMA);
    Outcome {
        passed: summary.all_passed,
        json,
        csv,
        plot: None,
    }
}

/// Runs one ensemble report.
pub fn report(grid: &GridSpec, spec: &ReportSpec, seed: u64) -> Exec<EquivalenceReport> {
    let d = grid.dim();
    Ok(match spec {
        ReportSpec::WindowIndependence {
            signals,
            window1,
            window2,
            norm,
            bound,
        } => {
            let ens = Ensemble::random(grid, seed, *signals)?;
            modspace::window_independence_report(
                &ens,
                &signal(grid, window1)?,
                &signal(grid, window2)?,
                &norm.to_spec()?,
                *bound,
            )?
        }
        ReportSpec::Embedding {
            signals,
            window,
            spec1,
            spec2,
            tol,
            bound,
        } => {
            let ens = Ensemble::random(grid, seed, *signals)?;
            modspace::embedding_report(&ens, &spec1.to_spec()?, &spec2.to_spec()?, &signal(grid, window)?, *tol, *bound)?
        }
        ReportSpec::GaborEquivalence {
            signals,
            window,
            lattice,
            tight,
            norm,
            bound,
        } => {
            let mut sys = GaborSystem::new(signal(grid, window)?, lattice.clone())?;
            if *tight {
                let w = gabor::canonical_tight_window(&sys)?;
                sys = GaborSystem::new(w, lattice.clone())?;
            }
            let sys = sys.with_canonical_dual()?;
            let ens = Ensemble::random(grid, seed, *signals)?;
            modspace::gabor_equivalence_report(&ens, &sys, &norm.to_spec()?, *bound)?
        }
        ReportSpec::WienerEquivalence {
            signals,
            window1,
            window2,
            block,
            norm,
            bound,
        } => {
            let ens = Ensemble::random(grid, seed, *signals)?;
            modspace::wiener_equivalence_report(
                &ens,
                &signal(grid, window1)?,
                &signal(grid, window2)?,
                &norm.to_spec()?,
                block,
                *bound,
            )?
        }
        ReportSpec::CompactSupport {
            signals,
            support_radius,
            window,
            q,
            p_list,
            omega,
            bound,
        } => {
            let ens = Ensemble::supported(grid, seed, *signals, *support_radius)?;
            let cs = CompactSupportSpec {
                support_radius: *support_radius,
                q: *q,
                p_list: p_list.clone(),
                omega: omega.clone().unwrap_or_else(|| Weight::one(2 * d)),
                window: signal(grid, window)?,
            };
            modspace::compact_support_report(&ens, &cs, *bound)?
        }
        ReportSpec::LocalBound {
            signals,
            width,
            p,
            radius,
            centers,
            bound,
        } => {
            let ens = Ensemble::random(grid, seed, *signals)?;
            let lb = LocalBoundSpec {
                width: width.clone(),
                p: *p,
                radius: *radius,
                n_centers: *centers,
                center_seed: child_seed(seed, u64::MAX),
            };
            modspace::local_bound_report(&ens, &lb, *bound)?
        }
    })
}
