//! Experiment configuration files.
//!
//! A config file holds one experiment object or a list of them. Every
//! object carries a `kind` tag; the remaining fields depend on the kind.

use gabmod::convolution::{DilationSweep, SemidiscreteSweep, WienerSweep};
use gabmod::gabor::LatticeSpec;
use gabmod::grid::{GridSpec, SignalKind};
use gabmod::mixed_norms::{Exponent, ExponentVector, MixedNormSpec, Permutation};
use gabmod::weights::Weight;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ConfigError;

pub const KINDS: [&str; 5] = ["norm", "gabor-dual", "conv-sweep", "verify-suite", "report"];

/// Environment variable that replaces every experiment seed.
pub const SEED_ENV: &str = "TOOL_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    #[default]
    Json,
    Both,
}

impl OutputFormat {
    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// File name prefix inside the output directory.
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub plot: bool,
    #[serde(flatten)]
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Task {
    Norm(NormTask),
    GaborDual(GaborDualTask),
    ConvSweep(ConvSweepTask),
    VerifySuite(VerifySuiteTask),
    Report(ReportTask),
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Norm(_) => "norm",
            Task::GaborDual(_) => "gabor-dual",
            Task::ConvSweep(_) => "conv-sweep",
            Task::VerifySuite(_) => "verify-suite",
            Task::Report(_) => "report",
        }
    }

    fn needs_grid(&self) -> bool {
        !matches!(self, Task::ConvSweep(_))
    }

    fn needs_seed(&self) -> bool {
        match self {
            Task::Norm(_) => false,
            Task::GaborDual(t) => t.probes > 0,
            _ => true,
        }
    }
}

/// Which quantity a `norm` experiment evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// `||V_phi f||` in the weighted mixed norm.
    Modulation,
    /// `W(FL^p, L^q)` norm; uses `amalgam_p` / `amalgam_q`.
    Amalgam,
    /// Weighted `l^q` norm of the DFT.
    FourierLebesgue,
    /// Mixed norm of the signal itself.
    Lebesgue,
}

/// Exponents, collapse order and weight of a mixed norm. `sigma` defaults
/// to the identity, `omega` to the constant one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormFields {
    pub p: ExponentVector,
    #[serde(default)]
    pub sigma: Option<Permutation>,
    #[serde(default)]
    pub omega: Option<Weight>,
}

impl NormFields {
    pub fn to_spec(&self) -> gabmod::Result<MixedNormSpec> {
        let d = self.p.len();
        let sigma = self.sigma.clone().unwrap_or_else(|| Permutation::identity(d));
        let omega = self.omega.clone().unwrap_or_else(|| Weight::one(d));
        MixedNormSpec::new(self.p.clone(), sigma, omega)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormTask {
    pub measure: Measure,
    pub signal: SignalKind,
    #[serde(default)]
    pub window: Option<SignalKind>,
    /// Exponents over phase space (modulation) or the grid (lebesgue).
    #[serde(default)]
    pub p: Option<ExponentVector>,
    #[serde(default)]
    pub sigma: Option<Permutation>,
    #[serde(default)]
    pub omega: Option<Weight>,
    /// Exponent of the Fourier side for `amalgam` and `fourier_lebesgue`.
    #[serde(default)]
    pub q: Option<Exponent>,
    /// Exponent of the time side for `amalgam`.
    #[serde(default)]
    pub amalgam_p: Option<Exponent>,
    #[serde(default)]
    pub x_anchor: Option<Vec<f64>>,
}

fn default_tol() -> f64 {
    1e-12
}

fn default_max_iter() -> usize {
    2000
}

fn default_probes() -> usize {
    20
}

fn default_recon_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaborDualTask {
    pub window: SignalKind,
    pub lattice: LatticeSpec,
    /// Residual target of the conjugate-gradient solve.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Random signals used to measure the reconstruction residual.
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default = "default_recon_tol")]
    pub reconstruction_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimate {
    Semidiscrete,
    Dilation,
    Wiener,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvSweepTask {
    pub estimate: Estimate,
    pub count: usize,
    /// Sampling domain of the sweep; missing fields take their defaults.
    #[serde(default)]
    pub domain: Option<Value>,
}

/// Parsed sampling domain of a convolution sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepDomain {
    Semidiscrete(SemidiscreteSweep),
    Dilation(DilationSweep),
    Wiener(WienerSweep),
}

impl ConvSweepTask {
    pub fn domain(&self) -> Result<SweepDomain, serde_json::Error> {
        let v = self.domain.clone().unwrap_or(Value::Object(Default::default()));
        Ok(match self.estimate {
            Estimate::Semidiscrete => SweepDomain::Semidiscrete(serde_json::from_value(v)?),
            Estimate::Dilation => SweepDomain::Dilation(serde_json::from_value(v)?),
            Estimate::Wiener => SweepDomain::Wiener(serde_json::from_value(v)?),
        })
    }
}

fn default_bound() -> f64 {
    gabmod::modspace::DEFAULT_SPREAD_BOUND
}

fn default_embed_tol() -> f64 {
    1e-10
}

fn default_centers() -> usize {
    16
}

/// One ensemble experiment. `signals` random signals are drawn from the
/// experiment seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReportSpec {
    WindowIndependence {
        signals: usize,
        window1: SignalKind,
        window2: SignalKind,
        #[serde(flatten)]
        norm: NormFields,
        #[serde(default = "default_bound")]
        bound: f64,
    },
    Embedding {
        signals: usize,
        window: SignalKind,
        spec1: NormFields,
        spec2: NormFields,
        #[serde(default = "default_embed_tol")]
        tol: f64,
        #[serde(default = "default_bound")]
        bound: f64,
    },
    GaborEquivalence {
        signals: usize,
        window: SignalKind,
        lattice: LatticeSpec,
        /// Replace the window by its canonical tight version first.
        #[serde(default)]
        tight: bool,
        #[serde(flatten)]
        norm: NormFields,
        #[serde(default = "default_bound")]
        bound: f64,
    },
    WienerEquivalence {
        signals: usize,
        window1: SignalKind,
        window2: SignalKind,
        /// Block side per phase-space axis.
        block: Vec<usize>,
        #[serde(flatten)]
        norm: NormFields,
        #[serde(default = "default_bound")]
        bound: f64,
    },
    CompactSupport {
        signals: usize,
        support_radius: usize,
        window: SignalKind,
        q: Exponent,
        p_list: Vec<Exponent>,
        #[serde(default)]
        omega: Option<Weight>,
        #[serde(default = "default_bound")]
        bound: f64,
    },
    LocalBound {
        signals: usize,
        #[serde(default)]
        width: Option<Vec<f64>>,
        p: Exponent,
        radius: f64,
        #[serde(default = "default_centers")]
        centers: usize,
        #[serde(default = "default_bound")]
        bound: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTask {
    pub report: ReportSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySuiteTask {
    pub reports: Vec<ReportSpec>,
}

/// Parse a config file's text into experiments.
///
/// Syntax errors carry the line and column; a `kind` outside [`KINDS`] is
/// reported as such before any field is looked at.
pub fn parse_configs(text: &str) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let items = match value {
        Value::Array(items) => items,
        v @ Value::Object(_) => vec![v],
        _ => return Err(ConfigError::Invalid("top level must be an object or a list of objects".into())),
    };
    if items.is_empty() {
        return Err(ConfigError::Invalid("config holds no experiments".into()));
    }
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| {
            let kind = item
                .get("kind")
                .ok_or_else(|| ConfigError::Invalid(format!("experiment {i}: missing `kind`")))?;
            let kind = kind
                .as_str()
                .ok_or_else(|| ConfigError::Invalid(format!("experiment {i}: `kind` must be a string")))?;
            if !KINDS.contains(&kind) {
                return Err(ConfigError::UnknownKind(kind.to_string()));
            }
            serde_json::from_value(item).map_err(|e| ConfigError::Invalid(format!("experiment {i}: {e}")))
        })
        .collect()
}

impl ExperimentConfig {
    /// Checks required fields and fills in the grid's default steps.
    pub fn validate(mut self, index: usize) -> Result<Self, ConfigError> {
        let ctx = |m: String| ConfigError::Invalid(format!("experiment {index} ({}): {m}", self.task.kind()));
        if self.task.needs_grid() {
            match self.grid.take() {
                None => return Err(ctx("missing `grid`".into())),
                Some(g) => self.grid = Some(g.normalized().map_err(|e| ctx(e.to_string()))?),
            }
        }
        if self.task.needs_seed() && self.seed.is_none() {
            return Err(ctx("missing `seed`".into()));
        }
        if let Task::ConvSweep(t) = &self.task {
            t.domain().map_err(|e| ctx(format!("domain: {e}")))?;
        }
        if let Task::VerifySuite(t) = &self.task {
            if t.reports.is_empty() {
                return Err(ctx("`reports` is empty".into()));
            }
        }
        if self.plot {
            if !matches!(self.task, Task::Norm(_) | Task::GaborDual(_)) {
                return Err(ctx("`plot` is only available for norm and gabor-dual".into()));
            }
            let d = self.grid.as_ref().map_or(0, |g| g.dim());
            if d != 1 {
                return Err(ctx(format!("heatmaps need d = 1 (two-dimensional phase space), got d = {d}")));
            }
        }
        if let Some(out) = &self.output {
            if out.is_empty() || out.contains(['/', '\\']) || out.starts_with('.') {
                return Err(ctx(format!("output prefix `{out}` must be a plain file name")));
            }
        }
        Ok(self)
    }

    /// Output prefix, defaulting to the position and kind.
    pub fn prefix(&self, index: usize) -> String {
        self.output.clone().unwrap_or_else(|| format!("{index:02}-{}", self.task.kind()))
    }

    /// The seed after the environment override.
    pub fn effective_seed(&self, env_seed: Option<u64>) -> u64 {
        env_seed.or(self.seed).unwrap_or(0)
    }
}

/// Reads [`SEED_ENV`]; an unparsable value is a configuration error.
pub fn env_seed() -> Result<Option<u64>, ConfigError> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| ConfigError::Invalid(format!("{SEED_ENV}=`{s}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_object_and_list_both_parse() {
        let one = r#"{"kind":"norm","grid":{"n":[16]},"measure":"modulation",
            "signal":{"kind":"delta"},"window":{"kind":"delta"},"p":[1,"inf"]}"#;
        assert_eq!(parse_configs(one).unwrap().len(), 1);
        let two = format!("[{one},{one}]");
        assert_eq!(parse_configs(&two).unwrap().len(), 2);
    }

    #[test]
    fn syntax_error_reports_position() {
        match parse_configs("{\n  \"kind\": \"norm\",\n  oops\n}") {
            Err(ConfigError::Syntax { line, column, .. }) => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_kind_is_named() {
        match parse_configs(r#"{"kind":"fourier-magic"}"#) {
            Err(ConfigError::UnknownKind(k)) => assert_eq!(k, "fourier-magic"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn seed_required_for_random_kinds() {
        let c = parse_configs(r#"{"kind":"conv-sweep","estimate":"wiener","count":3}"#).unwrap();
        assert!(c[0].clone().validate(0).is_err());
        let c = parse_configs(r#"{"kind":"conv-sweep","estimate":"wiener","count":3,"seed":1}"#).unwrap();
        assert!(c[0].clone().validate(0).is_ok());
    }

    #[test]
    fn grid_steps_default_to_one() {
        let c = parse_configs(
            r#"{"kind":"norm","grid":{"n":[8,8]},"measure":"lebesgue","signal":{"kind":"delta"},"p":[2,2]}"#,
        )
        .unwrap();
        let c = c[0].clone().validate(0).unwrap();
        assert_eq!(c.grid.unwrap().step, vec![1.0, 1.0]);
    }

    #[test]
    fn bad_sweep_domain_is_rejected() {
        let c = parse_configs(
            r#"{"kind":"conv-sweep","estimate":"semidiscrete","count":3,"seed":1,"domain":{"sizes":"big"}}"#,
        )
        .unwrap();
        assert!(c[0].clone().validate(0).is_err());
    }

    #[test]
    fn config_round_trips() {
        let text = r#"[{"kind":"report","grid":{"n":[16]},"seed":4,"format":"both",
            "report":{"type":"embedding","signals":5,"window":{"kind":"gaussian"},
            "spec1":{"p":[1,1]},"spec2":{"p":[2,"inf"],"omega":{"family":"constant","params":{"c":0.5,"dim":2}}}}}]"#;
        let c = parse_configs(text).unwrap();
        let back: ExperimentConfig = serde_json::from_value(serde_json::to_value(&c[0]).unwrap()).unwrap();
        assert_eq!(back, c[0]);
    }

    #[test]
    fn output_prefix_cannot_escape_the_directory() {
        let c = parse_configs(r#"{"kind":"conv-sweep","estimate":"wiener","count":1,"seed":1,"output":"../x"}"#)
            .unwrap();
        assert!(c[0].clone().validate(0).is_err());
    }
}
