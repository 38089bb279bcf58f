//! Run configuration: a single TOML document with one flat section per
//! concern. Unknown keys are rejected and all parameters are validated
//! before any computation starts; seeds are mandatory so runs are
//! reproducible by construction.

use serde::{Deserialize, Serialize};
use std::path::Path;

use chainverifier_core::{
    AlternatingModel, FrozenModel, Model, Objective, RandomWalk, SearchBudget, SelectionWalk,
    XnesChain, XnesParams, DEFAULT_Q_SAMPLES, DEFAULT_RANK_REL_TOL,
};

use crate::CliError;

/// Whole config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<DensityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<PathsConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Model selector and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// random-walk | selection-walk | xnes | external
    pub kind: String,
    /// State dimension (random-walk, xnes, external frozen model).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<usize>,
    /// Selection weights; equal weights when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_sigma: Option<f64>,
    /// sphere | norm (objective-using models).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_samples: Option<usize>,
    /// Named registry entry for kind = "external": frozen | alternating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external: Option<String>,
}

/// Parameters of the `analyze` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub seed: u64,
    /// Candidate state x*.
    pub x_star: Vec<f64>,
    /// Attractivity ball radius.
    pub epsilon: f64,
    /// Horizon for globally-attracting certificates.
    pub k_max: usize,
    /// First length of the steady window.
    #[serde(default = "default_t_start")]
    pub t_start: usize,
    /// Width of the steady window beyond t_start.
    #[serde(default = "default_span")]
    pub span: usize,
    #[serde(default = "default_rank_rel_tol")]
    pub rank_rel_tol: f64,
    /// Radius of return-path balls; defaults to epsilon / 10.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_return: Option<f64>,
    #[serde(default = "default_return_k_max")]
    pub return_k_max: usize,
    pub origin_box_lo: Vec<f64>,
    pub origin_box_hi: Vec<f64>,
    #[serde(default = "default_origin_count")]
    pub origin_count: usize,
    /// User-supplied extreme origins appended to the low-discrepancy set.
    #[serde(default)]
    pub extra_origins: Vec<Vec<f64>>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_refine_iters")]
    pub refine_iters: usize,
    #[serde(default = "default_shrink")]
    pub shrink: f64,
}

fn default_t_start() -> usize {
    1
}
fn default_span() -> usize {
    8
}
fn default_rank_rel_tol() -> f64 {
    DEFAULT_RANK_REL_TOL
}
fn default_return_k_max() -> usize {
    6
}
fn default_origin_count() -> usize {
    32
}
fn default_restarts() -> usize {
    64
}
fn default_refine_iters() -> usize {
    200
}
fn default_shrink() -> f64 {
    0.5
}

impl AnalysisConfig {
    pub fn budget(&self) -> SearchBudget {
        SearchBudget {
            restarts: self.restarts,
            refine_iters: self.refine_iters,
            shrink: self.shrink,
        }
    }

    pub fn epsilon_return(&self) -> f64 {
        self.epsilon_return.unwrap_or(self.epsilon / 10.0)
    }
}

/// Parameters of the `check-density` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub seed: u64,
    /// States at which sampler and density are compared.
    pub states: Vec<Vec<f64>>,
    pub samples: usize,
    pub bins: usize,
    pub range_lo: f64,
    pub range_hi: f64,
    pub l1_threshold: f64,
    /// Optional per-bin CSV dump.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram_csv: Option<String>,
}

/// Parameters of the `rate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub seed: u64,
    pub x0: Vec<f64>,
    pub sigma0: f64,
    pub iterations: usize,
    /// Defaults to 20% of iterations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    /// Optional CSV export of a normalized-chain trajectory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_steps: Option<usize>,
}

impl RateConfig {
    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.iterations / 5)
    }
}

/// One path query of the `paths` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathQuery {
    pub origin: Vec<f64>,
    pub center: Vec<f64>,
    pub radius: f64,
    pub k: usize,
}

/// Parameters of the `paths` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub seed: u64,
    pub query: Vec<PathQuery>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_refine_iters")]
    pub refine_iters: usize,
    #[serde(default = "default_shrink")]
    pub shrink: f64,
}

impl PathsConfig {
    pub fn budget(&self) -> SearchBudget {
        SearchBudget {
            restarts: self.restarts,
            refine_iters: self.refine_iters,
            shrink: self.shrink,
        }
    }
}

/// Output locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Report file name inside the --out directory; defaults to
    /// `<command>-report.json`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
}

impl RunConfig {
    /// Parse and validate a TOML config file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    /// Parse and validate a TOML config document.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text)
            .map_err(|e| CliError::Config(format!("config parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Override every section seed (the --seed-override flag).
    pub fn override_seeds(&mut self, seed: u64) {
        if let Some(a) = &mut self.analysis {
            a.seed = seed;
        }
        if let Some(d) = &mut self.density {
            d.seed = seed;
        }
        if let Some(r) = &mut self.rate {
            r.seed = seed;
        }
        if let Some(p) = &mut self.paths {
            p.seed = seed;
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        self.model.validate()?;
        let n = self.model.state_dim()?;
        if let Some(a) = &self.analysis {
            check_dim("analysis.x_star", &a.x_star, n)?;
            check_dim("analysis.origin_box_lo", &a.origin_box_lo, n)?;
            check_dim("analysis.origin_box_hi", &a.origin_box_hi, n)?;
            for (i, o) in a.extra_origins.iter().enumerate() {
                check_dim(&format!("analysis.extra_origins[{i}]"), o, n)?;
            }
            check_positive("analysis.epsilon", a.epsilon)?;
            check_positive("analysis.rank_rel_tol", a.rank_rel_tol)?;
            if let Some(er) = a.epsilon_return {
                check_positive("analysis.epsilon_return", er)?;
            }
            check_at_least_one("analysis.k_max", a.k_max)?;
            check_at_least_one("analysis.t_start", a.t_start)?;
            check_at_least_one("analysis.span", a.span)?;
            check_at_least_one("analysis.return_k_max", a.return_k_max)?;
            check_at_least_one("analysis.origin_count", a.origin_count)?;
            if !(a.shrink > 0.0 && a.shrink < 1.0) {
                return Err(CliError::Config(format!(
                    "analysis.shrink must lie in (0, 1), got {}",
                    a.shrink
                )));
            }
        }
        if let Some(d) = &self.density {
            for (i, s) in d.states.iter().enumerate() {
                check_dim(&format!("density.states[{i}]"), s, n)?;
            }
            if d.states.is_empty() {
                return Err(CliError::Config("density.states must be nonempty".into()));
            }
            if d.samples < 10_000 {
                return Err(CliError::Config(format!(
                    "density.samples must be at least 10000, got {}",
                    d.samples
                )));
            }
            check_at_least_one("density.bins", d.bins)?;
            if !(d.range_hi > d.range_lo) {
                return Err(CliError::Config(
                    "density.range_hi must exceed density.range_lo".into(),
                ));
            }
            check_positive("density.l1_threshold", d.l1_threshold)?;
        }
        if let Some(r) = &self.rate {
            check_dim("rate.x0", &r.x0, n)?;
            check_positive("rate.sigma0", r.sigma0)?;
            if r.iterations <= r.burn_in() {
                return Err(CliError::Config(format!(
                    "rate.iterations ({}) must exceed rate.burn_in ({})",
                    r.iterations,
                    r.burn_in()
                )));
            }
        }
        if let Some(p) = &self.paths {
            if p.query.is_empty() {
                return Err(CliError::Config("paths.query must be nonempty".into()));
            }
            for (i, q) in p.query.iter().enumerate() {
                check_dim(&format!("paths.query[{i}].origin"), &q.origin, n)?;
                check_dim(&format!("paths.query[{i}].center"), &q.center, n)?;
                check_positive(&format!("paths.query[{i}].radius"), q.radius)?;
                check_at_least_one(&format!("paths.query[{i}].k"), q.k)?;
            }
        }
        Ok(())
    }
}

fn check_dim(field: &str, v: &[f64], n: usize) -> Result<(), CliError> {
    if v.len() != n {
        return Err(CliError::Config(format!(
            "{field} must have length {n} (the model state dimension), got {}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CliError::Config(format!("{field} contains a non-finite entry")));
    }
    Ok(())
}

fn check_positive(field: &str, v: f64) -> Result<(), CliError> {
    if !(v > 0.0) {
        return Err(CliError::Config(format!("{field} must be positive, got {v}")));
    }
    Ok(())
}

fn check_at_least_one(field: &str, v: usize) -> Result<(), CliError> {
    if v == 0 {
        return Err(CliError::Config(format!("{field} must be at least 1")));
    }
    Ok(())
}

impl ModelConfig {
    fn validate(&self) -> Result<(), CliError> {
        match self.kind.as_str() {
            "random-walk" | "selection-walk" | "xnes" | "external" => {}
            other => {
                return Err(CliError::Config(format!(
                    "model.kind must be one of random-walk | selection-walk | xnes | external, \
                     got \"{other}\""
                )))
            }
        }
        self.state_dim()?;
        if self.kind == "xnes" {
            let lambda = self.require("model.lambda", self.lambda)?;
            let mu = self.require("model.mu", self.mu)?;
            if mu == 0 || mu > lambda {
                return Err(CliError::Config(format!(
                    "model.mu must satisfy 1 <= mu <= lambda, got mu={mu}, lambda={lambda}"
                )));
            }
        }
        if matches!(self.kind.as_str(), "xnes" | "selection-walk") {
            let name = self.objective.as_deref().unwrap_or("sphere");
            if !matches!(name, "sphere" | "norm") {
                return Err(CliError::Config(format!(
                    "model.objective must be sphere | norm, got \"{name}\""
                )));
            }
        }
        if self.kind == "external" {
            let name = self
                .external
                .as_deref()
                .ok_or_else(|| CliError::Config("model.external is required for kind = \"external\"".into()))?;
            if !matches!(name, "frozen" | "alternating") {
                return Err(CliError::Config(format!(
                    "model.external must be frozen | alternating, got \"{name}\""
                )));
            }
        }
        Ok(())
    }

    fn require<T: Copy>(&self, field: &str, v: Option<T>) -> Result<T, CliError> {
        v.ok_or_else(|| CliError::Config(format!("{field} is required for model.kind = \"{}\"", self.kind)))
    }

    /// State dimension of the configured model.
    pub fn state_dim(&self) -> Result<usize, CliError> {
        match self.kind.as_str() {
            "random-walk" | "xnes" => self.require("model.n", self.n),
            "selection-walk" => Ok(1),
            "external" => match self.external.as_deref() {
                Some("alternating") => Ok(1),
                _ => Ok(self.n.unwrap_or(1)),
            },
            _ => Err(CliError::Config(format!("unknown model.kind \"{}\"", self.kind))),
        }
    }

    fn build_objective(&self) -> Objective {
        match self.objective.as_deref().unwrap_or("sphere") {
            "norm" => Objective::norm(),
            _ => Objective::sphere(),
        }
    }

    fn xnes_params(&self) -> Result<XnesParams, CliError> {
        let n = self.require("model.n", self.n)?;
        let lambda = self.require("model.lambda", self.lambda)?;
        let mu = self.require("model.mu", self.mu)?;
        let kappa_m = self.kappa_m.unwrap_or(1.0);
        let kappa_sigma = self.kappa_sigma.unwrap_or(1.0);
        let mut params = match &self.weights {
            Some(w) => XnesParams::new(
                n,
                lambda,
                mu,
                w.clone(),
                kappa_m,
                kappa_sigma,
                self.build_objective(),
            ),
            None => XnesParams::equal_weights(
                n,
                lambda,
                mu,
                kappa_m,
                kappa_sigma,
                self.build_objective(),
            ),
        }
        .map_err(|e| CliError::Config(format!("model: {e}")))?;
        params.q_samples = self.q_samples.unwrap_or(DEFAULT_Q_SAMPLES);
        Ok(params)
    }

    /// Instantiate the configured model.
    pub fn build(&self) -> Result<Box<dyn Model>, CliError> {
        match self.kind.as_str() {
            "random-walk" => Ok(Box::new(RandomWalk::new(self.require("model.n", self.n)?))),
            "selection-walk" => Ok(Box::new(SelectionWalk::new(self.build_objective()))),
            "xnes" => Ok(Box::new(self.build_xnes()?)),
            "external" => match self.external.as_deref() {
                Some("frozen") => Ok(Box::new(FrozenModel::new(self.n.unwrap_or(1)))),
                Some("alternating") => Ok(Box::new(AlternatingModel::new())),
                other => Err(CliError::Config(format!(
                    "model.external must be frozen | alternating, got {other:?}"
                ))),
            },
            other => Err(CliError::Config(format!("unknown model.kind \"{other}\""))),
        }
    }

    /// Build the concrete xNES chain (the rate command needs its parameters,
    /// not just the model trait surface).
    pub fn build_xnes(&self) -> Result<XnesChain, CliError> {
        if self.kind != "xnes" {
            return Err(CliError::Config(format!(
                "this operation requires model.kind = \"xnes\", got \"{}\"",
                self.kind
            )));
        }
        XnesChain::new(self.xnes_params()?).map_err(|e| CliError::Config(format!("model: {e}")))
    }
}
