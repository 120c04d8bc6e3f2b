//! Experiment configuration: a TOML document with flat sections.
//!
//! Unknown keys are rejected, documented defaults are filled in at parse
//! time, and every constraint violation names the offending key. Parsing
//! the output of [`serialize`] gives back an equal config.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landscape: Option<LandscapeConfig>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub constants: ConstantsConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chung: Option<ChungConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertifyConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LandscapeConfig {
    /// `(a/2)|theta - theta*|^2`.
    Quadratic {
        dim: usize,
        #[serde(default = "one")]
        scale: f64,
        /// Explicit minimizer. Exclusive with `minimizer_offset`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        minimizer: Option<Vec<f64>>,
        /// Minimizer at `theta_0 + offset e_1`; 0.5 when neither key is given.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        minimizer_offset: Option<f64>,
    },
    ChatterjeeNet(NetConfig),
    DeepLinear(NetConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    /// `d_0, d_1, ..., d_L` with `d_L = 1`.
    pub widths: Vec<usize>,
    /// Unscaled targets, one per sample.
    pub targets: Vec<f64>,
    /// Multiplier applied to every target.
    #[serde(default = "one")]
    pub target_scale: f64,
    /// Inputs are `input_scale e_i + input_shift (1, ..., 1)`.
    #[serde(default = "one")]
    pub input_scale: f64,
    #[serde(default = "default_input_shift")]
    pub input_shift: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    MlScaled,
    BoundedIid,
    AdversarialRotated,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::MlScaled => "ml_scaled",
            NoiseKind::BoundedIid => "bounded_iid",
            NoiseKind::AdversarialRotated => "adversarial_rotated",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeConfig {
    #[default]
    Sphere,
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub kind: NoiseKind,
    /// Amplitude for `ml_scaled`; defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Moment bound `c` for the i.i.d. models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment_order: Option<f64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            kind: NoiseKind::MlScaled,
            sigma: Some(1.0),
            scale: None,
            shape: None,
            moment_order: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    #[default]
    Constant,
    RobbinsMonro,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default)]
    pub kind: ScheduleKind,
    /// Constant step; the certified `eta*` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Offset; the smallest admissible value when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    /// Explicit starting point. Exclusive with `[init.chatterjee]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chatterjee: Option<ChatterjeeInitConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatterjeeInitConfig {
    /// `R`: lower bound of the hidden weights.
    pub weight_min: f64,
    /// `A`: lower bound of the output weights.
    pub output_min: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `R`: radius of the confinement ball.
    #[serde(default = "default_outer_radius")]
    pub outer_radius: f64,
    /// Event radius; `R - 1` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Write `trajectories.csv` with every `thin`-th step of every run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thin: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            outer_radius: default_outer_radius(),
            r: None,
            horizon: default_horizon(),
            n_runs: default_runs(),
            base_seed: 0,
            thin: None,
        }
    }
}

impl RunConfig {
    pub fn event_radius(&self) -> f64 {
        self.r.unwrap_or(self.outer_radius - 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(default = "default_samples")]
    pub alpha_samples: usize,
    #[serde(default = "default_refine")]
    pub refine_steps: usize,
    #[serde(default = "default_samples")]
    pub clip_pairs: usize,
    #[serde(default = "default_samples")]
    pub floor_samples: usize,
    #[serde(default = "default_growth_points")]
    pub growth_points: usize,
    #[serde(default = "default_safety")]
    pub safety_factor: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        ConstantsConfig {
            alpha_samples: default_samples(),
            refine_steps: default_refine(),
            clip_pairs: default_samples(),
            floor_samples: default_samples(),
            growth_points: default_growth_points(),
            safety_factor: default_safety(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    /// Monte Carlo tolerance in standard errors.
    #[serde(default = "default_se")]
    pub se_multiplier: f64,
    /// Last step of the contraction check; the horizon when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contraction_steps: Option<usize>,
    #[serde(default = "default_delta_tilde")]
    pub delta_tilde: f64,
    /// Decay rate for the geometric check; `(1 + 1/rho) / 2` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Surviving runs must reach `F <= final_f_ratio F(theta_0)`.
    #[serde(default = "default_final_ratio")]
    pub final_f_ratio: f64,
    /// Markov slack on the tail bound for `|theta_K - theta_{K/2}|`.
    #[serde(default = "default_tail_slack")]
    pub tail_slack: f64,
    /// Fractions `F(theta_0) / M0` for the survival sweep (quadratic only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub survival_sweep: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_runs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default = "default_rate_slack")]
    pub rate_slack: f64,
    #[serde(default = "default_min_escape")]
    pub min_escape_fraction: f64,
    /// Relative tolerance on the escape noise diagnostic.
    #[serde(default = "default_diag_tol")]
    pub diagnostic_tolerance: f64,
    /// Intermediate horizons for the escape monotonicity check.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub escape_horizons: Vec<usize>,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        ChecksConfig {
            se_multiplier: default_se(),
            contraction_steps: None,
            delta_tilde: default_delta_tilde(),
            beta: None,
            final_f_ratio: default_final_ratio(),
            tail_slack: default_tail_slack(),
            survival_sweep: Vec::new(),
            sweep_horizon: None,
            sweep_runs: None,
            burn_in: None,
            rate_slack: default_rate_slack(),
            min_escape_fraction: default_min_escape(),
            diagnostic_tolerance: default_diag_tol(),
            escape_horizons: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChungConfig {
    pub c1: f64,
    pub c2: f64,
    pub q: f64,
    pub p: f64,
    #[serde(default = "one")]
    pub n0: f64,
    #[serde(default = "one")]
    pub b1: f64,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_chung_tol")]
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    /// Slope of the first-layer pre-activation constraint.
    pub alpha_tilde: f64,
    #[serde(default = "default_points")]
    pub n_points: usize,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}
fn default_input_shift() -> f64 {
    0.1
}
fn default_outer_radius() -> f64 {
    3.0
}
fn default_horizon() -> usize {
    100
}
fn default_runs() -> usize {
    100
}
fn default_samples() -> usize {
    2000
}
fn default_refine() -> usize {
    50
}
fn default_growth_points() -> usize {
    1000
}
fn default_safety() -> f64 {
    1.1
}
fn default_se() -> f64 {
    3.0
}
fn default_delta_tilde() -> f64 {
    0.1
}
fn default_final_ratio() -> f64 {
    1e-8
}
fn default_tail_slack() -> f64 {
    10.0
}
fn default_rate_slack() -> f64 {
    1.5
}
fn default_min_escape() -> f64 {
    0.99
}
fn default_diag_tol() -> f64 {
    0.1
}
fn default_k_max() -> usize {
    1_000_000
}
fn default_chung_tol() -> f64 {
    0.02
}
fn default_points() -> usize {
    10_000
}

/// Parses, validates and fills defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config {
        key: e.span().map_or_else(String::new, |s| format!("byte {}", s.start)),
        message: e.message().to_string(),
    })?;
    cfg.fill_defaults();
    cfg.validate()?;
    Ok(cfg)
}

pub fn serialize(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::config("", e.to_string()))
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be positive and finite, got {v}")))
    }
}

fn finite_list(key: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::config(format!("{key}[{i}]"), "must be finite")),
        None => Ok(()),
    }
}

fn unused<T>(key: &str, v: &Option<T>, kind: &str) -> Result<()> {
    match v {
        Some(_) => Err(Error::config(key, format!("is not used by {kind}"))),
        None => Ok(()),
    }
}

impl ExperimentConfig {
    fn fill_defaults(&mut self) {
        if let Some(LandscapeConfig::Quadratic {
            minimizer,
            minimizer_offset,
            ..
        }) = &mut self.landscape
        {
            if minimizer.is_none() && minimizer_offset.is_none() {
                *minimizer_offset = Some(0.5);
            }
        }
        let n = &mut self.noise;
        match n.kind {
            NoiseKind::MlScaled => {
                n.sigma.get_or_insert(1.0);
            }
            NoiseKind::BoundedIid | NoiseKind::AdversarialRotated => {
                n.shape.get_or_insert(ShapeConfig::Sphere);
                n.moment_order.get_or_insert(2.0);
            }
        }
        if self.schedule.kind == ScheduleKind::RobbinsMonro {
            self.schedule.q.get_or_insert(1.0);
        }
        if self.run.r.is_none() {
            self.run.r = Some(self.run.outer_radius - 1.0);
        }
    }

    /// Checks every constraint that does not depend on the landscape
    /// constants.
    pub fn validate(&self) -> Result<()> {
        if let Some(l) = &self.landscape {
            l.validate()?;
        }
        self.validate_noise()?;
        self.validate_schedule()?;
        self.validate_init()?;

        let run = &self.run;
        positive("run.outer_radius", run.outer_radius)?;
        let r = run.event_radius();
        if !(r > 0.0 && r <= run.outer_radius) {
            return Err(Error::config("run.r", format!("must lie in (0, R] = (0, {}], got {r}", run.outer_radius)));
        }
        if run.horizon == 0 {
            return Err(Error::config("run.horizon", "must be at least 1"));
        }
        if run.n_runs == 0 {
            return Err(Error::config("run.n_runs", "must be at least 1"));
        }
        if run.thin == Some(0) {
            return Err(Error::config("run.thin", "must be at least 1"));
        }

        let c = &self.constants;
        for (key, v) in [
            ("constants.alpha_samples", c.alpha_samples),
            ("constants.clip_pairs", c.clip_pairs),
            ("constants.floor_samples", c.floor_samples),
            ("constants.growth_points", c.growth_points),
        ] {
            if v == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        if !(c.safety_factor >= 1.0 && c.safety_factor.is_finite()) {
            return Err(Error::config("constants.safety_factor", "must be at least 1"));
        }

        let ch = &self.checks;
        positive("checks.se_multiplier", ch.se_multiplier)?;
        if !(ch.delta_tilde > 0.0 && ch.delta_tilde <= 1.0) {
            return Err(Error::config("checks.delta_tilde", "must lie in (0, 1]"));
        }
        if let Some(b) = ch.beta {
            if !(b >= 1.0 && b.is_finite()) {
                return Err(Error::config("checks.beta", "must be at least 1"));
            }
        }
        positive("checks.final_f_ratio", ch.final_f_ratio)?;
        positive("checks.tail_slack", ch.tail_slack)?;
        positive("checks.rate_slack", ch.rate_slack)?;
        positive("checks.diagnostic_tolerance", ch.diagnostic_tolerance)?;
        if !(0.0..=1.0).contains(&ch.min_escape_fraction) {
            return Err(Error::config("checks.min_escape_fraction", "must lie in [0, 1]"));
        }
        for (i, f) in ch.survival_sweep.iter().enumerate() {
            if !(*f > 0.0 && *f < 1.0) {
                return Err(Error::config(format!("checks.survival_sweep[{i}]"), "must lie in (0, 1)"));
            }
        }
        if ch.sweep_horizon == Some(0) {
            return Err(Error::config("checks.sweep_horizon", "must be at least 1"));
        }
        if ch.sweep_runs == Some(0) {
            return Err(Error::config("checks.sweep_runs", "must be at least 1"));
        }
        for (i, h) in ch.escape_horizons.iter().enumerate() {
            if *h == 0 || *h > run.horizon {
                return Err(Error::config(
                    format!("checks.escape_horizons[{i}]"),
                    format!("must lie in [1, horizon = {}]", run.horizon),
                ));
            }
        }

        if let Some(chung) = &self.chung {
            if !(chung.q > 0.0 && chung.q <= 1.0) {
                return Err(Error::config("chung.q", "must lie in (0, 1]"));
            }
            positive("chung.c1", chung.c1)?;
            positive("chung.p", chung.p)?;
            if !(chung.c2 >= 0.0 && chung.c2.is_finite()) {
                return Err(Error::config("chung.c2", "must be non-negative"));
            }
            if chung.q == 1.0 && chung.c1 <= chung.p {
                return Err(Error::config("chung.c1", "q = 1 requires c1 > p"));
            }
            if chung.k_max < 10 {
                return Err(Error::config("chung.k_max", "must be at least 10"));
            }
            positive("chung.tolerance", chung.tolerance)?;
        }
        if let Some(cert) = &self.certify {
            positive("certify.alpha_tilde", cert.alpha_tilde)?;
            if cert.n_points == 0 {
                return Err(Error::config("certify.n_points", "must be at least 1"));
            }
        }
        Ok(())
    }

    fn validate_noise(&self) -> Result<()> {
        let n = &self.noise;
        match n.kind {
            NoiseKind::MlScaled => {
                let s = n.sigma.unwrap_or(1.0);
                if !(s >= 0.0 && s.is_finite()) {
                    return Err(Error::config("noise.sigma", format!("must be non-negative, got {s}")));
                }
                unused("noise.scale", &n.scale, "ml_scaled noise")?;
                unused("noise.shape", &n.shape, "ml_scaled noise")?;
                unused("noise.moment_order", &n.moment_order, "ml_scaled noise")?;
            }
            kind => {
                unused("noise.sigma", &n.sigma, kind.as_str())?;
                let c = n
                    .scale
                    .ok_or_else(|| Error::config("noise.scale", format!("is required for {}", kind.as_str())))?;
                if !(c >= 0.0 && c.is_finite()) {
                    return Err(Error::config("noise.scale", format!("must be non-negative, got {c}")));
                }
                if let Some(m) = n.moment_order {
                    if !(m >= 2.0 && m.is_finite()) {
                        return Err(Error::config("noise.moment_order", "must be at least 2"));
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_schedule(&self) -> Result<()> {
        let s = &self.schedule;
        match s.kind {
            ScheduleKind::Constant => {
                if let Some(eta) = s.eta {
                    if !(eta >= 0.0 && eta.is_finite()) {
                        return Err(Error::config("schedule.eta", format!("must be non-negative, got {eta}")));
                    }
                }
                unused("schedule.gamma", &s.gamma, "a constant schedule")?;
                unused("schedule.n0", &s.n0, "a constant schedule")?;
                unused("schedule.q", &s.q, "a constant schedule")?;
            }
            ScheduleKind::RobbinsMonro => {
                unused("schedule.eta", &s.eta, "a robbins_monro schedule")?;
                let gamma = s
                    .gamma
                    .ok_or_else(|| Error::config("schedule.gamma", "is required for robbins_monro"))?;
                positive("schedule.gamma", gamma)?;
                if let Some(n0) = s.n0 {
                    positive("schedule.n0", n0)?;
                }
                let q = s.q.unwrap_or(1.0);
                if !(q > 0.5 && q <= 1.0) {
                    return Err(Error::config("schedule.q", format!("q must lie in (1/2, 1], got {q}")));
                }
            }
        }
        Ok(())
    }

    fn validate_init(&self) -> Result<()> {
        let init = &self.init;
        if init.theta0.is_some() && init.chatterjee.is_some() {
            return Err(Error::config(
                "init",
                "theta0 and [init.chatterjee] are mutually exclusive",
            ));
        }
        if let Some(t) = &init.theta0 {
            finite_list("init.theta0", t)?;
            if let Some(dim) = self.landscape.as_ref().map(LandscapeConfig::param_count) {
                if t.len() != dim {
                    return Err(Error::config(
                        "init.theta0",
                        format!("has {} entries, the landscape has {dim} parameters", t.len()),
                    ));
                }
            }
        }
        if let Some(c) = &init.chatterjee {
            positive("init.chatterjee.weight_min", c.weight_min)?;
            if !(c.output_min > c.weight_min / 2.0 && c.output_min.is_finite()) {
                return Err(Error::config("init.chatterjee.output_min", "must exceed weight_min / 2"));
            }
            if matches!(self.landscape, Some(LandscapeConfig::Quadratic { .. })) {
                return Err(Error::config("init.chatterjee", "only applies to network landscapes"));
            }
        }
        if matches!(
            self.landscape,
            Some(LandscapeConfig::ChatterjeeNet(_) | LandscapeConfig::DeepLinear(_))
        ) && init.theta0.is_none()
            && init.chatterjee.is_none()
        {
            return Err(Error::config("init", "network landscapes need theta0 or [init.chatterjee]"));
        }
        Ok(())
    }
}

impl LandscapeConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            LandscapeConfig::Quadratic { .. } => "quadratic",
            LandscapeConfig::ChatterjeeNet(_) => "chatterjee_net",
            LandscapeConfig::DeepLinear(_) => "deep_linear",
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            LandscapeConfig::Quadratic { dim, .. } => *dim,
            LandscapeConfig::ChatterjeeNet(n) | LandscapeConfig::DeepLinear(n) => {
                n.widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            LandscapeConfig::Quadratic {
                dim,
                scale,
                minimizer,
                minimizer_offset,
            } => {
                if *dim == 0 {
                    return Err(Error::config("landscape.dim", "must be at least 1"));
                }
                positive("landscape.scale", *scale)?;
                match (minimizer, minimizer_offset) {
                    (Some(_), Some(_)) => {
                        return Err(Error::config(
                            "landscape.minimizer",
                            "minimizer and minimizer_offset are mutually exclusive",
                        ))
                    }
                    (Some(m), None) => {
                        finite_list("landscape.minimizer", m)?;
                        if m.len() != *dim {
                            return Err(Error::config("landscape.minimizer", format!("must have {dim} entries")));
                        }
                    }
                    (None, Some(o)) if !o.is_finite() => {
                        return Err(Error::config("landscape.minimizer_offset", "must be finite"));
                    }
                    _ => {}
                }
            }
            LandscapeConfig::ChatterjeeNet(n) | LandscapeConfig::DeepLinear(n) => {
                if n.widths.len() < 3 {
                    return Err(Error::config("landscape.widths", "need an input width and at least two layers"));
                }
                if n.widths.contains(&0) {
                    return Err(Error::config("landscape.widths", "widths must be positive"));
                }
                if n.widths.last() != Some(&1) {
                    return Err(Error::config("landscape.widths", "the output width must be 1"));
                }
                if n.targets.is_empty() || n.targets.len() > n.widths[0] {
                    return Err(Error::config(
                        "landscape.targets",
                        format!("need between 1 and {} targets (one per sample, at most the input width)", n.widths[0]),
                    ));
                }
                finite_list("landscape.targets", &n.targets)?;
                if !n.target_scale.is_finite() {
                    return Err(Error::config("landscape.target_scale", "must be finite"));
                }
                positive("landscape.input_scale", n.input_scale)?;
                if !n.input_shift.is_finite() {
                    return Err(Error::config("landscape.input_shift", "must be finite"));
                }
            }
        }
        Ok(())
    }
}
