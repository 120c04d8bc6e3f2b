//! Named experiments: each command builds its landscape from a config, runs
//! the matching checks and writes CSV and summary artifacts.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::config::{ExperimentConfig, LandscapeConfig, NoiseKind, ScheduleKind, ShapeConfig};
use crate::constants::{certify, contraction_factor, CertifyOptions, LandscapeCertificate};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::landscapes::{chatterjee_init, Activation, Dataset, NetSpec, NetworkLoss, QuadraticWell, ThetaSubspace};
use crate::noise::{NoiseModel, ZDist, ZShape};
use crate::objective::Objective;
use crate::rng::RngStream;
use crate::sgd::{rm_parameters, write_trajectory_csv, StepSchedule, TrajectoryOptions};
use crate::vector::ParamVector;
use crate::verify::{
    cauchy_tail_bound, certify_a1_bound, check_geometric_decay, chung_recursion, escape_experiment,
    fit_algebraic_rate, path_length_quantile, run_ensemble_with, write_per_run_csv, write_per_step_csv,
    EnsembleSpec, EnsembleStats,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    CheckSeed,
    RunEnsemble,
    RateFit,
    Escape,
    Chung,
    CertifyNet,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::CheckSeed,
        Command::RunEnsemble,
        Command::RateFit,
        Command::Escape,
        Command::Chung,
        Command::CertifyNet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::CheckSeed => "check-seed",
            Command::RunEnsemble => "run-ensemble",
            Command::RateFit => "rate-fit",
            Command::Escape => "escape",
            Command::Chung => "chung",
            Command::CertifyNet => "certify-net",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::precondition(format!("unknown command {s}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckResult {
    fn at_most(name: impl Into<String>, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            pass: measured <= threshold,
            measured,
            threshold,
            detail: detail.into(),
        }
    }

    fn at_least(name: impl Into<String>, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            pass: measured >= threshold,
            measured,
            threshold,
            detail: detail.into(),
        }
    }
}

/// The summary document written to `summary.toml`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub command: String,
    pub status: String,
    pub failed: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<CheckResult>,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<LandscapeCertificate>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// A built objective.
#[derive(Clone, Debug)]
pub enum Landscape {
    Quadratic(QuadraticWell),
    Net(NetworkLoss),
}

impl Landscape {
    pub fn objective(&self) -> &dyn Objective {
        match self {
            Landscape::Quadratic(q) => q,
            Landscape::Net(n) => n,
        }
    }
}

fn need_landscape(cfg: &ExperimentConfig) -> Result<&LandscapeConfig> {
    cfg.landscape
        .as_ref()
        .ok_or_else(|| Error::config("landscape", "this command needs a [landscape] section"))
}

/// Builds the landscape and the starting point.
pub fn build_landscape(cfg: &ExperimentConfig) -> Result<(Landscape, ParamVector)> {
    match need_landscape(cfg)? {
        LandscapeConfig::Quadratic {
            dim,
            scale,
            minimizer,
            minimizer_offset,
        } => {
            let theta0 = match &cfg.init.theta0 {
                Some(t) => ParamVector::new(t.clone())?,
                None => ParamVector::zeros(*dim),
            };
            let center = match (minimizer, minimizer_offset) {
                (Some(m), _) => ParamVector::new(m.clone())?,
                (None, offset) => theta0.add(&ParamVector::basis(*dim, 0, offset.unwrap_or(0.5)))?,
            };
            Ok((Landscape::Quadratic(QuadraticWell::new(center, *scale)?), theta0))
        }
        l @ (LandscapeConfig::ChatterjeeNet(n) | LandscapeConfig::DeepLinear(n)) => {
            let activation = if matches!(l, LandscapeConfig::ChatterjeeNet(_)) {
                Activation::SoftTanh
            } else {
                Activation::Identity
            };
            let spec = NetSpec::new(n.widths.clone(), activation)?;
            let targets = n.targets.iter().map(|y| y * n.target_scale).collect();
            let data = Dataset::shifted_basis(n.targets.len(), n.widths[0], n.input_scale, n.input_shift, targets)?;
            let theta0 = match (&cfg.init.theta0, &cfg.init.chatterjee) {
                (Some(t), _) => ParamVector::new(t.clone())?,
                (None, Some(c)) => chatterjee_init(&spec, c.weight_min, c.output_min, &mut RngStream::new(c.seed, 0))?,
                (None, None) => return Err(Error::config("init", "network landscapes need theta0 or [init.chatterjee]")),
            };
            Ok((Landscape::Net(NetworkLoss::new(spec, data)?), theta0))
        }
    }
}

pub fn build_noise(cfg: &ExperimentConfig, dim: usize) -> Result<NoiseModel> {
    let n = &cfg.noise;
    let dist = || {
        let shape = match n.shape.unwrap_or_default() {
            ShapeConfig::Sphere => ZShape::Sphere,
            ShapeConfig::Gaussian => ZShape::Gaussian,
        };
        ZDist::new(dim, n.scale.unwrap_or(0.0), shape, n.moment_order.unwrap_or(2.0))
            .map_err(|e| Error::config("noise", e.to_string()))
    };
    Ok(match n.kind {
        NoiseKind::MlScaled => NoiseModel::ml_scaled(n.sigma.unwrap_or(1.0))?,
        NoiseKind::BoundedIid => NoiseModel::BoundedIid(dist()?),
        NoiseKind::AdversarialRotated => NoiseModel::AdversarialRotated(dist()?),
    })
}

/// The step schedule, filling `eta` with `eta*` and `n0` with its smallest
/// admissible value from the certificate.
pub fn build_schedule(cfg: &ExperimentConfig, cert: &LandscapeCertificate) -> Result<StepSchedule> {
    let s = &cfg.schedule;
    Ok(match s.kind {
        ScheduleKind::Constant => StepSchedule::Constant {
            eta: s.eta.unwrap_or(cert.eta_star),
        },
        ScheduleKind::RobbinsMonro => {
            let gamma = s.gamma.unwrap_or(1.0);
            let q = s.q.unwrap_or(1.0);
            let n0 = match s.n0 {
                Some(n0) => n0,
                None => rm_parameters(cert.alpha, cert.c_lip, gamma, q)?,
            };
            StepSchedule::RobbinsMonro { gamma, n0, q }
        }
    })
}

pub fn certify_options(cfg: &ExperimentConfig) -> CertifyOptions {
    let c = &cfg.constants;
    CertifyOptions {
        r: cfg.run.event_radius(),
        outer_radius: cfg.run.outer_radius,
        sigma: if cfg.noise.kind == NoiseKind::MlScaled {
            cfg.noise.sigma.unwrap_or(1.0)
        } else {
            0.0
        },
        alpha_samples: c.alpha_samples,
        refine_steps: c.refine_steps,
        clip_pairs: c.clip_pairs,
        floor_samples: c.floor_samples,
        growth_points: c.growth_points,
        safety_factor: c.safety_factor,
        seed: c.seed,
    }
}

fn trajectory_options(cfg: &ExperimentConfig) -> TrajectoryOptions {
    TrajectoryOptions {
        r: cfg.run.event_radius(),
        outer_radius: cfg.run.outer_radius,
        horizon: cfg.run.horizon,
        thin: None,
    }
}

/// Runs `cmd`, writes its artifacts under `out_dir` and returns the summary.
/// Check failures are reported in the summary, not as errors.
pub fn run_command(cmd: Command, cfg: &ExperimentConfig, out_dir: &Path, exec: Execution) -> Result<Summary> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    let mut out = Outputs::new(out_dir);
    let mut metrics = BTreeMap::new();
    let (checks, certificate) = match cmd {
        Command::CheckSeed => check_seed(cfg, exec, &mut out, &mut metrics)?,
        Command::RunEnsemble => ensemble(cfg, exec, &mut out, &mut metrics)?,
        Command::RateFit => rate_fit(cfg, exec, &mut out, &mut metrics)?,
        Command::Escape => escape(cfg, exec, &mut out, &mut metrics)?,
        Command::Chung => (chung(cfg, &mut out, &mut metrics)?, None),
        Command::CertifyNet => certify_net(cfg, exec, &mut out, &mut metrics)?,
    };
    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    let summary = Summary {
        command: cmd.as_str().to_string(),
        status: if failed.is_empty() { "pass" } else { "fail" }.to_string(),
        failed,
        metrics,
        checks,
        config: cfg.clone(),
        certificate: certificate.clone(),
    };
    if let Some(c) = &certificate {
        out.write("certificate.toml", toml_string(c)?.as_bytes())?;
    }
    out.write("summary.toml", toml_string(&summary)?.as_bytes())?;
    Ok(summary)
}

fn toml_string<T: Serialize>(v: &T) -> Result<String> {
    toml::to_string(v).map_err(|e| Error::precondition(format!("cannot serialize summary: {e}")))
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

struct Outputs<'a> {
    dir: &'a Path,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> Self {
        Outputs { dir }
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| io_error(&path, e))
    }

    fn csv(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }
}

type CheckOutput = (Vec<CheckResult>, Option<LandscapeCertificate>);

fn certify_landscape(cfg: &ExperimentConfig, landscape: &Landscape, theta0: &ParamVector, exec: Execution) -> Result<LandscapeCertificate> {
    let opts = certify_options(cfg);
    match (landscape, &cfg.certify) {
        (Landscape::Net(loss), Some(c)) => {
            let sub = ThetaSubspace::new(loss.clone(), theta0.clone(), c.alpha_tilde)?;
            certify(loss, theta0, &opts, Some(&|p: &ParamVector| sub.contains(p)), exec)
        }
        _ => certify(landscape.objective(), theta0, &opts, None, exec),
    }
}

fn certificate_checks(cert: &LandscapeCertificate) -> Vec<CheckResult> {
    vec![
        CheckResult {
            name: "seed_condition".into(),
            pass: cert.seed_ok,
            measured: 4.0 * cert.f0,
            threshold: cert.r * cert.r * cert.alpha,
            detail: "4 F(theta_0) < r^2 alpha".into(),
        },
        CheckResult::at_most(
            "growth_bound",
            cert.growth_violations as f64,
            0.0,
            format!("|grad F|^2 <= 2 C_L F at {} points", cert.growth_points),
        ),
        CheckResult {
            name: "annulus_floor".into(),
            pass: cert.floor_ok(),
            measured: cert.m_floor,
            threshold: 0.0,
            detail: "M0 > 0 on the shell R - 1 <= |theta - theta_0| <= R".into(),
        },
    ]
}

fn check_seed(
    cfg: &ExperimentConfig,
    exec: Execution,
    _out: &mut Outputs<'_>,
    metrics: &mut BTreeMap<String, f64>,
) -> Result<CheckOutput> {
    let (landscape, theta0) = build_landscape(cfg)?;
    let cert = certify_landscape(cfg, &landscape, &theta0, exec)?;
    metrics.insert("alpha".into(), cert.alpha);
    metrics.insert("c_lip".into(), cert.c_lip);
    metrics.insert("rho".into(), cert.rho);
    Ok((certificate_checks(&cert), Some(cert)))
}

fn require_noise(cfg: &ExperimentConfig, kind: NoiseKind, cmd: Command) -> Result<()> {
    if cfg.noise.kind == kind {
        Ok(())
    } else {
        Err(Error::config(
            "noise.kind",
            format!("{cmd} requires {} noise, got {}", kind.as_str(), cfg.noise.kind.as_str()),
        ))
    }
}

fn require_schedule(cfg: &ExperimentConfig, kind: ScheduleKind, cmd: Command) -> Result<()> {
    if cfg.schedule.kind == kind {
        Ok(())
    } else {
        let name = match kind {
            ScheduleKind::Constant => "constant",
            ScheduleKind::RobbinsMonro => "robbins_monro",
        };
        Err(Error::config("schedule.kind", format!("{cmd} requires a {name} schedule")))
    }
}

/// The certificate with `eta*` and `rho` replaced by their values at the
/// configured step, which must not exceed `eta*`.
fn at_step(cert: &LandscapeCertificate, eta: f64) -> Result<LandscapeCertificate> {
    if eta > cert.eta_star {
        return Err(Error::config(
            "schedule.eta",
            format!("must not exceed the certified eta* = {}", cert.eta_star),
        ));
    }
    let mut c = cert.clone();
    c.rho = contraction_factor(eta, cert.alpha, cert.c_lip, cert.sigma);
    c.eta_star = eta;
    Ok(c)
}

fn ensemble_spec<'a>(
    cfg: &ExperimentConfig,
    obj: &'a dyn Objective,
    noise: &'a NoiseModel,
    schedule: StepSchedule,
    theta0: &'a ParamVector,
    options: &'a TrajectoryOptions,
) -> EnsembleSpec<'a> {
    EnsembleSpec {
        objective: obj,
        noise,
        schedule,
        theta0,
        options,
        n_runs: cfg.run.n_runs,
        base_seed: cfg.run.base_seed,
    }
}

fn run_and_write(
    cfg: &ExperimentConfig,
    spec: &EnsembleSpec<'_>,
    cert: Option<&LandscapeCertificate>,
    exec: Execution,
    out: &mut Outputs<'_>,
) -> Result<EnsembleStats> {
    let mut traj = Vec::new();
    let stats = run_ensemble_with(spec, cert, exec, |run_id, rec| match cfg.run.thin {
        Some(thin) => write_trajectory_csv(&mut traj, run_id, rec, &spec.schedule, run_id == 0, thin),
        None => Ok(()),
    })?;
    if cfg.run.thin.is_some() {
        out.write("trajectories.csv", &traj)?;
    }
    out.csv("per_step.csv", |b| write_per_step_csv(b, &stats))?;
    out.csv("per_run.csv", |b| write_per_run_csv(b, &stats))?;
    Ok(stats)
}

fn ensemble(
    cfg: &ExperimentConfig,
    exec: Execution,
    out: &mut Outputs<'_>,
    metrics: &mut BTreeMap<String, f64>,
) -> Result<CheckOutput> {
    let cmd = Command::RunEnsemble;
    require_noise(cfg, NoiseKind::MlScaled, cmd)?;
    require_schedule(cfg, ScheduleKind::Constant, cmd)?;
    let (landscape, theta0) = build_landscape(cfg)?;
    let obj = landscape.objective();
    let cert = certify_landscape(cfg, &landscape, &theta0, exec)?;
    let schedule = build_schedule(cfg, &cert)?;
    let StepSchedule::Constant { eta } = schedule else {
        unreachable!("constant schedule checked above")
    };
    let eff = at_step(&cert, eta)?;
    let noise = build_noise(cfg, obj.dim())?;
    let opts = trajectory_options(cfg);
    let spec = ensemble_spec(cfg, obj, &noise, schedule, &theta0, &opts);
    let stats = run_and_write(cfg, &spec, Some(&eff), exec, out)?;
    let theory = stats.theory.as_ref().expect("certificate supplied");
    let m = cfg.checks.se_multiplier;
    let n = stats.n_runs as f64;
    let horizon = stats.horizon;
    let mut checks = certificate_checks(&cert);

    // Expected loss on the event against rho^k F0.
    let last = cfg.checks.contraction_steps.unwrap_or(horizon).min(horizon);
    let (worst_k, worst) = (1..=last.max(1))
        .map(|k| {
            let s = &stats.per_step[k];
            (k, s.mean_f_event - theory.rho_curve[k] - m * s.se_f)
        })
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    checks.push(CheckResult::at_most(
        "contraction",
        worst,
        0.0,
        format!("max over 1 <= k <= {last} of mean(F 1_E_k) - rho^k F0 - {m} SE_k, attained at k = {worst_k}"),
    ));

    let escape = stats.escape_fraction();
    checks.push(survival_check("survival", escape, theory.delta, n, m));

    let beta = cfg.checks.beta.unwrap_or((1.0 + 1.0 / eff.rho) / 2.0);
    let decay = check_geometric_decay(&stats, beta)?;
    checks.push(CheckResult {
        name: "geometric_decay".into(),
        pass: decay.decreasing,
        measured: decay.maxima[3],
        threshold: decay.maxima[0],
        detail: format!(
            "max beta^k F over {} surviving runs at k = {:?}: {:?} (beta = {beta})",
            decay.surviving, decay.checkpoints, decay.maxima
        ),
    });

    let path = path_length_quantile(&stats, cfg.checks.delta_tilde)?;
    checks.push(CheckResult::at_most(
        "path_length",
        path.quantile,
        path.bound,
        format!("{} quantile of the event path length vs Markov bound", 1.0 - path.delta_tilde),
    ));

    let survivors: Vec<_> = stats.survivors().collect();
    let worst_ratio = survivors.iter().map(|r| r.final_f / theory.f0).fold(0.0, f64::max);
    checks.push(CheckResult {
        name: "final_loss".into(),
        pass: !survivors.is_empty() && worst_ratio <= cfg.checks.final_f_ratio,
        measured: worst_ratio,
        threshold: cfg.checks.final_f_ratio,
        detail: format!("max F(theta_K) / F(theta_0) over {} surviving runs", survivors.len()),
    });

    let tail = cfg.checks.tail_slack * cauchy_tail_bound(&eff, theory.f0, theory.sigma, horizon / 2);
    let worst_gap = survivors.iter().map(|r| r.tail_gap).fold(0.0, f64::max);
    checks.push(CheckResult {
        name: "point_convergence".into(),
        pass: !survivors.is_empty() && worst_gap <= tail,
        measured: worst_gap,
        threshold: tail,
        detail: format!(
            "max |theta_K - theta_K/2| over surviving runs vs {} x tail bound at j = K/2",
            cfg.checks.tail_slack
        ),
    });

    metrics.insert("eta".into(), eta);
    metrics.insert("rho".into(), eff.rho);
    metrics.insert("f0".into(), theory.f0);
    metrics.insert("escape_fraction".into(), escape);
    if let Some(d) = theory.delta {
        metrics.insert("delta".into(), d);
    }
    metrics.insert("path_length_quantile".into(), path.quantile);
    metrics.insert(
        "mean_tail_gap".into(),
        survivors.iter().map(|r| r.tail_gap).sum::<f64>() / survivors.len().max(1) as f64,
    );

    if !cfg.checks.survival_sweep.is_empty() {
        checks.extend(survival_sweep(cfg, exec, out, metrics)?);
    }
    Ok((checks, Some(cert)))
}

fn survival_check(name: &str, escape: f64, delta: Option<f64>, n: f64, m: f64) -> CheckResult {
    match delta {
        Some(d) => {
            let se = (d * (1.0 - d) / n).sqrt();
            CheckResult::at_most(
                name,
                escape,
                d + m * se,
                format!("escape fraction vs survival bound delta = {d} + {m} binomial SE"),
            )
        }
        None => CheckResult {
            name: name.into(),
            pass: false,
            measured: escape,
            threshold: f64::NAN,
            detail: "the annulus floor is zero, so no survival bound exists".into(),
        },
    }
}

/// Moves the minimizer of the quadratic so that `F(theta_0) = f M0` for each
/// configured fraction and checks the survival bound at each.
fn survival_sweep(
    cfg: &ExperimentConfig,
    exec: Execution,
    out: &mut Outputs<'_>,
    metrics: &mut BTreeMap<String, f64>,
) -> Result<Vec<CheckResult>> {
    let Some(LandscapeConfig::Quadratic { dim, scale, .. }) = &cfg.landscape else {
        return Err(Error::config("checks.survival_sweep", "the sweep applies to quadratic landscapes only"));
    };
    let r = cfg.run.event_radius();
    let theta0 = match &cfg.init.theta0 {
        Some(t) => ParamVector::new(t.clone())?,
        None => ParamVector::zeros(*dim),
    };
    let horizon = cfg.checks.sweep_horizon.unwrap_or(cfg.run.horizon);
    let n_runs = cfg.checks.sweep_runs.unwrap_or(cfg.run.n_runs);
    let opts = TrajectoryOptions {
        horizon,
        ..trajectory_options(cfg)
    };
    let noise = build_noise(cfg, *dim)?;
    let m = cfg.checks.se_multiplier;
    let mut checks = Vec::new();
    let mut rows = vec!["fraction,offset,f0,m_floor,delta,escape_fraction".to_string()];
    for &f in &cfg.checks.survival_sweep {
        // F0 = a t^2 / 2 and M0 = a (r - t)^2 / 2 with the minimizer at distance t.
        let t = f.sqrt() * r / (1.0 + f.sqrt());
        let well = QuadraticWell::new(theta0.add(&ParamVector::basis(*dim, 0, t))?, *scale)?;
        let landscape = Landscape::Quadratic(well);
        let cert = certify_landscape(cfg, &landscape, &theta0, exec)?;
        let schedule = build_schedule(cfg, &cert)?;
        let StepSchedule::Constant { eta } = schedule else {
            unreachable!("constant schedule checked by the caller")
        };
        let eff = at_step(&cert, eta)?;
        let spec = EnsembleSpec {
            objective: landscape.objective(),
            noise: &noise,
            schedule,
            theta0: &theta0,
            options: &opts,
            n_runs,
            base_seed: cfg.run.base_seed,
        };
        let stats = run_ensemble_with(&spec, Some(&eff), exec, |_, _| Ok(()))?;
        let theory = stats.theory.as_ref().expect("certificate supplied");
        let escape = stats.escape_fraction();
        checks.push(survival_check(&format!("survival_sweep_{f}"), escape, theory.delta, n_runs as f64, m));
        metrics.insert(format!("sweep_{f}_escape_fraction"), escape);
        rows.push(format!(
            "{f},{t},{},{},{},{escape}",
            theory.f0,
            cert.m_floor,
            theory.delta.map_or(String::new(), |d| d.to_string())
        ));
    }
    rows.push(String::new());
    out.write("survival_sweep.csv", rows.join("\n").as_bytes())?;
    Ok(checks)
}

fn rate_fit(
    cfg: &ExperimentConfig,
    exec: Execution,
    out: &mut Outputs<'_>,
    metrics: &mut BTreeMap<String, f64>,
) -> Result<CheckOutput> {
    let cmd = Command::RateFit;
    require_noise(cfg, NoiseKind::BoundedIid, cmd)?;
    require_schedule(cfg, ScheduleKind::RobbinsMonro, cmd)?;
    let (landscape, theta0) = build_landscape(cfg)?;
    let obj = landscape.objective();
    let cert = certify_landscape(cfg, &landscape, &theta0, exec)?;
    let schedule = build_schedule(cfg, &cert)?;
    let noise = build_noise(cfg, obj.dim())?;
    let c = noise.dist().map_or(0.0, ZDist::scale);
    let opts = trajectory_options(cfg);
    let spec = ensemble_spec(cfg, obj, &noise, schedule, &theta0, &opts);
    let stats = run_and_write(cfg, &spec, None, exec, out)?;
    let fit = fit_algebraic_rate(&stats, &schedule, cert.alpha, cert.c_lip, c, cfg.checks.burn_in)?;
    let limit = cfg.checks.rate_slack * fit.constant;
    metrics.insert("fitted_constant".into(), fit.fitted);
    metrics.insert("lemma_constant".into(), fit.constant);
    metrics.insert("ratio".into(), fit.ratio);
    metrics.insert("burn_in".into(), fit.burn_in as f64);
    if let StepSchedule::RobbinsMonro { n0, .. } = schedule {
        metrics.insert("n0".into(), n0);
    }
    let checks = vec![CheckResult::at_most(
        "algebraic_rate",
        fit.fitted,
        limit,
        format!(
            "mean of k^{} mean(F 1_E_k) over k in [{}, {}] vs {} x lemma constant {}",
            fit.q, fit.burn_in, stats.horizon, cfg.checks.rate_slack, fit.constant
        ),
    )];
    Ok((checks, Some(cert)))
}

fn escape(
    cfg: &ExperimentConfig,
    exec: Execution,
    out: &mut Outputs<'_>,
    metrics: &mut BTreeMap<String, f64>,
) -> Result<CheckOutput> {
    let cmd = Command::Escape;
    require_noise(cfg, NoiseKind::AdversarialRotated, cmd)?;
    require_schedule(cfg, ScheduleKind::RobbinsMonro, cmd)?;
    let (landscape, theta0) = build_landscape(cfg)?;
    let obj = landscape.objective();
    let cert = certify_landscape(cfg, &landscape, &theta0, exec)?;
    let schedule = build_schedule(cfg, &cert)?;
    let noise = build_noise(cfg, obj.dim())?;
    let opts = trajectory_options(cfg);
    let spec = ensemble_spec(cfg, obj, &noise, schedule, &theta0, &opts);
    let horizon = cfg.run.horizon;
    let mut horizons = cfg.checks.escape_horizons.clone();
    if horizons.is_empty() {
        horizons = [horizon / 100, horizon / 10, horizon / 2].into_iter().filter(|h| *h >= 1).collect();
    }
    horizons.push(horizon);
    let stats = escape_experiment(&spec, cert.alpha, cert.c_lip, &horizons, exec)?;

    out.csv("per_run.csv", |b| {
        let mut w = csv::Writer::from_writer(b);
        let err = |e: csv::Error| io_error(Path::new("per_run.csv"), e.into());
        w.write_record(["run_id", "exit_step", "escaped"]).map_err(err)?;
        for (i, e) in stats.exit_steps.iter().enumerate() {
            w.write_record([
                i.to_string(),
                e.map_or(String::new(), |k| k.to_string()),
                u8::from(e.is_some()).to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| io_error(Path::new("per_run.csv"), e))
    })?;
    let mut rows = vec!["horizon,escape_fraction".to_string()];
    rows.extend(stats.by_horizon.iter().map(|(h, f)| format!("{h},{f}")));
    rows.push(String::new());
    out.write("per_step.csv", rows.join("\n").as_bytes())?;

    let tol = cfg.checks.diagnostic_tolerance;
    let rel = (stats.mean_diagnostic - stats.diagnostic_target).abs() / stats.diagnostic_target;
    metrics.insert("escape_fraction".into(), stats.escape_fraction);
    metrics.insert("mean_diagnostic".into(), stats.mean_diagnostic);
    metrics.insert("diagnostic_target".into(), stats.diagnostic_target);
    if let StepSchedule::RobbinsMonro { n0, .. } = schedule {
        metrics.insert("n0".into(), n0);
    }
    let checks = vec![
        CheckResult::at_least(
            "escape_fraction",
            stats.escape_fraction,
            cfg.checks.min_escape_fraction,
            format!("fraction of {} runs leaving B(theta_0, r) within {horizon} steps", stats.n_runs),
        ),
        CheckResult::at_most(
            "noise_diagnostic",
            rel,
            tol,
            format!(
                "relative gap between mean sum |Z_k|/k = {} and m_bar ln(horizon) = {}",
                stats.mean_diagnostic, stats.diagnostic_target
            ),
        ),
        CheckResult {
            name: "escape_monotone".into(),
            pass: stats.monotone,
            measured: stats.by_horizon.first().map_or(0.0, |x| x.1),
            threshold: stats.escape_fraction,
            detail: format!("escape fraction by horizon: {:?}", stats.by_horizon),
        },
    ];
    Ok((checks, Some(cert)))
}

fn chung(cfg: &ExperimentConfig, out: &mut Outputs<'_>, metrics: &mut BTreeMap<String, f64>) -> Result<Vec<CheckResult>> {
    let c = cfg
        .chung
        .as_ref()
        .ok_or_else(|| Error::config("chung", "the chung command needs a [chung] section"))?;
    let res = chung_recursion(c.c1, c.c2, c.q, c.p, c.n0, c.b1, c.k_max)?;
    let mut rows = vec!["k,b_k,scaled".to_string()];
    let mut k = 1usize;
    while k <= c.k_max {
        rows.push(format!("{k},{},{}", res.b[k - 1], (k as f64).powf(c.p) * res.b[k - 1]));
        k = (k + 1).max((k as f64 * 1.05) as usize);
    }
    rows.push(String::new());
    out.write("per_step.csv", rows.join("\n").as_bytes())?;
    metrics.insert("fitted".into(), res.fitted);
    metrics.insert("raw_scaled".into(), res.raw_scaled);
    metrics.insert("limit".into(), res.limit);
    Ok(vec![CheckResult::at_most(
        "chung_limit",
        res.rel_error,
        c.tolerance,
        format!("fitted limit {} of k^p b_k vs {}", res.fitted, res.limit),
    )])
}

fn certify_net(
    cfg: &ExperimentConfig,
    exec: Execution,
    _out: &mut Outputs<'_>,
    metrics: &mut BTreeMap<String, f64>,
) -> Result<CheckOutput> {
    let landscape_cfg = need_landscape(cfg)?;
    if matches!(landscape_cfg, LandscapeConfig::Quadratic { .. }) {
        return Err(Error::config("landscape.kind", "certify-net needs a network landscape"));
    }
    let init = cfg
        .init
        .chatterjee
        .as_ref()
        .ok_or_else(|| Error::config("init.chatterjee", "certify-net needs the zero-output initialization"))?;
    let cert_cfg = cfg
        .certify
        .as_ref()
        .ok_or_else(|| Error::config("certify", "certify-net needs a [certify] section"))?;
    if cfg.run.outer_radius != init.weight_min / 2.0 {
        return Err(Error::config(
            "run.outer_radius",
            format!("must equal weight_min / 2 = {}", init.weight_min / 2.0),
        ));
    }
    let (landscape, theta0) = build_landscape(cfg)?;
    let Landscape::Net(loss) = &landscape else {
        unreachable!("network landscape checked above")
    };
    let f0 = loss.value(&theta0)?;
    let mean_sq = loss.data().mean_sq_target();
    let sub = ThetaSubspace::new(loss.clone(), theta0.clone(), cert_cfg.alpha_tilde)?;
    let report = certify_a1_bound(
        &sub,
        init.weight_min,
        init.output_min,
        cert_cfg.n_points,
        &mut RngStream::new(cert_cfg.seed, 0),
        exec,
    )?;
    let cert = certify_landscape(cfg, &landscape, &theta0, exec)?;

    metrics.insert("f0".into(), f0);
    metrics.insert("mean_sq_target".into(), mean_sq);
    metrics.insert("bound_coefficient".into(), report.coefficient);
    metrics.insert("min_margin".into(), report.min_margin);
    metrics.insert("acceptance_rate".into(), report.acceptance_rate);
    metrics.insert("lambda_min".into(), loss.data().lambda_min());

    let mut checks = vec![
        CheckResult::at_most(
            "initial_loss",
            (f0 - mean_sq).abs(),
            1e-12,
            "F(theta_0) equals the mean squared target",
        ),
        CheckResult::at_most(
            "lower_bound",
            report.violations as f64,
            0.0,
            format!(
                "violations of the quadratic lower bound at {} points of Theta in B(theta_0, R/2)",
                report.points
            ),
        ),
    ];
    checks.extend(certificate_checks(&cert));
    Ok((checks, Some(cert)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.as_str().parse::<Command>().unwrap(), c);
        }
        assert!("fly".parse::<Command>().is_err());
    }

    #[test]
    fn escape_rejects_unbiased_noise() {
        let cfg = parse_config(
            "[landscape]\nkind = \"quadratic\"\ndim = 2\n[schedule]\nkind = \"robbins_monro\"\ngamma = 2.0\n",
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let err = run_command(Command::Escape, &cfg, dir.path(), Execution::Sequential).unwrap_err();
        assert!(err.to_string().contains("adversarial_rotated"), "{err}");
    }

    #[test]
    fn check_seed_on_quadratic_fixture() {
        let cfg = parse_config("[landscape]\nkind = \"quadratic\"\ndim = 10\n[run]\nouter_radius = 2.0\nr = 1.0\n").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let s = run_command(Command::CheckSeed, &cfg, dir.path(), Execution::Parallel).unwrap();
        assert!(s.passed(), "{:?}", s.failed);
        assert!(dir.path().join("certificate.toml").exists());
        assert!(dir.path().join("summary.toml").exists());
    }

    #[test]
    fn chung_command_passes_reference_case() {
        let cfg = parse_config("[chung]\nc1 = 2.0\nc2 = 1.0\nq = 1.0\np = 1.0\nk_max = 100000\n").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let s = run_command(Command::Chung, &cfg, dir.path(), Execution::Sequential).unwrap();
        assert!(s.passed());
        assert!((s.metrics["fitted"] - 1.0).abs() < 0.02);
    }
}
