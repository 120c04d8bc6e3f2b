use std::io::Write;

use crate::constants::LandscapeCertificate;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::noise::{NoiseModel, Welford};
use crate::objective::Objective;
use crate::rng::RngStream;
use crate::sgd::{run_trajectory, ExitClass, StepSchedule, TrajectoryOptions, TrajectoryRecord};
use crate::vector::{self, ParamVector};

use super::bounds::{path_length_coefficient, survival_bound};

/// Runs are simulated this many at a time and folded into the statistics in
/// run order, which bounds memory and keeps the sums bitwise reproducible.
const CHUNK: usize = 64;

/// Everything needed to simulate `n_runs` independent trajectories.
#[derive(Clone, Copy)]
pub struct EnsembleSpec<'a> {
    pub objective: &'a dyn Objective,
    pub noise: &'a NoiseModel,
    pub schedule: StepSchedule,
    pub theta0: &'a ParamVector,
    pub options: &'a TrajectoryOptions,
    pub n_runs: usize,
    pub base_seed: u64,
}

/// Simulates every run on stream `(base_seed, run_id)` and hands the records
/// to `visit` in run order.
pub fn for_each_run(
    spec: &EnsembleSpec<'_>,
    exec: Execution,
    mut visit: impl FnMut(u64, TrajectoryRecord) -> Result<()>,
) -> Result<()> {
    if spec.n_runs == 0 {
        return Err(Error::precondition("n_runs must be at least 1"));
    }
    spec.options.validate()?;
    let mut start = 0;
    while start < spec.n_runs {
        let len = CHUNK.min(spec.n_runs - start);
        let records = exec.try_map(len, |i| {
            let run_id = (start + i) as u64;
            let mut rng = RngStream::new(spec.base_seed, run_id);
            run_trajectory(
                spec.objective,
                spec.noise,
                &spec.schedule,
                spec.theta0,
                spec.options,
                &mut rng,
            )
            .map_err(|e| Error::Run {
                run_id,
                source: Box::new(e),
            })
        })?;
        for (i, rec) in records.into_iter().enumerate() {
            visit((start + i) as u64, rec)?;
        }
        start += len;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    /// Mean of `F(theta_k) 1_{E_k}`.
    pub mean_f_event: f64,
    pub se_f: f64,
    pub mean_dist: f64,
    /// Fraction of runs with `E_k` intact.
    pub survival: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub run_id: u64,
    pub exit_step: Option<usize>,
    pub exit_class: ExitClass,
    pub path_length: f64,
    pub final_f: f64,
    /// `|theta_K - theta_{K/2}|`.
    pub tail_gap: f64,
    /// `F` at `K/4, K/2, 3K/4, K`.
    pub checkpoint_f: [f64; 4],
    pub noise_weighted_sum: f64,
    pub steps_taken: usize,
}

impl RunSummary {
    pub fn survived(&self) -> bool {
        self.exit_step.is_none()
    }
}

/// Reference curves derived from a landscape certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct Theory {
    pub f0: f64,
    pub rho: f64,
    pub sigma: f64,
    /// `rho^k F(theta_0)` for `k = 0..=K`.
    pub rho_curve: Vec<f64>,
    /// Clamped survival bound; `None` when the floor is not positive.
    pub delta: Option<f64>,
    /// `(sqrt(2 C_L) + sqrt(sigma)) eta* F(theta_0) / (1 - sqrt(rho))`.
    pub path_coefficient: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleStats {
    pub n_runs: usize,
    pub horizon: usize,
    pub checkpoints: [usize; 4],
    /// Indexed by `k = 0..=horizon`.
    pub per_step: Vec<StepStats>,
    pub runs: Vec<RunSummary>,
    pub theory: Option<Theory>,
}

impl EnsembleStats {
    pub fn survivors(&self) -> impl Iterator<Item = &RunSummary> {
        self.runs.iter().filter(|r| r.survived())
    }

    pub fn escape_fraction(&self) -> f64 {
        1.0 - self.per_step.last().map_or(1.0, |s| s.survival)
    }
}

pub fn checkpoints(horizon: usize) -> [usize; 4] {
    [horizon / 4, horizon / 2, 3 * horizon / 4, horizon]
}

pub fn run_ensemble(spec: &EnsembleSpec<'_>, cert: Option<&LandscapeCertificate>, exec: Execution) -> Result<EnsembleStats> {
    run_ensemble_with(spec, cert, exec, |_, _| Ok(()))
}

/// Like [`run_ensemble`], also passing every record to `sink` in run order.
pub fn run_ensemble_with(
    spec: &EnsembleSpec<'_>,
    cert: Option<&LandscapeCertificate>,
    exec: Execution,
    mut sink: impl FnMut(u64, &TrajectoryRecord) -> Result<()>,
) -> Result<EnsembleStats> {
    let horizon = spec.options.horizon;
    let cps = checkpoints(horizon);
    let mut f_acc = vec![Welford::default(); horizon + 1];
    let mut dist_sum = vec![0.0; horizon + 1];
    let mut alive = vec![0usize; horizon + 1];
    let mut runs = Vec::with_capacity(spec.n_runs);

    for_each_run(spec, exec, |run_id, rec| {
        sink(run_id, &rec)?;
        for k in 0..=horizon {
            let on = rec.alive_at(k);
            f_acc[k].push(if on { rec.f_values[k] } else { 0.0 });
            dist_sum[k] += rec.dist_values[k];
            alive[k] += usize::from(on);
        }
        runs.push(RunSummary {
            run_id,
            exit_step: rec.event_alive_until,
            exit_class: rec.exit_class,
            path_length: rec.path_length,
            final_f: rec.final_f(),
            tail_gap: vector::distance(rec.final_theta.as_slice(), rec.mid_theta.as_slice()),
            checkpoint_f: cps.map(|k| rec.f_values[k]),
            noise_weighted_sum: rec.noise_weighted_sum,
            steps_taken: rec.steps_taken,
        });
        Ok(())
    })?;

    let n = spec.n_runs as f64;
    let per_step = (0..=horizon)
        .map(|k| StepStats {
            mean_f_event: f_acc[k].mean(),
            se_f: f_acc[k].standard_error(),
            mean_dist: dist_sum[k] / n,
            survival: alive[k] as f64 / n,
        })
        .collect();

    let theory = match cert {
        Some(c) => {
            let f0 = spec.objective.value(spec.theta0)?;
            let sigma = spec.noise.sigma();
            Some(Theory {
                f0,
                rho: c.rho,
                sigma,
                rho_curve: (0..=horizon).map(|k| c.rho.powi(k as i32) * f0).collect(),
                delta: survival_bound(c, f0, sigma).ok(),
                path_coefficient: path_length_coefficient(c, f0, sigma),
            })
        }
        None => None,
    };

    Ok(EnsembleStats {
        n_runs: spec.n_runs,
        horizon,
        checkpoints: cps,
        per_step,
        runs,
        theory,
    })
}

fn csv_error(path: &str) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.into(),
        source: e.into(),
    }
}

/// `k,mean_f_event,se_f,mean_dist,survival_frac,theory_rho_k`; the last
/// column is empty without a certificate.
pub fn write_per_step_csv<W: Write>(out: W, stats: &EnsembleStats) -> Result<()> {
    let err = csv_error("per_step.csv");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "mean_f_event", "se_f", "mean_dist", "survival_frac", "theory_rho_k"])
        .map_err(&err)?;
    for (k, s) in stats.per_step.iter().enumerate() {
        let theory = stats
            .theory
            .as_ref()
            .map_or(String::new(), |t| t.rho_curve[k].to_string());
        w.write_record([
            k.to_string(),
            s.mean_f_event.to_string(),
            s.se_f.to_string(),
            s.mean_dist.to_string(),
            s.survival.to_string(),
            theory,
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "per_step.csv".into(),
        source: e,
    })
}

/// One row per run; `exit_step` is empty for runs that never left the
/// event ball.
pub fn write_per_run_csv<W: Write>(out: W, stats: &EnsembleStats) -> Result<()> {
    let err = csv_error("per_run.csv");
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "run_id",
        "exit_step",
        "exit_class",
        "path_length",
        "final_f",
        "tail_gap",
        "noise_weighted_sum",
        "steps_taken",
    ])
    .map_err(&err)?;
    for r in &stats.runs {
        w.write_record([
            r.run_id.to_string(),
            r.exit_step.map_or(String::new(), |k| k.to_string()),
            r.exit_class.as_str().to_string(),
            r.path_length.to_string(),
            r.final_f.to_string(),
            r.tail_gap.to_string(),
            r.noise_weighted_sum.to_string(),
            r.steps_taken.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "per_run.csv".into(),
        source: e,
    })
}
