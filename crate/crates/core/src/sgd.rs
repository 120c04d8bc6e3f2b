//! SGD iteration with constant or Robbins-Monro steps, event tracking and
//! exit classification.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseModel, NoiseState};
use crate::objective::Objective;
use crate::rng::RngStream;
use crate::vector::{self, ParamVector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant { eta: f64 },
    /// `eta_k = gamma / (k + n0)^q`.
    RobbinsMonro { gamma: f64, n0: f64, q: f64 },
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Constant { eta } => {
                if !(eta >= 0.0 && eta.is_finite()) {
                    return Err(Error::precondition(format!("step size must be non-negative, got {eta}")));
                }
            }
            StepSchedule::RobbinsMonro { gamma, n0, q } => {
                check_q(q)?;
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::precondition(format!("gamma must be positive, got {gamma}")));
                }
                if !(n0 > 0.0 && n0.is_finite()) {
                    return Err(Error::precondition(format!("n0 must be positive, got {n0}")));
                }
            }
        }
        Ok(())
    }

    pub fn eta(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Constant { eta } => eta,
            StepSchedule::RobbinsMonro { gamma, n0, q } => gamma / (k as f64 + n0).powf(q),
        }
    }
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.5 && q <= 1.0 {
        Ok(())
    } else {
        Err(Error::precondition(format!("q must lie in (1/2, 1], got {q}")))
    }
}

/// `eta_0 .. eta_{k_max - 1}`.
pub fn step_sizes(schedule: &StepSchedule, k_max: usize) -> Result<Vec<f64>> {
    if k_max == 0 {
        return Err(Error::precondition("k_max must be at least 1"));
    }
    schedule.validate()?;
    Ok((0..k_max).map(|k| schedule.eta(k)).collect())
}

/// Smallest admissible offset `n0 = (2 C_L^2 gamma / alpha)^(1/q)`.
pub fn rm_parameters(alpha: f64, c_lip: f64, gamma: f64, q: f64) -> Result<f64> {
    check_q(q)?;
    if !(alpha > 0.0 && c_lip > 0.0 && gamma > 0.0) {
        return Err(Error::precondition("alpha, C_L and gamma must be positive"));
    }
    Ok((2.0 * c_lip * c_lip * gamma / alpha).powf(1.0 / q))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitClass {
    None,
    /// The first iterate outside `B(theta_0, r)` is also outside `B(theta_0, R)`.
    JumpBeyondR,
    /// The first iterate outside `B(theta_0, r)` lands in `B(theta_0, R)`.
    AnnulusEntry,
}

impl ExitClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ExitClass::None => "none",
            ExitClass::JumpBeyondR => "jump_beyond_R",
            ExitClass::AnnulusEntry => "annulus_entry",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryOptions {
    /// Event radius.
    pub r: f64,
    /// Confinement radius; iteration stops once it is left.
    pub outer_radius: f64,
    pub horizon: usize,
    /// Store every `thin`-th iterate; `None` stores none.
    pub thin: Option<usize>,
}

impl TrajectoryOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r <= self.outer_radius && self.outer_radius.is_finite()) {
            return Err(Error::precondition(format!(
                "need 0 < r <= R, got r = {}, R = {}",
                self.r, self.outer_radius
            )));
        }
        if self.horizon == 0 {
            return Err(Error::precondition("horizon must be at least 1"));
        }
        if self.thin == Some(0) {
            return Err(Error::precondition("thin must be at least 1"));
        }
        Ok(())
    }
}

/// One SGD run. `f_values` and `dist_values` hold `k = 0..=horizon`; after
/// the iterate leaves `B(theta_0, R)` they repeat the last computed value.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub thetas: Vec<(usize, ParamVector)>,
    pub f_values: Vec<f64>,
    pub dist_values: Vec<f64>,
    /// First `k` with `|theta_k - theta_0| > r`, if any.
    pub event_alive_until: Option<usize>,
    pub exit_class: ExitClass,
    /// `sum |theta_{k+1} - theta_k|` over steps taken while `E_k(r)` holds.
    pub path_length: f64,
    pub final_theta: ParamVector,
    /// The iterate at `k = horizon / 2`, or the last one if the run stopped
    /// earlier.
    pub mid_theta: ParamVector,
    pub steps_taken: usize,
    /// `sum_{k=1}^{steps} |Z_k| / k`.
    pub noise_weighted_sum: f64,
}

impl TrajectoryRecord {
    pub fn horizon(&self) -> usize {
        self.f_values.len() - 1
    }

    /// `E_k(r)`: all iterates through `k` inside the event ball.
    pub fn alive_at(&self, k: usize) -> bool {
        self.event_alive_until.is_none_or(|e| k < e)
    }

    pub fn survived(&self) -> bool {
        self.event_alive_until.is_none()
    }

    pub fn final_f(&self) -> f64 {
        *self.f_values.last().expect("record holds at least k = 0")
    }
}

/// Runs `theta_{k+1} = theta_k - eta_k (grad F(theta_k) + noise_k)` for
/// `horizon` steps or until `|theta_k - theta_0| > R`.
pub fn run_trajectory(
    obj: &dyn Objective,
    model: &NoiseModel,
    schedule: &StepSchedule,
    theta0: &ParamVector,
    opts: &TrajectoryOptions,
    rng: &mut RngStream,
) -> Result<TrajectoryRecord> {
    opts.validate()?;
    schedule.validate()?;
    obj.check_dim(theta0)?;
    let horizon = opts.horizon;
    let mid = horizon / 2;

    let mut theta = theta0.clone();
    let mut mid_theta = theta0.clone();
    let mut state = NoiseState::default();
    let mut thetas = Vec::new();
    let mut f_values = Vec::with_capacity(horizon + 1);
    let mut dist_values = Vec::with_capacity(horizon + 1);
    let mut alive_until = None;
    let mut path_length = 0.0;
    let mut noise_weighted_sum = 0.0;
    let mut steps = 0;

    let (mut f, mut g) = obj.value_and_gradient(&theta)?;
    f_values.push(f);
    dist_values.push(0.0);
    if opts.thin.is_some() {
        thetas.push((0, theta.clone()));
    }

    for k in 0..horizon {
        let draw = model.perturb(f, &g, rng, &mut state)?;
        noise_weighted_sum += draw.z_norm / (k + 1) as f64;
        let eta = schedule.eta(k);
        let next: Vec<f64> = theta
            .iter()
            .zip(draw.gradient.iter())
            .map(|(t, d)| t - eta * d)
            .collect();
        let next = ParamVector::new(next).map_err(|_| Error::Divergence { step: k + 1 })?;
        let step = vector::distance(next.as_slice(), theta.as_slice());
        if alive_until.is_none() {
            path_length += step;
        }
        theta = next;
        steps = k + 1;
        let dist = vector::distance(theta.as_slice(), theta0.as_slice());
        (f, g) = obj.value_and_gradient(&theta)?;
        if !f.is_finite() {
            return Err(Error::Divergence { step: k + 1 });
        }
        f_values.push(f);
        dist_values.push(dist);
        if alive_until.is_none() && dist > opts.r {
            alive_until = Some(k + 1);
        }
        if steps == mid {
            mid_theta = theta.clone();
        }
        if let Some(t) = opts.thin {
            if steps % t == 0 {
                thetas.push((steps, theta.clone()));
            }
        }
        if dist > opts.outer_radius {
            break;
        }
    }

    if steps < mid {
        mid_theta = theta.clone();
    }
    f_values.resize(horizon + 1, f);
    let last = *dist_values.last().expect("non-empty");
    dist_values.resize(horizon + 1, last);

    let exit_class = match alive_until {
        None => ExitClass::None,
        Some(k) if dist_values[k] > opts.outer_radius => ExitClass::JumpBeyondR,
        Some(_) => ExitClass::AnnulusEntry,
    };

    Ok(TrajectoryRecord {
        thetas,
        f_values,
        dist_values,
        event_alive_until: alive_until,
        exit_class,
        path_length,
        final_theta: theta,
        mid_theta,
        steps_taken: steps,
        noise_weighted_sum,
    })
}

/// Writes `run_id,k,f_value,dist,eta_k,event_alive` rows. Pass
/// `header = true` for the first run in a file.
pub fn write_trajectory_csv<W: Write>(
    out: W,
    run_id: u64,
    record: &TrajectoryRecord,
    schedule: &StepSchedule,
    header: bool,
    every: usize,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let io = |e: csv::Error| Error::Io {
        path: "trajectory csv".into(),
        source: e.into(),
    };
    if header {
        w.write_record(["run_id", "k", "f_value", "dist", "eta_k", "event_alive"])
            .map_err(io)?;
    }
    let last = record.f_values.len() - 1;
    for k in (0..=last).filter(|k| k % every.max(1) == 0 || *k == last) {
        w.write_record([
            run_id.to_string(),
            k.to_string(),
            record.f_values[k].to_string(),
            record.dist_values[k].to_string(),
            schedule.eta(k).to_string(),
            u8::from(record.alive_at(k)).to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: "trajectory csv".into(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscapes::QuadraticWell;
    use crate::noise::ZDist;

    fn fixture() -> (QuadraticWell, ParamVector) {
        let q = QuadraticWell::new(ParamVector::basis(10, 0, 0.5), 1.0).unwrap();
        (q, ParamVector::zeros(10))
    }

    fn opts(r: f64, outer: f64, horizon: usize) -> TrajectoryOptions {
        TrajectoryOptions {
            r,
            outer_radius: outer,
            horizon,
            thin: None,
        }
    }

    #[test]
    fn step_size_examples() {
        assert_eq!(step_sizes(&StepSchedule::Constant { eta: 0.1 }, 3).unwrap(), vec![0.1; 3]);
        let rm = StepSchedule::RobbinsMonro {
            gamma: 2.0,
            n0: 1.0,
            q: 1.0,
        };
        assert_eq!(step_sizes(&rm, 3).unwrap(), vec![2.0, 1.0, 2.0 / 3.0]);
        let bad = StepSchedule::RobbinsMonro {
            gamma: 2.0,
            n0: 1.0,
            q: 0.4,
        };
        let err = step_sizes(&bad, 3).unwrap_err().to_string();
        assert!(err.contains("q must lie in (1/2, 1]"), "{err}");
        assert!(step_sizes(&StepSchedule::Constant { eta: 0.1 }, 0).is_err());
    }

    #[test]
    fn rm_parameter_examples() {
        assert_eq!(rm_parameters(2.0, 1.0, 2.0, 1.0).unwrap(), 2.0);
        let near_half = rm_parameters(2.0, 1.0, 2.0, 0.500_001).unwrap();
        assert!((near_half - 4.0).abs() < 1e-4);
        let mut prev = f64::INFINITY;
        for gamma in [1.0, 0.1, 1e-3, 1e-6] {
            let n0 = rm_parameters(2.0, 1.0, gamma, 0.75).unwrap();
            assert!(n0 < prev);
            prev = n0;
        }
        assert!(prev < 1e-6);
        assert!(rm_parameters(2.0, 1.0, 2.0, 0.5).is_err());
    }

    #[test]
    fn noiseless_run_is_gradient_descent() {
        let (q, t0) = fixture();
        let eta = 1.0 / 6.0;
        let rec = run_trajectory(
            &q,
            &NoiseModel::ml_scaled(0.0).unwrap(),
            &StepSchedule::Constant { eta },
            &t0,
            &opts(2.0, 3.0, 60),
            &mut RngStream::new(0, 0),
        )
        .unwrap();
        let f0 = rec.f_values[0];
        for (k, f) in rec.f_values.iter().enumerate() {
            let oracle = (1.0 - eta).powi(2 * k as i32) * f0;
            assert!((f - oracle).abs() <= 1e-12 * f0, "k = {k}");
        }
        assert!(rec.survived());
        assert_eq!(rec.exit_class, ExitClass::None);
    }

    #[test]
    fn zero_step_keeps_theta() {
        let (q, t0) = fixture();
        let rec = run_trajectory(
            &q,
            &NoiseModel::ml_scaled(1.0).unwrap(),
            &StepSchedule::Constant { eta: 0.0 },
            &t0,
            &opts(2.0, 3.0, 1),
            &mut RngStream::new(0, 0),
        )
        .unwrap();
        assert_eq!(rec.final_theta, t0);
        assert_eq!(rec.exit_class, ExitClass::None);
        assert_eq!(rec.f_values.len(), 2);
    }

    #[test]
    fn rejects_bad_options() {
        let (q, t0) = fixture();
        let m = NoiseModel::ml_scaled(0.0).unwrap();
        let s = StepSchedule::Constant { eta: 0.1 };
        let mut rng = RngStream::new(0, 0);
        assert!(run_trajectory(&q, &m, &s, &t0, &opts(2.0, 3.0, 0), &mut rng).is_err());
        assert!(run_trajectory(&q, &m, &s, &t0, &opts(4.0, 3.0, 5), &mut rng).is_err());
        let mut o = opts(2.0, 3.0, 5);
        o.thin = Some(0);
        assert!(run_trajectory(&q, &m, &s, &t0, &o, &mut rng).is_err());
    }

    #[test]
    fn divergent_step_reports_step_index() {
        let q = QuadraticWell::new(ParamVector::basis(2, 0, 1.0), 1.0).unwrap();
        let err = run_trajectory(
            &q,
            &NoiseModel::ml_scaled(0.0).unwrap(),
            &StepSchedule::Constant { eta: 1e300 },
            &ParamVector::zeros(2),
            &opts(1e308, 1e308, 10),
            &mut RngStream::new(0, 0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence { step } if step >= 1), "{err}");
    }

    #[test]
    fn large_step_exits_beyond_outer_ball() {
        // eta = 10 overshoots the well centred at distance 0.5 to distance 4.5.
        let (q, t0) = fixture();
        let rec = run_trajectory(
            &q,
            &NoiseModel::ml_scaled(0.0).unwrap(),
            &StepSchedule::Constant { eta: 10.0 },
            &t0,
            &opts(2.0, 3.0, 10),
            &mut RngStream::new(0, 0),
        )
        .unwrap();
        assert_eq!(rec.event_alive_until, Some(1));
        assert_eq!(rec.exit_class, ExitClass::JumpBeyondR);
        assert_eq!(rec.steps_taken, 1);
        assert!((rec.path_length - 5.0).abs() < 1e-12);
        assert_eq!(rec.f_values.len(), 11);
        assert!(rec.f_values[2..].iter().all(|f| *f == rec.f_values[1]));
    }

    #[test]
    fn moderate_overshoot_enters_annulus() {
        // eta = 5: theta_1 = 2.5 e_1, inside R = 3 but outside r = 2.
        let (q, t0) = fixture();
        let rec = run_trajectory(
            &q,
            &NoiseModel::ml_scaled(0.0).unwrap(),
            &StepSchedule::Constant { eta: 5.0 },
            &t0,
            &opts(2.0, 3.0, 1),
            &mut RngStream::new(0, 0),
        )
        .unwrap();
        assert_eq!(rec.exit_class, ExitClass::AnnulusEntry);
        assert_eq!(rec.event_alive_until, Some(1));
    }

    #[test]
    fn adversarial_noise_escapes_small_ball() {
        let (q, t0) = fixture();
        let m = NoiseModel::AdversarialRotated(ZDist::sphere(10, 1.0).unwrap());
        let s = StepSchedule::RobbinsMonro {
            gamma: 2.0,
            n0: 2.0,
            q: 1.0,
        };
        let escaped = (0..100)
            .filter(|&i| {
                let rec = run_trajectory(&q, &m, &s, &t0, &opts(0.2, 100.0, 1000), &mut RngStream::new(7, i)).unwrap();
                rec.exit_class != ExitClass::None
            })
            .count();
        assert_eq!(escaped, 100);
    }

    #[test]
    fn thinning_and_trajectory_csv() {
        let (q, t0) = fixture();
        let s = StepSchedule::Constant { eta: 0.1 };
        let mut o = opts(2.0, 3.0, 10);
        o.thin = Some(4);
        let rec = run_trajectory(&q, &NoiseModel::ml_scaled(1.0).unwrap(), &s, &t0, &o, &mut RngStream::new(1, 1)).unwrap();
        let ks: Vec<usize> = rec.thetas.iter().map(|(k, _)| *k).collect();
        assert_eq!(ks, vec![0, 4, 8]);
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, 3, &rec, &s, true, 1).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "run_id,k,f_value,dist,eta_k,event_alive");
        assert_eq!(lines.len(), 12);
        assert!(lines[1].starts_with("3,0,0.125,0,0.1,1"));
    }
}
