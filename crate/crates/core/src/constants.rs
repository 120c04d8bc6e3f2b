//! Estimation and certification of the landscape constants consumed by the
//! convergence theory: the local Łojasiewicz ratio `alpha`, the gradient
//! Lipschitz constant `C_L`, the annulus floor `M_0`, and the derived step
//! bound `eta*` and contraction factor `rho`.
//!
//! Sampled `alpha` over-estimates the true infimum and sampled `C_L`
//! under-estimates the true supremum; [`certify`] divides / multiplies them by
//! a safety factor before deriving rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::objective::Objective;
use crate::rng::RngStream;
use crate::vector::{self, ParamVector};

/// Values of `F` at or below this count as zero loss.
pub const ZERO_LOSS: f64 = 1e-14;
/// Pairs closer than this are skipped by the Lipschitz estimator.
pub const MIN_PAIR_DISTANCE: f64 = 1e-14;
/// Short-segment length relative to the region radius.
pub const SHORT_SEGMENT: f64 = 1e-4;
/// Power-iteration steps that steer each short segment toward the direction
/// of largest curvature.
pub const POWER_STEPS: usize = 4;
/// Relative rounding slack when testing the growth bound.
pub const GROWTH_SLACK: f64 = 1e-12;

/// `inf |grad F|^2 / F` over `B(theta_0, r)` minus the zero-loss set.
///
/// Draws `n_samples` points uniformly from the ball (sequentially from `rng`,
/// so a longer run extends a shorter one), and every time a sample sets a new
/// running minimum it is refined by `refine_steps` backtracking descent steps
/// on the ratio, projected back into the ball. The result is the smallest
/// ratio seen, so it never increases as `n_samples` grows. Returns `+inf`
/// when every sample has zero loss.
pub fn estimate_alpha(
    obj: &dyn Objective,
    theta0: &ParamVector,
    r: f64,
    n_samples: usize,
    refine_steps: usize,
    rng: &mut RngStream,
    exec: Execution,
) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::precondition(format!("radius must be positive, got {r}")));
    }
    if n_samples == 0 {
        return Err(Error::precondition("n_samples must be at least 1"));
    }
    obj.check_dim(theta0)?;
    let points: Vec<ParamVector> = (0..n_samples).map(|_| rng.in_ball(theta0, r)).collect();
    let ratios = exec.try_map(points.len(), |i| loss_ratio(obj, &points[i]))?;

    let mut best = f64::INFINITY;
    let mut records = Vec::new();
    for (i, ratio) in ratios.iter().enumerate() {
        if let Some(q) = *ratio {
            if q < best {
                best = q;
                records.push(i);
            }
        }
    }
    if refine_steps > 0 {
        let refined = exec.try_map(records.len(), |j| {
            refine_ratio(obj, &points[records[j]], theta0, r, refine_steps)
        })?;
        best = refined.into_iter().fold(best, f64::min);
    }
    Ok(best)
}

/// `|grad F|^2 / F`, or `None` on the zero-loss set.
fn loss_ratio(obj: &dyn Objective, theta: &ParamVector) -> Result<Option<f64>> {
    let (f, g) = obj.value_and_gradient(theta)?;
    if f <= ZERO_LOSS {
        return Ok(None);
    }
    let q = g.norm_sq() / f;
    if q.is_finite() {
        Ok(Some(q))
    } else {
        Err(Error::NonFinite("loss ratio"))
    }
}

/// Backtracking descent on `h = |g|^2 / F` with
/// `grad h = 2 H g / F - (|g|^2 / F^2) g`; `H g` comes from a central
/// difference of the gradient along `g`.
fn refine_ratio(obj: &dyn Objective, start: &ParamVector, center: &ParamVector, r: f64, steps: usize) -> Result<f64> {
    let mut theta = start.clone();
    let Some(mut h) = loss_ratio(obj, &theta)? else {
        return Ok(f64::INFINITY);
    };
    let mut step = 0.25 * r;
    for _ in 0..steps {
        let (f, g) = obj.value_and_gradient(&theta)?;
        let g_norm = g.norm();
        if g_norm == 0.0 || f <= ZERO_LOSS {
            break;
        }
        let eps = 1e-6 * (1.0 + theta.norm());
        let dir: Vec<f64> = g.iter().map(|v| v / g_norm).collect();
        let shifted = |sign: f64| {
            ParamVector::new(
                theta
                    .iter()
                    .zip(&dir)
                    .map(|(t, d)| t + sign * eps * d)
                    .collect(),
            )
        };
        let g_up = obj.gradient(&shifted(1.0)?)?;
        let g_dn = obj.gradient(&shifted(-1.0)?)?;
        let hg: Vec<f64> = g_up
            .iter()
            .zip(g_dn.iter())
            .map(|(u, d)| (u - d) / (2.0 * eps) * g_norm)
            .collect();
        let g_sq = g.norm_sq();
        let grad_h: Vec<f64> = hg
            .iter()
            .zip(g.iter())
            .map(|(hv, gv)| 2.0 * hv / f - g_sq / (f * f) * gv)
            .collect();
        let gh_norm = vector::norm(&grad_h);
        if !(gh_norm > 0.0 && gh_norm.is_finite()) {
            break;
        }

        let mut accepted = false;
        let mut t = step;
        for _ in 0..30 {
            let cand: Vec<f64> = theta
                .iter()
                .zip(&grad_h)
                .map(|(x, d)| x - t * d / gh_norm)
                .collect();
            let cand = project_to_ball(ParamVector::new(cand)?, center, r);
            if let Some(hc) = loss_ratio(obj, &cand)? {
                if hc < h {
                    theta = cand;
                    h = hc;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        step = (2.0 * t).min(r);
    }
    Ok(h)
}

fn project_to_ball(p: ParamVector, center: &ParamVector, r: f64) -> ParamVector {
    let d = vector::distance(p.as_slice(), center.as_slice());
    if d <= r {
        return p;
    }
    let s = r / d;
    ParamVector::from_finite(
        p.iter()
            .zip(center.iter())
            .map(|(x, c)| c + s * (x - c))
            .collect(),
    )
}

/// Largest sampled Lipschitz quotient `|grad F(a) - grad F(b)| / |a - b|` over
/// `n_pairs` independent pairs in the ball plus, for each pair, a short
/// segment of length `1e-4 * radius` from its first point. The segment starts
/// in a random direction and is turned by a few power-iteration steps on
/// finite-difference Hessian-vector products, so it probes the largest local
/// curvature rather than the average. A lower estimate of the true constant.
pub fn estimate_clip(
    obj: &dyn Objective,
    center: &ParamVector,
    radius: f64,
    n_pairs: usize,
    rng: &mut RngStream,
    exec: Execution,
) -> Result<f64> {
    if n_pairs == 0 {
        return Err(Error::precondition("n_pairs must be at least 1"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::precondition(format!("radius must be positive, got {radius}")));
    }
    obj.check_dim(center)?;
    let dim = center.len();
    let h = SHORT_SEGMENT * radius;
    let pairs: Vec<(ParamVector, ParamVector, Vec<f64>)> = (0..n_pairs)
        .map(|_| (rng.in_ball(center, radius), rng.in_ball(center, radius), rng.unit_sphere(dim)))
        .collect();
    let quotients = exec.try_map(pairs.len(), |i| {
        let (a, b, u) = &pairs[i];
        let ga = obj.gradient(a)?;
        let u = top_curvature_direction(obj, a, u.clone(), h)?;
        let c = ParamVector::from_finite(a.iter().zip(&u).map(|(x, e)| x + h * e).collect());
        Ok::<_, Error>([quotient(&ga, &obj.gradient(b)?, a, b), quotient(&ga, &obj.gradient(&c)?, a, &c)])
    })?;
    quotients
        .into_iter()
        .flatten()
        .flatten()
        .reduce(f64::max)
        .ok_or(Error::DegeneratePairs)
}

fn top_curvature_direction(obj: &dyn Objective, a: &ParamVector, mut u: Vec<f64>, h: f64) -> Result<Vec<f64>> {
    for _ in 0..POWER_STEPS {
        let shifted = |sign: f64| ParamVector::new(a.iter().zip(&u).map(|(x, e)| x + sign * h * e).collect());
        let hu: Vec<f64> = obj
            .gradient(&shifted(1.0)?)?
            .iter()
            .zip(obj.gradient(&shifted(-1.0)?)?.iter())
            .map(|(p, m)| p - m)
            .collect();
        let n = vector::norm(&hu);
        if !(n > 0.0 && n.is_finite()) {
            break;
        }
        u = hu.into_iter().map(|v| v / n).collect();
    }
    Ok(u)
}

fn quotient(ga: &ParamVector, gb: &ParamVector, a: &ParamVector, b: &ParamVector) -> Option<f64> {
    let d = vector::distance(a.as_slice(), b.as_slice());
    (d >= MIN_PAIR_DISTANCE).then(|| vector::distance(ga.as_slice(), gb.as_slice()) / d)
}

/// Per-point margins `2 C_L F(theta) - |grad F(theta)|^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthReport {
    pub margins: Vec<f64>,
    pub violations: usize,
}

impl GrowthReport {
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Checks `|grad F|^2 <= 2 C_L F` at each point. A margin counts as a
/// violation only when it is negative beyond floating-point rounding of the
/// two sides.
pub fn check_growth_bound(obj: &dyn Objective, points: &[ParamVector], c_lip: f64) -> Result<GrowthReport> {
    let mut margins = Vec::with_capacity(points.len());
    let mut violations = 0;
    for p in points {
        let (f, g) = obj.value_and_gradient(p)?;
        let lhs = 2.0 * c_lip * f;
        let g_sq = g.norm_sq();
        let margin = lhs - g_sq;
        if margin < -GROWTH_SLACK * (lhs.abs() + g_sq) {
            violations += 1;
        }
        margins.push(margin);
    }
    Ok(GrowthReport { margins, violations })
}

/// `M_0`: minimum of `F` over the shell `R - 1 <= |theta - theta_0| <= R`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FloorEstimate {
    pub value: f64,
    /// True when the objective supplied a closed form.
    pub exact: bool,
    pub samples: usize,
}

pub fn estimate_floor(
    obj: &dyn Objective,
    theta0: &ParamVector,
    outer: f64,
    n_samples: usize,
    rng: &mut RngStream,
    exec: Execution,
) -> Result<FloorEstimate> {
    if !(outer > 1.0 && outer.is_finite()) {
        return Err(Error::precondition(format!("outer radius must exceed 1, got {outer}")));
    }
    obj.check_dim(theta0)?;
    if let Some(value) = obj.exact_floor(theta0, outer) {
        return Ok(FloorEstimate {
            value,
            exact: true,
            samples: 0,
        });
    }
    estimate_floor_in(obj, theta0, outer, n_samples, rng, exec, &|_| true)
}

/// Sampled floor restricted to shell points accepted by `region`. Stops once
/// `n_samples` points are accepted or `100 * n_samples + 10^6` proposals are
/// spent.
pub fn estimate_floor_in(
    obj: &dyn Objective,
    theta0: &ParamVector,
    outer: f64,
    n_samples: usize,
    rng: &mut RngStream,
    exec: Execution,
    region: &(dyn Fn(&ParamVector) -> bool + Sync),
) -> Result<FloorEstimate> {
    if n_samples == 0 {
        return Err(Error::precondition("n_samples must be at least 1"));
    }
    let inner = outer - 1.0;
    let budget = 100 * n_samples + 1_000_000;
    let mut accepted = Vec::with_capacity(n_samples);
    let mut spent = 0;
    while accepted.len() < n_samples && spent < budget {
        let batch = (n_samples - accepted.len()).max(1024);
        for _ in 0..batch {
            let p = rng.in_annulus(theta0, inner, outer);
            spent += 1;
            if region(&p) {
                accepted.push(p);
                if accepted.len() == n_samples {
                    break;
                }
            }
        }
    }
    if accepted.is_empty() {
        return Err(Error::precondition("no shell point satisfied the region constraint"));
    }
    let values = exec.try_map(accepted.len(), |i| obj.value(&accepted[i]))?;
    Ok(FloorEstimate {
        value: values.into_iter().fold(f64::INFINITY, f64::min),
        exact: false,
        samples: accepted.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub eta_star: f64,
    pub rho: f64,
}

/// `eta* = min(1/alpha, alpha / (4 C_L (2 C_L + sigma)))` and
/// `rho = 1 - eta* alpha + (eta*^2 / 2) C_L (2 C_L + sigma)`.
pub fn derive_rates(alpha: f64, c_lip: f64, sigma: f64) -> Result<Rates> {
    if !(alpha > 0.0 && alpha.is_finite() && c_lip > 0.0 && c_lip.is_finite()) {
        return Err(Error::precondition(format!(
            "alpha and C_L must be positive and finite, got alpha = {alpha}, C_L = {c_lip}"
        )));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::precondition(format!("sigma must be non-negative, got {sigma}")));
    }
    let curvature = c_lip * (2.0 * c_lip + sigma);
    let eta_star = (1.0 / alpha).min(alpha / (4.0 * curvature));
    let rates = Rates {
        eta_star,
        rho: contraction_factor(eta_star, alpha, c_lip, sigma),
    };
    if !(rates.rho > 0.0 && rates.rho < 1.0) {
        return Err(Error::InconsistentConstants(format!("rho = {} is outside (0, 1)", rates.rho)));
    }
    if rates.rho > 1.0 - alpha * eta_star / 2.0 {
        return Err(Error::InconsistentConstants(format!(
            "rho = {} exceeds 1 - alpha eta*/2 = {}",
            rates.rho,
            1.0 - alpha * eta_star / 2.0
        )));
    }
    Ok(rates)
}

/// `1 - eta alpha + (eta^2 / 2) C_L (2 C_L + sigma)` for any step `eta`.
pub fn contraction_factor(eta: f64, alpha: f64, c_lip: f64, sigma: f64) -> f64 {
    1.0 - eta * alpha + 0.5 * eta * eta * c_lip * (2.0 * c_lip + sigma)
}

/// `4 F(theta_0) < r^2 alpha`.
pub fn check_seed(f0: f64, r: f64, alpha: f64) -> bool {
    4.0 * f0 < r * r * alpha
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    /// Sampled estimate. `refine_steps` is only meaningful for alpha.
    Sampled { samples: usize, refine_steps: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateProvenance {
    pub alpha: Provenance,
    pub c_lip: Provenance,
    pub m_floor: Provenance,
}

/// Measured or known landscape constants for one initialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeCertificate {
    pub landscape: String,
    pub seed: u64,
    pub f0: f64,
    /// Radius of the Łojasiewicz ball.
    pub r: f64,
    /// Radius of the confinement ball; the annulus is `[R - 1, R]`.
    pub outer_radius: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub c_lip: f64,
    pub m_floor: f64,
    pub eta_star: f64,
    pub rho: f64,
    pub seed_ok: bool,
    pub safety_factor: f64,
    /// Largest sampled gradient norm on `B(theta_0, r)`.
    pub c_bar: f64,
    /// Radius of the smoothness region enclosing the certified ball.
    pub enclosing_radius: f64,
    pub growth_points: usize,
    pub growth_violations: usize,
    pub provenance: CertificateProvenance,
}

impl LandscapeCertificate {
    /// The annulus floor is strictly positive.
    pub fn floor_ok(&self) -> bool {
        self.m_floor > 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub r: f64,
    pub outer_radius: f64,
    pub sigma: f64,
    pub alpha_samples: usize,
    pub refine_steps: usize,
    pub clip_pairs: usize,
    pub floor_samples: usize,
    pub growth_points: usize,
    pub safety_factor: f64,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            r: 2.0,
            outer_radius: 3.0,
            sigma: 0.0,
            alpha_samples: 2000,
            refine_steps: 50,
            clip_pairs: 2000,
            floor_samples: 2000,
            growth_points: 1000,
            safety_factor: 1.1,
            seed: 0,
        }
    }
}

/// Runs every estimator and derives `eta*`, `rho` and the seed verdict.
///
/// Closed-form constants are used as-is; sampled `alpha` is divided and
/// sampled `C_L` multiplied by the safety factor. `C_L` is measured on the
/// enclosing ball `B(theta_0, r + C_bar / C_L)` so that the growth bound holds
/// on `B(theta_0, r)`. `floor_region`, when given, restricts the floor
/// estimate to shell points it accepts.
pub fn certify(
    obj: &dyn Objective,
    theta0: &ParamVector,
    opts: &CertifyOptions,
    floor_region: Option<&(dyn Fn(&ParamVector) -> bool + Sync)>,
    exec: Execution,
) -> Result<LandscapeCertificate> {
    if !(opts.r > 0.0 && opts.r <= opts.outer_radius) {
        return Err(Error::precondition(format!(
            "need 0 < r <= R, got r = {}, R = {}",
            opts.r, opts.outer_radius
        )));
    }
    if !(opts.safety_factor >= 1.0) {
        return Err(Error::precondition("safety factor must be at least 1"));
    }
    let f0 = obj.value(theta0)?;
    let exact = obj.exact_constants();

    let mut growth_rng = RngStream::new(opts.seed, 4);
    let inner_points: Vec<ParamVector> = (0..opts.growth_points.max(1))
        .map(|_| growth_rng.in_ball(theta0, opts.r))
        .collect();
    let grads = exec.try_map(inner_points.len(), |i| obj.gradient(&inner_points[i]))?;
    let c_bar = grads.iter().map(|g| g.norm()).fold(0.0, f64::max);

    let (alpha, alpha_prov) = match exact {
        Some(c) => (c.alpha, Provenance::Exact),
        None => {
            let raw = estimate_alpha(
                obj,
                theta0,
                opts.r,
                opts.alpha_samples,
                opts.refine_steps,
                &mut RngStream::new(opts.seed, 1),
                exec,
            )?;
            (
                raw / opts.safety_factor,
                Provenance::Sampled {
                    samples: opts.alpha_samples,
                    refine_steps: opts.refine_steps,
                },
            )
        }
    };

    let (c_lip, enclosing_radius, clip_prov) = match exact {
        Some(c) => (c.c_lip, opts.r + c_bar / c.c_lip, Provenance::Exact),
        None => {
            let mut rng = RngStream::new(opts.seed, 2);
            let inner = estimate_clip(obj, theta0, opts.r, opts.clip_pairs, &mut rng, exec)?;
            let enclosing = opts.r + c_bar / inner.max(f64::MIN_POSITIVE);
            let outer = estimate_clip(obj, theta0, enclosing, opts.clip_pairs, &mut rng, exec)?;
            (
                inner.max(outer) * opts.safety_factor,
                enclosing,
                Provenance::Sampled {
                    samples: 2 * opts.clip_pairs,
                    refine_steps: 0,
                },
            )
        }
    };

    let mut floor_rng = RngStream::new(opts.seed, 3);
    let floor = match floor_region {
        Some(region) if obj.exact_floor(theta0, opts.outer_radius).is_none() => estimate_floor_in(
            obj,
            theta0,
            opts.outer_radius,
            opts.floor_samples,
            &mut floor_rng,
            exec,
            region,
        )?,
        _ => estimate_floor(obj, theta0, opts.outer_radius, opts.floor_samples, &mut floor_rng, exec)?,
    };
    let floor_prov = if floor.exact {
        Provenance::Exact
    } else {
        Provenance::Sampled {
            samples: floor.samples,
            refine_steps: 0,
        }
    };

    let rates = derive_rates(alpha, c_lip, opts.sigma)?;
    let growth = check_growth_bound(obj, &inner_points, c_lip)?;

    Ok(LandscapeCertificate {
        landscape: obj.name().to_string(),
        seed: opts.seed,
        f0,
        r: opts.r,
        outer_radius: opts.outer_radius,
        sigma: opts.sigma,
        alpha,
        c_lip,
        m_floor: floor.value,
        eta_star: rates.eta_star,
        rho: rates.rho,
        seed_ok: check_seed(f0, opts.r, alpha),
        safety_factor: opts.safety_factor,
        c_bar,
        enclosing_radius,
        growth_points: inner_points.len(),
        growth_violations: growth.violations,
        provenance: CertificateProvenance {
            alpha: alpha_prov,
            c_lip: clip_prov,
            m_floor: floor_prov,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscapes::QuadraticWell;

    fn well(dim: usize, offset: f64, a: f64) -> QuadraticWell {
        QuadraticWell::new(ParamVector::basis(dim, 0, offset), a).unwrap()
    }

    #[test]
    fn alpha_on_quadratic_is_two_a() {
        let q = well(5, 0.3, 1.0);
        let t0 = ParamVector::zeros(5);
        for n in [1, 10, 500] {
            let a = estimate_alpha(&q, &t0, 1.0, n, 50, &mut RngStream::new(3, 0), Execution::Parallel).unwrap();
            assert_eq!(a, 2.0);
        }
    }

    #[test]
    fn alpha_is_infinite_on_flat_zero_region() {
        struct Zero;
        impl Objective for Zero {
            fn dim(&self) -> usize {
                2
            }
            fn value(&self, _: &ParamVector) -> Result<f64> {
                Ok(0.0)
            }
            fn gradient(&self, _: &ParamVector) -> Result<ParamVector> {
                Ok(ParamVector::zeros(2))
            }
            fn name(&self) -> &str {
                "zero"
            }
        }
        let a = estimate_alpha(&Zero, &ParamVector::zeros(2), 1.0, 100, 5, &mut RngStream::new(0, 0), Execution::Sequential)
            .unwrap();
        assert_eq!(a, f64::INFINITY);
    }

    #[test]
    fn clip_on_quadratic() {
        let c = ParamVector::zeros(4);
        let mut rng = RngStream::new(1, 0);
        let one = estimate_clip(&well(4, 0.0, 1.0), &c, 1.0, 200, &mut rng, Execution::Parallel).unwrap();
        assert!((one - 1.0).abs() <= 1e-10);
        let shifted = well(4, 0.7, 3.5);
        let l = estimate_clip(&shifted, &c, 2.0, 200, &mut rng, Execution::Parallel).unwrap();
        assert!((l - 3.5).abs() <= 1e-9, "{l}");
    }

    #[test]
    fn clip_on_affine_is_zero() {
        // F = 10 + w . theta stays positive on the unit ball.
        struct Affine;
        impl Objective for Affine {
            fn dim(&self) -> usize {
                3
            }
            fn value(&self, t: &ParamVector) -> Result<f64> {
                Ok(10.0 + t[0] - 2.0 * t[1] + 0.5 * t[2])
            }
            fn gradient(&self, _: &ParamVector) -> Result<ParamVector> {
                ParamVector::new(vec![1.0, -2.0, 0.5])
            }
            fn name(&self) -> &str {
                "affine"
            }
        }
        let l = estimate_clip(&Affine, &ParamVector::zeros(3), 1.0, 100, &mut RngStream::new(0, 0), Execution::Sequential)
            .unwrap();
        assert!(l.abs() <= 1e-12);
    }

    #[test]
    fn growth_margin_vanishes_on_unit_quadratic() {
        let q = well(3, 0.5, 1.0);
        let mut rng = RngStream::new(2, 2);
        let mut pts: Vec<ParamVector> = (0..100).map(|_| rng.in_ball(&ParamVector::zeros(3), 2.0)).collect();
        pts.push(q.center().clone());
        let rep = check_growth_bound(&q, &pts, 1.0).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.margins.iter().all(|m| *m == 0.0));
    }

    #[test]
    fn growth_violation_detected_with_too_small_constant() {
        let q = well(3, 0.0, 2.0);
        let pts = vec![ParamVector::new(vec![1.0, 0.0, 0.0]).unwrap()];
        let rep = check_growth_bound(&q, &pts, 1.0).unwrap();
        assert_eq!(rep.violations, 1);
        assert!(rep.min_margin() < 0.0);
    }

    #[test]
    fn floor_closed_forms() {
        let t0 = ParamVector::zeros(3);
        let mut rng = RngStream::new(0, 0);
        let f = estimate_floor(&well(3, 0.0, 1.0), &t0, 3.0, 10, &mut rng, Execution::Sequential).unwrap();
        assert_eq!(f, FloorEstimate { value: 2.0, exact: true, samples: 0 });
        let touching = estimate_floor(&well(3, 2.0, 1.0), &t0, 3.0, 10, &mut rng, Execution::Sequential).unwrap();
        assert_eq!(touching.value, 0.0);
    }

    #[test]
    fn sampled_floor_upper_bounds_true_floor() {
        let q = well(3, 0.5, 1.0);
        let t0 = ParamVector::zeros(3);
        let s = estimate_floor_in(&q, &t0, 3.0, 5000, &mut RngStream::new(1, 0), Execution::Parallel, &|_| true).unwrap();
        let exact = q.exact_floor(&t0, 3.0).unwrap();
        assert!(s.value >= exact && s.value < exact + 0.05, "{} vs {exact}", s.value);
    }

    #[test]
    fn derive_rates_examples() {
        let r = derive_rates(2.0, 1.0, 1.0).unwrap();
        assert!((r.eta_star - 1.0 / 6.0).abs() < 1e-15);
        assert!((r.rho - (1.0 - 1.0 / 3.0 + 3.0 / 72.0)).abs() < 1e-15);
        assert!((r.rho - 0.708_333_333_333_333_4).abs() < 1e-12);
        assert!(r.rho <= 1.0 - 1.0 / 6.0);

        let r0 = derive_rates(2.0, 1.0, 0.0).unwrap();
        assert_eq!(r0.eta_star, 0.25);
        assert_eq!(r0.rho, 0.5625);
    }

    #[test]
    fn rates_degrade_monotonically_with_noise() {
        let mut prev = derive_rates(2.0, 1.0, 0.0).unwrap();
        for sigma in [1.0, 10.0, 1e3, 1e6, 1e9] {
            let r = derive_rates(2.0, 1.0, sigma).unwrap();
            assert!(r.eta_star < prev.eta_star && r.rho > prev.rho);
            prev = r;
        }
        assert!(prev.eta_star < 1e-8 && prev.rho < 1.0 && prev.rho > 0.999_999);
    }

    #[test]
    fn derive_rates_rejects_bad_inputs() {
        assert!(derive_rates(0.0, 1.0, 1.0).is_err());
        assert!(derive_rates(1.0, -1.0, 1.0).is_err());
        assert!(derive_rates(1.0, 1.0, -0.5).is_err());
    }

    #[test]
    fn seed_condition_examples() {
        assert!(check_seed(0.0, 0.1, 1e-3));
        // |theta_0 - theta*| = 0.5 on the unit well: F0 = 0.125.
        assert!(check_seed(0.125, 1.0, 2.0));
        // |theta_0 - theta*| = 1.5: F0 = 1.125.
        assert!(!check_seed(1.125, 1.0, 2.0));
        // Strict inequality.
        assert!(!check_seed(0.5, 1.0, 2.0));
    }

    #[test]
    fn certificate_on_quadratic_is_exact() {
        let q = well(10, 0.5, 1.0);
        let opts = CertifyOptions {
            sigma: 1.0,
            ..CertifyOptions::default()
        };
        let c = certify(&q, &ParamVector::zeros(10), &opts, None, Execution::Parallel).unwrap();
        assert_eq!(c.alpha, 2.0);
        assert_eq!(c.c_lip, 1.0);
        assert_eq!(c.m_floor, 0.5 * 1.5 * 1.5);
        assert!((c.rho - 0.708_333_333_333_333_4).abs() < 1e-12);
        assert!(c.seed_ok);
        assert_eq!(c.growth_violations, 0);
        assert_eq!(c.provenance.alpha, Provenance::Exact);
    }

    #[test]
    fn certificate_flags_touching_floor() {
        let q = well(3, 2.0, 1.0);
        let c = certify(&q, &ParamVector::zeros(3), &CertifyOptions::default(), None, Execution::Sequential).unwrap();
        assert!(!c.floor_ok());
    }
}
