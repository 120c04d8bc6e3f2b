use lojasgd::config::{parse_config, serialize};
use lojasgd::constants::{derive_rates, estimate_alpha};
use lojasgd::landscapes::{chatterjee_init, Activation, Dataset, NetSpec, NetworkLoss, QuadraticWell, ThetaSubspace};
use lojasgd::noise::{NoiseModel, NoiseState, ZDist};
use lojasgd::sgd::{run_trajectory, ExitClass, StepSchedule, TrajectoryOptions};
use lojasgd::verify::{run_ensemble, EnsembleSpec};
use lojasgd::{Execution, Objective, ParamVector, RngStream};
use proptest::prelude::*;

fn coords(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rates_satisfy_their_defining_relations(c in 0.1..10.0f64, frac in 0.01..1.0f64, sigma in 0.0..5.0f64) {
        // alpha <= 2 C_L always holds, since |grad F|^2 <= 2 C_L F.
        let alpha = 2.0 * c * frac;
        let r = derive_rates(alpha, c, sigma).unwrap();
        let rho = 1.0 - r.eta_star * alpha + r.eta_star * r.eta_star / 2.0 * c * (2.0 * c + sigma);
        prop_assert!((r.rho - rho).abs() <= 1e-15);
        prop_assert!(r.eta_star <= (1.0 / alpha).min(alpha / (4.0 * c * (2.0 * c + sigma))));
        prop_assert!(r.rho > 0.0 && r.rho <= 1.0 - alpha * r.eta_star / 2.0 + 1e-15);
    }

    #[test]
    fn quadratic_is_exact(center in coords(5), theta in coords(5), a in 0.1..5.0f64) {
        let q = QuadraticWell::new(ParamVector::new(center.clone()).unwrap(), a).unwrap();
        let t = ParamVector::new(theta.clone()).unwrap();
        let d2: f64 = theta.iter().zip(&center).map(|(x, c)| (x - c) * (x - c)).sum();
        prop_assert!((q.value(&t).unwrap() - a * d2 / 2.0).abs() <= 1e-12 * (1.0 + d2));
        let g = q.gradient(&t).unwrap();
        for i in 0..5 {
            prop_assert!((g[i] - a * (theta[i] - center[i])).abs() <= 1e-12);
        }
    }

    #[test]
    fn network_loss_is_non_negative(theta in coords(26), y in prop::collection::vec(-2.0..2.0f64, 3)) {
        let net = NetSpec::new(vec![4, 3, 2, 1], Activation::SoftTanh).unwrap();
        let loss = NetworkLoss::new(net, Dataset::shifted_basis(3, 4, 1.0, 0.1, y).unwrap()).unwrap();
        prop_assert!(loss.value(&ParamVector::new(theta).unwrap()).unwrap() >= 0.0);
    }

    #[test]
    fn non_finite_coordinates_are_rejected(mut v in coords(4), i in 0usize..4, bad in prop::sample::select(vec![f64::NAN, f64::INFINITY, f64::NEG_INFINITY])) {
        v[i] = bad;
        prop_assert!(ParamVector::new(v).is_err());
    }

    #[test]
    fn streams_replay(seed in any::<u64>(), stream in any::<u64>()) {
        let mut a = RngStream::new(seed, stream);
        let mut b = RngStream::new(seed, stream);
        for _ in 0..16 {
            prop_assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn robbins_monro_steps_follow_the_formula(gamma in 0.1..5.0f64, n0 in 0.5..20.0f64, q in 0.51..1.0f64, k in 0usize..100_000) {
        let s = StepSchedule::RobbinsMonro { gamma, n0, q };
        let want = gamma / (k as f64 + n0).powf(q);
        prop_assert!((s.eta(k) - want).abs() <= 1e-15 * want);
    }

    #[test]
    fn event_bookkeeping_is_consistent(seed in any::<u64>(), r in 0.3..1.5f64, sigma in 0.0..20.0f64, eta in 0.05..0.5f64) {
        let well = QuadraticWell::new(ParamVector::basis(6, 0, 0.5), 1.0).unwrap();
        let theta0 = ParamVector::zeros(6);
        let opts = TrajectoryOptions { r, outer_radius: r + 1.0, horizon: 60, thin: None };
        let rec = run_trajectory(
            &well,
            &NoiseModel::ml_scaled(sigma).unwrap(),
            &StepSchedule::Constant { eta },
            &theta0,
            &opts,
            &mut RngStream::new(seed, 0),
        ).unwrap();
        prop_assert_eq!(rec.f_values.len(), 61);
        prop_assert_eq!(rec.dist_values.len(), 61);
        let first_out = rec.dist_values[..=rec.steps_taken].iter().position(|d| *d > r);
        prop_assert_eq!(rec.event_alive_until, first_out);
        prop_assert_eq!(rec.exit_class == ExitClass::None, rec.event_alive_until.is_none());
        for k in 1..=60 {
            prop_assert!(!rec.alive_at(k) || rec.alive_at(k - 1));
        }
    }

    #[test]
    fn adversarial_noise_stays_aligned(seed in any::<u64>(), dim in 2usize..12) {
        let model = NoiseModel::AdversarialRotated(ZDist::sphere(dim, 1.0).unwrap());
        let mut state = NoiseState::default();
        let mut rng = RngStream::new(seed, 0);
        let grad = ParamVector::zeros(dim);
        let mut noises = Vec::new();
        for _ in 0..20 {
            noises.push(model.perturb(1.0, &grad, &mut rng, &mut state).unwrap().noise);
        }
        let u = state.direction().unwrap().to_vec();
        for z in noises {
            let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            let along: f64 = z.iter().zip(&u).map(|(a, b)| a * b).sum();
            prop_assert!((along - norm).abs() <= 1e-12 * (1.0 + norm));
        }
    }

    #[test]
    fn config_round_trips(dim in 1usize..20, scale in 0.1..4.0f64, horizon in 1usize..5000, runs in 1usize..5000, seed in any::<u64>(), sigma in 0.0..3.0f64) {
        let text = format!(
            "[landscape]\nkind = \"quadratic\"\ndim = {dim}\nscale = {scale}\n\
             [noise]\nkind = \"ml_scaled\"\nsigma = {sigma}\n\
             [run]\nhorizon = {horizon}\nn_runs = {runs}\nbase_seed = {seed}\n"
        );
        let cfg = parse_config(&text).unwrap();
        let back = parse_config(&serialize(&cfg).unwrap()).unwrap();
        prop_assert_eq!(cfg, back);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn alpha_estimate_never_increases_with_samples(seed in any::<u64>()) {
        let net = NetSpec::new(vec![3, 2, 1], Activation::SoftTanh).unwrap();
        let loss = NetworkLoss::new(net, Dataset::shifted_basis(2, 3, 1.0, 0.1, vec![0.5, -0.3]).unwrap()).unwrap();
        let theta0 = ParamVector::new((0..loss.dim()).map(|i| 0.3 * i as f64 - 1.0).collect()).unwrap();
        let est = |n| estimate_alpha(&loss, &theta0, 1.0, n, 5, &mut RngStream::new(seed, 1), Execution::Sequential).unwrap();
        let (a, b, c) = (est(20), est(80), est(200));
        prop_assert!(b <= a && c <= b, "{a} {b} {c}");
    }

    #[test]
    fn ensembles_replay_across_execution_modes(seed in any::<u64>()) {
        let well = QuadraticWell::new(ParamVector::basis(4, 0, 0.5), 1.0).unwrap();
        let theta0 = ParamVector::zeros(4);
        let noise = NoiseModel::ml_scaled(2.0).unwrap();
        let opts = TrajectoryOptions { r: 1.0, outer_radius: 2.0, horizon: 30, thin: None };
        let spec = EnsembleSpec {
            objective: &well,
            noise: &noise,
            schedule: StepSchedule::Constant { eta: 0.2 },
            theta0: &theta0,
            options: &opts,
            n_runs: 150,
            base_seed: seed,
        };
        let a = run_ensemble(&spec, None, Execution::Sequential).unwrap();
        let b = run_ensemble(&spec, None, Execution::Parallel).unwrap();
        prop_assert_eq!(&a, &b);
        let surv: Vec<f64> = a.per_step.iter().map(|s| s.survival).collect();
        prop_assert!(surv.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn theta_samples_are_members(seed in any::<u64>()) {
        let net = NetSpec::new(vec![4, 3, 2, 1], Activation::SoftTanh).unwrap();
        let loss = NetworkLoss::new(net.clone(), Dataset::shifted_basis(3, 4, 1.0, 0.1, vec![1.0, 0.5, 0.2]).unwrap()).unwrap();
        let theta0 = chatterjee_init(&net, 4.0, 3.0, &mut RngStream::new(seed, 0)).unwrap();
        let sub = ThetaSubspace::new(loss, theta0.clone(), 0.01).unwrap();
        let s = sub.sample(2.0, 50, &mut RngStream::new(seed, 1), Execution::Parallel).unwrap();
        prop_assert!(!s.points.is_empty());
        for p in &s.points {
            prop_assert!(sub.contains(p));
            prop_assert!(p.distance(&theta0).unwrap() <= 2.0 + 1e-12);
        }
    }
}
