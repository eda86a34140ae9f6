mod common;

use std::sync::Arc;

use common::{dense_inverse, dot, matvec, random_dataset, rng, simpson_2d, simpson_split, to_rows, trapezoid};
use faer::Mat;
use proptest::prelude::*;
use rand::Rng;
use ssanova::inference::{
    bayesian_ci, effect_sq_norm, intercept_ci, intercept_half_width, pointwise_ci, sq_norm_of, wald_statistic,
    wald_test, wald_test_group, IntervalMethod,
};
use ssanova::kernels::UnivariateKernel;
use ssanova::normal::{two_sided_critical, two_sided_p};
use ssanova::solver::fit_at_lambda;
use ssanova::spectral::EffectEigensystem;
use ssanova::{Effect, ModelSpec, PenaltySystem};

#[test]
fn kernel_section_norm_matches_trapezoid() {
    let a = 0.37;
    let x = Mat::from_fn(3, 1, |i, _| [0.1, a, 0.8][i]);
    let spec = ModelSpec::all_up_to(1, 1).with_order(2);
    let system = PenaltySystem::new(&spec, &x).unwrap();
    let e: Effect = "1".parse().unwrap();
    let norm = sq_norm_of(&system, &e, &[0.0, 1.0, 0.0], 0.0).unwrap();
    let k = UnivariateKernel::new(2).unwrap();
    let oracle = trapezoid(|t| k.eval(a, t).unwrap().powi(2), 4096);
    assert!((norm.integral - oracle).abs() <= 1e-8, "{} vs {oracle}", norm.integral);
    assert_eq!(norm.penalty, 0.0);
}

#[test]
fn norm_is_quadratic_in_coefficients() {
    let data = random_dataset(3, 20, 2);
    let spec = ModelSpec::all_up_to(2, 2);
    let system = PenaltySystem::from_dataset(&spec, &data).unwrap();
    let mut r = rng(4);
    let c: Vec<f64> = (0..20).map(|_| r.random::<f64>() - 0.5).collect();
    let c2: Vec<f64> = c.iter().map(|v| 2.0 * v).collect();
    for e in spec.penalized_effects() {
        let a = sq_norm_of(&system, e, &c, 1e-3).unwrap();
        let b = sq_norm_of(&system, e, &c2, 1e-3).unwrap();
        assert!((b.value - 4.0 * a.value).abs() <= 1e-12 * b.value);
        assert!(a.value >= a.penalty);
    }
}

#[test]
fn gauss_quadrature_matches_simpson_on_fits() {
    for seed in 0..4 {
        let data = random_dataset(50 + seed, 20, 2);
        let spec = ModelSpec::all_up_to(2, 2);
        let fit = fit_at_lambda(&spec, &data, 1e-5).unwrap();
        let k = UnivariateKernel::new(3).unwrap();
        let c = fit.coefficients();
        let x = data.x();
        for e in spec.penalized_effects() {
            let norm = effect_sq_norm(&fit, e).unwrap();
            let idx = e.indices();
            let oracle = if idx.len() == 1 {
                let j = idx[0];
                let kinks: Vec<f64> = (0..20).map(|i| x[(i, j)]).collect();
                simpson_split(
                    |t| (0..20).map(|i| c[i] * k.eval(x[(i, j)], t).unwrap()).sum::<f64>().powi(2),
                    &kinks,
                    16,
                )
            } else {
                simpson_2d(
                    |s, t| {
                        (0..20)
                            .map(|i| c[i] * k.eval(x[(i, idx[0])], s).unwrap() * k.eval(x[(i, idx[1])], t).unwrap())
                            .sum::<f64>()
                            .powi(2)
                    },
                    512,
                )
            };
            assert!((norm.integral - oracle).abs() <= 1e-6 * oracle, "{e}: {} vs {oracle}", norm.integral);
        }
    }
}

/// Posterior variance straight from the displayed formula with a dense inverse.
fn dense_posterior(
    k_j: &[Vec<f64>],
    k_x: &[f64],
    k_xx: f64,
    n: usize,
    lambda: f64,
    sigma2: f64,
) -> f64 {
    let mut m = k_j.to_vec();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] += n as f64 * lambda;
    }
    let inv = dense_inverse(&m);
    let ones = vec![1.0; n];
    let inv1 = matvec(&inv, &ones);
    let invk = matvec(&inv, k_x);
    let quad = dot(k_x, &invk) - dot(k_x, &inv1).powi(2) / dot(&ones, &inv1);
    sigma2 / (n as f64 * lambda) * (k_xx - quad)
}

#[test]
fn bayesian_band_matches_dense_oracle() {
    let data = random_dataset(61, 25, 2);
    let spec = ModelSpec::all_up_to(2, 2);
    let system = Arc::new(PenaltySystem::from_dataset(&spec, &data).unwrap());
    let kj = to_rows(system.grams().penalty());
    let k = UnivariateKernel::new(3).unwrap();
    let mut r = rng(62);
    let z = two_sided_critical(0.05).unwrap();
    for lambda in [1e4, 1e-1, 1e-4] {
        for fit in [system.fit(data.y(), lambda).unwrap(), system.fit_spectral(data.y(), lambda).unwrap()] {
            let sigma2 = fit.sigma2_hat().unwrap();
            for e in spec.penalized_effects() {
                let idx = e.indices();
                let pts = common::random_unit(&mut r, 6, idx.len());
                let band = bayesian_ci(&fit, e, pts.as_ref(), 0.05).unwrap();
                for j in 0..6 {
                    let kx: Vec<f64> = (0..25)
                        .map(|i| idx.iter().enumerate().map(|(a, &col)| k.eval(data.x()[(i, col)], pts[(j, a)]).unwrap()).product())
                        .collect();
                    let kxx: f64 = (0..idx.len()).map(|a| k.eval(pts[(j, a)], pts[(j, a)]).unwrap()).product();
                    let var = dense_posterior(&kj, &kx, kxx, 25, lambda, sigma2);
                    let prior = sigma2 / (25.0 * lambda) * kxx;
                    let hw = band.half_width[j];
                    assert!(hw <= z * prior.sqrt() * (1.0 + 1e-12));
                    assert!((hw - z * var.max(0.0).sqrt()).abs() <= 1e-6 * z * prior.sqrt(), "lambda {lambda} {e}: {hw} vs {}", z * var.sqrt());
                }
            }
            // intercept posterior
            let mut m = kj.clone();
            for (i, row) in m.iter_mut().enumerate() {
                row[i] += 25.0 * lambda;
            }
            let inv = dense_inverse(&m);
            let s = dot(&[1.0; 25], &matvec(&inv, &[1.0; 25]));
            let b = intercept_ci(&fit, IntervalMethod::Bayesian, 0.05).unwrap();
            let expect = z * (sigma2 / (25.0 * lambda * s)).sqrt();
            assert!((b.half_width[0] - expect).abs() <= 1e-8 * expect);
        }
    }
}

#[test]
fn frequentist_band_estimate_matches_eval() {
    let data = random_dataset(70, 30, 2);
    let spec = ModelSpec::all_up_to(2, 2);
    let fit = fit_at_lambda(&spec, &data, 1e-4).unwrap();
    let mut r = rng(71);
    for e in spec.penalized_effects() {
        let eig = EffectEigensystem::from_fit(&fit, e).unwrap();
        let pts = common::random_unit(&mut r, 7, e.order());
        let band = pointwise_ci(&fit, &eig, pts.as_ref(), 0.05).unwrap();
        let est = fit.eval_effect(e, pts.as_ref()).unwrap();
        for (a, b) in band.estimate.iter().zip(&est) {
            assert!((a - b).abs() < 1e-12);
        }
        let sums = eig.pointwise_variance_sum(fit.lambda(), pts.as_ref()).unwrap();
        let s2 = fit.sigma2_hat().unwrap();
        for (h, s) in band.half_width.iter().zip(&sums) {
            assert!(*h >= 0.0);
            assert!((h - 1.959963984540054 * (s2 / 30.0 * s).sqrt()).abs() < 1e-10);
        }
    }
}

#[test]
fn intercept_width_scales_with_root_n() {
    assert!((intercept_half_width(1.0, 100, 0.05).unwrap() - 0.1959964).abs() < 1e-6);
    for n in [25, 100, 400, 1000] {
        let ratio = intercept_half_width(1.0, n, 0.05).unwrap() / intercept_half_width(1.0, 4 * n, 0.05).unwrap();
        assert!((1.7..=2.3).contains(&ratio));
    }
}

#[test]
fn singleton_group_equals_single_test() {
    let data = random_dataset(80, 40, 3);
    let spec = ModelSpec::all_up_to(3, 2);
    let fit = fit_at_lambda(&spec, &data, 1e-4).unwrap();
    let eigs: Vec<EffectEigensystem> = spec
        .penalized_effects()
        .map(|e| EffectEigensystem::from_fit(&fit, e).unwrap())
        .collect();
    for eig in &eigs {
        let a = wald_test(&fit, eig, 0.05).unwrap();
        let b = wald_test_group(&fit, &[eig], 0.05).unwrap();
        assert!((a.statistic - b.statistic).abs() <= 1e-12 * a.statistic.abs().max(1.0));
        assert!((a.components.sq_norm - b.components.sq_norm).abs() <= 1e-12);
        assert!((a.components.s1 - b.components.s1).abs() <= 1e-12);
        assert!((a.components.s2 - b.components.s2).abs() <= 1e-12);
        assert!((a.p_value - two_sided_p(a.statistic)).abs() == 0.0);
        assert_eq!(a.reject, a.statistic.abs() >= two_sided_critical(0.05).unwrap());
    }
    // group components are sums of the single-effect components
    let refs: Vec<&EffectEigensystem> = eigs.iter().collect();
    let g = wald_test_group(&fit, &refs, 0.05).unwrap();
    let singles: Vec<_> = eigs.iter().map(|e| wald_test(&fit, e, 0.05).unwrap()).collect();
    let n = 40.0;
    let num_sum: f64 = singles
        .iter()
        .map(|s| n * n * (s.components.sq_norm - s.components.centering))
        .sum();
    let num_group = n * n * (g.components.sq_norm - g.components.centering);
    assert!((num_sum - num_group).abs() <= 1e-9 * num_group.abs().max(1.0));
    assert!((singles.iter().map(|s| s.components.s2).sum::<f64>() - g.components.s2).abs() < 1e-10);
    assert!(wald_test_group(&fit, &[refs[0], refs[0]], 0.05).is_err());
}

proptest! {
    #[test]
    fn decision_rule_matches_p_value(t in -6.0f64..6.0, alpha in 0.001f64..0.999) {
        let z = two_sided_critical(alpha).unwrap();
        let p = two_sided_p(t);
        prop_assert!((0.0..=1.0).contains(&p));
        // |t| >= z and p <= alpha disagree only within round-off of the boundary
        if (t.abs() - z).abs() > 1e-9 {
            prop_assert_eq!(t.abs() >= z, p <= alpha);
        }
    }

    #[test]
    fn statistic_centered_at_null_expectation(n in 2usize..5000, s2 in 0.01f64..10.0, s1 in 0.1f64..50.0, ss in 0.1f64..50.0) {
        let t = wald_statistic(n, s2 * s1 / n as f64, s2, s1, ss).unwrap();
        prop_assert!(t.abs() < 1e-9);
    }
}

#[test]
fn negative_statistics_are_reported_signed() {
    let t = wald_statistic(100, 0.0, 1.0, 5.0, 2.0).unwrap();
    assert!(t < 0.0);
}

#[test]
fn frequentist_narrower_than_bayesian_for_interactions_here() {
    // sanity on a benchmark replicate; the Monte-Carlo version is an acceptance check
    let data = ssanova::simulation::generate_replicate(&ssanova::simulation::TrueModel::full(), 400, 5).unwrap();
    let (fit, _) = ssanova::solver::fit_model(&ssanova::simulation::TrueModel::spec(), &data).unwrap();
    let e: Effect = "1,2".parse().unwrap();
    let eig = EffectEigensystem::from_fit(&fit, &e).unwrap();
    let grid = ssanova::simulation::effect_grid(&e, 10);
    let f = pointwise_ci(&fit, &eig, grid.as_ref(), 0.05).unwrap();
    let b = bayesian_ci(&fit, &e, grid.as_ref(), 0.05).unwrap();
    assert!(f.mean_half_width() < b.mean_half_width(), "{} {}", f.mean_half_width(), b.mean_half_width());
}
