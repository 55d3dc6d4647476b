mod common;

use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use volstudy::msgarch::{
    encode, fit_msgarch, gjr_loglik, hamilton_filter, kim_smoother, ms_objective, ms_objective_value,
    simulate_msgarch, skewed_t_density, FitConfig, MsGarchParams, RegimeParams, REPARAM_DIM,
};

fn normal_returns(seed: u64, n: usize, scale: f64) -> Vec<f64> {
    let mut rng = common::rng(seed);
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        })
        .collect()
}

fn sample_variance(r: &[f64]) -> f64 {
    let n = r.len() as f64;
    let m = r.iter().sum::<f64>() / n;
    r.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn filter_and_smoother_match_enumeration(seed in any::<u64>(), len in 2usize..=10) {
        let mut rng = common::rng(seed);
        let params = common::random_params(&mut rng);
        let scale: f64 = rng.random_range(0.3..3.0);
        let r = normal_returns(seed ^ 0x5eed, len, scale);
        let h1: f64 = rng.random_range(0.2..4.0);
        let (ll, marg) = common::enumerate_paths(&r, &params, h1);
        let out = hamilton_filter(&r, &params, h1).unwrap();
        prop_assert!((out.log_likelihood - ll).abs() < 1e-8, "{} vs {}", out.log_likelihood, ll);
        let smoothed = kim_smoother(&out.filtered, &params).unwrap();
        for (s, m) in smoothed.iter().zip(&marg) {
            prop_assert!((s[0] - m[0]).abs() < 1e-8 && (s[1] - m[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn probability_rows_are_distributions(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let params = common::random_params(&mut rng);
        let r = normal_returns(seed, 200, 1.5);
        let out = hamilton_filter(&r, &params, 2.0).unwrap();
        let smoothed = kim_smoother(&out.filtered, &params).unwrap();
        for row in out.filtered.iter().chain(&smoothed) {
            prop_assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
            prop_assert!((row[0] + row[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn label_swap_leaves_likelihood_unchanged(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let params = common::random_params(&mut rng);
        let r = normal_returns(seed, 150, 1.2);
        let a = hamilton_filter(&r, &params, 1.5).unwrap();
        let b = hamilton_filter(&r, &params.swapped(), 1.5).unwrap();
        prop_assert_eq!(a.log_likelihood, b.log_likelihood);
    }

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let theta: Vec<f64> = encode(&common::random_params(&mut rng)).to_vec();
        let r = normal_returns(seed, 120, 1.3);
        let h1 = sample_variance(&r);
        let (_, grad) = ms_objective(&r, h1, &theta);
        for i in 0..REPARAM_DIM {
            let step = 1e-5 * theta[i].abs().max(1.0);
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[i] += step;
            down[i] -= step;
            let fd = (ms_objective_value(&r, h1, &up) - ms_objective_value(&r, h1, &down)) / (2.0 * step);
            let scale = grad[i].abs().max(1e-3);
            prop_assert!((grad[i] - fd).abs() <= 1e-4 * scale, "coordinate {}: {} vs {}", i, grad[i], fd);
        }
    }
}

#[test]
fn skewed_t_matches_independent_formula() {
    for nu in [2.5, 3.0, 5.0, 10.0, 40.0] {
        for xi in [0.5, 0.7, 1.0, 1.5, 3.0] {
            for i in -80..=80 {
                let z = i as f64 * 0.125;
                let got = skewed_t_density(z, nu, xi).unwrap();
                let want = common::skewed_t_pdf(z, nu, xi);
                assert!((got - want).abs() <= 1e-12 * want.max(1e-300) + 1e-15, "nu={nu} xi={xi} z={z}");
            }
        }
    }
}

#[test]
fn unit_skew_is_students_t() {
    for nu in [2.5, 3.0, 5.0, 10.0, 80.0] {
        for i in -200..=200 {
            let z = i as f64 * 0.05;
            let got = skewed_t_density(z, nu, 1.0).unwrap();
            assert!((got - common::unit_t_pdf(z, nu)).abs() < 1e-10);
            assert_eq!(got, skewed_t_density(-z, nu, 1.0).unwrap());
        }
    }
}

#[test]
fn identical_regimes_reduce_to_single_gjr() {
    let regime = RegimeParams {
        omega: 0.3,
        alpha: 0.08,
        gamma: 0.05,
        beta: 0.8,
        nu: 6.0,
        xi: 1.1,
    };
    let params = MsGarchParams {
        regimes: [regime, regime],
        p11: 0.93,
        p22: 0.81,
    };
    let r = normal_returns(3, 500, 1.4);
    let out = hamilton_filter(&r, &params, 1.7).unwrap();
    let single = gjr_loglik(&r, &regime, 1.7).unwrap();
    assert!((out.log_likelihood - single).abs() < 1e-10);
    let pi = params.stationary();
    let smoothed = kim_smoother(&out.filtered, &params).unwrap();
    for (f, s) in out.filtered.iter().zip(&smoothed) {
        assert!((f[0] - pi[0]).abs() < 1e-12 && (s[0] - pi[0]).abs() < 1e-12);
    }
}

#[test]
fn simulated_moments_and_absorbing_chain() {
    let flat = RegimeParams {
        omega: 1.7,
        alpha: 0.0,
        gamma: 0.0,
        beta: 0.0,
        nu: 10.0,
        xi: 1.3,
    };
    let params = MsGarchParams {
        regimes: [flat, flat],
        p11: 0.9,
        p22: 0.8,
    };
    let sim = simulate_msgarch(&params, 100_000, 4).unwrap();
    let var = sample_variance(&sim.returns);
    assert!((var / flat.omega - 1.0).abs() < 0.03, "variance {var}");
    let mean = sim.returns.iter().sum::<f64>() / sim.returns.len() as f64;
    assert!(mean.abs() < 0.03, "mean {mean}");
    assert_eq!(sim, simulate_msgarch(&params, 100_000, 4).unwrap());

    let absorbing = MsGarchParams { p11: 1.0, ..params };
    let sim = simulate_msgarch(&absorbing, 500, 9).unwrap();
    assert!(sim.regimes.iter().all(|&s| s == 0));
}

#[test]
fn nested_fit_never_loses_to_single_regime() {
    let regime = RegimeParams {
        omega: 0.2,
        alpha: 0.06,
        gamma: 0.04,
        beta: 0.85,
        nu: 8.0,
        xi: 1.0,
    };
    let params = MsGarchParams {
        regimes: [regime, regime],
        p11: 0.5,
        p22: 0.5,
    };
    let sim = simulate_msgarch(&params, 800, 21).unwrap();
    let fit = fit_msgarch(&sim.returns, &FitConfig::default()).unwrap();
    assert!(fit.log_likelihood >= fit.single_regime.log_likelihood - 1e-4);
    // Regimes come out ordered by unconditional variance.
    let v = [
        fit.params.regimes[0].unconditional_variance(),
        fit.params.regimes[1].unconditional_variance(),
    ];
    assert!(v[0] <= v[1]);
}
