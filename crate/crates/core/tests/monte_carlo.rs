//! Seeded Monte Carlo checks of the samplers and path generators against
//! closed-form moments. Bounds are four standard errors unless noted.

use greybm::paths::{covariance, FbmGenerator};
use greybm::sampling::{
    sample_d_beta, sample_inverse_subordinator, sample_stable_subordinator, sample_y_beta,
};
use greybm::stats::{ks_critical_value, power_variation, z_increments, PowerScaling};
use greybm::{EmpiricalLaw, Ensemble, GreyParams, RngStream, TimeGrid};
use statrs::function::erf::erf;
use statrs::function::gamma::gamma;

const N: usize = 200_000;

fn within(sample: Vec<f64>, expected: f64) -> (bool, f64, f64) {
    let law = EmpiricalLaw::new(sample).unwrap();
    let z = (law.mean() - expected) / law.standard_error();
    (z.abs() <= 4.0, law.mean(), z)
}

#[test]
fn mixing_variable_moments() {
    for (i, beta) in [0.25, 0.5, 0.75].into_iter().enumerate() {
        let mut rng = RngStream::new(42, i as u64).rng();
        let y: Vec<f64> = (0..N)
            .map(|_| sample_y_beta(beta, &mut rng).unwrap().value)
            .collect();
        for k in 1..=2 {
            let expected = gamma(k as f64 + 1.0) / gamma(beta * k as f64 + 1.0);
            let (ok, mean, z) = within(y.iter().map(|v| v.powi(k)).collect(), expected);
            assert!(ok, "beta {beta} k {k}: {mean} vs {expected} (z {z})");
        }
    }
}

#[test]
fn half_order_mixing_variable_is_half_normal() {
    // M_{1/2}(τ) = exp(−τ²/4)/√π, so Y_{1/2} has CDF erf(x/2).
    let mut rng = RngStream::new(42, 9).rng();
    let y: Vec<f64> = (0..20_000)
        .map(|_| sample_y_beta(0.5, &mut rng).unwrap().value)
        .collect();
    let law = EmpiricalLaw::new(y).unwrap();
    let ks = law.ks_distance(|x| if x <= 0.0 { 0.0 } else { erf(0.5 * x) });
    assert!(ks < ks_critical_value(law.len() as f64), "KS {ks}");
}

#[test]
fn stable_laplace_transform() {
    for (i, beta) in [0.3, 0.6, 0.9].into_iter().enumerate() {
        let mut rng = RngStream::new(7, i as u64).rng();
        let s: Vec<f64> = (0..N)
            .map(|_| sample_stable_subordinator(beta, &mut rng).unwrap())
            .collect();
        for lambda in [0.5, 1.0, 2.0] {
            let expected = (-f64::powf(lambda, beta)).exp();
            let (ok, mean, z) = within(s.iter().map(|v| (-lambda * v).exp()).collect(), expected);
            assert!(
                ok,
                "beta {beta} lambda {lambda}: {mean} vs {expected} (z {z})"
            );
        }
    }
}

#[test]
fn inverse_subordinator_and_d_beta_means() {
    for (i, beta) in [0.4, 0.7].into_iter().enumerate() {
        let mut rng = RngStream::new(8, i as u64).rng();
        let x: f64 = 2.5;
        let expected = x.powf(beta) / gamma(1.0 + beta);
        let e: Vec<f64> = (0..N)
            .map(|_| sample_inverse_subordinator(beta, x, &mut rng).unwrap())
            .collect();
        let (ok, mean, z) = within(e, expected);
        assert!(
            ok,
            "inverse subordinator beta {beta}: {mean} vs {expected} (z {z})"
        );
        let d: Vec<f64> = (0..N)
            .map(|_| sample_d_beta(beta, x, &mut rng).unwrap())
            .collect();
        let (ok, mean, z) = within(d, expected);
        assert!(ok, "D_beta beta {beta}: {mean} vs {expected} (z {z})");
    }
}

#[test]
fn circulant_and_dense_generators_share_the_covariance() {
    let grid = TimeGrid::with_margin(1.0, 9, 0.25).unwrap();
    for hurst in [0.3, 0.8] {
        let params = GreyParams::new(2.0 * hurst, 1.0).unwrap();
        let circulant = FbmGenerator::new(hurst, grid).unwrap();
        let dense = FbmGenerator::dense(hurst, grid).unwrap();
        assert!(circulant.is_circulant() && !dense.is_circulant());
        let zero = grid.zero_index();
        let pairs = [
            (zero + 8, zero + 8),
            (zero + 4, zero + 8),
            (zero + 10, zero + 2),
            (0, zero + 8),
        ];
        for (g, generator) in [circulant, dense].iter().enumerate() {
            let mut rng = RngStream::new(3, g as u64).rng();
            let paths: Vec<Vec<f64>> = (0..40_000)
                .map(|_| generator.sample_values(&mut rng))
                .collect();
            for &(i, j) in &pairs {
                let (t, s) = (grid.time(i), grid.time(j));
                // two-sided fBm pinned at 0
                let a = 2.0 * hurst;
                let expected = 0.5 * (t.abs().powf(a) + s.abs().powf(a) - (t - s).abs().powf(a));
                if t >= 0.0 && s >= 0.0 {
                    assert!((expected - covariance(params, t, s)).abs() < 1e-14);
                }
                let products: Vec<f64> = paths.iter().map(|p| p[i] * p[j]).collect();
                let (ok, mean, z) = within(products, expected);
                assert!(
                    ok,
                    "H {hurst} generator {g} ({t}, {s}): {mean} vs {expected} (z {z})"
                );
            }
        }
    }
}

#[test]
fn brownian_normalized_increments_have_unit_variance() {
    let ens = Ensemble {
        params: GreyParams::new(1.0, 1.0).unwrap(),
        grid: TimeGrid::with_margin(1.0, 1025, 1.0 / 64.0).unwrap(),
        replicas: 50,
        seed: 5,
    };
    let values = ens.map(|_, path| z_increments(path, 1.0 / 64.0)).unwrap();
    // one increment per path at spacing ε is independent across paths
    let sample: Vec<f64> = values.iter().map(|z| z[0].powi(2)).collect();
    let law = EmpiricalLaw::new(sample).unwrap();
    assert!((law.mean() - 1.0).abs() < 4.0 * law.standard_error());
    let pooled: Vec<f64> = values
        .iter()
        .flat_map(|z| z.iter().step_by(16).copied())
        .collect();
    let var = EmpiricalLaw::new(pooled).unwrap().variance();
    assert!((var - 1.0).abs() < 0.05, "pooled variance {var}");
}

#[test]
fn centered_power_variation_has_mean_zero() {
    let grid = TimeGrid::new(1.0, 1025, 0).unwrap();
    let cases = [
        (1.0, 0.6, 2, PowerScaling::SqrtN),
        (0.6, 0.8, 2, PowerScaling::SqrtN),
        (1.8, 0.6, 2, PowerScaling::NPow1MinusAlpha),
        (0.6, 0.6, 3, PowerScaling::SqrtN),
    ];
    for (i, (alpha, beta, k, scaling)) in cases.into_iter().enumerate() {
        let ens = Ensemble {
            params: GreyParams::new(alpha, beta).unwrap(),
            grid,
            replicas: 400,
            seed: 10 + i as u64,
        };
        let stats = ens
            .map(|_, path| power_variation(path, k, scaling))
            .unwrap();
        assert!(stats.iter().all(|s| s.centered == (k % 2 == 0)));
        let sample: Vec<f64> = stats.iter().map(|s| s.statistic).collect();
        let (ok, mean, z) = within(sample, 0.0);
        assert!(ok, "({alpha}, {beta}, k {k}): mean {mean} (z {z})");
    }
}

#[test]
fn brownian_quadratic_variation_fluctuation() {
    let ens = Ensemble {
        params: GreyParams::new(1.0, 1.0).unwrap(),
        grid: TimeGrid::new(1.0, 2049, 0).unwrap(),
        replicas: 1000,
        seed: 77,
    };
    let stats = ens
        .map(|_, path| power_variation(path, 2, PowerScaling::SqrtN))
        .unwrap();
    let law = EmpiricalLaw::new(stats.iter().map(|s| s.statistic).collect()).unwrap();
    // √n (Σ (n ΔB²) /n − 1) → N(0, 2)
    assert!(
        (law.variance() / 2.0 - 1.0).abs() < 0.15,
        "variance {}",
        law.variance()
    );
}
