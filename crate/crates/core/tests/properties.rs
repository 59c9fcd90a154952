use greybm::occupation::{
    count_crossings, level_side_functional, linear_banach_kac, occupation_density,
};
use greybm::paths::{covariance, generate_gbm, ProcessTag};
use greybm::regularize::{regularize_path, Kernel};
use greybm::specfun::mittag_leffler;
use greybm::{Bins, EvalConfig, GreyParams, LinearPath, RngStream, SamplePath, TimeGrid};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = GreyParams> {
    (0.05f64..1.95, 0.05f64..=1.0).prop_map(|(a, b)| GreyParams::new(a, b).unwrap())
}

fn walk(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len).prop_map(|steps| {
        steps
            .iter()
            .scan(0.0, |acc, s| {
                *acc += s;
                Some(*acc)
            })
            .collect()
    })
}

fn grid_path(values: Vec<f64>, grid: TimeGrid) -> SamplePath {
    SamplePath::new(
        grid,
        values,
        ProcessTag::Fbm,
        GreyParams::new(1.0, 1.0).unwrap(),
        None,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mittag_leffler_decreasing_on_negative_axis(beta in 0.05f64..=1.0, a in 0.0f64..40.0, b in 0.0f64..40.0) {
        let cfg = EvalConfig::default();
        let (near, far) = if a < b { (a, b) } else { (b, a) };
        let e_near = mittag_leffler(beta, -near, &cfg).unwrap();
        let e_far = mittag_leffler(beta, -far, &cfg).unwrap();
        prop_assert!(e_far <= e_near + 1e-11, "beta {beta}: E(-{far}) = {e_far} > E(-{near}) = {e_near}");
        prop_assert!(e_far >= -1e-11 && e_near <= 1.0 + 1e-11);
    }

    #[test]
    fn covariance_matrix_is_positive_semidefinite(p in params(), times in prop::collection::vec(0.01f64..5.0, 2..12)) {
        let n = times.len();
        let m = DMatrix::from_fn(n, n, |i, j| covariance(p, times[i], times[j]));
        let scale = m.diagonal().max();
        let eig = m.symmetric_eigenvalues();
        prop_assert!(eig.min() >= -1e-10 * scale, "min eigenvalue {}", eig.min());
    }

    #[test]
    fn covariance_self_similar_and_stationary(p in params(), t in 0.01f64..3.0, s in 0.01f64..3.0, c in 0.1f64..10.0) {
        let scaled = covariance(p, c * t, c * s);
        let expected = c.powf(p.alpha()) * covariance(p, t, s);
        prop_assert!((scaled - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        let inc = covariance(p, t, t) + covariance(p, s, s) - 2.0 * covariance(p, t, s);
        let shifted = covariance(p, t + 1.0, t + 1.0) + covariance(p, s + 1.0, s + 1.0)
            - 2.0 * covariance(p, t + 1.0, s + 1.0);
        prop_assert!((inc - shifted).abs() <= 1e-10 * inc.max(1.0));
    }

    #[test]
    fn regularization_is_linear_and_preserves_affine_paths(
        a in walk(49), b in walk(49), x in -3.0f64..3.0, y in -3.0f64..3.0, c in -5.0f64..5.0, tri in any::<bool>(),
    ) {
        let grid = TimeGrid::with_margin(1.0, 33, 0.25).unwrap();
        let kernel = if tri { Kernel::triangular() } else { Kernel::rectangular() };
        let eps = 0.125;
        let ra = regularize_path(&grid_path(a.clone(), grid), &kernel, eps).unwrap();
        let rb = regularize_path(&grid_path(b.clone(), grid), &kernel, eps).unwrap();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(u, v)| x * u + y * v).collect();
        let rm = regularize_path(&grid_path(mix, grid), &kernel, eps).unwrap();
        for i in 0..rm.values.len() {
            prop_assert!((rm.values[i] - (x * ra.values[i] + y * rb.values[i])).abs() < 1e-10);
            prop_assert!((rm.derivative[i] - (x * ra.derivative[i] + y * rb.derivative[i])).abs() < 1e-8);
        }
        let affine: Vec<f64> = (0..grid.len()).map(|i| c + 2.0 * grid.time(i)).collect();
        let ra = regularize_path(&grid_path(affine, grid), &kernel, eps).unwrap();
        for (i, t) in grid.core_range().map(|i| grid.time(i)).enumerate() {
            prop_assert!((ra.values[i] - (c + 2.0 * t)).abs() < 1e-12);
            prop_assert!((ra.derivative[i] - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn triangular_derivative_integrates_to_value_increments(v in walk(97)) {
        let grid = TimeGrid::with_margin(1.0, 65, 0.25).unwrap();
        let reg = regularize_path(&grid_path(v, grid), &Kernel::triangular(), 0.25).unwrap();
        let step = grid.step();
        let scale = reg.values.iter().fold(0.0f64, |m, x| m.max(x.abs())) / 0.25 + 1.0;
        for i in 0..reg.values.len() - 1 {
            let increment = (reg.values[i + 1] - reg.values[i]) / step;
            let average = 0.5 * (reg.derivative[i] + reg.derivative[i + 1]);
            prop_assert!((increment - average).abs() < 0.05 * scale, "cell {i}: {increment} vs {average}");
        }
    }

    #[test]
    fn crossing_parity_matches_endpoint_sides(v in walk(40), level in -4.0f64..4.0) {
        prop_assume!(v.iter().all(|x| *x != level));
        let path = LinearPath::new(0.0, 0.1, &v).unwrap();
        let count = count_crossings(path, level).count;
        let changed = (v[0] > level) != (v[v.len() - 1] > level);
        prop_assert_eq!(count % 2 == 1, changed);
    }

    #[test]
    fn banach_kac_exact_on_linear_paths(v in walk(60), c in -2.0f64..2.0) {
        let path = LinearPath::new(0.0, 0.05, &v).unwrap();
        let f = |x: f64| 1.0 + (x - c).powi(2);
        let level = level_side_functional(path, f);
        let time = linear_banach_kac(path, f);
        prop_assert!((level - time).abs() <= 1e-10 * time.abs().max(1.0), "{level} vs {time}");
    }

    #[test]
    fn occupation_mass_equals_duration(v in walk(50), step in 0.001f64..1.0, bins in 1usize..40) {
        let path = LinearPath::new(0.0, step, &v).unwrap();
        for b in [Bins::Auto, Bins::Count(bins)] {
            let occ = occupation_density(path, &b).unwrap();
            prop_assert!((occ.total_mass() - path.duration()).abs() <= 1e-9 * path.duration().max(1.0));
        }
    }

    #[test]
    fn generation_is_reproducible(p in params(), seed in any::<u64>(), stream in 0u64..1000) {
        let grid = TimeGrid::with_margin(1.0, 33, 0.125).unwrap();
        let a = generate_gbm(p, grid, RngStream::new(seed, stream)).unwrap();
        let b = generate_gbm(p, grid, RngStream::new(seed, stream)).unwrap();
        prop_assert_eq!(&a, &b);
        let c = generate_gbm(p, grid, RngStream::new(seed, stream + 1)).unwrap();
        prop_assert_ne!(a.values, c.values);
    }
}
