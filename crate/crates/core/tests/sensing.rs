//! Basis-index map, encoding and shot-noise behaviour of the sensing protocol.

use std::collections::BTreeSet;

use npqc::metrology::{basis_index_map, crao_check, encode, estimate_exact, sense_experiment, summarize, SenseConfig};
use npqc::train::random_params;
use npqc::{rng, Error, Exec, NpqcSpec};

/// Brute force: perturb one parameter at a time and find where the leaked
/// probability lands, without looking at the gradient states.
fn perturbation_map(spec: &NpqcSpec, eps: f64) -> Vec<usize> {
    let m = spec.num_params();
    (0..m)
        .map(|i| {
            let mut d = vec![0.0; m];
            d[i] = eps;
            let p = encode(spec, &d).unwrap().probabilities();
            (1..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap()
        })
        .collect()
}

#[test]
fn map_agrees_with_brute_force_perturbation() {
    for (n, p) in [(2, 1), (4, 1), (4, 3), (6, 2), (8, 4)] {
        let spec = NpqcSpec::y_only(n, p).unwrap();
        let map = basis_index_map(&spec).unwrap();
        assert_eq!(map.v, perturbation_map(&spec, 1e-3), "N={n}, p={p}");
    }
}

#[test]
fn map_is_collision_free_and_complete() {
    for n in [4usize, 6, 8] {
        for p in 1..=5.min(1 << (n / 2)) {
            let spec = NpqcSpec::y_only(n, p).unwrap();
            let map = basis_index_map(&spec).unwrap();
            let set: BTreeSet<_> = map.v.iter().copied().collect();
            assert_eq!(map.len(), spec.num_params());
            assert_eq!(set.len(), map.len(), "N={n}, p={p}");
            assert!(!set.contains(&0));
            assert!(map.v.iter().all(|&v| v < 1 << n));
        }
    }
}

#[test]
fn full_variant_has_no_map() {
    let spec = NpqcSpec::full(4, 2).unwrap();
    assert!(matches!(basis_index_map(&spec), Err(Error::Variant { .. })));
}

#[test]
fn single_parameter_leaks_quarter_square() {
    const EPS: f64 = 0.02;
    let spec = NpqcSpec::y_only(6, 3).unwrap();
    let map = basis_index_map(&spec).unwrap();
    for i in 0..spec.num_params() {
        let mut d = vec![0.0; spec.num_params()];
        d[i] = EPS;
        let p = encode(&spec, &d).unwrap().probabilities();
        assert!((p[map.v[i]] - EPS * EPS / 4.0).abs() < EPS.powi(4));
    }
}

#[test]
fn ground_probability_follows_the_shift_norm() {
    let spec = NpqcSpec::y_only(8, 4).unwrap();
    for inst in 0..10 {
        let d = npqc::metrology::random_shift(spec.num_params(), 0.1, 3, inst);
        let norm2: f64 = d.iter().map(|x| x * x).sum();
        let p0 = encode(&spec, &d).unwrap().probabilities()[0];
        assert!((p0 - (1.0 - norm2 / 4.0)).abs() < 1e-4);
    }
}

#[test]
fn exact_estimates_are_accurate_for_small_shifts() {
    let spec = NpqcSpec::y_only(8, 4).unwrap();
    let map = basis_index_map(&spec).unwrap();
    let d = npqc::metrology::random_shift(spec.num_params(), 0.05, 9, 0);
    let est = estimate_exact(&encode(&spec, &d).unwrap().probabilities(), &map);
    for (e, x) in est.iter().zip(&d) {
        assert!((e - x.abs()).abs() < 5e-3);
    }
}

fn rel_rmse(spec: &NpqcSpec, norms: Vec<f64>, shots: Vec<u64>, instances: usize) -> Vec<f64> {
    let cfg = SenseConfig {
        norms,
        shots,
        exact: false,
        instances,
        seed: 21,
    };
    summarize(&sense_experiment(spec, &cfg, Exec::default()).unwrap())
        .iter()
        .map(|s| s.rel_rmse)
        .collect()
}

#[test]
fn shot_noise_halves_with_four_times_the_shots() {
    // Once every v_i collects counts and before the bias floor, the error
    // scales as n^{-1/2}.
    let spec = NpqcSpec::y_only(8, 4).unwrap();
    let r = rel_rmse(&spec, vec![0.1], vec![10_000, 40_000], 40);
    let ratio = r[0] / r[1];
    assert!((1.7..2.3).contains(&ratio), "ratio {ratio}");
}

#[test]
fn error_has_an_interior_minimum_in_the_shift_norm() {
    // Small shifts drown in shot noise, large ones in the model bias.
    let spec = NpqcSpec::y_only(8, 4).unwrap();
    let norms = vec![0.025, 0.1, 0.4, 1.6];
    let r = rel_rmse(&spec, norms, vec![10_000], 20);
    let best = (0..r.len()).min_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap();
    assert!(best > 0 && best < r.len() - 1, "{r:?}");
}

#[test]
fn sensing_is_thread_independent() {
    let spec = NpqcSpec::y_only(6, 3).unwrap();
    let cfg = SenseConfig {
        norms: vec![0.1, 0.3],
        shots: vec![100, 10_000],
        exact: true,
        instances: 6,
        seed: 5,
    };
    let a = sense_experiment(&spec, &cfg, Exec::Sequential).unwrap();
    let b = sense_experiment(&spec, &cfg, Exec::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cramer_rao_bounds_hold_at_random_points() {
    for spec in [NpqcSpec::full(6, 3).unwrap(), NpqcSpec::y_only(8, 4).unwrap()] {
        for inst in 0..5 {
            let theta = random_params(spec.num_params(), &mut rng::stream(40, inst));
            let r = crao_check(&spec, &theta).unwrap();
            assert!(r.passed(), "{r:?}");
        }
        let r = crao_check(&spec, &spec.reference_params()).unwrap();
        assert!((r.trace - spec.num_params() as f64).abs() < 1e-9);
        assert!((r.inverse_trace.unwrap() - spec.num_params() as f64).abs() < 1e-9);
    }
}
