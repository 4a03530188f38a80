use orkm::datagen::{cluster_means, generate, generate_with_means, informative_plus_noise, preset, SimSpec};
use orkm::metrics::nmi;
use proptest::prelude::*;

#[test]
fn proportions_within_binomial_bounds() {
    for (seed, mix) in [
        (1, vec![0.2, 0.3, 0.5]),
        (2, vec![1.0 / 3.0; 3]),
        (3, vec![0.05, 0.9, 0.05]),
    ] {
        for n in [100, 1000, 5000] {
            let spec = SimSpec {
                n,
                mix: Some(mix.clone()),
                seed,
                ..SimSpec::default()
            };
            let data = generate(&spec).unwrap();
            let labels = data.labels().unwrap();
            for (c, &p) in mix.iter().enumerate() {
                let got = labels.iter().filter(|&&l| l == c).count() as f64;
                let sd = (n as f64 * p * (1.0 - p)).sqrt();
                assert!((got - n as f64 * p).abs() <= 4.0 * sd, "n {n}, class {c}: {got}");
            }
        }
    }
}

#[test]
fn empirical_means_converge() {
    let spec = SimSpec {
        n: 10_000,
        k: 3,
        v: 2,
        j: 3,
        seed: 5,
        ..SimSpec::default()
    };
    let (data, means) = generate_with_means(&spec).unwrap();
    let labels = data.labels().unwrap();
    let tol = 5.0 * spec.sigma / (spec.n as f64 / spec.k as f64).sqrt();
    for v in 0..2 {
        for c in 0..3 {
            let members: Vec<usize> = (0..spec.n).filter(|&i| labels[i] == c).collect();
            for j in 0..3 {
                let m = members.iter().map(|&i| data.view(v)[[i, j]]).sum::<f64>() / members.len() as f64;
                assert!((m - means[v][[c, j]]).abs() <= tol, "view {v} cluster {c} dim {j}");
            }
        }
    }
}

#[test]
fn presets_generate_expected_shapes() {
    let d = generate(&preset("case2-multi").unwrap().with_seed(7).spec).unwrap();
    assert_eq!((d.n_samples(), d.n_views(), d.dims()), (210, 2, vec![2, 2]));
    let d = generate(&preset("case1-single").unwrap().spec).unwrap();
    assert_eq!((d.n_samples(), d.n_views()), (840, 1));
    let p = preset("stability-multi").unwrap();
    assert_eq!(p.sweep().len(), 10);
    assert_eq!(p.sweep()[9].n, 1000);
}

#[test]
fn noise_view_carries_no_labels() {
    let spec = SimSpec {
        n: 3000,
        v: 2,
        seed: 3,
        ..SimSpec::default()
    };
    let d = informative_plus_noise(&spec).unwrap();
    assert_eq!(d.n_views(), 2);
    // nearest-mean labels in the noise view are unrelated to the truth
    let (_, means) = generate_with_means(&SimSpec { v: 2, ..spec.clone() }).unwrap();
    let x = d.view(1);
    let guess: Vec<usize> = (0..spec.n)
        .map(|i| {
            (0..3)
                .min_by(|&a, &b| {
                    let da: f64 = (0..2).map(|j| (x[[i, j]] - means[1][[a, j]]).powi(2)).sum();
                    let db: f64 = (0..2).map(|j| (x[[i, j]] - means[1][[b, j]]).powi(2)).sum();
                    da.total_cmp(&db)
                })
                .unwrap()
        })
        .collect();
    assert!(nmi(&guess, d.labels().unwrap()).unwrap() < 0.01);
}

#[test]
fn bad_specs_are_config_errors() {
    for spec in [
        SimSpec {
            k: 0,
            ..SimSpec::default()
        },
        SimSpec {
            n: 2,
            k: 3,
            ..SimSpec::default()
        },
        SimSpec {
            sigma: 0.0,
            ..SimSpec::default()
        },
        SimSpec {
            separation: -1.0,
            ..SimSpec::default()
        },
        SimSpec {
            mix: Some(vec![0.5, 0.5]),
            ..SimSpec::default()
        },
    ] {
        assert!(generate(&spec).is_err(), "{spec:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn adjacent_means_are_separated(k in 1usize..7, j in 1usize..5, sep in 0.5f64..10.0, sigma in 0.1f64..3.0, seed in 0u64..100) {
        let spec = SimSpec { k, j, separation: sep, sigma, seed, ..SimSpec::default() };
        let m = &cluster_means(&spec).unwrap()[0];
        let d = |a: usize, b: usize| (0..j).map(|q| (m[[a, q]] - m[[b, q]]).powi(2)).sum::<f64>().sqrt();
        for a in 0..k {
            for b in (a + 1)..k {
                prop_assert!(d(a, b) >= sep * sigma * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn generation_is_deterministic(seed in 0u64..1000) {
        let spec = SimSpec { n: 50, v: 2, seed, ..SimSpec::default() };
        prop_assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }
}
