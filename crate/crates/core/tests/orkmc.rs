mod common;

use common::{random_dataset, rng};
use ndarray::array;
use orkm::orkmc::{orkmc_init_with, StreamOptions};
use orkm::{
    objective_online, orkmc_init, orkmc_run, orkmc_run_with, orkmc_step, validate, view_weights, Dataset, HyperParams,
    ViewWeights,
};
use proptest::prelude::*;
use rand::Rng;

fn hyper(k: usize, chushi: usize, seed: u64) -> HyperParams {
    let mut h = HyperParams::with_k(k);
    h.chushi = Some(chushi);
    h.seed = seed;
    h.eta = 0.5;
    h
}

#[test]
fn weights_match_power_law() {
    let mut r = rng(41);
    for _ in 0..200 {
        let v = r.random_range(1..=5);
        let d: Vec<f64> = (0..v).map(|_| r.random_range(0.01..100.0)).collect();
        let rr = [0.3, 0.5, 1.5, 2.0, 4.0][r.random_range(0..5)];
        let raw: Vec<f64> = d.iter().map(|x| x.powf(1.0 / (1.0 - rr))).collect();
        let total: f64 = raw.iter().sum();
        let got = view_weights(&d, rr);
        for (g, w) in got.iter().zip(&raw) {
            assert!((g - w / total).abs() < 1e-12, "D = {d:?}, r = {rr}");
        }
    }
}

#[test]
fn weights_for_near_one_exponent_stay_finite() {
    let w = view_weights(&[1e3_f64, 1e4], 0.999);
    assert!(w.iter().all(|x| x.is_finite()));
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn weights_with_large_r_favour_small_residuals() {
    let w = view_weights(&[1.0_f64, 10.0], 2.0);
    assert!(w[0] > w[1]);
}

#[test]
fn init_needs_k_rows() {
    let data = Dataset::single_view(array![[0.0_f64], [1.0]], None).unwrap();
    assert!(orkmc_init(&data, &HyperParams::with_k(3)).is_err());
}

#[test]
fn arrival_with_wrong_shape_leaves_state_alone() {
    let mut r = rng(42);
    let data = random_dataset(&mut r, 20, 2, &[2, 3], false);
    let mut s = orkmc_init(&data.prefix(10).unwrap(), &hyper(2, 10, 0)).unwrap();
    let before = s.clone();
    assert!(orkmc_step(&mut s, &[&[1.0, 2.0]]).is_err());
    assert!(orkmc_step(&mut s, &[&[1.0], &[1.0, 2.0, 3.0]]).is_err());
    assert!(orkmc_step(&mut s, &[&[1.0, f64::INFINITY], &[1.0, 2.0, 3.0]]).is_err());
    assert_eq!(s, before);
}

#[test]
fn winner_center_moves_by_running_mean() {
    let mut r = rng(43);
    let data = random_dataset(&mut r, 30, 3, &[2], false);
    let mut s = orkmc_init(&data.prefix(12).unwrap(), &hyper(3, 12, 1)).unwrap();
    for i in 12..30 {
        let x = data.sample(0, i).to_vec();
        let old = s.centers().view(0).clone();
        let counts = s.counts().to_vec();
        orkmc_step(&mut s, &[&x]).unwrap();
        let winner = (0..3).find(|&c| s.counts()[c] == counts[c] + 1).unwrap();
        let n = s.counts()[winner] as f64;
        for c in 0..3 {
            for j in 0..2 {
                let want = if c == winner {
                    old[[c, j]] + (x[j] - old[[c, j]]) / n
                } else {
                    old[[c, j]]
                };
                assert!((s.centers().view(0)[[c, j]] - want).abs() < 1e-12);
            }
        }
        let u = s.u_rows();
        let last = u.row(s.t() - 1);
        assert_eq!(orkm::model::argmax(last.as_slice().unwrap()), winner);
    }
}

#[test]
fn frozen_state_keeps_centers() {
    let mut r = rng(44);
    let data = random_dataset(&mut r, 20, 2, &[2], false);
    let mut s = orkmc_init(&data.prefix(10).unwrap(), &hyper(2, 10, 0)).unwrap();
    s.freeze();
    let c = s.centers().clone();
    for i in 10..20 {
        orkmc_step(&mut s, &[data.sample(0, i)]).unwrap();
    }
    assert_eq!(s.centers(), &c);
    assert_eq!(s.t(), 20);
}

#[test]
fn whole_batch_as_prefix_skips_streaming() {
    let mut r = rng(45);
    let data = random_dataset(&mut r, 15, 2, &[2], false);
    let fit = orkmc_run(&data, &hyper(2, 15, 0), 1).unwrap();
    assert_eq!(fit.objective_trace.len(), 1);
    assert_eq!(fit.diagnostics.iterations, 0);
    assert_eq!(fit.labels().len(), 15);
}

#[test]
fn trace_has_one_entry_per_chunk() {
    let mut r = rng(46);
    let data = random_dataset(&mut r, 50, 3, &[2, 2], false);
    for chunk in [1, 3, 7, 40] {
        let mut calls = 0;
        let opts = StreamOptions {
            chunk_size: chunk,
            freeze_on_epsilon: true,
        };
        let fit = orkmc_run_with(&data, &hyper(3, 20, 2), opts, |_| calls += 1).unwrap();
        assert_eq!(fit.objective_trace.len(), 1 + 30_usize.div_ceil(chunk));
        assert_eq!(calls, fit.objective_trace.len());
    }
    let opts = StreamOptions {
        chunk_size: 0,
        freeze_on_epsilon: true,
    };
    assert!(orkmc_run_with(&data, &hyper(3, 20, 2), opts, |_| {}).is_err());
}

#[test]
fn streaming_objective_splits_into_fit_and_penalty() {
    let mut r = rng(47);
    let data = random_dataset(&mut r, 40, 3, &[2, 3], false);
    let h = hyper(3, 15, 3);
    let mut s = orkmc_init(&data.prefix(15).unwrap(), &h).unwrap();
    for i in 15..40 {
        let a: Vec<&[f64]> = (0..2).map(|v| data.sample(v, i)).collect();
        orkmc_step(&mut s, &a).unwrap();
        let fit: f64 = s
            .weights()
            .powered()
            .iter()
            .zip(s.residuals())
            .map(|(a, d)| a * d)
            .sum();
        let pen: f64 = s.u_rows().iter().map(|x| x * x).sum::<f64>() * h.eta;
        assert!((s.streaming_objective() - (fit + pen)).abs() <= 1e-9 * (fit + pen));
    }
}

#[test]
fn frozen_stream_objective_matches_batch_formula() {
    // Once centers are frozen the streamed residuals equal the batch ones.
    let mut r = rng(48);
    let data = random_dataset(&mut r, 30, 2, &[2], false);
    let h = hyper(2, 10, 0);
    let mut s = orkmc_init(&data.prefix(10).unwrap(), &h).unwrap();
    s.freeze();
    let d0 = s.residuals()[0];
    for i in 10..30 {
        orkmc_step(&mut s, &[data.sample(0, i)]).unwrap();
    }
    let tail = data.select_rows(&(10..30).collect::<Vec<_>>());
    let u = orkm::AssignmentMatrix::from_entries(s.u_rows().slice(ndarray::s![10.., ..]).to_owned());
    let w = ViewWeights::uniform(1, h.r);
    let batch = objective_online(&tail, &u, s.centers(), &w, 0.0).unwrap();
    assert!((s.residuals()[0] - d0 - batch).abs() < 1e-9 * batch.max(1.0));
}

#[test]
fn same_seed_same_stream() {
    let mut r = rng(49);
    let data = random_dataset(&mut r, 60, 3, &[2, 2], true);
    let mut a = orkmc_run(&data, &hyper(3, 20, 5), 1).unwrap();
    let mut b = orkmc_run(&data, &hyper(3, 20, 5), 1).unwrap();
    a.elapsed_seconds = 0.0;
    b.elapsed_seconds = 0.0;
    assert_eq!(a, b);
}

#[test]
fn work_per_step_is_bounded() {
    let mut r = rng(50);
    let data = random_dataset(&mut r, 400, 3, &[4], false);
    let mut s = orkmc_init(&data.prefix(20).unwrap(), &hyper(3, 20, 0)).unwrap();
    let mut first = None;
    for i in 20..400 {
        orkmc_step(&mut s, &[data.sample(0, i)]).unwrap();
        let w = s.work().last_step_ops;
        let f = *first.get_or_insert(w);
        assert!(w <= f, "step cost grew with t");
    }
    assert_eq!(s.work().steps, 380);
}

#[test]
fn prefix_rows_and_centers_respect_nonnegativity() {
    let mut r = rng(51);
    let data = random_dataset(&mut r, 30, 2, &[3], true);
    let s = orkmc_init_with(&data.prefix(12).unwrap(), &hyper(2, 12, 0), true).unwrap();
    assert!(s.centers().view(0).iter().all(|&x| x >= 0.0));
    assert!(s.validate().is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn state_stays_valid(seed in 0u64..10_000, k in 1usize..4, chunk in 1usize..5, r_exp in 0.2f64..3.0) {
        let mut rg = rng(seed);
        let data = random_dataset(&mut rg, 30, k, &[2, 1], seed % 2 == 1);
        let mut h = hyper(k, 10, seed);
        h.r = r_exp;
        let opts = StreamOptions { chunk_size: chunk, freeze_on_epsilon: true };
        let mut ok = true;
        let fit = orkmc_run_with(&data, &h, opts, |s| ok &= s.validate().is_empty()).unwrap();
        prop_assert!(ok);
        prop_assert!(validate(&fit).is_empty());
        prop_assert!(fit.objective_trace.iter().all(|x| x.is_finite() && *x >= 0.0));
        let w = fit.weights.alpha();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn footprint_ignores_history(n in 25usize..80) {
        let mut rg = rng(n as u64);
        let data = random_dataset(&mut rg, n, 2, &[3], false);
        let mut s = orkmc_init(&data.prefix(10).unwrap(), &hyper(2, 10, 0)).unwrap();
        let base = s.footprint() - 10 * 2;
        for i in 10..n {
            orkmc_step(&mut s, &[data.sample(0, i)]).unwrap();
        }
        // everything but the stored U rows is fixed size
        prop_assert_eq!(s.footprint() - n * 2, base);
    }
}
