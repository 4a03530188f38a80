//! Online gradient descent K-means (MacQueen-style sequential updates).

use std::time::Instant;

use ndarray::Array2;

use super::{nearest, require_single_view, split_centers, sse};
use crate::error::{Error, Result};
use crate::linalg::row;
use crate::model::{
    Algorithm, AssignmentMatrix, ClusterResult, Diagnostics, HyperParams, MultiViewDataset, ViewWeights,
};
use crate::rng::{seed_rows, Purpose};
use crate::scalar::Scalar;

/// Learning rate applied to the winning center.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum GammaSchedule {
    /// `1 / (n_k + 1)`, which keeps each center at the running mean of its
    /// arrivals.
    #[default]
    RunningMean,
    Constant(f64),
}

/// Seeds K centers from the first `chushi` rows (k-means++), then streams
/// every row in order: nearest center wins and moves toward the sample.
pub fn ogd_fit<T: Scalar>(
    data: &MultiViewDataset<T>,
    hyper: &HyperParams,
    schedule: GammaSchedule,
) -> Result<ClusterResult<T>> {
    require_single_view(data, "ogd")?;
    let n = data.n_samples();
    hyper.check(n)?;
    if let GammaSchedule::Constant(g) = schedule {
        if !(g > 0.0 && g <= 1.0) {
            return Err(Error::Config(format!("constant gamma must be in (0, 1], got {g}")));
        }
    }
    let t0 = hyper.initial_batch(n)?;
    let started = Instant::now();
    let x = data.view(0);
    let sel = seed_rows(data.views(), t0, hyper.k, hyper.seed, Purpose::CenterSeeding);
    let mut centers: Array2<T> = x.select(ndarray::Axis(0), &sel.rows);
    let mut counts = vec![1usize; hyper.k];
    let mut seed_of = vec![None; n];
    for (c, &r) in sel.rows.iter().enumerate() {
        seed_of[r] = Some(c);
    }
    let nonneg = data.min_value() >= T::zero();
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let xi = row(x, i);
        // A seed row belongs to its own center and does not move it again.
        if let Some(c) = seed_of[i] {
            labels.push(c);
            continue;
        }
        let (k_star, _) = nearest(xi, &centers);
        labels.push(k_star);
        let rate = match schedule {
            GammaSchedule::RunningMean => T::one() / T::from_usize_lossy(counts[k_star] + 1),
            GammaSchedule::Constant(g) => T::lit(g),
        };
        counts[k_star] += 1;
        for (c, &v) in centers.row_mut(k_star).iter_mut().zip(xi) {
            *c += rate * (v - *c);
        }
    }
    let elapsed_seconds = started.elapsed().as_secs_f64();
    let mut diagnostics = Diagnostics {
        iterations: n - sel.rows.len(),
        converged: true,
        ..Diagnostics::default()
    };
    if sel.duplicates {
        diagnostics
            .warnings
            .push("fewer than K distinct rows: duplicate centers".into());
    }
    let mut result = ClusterResult {
        algorithm: Algorithm::Ogd,
        assignment: AssignmentMatrix::one_hot(&labels, hyper.k),
        centers: split_centers(&centers, &data.dims(), nonneg)?,
        weights: ViewWeights::uniform(1, T::lit(hyper.r)),
        objective_trace: vec![sse(x, &centers, &labels)],
        elapsed_seconds,
        nmi: None,
        config: hyper.clone(),
        diagnostics,
    };
    result.score_against(data.labels());
    Ok(result)
}
