//! Lloyd K-means on the column-concatenated views.

use std::time::Instant;

use ndarray::Array2;

use super::{nearest, split_centers};
use crate::error::Result;
use crate::linalg::row;
use crate::model::{
    Algorithm, AssignmentMatrix, ClusterResult, Diagnostics, HyperParams, MultiViewDataset, ViewWeights,
};
use crate::rng::{seed_rows, Purpose};
use crate::scalar::Scalar;

/// Nearest-center labels (lowest index on ties).
pub fn lloyd_assign<T: Scalar>(x: &Array2<T>, centers: &Array2<T>) -> Vec<usize> {
    let x = x.as_standard_layout();
    let centers = centers.as_standard_layout();
    (0..x.nrows()).map(|i| nearest(row(&x, i), &centers).0).collect()
}

/// Within-cluster sum of squares.
pub fn sse<T: Scalar>(x: &Array2<T>, centers: &Array2<T>, labels: &[usize]) -> T {
    let x = x.as_standard_layout();
    let centers = centers.as_standard_layout();
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| crate::linalg::sq_dist(row(&x, i), row(&centers, l)))
        .sum()
}

#[derive(Debug, Clone)]
pub struct LloydRun<T> {
    pub labels: Vec<usize>,
    pub centers: Array2<T>,
    /// SSE after every center update.
    pub sse_trace: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    pub reseeds: usize,
}

/// Lloyd iterations from explicit starting centers.
pub fn lloyd_run<T: Scalar>(x: &Array2<T>, init: Array2<T>, max_iter: usize, epsilon: T) -> LloydRun<T> {
    let k = init.nrows();
    let x = &x.as_standard_layout().into_owned();
    let mut centers = init.as_standard_layout().into_owned();
    let mut labels = lloyd_assign(x, &centers);
    let mut trace = vec![sse(x, &centers, &labels)];
    let mut converged = false;
    let mut reseeds = 0;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let mut sums = Array2::<T>::zeros(centers.raw_dim());
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, &v) in sums.row_mut(l).iter_mut().zip(row(x, i)) {
                *s += v;
            }
        }
        let mut next = centers.clone();
        for c in 0..k {
            if counts[c] > 0 {
                let n = T::from_usize_lossy(counts[c]);
                next.row_mut(c).assign(&sums.row(c).mapv(|s| s / n));
            }
        }
        // Empty clusters jump to the point farthest from its own center.
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..x.nrows())
                    .map(|i| (crate::linalg::sq_dist(row(x, i), row(&next, labels[i])), i))
                    .fold((T::neg_infinity(), 0), |a, b| if b.0 > a.0 { b } else { a })
                    .1;
                next.row_mut(c).assign(&x.row(far));
                reseeds += 1;
            }
        }
        let change = next
            .iter()
            .zip(centers.iter())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt();
        centers = next;
        trace.push(sse(x, &centers, &labels));
        let relabeled = lloyd_assign(x, &centers);
        let fixpoint = relabeled == labels;
        labels = relabeled;
        if fixpoint || change <= epsilon {
            converged = true;
            break;
        }
    }
    LloydRun {
        labels,
        centers,
        sse_trace: trace,
        iterations,
        converged,
        reseeds,
    }
}

/// Lloyd K-means seeded by k-means++ on the concatenated views. Uses `k`,
/// `max_iter`, `epsilon` and `seed` from `hyper`.
pub fn kmeans_fit<T: Scalar>(data: &MultiViewDataset<T>, hyper: &HyperParams) -> Result<ClusterResult<T>> {
    let n = data.n_samples();
    hyper.check(n)?;
    let started = Instant::now();
    let x = data.concatenated();
    let sel = seed_rows(data.views(), n, hyper.k, hyper.seed, Purpose::CenterSeeding);
    let init = x.select(ndarray::Axis(0), &sel.rows);
    let run = lloyd_run(&x, init, hyper.max_iter, T::lit(hyper.epsilon));
    let elapsed_seconds = started.elapsed().as_secs_f64();

    let mut diagnostics = Diagnostics {
        iterations: run.iterations,
        converged: run.converged,
        ..Diagnostics::default()
    };
    if sel.duplicates {
        diagnostics
            .warnings
            .push("fewer than K distinct rows: duplicate centers".into());
    }
    if run.reseeds > 0 {
        diagnostics
            .warnings
            .push(format!("{} empty-cluster re-seeds", run.reseeds));
    }
    let nonneg = data.min_value() >= T::zero();
    let mut result = ClusterResult {
        algorithm: Algorithm::Kmeans,
        assignment: AssignmentMatrix::one_hot(&run.labels, hyper.k),
        centers: split_centers(&run.centers, &data.dims(), nonneg)?,
        weights: ViewWeights::uniform(data.n_views(), T::lit(hyper.r)),
        objective_trace: run.sse_trace,
        elapsed_seconds,
        nmi: None,
        config: hyper.clone(),
        diagnostics,
    };
    result.score_against(data.labels());
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn one_cluster_is_the_mean() {
        let data = MultiViewDataset::single_view(array![[1.0_f64, 0.0], [3.0, 2.0], [5.0, 1.0]], None).unwrap();
        let res = kmeans_fit(&data, &HyperParams::with_k(1)).unwrap();
        let c = res.centers.view(0);
        assert!((c[[0, 0]] - 3.0).abs() < 1e-15 && (c[[0, 1]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn separated_pairs() {
        let data =
            MultiViewDataset::single_view(array![[0.0_f64], [0.1], [10.0], [10.1]], Some(vec![0, 0, 1, 1])).unwrap();
        let res = kmeans_fit(&data, &HyperParams::with_k(2)).unwrap();
        assert_eq!(res.nmi, Some(1.0));
    }
}
