//! Online multiplicative-update NMF clustering.
//!
//! Factors are updated with Lee-Seung ratios, so nonnegative inputs give
//! nonnegative factors with no projection. The center update reads only the
//! sufficient statistics `U^T X^v` and `U^T U`, which grow by one rank-one
//! term per arrival.

use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::model::{
    argmax, Algorithm, AssignmentMatrix, CenterSet, ClusterResult, Diagnostics, HyperParams, MultiViewDataset,
    ViewWeights,
};
use crate::rng::{seed_rows, Purpose};
use crate::scalar::Scalar;

/// Denominator guard of the multiplicative rules.
pub const OMU_DELTA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OmuConfig {
    /// Arrivals folded in per update round after the initial batch.
    pub chunk_size: usize,
}

impl Default for OmuConfig {
    fn default() -> Self {
        Self { chunk_size: 1 }
    }
}

/// `U <- U * (sum_v X^v M^vT) / (U sum_v M^v M^vT + delta)`.
pub fn omu_update_u<T: Scalar>(x: &[ArrayView2<'_, T>], u: &Array2<T>, m: &[Array2<T>]) -> Array2<T> {
    let delta = T::lit(OMU_DELTA);
    let mut num = Array2::<T>::zeros(u.raw_dim());
    let mut gram = Array2::<T>::zeros((u.ncols(), u.ncols()));
    for (xv, mv) in x.iter().zip(m) {
        num += &xv.dot(&mv.t());
        gram += &mv.dot(&mv.t());
    }
    let den = u.dot(&gram);
    let mut out = u.clone();
    ndarray::Zip::from(&mut out)
        .and(&num)
        .and(&den)
        .for_each(|o, &a, &b| *o = *o * a / (b + delta));
    out
}

/// `M^v <- M^v * A^v / (B M^v + delta)` with `A^v = U^T X^v`, `B = U^T U`.
pub fn omu_update_m<T: Scalar>(a: &[Array2<T>], b: &Array2<T>, m: &[Array2<T>]) -> Vec<Array2<T>> {
    let delta = T::lit(OMU_DELTA);
    a.iter()
        .zip(m)
        .map(|(av, mv)| {
            let den = b.dot(mv);
            let mut out = mv.clone();
            ndarray::Zip::from(&mut out)
                .and(av)
                .and(&den)
                .for_each(|o, &p, &q| *o = *o * p / (q + delta));
            out
        })
        .collect()
}

struct Stats<T> {
    a: Vec<Array2<T>>,
    b: Array2<T>,
    x_sq: T,
}

impl<T: Scalar> Stats<T> {
    fn new(k: usize, dims: &[usize]) -> Self {
        Self {
            a: dims.iter().map(|&j| Array2::zeros((k, j))).collect(),
            b: Array2::zeros((k, k)),
            x_sq: T::zero(),
        }
    }

    fn with(&self, x: &[ArrayView2<'_, T>], u: &Array2<T>) -> Self {
        Self {
            a: self.a.iter().zip(x).map(|(a, xv)| a + &u.t().dot(xv)).collect(),
            b: &self.b + &u.t().dot(u),
            x_sq: self.x_sq + x.iter().map(|xv| xv.iter().map(|&e| e * e).sum::<T>()).sum::<T>(),
        }
    }

    /// `sum_v ||X^v - U M^v||^2` over the rows folded in so far.
    fn error(&self, m: &[Array2<T>]) -> T {
        let mut e = self.x_sq;
        for (a, mv) in self.a.iter().zip(m) {
            let bm = self.b.dot(mv);
            let two = T::lit(2.0);
            e += ndarray::Zip::from(mv)
                .and(&bm)
                .and(a)
                .fold(T::zero(), |acc, &mm, &q, &p| acc + mm * q - two * mm * p);
        }
        e.max(T::zero())
    }
}

/// Online NMF clustering. Uses `k`, `chushi`, `max_iter` (multiplicative
/// rounds per update) and `seed`.
pub fn omu_fit<T: Scalar>(
    data: &MultiViewDataset<T>,
    hyper: &HyperParams,
    cfg: &OmuConfig,
) -> Result<ClusterResult<T>> {
    if cfg.chunk_size == 0 {
        return Err(Error::Config("chunk size must be at least 1".into()));
    }
    let n = data.n_samples();
    hyper.check(n)?;
    let t0 = hyper.initial_batch(n)?;
    let (data, shifted) = data.min_shifted();
    let started = Instant::now();
    let k = hyper.k;
    let dims = data.dims();

    let sel = seed_rows(data.views(), t0, k, hyper.seed, Purpose::CenterSeeding);
    let mut m: Vec<Array2<T>> = data.views().iter().map(|x| x.select(Axis(0), &sel.rows)).collect();
    let mut u_all = Array2::<T>::zeros((n, k));
    let mut stats = Stats::new(k, &dims);
    let mut trace = Vec::new();

    let mut start = 0;
    let mut end = t0;
    while start < n {
        let x: Vec<ArrayView2<'_, T>> = data
            .views()
            .iter()
            .map(|xv| xv.slice(ndarray::s![start..end, ..]))
            .collect();
        let mut u = Array2::<T>::from_elem((end - start, k), T::one() / T::from_usize_lossy(k));
        for _ in 0..hyper.max_iter {
            u = omu_update_u(&x, &u, &m);
            let tentative = stats.with(&x, &u);
            m = omu_update_m(&tentative.a, &tentative.b, &m);
            if start == 0 {
                trace.push(tentative.error(&m));
            }
        }
        stats = stats.with(&x, &u);
        if start > 0 {
            trace.push(stats.error(&m));
        }
        u_all.slice_mut(ndarray::s![start..end, ..]).assign(&u);
        start = end;
        end = (end + cfg.chunk_size).min(n);
    }
    let elapsed_seconds = started.elapsed().as_secs_f64();

    let mut diagnostics = Diagnostics {
        iterations: hyper.max_iter,
        ..Diagnostics::default()
    };
    if shifted {
        diagnostics
            .warnings
            .push("negative entries: data shifted by its minimum before factorizing".into());
    }
    let mut zero_rows = 0;
    for mut r in u_all.rows_mut() {
        let s: T = r.iter().copied().sum();
        if s > T::zero() && s.is_finite() {
            r.mapv_inplace(|x| x / s);
        } else {
            zero_rows += 1;
            r.fill(T::one() / T::from_usize_lossy(k));
        }
    }
    if zero_rows > 0 {
        diagnostics
            .warnings
            .push(format!("{zero_rows} all-zero indicator rows set to uniform"));
    }
    let labels: Vec<usize> = u_all
        .rows()
        .into_iter()
        .map(|r| argmax(r.as_slice().expect("row")))
        .collect();
    debug_assert_eq!(labels.len(), n);
    let mut result = ClusterResult {
        algorithm: Algorithm::Omu,
        assignment: AssignmentMatrix::from_entries(u_all),
        centers: CenterSet::new(m, true)?,
        weights: ViewWeights::uniform(data.n_views(), T::lit(hyper.r)),
        objective_trace: trace,
        elapsed_seconds,
        nmi: None,
        config: hyper.clone(),
        diagnostics,
    };
    result.score_against(data.labels());
    Ok(result)
}
