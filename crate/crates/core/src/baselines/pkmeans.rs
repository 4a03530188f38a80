//! Power K-means: majorization-minimization on the power mean of squared
//! distances, annealing the power from `s0` toward `s_min`.

use std::time::Instant;

use ndarray::Array2;

use super::{lloyd_assign, require_single_view, split_centers};
use crate::error::{Error, Result};
use crate::linalg::{row, sq_dist};
use crate::model::{
    Algorithm, AssignmentMatrix, ClusterResult, Diagnostics, HyperParams, MultiViewDataset, ViewWeights,
};
use crate::rng::{seed_rows, Purpose};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSchedule {
    pub s0: f64,
    pub step_factor: f64,
    pub s_min: f64,
}

impl Default for PowerSchedule {
    fn default() -> Self {
        Self {
            s0: -1.0,
            step_factor: 1.1,
            s_min: -100.0,
        }
    }
}

impl PowerSchedule {
    pub fn check(&self) -> Result<()> {
        if !(self.s0 < 0.0) || !(self.step_factor > 1.0) || !(self.s_min <= self.s0) {
            return Err(Error::Config(format!(
                "power schedule needs s_min <= s0 < 0 and step_factor > 1, got {self:?}"
            )));
        }
        Ok(())
    }

    fn next(&self, s: f64) -> f64 {
        (s * self.step_factor).max(self.s_min)
    }
}

/// Squared distances scaled by their row minimum, with the limit taken for
/// zero distances: zero-distance clusters get ratio 1, the rest infinity.
fn ratios<T: Scalar>(d: &[T]) -> (T, Vec<T>) {
    let dmin = d.iter().copied().fold(T::infinity(), T::min);
    let rho = if dmin > T::zero() {
        d.iter().map(|&x| x / dmin).collect()
    } else {
        d.iter()
            .map(|&x| if x > T::zero() { T::infinity() } else { T::one() })
            .collect()
    };
    (dmin, rho)
}

/// MM weights `dM_s/dd_k = K^-1 d_k^(s-1) (K^-1 sum_l d_l^s)^(1/s - 1)`.
/// They are scale free in `d`, so they are computed on the ratios.
pub fn power_weights<T: Scalar>(d: &[T], s: T) -> Vec<T> {
    let k = T::from_usize_lossy(d.len());
    let (_, rho) = ratios(d);
    let mean: T = rho.iter().map(|&r| r.powf(s)).sum::<T>() / k;
    let scale = mean.powf(T::one() / s - T::one()) / k;
    rho.iter().map(|&r| r.powf(s - T::one()) * scale).collect()
}

fn power_mean<T: Scalar>(d: &[T], s: T) -> T {
    let k = T::from_usize_lossy(d.len());
    let (dmin, rho) = ratios(d);
    if dmin == T::zero() {
        return T::zero();
    }
    let mean: T = rho.iter().map(|&r| r.powf(s)).sum::<T>() / k;
    dmin * mean.powf(T::one() / s)
}

fn distances<T: Scalar>(x: &Array2<T>, centers: &Array2<T>, i: usize) -> Vec<T> {
    (0..centers.nrows())
        .map(|c| sq_dist(row(x, i), row(centers, c)))
        .collect()
}

/// `sum_i M_s(d_i1, ..., d_iK)`.
pub fn power_objective<T: Scalar>(x: &Array2<T>, centers: &Array2<T>, s: T) -> T {
    let x = &x.as_standard_layout().into_owned();
    let centers = &centers.as_standard_layout().into_owned();
    (0..x.nrows()).map(|i| power_mean(&distances(x, centers, i), s)).sum()
}

/// One MM update at fixed `s`: centers become weighted means. A center
/// whose total weight vanishes keeps its position.
pub fn pkmeans_mm_step<T: Scalar>(x: &Array2<T>, centers: &Array2<T>, s: T) -> Array2<T> {
    let x = &x.as_standard_layout().into_owned();
    let centers = &centers.as_standard_layout().into_owned();
    let k = centers.nrows();
    let mut sums = Array2::<T>::zeros(centers.raw_dim());
    let mut mass = vec![T::zero(); k];
    for i in 0..x.nrows() {
        let w = power_weights(&distances(x, centers, i), s);
        for (c, &wc) in w.iter().enumerate() {
            if wc > T::zero() {
                mass[c] += wc;
                for (acc, &v) in sums.row_mut(c).iter_mut().zip(row(x, i)) {
                    *acc += wc * v;
                }
            }
        }
    }
    let mut next = centers.clone();
    for c in 0..k {
        if mass[c] > T::zero() && mass[c].is_finite() {
            next.row_mut(c).assign(&sums.row(c).mapv(|v| v / mass[c]));
        }
    }
    next
}

/// Power K-means on a single view. Uses `k`, `max_iter`, `epsilon`, `seed`.
pub fn pkmeans_fit<T: Scalar>(
    data: &MultiViewDataset<T>,
    hyper: &HyperParams,
    schedule: &PowerSchedule,
) -> Result<ClusterResult<T>> {
    require_single_view(data, "pkmeans")?;
    schedule.check()?;
    let n = data.n_samples();
    hyper.check(n)?;
    let started = Instant::now();
    let x = data.view(0);
    let sel = seed_rows(data.views(), n, hyper.k, hyper.seed, Purpose::CenterSeeding);
    let mut centers = x.select(ndarray::Axis(0), &sel.rows);
    let epsilon = T::lit(hyper.epsilon);
    let mut s = schedule.s0;
    let mut trace = vec![power_objective(x, &centers, T::lit(s))];
    let mut diagnostics = Diagnostics::default();
    for it in 1..=hyper.max_iter {
        let next = pkmeans_mm_step(x, &centers, T::lit(s));
        let change = next
            .iter()
            .zip(centers.iter())
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt();
        centers = next;
        trace.push(power_objective(x, &centers, T::lit(s)));
        diagnostics.iterations = it;
        if s <= schedule.s_min && change <= epsilon {
            diagnostics.converged = true;
            break;
        }
        s = schedule.next(s);
    }
    let elapsed_seconds = started.elapsed().as_secs_f64();

    let labels = lloyd_assign(x, &centers);
    let mut soft = Array2::<T>::zeros((n, hyper.k));
    for i in 0..n {
        let w = power_weights(&distances(x, &centers, i), T::lit(s));
        let total: T = w.iter().copied().sum();
        for (c, &wc) in w.iter().enumerate() {
            soft[[i, c]] = wc / total;
        }
        // Keep the soft argmax consistent with the nearest center.
        let top = soft.row(i).iter().copied().fold(T::zero(), T::max);
        if soft[[i, labels[i]]] < top {
            soft.row_mut(i).fill(T::zero());
            soft[[i, labels[i]]] = T::one();
        }
    }
    let assignment = AssignmentMatrix::from_entries(soft);
    let nonneg = data.min_value() >= T::zero();
    let mut result = ClusterResult {
        algorithm: Algorithm::Pkmeans,
        assignment,
        centers: split_centers(&centers, &data.dims(), nonneg)?,
        weights: ViewWeights::uniform(1, T::lit(hyper.r)),
        objective_trace: trace,
        elapsed_seconds,
        nmi: None,
        config: hyper.clone(),
        diagnostics,
    };
    if sel.duplicates {
        result
            .diagnostics
            .warnings
            .push("fewer than K distinct rows: duplicate centers".into());
    }
    result.score_against(data.labels());
    Ok(result)
}
