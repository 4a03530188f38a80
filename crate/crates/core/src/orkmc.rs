//! Online regularized K-means (`ORKMeans`).
//!
//! A batch of `chushi` samples seeds the state; every later sample gets its
//! own indicator row by a few projected-gradient steps on the weighted
//! per-row objective, then moves its winning center by a running-mean step
//! and refreshes the view weights from cumulative residuals. Earlier rows
//! are never revisited, so a step costs `O(K * sum_v J_v + n_grad * V * K^2)`
//! no matter how many samples came before.

use std::time::Instant;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::kernels::{project_into, RowQp};
use crate::linalg::{dot, gram_rows, row};
use crate::model::{
    argmax, Algorithm, AssignmentMatrix, CenterSet, ClusterResult, Diagnostics, HyperParams, MultiViewDataset,
    ViewWeights,
};
use crate::rng::{seed_rows, Purpose};
use crate::scalar::Scalar;
use crate::validate::{validate_centers, validate_weights, Violation};

/// Multiply-add counts, used to check that per-step work does not grow with
/// the stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkCounters {
    pub steps: u64,
    pub last_step_ops: u64,
    pub max_step_ops: u64,
    pub total_ops: u64,
}

impl WorkCounters {
    fn record(&mut self, ops: u64) {
        self.steps += 1;
        self.last_step_ops = ops;
        self.max_step_ops = self.max_step_ops.max(ops);
        self.total_ops += ops;
    }
}

/// Streaming solver state. Mutated in place, one arrival at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineState<T> {
    t: usize,
    k: usize,
    u_rows: Vec<T>,
    centers: CenterSet<T>,
    weights: ViewWeights<T>,
    counts: Vec<usize>,
    residuals: Vec<T>,
    // M^v M^vT per view, kept in sync with the centers.
    grams: Vec<Array2<T>>,
    u_sq_sum: T,
    frozen: bool,
    hyper: HyperParams,
    work: WorkCounters,
}

impl<T: Scalar> OnlineState<T> {
    /// Samples processed so far (including the initial batch).
    pub fn t(&self) -> usize {
        self.t
    }

    /// Indicator rows of every processed sample, `t x K`.
    pub fn u_rows(&self) -> ndarray::ArrayView2<'_, T> {
        ndarray::ArrayView2::from_shape((self.t, self.k), &self.u_rows).expect("t*K entries")
    }

    pub fn centers(&self) -> &CenterSet<T> {
        &self.centers
    }

    pub fn weights(&self) -> &ViewWeights<T> {
        &self.weights
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Cumulative per-view residuals `D_v`.
    pub fn residuals(&self) -> &[T] {
        &self.residuals
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hyper
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn work(&self) -> WorkCounters {
        self.work
    }

    /// Stops center updates; later arrivals are still assigned, counted and
    /// folded into the weights.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    /// `sum_v alpha_v^r D_v + eta * sum_i ||u_i||^2` with the residual of each
    /// row measured against the centers in force when it arrived.
    pub fn streaming_objective(&self) -> T {
        let fit: T = self
            .weights
            .powered()
            .iter()
            .zip(&self.residuals)
            .map(|(&a, &d)| a * d)
            .sum();
        fit + T::lit(self.hyper.eta) * self.u_sq_sum
    }

    /// Number of scalars held, independent of anything but `t`, K and the
    /// view widths.
    pub fn footprint(&self) -> usize {
        self.u_rows.len()
            + self.centers.views().iter().map(|c| c.len()).sum::<usize>()
            + self.grams.iter().map(|g| g.len()).sum::<usize>()
            + self.counts.len()
            + 2 * self.residuals.len()
    }

    /// Invariant violations; empty when the state is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.u_rows.len() != self.t * self.k {
            out.push(Violation::new("u-rows-length", vec![self.t]));
        }
        if self.counts.iter().sum::<usize>() != self.t {
            out.push(Violation::new("count-sum", vec![self.t]));
        }
        for (i, r) in self.u_rows.chunks(self.k.max(1)).enumerate() {
            let s: T = r.iter().copied().sum();
            if r.iter().any(|&x| !(x >= T::lit(-1e-12))) {
                out.push(Violation::new("row-nonneg", vec![i]));
            }
            if (s - T::one()).abs() > T::slack() {
                out.push(Violation::new("row-sum", vec![i]));
            }
        }
        validate_centers(&self.centers, &mut out);
        validate_weights(&self.weights, &mut out);
        out
    }

    fn check_arrival(&self, arrival: &[&[T]]) -> Result<()> {
        if arrival.len() != self.centers.n_views() {
            return Err(Error::Dimension(format!(
                "arrival has {} views, state has {}",
                arrival.len(),
                self.centers.n_views()
            )));
        }
        for (v, (x, c)) in arrival.iter().zip(self.centers.views()).enumerate() {
            if x.len() != c.ncols() {
                return Err(Error::Dimension(format!(
                    "view {} of the arrival has {} features, expected {}",
                    v + 1,
                    x.len(),
                    c.ncols()
                )));
            }
            if x.iter().any(|a| !a.is_finite()) {
                return Err(Error::Validation(format!(
                    "non-finite value in view {} of the arrival",
                    v + 1
                )));
            }
        }
        Ok(())
    }

    /// Per-row problem `sum_v w_v ||x^v - u M^v||^2 + eta ||u||^2` in the
    /// QP form `0.5 u^T H u - c^T u`.
    fn row_problem(&self, arrival: &[&[T]]) -> Result<RowQp<T>> {
        let k = self.k;
        let w = self.weights.powered();
        let eta = T::lit(self.hyper.eta);
        let mut h = Array2::<T>::zeros((k, k));
        let mut c = vec![T::zero(); k];
        for (v, &wv) in w.iter().enumerate() {
            h.scaled_add(wv, &self.grams[v]);
            let m = self.centers.view(v);
            for (l, cl) in c.iter_mut().enumerate() {
                *cl += wv * dot(row(m, l), arrival[v]);
            }
        }
        for a in 0..k {
            h[[a, a]] += eta;
        }
        h.mapv_inplace(|x| x + x);
        c.iter_mut().for_each(|x| *x = *x + *x);
        RowQp::new(h, c)
    }

    fn step_size(&self, qp: &RowQp<T>) -> Option<T> {
        match self.hyper.gamma {
            Some(g) => Some(T::lit(g)),
            None if qp.lipschitz() > T::zero() => Some(T::one() / qp.lipschitz()),
            None => None,
        }
    }

    fn inner_steps(&self) -> usize {
        self.hyper.n_grad.min(self.hyper.max_iter)
    }

    /// Projected-gradient steps from the uniform row.
    fn assign(&self, arrival: &[&[T]]) -> Result<Vec<T>> {
        let qp = self.row_problem(arrival)?;
        let k = self.k;
        let mut u = vec![T::one() / T::from_usize_lossy(k); k];
        if let Some(gamma) = self.step_size(&qp) {
            let mut g = vec![T::zero(); k];
            let mut y = vec![T::zero(); k];
            for _ in 0..self.inner_steps() {
                qp.gradient_into(&u, &mut g);
                for i in 0..k {
                    y[i] = u[i] - gamma * g[i];
                }
                project_into(&y, &mut u);
            }
        }
        Ok(u)
    }

    fn sq_residual(&self, v: usize, x: &[T], u: &[T]) -> T {
        let m = self.centers.view(v);
        let mut total = T::zero();
        for (j, &xj) in x.iter().enumerate() {
            let recon = u.iter().enumerate().fold(T::zero(), |a, (l, &w)| a + w * m[[l, j]]);
            total += (xj - recon) * (xj - recon);
        }
        total
    }

    fn refresh_gram_row(&mut self, v: usize, k_star: usize) {
        let m = self.centers.view(v);
        let mk = row(m, k_star);
        for l in 0..self.k {
            let d = dot(mk, row(m, l));
            self.grams[v][[k_star, l]] = d;
            self.grams[v][[l, k_star]] = d;
        }
    }

    fn refresh_weights(&mut self) {
        let alpha = view_weights(&self.residuals, T::lit(self.hyper.r));
        self.weights.set_alpha(alpha);
    }
}

/// Closed-form weights `alpha_v ∝ D_v^(1/(1-r))`; uniform for `r = 1`. When
/// some `D_v` is zero the whole mass is split over the zero-residual views.
pub fn view_weights<T: Scalar>(residuals: &[T], r: T) -> Vec<T> {
    let v = residuals.len();
    if v == 0 {
        return Vec::new();
    }
    let uniform = || vec![T::one() / T::from_usize_lossy(v); v];
    if r == T::one() {
        return uniform();
    }
    let zeros = residuals.iter().filter(|&&d| d <= T::zero()).count();
    if zeros > 0 {
        let share = T::one() / T::from_usize_lossy(zeros);
        return residuals
            .iter()
            .map(|&d| if d <= T::zero() { share } else { T::zero() })
            .collect();
    }
    // Log domain keeps D^(1/(1-r)) from overflowing for r near 1.
    let expo = T::one() / (T::one() - r);
    let logs: Vec<T> = residuals.iter().map(|&d| d.ln() * expo).collect();
    let top = logs.iter().copied().fold(T::neg_infinity(), T::max);
    let raw: Vec<T> = logs.iter().map(|&l| (l - top).exp()).collect();
    let total: T = raw.iter().copied().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Builds the state from the initial batch. Centers start at K prefix rows
/// picked by k-means++ seeding. Each prefix row then gets the same
/// projected-gradient treatment as a later arrival, the centers move to the
/// means of their hard-assigned prefix rows, and this repeats (at most
/// `max_iter` rounds) until the batch labels settle. Weights stay at 1/V.
pub fn orkmc_init<T: Scalar>(prefix: &MultiViewDataset<T>, hyper: &HyperParams) -> Result<OnlineState<T>> {
    let nonneg = prefix.min_value() >= T::zero();
    orkmc_init_with(prefix, hyper, nonneg)
}

pub fn orkmc_init_with<T: Scalar>(
    prefix: &MultiViewDataset<T>,
    hyper: &HyperParams,
    enforce_nonneg: bool,
) -> Result<OnlineState<T>> {
    let t0 = prefix.n_samples();
    if t0 < hyper.k {
        return Err(Error::Config(format!("chushi = {t0} is smaller than K = {}", hyper.k)));
    }
    hyper.check(t0)?;
    let k = hyper.k;
    let n_views = prefix.n_views();
    let sel = seed_rows(prefix.views(), t0, k, hyper.seed, Purpose::CenterSeeding);
    let centers = CenterSet::from_rows(prefix, &sel.rows, enforce_nonneg);
    let grams = centers.views().iter().map(gram_rows).collect();
    let mut state = OnlineState {
        t: 0,
        k,
        u_rows: Vec::with_capacity(t0 * k),
        centers,
        weights: ViewWeights::uniform(n_views, T::lit(hyper.r)),
        counts: vec![0; k],
        residuals: vec![T::zero(); n_views],
        grams,
        u_sq_sum: T::zero(),
        frozen: false,
        hyper: hyper.clone(),
        work: WorkCounters::default(),
    };

    // Warm start: assign the batch, move centers to the means of their hard
    // members, and repeat until the labels settle.
    let rounds = hyper.max_iter.max(1);
    let mut labels: Vec<usize> = Vec::new();
    for _ in 0..rounds {
        let mut rows = Vec::with_capacity(t0 * k);
        let mut next = Vec::with_capacity(t0);
        for i in 0..t0 {
            let arrival: Vec<&[T]> = (0..n_views).map(|v| prefix.sample(v, i)).collect();
            let u = state.assign(&arrival)?;
            next.push(argmax(&u));
            rows.extend_from_slice(&u);
        }
        let settled = next == labels;
        state.u_rows = rows;
        labels = next;
        state.counts = vec![0; k];
        for &l in &labels {
            state.counts[l] += 1;
        }
        let mut moved = false;
        for v in 0..n_views {
            let mut sums = Array2::<T>::zeros(state.centers.view(v).raw_dim());
            for (i, &l) in labels.iter().enumerate() {
                for (s, &x) in sums.row_mut(l).iter_mut().zip(prefix.sample(v, i)) {
                    *s += x;
                }
            }
            let m = state.centers.view_mut(v);
            for c in 0..k {
                if state.counts[c] > 0 {
                    let n = T::from_usize_lossy(state.counts[c]);
                    let mean = sums.row(c).mapv(|s| s / n);
                    moved |= mean.iter().zip(m.row(c)).any(|(a, b)| a != b);
                    m.row_mut(c).assign(&mean);
                }
            }
            if enforce_nonneg {
                m.mapv_inplace(|x| x.max(T::zero()));
            }
            state.grams[v] = gram_rows(state.centers.view(v));
        }
        if settled || !moved {
            break;
        }
    }
    state.t = t0;
    state.u_sq_sum = state.u_rows.iter().map(|&x| x * x).sum();
    for i in 0..t0 {
        let u = state.u_rows[i * k..(i + 1) * k].to_vec();
        for v in 0..n_views {
            let r = state.sq_residual(v, prefix.sample(v, i), &u);
            state.residuals[v] += r;
        }
    }
    Ok(state)
}

/// Processes one arrival (one sample per view). A rejected arrival leaves the
/// state untouched.
pub fn orkmc_step<T: Scalar>(state: &mut OnlineState<T>, arrival: &[&[T]]) -> Result<()> {
    state.check_arrival(arrival)?;
    let k = state.k;
    let n_views = arrival.len();
    let u = state.assign(arrival)?;

    for (v, x) in arrival.iter().enumerate() {
        let r = state.sq_residual(v, x, &u);
        state.residuals[v] += r;
    }
    let k_star = argmax(&u);
    state.counts[k_star] += 1;
    if !state.frozen {
        let rate = T::one() / T::from_usize_lossy(state.counts[k_star]);
        let nonneg = state.centers.nonneg_enforced();
        for (v, x) in arrival.iter().enumerate() {
            let m = state.centers.view_mut(v);
            for (c, &xj) in m.row_mut(k_star).iter_mut().zip(x.iter()) {
                *c += rate * (xj - *c);
                if nonneg && *c < T::zero() {
                    *c = T::zero();
                }
            }
            state.refresh_gram_row(v, k_star);
        }
    }
    state.refresh_weights();
    state.u_sq_sum += u.iter().map(|&x| x * x).sum::<T>();
    state.u_rows.extend_from_slice(&u);
    state.t += 1;

    let width: usize = arrival.iter().map(|x| x.len()).sum();
    let (k64, w64, v64) = (k as u64, width as u64, n_views as u64);
    let ops = k64 * w64 * 4 + v64 * k64 * k64 + state.inner_steps() as u64 * k64 * k64;
    state.work.record(ops);
    Ok(())
}

/// Options for [`orkmc_run_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamOptions {
    /// Arrivals per reporting chunk. The math is per sample either way.
    pub chunk_size: usize,
    /// Freeze centers once a whole chunk moves them by at most epsilon.
    pub freeze_on_epsilon: bool,
}

impl Default for StreamOptions {
    fn default() -> Self {
        Self {
            chunk_size: 1,
            freeze_on_epsilon: true,
        }
    }
}

/// Streams `data` in row order: rows `0..chushi` seed the state, the rest
/// arrive one by one.
pub fn orkmc_run<T: Scalar>(
    data: &MultiViewDataset<T>,
    hyper: &HyperParams,
    chunk_size: usize,
) -> Result<ClusterResult<T>> {
    orkmc_run_with(
        data,
        hyper,
        StreamOptions {
            chunk_size,
            ..StreamOptions::default()
        },
        |_| {},
    )
}

/// [`orkmc_run`] with a callback after the initial batch and after every
/// chunk.
pub fn orkmc_run_with<T, F>(
    data: &MultiViewDataset<T>,
    hyper: &HyperParams,
    opts: StreamOptions,
    mut progress: F,
) -> Result<ClusterResult<T>>
where
    T: Scalar,
    F: FnMut(&OnlineState<T>),
{
    if opts.chunk_size == 0 {
        return Err(Error::Config("chunk size must be at least 1".into()));
    }
    let n = data.n_samples();
    hyper.check(n)?;
    let t0 = hyper.initial_batch(n)?;
    let started = Instant::now();
    let nonneg = data.min_value() >= T::zero();
    let mut state = orkmc_init_with(&data.prefix(t0)?, hyper, nonneg)?;
    let mut trace = vec![state.streaming_objective()];
    progress(&state);

    let epsilon = T::lit(hyper.epsilon);
    let mut frozen_at = None;
    let mut start = t0;
    while start < n {
        let end = (start + opts.chunk_size).min(n);
        let before = state.centers.clone();
        for i in start..end {
            let arrival: Vec<&[T]> = (0..data.n_views()).map(|v| data.sample(v, i)).collect();
            orkmc_step(&mut state, &arrival)?;
        }
        if opts.freeze_on_epsilon && !state.frozen && state.centers.max_change(&before) <= epsilon {
            state.freeze();
            frozen_at = Some(end);
        }
        trace.push(state.streaming_objective());
        progress(&state);
        start = end;
    }
    let elapsed_seconds = started.elapsed().as_secs_f64();

    let mut diagnostics = Diagnostics {
        iterations: n - t0,
        converged: frozen_at.is_some(),
        ..Diagnostics::default()
    };
    if let Some(t) = frozen_at {
        diagnostics
            .warnings
            .push(format!("centers frozen after {t} samples (drift <= epsilon)"));
    }
    let weights = state.weights.clone();
    let centers = state.centers.clone();
    let entries = state.u_rows().to_owned();
    let mut result = ClusterResult {
        algorithm: Algorithm::Orkmc,
        assignment: AssignmentMatrix::from_entries(entries),
        centers,
        weights,
        objective_trace: trace,
        elapsed_seconds,
        nmi: None,
        config: hyper.clone(),
        diagnostics,
    };
    result.score_against(data.labels());
    Ok(result)
}
