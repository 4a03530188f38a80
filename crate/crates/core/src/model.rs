//! Shared data types: datasets, assignments, centers, view weights,
//! hyperparameters and fit results.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// V aligned views of the same N samples, with optional ground truth.
///
/// Labels are stored 0-based; the file formats use 1-based ids.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset<T> {
    views: Vec<Array2<T>>,
    labels: Option<Vec<usize>>,
    name: String,
}

impl<T: Scalar> MultiViewDataset<T> {
    pub fn new(views: Vec<Array2<T>>, labels: Option<Vec<usize>>, name: impl Into<String>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Validation("dataset needs at least one view".into()));
        }
        let n = views[0].nrows();
        if n == 0 {
            return Err(Error::Validation("dataset has no samples".into()));
        }
        let mut std_views = Vec::with_capacity(views.len());
        for (v, m) in views.into_iter().enumerate() {
            if m.nrows() != n {
                return Err(Error::Dimension(format!(
                    "view {} has {} rows, view 1 has {n}",
                    v + 1,
                    m.nrows()
                )));
            }
            if m.ncols() == 0 {
                return Err(Error::Validation(format!("view {} has no columns", v + 1)));
            }
            if let Some(((i, j), _)) = m.indexed_iter().find(|(_, x)| !x.is_finite()) {
                return Err(Error::Validation(format!(
                    "view {} entry ({}, {}) is not finite",
                    v + 1,
                    i + 1,
                    j + 1
                )));
            }
            std_views.push(m.as_standard_layout().into_owned());
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Dimension(format!("{} labels for {n} samples", l.len())));
            }
        }
        Ok(Self {
            views: std_views,
            labels,
            name: name.into(),
        })
    }

    pub fn single_view(x: Array2<T>, labels: Option<Vec<usize>>) -> Result<Self> {
        Self::new(vec![x], labels, "data")
    }

    pub fn views(&self) -> &[Array2<T>] {
        &self.views
    }

    pub fn view(&self, v: usize) -> &Array2<T> {
        &self.views[v]
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_samples(&self) -> usize {
        self.views[0].nrows()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(|m| m.ncols()).collect()
    }

    pub fn min_value(&self) -> T {
        self.views
            .iter()
            .flat_map(|m| m.iter())
            .fold(T::infinity(), |a, &b| a.min(b))
    }

    /// Row `i` of view `v` as a slice.
    pub fn sample(&self, v: usize, i: usize) -> &[T] {
        crate::linalg::row(&self.views[v], i)
    }

    /// The first `t` samples.
    pub fn prefix(&self, t: usize) -> Result<Self> {
        if t == 0 || t > self.n_samples() {
            return Err(Error::Dimension(format!(
                "prefix of {t} rows from {} samples",
                self.n_samples()
            )));
        }
        let idx: Vec<usize> = (0..t).collect();
        Ok(self.select_rows(&idx))
    }

    /// Dataset made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            views: self.views.iter().map(|m| m.select(Axis(0), rows)).collect(),
            labels: self.labels.as_ref().map(|l| rows.iter().map(|&i| l[i]).collect()),
            name: self.name.clone(),
        }
    }

    /// One view as its own single-view dataset.
    pub fn only_view(&self, v: usize) -> Self {
        Self {
            views: vec![self.views[v].clone()],
            labels: self.labels.clone(),
            name: format!("{}[view {}]", self.name, v + 1),
        }
    }

    /// Column-wise concatenation of all views.
    pub fn concatenated(&self) -> Array2<T> {
        let parts: Vec<_> = self.views.iter().map(|m| m.view()).collect();
        ndarray::concatenate(Axis(1), &parts)
            .expect("views share a row count")
            .as_standard_layout()
            .into_owned()
    }

    pub fn with_labels(mut self, labels: Option<Vec<usize>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != self.n_samples() {
                return Err(Error::Dimension(format!(
                    "{} labels for {} samples",
                    l.len(),
                    self.n_samples()
                )));
            }
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Shifts every view so its smallest entry is zero. Returns the shifted
    /// dataset and whether anything changed.
    pub fn min_shifted(&self) -> (Self, bool) {
        let mut changed = false;
        let views = self
            .views
            .iter()
            .map(|m| {
                let lo = m.iter().fold(T::infinity(), |a, &b| a.min(b));
                if lo < T::zero() {
                    changed = true;
                    m.mapv(|x| x - lo)
                } else {
                    m.clone()
                }
            })
            .collect();
        (
            Self {
                views,
                labels: self.labels.clone(),
                name: self.name.clone(),
            },
            changed,
        )
    }

    /// Converts the scalar type, e.g. `f64` data into `f32`.
    pub fn cast<U: Scalar>(&self) -> MultiViewDataset<U> {
        MultiViewDataset {
            views: self.views.iter().map(|m| m.mapv(|x| U::lit(x.as_f64()))).collect(),
            labels: self.labels.clone(),
            name: self.name.clone(),
        }
    }
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax<T: Scalar>(xs: &[T]) -> usize {
    let mut best = 0;
    for (k, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = k;
        }
    }
    best
}

/// N x K soft assignment `U` with its row-wise argmax.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMatrix<T> {
    entries: Array2<T>,
    hard_labels: Vec<usize>,
}

impl<T: Scalar> AssignmentMatrix<T> {
    /// Wraps `entries` and derives hard labels. No constraint checking;
    /// see [`crate::validate::validate_assignment`].
    pub fn from_entries(entries: Array2<T>) -> Self {
        let entries = entries.as_standard_layout().into_owned();
        let hard_labels = entries
            .rows()
            .into_iter()
            .map(|r| argmax(r.to_slice().expect("standard layout")))
            .collect();
        Self { entries, hard_labels }
    }

    pub fn uniform(n: usize, k: usize) -> Self {
        Self::from_entries(Array2::from_elem((n, k), T::one() / T::from_usize_lossy(k)))
    }

    pub fn one_hot(labels: &[usize], k: usize) -> Self {
        let mut u = Array2::zeros((labels.len(), k));
        for (i, &l) in labels.iter().enumerate() {
            u[[i, l]] = T::one();
        }
        Self {
            entries: u,
            hard_labels: labels.to_vec(),
        }
    }

    pub fn entries(&self) -> &Array2<T> {
        &self.entries
    }

    pub fn hard_labels(&self) -> &[usize] {
        &self.hard_labels
    }

    pub fn n_samples(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_clusters(&self) -> usize {
        self.entries.ncols()
    }

    pub fn row(&self, i: usize) -> &[T] {
        crate::linalg::row(&self.entries, i)
    }

    /// trace(U U^T), i.e. the sum of squared entries.
    pub fn trace_uut(&self) -> T {
        self.entries.iter().fold(T::zero(), |a, &x| a + x * x)
    }

    /// Members of cluster `k` by hard label.
    pub fn members(&self, k: usize) -> Vec<usize> {
        self.hard_labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == k).then_some(i))
            .collect()
    }

    pub fn into_entries(self) -> Array2<T> {
        self.entries
    }
}

/// Per-view K x J_v center matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterSet<T> {
    centers: Vec<Array2<T>>,
    nonneg_enforced: bool,
}

impl<T: Scalar> CenterSet<T> {
    pub fn new(centers: Vec<Array2<T>>, nonneg_enforced: bool) -> Result<Self> {
        let Some(first) = centers.first() else {
            return Err(Error::Validation("center set needs at least one view".into()));
        };
        let k = first.nrows();
        if let Some(v) = centers.iter().position(|m| m.nrows() != k) {
            return Err(Error::Dimension(format!(
                "view {} has {} centers, view 1 has {k}",
                v + 1,
                centers[v].nrows()
            )));
        }
        Ok(Self {
            centers: centers
                .into_iter()
                .map(|m| m.as_standard_layout().into_owned())
                .collect(),
            nonneg_enforced,
        })
    }

    /// Centers copied from the given data rows.
    pub fn from_rows(data: &MultiViewDataset<T>, rows: &[usize], nonneg_enforced: bool) -> Self {
        Self {
            centers: data
                .views()
                .iter()
                .map(|m| m.select(Axis(0), rows).as_standard_layout().into_owned())
                .collect(),
            nonneg_enforced,
        }
    }

    pub fn views(&self) -> &[Array2<T>] {
        &self.centers
    }

    pub fn view(&self, v: usize) -> &Array2<T> {
        &self.centers[v]
    }

    pub(crate) fn view_mut(&mut self, v: usize) -> &mut Array2<T> {
        &mut self.centers[v]
    }

    pub fn n_clusters(&self) -> usize {
        self.centers[0].nrows()
    }

    pub fn n_views(&self) -> usize {
        self.centers.len()
    }

    pub fn nonneg_enforced(&self) -> bool {
        self.nonneg_enforced
    }

    /// Largest Frobenius distance between matching views.
    pub fn max_change(&self, other: &Self) -> T {
        self.centers
            .iter()
            .zip(&other.centers)
            .map(|(a, b)| {
                a.iter()
                    .zip(b.iter())
                    .fold(T::zero(), |s, (&x, &y)| s + (x - y) * (x - y))
                    .sqrt()
            })
            .fold(T::zero(), T::max)
    }
}

/// View weights on the simplex and the balance exponent `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewWeights<T> {
    alpha: Vec<T>,
    r: T,
}

impl<T: Scalar> ViewWeights<T> {
    pub fn uniform(n_views: usize, r: T) -> Self {
        Self {
            alpha: vec![T::one() / T::from_usize_lossy(n_views); n_views],
            r,
        }
    }

    pub fn new(alpha: Vec<T>, r: T) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::Validation("no view weights".into()));
        }
        if !(r > T::zero()) {
            return Err(Error::Config(format!("balance exponent r must be > 0, got {r}")));
        }
        if alpha.iter().any(|a| !(*a >= T::zero())) {
            return Err(Error::Validation("view weights must be nonnegative".into()));
        }
        let s: T = alpha.iter().copied().sum();
        if (s - T::one()).abs() > T::slack() {
            return Err(Error::Validation(format!("view weights sum to {s}")));
        }
        Ok(Self { alpha, r })
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    pub fn r(&self) -> T {
        self.r
    }

    /// `alpha_v^r` for every view.
    pub fn powered(&self) -> Vec<T> {
        self.alpha.iter().map(|&a| a.powf(self.r)).collect()
    }

    pub(crate) fn set_alpha(&mut self, alpha: Vec<T>) {
        self.alpha = alpha;
    }
}

/// Solver hyperparameters, named after the original R arguments where one
/// exists (`yita` is `eta`, `chushi` is the initial batch size).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub k: usize,
    pub eta: f64,
    pub r: f64,
    /// Projected-gradient step; `None` picks 1/L from a Gershgorin bound.
    pub gamma: Option<f64>,
    pub epsilon: f64,
    pub max_iter: usize,
    /// Initial batch size for the online solvers; `None` means N/2.
    pub chushi: Option<usize>,
    pub seed: u64,
    /// Inner projected-gradient steps per arrival (online).
    pub n_grad: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            k: 2,
            eta: 1.0,
            r: 0.5,
            gamma: None,
            epsilon: 1e-6,
            max_iter: 100,
            chushi: None,
            seed: 0,
            n_grad: 10,
        }
    }
}

impl HyperParams {
    pub fn with_k(k: usize) -> Self {
        Self { k, ..Self::default() }
    }

    /// Checks the bounds shared by every solver against a dataset of `n`
    /// samples.
    pub fn check(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if self.k > n {
            return Err(Error::Config(format!("K = {} exceeds N = {n}", self.k)));
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::Config(format!("eta must be >= 0, got {}", self.eta)));
        }
        if !(self.r > 0.0) {
            return Err(Error::Config(format!("r must be > 0, got {}", self.r)));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::Config(format!("gamma must be > 0, got {g}")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    /// Initial batch size resolved against `n` and checked against K.
    pub fn initial_batch(&self, n: usize) -> Result<usize> {
        let t0 = self.chushi.unwrap_or((n / 2).max(self.k));
        if t0 < self.k {
            return Err(Error::Config(format!("chushi = {t0} is smaller than K = {}", self.k)));
        }
        if t0 == 0 || t0 > n {
            return Err(Error::Config(format!("chushi = {t0} outside 1..={n}")));
        }
        Ok(t0)
    }
}

/// Which solver produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Rkmc,
    Orkmc,
    Kmeans,
    Pkmeans,
    Ogd,
    Omu,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Rkmc,
        Algorithm::Orkmc,
        Algorithm::Kmeans,
        Algorithm::Pkmeans,
        Algorithm::Ogd,
        Algorithm::Omu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rkmc => "rkmc",
            Algorithm::Orkmc => "orkmc",
            Algorithm::Kmeans => "kmeans",
            Algorithm::Pkmeans => "pkmeans",
            Algorithm::Ogd => "ogd",
            Algorithm::Omu => "omu",
        }
    }

    /// Whether the algorithm accepts more than one view.
    pub fn multi_view(self) -> bool {
        !matches!(self, Algorithm::Pkmeans | Algorithm::Ogd)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown algorithm '{s}' (expected rkmc, orkmc, kmeans, pkmeans, ogd or omu)"
                ))
            })
    }
}

/// Solver bookkeeping that is not part of the clustering itself.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Diagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
    /// Indices into `objective_trace` whose step included a center re-seed.
    pub reseed_steps: Vec<usize>,
    pub ridge_fallbacks: usize,
    pub unconverged_rows: usize,
}

/// Output of every solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult<T> {
    pub algorithm: Algorithm,
    pub assignment: AssignmentMatrix<T>,
    pub centers: CenterSet<T>,
    pub weights: ViewWeights<T>,
    pub objective_trace: Vec<T>,
    pub elapsed_seconds: f64,
    pub nmi: Option<f64>,
    pub config: HyperParams,
    pub diagnostics: Diagnostics,
}

impl<T: Scalar> ClusterResult<T> {
    pub fn labels(&self) -> &[usize] {
        self.assignment.hard_labels()
    }

    /// Fills `nmi` from ground truth.
    pub fn score_against(&mut self, truth: Option<&[usize]>) {
        self.nmi = truth.map(|t| crate::metrics::nmi(self.labels(), t).unwrap_or(f64::NAN));
    }
}
