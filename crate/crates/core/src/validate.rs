//! Invariant checks that report every violation instead of failing fast.

use std::fmt;

use crate::model::{argmax, Algorithm, AssignmentMatrix, CenterSet, ClusterResult, ViewWeights};
use crate::scalar::Scalar;

/// One broken invariant, named by kind and located by index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: &'static str,
    pub index: Vec<usize>,
}

impl Violation {
    pub fn new(kind: &'static str, index: impl Into<Vec<usize>>) -> Self {
        Self {
            kind,
            index: index.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}", self.kind, self.index)
    }
}

pub fn validate_assignment<T: Scalar>(u: &AssignmentMatrix<T>, out: &mut Vec<Violation>) {
    let slack = T::slack();
    let neg_floor = -T::lit(1e-12);
    if u.hard_labels().len() != u.n_samples() {
        out.push(Violation::new("hard-label-count", []));
    }
    for i in 0..u.n_samples() {
        let r = u.row(i);
        if let Some(k) = r.iter().position(|&x| !x.is_finite() || x < neg_floor) {
            out.push(Violation::new("row-nonneg", [i, k]));
        }
        let s: T = r.iter().copied().sum();
        if !((s - T::one()).abs() <= slack) {
            out.push(Violation::new("row-sum", [i]));
        }
        if let Some(&l) = u.hard_labels().get(i) {
            if l >= r.len() || r[l] < r[argmax(r)] {
                out.push(Violation::new("hard-label", [i]));
            }
        }
    }
}

pub fn validate_centers<T: Scalar>(m: &CenterSet<T>, out: &mut Vec<Violation>) {
    let k = m.n_clusters();
    for (v, c) in m.views().iter().enumerate() {
        if c.nrows() != k {
            out.push(Violation::new("center-k", [v]));
        }
        for ((kk, j), &x) in c.indexed_iter() {
            if !x.is_finite() {
                out.push(Violation::new("center-finite", [v, kk, j]));
            } else if m.nonneg_enforced() && x < T::zero() {
                out.push(Violation::new("center-nonneg", [v, kk, j]));
            }
        }
    }
}

pub fn validate_weights<T: Scalar>(w: &ViewWeights<T>, out: &mut Vec<Violation>) {
    for (v, &a) in w.alpha().iter().enumerate() {
        if !(a >= T::zero()) {
            out.push(Violation::new("weight-nonneg", [v]));
        }
    }
    let s: T = w.alpha().iter().copied().sum();
    if !((s - T::one()).abs() <= T::slack()) {
        out.push(Violation::new("weight-sum", []));
    }
    if w.alpha().len() == 1 && w.alpha()[0] != T::one() {
        out.push(Violation::new("weight-single-view", [0]));
    }
}

/// Every invariant of a fit result. Empty means well formed.
pub fn validate<T: Scalar>(result: &ClusterResult<T>) -> Vec<Violation> {
    let mut out = Vec::new();
    validate_assignment(&result.assignment, &mut out);
    validate_centers(&result.centers, &mut out);
    validate_weights(&result.weights, &mut out);
    if result.assignment.n_clusters() != result.centers.n_clusters() {
        out.push(Violation::new("cluster-count", []));
    }
    if result.weights.alpha().len() != result.centers.n_views() {
        out.push(Violation::new("weight-count", []));
    }
    if let Some(nmi) = result.nmi {
        if !(0.0..=1.0).contains(&nmi) {
            out.push(Violation::new("nmi-range", []));
        }
    }
    if result.algorithm == Algorithm::Rkmc {
        let slack = T::slack();
        for (step, w) in result.objective_trace.windows(2).enumerate() {
            let idx = step + 1;
            if result.diagnostics.reseed_steps.contains(&idx) {
                continue;
            }
            if w[1] > w[0] + slack {
                out.push(Violation::new("objective-monotone", [idx]));
            }
        }
    }
    out
}
