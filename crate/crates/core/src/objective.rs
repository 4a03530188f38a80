//! Objective functions of the offline and online problems.

use crate::error::{Error, Result};
use crate::linalg::row;
use crate::model::{AssignmentMatrix, CenterSet, MultiViewDataset, ViewWeights};
use crate::scalar::Scalar;

fn check_shapes<T: Scalar>(data: &MultiViewDataset<T>, u: &AssignmentMatrix<T>, m: &CenterSet<T>) -> Result<()> {
    if u.n_samples() != data.n_samples() {
        return Err(Error::Dimension(format!(
            "U has {} rows, data has {} samples",
            u.n_samples(),
            data.n_samples()
        )));
    }
    if m.n_views() != data.n_views() {
        return Err(Error::Dimension(format!(
            "{} center views for {} data views",
            m.n_views(),
            data.n_views()
        )));
    }
    if u.n_clusters() != m.n_clusters() {
        return Err(Error::Dimension(format!(
            "U has {} columns, centers have {} rows",
            u.n_clusters(),
            m.n_clusters()
        )));
    }
    for (v, (x, c)) in data.views().iter().zip(m.views()).enumerate() {
        if x.ncols() != c.ncols() {
            return Err(Error::Dimension(format!(
                "view {}: data has {} columns, centers {}",
                v + 1,
                x.ncols(),
                c.ncols()
            )));
        }
    }
    if u.entries().iter().any(|x| !x.is_finite()) || m.views().iter().flat_map(|c| c.iter()).any(|x| !x.is_finite()) {
        return Err(Error::Validation("non-finite assignment or center entry".into()));
    }
    Ok(())
}

/// Squared reconstruction error `||X^v - U M^v||_F^2` of one view.
pub(crate) fn view_residual<T: Scalar>(
    data: &MultiViewDataset<T>,
    u: &AssignmentMatrix<T>,
    m: &CenterSet<T>,
    v: usize,
) -> T {
    let x = data.view(v);
    let c = m.view(v);
    let k = c.nrows();
    let mut total = T::zero();
    let mut recon = vec![T::zero(); x.ncols()];
    for i in 0..x.nrows() {
        recon.iter_mut().for_each(|r| *r = T::zero());
        let ui = u.row(i);
        for (l, &w) in ui.iter().enumerate().take(k) {
            if w != T::zero() {
                for (r, &cj) in recon.iter_mut().zip(row(c, l)) {
                    *r += w * cj;
                }
            }
        }
        total += row(x, i)
            .iter()
            .zip(&recon)
            .fold(T::zero(), |a, (&xj, &rj)| a + (xj - rj) * (xj - rj));
    }
    total
}

/// `sum_v ||X^v - U M^v||_F^2 + eta * trace(U U^T)`.
pub fn objective_rkmc<T: Scalar>(
    data: &MultiViewDataset<T>,
    u: &AssignmentMatrix<T>,
    m: &CenterSet<T>,
    eta: T,
) -> Result<T> {
    check_shapes(data, u, m)?;
    let residual: T = (0..data.n_views()).map(|v| view_residual(data, u, m, v)).sum();
    Ok(residual + eta * u.trace_uut())
}

/// Online objective over the processed prefix: each view's residual is
/// scaled by `alpha_v^r`.
pub fn objective_online<T: Scalar>(
    data_prefix: &MultiViewDataset<T>,
    u: &AssignmentMatrix<T>,
    m: &CenterSet<T>,
    w: &ViewWeights<T>,
    eta: T,
) -> Result<T> {
    check_shapes(data_prefix, u, m)?;
    if w.alpha().len() != data_prefix.n_views() {
        return Err(Error::Dimension(format!(
            "{} weights for {} views",
            w.alpha().len(),
            data_prefix.n_views()
        )));
    }
    let residual: T = w
        .powered()
        .into_iter()
        .enumerate()
        .map(|(v, a)| a * view_residual(data_prefix, u, m, v))
        .sum();
    Ok(residual + eta * u.trace_uut())
}
