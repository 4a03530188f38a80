//! Comparison algorithms behind the same result type as the RKMC solvers.

mod kmeans;
mod ogd;
mod omu;
mod pkmeans;

pub use kmeans::{kmeans_fit, lloyd_assign, lloyd_run, sse, LloydRun};
pub use ogd::{ogd_fit, GammaSchedule};
pub use omu::{omu_fit, omu_update_m, omu_update_u, OmuConfig, OMU_DELTA};
pub use pkmeans::{pkmeans_fit, pkmeans_mm_step, power_objective, power_weights, PowerSchedule};

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::linalg::{row, sq_dist};
use crate::model::{CenterSet, MultiViewDataset};
use crate::scalar::Scalar;

/// Index and squared distance of the nearest center; ties go to the lower
/// index.
pub(crate) fn nearest<T, S>(x: &[T], centers: &ndarray::ArrayBase<S, ndarray::Ix2>) -> (usize, T)
where
    T: Scalar,
    S: ndarray::Data<Elem = T>,
{
    let mut best = (0, T::infinity());
    for c in 0..centers.nrows() {
        let d = sq_dist(x, row(centers, c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Splits concatenated `K x sum J_v` centers back into views.
pub fn split_centers<T: Scalar>(centers: &Array2<T>, dims: &[usize], nonneg: bool) -> Result<CenterSet<T>> {
    let mut out = Vec::with_capacity(dims.len());
    let mut at = 0;
    for &j in dims {
        out.push(centers.slice(s![.., at..at + j]).to_owned());
        at += j;
    }
    CenterSet::new(out, nonneg)
}

pub(crate) fn require_single_view<T: Scalar>(data: &MultiViewDataset<T>, name: &str) -> Result<()> {
    if data.n_views() != 1 {
        return Err(Error::Config(format!(
            "{name} is single-view; got {} views (pick one with a view selection)",
            data.n_views()
        )));
    }
    Ok(())
}
