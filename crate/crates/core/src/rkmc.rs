//! Offline regularized K-means (`RKMeans`).
//!
//! Block-coordinate descent on
//! `J = sum_v ||X^v - U M^v||_F^2 + eta * trace(U U^T)`
//! with `U` row-stochastic. Each outer iteration solves every row of `U`
//! exactly (a simplex-constrained QP) and then every center column exactly
//! (least squares, or NNLS when centers must stay nonnegative), so the
//! objective never increases.

use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{nnls_gram, solve_row_qp, RowQp};
use crate::linalg::{gram_rows, row, solve_gram};
use crate::model::{
    Algorithm, AssignmentMatrix, CenterSet, ClusterResult, Diagnostics, HyperParams, MultiViewDataset, ViewWeights,
};
use crate::objective::objective_rkmc;
use crate::rng::{content_hash, keyed_unit, seed_rows, Purpose};
use crate::scalar::Scalar;

/// Column mass below which a cluster counts as empty.
const EMPTY_MASS: f64 = 1e-12;
/// Consecutive empty iterations before a center is re-seeded.
const RESEED_AFTER: usize = 3;

/// How the first iterate is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Init {
    /// Centers at K distinct data rows, then one exact `U` pass.
    RandomRows,
    /// Random row-stochastic `U`, then one exact center pass.
    RandomUniformU,
    /// Rows as in `RandomRows`, refined by Lloyd iterations on the
    /// concatenated views before the first exact `U` pass.
    #[default]
    Lloyd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RkmcConfig {
    pub hyper: HyperParams,
    /// `None` enforces nonnegative centers exactly when the data is
    /// nonnegative.
    pub enforce_center_nonneg: Option<bool>,
    pub init: Init,
    /// Fixed-point tolerance of the row QPs.
    pub qp_tol: f64,
    pub max_inner: usize,
}

impl RkmcConfig {
    pub fn new(hyper: HyperParams) -> Self {
        Self {
            hyper,
            enforce_center_nonneg: None,
            init: Init::Lloyd,
            qp_tol: 1e-10,
            max_inner: 5000,
        }
    }
}

/// Snapshot handed to an observer after every outer iteration.
#[derive(Debug)]
pub struct IterationEvent<'a, T> {
    pub iteration: usize,
    pub centers_before: &'a CenterSet<T>,
    pub assignment: &'a AssignmentMatrix<T>,
    pub centers_after: &'a CenterSet<T>,
    pub objective: T,
    pub reseeded: bool,
}

/// Output of [`update_u`].
#[derive(Debug, Clone)]
pub struct UUpdate<T> {
    pub assignment: AssignmentMatrix<T>,
    pub unconverged_rows: usize,
}

/// Output of [`update_m`].
#[derive(Debug, Clone)]
pub struct MUpdate<T> {
    pub centers: CenterSet<T>,
    /// Clusters with no assignment mass; their centers were kept.
    pub empty: Vec<usize>,
    pub ridge_used: bool,
}

/// Hessian `2 (sum_v w_v M^v M^vT + eta I)` of the per-row problem.
pub(crate) fn row_hessian<T: Scalar>(m: &CenterSet<T>, view_weights: &[T], eta: T) -> Array2<T> {
    let k = m.n_clusters();
    let mut h = Array2::<T>::zeros((k, k));
    for (c, &w) in m.views().iter().zip(view_weights) {
        h.scaled_add(w, &gram_rows(c));
    }
    for i in 0..k {
        h[[i, i]] += eta;
    }
    h.mapv_inplace(|x| x + x);
    h
}

/// Linear term `2 sum_v w_v M^v x_i^v` of row `i`.
pub(crate) fn row_linear<T: Scalar>(m: &CenterSet<T>, view_weights: &[T], sample: impl Fn(usize) -> Vec<T>) -> Vec<T> {
    let k = m.n_clusters();
    let mut c = vec![T::zero(); k];
    for (v, (cv, &w)) in m.views().iter().zip(view_weights).enumerate() {
        let x = sample(v);
        for (l, cl) in c.iter_mut().enumerate() {
            *cl += w * crate::linalg::dot(row(cv, l), &x);
        }
    }
    c.iter_mut().for_each(|x| *x = *x + *x);
    c
}

/// Exact `U` step: every row minimizes
/// `sum_v ||x_i^v - u M^v||^2 + eta ||u||^2` over the simplex, warm-started
/// from `u_prev`.
pub fn update_u<T: Scalar>(
    data: &MultiViewDataset<T>,
    m: &CenterSet<T>,
    u_prev: &AssignmentMatrix<T>,
    eta: T,
) -> Result<UUpdate<T>> {
    update_u_with(data, m, u_prev, eta, T::lit(1e-10), 5000)
}

pub fn update_u_with<T: Scalar>(
    data: &MultiViewDataset<T>,
    m: &CenterSet<T>,
    u_prev: &AssignmentMatrix<T>,
    eta: T,
    tol: T,
    max_inner: usize,
) -> Result<UUpdate<T>> {
    let k = m.n_clusters();
    if u_prev.n_samples() != data.n_samples() || u_prev.n_clusters() != k {
        return Err(Error::Dimension(format!(
            "U is {}x{}, expected {}x{k}",
            u_prev.n_samples(),
            u_prev.n_clusters(),
            data.n_samples()
        )));
    }
    if m.n_views() != data.n_views() || m.views().iter().zip(data.views()).any(|(c, x)| c.ncols() != x.ncols()) {
        return Err(Error::Dimension("centers do not match the data views".into()));
    }
    let ones = vec![T::one(); data.n_views()];
    let h = row_hessian(m, &ones, eta);
    // Validate H once; the rows share it.
    let probe = RowQp::new(h, vec![T::zero(); k])?;
    solve_row_qp(&probe, u_prev.row(0), tol, 1)?;

    let rows: Vec<(Vec<T>, bool)> = (0..data.n_samples())
        .into_par_iter()
        .map(|i| {
            let c = row_linear(m, &ones, |v| data.sample(v, i).to_vec());
            let qp = probe.with_linear(c)?;
            let sol = solve_row_qp(&qp, u_prev.row(i), tol, max_inner)?;
            Ok((sol.u, sol.converged))
        })
        .collect::<Result<_>>()?;
    let mut entries = Array2::<T>::zeros((data.n_samples(), k));
    let mut unconverged_rows = 0;
    for (i, (u, ok)) in rows.into_iter().enumerate() {
        if !ok {
            unconverged_rows += 1;
        }
        for (dst, x) in entries.row_mut(i).iter_mut().zip(u) {
            *dst = x;
        }
    }
    Ok(UUpdate {
        assignment: AssignmentMatrix::from_entries(entries),
        unconverged_rows,
    })
}

/// Exact center step: for each view and column, the least-squares fit of
/// `X^v[:, j]` by `U m` (nonnegative when `enforce_nonneg`). Clusters whose
/// column of `U` carries no mass keep their previous center.
pub fn update_m<T: Scalar>(
    data: &MultiViewDataset<T>,
    u: &AssignmentMatrix<T>,
    m_prev: &CenterSet<T>,
    enforce_nonneg: bool,
) -> Result<MUpdate<T>> {
    let k = u.n_clusters();
    if m_prev.n_clusters() != k || u.n_samples() != data.n_samples() {
        return Err(Error::Dimension("U and previous centers disagree on shape".into()));
    }
    let ue = u.entries();
    let empty_mass = T::lit(EMPTY_MASS);
    let (active, empty): (Vec<usize>, Vec<usize>) = (0..k).partition(|&c| ue.column(c).iter().any(|&x| x > empty_mass));
    let mut centers: Vec<Array2<T>> = m_prev.views().to_vec();
    let mut ridge_used = false;
    if active.is_empty() {
        return Ok(MUpdate {
            centers: CenterSet::new(centers, enforce_nonneg)?,
            empty,
            ridge_used,
        });
    }
    let ua = ue.select(ndarray::Axis(1), &active);
    let gram = ua.t().dot(&ua);
    let ue_empty = ue.select(ndarray::Axis(1), &empty);

    for (v, x) in data.views().iter().enumerate() {
        let target = if empty.is_empty() {
            x.clone()
        } else {
            let frozen = m_prev.view(v).select(ndarray::Axis(0), &empty);
            x - &ue_empty.dot(&frozen)
        };
        let rhs = ua.t().dot(&target);
        let sol = if enforce_nonneg {
            let scale = rhs.iter().fold(T::one(), |a, &b| a.max(b.abs()));
            let tol = T::lit(1e-12) * scale;
            let mut out = Array2::<T>::zeros(rhs.raw_dim());
            for j in 0..rhs.ncols() {
                let h: Vec<T> = rhs.column(j).to_vec();
                let s = nnls_gram(gram.view(), &h, tol);
                ridge_used |= s.ridge_used;
                for (a, xa) in s.x.into_iter().enumerate() {
                    out[[a, j]] = xa;
                }
            }
            out
        } else {
            let (s, ridged) = solve_gram(gram.view(), rhs.view());
            ridge_used |= ridged;
            s
        };
        for (a, &c) in active.iter().enumerate() {
            centers[v].row_mut(c).assign(&sol.row(a));
        }
    }
    Ok(MUpdate {
        centers: CenterSet::new(centers, enforce_nonneg)?,
        empty,
        ridge_used,
    })
}

/// Fits offline RKMC.
pub fn rkmc_fit<T: Scalar>(data: &MultiViewDataset<T>, cfg: &RkmcConfig) -> Result<ClusterResult<T>> {
    rkmc_fit_observed(data, cfg, |_| {})
}

/// [`rkmc_fit`] with a callback after every outer iteration.
pub fn rkmc_fit_observed<T, F>(data: &MultiViewDataset<T>, cfg: &RkmcConfig, observer: F) -> Result<ClusterResult<T>>
where
    T: Scalar,
    F: FnMut(&IterationEvent<'_, T>),
{
    let started = Instant::now();
    let hyper = &cfg.hyper;
    let n = data.n_samples();
    hyper.check(n)?;
    let k = hyper.k;
    let eta = T::lit(hyper.eta);
    let tol = T::lit(cfg.qp_tol);
    let nonneg = cfg
        .enforce_center_nonneg
        .unwrap_or_else(|| data.min_value() >= T::zero());
    let mut diag = Diagnostics::default();

    let (u, m) = match cfg.init {
        Init::RandomRows | Init::Lloyd => {
            let sel = seed_rows(data.views(), n, k, hyper.seed, Purpose::CenterSeeding);
            if sel.duplicates {
                diag.warnings
                    .push("fewer than K distinct rows: duplicate centers".to_string());
            }
            let mut m = CenterSet::from_rows(data, &sel.rows, nonneg);
            if cfg.init == Init::Lloyd {
                let x = data.concatenated();
                let run =
                    crate::baselines::lloyd_run(&x, x.select(ndarray::Axis(0), &sel.rows), hyper.max_iter, T::zero());
                m = crate::baselines::split_centers(&run.centers, &data.dims(), nonneg)?;
            }
            if nonneg {
                for v in 0..m.n_views() {
                    m.view_mut(v).mapv_inplace(|x| x.max(T::zero()));
                }
            }
            let up = update_u_with(data, &m, &AssignmentMatrix::uniform(n, k), eta, tol, cfg.max_inner)?;
            diag.unconverged_rows += up.unconverged_rows;
            (up.assignment, m)
        }
        Init::RandomUniformU => {
            let mut entries = Array2::<T>::zeros((n, k));
            for i in 0..n {
                let h = content_hash(data.views(), i);
                let mut total = T::zero();
                for c in 0..k {
                    let x = T::lit(keyed_unit(hyper.seed, Purpose::InitialAssignment, h, c as u64));
                    entries[[i, c]] = x;
                    total += x;
                }
                entries.row_mut(i).mapv_inplace(|x| x / total);
            }
            let u = AssignmentMatrix::from_entries(entries);
            let zeros = CenterSet::new(data.dims().iter().map(|&j| Array2::zeros((k, j))).collect(), nonneg)?;
            let mu = update_m(data, &u, &zeros, nonneg)?;
            if mu.ridge_used {
                diag.ridge_fallbacks += 1;
            }
            (u, mu.centers)
        }
    };

    iterate(data, cfg, u, m, nonneg, diag, started, observer)
}

/// Runs RKMC from caller-supplied centers: one exact `U` pass, then the
/// usual alternation. The data's sign decides nonnegativity unless the
/// config overrides it.
pub fn rkmc_fit_from<T, F>(
    data: &MultiViewDataset<T>,
    cfg: &RkmcConfig,
    centers: CenterSet<T>,
    observer: F,
) -> Result<ClusterResult<T>>
where
    T: Scalar,
    F: FnMut(&IterationEvent<'_, T>),
{
    let started = Instant::now();
    let hyper = &cfg.hyper;
    let n = data.n_samples();
    hyper.check(n)?;
    if centers.n_clusters() != hyper.k || centers.n_views() != data.n_views() {
        return Err(Error::Dimension(format!(
            "initial centers are {} x {} views, expected {} x {}",
            centers.n_clusters(),
            centers.n_views(),
            hyper.k,
            data.n_views()
        )));
    }
    if let Some(v) = (0..data.n_views()).find(|&v| centers.view(v).ncols() != data.view(v).ncols()) {
        return Err(Error::Dimension(format!(
            "initial centers of view {} have the wrong width",
            v + 1
        )));
    }
    let nonneg = cfg
        .enforce_center_nonneg
        .unwrap_or_else(|| data.min_value() >= T::zero());
    let m = CenterSet::new(centers.views().to_vec(), nonneg)?;
    let mut diag = Diagnostics::default();
    let up = update_u_with(
        data,
        &m,
        &AssignmentMatrix::uniform(n, hyper.k),
        T::lit(hyper.eta),
        T::lit(cfg.qp_tol),
        cfg.max_inner,
    )?;
    diag.unconverged_rows += up.unconverged_rows;
    iterate(data, cfg, up.assignment, m, nonneg, diag, started, observer)
}

#[allow(clippy::too_many_arguments)]
fn iterate<T, F>(
    data: &MultiViewDataset<T>,
    cfg: &RkmcConfig,
    mut u: AssignmentMatrix<T>,
    mut m: CenterSet<T>,
    nonneg: bool,
    mut diag: Diagnostics,
    started: Instant,
    mut observer: F,
) -> Result<ClusterResult<T>>
where
    T: Scalar,
    F: FnMut(&IterationEvent<'_, T>),
{
    let hyper = &cfg.hyper;
    let k = hyper.k;
    let eta = T::lit(hyper.eta);
    let epsilon = T::lit(hyper.epsilon);
    let tol = T::lit(cfg.qp_tol);
    let mut trace = vec![objective_rkmc(data, &u, &m, eta)?];
    let mut empty_streak = vec![0usize; k];

    for iteration in 1..=hyper.max_iter {
        let up = update_u_with(data, &m, &u, eta, tol, cfg.max_inner)?;
        diag.unconverged_rows += up.unconverged_rows;
        u = up.assignment;

        let mu = update_m(data, &u, &m, nonneg)?;
        if mu.ridge_used {
            diag.ridge_fallbacks += 1;
        }
        let mut new_m = mu.centers;
        for c in 0..k {
            if mu.empty.contains(&c) {
                empty_streak[c] += 1;
            } else {
                empty_streak[c] = 0;
            }
        }
        if !mu.empty.is_empty() {
            log::warn!(
                "iteration {iteration}: empty clusters {:?} kept their centers",
                mu.empty
            );
        }
        let mut reseeded = false;
        for c in 0..k {
            if empty_streak[c] >= RESEED_AFTER {
                let worst = worst_fit_row(data, &u, &new_m);
                for v in 0..new_m.n_views() {
                    let x = data.view(v).row(worst).to_owned();
                    new_m.view_mut(v).row_mut(c).assign(&x);
                }
                empty_streak[c] = 0;
                reseeded = true;
                diag.warnings.push(format!(
                    "iteration {iteration}: cluster {} re-seeded at sample {}",
                    c + 1,
                    worst + 1
                ));
            }
        }
        let objective = objective_rkmc(data, &u, &new_m, eta)?;
        trace.push(objective);
        if reseeded {
            diag.reseed_steps.push(trace.len() - 1);
        }
        observer(&IterationEvent {
            iteration,
            centers_before: &m,
            assignment: &u,
            centers_after: &new_m,
            objective,
            reseeded,
        });
        let change = new_m.max_change(&m);
        m = new_m;
        diag.iterations = iteration;
        if change <= epsilon && !reseeded {
            diag.converged = true;
            break;
        }
    }
    if diag.unconverged_rows > 0 {
        diag.warnings.push(format!(
            "{} row subproblems hit the inner iteration cap",
            diag.unconverged_rows
        ));
    }

    let mut result = ClusterResult {
        algorithm: Algorithm::Rkmc,
        assignment: u,
        centers: m,
        weights: ViewWeights::uniform(data.n_views(), T::lit(hyper.r)),
        objective_trace: trace,
        elapsed_seconds: started.elapsed().as_secs_f64(),
        nmi: None,
        config: hyper.clone(),
        diagnostics: diag,
    };
    result.score_against(data.labels());
    Ok(result)
}

/// Sample with the largest reconstruction error summed over views.
fn worst_fit_row<T: Scalar>(data: &MultiViewDataset<T>, u: &AssignmentMatrix<T>, m: &CenterSet<T>) -> usize {
    let mut best = (T::neg_infinity(), 0);
    for i in 0..data.n_samples() {
        let ui = u.row(i);
        let mut err = T::zero();
        for v in 0..data.n_views() {
            let c = m.view(v);
            for (j, &x) in data.sample(v, i).iter().enumerate() {
                let recon = ui.iter().enumerate().fold(T::zero(), |a, (l, &w)| a + w * c[[l, j]]);
                err += (x - recon) * (x - recon);
            }
        }
        if err > best.0 {
            best = (err, i);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn pairs() -> MultiViewDataset<f64> {
        MultiViewDataset::single_view(array![[0.0_f64], [0.1], [10.0], [10.1]], Some(vec![0, 0, 1, 1])).unwrap()
    }

    #[test]
    fn separates_two_pairs() {
        let mut hyper = HyperParams::with_k(2);
        hyper.eta = 0.01;
        let res = rkmc_fit(&pairs(), &RkmcConfig::new(hyper)).unwrap();
        let l = res.labels();
        assert_eq!(l[0], l[1]);
        assert_eq!(l[2], l[3]);
        assert_ne!(l[0], l[2]);
        assert!(crate::validate::validate(&res).is_empty());
    }

    #[test]
    fn k_above_n_is_config_error() {
        let hyper = HyperParams::with_k(5);
        assert!(matches!(
            rkmc_fit(&pairs(), &RkmcConfig::new(hyper)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn data_row_at_center_gets_vertex() {
        let data = MultiViewDataset::single_view(array![[1.0_f64, 0.0], [0.0, 1.0]], None).unwrap();
        let m = CenterSet::new(vec![array![[1.0_f64, 0.0], [0.0, 1.0], [1.0, 1.0]]], false).unwrap();
        let up = update_u(&data, &m, &AssignmentMatrix::uniform(2, 3), 0.0).unwrap();
        assert!((up.assignment.row(0)[0] - 1.0).abs() < 1e-9);
        assert!((up.assignment.row(1)[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn heavy_regularization_flattens_rows() {
        let data = MultiViewDataset::single_view(array![[3.0_f64, 1.0], [-2.0, 0.5]], None).unwrap();
        let m = CenterSet::new(vec![array![[3.0_f64, 1.0], [0.0, 0.0], [-2.0, 0.5], [1.0, 1.0]]], false).unwrap();
        let up = update_u(&data, &m, &AssignmentMatrix::uniform(2, 4), 1e6).unwrap();
        for i in 0..2 {
            for &x in up.assignment.row(i) {
                assert!((x - 0.25).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn one_hot_centers_are_cluster_means() {
        let data = MultiViewDataset::single_view(array![[1.0_f64, 2.0], [3.0, 4.0], [10.0, 0.0]], None).unwrap();
        let u = AssignmentMatrix::one_hot(&[0, 0, 1], 2);
        let prev = CenterSet::new(vec![Array2::zeros((2, 2))], false).unwrap();
        let mu = update_m(&data, &u, &prev, false).unwrap();
        let c = mu.centers.view(0);
        assert!((c[[0, 0]] - 2.0).abs() < 1e-12 && (c[[0, 1]] - 3.0).abs() < 1e-12);
        assert!((c[[1, 0]] - 10.0).abs() < 1e-12 && c[[1, 1]].abs() < 1e-12);
    }

    #[test]
    fn empty_cluster_keeps_previous_center() {
        let data = MultiViewDataset::single_view(array![[1.0_f64], [3.0]], None).unwrap();
        let u = AssignmentMatrix::one_hot(&[0, 0], 2);
        let prev = CenterSet::new(vec![array![[0.0_f64], [42.0]]], false).unwrap();
        let mu = update_m(&data, &u, &prev, false).unwrap();
        assert_eq!(mu.empty, vec![1]);
        assert_eq!(mu.centers.view(0)[[1, 0]], 42.0);
        assert!((mu.centers.view(0)[[0, 0]] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn identical_rows_warn_about_duplicates() {
        let data = MultiViewDataset::single_view(array![[1.0_f64], [1.0], [1.0]], None).unwrap();
        let res = rkmc_fit(&data, &RkmcConfig::new(HyperParams::with_k(2))).unwrap();
        assert!(res.diagnostics.warnings.iter().any(|w| w.contains("duplicate")));
        assert!(crate::validate::validate(&res).is_empty());
    }

    #[test]
    fn runs_in_single_precision() {
        let data = pairs().cast::<f32>();
        let mut hyper = HyperParams::with_k(2);
        hyper.eta = 0.01;
        let res = rkmc_fit(&data, &RkmcConfig::new(hyper)).unwrap();
        assert_eq!(res.nmi, Some(1.0));
    }
}
