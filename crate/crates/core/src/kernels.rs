//! Constrained-optimization primitives shared by the offline and online
//! solvers: Euclidean projection onto the probability simplex, the
//! simplex-constrained quadratic that updates one row of `U`, and
//! nonnegative least squares for the center columns.

use std::sync::{Arc, OnceLock};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, gershgorin_bound, solve_gram, solve_lu};
use crate::scalar::Scalar;

/// Euclidean projection of `y` onto `{u >= 0, sum(u) = 1}`.
///
/// Sort-and-threshold: find the largest `rho` with
/// `y_(rho) > (sum_{i<=rho} y_(i) - 1) / rho`, shift by that threshold and
/// clip at zero. The result is renormalized so the sum is one to rounding.
pub fn project_simplex<T: Scalar>(y: &[T]) -> Result<Vec<T>> {
    if y.is_empty() {
        return Err(Error::Validation("cannot project an empty vector".into()));
    }
    if let Some(i) = y.iter().position(|x| !x.is_finite()) {
        return Err(Error::Validation(format!("entry {i} is not finite")));
    }
    Ok(project_simplex_unchecked(y))
}

pub(crate) fn project_simplex_unchecked<T: Scalar>(y: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); y.len()];
    project_into(y, &mut out);
    out
}

pub(crate) fn project_into<T: Scalar>(y: &[T], out: &mut [T]) {
    let mut sorted: Vec<T> = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (i, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - T::one()) / T::from_usize_lossy(i + 1);
        if s > t {
            theta = t;
        }
    }
    let mut total = T::zero();
    for (o, &x) in out.iter_mut().zip(y) {
        *o = (x - theta).max(T::zero());
        total += *o;
    }
    if total > T::zero() {
        out.iter_mut().for_each(|o| *o /= total);
    } else {
        // Only reachable through underflow; put the mass on the largest entry.
        let k = crate::model::argmax(y);
        out.iter_mut().for_each(|o| *o = T::zero());
        out[k] = T::one();
    }
}

/// `min 0.5 u^T H u - c^T u` over the simplex.
#[derive(Debug, Clone)]
pub struct RowQp<T> {
    h: Arc<Array2<T>>,
    c: Vec<T>,
    lipschitz: T,
    // cached outcome of the PSD check, shared by `with_linear` copies
    psd: Arc<OnceLock<bool>>,
}

impl<T: Scalar> RowQp<T> {
    pub fn new(h: Array2<T>, c: Vec<T>) -> Result<Self> {
        let k = h.nrows();
        if h.ncols() != k || c.len() != k || k == 0 {
            return Err(Error::Dimension(format!(
                "H is {}x{}, c has {} entries",
                h.nrows(),
                h.ncols(),
                c.len()
            )));
        }
        if h.iter().chain(c.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Validation("QP data must be finite".into()));
        }
        let scale = h.iter().fold(T::one(), |m, &x| m.max(x.abs()));
        let sym_tol = T::lit(1e-10) * scale;
        for a in 0..k {
            for b in (a + 1)..k {
                if (h[[a, b]] - h[[b, a]]).abs() > sym_tol {
                    return Err(Error::Validation(format!("H is not symmetric at ({a}, {b})")));
                }
            }
        }
        let lipschitz = gershgorin_bound(h.view());
        let h = if h.is_standard_layout() {
            h
        } else {
            h.as_standard_layout().into_owned()
        };
        Ok(Self {
            h: Arc::new(h),
            c,
            lipschitz,
            psd: Arc::new(OnceLock::new()),
        })
    }

    /// Same `H`, new linear term. `H` is not copied or re-validated.
    pub fn with_linear(&self, c: Vec<T>) -> Result<Self> {
        if c.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "c has {} entries, H is {}x{}",
                c.len(),
                self.dim(),
                self.dim()
            )));
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("QP data must be finite".into()));
        }
        Ok(Self {
            h: Arc::clone(&self.h),
            c,
            lipschitz: self.lipschitz,
            psd: Arc::clone(&self.psd),
        })
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn hessian(&self) -> &Array2<T> {
        &self.h
    }

    pub fn linear(&self) -> &[T] {
        &self.c
    }

    /// Gershgorin bound on the largest eigenvalue of `H`.
    pub fn lipschitz(&self) -> T {
        self.lipschitz
    }

    fn h_rows(&self) -> std::slice::ChunksExact<'_, T> {
        let k = self.dim();
        self.h.as_slice().expect("H is kept in standard layout").chunks_exact(k)
    }

    pub fn value(&self, u: &[T]) -> T {
        let mut quad = T::zero();
        for (hr, &ua) in self.h_rows().zip(u) {
            quad += ua * crate::linalg::dot(hr, u);
        }
        T::lit(0.5) * quad - crate::linalg::dot(&self.c, u)
    }

    pub fn gradient_into(&self, u: &[T], g: &mut [T]) {
        for ((ga, hr), &ca) in g.iter_mut().zip(self.h_rows()).zip(&self.c) {
            *ga = crate::linalg::dot(hr, u) - ca;
        }
    }

    /// `||u - P(u - grad/L)||`, zero exactly at the optimum.
    pub fn fixed_point_residual(&self, u: &[T]) -> T {
        let k = u.len();
        if self.lipschitz == T::zero() {
            let best = crate::model::argmax(&self.c);
            return u
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let t = if i == best { T::one() } else { T::zero() };
                    (x - t) * (x - t)
                })
                .fold(T::zero(), |a, b| a + b)
                .sqrt();
        }
        let mut g = vec![T::zero(); k];
        self.gradient_into(u, &mut g);
        let step: Vec<T> = u.iter().zip(&g).map(|(&x, &gi)| x - gi / self.lipschitz).collect();
        let p = project_simplex_unchecked(&step);
        u.iter()
            .zip(&p)
            .fold(T::zero(), |a, (&x, &y)| a + (x - y) * (x - y))
            .sqrt()
    }

    fn check_psd(&self) -> Result<()> {
        if *self.psd.get_or_init(|| self.is_psd()) {
            Ok(())
        } else {
            Err(Error::Numerical("H is not positive semidefinite".into()))
        }
    }

    fn is_psd(&self) -> bool {
        let k = self.dim();
        let scale = self.h.diag().iter().fold(T::one(), |m, &d| m.max(d.abs()));
        if self.h.diag().iter().any(|&d| d < -T::lit(1e-12) * scale) {
            return false;
        }
        let mut loaded = (*self.h).clone();
        let jitter = T::lit(1e-9) * scale;
        for i in 0..k {
            loaded[[i, i]] += jitter;
        }
        cholesky(loaded.view()).is_some()
    }

    /// Exact minimizer restricted to the support of `u`, if it satisfies
    /// the KKT conditions of the full problem.
    fn polish(&self, u: &[T]) -> Option<Vec<T>> {
        let support: Vec<usize> = (0..u.len()).filter(|&i| u[i] > T::zero()).collect();
        let s = support.len();
        let mut a = Array2::<T>::zeros((s + 1, s + 1));
        let mut rhs = vec![T::zero(); s + 1];
        for (p, &i) in support.iter().enumerate() {
            for (q, &j) in support.iter().enumerate() {
                a[[p, q]] = self.h[[i, j]];
            }
            a[[p, s]] = -T::one();
            a[[s, p]] = T::one();
            rhs[p] = self.c[i];
        }
        rhs[s] = T::one();
        let sol = solve_lu(a, rhs)?;
        let mut cand = vec![T::zero(); u.len()];
        for (p, &i) in support.iter().enumerate() {
            if sol[p] < T::zero() {
                return None;
            }
            cand[i] = sol[p];
        }
        let total: T = cand.iter().copied().sum();
        if !(total > T::zero()) {
            return None;
        }
        cand.iter_mut().for_each(|x| *x /= total);
        Some(cand)
    }
}

/// Result of [`solve_row_qp`].
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution<T> {
    pub u: Vec<T>,
    pub converged: bool,
    pub iterations: usize,
    pub residual: T,
}

const POLISH_EVERY: usize = 8;

/// Minimizes a simplex-constrained convex quadratic by projected gradient
/// with step `1/L` from the warm start `u0`, polishing with the exact KKT
/// solution on the current support whenever that point is optimal.
///
/// The returned point never has a larger objective than `u0`.
pub fn solve_row_qp<T: Scalar>(qp: &RowQp<T>, u0: &[T], tol: T, max_inner: usize) -> Result<QpSolution<T>> {
    let k = qp.dim();
    if u0.len() != k {
        return Err(Error::Dimension(format!("u0 has {} entries, QP has {k}", u0.len())));
    }
    let s: T = u0.iter().copied().sum();
    if u0.iter().any(|&x| !(x >= -T::slack())) || (s - T::one()).abs() > T::slack() {
        return Err(Error::Validation("u0 is not on the simplex".into()));
    }
    qp.check_psd()?;
    let l = qp.lipschitz();
    if l == T::zero() {
        // Linear objective: the best vertex.
        let mut u = vec![T::zero(); k];
        u[crate::model::argmax(qp.linear())] = T::one();
        return Ok(QpSolution {
            u,
            converged: true,
            iterations: 0,
            residual: T::zero(),
        });
    }
    let mut u = u0.to_vec();
    let mut g = vec![T::zero(); k];
    let mut step = vec![T::zero(); k];
    let mut next = vec![T::zero(); k];
    let mut value = qp.value(&u);
    let mut residual = T::infinity();
    for it in 0..max_inner {
        qp.gradient_into(&u, &mut g);
        for i in 0..k {
            step[i] = u[i] - g[i] / l;
        }
        project_into(&step, &mut next);
        residual = u
            .iter()
            .zip(&next)
            .fold(T::zero(), |a, (&x, &y)| a + (x - y) * (x - y))
            .sqrt();
        if residual <= tol {
            return Ok(QpSolution {
                u,
                converged: true,
                iterations: it,
                residual,
            });
        }
        let next_value = qp.value(&next);
        if next_value <= value {
            u.copy_from_slice(&next);
            value = next_value;
        } else {
            // Rounding-level ascent; keep the better iterate.
            return Ok(QpSolution {
                u,
                converged: residual <= tol.sqrt(),
                iterations: it,
                residual,
            });
        }
        if it % POLISH_EVERY == 0 {
            if let Some(cand) = qp.polish(&u) {
                let cv = qp.value(&cand);
                if cv <= value {
                    let r = qp.fixed_point_residual(&cand);
                    if r <= tol {
                        return Ok(QpSolution {
                            u: cand,
                            converged: true,
                            iterations: it + 1,
                            residual: r,
                        });
                    }
                }
            }
        }
    }
    Ok(QpSolution {
        u,
        converged: false,
        iterations: max_inner,
        residual,
    })
}

/// Result of a nonnegative least-squares solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution<T> {
    pub x: Vec<T>,
    /// The normal equations on some passive set were singular and were
    /// solved with a ridge term.
    pub ridge_used: bool,
    pub iterations: usize,
}

/// `min ||A m - b||^2` subject to `m >= 0`.
pub fn nnls<T: Scalar>(a: ArrayView2<'_, T>, b: &[T], tol: T) -> Result<NnlsSolution<T>> {
    if a.nrows() != b.len() {
        return Err(Error::Dimension(format!(
            "A has {} rows, b has {} entries",
            a.nrows(),
            b.len()
        )));
    }
    if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
        return Err(Error::Validation("NNLS data must be finite".into()));
    }
    let g = a.t().dot(&a);
    let h: Vec<T> = (0..a.ncols())
        .map(|j| crate::linalg::dot(&a.column(j).to_vec(), b))
        .collect();
    Ok(nnls_gram(g.view(), &h, tol))
}

/// Lawson-Hanson active set on the normal equations `G = A^T A`,
/// `h = A^T b`. Terminates when every inactive coordinate has gradient
/// `h - G x <= tol`.
pub fn nnls_gram<T: Scalar>(g: ArrayView2<'_, T>, h: &[T], tol: T) -> NnlsSolution<T> {
    let n = h.len();
    let mut x = vec![T::zero(); n];
    let mut passive = vec![false; n];
    let mut blocked = vec![false; n];
    let mut ridge_used = false;
    let mut iterations = 0;
    let max_outer = 10 * n + 10;

    let gradient = |x: &[T]| -> Vec<T> {
        (0..n)
            .map(|i| {
                let mut s = h[i];
                for j in 0..n {
                    s -= g[[i, j]] * x[j];
                }
                s
            })
            .collect()
    };

    let solve_passive = |passive: &[bool], ridge_used: &mut bool| -> Vec<T> {
        let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
        let mut z = vec![T::zero(); n];
        if idx.is_empty() {
            return z;
        }
        let p = idx.len();
        let mut gp = Array2::<T>::zeros((p, p));
        let mut hp = Array2::<T>::zeros((p, 1));
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                gp[[a, b]] = g[[i, j]];
            }
            hp[[a, 0]] = h[i];
        }
        let (sol, ridged) = solve_gram(gp.view(), hp.view());
        *ridge_used |= ridged;
        for (a, &i) in idx.iter().enumerate() {
            z[i] = sol[[a, 0]];
        }
        z
    };

    while iterations < max_outer {
        iterations += 1;
        let w = gradient(&x);
        let pick = (0..n)
            .filter(|&i| !passive[i] && !blocked[i] && w[i] > tol)
            .max_by(|&a, &b| w[a].partial_cmp(&w[b]).expect("finite").then(b.cmp(&a)));
        let Some(j) = pick else { break };
        passive[j] = true;
        let mut first = true;
        loop {
            let z = solve_passive(&passive, &mut ridge_used);
            if first && z[j] <= T::zero() {
                // The new coordinate cannot enter; rounding noise in w.
                passive[j] = false;
                blocked[j] = true;
                break;
            }
            first = false;
            if (0..n).all(|i| !passive[i] || z[i] > T::zero()) {
                x = z;
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }
            let mut alpha = T::one();
            for i in 0..n {
                if passive[i] && z[i] <= T::zero() {
                    let denom = x[i] - z[i];
                    let a = if denom > T::zero() { x[i] / denom } else { T::zero() };
                    if a < alpha {
                        alpha = a;
                    }
                }
            }
            for i in 0..n {
                if passive[i] {
                    let step = alpha * (z[i] - x[i]);
                    x[i] += step;
                    if x[i] <= T::epsilon() * T::lit(8.0) * x[i].abs().max(T::one()) && z[i] <= T::zero() {
                        x[i] = T::zero();
                        passive[i] = false;
                    }
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    for xi in x.iter_mut() {
        if *xi < T::zero() {
            *xi = T::zero();
        }
    }
    NnlsSolution {
        x,
        ridge_used,
        iterations,
    }
}
