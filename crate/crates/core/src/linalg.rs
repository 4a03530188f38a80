//! Small dense linear algebra used by the row and column subproblems.
//!
//! Systems here are at most K x K with K in the tens, so plain
//! Cholesky and partially pivoted LU are enough.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::scalar::Scalar;

/// Ridge added to a Gram matrix whose Cholesky factorization fails.
pub const RIDGE_DELTA: f64 = 1e-10;

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

pub(crate) fn row<T, S>(m: &ndarray::ArrayBase<S, ndarray::Ix2>, i: usize) -> &[T]
where
    T: Scalar,
    S: ndarray::Data<Elem = T>,
{
    let cols = m.ncols();
    let start = i * cols;
    &m.as_slice().expect("standard layout")[start..start + cols]
}

/// Upper bound on the largest eigenvalue of a symmetric matrix from the
/// Gershgorin discs (max absolute row sum).
pub fn gershgorin_bound<T: Scalar>(h: ArrayView2<'_, T>) -> T {
    h.rows()
        .into_iter()
        .map(|r| r.iter().fold(T::zero(), |acc, &x| acc + x.abs()))
        .fold(T::zero(), T::max)
}

/// Lower-triangular Cholesky factor, or `None` when a pivot is not
/// safely positive.
pub fn cholesky<T: Scalar>(a: ArrayView2<'_, T>) -> Option<Array2<T>> {
    let n = a.nrows();
    let scale = a
        .diag()
        .iter()
        .fold(T::zero(), |m, &d| m.max(d.abs()))
        .max(T::min_positive_value());
    let floor = T::epsilon() * T::from_usize_lossy(n.max(1) * 16) * scale;
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for p in 0..j {
            d -= l[[j, p]] * l[[j, p]];
        }
        if !(d > floor) {
            return None;
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for p in 0..j {
                s -= l[[i, p]] * l[[j, p]];
            }
            l[[i, j]] = s / d;
        }
    }
    Some(l)
}

/// Solves `L L^T x = b` in place.
pub fn cholesky_solve_in_place<T: Scalar>(l: &Array2<T>, b: &mut [T]) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for p in 0..i {
            s -= l[[i, p]] * b[p];
        }
        b[i] = s / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for p in (i + 1)..n {
            s -= l[[p, i]] * b[p];
        }
        b[i] = s / l[[i, i]];
    }
}

/// Solves `G X = R` for a symmetric positive semidefinite `G`, adding
/// `RIDGE_DELTA` (relative to the diagonal scale) when the factorization
/// fails. Returns the solution and whether the ridge was needed.
pub fn solve_gram<T: Scalar>(g: ArrayView2<'_, T>, rhs: ArrayView2<'_, T>) -> (Array2<T>, bool) {
    let (l, ridged) = match cholesky(g) {
        Some(l) => (l, false),
        None => {
            let scale = g.diag().iter().fold(T::one(), |m, &d| m.max(d.abs()));
            let mut gr = g.to_owned();
            let delta = T::lit(RIDGE_DELTA) * scale;
            for i in 0..gr.nrows() {
                gr[[i, i]] += delta;
            }
            let l = cholesky(gr.view()).unwrap_or_else(|| {
                // Rank-deficient beyond what the ridge fixes: fall back to a
                // heavier diagonal loading that is always factorizable.
                let mut gh = g.to_owned();
                for i in 0..gh.nrows() {
                    gh[[i, i]] += T::lit(1e-6) * scale;
                }
                cholesky(gh.view()).expect("loaded gram is positive definite")
            });
            (l, true)
        }
    };
    let mut out = rhs.to_owned();
    let mut col = vec![T::zero(); g.nrows()];
    for j in 0..rhs.ncols() {
        for i in 0..col.len() {
            col[i] = rhs[[i, j]];
        }
        cholesky_solve_in_place(&l, &mut col);
        for i in 0..col.len() {
            out[[i, j]] = col[i];
        }
    }
    (out, ridged)
}

/// Gaussian elimination with partial pivoting. `None` if the matrix is
/// numerically singular.
pub fn solve_lu<T: Scalar>(mut a: Array2<T>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = a.nrows();
    let scale = a.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    if scale == T::zero() {
        return None;
    }
    let floor = T::epsilon() * T::from_usize_lossy(n.max(1) * 64) * scale;
    for col in 0..n {
        let (piv, pmax) = (col..n)
            .map(|r| (r, a[[r, col]].abs()))
            .fold((col, T::neg_infinity()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if !(pmax > floor) {
            return None;
        }
        if piv != col {
            for j in 0..n {
                a.swap([col, j], [piv, j]);
            }
            b.swap(col, piv);
        }
        let d = a[[col, col]];
        for r in (col + 1)..n {
            let f = a[[r, col]] / d;
            if f == T::zero() {
                continue;
            }
            for j in col..n {
                let v = a[[col, j]];
                a[[r, j]] -= f * v;
            }
            let v = b[col];
            b[r] -= f * v;
        }
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in (i + 1)..n {
            s -= a[[i, j]] * b[j];
        }
        b[i] = s / a[[i, i]];
    }
    Some(b)
}

/// `M M^T` for a K x J center matrix.
pub fn gram_rows<T: Scalar>(m: &Array2<T>) -> Array2<T> {
    let k = m.nrows();
    let mut g = Array2::<T>::zeros((k, k));
    for a in 0..k {
        for b in a..k {
            let v = dot(row(m, a), row(m, b));
            g[[a, b]] = v;
            g[[b, a]] = v;
        }
    }
    g
}

pub fn mat_vec<T: Scalar>(m: ArrayView2<'_, T>, x: ArrayView1<'_, T>) -> Array1<T> {
    m.dot(&x)
}
