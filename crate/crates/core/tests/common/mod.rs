//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use orkm::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-13 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in (col + 1)..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Every nonempty subset of `0..k` as a bitmask.
fn supports(k: usize) -> impl Iterator<Item = Vec<usize>> {
    (1u32..(1 << k)).map(move |mask| (0..k).filter(|&i| mask >> i & 1 == 1).collect())
}

/// Projection onto the simplex: for each support the affine projection,
/// keeping the closest candidate that is nonnegative.
pub fn simplex_oracle(y: &[f64]) -> Vec<f64> {
    let k = y.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in supports(k) {
        let theta = (s.iter().map(|&i| y[i]).sum::<f64>() - 1.0) / s.len() as f64;
        let mut x = vec![0.0; k];
        for &i in &s {
            x[i] = y[i] - theta;
        }
        if x.iter().any(|&v| v < -1e-14) {
            continue;
        }
        let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, x));
        }
    }
    best.expect("some support is feasible").1
}

/// `min 0.5 u'Hu - c'u` on the simplex by enumerating supports and solving
/// the equality-constrained KKT system on each.
pub fn qp_oracle(h: &Array2<f64>, c: &[f64]) -> Vec<f64> {
    let k = c.len();
    let value = |u: &[f64]| {
        let mut q = 0.0;
        for a in 0..k {
            for b in 0..k {
                q += u[a] * h[[a, b]] * u[b];
            }
        }
        0.5 * q - u.iter().zip(c).map(|(a, b)| a * b).sum::<f64>()
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in supports(k) {
        let m = s.len();
        // [H_SS 1; 1' 0] [u; -lambda] = [c_S; 1]
        let mut a = vec![vec![0.0; m + 1]; m + 1];
        let mut b = vec![0.0; m + 1];
        for (p, &i) in s.iter().enumerate() {
            for (q, &j) in s.iter().enumerate() {
                a[p][q] = h[[i, j]];
            }
            a[p][m] = 1.0;
            a[m][p] = 1.0;
            b[p] = c[i];
        }
        b[m] = 1.0;
        let Some(sol) = solve_dense(a, b) else { continue };
        let mut u = vec![0.0; k];
        for (p, &i) in s.iter().enumerate() {
            u[i] = sol[p];
        }
        if u.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let f = value(&u);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, u));
        }
    }
    best.expect("vertices are always candidates").1
}

/// `min ||Ax - b||` with `x >= 0` by solving the normal equations on every
/// support (plus the zero vector).
pub fn nnls_oracle(a: &Array2<f64>, b: &[f64]) -> Vec<f64> {
    let j = a.ncols();
    let resid = |x: &[f64]| -> f64 {
        (0..a.nrows())
            .map(|r| {
                let p: f64 = (0..j).map(|c| a[[r, c]] * x[c]).sum();
                (p - b[r]).powi(2)
            })
            .sum()
    };
    let mut best = (resid(&vec![0.0; j]), vec![0.0; j]);
    for s in supports(j) {
        let g: Vec<Vec<f64>> = s
            .iter()
            .map(|&p| {
                s.iter()
                    .map(|&q| (0..a.nrows()).map(|r| a[[r, p]] * a[[r, q]]).sum())
                    .collect()
            })
            .collect();
        let h: Vec<f64> = s
            .iter()
            .map(|&p| (0..a.nrows()).map(|r| a[[r, p]] * b[r]).sum())
            .collect();
        let Some(xs) = solve_dense(g, h) else { continue };
        if xs.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut x = vec![0.0; j];
        for (p, &i) in s.iter().enumerate() {
            x[i] = xs[p];
        }
        let r = resid(&x);
        if r < best.0 {
            best = (r, x);
        }
    }
    best.1
}

/// NMI straight from the definition, with log base 2 (the ratio does not
/// depend on the base).
pub fn nmi_oracle(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len() as f64;
    let classes = |l: &[usize]| {
        let mut v = l.to_vec();
        v.sort_unstable();
        v.dedup();
        v
    };
    let (cp, ct) = (classes(pred), classes(truth));
    let count = |f: &dyn Fn(usize) -> bool| (0..pred.len()).filter(|&i| f(i)).count() as f64;
    let ent = |cs: &[usize], l: &[usize]| -> f64 {
        cs.iter()
            .map(|&c| {
                let p = count(&|i| l[i] == c) / n;
                -p * p.log2()
            })
            .sum()
    };
    let (hp, ht) = (ent(&cp, pred), ent(&ct, truth));
    if hp + ht == 0.0 {
        return 1.0;
    }
    let mut mi = 0.0;
    for &a in &cp {
        for &b in &ct {
            let pab = count(&|i| pred[i] == a && truth[i] == b) / n;
            if pab > 0.0 {
                let pa = count(&|i| pred[i] == a) / n;
                let pb = count(&|i| truth[i] == b) / n;
                mi += pab * (pab / (pa * pb)).log2();
            }
        }
    }
    2.0 * mi / (hp + ht)
}

pub fn purity_oracle(pred: &[usize], truth: &[usize]) -> f64 {
    let mut hits = 0;
    let mut seen = Vec::new();
    for &c in pred {
        if seen.contains(&c) {
            continue;
        }
        seen.push(c);
        let members: Vec<usize> = (0..pred.len()).filter(|&i| pred[i] == c).collect();
        let best = members
            .iter()
            .map(|&i| members.iter().filter(|&&j| truth[j] == truth[i]).count())
            .max()
            .unwrap_or(0);
        hits += best;
    }
    hits as f64 / pred.len() as f64
}

/// Precision, recall, F-score and Rand index by visiting every pair.
pub fn pair_oracle(pred: &[usize], truth: &[usize]) -> [f64; 4] {
    let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..pred.len() {
        for j in (i + 1)..pred.len() {
            match (pred[i] == pred[j], truth[i] == truth[j]) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
    }
    let ratio = |a: u64, b: u64| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    [p, r, f, ratio(tp + tn, tp + fp + fn_ + tn)]
}

/// Plain Lloyd iterations from the given centers; returns the labels of
/// every assignment pass, starting with the one against `centers`.
pub fn lloyd_reference(x: &Array2<f64>, centers: &Array2<f64>, iterations: usize) -> Vec<Vec<usize>> {
    let (n, j) = x.dim();
    let k = centers.nrows();
    let mut c = centers.clone();
    let mut out = Vec::new();
    for _ in 0..iterations {
        let labels: Vec<usize> = (0..n)
            .map(|i| {
                (0..k)
                    .map(|q| (q, (0..j).map(|d| (x[[i, d]] - c[[q, d]]).powi(2)).sum::<f64>()))
                    .fold((0, f64::INFINITY), |b, (q, d)| if d < b.1 { (q, d) } else { b })
                    .0
            })
            .collect();
        for q in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == q).collect();
            if !members.is_empty() {
                for d in 0..j {
                    c[[q, d]] = members.iter().map(|&i| x[[i, d]]).sum::<f64>() / members.len() as f64;
                }
            }
        }
        out.push(labels);
    }
    out
}

pub fn random_labels(r: &mut impl Rng, n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|_| r.random_range(0..k)).collect()
}

/// Random multi-view data with loose cluster structure.
pub fn random_dataset(r: &mut impl Rng, n: usize, k: usize, dims: &[usize], nonneg: bool) -> Dataset {
    let labels = random_labels(r, n, k);
    let views = dims
        .iter()
        .map(|&j| {
            let means: Vec<f64> = (0..k * j).map(|_| r.random_range(-4.0..4.0)).collect();
            let mut m = Array2::from_shape_fn((n, j), |(i, d)| means[labels[i] * j + d] + r.random_range(-1.0..1.0));
            if nonneg {
                m.mapv_inplace(f64::abs);
            }
            m
        })
        .collect();
    Dataset::new(views, Some(labels), "random").unwrap()
}
