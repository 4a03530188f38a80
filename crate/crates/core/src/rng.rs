//! Seeded randomness.
//!
//! Sequential draws come from ChaCha8 with the stream id set to a purpose
//! tag, so the generators used for different jobs under one seed never
//! overlap. Per-row draws (center seeding, random initial assignments) are
//! keyed by `(seed, purpose, row content)` instead of the row index, which
//! makes them invariant to the order of the rows.

use std::cmp::Ordering;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{row, sq_dist};
use crate::scalar::Scalar;

/// Purpose tags for independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    CenterSeeding = 1,
    InitialAssignment = 2,
    DataLabels = 3,
    DataNoise = 4,
    DataMeans = 5,
    NoiseView = 6,
    Reseed = 7,
}

pub fn stream(seed: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of one sample's content across all views.
pub fn content_hash<T: Scalar>(views: &[Array2<T>], i: usize) -> u64 {
    let mut h = 0x243F_6A88_85A3_08D3u64;
    for v in views {
        for &x in row(v, i) {
            // +0.0 and -0.0 hash alike
            let bits = if x == T::zero() { 0 } else { x.as_f64().to_bits() };
            h = splitmix(h ^ bits);
        }
        h = splitmix(h ^ 0xA5A5);
    }
    h
}

/// Uniform draw in (0, 1] keyed by a row hash.
pub fn keyed_unit(seed: u64, purpose: Purpose, content: u64, counter: u64) -> f64 {
    let z = splitmix(splitmix(splitmix(seed ^ (purpose as u64).rotate_left(32)) ^ content) ^ counter);
    ((z >> 11) as f64 + 1.0) / (1u64 << 53) as f64
}

fn cmp_content<T: Scalar>(views: &[Array2<T>], a: usize, b: usize) -> Ordering {
    for v in views {
        for (&x, &y) in row(v, a).iter().zip(row(v, b)) {
            match x.partial_cmp(&y) {
                Some(Ordering::Equal) | None => {}
                Some(o) => return o,
            }
        }
    }
    Ordering::Equal
}

/// Rows chosen as initial centers.
#[derive(Debug, Clone)]
pub struct SeedSelection {
    pub rows: Vec<usize>,
    /// Fewer than K distinct rows were available.
    pub duplicates: bool,
}

/// Picks `k` distinct rows among the first `n` by greedy k-means++: every
/// round after the first draws a few D^2-weighted candidates and keeps the
/// one that lowers the total squared distance most. Draws are keyed by row
/// content, so the chosen set does not depend on row order.
pub fn seed_rows<T: Scalar>(views: &[Array2<T>], n: usize, k: usize, seed: u64, purpose: Purpose) -> SeedSelection {
    let hashes: Vec<u64> = (0..n).map(|i| content_hash(views, i)).collect();
    let dist = |a: usize, b: usize| -> f64 { views.iter().map(|v| sq_dist(row(v, a), row(v, b)).as_f64()).sum() };
    let trials = 2 + (k.max(1) as f64).ln().floor() as u64;
    let mut d2 = vec![f64::INFINITY; n];
    let mut taken = vec![false; n];
    let mut rows = Vec::with_capacity(k);
    let mut duplicates = false;

    for round in 0..k {
        let draws = if round == 0 { 1 } else { trials };
        let mut candidates: Vec<usize> = Vec::new();
        for trial in 0..draws {
            let counter = (round as u64) << 8 | trial;
            let mut best: Option<(f64, usize)> = None;
            for i in 0..n {
                if taken[i] {
                    continue;
                }
                let w = if round == 0 { 1.0 } else { d2[i] };
                if !(w > 0.0) {
                    continue;
                }
                let u = keyed_unit(seed, purpose, hashes[i], counter);
                let key = -u.ln() / w;
                best = match best {
                    None => Some((key, i)),
                    Some((bk, bi)) => {
                        let ord = key
                            .partial_cmp(&bk)
                            .unwrap_or(Ordering::Equal)
                            .then_with(|| cmp_content(views, i, bi));
                        if ord == Ordering::Less {
                            Some((key, i))
                        } else {
                            Some((bk, bi))
                        }
                    }
                };
            }
            if let Some((_, i)) = best {
                if !candidates.contains(&i) {
                    candidates.push(i);
                }
            }
        }
        let pick = if candidates.len() > 1 {
            let potential = |c: usize| -> f64 { (0..n).map(|i| d2[i].min(dist(i, c))).sum() };
            let scored: Vec<(f64, usize)> = candidates.iter().map(|&c| (potential(c), c)).collect();
            scored
                .into_iter()
                .min_by(|a, b| {
                    a.0.partial_cmp(&b.0)
                        .unwrap_or(Ordering::Equal)
                        .then_with(|| cmp_content(views, a.1, b.1))
                })
                .map(|(_, c)| c)
        } else {
            candidates.first().copied()
        };
        let pick = match pick {
            Some(i) => i,
            None => {
                duplicates = true;
                match (0..n)
                    .filter(|&i| !taken[i])
                    .min_by(|&a, &b| cmp_content(views, a, b).then(a.cmp(&b)))
                {
                    Some(i) => i,
                    None => break,
                }
            }
        };
        taken[pick] = true;
        rows.push(pick);
        for i in 0..n {
            let d = dist(i, pick);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    SeedSelection { rows, duplicates }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn seeding_is_order_invariant() {
        let a = array![[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0], [9.0, 0.0]];
        let perm = [3usize, 0, 4, 2, 1];
        let mut b = a.clone();
        for (dst, &src) in perm.iter().enumerate() {
            b.row_mut(dst).assign(&a.row(src));
        }
        let sa = seed_rows(std::slice::from_ref(&a), 5, 3, 11, Purpose::CenterSeeding);
        let sb = seed_rows(std::slice::from_ref(&b), 5, 3, 11, Purpose::CenterSeeding);
        let mapped: Vec<usize> = sb.rows.iter().map(|&r| perm[r]).collect();
        assert_eq!(sa.rows, mapped);
    }

    #[test]
    fn seeding_flags_duplicates() {
        let a = array![[1.0], [1.0], [1.0]];
        let s = seed_rows(std::slice::from_ref(&a), 3, 2, 0, Purpose::CenterSeeding);
        assert_eq!(s.rows.len(), 2);
        assert!(s.duplicates);
    }

    #[test]
    fn keyed_unit_in_range() {
        for c in 0..1000 {
            let u = keyed_unit(3, Purpose::InitialAssignment, c * 7919, c);
            assert!(u > 0.0 && u <= 1.0);
        }
    }
}
