//! External clustering indices: NMI, purity and pair-counting scores.
//!
//! Label values are arbitrary ids; only the partition they induce matters.
//! Sums are taken over sorted terms so that a partition scored against any
//! relabeling of itself gives exactly 1.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Counts of samples per (predicted cluster, true class).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    n: u64,
}

impl ContingencyTable {
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::Validation(format!(
                "label vectors differ in length: {} vs {}",
                pred.len(),
                truth.len()
            )));
        }
        if pred.is_empty() {
            return Err(Error::Validation("label vectors are empty".into()));
        }
        let rows = dense_ids(pred);
        let cols = dense_ids(truth);
        let mut counts = vec![vec![0u64; cols.len()]; rows.len()];
        for (p, t) in pred.iter().zip(truth) {
            counts[rows[p]][cols[t]] += 1;
        }
        Ok(Self {
            counts,
            n: pred.len() as u64,
        })
    }

    /// `counts()[i][j]`: samples in predicted cluster `i` and true class `j`,
    /// with ids in ascending order of the original labels.
    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let cols = self.counts.first().map_or(0, Vec::len);
        (0..cols).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }
}

fn dense_ids(labels: &[usize]) -> BTreeMap<usize, usize> {
    let mut ids: BTreeMap<usize, usize> = labels.iter().map(|&l| (l, 0)).collect();
    for (i, id) in ids.values_mut().enumerate() {
        *id = i;
    }
    ids
}

fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

fn entropy(sums: &[u64], n: f64) -> f64 {
    sorted_sum(
        sums.iter()
            .filter(|&&a| a > 0)
            .map(|&a| {
                let a = a as f64;
                a / n * (n / a).ln()
            })
            .collect(),
    )
}

/// Normalized mutual information `2 I / (H(pred) + H(truth))`, natural log.
/// Two single-cluster partitions score 1.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    Ok(nmi_table(&ContingencyTable::new(pred, truth)?))
}

pub fn nmi_table(t: &ContingencyTable) -> f64 {
    let n = t.n as f64;
    let a = t.row_sums();
    let b = t.col_sums();
    let h = entropy(&a, n) + entropy(&b, n);
    if h == 0.0 {
        return 1.0;
    }
    let mut terms = Vec::new();
    for (i, row) in t.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                terms.push(c / n * ((n * c) / (a[i] as f64 * b[j] as f64)).ln());
            }
        }
    }
    let mi = sorted_sum(terms);
    (2.0 * mi / h).clamp(0.0, 1.0)
}

/// Fraction of samples in the majority true class of their cluster.
pub fn purity(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let t = ContingencyTable::new(pred, truth)?;
    let hits: u64 = t.counts.iter().map(|r| r.iter().copied().max().unwrap_or(0)).sum();
    Ok(hits as f64 / t.n as f64)
}

/// Pair-counting agreement scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScores {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub rand_index: f64,
}

/// Raw pair counts (true positives, false positives, false negatives, true
/// negatives).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

fn pairs(x: u64) -> u64 {
    x * x.saturating_sub(1) / 2
}

pub fn pair_counts(t: &ContingencyTable) -> PairCounts {
    let tp: u64 = t.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let same_pred: u64 = t.row_sums().into_iter().map(pairs).sum();
    let same_true: u64 = t.col_sums().into_iter().map(pairs).sum();
    let total = pairs(t.n);
    PairCounts {
        tp,
        fp: same_pred - tp,
        fn_: same_true - tp,
        tn: total + tp - same_pred - same_true,
    }
}

/// Precision, recall, F-score and Rand index over all sample pairs. An empty
/// denominator gives precision or recall 1; F is 0 when both are 0.
pub fn pair_scores(pred: &[usize], truth: &[usize]) -> Result<PairScores> {
    let c = pair_counts(&ContingencyTable::new(pred, truth)?);
    let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let fscore = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let rand_index = ratio(c.tp + c.tn, c.tp + c.fp + c.fn_ + c.tn);
    Ok(PairScores {
        precision,
        recall,
        fscore,
        rand_index,
    })
}

/// Named metric, as accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Nmi,
    Purity,
    Precision,
    Recall,
    Fscore,
    Ri,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Nmi,
        Metric::Purity,
        Metric::Precision,
        Metric::Recall,
        Metric::Fscore,
        Metric::Ri,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Nmi => "nmi",
            Metric::Purity => "purity",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::Fscore => "fscore",
            Metric::Ri => "ri",
        }
    }

    pub fn compute(self, pred: &[usize], truth: &[usize]) -> Result<f64> {
        Ok(match self {
            Metric::Nmi => nmi(pred, truth)?,
            Metric::Purity => purity(pred, truth)?,
            Metric::Precision => pair_scores(pred, truth)?.precision,
            Metric::Recall => pair_scores(pred, truth)?.recall,
            Metric::Fscore => pair_scores(pred, truth)?.fscore,
            Metric::Ri => pair_scores(pred, truth)?.rand_index,
        })
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Usage(format!("unknown metric '{s}'")))
    }
}

/// Numeric-code dispatch: 0 purity, 1 precision, 2 recall, 3 F-score,
/// 4 Rand index.
pub fn index(pred: &[usize], truth: &[usize], method: i64) -> Result<f64> {
    let metric = match method {
        0 => Metric::Purity,
        1 => Metric::Precision,
        2 => Metric::Recall,
        3 => Metric::Fscore,
        4 => Metric::Ri,
        _ => {
            return Err(Error::Usage(format!(
                "unknown index method {method}; valid codes are 0 (purity), 1 (precision), \
                 2 (recall), 3 (fscore), 4 (rand index)"
            )))
        }
    };
    metric.compute(pred, truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nmi_examples() {
        assert_eq!(nmi(&[1, 1, 2, 2], &[2, 2, 1, 1]).unwrap(), 1.0);
        assert!(nmi(&[1, 1, 2, 2], &[1, 2, 1, 2]).unwrap().abs() < 1e-15);
        assert_eq!(nmi(&[3, 3, 3], &[0, 0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn purity_examples() {
        assert_eq!(purity(&[1, 1, 2, 2], &[1, 1, 2, 1]).unwrap(), 0.75);
        assert_eq!(purity(&[1, 1, 1, 1], &[1, 2, 1, 2]).unwrap(), 0.5);
    }

    #[test]
    fn pair_example() {
        let s = pair_scores(&[1, 1, 2, 2], &[1, 1, 1, 2]).unwrap();
        assert!((s.precision - 0.5).abs() < 1e-15);
        assert!((s.recall - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.fscore - 0.4).abs() < 1e-15);
        assert!((s.rand_index - 0.5).abs() < 1e-15);
    }

    #[test]
    fn singletons_use_empty_denominator_convention() {
        let s = pair_scores(&[0, 1, 2], &[5, 6, 7]).unwrap();
        assert_eq!((s.precision, s.recall, s.fscore, s.rand_index), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn index_codes() {
        assert_eq!(index(&[0, 0, 1], &[0, 0, 1], 0).unwrap(), 1.0);
        assert!((index(&[1, 1, 2, 2], &[1, 1, 1, 2], 3).unwrap() - 0.4).abs() < 1e-15);
        assert!(index(&[0], &[0], 7).unwrap_err().is_usage());
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(nmi(&[0, 1], &[0]), Err(Error::Validation(_))));
    }
}
