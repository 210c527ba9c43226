//! Partition agreement (ARI, NMI, minimum Hamming distance) and the
//! reconstructed mean-matrix error.
//!
//! Labels are arbitrary `usize` values except for [`min_hamming`], which
//! expects labels in `0..K`.

use std::collections::BTreeMap;

use crate::assignment;
use crate::data::Matrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("label vectors have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("partition has a single cluster; NMI is undefined")]
    DegeneratePartition,
    #[error("label {label} at position {index} is not below K = {k}")]
    LabelOutOfRange { index: usize, label: usize, k: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("need at least 2 observations")]
    TooFewObservations,
}

/// Cross-tabulation of two labelings; rows follow the first argument.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<usize>>,
    pub row_sums: Vec<usize>,
    pub col_sums: Vec<usize>,
    pub n: usize,
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    for &l in labels {
        let next = map.len();
        map.entry(l).or_insert(next);
    }
    (labels.iter().map(|l| map[l]).collect(), map.len())
}

impl ContingencyTable {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self, MetricsError> {
        if a.len() != b.len() {
            return Err(MetricsError::LengthMismatch(a.len(), b.len()));
        }
        let (a, ka) = compact(a);
        let (b, kb) = compact(b);
        let mut counts = vec![vec![0; kb]; ka];
        for (&x, &y) in a.iter().zip(&b) {
            counts[x][y] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..kb).map(|c| counts.iter().map(|r| r[c]).sum()).collect();
        Ok(Self {
            counts,
            row_sums,
            col_sums,
            n: a.len(),
        })
    }
}

fn choose2(m: usize) -> f64 {
    let m = m as f64;
    m * (m - 1.0) / 2.0
}

/// Adjusted Rand index. When the denominator vanishes the two partitions
/// coincide (both all-singletons or both one block) and 1 is returned.
pub fn ari(z_true: &[usize], z_est: &[usize]) -> Result<f64, MetricsError> {
    let table = ContingencyTable::new(z_true, z_est)?;
    if table.n < 2 {
        return Err(MetricsError::TooFewObservations);
    }
    let index: f64 = table.counts.iter().flatten().map(|&c| choose2(c)).sum();
    let a: f64 = table.row_sums.iter().map(|&c| choose2(c)).sum();
    let b: f64 = table.col_sums.iter().map(|&c| choose2(c)).sum();
    let expected = a * b / choose2(table.n);
    let max_index = (a + b) / 2.0;
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

fn entropy(sums: &[usize], n: f64) -> f64 {
    sums.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / n;
            -q * q.ln()
        })
        .sum()
}

/// Mutual information over the geometric mean of the two entropies.
pub fn nmi(z_true: &[usize], z_est: &[usize]) -> Result<f64, MetricsError> {
    let table = ContingencyTable::new(z_true, z_est)?;
    if table.row_sums.len() < 2 || table.col_sums.len() < 2 {
        return Err(MetricsError::DegeneratePartition);
    }
    let n = table.n as f64;
    let mut mi = 0.0;
    for (r, row) in table.counts.iter().enumerate() {
        for (c, &count) in row.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let joint = count as f64 / n;
            let pr = table.row_sums[r] as f64 / n;
            let pc = table.col_sums[c] as f64 / n;
            mi += joint * (joint / (pr * pc)).ln();
        }
    }
    let h = (entropy(&table.row_sums, n) * entropy(&table.col_sums, n)).sqrt();
    Ok((mi / h).clamp(0.0, 1.0))
}

/// `(1/n) min_τ Σ 1{z_i ≠ τ(z′_i)}` over permutations τ of `0..k`.
pub fn min_hamming(z: &[usize], z_prime: &[usize], k: usize) -> Result<f64, MetricsError> {
    if z.len() != z_prime.len() {
        return Err(MetricsError::LengthMismatch(z.len(), z_prime.len()));
    }
    for labels in [z, z_prime] {
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(MetricsError::LabelOutOfRange { index, label, k });
        }
    }
    if z.is_empty() {
        return Ok(0.0);
    }
    let mut matches = vec![vec![0.0; k]; k];
    for (&a, &b) in z.iter().zip(z_prime) {
        matches[b][a] += 1.0;
    }
    let cost: Vec<Vec<f64>> = matches
        .iter()
        .map(|row| row.iter().map(|&m| -m).collect())
        .collect();
    let tau = assignment::solve(&cost);
    let agreed: f64 = tau.iter().enumerate().map(|(b, &a)| matches[b][a]).sum();
    Ok((z.len() as f64 - agreed) / z.len() as f64)
}

/// [`min_hamming`] with K set to the larger of the two label counts; labels
/// are compacted first.
pub fn min_hamming_padded(z: &[usize], z_prime: &[usize]) -> Result<f64, MetricsError> {
    if z.len() != z_prime.len() {
        return Err(MetricsError::LengthMismatch(z.len(), z_prime.len()));
    }
    let (a, ka) = compact(z);
    let (b, kb) = compact(z_prime);
    min_hamming(&a, &b, ka.max(kb))
}

/// `‖μ̂ L̂ᵀ − μ* L*ᵀ‖²_F`.
pub fn mean_matrix_error(
    mu_hat: &Matrix,
    z_hat: &[usize],
    mu_true: &Matrix,
    z_true: &[usize],
) -> Result<f64, MetricsError> {
    if mu_hat.rows() != mu_true.rows() {
        return Err(MetricsError::DimensionMismatch(format!(
            "estimated means have {} features, true means {}",
            mu_hat.rows(),
            mu_true.rows()
        )));
    }
    if z_hat.len() != z_true.len() {
        return Err(MetricsError::LengthMismatch(z_hat.len(), z_true.len()));
    }
    let check = |z: &[usize], cols: usize, what: &str| {
        match z.iter().find(|&&l| l >= cols) {
            Some(l) => Err(MetricsError::DimensionMismatch(format!(
                "{what} label {l} but only {cols} mean columns"
            ))),
            None => Ok(()),
        }
    };
    check(z_hat, mu_hat.cols(), "estimated")?;
    check(z_true, mu_true.cols(), "true")?;
    Ok(z_hat
        .iter()
        .zip(z_true)
        .map(|(&a, &b)| crate::state::squared_distance(mu_hat.column(a), mu_true.column(b)))
        .sum())
}
