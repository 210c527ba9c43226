//! Label alignment across snapshots, point estimates, and the Gelman–Rubin
//! potential scale reduction factor.
//!
//! Alignment picks the reference snapshot `b*` with the smallest
//! reconstruction error `‖Y − μ Lᵀ‖²_F`, then relabels every snapshot by the
//! permutation minimizing `‖μ^{(b*)} − μ^{(b)} P‖²_F`. Snapshots whose cluster
//! count differs from the reference are matched through a cost matrix padded
//! with a constant; their unmatched clusters take the labels after the
//! reference's, in original-label order.
//!
//! The per-observation estimate `ẑ` is the modal aligned label among
//! snapshots whose `K` equals the posterior mode `K̂`: labels from snapshots
//! with a different `K` are not comparable even after alignment.

use serde::{Deserialize, Serialize};

use crate::assignment;
use crate::data::{DataMatrix, Matrix};
use crate::state::squared_distance;
use crate::trace::{ChainTrace, Snapshot};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SummaryError {
    #[error("the trace has no snapshots")]
    EmptyTrace,
    #[error("need at least 2 chains, got {0}")]
    TooFewChains(usize),
    #[error("chains have mismatched lengths")]
    MismatchedLengths,
    #[error("chains need at least 2 draws, got {0}")]
    TooShort(usize),
    #[error("traces disagree on dimensions")]
    DimensionMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedSnapshot {
    /// `perm[original label] = aligned label`.
    pub perm: Vec<usize>,
    /// Aligned labels.
    pub z: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedTrace {
    /// Original snapshots of every chain, concatenated in chain order.
    pub snapshots: Vec<Snapshot>,
    pub chain_lengths: Vec<usize>,
    pub aligned: Vec<AlignedSnapshot>,
    /// Index of `b*` in `snapshots`.
    pub reference: usize,
    /// Reconstruction error of every snapshot.
    pub sse: Vec<f64>,
    pub p: usize,
}

impl AlignedTrace {
    pub fn reference_k(&self) -> usize {
        self.snapshots[self.reference].k
    }

    /// Original cluster carrying aligned label `label` in snapshot `b`.
    pub fn original_cluster(&self, b: usize, label: usize) -> Option<usize> {
        self.aligned[b].perm.iter().position(|&a| a == label)
    }

    /// Aligned mean of `label` in snapshot `b`, expanded to length p.
    pub fn aligned_mean(&self, b: usize, label: usize) -> Option<Vec<f64>> {
        self.original_cluster(b, label)
            .map(|c| self.snapshots[b].dense_mean(c, self.p))
    }

    /// Per-chain ranges into `snapshots`.
    pub fn chain_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.chain_lengths
            .iter()
            .map(|&len| {
                let r = start..start + len;
                start += len;
                r
            })
            .collect()
    }
}

/// Permutation (original → aligned label) of `means` against `reference`.
pub fn match_to_reference(means: &[Vec<f64>], reference: &[Vec<f64>]) -> Vec<usize> {
    let k = means.len();
    let k_ref = reference.len();
    let m = k.max(k_ref);
    let mut cost = vec![vec![0.0; m]; m];
    let mut max_cost: f64 = 0.0;
    for (r, mu) in means.iter().enumerate() {
        for (c, mu_ref) in reference.iter().enumerate() {
            cost[r][c] = squared_distance(mu, mu_ref);
            max_cost = max_cost.max(cost[r][c]);
        }
    }
    let pad = 1.0 + 2.0 * max_cost;
    for (r, row) in cost.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            if r >= k || c >= k_ref {
                *v = pad;
            }
        }
    }
    let solution = assignment::solve(&cost);
    let mut perm = vec![usize::MAX; k];
    let mut next_free = k_ref;
    for r in 0..k {
        let c = solution[r];
        if c < k_ref {
            perm[r] = c;
        }
    }
    for slot in perm.iter_mut() {
        if *slot == usize::MAX {
            *slot = next_free;
            next_free += 1;
        }
    }
    perm
}

/// Aligns one chain's snapshots.
pub fn align_labels(trace: &ChainTrace, data: &DataMatrix) -> Result<AlignedTrace, SummaryError> {
    align_chains(std::slice::from_ref(trace), data)
}

fn dense_means(s: &Snapshot, p: usize) -> Vec<Vec<f64>> {
    (0..s.k).map(|c| s.dense_mean(c, p)).collect()
}

fn argmin_first(candidates: impl IntoIterator<Item = usize>, values: &[f64]) -> usize {
    candidates
        .into_iter()
        .fold(None, |best: Option<usize>, b| match best {
            Some(a) if values[a] <= values[b] => Some(a),
            _ => Some(b),
        })
        .expect("non-empty candidate set")
}

/// Aligns several chains jointly against a single reference snapshot.
pub fn align_chains(traces: &[ChainTrace], data: &DataMatrix) -> Result<AlignedTrace, SummaryError> {
    let snapshots: Vec<Snapshot> = traces.iter().flat_map(|t| t.snapshots.iter().cloned()).collect();
    if snapshots.is_empty() {
        return Err(SummaryError::EmptyTrace);
    }
    if snapshots.iter().any(|s| s.z.len() != data.n()) {
        return Err(SummaryError::DimensionMismatch);
    }
    let p = data.p();
    let sse: Vec<f64> = snapshots.iter().map(|s| s.residual_sum_of_squares(data)).collect();
    let reference = argmin_first(0..snapshots.len(), &sse);
    let ref_means = dense_means(&snapshots[reference], p);
    let aligned = snapshots
        .iter()
        .map(|s| {
            let perm = match_to_reference(&dense_means(s, p), &ref_means);
            let z = s.z.iter().map(|&l| perm[l]).collect();
            AlignedSnapshot { perm, z }
        })
        .collect();
    Ok(AlignedTrace {
        snapshots,
        chain_lengths: traces.iter().map(|t| t.snapshots.len()).collect(),
        aligned,
        reference,
        sse,
        p,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEstimate {
    pub k_hat: usize,
    /// Dense labels `0..k_hat`.
    pub z_hat: Vec<usize>,
    /// p×k_hat matrix of posterior mean cluster centers.
    pub mu_hat: Matrix,
    /// Features with posterior inclusion frequency ≥ 1/2.
    pub support_hat: Vec<usize>,
    pub inclusion_frequency: Vec<f64>,
    /// `(K, number of snapshots)` pairs, ascending in K.
    pub k_counts: Vec<(usize, usize)>,
}

pub const SUPPORT_THRESHOLD: f64 = 0.5;

fn argmax_lowest(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

pub fn point_estimates(aligned: &AlignedTrace) -> ClusterEstimate {
    let snaps = &aligned.snapshots;
    let p = aligned.p;
    let n = snaps[0].z.len();

    let max_k = snaps.iter().map(|s| s.k).max().unwrap_or(0);
    let mut k_hist = vec![0usize; max_k + 1];
    for s in snaps {
        k_hist[s.k] += 1;
    }
    let k_mode = argmax_lowest(&k_hist);
    let k_counts = k_hist
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| (k, c))
        .collect();

    let selected: Vec<usize> = (0..snaps.len()).filter(|&b| snaps[b].k == k_mode).collect();
    // Snapshots with K = K̂ must share the label set 0..K̂; when b* has a
    // different K they are re-matched against the best K̂ snapshot instead.
    let perms: Vec<Vec<usize>> = if aligned.reference_k() == k_mode {
        selected.iter().map(|&b| aligned.aligned[b].perm.clone()).collect()
    } else {
        let local = argmin_first(selected.iter().copied(), &aligned.sse);
        let ref_means = dense_means(&snaps[local], p);
        selected
            .iter()
            .map(|&b| match_to_reference(&dense_means(&snaps[b], p), &ref_means))
            .collect()
    };
    let mut votes = vec![vec![0usize; k_mode]; n];
    for (&b, perm) in selected.iter().zip(&perms) {
        for (i, &l) in snaps[b].z.iter().enumerate() {
            votes[i][perm[l]] += 1;
        }
    }
    let modal: Vec<usize> = votes.iter().map(|v| argmax_lowest(v)).collect();

    let mut used: Vec<usize> = modal.clone();
    used.sort_unstable();
    used.dedup();
    if used.len() < k_mode {
        log::warn!(
            "posterior mode K = {k_mode} but only {} labels win a majority; reporting {}",
            used.len(),
            used.len()
        );
    }
    let z_hat: Vec<usize> = modal
        .iter()
        .map(|a| used.binary_search(a).expect("label in use"))
        .collect();

    let mut mu_hat = Matrix::zeros(p, used.len());
    for (&b, perm) in selected.iter().zip(&perms) {
        let s = &snaps[b];
        for (c, &a) in perm.iter().enumerate() {
            let Ok(col) = used.binary_search(&a) else {
                continue;
            };
            let acc = mu_hat.column_mut(col);
            if s.dense_means {
                acc.iter_mut().zip(&s.means[c]).for_each(|(x, v)| *x += v);
            } else {
                for (pos, &j) in s.active_features.iter().enumerate() {
                    acc[j] += s.means[c][pos];
                }
            }
        }
    }
    let m = selected.len() as f64;
    for col in 0..used.len() {
        mu_hat.column_mut(col).iter_mut().for_each(|x| *x /= m);
    }

    let mut inclusion = vec![0.0; p];
    for s in snaps {
        for &j in &s.active_features {
            inclusion[j] += 1.0;
        }
    }
    inclusion.iter_mut().for_each(|v| *v /= snaps.len() as f64);
    let support_hat = (0..p).filter(|&j| inclusion[j] >= SUPPORT_THRESHOLD).collect();

    ClusterEstimate {
        k_hat: used.len(),
        z_hat,
        mu_hat,
        support_hat,
        inclusion_frequency: inclusion,
        k_counts,
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Gelman–Rubin `sqrt(((L−1)/L · W + B/L) / W)` for chains of length L, with
/// W the mean within-chain variance and B = L × the variance of chain means.
/// Identical constant chains give 1; constant chains at different levels give +inf.
pub fn psrf(chains: &[Vec<f64>]) -> Result<f64, SummaryError> {
    if chains.len() < 2 {
        return Err(SummaryError::TooFewChains(chains.len()));
    }
    let len = chains[0].len();
    if chains.iter().any(|c| c.len() != len) {
        return Err(SummaryError::MismatchedLengths);
    }
    if len < 2 {
        return Err(SummaryError::TooShort(len));
    }
    let l = len as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = mean(&chains.iter().map(|c| sample_variance(c)).collect::<Vec<_>>());
    let b = l * sample_variance(&means);
    if w == 0.0 {
        return Ok(if b == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok((((l - 1.0) / l * w + b / l) / w).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsrfEntry {
    pub parameter: String,
    pub psrf: f64,
}

/// PSRF of θ, K, and the first coordinate of every aligned cluster mean that
/// is present in every snapshot. Chains are truncated to the shortest.
pub fn psrf_table(aligned: &AlignedTrace) -> Result<Vec<PsrfEntry>, SummaryError> {
    let ranges = aligned.chain_ranges();
    let len = ranges.iter().map(|r| r.len()).min().unwrap_or(0);
    let ranges: Vec<_> = ranges.into_iter().map(|r| r.start..r.start + len).collect();
    let collect = |f: &dyn Fn(usize) -> Option<f64>| -> Option<Vec<Vec<f64>>> {
        ranges
            .iter()
            .map(|r| r.clone().map(f).collect::<Option<Vec<f64>>>())
            .collect()
    };
    let mut out = Vec::new();
    let theta = collect(&|b| Some(aligned.snapshots[b].theta)).expect("always present");
    out.push(PsrfEntry {
        parameter: "theta".into(),
        psrf: psrf(&theta)?,
    });
    let k = collect(&|b| Some(aligned.snapshots[b].k as f64)).expect("always present");
    out.push(PsrfEntry {
        parameter: "K".into(),
        psrf: psrf(&k)?,
    });
    for label in 0..aligned.reference_k() {
        let first = collect(&|b| {
            aligned
                .original_cluster(b, label)
                .map(|c| aligned.snapshots[b].mean_coord(c, 0))
        });
        if let Some(chains) = first {
            out.push(PsrfEntry {
                parameter: format!("mu[{label}][0]"),
                psrf: psrf(&chains)?,
            });
        }
    }
    Ok(out)
}
