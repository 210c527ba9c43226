//! One Gibbs state: the partition, per-cluster means and scale auxiliaries,
//! sparsity indicators, and the slab inclusion probability.
//!
//! Labels are dense and zero-based: `z[i]` indexes `clusters`, and every
//! cluster holds at least one observation.

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::hyper::SslMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub mu: Vec<f64>,
    /// Normal-scale-mixture auxiliaries, all strictly positive.
    pub phi: Vec<f64>,
    /// Per-cluster sparsity indicators; only present in column mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("state invariant violated: {0}")]
pub struct StateError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    z: Vec<usize>,
    clusters: Vec<Cluster>,
    sizes: Vec<usize>,
    /// Shared indicators in joint mode; empty in column mode.
    xi: Vec<bool>,
    theta: f64,
}

impl ModelState {
    /// Builds a state, compacting unused labels. Pass `xi = None` for column
    /// mode, in which case every cluster must carry its own indicators.
    pub fn new(
        z: Vec<usize>,
        clusters: Vec<Cluster>,
        xi: Option<Vec<bool>>,
        theta: f64,
    ) -> Result<Self, StateError> {
        let p = clusters.first().map_or(0, |c| c.mu.len());
        if let Some(&bad) = z.iter().find(|&&l| l >= clusters.len()) {
            return Err(StateError(format!(
                "label {bad} has no cluster ({} clusters)",
                clusters.len()
            )));
        }
        let mut sizes = vec![0; clusters.len()];
        for &l in &z {
            sizes[l] += 1;
        }
        let mut state = Self {
            z,
            clusters,
            sizes,
            xi: xi.unwrap_or_default(),
            theta,
        };
        state.compact();
        if state.xi.is_empty() && state.clusters.iter().any(|c| c.xi.is_none()) {
            return Err(StateError("column mode requires per-cluster indicators".into()));
        }
        if !state.xi.is_empty() && state.xi.len() != p {
            return Err(StateError(format!("xi has length {}, expected {p}", state.xi.len())));
        }
        state.check(usize::MAX)?;
        Ok(state)
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn p(&self) -> usize {
        self.clusters.first().map_or(self.xi.len(), |c| c.mu.len())
    }

    /// Number of active clusters.
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn z(&self) -> &[usize] {
        &self.z
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn mode(&self) -> SslMode {
        if self.xi.is_empty() && self.clusters.iter().all(|c| c.xi.is_some()) {
            SslMode::ColumnSsl
        } else {
            SslMode::JointSsl
        }
    }

    /// Shared indicators (joint mode only; empty otherwise).
    pub fn xi(&self) -> &[bool] {
        &self.xi
    }

    /// Indicator governing `(μ_c)_j`.
    #[inline]
    pub fn slab(&self, cluster: usize, j: usize) -> bool {
        match &self.clusters[cluster].xi {
            Some(col) => col[j],
            None => self.xi[j],
        }
    }

    /// Features switched on in at least one cluster.
    pub fn active_features(&self) -> Vec<usize> {
        (0..self.p())
            .filter(|&j| (0..self.k()).any(|c| self.slab(c, j)) || self.xi.get(j) == Some(&true))
            .collect()
    }

    pub(crate) fn set_theta(&mut self, theta: f64) {
        self.theta = theta;
    }

    pub(crate) fn xi_mut(&mut self) -> &mut Vec<bool> {
        &mut self.xi
    }

    pub(crate) fn clusters_mut(&mut self) -> &mut [Cluster] {
        &mut self.clusters
    }

    /// Moves observation `i` out of its cluster. Returns the removed cluster
    /// if `i` was its only member; labels are then compacted.
    pub(crate) fn detach(&mut self, i: usize) -> Option<Cluster> {
        let old = self.z[i];
        self.sizes[old] -= 1;
        self.z[i] = usize::MAX;
        if self.sizes[old] == 0 {
            let removed = self.clusters.remove(old);
            self.sizes.remove(old);
            for l in self.z.iter_mut() {
                if *l != usize::MAX && *l > old {
                    *l -= 1;
                }
            }
            Some(removed)
        } else {
            None
        }
    }

    /// Places a detached observation into an existing cluster.
    pub(crate) fn attach(&mut self, i: usize, cluster: usize) {
        debug_assert_eq!(self.z[i], usize::MAX);
        self.z[i] = cluster;
        self.sizes[cluster] += 1;
    }

    /// Places a detached observation into a new cluster.
    pub(crate) fn attach_new(&mut self, i: usize, cluster: Cluster) {
        self.clusters.push(cluster);
        self.sizes.push(0);
        self.attach(i, self.clusters.len() - 1);
    }

    fn compact(&mut self) {
        let mut remap = vec![usize::MAX; self.clusters.len()];
        let mut next = 0;
        for (old, &size) in self.sizes.iter().enumerate() {
            if size > 0 {
                remap[old] = next;
                next += 1;
            }
        }
        if next == self.clusters.len() {
            return;
        }
        let mut idx = 0;
        self.clusters.retain(|_| {
            let keep = self.sizes[idx] > 0;
            idx += 1;
            keep
        });
        self.sizes.retain(|&s| s > 0);
        for l in self.z.iter_mut() {
            *l = remap[*l];
        }
    }

    /// Verifies partition and positivity invariants.
    pub fn check(&self, k_max: usize) -> Result<(), StateError> {
        if self.clusters.len() > k_max {
            return Err(StateError(format!(
                "{} clusters exceed k_max = {k_max}",
                self.clusters.len()
            )));
        }
        let mut counts = vec![0; self.clusters.len()];
        for &l in &self.z {
            if l >= self.clusters.len() {
                return Err(StateError(format!("dangling label {l}")));
            }
            counts[l] += 1;
        }
        if counts != self.sizes {
            return Err(StateError("cached cluster sizes are stale".into()));
        }
        if counts.contains(&0) {
            return Err(StateError("empty cluster".into()));
        }
        let p = self.p();
        for (c, cl) in self.clusters.iter().enumerate() {
            if cl.mu.len() != p || cl.phi.len() != p {
                return Err(StateError(format!("cluster {c} has the wrong dimension")));
            }
            if cl.phi.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(StateError(format!("cluster {c} has a non-positive phi")));
            }
            if cl.mu.iter().any(|v| !v.is_finite()) {
                return Err(StateError(format!("cluster {c} has a non-finite mean")));
            }
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(StateError(format!("theta = {} outside (0, 1)", self.theta)));
        }
        Ok(())
    }

    /// Per-cluster coordinate sums `Σ_{l∈c} Y_l`.
    pub fn cluster_sums(&self, data: &DataMatrix) -> Vec<Vec<f64>> {
        let mut sums = vec![vec![0.0; data.p()]; self.k()];
        for (i, &l) in self.z.iter().enumerate() {
            for (s, y) in sums[l].iter_mut().zip(data.observation(i)) {
                *s += y;
            }
        }
        sums
    }

    /// `‖Y − μ Lᵀ‖²_F`.
    pub fn residual_sum_of_squares(&self, data: &DataMatrix) -> f64 {
        self.z
            .iter()
            .enumerate()
            .map(|(i, &l)| squared_distance(data.observation(i), &self.clusters[l].mu))
            .sum()
    }

    /// `Σ_i ln N(Y_i | μ_{z_i}, I_p)`.
    pub fn log_likelihood(&self, data: &DataMatrix) -> f64 {
        let n = data.n() as f64;
        let p = data.p() as f64;
        -0.5 * n * p * (2.0 * std::f64::consts::PI).ln()
            - 0.5 * self.residual_sum_of_squares(data)
    }
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
