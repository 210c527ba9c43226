//! Mixture-of-finite-mixtures urn: the partition coefficients `V_n(t)` and
//! the single-observation reseating move.
//!
//! With a prior `p_K` on the number of components and a symmetric
//! Dirichlet(α) on the weights, the induced partition law is
//! `π(C) = V_n(|C|) Π_c α^{(|c|)}` with
//!
//! ```text
//! V_n(t) = Σ_k p_K(k) k_(t) / (αk)^(n)
//! ```
//!
//! where `x^(m)` is the rising and `x_(m)` the falling factorial. The prior on
//! K is truncated at `k_max`, so the sum is finite and evaluated exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::DataMatrix;
use crate::distributions::{log_trunc_poisson_table, logsumexp, sample_categorical_log};
use crate::hyper::{Hyperparams, VnMode};
use crate::ssl::draw_prior_cluster;
use crate::state::{squared_distance, ModelState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VnTable {
    /// `ln V_n(t)` at index `t - 1`, for `t = 1..=k_max`.
    log_vn: Vec<f64>,
    n: usize,
    alpha: f64,
    poisson_lambda: f64,
    mode: VnMode,
}

/// `ln x^(m) = Σ_{i<m} ln(x + i)`.
fn ln_rising(x: f64, m: usize) -> f64 {
    (0..m).map(|i| (x + i as f64).ln()).sum()
}

/// `ln x_(m)` for integer `x ≥ m`.
fn ln_falling(x: usize, m: usize) -> f64 {
    (0..m).map(|i| ((x - i) as f64).ln()).sum()
}

fn ln_factorial(m: usize) -> f64 {
    (2..=m).map(|i| (i as f64).ln()).sum()
}

pub fn build_vn_table(n: usize, hyper: &Hyperparams) -> VnTable {
    assert!(n >= 1, "V_n needs at least one observation");
    let k_max = hyper.k_max;
    let alpha = hyper.alpha;
    let log_pk = log_trunc_poisson_table(hyper.poisson_lambda, k_max);
    let log_vn = match hyper.vn_mode {
        VnMode::Exact => {
            let denom: Vec<f64> = (1..=k_max)
                .map(|k| ln_rising(alpha * k as f64, n))
                .collect();
            (1..=k_max)
                .map(|t| {
                    let terms: Vec<f64> = (t..=k_max)
                        .map(|k| log_pk[k - 1] + ln_falling(k, t) - denom[k - 1])
                        .collect();
                    logsumexp(&terms)
                })
                .collect()
        }
        VnMode::Approximate => {
            let ln_n = (n as f64).ln();
            let ln_n_fact = ln_factorial(n);
            (1..=k_max)
                .map(|t| {
                    let at = alpha * t as f64;
                    ln_factorial(t) - ln_n_fact + ln_gamma(at) - (at - 1.0) * ln_n
                        + log_pk[t - 1]
                })
                .collect()
        }
    };
    VnTable {
        log_vn,
        n,
        alpha,
        poisson_lambda: hyper.poisson_lambda,
        mode: hyper.vn_mode,
    }
}

impl VnTable {
    /// `ln V_n(t)`; `-inf` beyond `k_max`.
    pub fn log_vn(&self, t: usize) -> f64 {
        assert!(t >= 1, "V_n is indexed from t = 1");
        self.log_vn.get(t - 1).copied().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn k_max(&self) -> usize {
        self.log_vn.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `ln(α V_n(t+1) / V_n(t))`, the log prior weight of opening a cluster
    /// when `t` are occupied.
    pub fn log_new_cluster_weight(&self, t: usize) -> f64 {
        self.alpha.ln() + self.log_vn(t + 1) - self.log_vn(t)
    }
}

/// What happened during one reseating step.
#[derive(Debug, Clone, PartialEq)]
pub struct ReseatOutcome {
    /// Occupied clusters once observation `i` was removed.
    pub t: usize,
    /// Unnormalized log-weights over the `t` existing clusters, followed by
    /// the new-cluster option when `t < k_max`. The shared `-(p/2) ln 2π`
    /// term is omitted from all of them.
    pub log_weights: Vec<f64>,
    /// Mean vector offered for the new cluster, if the option was available.
    pub candidate_mu: Option<Vec<f64>>,
    /// Index drawn from `log_weights`.
    pub chosen: usize,
}

/// Removes observation `i` from its cluster and redraws its label.
///
/// If `i` was alone, its own cluster is offered as the new-cluster candidate;
/// otherwise a candidate `(φ, μ)` is drawn from the prior. When all `k_max`
/// clusters stay occupied the new-cluster option is dropped and no candidate
/// is drawn.
pub fn reseat_observation<R: Rng + ?Sized>(
    i: usize,
    state: &mut ModelState,
    vn: &VnTable,
    data: &DataMatrix,
    hyper: &Hyperparams,
    rng: &mut R,
) -> ReseatOutcome {
    let own = state.detach(i);
    let t = state.k();
    let y = data.observation(i);
    let alpha = hyper.alpha;

    let mut log_weights: Vec<f64> = state
        .clusters()
        .iter()
        .zip(state.sizes())
        .map(|(c, &size)| (size as f64 + alpha).ln() - 0.5 * squared_distance(y, &c.mu))
        .collect();

    let candidate = if t < hyper.k_max {
        let cand = own.unwrap_or_else(|| draw_prior_cluster(state, hyper, rng));
        log_weights.push(vn.log_new_cluster_weight(t) - 0.5 * squared_distance(y, &cand.mu));
        Some(cand)
    } else {
        None
    };

    let chosen = sample_categorical_log(&log_weights, rng)
        .expect("reseating weights include a finite entry");
    let candidate_mu = candidate.as_ref().map(|c| c.mu.clone());
    match candidate {
        Some(cand) if chosen == t => state.attach_new(i, cand),
        _ => state.attach(i, chosen),
    }
    ReseatOutcome {
        t,
        log_weights,
        candidate_mu,
        chosen,
    }
}
