//! The Gibbs sampler: initialization, one full sweep, and (multi-)chain runs.
//!
//! One sweep draws, in order: every label `z_i` for `i` ascending (urn
//! reseating), every cluster mean coordinate (cluster, then coordinate), every
//! scale auxiliary `φ`, every indicator `ξ`, then `θ`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::hyper::{Hyperparams, SslMode};
use crate::rng::{chain_rng, ChainRng};
use crate::ssl::{update_mu, update_phi, update_theta, update_xi, SslConditionalContext};
use crate::state::{squared_distance, Cluster, ModelState};
use crate::trace::{ChainTrace, MeanStorage, Snapshot, TraceMeta};
use crate::urn::{build_vn_table, reseat_observation, VnTable};

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "SGMM_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitStrategy {
    /// `RandomK(min(round(λ), k_max))`.
    #[default]
    Auto,
    SingleCluster,
    RandomK {
        k: usize,
    },
    KMeansPlusPlus {
        k: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub n_burn: usize,
    pub n_keep: usize,
    pub n_chains: usize,
    pub thin: usize,
    pub seed: u64,
    pub init: InitStrategy,
    pub mean_storage: MeanStorage,
    /// Worker threads for multi-chain runs; falls back to `SGMM_THREADS`, then
    /// to the rayon default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_burn: 1000,
            n_keep: 4000,
            n_chains: 1,
            thin: 1,
            seed: 0,
            init: InitStrategy::Auto,
            mean_storage: MeanStorage::Sparse,
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), crate::Error> {
        if self.thin == 0 {
            return Err(crate::Error::Config("thin must be at least 1".into()));
        }
        if self.n_keep == 0 {
            return Err(crate::Error::Config("n_keep must be at least 1".into()));
        }
        if self.n_chains == 0 {
            return Err(crate::Error::Config("n_chains must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InitError {
    #[error("initial cluster count {k} exceeds k_max = {k_max}")]
    InvalidK { k: usize, k_max: usize },
    #[error("initial cluster count must be positive")]
    ZeroK,
    #[error(transparent)]
    Hyper(#[from] crate::hyper::HyperparamError),
}

/// Progress report emitted after every sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProgressEvent {
    pub chain_id: u64,
    /// Sweeps completed, burn-in included.
    pub iteration: usize,
    pub total: usize,
    pub k: usize,
    pub log_likelihood: f64,
}

pub type ProgressFn<'a> = &'a (dyn Fn(&ProgressEvent) + Sync);

fn means_of(data: &DataMatrix, z: &[usize], k: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; data.p()]; k];
    let mut counts = vec![0usize; k];
    for (i, &l) in z.iter().enumerate() {
        counts[l] += 1;
        for (s, y) in sums[l].iter_mut().zip(data.observation(i)) {
            *s += y;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

fn nearest(y: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = squared_distance(y, center);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// k-means++ seeding (D² rule) over the observations; returns the centers.
pub fn kmeans_plus_plus<R: Rng + ?Sized>(data: &DataMatrix, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = data.n();
    let mut centers = vec![data.observation(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| squared_distance(data.observation(i), &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = data.observation(next).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_distance(data.observation(i), &c));
        }
        centers.push(c);
    }
    centers
}

/// Builds the starting state. Means start at cluster sample means, `φ = 1`,
/// every indicator off, and `θ = 1/(1 + β_θ)` (its prior mean).
pub fn init_state<R: Rng + ?Sized>(
    data: &DataMatrix,
    hyper: &Hyperparams,
    init: InitStrategy,
    rng: &mut R,
) -> Result<ModelState, InitError> {
    let n = data.n();
    let check_k = |k: usize| {
        if k == 0 {
            Err(InitError::ZeroK)
        } else if k > hyper.k_max {
            Err(InitError::InvalidK {
                k,
                k_max: hyper.k_max,
            })
        } else {
            Ok(k)
        }
    };
    let (z, k) = match init {
        InitStrategy::SingleCluster => (vec![0; n], 1),
        InitStrategy::Auto => {
            let k = (hyper.poisson_lambda.round() as usize).clamp(1, hyper.k_max);
            ((0..n).map(|_| rng.random_range(0..k)).collect(), k)
        }
        InitStrategy::RandomK { k } => {
            let k = check_k(k)?;
            ((0..n).map(|_| rng.random_range(0..k)).collect(), k)
        }
        InitStrategy::KMeansPlusPlus { k } => {
            let k = check_k(k)?;
            let centers = kmeans_plus_plus(data, k, rng);
            ((0..n).map(|i| nearest(data.observation(i), &centers)).collect(), k)
        }
    };
    let p = data.p();
    let column = hyper.ssl_mode == SslMode::ColumnSsl;
    let clusters = means_of(data, &z, k)
        .into_iter()
        .map(|mu| Cluster {
            mu,
            phi: vec![1.0; p],
            xi: column.then(|| vec![false; p]),
        })
        .collect();
    let xi = (!column).then(|| vec![false; p]);
    let theta = 1.0 / (1.0 + hyper.beta_theta);
    Ok(ModelState::new(z, clusters, xi, theta).expect("initial state is well formed"))
}

/// One full pass of the sampler.
pub fn sweep<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &DataMatrix,
    vn: &VnTable,
    hyper: &Hyperparams,
    rng: &mut R,
) {
    for i in 0..data.n() {
        reseat_observation(i, state, vn, data, hyper, rng);
    }
    let ctx = SslConditionalContext::new(state, data, hyper);
    update_mu(state, &ctx, rng);
    update_phi(state, hyper, rng);
    update_xi(state, hyper, rng);
    update_theta(state, hyper, rng);
    debug_assert!(state.check(hyper.k_max).is_ok(), "{:?}", state.check(hyper.k_max));
}

pub fn run_chain(
    data: &DataMatrix,
    hyper: &Hyperparams,
    config: &RunConfig,
    chain_id: u64,
) -> crate::Result<ChainTrace> {
    run_chain_with_progress(data, hyper, config, chain_id, None)
}

pub fn run_chain_with_progress(
    data: &DataMatrix,
    hyper: &Hyperparams,
    config: &RunConfig,
    chain_id: u64,
    progress: Option<ProgressFn<'_>>,
) -> crate::Result<ChainTrace> {
    config.validate()?;
    hyper.validate(data.n()).map_err(InitError::from)?;
    let mut rng: ChainRng = chain_rng(config.seed, chain_id);
    let vn = build_vn_table(data.n(), hyper);
    let mut state = init_state(data, hyper, config.init, &mut rng)?;
    let total = config.n_burn + config.n_keep * config.thin;
    let mut snapshots = Vec::with_capacity(config.n_keep);
    for it in 0..total {
        sweep(&mut state, data, &vn, hyper, &mut rng);
        if let Some(cb) = progress {
            cb(&ProgressEvent {
                chain_id,
                iteration: it + 1,
                total,
                k: state.k(),
                log_likelihood: state.log_likelihood(data),
            });
        }
        if it >= config.n_burn && (it + 1 - config.n_burn).is_multiple_of(config.thin) {
            snapshots.push(Snapshot::capture(
                &state,
                it - config.n_burn,
                data,
                config.mean_storage,
            ));
        }
    }
    Ok(ChainTrace {
        meta: TraceMeta {
            chain_id,
            seed: config.seed,
            n_burn: config.n_burn,
            thin: config.thin,
            p: data.p(),
            n: data.n(),
            hyperparams_digest: hyper.digest(),
            mean_storage: config.mean_storage,
        },
        snapshots,
    })
}

fn worker_count(config: &RunConfig) -> Option<usize> {
    config.workers.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.parse().ok())
            .filter(|&w: &usize| w > 0)
    })
}

/// Runs `n_chains` independent chains, chain `c` on RNG stream `c`.
/// Output order follows the chain id whatever the scheduling.
pub fn run_chains(
    data: &DataMatrix,
    hyper: &Hyperparams,
    config: &RunConfig,
) -> crate::Result<Vec<ChainTrace>> {
    run_chains_with_progress(data, hyper, config, None)
}

pub fn run_chains_with_progress(
    data: &DataMatrix,
    hyper: &Hyperparams,
    config: &RunConfig,
    progress: Option<ProgressFn<'_>>,
) -> crate::Result<Vec<ChainTrace>> {
    config.validate()?;
    let run = || {
        (0..config.n_chains as u64)
            .into_par_iter()
            .map(|c| run_chain_with_progress(data, hyper, config, c, progress))
            .collect::<crate::Result<Vec<_>>>()
    };
    match worker_count(config) {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| crate::Error::Config(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyper::default_hyperparams;
    use crate::rng::chain_rng;

    fn toy() -> DataMatrix {
        DataMatrix::from_observations(&[
            vec![0.0, 1.0],
            vec![0.2, 0.8],
            vec![5.0, 5.0],
            vec![5.2, 4.9],
            vec![-3.0, 0.0],
            vec![-3.1, 0.2],
        ])
        .unwrap()
    }

    #[test]
    fn single_cluster_uses_sample_mean() {
        let data = toy();
        let h = default_hyperparams(2);
        let s = init_state(&data, &h, InitStrategy::SingleCluster, &mut chain_rng(1, 0)).unwrap();
        assert_eq!(s.k(), 1);
        let mean0 = (0.0 + 0.2 + 5.0 + 5.2 - 3.0 - 3.1) / 6.0;
        assert!((s.clusters()[0].mu[0] - mean0).abs() < 1e-12);
        assert!(s.xi().iter().all(|&x| !x));
        assert!((s.theta() - 1.0 / (1.0 + h.beta_theta)).abs() < 1e-15);
        assert!(s.clusters()[0].phi.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn random_k_respects_bounds() {
        let data = toy();
        let h = default_hyperparams(2);
        let s = init_state(&data, &h, InitStrategy::RandomK { k: 3 }, &mut chain_rng(2, 0)).unwrap();
        assert!(s.k() <= 3);
        assert!(s.z().iter().all(|&l| l < s.k()));
        let mut small = h.clone();
        small.k_max = 2;
        assert_eq!(
            init_state(&data, &small, InitStrategy::RandomK { k: 3 }, &mut chain_rng(2, 0)),
            Err(InitError::InvalidK { k: 3, k_max: 2 })
        );
    }

    #[test]
    fn column_mode_init_has_columns() {
        let data = toy();
        let mut h = default_hyperparams(2);
        h.ssl_mode = SslMode::ColumnSsl;
        let s = init_state(&data, &h, InitStrategy::RandomK { k: 2 }, &mut chain_rng(3, 0)).unwrap();
        assert_eq!(s.mode(), SslMode::ColumnSsl);
        assert!(s.clusters().iter().all(|c| c.xi.as_ref().unwrap().len() == 2));
    }

    #[test]
    fn run_config_validation() {
        let bad = RunConfig {
            thin: 0,
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
