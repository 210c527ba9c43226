//! Heuristic solver for the jointly row-sparse least-squares clustering
//! objective `min ‖Y − μ Lᵀ‖²_F` subject to `|supp(μ)| ≤ s`, plus a plain
//! k-means entry point (`s = p`).
//!
//! Each restart alternates nearest-center assignment, cluster means, and the
//! best s-row projection until the assignment stops changing. The objective
//! never increases across an iteration, but restarts can still end in
//! different local optima; the best restart wins, ties to the lowest index.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Matrix};
use crate::gibbs::kmeans_plus_plus;
use crate::rng::chain_rng;
use crate::state::squared_distance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmleConfig {
    pub k: usize,
    /// Row-sparsity budget; `None` means p (plain k-means).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_restarts")]
    pub n_restarts: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_max_iters() -> usize {
    100
}

fn default_restarts() -> usize {
    10
}

impl CmleConfig {
    pub fn new(k: usize, s: Option<usize>) -> Self {
        Self {
            k,
            s,
            max_iters: default_max_iters(),
            n_restarts: default_restarts(),
            seed: 0,
        }
    }

    pub fn validate(&self, data: &DataMatrix) -> crate::Result<()> {
        let fail = |m: String| Err(crate::Error::Config(m));
        if self.k == 0 || self.k > data.n() {
            return fail(format!("K = {} must lie in 1..={}", self.k, data.n()));
        }
        if let Some(s) = self.s {
            if s == 0 || s > data.p() {
                return fail(format!("s = {s} must lie in 1..={}", data.p()));
            }
        }
        if self.n_restarts == 0 || self.max_iters == 0 {
            return fail("n_restarts and max_iters must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmleFit {
    /// p×K centers with at most s non-zero rows.
    pub mu_hat: Matrix,
    pub z_hat: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Index of the winning restart.
    pub restart: usize,
}

/// Index of the nearest center; ties go to the lowest index.
pub fn nearest_center(y: &[f64], centers: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.columns().enumerate() {
        let d = squared_distance(y, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Keeps the `s` rows with the largest `Σ_k sizes[k] μ_{jk}²`, ties to the
/// lower row, and zeros the rest.
pub fn sparsify_rows(mu: &Matrix, sizes: &[usize], s: usize) -> Matrix {
    let p = mu.rows();
    if s >= p {
        return mu.clone();
    }
    let weight = |j: usize| -> f64 {
        mu.row(j)
            .zip(sizes)
            .map(|(m, &n)| n as f64 * m * m)
            .sum()
    };
    let weights: Vec<f64> = (0..p).map(weight).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut out = mu.clone();
    for &j in &order[s..] {
        for c in 0..mu.cols() {
            out.set(j, c, 0.0);
        }
    }
    out
}

pub fn objective(data: &DataMatrix, mu: &Matrix, z: &[usize]) -> f64 {
    z.iter()
        .enumerate()
        .map(|(i, &c)| squared_distance(data.observation(i), mu.column(c)))
        .sum()
}

/// Cluster sample means and sizes; empty clusters get a zero column.
pub fn cluster_means(data: &DataMatrix, z: &[usize], k: usize) -> (Matrix, Vec<usize>) {
    let mut mu = Matrix::zeros(data.p(), k);
    let mut sizes = vec![0usize; k];
    for (i, &c) in z.iter().enumerate() {
        sizes[c] += 1;
        mu.column_mut(c)
            .iter_mut()
            .zip(data.observation(i))
            .for_each(|(m, y)| *m += y);
    }
    for (c, &size) in sizes.iter().enumerate() {
        if size > 0 {
            mu.column_mut(c).iter_mut().for_each(|m| *m /= size as f64);
        }
    }
    (mu, sizes)
}

/// Best jointly s-sparse centers for a fixed assignment.
pub fn sparse_means(data: &DataMatrix, z: &[usize], k: usize, s: usize) -> (Matrix, Vec<usize>) {
    let (mu, sizes) = cluster_means(data, z, k);
    (sparsify_rows(&mu, &sizes, s), sizes)
}

/// Moves the worst-fitting observations (from clusters of size ≥ 2) into
/// empty clusters.
fn reseed_empty(z: &mut [usize], dist: &[f64], k: usize) {
    let mut sizes = vec![0usize; k];
    z.iter().for_each(|&c| sizes[c] += 1);
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    let mut candidates = order.into_iter();
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        for i in candidates.by_ref() {
            if sizes[z[i]] >= 2 {
                sizes[z[i]] -= 1;
                z[i] = empty;
                sizes[empty] = 1;
                break;
            }
        }
    }
}

/// One restart from explicit initial centers (p×K).
pub fn fit_cmle_from(data: &DataMatrix, centers: &Matrix, s: usize, max_iters: usize) -> CmleFit {
    let k = centers.cols();
    let n = data.n();
    let mut mu = centers.clone();
    let mut z = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let mut next = vec![0usize; n];
        for i in 0..n {
            let (c, d) = nearest_center(data.observation(i), &mu);
            next[i] = c;
            dist[i] = d;
        }
        reseed_empty(&mut next, &dist, k);
        if next == z {
            converged = true;
            break;
        }
        z = next;
        mu = sparse_means(data, &z, k, s).0;
    }
    let objective = objective(data, &mu, &z);
    CmleFit {
        mu_hat: mu,
        z_hat: z,
        objective,
        iterations,
        converged,
        restart: 0,
    }
}

fn random_partition_centers<R: Rng + ?Sized>(data: &DataMatrix, k: usize, rng: &mut R) -> Matrix {
    let z: Vec<usize> = (0..data.n()).map(|_| rng.random_range(0..k)).collect();
    let (mut mu, sizes) = cluster_means(data, &z, k);
    for (c, &size) in sizes.iter().enumerate() {
        if size == 0 {
            let i = rng.random_range(0..data.n());
            mu.column_mut(c).copy_from_slice(data.observation(i));
        }
    }
    mu
}

/// Best of `n_restarts` alternating runs. Even restarts seed with k-means++,
/// odd restarts with the means of a uniformly random partition; restart `r`
/// draws from stream `r` of `seed`.
pub fn fit_cmle(data: &DataMatrix, config: &CmleConfig) -> crate::Result<CmleFit> {
    config.validate(data)?;
    let s = config.s.unwrap_or(data.p());
    let fits: Vec<CmleFit> = (0..config.n_restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = chain_rng(config.seed, r as u64);
            let centers = if r % 2 == 0 {
                let cols = kmeans_plus_plus(data, config.k, &mut rng);
                Matrix::from_columns(data.p(), &cols).expect("centers have length p")
            } else {
                random_partition_centers(data, config.k, &mut rng)
            };
            let mut fit = fit_cmle_from(data, &centers, s, config.max_iters);
            fit.restart = r;
            fit
        })
        .collect();
    let best = fits
        .into_iter()
        .reduce(|a, b| if b.objective < a.objective { b } else { a })
        .expect("at least one restart");
    log::debug!(
        "cmle: best restart {} objective {:.6} after {} iterations",
        best.restart,
        best.objective,
        best.iterations
    );
    Ok(best)
}

/// Plain Lloyd k-means with the same restart scheme.
pub fn kmeans(data: &DataMatrix, k: usize, n_restarts: usize, seed: u64) -> crate::Result<CmleFit> {
    let config = CmleConfig {
        n_restarts,
        seed,
        ..CmleConfig::new(k, None)
    };
    fit_cmle(data, &config)
}
