//! Full-conditional updates from the normal-scale-mixture form of the
//! spike-and-slab LASSO prior:
//!
//! ```text
//! (x_j | φ_j, ξ_j = a) ~ N(0, φ_j / λ_a²),  φ_j ~ Exp(1/2),  ξ_j ~ Bernoulli(θ)
//! ```
//!
//! Every update visits clusters in label order and coordinates in ascending
//! order so that a seeded run is bit-reproducible.
//!
//! The indicator probability is computed without the `1/sqrt(φ)` factor: it
//! multiplies the spike and the slab terms alike and cancels.

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp, StandardNormal};

use crate::data::DataMatrix;
use crate::distributions::sample_gig_half;
use crate::hyper::{Hyperparams, SslMode};
use crate::state::{Cluster, ModelState};

/// Sufficient statistics needed by the mean update.
#[derive(Debug, Clone, PartialEq)]
pub struct SslConditionalContext {
    pub cluster_sums: Vec<Vec<f64>>,
    pub cluster_sizes: Vec<usize>,
    pub lambda0: f64,
    pub lambda1: f64,
    pub beta_theta: f64,
}

impl SslConditionalContext {
    pub fn new(state: &ModelState, data: &DataMatrix, hyper: &Hyperparams) -> Self {
        Self {
            cluster_sums: state.cluster_sums(data),
            cluster_sizes: state.sizes().to_vec(),
            lambda0: hyper.lambda0,
            lambda1: hyper.lambda1,
            beta_theta: hyper.beta_theta,
        }
    }

    fn rate(&self, slab: bool) -> f64 {
        if slab {
            self.lambda1
        } else {
            self.lambda0
        }
    }
}

/// Mean and variance of `(μ_c)_j | −`: precision `n_c + λ²/φ`, mean `Σy / precision`.
pub fn mu_conditional(sum: f64, n_c: usize, lambda: f64, phi: f64) -> (f64, f64) {
    let precision = n_c as f64 + lambda * lambda / phi;
    (sum / precision, 1.0 / precision)
}

pub fn update_mu<R: Rng + ?Sized>(state: &mut ModelState, ctx: &SslConditionalContext, rng: &mut R) {
    for c in 0..state.k() {
        let n_c = ctx.cluster_sizes[c];
        for j in 0..state.p() {
            let lambda = ctx.rate(state.slab(c, j));
            let cluster = &mut state.clusters_mut()[c];
            let (mean, var) = mu_conditional(ctx.cluster_sums[c][j], n_c, lambda, cluster.phi[j]);
            let z: f64 = rng.sample(StandardNormal);
            cluster.mu[j] = mean + var.sqrt() * z;
        }
    }
}

/// `(φ_c)_j ~ GIG(1/2, (μ_c)_j² λ_{ξ}², 1)`.
pub fn update_phi<R: Rng + ?Sized>(state: &mut ModelState, hyper: &Hyperparams, rng: &mut R) {
    for c in 0..state.k() {
        for j in 0..state.p() {
            let lambda = hyper.rate(state.slab(c, j));
            let cluster = &mut state.clusters_mut()[c];
            let chi = cluster.mu[j] * cluster.mu[j] * lambda * lambda;
            cluster.phi[j] = sample_gig_half(chi, 1.0, rng);
        }
    }
}

/// Log-kernel of one Laplace-as-scale-mixture term, `ln λ − ½ λ² μ² / φ`.
#[inline]
fn log_term(lambda: f64, mu: f64, phi: f64) -> f64 {
    lambda.ln() - 0.5 * lambda * lambda * mu * mu / phi
}

/// Posterior slab probability θ′ for indicator(s) governing the `(μ, φ)` pairs.
pub fn slab_probability<'a>(
    pairs: impl IntoIterator<Item = (f64, f64)> + 'a,
    theta: f64,
    hyper: &Hyperparams,
) -> f64 {
    let mut log_slab = theta.ln();
    let mut log_spike = (1.0 - theta).ln();
    for (mu, phi) in pairs {
        log_slab += log_term(hyper.lambda1, mu, phi);
        log_spike += log_term(hyper.lambda0, mu, phi);
    }
    let diff = log_spike - log_slab;
    if diff.is_nan() {
        // both hypotheses impossible; can only arise from θ ∈ {0, 1}
        return theta;
    }
    1.0 / (1.0 + diff.exp())
}

pub fn update_xi<R: Rng + ?Sized>(state: &mut ModelState, hyper: &Hyperparams, rng: &mut R) {
    let theta = state.theta();
    match state.mode() {
        SslMode::JointSsl => {
            for j in 0..state.p() {
                let prob = slab_probability(
                    state.clusters().iter().map(|c| (c.mu[j], c.phi[j])),
                    theta,
                    hyper,
                );
                state.xi_mut()[j] = rng.random::<f64>() < prob;
            }
        }
        SslMode::ColumnSsl => {
            for cluster in state.clusters_mut() {
                for j in 0..cluster.mu.len() {
                    let prob = slab_probability([(cluster.mu[j], cluster.phi[j])], theta, hyper);
                    let col = cluster.xi.as_mut().expect("column indicators");
                    col[j] = rng.random::<f64>() < prob;
                }
            }
        }
    }
}

/// Shapes of the Beta conditional of θ: `(1 + Σξ, β_θ + m − Σξ)` where `m`
/// counts indicators (p, or p·K in column mode).
pub fn theta_conditional(state: &ModelState, hyper: &Hyperparams) -> (f64, f64) {
    let (on, total) = match state.mode() {
        SslMode::JointSsl => (state.xi().iter().filter(|&&x| x).count(), state.p()),
        SslMode::ColumnSsl => (
            state
                .clusters()
                .iter()
                .map(|c| c.xi.as_ref().map_or(0, |x| x.iter().filter(|&&b| b).count()))
                .sum(),
            state.p() * state.k(),
        ),
    };
    (1.0 + on as f64, hyper.beta_theta + (total - on) as f64)
}

pub fn update_theta<R: Rng + ?Sized>(state: &mut ModelState, hyper: &Hyperparams, rng: &mut R) {
    let (a, b) = theta_conditional(state, hyper);
    let draw = Beta::new(a, b).expect("positive Beta shapes").sample(rng);
    state.set_theta(clamp_unit(draw));
}

pub(crate) fn clamp_unit(x: f64) -> f64 {
    x.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

/// A fresh cluster drawn from the prior given the current indicators.
///
/// Per coordinate, in order: (column mode only) `ξ_j ~ Bernoulli(θ)`, then
/// `φ_j ~ Exp(1/2)`, then `μ_j ~ N(0, φ_j / λ_{ξ_j}²)`.
pub fn draw_prior_cluster<R: Rng + ?Sized>(
    state: &ModelState,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Cluster {
    let p = state.p();
    let column = state.mode() == SslMode::ColumnSsl;
    let exp = Exp::new(0.5).expect("positive rate");
    let mut mu = Vec::with_capacity(p);
    let mut phi = Vec::with_capacity(p);
    let mut xi = column.then(|| Vec::with_capacity(p));
    for j in 0..p {
        let slab = match xi.as_mut() {
            Some(col) => {
                let s = rng.random::<f64>() < state.theta();
                col.push(s);
                s
            }
            None => state.xi()[j],
        };
        let ph: f64 = Distribution::<f64>::sample(&exp, rng).max(f64::MIN_POSITIVE);
        let lambda = hyper.rate(slab);
        let z: f64 = rng.sample(StandardNormal);
        mu.push(z * ph.sqrt() / lambda);
        phi.push(ph);
    }
    Cluster { mu, phi, xi }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyper::default_hyperparams;

    fn hyper() -> Hyperparams {
        default_hyperparams(10)
    }

    #[test]
    fn mu_conditional_substitution() {
        // λ²/φ = 1
        let (m, v) = mu_conditional(2.0, 1, 1.0, 1.0);
        assert_eq!((m, v), (1.0, 0.5));
        let (m, v) = mu_conditional(0.0, 4, 1.0, 1e300);
        assert!(m == 0.0 && (v - 0.25).abs() < 1e-12);
    }

    #[test]
    fn slab_probability_equal_rates_returns_theta() {
        let mut h = hyper();
        h.lambda0 = 3.0;
        h.lambda1 = 3.0;
        let p = slab_probability([(0.7, 2.0), (-1.2, 0.3)], 0.3, &h);
        assert!((p - 0.3).abs() < 1e-15);
    }

    #[test]
    fn slab_probability_at_zero_mean() {
        let h = hyper();
        let theta = 0.2;
        let p = slab_probability([(0.0, 1.0)], theta, &h);
        let expected = h.lambda1 * theta / (h.lambda1 * theta + h.lambda0 * (1.0 - theta));
        assert!((p - expected).abs() < 1e-15);
    }

    #[test]
    fn slab_probability_large_mean_and_no_overflow() {
        let h = hyper();
        let p = slab_probability([(1.0, 1.0)], 0.5, &h);
        let a = (-0.5f64).exp();
        let expected = a / (a + 100.0 * (-5000.0f64).exp());
        assert_eq!(p, expected);
        assert_eq!(p, 1.0);
        // |μ|²λ0² = 1e6 and 20 clusters: log-domain keeps this finite.
        let p = slab_probability((0..20).map(|_| (10.0, 1e-3)), 0.5, &h);
        assert!(p.is_finite());
        let p = slab_probability((0..20).map(|_| (0.0, 1e-3)), 0.5, &h);
        assert!(p.is_finite() && p < 1e-30);
    }
}
