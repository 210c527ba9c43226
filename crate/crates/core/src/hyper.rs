use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Whether the sparsity indicators are shared across clusters or per cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SslMode {
    /// One indicator per feature, shared by every cluster mean.
    #[default]
    JointSsl,
    /// Independent indicators for every (feature, cluster) pair.
    ColumnSsl,
}

/// How the partition coefficients `V_n(t)` are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VnMode {
    /// The finite sum over the truncated prior on K.
    #[default]
    Exact,
    /// The closed-form shortcut `(t!/n!) Γ(αt) / n^{αt-1} p_K(t)`.
    Approximate,
}

/// Prior constants of the sparse mixture model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Spike rate.
    pub lambda0: f64,
    /// Slab rate.
    pub lambda1: f64,
    /// Second shape of the Beta prior on the inclusion probability.
    pub beta_theta: f64,
    /// Symmetric Dirichlet parameter on the mixture weights.
    pub alpha: f64,
    /// Rate of the truncated Poisson prior on K.
    pub poisson_lambda: f64,
    pub k_max: usize,
    #[serde(default)]
    pub ssl_mode: SslMode,
    #[serde(default)]
    pub vn_mode: VnMode,
}

pub const DEFAULT_KAPPA: f64 = 0.1;

/// `β_θ = p^{1+κ} ln p`.
pub fn beta_theta_for(p: usize, kappa: f64) -> f64 {
    let p = p as f64;
    p.powf(1.0 + kappa) * p.ln()
}

/// Simulation-study defaults: κ = 0.1, λ0 = 100, λ1 = 1, λ = 2, K_max = 20, α = 1.
pub fn default_hyperparams(p: usize) -> Hyperparams {
    Hyperparams {
        lambda0: 100.0,
        lambda1: 1.0,
        beta_theta: beta_theta_for(p, DEFAULT_KAPPA),
        alpha: 1.0,
        poisson_lambda: 2.0,
        k_max: 20,
        ssl_mode: SslMode::JointSsl,
        vn_mode: VnMode::Exact,
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid hyperparameters: {0}")]
pub struct HyperparamError(pub String);

impl Hyperparams {
    /// Checks the invariants against a dataset of `n` observations.
    /// `alpha < 1` is accepted with a warning.
    pub fn validate(&self, n: usize) -> Result<(), HyperparamError> {
        let positive = [
            ("lambda0", self.lambda0),
            ("lambda1", self.lambda1),
            ("beta_theta", self.beta_theta),
            ("alpha", self.alpha),
            ("poisson_lambda", self.poisson_lambda),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(HyperparamError(format!("{name} must be positive, got {v}")));
            }
        }
        if self.lambda0 <= self.lambda1 {
            return Err(HyperparamError(format!(
                "lambda0 ({}) must exceed lambda1 ({})",
                self.lambda0, self.lambda1
            )));
        }
        if self.k_max < 1 || self.k_max > n {
            return Err(HyperparamError(format!(
                "k_max must lie in [1, n={n}], got {}",
                self.k_max
            )));
        }
        if self.alpha < 1.0 {
            log::warn!("alpha = {} < 1 falls outside the theory's assumptions", self.alpha);
        }
        Ok(())
    }

    /// Short stable digest of the serialized hyperparameters.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("hyperparameters serialize");
        hex::encode(&Sha256::digest(&json)[..8])
    }

    /// `λ_a` for indicator value `a`.
    #[inline]
    pub fn rate(&self, slab: bool) -> f64 {
        if slab {
            self.lambda1
        } else {
            self.lambda0
        }
    }
}
