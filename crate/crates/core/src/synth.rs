//! Synthetic benchmark data: the three simulation scenarios and free-form
//! Gaussian or multivariate-t mixtures.
//!
//! Support is always the first `s` features. Scenario dimensions default to
//! p = 400, n = 200 and can be overridden, as can the overall mean magnitude
//! through `mean_scale`.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Matrix};
use crate::rng::aux_rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    BadSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    /// Well-separated clusters; `k_star` ∈ {3, 5}, typically `s` ∈ {6, 12}.
    One { k_star: usize, s: usize },
    /// A tiny cluster (weight 0.02) and an inflated-variance cluster, s = 8.
    Two,
    /// Scenario two's means and covariances with t₅ noise and weights (0.2, 0.4, 0.4).
    Three,
    Custom {
        /// One length-p vector per cluster.
        means: Vec<Vec<f64>>,
        weights: Vec<f64>,
        /// Per-cluster noise variances; unit variance when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diag_variances: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_dof: Option<f64>,
    },
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_scale")]
    pub mean_scale: f64,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            p: None,
            n: None,
            seed: 0,
            mean_scale: 1.0,
        }
    }

    pub fn with_dims(mut self, p: usize, n: usize) -> Self {
        self.p = Some(p);
        self.n = Some(n);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_mean_scale(mut self, scale: f64) -> Self {
        self.mean_scale = scale;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub data: DataMatrix,
    pub z_true: Vec<usize>,
    /// p×K* matrix of true means.
    pub mu_true: Matrix,
}

/// Fully resolved mixture: means, weights, variances, optional t degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDesign {
    pub p: usize,
    pub n: usize,
    pub means: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub variances: Vec<Vec<f64>>,
    pub t_dof: Option<f64>,
}

const SCENARIO_TWO_S: usize = 8;

fn alternating(s: usize, even: f64, odd: f64) -> Vec<f64> {
    (0..s).map(|j| if j % 2 == 0 { even } else { odd }).collect()
}

fn pad(support: Vec<f64>, p: usize) -> Vec<f64> {
    let mut v = support;
    v.resize(p, 0.0);
    v
}

fn bad(msg: impl Into<String>) -> SynthError {
    SynthError::BadSpec(msg.into())
}

fn scenario_two_like(p: usize, n: usize, weights: Vec<f64>, t_dof: Option<f64>) -> Result<MixtureDesign, SynthError> {
    let s = SCENARIO_TWO_S;
    if p < s {
        return Err(bad(format!("p = {p} is smaller than the support size {s}")));
    }
    let means = vec![
        pad(alternating(s, 5.0, 2.0), p),
        pad(alternating(s, 10.0, 5.0), p),
        pad(alternating(s, 15.0, 2.0), p),
    ];
    let inflated: Vec<f64> = (0..p).map(|j| if j < s { 4.0 } else { 1.0 }).collect();
    Ok(MixtureDesign {
        p,
        n,
        means,
        weights,
        variances: vec![vec![1.0; p], inflated, vec![1.0; p]],
        t_dof,
    })
}

impl ScenarioSpec {
    /// Expands the scenario into explicit mixture parameters.
    pub fn design(&self) -> Result<MixtureDesign, SynthError> {
        let p = self.p.unwrap_or(400);
        let n = self.n.unwrap_or(200);
        if n < 2 || p == 0 {
            return Err(bad(format!("need p ≥ 1 and n ≥ 2, got p = {p}, n = {n}")));
        }
        if !(self.mean_scale.is_finite()) {
            return Err(bad("mean_scale must be finite"));
        }
        let mut design = match &self.scenario {
            Scenario::One { k_star, s } => {
                let s = *s;
                if s == 0 || s > p {
                    return Err(bad(format!("support size {s} must lie in 1..={p}")));
                }
                let ones = vec![1.0; s];
                let scaled = |c: f64, v: &[f64]| pad(v.iter().map(|x| c * x).collect(), p);
                let (means, weights) = match k_star {
                    3 => (
                        vec![scaled(3.0, &ones), scaled(-1.5, &ones), vec![0.0; p]],
                        vec![0.3, 0.3, 0.4],
                    ),
                    5 => (
                        vec![
                            scaled(4.0, &ones),
                            scaled(-4.0, &ones),
                            vec![0.0; p],
                            scaled(4.0, &alternating(s, -1.0, 1.0)),
                            scaled(1.5, &alternating(s, 1.0, -1.0)),
                        ],
                        vec![0.2; 5],
                    ),
                    k => return Err(bad(format!("scenario one supports K* ∈ {{3, 5}}, got {k}"))),
                };
                let k = means.len();
                MixtureDesign {
                    p,
                    n,
                    means,
                    weights,
                    variances: vec![vec![1.0; p]; k],
                    t_dof: None,
                }
            }
            Scenario::Two => scenario_two_like(p, n, vec![0.02, 0.48, 0.5], None)?,
            Scenario::Three => scenario_two_like(p, n, vec![0.2, 0.4, 0.4], Some(5.0))?,
            Scenario::Custom {
                means,
                weights,
                diag_variances,
                t_dof,
            } => {
                if means.is_empty() {
                    return Err(bad("at least one mean is required"));
                }
                let p = means[0].len();
                if self.p.is_some_and(|q| q != p) {
                    return Err(bad(format!("p = {} but means have length {p}", self.p.unwrap())));
                }
                if means.iter().any(|m| m.len() != p) || p == 0 {
                    return Err(bad("means must share one positive length"));
                }
                let variances = diag_variances
                    .clone()
                    .unwrap_or_else(|| vec![vec![1.0; p]; means.len()]);
                if variances.len() != means.len() || variances.iter().any(|v| v.len() != p) {
                    return Err(bad("diag_variances must be K vectors of length p"));
                }
                if variances.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(bad("variances must be finite and non-negative"));
                }
                if let Some(nu) = t_dof {
                    if !(nu.is_finite() && *nu > 0.0) {
                        return Err(bad("t_dof must be positive"));
                    }
                }
                MixtureDesign {
                    p,
                    n,
                    means: means.clone(),
                    weights: weights.clone(),
                    variances,
                    t_dof: *t_dof,
                }
            }
        };
        if design.weights.len() != design.means.len() {
            return Err(bad("one weight per mean is required"));
        }
        if design.weights.iter().any(|w| !w.is_finite() || *w < 0.0)
            || (design.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(bad("weights must be non-negative and sum to 1"));
        }
        if design.means.iter().flatten().any(|m| !m.is_finite()) {
            return Err(bad("means must be finite"));
        }
        for m in design.means.iter_mut().flatten() {
            *m *= self.mean_scale;
        }
        Ok(design)
    }
}

/// Draws a dataset. Per observation: the label, then p standard normals, then
/// (t mixtures only) the χ² mixing variable.
pub fn generate(spec: &ScenarioSpec) -> Result<SyntheticData, SynthError> {
    let design = spec.design()?;
    let mut rng = aux_rng(spec.seed);
    sample_design(&design, &mut rng)
}

pub fn sample_design<R: Rng + ?Sized>(design: &MixtureDesign, rng: &mut R) -> Result<SyntheticData, SynthError> {
    let p = design.p;
    let picker = WeightedIndex::new(&design.weights).map_err(|e| bad(e.to_string()))?;
    let chi2 = design
        .t_dof
        .map(|nu| ChiSquared::new(nu).map(|d| (nu, d)))
        .transpose()
        .map_err(|e| bad(e.to_string()))?;
    let sd: Vec<Vec<f64>> = design
        .variances
        .iter()
        .map(|v| v.iter().map(|x| x.sqrt()).collect())
        .collect();
    let mut values = Vec::with_capacity(p * design.n);
    let mut z = Vec::with_capacity(design.n);
    let mut noise = vec![0.0; p];
    for _ in 0..design.n {
        let k = picker.sample(rng);
        z.push(k);
        for e in noise.iter_mut() {
            *e = StandardNormal.sample(rng);
        }
        let scale = match &chi2 {
            Some((nu, d)) => (nu / d.sample(rng)).sqrt(),
            None => 1.0,
        };
        for j in 0..p {
            values.push(design.means[k][j] + sd[k][j] * noise[j] * scale);
        }
    }
    let matrix = Matrix::from_col_major(p, design.n, values).map_err(|e| bad(e.to_string()))?;
    let data = DataMatrix::new(matrix).map_err(|e| bad(e.to_string()))?;
    let mu_true = Matrix::from_columns(p, &design.means).map_err(|e| bad(e.to_string()))?;
    Ok(SyntheticData {
        data,
        z_true: z,
        mu_true,
    })
}
