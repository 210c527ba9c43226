//! End-to-end runs: load or simulate data, fit, summarize, evaluate against a
//! known truth, and collect every output file in memory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cmle::{fit_cmle, CmleConfig, CmleFit};
use crate::data::{read_dataset, DataMatrix, Matrix};
use crate::gibbs::{run_chains_with_progress, ProgressFn, RunConfig};
use crate::hyper::{default_hyperparams, Hyperparams};
use crate::metrics::{ari, mean_matrix_error, min_hamming_padded, nmi};
use crate::summary::{align_chains, point_estimates, psrf_table, ClusterEstimate, PsrfEntry};
use crate::synth::{generate, ScenarioSpec};
use crate::trace::ChainTrace;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Bayesian,
    Cmle,
    #[serde(rename = "kmeans")]
    KMeans,
}

/// Ground truth for a dataset; written next to simulated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub z_true: Vec<usize>,
    pub mu_true: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Features×observations CSV. Exclusive with `scenario`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    pub transpose: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
    /// Truth JSON for a dataset given by path.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    /// Defaults to the simulation-study values for the data's p.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyperparams: Option<Hyperparams>,
    pub run: RunConfig,
    pub method: Method,
    /// Required for `cmle` and `kmeans`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cmle: Option<CmleConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Checks everything that can be checked before touching data.
    pub fn validate(&self) -> Result<()> {
        match (&self.dataset, &self.scenario) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either a dataset or a scenario, not both".into()))
            }
            (None, None) => return Err(Error::Config("no dataset path or scenario given".into())),
            _ => {}
        }
        if self.scenario.is_some() && self.truth.is_some() {
            return Err(Error::Config("truth files apply only to datasets read from disk".into()));
        }
        match self.method {
            Method::Bayesian => self.run.validate()?,
            Method::Cmle | Method::KMeans => {
                if self.cmle.is_none() {
                    return Err(Error::Config(format!(
                        "method {:?} needs a `cmle` section with K",
                        self.method
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn read_truth(path: &Path) -> Result<Truth> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub k_hat: usize,
    pub k_true: usize,
    pub ari: f64,
    /// Absent when either partition has a single cluster.
    pub nmi: Option<f64>,
    pub min_hamming: f64,
    pub mean_matrix_error: f64,
}

pub fn evaluate(estimate: &ClusterEstimate, truth: &Truth) -> Result<MetricsReport> {
    let k_true = {
        let mut labels = truth.z_true.clone();
        labels.sort_unstable();
        labels.dedup();
        labels.len()
    };
    Ok(MetricsReport {
        k_hat: estimate.k_hat,
        k_true,
        ari: ari(&truth.z_true, &estimate.z_hat)?,
        nmi: nmi(&truth.z_true, &estimate.z_hat).ok(),
        min_hamming: min_hamming_padded(&truth.z_true, &estimate.z_hat)?,
        mean_matrix_error: mean_matrix_error(
            &estimate.mu_hat,
            &estimate.z_hat,
            &truth.mu_true,
            &truth.z_true,
        )?,
    })
}

/// Bayesian summary of already-run chains.
pub fn summarize_chains(
    traces: &[ChainTrace],
    data: &DataMatrix,
) -> Result<(ClusterEstimate, Vec<PsrfEntry>)> {
    let aligned = align_chains(traces, data)?;
    let estimate = point_estimates(&aligned);
    let psrf = if traces.len() >= 2 {
        psrf_table(&aligned)?
    } else {
        Vec::new()
    };
    Ok((estimate, psrf))
}

/// Expresses an optimizer fit in the posterior-estimate schema.
pub fn estimate_from_fit(fit: &CmleFit) -> ClusterEstimate {
    let mut used = fit.z_hat.clone();
    used.sort_unstable();
    used.dedup();
    let z_hat = fit
        .z_hat
        .iter()
        .map(|l| used.binary_search(l).expect("label in use"))
        .collect();
    let columns: Vec<Vec<f64>> = used.iter().map(|&c| fit.mu_hat.column(c).to_vec()).collect();
    let p = fit.mu_hat.rows();
    let mu_hat = Matrix::from_columns(p, &columns).expect("columns have length p");
    let inclusion: Vec<f64> = (0..p)
        .map(|j| if mu_hat.row(j).any(|v| v != 0.0) { 1.0 } else { 0.0 })
        .collect();
    ClusterEstimate {
        k_hat: used.len(),
        z_hat,
        mu_hat,
        support_hat: (0..p).filter(|&j| inclusion[j] == 1.0).collect(),
        inclusion_frequency: inclusion,
        k_counts: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub method: Method,
    /// The run's config without output location or worker count, neither of
    /// which affects results.
    pub config: ExperimentConfig,
    /// Hyperparameters actually used (Bayesian runs).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyperparams: Option<Hyperparams>,
    pub seed: u64,
    pub p: usize,
    pub n: usize,
    /// SHA-256 of every other file in the bundle.
    pub files: BTreeMap<String, String>,
}

/// Every output file of a run, keyed by file name.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub files: BTreeMap<String, Vec<u8>>,
    pub estimate: ClusterEstimate,
    pub metrics: Option<MetricsReport>,
    pub psrf: Vec<PsrfEntry>,
}

impl ReportBundle {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, bytes)
                .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        }
        Ok(())
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable value");
    out.push(b'\n');
    out
}

/// `observation,cluster` with 0-based labels.
pub fn assignments_csv(z: &[usize]) -> Vec<u8> {
    let mut out = String::from("observation,cluster\n");
    for (i, l) in z.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    out.into_bytes()
}

/// Lower-case hex SHA-256, as recorded in the manifest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

/// Loads the configured data and its truth, if any.
pub fn load_data(config: &ExperimentConfig) -> Result<(DataMatrix, Option<Truth>)> {
    if let Some(spec) = &config.scenario {
        let sim = generate(spec)?;
        let truth = Truth {
            z_true: sim.z_true,
            mu_true: sim.mu_true,
        };
        return Ok((sim.data, Some(truth)));
    }
    let path = config
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config("no dataset path or scenario given".into()))?;
    let data = read_dataset(path, config.transpose)?;
    let truth = config.truth.as_deref().map(read_truth).transpose()?;
    if let Some(t) = &truth {
        if t.z_true.len() != data.n() || t.mu_true.rows() != data.p() {
            return Err(Error::Config(format!(
                "truth has n = {}, p = {} but data has n = {}, p = {}",
                t.z_true.len(),
                t.mu_true.rows(),
                data.n(),
                data.p()
            )));
        }
    }
    Ok((data, truth))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ReportBundle> {
    run_experiment_with_progress(config, None)
}

/// `progress` receives every sweep of every chain (Bayesian runs only).
pub fn run_experiment_with_progress(
    config: &ExperimentConfig,
    progress: Option<ProgressFn<'_>>,
) -> Result<ReportBundle> {
    config.validate()?;
    let (data, truth) = load_data(config)?;
    log::info!("data: p = {}, n = {}", data.p(), data.n());
    let mut files = BTreeMap::new();
    let mut hyper_used = None;
    let (estimate, psrf, seed) = match config.method {
        Method::Bayesian => {
            let hyper = config
                .hyperparams
                .clone()
                .unwrap_or_else(|| default_hyperparams(data.p()));
            let traces = run_chains_with_progress(&data, &hyper, &config.run, progress)?;
            for trace in &traces {
                let mut buf = Vec::new();
                trace.write_ndjson(&mut buf)?;
                files.insert(format!("chain_{}.ndjson", trace.meta.chain_id), buf);
            }
            let (estimate, psrf) = summarize_chains(&traces, &data)?;
            files.insert("psrf.json".into(), to_json_bytes(&psrf));
            hyper_used = Some(hyper);
            (estimate, psrf, config.run.seed)
        }
        Method::Cmle | Method::KMeans => {
            let mut cmle = config.cmle.clone().expect("validated");
            if config.method == Method::KMeans {
                cmle.s = None;
            }
            let fit = fit_cmle(&data, &cmle)?;
            (estimate_from_fit(&fit), Vec::new(), cmle.seed)
        }
    };
    files.insert("estimate.json".into(), to_json_bytes(&estimate));
    files.insert("assignments.csv".into(), assignments_csv(&estimate.z_hat));
    let metrics = truth.as_ref().map(|t| evaluate(&estimate, t)).transpose()?;
    if let Some(m) = &metrics {
        files.insert("metrics.json".into(), to_json_bytes(m));
    }
    if let Some(t) = &truth {
        files.insert("truth.json".into(), to_json_bytes(t));
    }
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        method: config.method,
        config: ExperimentConfig {
            output_dir: None,
            run: RunConfig {
                workers: None,
                ..config.run.clone()
            },
            ..config.clone()
        },
        hyperparams: hyper_used,
        seed,
        p: data.p(),
        n: data.n(),
        files: files.iter().map(|(k, v)| (k.clone(), sha256_hex(v))).collect(),
    };
    files.insert("manifest.json".into(), to_json_bytes(&manifest));
    Ok(ReportBundle {
        files,
        estimate,
        metrics,
        psrf,
    })
}
