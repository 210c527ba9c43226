use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use sparse_gmm::cmle::CmleConfig;
use sparse_gmm::data::{read_csv, read_dataset, write_csv, DataMatrix};
use sparse_gmm::experiment::{
    evaluate as score, load_data, read_truth, run_experiment_with_progress, sha256_hex, summarize_chains,
    to_json_bytes, ExperimentConfig, Manifest, Method, MetricsReport,
};
use sparse_gmm::gibbs::ProgressEvent;
use sparse_gmm::preprocess::preprocess_scrna;
use sparse_gmm::summary::{ClusterEstimate, PsrfEntry};
use sparse_gmm::synth::{generate, Scenario, ScenarioSpec};
use sparse_gmm::trace::ChainTrace;
use sparse_gmm::ErrorKind;

use crate::{DiagnoseArgs, EvaluateArgs, FitArgs, MethodArg, PreprocessArgs, ReportArgs, ScenarioKind, SimulateArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] sparse_gmm::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Runtime => 4,
            },
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{} does not exist or is not a file", path.display())))
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    require_file(path)?;
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        context: format!("reading {}", path.display()),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| CliError::Io {
            context: format!("creating {}", parent.display()),
            source,
        })?;
    }
    fs::write(path, bytes).map_err(|source| CliError::Io {
        context: format!("writing {}", path.display()),
        source,
    })
}

fn print_json<T: Serialize>(value: &T) {
    print!("{}", String::from_utf8(to_json_bytes(value)).expect("JSON is UTF-8"));
}

fn data_csv(data: &DataMatrix) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(data.matrix(), &mut buf).map_err(sparse_gmm::Error::from)?;
    Ok(buf)
}

pub fn set_threads(threads: usize) -> Result<()> {
    if threads == 0 {
        return Err(CliError::Config("thread count must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut spec = match (&args.config, args.scenario) {
        (Some(path), _) => read_json::<ScenarioSpec>(path)?,
        (None, Some(_)) => ScenarioSpec::new(Scenario::Two),
        (None, None) => return Err(CliError::Config("give --scenario or --config".into())),
    };
    if let Some(kind) = args.scenario {
        spec.scenario = match kind {
            ScenarioKind::One => Scenario::One {
                k_star: args.k_star,
                s: args.s,
            },
            ScenarioKind::Two => Scenario::Two,
            ScenarioKind::Three => Scenario::Three,
        };
    }
    spec.p = args.p.or(spec.p);
    spec.n = args.n.or(spec.n);
    spec.seed = args.seed.unwrap_or(spec.seed);
    spec.mean_scale = args.mean_scale.unwrap_or(spec.mean_scale);

    let sim = generate(&spec).map_err(sparse_gmm::Error::from)?;
    let truth = sparse_gmm::experiment::Truth {
        z_true: sim.z_true,
        mu_true: sim.mu_true,
    };
    write_file(&args.out.join("data.csv"), &data_csv(&sim.data)?)?;
    write_file(&args.out.join("truth.json"), &to_json_bytes(&truth))?;
    write_file(&args.out.join("scenario.json"), &to_json_bytes(&spec))?;
    log::info!("wrote p = {}, n = {} to {}", sim.data.p(), sim.data.n(), args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct Kept {
    genes: Vec<usize>,
    cells: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gene_names: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cell_names: Option<Vec<String>>,
}

pub fn preprocess(args: &PreprocessArgs) -> Result<()> {
    require_file(&args.counts)?;
    let file = fs::File::open(&args.counts).map_err(|source| CliError::Io {
        context: format!("opening {}", args.counts.display()),
        source,
    })?;
    let table = read_csv(file).map_err(sparse_gmm::Error::from)?;
    let (counts, mut gene_names, mut cell_names) = (table.values, table.row_names, table.col_names);
    let counts = if args.transpose {
        std::mem::swap(&mut gene_names, &mut cell_names);
        counts.transpose()
    } else {
        counts
    };
    let out = preprocess_scrna(&counts, args.min_total).map_err(sparse_gmm::Error::from)?;
    log::info!(
        "kept {} of {} genes and {} of {} cells",
        out.kept_genes.len(),
        counts.rows(),
        out.kept_cells.len(),
        counts.cols()
    );
    write_file(&args.out, &data_csv(&out.data)?)?;
    if let Some(path) = &args.kept {
        let pick = |names: Option<Vec<String>>, idx: &[usize]| {
            names.map(|n| idx.iter().map(|&i| n[i].clone()).collect::<Vec<_>>())
        };
        let kept = Kept {
            gene_names: pick(gene_names, &out.kept_genes),
            cell_names: pick(cell_names, &out.kept_cells),
            genes: out.kept_genes,
            cells: out.kept_cells,
        };
        write_file(path, &to_json_bytes(&kept))?;
    }
    Ok(())
}

fn fit_config(args: &FitArgs, threads: Option<usize>) -> Result<(ExperimentConfig, PathBuf)> {
    let mut config = match &args.config {
        Some(path) => read_json::<ExperimentConfig>(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(data) = &args.data {
        config.dataset = Some(data.clone());
        config.scenario = None;
    }
    if args.transpose {
        config.transpose = true;
    }
    if let Some(truth) = &args.truth {
        config.truth = Some(truth.clone());
    }
    if let Some(m) = args.method {
        config.method = match m {
            MethodArg::Bayesian => Method::Bayesian,
            MethodArg::Cmle => Method::Cmle,
            MethodArg::Kmeans => Method::KMeans,
        };
    }
    if let Some(k) = args.k {
        config.cmle.get_or_insert_with(|| CmleConfig::new(k, None)).k = k;
    }
    if let Some(s) = args.s {
        match config.cmle.as_mut() {
            Some(c) => c.s = Some(s),
            None => return Err(CliError::Config("--s needs --k".into())),
        }
    }
    let run = &mut config.run;
    run.n_chains = args.chains.unwrap_or(run.n_chains);
    run.n_burn = args.burn.unwrap_or(run.n_burn);
    run.n_keep = args.keep.unwrap_or(run.n_keep);
    run.thin = args.thin.unwrap_or(run.thin);
    if let Some(seed) = args.seed {
        run.seed = seed;
        if let Some(c) = config.cmle.as_mut() {
            c.seed = seed;
        }
    }
    if threads.is_some() {
        config.run.workers = threads;
    }
    if let Some(out) = &args.out {
        config.output_dir = Some(out.clone());
    }
    let out = config
        .output_dir
        .clone()
        .ok_or_else(|| CliError::Config("no output directory (--out or output_dir)".into()))?;
    config.validate()?;
    for path in config.dataset.iter().chain(&config.truth) {
        require_file(path)?;
    }
    Ok((config, out))
}

fn log_progress(e: &ProgressEvent) {
    let step = (e.total / 10).max(1);
    if e.iteration.is_multiple_of(step) || e.iteration == e.total {
        log::info!(
            "chain {}: {}/{} sweeps, K = {}, log-likelihood {:.2}",
            e.chain_id,
            e.iteration,
            e.total,
            e.k,
            e.log_likelihood
        );
    }
}

pub fn fit(args: &FitArgs, threads: Option<usize>) -> Result<()> {
    let (config, out) = fit_config(args, threads)?;
    let bundle = run_experiment_with_progress(&config, Some(&log_progress))?;
    bundle.write_to(&out)?;
    println!("K̂ = {}", bundle.estimate.k_hat);
    if let Some(m) = &bundle.metrics {
        println!("{}", metrics_line(m));
    }
    for entry in bundle.psrf.iter().filter(|e| e.psrf > 1.1) {
        log::warn!("PSRF of {} is {:.3}", entry.parameter, entry.psrf);
    }
    Ok(())
}

fn metrics_line(m: &MetricsReport) -> String {
    let nmi = m.nmi.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
    format!(
        "ARI = {:.4}, NMI = {nmi}, d_H = {:.4}, mean-matrix error = {:.4}, K = {} (true {})",
        m.ari, m.min_hamming, m.mean_matrix_error, m.k_hat, m.k_true
    )
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let estimate: ClusterEstimate = read_json(&args.estimate)?;
    require_file(&args.truth)?;
    let truth = read_truth(&args.truth)?;
    if truth.z_true.len() != estimate.z_hat.len() || truth.mu_true.rows() != estimate.mu_hat.rows() {
        return Err(CliError::Data(format!(
            "estimate has n = {}, p = {} but truth has n = {}, p = {}",
            estimate.z_hat.len(),
            estimate.mu_hat.rows(),
            truth.z_true.len(),
            truth.mu_true.rows()
        )));
    }
    let metrics = score(&estimate, &truth)?;
    if let Some(out) = &args.out {
        write_file(out, &to_json_bytes(&metrics))?;
    }
    print_json(&metrics);
    Ok(())
}

#[derive(Serialize)]
struct Diagnostics {
    chains: usize,
    snapshots_per_chain: Vec<usize>,
    /// Posterior counts of K per chain, `(K, snapshots)` ascending in K.
    k_counts: Vec<Vec<(usize, usize)>>,
    k_hat: usize,
    psrf: Vec<PsrfEntry>,
}

fn read_trace(path: &Path) -> Result<ChainTrace> {
    require_file(path)?;
    let file = fs::File::open(path).map_err(|source| CliError::Io {
        context: format!("opening {}", path.display()),
        source,
    })?;
    ChainTrace::read_ndjson(std::io::BufReader::new(file))
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn run_traces(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|source| CliError::Io {
        context: format!("listing {}", dir.display()),
        source,
    })?;
    let mut found: Vec<(u64, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|source| CliError::Io {
                context: format!("listing {}", dir.display()),
                source,
            })?
            .path();
        let id = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("chain_")?.strip_suffix(".ndjson")?.parse().ok());
        if let Some(id) = id {
            found.push((id, path));
        }
    }
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

fn chain_k_counts(trace: &ChainTrace) -> Vec<(usize, usize)> {
    let mut counts = std::collections::BTreeMap::new();
    for s in &trace.snapshots {
        *counts.entry(s.k).or_insert(0) += 1;
    }
    counts.into_iter().collect()
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<()> {
    let (paths, data) = match &args.run {
        Some(dir) => {
            let manifest: Manifest = read_json(&dir.join("manifest.json"))?;
            (run_traces(dir)?, load_data(&manifest.config)?.0)
        }
        None => {
            let data_path = args
                .data
                .as_ref()
                .ok_or_else(|| CliError::Config("give --run, or --traces with --data".into()))?;
            require_file(data_path)?;
            (args.traces.clone(), read_dataset(data_path, args.transpose)?)
        }
    };
    if paths.is_empty() {
        return Err(CliError::Data("no sampler traces found".into()));
    }
    let traces = paths.iter().map(|p| read_trace(p)).collect::<Result<Vec<_>>>()?;
    for (t, path) in traces.iter().zip(&paths) {
        if t.meta.p != data.p() || t.meta.n != data.n() {
            return Err(CliError::Data(format!(
                "{} was fitted to p = {}, n = {} but the data has p = {}, n = {}",
                path.display(),
                t.meta.p,
                t.meta.n,
                data.p(),
                data.n()
            )));
        }
    }
    if traces.len() < 2 {
        log::warn!("PSRF needs at least two chains; only K counts are reported");
    }
    let (estimate, psrf) = summarize_chains(&traces, &data)?;
    let report = Diagnostics {
        chains: traces.len(),
        snapshots_per_chain: traces.iter().map(|t| t.snapshots.len()).collect(),
        k_counts: traces.iter().map(chain_k_counts).collect(),
        k_hat: estimate.k_hat,
        psrf,
    };
    if let Some(out) = &args.out {
        write_file(out, &to_json_bytes(&report))?;
    }
    print_json(&report);
    Ok(())
}

#[derive(Serialize)]
struct RunReport {
    method: Method,
    seed: u64,
    p: usize,
    n: usize,
    k_hat: usize,
    cluster_sizes: Vec<usize>,
    support: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<MetricsReport>,
    psrf: Vec<PsrfEntry>,
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let manifest: Manifest = read_json(&args.run.join("manifest.json"))?;
    for (name, digest) in &manifest.files {
        let path = args.run.join(name);
        require_file(&path)?;
        let bytes = fs::read(&path).map_err(|source| CliError::Io {
            context: format!("reading {}", path.display()),
            source,
        })?;
        if &sha256_hex(&bytes) != digest {
            return Err(CliError::Data(format!("{name} does not match the manifest checksum")));
        }
    }
    let estimate: ClusterEstimate = read_json(&args.run.join("estimate.json"))?;
    let metrics: Option<MetricsReport> = manifest
        .files
        .contains_key("metrics.json")
        .then(|| read_json(&args.run.join("metrics.json")))
        .transpose()?;
    let psrf: Vec<PsrfEntry> = if manifest.files.contains_key("psrf.json") {
        read_json(&args.run.join("psrf.json"))?
    } else {
        Vec::new()
    };
    let mut cluster_sizes = vec![0; estimate.k_hat];
    for &l in &estimate.z_hat {
        cluster_sizes[l] += 1;
    }
    let report = RunReport {
        method: manifest.method,
        seed: manifest.seed,
        p: manifest.p,
        n: manifest.n,
        k_hat: estimate.k_hat,
        cluster_sizes,
        support: estimate.support_hat,
        metrics,
        psrf,
    };
    if args.json {
        print_json(&report);
        return Ok(());
    }
    println!("method: {:?}, seed {}", report.method, report.seed);
    println!("data: p = {}, n = {}", report.p, report.n);
    println!("K̂ = {}, cluster sizes {:?}", report.k_hat, report.cluster_sizes);
    println!("selected features ({}): {:?}", report.support.len(), report.support);
    if let Some(m) = &report.metrics {
        println!("{}", metrics_line(m));
    }
    for e in &report.psrf {
        println!("PSRF {}: {:.4}", e.parameter, e.psrf);
    }
    Ok(())
}
