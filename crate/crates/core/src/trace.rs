//! Post-burn-in chain snapshots and their newline-delimited JSON form.
//!
//! A trace file starts with one `{"record":"meta",...}` line followed by one
//! `{"record":"snapshot",...}` line per kept iteration.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::state::ModelState;

/// Which mean coordinates a snapshot keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeanStorage {
    /// Only coordinates of features whose indicator is on; the rest read as 0.
    #[default]
    Sparse,
    /// Every coordinate.
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    /// Sweep index counted from the first post-burn-in sweep.
    pub iteration: usize,
    pub z: Vec<usize>,
    /// Active cluster count; equals the number of distinct labels in `z`.
    pub k: usize,
    pub theta: f64,
    pub log_likelihood: f64,
    /// Features with an active slab indicator (in any cluster, in column mode).
    pub active_features: Vec<usize>,
    /// Per-cluster means; indexed like `active_features` unless `dense_means`.
    pub means: Vec<Vec<f64>>,
    pub dense_means: bool,
}

impl Snapshot {
    pub fn capture(
        state: &ModelState,
        iteration: usize,
        data: &DataMatrix,
        storage: MeanStorage,
    ) -> Self {
        let active_features = state.active_features();
        let means = match storage {
            MeanStorage::Dense => state.clusters().iter().map(|c| c.mu.clone()).collect(),
            MeanStorage::Sparse => state
                .clusters()
                .iter()
                .map(|c| active_features.iter().map(|&j| c.mu[j]).collect())
                .collect(),
        };
        Self {
            iteration,
            z: state.z().to_vec(),
            k: state.k(),
            theta: state.theta(),
            log_likelihood: state.log_likelihood(data),
            active_features,
            means,
            dense_means: storage == MeanStorage::Dense,
        }
    }

    /// Coordinate `j` of cluster `c`'s stored mean.
    pub fn mean_coord(&self, c: usize, j: usize) -> f64 {
        if self.dense_means {
            self.means[c][j]
        } else {
            match self.active_features.binary_search(&j) {
                Ok(pos) => self.means[c][pos],
                Err(_) => 0.0,
            }
        }
    }

    /// Cluster `c`'s stored mean expanded to length `p`.
    pub fn dense_mean(&self, c: usize, p: usize) -> Vec<f64> {
        if self.dense_means {
            return self.means[c].clone();
        }
        let mut out = vec![0.0; p];
        for (pos, &j) in self.active_features.iter().enumerate() {
            out[j] = self.means[c][pos];
        }
        out
    }

    /// `‖Y − μ Lᵀ‖²_F` from the stored means.
    pub fn residual_sum_of_squares(&self, data: &DataMatrix) -> f64 {
        let means: Vec<Vec<f64>> = (0..self.k).map(|c| self.dense_mean(c, data.p())).collect();
        self.z
            .iter()
            .enumerate()
            .map(|(i, &l)| crate::state::squared_distance(data.observation(i), &means[l]))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub chain_id: u64,
    pub seed: u64,
    pub n_burn: usize,
    pub thin: usize,
    pub p: usize,
    pub n: usize,
    pub hyperparams_digest: String,
    pub mean_storage: MeanStorage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub meta: TraceMeta,
    pub snapshots: Vec<Snapshot>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Meta(TraceMeta),
    Snapshot(Snapshot),
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum RecordRef<'a> {
    Meta(&'a TraceMeta),
    Snapshot(&'a Snapshot),
}

#[derive(Debug, thiserror::Error)]
pub enum TraceIoError {
    #[error("trace io: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("trace has no meta record")]
    MissingMeta,
    #[error("unexpected meta record on line {0}")]
    DuplicateMeta(usize),
}

impl ChainTrace {
    pub fn write_ndjson<W: Write>(&self, mut out: W) -> Result<(), TraceIoError> {
        let records = std::iter::once(RecordRef::Meta(&self.meta))
            .chain(self.snapshots.iter().map(RecordRef::Snapshot));
        for (idx, record) in records.enumerate() {
            serde_json::to_writer(&mut out, &record)
                .map_err(|e| TraceIoError::Json { line: idx + 1, source: e })?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_ndjson<R: BufRead>(input: R) -> Result<Self, TraceIoError> {
        let mut meta = None;
        let mut snapshots = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(&line)
                .map_err(|e| TraceIoError::Json { line: idx + 1, source: e })?;
            match record {
                Record::Meta(m) if meta.is_none() => meta = Some(m),
                Record::Meta(_) => return Err(TraceIoError::DuplicateMeta(idx + 1)),
                Record::Snapshot(s) => snapshots.push(s),
            }
        }
        Ok(Self {
            meta: meta.ok_or(TraceIoError::MissingMeta)?,
            snapshots,
        })
    }
}
