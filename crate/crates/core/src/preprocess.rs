//! Single-cell count preprocessing: gene filtering, log transform, per-cell
//! normalization by the sum of log values, and per-gene standardization.

use crate::data::{DataMatrix, Matrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PreprocessError {
    #[error("count at gene {gene}, cell {cell} is negative or not finite")]
    InvalidCount { gene: usize, cell: usize },
    #[error("no {0} left after filtering")]
    EmptyAfterFilter(&'static str),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub data: DataMatrix,
    /// Original row indices of the retained genes.
    pub kept_genes: Vec<usize>,
    /// Original column indices of the retained cells.
    pub kept_cells: Vec<usize>,
}

/// Default gene filter: totals at or below this are dropped.
pub const DEFAULT_MIN_TOTAL: f64 = 10.0;

/// `log2(x + 1)` divided by the cell's sum of those values; `None` for an
/// all-zero cell.
pub fn log_normalize_cell(counts: &[f64]) -> Option<Vec<f64>> {
    let mut logs: Vec<f64> = counts.iter().map(|&x| (x + 1.0).log2()).collect();
    let total: f64 = logs.iter().sum();
    if total == 0.0 {
        return None;
    }
    logs.iter_mut().for_each(|x| *x /= total);
    Some(logs)
}

/// `counts` is genes × cells.
///
/// 1. drop genes whose total count is ≤ `min_total`;
/// 2. `x ← log2(count + 1)`;
/// 3. divide every entry by its cell's sum of log values (cells whose sum is
///    zero are dropped with a warning);
/// 4. standardize every gene to mean 0 and population variance 1, dropping
///    constant genes with a warning.
pub fn preprocess_scrna(counts: &Matrix, min_total: f64) -> Result<Preprocessed, PreprocessError> {
    let (genes, cells) = (counts.rows(), counts.cols());
    for c in 0..cells {
        for (g, &x) in counts.column(c).iter().enumerate() {
            if !(x.is_finite() && x >= 0.0) {
                return Err(PreprocessError::InvalidCount { gene: g, cell: c });
            }
        }
    }
    let kept: Vec<usize> = (0..genes)
        .filter(|&g| counts.row(g).sum::<f64>() > min_total)
        .collect();
    if kept.is_empty() {
        return Err(PreprocessError::EmptyAfterFilter("genes"));
    }

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(cells);
    let mut kept_cells = Vec::with_capacity(cells);
    for c in 0..cells {
        let col = counts.column(c);
        let retained: Vec<f64> = kept.iter().map(|&g| col[g]).collect();
        match log_normalize_cell(&retained) {
            Some(logs) => {
                columns.push(logs);
                kept_cells.push(c);
            }
            None => log::warn!("cell {c} has no counts on retained genes; dropped"),
        }
    }
    if kept_cells.is_empty() {
        return Err(PreprocessError::EmptyAfterFilter("cells"));
    }

    let n = columns.len() as f64;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(kept.len());
    let mut kept_genes = Vec::with_capacity(kept.len());
    for (r, &g) in kept.iter().enumerate() {
        let mut row: Vec<f64> = columns.iter().map(|col| col[r]).collect();
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        if var <= 0.0 || !var.is_finite() {
            log::warn!("gene {g} is constant after normalization; dropped");
            continue;
        }
        let sd = var.sqrt();
        row.iter_mut().for_each(|x| *x = (*x - mean) / sd);
        rows.push(row);
        kept_genes.push(g);
    }
    if rows.is_empty() {
        return Err(PreprocessError::EmptyAfterFilter("genes"));
    }
    let data = DataMatrix::new(Matrix::from_rows(&rows)?)?;
    Ok(Preprocessed {
        data,
        kept_genes,
        kept_cells,
    })
}
