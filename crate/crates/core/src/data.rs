//! Dense matrices, the validated observation matrix, and CSV ingestion.
//!
//! Datasets are stored feature-major on disk (rows = features, columns =
//! observations) and column-major in memory, so each observation is a
//! contiguous slice.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("at least 2 observations are required, found {found}")]
    TooFewObservations { found: usize },
    #[error("the matrix has no features")]
    NoFeatures,
    #[error("ragged input: row {row} has {found} fields, expected {expected}")]
    Ragged {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("could not parse {value:?} at row {row}, column {col} as a number")]
    Parse {
        row: usize,
        col: usize,
        value: String,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// Column-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_col_major(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, DataError> {
        if values.len() != rows * cols {
            return Err(DataError::Dimension(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self, DataError> {
        let mut values = Vec::with_capacity(rows * columns.len());
        for (k, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(DataError::Dimension(format!(
                    "column {k} has length {}, expected {rows}",
                    col.len()
                )));
            }
            values.extend_from_slice(col);
        }
        Ok(Self {
            rows,
            cols: columns.len(),
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DataError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(n_rows, n_cols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(DataError::Ragged {
                    row: r,
                    found: row.len(),
                    expected: n_cols,
                });
            }
            for (c, &v) in row.iter().enumerate() {
                m.set(r, c, v);
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[col * self.rows + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[col * self.rows + row] = value;
    }

    #[inline]
    pub fn column(&self, col: usize) -> &[f64] {
        &self.values[col * self.rows..(col + 1) * self.rows]
    }

    #[inline]
    pub fn column_mut(&mut self, col: usize) -> &mut [f64] {
        &mut self.values[col * self.rows..(col + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.cols).map(move |c| self.column(c))
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.cols).map(move |c| self.get(row, c))
    }

    pub fn as_col_major(&self) -> &[f64] {
        &self.values
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for c in 0..self.cols {
            for r in 0..self.rows {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).collect()).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    values: Vec<Vec<f64>>,
}

/// Serialized as `{"rows", "cols", "values"}` with `values` row-major nested.
impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MatrixRepr {
            rows: self.rows,
            cols: self.cols,
            values: self.to_rows(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(deserializer)?;
        if repr.rows == 0 {
            return Ok(Matrix::zeros(0, repr.cols));
        }
        let m = Matrix::from_rows(&repr.values).map_err(serde::de::Error::custom)?;
        if m.rows != repr.rows || m.cols != repr.cols {
            return Err(serde::de::Error::custom(format!(
                "declared shape {}x{} does not match values {}x{}",
                repr.rows, repr.cols, m.rows, m.cols
            )));
        }
        Ok(m)
    }
}

/// A validated p×n observation matrix; column `i` is observation `Y_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Matrix,
}

impl DataMatrix {
    pub fn new(values: Matrix) -> Result<Self, DataError> {
        validate_dataset(&values)?;
        Ok(Self { values })
    }

    /// Builds from observation vectors, each of length p.
    pub fn from_observations(observations: &[Vec<f64>]) -> Result<Self, DataError> {
        let p = observations.first().map_or(0, Vec::len);
        Self::new(Matrix::from_columns(p, observations)?)
    }

    /// Number of features.
    pub fn p(&self) -> usize {
        self.values.rows()
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn observation(&self, i: usize) -> &[f64] {
        self.values.column(i)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.values
    }

    pub fn into_matrix(self) -> Matrix {
        self.values
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub p: usize,
    pub n: usize,
    /// Features whose value is identical across every observation.
    pub constant_rows: Vec<usize>,
    pub n_over_p: f64,
}

/// Checks the observation-matrix invariants and summarizes the input.
pub fn validate_dataset(values: &Matrix) -> Result<ValidationReport, DataError> {
    if values.rows() == 0 {
        return Err(DataError::NoFeatures);
    }
    if values.cols() < 2 {
        return Err(DataError::TooFewObservations {
            found: values.cols(),
        });
    }
    for col in 0..values.cols() {
        for (row, v) in values.column(col).iter().enumerate() {
            if !v.is_finite() {
                return Err(DataError::NonFiniteEntry { row, col });
            }
        }
    }
    let constant_rows = (0..values.rows())
        .filter(|&r| {
            let first = values.get(r, 0);
            values.row(r).all(|v| v == first)
        })
        .collect();
    Ok(ValidationReport {
        p: values.rows(),
        n: values.cols(),
        constant_rows,
        n_over_p: values.cols() as f64 / values.rows() as f64,
    })
}

/// A parsed CSV table with optional header and row-name column.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub values: Matrix,
    pub row_names: Option<Vec<String>>,
    pub col_names: Option<Vec<String>>,
}

/// Reads a numeric CSV. A first row with any non-numeric field is taken as a
/// header; a first column that does not parse is taken as row names.
pub fn read_csv<R: Read>(reader: R) -> Result<CsvTable, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records: Vec<Vec<String>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DataError::Csv(e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        records.push(rec.iter().map(str::to_owned).collect());
    }
    let parses = |s: &str| s.parse::<f64>().is_ok();

    let mut header = None;
    if let Some(first) = records.first() {
        let body_start = usize::from(first.len() > 1 && !parses(&first[0]));
        if first[body_start..].iter().any(|f| !parses(f)) {
            header = Some(records.remove(0));
        }
    }
    let has_row_names = records.first().is_some_and(|r| !r.is_empty() && !parses(&r[0]));
    let skip = usize::from(has_row_names);

    let mut rows = Vec::with_capacity(records.len());
    let mut row_names = Vec::new();
    for (r, rec) in records.iter().enumerate() {
        if has_row_names {
            row_names.push(rec[0].clone());
        }
        let row = rec[skip..]
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>().map_err(|_| DataError::Parse {
                    row: r,
                    col: c + skip,
                    value: f.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let values = if rows.is_empty() {
        Matrix::zeros(0, 0)
    } else {
        Matrix::from_rows(&rows)?
    };
    let col_names = header.map(|h| {
        if h.len() == values.cols() + 1 {
            h[1..].to_vec()
        } else {
            h
        }
    });
    Ok(CsvTable {
        values,
        row_names: has_row_names.then_some(row_names),
        col_names,
    })
}

/// Reads a features×observations CSV into a validated dataset.
/// `transpose` accepts observations×features files instead.
pub fn read_dataset(path: &Path, transpose: bool) -> crate::Result<DataMatrix> {
    let file = std::fs::File::open(path)
        .map_err(|e| crate::Error::io(format!("opening {}", path.display()), e))?;
    let table = read_csv(file)?;
    let m = if transpose {
        table.values.transpose()
    } else {
        table.values
    };
    Ok(DataMatrix::new(m)?)
}

/// Writes a matrix row by row without a header.
pub fn write_csv<W: Write>(matrix: &Matrix, writer: W) -> Result<(), DataError> {
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    for r in 0..matrix.rows() {
        wtr.write_record(matrix.row(r).map(|v| v.to_string()))
            .map_err(|e| DataError::Csv(e.to_string()))?;
    }
    wtr.flush().map_err(|e| DataError::Csv(e.to_string()))?;
    Ok(())
}
