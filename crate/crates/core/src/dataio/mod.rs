//! Datasets, label preprocessing, deterministic splits and on-disk formats.

pub mod container;
pub mod csv;
pub mod lfmt;

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{invalid, mismatch, LofiError, Result};
use crate::linalg::{mean, DenseMatrix};
use crate::rng::Rng;

pub use container::Container;
pub use lfmt::{load_lfmt, save_lfmt};

/// Inputs `x` (one sample per row) with scalar labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DenseMatrix,
    pub y: Vec<f64>,
    pub centered: bool,
    pub name: String,
}

impl Dataset {
    pub fn new(x: DenseMatrix, y: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        if x.rows() == 0 {
            return invalid("dataset needs at least one sample");
        }
        if x.rows() != y.len() {
            return mismatch(format!("{} inputs but {} labels", x.rows(), y.len()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return invalid("labels must be finite");
        }
        Ok(Self { x, y, centered: false, name: name.into() })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// Rows `idx`, keeping the centered flag of the parent.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            centered: self.centered,
            name: self.name.clone(),
        }
    }

    /// Checks the centering invariant.
    pub fn labels_are_centered(&self) -> bool {
        let m = mean(&self.y);
        let sd = crate::linalg::variance(&self.y).sqrt();
        if sd == 0.0 {
            m.abs() <= 1e-12
        } else {
            m.abs() <= 1e-10 * sd
        }
    }
}

/// `y ← y − mean(y)`. Idempotent.
pub fn center_labels(ds: &Dataset) -> Dataset {
    let m = mean(&ds.y);
    let mut y: Vec<f64> = ds.y.iter().map(|v| v - m).collect();
    // A second pass removes the rounding residue of the first.
    let m2 = mean(&y);
    y.iter_mut().for_each(|v| *v -= m2);
    Dataset { x: ds.x.clone(), y, centered: true, name: ds.name.clone() }
}

/// Maps class indices to ±1 by membership in `positive`.
pub fn binarize_labels(classes: &[usize], positive: &BTreeSet<usize>) -> Result<Vec<f64>> {
    if positive.is_empty() {
        return Err(LofiError::DegenerateLabels("positive set is empty".into()));
    }
    let y: Vec<f64> = classes
        .iter()
        .map(|c| if positive.contains(c) { 1.0 } else { -1.0 })
        .collect();
    if y.iter().all(|v| *v > 0.0) {
        return Err(LofiError::DegenerateLabels("every sample is positive".into()));
    }
    Ok(y)
}

/// Seeded random partition into `(train, test)` with
/// `round(n · train_fraction)` training rows.
pub fn split(ds: &Dataset, train_fraction: f64, rng: &mut Rng) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(ds.len(), train_fraction, rng)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

pub fn split_indices(n: usize, train_fraction: f64, rng: &mut Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return invalid(format!("train fraction {train_fraction} must lie in (0, 1)"));
    }
    let n_train = (n as f64 * train_fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return invalid(format!("fraction {train_fraction} of {n} samples leaves an empty split"));
    }
    let perm = rng.permutation(n);
    Ok((perm[..n_train].to_vec(), perm[n_train..].to_vec()))
}

/// Optional input preprocessing. The default pipeline leaves inputs as-is.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InputScaling {
    #[default]
    None,
    /// Divide every entry by the given constant (e.g. 255 for 8-bit pixels).
    Divide(f64),
    /// Per-feature z-scoring with statistics from the data itself.
    Standardize,
}

impl InputScaling {
    pub fn describe(&self) -> String {
        match self {
            InputScaling::None => "none".into(),
            InputScaling::Divide(c) => format!("divide:{c}"),
            InputScaling::Standardize => "standardize".into(),
        }
    }
}

/// Per-feature means and standard deviations (constant columns keep sd 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &DenseMatrix) -> Self {
        let (n, d) = x.shape();
        let mut mean = vec![0.0; d];
        for r in 0..n {
            crate::linalg::axpy(1.0 / n as f64, x.row(r), &mut mean);
        }
        let mut var = vec![0.0; d];
        for r in 0..n {
            for (c, v) in x.row(r).iter().enumerate() {
                var[c] += (v - mean[c]).powi(2) / n as f64;
            }
        }
        let sd = var.iter().map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        Self { mean, sd }
    }

    pub fn apply(&self, x: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(x.rows(), x.cols(), |r, c| (x[(r, c)] - self.mean[c]) / self.sd[c])
    }
}

pub fn scale_inputs(x: &DenseMatrix, scaling: InputScaling) -> DenseMatrix {
    match scaling {
        InputScaling::None => x.clone(),
        InputScaling::Divide(c) => x.scale(1.0 / c),
        InputScaling::Standardize => Standardizer::fit(x).apply(x),
    }
}

/// Stores a dataset as one LFMT matrix whose last column holds the labels.
pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let y = DenseMatrix::column(&ds.y);
    save_lfmt(&ds.x.hstack(&y)?, path)
}

/// Loads a dataset from `.lfmt` or `.csv` (labels in the last column).
pub fn load_dataset(path: impl AsRef<Path>, skip_header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let m = if is_csv { csv::load_csv(path, skip_header)? } else { load_lfmt(path)? };
    if m.cols() < 2 {
        return invalid("dataset file needs at least one feature column and one label column");
    }
    let d = m.cols() - 1;
    let idx: Vec<usize> = (0..d).collect();
    let x = m.select_cols(&idx);
    let y = m.col(d);
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Dataset::new(x, y, name)
}
