//! Label-weighted first and second moments of a representation.

use crate::error::{mismatch, Result};
use crate::linalg::{axpy, gemm, DenseMatrix};

/// Rows per accumulation batch. Fixed so that results do not depend on how
/// the caller chunks its data.
pub const MOMENT_BATCH: usize = 2048;

/// `û = (1/n) Σ_μ y_μ z_μ`.
pub fn linear_moment(z: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>> {
    if z.rows() != y.len() {
        return mismatch(format!("{} rows but {} labels", z.rows(), y.len()));
    }
    let mut u = vec![0.0; z.cols()];
    for (r, &w) in y.iter().enumerate() {
        axpy(w, z.row(r), &mut u);
    }
    let n = z.rows().max(1) as f64;
    u.iter_mut().for_each(|v| *v /= n);
    Ok(u)
}

/// Streaming accumulator for `Σ_μ w_μ z_μ z_μᵀ`.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    sum: DenseMatrix,
    count: usize,
    scratch: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(dim: usize) -> Self {
        Self { sum: DenseMatrix::zeros(dim, dim), count: 0, scratch: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.sum.rows()
    }

    /// Rows seen so far.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Adds the rows of `z` with weights `w`, internally in fixed-size
    /// batches.
    pub fn push(&mut self, z: &DenseMatrix, w: &[f64]) -> Result<()> {
        self.push_rows(z.as_slice(), z.cols(), w)
    }

    pub(crate) fn push_rows(&mut self, data: &[f64], cols: usize, w: &[f64]) -> Result<()> {
        if cols != self.dim() || data.len() != w.len() * cols {
            return mismatch(format!(
                "accumulator of dim {} fed {} values for {} weights",
                self.dim(),
                data.len(),
                w.len()
            ));
        }
        for (b, wb) in data.chunks(MOMENT_BATCH * cols).zip(w.chunks(MOMENT_BATCH)) {
            let rows = wb.len();
            let zb = DenseMatrix::from_vec(rows, cols, b.to_vec());
            self.scratch.clear();
            self.scratch.extend(b.chunks_exact(cols).zip(wb).flat_map(|(row, &wr)| row.iter().map(move |v| v * wr)));
            let wz = DenseMatrix::from_vec(rows, cols, std::mem::take(&mut self.scratch));
            gemm(1.0, &zb, true, &wz, false, 1.0, &mut self.sum);
            self.scratch = wz.into_vec();
        }
        self.count += w.len();
        Ok(())
    }

    /// `(1/divisor) Σ w zzᵀ`, symmetrized.
    pub fn finish(mut self, divisor: f64) -> DenseMatrix {
        self.sum.scale_in_place(1.0 / divisor);
        self.sum.symmetrize();
        self.sum
    }
}

/// `Ĉ = (1/n) Σ_μ y_μ z_μ z_μᵀ`.
pub fn moment_operator(z: &DenseMatrix, y: &[f64]) -> Result<DenseMatrix> {
    if z.rows() != y.len() {
        return mismatch(format!("{} rows but {} labels", z.rows(), y.len()));
    }
    let mut acc = MomentAccumulator::new(z.cols());
    acc.push(z, y)?;
    Ok(acc.finish(z.rows().max(1) as f64))
}

/// Same operator accumulated from a stream of `(rows, labels)` batches.
pub fn moment_operator_streamed<I>(dim: usize, batches: I) -> Result<DenseMatrix>
where
    I: IntoIterator<Item = (DenseMatrix, Vec<f64>)>,
{
    let mut acc = MomentAccumulator::new(dim);
    for (z, y) in batches {
        acc.push(&z, &y)?;
    }
    let n = acc.count().max(1) as f64;
    Ok(acc.finish(n))
}

/// `v ↦ Ĉ v` without forming `Ĉ`: two passes over `z`.
pub fn moment_apply(z: &DenseMatrix, y: &[f64], v: &[f64], out: &mut [f64]) {
    let n = z.rows().max(1) as f64;
    out.iter_mut().for_each(|o| *o = 0.0);
    for (r, &w) in y.iter().enumerate() {
        let row = z.row(r);
        let s = w * crate::linalg::dot(row, v) / n;
        if s != 0.0 {
            axpy(s, row, out);
        }
    }
}
