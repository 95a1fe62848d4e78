//! Seeded randomness.
//!
//! The generator is ChaCha8 (`rand_chacha`) seeded through
//! `SeedableRng::seed_from_u64`; standard normals come from the
//! `rand_distr::StandardNormal` ziggurat sampler. Both are pinned by the
//! crate's dependency versions, so a seed fully determines every stream.

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::DenseMatrix;

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream, a pure function of this generator's seed and
    /// `stream`. Does not advance `self`.
    pub fn derive(&self, stream: u64) -> Rng {
        let mixed = splitmix64(self.seed ^ splitmix64(stream.wrapping_add(0x9E37_79B9_7F4A_7C15)));
        Rng::new(mixed)
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn gaussian_vec(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.normal()).collect()
    }

    /// I.i.d. standard normal entries, filled row by row.
    pub fn gaussian_matrix(&mut self, rows: usize, cols: usize) -> DenseMatrix {
        let data = self.gaussian_vec(rows * cols);
        DenseMatrix::from_vec(rows, cols, data)
    }

    /// Rows drawn uniformly from the unit sphere (normalized Gaussians).
    pub fn sphere_rows(&mut self, rows: usize, dim: usize) -> DenseMatrix {
        let mut m = self.gaussian_matrix(rows, dim);
        for r in 0..rows {
            let row = m.row_mut(r);
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            row.iter_mut().for_each(|v| *v /= n);
        }
        m
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut self.inner);
        idx
    }
}

/// Free-function form of [`Rng::gaussian_matrix`].
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    rng.gaussian_matrix(rows, cols)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_matrix() {
        let a = Rng::new(42).gaussian_matrix(7, 5);
        let b = Rng::new(42).gaussian_matrix(7, 5);
        assert_eq!(a, b);
        assert_ne!(a, Rng::new(43).gaussian_matrix(7, 5));
    }

    #[test]
    fn million_entries_moments() {
        let m = Rng::new(2024).gaussian_matrix(1000, 1000);
        let v = m.as_slice();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() <= 4.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() <= 0.01, "var {var}");
    }

    #[test]
    fn derive_is_pure() {
        let r = Rng::new(5);
        let mut a = r.derive(3);
        let mut b = r.derive(3);
        assert_eq!(a.normal(), b.normal());
        assert_ne!(r.derive(3).seed(), r.derive(4).seed());
    }

    #[test]
    fn sphere_rows_unit() {
        let m = Rng::new(1).sphere_rows(10, 6);
        for r in 0..10 {
            let n: f64 = m.row(r).iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }
}
