//! Sample-size predictions for individual task-correlated directions.
//!
//! For the k-th eigenvector of the signed operator `Ĉ` the recipe deflates the
//! unweighted covariance `Σ` by the previously found directions, measures the
//! residual effective dimension `D(r) = Σ_j λ_j / (λ_j + r)`, picks the
//! resolution `r* = argmax_{r ≤ λ₁} r √D(r)` and predicts
//! `n_k = (r* / ρ_k)² · D(r*)` with `ρ_k = |λ_k(Ĉ)|`. The proportionality
//! constant is taken to be 1, so thresholds are order-of-magnitude.

use serde::Serialize;

use crate::error::{invalid, LofiError, Result};
use crate::linalg::{dot, norm, sym_eig_topk, sym_eigenvalues_desc, DenseMatrix, EigMethod};

/// Lower end of the resolution search, relative to `λ₁`.
pub const R_SEARCH_FLOOR: f64 = 1e-12;
const R_GRID_POINTS: usize = 200;

/// Eigenvalues of a covariance, descending and clipped at zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSummary {
    eigenvalues: Vec<f64>,
}

impl SpectrumSummary {
    pub fn new(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return invalid("spectrum must be finite");
        }
        let top = eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let floor = -1e-10 * top.max(1.0);
        if let Some(&bad) = eigenvalues.iter().find(|v| **v < floor) {
            return Err(LofiError::NotPsd { min_eigenvalue: bad });
        }
        eigenvalues.iter_mut().for_each(|v| *v = v.max(0.0));
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { eigenvalues })
    }

    pub fn of_matrix(sigma: &DenseMatrix) -> Result<Self> {
        Self::new(sym_eigenvalues_desc(sigma)?)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn top(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { eigenvalues: self.eigenvalues.iter().map(|v| v * s).collect() }
    }
}

/// `D(r) = Σ_j λ_j / (λ_j + r)`.
pub fn effective_dimension(spectrum: &SpectrumSummary, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return invalid(format!("resolution must be positive, got {r}"));
    }
    Ok(d_of(spectrum, r))
}

/// Summed block by block over runs of equal eigenvalues, each block giving
/// `m·a/(a + r)`, with compensated accumulation across blocks.
fn d_of(s: &SpectrumSummary, r: f64) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for block in s.eigenvalues.chunk_by(|a, b| a == b) {
        let a = block[0];
        let term = block.len() as f64 * a / (a + r);
        let t = sum + term;
        comp += if sum.abs() >= term.abs() { (sum - t) + term } else { (term - t) + sum };
        sum = t;
    }
    sum + comp
}

fn objective(s: &SpectrumSummary, r: f64) -> f64 {
    r * d_of(s, r).sqrt()
}

/// `(r*, r*·√D(r*))` over `(1e-12·λ₁, λ₁]`: a 200-point log grid, then
/// golden-section refinement in log r around the best grid point. Ties go to
/// the larger r.
pub fn r_star(spectrum: &SpectrumSummary) -> Result<(f64, f64)> {
    let l1 = spectrum.top();
    if !(l1 > 0.0) {
        return Err(LofiError::ZeroSpectrum);
    }
    let (lo, hi) = ((R_SEARCH_FLOOR * l1).ln(), l1.ln());
    let step = (hi - lo) / (R_GRID_POINTS - 1) as f64;
    // Grid points from the top down so that ties resolve to larger r.
    let mut best_i = R_GRID_POINTS - 1;
    let mut best_f = objective(spectrum, l1);
    for i in (0..R_GRID_POINTS - 1).rev() {
        let f = objective(spectrum, (lo + step * i as f64).exp());
        if f > best_f * (1.0 + 1e-12) {
            best_f = f;
            best_i = i;
        }
    }
    if best_i == R_GRID_POINTS - 1 {
        return Ok((l1, best_f));
    }
    let (mut a, mut b) = (lo + step * best_i.saturating_sub(1) as f64, (lo + step * (best_i + 1) as f64).min(hi));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |t: f64| objective(spectrum, t.exp());
    let (mut c, mut d) = (b - phi * (b - a), a + phi * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    let (r, v) = (t.exp(), f(t));
    if v >= best_f {
        Ok((r, v))
    } else {
        Ok(((lo + step * best_i as f64).exp(), best_f))
    }
}

/// `(I − vvᵀ) Σ (I − vvᵀ)`.
pub fn residual_deflate(sigma: &DenseMatrix, v: &[f64]) -> Result<DenseMatrix> {
    let n = sigma.rows();
    if sigma.cols() != n || v.len() != n {
        return invalid(format!("{}x{} matrix with a vector of {}", sigma.rows(), sigma.cols(), v.len()));
    }
    if (norm(v) - 1.0).abs() > 1e-8 {
        return invalid(format!("deflation vector has norm {}", norm(v)));
    }
    let sv = sigma.mul_vec(v)?;
    let q = dot(v, &sv);
    let mut out = sigma.clone();
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] += -v[i] * sv[j] - sv[i] * v[j] + q * v[i] * v[j];
        }
    }
    out.symmetrize();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmergenceEntry {
    pub k: usize,
    pub rho: f64,
    pub r_star: f64,
    pub d_eff: f64,
    /// `None` when `ρ_k = 0` (the direction never emerges).
    pub n_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmergenceReport {
    pub entries: Vec<EmergenceEntry>,
    /// Eigenvectors of `Ĉ` used for deflation, one per column.
    #[serde(skip)]
    pub directions: DenseMatrix,
}

impl EmergenceReport {
    pub fn thresholds(&self) -> Vec<Option<f64>> {
        self.entries.iter().map(|e| e.n_threshold).collect()
    }
}

/// Applies the recipe to `Ĉ` (signed) and `Σ` (PSD) for `k = 1..=k_max`.
pub fn predict_thresholds(c_hat: &DenseMatrix, sigma: &DenseMatrix, k_max: usize) -> Result<EmergenceReport> {
    let dim = c_hat.rows();
    if sigma.shape() != c_hat.shape() {
        return invalid(format!("Ĉ is {dim}x{} but Σ is {}x{}", c_hat.cols(), sigma.rows(), sigma.cols()));
    }
    if k_max == 0 || k_max > dim {
        return invalid(format!("k_max {k_max} outside 1..={dim}"));
    }
    let eig = sym_eig_topk(c_hat, k_max, EigMethod::Auto)?;
    let mut residual = sigma.clone();
    let mut entries = Vec::with_capacity(k_max);
    for k in 0..k_max {
        if k > 0 {
            residual = residual_deflate(&residual, &eig.vector(k - 1))?;
        }
        let spec = SpectrumSummary::of_matrix(&residual)?;
        let (r, _) = r_star(&spec)?;
        let d = d_of(&spec, r);
        let rho = eig.eigenvalues[k].abs();
        let n_threshold = if rho > 0.0 { Some((r / rho).powi(2) * d) } else { None };
        entries.push(EmergenceEntry { k: k + 1, rho, r_star: r, d_eff: d, n_threshold });
    }
    Ok(EmergenceReport { entries, directions: eig.eigenvectors })
}

/// `|⟨a, b⟩|²` for unit vectors.
pub fn eigvec_overlap(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).powi(2)
}

/// First sample size at which `overlaps` reaches `level` (linear
/// interpolation in log n between grid points).
pub fn crossing_sample_size(ns: &[f64], overlaps: &[f64], level: f64) -> Option<f64> {
    for i in 0..ns.len().min(overlaps.len()) {
        if overlaps[i] >= level {
            if i == 0 {
                return Some(ns[0]);
            }
            let (a, b) = (overlaps[i - 1], overlaps[i]);
            let t = (level - a) / (b - a);
            let (la, lb) = (ns[i - 1].ln(), ns[i].ln());
            return Some((la + t * (lb - la)).exp());
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(v: &[f64]) -> SpectrumSummary {
        SpectrumSummary::new(v.to_vec()).unwrap()
    }

    #[test]
    fn effective_dimension_values() {
        assert_eq!(effective_dimension(&spec(&[1.0, 1.0, 1.0]), 1.0).unwrap(), 1.5);
        assert!(effective_dimension(&spec(&[1.0, 1.0]), 1e12).unwrap() <= 2e-12);
        assert!((effective_dimension(&spec(&[4.0, 1.0, 0.25]), 1.0).unwrap() - 1.5).abs() < 1e-15);
        assert!(effective_dimension(&spec(&[1.0]), 0.0).is_err());
        let s = spec(&[3.0, 1.0, 0.1]);
        let mut prev = f64::INFINITY;
        for r in [1e-6, 1e-3, 0.1, 1.0, 10.0] {
            let d = effective_dimension(&s, r).unwrap();
            assert!(d < prev && d <= 3.0);
            prev = d;
        }
    }

    #[test]
    fn r_star_flat_and_scaling() {
        let (r, v) = r_star(&spec(&[2.0; 7])).unwrap();
        assert_eq!(r, 2.0);
        assert!((v - 2.0 * (3.5f64).sqrt()).abs() < 1e-12);
        let (r, v) = r_star(&spec(&[0.3])).unwrap();
        assert_eq!(r, 0.3);
        assert!((v - 0.3 / 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(r_star(&spec(&[0.0, 0.0])), Err(LofiError::ZeroSpectrum)));

        let s = spec(&[5.0, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01]);
        let (r1, v1) = r_star(&s).unwrap();
        let (r2, v2) = r_star(&s.scaled(3.0)).unwrap();
        assert!((r2 / r1 - 3.0).abs() < 1e-6 && (v2 / v1 - 3.0).abs() < 1e-9);
    }

    #[test]
    fn r_star_matches_brute_force() {
        let s = spec(&[5.0, 0.5, 0.4, 0.3, 0.2, 0.1, 0.1, 0.1, 0.1, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05]);
        let (r, v) = r_star(&s).unwrap();
        let l1 = 5.0f64;
        let mut best = (0.0, 0.0);
        for i in 0..=10_000 {
            let t = (1e-12f64 * l1).ln() + (l1.ln() - (1e-12f64 * l1).ln()) * i as f64 / 10_000.0;
            let f = objective(&s, t.exp());
            if f >= best.1 {
                best = (t.exp(), f);
            }
        }
        assert!(v >= best.1 * (1.0 - 1e-9));
        assert!((r.ln() - best.0.ln()).abs() < 0.01);
    }

    #[test]
    fn deflation() {
        let sigma = DenseMatrix::from_diag(&[3.0, 2.0, 1.0]);
        let out = residual_deflate(&sigma, &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(out, DenseMatrix::from_diag(&[3.0, 0.0, 1.0]));
        let v = [0.6, 0.8];
        let out = residual_deflate(&DenseMatrix::identity(2), &v).unwrap();
        let want = DenseMatrix::from_fn(2, 2, |i, j| f64::from(u8::from(i == j)) - v[i] * v[j]);
        assert!(out.sub(&want).unwrap().max_abs() < 1e-15);
        assert!(residual_deflate(&sigma, &[1.0, 1.0, 0.0]).is_err());
        let mut rng = crate::rng::Rng::new(1);
        let a = rng.gaussian_matrix(6, 6);
        let psd = a.t_matmul(&a).unwrap();
        let mut u = rng.gaussian_vec(6);
        let nu = norm(&u);
        u.iter_mut().for_each(|x| *x /= nu);
        let out = residual_deflate(&psd, &u).unwrap();
        assert!(sym_eigenvalues_desc(&out).unwrap().iter().all(|v| *v >= -1e-10));
    }

    #[test]
    fn two_dimensional_recipe() {
        let rep = predict_thresholds(&DenseMatrix::from_diag(&[1.0, 0.5]), &DenseMatrix::identity(2), 2).unwrap();
        let e = &rep.entries;
        assert_eq!((e[0].rho, e[0].r_star, e[0].d_eff), (1.0, 1.0, 1.0));
        assert!((e[0].n_threshold.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!((e[1].rho, e[1].r_star, e[1].d_eff), (0.5, 1.0, 0.5));
        assert!((e[1].n_threshold.unwrap() - 2.0).abs() < 1e-12);
        let single = predict_thresholds(&DenseMatrix::from_diag(&[1.0, 0.5]), &DenseMatrix::identity(2), 1).unwrap();
        assert_eq!(single.entries.len(), 1);
        let zero = predict_thresholds(&DenseMatrix::from_diag(&[1.0, 0.0]), &DenseMatrix::identity(2), 2).unwrap();
        assert_eq!(zero.entries[1].n_threshold, None);
    }

    #[test]
    fn flat_sigma_scaling() {
        let c = DenseMatrix::from_diag(&[1.0, 0.5, 0.2, 0.0]);
        let a = predict_thresholds(&c, &DenseMatrix::identity(4), 3).unwrap();
        let b = predict_thresholds(&c, &DenseMatrix::identity(4).scale(3.0), 3).unwrap();
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert!((y.n_threshold.unwrap() / x.n_threshold.unwrap() - 9.0).abs() < 1e-9);
        }
    }

    #[test]
    fn overlaps_and_crossings() {
        assert_eq!(eigvec_overlap(&[0.6, 0.8], &[0.6, 0.8]), 1.0);
        assert_eq!(eigvec_overlap(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert!((eigvec_overlap(&[0.6, 0.8], &[-0.6, -0.8]) - 1.0).abs() < 1e-15);
        let n = [10.0, 100.0, 1000.0];
        assert!((crossing_sample_size(&n, &[0.0, 0.25, 0.75], 0.5).unwrap() - 316.227766).abs() < 1e-3);
        assert_eq!(crossing_sample_size(&n, &[0.0, 0.1, 0.2], 0.5), None);
    }
}
