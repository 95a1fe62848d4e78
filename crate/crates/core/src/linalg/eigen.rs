//! Symmetric eigensolvers ordered by eigenvalue magnitude.
//!
//! Conventions shared by every path:
//!
//! * eigenpairs are sorted by decreasing `|λ|`; magnitudes within
//!   `TIE_TOL · max|λ|` of each other count as tied, and ties put the positive
//!   eigenvalue first, then the smaller original index (position in the
//!   solver's ascending-value output);
//! * every eigenvector is flipped so that its largest-magnitude entry is
//!   positive (first such entry on exact ties).
//!
//! The dense path diagonalizes the whole matrix. The Lanczos path runs a
//! fully reorthogonalized Krylov iteration from the deterministic start vector
//! `1/√dim`, restarting from coordinate vectors when the Krylov space becomes
//! invariant, and stops once every requested Ritz pair has a residual below
//! `tol · max|θ|`.

use super::matrix::{axpy, dot, norm, DenseMatrix};
use crate::error::{invalid, LofiError, Result};

/// Relative tolerance under which two eigenvalue magnitudes are tied.
pub const TIE_TOL: f64 = 1e-10;

/// Relative symmetry tolerance accepted by [`sym_eig_topk`].
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Dimension above which `Auto` switches to Lanczos (when `k < dim/4`).
pub const AUTO_DENSE_MAX_DIM: usize = 2048;

/// Default relative rank tolerance for PSD square roots.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigMethod {
    Dense,
    Lanczos,
    #[default]
    Auto,
}

impl EigMethod {
    /// Resolves `Auto` for a problem of size `dim` and rank `k`.
    pub fn resolve(self, dim: usize, k: usize) -> EigMethod {
        match self {
            EigMethod::Auto if dim <= AUTO_DENSE_MAX_DIM || 4 * k >= dim => EigMethod::Dense,
            EigMethod::Auto => EigMethod::Lanczos,
            m => m,
        }
    }
}

/// Eigenpairs sorted by decreasing magnitude; `eigenvectors` stores one
/// eigenvector per column.
#[derive(Debug, Clone)]
pub struct SymEigResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DenseMatrix,
}

impl SymEigResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.eigenvectors.col(i)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Maximum Krylov dimension; `None` means the full dimension.
    pub max_iter: Option<usize>,
    /// Relative residual tolerance.
    pub tol: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { max_iter: None, tol: 1e-12 }
    }
}

/// Top-`k` eigenpairs of a symmetric matrix by `|λ|`.
pub fn sym_eig_topk(a: &DenseMatrix, k: usize, method: EigMethod) -> Result<SymEigResult> {
    let dim = check_symmetric(a)?;
    if k == 0 || k > dim {
        return invalid(format!("k = {k} must lie in 1..={dim}"));
    }
    match method.resolve(dim, k) {
        EigMethod::Lanczos => lanczos_topk(
            |x, out| {
                for (r, o) in out.iter_mut().enumerate() {
                    *o = dot(a.row(r), x);
                }
            },
            dim,
            k,
            LanczosOptions::default(),
        ),
        _ => {
            let mut full = dense_eig(a)?;
            truncate(&mut full, k);
            Ok(full)
        }
    }
}

/// Full spectrum, ordered like [`sym_eig_topk`].
pub fn sym_eig_all(a: &DenseMatrix) -> Result<SymEigResult> {
    check_symmetric(a)?;
    dense_eig(a)
}

/// Eigenvalues only, sorted in decreasing value (not magnitude).
pub fn sym_eigenvalues_desc(a: &DenseMatrix) -> Result<Vec<f64>> {
    check_symmetric(a)?;
    let mut vals = eigh(a)?.0;
    vals.reverse();
    Ok(vals)
}

fn check_symmetric(a: &DenseMatrix) -> Result<usize> {
    if a.rows() != a.cols() {
        return invalid(format!("matrix is {}x{}, not square", a.rows(), a.cols()));
    }
    if a.rows() == 0 {
        return invalid("empty matrix");
    }
    let asym = a.asymmetry();
    if asym > SYMMETRY_TOL {
        return invalid(format!("matrix is not symmetric (relative asymmetry {asym:e})"));
    }
    Ok(a.rows())
}

/// Eigenvalues in ascending order with matching eigenvectors, for the
/// symmetrized input.
pub(crate) fn eigh(a: &DenseMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.rows();
    let m = faer::Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let eig = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| LofiError::Convergence { iterations: 0, residuals: Vec::new() })?;
    let (s, u) = (eig.S().column_vector(), eig.U());
    let values = (0..n).map(|i| s[i]).collect();
    let vectors = (0..n).map(|c| (0..n).map(|r| u[(r, c)]).collect()).collect();
    Ok((values, vectors))
}

fn dense_eig(a: &DenseMatrix) -> Result<SymEigResult> {
    let (values, vectors) = eigh(a)?;
    Ok(order_pairs(values, vectors, a.rows()))
}

/// Sorts eigenpairs by the magnitude/tie convention and fixes signs.
pub(crate) fn order_pairs(values: Vec<f64>, vectors: Vec<Vec<f64>>, dim: usize) -> SymEigResult {
    let order = magnitude_order(&values);
    let eigenvalues: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut cols = Vec::with_capacity(order.len());
    for &i in &order {
        let mut v = vectors[i].clone();
        fix_sign(&mut v);
        cols.push(v);
    }
    let eigenvectors = if cols.is_empty() {
        DenseMatrix::zeros(dim, 0)
    } else {
        DenseMatrix::from_fn(dim, cols.len(), |r, c| cols[c][r])
    };
    SymEigResult { eigenvalues, eigenvectors }
}

/// Permutation sorting `values` by decreasing magnitude with the tie rule.
pub fn magnitude_order(values: &[f64]) -> Vec<usize> {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = TIE_TOL * scale;
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[j].abs().total_cmp(&values[i].abs()).then(i.cmp(&j)));
    // Reorder runs of tied magnitudes: positive first, then original index.
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end - 1]].abs() - values[idx[end]].abs() <= tol {
            end += 1;
        }
        idx[start..end].sort_by(|&i, &j| {
            let pi = values[i] >= 0.0;
            let pj = values[j] >= 0.0;
            pj.cmp(&pi).then(i.cmp(&j))
        });
        start = end;
    }
    idx
}

/// Flips `v` so its largest-magnitude entry is positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn truncate(res: &mut SymEigResult, k: usize) {
    res.eigenvalues.truncate(k);
    let idx: Vec<usize> = (0..k).collect();
    res.eigenvectors = res.eigenvectors.select_cols(&idx);
}

/// Matrix-free Lanczos for the `k` largest-magnitude eigenpairs of the
/// symmetric operator `apply(x, out)` acting on vectors of length `dim`.
pub fn lanczos_topk<F>(apply: F, dim: usize, k: usize, opts: LanczosOptions) -> Result<SymEigResult>
where
    F: Fn(&[f64], &mut [f64]),
{
    if k == 0 || k > dim {
        return invalid(format!("k = {k} must lie in 1..={dim}"));
    }
    let max_iter = opts.max_iter.unwrap_or(dim).clamp(1, dim);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_iter.min(256));
    let mut alphas: Vec<f64> = Vec::new();
    // betas[j] couples basis[j] and basis[j+1]; a zero marks a restart.
    let mut betas: Vec<f64> = Vec::new();
    let mut next_seed = 0usize;

    let mut q = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut w = vec![0.0; dim];
    let mut last_residuals = Vec::new();

    loop {
        apply(&q, &mut w);
        let alpha = dot(&q, &w);
        alphas.push(alpha);
        basis.push(q.clone());
        let m = basis.len();

        // w -= alpha q + beta q_prev, then full reorthogonalization (twice).
        axpy(-alpha, &q, &mut w);
        if m >= 2 {
            let b = betas[m - 2];
            axpy(-b, &basis[m - 2], &mut w);
        }
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                axpy(-c, v, &mut w);
            }
        }
        let mut beta = norm(&w);

        let check = m >= k && (m == max_iter || m % 5 == 0 || beta <= f64::EPSILON);
        if check || m == max_iter {
            let (ritz, resid) = ritz_pairs(&alphas, &betas, beta, k)?;
            let scale = ritz.0.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
            let converged = resid.iter().all(|r| *r <= opts.tol * scale) || m == dim;
            last_residuals = resid;
            if converged {
                return Ok(assemble(&basis, ritz, dim));
            }
            if m == max_iter {
                break;
            }
        }
        if m == dim {
            break;
        }

        if beta <= 1e-13 * alphas.iter().fold(1e-300f64, |s, a| s.max(a.abs())) {
            // Invariant subspace: continue from the next coordinate vector
            // orthogonal to the current basis.
            beta = 0.0;
            let mut fresh = None;
            while next_seed < dim {
                let mut e = vec![0.0; dim];
                e[next_seed] = 1.0;
                next_seed += 1;
                for _ in 0..2 {
                    for v in &basis {
                        let c = dot(v, &e);
                        axpy(-c, v, &mut e);
                    }
                }
                let nrm = norm(&e);
                if nrm > 1e-8 {
                    e.iter_mut().for_each(|x| *x /= nrm);
                    fresh = Some(e);
                    break;
                }
            }
            match fresh {
                Some(e) => q = e,
                None => break,
            }
        } else {
            q = w.iter().map(|x| x / beta).collect();
        }
        betas.push(beta);
    }
    Err(LofiError::Convergence { iterations: basis.len(), residuals: last_residuals })
}

type RitzSet = (Vec<f64>, Vec<Vec<f64>>);

/// Top-`k` Ritz values/vectors (in the Krylov basis) of the tridiagonal
/// matrix, with their residual norms `|β_m s_m|`.
fn ritz_pairs(alphas: &[f64], betas: &[f64], beta_next: f64, k: usize) -> Result<(RitzSet, Vec<f64>)> {
    let m = alphas.len();
    let t = DenseMatrix::from_fn(m, m, |i, j| match i.abs_diff(j) {
        0 => alphas[i],
        1 => betas[i.min(j)],
        _ => 0.0,
    });
    let (values, svecs) = eigh(&t)?;
    let order = magnitude_order(&values);
    let take = k.min(m);
    let mut vals = Vec::with_capacity(take);
    let mut vecs = Vec::with_capacity(take);
    let mut resid = Vec::with_capacity(take);
    for &o in order.iter().take(take) {
        let s = svecs[o].clone();
        resid.push((beta_next * s[m - 1]).abs());
        vals.push(values[o]);
        vecs.push(s);
    }
    Ok(((vals, vecs), resid))
}

fn assemble(basis: &[Vec<f64>], (vals, svecs): RitzSet, dim: usize) -> SymEigResult {
    let mut vectors = Vec::with_capacity(vals.len());
    for s in &svecs {
        let mut v = vec![0.0; dim];
        for (b, &c) in basis.iter().zip(s) {
            axpy(c, b, &mut v);
        }
        let nrm = norm(&v);
        v.iter_mut().for_each(|x| *x /= nrm);
        vectors.push(v);
    }
    // Ritz values arrive magnitude-sorted already; order_pairs re-applies the
    // rule (stable) and fixes signs.
    order_pairs(vals, vectors, dim)
}

/// `(A^{1/2}, A^{†/2})` for a PSD matrix. Eigenvalues below
/// `rank_tol · λ_max` are treated as zero; eigenvalues below
/// `-rank_tol · λ_max` are rejected.
pub fn psd_sqrt_and_pinv_sqrt(a: &DenseMatrix, rank_tol: f64) -> Result<(DenseMatrix, DenseMatrix)> {
    check_symmetric(a)?;
    let (values, vectors) = eigh(a)?;
    let lmax = values.iter().fold(0.0f64, |s, v| s.max(*v));
    let lmin = values.iter().fold(f64::INFINITY, |s, v| s.min(*v));
    if lmin < -rank_tol * lmax.max(0.0) || (lmax <= 0.0 && lmin < 0.0) {
        return Err(LofiError::NotPsd { min_eigenvalue: lmin });
    }
    let n = a.rows();
    let cut = rank_tol * lmax;
    let mut sqrt = DenseMatrix::zeros(n, n);
    let mut pinv = DenseMatrix::zeros(n, n);
    for (&lam, v) in values.iter().zip(&vectors) {
        if lam <= cut || lam <= 0.0 {
            continue;
        }
        let s = lam.sqrt();
        for r in 0..n {
            let vr = v[r];
            if vr == 0.0 {
                continue;
            }
            let (row_s, row_p) = (r * n, r * n);
            for c in 0..n {
                let p = vr * v[c];
                sqrt.as_mut_slice()[row_s + c] += s * p;
                pinv.as_mut_slice()[row_p + c] += p / s;
            }
        }
    }
    sqrt.symmetrize();
    pinv.symmetrize();
    Ok((sqrt, pinv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_symmetric(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = Rng::new(seed);
        let g = rng.gaussian_matrix(n, n);
        let mut s = g.add(&g.transpose()).unwrap().scale(0.5);
        s.symmetrize();
        s
    }

    #[test]
    fn diagonal_ordering() {
        let a = DenseMatrix::from_diag(&[3.0, -5.0, 1.0]);
        let r = sym_eig_topk(&a, 2, EigMethod::Dense).unwrap();
        assert_eq!(r.eigenvalues.len(), 2);
        assert!((r.eigenvalues[0] + 5.0).abs() < 1e-14);
        assert!((r.eigenvalues[1] - 3.0).abs() < 1e-14);
        assert!((r.eigenvectors[(1, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn swap_matrix_tie_break() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        for method in [EigMethod::Dense, EigMethod::Lanczos] {
            let r = sym_eig_topk(&a, 2, method).unwrap();
            assert!((r.eigenvalues[0] - 1.0).abs() < 1e-12, "{method:?}");
            assert!((r.eigenvalues[1] + 1.0).abs() < 1e-12, "{method:?}");
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let v1 = r.vector(0);
            let v2 = r.vector(1);
            assert!((v1[0] - s).abs() < 1e-12 && (v1[1] - s).abs() < 1e-12);
            // Equal-magnitude entries: the first one is made positive.
            assert!((v2[0] - s).abs() < 1e-12 && (v2[1] + s).abs() < 1e-12);
        }
    }

    #[test]
    fn lanczos_matches_dense_on_random_50() {
        for seed in 0..5 {
            let a = random_symmetric(50, seed);
            let full = sym_eig_all(&a).unwrap();
            let lz = sym_eig_topk(&a, 10, EigMethod::Lanczos).unwrap();
            for i in 0..10 {
                assert!((lz.eigenvalues[i] - full.eigenvalues[i]).abs() < 1e-10);
                let ov = dot(&lz.vector(i), &full.vector(i)).abs();
                assert!(ov >= 1.0 - 1e-8, "seed {seed} vec {i}: {ov}");
            }
        }
    }

    #[test]
    fn full_reconstruction_and_orthogonality() {
        let a = random_symmetric(30, 7);
        let r = sym_eig_all(&a).unwrap();
        let v = &r.eigenvectors;
        let recon = v
            .matmul(&DenseMatrix::from_diag(&r.eigenvalues))
            .unwrap()
            .matmul_t(v)
            .unwrap();
        assert!(recon.sub(&a).unwrap().frobenius_norm() <= 1e-8 * a.frobenius_norm());
        for i in 0..30 {
            let vi = v.col(i);
            assert!((norm(&vi) - 1.0).abs() < 1e-12);
            for j in (i + 1)..30 {
                assert!(dot(&vi, &v.col(j)).abs() < 1e-10);
            }
        }
        for w in r.eigenvalues.windows(2) {
            assert!(w[0].abs() >= w[1].abs() - 1e-12);
        }
    }

    #[test]
    fn rejects_nonsymmetric_and_bad_k() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eig_topk(&a, 1, EigMethod::Dense), Err(LofiError::InvalidInput(_))));
        let b = DenseMatrix::identity(3);
        assert!(sym_eig_topk(&b, 0, EigMethod::Dense).is_err());
        assert!(sym_eig_topk(&b, 4, EigMethod::Dense).is_err());
    }

    #[test]
    fn lanczos_reports_nonconvergence() {
        let a = random_symmetric(40, 3);
        let err = lanczos_topk(
            |x, out| {
                for (r, o) in out.iter_mut().enumerate() {
                    *o = dot(a.row(r), x);
                }
            },
            40,
            5,
            LanczosOptions { max_iter: Some(6), tol: 1e-14 },
        )
        .unwrap_err();
        match err {
            LofiError::Convergence { iterations, residuals } => {
                assert_eq!(iterations, 6);
                assert_eq!(residuals.len(), 5);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lanczos_handles_invariant_start() {
        // 1/√n is an eigenvector of this matrix, so the Krylov space from the
        // deterministic start is invariant after one step.
        let n = 6;
        let a = DenseMatrix::from_fn(n, n, |r, c| if r == c { 2.0 } else { 1.0 });
        let lz = sym_eig_topk(&a, 3, EigMethod::Lanczos).unwrap();
        let full = sym_eig_all(&a).unwrap();
        for i in 0..3 {
            assert!((lz.eigenvalues[i] - full.eigenvalues[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn auto_dispatch() {
        assert_eq!(EigMethod::Auto.resolve(100, 5), EigMethod::Dense);
        assert_eq!(EigMethod::Auto.resolve(5000, 10), EigMethod::Lanczos);
        assert_eq!(EigMethod::Auto.resolve(5000, 1250), EigMethod::Dense);
    }

    #[test]
    fn psd_roots() {
        let (s, p) = psd_sqrt_and_pinv_sqrt(&DenseMatrix::identity(3), DEFAULT_RANK_TOL).unwrap();
        assert!(s.sub(&DenseMatrix::identity(3)).unwrap().max_abs() < 1e-14);
        assert!(p.sub(&DenseMatrix::identity(3)).unwrap().max_abs() < 1e-14);

        let (s, p) = psd_sqrt_and_pinv_sqrt(&DenseMatrix::from_diag(&[4.0, 0.0]), DEFAULT_RANK_TOL).unwrap();
        assert!(s.sub(&DenseMatrix::from_diag(&[2.0, 0.0])).unwrap().max_abs() < 1e-14);
        assert!(p.sub(&DenseMatrix::from_diag(&[0.5, 0.0])).unwrap().max_abs() < 1e-14);

        let mut rng = Rng::new(11);
        let g = rng.gaussian_matrix(20, 25);
        let a = g.matmul_t(&g).unwrap();
        let (s, _) = psd_sqrt_and_pinv_sqrt(&a, DEFAULT_RANK_TOL).unwrap();
        let back = s.matmul(&s).unwrap();
        assert!(back.sub(&a).unwrap().frobenius_norm() <= 1e-8 * a.frobenius_norm());

        let neg = DenseMatrix::from_diag(&[1.0, -0.5]);
        assert!(matches!(psd_sqrt_and_pinv_sqrt(&neg, DEFAULT_RANK_TOL), Err(LofiError::NotPsd { .. })));
    }
}
