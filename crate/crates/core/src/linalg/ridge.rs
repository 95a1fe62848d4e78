//! Ridge regression with an unscaled penalty: `(ZᵀZ + λI) w = Zᵀy`.

use faer::linalg::solvers::Solve;

use super::eigen::eigh;
use super::matrix::{axpy, dot, DenseMatrix};
use crate::error::{invalid, mismatch, LofiError, Result};
use crate::rng::Rng;

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

/// Default readout grid: 500 log-spaced points in `[1e-6, 1e6]`.
pub fn default_ridge_grid() -> Vec<f64> {
    log_grid(1e-6, 1e6, 500)
}

/// Solves `(ZᵀZ + λI) w = Zᵀy`. When `p > n` the equivalent dual system
/// `w = Zᵀ (ZZᵀ + λI)⁻¹ y` is used.
pub fn ridge_solve(z: &DenseMatrix, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let (n, p) = z.shape();
    if y.len() != n {
        return mismatch(format!("{n} rows but {} labels", y.len()));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return invalid(format!("ridge lambda must be finite and >= 0, got {lambda}"));
    }
    if y.iter().all(|v| *v == 0.0) {
        return Ok(vec![0.0; p]);
    }
    if p <= n || lambda == 0.0 {
        let mut gram = z.t_matmul(z)?;
        for i in 0..p {
            gram[(i, i)] += lambda;
        }
        let rhs = z.t_mul_vec(y)?;
        spd_solve(&gram, &rhs, lambda == 0.0)
    } else {
        let mut gram = z.matmul_t(z)?;
        for i in 0..n {
            gram[(i, i)] += lambda;
        }
        let c = spd_solve(&gram, y, false)?;
        z.t_mul_vec(&c)
    }
}

/// Cholesky solve; with `strict`, near-singular systems are rejected instead
/// of being solved through a clamped eigendecomposition.
fn spd_solve(a: &DenseMatrix, b: &[f64], strict: bool) -> Result<Vec<f64>> {
    let n = a.rows();
    let m = faer::Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    if let Ok(ch) = m.llt(faer::Side::Lower) {
        let l = ch.L();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            lo = lo.min(l[(i, i)].abs());
            hi = hi.max(l[(i, i)].abs());
        }
        let ill = hi == 0.0 || (lo / hi).powi(2) < 1e-14;
        if !(strict && ill) {
            let mut rhs = faer::Mat::from_fn(n, 1, |i, _| b[i]);
            ch.solve_in_place(rhs.as_mut());
            return Ok((0..n).map(|i| rhs[(i, 0)]).collect());
        }
    }
    if strict {
        return Err(LofiError::SingularSystem("ZᵀZ is numerically singular at lambda = 0".into()));
    }
    let (values, vectors) = eigh(a)?;
    let top = values.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let mut out = vec![0.0; n];
    for (&lam, v) in values.iter().zip(&vectors) {
        if lam > 1e-15 * top {
            axpy(dot(v, b) / lam, v, &mut out);
        }
    }
    Ok(out)
}

/// Outcome of [`ridge_cv`].
#[derive(Debug, Clone)]
pub struct RidgeCvResult {
    pub weights: Vec<f64>,
    pub lambda: f64,
    /// Pooled held-out mean squared error per grid point.
    pub cv_errors: Vec<f64>,
}

/// K-fold cross-validated ridge. Folds come from a seeded permutation; the
/// chosen λ minimizes pooled held-out MSE (ties go to the larger λ) and is
/// then refit on all rows.
pub fn ridge_cv(
    z: &DenseMatrix,
    y: &[f64],
    lambda_grid: &[f64],
    folds: usize,
    rng: &mut Rng,
) -> Result<RidgeCvResult> {
    let n = z.rows();
    if y.len() != n {
        return mismatch(format!("{n} rows but {} labels", y.len()));
    }
    if lambda_grid.is_empty() {
        return invalid("empty lambda grid");
    }
    if lambda_grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return invalid("lambda grid entries must be finite and >= 0");
    }
    if folds < 2 {
        return invalid("at least two folds are required");
    }
    if n < folds {
        return invalid(format!("{n} samples cannot fill {folds} folds"));
    }
    if lambda_grid.len() == 1 {
        let weights = ridge_solve(z, y, lambda_grid[0])?;
        return Ok(RidgeCvResult { weights, lambda: lambda_grid[0], cv_errors: vec![f64::NAN] });
    }

    let perm = rng.permutation(n);
    let mut sse = vec![0.0; lambda_grid.len()];
    let base = n / folds;
    let extra = n % folds;
    let mut start = 0;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        let test: Vec<usize> = perm[start..start + size].to_vec();
        let train: Vec<usize> = perm[..start].iter().chain(&perm[start + size..]).copied().collect();
        start += size;
        let path = FoldPath::new(z, y, &train, &test)?;
        for (e, &lam) in sse.iter_mut().zip(lambda_grid) {
            *e += path.held_out_sse(lam);
        }
    }
    let cv_errors: Vec<f64> = sse.iter().map(|s| s / n as f64).collect();

    let mut best = 0usize;
    for i in 1..lambda_grid.len() {
        let (ei, eb) = (cv_errors[i], cv_errors[best]);
        let tie = (ei - eb).abs() <= 1e-12 * eb.abs().max(1e-300);
        if ei < eb && !tie || tie && lambda_grid[i] > lambda_grid[best] {
            best = i;
        }
    }
    let lambda = lambda_grid[best];
    let weights = ridge_solve(z, y, lambda)?;
    Ok(RidgeCvResult { weights, lambda, cv_errors })
}

/// Spectral form of one fold's ridge path, so every λ costs one small
/// matrix-vector product.
struct FoldPath {
    /// Held-out predictions are `proj * (coef / (eig + λ))`.
    proj: DenseMatrix,
    coef: Vec<f64>,
    eig: Vec<f64>,
    y_test: Vec<f64>,
}

impl FoldPath {
    fn new(z: &DenseMatrix, y: &[f64], train: &[usize], test: &[usize]) -> Result<Self> {
        let z_tr = z.select_rows(train);
        let z_te = z.select_rows(test);
        let y_tr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        let (n_tr, p) = z_tr.shape();
        if p <= n_tr {
            // Primal: ZᵀZ = V diag(s) Vᵀ, w = V diag(1/(s+λ)) Vᵀ Zᵀy.
            let g = z_tr.t_matmul(&z_tr)?;
            let (eig, v) = eigh(&g)?;
            let v = DenseMatrix::from_columns(&v)?;
            let coef = v.t_mul_vec(&z_tr.t_mul_vec(&y_tr)?)?;
            let proj = z_te.matmul(&v)?;
            Ok(Self { proj, coef, eig, y_test })
        } else {
            // Dual: ZZᵀ = U diag(e) Uᵀ, w = Zᵀ U diag(1/(e+λ)) Uᵀ y.
            let g = z_tr.matmul_t(&z_tr)?;
            let (eig, u) = eigh(&g)?;
            let u = DenseMatrix::from_columns(&u)?;
            let coef = u.t_mul_vec(&y_tr)?;
            let proj = z_te.matmul_t(&z_tr)?.matmul(&u)?;
            Ok(Self { proj, coef, eig, y_test })
        }
    }

    fn held_out_sse(&self, lambda: f64) -> f64 {
        let scaled: Vec<f64> = self
            .coef
            .iter()
            .zip(&self.eig)
            .map(|(c, e)| {
                let d = e.max(0.0) + lambda;
                if d > 0.0 {
                    c / d
                } else {
                    0.0
                }
            })
            .collect();
        (0..self.proj.rows())
            .map(|r| {
                let pred: f64 = self.proj.row(r).iter().zip(&scaled).map(|(a, b)| a * b).sum();
                (pred - self.y_test[r]).powi(2)
            })
            .sum()
    }
}
