//! Infinite-width limit of the pipeline.
//!
//! A layer works on the training Gram `G` of the previous level. The spectral
//! step diagonalizes `B = (1/n) G^{1/2} diag(y) G^{1/2}`; each retained
//! eigenvector `β_j` gives dual coefficients `α_j = G^{†/2} β_j`, and the
//! projected feature at any point is `g_j(x) = Σ_μ α_{μj} K(x, x_μ)`. The next
//! Gram is the lift kernel evaluated on those features.

use std::f64::consts::PI;
use std::path::Path;

use crate::activation::Activation;
use crate::dataio::{Container, Dataset};
use crate::error::{invalid, mismatch, LofiError, Result};
use crate::linalg::{
    dot, log_grid, mean, norm, psd_sqrt_and_pinv_sqrt, sym_eig_all, sym_eig_topk, DenseMatrix, EigMethod,
    DEFAULT_RANK_TOL,
};
use crate::lofi::{rms_row_norm, RANK_DEFICIENCY_TOL};
use crate::rng::Rng;

/// `E[relu(rᵀg) relu(rᵀg')]` for `r ~ N(0, I)`:
/// `(‖g‖‖g'‖ / 2π)(sin θ + (π − θ) cos θ)`.
pub fn relu_arccos_kernel(g: &[f64], h: &[f64]) -> f64 {
    let (ng, nh) = (norm(g), norm(h));
    if ng == 0.0 || nh == 0.0 {
        return 0.0;
    }
    let cos = (dot(g, h) / (ng * nh)).clamp(-1.0, 1.0);
    let theta = cos.acos();
    ng * nh / (2.0 * PI) * (theta.sin() + (PI - theta) * cos)
}

/// Monte-Carlo estimate of `E[σ(rᵀg) σ(rᵀg')]` with its standard error.
pub fn monte_carlo_kernel(activation: Activation, g: &[f64], h: &[f64], samples: usize, rng: &mut Rng) -> Result<(f64, f64)> {
    if samples == 0 {
        return invalid("need at least one Monte-Carlo sample");
    }
    if g.len() != h.len() {
        return mismatch(format!("vectors of length {} and {}", g.len(), h.len()));
    }
    let (mut s, mut q) = (0.0, 0.0);
    let mut r = vec![0.0; g.len()];
    for _ in 0..samples {
        r.iter_mut().for_each(|v| *v = rng.normal());
        let v = activation.eval(dot(&r, g)) * activation.eval(dot(&r, h));
        s += v;
        q += v * v;
    }
    let m = s / samples as f64;
    let var = (q / samples as f64 - m * m).max(0.0);
    Ok((m, (var / samples as f64).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    ReluArccos,
    /// Shared Gaussian draws (so Grams stay PSD), regenerated from `seed`.
    MonteCarlo { activation: Activation, samples: usize, seed: u64 },
}

impl KernelKind {
    pub fn tag(&self) -> String {
        match self {
            KernelKind::ReluArccos => "relu_arccos".into(),
            KernelKind::MonteCarlo { activation, samples, seed } => format!("monte_carlo:{activation}:{samples}:{seed}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s == "relu_arccos" || s == "arccos" {
            return Ok(KernelKind::ReluArccos);
        }
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["monte_carlo", a, n, seed] => Ok(KernelKind::MonteCarlo {
                activation: a.parse()?,
                samples: n.parse().map_err(|_| LofiError::UnknownTag(s.to_string()))?,
                seed: seed.parse().map_err(|_| LofiError::UnknownTag(s.to_string()))?,
            }),
            _ => Err(LofiError::UnknownTag(s.to_string())),
        }
    }

    /// Cross kernel matrix between rows of `a` and rows of `b`.
    fn matrix(&self, a: &DenseMatrix, b: &DenseMatrix, layer: usize) -> Result<DenseMatrix> {
        if a.cols() != b.cols() {
            return mismatch(format!("feature dims {} and {}", a.cols(), b.cols()));
        }
        match *self {
            KernelKind::ReluArccos => Ok(DenseMatrix::from_fn(a.rows(), b.rows(), |i, j| relu_arccos_kernel(a.row(i), b.row(j)))),
            KernelKind::MonteCarlo { activation, samples, seed } => {
                let r = Rng::new(seed).derive(layer as u64).gaussian_matrix(samples, a.cols());
                let phi = |m: &DenseMatrix| -> Result<DenseMatrix> { Ok(m.matmul_t(&r)?.map(|v| activation.eval(v))) };
                Ok(phi(a)?.matmul_t(&phi(b)?)?.scale(1.0 / samples as f64))
            }
        }
    }
}

/// One spectral layer in dual form.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelLayer {
    /// Dual coefficients, `n × k`.
    pub alpha: DenseMatrix,
    pub eigenvalues: Vec<f64>,
    /// Projected training features `G α`, `n × k`; anchors for the next kernel.
    pub features: DenseMatrix,
    /// Scale dividing the features before the next kernel (1 when off).
    pub rms_norm: f64,
    /// Fewer informative directions than requested (possibly none).
    pub rank_deficient: bool,
}

impl KernelLayer {
    pub fn rank(&self) -> usize {
        self.alpha.cols()
    }
}

/// Spectral step on a training Gram.
pub fn kernel_lofi_layer(gram: &DenseMatrix, y: &[f64], k: usize) -> Result<KernelLayer> {
    let n = gram.rows();
    if gram.cols() != n || y.len() != n {
        return mismatch(format!("Gram {}x{} with {} labels", gram.rows(), gram.cols(), y.len()));
    }
    if k == 0 || k > n {
        return invalid(format!("rank {k} outside 1..={n}"));
    }
    let (half, pinv_half) = psd_sqrt_and_pinv_sqrt(gram, DEFAULT_RANK_TOL)?;
    let mut b = DenseMatrix::from_fn(n, n, |i, j| half[(i, j)] * y[j]);
    b = b.matmul(&half)?.scale(1.0 / n as f64);
    b.symmetrize();
    let eig = sym_eig_topk(&b, k, EigMethod::Dense)?;
    let lead = eig.eigenvalues.first().map_or(0.0, |v| v.abs());
    let keep: Vec<usize> = (0..k).filter(|&i| lead > 0.0 && eig.eigenvalues[i].abs() > RANK_DEFICIENCY_TOL * lead).collect();
    let beta = eig.eigenvectors.select_cols(&keep);
    let alpha = pinv_half.matmul(&beta)?;
    let features = gram.matmul(&alpha)?;
    Ok(KernelLayer {
        alpha,
        eigenvalues: keep.iter().map(|&i| eig.eigenvalues[i]).collect(),
        features,
        rms_norm: 1.0,
        rank_deficient: keep.len() < k,
    })
}

/// `g_j(x) = ⟨α_j, k_x⟩` for a vector of kernel sections `k_x`.
pub fn kernel_feature_eval(layer: &KernelLayer, k_vec: &[f64]) -> Result<Vec<f64>> {
    layer.alpha.t_mul_vec(k_vec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelModelConfig {
    pub ranks: Vec<usize>,
    pub kind: KernelKind,
    pub lambda_grid: Vec<f64>,
    pub folds: usize,
    /// Divide each layer's features by their RMS row norm before the next
    /// kernel, as the finite-width lift does.
    pub normalize: bool,
}

impl KernelModelConfig {
    pub fn new(ranks: Vec<usize>) -> Self {
        Self { ranks, kind: KernelKind::ReluArccos, lambda_grid: log_grid(1e-5, 1.0, 20), folds: 5, normalize: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    pub anchors: DenseMatrix,
    pub layers: Vec<KernelLayer>,
    pub kind: KernelKind,
    pub dual: Vec<f64>,
    pub lambda: f64,
    pub label_offset: f64,
    pub cv_errors: Vec<f64>,
}

/// Every Gram of the recursion, `[K₀, K₁, …, K_L]` on the training set.
pub fn fit_kernel_model(train: &Dataset, cfg: &KernelModelConfig, rng: &mut Rng) -> Result<KernelModel> {
    let offset = mean(&train.y);
    let y: Vec<f64> = train.y.iter().map(|v| v - offset).collect();
    let mut gram = train.x.matmul_t(&train.x)?;
    let mut layers = Vec::with_capacity(cfg.ranks.len());
    for (l, &k) in cfg.ranks.iter().enumerate() {
        let mut layer = kernel_lofi_layer(&gram, &y, k)?;
        if layer.rank() == 0 {
            return Err(LofiError::ZeroSpectrum);
        }
        if cfg.normalize {
            layer.rms_norm = rms_row_norm(&layer.features);
            if !(layer.rms_norm > 0.0) {
                return Err(LofiError::DegenerateFeatures("kernel features vanish".into()));
            }
        }
        let g = layer.features.scale(1.0 / layer.rms_norm);
        gram = cfg.kind.matrix(&g, &g, l)?;
        gram.symmetrize();
        layers.push(layer);
    }
    let fit = kernel_ridge_cv(&gram, &y, &cfg.lambda_grid, cfg.folds, rng)?;
    Ok(KernelModel {
        anchors: train.x.clone(),
        layers,
        kind: cfg.kind,
        dual: fit.dual,
        lambda: fit.lambda,
        label_offset: offset,
        cv_errors: fit.cv_errors,
    })
}

impl KernelModel {
    /// Kernel sections at the readout level, `m × n`, plus the projected
    /// features of every layer.
    pub fn sections(&self, x: &DenseMatrix) -> Result<(DenseMatrix, Vec<DenseMatrix>)> {
        if x.cols() != self.anchors.cols() {
            return invalid(format!("model expects {} features, got {}", self.anchors.cols(), x.cols()));
        }
        let mut s = x.matmul_t(&self.anchors)?;
        let mut feats = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let g = s.matmul(&layer.alpha)?;
            let scale = 1.0 / layer.rms_norm;
            s = self.kind.matrix(&g.scale(scale), &layer.features.scale(scale), l)?;
            feats.push(g);
        }
        Ok((s, feats))
    }

    /// Projected features `g(x)` of layer `l` (0-based).
    pub fn features(&self, x: &DenseMatrix, l: usize) -> Result<DenseMatrix> {
        if l >= self.layers.len() {
            return invalid(format!("layer {l} out of range for depth {}", self.layers.len()));
        }
        Ok(self.sections(x)?.1.swap_remove(l))
    }

    pub fn predict(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        let (s, _) = self.sections(x)?;
        let mut out = s.mul_vec(&self.dual)?;
        out.iter_mut().for_each(|v| *v += self.label_offset);
        Ok(out)
    }

    pub fn to_container(&self) -> Container {
        let mut c = Container::new("kernel_model");
        c.set("kernel", self.kind.tag());
        c.set("depth", self.layers.len());
        c.set_f64("lambda", self.lambda);
        c.set_f64("label_offset", self.label_offset);
        c.put("anchors", self.anchors.clone());
        for (l, layer) in self.layers.iter().enumerate() {
            c.set_f64(&format!("layer{l}.rms_norm"), layer.rms_norm);
            c.set(&format!("layer{l}.rank_deficient"), layer.rank_deficient);
            c.put(&format!("layer{l}.alpha"), layer.alpha.clone());
            c.put(&format!("layer{l}.features"), layer.features.clone());
            c.put(&format!("layer{l}.eigenvalues"), DenseMatrix::column(&layer.eigenvalues).transpose());
        }
        c.put("dual", DenseMatrix::column(&self.dual).transpose());
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind() != "kernel_model" {
            return Err(LofiError::Format { offset: 0, message: format!("container holds {:?}, not a kernel model", c.kind()) });
        }
        let depth: usize = c.parse("depth")?;
        let mut layers = Vec::with_capacity(depth);
        for l in 0..depth {
            layers.push(KernelLayer {
                alpha: c.block(&format!("layer{l}.alpha"))?.clone(),
                eigenvalues: c.block(&format!("layer{l}.eigenvalues"))?.as_slice().to_vec(),
                features: c.block(&format!("layer{l}.features"))?.clone(),
                rms_norm: c.parse(&format!("layer{l}.rms_norm"))?,
                rank_deficient: c.parse(&format!("layer{l}.rank_deficient"))?,
            });
        }
        Ok(KernelModel {
            anchors: c.block("anchors")?.clone(),
            layers,
            kind: KernelKind::parse(c.get("kernel")?)?,
            dual: c.block("dual")?.as_slice().to_vec(),
            lambda: c.parse("lambda")?,
            label_offset: c.parse("label_offset")?,
            cv_errors: Vec::new(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}

#[derive(Debug, Clone)]
pub struct KernelRidgeFit {
    pub dual: Vec<f64>,
    pub lambda: f64,
    pub cv_errors: Vec<f64>,
}

/// Solves `(G + λI) a = y` for every λ from one eigendecomposition.
fn spectral_solves(gram: &DenseMatrix, y: &[f64], grid: &[f64]) -> Result<Vec<Vec<f64>>> {
    let eig = sym_eig_all(gram)?;
    let proj = eig.eigenvectors.t_mul_vec(y)?;
    grid.iter()
        .map(|&lam| {
            let coef: Vec<f64> = proj
                .iter()
                .zip(&eig.eigenvalues)
                .map(|(p, e)| {
                    let d = e.max(0.0) + lam;
                    if d > 0.0 {
                        p / d
                    } else {
                        0.0
                    }
                })
                .collect();
            eig.eigenvectors.mul_vec(&coef)
        })
        .collect()
}

/// K-fold cross-validated kernel ridge; same fold and tie conventions as
/// [`crate::linalg::ridge_cv`].
pub fn kernel_ridge_cv(gram: &DenseMatrix, y: &[f64], grid: &[f64], folds: usize, rng: &mut Rng) -> Result<KernelRidgeFit> {
    let n = gram.rows();
    if gram.cols() != n || y.len() != n {
        return mismatch("Gram and labels disagree");
    }
    if grid.is_empty() || grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return invalid("lambda grid must be non-empty, finite and >= 0");
    }
    if folds < 2 || n < folds {
        return invalid(format!("{n} samples and {folds} folds"));
    }
    let mut sse = vec![0.0; grid.len()];
    if grid.len() > 1 {
        let perm = rng.permutation(n);
        for f in 0..folds {
            let held: Vec<usize> = perm.iter().enumerate().filter(|(i, _)| i % folds == f).map(|(_, &v)| v).collect();
            let kept: Vec<usize> = perm.iter().enumerate().filter(|(i, _)| i % folds != f).map(|(_, &v)| v).collect();
            let g_tt = gram.select_rows(&kept).select_cols(&kept);
            let g_vt = gram.select_rows(&held).select_cols(&kept);
            let y_t: Vec<f64> = kept.iter().map(|&i| y[i]).collect();
            for (j, a) in spectral_solves(&g_tt, &y_t, grid)?.iter().enumerate() {
                let pred = g_vt.mul_vec(a)?;
                sse[j] += held.iter().zip(&pred).map(|(&i, p)| (y[i] - p).powi(2)).sum::<f64>();
            }
        }
    }
    let cv_errors: Vec<f64> = sse.iter().map(|s| s / n as f64).collect();
    let mut best = 0;
    for j in 1..grid.len() {
        let (e, b) = (cv_errors[j], cv_errors[best]);
        let tie = (e - b).abs() <= 1e-12 * b.abs().max(f64::MIN_POSITIVE);
        if e < b && !tie || tie && grid[j] > grid[best] {
            best = j;
        }
    }
    let lambda = grid[best];
    let dual = spectral_solves(gram, y, &[lambda])?.remove(0);
    Ok(KernelRidgeFit { dual, lambda, cv_errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::center_labels;

    #[test]
    fn arccos_closed_forms() {
        let g = [0.3, -1.2, 2.0];
        assert!((relu_arccos_kernel(&g, &g) - dot(&g, &g) / 2.0).abs() < 1e-14);
        assert!((relu_arccos_kernel(&[1.0, 0.0], &[0.0, 1.0]) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!(relu_arccos_kernel(&[1.0, 0.0], &[-1.0, 0.0]).abs() < 1e-15);
        assert_eq!(relu_arccos_kernel(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
    }

    #[test]
    fn monte_carlo_oracles() {
        let mut rng = Rng::new(4);
        let (g, h) = ([1.0, 0.5, -0.3], [0.2, -1.0, 0.7]);
        let (m, se) = monte_carlo_kernel(Activation::Identity, &g, &h, 1_000_000, &mut rng).unwrap();
        assert!((m - dot(&g, &h)).abs() <= 4.0 * se);
        let (m, se) = monte_carlo_kernel(Activation::Relu, &[1.0, 0.0], &[0.0, 1.0], 1_000_000, &mut rng).unwrap();
        assert!((m - 1.0 / (2.0 * PI)).abs() <= 3.0 * se);
        let (m, _) = monte_carlo_kernel(Activation::Relu, &[0.0, 0.0], &h[..2], 100, &mut rng).unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn two_point_layer() {
        let layer = kernel_lofi_layer(&DenseMatrix::identity(2), &[1.0, -1.0], 1).unwrap();
        assert!((layer.eigenvalues[0] - 0.5).abs() < 1e-15);
        assert!((layer.alpha[(0, 0)] - 1.0).abs() < 1e-12 && layer.alpha[(1, 0)].abs() < 1e-12);
        let flat = kernel_lofi_layer(&DenseMatrix::identity(2), &[0.0, 0.0], 1).unwrap();
        assert!(flat.rank_deficient && flat.rank() == 0);
    }

    #[test]
    fn dual_features_have_unit_rkhs_norm() {
        let mut rng = Rng::new(8);
        let x = rng.gaussian_matrix(40, 6);
        let y: Vec<f64> = (0..40).map(|r| x[(r, 0)] * x[(r, 1)]).collect();
        let gram = x.matmul_t(&x).unwrap();
        let layer = kernel_lofi_layer(&gram, &y, 3).unwrap();
        let aga = layer.alpha.t_matmul(&gram.matmul(&layer.alpha).unwrap()).unwrap();
        assert!(aga.sub(&DenseMatrix::identity(3)).unwrap().max_abs() < 1e-8);
        for mu in [0, 17, 39] {
            let g = kernel_feature_eval(&layer, gram.row(mu)).unwrap();
            for j in 0..3 {
                assert!((g[j] - layer.features[(mu, j)]).abs() < 1e-10);
            }
        }
        assert_eq!(kernel_feature_eval(&layer, &[0.0; 40]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn depth_zero_is_linear_kernel_ridge_and_deterministic() {
        let mut rng = Rng::new(2);
        let x = rng.gaussian_matrix(30, 4);
        let y = (0..30).map(|r| x[(r, 0)] - 0.5 * x[(r, 2)]).collect();
        let ds = center_labels(&Dataset::new(x.clone(), y, "k").unwrap());
        let cfg = KernelModelConfig::new(vec![]);
        let m = fit_kernel_model(&ds, &cfg, &mut Rng::new(0)).unwrap();
        let w = crate::linalg::ridge_solve(&x, &ds.y, m.lambda).unwrap();
        let a = m.predict(&x).unwrap();
        let b = x.mul_vec(&w).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-8);
        }
        let cfg = KernelModelConfig::new(vec![3, 2]);
        let m1 = fit_kernel_model(&ds, &cfg, &mut Rng::new(0)).unwrap();
        let m2 = fit_kernel_model(&ds, &cfg, &mut Rng::new(0)).unwrap();
        assert_eq!(m1, m2);
        let back = KernelModel::from_container(&Container::from_bytes(&m1.to_container().to_bytes().unwrap()).unwrap()).unwrap();
        assert_eq!(back.predict(&x).unwrap(), m1.predict(&x).unwrap());
    }

    #[test]
    fn kind_tags_round_trip() {
        for k in [KernelKind::ReluArccos, KernelKind::MonteCarlo { activation: Activation::Relu, samples: 10, seed: 3 }] {
            assert_eq!(KernelKind::parse(&k.tag()).unwrap(), k);
        }
    }
}
