//! Reference layerwise gradient descent for small fully connected networks,
//! used to check the first-step approximation
//! `Δw ≈ η ā (c₀ û + c₁ Ĉ w)` and to measure feature alignment.

use serde::Serialize;

use crate::activation::Activation;
use crate::dataio::Dataset;
use crate::error::{invalid, mismatch, LofiError, Result};
use crate::linalg::{mean, norm, DenseMatrix};
use crate::lofi::{linear_moment, moment_operator};
use crate::rng::Rng;

/// Effective readouts below this magnitude are reported as degenerate.
pub const READOUT_FLOOR: f64 = 1e-14;

/// `f(x) = a · σ(W_L ⋯ σ(W_1 x))` with a frozen readout `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    /// `W_ℓ` is `dims[ℓ] × dims[ℓ-1]`.
    pub weights: Vec<DenseMatrix>,
    pub readout: Vec<f64>,
    /// Row-norm scale of each `W_ℓ`, then of `a`.
    pub scales: Vec<f64>,
    pub activation: Activation,
}

/// `dims` lists the input, hidden and output widths; the output width must
/// be 1. Rows of `W_ℓ` have norm `α ρ^{ℓ−1}` and `‖a‖ = α ρ^L`.
pub fn init_hierarchical(dims: &[usize], alpha: f64, ratio: f64, activation: Activation, rng: &mut Rng) -> Result<Mlp> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return invalid(format!("scale ratio must lie in (0, 1), got {ratio}"));
    }
    if !(alpha > 0.0) {
        return invalid(format!("scale must be positive, got {alpha}"));
    }
    if dims.len() < 3 || dims.iter().any(|d| *d == 0) || dims[dims.len() - 1] != 1 {
        return invalid(format!("dims {dims:?} must be input, at least one hidden width, then 1"));
    }
    let hidden = dims.len() - 2;
    let mut weights = Vec::with_capacity(hidden);
    let mut scales = Vec::with_capacity(hidden + 1);
    for l in 0..hidden {
        let s = alpha * ratio.powi(l as i32);
        weights.push(rng.sphere_rows(dims[l + 1], dims[l]).scale(s));
        scales.push(s);
    }
    let s = alpha * ratio.powi(hidden as i32);
    let readout = rng.sphere_rows(1, dims[hidden]).scale(s).into_vec();
    scales.push(s);
    Ok(Mlp { weights, readout, scales, activation })
}

impl Mlp {
    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].cols()
    }

    /// `[z_0 = x, z_1, …, z_L]` for a single input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.input_dim() {
            return mismatch(format!("network expects {} inputs, got {}", self.input_dim(), x.len()));
        }
        let mut zs = vec![x.to_vec()];
        for w in &self.weights {
            let mut h = w.mul_vec(zs.last().expect("nonempty"))?;
            self.activation.apply_in_place(&mut h);
            zs.push(h);
        }
        Ok(zs)
    }

    pub fn output(&self, x: &[f64]) -> Result<f64> {
        let zs = self.forward(x)?;
        Ok(crate::linalg::dot(&self.readout, zs.last().expect("nonempty")))
    }

    pub fn predict(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        (0..x.rows()).map(|r| self.output(x.row(r))).collect()
    }

    /// Representation `z_ℓ` for every row of `x` (`ℓ = 0` is the input).
    pub fn representation(&self, x: &DenseMatrix, layer: usize) -> Result<DenseMatrix> {
        if layer > self.depth() {
            return invalid(format!("layer {layer} beyond depth {}", self.depth()));
        }
        let rows = (0..x.rows()).map(|r| Ok(self.forward(x.row(r))?.swap_remove(layer))).collect::<Result<Vec<_>>>()?;
        DenseMatrix::from_rows(&rows)
    }

    /// `(1/2n) Σ (y − f)²`.
    pub fn loss(&self, data: &Dataset) -> Result<f64> {
        let pred = self.predict(&data.x)?;
        Ok(pred.iter().zip(&data.y).map(|(p, y)| (y - p).powi(2)).sum::<f64>() / (2.0 * data.len() as f64))
    }

    /// Exact gradient of the loss with respect to `W_layer` (1-based).
    pub fn gradient(&self, data: &Dataset, layer: usize) -> Result<DenseMatrix> {
        check_layer(self, layer)?;
        let (n, l_max) = (data.len(), self.depth());
        let w = &self.weights[layer - 1];
        let mut grad = DenseMatrix::zeros(w.rows(), w.cols());
        for r in 0..n {
            let zs = self.forward(data.x.row(r))?;
            let resid = crate::linalg::dot(&self.readout, &zs[l_max]) - data.y[r];
            // δ_m = ∂f/∂(pre-activation of layer m), walked down from the top.
            let mut delta: Vec<f64> = self.readout.clone();
            for m in (layer..=l_max).rev() {
                let pre = self.weights[m - 1].mul_vec(&zs[m - 1])?;
                delta.iter_mut().zip(&pre).for_each(|(d, h)| *d *= self.activation.derivative(*h));
                if m > layer {
                    delta = self.weights[m - 1].t_mul_vec(&delta)?;
                }
            }
            let z = &zs[layer - 1];
            for i in 0..w.rows() {
                let c = resid * delta[i] / n as f64;
                grad.row_mut(i).iter_mut().zip(z).for_each(|(g, zj)| *g += c * zj);
            }
        }
        Ok(grad)
    }

    /// Leading effective readout `ā_{ℓ,i} = c₀^{L−ℓ} [(W_L ⋯ W_{ℓ+1})ᵀ a]_i`
    /// at the current weights.
    pub fn effective_readout(&self, layer: usize) -> Result<Vec<f64>> {
        check_layer(self, layer)?;
        let c0 = self.activation.derivative(0.0);
        let mut back = self.readout.clone();
        for m in (layer + 1..=self.depth()).rev() {
            back = self.weights[m - 1].t_mul_vec(&back)?;
        }
        let f = c0.powi((self.depth() - layer) as i32);
        Ok(back.into_iter().map(|v| v * f).collect())
    }
}

fn check_layer(mlp: &Mlp, layer: usize) -> Result<()> {
    if layer == 0 || layer > mlp.depth() {
        return invalid(format!("layer {layer} outside 1..={}", mlp.depth()));
    }
    Ok(())
}

/// One full-batch step on `W_layer` only; every other weight is untouched.
pub fn layerwise_gd_step(mlp: &Mlp, data: &Dataset, layer: usize, eta: f64) -> Result<Mlp> {
    let g = mlp.gradient(data, layer)?;
    let mut out = mlp.clone();
    out.weights[layer - 1] = mlp.weights[layer - 1].sub(&g.scale(eta))?;
    Ok(out)
}

/// Step count `⌊τ α_ℓ / η⌋` for the layer-`ℓ` training horizon.
pub fn horizon_steps(tau: f64, alpha: f64, eta: f64) -> usize {
    (tau * alpha / eta).floor().max(0.0) as usize
}

/// `η ā (c₀ û + c₁ Ĉ w_i)` on the frozen representation `z_{ℓ−1}`.
pub fn lofi_predicted_update(mlp: &Mlp, data: &Dataset, layer: usize, neuron: usize, eta: f64) -> Result<Vec<f64>> {
    check_layer(mlp, layer)?;
    let w = &mlp.weights[layer - 1];
    if neuron >= w.rows() {
        return invalid(format!("neuron {neuron} outside layer of width {}", w.rows()));
    }
    let a_bar = mlp.effective_readout(layer)?[neuron];
    if a_bar.abs() < READOUT_FLOOR {
        return Err(LofiError::DegenerateFeatures(format!("effective readout of neuron {neuron} is {a_bar:e}")));
    }
    let z = mlp.representation(&data.x, layer - 1)?;
    let u = linear_moment(&z, &data.y)?;
    let cw = moment_operator(&z, &data.y)?.mul_vec(w.row(neuron))?;
    let (c0, c1) = (mlp.activation.derivative(0.0), mlp.activation.second_derivative(0.0));
    Ok(u.iter().zip(&cw).map(|(ui, ci)| eta * a_bar * (c0 * ui + c1 * ci)).collect())
}

/// Relative error `‖Δ_gd − Δ_pred‖ / ‖Δ_gd‖` for one neuron.
pub fn update_relative_error(mlp: &Mlp, data: &Dataset, layer: usize, neuron: usize, eta: f64) -> Result<f64> {
    let stepped = layerwise_gd_step(mlp, data, layer, eta)?;
    let actual: Vec<f64> = stepped.weights[layer - 1]
        .row(neuron)
        .iter()
        .zip(mlp.weights[layer - 1].row(neuron))
        .map(|(a, b)| a - b)
        .collect();
    let pred = lofi_predicted_update(mlp, data, layer, neuron, eta)?;
    let diff: Vec<f64> = actual.iter().zip(&pred).map(|(a, b)| a - b).collect();
    Ok(norm(&diff) / norm(&actual))
}

/// Pearson correlations between every column of `a` and every column of `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureOverlap {
    /// Rows and columns of constant features are zero.
    pub matrix: DenseMatrix,
    pub excluded_a: usize,
    pub excluded_b: usize,
}

fn standardize_columns(z: &DenseMatrix) -> (DenseMatrix, Vec<bool>) {
    let mut out = z.clone();
    let mut constant = vec![false; z.cols()];
    for c in 0..z.cols() {
        let col = z.col(c);
        let m = mean(&col);
        let s = col.iter().map(|v| (v - m).powi(2)).sum::<f64>().sqrt();
        constant[c] = !(s > 1e-300) || col.iter().all(|v| *v == col[0]);
        for r in 0..z.rows() {
            out[(r, c)] = if constant[c] { 0.0 } else { (col[r] - m) / s };
        }
    }
    (out, constant)
}

pub fn feature_overlap_matrix(a: &DenseMatrix, b: &DenseMatrix) -> Result<FeatureOverlap> {
    if a.rows() != b.rows() {
        return mismatch(format!("{} vs {} rows", a.rows(), b.rows()));
    }
    let (sa, ca) = standardize_columns(a);
    let (sb, cb) = standardize_columns(b);
    let (excluded_a, excluded_b) = (ca.iter().filter(|c| **c).count(), cb.iter().filter(|c| **c).count());
    if excluded_a == a.cols() || excluded_b == b.cols() {
        return Err(LofiError::DegenerateFeatures("every feature column is constant".into()));
    }
    Ok(FeatureOverlap { matrix: sa.t_matmul(&sb)?, excluded_a, excluded_b })
}

/// `(‖F_t‖_F − ‖F_0‖_F) / ‖F_0‖_F`.
pub fn normalized_overlap(f_t: &DenseMatrix, f_0: &DenseMatrix) -> Result<f64> {
    let base = f_0.frobenius_norm();
    if base == 0.0 {
        return Err(LofiError::DegenerateFeatures("reference overlap matrix is zero".into()));
    }
    Ok((f_t.frobenius_norm() - base) / base)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GdScalingConfig {
    pub dims: Vec<usize>,
    pub alphas: Vec<f64>,
    pub ratio: f64,
    pub samples: usize,
    pub neurons: usize,
    pub seeds: u64,
    pub eta: f64,
    /// Project the labels off the span of the inputs so that `û = 0` at the
    /// first layer and the `Ĉ w` term leads the step.
    pub remove_linear: bool,
    /// Accepted band for `err(α)/err(α/2)`.
    pub band: (f64, f64),
}

impl Default for GdScalingConfig {
    fn default() -> Self {
        Self {
            dims: vec![20, 16, 12, 1],
            alphas: vec![1e-2, 5e-3, 2.5e-3],
            ratio: 0.5,
            samples: 500,
            neurons: 20,
            seeds: 5,
            eta: 1.0,
            remove_linear: true,
            band: (1.5, 3.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GdScalingResult {
    pub alphas: Vec<f64>,
    /// Mean relative error per α.
    pub errors: Vec<f64>,
    /// `errors[i] / errors[i+1]`.
    pub ratios: Vec<f64>,
    pub pass: bool,
}

/// Regression task with linear and quadratic parts. With `remove_linear` the
/// labels are replaced by their least-squares residual on `x`, which makes the
/// empirical `(1/n) Xᵀy` vanish.
pub fn gd_task(dim: usize, n: usize, remove_linear: bool, rng: &mut Rng) -> Result<Dataset> {
    let beta = rng.sphere_rows(1, dim).into_vec();
    let gamma = rng.sphere_rows(1, dim).into_vec();
    let x = rng.gaussian_matrix(n, dim);
    let y: Vec<f64> = (0..n)
        .map(|r| {
            let (b, g) = (crate::linalg::dot(&beta, x.row(r)), crate::linalg::dot(&gamma, x.row(r)));
            b + (g * g - 1.0) / std::f64::consts::SQRT_2
        })
        .collect();
    let y = if remove_linear {
        let w = crate::linalg::ridge_solve(&x, &y, 0.0)?;
        let fit = x.mul_vec(&w)?;
        y.iter().zip(&fit).map(|(a, b)| a - b).collect()
    } else {
        y
    };
    Dataset::new(x, y, "gd_task")
}

/// Averages the one-step relative error over `neurons` hidden units drawn
/// across all hidden layers and over `seeds` networks, for each α.
pub fn gd_scaling_experiment(cfg: &GdScalingConfig, seed: u64) -> Result<GdScalingResult> {
    if cfg.alphas.len() < 2 {
        return invalid("need at least two scales");
    }
    let mut errors = vec![0.0; cfg.alphas.len()];
    let mut count = 0usize;
    for s in 0..cfg.seeds {
        let base = Rng::new(seed).derive(s);
        let data = gd_task(cfg.dims[0], cfg.samples, cfg.remove_linear, &mut base.derive(0))?;
        let units: Vec<(usize, usize)> =
            (1..cfg.dims.len() - 1).flat_map(|l| (0..cfg.dims[l]).map(move |i| (l, i))).collect();
        let pick: Vec<(usize, usize)> =
            base.derive(1).permutation(units.len()).into_iter().take(cfg.neurons).map(|k| units[k]).collect();
        for (ai, &alpha) in cfg.alphas.iter().enumerate() {
            // Same directions at every α: only the scale changes.
            let mlp = init_hierarchical(&cfg.dims, alpha, cfg.ratio, Activation::SmoothTest, &mut base.derive(2))?;
            for &(l, i) in &pick {
                errors[ai] += update_relative_error(&mlp, &data, l, i, cfg.eta)?;
            }
        }
        count += pick.len();
    }
    errors.iter_mut().for_each(|e| *e /= count as f64);
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = ratios.iter().all(|r| *r >= cfg.band.0 && *r <= cfg.band.1);
    Ok(GdScalingResult { alphas: cfg.alphas.clone(), errors, ratios, pass })
}
