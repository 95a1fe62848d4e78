//! The layerwise pipeline: moment operator, top-|λ| spectral filter, random
//! nonlinear lift, and a cross-validated ridge readout.
//!
//! For a representation `Z` (n×p) and centered labels `y`, one layer computes
//! `Ĉ = (1/n) Zᵀ diag(y) Z`, keeps its top-`k` eigenvectors `V̂` ordered by
//! `|λ|`, projects `g = Z V̂` and lifts `Z' = σ(g Rᵀ / c) / √p'` with a
//! standard Gaussian `R` (p'×k) and `c` the RMS row norm of `g`.
//!
//! Representations are not re-centered between layers; only the labels are.

mod conv;
pub mod moments;
pub(crate) mod serialize;

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::dataio::Dataset;
use crate::error::{invalid, mismatch, LofiError, Result};
use crate::linalg::{
    default_ridge_grid, dot, gemm, lanczos_topk, mean, norm, ridge_cv, sym_eig_topk, DenseMatrix, EigMethod,
    LanczosOptions, SymEigResult,
};
use crate::rng::Rng;

pub use conv::{conv_forward, conv_linear_moment, conv_moment_operator, fit_conv_layer, ConvRepresentation};
pub use moments::{linear_moment, moment_apply, moment_operator, moment_operator_streamed, MomentAccumulator};

/// Eigenvalues below this fraction of `|λ₁|` count as absent.
pub const RANK_DEFICIENCY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    /// Channel-space filter followed by a random `kernel_size²` convolution
    /// with same padding.
    Conv { kernel_size: usize, pool: bool, l2_norm: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub rank: usize,
    pub activation: Activation,
    /// Prepend `û/‖û‖` to the selected directions.
    pub include_linear: bool,
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn dense(width: usize, rank: usize, activation: Activation) -> Self {
        Self { width, rank, activation, include_linear: false, kind: LayerKind::Dense }
    }

    pub fn conv(width: usize, rank: usize, activation: Activation, kernel_size: usize, pool: bool, l2_norm: bool) -> Self {
        Self { width, rank, activation, include_linear: false, kind: LayerKind::Conv { kernel_size, pool, l2_norm } }
    }

    pub fn with_linear(mut self, on: bool) -> Self {
        self.include_linear = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return invalid("layer rank must be at least 1");
        }
        if self.width < self.rank {
            return invalid(format!("width {} is below rank {}", self.width, self.rank));
        }
        if let LayerKind::Conv { kernel_size, .. } = self.kind {
            if kernel_size == 0 || kernel_size % 2 == 0 {
                return invalid(format!("kernel size {kernel_size} must be odd"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    Regression,
    Binary,
}

impl Task {
    pub fn tag(self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Binary => "binary",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = LofiError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Task::Regression),
            "binary" => Ok(Task::Binary),
            _ => Err(LofiError::UnknownTag(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutConfig {
    pub lambda_grid: Vec<f64>,
    pub folds: usize,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self { lambda_grid: default_ridge_grid(), folds: 5 }
    }
}

impl ReadoutConfig {
    pub fn fixed(lambda: f64) -> Self {
        Self { lambda_grid: vec![lambda], folds: 2 }
    }
}

/// Knobs mostly useful to tests and experiments.
#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    pub eig_method: EigMethod,
    /// Use this lift instead of drawing one.
    pub lift: Option<DenseMatrix>,
    /// Use this normalization constant instead of the RMS estimate.
    pub rms_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedLayer {
    pub kind: LayerKind,
    pub activation: Activation,
    /// `p_prev × k` (columns: optional `v̂₀`, then eigenvectors).
    pub projection: DenseMatrix,
    /// One entry per column of `projection`; NaN marks the linear direction.
    pub eigenvalues: Vec<f64>,
    pub has_linear: bool,
    /// `p × k` for dense layers, `p × (kernel_size²·k)` for conv layers.
    pub lift: DenseMatrix,
    pub rms_norm: f64,
    /// Fewer directions than requested survived the rank tolerance.
    pub rank_deficient: bool,
    /// Spatial grid `(h, w)` consumed by a conv layer.
    pub input_grid: Option<(usize, usize)>,
}

impl FittedLayer {
    pub fn input_dim(&self) -> usize {
        self.projection.rows()
    }

    pub fn rank(&self) -> usize {
        self.projection.cols()
    }

    pub fn width(&self) -> usize {
        self.lift.rows()
    }

    /// Eigenvalues of the non-linear directions.
    pub fn spectral_eigenvalues(&self) -> &[f64] {
        &self.eigenvalues[usize::from(self.has_linear)..]
    }

    /// Flat output dimension (`width · locations` for conv layers).
    pub fn output_dim(&self) -> usize {
        match (self.kind, self.input_grid) {
            (LayerKind::Conv { pool, .. }, Some((h, w))) => {
                let (h, w) = if pool { (h / 2, w / 2) } else { (h, w) };
                h * w * self.width()
            }
            _ => self.width(),
        }
    }
}

/// Result of the spectral filter on one operator.
#[derive(Debug, Clone)]
pub(crate) struct Selection {
    pub projection: DenseMatrix,
    pub eigenvalues: Vec<f64>,
    pub has_linear: bool,
    pub rank_deficient: bool,
}

/// The operator handed to the eigensolver.
pub(crate) enum Operator<'a> {
    Explicit(DenseMatrix),
    /// Never materialized; `Ĉ v` is computed from `z` and `y`.
    Implicit { z: &'a DenseMatrix, y: &'a [f64] },
}

impl Operator<'_> {
    fn dim(&self) -> usize {
        match self {
            Operator::Explicit(c) => c.rows(),
            Operator::Implicit { z, .. } => z.cols(),
        }
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Operator::Explicit(c) => {
                for (r, o) in out.iter_mut().enumerate() {
                    *o = dot(c.row(r), v);
                }
            }
            Operator::Implicit { z, y } => moment_apply(z, y, v, out),
        }
    }
}

fn deflate_against(v: &mut [f64], unit: &[f64]) {
    let s = dot(v, unit);
    v.iter_mut().zip(unit).for_each(|(a, b)| *a -= s * b);
}

/// Top-`rank` directions of `op`, optionally preceded by `û/‖û‖` with the
/// eigenproblem restricted to its orthogonal complement.
pub(crate) fn spectral_select(
    op: Operator<'_>,
    linear: Option<&[f64]>,
    rank: usize,
    method: EigMethod,
) -> Result<Selection> {
    let dim = op.dim();
    let v0 = match linear {
        Some(u) => {
            let nu = norm(u);
            if nu == 0.0 {
                return Err(LofiError::ZeroLinearComponent);
            }
            Some(u.iter().map(|v| v / nu).collect::<Vec<_>>())
        }
        None => None,
    };
    let avail = dim - usize::from(v0.is_some());
    if rank > avail {
        return invalid(format!("rank {rank} exceeds the {avail} available directions"));
    }
    let eig: SymEigResult = match (&op, method.resolve(dim, rank), &v0) {
        (Operator::Explicit(c), EigMethod::Dense, None) => sym_eig_topk(c, rank, EigMethod::Dense)?,
        (Operator::Explicit(c), EigMethod::Dense, Some(v)) => {
            let cv = c.mul_vec(v)?;
            let q = dot(v, &cv);
            let mut d = c.clone();
            for r in 0..dim {
                for k in 0..dim {
                    d[(r, k)] += -v[r] * cv[k] - cv[r] * v[k] + q * v[r] * v[k];
                }
            }
            d.symmetrize();
            sym_eig_topk(&d, rank, EigMethod::Dense)?
        }
        _ => {
            let apply = |x: &[f64], out: &mut [f64]| match &v0 {
                None => op.apply(x, out),
                Some(v) => {
                    let mut px = x.to_vec();
                    deflate_against(&mut px, v);
                    op.apply(&px, out);
                    deflate_against(out, v);
                }
            };
            lanczos_topk(apply, dim, rank, LanczosOptions::default())?
        }
    };

    let lead = eig.eigenvalues.first().map_or(0.0, |l| l.abs());
    let keep: Vec<usize> =
        (0..eig.len()).filter(|&i| lead > 0.0 && eig.eigenvalues[i].abs() > RANK_DEFICIENCY_TOL * lead).collect();
    if keep.is_empty() && v0.is_none() {
        return Err(LofiError::ZeroSpectrum);
    }
    let mut columns = Vec::with_capacity(keep.len() + 1);
    let mut eigenvalues = Vec::with_capacity(keep.len() + 1);
    if let Some(v) = &v0 {
        columns.push(v.clone());
        eigenvalues.push(f64::NAN);
    }
    for &i in &keep {
        let mut v = eig.vector(i);
        if let Some(v0) = &v0 {
            deflate_against(&mut v, v0);
            let nv = norm(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            crate::linalg::fix_sign(&mut v);
        }
        columns.push(v);
        eigenvalues.push(eig.eigenvalues[i]);
    }
    Ok(Selection {
        projection: DenseMatrix::from_columns(&columns)?,
        eigenvalues,
        has_linear: v0.is_some(),
        rank_deficient: keep.len() < rank,
    })
}

/// RMS of the row norms of `g`.
pub fn rms_row_norm(g: &DenseMatrix) -> f64 {
    let n = g.rows().max(1) as f64;
    (g.as_slice().iter().map(|v| v * v).sum::<f64>() / n).sqrt()
}

fn check_rms(c: f64) -> Result<f64> {
    if c > 0.0 && c.is_finite() {
        Ok(c)
    } else {
        Err(LofiError::DegenerateFeatures(format!("projected features have RMS norm {c}")))
    }
}

/// `σ(g Rᵀ / c) / √p` row by row.
pub(crate) fn lift_features(g: &DenseMatrix, lift: &DenseMatrix, c: f64, activation: Activation) -> DenseMatrix {
    let p = lift.rows();
    let mut out = DenseMatrix::zeros(g.rows(), p);
    gemm(1.0 / c, g, false, lift, true, 0.0, &mut out);
    let scale = 1.0 / (p as f64).sqrt();
    out.as_mut_slice().iter_mut().for_each(|v| *v = activation.eval(*v) * scale);
    out
}

fn draw_lift(spec_width: usize, cols: usize, opts: &FitOptions, rng: &mut Rng) -> Result<DenseMatrix> {
    match &opts.lift {
        Some(r) if r.shape() == (spec_width, cols) => Ok(r.clone()),
        Some(r) => mismatch(format!("injected lift is {}x{}, expected {spec_width}x{cols}", r.rows(), r.cols())),
        None => Ok(rng.gaussian_matrix(spec_width, cols)),
    }
}

/// Picks the explicit or matrix-free operator for `(z, y)`.
fn operator_for<'a>(z: &'a DenseMatrix, y: &'a [f64], rank: usize, method: EigMethod) -> Result<Operator<'a>> {
    let (n, p) = z.shape();
    if method.resolve(p, rank) == EigMethod::Lanczos && n < p {
        Ok(Operator::Implicit { z, y })
    } else {
        Ok(Operator::Explicit(moment_operator(z, y)?))
    }
}

/// Fits one dense layer, returning it with the training representation it
/// produces.
pub fn fit_layer(z_prev: &DenseMatrix, y: &[f64], spec: &LayerSpec, rng: &mut Rng) -> Result<(FittedLayer, DenseMatrix)> {
    fit_layer_with(z_prev, y, spec, rng, &FitOptions::default())
}

pub fn fit_layer_with(
    z_prev: &DenseMatrix,
    y: &[f64],
    spec: &LayerSpec,
    rng: &mut Rng,
    opts: &FitOptions,
) -> Result<(FittedLayer, DenseMatrix)> {
    spec.validate()?;
    if spec.kind != LayerKind::Dense {
        return invalid("fit_layer handles dense layers; use fit_conv_layer for conv layers");
    }
    if z_prev.rows() != y.len() {
        return mismatch(format!("{} rows but {} labels", z_prev.rows(), y.len()));
    }
    let u = if spec.include_linear { Some(linear_moment(z_prev, y)?) } else { None };
    let op = operator_for(z_prev, y, spec.rank, opts.eig_method)?;
    let sel = spectral_select(op, u.as_deref(), spec.rank, opts.eig_method)?;
    let g = z_prev.matmul(&sel.projection)?;
    let c = check_rms(opts.rms_norm.unwrap_or_else(|| rms_row_norm(&g)))?;
    let lift = draw_lift(spec.width, sel.projection.cols(), opts, rng)?;
    let z_next = lift_features(&g, &lift, c, spec.activation);
    let layer = FittedLayer {
        kind: LayerKind::Dense,
        activation: spec.activation,
        projection: sel.projection,
        eigenvalues: sel.eigenvalues,
        has_linear: sel.has_linear,
        lift,
        rms_norm: c,
        rank_deficient: sel.rank_deficient,
        input_grid: None,
    };
    Ok((layer, z_next))
}

/// Replays a fitted dense layer on new rows.
pub fn apply_layer(layer: &FittedLayer, z: &DenseMatrix) -> Result<DenseMatrix> {
    if layer.kind != LayerKind::Dense {
        return invalid("apply_layer handles dense layers; use conv_forward for conv layers");
    }
    if z.cols() != layer.input_dim() {
        return invalid(format!("layer expects {} features, got {}", layer.input_dim(), z.cols()));
    }
    let g = z.matmul(&layer.projection)?;
    Ok(lift_features(&g, &layer.lift, layer.rms_norm, layer.activation))
}

/// Layer stack plus linear readout `f̂(x) = ⟨w, z_L(x)⟩ + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct LofiModel {
    pub layers: Vec<FittedLayer>,
    pub readout: Vec<f64>,
    pub lambda: f64,
    pub task: Task,
    /// Mean of the raw training labels, added back at prediction time.
    pub label_offset: f64,
    pub input_dim: usize,
    /// `(h, w, c)` when the model starts with conv layers.
    pub input_grid: Option<(usize, usize, usize)>,
    /// Pooled CV error per grid point of the readout search.
    pub cv_errors: Vec<f64>,
}

enum Repr {
    Flat(DenseMatrix),
    Grid(ConvRepresentation),
}

impl Repr {
    fn into_flat(self) -> DenseMatrix {
        match self {
            Repr::Flat(m) => m,
            Repr::Grid(g) => g.to_flat(),
        }
    }

    fn flat(&self) -> DenseMatrix {
        match self {
            Repr::Flat(m) => m.clone(),
            Repr::Grid(g) => g.to_flat(),
        }
    }
}

fn initial_repr(x: &DenseMatrix, grid: Option<(usize, usize, usize)>) -> Result<Repr> {
    match grid {
        None => Ok(Repr::Flat(x.clone())),
        Some((h, w, c)) => Ok(Repr::Grid(ConvRepresentation::from_flat(x, h, w, c)?)),
    }
}

fn step(layer: &FittedLayer, repr: Repr) -> Result<Repr> {
    match layer.kind {
        LayerKind::Dense => Ok(Repr::Flat(apply_layer(layer, &repr.into_flat())?)),
        LayerKind::Conv { .. } => match repr {
            Repr::Grid(g) => Ok(Repr::Grid(conv_forward(layer, &g)?)),
            Repr::Flat(_) => invalid("conv layer applied to a flat representation"),
        },
    }
}

/// Fits a model on flat inputs.
pub fn fit_model(train: &Dataset, specs: &[LayerSpec], readout: &ReadoutConfig, rng: &mut Rng) -> Result<LofiModel> {
    fit_model_with(train, None, specs, readout, Task::Regression, rng, &FitOptions::default())
}

/// General entry point: optional input grid for conv stacks and the task
/// recorded in the model.
pub fn fit_model_with(
    train: &Dataset,
    input_grid: Option<(usize, usize, usize)>,
    specs: &[LayerSpec],
    readout: &ReadoutConfig,
    task: Task,
    rng: &mut Rng,
    opts: &FitOptions,
) -> Result<LofiModel> {
    let offset = mean(&train.y);
    let y: Vec<f64> = train.y.iter().map(|v| v - offset).collect();
    let mut repr = initial_repr(&train.x, input_grid)?;
    let mut layers = Vec::with_capacity(specs.len());
    for (l, spec) in specs.iter().enumerate() {
        let mut layer_rng = rng.derive(l as u64 + 1);
        let layer_opts = FitOptions { eig_method: opts.eig_method, lift: None, rms_norm: None };
        let (layer, next) = match (spec.kind, repr) {
            (LayerKind::Dense, r) => {
                let (layer, z) = fit_layer_with(&r.into_flat(), &y, spec, &mut layer_rng, &layer_opts)?;
                (layer, Repr::Flat(z))
            }
            (LayerKind::Conv { .. }, Repr::Grid(g)) => {
                let (layer, z) = fit_conv_layer(&g, &y, spec, &mut layer_rng, &layer_opts)?;
                (layer, Repr::Grid(z))
            }
            (LayerKind::Conv { .. }, Repr::Flat(_)) => {
                return invalid(format!("layer {l}: conv layers need a grid input and must precede dense layers"))
            }
        };
        layers.push(layer);
        repr = next;
    }
    let z = repr.into_flat();
    let mut cv_rng = rng.derive(0);
    let fit = ridge_cv(&z, &y, &readout.lambda_grid, readout.folds, &mut cv_rng)?;
    Ok(LofiModel {
        layers,
        readout: fit.weights,
        lambda: fit.lambda,
        task,
        label_offset: offset,
        input_dim: train.x.cols(),
        input_grid,
        cv_errors: fit.cv_errors,
    })
}

impl LofiModel {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    fn check_input(&self, x: &DenseMatrix) -> Result<()> {
        if x.cols() != self.input_dim {
            return invalid(format!("model expects {} input features, got {}", self.input_dim, x.cols()));
        }
        Ok(())
    }

    /// `z_L(x)` for every row.
    pub fn representation(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_input(x)?;
        let mut repr = initial_repr(x, self.input_grid)?;
        for layer in &self.layers {
            repr = step(layer, repr)?;
        }
        Ok(repr.into_flat())
    }

    /// `[z_0, z_1, …, z_L]`, flattened.
    pub fn representations(&self, x: &DenseMatrix) -> Result<Vec<DenseMatrix>> {
        self.check_input(x)?;
        let mut repr = initial_repr(x, self.input_grid)?;
        let mut out = vec![repr.flat()];
        for layer in &self.layers {
            repr = step(layer, repr)?;
            out.push(repr.flat());
        }
        Ok(out)
    }

    pub fn predict(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        let z = self.representation(x)?;
        let mut out = z.mul_vec(&self.readout)?;
        out.iter_mut().for_each(|v| *v += self.label_offset);
        Ok(out)
    }

    /// `sign(f̂(x))` with `sign(0) = +1`.
    pub fn classify(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        Ok(self.predict(x)?.into_iter().map(sign).collect())
    }
}

#[inline]
pub fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn predict(model: &LofiModel, x: &DenseMatrix) -> Result<Vec<f64>> {
    model.predict(x)
}

pub fn classify(model: &LofiModel, x: &DenseMatrix) -> Result<Vec<f64>> {
    model.classify(x)
}

pub fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len().max(1) as f64
}

/// Fraction of sign disagreements.
pub fn zero_one_error(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).filter(|(a, b)| sign(**a) != sign(**b)).count() as f64 / y.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::center_labels;
    use crate::linalg::{ridge_solve, sym_eig_all};

    fn data(n: usize, d: usize, seed: u64) -> (DenseMatrix, Vec<f64>) {
        let mut rng = Rng::new(seed);
        let x = rng.gaussian_matrix(n, d);
        let y: Vec<f64> = (0..n).map(|r| x[(r, 0)] * x[(r, 1)] + 0.5 * x[(r, 2)].powi(2) - 0.5).collect();
        (x, y)
    }

    #[test]
    fn identity_lift_is_rotation() {
        let (z, y) = data(50, 4, 1);
        let spec = LayerSpec::dense(4, 4, Activation::Identity);
        let opts = FitOptions { lift: Some(DenseMatrix::identity(4)), rms_norm: Some(1.0), ..Default::default() };
        let (layer, zn) = fit_layer_with(&z, &y, &spec, &mut Rng::new(0), &opts).unwrap();
        let want = z.matmul(&layer.projection).unwrap().scale(0.5);
        assert!(zn.sub(&want).unwrap().max_abs() < 1e-14);
        // Full rank: the projection is orthogonal, so row norms are kept.
        for r in 0..50 {
            assert!((norm(zn.row(r)) * 2.0 - norm(z.row(r))).abs() < 1e-12);
        }
    }

    #[test]
    fn planted_spike_recovered() {
        let d = 30;
        let n = 50 * d;
        let mut rng = Rng::new(11);
        let mut v = rng.gaussian_vec(d);
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let x = rng.gaussian_matrix(n, d);
        let y: Vec<f64> = (0..n).map(|r| (dot(x.row(r), &v).powi(2) - 1.0) / 2f64.sqrt()).collect();
        let c = moment_operator(&x, &y).unwrap();
        let top = sym_eig_topk(&c, 1, EigMethod::Dense).unwrap().vector(0);
        assert!(dot(&top, &v).powi(2) >= 0.8);
    }

    #[test]
    fn pure_noise_has_no_stable_direction() {
        let (n, p) = (4000, 20);
        let mut tops = Vec::new();
        for seed in 0..4 {
            let mut rng = Rng::new(100 + seed);
            let z = rng.gaussian_matrix(n, p);
            let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
            let c = moment_operator(&z, &y).unwrap();
            let eig = sym_eig_topk(&c, 1, EigMethod::Dense).unwrap();
            assert!(eig.eigenvalues[0].abs() <= 3.0 * (p as f64 / n as f64).sqrt());
            tops.push(eig.vector(0));
        }
        let mut overlaps = Vec::new();
        for a in 0..tops.len() {
            for b in a + 1..tops.len() {
                overlaps.push(dot(&tops[a], &tops[b]).powi(2));
            }
        }
        assert!(mean(&overlaps) < 0.3);
    }

    #[test]
    fn apply_replays_fit() {
        let (z, y) = data(80, 6, 2);
        let spec = LayerSpec::dense(32, 3, Activation::Relu);
        let (layer, zn) = fit_layer(&z, &y, &spec, &mut Rng::new(5)).unwrap();
        assert_eq!(apply_layer(&layer, &z).unwrap(), zn);
        let zero = apply_layer(&layer, &DenseMatrix::zeros(3, 6)).unwrap();
        assert!(zero.as_slice().iter().all(|v| *v == 0.0));
        // Pre-activations are linear in the input for fixed c.
        let id = FittedLayer { activation: Activation::Identity, ..layer.clone() };
        let a = apply_layer(&id, &z).unwrap();
        let b = apply_layer(&id, &z.scale(2.5)).unwrap();
        assert!(b.sub(&a.scale(2.5)).unwrap().max_abs() < 1e-12);
        assert!(apply_layer(&layer, &DenseMatrix::zeros(2, 5)).is_err());
    }

    #[test]
    fn linear_direction_first() {
        let (z, mut y) = data(200, 5, 3);
        for r in 0..200 {
            y[r] += z[(r, 4)];
        }
        let spec = LayerSpec::dense(10, 2, Activation::Relu).with_linear(true);
        let (layer, _) = fit_layer(&z, &y, &spec, &mut Rng::new(1)).unwrap();
        assert_eq!(layer.rank(), 3);
        assert!(layer.eigenvalues[0].is_nan());
        let u = linear_moment(&z, &y).unwrap();
        let v0 = layer.projection.col(0);
        assert!((dot(&v0, &u) - norm(&u)).abs() < 1e-12);
        for j in 1..3 {
            assert!(dot(&v0, &layer.projection.col(j)).abs() < 1e-10);
        }
        let zero = vec![0.0; 200];
        assert!(matches!(
            fit_layer(&DenseMatrix::zeros(200, 5), &zero, &spec, &mut Rng::new(1)),
            Err(LofiError::ZeroLinearComponent)
        ));
    }

    #[test]
    fn rank_deficiency_flagged() {
        // Ĉ has rank 2 here.
        let z = DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]]).unwrap();
        let y = [1.0, -1.0];
        let spec = LayerSpec::dense(8, 3, Activation::Relu);
        let (layer, _) = fit_layer(&z, &y, &spec, &mut Rng::new(0)).unwrap();
        assert!(layer.rank_deficient);
        assert_eq!(layer.rank(), 2);
    }

    #[test]
    fn implicit_and_explicit_operators_agree() {
        let (z, y) = data(60, 120, 4);
        let y: Vec<f64> = y.iter().map(|v| v - mean(&y)).collect();
        let spec = LayerSpec::dense(16, 4, Activation::Relu);
        let lanczos = FitOptions { eig_method: EigMethod::Lanczos, ..Default::default() };
        let dense = FitOptions { eig_method: EigMethod::Dense, ..Default::default() };
        let (a, _) = fit_layer_with(&z, &y, &spec, &mut Rng::new(0), &lanczos).unwrap();
        let (b, _) = fit_layer_with(&z, &y, &spec, &mut Rng::new(0), &dense).unwrap();
        for j in 0..4 {
            assert!((a.eigenvalues[j] - b.eigenvalues[j]).abs() < 1e-10);
            assert!(dot(&a.projection.col(j), &b.projection.col(j)).abs() > 1.0 - 1e-8);
        }
    }

    #[test]
    fn depth_zero_is_ridge() {
        let (x, y) = data(60, 5, 6);
        let ds = center_labels(&Dataset::new(x.clone(), y, "t").unwrap());
        let model = fit_model(&ds, &[], &ReadoutConfig::fixed(0.1), &mut Rng::new(0)).unwrap();
        let w = ridge_solve(&x, &ds.y, 0.1).unwrap();
        for (a, b) in model.readout.iter().zip(&w) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn overparameterized_readout_interpolates() {
        let (x, y) = data(40, 5, 7);
        let ds = center_labels(&Dataset::new(x.clone(), y, "t").unwrap());
        let specs = [LayerSpec::dense(200, 5, Activation::Relu)];
        let model = fit_model(&ds, &specs, &ReadoutConfig::fixed(1e-10), &mut Rng::new(3)).unwrap();
        let pred = model.predict(&x).unwrap();
        let var = crate::linalg::variance(&ds.y);
        assert!(mse(&pred, &ds.y) <= 1e-6 * var);
    }

    #[test]
    fn prediction_is_rowwise_and_deterministic() {
        let (x, y) = data(120, 6, 8);
        let ds = center_labels(&Dataset::new(x.clone(), y, "t").unwrap());
        let specs = [LayerSpec::dense(40, 3, Activation::Relu), LayerSpec::dense(30, 2, Activation::Relu)];
        let cfg = ReadoutConfig { lambda_grid: vec![1e-3, 1e-1, 10.0], folds: 3 };
        let m1 = fit_model(&ds, &specs, &cfg, &mut Rng::new(9)).unwrap();
        let m2 = fit_model(&ds, &specs, &cfg, &mut Rng::new(9)).unwrap();
        assert_eq!(m1, m2);
        let p = m1.predict(&x).unwrap();
        let perm: Vec<usize> = (0..120).rev().collect();
        let pp = m1.predict(&x.select_rows(&perm)).unwrap();
        for (i, &j) in perm.iter().enumerate() {
            assert_eq!(pp[i], p[j]);
        }
    }

    #[test]
    fn sign_convention() {
        assert_eq!(sign(0.0), 1.0);
        assert_eq!(sign(-0.0), 1.0);
        assert_eq!(zero_one_error(&[0.0, -1.0], &[1.0, 1.0]), 0.5);
    }

    #[test]
    fn selected_vectors_are_orthonormal() {
        let (z, y) = data(300, 10, 10);
        let spec = LayerSpec::dense(20, 5, Activation::Relu);
        let (layer, _) = fit_layer(&z, &y, &spec, &mut Rng::new(0)).unwrap();
        let gram = layer.projection.t_matmul(&layer.projection).unwrap();
        assert!(gram.sub(&DenseMatrix::identity(5)).unwrap().max_abs() < 1e-8);
        let full = sym_eig_all(&moment_operator(&z, &y).unwrap()).unwrap();
        for j in 0..5 {
            assert!((full.eigenvalues[j] - layer.eigenvalues[j]).abs() < 1e-12);
        }
    }
}
