//! Convolutional layers. The moment operator lives in channel space, pooled
//! over all spatial locations; the lift is a random `k×k` convolution with
//! same padding over the projected channels.

use crate::error::{invalid, mismatch, Result};
use crate::linalg::DenseMatrix;
use crate::rng::Rng;

use super::{
    check_rms, draw_lift, lift_features, linear_moment, operator_for, spectral_select, FitOptions, FittedLayer,
    LayerKind, LayerSpec,
};

/// `n` samples on an `h×w` grid with `c` channels, stored sample-major then
/// row, column, channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvRepresentation {
    n: usize,
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ConvRepresentation {
    pub fn new(n: usize, height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return invalid("grid dimensions and channel count must be positive");
        }
        if data.len() != n * height * width * channels {
            return mismatch(format!("{} values for a {n}x{height}x{width}x{channels} tensor", data.len()));
        }
        Ok(Self { n, height, width, channels, data })
    }

    /// Each row of `x` holds one sample laid out as `(row, column, channel)`.
    pub fn from_flat(x: &DenseMatrix, height: usize, width: usize, channels: usize) -> Result<Self> {
        if x.cols() != height * width * channels {
            return invalid(format!("{} features do not fit a {height}x{width}x{channels} grid", x.cols()));
        }
        Self::new(x.rows(), height, width, channels, x.as_slice().to_vec())
    }

    pub fn to_flat(&self) -> DenseMatrix {
        DenseMatrix::from_vec(self.n, self.locations() * self.channels, self.data.clone())
    }

    pub fn samples(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn locations(&self) -> usize {
        self.height * self.width
    }

    /// Channel vector of sample `i` at location `j = row·w + col`.
    pub fn at(&self, i: usize, j: usize) -> &[f64] {
        let s = self.locations();
        let start = (i * s + j) * self.channels;
        &self.data[start..start + self.channels]
    }

    /// `(n·s) × c` view with one location per row.
    pub fn location_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_vec(self.n * self.locations(), self.channels, self.data.clone())
    }

    fn location_weights(&self, y: &[f64]) -> Vec<f64> {
        let s = self.locations();
        y.iter().flat_map(|&v| std::iter::repeat(v).take(s)).collect()
    }
}

fn check_labels(z: &ConvRepresentation, y: &[f64]) -> Result<()> {
    if z.samples() != y.len() {
        return mismatch(format!("{} samples but {} labels", z.samples(), y.len()));
    }
    Ok(())
}

/// `Ĉ = (1/(n s)) Σ_μ Σ_j y_μ z_{μ,j} z_{μ,j}ᵀ` (c×c).
pub fn conv_moment_operator(z: &ConvRepresentation, y: &[f64]) -> Result<DenseMatrix> {
    check_labels(z, y)?;
    super::moment_operator(&z.location_matrix(), &z.location_weights(y))
}

/// `(1/(n s)) Σ_μ Σ_j y_μ z_{μ,j}`.
pub fn conv_linear_moment(z: &ConvRepresentation, y: &[f64]) -> Result<Vec<f64>> {
    check_labels(z, y)?;
    linear_moment(&z.location_matrix(), &z.location_weights(y))
}

fn project(z: &ConvRepresentation, v: &DenseMatrix) -> Result<ConvRepresentation> {
    let g = z.location_matrix().matmul(v)?;
    ConvRepresentation::new(z.n, z.height, z.width, v.cols(), g.into_vec())
}

/// Patch rows of sample `i`: one row per location, entries ordered
/// `(dy, dx, channel)`, zero outside the grid.
fn patches(g: &ConvRepresentation, i: usize, ks: usize, out: &mut Vec<f64>) {
    let r = (ks / 2) as isize;
    let (h, w, c) = (g.height as isize, g.width as isize, g.channels);
    for y in 0..h {
        for x in 0..w {
            for dy in -r..=r {
                for dx in -r..=r {
                    let (yy, xx) = (y + dy, x + dx);
                    if yy < 0 || yy >= h || xx < 0 || xx >= w {
                        out.extend(std::iter::repeat(0.0).take(c));
                    } else {
                        out.extend_from_slice(g.at(i, (yy * w + xx) as usize));
                    }
                }
            }
        }
    }
}

fn patch_rms(g: &ConvRepresentation, ks: usize) -> f64 {
    let mut total = 0.0;
    let mut buf = Vec::new();
    for i in 0..g.n {
        buf.clear();
        patches(g, i, ks, &mut buf);
        total += buf.iter().map(|v| v * v).sum::<f64>();
    }
    (total / (g.n * g.locations()).max(1) as f64).sqrt()
}

const SAMPLE_CHUNK: usize = 64;

fn lift_grid(g: &ConvRepresentation, layer: &FittedLayer) -> Result<ConvRepresentation> {
    let LayerKind::Conv { kernel_size, pool, l2_norm } = layer.kind else {
        return invalid("not a conv layer");
    };
    let (h, w) = g.grid();
    if pool && (h % 2 != 0 || w % 2 != 0) {
        return invalid(format!("2x2 pooling needs an even grid, got {h}x{w}"));
    }
    let p = layer.width();
    let s = g.locations();
    let patch_len = kernel_size * kernel_size * g.channels;
    let mut lifted = Vec::with_capacity(g.n * s * p);
    let mut buf = Vec::new();
    for start in (0..g.n).step_by(SAMPLE_CHUNK) {
        let end = (start + SAMPLE_CHUNK).min(g.n);
        buf.clear();
        for i in start..end {
            patches(g, i, kernel_size, &mut buf);
        }
        let pm = DenseMatrix::from_vec((end - start) * s, patch_len, std::mem::take(&mut buf));
        let z = lift_features(&pm, &layer.lift, layer.rms_norm, layer.activation);
        lifted.extend_from_slice(z.as_slice());
        buf = pm.into_vec();
    }
    let mut out = ConvRepresentation::new(g.n, h, w, p, lifted)?;
    if pool {
        out = max_pool(&out);
    }
    if l2_norm {
        for loc in out.data.chunks_mut(p) {
            let nrm = loc.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm > 0.0 {
                loc.iter_mut().for_each(|v| *v /= nrm);
            }
        }
    }
    Ok(out)
}

/// 2×2 max pooling with stride 2.
pub(crate) fn max_pool(z: &ConvRepresentation) -> ConvRepresentation {
    let (h, w, c) = (z.height / 2, z.width / 2, z.channels);
    let mut data = Vec::with_capacity(z.n * h * w * c);
    for i in 0..z.n {
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    let mut m = f64::NEG_INFINITY;
                    for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        m = m.max(z.at(i, (2 * y + dy) * z.width + 2 * x + dx)[ch]);
                    }
                    data.push(m);
                }
            }
        }
    }
    ConvRepresentation { n: z.n, height: h, width: w, channels: c, data }
}

/// Fits one conv layer on a grid representation.
pub fn fit_conv_layer(
    z: &ConvRepresentation,
    y: &[f64],
    spec: &LayerSpec,
    rng: &mut Rng,
    opts: &FitOptions,
) -> Result<(FittedLayer, ConvRepresentation)> {
    spec.validate()?;
    let LayerKind::Conv { kernel_size, .. } = spec.kind else {
        return invalid("fit_conv_layer needs a conv layer spec");
    };
    check_labels(z, y)?;
    let locs = z.location_matrix();
    let w = z.location_weights(y);
    let u = if spec.include_linear { Some(linear_moment(&locs, &w)?) } else { None };
    let op = operator_for(&locs, &w, spec.rank, opts.eig_method)?;
    let sel = spectral_select(op, u.as_deref(), spec.rank, opts.eig_method)?;
    let g = project(z, &sel.projection)?;
    let c = check_rms(opts.rms_norm.unwrap_or_else(|| patch_rms(&g, kernel_size)))?;
    let lift = draw_lift(spec.width, kernel_size * kernel_size * sel.projection.cols(), opts, rng)?;
    let layer = FittedLayer {
        kind: spec.kind,
        activation: spec.activation,
        projection: sel.projection,
        eigenvalues: sel.eigenvalues,
        has_linear: sel.has_linear,
        lift,
        rms_norm: c,
        rank_deficient: sel.rank_deficient,
        input_grid: Some(z.grid()),
    };
    let out = lift_grid(&g, &layer)?;
    Ok((layer, out))
}

/// Replays a fitted conv layer.
pub fn conv_forward(layer: &FittedLayer, z: &ConvRepresentation) -> Result<ConvRepresentation> {
    if z.channels() != layer.input_dim() {
        return invalid(format!("layer expects {} channels, got {}", layer.input_dim(), z.channels()));
    }
    if let Some(grid) = layer.input_grid {
        if grid != z.grid() {
            return invalid(format!("layer was fit on a {:?} grid, got {:?}", grid, z.grid()));
        }
    }
    lift_grid(&project(z, &layer.projection)?, layer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use crate::lofi::{apply_layer, fit_layer, moment_operator};

    #[test]
    fn single_location_reduces_to_dense() {
        let mut rng = Rng::new(1);
        let x = rng.gaussian_matrix(30, 5);
        let y: Vec<f64> = (0..30).map(|r| x[(r, 0)] * x[(r, 1)]).collect();
        let z = ConvRepresentation::from_flat(&x, 1, 1, 5).unwrap();
        let c1 = conv_moment_operator(&z, &y).unwrap();
        assert_eq!(c1, moment_operator(&x, &y).unwrap());

        let spec = LayerSpec::conv(12, 3, Activation::Relu, 1, false, false);
        let (cl, cz) = fit_conv_layer(&z, &y, &spec, &mut Rng::new(4), &FitOptions::default()).unwrap();
        let (dl, dz) = fit_layer(&x, &y, &LayerSpec::dense(12, 3, Activation::Relu), &mut Rng::new(4)).unwrap();
        assert_eq!(cl.projection, dl.projection);
        assert!(cz.to_flat().sub(&dz).unwrap().max_abs() < 1e-14);
        let dense_like = FittedLayer { kind: LayerKind::Dense, input_grid: None, ..cl.clone() };
        let replay = apply_layer(&dense_like, &x).unwrap();
        assert!(conv_forward(&cl, &z).unwrap().to_flat().sub(&replay).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn channel_moment_example() {
        let z = ConvRepresentation::new(1, 1, 2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let c = conv_moment_operator(&z, &[2.0]).unwrap();
        assert_eq!(c, DenseMatrix::identity(2));
        let zero = conv_moment_operator(&z, &[0.0]).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn pooling_and_normalization() {
        let constant = ConvRepresentation::new(1, 2, 2, 3, [0.5, -1.0, 2.0].repeat(4)).unwrap();
        let pooled = max_pool(&constant);
        assert_eq!(pooled.grid(), (1, 1));
        assert_eq!(pooled.at(0, 0), &[0.5, -1.0, 2.0]);

        let mut rng = Rng::new(2);
        let x = rng.gaussian_matrix(20, 4 * 4 * 3);
        let y: Vec<f64> = (0..20).map(|r| x[(r, 0)] - x[(r, 5)]).collect();
        let z = ConvRepresentation::from_flat(&x, 4, 4, 3).unwrap();
        let spec = LayerSpec::conv(8, 2, Activation::Relu, 3, true, true);
        let (layer, out) = fit_conv_layer(&z, &y, &spec, &mut rng, &FitOptions::default()).unwrap();
        assert_eq!(out.grid(), (2, 2));
        assert_eq!(layer.lift.shape(), (8, 18));
        for i in 0..20 {
            for j in 0..4 {
                let n: f64 = out.at(i, j).iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(n == 0.0 || (n - 1.0).abs() < 1e-10);
            }
        }
        assert_eq!(conv_forward(&layer, &z).unwrap(), out);
        let odd = ConvRepresentation::from_flat(&rng.gaussian_matrix(20, 27), 3, 3, 3).unwrap();
        assert!(fit_conv_layer(&odd, &y, &spec, &mut rng, &FitOptions::default()).is_err());
    }
}
