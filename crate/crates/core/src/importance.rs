//! Input-importance maps: how strongly each input coordinate drives a learned
//! spectral feature, with optional Fourier low-pass smoothing on image grids.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{invalid, LofiError, Result};
use crate::linalg::{dot, DenseMatrix};
use crate::lofi::{LayerKind, LofiModel};

pub const DEFAULT_F0: f64 = 0.15;
pub const DEFAULT_ORDER: f64 = 3.0;

fn check(model: &LofiModel, layer: usize, feature: Option<usize>) -> Result<()> {
    if layer >= model.layers.len() {
        return invalid(format!("layer {layer} outside 0..{}", model.layers.len()));
    }
    if let Some(l) = model.layers[..=layer].iter().position(|l| l.kind != LayerKind::Dense) {
        return invalid(format!("importance maps need dense layers; layer {l} is convolutional"));
    }
    if let Some(k) = feature {
        let cols = model.layers[layer].projection.cols();
        if k >= cols {
            return invalid(format!("feature {k} outside 0..{cols}"));
        }
    }
    Ok(())
}

/// Pre-activations and outputs of every dense layer below `layer`.
fn forward(model: &LofiModel, x: &[f64], layer: usize) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let mut z = x.to_vec();
    let mut trace = Vec::with_capacity(layer);
    for l in &model.layers[..layer] {
        let g = l.projection.t_mul_vec(&z)?;
        let pre: Vec<f64> = l.lift.mul_vec(&g)?.into_iter().map(|v| v / l.rms_norm).collect();
        let s = 1.0 / (l.lift.rows() as f64).sqrt();
        let out = pre.iter().map(|v| l.activation.eval(*v) * s).collect();
        trace.push((pre, std::mem::replace(&mut z, out)));
    }
    trace.push((Vec::new(), z));
    Ok(trace)
}

/// `⟨v_k, z_ℓ(x)⟩` for the k-th column of layer ℓ's projection.
pub fn feature_value(model: &LofiModel, x: &[f64], layer: usize, k: usize) -> Result<f64> {
    check(model, layer, Some(k))?;
    let trace = forward(model, x, layer)?;
    Ok(dot(&model.layers[layer].projection.col(k), &trace[layer].1))
}

/// `J_ℓ(x)ᵀ v_k`, back-propagated through the lifts below layer ℓ. The ReLU
/// derivative at 0 is taken to be 0.
pub fn feature_gradient(model: &LofiModel, x: &[f64], layer: usize, k: usize) -> Result<Vec<f64>> {
    check(model, layer, Some(k))?;
    if x.len() != model.input_dim {
        return invalid(format!("model expects {} inputs, got {}", model.input_dim, x.len()));
    }
    let trace = forward(model, x, layer)?;
    let mut u = model.layers[layer].projection.col(k);
    for l in (0..layer).rev() {
        let fl = &model.layers[l];
        let s = 1.0 / (fl.rms_norm * (fl.lift.rows() as f64).sqrt());
        let pre = &trace[l].0;
        let back: Vec<f64> = u.iter().zip(pre).map(|(ui, p)| ui * fl.activation.derivative(*p) * s).collect();
        u = fl.projection.mul_vec(&fl.lift.t_mul_vec(&back)?)?;
    }
    Ok(u)
}

/// `I_k(d) = (1/N) Σ_i (J_ℓ(x_i)ᵀ v_k)_d²`. At layer 0 the Jacobian is the
/// identity and the map is exactly `(v_k)_d²`.
pub fn importance_map(model: &LofiModel, x: &DenseMatrix, layer: usize, k: usize) -> Result<Vec<f64>> {
    check(model, layer, Some(k))?;
    if x.rows() == 0 {
        return invalid("need at least one input");
    }
    if x.cols() != model.input_dim {
        return invalid(format!("model expects {} inputs, got {}", model.input_dim, x.cols()));
    }
    if layer == 0 {
        return Ok(model.layers[0].projection.col(k).iter().map(|v| v * v).collect());
    }
    let mut acc = vec![0.0; model.input_dim];
    for r in 0..x.rows() {
        let g = feature_gradient(model, x.row(r), layer, k)?;
        acc.iter_mut().zip(&g).for_each(|(a, v)| *a += v * v);
    }
    acc.iter_mut().for_each(|a| *a /= x.rows() as f64);
    Ok(acc)
}

/// `Σ_k |λ_k| I_k / Σ_k |λ_k|` over the spectral (non-linear-direction)
/// features of the layer.
pub fn aggregate_importance(model: &LofiModel, x: &DenseMatrix, layer: usize) -> Result<Vec<f64>> {
    check(model, layer, None)?;
    let l = &model.layers[layer];
    let weights: Vec<(usize, f64)> =
        l.eigenvalues.iter().enumerate().filter(|(_, v)| !v.is_nan()).map(|(k, v)| (k, v.abs())).collect();
    let total: f64 = weights.iter().map(|w| w.1).sum();
    if !(total > 0.0) {
        return Err(LofiError::ZeroSpectrum);
    }
    let mut out = vec![0.0; model.input_dim];
    for (k, w) in weights {
        let m = importance_map(model, x, layer, k)?;
        out.iter_mut().zip(&m).for_each(|(o, v)| *o += w * v / total);
    }
    Ok(out)
}

fn frequency(i: usize, n: usize) -> f64 {
    let i = i as f64;
    let n_f = n as f64;
    if i <= n_f / 2.0 {
        i / n_f
    } else {
        (i - n_f) / n_f
    }
}

/// Isotropic low-pass `m(f) = (1 + ‖f‖/f₀)^{−a}` applied per channel to a map
/// laid out as `(h, w, c)` rows-major. Frequencies are in cycles per pixel.
pub fn low_pass(map: &[f64], grid: Option<(usize, usize, usize)>, f0: f64, order: f64) -> Result<Vec<f64>> {
    let Some((h, w, c)) = grid else {
        return invalid("smoothing needs explicit grid dimensions");
    };
    if h * w * c != map.len() {
        return invalid(format!("grid {h}x{w}x{c} does not match a map of length {}", map.len()));
    }
    if !(f0 > 0.0) || !(order >= 0.0) {
        return invalid(format!("bad filter parameters f0={f0}, a={order}"));
    }
    let mut planner = FftPlanner::<f64>::new();
    let (fr, fc) = (planner.plan_fft_forward(w), planner.plan_fft_forward(h));
    let (ir, ic) = (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h));
    let mut out = vec![0.0; map.len()];
    for ch in 0..c {
        let mut buf: Vec<Complex<f64>> = (0..h * w).map(|i| Complex::new(map[i * c + ch], 0.0)).collect();
        let transform_cols = |buf: &mut Vec<Complex<f64>>, plan: &std::sync::Arc<dyn rustfft::Fft<f64>>| {
            let mut col = vec![Complex::new(0.0, 0.0); h];
            for j in 0..w {
                (0..h).for_each(|i| col[i] = buf[i * w + j]);
                plan.process(&mut col);
                (0..h).for_each(|i| buf[i * w + j] = col[i]);
            }
        };
        buf.chunks_mut(w).for_each(|row| fr.process(row));
        transform_cols(&mut buf, &fc);
        for i in 0..h {
            for j in 0..w {
                let f = frequency(i, h).hypot(frequency(j, w));
                buf[i * w + j] *= (1.0 + f / f0).powf(-order);
            }
        }
        buf.chunks_mut(w).for_each(|row| ir.process(row));
        transform_cols(&mut buf, &ic);
        let scale = 1.0 / (h * w) as f64;
        (0..h * w).for_each(|i| out[i * c + ch] = buf[i].re * scale);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::Activation;
    use crate::dataio::{center_labels, Dataset};
    use crate::lofi::{fit_model, LayerSpec, ReadoutConfig};
    use crate::rng::Rng;

    fn model(depth: usize) -> (LofiModel, Dataset) {
        let mut rng = Rng::new(12);
        let x = rng.gaussian_matrix(120, 8);
        let y = (0..120).map(|r| x[(r, 0)] * x[(r, 1)] + 0.5 * x[(r, 2)].powi(2)).collect();
        let ds = center_labels(&Dataset::new(x, y, "t").unwrap());
        let specs: Vec<LayerSpec> =
            (0..depth).map(|l| LayerSpec::dense(20 - 4 * l, 3, Activation::SmoothTest)).collect();
        let m = fit_model(&ds, &specs, &ReadoutConfig::fixed(1e-2), &mut Rng::new(1)).unwrap();
        (m, ds)
    }

    #[test]
    fn layer_zero_is_squared_direction() {
        let (m, ds) = model(2);
        for k in 0..3 {
            let v = m.layers[0].projection.col(k);
            let map = importance_map(&m, &ds.x, 0, k).unwrap();
            assert!(map.iter().zip(&v).all(|(a, b)| *a == b * b));
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (m, ds) = model(3);
        let h = 1e-5;
        for layer in 1..3 {
            for r in 0..5 {
                let x = ds.x.row(r).to_vec();
                let g = feature_gradient(&m, &x, layer, 1).unwrap();
                let fd: Vec<f64> = (0..x.len())
                    .map(|d| {
                        let (mut p, mut q) = (x.clone(), x.clone());
                        p[d] += h;
                        q[d] -= h;
                        (feature_value(&m, &p, layer, 1).unwrap() - feature_value(&m, &q, layer, 1).unwrap()) / (2.0 * h)
                    })
                    .collect();
                let err: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                assert!(err <= 1e-4 * crate::linalg::norm(&g), "layer {layer}: {err}");
            }
        }
    }

    #[test]
    fn aggregate_weights() {
        let (mut m, ds) = model(2);
        m.layers[1].eigenvalues = vec![2.0, -2.0, 2.0];
        let agg = aggregate_importance(&m, &ds.x, 1).unwrap();
        let maps: Vec<Vec<f64>> = (0..3).map(|k| importance_map(&m, &ds.x, 1, k).unwrap()).collect();
        for d in 0..8 {
            let mean = (maps[0][d] + maps[1][d] + maps[2][d]) / 3.0;
            assert!((agg[d] - mean).abs() < 1e-12 * mean.abs().max(1e-300));
        }
        m.layers[1].eigenvalues = vec![0.0; 3];
        assert!(matches!(aggregate_importance(&m, &ds.x, 1), Err(LofiError::ZeroSpectrum)));
        assert!(importance_map(&m, &ds.x, 2, 0).is_err());
        assert!(importance_map(&m, &ds.x, 1, 3).is_err());
    }

    #[test]
    fn low_pass_behaviour() {
        let flat = vec![2.5; 6 * 4 * 2];
        let out = low_pass(&flat, Some((6, 4, 2)), DEFAULT_F0, DEFAULT_ORDER).unwrap();
        assert!(out.iter().all(|v| (v - 2.5).abs() < 1e-12));
        let checker: Vec<f64> = (0..64).map(|i| if (i / 8 + i % 8) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let out = low_pass(&checker, Some((8, 8, 1)), DEFAULT_F0, DEFAULT_ORDER).unwrap();
        let gain = (1.0f64 + 2f64.sqrt() * 0.5 / DEFAULT_F0).powf(-DEFAULT_ORDER);
        assert!(out.iter().zip(&checker).all(|(o, c)| (o - gain * c).abs() < 1e-12));
        assert!(low_pass(&flat, None, DEFAULT_F0, DEFAULT_ORDER).is_err());
        assert!(low_pass(&flat, Some((5, 4, 2)), DEFAULT_F0, DEFAULT_ORDER).is_err());
    }
}
