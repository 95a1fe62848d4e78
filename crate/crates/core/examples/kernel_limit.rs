//! Finite-width features converging to their kernel limit.
//!
//! Fits the same two-layer ReLU stack at increasing widths and compares the
//! top projected features and test error with the arc-cosine kernel model.
//!
//! cargo run --release --example kernel_limit [seed]

use lofi::dataio::{center_labels, Dataset};
use lofi::kernel::{fit_kernel_model, KernelModelConfig};
use lofi::linalg::{log_grid, DenseMatrix};
use lofi::lofi::{fit_model, mse};
use lofi::{Activation, LayerSpec, ReadoutConfig, Rng};

fn task(n: usize, rng: &mut Rng) -> Dataset {
    let x = rng.gaussian_matrix(n, 10);
    let y = (0..n)
        .map(|r| {
            let v = x.row(r);
            v[0] * v[1] + 0.7 * (v[2] * v[2] - 1.0) + 0.4 * (v[3] + v[4]).tanh() + 0.1 * rng.normal()
        })
        .collect();
    Dataset::new(x, y, "quad").unwrap()
}

fn abs_corr(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (lofi::linalg::mean(a), lofi::linalg::mean(b));
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += (x - ma) * (y - mb);
        aa += (x - ma).powi(2);
        bb += (y - mb).powi(2);
    }
    (ab / (aa * bb).sqrt()).abs()
}

fn mean_corr(a: &DenseMatrix, b: &DenseMatrix, k: usize) -> f64 {
    (0..k).map(|j| abs_corr(&a.col(j), &b.col(j))).sum::<f64>() / k as f64
}

fn main() -> lofi::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut data_rng = Rng::new(seed);
    let train = center_labels(&task(200, &mut data_rng));
    let test = task(1000, &mut data_rng);
    let ranks = vec![3, 3];
    let grid = log_grid(1e-5, 1.0, 20);

    let kernel = fit_kernel_model(&train, &KernelModelConfig::new(ranks.clone()), &mut Rng::new(seed + 1))?;
    let k_feats = kernel.features(&test.x, 1)?;
    let k_mse = mse(&kernel.predict(&test.x)?, &test.y);
    println!("kernel: test mse {k_mse:.4}  layer-1 eigenvalues {:?}", kernel.layers[1].eigenvalues);

    for p in [256, 1024, 4096] {
        let specs: Vec<LayerSpec> = ranks.iter().map(|&k| LayerSpec::dense(p, k, Activation::Relu)).collect();
        let readout = ReadoutConfig { lambda_grid: grid.clone(), folds: 5 };
        let model = fit_model(&train, &specs, &readout, &mut Rng::new(seed + 2))?;
        let z1 = &model.representations(&test.x)?[1];
        let g1 = z1.matmul(&model.layers[1].projection)?;
        let corr = mean_corr(&g1, &k_feats, 3);
        let f_mse = mse(&model.predict(&test.x)?, &test.y);
        println!("p={p:5}: feature corr {corr:.4}  test mse {f_mse:.4}  rel gap {:.3}", (f_mse - k_mse).abs() / k_mse);
    }
    Ok(())
}
