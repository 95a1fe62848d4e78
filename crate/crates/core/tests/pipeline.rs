use lofi::dataio::{load_dataset, save_dataset, split, Dataset};
use lofi::kernel::{fit_kernel_model, KernelKind, KernelModel, KernelModelConfig};
use lofi::linalg::{dot, log_grid, variance};
use lofi::lofi::{fit_model, fit_model_with, mse, zero_one_error, FitOptions};
use lofi::synth::representation_overlap;
use lofi::{Activation, LayerSpec, LofiModel, ReadoutConfig, Rng, Task};

fn quadratic(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = Rng::new(seed);
    let x = rng.gaussian_matrix(n, d);
    let y = (0..n).map(|r| x[(r, 0)] * x[(r, 1)] + 0.5 * (x[(r, 2)].powi(2) - 1.0) + 0.1 * rng.normal()).collect();
    Dataset::new(x, y, "quadratic").unwrap()
}

#[test]
fn spectral_model_beats_the_mean_and_survives_reload() {
    let train = quadratic(1500, 10, 1);
    let test = quadratic(500, 10, 2);
    let specs = [LayerSpec::dense(256, 4, Activation::Relu), LayerSpec::dense(128, 3, Activation::Relu)];
    let model = fit_model(&train, &specs, &ReadoutConfig::default(), &mut Rng::new(3)).unwrap();
    let pred = model.predict(&test.x).unwrap();
    assert!(mse(&pred, &test.y) < 0.5 * variance(&test.y));

    // The first layer finds the planted quadratic block {x0, x1, x2}.
    let v = model.layers[0].projection.col(0);
    let mass: f64 = v[..3].iter().map(|a| a * a).sum();
    assert!(mass > 0.9, "planted mass {mass}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.lofi");
    model.save(&path).unwrap();
    let back = LofiModel::load(&path).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.predict(&test.x).unwrap(), pred);
}

#[test]
fn kernel_model_round_trip_and_monte_carlo_agreement() {
    let train = quadratic(150, 6, 4);
    let test = quadratic(100, 6, 5);
    let cfg = KernelModelConfig::new(vec![3, 2]);
    let model = fit_kernel_model(&train, &cfg, &mut Rng::new(1)).unwrap();
    let pred = model.predict(&test.x).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.lofi");
    model.save(&path).unwrap();
    let back = KernelModel::load(&path).unwrap();
    let again = back.predict(&test.x).unwrap();
    assert!(pred.iter().zip(&again).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs())));

    // Training features reproduce through the out-of-sample path.
    let g = model.features(&train.x, 0).unwrap();
    assert!(g.sub(&model.layers[0].features).unwrap().max_abs() < 1e-8 * (1.0 + g.max_abs()));

    let mc = KernelModelConfig {
        kind: KernelKind::MonteCarlo { activation: Activation::Relu, samples: 200_000, seed: 9 },
        ..cfg
    };
    let mc_model = fit_kernel_model(&train, &mc, &mut Rng::new(1)).unwrap();
    let cosine = |u: &[f64], v: &[f64]| dot(u, v).abs() / (dot(u, u) * dot(v, v)).sqrt();
    let (a, b) = (model.features(&test.x, 1).unwrap(), mc_model.features(&test.x, 1).unwrap());
    assert!(cosine(&a.col(0), &b.col(0)) > 0.95);
    // Layer-1 directions may rotate within a near-degenerate pair; compare spans.
    let overlap = representation_overlap(&a, &b).unwrap();
    assert!(overlap > 0.9, "span overlap {overlap}");
}

#[test]
fn conv_model_round_trip() {
    let (h, w, c) = (6, 6, 2);
    let mut rng = Rng::new(7);
    let x = rng.gaussian_matrix(400, h * w * c);
    let y = (0..400).map(|r| (0..h * w).map(|p| x[(r, p * c)] * x[(r, p * c + 1)]).sum::<f64>() / 9.0).collect();
    let ds = Dataset::new(x, y, "grid").unwrap();
    let specs = [LayerSpec::conv(16, 2, Activation::Relu, 3, true, false)];
    let model = fit_model_with(
        &ds,
        Some((h, w, c)),
        &specs,
        &ReadoutConfig::default(),
        Task::Regression,
        &mut Rng::new(1),
        &FitOptions::default(),
    )
    .unwrap();
    // Channel directions of a pure cross-channel product are (1, ±1)/√2.
    for k in 0..2 {
        let v = model.layers[0].projection.col(k);
        assert!((v[0].abs() - v[1].abs()).abs() < 0.1, "{v:?}");
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.lofi");
    model.save(&path).unwrap();
    let back = LofiModel::load(&path).unwrap();
    assert_eq!(back.predict(&ds.x).unwrap(), model.predict(&ds.x).unwrap());
    assert_eq!(back.input_grid, Some((h, w, c)));
}

#[test]
fn binary_task_thresholds_at_zero() {
    let mut rng = Rng::new(8);
    let x = rng.gaussian_matrix(1200, 8);
    let y = (0..1200).map(|r| if x[(r, 0)] * x[(r, 1)] > 0.0 { 1.0 } else { -1.0 }).collect();
    let (train, test) = split(&Dataset::new(x, y, "xor").unwrap(), 0.75, &mut rng).unwrap();
    let specs = [LayerSpec::dense(256, 3, Activation::Relu)];
    let model = fit_model_with(
        &train,
        None,
        &specs,
        &ReadoutConfig { lambda_grid: log_grid(1e-4, 1e2, 13), folds: 5 },
        Task::Binary,
        &mut Rng::new(2),
        &FitOptions::default(),
    )
    .unwrap();
    let labels = model.classify(&test.x).unwrap();
    assert!(labels.iter().all(|v| *v == 1.0 || *v == -1.0));
    assert!(zero_one_error(&labels, &test.y) < 0.2);
}

#[test]
fn csv_and_lfmt_datasets_agree() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    std::fs::write(&csv, "a,b,label\n1.5,-2,1\n0.25,3e-3,0\n-7,8,1\n").unwrap();
    let ds = load_dataset(&csv, true).unwrap();
    assert_eq!(ds.dim(), 2);
    assert_eq!(ds.y, vec![1.0, 0.0, 1.0]);
    let bin = dir.path().join("d.lfmt");
    save_dataset(&ds, &bin).unwrap();
    let back = load_dataset(&bin, false).unwrap();
    assert_eq!(back.x, ds.x);
    assert_eq!(back.y, ds.y);

    std::fs::write(&csv, "a,b,label\n1,2,3\n4,oops,6\n").unwrap();
    let err = load_dataset(&csv, true).unwrap_err();
    assert_eq!(err.category(), "format");
}
