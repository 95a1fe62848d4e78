//! Fit a two-layer spectral model, inspect what each layer selected, save it
//! and predict with the reloaded copy.
//!
//! cargo run --release --example fit_predict

use lofi::dataio::{split, Dataset};
use lofi::lofi::{fit_model, mse};
use lofi::{Activation, LayerSpec, LofiModel, ReadoutConfig, Rng};

fn main() -> lofi::Result<()> {
    let mut rng = Rng::new(3);
    let x = rng.gaussian_matrix(1500, 12);
    let y = (0..x.rows())
        .map(|r| {
            let v = x.row(r);
            (v[0] * v[1] + v[2] * v[3]).tanh() + 0.5 * v[4] + 0.05 * rng.normal()
        })
        .collect();
    let ds = Dataset::new(x, y, "toy")?;
    let (train, test) = split(&ds, 0.8, &mut rng)?;

    let specs = [
        LayerSpec::dense(256, 6, Activation::Relu).with_linear(true),
        LayerSpec::dense(128, 4, Activation::Relu),
    ];
    // Labels are centered internally; the mean comes back as the offset.
    let model = fit_model(&train, &specs, &ReadoutConfig::default(), &mut Rng::new(11))?;
    for (l, layer) in model.layers.iter().enumerate() {
        let linear = if layer.has_linear { " plus the linear direction" } else { "" };
        println!("layer {l}: eigenvalues {:.3?}{linear}", layer.spectral_eigenvalues());
    }
    println!("readout lambda {:.2e}", model.lambda);

    let pred = model.predict(&test.x)?;
    let baseline = lofi::linalg::variance(&test.y);
    println!("test mse {:.4} (label variance {baseline:.4})", mse(&pred, &test.y));

    let path = std::env::temp_dir().join("fit_predict_example.lofi");
    model.save(&path)?;
    let back = LofiModel::load(&path)?;
    let again = back.predict(&test.x)?;
    let drift = pred.iter().zip(&again).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("reloaded from {}: max prediction drift {drift:e}", path.display());
    Ok(())
}
