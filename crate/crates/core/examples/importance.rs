//! Input-importance maps on an 8×8 single-channel "image" whose label
//! depends on two pixel blocks, with and without Fourier smoothing.
//!
//! cargo run --release --example importance

use lofi::dataio::Dataset;
use lofi::importance::{aggregate_importance, low_pass, DEFAULT_F0, DEFAULT_ORDER};
use lofi::lofi::fit_model;
use lofi::{Activation, LayerSpec, ReadoutConfig, Rng};

fn show(title: &str, map: &[f64]) {
    let top = map.iter().cloned().fold(f64::MIN, f64::max);
    println!("{title}");
    for row in map.chunks(8) {
        let line: String = row.iter().map(|v| [' ', '.', ':', '*', '#'][((v / top).max(0.0) * 4.0).round() as usize]).collect();
        println!("  |{line}|");
    }
}

fn main() -> lofi::Result<()> {
    let mut rng = Rng::new(2);
    let x = rng.gaussian_matrix(3000, 64);
    let block = |r: usize, i0: usize, j0: usize| -> f64 {
        (0..2).flat_map(|i| (0..2).map(move |j| (i0 + i) * 8 + j0 + j)).map(|k| x[(r, k)]).sum::<f64>() / 2.0
    };
    let y = (0..x.rows()).map(|r| block(r, 1, 1) * block(r, 5, 4)).collect();
    let ds = Dataset::new(x.clone(), y, "blocks")?;

    let specs = [LayerSpec::dense(256, 4, Activation::Relu), LayerSpec::dense(128, 3, Activation::Relu)];
    let model = fit_model(&ds, &specs, &ReadoutConfig::default(), &mut Rng::new(4))?;
    let probe = ds.subset(&(0..200).collect::<Vec<_>>()).x;

    for layer in 0..2 {
        let map = aggregate_importance(&model, &probe, layer)?;
        show(&format!("layer {layer}, raw"), &map);
        show(&format!("layer {layer}, low-passed"), &low_pass(&map, Some((8, 8, 1)), DEFAULT_F0, DEFAULT_ORDER)?);
    }
    Ok(())
}
