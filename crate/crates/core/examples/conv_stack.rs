//! Convolutional layer: the moment operator is pooled over grid locations, so
//! one pair of channel directions serves every location. A dense layer on the
//! flattened image sees 64 equally strong local directions and can keep only
//! a few of them.
//!
//! cargo run --release --example conv_stack

use lofi::dataio::{split, Dataset};
use lofi::lofi::{fit_model_with, mse, FitOptions};
use lofi::{Activation, LayerSpec, ReadoutConfig, Rng, Task};

fn main() -> lofi::Result<()> {
    let (h, w, c) = (8, 8, 2);
    let mut rng = Rng::new(6);
    let x = rng.gaussian_matrix(1200, h * w * c);
    // Products between the two channels at each pixel, summed over the grid.
    let y = (0..x.rows())
        .map(|r| (0..h * w).map(|p| x[(r, p * c)] * x[(r, p * c + 1)]).sum::<f64>() / 16.0)
        .collect();
    let (train, test) = split(&Dataset::new(x, y, "channels")?, 0.8, &mut rng)?;
    println!("label variance {:.4}", lofi::linalg::variance(&test.y));

    let runs = [
        ("conv 3x3, pooled", Some((h, w, c)), LayerSpec::conv(32, 2, Activation::Relu, 3, true, false)),
        ("dense on flat pixels", None, LayerSpec::dense(256, 4, Activation::Relu)),
    ];
    for (name, grid, spec) in runs {
        let model = fit_model_with(
            &train,
            grid,
            &[spec],
            &ReadoutConfig::default(),
            Task::Regression,
            &mut Rng::new(1),
            &FitOptions::default(),
        )?;
        let l0 = &model.layers[0];
        println!("{name}: eigenvalues {:.3?}", l0.spectral_eigenvalues());
        if grid.is_some() {
            println!("  channel directions {:.3?} and {:.3?}", l0.projection.col(0), l0.projection.col(1));
        }
        println!("  test mse {:.4}", mse(&model.predict(&test.x)?, &test.y));
    }
    Ok(())
}
