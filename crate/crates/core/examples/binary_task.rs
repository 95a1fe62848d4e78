//! ±1 labels: the readout is fit by ridge on the labels and thresholded at 0.
//!
//! cargo run --release --example binary_task

use lofi::dataio::{split, Dataset};
use lofi::lofi::{fit_model_with, zero_one_error, FitOptions};
use lofi::{Activation, LayerSpec, ReadoutConfig, Rng, Task};

fn main() -> lofi::Result<()> {
    let mut rng = Rng::new(8);
    let x = rng.gaussian_matrix(2000, 10);
    // Parity-like target: invisible to any linear feature, visible to Ĉ.
    let y = (0..x.rows()).map(|r| if x[(r, 0)] * x[(r, 1)] > 0.0 { 1.0 } else { -1.0 }).collect();
    let (train, test) = split(&Dataset::new(x, y, "xor")?, 0.75, &mut rng)?;

    for depth in [1, 2] {
        let specs: Vec<LayerSpec> = (0..depth).map(|_| LayerSpec::dense(256, 4, Activation::Relu)).collect();
        let model = fit_model_with(
            &train,
            None,
            &specs,
            &ReadoutConfig::default(),
            Task::Binary,
            &mut Rng::new(1),
            &FitOptions::default(),
        )?;
        let err = zero_one_error(&model.classify(&test.x)?, &test.y);
        println!("depth {depth}: test 0-1 error {err:.3}");
    }
    Ok(())
}
