//! Spectrum of the label-weighted moment operator: a planted quadratic
//! direction shows up as an outlier, and the matrix-free Lanczos path agrees
//! with the dense one.
//!
//! cargo run --release --example spectrum

use lofi::linalg::{dot, lanczos_topk, sym_eig_topk, LanczosOptions};
use lofi::lofi::{moment_apply, moment_operator};
use lofi::{EigMethod, Rng};

fn main() -> lofi::Result<()> {
    let (n, d) = (4000, 60);
    let mut rng = Rng::new(5);
    let x = rng.gaussian_matrix(n, d);
    let y: Vec<f64> = (0..n).map(|r| x[(r, 7)].powi(2) - 1.0 - 0.6 * (x[(r, 9)].powi(2) - 1.0)).collect();

    let c = moment_operator(&x, &y)?;
    let dense = sym_eig_topk(&c, 5, EigMethod::Dense)?;
    println!("top eigenvalues by |λ|: {:.4?}", dense.eigenvalues);
    for i in 0..2 {
        let v = dense.vector(i);
        let (k, w) = v.iter().enumerate().fold((0, 0.0f64), |b, (k, w)| if w.abs() > b.1.abs() { (k, *w) } else { b });
        println!("  direction {i}: heaviest coordinate {k} (weight {w:.3})");
    }

    // Same top-k without ever forming the d×d operator.
    let implicit = lanczos_topk(
        |v, out| moment_apply(&x, &y, v, out),
        d,
        5,
        LanczosOptions::default(),
    )?;
    let agree = (0..5).map(|i| dot(&implicit.vector(i), &dense.vector(i)).abs()).fold(1.0, f64::min);
    println!("matrix-free Lanczos: {:.4?}, min |<v, v_dense>| = {agree:.12}", implicit.eigenvalues);
    Ok(())
}
