//! Predicted versus observed emergence of three planted quadratic spikes of
//! decreasing strength.
//!
//! cargo run --release --example emergence

use lofi::dataio::center_labels;
use lofi::emergence::{crossing_sample_size, eigvec_overlap, predict_thresholds};
use lofi::linalg::{log_grid, sym_eig_topk};
use lofi::lofi::moment_operator;
use lofi::synth::SpikeModel;
use lofi::{EigMethod, Rng};

fn main() -> lofi::Result<()> {
    let d = 30;
    let mut rng = Rng::new(1);
    let model = SpikeModel::new(d, &[1.0, 0.5, 0.25], &mut rng)?;
    let pool = model.sample(100_000, &mut rng)?;

    let c = moment_operator(&pool.x, &pool.y)?;
    let sigma = pool.x.t_matmul(&pool.x)?.scale(1.0 / pool.len() as f64);
    let report = predict_thresholds(&c, &sigma, 3)?;
    for e in &report.entries {
        println!(
            "k={}  rho={:.3}  r*={:.3}  D(r*)={:.2}  predicted n={:.1}",
            e.k,
            e.rho,
            e.r_star,
            e.d_eff,
            e.n_threshold.unwrap_or(f64::INFINITY)
        );
    }

    let ns: Vec<f64> = log_grid(10.0, 20_000.0, 25).into_iter().map(f64::round).collect();
    let draws = 10;
    let mut curves = vec![vec![0.0; ns.len()]; 3];
    for draw in 0..draws {
        let order = Rng::new(100 + draw).permutation(pool.len());
        for (i, &n) in ns.iter().enumerate() {
            let sub = center_labels(&pool.subset(&order[..n as usize]));
            let eig = sym_eig_topk(&moment_operator(&sub.x, &sub.y)?, 3, EigMethod::Dense)?;
            for (j, curve) in curves.iter_mut().enumerate() {
                curve[i] += eigvec_overlap(&eig.vector(j), &report.directions.col(j)) / draws as f64;
            }
        }
    }
    for (j, curve) in curves.iter().enumerate() {
        let n_half = crossing_sample_size(&ns, curve, 0.5);
        println!("k={}: overlap reaches 0.5 at n ≈ {:.0}", j + 1, n_half.unwrap_or(f64::NAN));
    }
    Ok(())
}
