//! Hierarchical teacher at d = 40: first-layer recovery before and after the
//! d^2.5 sample threshold.
use lofi::synth::{floor_pow, gen_teacher, rf_hierarchical_estimator, sample_synth, Link, RfConfig};
use lofi::Rng;

fn main() -> lofi::Result<()> {
    let d = 40;
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    for alpha in [1.5, 2.0, 2.5, 3.0] {
        for seed in 0..seeds {
            let t0 = std::time::Instant::now();
            let mut rng = Rng::new(seed);
            let teacher = gen_teacher(d, 0.5, Link::Tanh, &mut rng)?;
            let train = sample_synth(&teacher, floor_pow(d, alpha), &mut rng)?;
            let test = sample_synth(&teacher, 2000, &mut rng)?;
            let cfg = RfConfig::for_teacher(&teacher);
            let (_, m) = rf_hierarchical_estimator(&train, &test, &cfg, &mut rng.derive(9))?;
            let var = lofi::linalg::variance(&test.raw_labels());
            println!(
                "alpha={alpha} seed={seed} n={} overlap={:.3} mse={:.4} (var {:.4}) gap={:.3} top={:?} [{:.1}s]",
                train.dataset.len(), m.overlap, m.test_mse, var, m.gap_ratio,
                &m.spectrum[..8].iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
                t0.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
