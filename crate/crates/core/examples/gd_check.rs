//! One-step agreement between layerwise gradient descent and the spectral
//! prediction `η ā (c₀ û + c₁ Ĉ w)` as the initialization scale shrinks.
use lofi::gd::{gd_scaling_experiment, GdScalingConfig};

fn main() -> lofi::Result<()> {
    for remove_linear in [true, false] {
        let cfg = GdScalingConfig { remove_linear, ..GdScalingConfig::default() };
        let res = gd_scaling_experiment(&cfg, 0)?;
        println!("task without linear part: {remove_linear}");
        for (a, e) in res.alphas.iter().zip(&res.errors) {
            println!("  alpha={a:<8} mean relative error={e:.3e}");
        }
        let ratios: Vec<String> = res.ratios.iter().map(|r| format!("{r:.3}")).collect();
        println!("  err(a)/err(a/2) = [{}] -> {}", ratios.join(", "), if res.pass { "within band" } else { "outside band" });
    }
    Ok(())
}
