//! The command layer driven in-process: a config file plus flag overrides,
//! and the JSON report each command leaves behind.
//!
//! cargo run --release --example cli_reports

use clap::Parser;
use lofi::cli::{execute, Cli};
use lofi::report::{parse_config, Report};

fn run(args: &[&str]) -> lofi::Result<Report> {
    let cli = Cli::try_parse_from(std::iter::once("lofi").chain(args.iter().copied()))
        .map_err(|e| lofi::LofiError::InvalidInput(e.to_string()))?;
    execute(&cli.command)
}

fn main() -> lofi::Result<()> {
    let dir = std::env::temp_dir().join("lofi_cli_reports");
    std::fs::create_dir_all(&dir)?;
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();

    run(&["synth", "--out", &p("train.lfmt"), "--d", "10", "--n", "600", "--seed", "1"])?;
    run(&["synth", "--out", &p("test.lfmt"), "--d", "10", "--n", "300", "--seed", "2"])?;

    std::fs::write(p("run.cfg"), "widths=128,64\nranks=4,3\nactivation=relu\nridge-grid=1e-4:10:15\nseed=7\n")?;
    let fit = run(&[
        "fit", "--config", &p("run.cfg"), "--ranks", "5,3",
        "--data", &p("train.lfmt"), "--test", &p("test.lfmt"), "--out", &p("model.lofi"),
    ])?;
    println!("fit metrics: {:?}", fit.metrics);

    // The echoed config reproduces the run when fed back through --config.
    let echoed = parse_config(&fit.config_text())?;
    println!("effective ranks={} widths={} seed={}", echoed["ranks"], echoed["widths"], echoed["seed"]);

    let saved = Report::load(p("model.report"))?;
    println!("saved report: schema {}, {} spectra, timings {:?}", saved.schema_version, saved.spectra.len(), saved.timings);

    let spec = run(&["spectrum", "--data", &p("train.lfmt"), "--model", &p("model.lofi"), "--layer", "1", "--top-k", "3"])?;
    println!("layer-1 leading eigenvalues: {:.4?}", &spec.spectra[0].eigenvalues[..3]);

    match run(&["predict", "--data", &p("missing.lfmt"), "--model", &p("model.lofi")]) {
        Ok(_) => println!("unexpected success"),
        Err(e) => println!("missing input reported as error[{}]: {e}", e.category()),
    }
    Ok(())
}
