use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lofi::report::Report;

fn lofi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lofi")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lofi(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn synth(dir: &Path, name: &str, n: &str, seed: &str) -> String {
    let path = p(dir, name);
    ok(&["synth", "--out", &path, "--d", "8", "--n", n, "--seed", seed]);
    path
}

#[test]
fn fit_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let train = synth(dir.path(), "train.lfmt", "400", "1");
    let test = synth(dir.path(), "test.lfmt", "200", "2");
    let model = p(dir.path(), "m.lofi");
    let flags = ["--widths", "64,32", "--ranks", "4,3", "--activation", "relu", "--ridge-grid", "1e-4:1:9"];
    let mut args = vec!["fit", "--data", &train, "--test", &test, "--out", &model, "--seed", "5"];
    args.extend(flags);
    ok(&args);
    let report = Report::load(PathBuf::from(&model).with_extension("report")).unwrap();
    assert_eq!(report.command, "fit");
    assert_eq!(report.config["widths"], "64,32");
    let test_mse = report.metrics["test_mse"];

    let model2 = p(dir.path(), "m2.lofi");
    args[6] = &model2;
    ok(&args);
    assert_eq!(std::fs::read(&model).unwrap(), std::fs::read(&model2).unwrap());

    let preds = p(dir.path(), "pred.csv");
    ok(&["predict", "--data", &test, "--model", &model, "--out", &preds]);
    let pr = Report::load(PathBuf::from(&preds).with_extension("report")).unwrap();
    assert!((pr.metrics["data_mse"] - test_mse).abs() <= 1e-12 * test_mse.max(1.0));
    assert_eq!(std::fs::read_to_string(&preds).unwrap().lines().count(), 200);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let train = synth(dir.path(), "train.lfmt", "300", "3");
    let cfg = p(dir.path(), "run.cfg");
    std::fs::write(&cfg, "# widths from file\nwidths=48\nranks=3\ndepth=2\nactivation=relu\nridge-grid=1e-3,1e-1\n").unwrap();
    let model = p(dir.path(), "m.lofi");
    ok(&["fit", "--data", &train, "--out", &model, "--config", &cfg, "--ranks", "2"]);
    let report = Report::load(PathBuf::from(&model).with_extension("report")).unwrap();
    assert_eq!(report.config["widths"], "48");
    assert_eq!(report.config["ranks"], "2");
    let m = lofi::LofiModel::load(&model).unwrap();
    assert_eq!(m.depth(), 2);
    assert!(m.layers.iter().all(|l| l.rank() == 2 && l.width() == 48));
}

#[test]
fn kernel_spectrum_and_emergence() {
    let dir = tempfile::tempdir().unwrap();
    let train = synth(dir.path(), "train.lfmt", "150", "4");
    let kmodel = p(dir.path(), "k.lofi");
    ok(&["fit", "--data", &train, "--out", &kmodel, "--kernel", "relu_arccos", "--ranks", "3,2", "--seed", "1"]);
    ok(&["predict", "--data", &train, "--model", &kmodel]);

    let spec = p(dir.path(), "s.report");
    ok(&["spectrum", "--data", &train, "--out", &spec, "--top-k", "4"]);
    let r = Report::load(&spec).unwrap();
    let ev = &r.spectra[0].eigenvalues;
    assert_eq!(ev.len(), 8);
    assert!(ev.windows(2).all(|w| w[0].abs() >= w[1].abs()));

    let em = p(dir.path(), "e.report");
    ok(&["emergence", "--data", &train, "--out", &em, "--widths", "32", "--ranks", "3", "--depth", "1", "--k-max", "3"]);
    let r = Report::load(&em).unwrap();
    assert_eq!(r.emergence[0].entries.len(), 3);
}

#[test]
fn spike_synth_and_gdcheck() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "spikes.lfmt");
    let latents = p(dir.path(), "dirs.lfmt");
    ok(&["synth", "--out", &data, "--d", "12", "--n", "500", "--spikes", "1,0.5", "--latents", &latents]);
    let dirs = lofi::dataio::load_lfmt(&latents).unwrap();
    assert_eq!(dirs.shape(), (12, 2));
    let gd = p(dir.path(), "gd.report");
    ok(&["gdcheck", "--out", &gd, "--seeds", "1", "--alphas", "1e-2,5e-3"]);
    let r = Report::load(&gd).unwrap();
    assert_eq!(r.series["relative_errors"].len(), 2);
}

#[test]
fn errors_are_reported_with_exit_code() {
    let out = lofi(&["fit", "--data", "/nonexistent/data.lfmt", "--out", "/tmp/x.lofi"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[io]"));

    let dir = tempfile::tempdir().unwrap();
    let train = synth(dir.path(), "train.lfmt", "100", "1");
    let out = lofi(&["fit", "--data", &train, "--out", &p(dir.path(), "m.lofi"), "--activation", "swish"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());

    let out = lofi(&["frobnicate"]);
    assert!(!out.status.success());
}
