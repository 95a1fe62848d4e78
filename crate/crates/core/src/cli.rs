//! Command-line front end. Every verb resolves its settings from an optional
//! `key=value` config file overlaid with explicit flags, echoes them into the
//! report, and is deterministic given `seed`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::activation::Activation;
use crate::dataio::{load_dataset, save_dataset, save_lfmt, Container, Dataset};
use crate::emergence::predict_thresholds;
use crate::error::{invalid, LofiError, Result};
use crate::gd::{gd_scaling_experiment, GdScalingConfig};
use crate::kernel::{fit_kernel_model, KernelKind, KernelModel, KernelModelConfig};
use crate::linalg::{default_ridge_grid, log_grid, sym_eigenvalues_desc, DenseMatrix};
use crate::lofi::serialize::MODEL_KIND;
use crate::lofi::{
    fit_model_with, moment_operator, mse, zero_one_error, FitOptions, LayerSpec, LofiModel, ReadoutConfig, Task,
};
use crate::report::{load_config, EmergenceRow, LayerEmergence, LayerSpectrum, Report};
use crate::rng::Rng;
use crate::synth::{floor_pow, gen_teacher, sample_synth, Link, SpikeModel};

/// Layers wider than this get only their selected eigenvalues in fit reports.
pub const FULL_SPECTRUM_MAX_DIM: usize = 1024;

#[derive(Debug, Parser)]
#[command(name = "lofi", version, about = "Layerwise spectral feature learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a spectral or kernel model and write it with a report.
    Fit(FitArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Spectrum of the label-weighted moment operator at one layer.
    Spectrum(SpectrumArgs),
    /// Predicted sample sizes for feature emergence along a fitted chain.
    Emergence(EmergenceArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Check the one-step gradient-descent approximation.
    Gdcheck(GdcheckArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Input dataset (.csv or LFMT; last column is the label).
    #[arg(long)]
    pub data: Option<String>,
    /// Output path.
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Flat key=value file; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ModelFlags {
    #[arg(long)]
    pub depth: Option<String>,
    /// Comma-separated layer widths (a single value is repeated).
    #[arg(long)]
    pub widths: Option<String>,
    /// Comma-separated spectral ranks (a single value is repeated).
    #[arg(long)]
    pub ranks: Option<String>,
    #[arg(long)]
    pub activation: Option<String>,
    /// `relu_arccos` or `monte_carlo:<activation>:<samples>[:<seed>]`.
    #[arg(long)]
    pub kernel: Option<String>,
    /// `lo:hi:count` (log-spaced) or a comma-separated list.
    #[arg(long)]
    pub ridge_grid: Option<String>,
    /// `regression` or `binary`.
    #[arg(long)]
    pub task: Option<String>,
    /// Prepend the normalized linear direction at every layer.
    #[arg(long)]
    pub linear: Option<String>,
    /// `HxWxC` layout of the inputs, needed by conv layers.
    #[arg(long)]
    pub input_grid: Option<String>,
    /// Number of leading conv layers.
    #[arg(long)]
    pub conv_layers: Option<String>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelFlags,
    /// Held-out dataset for test metrics.
    #[arg(long)]
    pub test: Option<String>,
    /// Report path (defaults to the model path with a .report extension).
    #[arg(long)]
    pub report: Option<String>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: Common,
    /// Fitted model whose representation is analysed; raw inputs otherwise.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub layer: Option<String>,
    #[arg(long)]
    pub top_k: Option<String>,
}

#[derive(Debug, Args)]
pub struct EmergenceArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub k_max: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Input dimension.
    #[arg(long)]
    pub d: Option<String>,
    #[arg(long)]
    pub epsilon: Option<String>,
    /// Sample count; alternatively `--alpha` for `n = ⌊d^α⌋`.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    /// `tanh` or `identity`.
    #[arg(long)]
    pub link: Option<String>,
    /// Comma-separated spike strengths; switches to the planted-spike model.
    #[arg(long)]
    pub spikes: Option<String>,
    /// Also write the hidden variables `[H1 | h2]` as LFMT.
    #[arg(long)]
    pub latents: Option<String>,
}

#[derive(Debug, Args)]
pub struct GdcheckArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated initialization scales.
    #[arg(long)]
    pub alphas: Option<String>,
    #[arg(long)]
    pub seeds: Option<String>,
}

/// Effective configuration: file values overlaid with explicit flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    map: BTreeMap<String, String>,
}

impl Settings {
    pub fn resolve(config: Option<&Path>, flags: Vec<(&str, Option<String>)>) -> Result<Self> {
        let mut map = match config {
            Some(p) => load_config(p)?,
            None => BTreeMap::new(),
        };
        for (k, v) in flags {
            if let Some(v) = v {
                map.insert(k.to_string(), v);
            }
        }
        Ok(Self { map })
    }

    pub fn from_map(map: BTreeMap<String, String>) -> Self {
        Self { map }
    }

    pub fn map(&self) -> &BTreeMap<String, String> {
        &self.map
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| LofiError::InvalidInput(format!("missing required setting --{}", key.replace('_', "-"))))
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        match self.get(key) {
            Some(v) => v.parse().map_err(|e| LofiError::InvalidInput(format!("bad value {v:?} for {key}: {e}"))),
            None => Ok(default),
        }
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.get(key).map(|v| v.parse().map_err(|e| LofiError::InvalidInput(format!("bad value {v:?} for {key}: {e}")))).transpose()
    }

    pub fn seed(&self) -> Result<u64> {
        self.parse_or("seed", 0)
    }
}

fn common_pairs(c: &Common) -> Vec<(&'static str, Option<String>)> {
    vec![("data", c.data.clone()), ("out", c.out.clone()), ("seed", c.seed.clone())]
}

fn model_pairs(m: &ModelFlags) -> Vec<(&'static str, Option<String>)> {
    vec![
        ("depth", m.depth.clone()),
        ("widths", m.widths.clone()),
        ("ranks", m.ranks.clone()),
        ("activation", m.activation.clone()),
        ("kernel", m.kernel.clone()),
        ("ridge_grid", m.ridge_grid.clone()),
        ("task", m.task.clone()),
        ("linear", m.linear.clone()),
        ("input_grid", m.input_grid.clone()),
        ("conv_layers", m.conv_layers.clone()),
    ]
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|v| v.trim().parse().map_err(|_| LofiError::InvalidInput(format!("bad {what} entry {v:?}"))))
        .collect()
}

/// `lo:hi:count` for a log-spaced grid, otherwise a comma-separated list.
pub fn parse_ridge_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if let [lo, hi, count] = parts.as_slice() {
        let bad = || LofiError::InvalidInput(format!("bad ridge grid {s:?}"));
        let (lo, hi): (f64, f64) = (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?);
        let count: usize = count.parse().map_err(|_| bad())?;
        if !(lo > 0.0 && hi >= lo && count >= 1) {
            return Err(bad());
        }
        return Ok(log_grid(lo, hi, count));
    }
    parse_list(s, "ridge grid")
}

fn broadcast(values: Vec<usize>, depth: usize, what: &str) -> Result<Vec<usize>> {
    match values.len() {
        1 => Ok(vec![values[0]; depth]),
        n if n == depth => Ok(values),
        n => invalid(format!("{n} {what} given for depth {depth}")),
    }
}

/// Layer specs, conv grid and task resolved from the settings.
pub fn model_specs(s: &Settings) -> Result<(Vec<LayerSpec>, Option<(usize, usize, usize)>, Task)> {
    let widths: Option<Vec<usize>> = s.get("widths").map(|w| parse_list(w, "width")).transpose()?;
    let depth = s.parse_or("depth", widths.as_ref().map_or(1, Vec::len))?;
    let widths = broadcast(widths.unwrap_or_else(|| vec![256]), depth.max(1), "widths")?;
    let ranks = broadcast(s.get("ranks").map(|r| parse_list(r, "rank")).transpose()?.unwrap_or_else(|| vec![8]), depth.max(1), "ranks")?;
    let activation: Activation = s.get("activation").unwrap_or("relu").parse()?;
    let linear = s.parse_or("linear", false)?;
    let conv_layers: usize = s.parse_or("conv_layers", 0)?;
    let grid = s.get("input_grid").map(crate::lofi::serialize::parse_grid3).transpose()?;
    if conv_layers > 0 && grid.is_none() {
        return invalid("conv layers need --input-grid HxWxC");
    }
    if conv_layers > depth {
        return invalid(format!("{conv_layers} conv layers exceed depth {depth}"));
    }
    let kernel_size = s.parse_or("kernel_size", 3)?;
    let pool = s.parse_or("pool", false)?;
    let l2_norm = s.parse_or("l2_norm", false)?;
    let specs = (0..depth)
        .map(|l| {
            let spec = if l < conv_layers {
                LayerSpec::conv(widths[l], ranks[l], activation, kernel_size, pool, l2_norm)
            } else {
                LayerSpec::dense(widths[l], ranks[l], activation)
            };
            spec.with_linear(linear)
        })
        .collect();
    let task: Task = s.get("task").unwrap_or("regression").parse()?;
    Ok((specs, grid, task))
}

fn readout_config(s: &Settings) -> Result<ReadoutConfig> {
    Ok(ReadoutConfig {
        lambda_grid: s.get("ridge_grid").map(parse_ridge_grid).transpose()?.unwrap_or_else(default_ridge_grid),
        folds: s.parse_or("folds", 5)?,
    })
}

fn kernel_kind(spec: &str, seed: u64) -> Result<KernelKind> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["monte_carlo", a, n] | ["mc", a, n] => KernelKind::parse(&format!("monte_carlo:{a}:{n}:{seed}")),
        ["mc", a, n, sd] => KernelKind::parse(&format!("monte_carlo:{a}:{n}:{sd}")),
        _ => KernelKind::parse(spec),
    }
}

fn with_extension(path: &str, ext: &str) -> PathBuf {
    Path::new(path).with_extension(ext)
}

fn load_data(s: &Settings, key: &str) -> Result<Dataset> {
    load_dataset(s.require(key)?, s.parse_or("skip_header", false)?)
}

fn echo(s: &Settings) -> BTreeMap<String, String> {
    s.map().clone()
}

/// Either kind of saved model.
pub enum AnyModel {
    Lofi(LofiModel),
    Kernel(KernelModel),
}

impl AnyModel {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let c = Container::load(path)?;
        if c.kind() == MODEL_KIND {
            Ok(AnyModel::Lofi(LofiModel::from_container(&c)?))
        } else {
            Ok(AnyModel::Kernel(KernelModel::from_container(&c)?))
        }
    }

    /// Real-valued predictions, or ±1 labels for binary lofi models.
    pub fn predict(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        match self {
            AnyModel::Lofi(m) if m.task == Task::Binary => m.classify(x),
            AnyModel::Lofi(m) => m.predict(x),
            AnyModel::Kernel(m) => m.predict(x),
        }
    }
}

fn label_metrics(report: &mut Report, prefix: &str, pred: &[f64], y: &[f64], binary: bool) {
    report.metric(&format!("{prefix}_mse"), mse(pred, y));
    if binary {
        report.metric(&format!("{prefix}_zero_one"), zero_one_error(pred, y));
    }
}

fn centered(y: &[f64]) -> Vec<f64> {
    let m = crate::linalg::mean(y);
    y.iter().map(|v| v - m).collect()
}

fn layer_spectrum(z: &DenseMatrix, y: &[f64], layer: usize, top_k: usize) -> Result<LayerSpectrum> {
    let c = moment_operator(z, &centered(y))?;
    Ok(LayerSpectrum::new(layer, &sym_eigenvalues_desc(&c)?, top_k))
}

pub fn cmd_fit(s: &Settings) -> Result<Report> {
    let t0 = Instant::now();
    let seed = s.seed()?;
    let train = load_data(s, "data")?;
    let out = s.require("out")?.to_string();
    let mut report = Report::new("fit", seed, echo(s));
    let mut rng = Rng::new(seed);
    let binary;
    let train_pred;
    let mut test_pred = None;
    let test = s.get("test").map(|p| load_dataset(p, s.parse_or("skip_header", false)?)).transpose()?;
    if let Some(kspec) = s.get("kernel") {
        let ranks = parse_list(s.get("ranks").unwrap_or("8"), "rank")?;
        let mut cfg = KernelModelConfig::new(ranks);
        cfg.kind = kernel_kind(kspec, seed)?;
        if let Some(g) = s.get("ridge_grid") {
            cfg.lambda_grid = parse_ridge_grid(g)?;
        }
        cfg.folds = s.parse_or("folds", 5)?;
        cfg.normalize = s.parse_or("normalize", true)?;
        let model = fit_kernel_model(&train, &cfg, &mut rng)?;
        model.save(&out)?;
        binary = false;
        train_pred = model.predict(&train.x)?;
        if let Some(t) = &test {
            test_pred = Some(model.predict(&t.x)?);
        }
        for (l, layer) in model.layers.iter().enumerate() {
            report.spectra.push(LayerSpectrum::new(l, &layer.eigenvalues, layer.eigenvalues.len()));
        }
        report.metric("lambda", model.lambda);
        report.series.insert("cv_errors".into(), model.cv_errors.clone());
    } else {
        let (specs, grid, task) = model_specs(s)?;
        let readout = readout_config(s)?;
        let model = fit_model_with(&train, grid, &specs, &readout, task, &mut rng, &FitOptions::default())?;
        model.save(&out)?;
        binary = task == Task::Binary;
        let any = AnyModel::Lofi(model);
        train_pred = any.predict(&train.x)?;
        if let Some(t) = &test {
            test_pred = Some(any.predict(&t.x)?);
        }
        let AnyModel::Lofi(model) = any else { unreachable!() };
        let reps = model.representations(&train.x)?;
        for (l, layer) in model.layers.iter().enumerate() {
            let z = &reps[l];
            let k = layer.spectral_eigenvalues().len();
            if z.cols() <= s.parse_or("full_spectrum_max_dim", FULL_SPECTRUM_MAX_DIM)? {
                report.spectra.push(layer_spectrum(z, &train.y, l, k)?);
            } else {
                report.spectra.push(LayerSpectrum::new(l, layer.spectral_eigenvalues(), k));
                report.note(format!("layer {l}: dimension {} too large for a full spectrum; selected eigenvalues only", z.cols()));
            }
            if layer.rank_deficient {
                report.note(format!("layer {l}: rank deficient"));
            }
        }
        report.metric("lambda", model.lambda);
        report.metric("depth", model.depth() as f64);
        report.series.insert("cv_errors".into(), model.cv_errors.clone());
    }
    label_metrics(&mut report, "train", &train_pred, &train.y, binary);
    if let (Some(t), Some(p)) = (&test, &test_pred) {
        label_metrics(&mut report, "test", p, &t.y, binary);
    }
    report.timings.insert("total_seconds".into(), t0.elapsed().as_secs_f64());
    report.note(format!("model written to {out}"));
    let path = s.get("report").map(PathBuf::from).unwrap_or_else(|| with_extension(&out, "report"));
    report.save(path)?;
    Ok(report)
}

pub fn cmd_predict(s: &Settings) -> Result<Report> {
    let t0 = Instant::now();
    let model = AnyModel::load(s.require("model")?)?;
    let data = load_data(s, "data")?;
    let pred = model.predict(&data.x)?;
    let mut report = Report::new("predict", s.seed()?, echo(s));
    let binary = matches!(&model, AnyModel::Lofi(m) if m.task == Task::Binary);
    label_metrics(&mut report, "data", &pred, &data.y, binary);
    report.metric("rows", pred.len() as f64);
    if let Some(out) = s.get("out") {
        let mut w = csv::Writer::from_path(out).map_err(|e| LofiError::InvalidInput(e.to_string()))?;
        for p in &pred {
            w.write_record([p.to_string()]).map_err(|e| LofiError::InvalidInput(e.to_string()))?;
        }
        w.flush()?;
        report.timings.insert("total_seconds".into(), t0.elapsed().as_secs_f64());
        report.save(with_extension(out, "report"))?;
    }
    report.series.insert("predictions".into(), pred);
    Ok(report)
}

pub fn cmd_spectrum(s: &Settings) -> Result<Report> {
    let data = load_data(s, "data")?;
    let layer: usize = s.parse_or("layer", 0)?;
    let mut top_k: usize = s.parse_or("top_k", 5)?;
    let mut report = Report::new("spectrum", s.seed()?, echo(s));
    let z = match s.get("model") {
        Some(p) => match AnyModel::load(p)? {
            AnyModel::Lofi(m) => {
                let mut reps = m.representations(&data.x)?;
                if layer >= reps.len() {
                    return invalid(format!("layer {layer} outside 0..={}", m.depth()));
                }
                reps.swap_remove(layer)
            }
            AnyModel::Kernel(_) => return invalid("spectrum needs a spectral model, not a kernel model"),
        },
        None if layer == 0 => data.x.clone(),
        None => return invalid("layers above 0 need --model"),
    };
    if top_k > z.cols() {
        report.note(format!("warning: top_k {top_k} clipped to dimension {}", z.cols()));
        eprintln!("warning: top_k {top_k} clipped to dimension {}", z.cols());
        top_k = z.cols();
    }
    report.spectra.push(layer_spectrum(&z, &data.y, layer, top_k)?);
    if let Some(out) = s.get("out") {
        report.save(out)?;
    }
    Ok(report)
}

pub fn cmd_emergence(s: &Settings) -> Result<Report> {
    let t0 = Instant::now();
    let seed = s.seed()?;
    let data = load_data(s, "data")?;
    let k_max: usize = s.parse_or("k_max", 5)?;
    let mut report = Report::new("emergence", seed, echo(s));
    let (specs, grid, task) = model_specs(s)?;
    let mut specs = specs;
    if s.parse_or::<usize>("depth", 1)? == 0 {
        specs.clear();
    }
    let model = fit_model_with(&data, grid, &specs, &readout_config(s)?, task, &mut Rng::new(seed), &FitOptions::default())?;
    let reps = model.representations(&data.x)?;
    let y = centered(&data.y);
    let n = data.len() as f64;
    for (l, z) in reps.iter().enumerate().take(specs.len().max(1)) {
        let c = moment_operator(z, &y)?;
        let sigma = z.t_matmul(z)?.scale(1.0 / n);
        let k = k_max.min(z.cols());
        if k < k_max {
            report.note(format!("layer {l}: k_max clipped to {k}"));
        }
        let rep = predict_thresholds(&c, &sigma, k)?;
        report.emergence.push(LayerEmergence { layer: l, entries: rep.entries.iter().map(EmergenceRow::from).collect() });
    }
    report.metric("samples", n);
    report.timings.insert("total_seconds".into(), t0.elapsed().as_secs_f64());
    if let Some(out) = s.get("out") {
        report.save(out)?;
    }
    Ok(report)
}

pub fn cmd_synth(s: &Settings) -> Result<Report> {
    let seed = s.seed()?;
    let out = s.require("out")?.to_string();
    let d: usize = s.parse_or("d", 40)?;
    let mut report = Report::new("synth", seed, echo(s));
    let n = match (s.parse_opt::<usize>("n")?, s.parse_opt::<f64>("alpha")?) {
        (Some(n), _) => n,
        (None, Some(a)) => floor_pow(d, a),
        (None, None) => return invalid("synth needs --n or --alpha"),
    };
    let mut rng = Rng::new(seed);
    let ds = if let Some(spikes) = s.get("spikes") {
        let coeffs: Vec<f64> = parse_list(spikes, "spike")?;
        let model = SpikeModel::new(d, &coeffs, &mut rng)?;
        if let Some(p) = s.get("latents") {
            save_lfmt(&model.directions, p)?;
        }
        model.sample(n, &mut rng)?
    } else {
        let epsilon: f64 = s.parse_or("epsilon", 0.5)?;
        let link: Link = s.get("link").unwrap_or("tanh").parse()?;
        let teacher = gen_teacher(d, epsilon, link, &mut rng)?;
        let sample = sample_synth(&teacher, n, &mut rng)?;
        report.metric("d1", teacher.d1 as f64);
        report.metric("label_mean", sample.label_mean);
        if let Some(p) = s.get("latents") {
            save_lfmt(&sample.h1.hstack(&DenseMatrix::column(&sample.h2))?, p)?;
        }
        sample.dataset
    };
    save_dataset(&ds, &out)?;
    report.metric("n", ds.len() as f64);
    report.metric("d", d as f64);
    report.save(with_extension(&out, "report"))?;
    Ok(report)
}

pub fn cmd_gdcheck(s: &Settings) -> Result<Report> {
    let t0 = Instant::now();
    let seed = s.seed()?;
    let mut cfg = GdScalingConfig::default();
    if let Some(a) = s.get("alphas") {
        cfg.alphas = parse_list(a, "alpha")?;
    }
    cfg.seeds = s.parse_or("seeds", cfg.seeds)?;
    cfg.samples = s.parse_or("samples", cfg.samples)?;
    cfg.remove_linear = s.parse_or("remove_linear", cfg.remove_linear)?;
    let res = gd_scaling_experiment(&cfg, seed)?;
    let mut report = Report::new("gdcheck", seed, echo(s));
    report.series.insert("alphas".into(), res.alphas.clone());
    report.series.insert("relative_errors".into(), res.errors.clone());
    report.series.insert("error_ratios".into(), res.ratios.clone());
    report.metric("pass", f64::from(u8::from(res.pass)));
    report.note(format!(
        "err(alpha)/err(alpha/2) must lie in [{}, {}]: {}",
        cfg.band.0,
        cfg.band.1,
        if res.pass { "pass" } else { "fail" }
    ));
    report.timings.insert("total_seconds".into(), t0.elapsed().as_secs_f64());
    if let Some(out) = s.get("out") {
        report.save(out)?;
    }
    Ok(report)
}

/// Resolves settings for a parsed command and runs it.
pub fn execute(cmd: &Command) -> Result<Report> {
    let resolve = |c: &Common, mut extra: Vec<(&'static str, Option<String>)>| {
        let mut flags = common_pairs(c);
        flags.append(&mut extra);
        Settings::resolve(c.config.as_deref(), flags)
    };
    match cmd {
        Command::Fit(a) => {
            let mut extra = model_pairs(&a.model);
            extra.push(("test", a.test.clone()));
            extra.push(("report", a.report.clone()));
            cmd_fit(&resolve(&a.common, extra)?)
        }
        Command::Predict(a) => cmd_predict(&resolve(&a.common, vec![("model", a.model.clone())])?),
        Command::Spectrum(a) => cmd_spectrum(&resolve(
            &a.common,
            vec![("model", a.model.clone()), ("layer", a.layer.clone()), ("top_k", a.top_k.clone())],
        )?),
        Command::Emergence(a) => {
            let mut extra = model_pairs(&a.model);
            extra.push(("k_max", a.k_max.clone()));
            cmd_emergence(&resolve(&a.common, extra)?)
        }
        Command::Synth(a) => cmd_synth(&resolve(
            &a.common,
            vec![
                ("d", a.d.clone()),
                ("epsilon", a.epsilon.clone()),
                ("n", a.n.clone()),
                ("alpha", a.alpha.clone()),
                ("link", a.link.clone()),
                ("spikes", a.spikes.clone()),
                ("latents", a.latents.clone()),
            ],
        )?),
        Command::Gdcheck(a) => {
            cmd_gdcheck(&resolve(&a.common, vec![("alphas", a.alphas.clone()), ("seeds", a.seeds.clone())])?)
        }
    }
}

fn summary(r: &Report) -> String {
    let metrics: Vec<String> = r.metrics.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let mut line = format!("{}: {}", r.command, metrics.join(" "));
    if r.command == "spectrum" || r.command == "emergence" || r.command == "gdcheck" {
        line.push('\n');
        line.push_str(&r.to_json().unwrap_or_default());
    }
    line
}

/// Full entry point: parses `args`, runs, prints a summary. Returns the
/// process exit code; failures print `error[<category>]: <message>`.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(r) => {
            use std::io::Write;
            // A closed pipe (e.g. `| head`) is not a failure of the command.
            let _ = writeln!(std::io::stdout(), "{}", summary(&r));
            0
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(&cfg, "widths=64\nseed=4\nranks=3\n").unwrap();
        let s = Settings::resolve(Some(&cfg), vec![("seed", Some("9".into())), ("depth", None)]).unwrap();
        assert_eq!(s.get("widths"), Some("64"));
        assert_eq!(s.seed().unwrap(), 9);
        assert!(s.require("data").is_err());
    }

    #[test]
    fn spec_resolution() {
        let s = Settings::from_map([("widths".to_string(), "32,16".to_string()), ("ranks".to_string(), "4".to_string())].into());
        let (specs, grid, task) = model_specs(&s).unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!((specs[1].width, specs[1].rank), (16, 4));
        assert_eq!((grid, task), (None, Task::Regression));
        let zero = Settings::from_map([("depth".to_string(), "0".to_string())].into());
        assert!(model_specs(&zero).unwrap().0.is_empty());
        let bad = Settings::from_map([("widths".to_string(), "8,8,8".to_string()), ("depth".to_string(), "2".to_string())].into());
        assert!(model_specs(&bad).is_err());
        let conv = Settings::from_map([("conv_layers".to_string(), "1".to_string())].into());
        assert!(model_specs(&conv).is_err());
    }

    #[test]
    fn ridge_grids() {
        assert_eq!(parse_ridge_grid("1e-2:1:3").unwrap().len(), 3);
        assert_eq!(parse_ridge_grid("0.1,1,10").unwrap(), vec![0.1, 1.0, 10.0]);
        assert!(parse_ridge_grid("1:0.1:3").is_err());
        assert!(parse_ridge_grid("a,b").is_err());
        assert_eq!(kernel_kind("mc:relu:100", 5).unwrap().tag(), "monte_carlo:relu:100:5");
    }

    #[test]
    fn bad_arguments_exit_nonzero() {
        assert_ne!(main_with_args(["lofi", "nosuch"]), 0);
        assert_eq!(main_with_args(["lofi", "fit", "--out", "/nonexistent/x"]), 1);
    }
}
