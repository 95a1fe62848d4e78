//! Schema-versioned run reports and the flat `key=value` config format.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::emergence::EmergenceEntry;
use crate::error::{invalid, io_at, LofiError, Result};
use crate::linalg::magnitude_order;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpectrum {
    pub layer: usize,
    /// Eigenvalues ordered by decreasing magnitude.
    pub eigenvalues: Vec<f64>,
    /// Positions (into `eigenvalues`) of the flagged top-|λ| values.
    pub top: Vec<usize>,
}

impl LayerSpectrum {
    /// Orders `values` by magnitude and flags the first `top_k` (clipped).
    pub fn new(layer: usize, values: &[f64], top_k: usize) -> Self {
        let order = magnitude_order(values);
        let eigenvalues: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        let top = (0..top_k.min(eigenvalues.len())).collect();
        Self { layer, eigenvalues, top }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEmergence {
    pub layer: usize,
    pub entries: Vec<EmergenceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmergenceRow {
    pub k: usize,
    pub rho: f64,
    pub r_star: f64,
    pub d_eff: f64,
    pub n_threshold: Option<f64>,
}

impl From<&EmergenceEntry> for EmergenceRow {
    fn from(e: &EmergenceEntry) -> Self {
        Self { k: e.k, rho: e.rho, r_star: e.r_star, d_eff: e.d_eff, n_threshold: e.n_threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub library_version: String,
    pub seed: u64,
    /// Effective configuration, exactly as resolved from file and flags.
    pub config: BTreeMap<String, String>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default)]
    pub spectra: Vec<LayerSpectrum>,
    #[serde(default)]
    pub emergence: Vec<LayerEmergence>,
    #[serde(default)]
    pub series: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub timings: BTreeMap<String, f64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(command: &str, seed: u64, config: BTreeMap<String, String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            library_version: crate::VERSION.to_string(),
            seed,
            config,
            metrics: BTreeMap::new(),
            spectra: Vec::new(),
            emergence: Vec::new(),
            series: BTreeMap::new(),
            timings: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Every number in the report must be finite.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                invalid(format!("report value {what} is not finite ({v})"))
            }
        };
        for (k, v) in self.metrics.iter().chain(&self.timings) {
            bad(k, *v)?;
        }
        for (k, vs) in &self.series {
            vs.iter().try_for_each(|v| bad(k, *v))?;
        }
        for s in &self.spectra {
            s.eigenvalues.iter().try_for_each(|v| bad("spectrum", *v))?;
        }
        for e in &self.emergence {
            for row in &e.entries {
                [row.rho, row.r_star, row.d_eff].iter().chain(row.n_threshold.as_ref()).try_for_each(|v| bad("emergence", *v))?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Report = serde_json::from_str(text)?;
        if r.schema_version != SCHEMA_VERSION {
            return invalid(format!("unsupported report schema {}", r.schema_version));
        }
        Ok(r)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(io_at(path))?)
    }

    /// The echoed config in the `key=value` format accepted by `--config`.
    pub fn config_text(&self) -> String {
        render_config(&self.config)
    }
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(LofiError::InvalidInput(format!("config line {}: expected key=value, got {line:?}", i + 1)));
        };
        let key = k.trim();
        if key.is_empty() {
            return invalid(format!("config line {}: empty key", i + 1));
        }
        out.insert(key.replace('-', "_"), v.trim().to_string());
    }
    Ok(out)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    let path = path.as_ref();
    parse_config(&fs::read_to_string(path).map_err(io_at(path))?)
}

pub fn render_config(map: &BTreeMap<String, String>) -> String {
    map.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let text = "# run\nwidths = 64,32\n\nseed=3\nridge-grid=1e-3:1:5\n";
        let map = parse_config(text).unwrap();
        assert_eq!(map["widths"], "64,32");
        assert_eq!(map["ridge_grid"], "1e-3:1:5");
        assert_eq!(parse_config(&render_config(&map)).unwrap(), map);
        assert!(parse_config("novalue\n").is_err());
        assert!(parse_config("=3\n").is_err());
    }

    #[test]
    fn report_json_round_trip() {
        let mut r = Report::new("fit", 7, parse_config("a=1").unwrap());
        r.metric("train_mse", 0.25);
        r.spectra.push(LayerSpectrum::new(0, &[0.1, -3.0, 2.0], 5));
        r.timings.insert("fit".into(), 0.5);
        let back = Report::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.spectra[0].eigenvalues, vec![-3.0, 2.0, 0.1]);
        assert_eq!(back.spectra[0].top, vec![0, 1, 2]);
        r.metric("bad", f64::NAN);
        assert!(r.to_json().is_err());
    }
}
