use std::path::Path;

use crate::activation::Activation;
use crate::dataio::Container;
use crate::error::{LofiError, Result};
use crate::linalg::DenseMatrix;

use super::{FittedLayer, LayerKind, LofiModel, Task};

pub const MODEL_KIND: &str = "lofi_model";

fn kind_string(kind: LayerKind) -> String {
    match kind {
        LayerKind::Dense => "dense".into(),
        LayerKind::Conv { kernel_size, pool, l2_norm } => format!("conv:{kernel_size}:{pool}:{l2_norm}"),
    }
}

fn parse_kind(s: &str) -> Result<LayerKind> {
    let bad = || LofiError::Format { offset: 0, message: format!("bad layer kind {s:?}") };
    if s == "dense" {
        return Ok(LayerKind::Dense);
    }
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["conv", k, p, l] => Ok(LayerKind::Conv {
            kernel_size: k.parse().map_err(|_| bad())?,
            pool: p.parse().map_err(|_| bad())?,
            l2_norm: l.parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

fn row(values: &[f64]) -> DenseMatrix {
    DenseMatrix::new(1, values.len(), values.to_vec()).expect("finite row")
}

impl LofiModel {
    pub fn to_container(&self) -> Container {
        let mut c = Container::new(MODEL_KIND);
        c.set("task", self.task.tag());
        c.set("depth", self.layers.len());
        c.set("input_dim", self.input_dim);
        if let Some((h, w, ch)) = self.input_grid {
            c.set("input_grid", format!("{h}x{w}x{ch}"));
        }
        c.set_f64("lambda", self.lambda);
        c.set_f64("label_offset", self.label_offset);
        for (l, layer) in self.layers.iter().enumerate() {
            let p = format!("layer{l}");
            c.set(&format!("{p}.kind"), kind_string(layer.kind));
            c.set(&format!("{p}.activation"), layer.activation.tag());
            c.set(&format!("{p}.has_linear"), layer.has_linear);
            c.set_f64(&format!("{p}.rms_norm"), layer.rms_norm);
            c.set(&format!("{p}.rank_deficient"), layer.rank_deficient);
            if let Some((h, w)) = layer.input_grid {
                c.set(&format!("{p}.input_grid"), format!("{h}x{w}"));
            }
            c.put(&format!("{p}.projection"), layer.projection.clone());
            let spectral = layer.spectral_eigenvalues();
            if !spectral.is_empty() {
                c.put(&format!("{p}.eigenvalues"), row(spectral));
            }
            c.put(&format!("{p}.lift"), layer.lift.clone());
        }
        c.put("readout", row(&self.readout));
        if !self.cv_errors.is_empty() && self.cv_errors.iter().all(|v| v.is_finite()) {
            c.put("cv_errors", row(&self.cv_errors));
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.kind() != MODEL_KIND {
            return Err(LofiError::Format { offset: 0, message: format!("container holds {:?}, not a model", c.kind()) });
        }
        let depth: usize = c.parse("depth")?;
        let input_grid = match c.get_opt("input_grid") {
            Some(g) => Some(parse_grid3(g)?),
            None => None,
        };
        let mut layers = Vec::with_capacity(depth);
        for l in 0..depth {
            let p = format!("layer{l}");
            let has_linear: bool = c.parse(&format!("{p}.has_linear"))?;
            let mut eigenvalues = Vec::new();
            if has_linear {
                eigenvalues.push(f64::NAN);
            }
            let key = format!("{p}.eigenvalues");
            if c.has_block(&key) {
                eigenvalues.extend_from_slice(c.block(&key)?.as_slice());
            }
            let activation: Activation = c.get(&format!("{p}.activation"))?.parse()?;
            let layer_grid = match c.get_opt(&format!("{p}.input_grid")) {
                Some(g) => {
                    let (h, w) = g
                        .split_once('x')
                        .and_then(|(a, b)| a.parse().ok().zip(b.parse().ok()))
                        .ok_or(LofiError::Format { offset: 0, message: format!("bad grid {g:?}") })?;
                    Some((h, w))
                }
                None => None,
            };
            layers.push(FittedLayer {
                kind: parse_kind(c.get(&format!("{p}.kind"))?)?,
                activation,
                projection: c.block(&format!("{p}.projection"))?.clone(),
                eigenvalues,
                has_linear,
                lift: c.block(&format!("{p}.lift"))?.clone(),
                rms_norm: c.parse(&format!("{p}.rms_norm"))?,
                rank_deficient: c.parse(&format!("{p}.rank_deficient"))?,
                input_grid: layer_grid,
            });
        }
        Ok(LofiModel {
            layers,
            readout: c.block("readout")?.as_slice().to_vec(),
            lambda: c.parse("lambda")?,
            task: c.get("task")?.parse::<Task>()?,
            label_offset: c.parse("label_offset")?,
            input_dim: c.parse("input_dim")?,
            input_grid,
            cv_errors: if c.has_block("cv_errors") { c.block("cv_errors")?.as_slice().to_vec() } else { Vec::new() },
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.to_container().to_bytes()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}

pub(crate) fn parse_grid3(g: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<usize> = g.split('x').filter_map(|v| v.parse().ok()).collect();
    match parts.as_slice() {
        [h, w, c] if *h > 0 && *w > 0 && *c > 0 => Ok((*h, *w, *c)),
        _ => Err(LofiError::InvalidInput(format!("grid {g:?} is not of the form HxWxC"))),
    }
}
