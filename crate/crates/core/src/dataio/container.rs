//! Model container: a plain-text manifest followed by LFMT blocks.
//!
//! ```text
//! LOFI-CONTAINER 1
//! kind=lofi_model
//! <key>=<value>            (scalars, one per line, in insertion order)
//! block <name> <offset> <len>
//! end
//! <LFMT block bytes ...>
//! ```
//!
//! Block offsets count from the first byte after the `end` line.

use std::fs;
use std::path::Path;

use crate::dataio::lfmt;
use crate::error::{io_at, LofiError, Result};
use crate::linalg::DenseMatrix;

const HEADER: &str = "LOFI-CONTAINER 1";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    scalars: Vec<(String, String)>,
    blocks: Vec<(String, DenseMatrix)>,
}

fn fmt_err<T>(offset: u64, message: impl Into<String>) -> Result<T> {
    Err(LofiError::Format { offset, message: message.into() })
}

impl Container {
    pub fn new(kind: &str) -> Self {
        let mut c = Self::default();
        c.set("kind", kind);
        c
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        debug_assert!(!key.contains(['=', '\n', ' ']) && !value.contains('\n'));
        match self.scalars.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.scalars.push((key.to_string(), value)),
        }
    }

    pub fn set_f64(&mut self, key: &str, value: f64) {
        // Display for f64 prints the shortest string that round-trips.
        self.set(key, value);
    }

    pub fn put(&mut self, name: &str, m: DenseMatrix) {
        self.blocks.push((name.to_string(), m));
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.scalars
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| LofiError::Format { offset: 0, message: format!("missing manifest key {key:?}") })
    }

    pub fn get_opt(&self, key: &str) -> Option<&str> {
        self.get(key).ok()
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key)?;
        raw.parse().map_err(|_| LofiError::Format { offset: 0, message: format!("bad value {raw:?} for {key:?}") })
    }

    pub fn block(&self, name: &str) -> Result<&DenseMatrix> {
        self.blocks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| LofiError::Format { offset: 0, message: format!("missing block {name:?}") })
    }

    pub fn has_block(&self, name: &str) -> bool {
        self.blocks.iter().any(|(n, _)| n == name)
    }

    pub fn kind(&self) -> &str {
        self.get_opt("kind").unwrap_or("")
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut payload = Vec::new();
        let mut manifest = format!("{HEADER}\n");
        for (k, v) in &self.scalars {
            manifest.push_str(&format!("{k}={v}\n"));
        }
        for (name, m) in &self.blocks {
            let bytes = lfmt::encode(m)?;
            manifest.push_str(&format!("block {name} {} {}\n", payload.len(), bytes.len()));
            payload.extend_from_slice(&bytes);
        }
        manifest.push_str("end\n");
        let mut out = manifest.into_bytes();
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let next_line = |pos: &mut usize| -> Result<(u64, String)> {
            let start = *pos;
            let end = bytes[start..]
                .iter()
                .position(|b| *b == b'\n')
                .map(|i| start + i)
                .ok_or(LofiError::Format { offset: start as u64, message: "unterminated manifest".into() })?;
            *pos = end + 1;
            let line = std::str::from_utf8(&bytes[start..end])
                .map_err(|_| LofiError::Format { offset: start as u64, message: "manifest is not UTF-8".into() })?;
            Ok((start as u64, line.to_string()))
        };
        let (_, head) = next_line(&mut pos)?;
        if head != HEADER {
            return fmt_err(0, format!("expected {HEADER:?} header"));
        }
        let mut c = Container::default();
        let mut specs = Vec::new();
        loop {
            let (off, line) = next_line(&mut pos)?;
            if line == "end" {
                break;
            }
            if let Some(rest) = line.strip_prefix("block ") {
                let parts: Vec<&str> = rest.split(' ').collect();
                let parsed = match parts.as_slice() {
                    [name, o, l] => o.parse::<usize>().ok().zip(l.parse::<usize>().ok()).map(|(o, l)| (name.to_string(), o, l)),
                    _ => None,
                };
                match parsed {
                    Some(s) => specs.push((off, s)),
                    None => return fmt_err(off, format!("malformed block line {line:?}")),
                }
            } else if let Some((k, v)) = line.split_once('=') {
                c.scalars.push((k.to_string(), v.to_string()));
            } else {
                return fmt_err(off, format!("malformed manifest line {line:?}"));
            }
        }
        let payload = &bytes[pos..];
        for (off, (name, o, l)) in specs {
            let end = o.checked_add(l).filter(|e| *e <= payload.len());
            let Some(end) = end else {
                return fmt_err(off, format!("block {name} runs past the end of the file"));
            };
            let m = lfmt::decode(&payload[o..end]).map_err(|e| match e {
                LofiError::Format { offset, message } => {
                    LofiError::Format { offset: offset + (pos + o) as u64, message: format!("block {name}: {message}") }
                }
                other => other,
            })?;
            c.blocks.push((name, m));
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&fs::read(path).map_err(io_at(path))?)
    }
}
