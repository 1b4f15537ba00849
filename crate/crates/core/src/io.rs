//! Shared CSV helpers and reproducibility headers.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CraneError, Result};

/// Configuration hash and seed embedded in every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(config_sha256: impl Into<String>, seed: u64) -> Self {
        Self {
            config_sha256: config_sha256.into(),
            seed,
        }
    }

    pub fn from_config_text(text: &str, seed: u64) -> Self {
        Self::new(sha256_hex(text.as_bytes()), seed)
    }

    pub fn write_header<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# craneplan config_sha256={} seed={}", self.config_sha256, self.seed)?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Shortest round-trip representation, in exponent form for very small or
/// very large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub(crate) fn write_row<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            w.write_all(b",")?;
        }
        first = false;
        w.write_all(fmt_f64(*v).as_bytes())?;
    }
    w.write_all(b"\n")?;
    Ok(())
}

pub(crate) fn parse_row(line: &str, expected: usize, lineno: usize) -> Result<Vec<f64>> {
    let values = line
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| CraneError::Config(format!("line {lineno}: {e}")))?;
    if values.len() != expected {
        return Err(CraneError::Config(format!(
            "line {lineno}: expected {expected} columns, found {}",
            values.len()
        )));
    }
    Ok(values)
}
