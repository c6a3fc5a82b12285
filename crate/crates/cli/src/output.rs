//! Result files: JSON documents with embedded metadata, and the sweep CSV.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use pbe_core::equilibrium::{CellOutcome, SweepRow};
use pbe_core::verification::RNG_NAME;
use serde::Serialize;

use crate::config::{Scenario, SCHEMA_VERSION};

pub const SWEEP_HEADER: [&str; 11] = [
    "p_t_l",
    "p_d",
    "theta",
    "F_l",
    "regime",
    "sigma_l_star",
    "sigma_dH_star",
    "u_l",
    "u_h",
    "u_d",
    "status",
];

/// Provenance embedded in every output document.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema_version: u32,
    pub config_sha256: String,
    pub seed: u64,
    pub rng: &'static str,
}

impl Metadata {
    pub fn new(scenario: &Scenario) -> Self {
        Self {
            tool: "pbe",
            version: env!("CARGO_PKG_VERSION"),
            schema_version: SCHEMA_VERSION,
            config_sha256: scenario.config_sha256.clone(),
            seed: scenario.verify.seed,
            rng: RNG_NAME,
        }
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    metadata: &'a Metadata,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(metadata: &Metadata, body: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Document { metadata, body })?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Shortest round-trip decimal, switching to exponent form for very small
/// or very large magnitudes.
pub fn csv_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Sweep rows as CSV. Fields that do not apply to a row are left empty.
pub fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    for row in rows {
        let c = &row.cell;
        let mut rec = vec![
            csv_number(c.p_t_l),
            csv_number(c.p_d),
            csv_number(c.theta),
            csv_number(c.f_l),
            row.outcome.regime_label().to_string(),
        ];
        match &row.outcome {
            CellOutcome::Solved(s) => {
                rec.extend([s.sigma_l, s.sigma_d_h, s.u_l, s.u_h, s.u_d].map(csv_number))
            }
            _ => rec.extend(std::iter::repeat_n(String::new(), 5)),
        }
        rec.push(row.outcome.status());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(w.into_inner()?)
}

/// Prints to stdout unless `quiet`.
pub fn say(quiet: bool, text: &str) {
    if !quiet {
        let mut out = std::io::stdout().lock();
        let _ = out.write_all(text.as_bytes());
        if !text.ends_with('\n') {
            let _ = out.write_all(b"\n");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_numbers_round_trip() {
        for v in [0.0, -0.0, 0.5, 1e-300, -7.9e-18, 2.448979591836735, 1e20] {
            let s = csv_number(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
            assert!(s.len() < 30, "{s}");
        }
    }
}
