//! Artifact writers: CSV and JSON with stable formatting.

use std::io::Write;
use std::path::{Path, PathBuf};

use qwalk_core::fourier::MomentumGrid;
use qwalk_core::ReturnSeries;

use crate::CliError;

/// 17 significant decimal digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {}", dir.display(), e)))
}

pub fn artifact_path(dir: &Path, label: &str, suffix: &str) -> PathBuf {
    let safe: String = label
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    dir.join(format!("{}_{}", safe, suffix))
}

/// `t,p_o` rows, LF endings.
pub fn write_series_csv(path: &Path, series: &ReturnSeries) -> Result<(), CliError> {
    let mut out = String::with_capacity(series.p.len() * 28 + 8);
    out.push_str("t,p_o\n");
    for (t, p) in series.p.iter().enumerate() {
        out.push_str(&format!("{},{}\n", t, fmt_f64(*p)));
    }
    write_atomic(path, out.as_bytes())
}

/// `k1,...,kd,band,omega` rows over the whole grid, bands in per-point
/// phase order.
pub fn write_eigenphase_csv(path: &Path, grid: &MomentumGrid) -> Result<(), CliError> {
    let d = grid.dimension();
    let c = grid.coin_dim();
    let mut out = String::new();
    for axis in 0..d {
        out.push_str(&format!("k{},", axis + 1));
    }
    out.push_str("band,omega\n");
    for flat in 0..grid.len() {
        let k = grid.k_at(flat);
        let phases = grid.phases_at(flat);
        for (band, omega) in phases.iter().enumerate().take(c) {
            for kx in &k {
                out.push_str(&fmt_f64(*kx));
                out.push(',');
            }
            out.push_str(&format!("{},{}\n", band, fmt_f64(*omega)));
        }
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Io(format!("serialize {}: {}", path.display(), e)))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| CliError::Io(format!("cannot create {}: {}", path.display(), e)))?;
    file.write_all(bytes)
        .map_err(|e| CliError::Io(format!("cannot write {}: {}", path.display(), e)))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        let x = 0.1 + 0.2;
        let parsed: f64 = fmt_f64(x).parse().unwrap();
        assert_eq!(parsed, x);
    }
}
