//! Image export: 16-bit graymap, CSV matrix and a sidecar with the mapped value range.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::SceneGrid;

use super::phantom::read_pgm;

/// Files written by [`export_image`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExportedImage {
    pub pgm: PathBuf,
    pub csv: PathBuf,
    pub range: PathBuf,
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `<base>.pgm` (16-bit, `[min, max]` mapped to `[0, 65535]`), `<base>.csv`
/// (one grid row per line) and `<base>.range.txt` (`min max`).
///
/// A constant scene maps to an all-zero image.
pub fn export_image(rho: &[f64], grid: &SceneGrid<f64>, base: &Path) -> Result<ExportedImage> {
    let n = grid.points_per_side();
    if rho.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            context: "image length",
            expected: grid.len(),
            got: rho.len(),
        });
    }
    if rho.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("image values"));
    }
    let lo = rho.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;

    let out = ExportedImage {
        pgm: with_suffix(base, ".pgm"),
        csv: with_suffix(base, ".csv"),
        range: with_suffix(base, ".range.txt"),
    };
    if let Some(dir) = base.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }

    let mut pgm = format!("P5\n{n} {n}\n65535\n").into_bytes();
    for v in rho {
        let level = if span > 0.0 {
            ((v - lo) / span * 65535.0).round() as u16
        } else {
            0
        };
        pgm.extend_from_slice(&level.to_be_bytes());
    }
    fs::write(&out.pgm, pgm)?;

    let mut csv = fs::File::create(&out.csv)?;
    for row in rho.chunks(n) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(csv, "{}", line.join(","))?;
    }
    fs::write(&out.range, format!("{lo:e} {hi:e}\n"))?;
    Ok(out)
}

/// Reads an exported graymap back into values using its range sidecar.
pub fn read_exported(base: &Path) -> Result<Vec<f64>> {
    let img = read_pgm(&with_suffix(base, ".pgm"))?;
    let range = fs::read_to_string(with_suffix(base, ".range.txt"))?;
    let parsed: Vec<f64> = range
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Image("malformed range sidecar".into()))?;
    let [lo, hi] = parsed[..] else {
        return Err(Error::Image("range sidecar needs `min max`".into()));
    };
    let m = f64::from(img.max_value);
    Ok(img
        .samples
        .iter()
        .map(|s| lo + f64::from(*s) / m * (hi - lo))
        .collect())
}
