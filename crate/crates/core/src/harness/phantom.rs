//! Built-in test scenes and 8-bit graymap scene loading.
//!
//! `blocks` on an `n × n` grid, in pixel-center unit coordinates `u = (col + ½)/n`,
//! `v = (row + ½)/n`:
//!
//! | target   | region                               | value |
//! |----------|--------------------------------------|-------|
//! | block A  | `0.16 ≤ u < 0.44`, `0.20 ≤ v < 0.40` | 1.0   |
//! | block B  | `0.56 ≤ u < 0.76`, `0.56 ≤ v < 0.84` | 0.5   |
//! | point    | nearest pixel to `(0.80, 0.20)`      | 1.0   |
//! | point    | nearest pixel to `(0.20, 0.80)`      | 1.0   |
//! | point    | nearest pixel to `(0.84, 0.84)`      | 0.5   |

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// Scene names accepted by [`make_phantom`] (besides `pgm:<path>`).
pub const PHANTOM_NAMES: &[&str] = &["single", "blocks"];

fn nearest(u: f64, n: usize) -> usize {
    ((u * n as f64 - 0.5).round().max(0.0) as usize).min(n - 1)
}

fn blocks(n: usize) -> Vec<f64> {
    let mut rho = vec![0.0; n * n];
    let coord = |i: usize| (i as f64 + 0.5) / n as f64;
    for row in 0..n {
        for col in 0..n {
            let (u, v) = (coord(col), coord(row));
            let k = row * n + col;
            if (0.16..0.44).contains(&u) && (0.20..0.40).contains(&v) {
                rho[k] = 1.0;
            } else if (0.56..0.76).contains(&u) && (0.56..0.84).contains(&v) {
                rho[k] = 0.5;
            }
        }
    }
    for (u, v, value) in [(0.80, 0.20, 1.0), (0.20, 0.80, 1.0), (0.84, 0.84, 0.5)] {
        rho[nearest(v, n) * n + nearest(u, n)] = value;
    }
    rho
}

/// Reflectivity on a `points_per_side²` grid, row-major, values in `[0, 1]`.
///
/// `name` is `single`, `blocks`, or `pgm:<path>` for an 8-bit binary graymap whose
/// dimensions must match the grid.
pub fn make_phantom(name: &str, points_per_side: usize) -> Result<Vec<f64>> {
    if points_per_side == 0 {
        return Err(Error::invalid("points_per_side", "must be at least 1"));
    }
    let n = points_per_side;
    let rho = match name {
        "single" => {
            let mut rho = vec![0.0; n * n];
            rho[(n / 2) * n + n / 2] = 1.0;
            rho
        }
        "blocks" => blocks(n),
        "zero" => {
            return Err(Error::Config(
                "phantom `zero` carries no signal and cannot be reconstructed".into(),
            ))
        }
        other => match other.strip_prefix("pgm:") {
            Some(path) => {
                let img = read_pgm(Path::new(path))?;
                if img.width != n || img.height != n {
                    return Err(Error::Image(format!(
                        "{path}: {}x{} image does not match a {n}x{n} grid",
                        img.width, img.height
                    )));
                }
                img.normalized()
            }
            None => return Err(Error::UnknownPhantom(other.to_string())),
        },
    };
    if rho.iter().all(|v| *v == 0.0) {
        return Err(Error::Config(format!("phantom `{name}` is identically zero")));
    }
    Ok(rho)
}

/// Binary (`P5`) graymap, 8- or 16-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Graymap {
    pub width: usize,
    pub height: usize,
    pub max_value: u16,
    /// Row-major samples.
    pub samples: Vec<u16>,
}

impl Graymap {
    /// Samples divided by `max_value`.
    pub fn normalized(&self) -> Vec<f64> {
        let m = f64::from(self.max_value);
        self.samples.iter().map(|s| f64::from(*s) / m).collect()
    }
}

fn pgm_token(bytes: &[u8], pos: &mut usize) -> Option<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

pub fn parse_pgm(bytes: &[u8]) -> Result<Graymap> {
    let bad = |what: &str| Error::Image(format!("malformed graymap: {what}"));
    let mut pos = 0;
    if pgm_token(bytes, &mut pos).as_deref() != Some("P5") {
        return Err(bad("expected binary `P5` magic"));
    }
    let mut field = |what: &str| -> Result<usize> {
        pgm_token(bytes, &mut pos)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(what))
    };
    let width = field("width")?;
    let height = field("height")?;
    let max_value = field("max value")?;
    if max_value == 0 || max_value > 65535 {
        return Err(bad("max value out of range"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let wide = max_value > 255;
    let count = width * height;
    let needed = if wide { 2 * count } else { count };
    let raster = bytes.get(pos..pos + needed).ok_or_else(|| bad("truncated raster"))?;
    let samples = if wide {
        raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        raster.iter().map(|b| u16::from(*b)).collect()
    };
    Ok(Graymap {
        width,
        height,
        max_value: max_value as u16,
        samples,
    })
}

pub fn read_pgm(path: &Path) -> Result<Graymap> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    parse_pgm(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_is_centered() {
        let rho = make_phantom("single", 5).unwrap();
        assert_eq!(rho.iter().filter(|v| **v != 0.0).count(), 1);
        assert_eq!(rho[12], 1.0);
    }

    #[test]
    fn blocks_values_and_layout() {
        let rho = make_phantom("blocks", 25).unwrap();
        assert!(rho.iter().all(|v| [0.0, 0.5, 1.0].contains(v)));
        let ones = rho.iter().filter(|v| **v == 1.0).count();
        let halves = rho.iter().filter(|v| **v == 0.5).count();
        // 7x5 block + 2 points at 1.0, 5x7 block + 1 point at 0.5
        assert_eq!(ones, 37);
        assert_eq!(halves, 36);
        // isolated point: all 4-neighbours empty
        let k = nearest(0.20, 25) * 25 + nearest(0.80, 25);
        assert_eq!(rho[k], 1.0);
        for nb in [k - 1, k + 1, k - 25, k + 25] {
            assert_eq!(rho[nb], 0.0);
        }
    }

    #[test]
    fn rejects_unknown_and_zero() {
        assert!(matches!(make_phantom("nope", 5), Err(Error::UnknownPhantom(_))));
        assert!(make_phantom("zero", 5).is_err());
    }

    #[test]
    fn loads_8bit_graymap() {
        let mut bytes = b"P5\n# comment\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 51, 102]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.pgm");
        std::fs::write(&path, &bytes).unwrap();
        let rho = make_phantom(&format!("pgm:{}", path.display()), 2).unwrap();
        assert_eq!(rho, vec![0.0, 1.0, 0.2, 0.4]);
        assert!(matches!(
            make_phantom(&format!("pgm:{}", path.display()), 3),
            Err(Error::Image(_))
        ));
    }

    #[test]
    fn malformed_graymaps() {
        assert!(parse_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(parse_pgm(b"P5\n2 2\n255\n\x00").is_err());
    }
}
