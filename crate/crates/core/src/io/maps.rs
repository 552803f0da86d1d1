//! Export of per-pixel maps as CSV or plain PGM (P2).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::cube::MapF64;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    Csv,
    Pgm,
}

impl MapFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MapFormat::Csv => "csv",
            MapFormat::Pgm => "pgm",
        }
    }
}

impl FromStr for MapFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(MapFormat::Csv),
            "pgm" => Ok(MapFormat::Pgm),
            other => Err(Error::Config(format!("unknown map format `{other}`"))),
        }
    }
}

/// Renders a map as CSV: one line per row, shortest round-trip decimals,
/// masked pixels written as `NaN`.
pub fn map_to_csv(map: &MapF64) -> String {
    let mut out = String::with_capacity(map.len() * 20);
    for r in 0..map.rows() {
        for c in 0..map.cols() {
            if c > 0 {
                out.push(',');
            }
            let i = r * map.cols() + c;
            if map.is_valid(i) {
                write!(out, "{}", map.values()[i]).unwrap();
            } else {
                out.push_str("NaN");
            }
        }
        out.push('\n');
    }
    out
}

/// Renders a map as plain PGM. Valid pixels are min-max scaled to 0–255
/// and rounded; a constant map and masked pixels map to 0.
pub fn map_to_pgm(map: &MapF64) -> String {
    let valid = (0..map.len())
        .filter(|&i| map.is_valid(i))
        .map(|i| map.values()[i]);
    let (min, max) = valid.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    let (min, max) = if min.is_finite() {
        (min, max)
    } else {
        (0.0, 0.0)
    };
    let span = max - min;

    let mut out = String::with_capacity(map.len() * 4 + 64);
    out.push_str("P2\n");
    writeln!(out, "# min={min} max={max}").unwrap();
    writeln!(out, "{} {}", map.cols(), map.rows()).unwrap();
    out.push_str("255\n");
    for r in 0..map.rows() {
        for c in 0..map.cols() {
            let i = r * map.cols() + c;
            let level = if map.is_valid(i) && span > 0.0 {
                ((map.values()[i] - min) / span * 255.0)
                    .round()
                    .clamp(0.0, 255.0) as u8
            } else {
                0
            };
            if c > 0 {
                out.push(' ');
            }
            write!(out, "{level}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Writes `map` to `path` in the requested format.
pub fn write_map(map: &MapF64, path: impl AsRef<Path>, format: MapFormat) -> Result<()> {
    let path = path.as_ref();
    if path.as_os_str().is_empty() {
        return Err(Error::invalid("empty output path"));
    }
    let body = match format {
        MapFormat::Csv => map_to_csv(map),
        MapFormat::Pgm => map_to_pgm(map),
    };
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Writes a headed CSV table; each row must match the header width.
pub fn write_table_csv(
    path: impl AsRef<Path>,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let path = path.as_ref();
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::DimensionMismatch(format!(
                "table row has {} cells, header has {}",
                row.len(),
                header.len()
            )));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_min_max_scaling() {
        let map = MapF64::new(1, 2, vec![0.0, 1.0]).unwrap();
        assert_eq!(map_to_pgm(&map), "P2\n# min=0 max=1\n2 1\n255\n0 255\n");
    }

    #[test]
    fn pgm_constant_map_is_black() {
        let map = MapF64::filled(2, 2, 0.7);
        assert_eq!(
            map_to_pgm(&map),
            "P2\n# min=0.7 max=0.7\n2 2\n255\n0 0\n0 0\n"
        );
    }

    #[test]
    fn pgm_rounds_intermediate_levels() {
        let map = MapF64::new(1, 3, vec![-1.0, 0.0, 1.0]).unwrap();
        // 0.5 · 255 = 127.5 rounds half away from zero.
        assert!(map_to_pgm(&map).ends_with("0 128 255\n"));
    }

    #[test]
    fn csv_layout() {
        let map = MapF64::new(2, 2, vec![0.1, 0.25, 1.0 / 3.0, -2.0]).unwrap();
        let text = map_to_csv(&map);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "0.1,0.25");
        assert_eq!(lines[1], "0.3333333333333333,-2");
        let parsed: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
        assert_eq!(parsed, 1.0 / 3.0);
    }

    #[test]
    fn masked_pixels() {
        let map =
            MapF64::with_mask(1, 3, vec![2.0, f64::NAN, 4.0], vec![true, false, true]).unwrap();
        assert_eq!(map_to_csv(&map), "2,NaN,4\n");
        assert!(map_to_pgm(&map).ends_with("0 0 255\n"));
    }

    #[test]
    fn write_map_rejects_empty_path() {
        let map = MapF64::filled(1, 1, 0.0);
        assert!(write_map(&map, "", MapFormat::Csv).is_err());
    }
}
