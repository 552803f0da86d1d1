//! ENVI header + raw binary cubes.
//!
//! Reads data type 4 (`f32`) and 12 (`u16`, divided by `reflectance scale
//! factor`, default 10000) in any interleave and either byte order. Writes
//! band-sequential little-endian `f32` only.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::cube::Cube;
use crate::error::{Error, Result};

const DEFAULT_REFLECTANCE_SCALE: f64 = 10_000.0;

/// Extensions probed, in order, for the raw file next to a header.
const RAW_EXTENSIONS: [&str; 7] = ["img", "dat", "raw", "bsq", "bil", "bip", ""];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Interleave {
    Bsq,
    Bil,
    Bip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DataType {
    F32,
    U16,
}

impl DataType {
    fn size(self) -> usize {
        match self {
            DataType::F32 => 4,
            DataType::U16 => 2,
        }
    }
}

/// Parses `key = value` pairs, joining `{ ... }` values that span lines.
/// Keys are lower-cased and whitespace-normalised.
fn parse_header(text: &str) -> HashMap<String, String> {
    let mut out = HashMap::new();
    let mut lines = text.lines();
    while let Some(line) = lines.next() {
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let key = key
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase();
        let mut value = value.trim().to_string();
        if value.starts_with('{') {
            while !value.contains('}') {
                match lines.next() {
                    Some(next) => {
                        value.push(' ');
                        value.push_str(next.trim());
                    }
                    None => break,
                }
            }
        }
        out.insert(key, value);
    }
    out
}

fn required<'a>(header: &'a HashMap<String, String>, key: &str, path: &Path) -> Result<&'a str> {
    header
        .get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::format(path, format!("missing required key `{key}`")))
}

fn parse_count(header: &HashMap<String, String>, key: &str, path: &Path) -> Result<usize> {
    let raw = required(header, key, path)?;
    raw.parse::<usize>().map_err(|_| {
        Error::format(
            path,
            format!("`{key}` is not a non-negative integer: {raw}"),
        )
    })
}

fn braced_list(value: &str) -> Vec<&str> {
    value
        .trim()
        .trim_start_matches('{')
        .trim_end_matches('}')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Raw payload that [`read_envi_cube`] would load for `header_path`.
pub fn find_raw_path(header_path: &Path) -> Result<PathBuf> {
    for ext in RAW_EXTENSIONS {
        let candidate = header_path.with_extension(ext);
        if candidate != header_path && candidate.is_file() {
            return Ok(candidate);
        }
    }
    Err(Error::format(
        header_path,
        "no companion raw file (.img/.dat/.raw/.bsq/.bil/.bip or bare stem) found",
    ))
}

/// Reads an ENVI cube and returns it in band-sequential order.
pub fn read_envi_cube(header_path: impl AsRef<Path>) -> Result<Cube> {
    let header_path = header_path.as_ref();
    let text = fs::read_to_string(header_path).map_err(|e| Error::io(header_path, e))?;
    let header = parse_header(&text);

    let cols = parse_count(&header, "samples", header_path)?;
    let rows = parse_count(&header, "lines", header_path)?;
    let bands = parse_count(&header, "bands", header_path)?;
    if bands == 0 {
        return Err(Error::format(header_path, "bands must be ≥ 1"));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::format(header_path, "samples and lines must be ≥ 1"));
    }

    let data_type = match required(&header, "data type", header_path)? {
        "4" => DataType::F32,
        "12" => DataType::U16,
        other => {
            return Err(Error::format(
                header_path,
                format!("unsupported data type {other} (supported: 4, 12)"),
            ))
        }
    };
    let interleave = match required(&header, "interleave", header_path)?
        .to_lowercase()
        .as_str()
    {
        "bsq" => Interleave::Bsq,
        "bil" => Interleave::Bil,
        "bip" => Interleave::Bip,
        other => {
            return Err(Error::format(
                header_path,
                format!("unsupported interleave `{other}`"),
            ))
        }
    };
    let big_endian = match required(&header, "byte order", header_path)? {
        "0" => false,
        "1" => true,
        other => {
            return Err(Error::format(
                header_path,
                format!("invalid byte order {other}"),
            ))
        }
    };
    let offset = match header.get("header offset") {
        Some(v) => v
            .parse::<usize>()
            .map_err(|_| Error::format(header_path, format!("invalid header offset {v}")))?,
        None => 0,
    };
    let scale = match header.get("reflectance scale factor") {
        Some(v) => {
            let s: f64 = v.parse().map_err(|_| {
                Error::format(header_path, format!("invalid reflectance scale factor {v}"))
            })?;
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::format(
                    header_path,
                    "reflectance scale factor must be > 0",
                ));
            }
            s
        }
        None => DEFAULT_REFLECTANCE_SCALE,
    };
    let wavelengths = match header.get("wavelength") {
        Some(v) => {
            let parsed: std::result::Result<Vec<f64>, _> =
                braced_list(v).into_iter().map(str::parse::<f64>).collect();
            Some(parsed.map_err(|_| Error::format(header_path, "unparsable wavelength list"))?)
        }
        None => None,
    };

    let raw_path = find_raw_path(header_path)?;
    let bytes = fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    let n = bands * rows * cols;
    let expected = offset + n * data_type.size();
    if bytes.len() != expected {
        return Err(Error::format(
            &raw_path,
            format!(
                "raw file holds {} bytes, header implies {expected}",
                bytes.len()
            ),
        ));
    }
    let payload = &bytes[offset..];

    let decoded: Vec<f32> = match data_type {
        DataType::F32 => payload
            .chunks_exact(4)
            .map(|c| {
                let b = [c[0], c[1], c[2], c[3]];
                if big_endian {
                    f32::from_be_bytes(b)
                } else {
                    f32::from_le_bytes(b)
                }
            })
            .collect(),
        DataType::U16 => payload
            .chunks_exact(2)
            .map(|c| {
                let b = [c[0], c[1]];
                let v = if big_endian {
                    u16::from_be_bytes(b)
                } else {
                    u16::from_le_bytes(b)
                };
                (f64::from(v) / scale) as f32
            })
            .collect(),
    };
    if let Some(i) = decoded.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(
            &raw_path,
            format!("non-finite value at element {i}"),
        ));
    }

    let pixels = rows * cols;
    let data = match interleave {
        Interleave::Bsq => decoded,
        Interleave::Bil => {
            let mut out = vec![0.0_f32; n];
            for r in 0..rows {
                for b in 0..bands {
                    for c in 0..cols {
                        out[b * pixels + r * cols + c] = decoded[(r * bands + b) * cols + c];
                    }
                }
            }
            out
        }
        Interleave::Bip => {
            let mut out = vec![0.0_f32; n];
            for p in 0..pixels {
                for b in 0..bands {
                    out[b * pixels + p] = decoded[p * bands + b];
                }
            }
            out
        }
    };

    Cube::new(bands, rows, cols, data, wavelengths).map_err(|e| match e {
        Error::InvalidInput(msg) | Error::DimensionMismatch(msg) => Error::format(header_path, msg),
        other => other,
    })
}

/// Path of the raw file written next to `header_path`.
pub fn raw_path_for(header_path: &Path) -> PathBuf {
    header_path.with_extension("img")
}

/// Writes `cube` as BSQ little-endian `f32` with an ENVI header at
/// `header_path` and the raw payload at the same stem with `.img`.
pub fn write_envi_cube(cube: &Cube, header_path: impl AsRef<Path>) -> Result<()> {
    let header_path = header_path.as_ref();
    if header_path.as_os_str().is_empty() {
        return Err(Error::invalid("empty output path"));
    }
    if let Some(i) = cube.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite value at element {i}")));
    }
    let raw_path = raw_path_for(header_path);
    if raw_path == header_path {
        return Err(Error::invalid("header path must not end in .img"));
    }

    let mut header = String::from("ENVI\n");
    header.push_str("description = {pgru reflectance cube}\n");
    header.push_str(&format!("samples = {}\n", cube.cols()));
    header.push_str(&format!("lines = {}\n", cube.rows()));
    header.push_str(&format!("bands = {}\n", cube.bands()));
    header.push_str("header offset = 0\n");
    header.push_str("file type = ENVI Standard\n");
    header.push_str("data type = 4\n");
    header.push_str("interleave = bsq\n");
    header.push_str("byte order = 0\n");
    if let Some(wl) = cube.wavelengths() {
        let list: Vec<String> = wl.iter().map(|w| w.to_string()).collect();
        header.push_str("wavelength units = Nanometers\n");
        header.push_str(&format!("wavelength = {{{}}}\n", list.join(", ")));
    }

    let mut bytes = Vec::with_capacity(cube.data().len() * 4);
    for v in cube.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&raw_path, bytes).map_err(|e| Error::io(&raw_path, e))?;
    fs::write(header_path, header).map_err(|e| Error::io(header_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_header(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("scene.hdr");
        fs::write(&p, body).unwrap();
        p
    }

    fn header_text(
        samples: usize,
        lines: usize,
        bands: usize,
        dtype: u8,
        interleave: &str,
    ) -> String {
        format!(
            "ENVI\nsamples = {samples}\nlines = {lines}\nbands = {bands}\nheader offset = 0\n\
             data type = {dtype}\ninterleave = {interleave}\nbyte order = 0\n"
        )
    }

    #[test]
    fn reads_hand_written_bsq_floats() {
        let dir = tempfile::tempdir().unwrap();
        // 3 bands, 2 lines, 2 samples.
        let values: Vec<f32> = (0..12).map(|i| i as f32 / 16.0).collect();
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(dir.path().join("scene.img"), bytes).unwrap();
        let hdr = write_header(dir.path(), &header_text(2, 2, 3, 4, "bsq"));
        let cube = read_envi_cube(&hdr).unwrap();
        assert_eq!((cube.bands(), cube.rows(), cube.cols()), (3, 2, 2));
        assert_eq!(cube.data(), values.as_slice());
        assert_eq!(cube.get(2, 1, 0), 10.0 / 16.0);
    }

    #[test]
    fn bil_and_bip_are_reordered_to_bsq() {
        let dir = tempfile::tempdir().unwrap();
        let (bands, rows, cols) = (2, 2, 3);
        let value = |b: usize, r: usize, c: usize| (b * 100 + r * 10 + c) as f32 / 1000.0;

        let mut bil = Vec::new();
        for r in 0..rows {
            for b in 0..bands {
                for c in 0..cols {
                    bil.extend_from_slice(&value(b, r, c).to_le_bytes());
                }
            }
        }
        fs::write(dir.path().join("scene.img"), &bil).unwrap();
        let hdr = write_header(dir.path(), &header_text(cols, rows, bands, 4, "bil"));
        let cube = read_envi_cube(&hdr).unwrap();
        for b in 0..bands {
            for r in 0..rows {
                for c in 0..cols {
                    assert_eq!(cube.get(b, r, c), value(b, r, c));
                }
            }
        }

        let mut bip = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                for b in 0..bands {
                    bip.extend_from_slice(&value(b, r, c).to_le_bytes());
                }
            }
        }
        fs::write(dir.path().join("scene.img"), &bip).unwrap();
        let hdr = write_header(dir.path(), &header_text(cols, rows, bands, 4, "BIP"));
        let cube2 = read_envi_cube(&hdr).unwrap();
        assert_eq!(cube, cube2);
    }

    #[test]
    fn uint16_is_scaled_by_reflectance_factor() {
        let dir = tempfile::tempdir().unwrap();
        let bytes: Vec<u8> = [5000u16, 10000]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        fs::write(dir.path().join("scene.img"), &bytes).unwrap();
        let hdr = write_header(dir.path(), &header_text(2, 1, 1, 12, "bsq"));
        let cube = read_envi_cube(&hdr).unwrap();
        assert_eq!(cube.data(), &[0.5, 1.0]);

        let text = header_text(2, 1, 1, 12, "bsq") + "reflectance scale factor = 20000\n";
        let hdr = write_header(dir.path(), &text);
        assert_eq!(read_envi_cube(&hdr).unwrap().data(), &[0.25, 0.5]);
    }

    #[test]
    fn big_endian_floats() {
        let dir = tempfile::tempdir().unwrap();
        let bytes: Vec<u8> = [0.25f32, 0.75]
            .iter()
            .flat_map(|v| v.to_be_bytes())
            .collect();
        fs::write(dir.path().join("scene.img"), &bytes).unwrap();
        let text = header_text(2, 1, 1, 4, "bsq").replace("byte order = 0", "byte order = 1");
        let hdr = write_header(dir.path(), &text);
        assert_eq!(read_envi_cube(&hdr).unwrap().data(), &[0.25, 0.75]);
    }

    #[test]
    fn zero_bands_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("scene.img"), []).unwrap();
        let hdr = write_header(dir.path(), &header_text(2, 2, 0, 4, "bsq"));
        let err = read_envi_cube(&hdr).unwrap_err();
        assert!(err.to_string().contains("bands must be ≥ 1"), "{err}");
    }

    #[test]
    fn header_errors() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("scene.img"), vec![0u8; 16]).unwrap();

        let missing = header_text(2, 2, 1, 4, "bsq").replace("interleave = bsq\n", "");
        let err = read_envi_cube(write_header(dir.path(), &missing)).unwrap_err();
        assert!(err.to_string().contains("interleave"), "{err}");

        let dtype = header_text(2, 2, 1, 5, "bsq");
        let err = read_envi_cube(write_header(dir.path(), &dtype)).unwrap_err();
        assert!(err.to_string().contains("data type"), "{err}");

        let interleave = header_text(2, 2, 1, 4, "bxx");
        let err = read_envi_cube(write_header(dir.path(), &interleave)).unwrap_err();
        assert!(err.to_string().contains("interleave"), "{err}");

        let size = header_text(2, 2, 2, 4, "bsq");
        let err = read_envi_cube(write_header(dir.path(), &size)).unwrap_err();
        assert!(err.to_string().contains("bytes"), "{err}");
    }

    #[test]
    fn non_finite_raw_values_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let bytes: Vec<u8> = [0.25f32, f32::NAN]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        fs::write(dir.path().join("scene.img"), &bytes).unwrap();
        let hdr = write_header(dir.path(), &header_text(2, 1, 1, 4, "bsq"));
        let err = read_envi_cube(&hdr).unwrap_err();
        assert!(err.to_string().contains("non-finite"), "{err}");
    }

    #[test]
    fn multiline_wavelength_block() {
        let dir = tempfile::tempdir().unwrap();
        let bytes: Vec<u8> = [0.1f32, 0.2, 0.3]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        fs::write(dir.path().join("scene.img"), &bytes).unwrap();
        let text = header_text(1, 1, 3, 4, "bsq") + "wavelength = {\n 450.5,\n 550.0, 650.25\n}\n";
        let cube = read_envi_cube(write_header(dir.path(), &text)).unwrap();
        assert_eq!(cube.wavelengths(), Some(&[450.5, 550.0, 650.25][..]));
    }

    #[test]
    fn write_rejects_empty_path() {
        let cube = Cube::new(1, 1, 1, vec![0.5], None).unwrap();
        assert!(write_envi_cube(&cube, "").is_err());
    }

    #[test]
    fn write_then_read_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<f32> = (0..60)
            .map(|i| ((i * 37) % 61) as f32 / 61.0 + 1e-7)
            .collect();
        let wl: Vec<f64> = (0..3).map(|b| 400.0 + 10.5 * b as f64).collect();
        let cube = Cube::new(3, 4, 5, data, Some(wl)).unwrap();
        let hdr = dir.path().join("out.hdr");
        write_envi_cube(&cube, &hdr).unwrap();
        let back = read_envi_cube(&hdr).unwrap();
        let a: Vec<u32> = cube.data().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
        assert_eq!(cube.wavelengths(), back.wavelengths());
    }
}
