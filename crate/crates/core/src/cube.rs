//! In-memory carriers for reflectance cubes, endmember libraries and
//! per-pixel scalar maps.

use crate::error::{Error, Result};

/// Lowest reflectance accepted at load time.
pub const REFLECTANCE_MIN: f32 = -0.05;
/// Highest reflectance accepted at load time.
pub const REFLECTANCE_MAX: f32 = 1.5;

/// Band-sequential reflectance cube (`bands × rows × cols`).
///
/// Values are stored as `f32`, the on-disk precision. Anything numerical
/// reads them through [`Cube::pixel_matrix`], which widens to `f64` and
/// clamps into `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    bands: usize,
    rows: usize,
    cols: usize,
    data: Vec<f32>,
    wavelengths: Option<Vec<f64>>,
}

impl Cube {
    /// Builds a cube from band-sequential data, enforcing every invariant.
    pub fn new(
        bands: usize,
        rows: usize,
        cols: usize,
        data: Vec<f32>,
        wavelengths: Option<Vec<f64>>,
    ) -> Result<Self> {
        if bands == 0 {
            return Err(Error::invalid("bands must be ≥ 1"));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "rows and cols must be ≥ 1 (got {rows}×{cols})"
            )));
        }
        let expected = bands * rows * cols;
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "cube data has {} values, expected {bands}·{rows}·{cols} = {expected}",
                data.len()
            )));
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite reflectance at flat index {idx}"
            )));
        }
        if let Some(idx) = data
            .iter()
            .position(|&v| !(REFLECTANCE_MIN..=REFLECTANCE_MAX).contains(&v))
        {
            return Err(Error::invalid(format!(
                "reflectance {} at flat index {idx} outside [{REFLECTANCE_MIN}, {REFLECTANCE_MAX}]",
                data[idx]
            )));
        }
        if let Some(wl) = &wavelengths {
            if wl.len() != bands {
                return Err(Error::DimensionMismatch(format!(
                    "{} wavelengths for {bands} bands",
                    wl.len()
                )));
            }
            if wl.iter().any(|w| !w.is_finite()) || wl.windows(2).any(|p| p[1] <= p[0]) {
                return Err(Error::invalid(
                    "wavelengths must be finite and strictly increasing",
                ));
            }
        }
        Ok(Cube {
            bands,
            rows,
            cols,
            data,
            wavelengths,
        })
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of pixels (`rows · cols`).
    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    /// Raw band-sequential storage.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn wavelengths(&self) -> Option<&[f64]> {
        self.wavelengths.as_deref()
    }

    /// Stored value at `(band, row, col)`.
    pub fn get(&self, band: usize, row: usize, col: usize) -> f32 {
        self.data[(band * self.rows + row) * self.cols + col]
    }

    /// One band as a contiguous `rows · cols` slice.
    pub fn band(&self, band: usize) -> &[f32] {
        let n = self.pixels();
        &self.data[band * n..(band + 1) * n]
    }

    /// Unclamped spectrum of a pixel (row-major pixel index), widened to f64.
    pub fn spectrum(&self, pixel: usize) -> Vec<f64> {
        let n = self.pixels();
        (0..self.bands)
            .map(|b| f64::from(self.data[b * n + pixel]))
            .collect()
    }

    /// Pixel-major `f64` copy of the cube clamped to `[0, 1]`, the form
    /// every model consumes.
    pub fn pixel_matrix(&self) -> PixelMatrix {
        let n = self.pixels();
        let mut values = vec![0.0; n * self.bands];
        for b in 0..self.bands {
            for (p, &v) in self.band(b).iter().enumerate() {
                values[p * self.bands + b] = f64::from(v).clamp(0.0, 1.0);
            }
        }
        PixelMatrix {
            bands: self.bands,
            values,
        }
    }
}

/// Pixel-major spectra, one contiguous row of `bands` values per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMatrix {
    bands: usize,
    values: Vec<f64>,
}

impl PixelMatrix {
    pub fn new(bands: usize, values: Vec<f64>) -> Result<Self> {
        if bands == 0 || !values.len().is_multiple_of(bands) {
            return Err(Error::DimensionMismatch(format!(
                "{} values is not a whole number of {bands}-band spectra",
                values.len()
            )));
        }
        Ok(PixelMatrix { bands, values })
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> usize {
        self.values.len() / self.bands
    }

    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.values[i * self.bands..(i + 1) * self.bands]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.bands)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Library of `M ≥ 2` pure spectra sharing the cube's band axis.
#[derive(Debug, Clone, PartialEq)]
pub struct EndmemberSet {
    bands: usize,
    /// One spectrum per endmember, each `bands` long.
    spectra: Vec<Vec<f64>>,
    names: Vec<String>,
}

impl EndmemberSet {
    pub fn new(spectra: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        if spectra.len() < 2 {
            return Err(Error::invalid(format!(
                "M ≥ 2 endmembers required (got {})",
                spectra.len()
            )));
        }
        if names.len() != spectra.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} endmembers",
                names.len(),
                spectra.len()
            )));
        }
        let bands = spectra[0].len();
        if bands == 0 {
            return Err(Error::invalid("endmember spectra must have ≥ 1 band"));
        }
        for (m, s) in spectra.iter().enumerate() {
            if s.len() != bands {
                return Err(Error::DimensionMismatch(format!(
                    "endmember {m} has {} bands, expected {bands}",
                    s.len()
                )));
            }
            if let Some(b) = s
                .iter()
                .position(|v| !v.is_finite() || !(0.0..=1.0).contains(v))
            {
                return Err(Error::invalid(format!(
                    "endmember {m} band {b} value {} outside [0, 1]",
                    s[b]
                )));
            }
        }
        Ok(EndmemberSet {
            bands,
            spectra,
            names,
        })
    }

    /// Builds a set with generated names `em0, em1, …`.
    pub fn unnamed(spectra: Vec<Vec<f64>>) -> Result<Self> {
        let names = (0..spectra.len()).map(|m| format!("em{m}")).collect();
        Self::new(spectra, names)
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// Number of endmembers `M`.
    pub fn count(&self) -> usize {
        self.spectra.len()
    }

    pub fn spectrum(&self, m: usize) -> &[f64] {
        &self.spectra[m]
    }

    pub fn spectra(&self) -> &[Vec<f64>] {
        &self.spectra
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Largest absolute entry of the library.
    pub fn max_abs(&self) -> f64 {
        self.spectra
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub(crate) fn check_bands(&self, bands: usize) -> Result<()> {
        if bands != self.bands {
            return Err(Error::DimensionMismatch(format!(
                "cube has {bands} bands but endmembers have {}",
                self.bands
            )));
        }
        Ok(())
    }
}

/// One scalar per pixel in row-major order, with an optional validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MapF64 {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    /// `true` marks a valid pixel. Masked pixels may hold non-finite values.
    mask: Option<Vec<bool>>,
}

impl MapF64 {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "map has {} values, expected {rows}×{cols}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite map value at pixel {i}")));
        }
        Ok(MapF64 {
            rows,
            cols,
            values,
            mask: None,
        })
    }

    pub fn with_mask(rows: usize, cols: usize, values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != rows * cols || mask.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "map/mask sizes {}/{} do not match {rows}×{cols}",
                values.len(),
                mask.len()
            )));
        }
        if let Some(i) = (0..values.len()).find(|&i| mask[i] && !values[i].is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite unmasked value at pixel {i}"
            )));
        }
        Ok(MapF64 {
            rows,
            cols,
            values,
            mask: Some(mask),
        })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        MapF64 {
            rows,
            cols,
            values: vec![value; rows * cols],
            mask: None,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[i])
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }
}
