//! Per-pixel features read directly off the spectra.

use crate::cube::{Cube, MapF64};
use crate::error::{Error, Result};

/// Wavelength (nm) the red band resolver aims for.
pub const RED_NM: f64 = 660.0;
/// Wavelength (nm) the near-infrared band resolver aims for.
pub const NIR_NM: f64 = 800.0;
/// Assumed spectral range when a cube carries no wavelengths.
pub const FALLBACK_RANGE_NM: (f64, f64) = (400.0, 2500.0);

/// Mean reflectance over bands, the grayscale base for texture features.
pub fn base_image(cube: &Cube) -> MapF64 {
    let n = cube.pixels();
    let mut acc = vec![0.0; n];
    for b in 0..cube.bands() {
        for (a, &v) in acc.iter_mut().zip(cube.band(b)) {
            *a += f64::from(v);
        }
    }
    let bands = cube.bands() as f64;
    acc.iter_mut().for_each(|a| *a /= bands);
    MapF64::new(cube.rows(), cube.cols(), acc).expect("finite cube gives finite mean")
}

/// Mean absolute second difference along the band axis.
pub fn spectral_curvature(cube: &Cube) -> Result<MapF64> {
    let bands = cube.bands();
    if bands < 3 {
        return Err(Error::invalid(format!(
            "spectral curvature needs ≥ 3 bands (got {bands})"
        )));
    }
    let n = cube.pixels();
    let mut acc = vec![0.0; n];
    for b in 1..bands - 1 {
        let (prev, mid, next) = (cube.band(b - 1), cube.band(b), cube.band(b + 1));
        for p in 0..n {
            let d2 = f64::from(prev[p]) - 2.0 * f64::from(mid[p]) + f64::from(next[p]);
            acc[p] += d2.abs();
        }
    }
    let interior = (bands - 2) as f64;
    acc.iter_mut().for_each(|a| *a /= interior);
    MapF64::new(cube.rows(), cube.cols(), acc)
}

fn nearest_band(wavelengths: &[f64], target: f64) -> usize {
    let mut best = 0;
    for (i, w) in wavelengths.iter().enumerate() {
        if (w - target).abs() < (wavelengths[best] - target).abs() {
            best = i;
        }
    }
    best
}

/// Picks `(red, nir)` band indices. Explicit indices win; otherwise the
/// bands nearest 660 nm and 800 nm are used, assuming an even 400–2500 nm
/// grid when the cube has no wavelengths. When both are automatic and land
/// on the same band, NIR moves one band up (or red one band down at the
/// top of the range).
pub fn resolve_ndvi_bands(
    cube: &Cube,
    red: Option<usize>,
    nir: Option<usize>,
) -> Result<(usize, usize)> {
    let bands = cube.bands();
    let grid: Vec<f64> = match cube.wavelengths() {
        Some(wl) => wl.to_vec(),
        None => {
            let (lo, hi) = FALLBACK_RANGE_NM;
            let step = if bands > 1 {
                (hi - lo) / (bands - 1) as f64
            } else {
                0.0
            };
            (0..bands).map(|b| lo + step * b as f64).collect()
        }
    };
    let auto = red.is_none() && nir.is_none();
    let mut red = red.unwrap_or_else(|| nearest_band(&grid, RED_NM));
    let mut nir = nir.unwrap_or_else(|| nearest_band(&grid, NIR_NM));
    if auto && red == nir && bands > 1 {
        if nir + 1 < bands {
            nir += 1;
        } else {
            red -= 1;
        }
    }
    if red >= bands || nir >= bands {
        return Err(Error::invalid(format!(
            "NDVI band index out of range (red {red}, nir {nir}, bands {bands})"
        )));
    }
    if red == nir {
        return Err(Error::invalid(format!(
            "red and NIR bands resolve to the same index {red}"
        )));
    }
    Ok((red, nir))
}

/// Normalised difference `(NIR − RED) / (NIR + RED)`, zero where the
/// denominator is below 1e-12.
pub fn ndvi(cube: &Cube, red_band: usize, nir_band: usize) -> Result<MapF64> {
    if red_band == nir_band {
        return Err(Error::invalid("red_band and nir_band must differ"));
    }
    if red_band >= cube.bands() || nir_band >= cube.bands() {
        return Err(Error::invalid("NDVI band index out of range"));
    }
    let (red, nir) = (cube.band(red_band), cube.band(nir_band));
    let values = red
        .iter()
        .zip(nir)
        .map(|(&r, &n)| {
            let (r, n) = (f64::from(r), f64::from(n));
            let den = n + r;
            if den.abs() < 1e-12 {
                0.0
            } else {
                (n - r) / den
            }
        })
        .collect();
    MapF64::new(cube.rows(), cube.cols(), values)
}

/// Gradient magnitude from central differences, one-sided at the borders.
pub fn ndvi_gradient(ndvi: &MapF64) -> Result<MapF64> {
    let (rows, cols) = (ndvi.rows(), ndvi.cols());
    if rows < 2 || cols < 2 {
        return Err(Error::invalid(format!(
            "gradient needs at least 2×2 pixels (got {rows}×{cols})"
        )));
    }
    let diff = |lo: f64, hi: f64, span: usize| (hi - lo) / span as f64;
    let mut values = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let (cl, ch) = (c.saturating_sub(1), (c + 1).min(cols - 1));
            let (rl, rh) = (r.saturating_sub(1), (r + 1).min(rows - 1));
            let gx = diff(ndvi.get(r, cl), ndvi.get(r, ch), ch - cl);
            let gy = diff(ndvi.get(rl, c), ndvi.get(rh, c), rh - rl);
            values.push(gx.hypot(gy));
        }
    }
    MapF64::new(rows, cols, values)
}
