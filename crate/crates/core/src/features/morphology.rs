//! Flat grayscale morphology with square structuring elements and
//! replicate padding, plus the profile features built on it.

use crate::cube::MapF64;
use crate::error::{Error, Result};

#[derive(Clone, Copy)]
enum Op {
    Erode,
    Dilate,
}

impl Op {
    fn pick(self, a: f64, b: f64) -> f64 {
        match self {
            Op::Erode => a.min(b),
            Op::Dilate => a.max(b),
        }
    }
}

/// Square filter of side `2·radius + 1`, done as a row pass then a column
/// pass (min/max over a square is separable).
fn rank_filter(values: &[f64], rows: usize, cols: usize, radius: usize, op: Op) -> Vec<f64> {
    let mut horizontal = vec![0.0; values.len()];
    for r in 0..rows {
        let line = &values[r * cols..(r + 1) * cols];
        for c in 0..cols {
            let lo = c.saturating_sub(radius);
            let hi = (c + radius).min(cols - 1);
            horizontal[r * cols + c] = line[lo..=hi]
                .iter()
                .copied()
                .reduce(|a, b| op.pick(a, b))
                .unwrap();
        }
    }
    let mut out = vec![0.0; values.len()];
    for c in 0..cols {
        for r in 0..rows {
            let lo = r.saturating_sub(radius);
            let hi = (r + radius).min(rows - 1);
            out[r * cols + c] = (lo..=hi)
                .map(|rr| horizontal[rr * cols + c])
                .reduce(|a, b| op.pick(a, b))
                .unwrap();
        }
    }
    out
}

pub fn erode(map: &MapF64, radius: usize) -> MapF64 {
    let v = rank_filter(map.values(), map.rows(), map.cols(), radius, Op::Erode);
    MapF64::new(map.rows(), map.cols(), v).expect("erosion preserves shape")
}

pub fn dilate(map: &MapF64, radius: usize) -> MapF64 {
    let v = rank_filter(map.values(), map.rows(), map.cols(), radius, Op::Dilate);
    MapF64::new(map.rows(), map.cols(), v).expect("dilation preserves shape")
}

/// Erosion followed by dilation.
pub fn opening(map: &MapF64, radius: usize) -> MapF64 {
    dilate(&erode(map, radius), radius)
}

/// Dilation followed by erosion.
pub fn closing(map: &MapF64, radius: usize) -> MapF64 {
    erode(&dilate(map, radius), radius)
}

fn check_scales(scales: &[usize]) -> Result<()> {
    if scales.is_empty() {
        return Err(Error::invalid(
            "morphological profile needs at least one scale",
        ));
    }
    if scales[0] == 0 || scales.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "profile radii must be positive and strictly increasing",
        ));
    }
    Ok(())
}

/// Profile levels ordered from the coarsest opening, through the base image,
/// to the coarsest closing.
pub fn morphological_profile(base: &MapF64, scales: &[usize]) -> Result<Vec<MapF64>> {
    check_scales(scales)?;
    let mut levels: Vec<MapF64> = scales.iter().rev().map(|&r| opening(base, r)).collect();
    levels.push(base.clone());
    levels.extend(scales.iter().map(|&r| closing(base, r)));
    Ok(levels)
}

/// Extended morphological profile scalarised as the population standard
/// deviation of each pixel's profile vector.
pub fn emp_feature(base: &MapF64, scales: &[usize]) -> Result<MapF64> {
    let levels = morphological_profile(base, scales)?;
    let n = levels.len() as f64;
    let values = (0..base.len())
        .map(|i| {
            let mean = levels.iter().map(|l| l.values()[i]).sum::<f64>() / n;
            let var = levels
                .iter()
                .map(|l| (l.values()[i] - mean).powi(2))
                .sum::<f64>()
                / n;
            var.sqrt()
        })
        .collect();
    MapF64::new(base.rows(), base.cols(), values)
}

/// Differential morphological profile scalarised as the largest absolute
/// step between successive profile levels.
pub fn dmp_feature(base: &MapF64, scales: &[usize]) -> Result<MapF64> {
    let levels = morphological_profile(base, scales)?;
    if levels.len() < 2 {
        return Err(Error::invalid("differential profile needs ≥ 2 levels"));
    }
    let values = (0..base.len())
        .map(|i| {
            levels
                .windows(2)
                .map(|w| (w[1].values()[i] - w[0].values()[i]).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    MapF64::new(base.rows(), base.cols(), values)
}
