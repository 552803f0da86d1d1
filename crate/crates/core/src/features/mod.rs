//! Physical and geometric per-pixel features that drive the regime gate,
//! and the feature-based prior the gate is anchored to.

mod lbp;
mod morphology;
mod spectral;

pub use lbp::{circular_transitions, lbp_code, lbp_feature};
pub use morphology::{
    closing, dilate, dmp_feature, emp_feature, erode, morphological_profile, opening,
};
pub use spectral::{
    base_image, ndvi, ndvi_gradient, resolve_ndvi_bands, spectral_curvature, FALLBACK_RANGE_NM,
    NIR_NM, RED_NM,
};

use crate::cube::{Cube, MapF64};
use crate::error::{Error, Result};

/// Number of feature planes.
pub const K: usize = 6;

/// Plane order used everywhere: weights, contributions, dominant-feature codes.
pub const FEATURE_NAMES: [&str; K] = ["curvature", "ndvi", "ndvi_gradient", "emp", "dmp", "lbp"];

/// Settings for the feature extractors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub red_band: Option<usize>,
    pub nir_band: Option<usize>,
    /// Structuring-element radii for EMP/DMP.
    pub scales: Vec<usize>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            red_band: None,
            nir_band: None,
            scales: vec![1, 2, 3],
        }
    }
}

/// Mean and population standard deviation of a plane before z-scoring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneStats {
    pub mean: f64,
    /// Zero for a constant plane.
    pub std: f64,
}

/// `K` feature planes over a `rows × cols` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    planes: Vec<Vec<f64>>,
    stats: Option<Vec<PlaneStats>>,
}

impl FeatureMatrix {
    /// Wraps raw (unstandardised) planes.
    pub fn from_planes(rows: usize, cols: usize, planes: Vec<Vec<f64>>) -> Result<Self> {
        if planes.len() != K {
            return Err(Error::DimensionMismatch(format!(
                "{} feature planes, expected {K}",
                planes.len()
            )));
        }
        for (k, p) in planes.iter().enumerate() {
            if p.len() != rows * cols {
                return Err(Error::DimensionMismatch(format!(
                    "plane {k} has {} values, expected {}",
                    p.len(),
                    rows * cols
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "plane {} is not finite",
                    FEATURE_NAMES[k]
                )));
            }
        }
        Ok(FeatureMatrix {
            rows,
            cols,
            planes,
            stats: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    pub fn plane(&self, k: usize) -> &[f64] {
        &self.planes[k]
    }

    pub fn plane_map(&self, k: usize) -> MapF64 {
        MapF64::new(self.rows, self.cols, self.planes[k].clone()).expect("planes are finite")
    }

    pub fn is_standardized(&self) -> bool {
        self.stats.is_some()
    }

    pub fn stats(&self) -> Option<&[PlaneStats]> {
        self.stats.as_deref()
    }

    /// Feature vector of one pixel.
    pub fn pixel(&self, i: usize) -> [f64; K] {
        std::array::from_fn(|k| self.planes[k][i])
    }
}

/// Computes the six raw feature planes of a cube.
pub fn compute_features(cube: &Cube, config: &FeatureConfig) -> Result<FeatureMatrix> {
    let base = base_image(cube);
    let curvature = spectral_curvature(cube)?;
    let (red, nir) = resolve_ndvi_bands(cube, config.red_band, config.nir_band)?;
    let ndvi_map = ndvi(cube, red, nir)?;
    let gradient = ndvi_gradient(&ndvi_map)?;
    let emp = emp_feature(&base, &config.scales)?;
    let dmp = dmp_feature(&base, &config.scales)?;
    let texture = lbp_feature(&base)?;
    FeatureMatrix::from_planes(
        cube.rows(),
        cube.cols(),
        vec![
            curvature.into_values(),
            ndvi_map.into_values(),
            gradient.into_values(),
            emp.into_values(),
            dmp.into_values(),
            texture.into_values(),
        ],
    )
}

fn is_constant(plane: &[f64]) -> bool {
    let (lo, hi) = plane
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1.0)
}

/// Z-scores every plane with the population standard deviation. Constant
/// planes become all zeros with `std = 0` recorded.
pub fn standardize(raw: &FeatureMatrix) -> FeatureMatrix {
    let n = raw.pixels() as f64;
    let mut planes = Vec::with_capacity(K);
    let mut stats = Vec::with_capacity(K);
    for plane in &raw.planes {
        let mean = plane.iter().sum::<f64>() / n;
        if is_constant(plane) {
            planes.push(vec![0.0; plane.len()]);
            stats.push(PlaneStats { mean, std: 0.0 });
            continue;
        }
        let std = (plane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        planes.push(plane.iter().map(|v| (v - mean) / std).collect());
        stats.push(PlaneStats { mean, std });
    }
    FeatureMatrix {
        rows: raw.rows,
        cols: raw.cols,
        planes,
        stats: Some(stats),
    }
}

/// Feature-based prior on the regime scalar, one value in `[0, 1]` per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorMap(MapF64);

impl PriorMap {
    pub fn new(map: MapF64) -> Result<Self> {
        if map.values().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("prior values must lie in [0, 1]"));
        }
        Ok(PriorMap(map))
    }

    pub fn map(&self) -> &MapF64 {
        &self.0
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }
}

/// Equal-weight mean of the min-max normalised raw planes; a constant
/// plane contributes 0.5 everywhere.
pub fn compute_prior(raw: &FeatureMatrix) -> PriorMap {
    let n = raw.pixels();
    let mut acc = vec![0.0; n];
    for plane in &raw.planes {
        let (lo, hi) = plane
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let span = hi - lo;
        for (a, &v) in acc.iter_mut().zip(plane) {
            *a += if is_constant(plane) {
                0.5
            } else {
                ((v - lo) / span).clamp(0.0, 1.0)
            };
        }
    }
    let values = acc
        .into_iter()
        .map(|a| (a / K as f64).clamp(0.0, 1.0))
        .collect();
    PriorMap(MapF64::new(raw.rows, raw.cols, values).expect("prior is finite"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(planes: Vec<Vec<f64>>, cols: usize) -> FeatureMatrix {
        let n = planes[0].len();
        FeatureMatrix::from_planes(n / cols, cols, planes).unwrap()
    }

    #[test]
    fn standardize_small_plane() {
        let mut planes = vec![vec![1.0, 2.0, 3.0]];
        planes.extend((1..K).map(|_| vec![4.0; 3]));
        let z = standardize(&matrix(planes, 3));
        let expected = 1.5_f64.sqrt(); // 1/√(2/3)
        let p = z.plane(0);
        assert!((p[0] + expected).abs() < 1e-12);
        assert!(p[1].abs() < 1e-12);
        assert!((p[2] - expected).abs() < 1e-12);
        assert!((p[2] - 1.2247).abs() < 1e-4);
        for k in 1..K {
            assert!(z.plane(k).iter().all(|&v| v == 0.0));
            assert_eq!(z.stats().unwrap()[k].std, 0.0);
        }
    }

    #[test]
    fn standardize_is_idempotent() {
        let planes: Vec<Vec<f64>> = (0..K)
            .map(|k| {
                (0..12)
                    .map(|i| ((i * (k + 3)) % 7) as f64 * 0.3 + k as f64)
                    .collect()
            })
            .collect();
        let once = standardize(&matrix(planes, 4));
        let twice = standardize(&once);
        for k in 0..K {
            for (a, b) in once.plane(k).iter().zip(twice.plane(k)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn prior_of_constant_planes_is_half() {
        let planes = (0..K).map(|k| vec![k as f64; 4]).collect();
        let prior = compute_prior(&matrix(planes, 2));
        assert!(prior.values().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn prior_with_one_ramp() {
        let ramp = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let mut planes = vec![ramp.clone()];
        planes.extend((1..K).map(|_| vec![2.0; 5]));
        let prior = compute_prior(&matrix(planes, 5));
        for (p, r) in prior.values().iter().zip(&ramp) {
            assert!((p - (r + 5.0 * 0.5) / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_wrong_plane_count() {
        assert!(FeatureMatrix::from_planes(1, 1, vec![vec![0.0]]).is_err());
    }
}
