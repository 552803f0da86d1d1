use crate::abundance::{unmix_scene, AbundanceMap};
use crate::cube::{Cube, EndmemberSet, PixelMatrix};
use crate::error::{Error, Result};
use crate::features::{
    compute_features, compute_prior, standardize, FeatureConfig, FeatureMatrix, K,
};
use crate::models::{
    endmember_pairs, lmm_unchecked, pair_products, ppnm_fit_b, HapkeGeometry, HapkeTable,
    DEFAULT_B_MAX,
};

/// Everything fixed during training: observed spectra, linear fit, the
/// parameter-free residuals and the features.
#[derive(Debug, Clone)]
pub struct SceneState {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) bands: usize,
    pub(crate) y: PixelMatrix,
    pub(crate) s_lin: PixelMatrix,
    pub(crate) abundances: AbundanceMap,
    /// Closed-form PPNM coefficient per pixel.
    pub(crate) ppnm_b: Vec<f64>,
    /// Hapke residual per pixel, pixel-major.
    pub(crate) hapke: PixelMatrix,
    pub(crate) pairs: Vec<(usize, usize)>,
    pub(crate) products: Vec<Vec<f64>>,
    /// Standardised features, pixel-major.
    pub(crate) features: Vec<[f64; K]>,
    pub(crate) feature_matrix: FeatureMatrix,
    pub(crate) prior: Vec<f64>,
}

/// Settings that shape the fixed scene quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub features: FeatureConfig,
    pub geometry: HapkeGeometry,
    pub b_max: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            features: FeatureConfig::default(),
            geometry: HapkeGeometry::default(),
            b_max: DEFAULT_B_MAX,
        }
    }
}

impl SceneState {
    /// Assembles a state from already computed pieces. `features` must be
    /// standardised and `prior` must hold one value in `[0, 1]` per pixel.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        rows: usize,
        cols: usize,
        y: PixelMatrix,
        endmembers: &EndmemberSet,
        abundances: AbundanceMap,
        features: FeatureMatrix,
        prior: Vec<f64>,
        geometry: HapkeGeometry,
        b_max: f64,
    ) -> Result<Self> {
        let n = rows * cols;
        endmembers.check_bands(y.bands())?;
        if y.pixels() != n || abundances.pixels() != n || prior.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "scene pieces disagree on pixel count (expected {n})"
            )));
        }
        if abundances.endmembers() != endmembers.count() {
            return Err(Error::DimensionMismatch(
                "abundance width ≠ endmember count".into(),
            ));
        }
        if features.rows() != rows || features.cols() != cols {
            return Err(Error::DimensionMismatch("feature grid ≠ scene grid".into()));
        }
        if !features.is_standardized() {
            return Err(Error::invalid("scene features must be standardised"));
        }
        if prior.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("prior values must lie in [0, 1]"));
        }
        let bands = y.bands();
        let table = HapkeTable::new(endmembers, geometry)?;

        let mut s_vals = Vec::with_capacity(n * bands);
        let mut hapke_vals = Vec::with_capacity(n * bands);
        let mut ppnm_b = Vec::with_capacity(n);
        for i in 0..n {
            let a = abundances.pixel(i);
            let s = lmm_unchecked(a, endmembers);
            ppnm_b.push(ppnm_fit_b(y.pixel(i), &s, b_max));
            hapke_vals.extend(table.residual(a, &s));
            s_vals.extend(s);
        }
        let feature_rows = (0..n).map(|i| features.pixel(i)).collect();

        Ok(SceneState {
            rows,
            cols,
            bands,
            y,
            s_lin: PixelMatrix::new(bands, s_vals)?,
            abundances,
            ppnm_b,
            hapke: PixelMatrix::new(bands, hapke_vals)?,
            pairs: endmember_pairs(endmembers.count()),
            products: pair_products(endmembers),
            features: feature_rows,
            feature_matrix: features,
            prior,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    /// Number of endmember pairs, i.e. GBM coefficients.
    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn observed(&self) -> &PixelMatrix {
        &self.y
    }

    pub fn linear(&self) -> &PixelMatrix {
        &self.s_lin
    }

    pub fn abundances(&self) -> &AbundanceMap {
        &self.abundances
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.feature_matrix
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn ppnm_coefficients(&self) -> &[f64] {
        &self.ppnm_b
    }

    pub fn hapke_residuals(&self) -> &PixelMatrix {
        &self.hapke
    }
}

/// Unmixes the cube, extracts and standardises features, builds the prior
/// and precomputes the fixed residuals.
pub fn prepare_scene(
    cube: &Cube,
    endmembers: &EndmemberSet,
    config: &SceneConfig,
) -> Result<SceneState> {
    endmembers.check_bands(cube.bands())?;
    let abundances = unmix_scene(cube, endmembers)?;
    let raw = compute_features(cube, &config.features)?;
    let prior = compute_prior(&raw).values().to_vec();
    let features = standardize(&raw);
    SceneState::from_parts(
        cube.rows(),
        cube.cols(),
        cube.pixel_matrix(),
        endmembers,
        abundances,
        features,
        prior,
        config.geometry,
        config.b_max,
    )
}
