#![allow(dead_code)]

use pgru_core::abundance::AbundanceMap;
use pgru_core::features::{standardize, FeatureMatrix, K};
use pgru_core::models::{HapkeGeometry, Mechanism, DEFAULT_B_MAX, MECHANISMS};
use pgru_core::regime::{prepare_scene, ModelParams, SceneConfig, SceneState, Variant};
use pgru_core::synth::{generate_scene, Layout, SynthMechanism, SynthSpec, SyntheticScene};
use pgru_core::{sigmoid, PixelMatrix};
use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64;

pub fn scene(rows: usize, cols: usize, bands: usize, layout: Layout, seed: u64) -> SyntheticScene {
    let spec = SynthSpec {
        rows,
        cols,
        bands,
        endmembers: 3,
        layout,
        mechanism: SynthMechanism::Bilinear { gamma: 0.9 },
        noise: 0.005,
        seed,
    };
    generate_scene(&spec).unwrap()
}

pub fn state_for(scene: &SyntheticScene) -> SceneState {
    prepare_scene(&scene.cube, &scene.endmembers, &SceneConfig::default()).unwrap()
}

pub fn small_state(seed: u64) -> SceneState {
    state_for(&scene(4, 4, 8, Layout::HalfSplit, seed))
}

/// Parameters drawn uniformly from `[-scale, scale]`.
pub fn random_params(m: usize, tau: f64, scale: f64, seed: u64) -> ModelParams {
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut p = ModelParams::initial(m, tau);
    let flat: Vec<f64> = p
        .to_flat()
        .iter()
        .map(|_| scale * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    p.set_flat(&flat);
    p
}

pub fn gbm_only_attention() -> Variant {
    Variant {
        fixed_xi: None,
        fixed_alpha: Some(Mechanism::Gbm.one_hot()),
    }
}

pub fn on_simplex(alpha: &[f64; MECHANISMS]) -> bool {
    alpha.iter().all(|&a| (0.0..=1.0).contains(&a))
        && (alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12
}

/// Anisotropic total variation over 4-neighbour edges.
pub fn total_variation(values: &[f64], rows: usize, cols: usize) -> f64 {
    let mut tv = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let v = values[r * cols + c];
            if c + 1 < cols {
                tv += (v - values[r * cols + c + 1]).abs();
            }
            if r + 1 < rows {
                tv += (v - values[(r + 1) * cols + c]).abs();
            }
        }
    }
    tv
}

/// A scene of pure pixels with `y = s_lin`, random standardized features and
/// a prior that a logistic gate can reproduce exactly.
pub fn pure_pixel_state(w_star: [f64; K], b_star: f64) -> SceneState {
    let (rows, cols, bands) = (6, 6, 10);
    let n = rows * cols;
    let e = pgru_core::synth::generate_endmembers(bands, 3, 1).unwrap();
    let mut rng = Pcg64::seed_from_u64(8);
    let mut ab = Vec::with_capacity(n * 3);
    let mut y = Vec::with_capacity(n * bands);
    for _ in 0..n {
        let m = (rng.random::<f64>() * 3.0) as usize;
        let mut a = [0.0; 3];
        a[m] = 1.0;
        ab.extend_from_slice(&a);
        y.extend_from_slice(e.spectrum(m));
    }
    let planes: Vec<Vec<f64>> = (0..K)
        .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
        .collect();
    let features = standardize(&FeatureMatrix::from_planes(rows, cols, planes).unwrap());
    let prior: Vec<f64> = (0..n)
        .map(|i| {
            let f = features.pixel(i);
            sigmoid(f.iter().zip(&w_star).map(|(a, b)| a * b).sum::<f64>() + b_star)
        })
        .collect();
    SceneState::from_parts(
        rows,
        cols,
        PixelMatrix::new(bands, y).unwrap(),
        &e,
        AbundanceMap::from_pixels(rows, cols, 3, ab).unwrap(),
        features,
        prior,
        HapkeGeometry::default(),
        DEFAULT_B_MAX,
    )
    .unwrap()
}
