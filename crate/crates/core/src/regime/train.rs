use super::loss::{forward_pixel, gate, grad_total_loss};
use super::{
    anneal_lambda_feat, feature_contributions, prepare_scene, Adam, ModelParams, SceneConfig,
    SceneState, TrainConfig, Variant,
};
use crate::abundance::AbundanceMap;
use crate::cube::{Cube, EndmemberSet, MapF64, PixelMatrix};
use crate::error::{Error, Result};
use crate::features::K;
use crate::models::MECHANISMS;

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub variant: Variant,
    /// Objective evaluated before each update.
    pub loss_trace: Vec<f64>,
    pub xi: MapF64,
    pub alpha: [MapF64; MECHANISMS],
    pub delta_res: MapF64,
}

/// Maps and reconstructions produced by a trained model.
#[derive(Debug, Clone)]
pub struct SceneResult {
    pub xi: MapF64,
    pub alpha: [MapF64; MECHANISMS],
    /// `ŷ` per pixel.
    pub reconstruction: PixelMatrix,
    /// `Δ_res` per pixel.
    pub delta_res: MapF64,
    pub abundances: AbundanceMap,
    /// Index of the feature with the largest `|w_k F_k|` per pixel.
    pub dominant_feature: Vec<u8>,
    /// `w_k F_k` planes.
    pub contributions: Vec<MapF64>,
}

impl SceneResult {
    pub fn dominant_feature_map(&self) -> MapF64 {
        let v = self
            .dominant_feature
            .iter()
            .map(|&d| f64::from(d))
            .collect();
        MapF64::new(self.xi.rows(), self.xi.cols(), v).expect("codes are finite")
    }
}

/// Full-batch Adam on the objective with annealed prior weight.
/// Initialisation is fixed, so a run depends only on its inputs.
pub fn train_scene(
    state: &SceneState,
    config: &TrainConfig,
    variant: Variant,
) -> Result<TrainedModel> {
    config.validate()?;
    let mut params = ModelParams::initial(state.abundances.endmembers(), config.tau);
    let mask = variant.trainable_mask(state.pair_count());
    let mut flat = params.to_flat();
    let mut adam = Adam::new(
        flat.len(),
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.epsilon,
    );
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lambda_feat = anneal_lambda_feat(epoch, config);
        let (loss, grad) = grad_total_loss(state, &params, &variant, lambda_feat, config)
            .map_err(|e| Error::Numerical(format!("epoch {epoch}: {e}")))?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite loss at epoch {epoch}"
            )));
        }
        trace.push(loss);
        adam.step(&mut flat, &grad.to_flat(), &mask);
        params.set_flat(&flat);
    }
    let result = predict(state, &params, &variant);
    Ok(TrainedModel {
        params,
        variant,
        loss_trace: trace,
        xi: result.xi,
        alpha: result.alpha,
        delta_res: result.delta_res,
    })
}

/// Prepares the scene and trains the learned-gate model on it.
pub fn train(
    cube: &Cube,
    endmembers: &EndmemberSet,
    config: &TrainConfig,
    scene: &SceneConfig,
) -> Result<(SceneState, TrainedModel)> {
    let scene = SceneConfig {
        b_max: config.b_max,
        ..scene.clone()
    };
    let state = prepare_scene(cube, endmembers, &scene)?;
    let model = train_scene(&state, config, Variant::LEARNED)?;
    Ok((state, model))
}

/// Evaluates a parameter set on every pixel of a prepared scene.
pub fn predict(state: &SceneState, params: &ModelParams, variant: &Variant) -> SceneResult {
    let n = state.pixels();
    let gammas = params.gbm.gammas();
    let mut xi = Vec::with_capacity(n);
    let mut alpha: [Vec<f64>; MECHANISMS] = std::array::from_fn(|_| Vec::with_capacity(n));
    let mut recon = Vec::with_capacity(n * state.bands);
    let mut gain = Vec::with_capacity(n);
    let mut dominant = Vec::with_capacity(n);
    let mut contributions: Vec<Vec<f64>> = (0..K).map(|_| Vec::with_capacity(n)).collect();
    for i in 0..n {
        let fwd = forward_pixel(state, params, variant, &gammas, i);
        debug_assert_eq!(fwd.xi, gate(state, params, variant, i));
        xi.push(fwd.xi);
        for k in 0..MECHANISMS {
            alpha[k].push(fwd.alpha[k]);
        }
        recon.extend_from_slice(&fwd.y_hat);
        gain.push(fwd.gain);
        let fc = feature_contributions(&state.features[i], &params.regime);
        dominant.push(fc.dominant as u8);
        for k in 0..K {
            contributions[k].push(fc.contributions[k]);
        }
    }
    let (rows, cols) = (state.rows, state.cols);
    let map = |v: Vec<f64>| MapF64::new(rows, cols, v).expect("finite model output");
    SceneResult {
        xi: map(xi),
        alpha: alpha.map(map),
        reconstruction: PixelMatrix::new(state.bands, recon).expect("whole spectra"),
        delta_res: map(gain),
        abundances: state.abundances.clone(),
        dominant_feature: dominant,
        contributions: contributions.into_iter().map(map).collect(),
    }
}
