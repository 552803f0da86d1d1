//! Per-pixel regime gate, its training objective and the optimiser loop.
//!
//! Each pixel is reconstructed as `ŷ = s_lin + ξ · δ_nl` where `ξ` is a
//! logistic function of the standardised features and `δ_nl` is the
//! attention-weighted nonlinear residual. Training never sees regime labels:
//! the gate is pushed up where the nonlinear term shortens the residual and
//! pulled toward the feature prior everywhere.

mod loss;
mod optim;
mod state;
mod train;

pub use loss::{
    grad_total_loss, loss_terms, total_loss, Gradient, LossTerms, ModelParams, Variant,
};
pub use optim::Adam;
pub use state::{prepare_scene, SceneConfig, SceneState};
pub use train::{predict, train, train_scene, SceneResult, TrainedModel};

use crate::cube::MapF64;
use crate::error::{Error, Result};
use crate::features::K;
use crate::math::{norm, sigmoid};

/// Gate parameters `w` (one per feature) and offset `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeParams {
    pub w: [f64; K],
    pub b: f64,
}

impl Default for RegimeParams {
    fn default() -> Self {
        RegimeParams {
            w: [0.0; K],
            b: 0.0,
        }
    }
}

impl RegimeParams {
    pub fn pre_activation(&self, features: &[f64; K]) -> f64 {
        self.w.iter().zip(features).map(|(w, f)| w * f).sum::<f64>() + self.b
    }
}

/// Regime scalar `ξ = σ(w·F + b)`.
pub fn xi(features: &[f64; K], params: &RegimeParams) -> f64 {
    sigmoid(params.pre_activation(features))
}

/// Additive decomposition of the gate's pre-activation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureContributions {
    /// `w_k · F_k`.
    pub contributions: [f64; K],
    /// Index of the largest `|w_k · F_k|`, lowest index on ties.
    pub dominant: usize,
}

pub fn feature_contributions(features: &[f64; K], params: &RegimeParams) -> FeatureContributions {
    let contributions: [f64; K] = std::array::from_fn(|k| params.w[k] * features[k]);
    let mut dominant = 0;
    for k in 1..K {
        if contributions[k].abs() > contributions[dominant].abs() {
            dominant = k;
        }
    }
    FeatureContributions {
        contributions,
        dominant,
    }
}

/// `‖y − s_lin‖ − ‖y − ŷ‖`: how much the full reconstruction shortens the
/// linear residual.
pub fn reconstruction_gain(y: &[f64], s_lin: &[f64], y_hat: &[f64]) -> f64 {
    let lin: Vec<f64> = y.iter().zip(s_lin).map(|(a, b)| a - b).collect();
    let full: Vec<f64> = y.iter().zip(y_hat).map(|(a, b)| a - b).collect();
    norm(&lin) - norm(&full)
}

/// Dirichlet energy over 4-neighbour edges, `Σ (ξ_i − ξ_j)²`.
pub fn laplacian_penalty(map: &MapF64) -> f64 {
    dirichlet_energy(map.values(), map.rows(), map.cols())
}

pub(crate) fn dirichlet_energy(values: &[f64], rows: usize, cols: usize) -> f64 {
    let mut sum = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let v = values[r * cols + c];
            if c + 1 < cols {
                sum += (v - values[r * cols + c + 1]).powi(2);
            }
            if r + 1 < rows {
                sum += (v - values[(r + 1) * cols + c]).powi(2);
            }
        }
    }
    sum
}

/// `∂/∂ξ_i` of the Dirichlet energy: `2 Σ_{j ∈ N(i)} (ξ_i − ξ_j)`.
pub(crate) fn dirichlet_gradient(values: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut grad = vec![0.0; values.len()];
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            let mut g = 0.0;
            if c > 0 {
                g += values[i] - values[i - 1];
            }
            if c + 1 < cols {
                g += values[i] - values[i + 1];
            }
            if r > 0 {
                g += values[i] - values[i - cols];
            }
            if r + 1 < rows {
                g += values[i] - values[i + cols];
            }
            grad[i] = 2.0 * g;
        }
    }
    grad
}

/// Hyper-parameters of the objective and the optimiser.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lambda_feat0: f64,
    pub lambda_feat_final: f64,
    pub lambda_sp: f64,
    pub lambda_w: f64,
    pub lambda_ent: f64,
    pub tau: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Recorded for reproducibility; initialisation is deterministic.
    pub seed: u64,
    pub b_max: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_feat0: 1.0,
            lambda_feat_final: 0.1,
            lambda_sp: 0.01,
            lambda_w: 1e-4,
            lambda_ent: 0.01,
            tau: 1.0,
            learning_rate: 0.01,
            epochs: 500,
            seed: 0,
            b_max: 5.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let lambdas = [
            ("lambda_feat0", self.lambda_feat0),
            ("lambda_feat_final", self.lambda_feat_final),
            ("lambda_sp", self.lambda_sp),
            ("lambda_w", self.lambda_w),
            ("lambda_ent", self.lambda_ent),
        ];
        for (name, v) in lambdas {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be ≥ 0")));
            }
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau = {} must be > 0", self.tau)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate = {} must be > 0",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be ≥ 1".into()));
        }
        if !(self.b_max >= 0.0 && self.b_max.is_finite()) {
            return Err(Error::Config(format!("b_max = {} must be ≥ 0", self.b_max)));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} must lie in [0, 1)")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "epsilon = {} must be > 0",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Prior weight at `epoch`, linear from `lambda_feat0` (first epoch) to
/// `lambda_feat_final` (last epoch).
pub fn anneal_lambda_feat(epoch: usize, config: &TrainConfig) -> f64 {
    if config.epochs <= 1 {
        return config.lambda_feat0;
    }
    let t = (epoch.min(config.epochs - 1)) as f64 / (config.epochs - 1) as f64;
    config.lambda_feat0 + t * (config.lambda_feat_final - config.lambda_feat0)
}
