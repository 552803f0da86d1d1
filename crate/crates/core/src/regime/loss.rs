//! Training objective and its analytic gradient.
//!
//! Per pixel: `−tanh(Δ_res) + λ_feat (ξ − ξ_prior)² + λ_ent H(α)`; scene
//! terms: `λ_sp Σ_edges (ξ_i − ξ_j)²` and `λ_w ‖w‖²`. The PPNM coefficient
//! and the Hapke residual depend only on fixed quantities and carry no
//! parameters.

use rayon::prelude::*;

use super::{dirichlet_energy, dirichlet_gradient, RegimeParams, SceneState, TrainConfig};
use crate::error::{Error, Result};
use crate::features::K;
use crate::math::{dot, sigmoid};
use crate::models::{
    attention_entropy, gbm_from_products, softmax, AttentionParams, GbmParams, Mechanism,
    MECHANISMS,
};

/// Pixels per reduction block. Fixed so sums do not depend on threading.
const BLOCK: usize = 256;

/// All learnable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub regime: RegimeParams,
    pub attention: AttentionParams,
    pub gbm: GbmParams,
}

impl ModelParams {
    /// Maximum-entropy start: `ξ = 0.5`, uniform `α`, every `γ = 0.5`.
    pub fn initial(endmembers: usize, tau: f64) -> Self {
        ModelParams {
            regime: RegimeParams::default(),
            attention: AttentionParams::uniform(tau),
            gbm: GbmParams::neutral(endmembers),
        }
    }

    /// Flat layout: `w (K), b, u (3·K, row-major), c (3), γ logits`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(K + 1 + MECHANISMS * (K + 1) + self.gbm.raw.len());
        v.extend_from_slice(&self.regime.w);
        v.push(self.regime.b);
        for row in &self.attention.u {
            v.extend_from_slice(row);
        }
        v.extend_from_slice(&self.attention.c);
        v.extend_from_slice(&self.gbm.raw);
        v
    }

    /// Inverse of [`ModelParams::to_flat`]; `tau` is kept from `self`.
    pub fn set_flat(&mut self, v: &[f64]) {
        let mut it = v.iter().copied();
        for w in self.regime.w.iter_mut() {
            *w = it.next().unwrap();
        }
        self.regime.b = it.next().unwrap();
        for row in self.attention.u.iter_mut() {
            for u in row.iter_mut() {
                *u = it.next().unwrap();
            }
        }
        for c in self.attention.c.iter_mut() {
            *c = it.next().unwrap();
        }
        for g in self.gbm.raw.iter_mut() {
            *g = it.next().unwrap();
        }
    }
}

/// Gradient with the same shape as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w: [f64; K],
    pub b: f64,
    pub u: [[f64; K]; MECHANISMS],
    pub c: [f64; MECHANISMS],
    pub gbm_raw: Vec<f64>,
}

impl Gradient {
    fn zeros(pairs: usize) -> Self {
        Gradient {
            w: [0.0; K],
            b: 0.0,
            u: [[0.0; K]; MECHANISMS],
            c: [0.0; MECHANISMS],
            gbm_raw: vec![0.0; pairs],
        }
    }

    fn add(&mut self, other: &Gradient) {
        for k in 0..K {
            self.w[k] += other.w[k];
        }
        self.b += other.b;
        for m in 0..MECHANISMS {
            for k in 0..K {
                self.u[m][k] += other.u[m][k];
            }
            self.c[m] += other.c[m];
        }
        for (a, b) in self.gbm_raw.iter_mut().zip(&other.gbm_raw) {
            *a += b;
        }
    }

    /// Same layout as [`ModelParams::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(K + 1 + MECHANISMS * (K + 1) + self.gbm_raw.len());
        v.extend_from_slice(&self.w);
        v.push(self.b);
        for row in &self.u {
            v.extend_from_slice(row);
        }
        v.extend_from_slice(&self.c);
        v.extend_from_slice(&self.gbm_raw);
        v
    }
}

/// Which parts of the model are learned and which are pinned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variant {
    /// `Some(ξ)` pins the gate for every pixel and freezes `w, b`.
    pub fixed_xi: Option<f64>,
    /// `Some(α)` pins attention and freezes `u, c`.
    pub fixed_alpha: Option<[f64; MECHANISMS]>,
}

impl Variant {
    /// Feature-gated regime model with learned attention.
    pub const LEARNED: Variant = Variant {
        fixed_xi: None,
        fixed_alpha: None,
    };

    /// Nonlinearity on everywhere through a single mechanism.
    pub fn uniform(mechanism: Mechanism) -> Self {
        Variant {
            fixed_xi: Some(1.0),
            fixed_alpha: Some(mechanism.one_hot()),
        }
    }

    /// Parameters that receive gradient updates, in flat layout.
    pub fn trainable_mask(&self, pairs: usize) -> Vec<bool> {
        let mut mask = Vec::with_capacity(K + 1 + MECHANISMS * (K + 1) + pairs);
        mask.extend(std::iter::repeat_n(self.fixed_xi.is_none(), K + 1));
        mask.extend(std::iter::repeat_n(
            self.fixed_alpha.is_none(),
            MECHANISMS * (K + 1),
        ));
        let gbm_used = self
            .fixed_alpha
            .is_none_or(|a| a[Mechanism::Gbm.index()] != 0.0);
        mask.extend(std::iter::repeat_n(gbm_used, pairs));
        mask
    }
}

/// Individual objective terms, each already multiplied by its weight.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    /// `−Σ tanh(Δ_res)`.
    pub gain: f64,
    pub prior: f64,
    pub spatial: f64,
    pub weight_decay: f64,
    pub entropy: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.gain + self.prior + self.spatial + self.weight_decay + self.entropy
    }
}

/// Per-pixel forward quantities reused by the backward pass.
pub(crate) struct PixelForward {
    pub xi: f64,
    pub alpha: [f64; MECHANISMS],
    pub residuals: [Vec<f64>; MECHANISMS],
    pub combined: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub gain: f64,
    /// `(y − ŷ) / ‖y − ŷ‖`, zero when the residual vanishes.
    pub direction: Vec<f64>,
}

pub(crate) fn gate(state: &SceneState, params: &ModelParams, variant: &Variant, i: usize) -> f64 {
    match variant.fixed_xi {
        Some(x) => x,
        None => sigmoid(params.regime.pre_activation(&state.features[i])),
    }
}

pub(crate) fn forward_pixel(
    state: &SceneState,
    params: &ModelParams,
    variant: &Variant,
    gammas: &[f64],
    i: usize,
) -> PixelForward {
    let xi = gate(state, params, variant, i);
    let alpha = match variant.fixed_alpha {
        Some(a) => a,
        None => softmax(
            &params.attention.logits(&state.features[i]),
            params.attention.tau,
        ),
    };
    let s = state.s_lin.pixel(i);
    let y = state.y.pixel(i);
    let b = state.ppnm_b[i];
    let residuals = [
        gbm_from_products(
            state.abundances.pixel(i),
            &state.pairs,
            &state.products,
            gammas,
        ),
        s.iter().map(|v| b * v * v).collect(),
        state.hapke.pixel(i).to_vec(),
    ];
    let combined: Vec<f64> = (0..state.bands)
        .map(|band| (0..MECHANISMS).map(|k| alpha[k] * residuals[k][band]).sum())
        .collect();
    let y_hat: Vec<f64> = s.iter().zip(&combined).map(|(s, d)| s + xi * d).collect();

    let mut lin_sq = 0.0;
    let mut full_sq = 0.0;
    let mut direction = Vec::with_capacity(state.bands);
    for band in 0..state.bands {
        lin_sq += (y[band] - s[band]).powi(2);
        let r = y[band] - y_hat[band];
        full_sq += r * r;
        direction.push(r);
    }
    let full = full_sq.sqrt();
    if full > 0.0 {
        direction.iter_mut().for_each(|d| *d /= full);
    } else {
        direction.iter_mut().for_each(|d| *d = 0.0);
    }
    PixelForward {
        xi,
        alpha,
        residuals,
        combined,
        y_hat,
        gain: lin_sq.sqrt() - full,
        direction,
    }
}

fn check_finite(value: f64, pixel: Option<usize>, term: &str) -> Result<()> {
    if value.is_finite() {
        return Ok(());
    }
    Err(Error::Numerical(match pixel {
        Some(i) => format!("non-finite {term} term at pixel {i}"),
        None => format!("non-finite {term} term"),
    }))
}

fn gate_map(state: &SceneState, params: &ModelParams, variant: &Variant) -> Vec<f64> {
    (0..state.pixels())
        .map(|i| gate(state, params, variant, i))
        .collect()
}

/// Evaluates every term of the objective.
pub fn loss_terms(
    state: &SceneState,
    params: &ModelParams,
    variant: &Variant,
    lambda_feat: f64,
    config: &TrainConfig,
) -> Result<LossTerms> {
    Ok(evaluate(state, params, variant, lambda_feat, config, false)?.0)
}

/// Scalar objective.
pub fn total_loss(
    state: &SceneState,
    params: &ModelParams,
    variant: &Variant,
    lambda_feat: f64,
    config: &TrainConfig,
) -> Result<f64> {
    Ok(loss_terms(state, params, variant, lambda_feat, config)?.total())
}

/// Objective and its gradient with respect to every parameter. Frozen
/// parameters (per `variant`) get zero gradient.
pub fn grad_total_loss(
    state: &SceneState,
    params: &ModelParams,
    variant: &Variant,
    lambda_feat: f64,
    config: &TrainConfig,
) -> Result<(f64, Gradient)> {
    let (terms, grad) = evaluate(state, params, variant, lambda_feat, config, true)?;
    Ok((terms.total(), grad.expect("gradient requested")))
}

#[derive(Default)]
struct BlockSums {
    gain: f64,
    prior: f64,
    entropy: f64,
}

fn evaluate(
    state: &SceneState,
    params: &ModelParams,
    variant: &Variant,
    lambda_feat: f64,
    config: &TrainConfig,
    with_grad: bool,
) -> Result<(LossTerms, Option<Gradient>)> {
    let n = state.pixels();
    let pairs = state.pairs.len();
    let gammas = params.gbm.gammas();
    let xi_map = gate_map(state, params, variant);
    let spatial_grad = if with_grad && variant.fixed_xi.is_none() && config.lambda_sp != 0.0 {
        Some(dirichlet_gradient(&xi_map, state.rows, state.cols))
    } else {
        None
    };
    let tau = params.attention.tau;

    let blocks: Vec<Result<(BlockSums, Option<Gradient>)>> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|blk| {
            let mut sums = BlockSums::default();
            let mut grad = with_grad.then(|| Gradient::zeros(pairs));
            for i in blk * BLOCK..((blk + 1) * BLOCK).min(n) {
                let fwd = forward_pixel(state, params, variant, &gammas, i);
                let tanh = fwd.gain.tanh();
                let prior_diff = fwd.xi - state.prior[i];
                let entropy = attention_entropy(&fwd.alpha);
                check_finite(tanh, Some(i), "reconstruction-gain")?;
                check_finite(prior_diff, Some(i), "prior")?;
                check_finite(entropy, Some(i), "entropy")?;
                sums.gain -= tanh;
                sums.prior += lambda_feat * prior_diff * prior_diff;
                sums.entropy += config.lambda_ent * entropy;

                let Some(g) = grad.as_mut() else { continue };
                let d_gain = -(1.0 - tanh * tanh);

                if variant.fixed_xi.is_none() {
                    let mut d_xi = d_gain * dot(&fwd.direction, &fwd.combined)
                        + 2.0 * lambda_feat * prior_diff;
                    if let Some(sg) = &spatial_grad {
                        d_xi += config.lambda_sp * sg[i];
                    }
                    let d_z = d_xi * fwd.xi * (1.0 - fwd.xi);
                    let f = &state.features[i];
                    for k in 0..K {
                        g.w[k] += d_z * f[k];
                    }
                    g.b += d_z;
                }

                // ∂L/∂δ_nl = d_gain · ξ · direction
                let scale = d_gain * fwd.xi;
                let along: [f64; MECHANISMS] =
                    std::array::from_fn(|k| scale * dot(&fwd.direction, &fwd.residuals[k]));

                if variant.fixed_alpha.is_none() {
                    let d_alpha: [f64; MECHANISMS] = std::array::from_fn(|k| {
                        let ent = if fwd.alpha[k] > 0.0 {
                            -config.lambda_ent * (fwd.alpha[k].ln() + 1.0)
                        } else {
                            0.0
                        };
                        along[k] + ent
                    });
                    let mean: f64 = (0..MECHANISMS).map(|k| fwd.alpha[k] * d_alpha[k]).sum();
                    let f = &state.features[i];
                    for k in 0..MECHANISMS {
                        let d_logit = fwd.alpha[k] * (d_alpha[k] - mean) / tau;
                        for j in 0..K {
                            g.u[k][j] += d_logit * f[j];
                        }
                        g.c[k] += d_logit;
                    }
                }

                let alpha_gbm = fwd.alpha[Mechanism::Gbm.index()];
                if alpha_gbm != 0.0 && pairs > 0 {
                    let a = state.abundances.pixel(i);
                    for (p, &(m, nn)) in state.pairs.iter().enumerate() {
                        let w = a[m] * a[nn];
                        if w == 0.0 {
                            continue;
                        }
                        g.gbm_raw[p] +=
                            alpha_gbm * w * scale * dot(&fwd.direction, &state.products[p]);
                    }
                }
            }
            Ok((sums, grad))
        })
        .collect();

    let mut terms = LossTerms::default();
    let mut grad = with_grad.then(|| Gradient::zeros(pairs));
    for block in blocks {
        let (sums, g) = block?;
        terms.gain += sums.gain;
        terms.prior += sums.prior;
        terms.entropy += sums.entropy;
        if let (Some(total), Some(g)) = (grad.as_mut(), g) {
            total.add(&g);
        }
    }

    terms.spatial = config.lambda_sp * dirichlet_energy(&xi_map, state.rows, state.cols);
    terms.weight_decay = config.lambda_w * params.regime.w.iter().map(|w| w * w).sum::<f64>();
    check_finite(terms.spatial, None, "spatial")?;
    check_finite(terms.weight_decay, None, "weight-decay")?;

    if let Some(g) = grad.as_mut() {
        // dγ/d(raw) = γ(1 − γ)
        for (d, &gamma) in g.gbm_raw.iter_mut().zip(&gammas) {
            *d *= gamma * (1.0 - gamma);
        }
        if variant.fixed_xi.is_none() {
            for k in 0..K {
                g.w[k] += 2.0 * config.lambda_w * params.regime.w[k];
            }
        }
        if g.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite gradient".into()));
        }
    }
    Ok((terms, grad))
}
