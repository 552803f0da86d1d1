//! Side-by-side comparison of the learned model with linear and uniform
//! nonlinear baselines. Every method shares the same abundances.

use std::fmt;
use std::str::FromStr;

use crate::cube::PixelMatrix;
use crate::error::{Error, Result};
use crate::metrics::{coherence_rho, scene_metrics, SceneMetrics};
use crate::models::Mechanism;
use crate::regime::{predict, train_scene, ModelParams, SceneState, TrainConfig, Variant};

/// Column header of the metrics CSV.
pub const METRICS_HEADER: &str = "method,sad,rmse,rrmse,rho";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Lmm,
    Gbm,
    Ppnm,
    Hapke,
    Pgru,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Lmm,
        Method::Gbm,
        Method::Ppnm,
        Method::Hapke,
        Method::Pgru,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lmm => "lmm",
            Method::Gbm => "gbm",
            Method::Ppnm => "ppnm",
            Method::Hapke => "hapke",
            Method::Pgru => "pgru",
        }
    }

    /// Model variant used to produce the reconstruction; `None` for LMM.
    pub fn variant(self) -> Option<Variant> {
        match self {
            Method::Lmm => None,
            Method::Gbm => Some(Variant::uniform(Mechanism::Gbm)),
            Method::Ppnm => Some(Variant::uniform(Mechanism::Ppnm)),
            Method::Hapke => Some(Variant::uniform(Mechanism::Hapke)),
            Method::Pgru => Some(Variant::LEARNED),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Parses a comma-separated method list, keeping order and dropping repeats.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let m: Method = name.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("no methods given".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: Method,
    pub metrics: SceneMetrics,
    pub reconstruction: PixelMatrix,
}

/// Reconstructs the scene with one method.
///
/// Uniform baselines pin `ξ ≡ 1` and a one-hot attention; only the bilinear
/// coefficients remain trainable, and when nothing is trainable the initial
/// parameters are used directly.
pub fn run_method(
    state: &SceneState,
    config: &TrainConfig,
    method: Method,
) -> Result<MethodResult> {
    let observed = state.observed();
    let Some(variant) = method.variant() else {
        return Ok(MethodResult {
            method,
            metrics: scene_metrics(observed, state.linear())?,
            reconstruction: state.linear().clone(),
        });
    };
    let trainable = variant
        .trainable_mask(state.pair_count())
        .into_iter()
        .any(|t| t);
    let params = if trainable {
        train_scene(state, config, variant)?.params
    } else {
        ModelParams::initial(state.abundances().endmembers(), config.tau)
    };
    let result = predict(state, &params, &variant);
    let mut metrics = scene_metrics(observed, &result.reconstruction)?;
    if method == Method::Pgru {
        metrics.rho = coherence_rho(&result.xi, &result.delta_res).ok();
    }
    Ok(MethodResult {
        method,
        metrics,
        reconstruction: result.reconstruction,
    })
}

pub fn run_eval(
    state: &SceneState,
    config: &TrainConfig,
    methods: &[Method],
) -> Result<Vec<MethodResult>> {
    config.validate()?;
    methods
        .iter()
        .map(|&m| run_method(state, config, m))
        .collect()
}

/// Metrics CSV with [`METRICS_HEADER`]; `rho` is empty where undefined.
pub fn metrics_csv(results: &[MethodResult]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in results {
        let m = &r.metrics;
        let rho = m.rho.map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.method, m.sad, m.rmse, m.rrmse, rho
        ));
    }
    s
}
