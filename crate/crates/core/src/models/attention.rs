use crate::error::{Error, Result};
use crate::features::K;

/// Number of nonlinear mechanisms combined by attention.
pub const MECHANISMS: usize = 3;
pub const MECHANISM_NAMES: [&str; MECHANISMS] = ["gbm", "ppnm", "hapke"];

/// Linear logits over the standardised features, softmaxed at temperature τ.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// One weight row per mechanism.
    pub u: [[f64; K]; MECHANISMS],
    pub c: [f64; MECHANISMS],
    pub tau: f64,
}

impl AttentionParams {
    /// Zero weights: uniform attention everywhere.
    pub fn uniform(tau: f64) -> Self {
        AttentionParams {
            u: [[0.0; K]; MECHANISMS],
            c: [0.0; MECHANISMS],
            tau,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!(
                "temperature τ = {} must be > 0",
                self.tau
            )));
        }
        if self
            .u
            .iter()
            .flatten()
            .chain(&self.c)
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("attention parameters must be finite"));
        }
        Ok(())
    }

    pub fn logits(&self, features: &[f64; K]) -> [f64; MECHANISMS] {
        std::array::from_fn(|k| {
            self.u[k]
                .iter()
                .zip(features)
                .map(|(u, f)| u * f)
                .sum::<f64>()
                + self.c[k]
        })
    }
}

/// `softmax(logits / τ)` with the max subtracted first.
pub fn softmax(logits: &[f64; MECHANISMS], tau: f64) -> [f64; MECHANISMS] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: [f64; MECHANISMS] = std::array::from_fn(|k| ((logits[k] - max) / tau).exp());
    let sum: f64 = e.iter().sum();
    std::array::from_fn(|k| e[k] / sum)
}

/// Per-pixel mechanism weights `α`.
pub fn attention_weights(features: &[f64; K], params: &AttentionParams) -> [f64; MECHANISMS] {
    softmax(&params.logits(features), params.tau)
}

/// Shannon entropy `−Σ α ln α` with `0 ln 0 = 0`.
pub fn attention_entropy(alpha: &[f64]) -> f64 {
    -alpha
        .iter()
        .filter(|&&a| a > 0.0)
        .map(|&a| a * a.ln())
        .sum::<f64>()
}

/// Residual spectra of the three mechanisms at one pixel plus their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStack {
    pub residuals: [Vec<f64>; MECHANISMS],
    pub alpha: [f64; MECHANISMS],
}

impl ResidualStack {
    pub fn new(residuals: [Vec<f64>; MECHANISMS], alpha: [f64; MECHANISMS]) -> Result<Self> {
        let bands = residuals[0].len();
        if residuals.iter().any(|r| r.len() != bands) {
            return Err(Error::DimensionMismatch(
                "residual spectra differ in length".into(),
            ));
        }
        if residuals.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("residual spectra must be finite"));
        }
        if alpha.iter().any(|&a| !(a >= 0.0)) || (alpha.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "α = {alpha:?} is not on the simplex"
            )));
        }
        Ok(ResidualStack { residuals, alpha })
    }
}

/// `δ_nl = Σ_k α_k δ_k`.
pub fn combined_residual(stack: &ResidualStack) -> Vec<f64> {
    combine(&stack.residuals, &stack.alpha)
}

pub(crate) fn combine(residuals: &[Vec<f64>; MECHANISMS], alpha: &[f64; MECHANISMS]) -> Vec<f64> {
    let bands = residuals[0].len();
    (0..bands)
        .map(|b| (0..MECHANISMS).map(|k| alpha[k] * residuals[k][b]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_cases() {
        let a = softmax(&[0.3, 0.3, 0.3], 1.0);
        assert!(a.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let a = softmax(&[2.0f64.ln(), 0.0, 0.0], 1.0);
        assert!((a[0] - 0.5).abs() < 1e-15);
        assert!((a[1] - 0.25).abs() < 1e-15 && (a[2] - 0.25).abs() < 1e-15);
        let a = softmax(&[0.2, 0.5, 0.1], 1e-3);
        assert!((a[1] - 1.0).abs() < 1e-12 && a[0] < 1e-12 && a[2] < 1e-12);
    }

    #[test]
    fn attention_from_features() {
        let mut p = AttentionParams::uniform(1.0);
        let f = [0.5, -1.0, 2.0, 0.0, 0.3, 1.0];
        assert!(attention_weights(&f, &p)
            .iter()
            .all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        p.c = [2.0f64.ln(), 0.0, 0.0];
        let a = attention_weights(&f, &p);
        assert!((a[0] - 0.5).abs() < 1e-15);
        p.tau = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn entropy_cases() {
        assert!((attention_entropy(&[1.0 / 3.0; 3]) - 3f64.ln()).abs() < 1e-15);
        assert_eq!(attention_entropy(&[0.0, 1.0, 0.0]), 0.0);
    }

    #[test]
    fn combination_cases() {
        let r = [vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        let s = ResidualStack::new(r.clone(), [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(combined_residual(&s), vec![1.0, 2.0]);
        let same = [vec![0.7, -0.2], vec![0.7, -0.2], vec![0.7, -0.2]];
        let s = ResidualStack::new(same, [0.2, 0.3, 0.5]).unwrap();
        let c = combined_residual(&s);
        assert!((c[0] - 0.7).abs() < 1e-15 && (c[1] + 0.2).abs() < 1e-15);
        assert!(ResidualStack::new(r, [0.5, 0.6, 0.0]).is_err());
    }
}
