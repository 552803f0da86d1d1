use crate::cube::EndmemberSet;
use crate::error::{Error, Result};
use crate::math::sigmoid;

/// Default bound on the PPNM quadratic coefficient.
pub const DEFAULT_B_MAX: f64 = 5.0;

/// Linear mixture `E · a`.
pub fn lmm_reconstruct(a: &[f64], endmembers: &EndmemberSet) -> Result<Vec<f64>> {
    if a.len() != endmembers.count() {
        return Err(Error::DimensionMismatch(format!(
            "{} abundances for {} endmembers",
            a.len(),
            endmembers.count()
        )));
    }
    Ok(lmm_unchecked(a, endmembers))
}

pub(crate) fn lmm_unchecked(a: &[f64], endmembers: &EndmemberSet) -> Vec<f64> {
    let mut out = vec![0.0; endmembers.bands()];
    for (m, &am) in a.iter().enumerate() {
        for (o, e) in out.iter_mut().zip(endmembers.spectrum(m)) {
            *o += am * e;
        }
    }
    out
}

/// Endmember index pairs `(m, n)` with `m < n`, in lexicographic order.
pub fn endmember_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .collect()
}

/// Pairwise interaction strengths `γ_mn ∈ (0, 1)`, stored as logits.
#[derive(Debug, Clone, PartialEq)]
pub struct GbmParams {
    /// One unconstrained value per pair, ordered as [`endmember_pairs`].
    pub raw: Vec<f64>,
}

impl GbmParams {
    /// All logits zero, i.e. every `γ = 0.5`.
    pub fn neutral(m: usize) -> Self {
        GbmParams {
            raw: vec![0.0; m * (m - 1) / 2],
        }
    }

    /// Builds parameters from `γ` values in `[0, 1]`. The endpoints map to
    /// large finite logits.
    pub fn from_gammas(gammas: &[f64]) -> Result<Self> {
        let raw = gammas
            .iter()
            .map(|&g| {
                if !(0.0..=1.0).contains(&g) {
                    return Err(Error::invalid(format!("γ = {g} outside [0, 1]")));
                }
                let g = g.clamp(1e-300, 1.0 - 1e-16);
                Ok((g / (1.0 - g)).ln())
            })
            .collect::<Result<_>>()?;
        Ok(GbmParams { raw })
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.raw.iter().map(|&r| sigmoid(r)).collect()
    }
}

/// Products `e_m ⊙ e_n` for every pair, the bilinear basis.
pub fn pair_products(endmembers: &EndmemberSet) -> Vec<Vec<f64>> {
    endmember_pairs(endmembers.count())
        .into_iter()
        .map(|(m, n)| {
            endmembers
                .spectrum(m)
                .iter()
                .zip(endmembers.spectrum(n))
                .map(|(a, b)| a * b)
                .collect()
        })
        .collect()
}

/// Generalised bilinear residual `Σ_{m<n} γ_mn a_m a_n (e_m ⊙ e_n)`.
pub fn gbm_residual(a: &[f64], endmembers: &EndmemberSet, gamma: &GbmParams) -> Result<Vec<f64>> {
    let pairs = endmember_pairs(endmembers.count());
    if a.len() != endmembers.count() || gamma.raw.len() != pairs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} abundances / {} γ values for {} endmembers",
            a.len(),
            gamma.raw.len(),
            endmembers.count()
        )));
    }
    let products = pair_products(endmembers);
    Ok(gbm_from_products(a, &pairs, &products, &gamma.gammas()))
}

pub(crate) fn gbm_from_products(
    a: &[f64],
    pairs: &[(usize, usize)],
    products: &[Vec<f64>],
    gammas: &[f64],
) -> Vec<f64> {
    let bands = products.first().map_or(0, Vec::len);
    let mut out = vec![0.0; bands];
    for (p, &(m, n)) in pairs.iter().enumerate() {
        let w = gammas[p] * a[m] * a[n];
        if w == 0.0 {
            continue;
        }
        for (o, e) in out.iter_mut().zip(&products[p]) {
            *o += w * e;
        }
    }
    out
}

/// Least-squares coefficient of `s ⊙ s` in `y − s`, clamped to
/// `[−b_max, b_max]`; zero when `‖s ⊙ s‖² < 1e-12`.
pub fn ppnm_fit_b(y: &[f64], s_lin: &[f64], b_max: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (yv, s) in y.iter().zip(s_lin) {
        let sq = s * s;
        num += (yv - s) * sq;
        den += sq * sq;
    }
    if den < 1e-12 {
        return 0.0;
    }
    (num / den).clamp(-b_max, b_max)
}

/// Post-nonlinear residual `b · (s ⊙ s)`.
pub fn ppnm_residual(s_lin: &[f64], b: f64) -> Vec<f64> {
    s_lin.iter().map(|s| b * s * s).collect()
}
