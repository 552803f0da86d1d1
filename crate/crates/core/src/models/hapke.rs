//! Isotropic-scattering Hapke reflectance without opposition surge.
//!
//! Intimate mixtures are linear in single-scattering albedo, so the Hapke
//! residual converts each endmember to albedo, mixes there, and converts
//! back to reflectance.

use crate::cube::EndmemberSet;
use crate::error::{Error, Result};

/// Largest albedo used when inverting reflectance.
pub const W_UPPER: f64 = 1.0 - 1e-9;
const INVERSION_TOL: f64 = 1e-10;
const MAX_BISECTIONS: usize = 200;

/// Cosines of the incidence (`mu0`) and emergence (`mu`) angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HapkeGeometry {
    pub mu0: f64,
    pub mu: f64,
}

impl Default for HapkeGeometry {
    fn default() -> Self {
        HapkeGeometry { mu0: 1.0, mu: 1.0 }
    }
}

impl HapkeGeometry {
    pub fn new(mu0: f64, mu: f64) -> Result<Self> {
        let g = HapkeGeometry { mu0, mu };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mu0", self.mu0), ("mu", self.mu)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(format!("{name} = {v} outside (0, 1]")));
            }
        }
        Ok(())
    }

    /// Reflectance approached as the albedo tends to one.
    pub fn max_reflectance(&self) -> f64 {
        refl_unchecked(W_UPPER, self)
    }
}

/// Chandrasekhar H-function approximation `(1 + 2μ) / (1 + 2μ√(1 − w))`.
pub fn h_function(mu: f64, w: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&w) {
        return Err(Error::invalid(format!("albedo w = {w} outside [0, 1)")));
    }
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::invalid(format!("μ = {mu} outside (0, 1]")));
    }
    Ok(h_unchecked(mu, w))
}

fn h_unchecked(mu: f64, w: f64) -> f64 {
    (1.0 + 2.0 * mu) / (1.0 + 2.0 * mu * (1.0 - w).sqrt())
}

fn refl_unchecked(w: f64, g: &HapkeGeometry) -> f64 {
    w / 4.0 / (g.mu0 + g.mu) * h_unchecked(g.mu0, w) * h_unchecked(g.mu, w)
}

/// Bidirectional reflectance of a particulate surface with albedo `w`.
pub fn ssa_to_refl(w: f64, g: &HapkeGeometry) -> Result<f64> {
    if !(0.0..1.0).contains(&w) {
        return Err(Error::invalid(format!("albedo w = {w} outside [0, 1)")));
    }
    g.validate()?;
    Ok(refl_unchecked(w, g))
}

/// Inverts [`ssa_to_refl`] by bisection. `r` is first clamped into
/// `[0, r(W_UPPER)]`.
pub fn refl_to_ssa(r: f64, g: &HapkeGeometry) -> f64 {
    let r_max = g.max_reflectance();
    let r = if r.is_nan() { 0.0 } else { r.clamp(0.0, r_max) };
    if r == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, W_UPPER);
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTIONS {
        mid = 0.5 * (lo + hi);
        let err = refl_unchecked(mid, g) - r;
        if err.abs() < INVERSION_TOL {
            break;
        }
        if err < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    mid
}

/// Endmember albedos precomputed for repeated residual evaluation.
#[derive(Debug, Clone)]
pub struct HapkeTable {
    geometry: HapkeGeometry,
    /// `albedo[m][band]`.
    albedo: Vec<Vec<f64>>,
}

impl HapkeTable {
    pub fn new(endmembers: &EndmemberSet, geometry: HapkeGeometry) -> Result<Self> {
        geometry.validate()?;
        let albedo = endmembers
            .spectra()
            .iter()
            .map(|s| s.iter().map(|&r| refl_to_ssa(r, &geometry)).collect())
            .collect();
        Ok(HapkeTable { geometry, albedo })
    }

    pub fn geometry(&self) -> HapkeGeometry {
        self.geometry
    }

    /// Reflectance of the albedo-space mixture with abundances `a`.
    pub fn mixed_reflectance(&self, a: &[f64]) -> Vec<f64> {
        let bands = self.albedo[0].len();
        (0..bands)
            .map(|b| {
                let w: f64 = a.iter().zip(&self.albedo).map(|(am, al)| am * al[b]).sum();
                refl_unchecked(w.clamp(0.0, W_UPPER), &self.geometry)
            })
            .collect()
    }

    /// Hapke residual relative to the linear mixture `s_lin`.
    pub fn residual(&self, a: &[f64], s_lin: &[f64]) -> Vec<f64> {
        self.mixed_reflectance(a)
            .into_iter()
            .zip(s_lin)
            .map(|(r, s)| r - s)
            .collect()
    }
}

/// `ssa_to_refl(Σ_m a_m · refl_to_ssa(e_m)) − E a`, band by band.
pub fn hapke_residual(a: &[f64], endmembers: &EndmemberSet, g: &HapkeGeometry) -> Result<Vec<f64>> {
    let s_lin = super::mixing::lmm_reconstruct(a, endmembers)?;
    Ok(HapkeTable::new(endmembers, *g)?.residual(a, &s_lin))
}
