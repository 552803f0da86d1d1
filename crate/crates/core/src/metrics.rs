//! Reconstruction quality and regime-map coherence.

use crate::cube::{MapF64, PixelMatrix};
use crate::error::{Error, Result};
use crate::math::{mean_std, norm};

/// Printed in manifests so numbers from different runs stay comparable.
pub const RRMSE_DEFINITION: &str =
    "rrmse = mean over pixels with ||y_i|| > 0 of ||y_i - yhat_i||_2 / ||y_i||_2";

/// Scene-mean of a per-pixel quantity with the number of excluded pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskedMean {
    pub value: f64,
    pub masked: usize,
}

/// Spectral angle in radians; `None` when either vector has zero norm.
///
/// Uses `2 atan2(‖u − v‖, ‖u + v‖)` on the unit vectors, which stays
/// accurate near 0 and π where `acos` of the cosine does not.
pub fn sad(y: &[f64], y_hat: &[f64]) -> Option<f64> {
    let (ny, nh) = (norm(y), norm(y_hat));
    if ny == 0.0 || nh == 0.0 || y.len() != y_hat.len() {
        return None;
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in y.iter().zip(y_hat) {
        let (u, v) = (a / ny, b / nh);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    Some(2.0 * diff.sqrt().atan2(sum.sqrt()))
}

fn check_dims(y: &PixelMatrix, y_hat: &PixelMatrix) -> Result<()> {
    if y.bands() != y_hat.bands() || y.pixels() != y_hat.pixels() {
        return Err(Error::DimensionMismatch(format!(
            "{}×{} observed vs {}×{} reconstructed",
            y.pixels(),
            y.bands(),
            y_hat.pixels(),
            y_hat.bands()
        )));
    }
    Ok(())
}

/// Mean spectral angle over pixels; zero-norm pixels are skipped and counted.
pub fn scene_sad(y: &PixelMatrix, y_hat: &PixelMatrix) -> Result<MaskedMean> {
    check_dims(y, y_hat)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (a, b) in y.iter().zip(y_hat.iter()) {
        if let Some(angle) = sad(a, b) {
            sum += angle;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::invalid("every pixel has a zero-norm spectrum"));
    }
    Ok(MaskedMean {
        value: sum / count as f64,
        masked: y.pixels() - count,
    })
}

/// Root mean square error over all pixels and bands.
pub fn rmse(y: &PixelMatrix, y_hat: &PixelMatrix) -> Result<f64> {
    check_dims(y, y_hat)?;
    let sq: f64 = y
        .as_slice()
        .iter()
        .zip(y_hat.as_slice())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok((sq / y.as_slice().len() as f64).sqrt())
}

/// Mean of per-pixel `‖y − ŷ‖ / ‖y‖`; zero-norm pixels are skipped.
pub fn rrmse(y: &PixelMatrix, y_hat: &PixelMatrix) -> Result<MaskedMean> {
    check_dims(y, y_hat)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (a, b) in y.iter().zip(y_hat.iter()) {
        let ny = norm(a);
        if ny == 0.0 {
            continue;
        }
        let err: f64 = a
            .iter()
            .zip(b)
            .map(|(u, v)| (u - v).powi(2))
            .sum::<f64>()
            .sqrt();
        sum += err / ny;
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid(
            "rRMSE undefined: every pixel has a zero-norm spectrum",
        ));
    }
    Ok(MaskedMean {
        value: sum / count as f64,
        masked: y.pixels() - count,
    })
}

/// Pearson correlation of two equally sized samples.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "samples of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (ma, sa) = mean_std(a);
    let (mb, sb) = mean_std(b);
    if sa == 0.0 || sb == 0.0 {
        return Err(Error::invalid("correlation undefined for a constant map"));
    }
    let cov = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / a.len() as f64;
    Ok((cov / (sa * sb)).clamp(-1.0, 1.0))
}

/// Physical coherence: Pearson correlation between the regime map and the
/// per-pixel reconstruction gain.
pub fn coherence_rho(xi: &MapF64, delta_res: &MapF64) -> Result<f64> {
    if xi.rows() != delta_res.rows() || xi.cols() != delta_res.cols() {
        return Err(Error::DimensionMismatch(
            "ξ and Δ_res maps differ in size".into(),
        ));
    }
    pearson(xi.values(), delta_res.values())
}

/// Probability that a random positive outscores a random negative (ties
/// count one half).
pub fn ranking_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch(
            "scores and labels differ in length".into(),
        ));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Average ranks over tied groups.
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid(
            "AUC needs both positive and negative labels",
        ));
    }
    let rank_sum: f64 = (0..labels.len())
        .filter(|&i| labels[i])
        .map(|i| ranks[i])
        .sum();
    Ok((rank_sum - (pos * (pos + 1)) as f64 / 2.0) / (pos * neg) as f64)
}

/// Scene-level summary for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneMetrics {
    pub sad: f64,
    pub rmse: f64,
    pub rrmse: f64,
    /// Only defined for a learned regime map.
    pub rho: Option<f64>,
    pub masked_pixels: usize,
}

pub fn scene_metrics(y: &PixelMatrix, y_hat: &PixelMatrix) -> Result<SceneMetrics> {
    let s = scene_sad(y, y_hat)?;
    let r = rrmse(y, y_hat)?;
    Ok(SceneMetrics {
        sad: s.value,
        rmse: rmse(y, y_hat)?,
        rrmse: r.value,
        rho: None,
        masked_pixels: s.masked.max(r.masked),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn pm(bands: usize, v: Vec<f64>) -> PixelMatrix {
        PixelMatrix::new(bands, v).unwrap()
    }

    #[test]
    fn sad_cases() {
        assert!(sad(&[0.2, 0.4], &[0.6, 1.2]).unwrap() < 1e-15);
        assert!((sad(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((sad(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert!(sad(&[0.0, 0.0], &[1.0, 1.0]).is_none());
        let a = [0.3, 0.1, 0.7];
        let b = [0.2, 0.5, 0.4];
        assert_eq!(sad(&a, &b), sad(&b, &a));
    }

    #[test]
    fn scene_sad_masks_zero_pixels() {
        let y = pm(2, vec![1.0, 0.0, 0.0, 0.0]);
        let h = pm(2, vec![1.0, 1.0, 0.5, 0.5]);
        let m = scene_sad(&y, &h).unwrap();
        assert_eq!(m.masked, 1);
        assert!((m.value - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn rmse_cases() {
        let y = pm(2, vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(rmse(&y, &y).unwrap(), 0.0);
        let shifted = pm(2, y.as_slice().iter().map(|v| v - 0.05).collect());
        assert!((rmse(&y, &shifted).unwrap() - 0.05).abs() < 1e-15);
        assert!(rmse(&y, &pm(1, vec![0.0; 4])).is_err());
    }

    #[test]
    fn rrmse_cases() {
        let y = pm(2, vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(rrmse(&y, &y).unwrap().value, 0.0);
        let scaled = pm(2, y.as_slice().iter().map(|v| 0.9 * v).collect());
        assert!((rrmse(&y, &scaled).unwrap().value - 0.1).abs() < 1e-15);
        let with_zero = pm(2, vec![0.1, 0.2, 0.0, 0.0]);
        assert_eq!(rrmse(&with_zero, &y).unwrap().masked, 1);
        assert!(rrmse(&pm(1, vec![0.0]), &pm(1, vec![0.1])).is_err());
    }

    #[test]
    fn rho_cases() {
        let xi = MapF64::new(2, 2, vec![0.1, 0.5, 0.3, 0.9]).unwrap();
        let aff = MapF64::new(2, 2, xi.values().iter().map(|v| 2.0 * v + 1.0).collect()).unwrap();
        let neg = MapF64::new(2, 2, xi.values().iter().map(|v| -v).collect()).unwrap();
        assert!((coherence_rho(&xi, &aff).unwrap() - 1.0).abs() < 1e-12);
        assert!((coherence_rho(&xi, &neg).unwrap() + 1.0).abs() < 1e-12);
        let err = coherence_rho(&MapF64::filled(2, 2, 0.5), &xi).unwrap_err();
        assert!(err.to_string().contains("correlation undefined"));
    }

    #[test]
    fn auc_cases() {
        assert_eq!(
            ranking_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(),
            1.0
        );
        assert_eq!(
            ranking_auc(&[0.9, 0.8, 0.2, 0.1], &[false, false, true, true]).unwrap(),
            0.0
        );
        assert_eq!(
            ranking_auc(&[0.5; 4], &[false, true, false, true]).unwrap(),
            0.5
        );
        assert!(ranking_auc(&[0.5, 0.6], &[true, true]).is_err());
    }
}
