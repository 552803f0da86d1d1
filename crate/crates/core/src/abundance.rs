//! Fully constrained least squares abundance estimation.
//!
//! The sum-to-one constraint is imposed by appending a heavily weighted row
//! of ones to the endmember matrix; non-negativity is handled by a
//! Lawson–Hanson active-set NNLS solve on that augmented system.

use rayon::prelude::*;

use crate::cube::{Cube, EndmemberSet, MapF64};
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;

/// Weight of the sum-to-one row relative to `max|E|`.
pub const SUM_ROW_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FclsSolution {
    /// Non-negative and summing to one.
    pub abundances: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Normal-equation form of the augmented problem, shared across pixels.
#[derive(Debug, Clone)]
pub struct FclsProblem<'a> {
    endmembers: &'a EndmemberSet,
    delta: f64,
    /// `AᵀA` of the augmented matrix, row-major `M × M`.
    gram: Vec<f64>,
    tol: f64,
    max_iter: usize,
}

impl<'a> FclsProblem<'a> {
    pub fn new(endmembers: &'a EndmemberSet) -> Self {
        Self::with_options(endmembers, DEFAULT_TOL, 10 * endmembers.count())
    }

    pub fn with_options(endmembers: &'a EndmemberSet, tol: f64, max_iter: usize) -> Self {
        let m = endmembers.count();
        let mut delta = SUM_ROW_FACTOR * endmembers.max_abs();
        if delta == 0.0 {
            delta = SUM_ROW_FACTOR;
        }
        let mut gram = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..=i {
                let dot: f64 = endmembers
                    .spectrum(i)
                    .iter()
                    .zip(endmembers.spectrum(j))
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    + delta * delta;
                gram[i * m + j] = dot;
                gram[j * m + i] = dot;
            }
        }
        FclsProblem {
            endmembers,
            delta,
            gram,
            tol,
            max_iter,
        }
    }

    fn m(&self) -> usize {
        self.endmembers.count()
    }

    /// Solves one pixel.
    pub fn solve(&self, y: &[f64]) -> Result<FclsSolution> {
        self.endmembers.check_bands(y.len())?;
        let m = self.m();
        // Aᵀb of the augmented system.
        let atb: Vec<f64> = (0..m)
            .map(|j| {
                self.endmembers
                    .spectrum(j)
                    .iter()
                    .zip(y)
                    .map(|(e, v)| e * v)
                    .sum::<f64>()
                    + self.delta * self.delta
            })
            .collect();

        let mut x = vec![0.0; m];
        let mut passive = vec![false; m];
        let mut converged = false;
        let mut iterations = 0;
        // Indices that re-entered and immediately left without moving x.
        let mut blocked = vec![false; m];

        loop {
            let dual = self.dual(&atb, &x);
            let entering = (0..m)
                .filter(|&j| !passive[j] && !blocked[j] && dual[j] > self.tol)
                .fold(None, |best: Option<usize>, j| match best {
                    Some(b) if dual[b] >= dual[j] => Some(b),
                    _ => Some(j),
                });
            let Some(t) = entering else {
                converged = true;
                break;
            };
            if iterations >= self.max_iter {
                break;
            }
            iterations += 1;
            passive[t] = true;

            let before = x.clone();
            for _ in 0..=m {
                let z = self.passive_solve(&atb, &passive);
                if (0..m).all(|j| !passive[j] || z[j] > 0.0) {
                    x = z;
                    break;
                }
                // Step back to the boundary of the feasible region.
                let mut alpha = f64::INFINITY;
                for j in 0..m {
                    if passive[j] && z[j] <= 0.0 {
                        let denom = x[j] - z[j];
                        let ratio = if denom > 0.0 { x[j] / denom } else { 0.0 };
                        alpha = alpha.min(ratio);
                    }
                }
                for j in 0..m {
                    if passive[j] {
                        x[j] += alpha * (z[j] - x[j]);
                    }
                }
                for j in 0..m {
                    if passive[j] && x[j] <= self.tol {
                        passive[j] = false;
                        x[j] = 0.0;
                    }
                }
            }
            if x == before {
                blocked[t] = true;
            } else {
                blocked.iter_mut().for_each(|b| *b = false);
            }
        }

        Ok(FclsSolution {
            abundances: normalize(x),
            converged,
            iterations,
        })
    }

    fn dual(&self, atb: &[f64], x: &[f64]) -> Vec<f64> {
        let m = self.m();
        (0..m)
            .map(|j| atb[j] - (0..m).map(|k| self.gram[j * m + k] * x[k]).sum::<f64>())
            .collect()
    }

    /// Unconstrained least squares restricted to the passive set, via a
    /// Cholesky factorisation of the passive block. Columns whose pivot
    /// collapses (linearly dependent on earlier ones) are held at zero.
    fn passive_solve(&self, atb: &[f64], passive: &[bool]) -> Vec<f64> {
        let m = self.m();
        let idx: Vec<usize> = (0..m).filter(|&j| passive[j]).collect();
        let p = idx.len();
        let mut l = vec![0.0; p * p];
        let mut live = vec![true; p];
        let scale = idx
            .iter()
            .map(|&j| self.gram[j * m + j])
            .fold(0.0, f64::max);
        for i in 0..p {
            for k in 0..=i {
                if !live[k] {
                    continue;
                }
                let mut s = self.gram[idx[i] * m + idx[k]];
                for r in 0..k {
                    if live[r] {
                        s -= l[i * p + r] * l[k * p + r];
                    }
                }
                if i == k {
                    if s <= 1e-13 * scale {
                        live[i] = false;
                    } else {
                        l[i * p + i] = s.sqrt();
                    }
                } else {
                    l[i * p + k] = s / l[k * p + k];
                }
            }
        }
        // Forward then backward substitution over live columns.
        let mut v = vec![0.0; p];
        for i in 0..p {
            if !live[i] {
                continue;
            }
            let mut s = atb[idx[i]];
            for k in 0..i {
                if live[k] {
                    s -= l[i * p + k] * v[k];
                }
            }
            v[i] = s / l[i * p + i];
        }
        let mut z = vec![0.0; p];
        for i in (0..p).rev() {
            if !live[i] {
                continue;
            }
            let mut s = v[i];
            for k in i + 1..p {
                if live[k] {
                    s -= l[k * p + i] * z[k];
                }
            }
            z[i] = s / l[i * p + i];
        }
        let mut out = vec![0.0; m];
        for (pos, &j) in idx.iter().enumerate() {
            out[j] = z[pos];
        }
        out
    }
}

fn normalize(mut x: Vec<f64>) -> Vec<f64> {
    x.iter_mut().for_each(|v| *v = v.max(0.0));
    let sum: f64 = x.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        x.iter_mut().for_each(|v| *v /= sum);
    } else {
        let m = x.len() as f64;
        x.iter_mut().for_each(|v| *v = 1.0 / m);
    }
    x
}

/// Fully constrained least squares for a single spectrum with default
/// tolerance (1e-10) and iteration cap (10·M).
pub fn fcls(y: &[f64], endmembers: &EndmemberSet) -> Result<FclsSolution> {
    FclsProblem::new(endmembers).solve(y)
}

/// `‖y − E a‖₂`.
pub fn residual_norm(y: &[f64], endmembers: &EndmemberSet, a: &[f64]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(b, v)| {
            let fit: f64 = a
                .iter()
                .enumerate()
                .map(|(m, am)| am * endmembers.spectrum(m)[b])
                .sum();
            (v - fit).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Per-pixel abundances, pixel-major (`M` values per pixel).
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceMap {
    rows: usize,
    cols: usize,
    m: usize,
    values: Vec<f64>,
    non_converged: usize,
}

impl AbundanceMap {
    /// Validates feasibility and clamps tiny negatives to zero.
    pub fn from_pixels(rows: usize, cols: usize, m: usize, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols * m {
            return Err(Error::DimensionMismatch(format!(
                "{} abundance values for {rows}×{cols}×{m}",
                values.len()
            )));
        }
        for (p, a) in values.chunks_exact_mut(m).enumerate() {
            if a.iter().any(|&v| !v.is_finite() || v < -1e-10) {
                return Err(Error::invalid(format!("negative abundance at pixel {p}")));
            }
            a.iter_mut().for_each(|v| *v = v.max(0.0));
            let sum: f64 = a.iter().sum();
            if (sum - 1.0).abs() > 1e-8 {
                return Err(Error::invalid(format!(
                    "abundances at pixel {p} sum to {sum}"
                )));
            }
        }
        Ok(AbundanceMap {
            rows,
            cols,
            m,
            values,
            non_converged: 0,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn endmembers(&self) -> usize {
        self.m
    }

    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    /// Pixels where the active-set iteration hit its cap.
    pub fn non_converged(&self) -> usize {
        self.non_converged
    }

    /// Abundance plane of endmember `m`.
    pub fn plane(&self, m: usize) -> MapF64 {
        let values = self.values.chunks_exact(self.m).map(|a| a[m]).collect();
        MapF64::new(self.rows, self.cols, values).expect("abundances are finite")
    }
}

/// Runs FCLS on every pixel. Pixels are solved independently so the result
/// does not depend on how the work is split.
pub fn unmix_scene(cube: &Cube, endmembers: &EndmemberSet) -> Result<AbundanceMap> {
    endmembers.check_bands(cube.bands())?;
    let problem = FclsProblem::new(endmembers);
    let pixels = cube.pixel_matrix();
    let solutions: Vec<FclsSolution> = (0..pixels.pixels())
        .into_par_iter()
        .map(|i| problem.solve(pixels.pixel(i)))
        .collect::<Result<_>>()?;
    let non_converged = solutions.iter().filter(|s| !s.converged).count();
    let values = solutions.into_iter().flat_map(|s| s.abundances).collect();
    let mut map = AbundanceMap::from_pixels(cube.rows(), cube.cols(), endmembers.count(), values)?;
    map.non_converged = non_converged;
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(spectra: Vec<Vec<f64>>) -> EndmemberSet {
        EndmemberSet::unnamed(spectra).unwrap()
    }

    fn assert_feasible(a: &[f64]) {
        assert!(a.iter().all(|&v| v >= 0.0));
        assert!((a.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn pure_pixel_is_one_hot() {
        let e = set(vec![
            vec![0.1, 0.5, 0.9],
            vec![0.8, 0.3, 0.2],
            vec![0.4, 0.4, 0.1],
        ]);
        let sol = fcls(e.spectrum(0), &e).unwrap();
        assert!(sol.converged);
        assert!((sol.abundances[0] - 1.0).abs() < 1e-9);
        assert!(sol.abundances[1].abs() < 1e-9 && sol.abundances[2].abs() < 1e-9);
    }

    #[test]
    fn orthogonal_endmembers() {
        let e = set(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let sol = fcls(&[0.3, 0.7], &e).unwrap();
        assert!((sol.abundances[0] - 0.3).abs() < 1e-12);
        assert!((sol.abundances[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn outside_hull_projects_to_a_face() {
        let e = set(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let sol = fcls(&[1.2, -0.1], &e).unwrap();
        assert_feasible(&sol.abundances);
        assert!((sol.abundances[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn duplicated_endmembers_are_handled() {
        let e = set(vec![
            vec![0.2, 0.4, 0.6],
            vec![0.2, 0.4, 0.6],
            vec![0.9, 0.1, 0.3],
        ]);
        let y: Vec<f64> = (0..3)
            .map(|b| 0.5 * e.spectrum(0)[b] + 0.5 * e.spectrum(2)[b])
            .collect();
        let sol = fcls(&y, &e).unwrap();
        assert_feasible(&sol.abundances);
        assert!(residual_norm(&y, &e, &sol.abundances) < 1e-6);
        // The lower index enters first and keeps the shared weight.
        assert!((sol.abundances[0] - 0.5).abs() < 1e-6);
        assert_eq!(sol.abundances[1], 0.0);
    }

    #[test]
    fn iteration_cap_returns_feasible_iterate() {
        let e = set(vec![
            vec![0.1, 0.5, 0.9],
            vec![0.8, 0.3, 0.2],
            vec![0.4, 0.4, 0.1],
        ]);
        let problem = FclsProblem::with_options(&e, DEFAULT_TOL, 1);
        let y = [0.4, 0.4, 0.4];
        let sol = problem.solve(&y).unwrap();
        assert_feasible(&sol.abundances);
        assert!(sol.iterations <= 1);
    }

    #[test]
    fn band_mismatch() {
        let e = set(vec![vec![0.1, 0.5], vec![0.8, 0.3]]);
        assert!(fcls(&[0.1, 0.2, 0.3], &e).is_err());
    }

    #[test]
    fn scene_of_pure_and_mixed_pixels() {
        let e = set(vec![vec![0.1, 0.5, 0.9], vec![0.8, 0.3, 0.2]]);
        let truth = [[1.0, 0.0], [0.0, 1.0], [0.25, 0.75], [0.6, 0.4]];
        let n = truth.len();
        let mut data = vec![0.0f32; 3 * n];
        for (p, a) in truth.iter().enumerate() {
            for b in 0..3 {
                data[b * n + p] = (a[0] * e.spectrum(0)[b] + a[1] * e.spectrum(1)[b]) as f32;
            }
        }
        let cube = Cube::new(3, 2, 2, data, None).unwrap();
        let map = unmix_scene(&cube, &e).unwrap();
        for (p, a) in truth.iter().enumerate() {
            for m in 0..2 {
                // f32 storage limits recovery to ~1e-7.
                assert!((map.pixel(p)[m] - a[m]).abs() < 1e-6);
            }
        }
        assert_eq!(map.non_converged(), 0);
        let bad = EndmemberSet::unnamed(vec![vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        assert!(unmix_scene(&cube, &bad).is_err());
    }
}
