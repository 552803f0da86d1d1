//! Synthetic scenes with a known per-pixel mixing regime.
//!
//! Random streams come from PCG-64 (XSL-RR 128/64): the endmember library
//! is drawn from `seed_from_u64(seed)` and the scene (abundances, then
//! noise, pixel by pixel in row-major order) from
//! `seed_from_u64(seed ^ SCENE_STREAM_SALT)`.

use std::fmt;
use std::str::FromStr;

use rand::{RngExt, SeedableRng};
use rand_distr::StandardNormal;
use rand_pcg::Pcg64;

use crate::cube::{Cube, EndmemberSet};
use crate::error::{Error, Result};
use crate::metrics::sad;
use crate::models::{endmember_pairs, HapkeGeometry, HapkeTable};

/// Identifier written to manifests.
pub const RNG_ID: &str =
    "pcg64 xsl-rr-128/64 (rand_pcg 0.10), normals via rand_distr 0.6 StandardNormal";
pub const SCENE_STREAM_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

const MIN_PAIRWISE_SAD: f64 = 0.15;
const MAX_TRIES: usize = 100;
const SPECTRUM_FLOOR: f64 = 0.05;
const SPECTRUM_CEIL: f64 = 0.95;
/// Wavelength grid assigned to synthetic cubes (nm).
pub const WAVELENGTH_RANGE: (f64, f64) = (400.0, 2500.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Left half linear, right half nonlinear.
    HalfSplit,
    /// Checkerboard of square blocks, a quarter of the shorter side wide.
    Blocks,
    AllLinear,
    AllNonlinear,
}

impl Layout {
    pub fn is_nonlinear(self, row: usize, col: usize, rows: usize, cols: usize) -> bool {
        match self {
            Layout::HalfSplit => col >= cols / 2,
            Layout::Blocks => {
                let size = (rows.min(cols) / 4).max(1);
                (row / size + col / size) % 2 == 1
            }
            Layout::AllLinear => false,
            Layout::AllNonlinear => true,
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::HalfSplit => "half-split",
            Layout::Blocks => "blocks",
            Layout::AllLinear => "all-linear",
            Layout::AllNonlinear => "all-nonlinear",
        })
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half-split" => Ok(Layout::HalfSplit),
            "blocks" => Ok(Layout::Blocks),
            "all-linear" => Ok(Layout::AllLinear),
            "all-nonlinear" => Ok(Layout::AllNonlinear),
            other => Err(Error::Config(format!("unknown layout `{other}`"))),
        }
    }
}

/// How nonlinear pixels are generated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SynthMechanism {
    /// Adds `γ Σ_{m<n} a_m a_n e_m ⊙ e_n` with one shared `γ`.
    Bilinear { gamma: f64 },
    /// Adds `b (E a)²`.
    Ppnm { b: f64 },
    /// Mixes in single-scattering albedo at nadir geometry.
    Hapke,
}

impl SynthMechanism {
    pub fn name(&self) -> &'static str {
        match self {
            SynthMechanism::Bilinear { .. } => "bilinear",
            SynthMechanism::Ppnm { .. } => "ppnm",
            SynthMechanism::Hapke => "hapke",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub endmembers: usize,
    pub layout: Layout,
    pub mechanism: SynthMechanism,
    /// Standard deviation of additive Gaussian noise, reflectance units.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            rows: 64,
            cols: 64,
            bands: 50,
            endmembers: 3,
            layout: Layout::HalfSplit,
            mechanism: SynthMechanism::Bilinear { gamma: 0.9 },
            noise: 0.005,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 2 || self.cols < 2 {
            return Err(Error::Config(format!(
                "scene must be at least 2×2 (got {}×{})",
                self.rows, self.cols
            )));
        }
        if self.bands < 3 {
            return Err(Error::Config(format!("bands = {} must be ≥ 3", self.bands)));
        }
        if self.endmembers < 2 {
            return Err(Error::Config(format!(
                "endmembers = {} must be ≥ 2",
                self.endmembers
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!("noise = {} must be ≥ 0", self.noise)));
        }
        match self.mechanism {
            SynthMechanism::Bilinear { gamma } if !(0.0..=1.0).contains(&gamma) => {
                Err(Error::Config(format!("gamma = {gamma} outside [0, 1]")))
            }
            SynthMechanism::Ppnm { b } if !b.is_finite() => {
                Err(Error::Config("ppnm_b must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

/// A generated scene plus its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub cube: Cube,
    pub endmembers: EndmemberSet,
    /// Pixel-major, `M` per pixel.
    pub abundances: Vec<f64>,
    /// `1` for pixels generated by the nonlinear mechanism.
    pub labels: Vec<u8>,
    /// Mechanism used at each pixel, `None` where linear.
    pub mechanisms: Vec<Option<SynthMechanism>>,
}

fn smooth_spectrum(rng: &mut Pcg64, bands: usize) -> Vec<f64> {
    let span = (bands - 1) as f64;
    let base: f64 = 0.15 + 0.45 * rng.random::<f64>();
    let bumps = 2 + (rng.random::<f64>() * 3.0) as usize;
    let params: Vec<(f64, f64, f64)> = (0..bumps)
        .map(|_| {
            let amp = -0.35 + 0.8 * rng.random::<f64>();
            let center = (-0.1 + 1.2 * rng.random::<f64>()) * span;
            let width = (0.05 + 0.25 * rng.random::<f64>()) * bands as f64;
            (amp, center, width)
        })
        .collect();
    (0..bands)
        .map(|b| {
            let x = b as f64;
            let v = base
                + params
                    .iter()
                    .map(|(a, c, w)| a * (-0.5 * ((x - c) / w).powi(2)).exp())
                    .sum::<f64>();
            v.clamp(SPECTRUM_FLOOR, SPECTRUM_CEIL)
        })
        .collect()
}

/// Draws `m` smooth spectra whose pairwise spectral angles are all ≥ 0.15 rad.
pub fn generate_endmembers(bands: usize, m: usize, seed: u64) -> Result<EndmemberSet> {
    if bands < 3 || m < 2 {
        return Err(Error::invalid(format!(
            "need bands ≥ 3 and M ≥ 2 (got {bands}, {m})"
        )));
    }
    let mut rng = Pcg64::seed_from_u64(seed);
    for _ in 0..MAX_TRIES {
        let spectra: Vec<Vec<f64>> = (0..m).map(|_| smooth_spectrum(&mut rng, bands)).collect();
        let separated = endmember_pairs(m)
            .into_iter()
            .all(|(i, j)| sad(&spectra[i], &spectra[j]).is_some_and(|a| a >= MIN_PAIRWISE_SAD));
        if separated {
            return EndmemberSet::unnamed(spectra);
        }
    }
    Err(Error::Numerical(format!(
        "no {m}-member library with pairwise SAD ≥ {MIN_PAIRWISE_SAD} after {MAX_TRIES} tries"
    )))
}

/// Uniform draw from the probability simplex via sorted-uniform spacings.
pub fn sample_simplex(rng: &mut Pcg64, m: usize) -> Vec<f64> {
    let mut cuts: Vec<f64> = (0..m - 1).map(|_| rng.random::<f64>()).collect();
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(m);
    let mut prev = 0.0;
    for c in cuts {
        out.push(c - prev);
        prev = c;
    }
    out.push(1.0 - prev);
    out
}

/// Generates a scene exactly as described by `spec`.
pub fn generate_scene(spec: &SynthSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let endmembers = generate_endmembers(spec.bands, spec.endmembers, spec.seed)?;
    let mut rng = Pcg64::seed_from_u64(spec.seed ^ SCENE_STREAM_SALT);
    let (rows, cols, bands, m) = (spec.rows, spec.cols, spec.bands, spec.endmembers);
    let n = rows * cols;
    let pairs = endmember_pairs(m);
    let hapke = match spec.mechanism {
        SynthMechanism::Hapke => Some(HapkeTable::new(&endmembers, HapkeGeometry::default())?),
        _ => None,
    };

    let mut data = vec![0.0f32; bands * n];
    let mut abundances = Vec::with_capacity(n * m);
    let mut labels = Vec::with_capacity(n);
    let mut mechanisms = Vec::with_capacity(n);
    for r in 0..rows {
        for c in 0..cols {
            let p = r * cols + c;
            let a = sample_simplex(&mut rng, m);
            let nonlinear = spec.layout.is_nonlinear(r, c, rows, cols);
            let linear: Vec<f64> = (0..bands)
                .map(|b| (0..m).map(|k| a[k] * endmembers.spectrum(k)[b]).sum())
                .collect();
            let clean: Vec<f64> = if !nonlinear {
                linear
            } else {
                match spec.mechanism {
                    SynthMechanism::Bilinear { gamma } => (0..bands)
                        .map(|b| {
                            linear[b]
                                + gamma
                                    * pairs
                                        .iter()
                                        .map(|&(i, j)| {
                                            a[i] * a[j]
                                                * endmembers.spectrum(i)[b]
                                                * endmembers.spectrum(j)[b]
                                        })
                                        .sum::<f64>()
                        })
                        .collect(),
                    SynthMechanism::Ppnm { b: coef } => {
                        linear.iter().map(|s| s + coef * s * s).collect()
                    }
                    SynthMechanism::Hapke => {
                        hapke.as_ref().expect("table built").mixed_reflectance(&a)
                    }
                }
            };
            for (b, v) in clean.iter().enumerate() {
                let noise = if spec.noise > 0.0 {
                    spec.noise * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                data[b * n + p] = (v + noise).clamp(0.0, 1.0) as f32;
            }
            abundances.extend_from_slice(&a);
            labels.push(u8::from(nonlinear));
            mechanisms.push(nonlinear.then_some(spec.mechanism));
        }
    }

    let (lo, hi) = WAVELENGTH_RANGE;
    let step = (hi - lo) / (bands - 1) as f64;
    let wavelengths = (0..bands).map(|b| lo + step * b as f64).collect();
    Ok(SyntheticScene {
        cube: Cube::new(bands, rows, cols, data, Some(wavelengths))?,
        endmembers,
        abundances,
        labels,
        mechanisms,
    })
}
