//! Plain-text run configuration.
//!
//! A config file holds one `key = value` pair per line; `#` starts a comment.
//! Values are resolved as defaults, then the file, then command-line
//! overrides, and the result is validated as a whole.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::models::HapkeGeometry;
use crate::regime::{SceneConfig, TrainConfig};
use crate::synth::{Layout, SynthMechanism, SynthSpec};

/// Parses `key = value` text. Duplicate keys and malformed lines are errors.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", n + 1)));
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!(
                "line {}: duplicate key `{key}`",
                n + 1
            )));
        }
    }
    Ok(out)
}

fn read_pairs(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pairs(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{value}`: {e}")))
}

fn parse_band(key: &str, value: &str) -> Result<Option<usize>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse_value(key, value).map(Some)
    }
}

fn parse_scales(key: &str, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|s| parse_value(key, s.trim()))
        .collect()
}

fn band_text(band: Option<usize>) -> String {
    band.map_or_else(|| "auto".to_string(), |b| b.to_string())
}

/// A configuration that can be assembled from string pairs.
pub trait Configurable: Default {
    /// Every recognised key, in echo order.
    const KEYS: &'static [&'static str];

    fn set(&mut self, key: &str, value: &str) -> Result<()>;

    fn validate(&self) -> Result<()>;

    /// Resolved `(key, value)` pairs; parsing them back yields `self`.
    fn entries(&self) -> Vec<(&'static str, String)>;

    /// Defaults, then `file`, then `overrides`; later sources win.
    fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            for (k, v) in read_pairs(path)? {
                cfg.set(&k, &v)?;
            }
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `text` on top of the defaults.
    fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in parse_pairs(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// One `key = value` line per entry.
    fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

fn unknown(key: &str) -> Error {
    Error::Config(format!("unknown key `{key}`"))
}

/// Settings for `features`, `unmix` and `eval`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UnmixConfig {
    pub train: TrainConfig,
    pub features: FeatureConfig,
    pub geometry: HapkeGeometry,
}

impl UnmixConfig {
    pub fn scene(&self) -> SceneConfig {
        SceneConfig {
            features: self.features.clone(),
            geometry: self.geometry,
            b_max: self.train.b_max,
        }
    }
}

impl Configurable for UnmixConfig {
    const KEYS: &'static [&'static str] = &[
        "lambda_feat0",
        "lambda_feat_final",
        "lambda_sp",
        "lambda_w",
        "lambda_ent",
        "tau",
        "learning_rate",
        "epochs",
        "seed",
        "b_max",
        "beta1",
        "beta2",
        "epsilon",
        "red_band",
        "nir_band",
        "scales",
        "mu0",
        "mu",
    ];

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "lambda_feat0" => t.lambda_feat0 = parse_value(key, value)?,
            "lambda_feat_final" => t.lambda_feat_final = parse_value(key, value)?,
            "lambda_sp" => t.lambda_sp = parse_value(key, value)?,
            "lambda_w" => t.lambda_w = parse_value(key, value)?,
            "lambda_ent" => t.lambda_ent = parse_value(key, value)?,
            "tau" => t.tau = parse_value(key, value)?,
            "learning_rate" => t.learning_rate = parse_value(key, value)?,
            "epochs" => t.epochs = parse_value(key, value)?,
            "seed" => t.seed = parse_value(key, value)?,
            "b_max" => t.b_max = parse_value(key, value)?,
            "beta1" => t.beta1 = parse_value(key, value)?,
            "beta2" => t.beta2 = parse_value(key, value)?,
            "epsilon" => t.epsilon = parse_value(key, value)?,
            "red_band" => self.features.red_band = parse_band(key, value)?,
            "nir_band" => self.features.nir_band = parse_band(key, value)?,
            "scales" => self.features.scales = parse_scales(key, value)?,
            "mu0" => self.geometry.mu0 = parse_value(key, value)?,
            "mu" => self.geometry.mu = parse_value(key, value)?,
            _ => return Err(unknown(key)),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.geometry
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        let s = &self.features.scales;
        if s.is_empty() || s[0] == 0 || s.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "scales must be positive and strictly increasing".into(),
            ));
        }
        if let (Some(r), Some(n)) = (self.features.red_band, self.features.nir_band) {
            if r == n {
                return Err(Error::Config("red_band and nir_band must differ".into()));
            }
        }
        Ok(())
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.train;
        let scales: Vec<String> = self.features.scales.iter().map(|s| s.to_string()).collect();
        vec![
            ("lambda_feat0", t.lambda_feat0.to_string()),
            ("lambda_feat_final", t.lambda_feat_final.to_string()),
            ("lambda_sp", t.lambda_sp.to_string()),
            ("lambda_w", t.lambda_w.to_string()),
            ("lambda_ent", t.lambda_ent.to_string()),
            ("tau", t.tau.to_string()),
            ("learning_rate", t.learning_rate.to_string()),
            ("epochs", t.epochs.to_string()),
            ("seed", t.seed.to_string()),
            ("b_max", t.b_max.to_string()),
            ("beta1", t.beta1.to_string()),
            ("beta2", t.beta2.to_string()),
            ("epsilon", t.epsilon.to_string()),
            ("red_band", band_text(self.features.red_band)),
            ("nir_band", band_text(self.features.nir_band)),
            ("scales", scales.join(",")),
            ("mu0", self.geometry.mu0.to_string()),
            ("mu", self.geometry.mu.to_string()),
        ]
    }
}

/// Mechanism parameters are kept for every mechanism so a config can switch
/// mechanism without losing them.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub spec: SynthSpec,
    pub gamma: f64,
    pub ppnm_b: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let spec = SynthSpec::default();
        let gamma = match spec.mechanism {
            SynthMechanism::Bilinear { gamma } => gamma,
            _ => 0.9,
        };
        SynthConfig {
            spec,
            gamma,
            ppnm_b: 0.5,
        }
    }
}

impl SynthConfig {
    fn sync_mechanism(&mut self, name: &str) -> Result<()> {
        self.spec.mechanism = match name {
            "bilinear" => SynthMechanism::Bilinear { gamma: self.gamma },
            "ppnm" => SynthMechanism::Ppnm { b: self.ppnm_b },
            "hapke" => SynthMechanism::Hapke,
            other => return Err(Error::Config(format!("unknown mechanism `{other}`"))),
        };
        Ok(())
    }
}

impl Configurable for SynthConfig {
    const KEYS: &'static [&'static str] = &[
        "rows",
        "cols",
        "bands",
        "endmembers",
        "layout",
        "mechanism",
        "gamma",
        "ppnm_b",
        "noise",
        "seed",
    ];

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.spec;
        match key {
            "rows" => s.rows = parse_value(key, value)?,
            "cols" => s.cols = parse_value(key, value)?,
            "bands" => s.bands = parse_value(key, value)?,
            "endmembers" => s.endmembers = parse_value(key, value)?,
            "layout" => s.layout = value.parse::<Layout>()?,
            "noise" => s.noise = parse_value(key, value)?,
            "seed" => s.seed = parse_value(key, value)?,
            "gamma" => self.gamma = parse_value(key, value)?,
            "ppnm_b" => self.ppnm_b = parse_value(key, value)?,
            "mechanism" => return self.sync_mechanism(value),
            _ => return Err(unknown(key)),
        }
        let name = self.spec.mechanism.name();
        self.sync_mechanism(name)
    }

    fn validate(&self) -> Result<()> {
        self.spec.validate()
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let s = &self.spec;
        vec![
            ("rows", s.rows.to_string()),
            ("cols", s.cols.to_string()),
            ("bands", s.bands.to_string()),
            ("endmembers", s.endmembers.to_string()),
            ("layout", s.layout.to_string()),
            ("mechanism", s.mechanism.name().to_string()),
            ("gamma", self.gamma.to_string()),
            ("ppnm_b", self.ppnm_b.to_string()),
            ("noise", s.noise.to_string()),
            ("seed", s.seed.to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn pairs(v: &[(&str, &str)]) -> Vec<(String, String)> {
        v.iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    #[test]
    fn empty_file_gives_defaults() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# nothing here").unwrap();
        let cfg = UnmixConfig::resolve(Some(f.path()), &[]).unwrap();
        assert_eq!(cfg, UnmixConfig::default());
        assert_eq!(SynthConfig::from_text("").unwrap(), SynthConfig::default());
    }

    #[test]
    fn flags_override_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "epochs = 100\nlambda_sp = 0.5  # smoother").unwrap();
        let cfg = UnmixConfig::resolve(Some(f.path()), &pairs(&[("epochs", "50")])).unwrap();
        assert_eq!(cfg.train.epochs, 50);
        assert_eq!(cfg.train.lambda_sp, 0.5);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(UnmixConfig::from_text("lambda_sp = -1").is_err());
        assert!(UnmixConfig::from_text("lamda_sp = 1").is_err());
        assert!(UnmixConfig::from_text("epochs = ten").is_err());
        assert!(UnmixConfig::from_text("epochs").is_err());
        assert!(UnmixConfig::from_text("tau = 1\ntau = 2").is_err());
        assert!(UnmixConfig::from_text("scales = 2,1").is_err());
        assert!(UnmixConfig::from_text("mu = 0").is_err());
        assert!(SynthConfig::from_text("gamma = 2").is_err());
        assert!(SynthConfig::from_text("layout = diagonal").is_err());
        assert!(SynthConfig::from_text("epochs = 3").is_err());
        let err = UnmixConfig::resolve(Some(Path::new("/no/such/file.cfg")), &[]).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn echo_round_trips() {
        let cfg = UnmixConfig::from_text(
            "lambda_ent = 0.003\nred_band = 4\nscales = 1,3,5\nmu0 = 0.5\nepochs = 7",
        )
        .unwrap();
        assert_eq!(UnmixConfig::from_text(&cfg.to_text()).unwrap(), cfg);
        assert_eq!(cfg.entries().len(), UnmixConfig::KEYS.len());

        let s = SynthConfig::from_text("mechanism = ppnm\nppnm_b = -0.3\nlayout = blocks").unwrap();
        assert_eq!(s.spec.mechanism, SynthMechanism::Ppnm { b: -0.3 });
        assert_eq!(SynthConfig::from_text(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn mechanism_parameter_order_does_not_matter() {
        let a = SynthConfig::from_text("gamma = 0.4\nmechanism = bilinear").unwrap();
        let b = SynthConfig::from_text("mechanism = bilinear\ngamma = 0.4").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.spec.mechanism, SynthMechanism::Bilinear { gamma: 0.4 });
    }
}
