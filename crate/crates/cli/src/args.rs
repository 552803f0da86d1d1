use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "pgru",
    version,
    about = "Feature-gated linear/nonlinear hyperspectral unmixing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene with known mixing regimes.
    Synth(SynthArgs),
    /// Compute the six per-pixel features and the feature prior.
    Features(FeaturesArgs),
    /// Train the regime model and write its maps.
    Unmix(UnmixArgs),
    /// Compare the regime model with linear and uniform nonlinear baselines.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Pgm,
    Both,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// `key = value` config file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub bands: Option<usize>,
    #[arg(long)]
    pub endmembers: Option<usize>,
    /// half-split | blocks | all-linear | all-nonlinear
    #[arg(long)]
    pub layout: Option<String>,
    /// bilinear | ppnm | hapke
    #[arg(long)]
    pub mechanism: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub ppnm_b: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Scene inputs: either `--scene DIR` or explicit files.
#[derive(Debug, Args)]
pub struct InputArgs {
    /// Directory holding `scene.hdr` and `endmembers.csv`.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// ENVI header of the cube.
    #[arg(long)]
    pub cube: Option<PathBuf>,
    /// Endmember CSV library.
    #[arg(long = "endmembers")]
    pub endmembers: Option<PathBuf>,
}

/// Feature settings shared by every scene-processing command.
#[derive(Debug, Args)]
pub struct FeatureArgs {
    /// Red band index for NDVI, or `auto`.
    #[arg(long)]
    pub red_band: Option<String>,
    /// NIR band index for NDVI, or `auto`.
    #[arg(long)]
    pub nir_band: Option<String>,
    /// Comma-separated morphological radii.
    #[arg(long)]
    pub scales: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub lambda_feat0: Option<f64>,
    #[arg(long)]
    pub lambda_feat_final: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_sp: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_w: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_ent: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub b_max: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Cosine of the incidence angle for the Hapke model.
    #[arg(long)]
    pub mu0: Option<f64>,
    /// Cosine of the emergence angle for the Hapke model.
    #[arg(long)]
    pub mu: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub cube: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub format: Format,
    #[command(flatten)]
    pub features: FeatureArgs,
}

#[derive(Debug, Args)]
pub struct UnmixArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub format: Format,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated subset of lmm,gbm,ppnm,hapke,pgru.
    #[arg(long, default_value = "lmm,gbm,ppnm,hapke,pgru")]
    pub methods: String,
    #[command(flatten)]
    pub features: FeatureArgs,
    #[command(flatten)]
    pub train: TrainArgs,
}

fn push<T: ToString>(out: &mut Vec<(String, String)>, key: &str, value: &Option<T>) {
    if let Some(v) = value {
        out.push((key.to_string(), v.to_string()));
    }
}

impl SynthArgs {
    pub fn overrides(&self) -> Vec<(String, String)> {
        let mut o = Vec::new();
        push(&mut o, "rows", &self.rows);
        push(&mut o, "cols", &self.cols);
        push(&mut o, "bands", &self.bands);
        push(&mut o, "endmembers", &self.endmembers);
        push(&mut o, "layout", &self.layout);
        push(&mut o, "gamma", &self.gamma);
        push(&mut o, "ppnm_b", &self.ppnm_b);
        push(&mut o, "mechanism", &self.mechanism);
        push(&mut o, "noise", &self.noise);
        push(&mut o, "seed", &self.seed);
        o
    }
}

impl FeatureArgs {
    pub fn overrides(&self) -> Vec<(String, String)> {
        let mut o = Vec::new();
        push(&mut o, "red_band", &self.red_band);
        push(&mut o, "nir_band", &self.nir_band);
        push(&mut o, "scales", &self.scales);
        o
    }
}

impl TrainArgs {
    pub fn overrides(&self) -> Vec<(String, String)> {
        let mut o = Vec::new();
        push(&mut o, "lambda_feat0", &self.lambda_feat0);
        push(&mut o, "lambda_feat_final", &self.lambda_feat_final);
        push(&mut o, "lambda_sp", &self.lambda_sp);
        push(&mut o, "lambda_w", &self.lambda_w);
        push(&mut o, "lambda_ent", &self.lambda_ent);
        push(&mut o, "tau", &self.tau);
        push(&mut o, "learning_rate", &self.learning_rate);
        push(&mut o, "epochs", &self.epochs);
        push(&mut o, "seed", &self.seed);
        push(&mut o, "b_max", &self.b_max);
        push(&mut o, "beta1", &self.beta1);
        push(&mut o, "beta2", &self.beta2);
        push(&mut o, "epsilon", &self.epsilon);
        push(&mut o, "mu0", &self.mu0);
        push(&mut o, "mu", &self.mu);
        o
    }
}
