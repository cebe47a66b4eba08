//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cplass_core::{McmcConfig, ScoreConfig};

#[derive(Debug, Parser)]
#[command(name = "cplass", version, about = "Changepoint detection for piecewise-linear trajectories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a trajectory and its ground truth.
    #[command(subcommand)]
    Simulate(SimulateCmd),
    /// Detect changepoints in one trajectory CSV or every CSV in a directory.
    Detect(DetectArgs),
    /// Score of a base changepoint set with one extra changepoint at each index.
    ScoreProfile(ProfileArgs),
    /// Scores of all two-changepoint models on a strided grid.
    ScoreSurface(SurfaceArgs),
    /// Cumulative speed allocation of pooled segmentations.
    Csa(CsaArgs),
    /// ECDF of per-path maximum sustained speeds.
    Ecdf(EcdfArgs),
    /// Duration-weighted kernel density of segment speeds.
    Wkde(WkdeArgs),
    /// Monte-Carlo studies.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    /// sSIC exponent (> 1).
    #[arg(long, default_value_t = 1.01)]
    pub gamma: f64,
    /// Speed cap in um/s.
    #[arg(long = "s-cap", default_value_t = 5.0)]
    pub s_cap: f64,
    /// Disable the penalty on speeds above the cap.
    #[arg(long = "no-speed-penalty")]
    pub no_speed_penalty: bool,
    /// Maximum number of segments.
    #[arg(long = "k-max")]
    pub k_max: Option<usize>,
}

impl ScoreArgs {
    pub fn config(&self) -> ScoreConfig {
        ScoreConfig {
            gamma: self.gamma,
            s_cap: self.s_cap,
            speed_penalty_enabled: !self.no_speed_penalty,
            k_max: self.k_max,
            ..ScoreConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct McmcArgs {
    /// Changepoint rate (1/s) of the independent proposal.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Iterations per chain.
    #[arg(long, default_value_t = cplass_core::model::DEFAULT_ITERATIONS)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.25)]
    pub u1: f64,
    #[arg(long, default_value_t = 0.375)]
    pub u2: f64,
    #[arg(long, default_value_t = 0.5)]
    pub u3: f64,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl McmcArgs {
    pub fn config(&self) -> McmcConfig {
        McmcConfig { lambda: self.lambda, u1: self.u1, u2: self.u2, u3: self.u3, t_max: self.iters, seed: self.seed }
    }
}

#[derive(Debug, Subcommand)]
pub enum SimulateCmd {
    /// Piecewise-linear anchor plus Gaussian noise.
    Piecewise(PiecewiseArgs),
    /// Two-state (stationary / motile) cargo model.
    TwoState(TwoStateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PiecewisePreset {
    CrossingDiagonals,
    ShortRun,
    ShortPanel,
    LongPanel,
    Stationary,
    FlankedRun,
    FixedHorizon,
}

#[derive(Debug, Args)]
pub struct PiecewiseArgs {
    #[arg(long, value_enum)]
    pub preset: Option<PiecewisePreset>,
    /// Changepoint times in seconds (custom truth).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub tau: Vec<f64>,
    /// Segment speeds in um/s (custom truth); planar unless --dim 1.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub speeds: Vec<f64>,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub dim: u8,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Noise standard deviation in um; overrides the preset.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Middle-run duration for the flanked-run preset.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Middle-run speed for the flanked-run preset.
    #[arg(long)]
    pub speed: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TwoStatePreset {
    Base,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    PerSegment,
    PerStep,
}

#[derive(Debug, Args)]
pub struct TwoStateArgs {
    #[arg(long, value_enum, default_value_t = TwoStatePreset::Base)]
    pub preset: TwoStatePreset,
    #[arg(long, value_enum, default_value_t = Scheme::PerSegment)]
    pub scheme: Scheme,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Trajectory CSV, or a directory of them for batch mode.
    #[arg(long)]
    pub input: PathBuf,
    /// Segmentation JSON, or the output directory in batch mode.
    #[arg(long)]
    pub out: PathBuf,
    /// Trace CSV (a directory in batch mode).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Record wall-clock time in the manifest.
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub score: ScoreArgs,
    #[command(flatten)]
    pub mcmc: McmcArgs,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Changepoint slots always present.
    #[arg(long, value_delimiter = ',')]
    pub base: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub score: ScoreArgs,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub stride: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub score: ScoreArgs,
}

#[derive(Debug, Args)]
pub struct CsaArgs {
    /// Segmentation JSON files.
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    /// Bootstrap resamples over paths; 0 disables the band.
    #[arg(long, default_value_t = 200)]
    pub boot: usize,
    /// Central coverage of the band.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EcdfArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    /// Shortest segment (s) that counts as sustained.
    #[arg(long = "min-duration", default_value_t = cplass_core::experiments::SUSTAINED_DURATION)]
    pub min_duration: f64,
    #[arg(long, default_value_t = 200)]
    pub boot: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WkdeArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub inputs: Vec<PathBuf>,
    /// Kernel bandwidth in um/s; Silverman's rule when omitted.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Panel {
    Short,
    Long,
}

#[derive(Debug, Args)]
pub struct ExperimentOut {
    /// Result table (CSV).
    #[arg(long)]
    pub out: PathBuf,
    /// Full result with configurations (JSON).
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCmd {
    /// Detection and false-positive rates across sSIC exponents.
    GammaSweep {
        #[arg(long, value_enum, default_value_t = Panel::Short)]
        panel: Panel,
        #[arg(long, default_value_t = 50)]
        reps: usize,
        #[arg(long, value_delimiter = ',')]
        gammas: Vec<f64>,
        #[command(flatten)]
        score: ScoreArgs,
        #[command(flatten)]
        mcmc: McmcArgs,
        #[command(flatten)]
        output: ExperimentOut,
    },
    /// Probability of detecting exactly two changepoints per run duration and speed.
    PowerGrid {
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, value_delimiter = ',')]
        durations: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        speeds: Vec<f64>,
        #[command(flatten)]
        score: ScoreArgs,
        #[command(flatten)]
        mcmc: McmcArgs,
        #[command(flatten)]
        output: ExperimentOut,
    },
    /// Correct-count fraction and location error as n grows.
    Consistency {
        #[arg(long = "n-values", value_delimiter = ',', default_values_t = vec![100, 400, 1600])]
        n_values: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[command(flatten)]
        score: ScoreArgs,
        #[command(flatten)]
        mcmc: McmcArgs,
        #[command(flatten)]
        output: ExperimentOut,
    },
    /// First-passage times to a short fast run with and without segment moves.
    Type3Demo {
        #[arg(long, default_value_t = 20)]
        chains: usize,
        #[arg(long, default_value_t = 400_000)]
        cap: usize,
        #[arg(long, default_value_t = 0.05)]
        sigma: f64,
        #[arg(long = "path-seed", default_value_t = 1)]
        path_seed: u64,
        #[command(flatten)]
        score: ScoreArgs,
        #[command(flatten)]
        mcmc: McmcArgs,
        #[command(flatten)]
        output: ExperimentOut,
    },
}
