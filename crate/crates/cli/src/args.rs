use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use thermaltap::classify::{Backend, ForestParams, MarginParams, PreprocessConfig};
use thermaltap::config::{Normalization, RunConfig};
use thermaltap::eval::Protocol;
use thermaltap::frame_store::Phase;
use thermaltap::roi::SegmentConfig;

use crate::Usage;

#[derive(Debug, Parser)]
#[command(name = "thermaltap", version, about = "Thermal side-channel fingerprinting of VR headsets")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Run the contrast segmenter and score it against ingested masks.
    Segment(SegmentArgs),
    /// Write window feature vectors as CSV.
    Extract(PipelineArgs),
    /// Fit normalizers and the two-stage model on a whole dataset.
    Train(PipelineArgs),
    /// Label the sessions of a dataset with a trained pipeline.
    Infer(InferArgs),
    /// Cross-validated experiment; comma lists in --grid/--window run a sweep.
    Eval(EvalArgs),
    /// Render a report.json into CSV tables and SVG plots.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Base seed; THERMALTAP_SEED is used when the flag is absent.
    #[arg(long, env = "THERMALTAP_SEED", default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Suite JSON file, or one of: default, cross_device, indoor_outdoor.
    #[arg(long, default_value = "default")]
    pub suite: String,
    /// Override the frame height (width follows unless given).
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    /// Override the session count of every group.
    #[arg(long)]
    pub sessions: Option<usize>,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Foreground threshold above ambient, °C.
    #[arg(long, default_value_t = 3.0)]
    pub contrast: f64,
    /// Also write every predicted mask under <out>/<session>/masks.
    #[arg(long)]
    pub write_masks: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Grid side length(s), comma separated.
    #[arg(long, default_value = "16")]
    pub grid: String,
    /// Window length(s) in seconds, comma separated.
    #[arg(long, default_value = "10")]
    pub window: String,
    /// Window stride in seconds (default: the window length).
    #[arg(long)]
    pub stride: Option<u32>,
    /// Delta lags in seconds.
    #[arg(long, default_value = "5,30")]
    pub lags: String,
    /// Protocol phases to draw windows from.
    #[arg(long, default_value = "steady")]
    pub phases: String,
    #[arg(long, default_value = "forest")]
    pub backend: String,
    /// Comma list of ambient, wind, delta_residual, headset_baseline (or all, none).
    #[arg(long, default_value = "none")]
    pub normalize: String,
    #[arg(long, default_value_t = 300)]
    pub trees: usize,
    #[arg(long, default_value_t = 24)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 2)]
    pub min_leaf: usize,
    /// Features tried per split (default: ceil(sqrt(d))).
    #[arg(long)]
    pub max_features: Option<usize>,
    /// Features kept by the ANOVA ranking.
    #[arg(long, default_value_t = 512)]
    pub k: usize,
    /// Segmenter contrast threshold, °C.
    #[arg(long, default_value_t = 3.0)]
    pub contrast: f64,
    /// Segment every frame even where the dataset ships masks.
    #[arg(long)]
    pub ignore_masks: bool,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long, default_value = "loso")]
    pub protocol: String,
    /// Outdoor sessions per class added to training (transfer only).
    #[arg(long, default_value_t = 0)]
    pub few_shot: usize,
    /// Shuffle active-window labels first (chance-level control).
    #[arg(long)]
    pub permute_labels: bool,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// pipeline.json written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    pub contrast: f64,
    #[arg(long)]
    pub ignore_masks: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// report.json to render.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.parse() {
            Ok(v) => out.push(v),
            Err(_) => bail!(Usage(format!("--{flag}: cannot parse {part:?}"))),
        }
    }
    if out.is_empty() {
        bail!(Usage(format!("--{flag} needs at least one value")));
    }
    Ok(out)
}

impl PipelineArgs {
    pub fn grids(&self) -> Result<Vec<usize>> {
        parse_list("grid", &self.grid)
    }

    pub fn windows(&self) -> Result<Vec<u32>> {
        parse_list("window", &self.window)
    }

    pub fn segment_config(&self) -> SegmentConfig {
        SegmentConfig {
            contrast_c: self.contrast,
        }
    }

    /// Run config for one (grid, window) point of the sweep.
    pub fn run_config(&self, grid_n: usize, window_s: u32) -> Result<RunConfig> {
        let phases = self
            .phases
            .split(',')
            .map(|p| Phase::parse(p.trim()).ok_or_else(|| Usage(format!("--phases: unknown phase {p:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let backend = Backend::parse(&self.backend)
            .ok_or_else(|| Usage(format!("--backend must be forest or margin, got {:?}", self.backend)))?;
        let normalization = Normalization::parse(&self.normalize).map_err(|e| Usage(e.to_string()))?;
        let cfg = RunConfig {
            dataset: self.dataset.clone(),
            grid_n,
            window_s,
            stride_s: self.stride.unwrap_or(window_s),
            lags: parse_list("lags", &self.lags)?,
            phases,
            backend,
            forest: ForestParams {
                trees: self.trees,
                max_depth: self.max_depth,
                min_leaf: self.min_leaf,
                max_features: self.max_features,
            },
            margin: MarginParams::default(),
            preprocess: PreprocessConfig {
                max_selected: self.k,
                ..PreprocessConfig::default()
            },
            normalization,
            protocol: Protocol::Loso,
            few_shot_count: 0,
            seed: self.seed.seed,
            permute_labels: false,
            out: self.out.clone(),
        };
        cfg.validate().map_err(|e| Usage(e.to_string()))?;
        Ok(cfg)
    }

    /// The single (grid, window) point; lists are a usage error here.
    pub fn single_config(&self, command: &str) -> Result<RunConfig> {
        let (g, w) = (self.grids()?, self.windows()?);
        if g.len() != 1 || w.len() != 1 {
            bail!(Usage(format!("{command} takes a single --grid and --window")));
        }
        self.run_config(g[0], w[0]).context("building run config")
    }
}

impl EvalArgs {
    pub fn protocol(&self) -> Result<Protocol> {
        Ok(Protocol::parse(&self.protocol)
            .ok_or_else(|| Usage(format!("--protocol must be loso, lodo, pooled or transfer, got {:?}", self.protocol)))?)
    }
}
