use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use pursuit_core::perception::Preset;
use pursuit_core::sim::{Track, WorldConfig};

#[derive(Parser, Debug)]
#[command(name = "pursuit", version, about = "Vision-based vehicle pursuit: simulate, label, train, evaluate, serve")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Run one episode on a built-in track and score it.
    Simulate(SimulateArgs),
    /// MPC-label every frame of a recording.
    Label(LabelArgs),
    /// Add off-trajectory samples to a labelled dataset.
    Augment(AugmentArgs),
    /// Fit the controller network to one or more datasets.
    Train(TrainArgs),
    /// Compare MPC and a trained model over all built-in tracks.
    Eval(EvalArgs),
    /// Route completion against perturbation level for two models.
    Sweep(SweepArgs),
    /// Live session over WebSocket with a human-driven target.
    Serve(ServeArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Mpc,
    Mlp,
}

fn track_name(s: &str) -> Result<String, String> {
    s.parse::<Track>().map(|t| t.name().to_string()).map_err(|e| e.to_string())
}

fn preset_name(s: &str) -> Result<String, String> {
    s.parse::<Preset>().map(|p| p.name().to_string()).map_err(|e| e.to_string())
}

/// Overrides on top of the default world, MPC and vehicle parameters.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct WorldArgs {
    /// MPC prediction horizon, steps.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Steps per MPC control block.
    #[arg(long)]
    pub block: Option<usize>,
    /// Safe-distance base length, meters.
    #[arg(long)]
    pub base_length: Option<f64>,
    #[arg(long)]
    pub w3_vel: Option<f64>,
    /// MPC iteration cap.
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub accel_gain: Option<f64>,
    /// Episode frame cap.
    #[arg(long)]
    pub max_frames: Option<usize>,
}

impl WorldArgs {
    pub fn world(&self) -> WorldConfig {
        let mut w = WorldConfig::default();
        if let Some(v) = self.horizon {
            w.mpc.horizon = v;
        }
        if let Some(v) = self.block {
            w.mpc.block = v;
        }
        if let Some(v) = self.base_length {
            w.mpc.base_length = v;
        }
        if let Some(v) = self.w3_vel {
            w.mpc.w3_vel = v;
        }
        if let Some(v) = self.max_iters {
            w.mpc.max_iters = v;
        }
        if let Some(v) = self.accel_gain {
            w.params.accel_gain = v;
        }
        if let Some(v) = self.max_frames {
            w.max_frames = v;
        }
        w
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PerceptionArgs {
    /// oracle, lidar, sgbm or cdn.
    #[arg(long, default_value = "oracle", value_parser = preset_name)]
    pub perception: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl PerceptionArgs {
    pub fn preset(&self) -> Preset {
        self.perception.parse().expect("validated by the argument parser")
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ControllerArgs {
    #[arg(long, value_enum, default_value = "mpc")]
    pub controller: ControllerKind,
    /// Model file; required for the mlp controller.
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SimulateArgs {
    #[arg(long, value_parser = track_name)]
    pub track: String,
    #[command(flatten)]
    pub controller: ControllerArgs,
    #[command(flatten)]
    pub perception: PerceptionArgs,
    /// Perturbation level; 0 disables perturbation.
    #[arg(long, default_value_t = 0.0)]
    pub perturb_level: f64,
    #[command(flatten)]
    pub world: WorldArgs,
    #[arg(long, default_value = "runs/simulate")]
    pub out: String,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LabelArgs {
    #[arg(long)]
    pub recording: String,
    #[command(flatten)]
    pub perception: PerceptionArgs,
    #[command(flatten)]
    pub world: WorldArgs,
    #[arg(long, default_value = "runs/label")]
    pub out: String,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AugmentArgs {
    #[arg(long)]
    pub dataset: String,
    /// Off-trajectory samples per augmented frame.
    #[arg(long, default_value_t = 30)]
    pub per_frame: usize,
    /// Augment every n-th frame.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write warped synthetic views for the first N augmented samples.
    #[arg(long, default_value_t = 0)]
    pub images: usize,
    #[command(flatten)]
    pub world: WorldArgs,
    #[arg(long, default_value = "runs/augment")]
    pub out: String,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainArgs {
    /// Dataset files; rows are concatenated in order.
    #[arg(long, required = true, num_args = 1..)]
    pub dataset: Vec<String>,
    #[arg(long, default_value_t = 300)]
    pub epochs1: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr1: f64,
    #[arg(long, default_value_t = 50)]
    pub epochs2: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub lr2: f64,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    #[arg(long, value_enum, default_value = "adam")]
    pub optimizer: OptimizerKind,
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Keep samples whose MPC solve hit the iteration cap.
    #[arg(long)]
    pub include_unconverged: bool,
    /// Train on on-trajectory rows only.
    #[arg(long)]
    pub on_trajectory_only: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "runs/train")]
    pub out: String,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalArgs {
    /// Trained model to compare against MPC; MPC only when absent.
    #[arg(long)]
    pub model: Option<String>,
    #[command(flatten)]
    pub perception: PerceptionArgs,
    #[command(flatten)]
    pub world: WorldArgs,
    #[arg(long, default_value = "runs/eval")]
    pub out: String,
}

fn level_range(s: &str) -> Result<String, String> {
    parse_levels(s).map(|_| s.to_string())
}

/// `a..b` (inclusive) or a single level.
pub fn parse_levels(s: &str) -> Result<Vec<u32>, String> {
    let bad = || format!("expected LEVEL or FROM..TO, got {s:?}");
    match s.split_once("..") {
        Some((a, b)) => {
            let a: u32 = a.trim().parse().map_err(|_| bad())?;
            let b: u32 = b.trim().parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![s.trim().parse().map_err(|_| bad())?]),
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepArgs {
    /// Model trained on on-trajectory samples only.
    #[arg(long)]
    pub baseline: String,
    /// Model trained with off-trajectory augmentation.
    #[arg(long)]
    pub augmented: String,
    #[arg(long, default_value = "0..5", value_parser = level_range)]
    pub levels: String,
    /// Perturbation seeds per level.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, value_delimiter = ',', default_values_t = ["grid".to_string(), "spline".to_string()], value_parser = track_name)]
    pub tracks: Vec<String>,
    #[command(flatten)]
    pub perception: PerceptionArgs,
    #[command(flatten)]
    pub world: WorldArgs,
    #[arg(long, default_value = "runs/sweep")]
    pub out: String,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8700)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[command(flatten)]
    pub controller: ControllerArgs,
    /// Track whose start pose seeds the session.
    #[arg(long, default_value = "straight", value_parser = track_name)]
    pub track: String,
    #[command(flatten)]
    pub perception: PerceptionArgs,
    #[command(flatten)]
    pub world: WorldArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: String,
    /// Output directory; defaults to the manifest's own.
    #[arg(long)]
    pub out: Option<String>,
}

pub fn parse_track(name: &str) -> anyhow::Result<Track> {
    Ok(name.parse()?)
}
