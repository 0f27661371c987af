//! Run configuration: a JSON file merged with command-line overrides.

use std::path::{Path, PathBuf};

use clap::Args;
use mekit::classify::PenaltyMode;
use mekit::metrics::Averaging;
use mekit::pipeline::EvalConfig;
use mekit::train::{Optimizer, TargetEncoding, TrainConfig};
use mekit::DecoderKind;
use serde::{Deserialize, Serialize};

use crate::failure::{Failure, ResultExt};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub eval: EvalConfig,
    pub train: TrainConfig,
    /// Worker threads; `ME_KIT_THREADS` caps this further.
    pub threads: Option<usize>,
    /// Output file or directory, depending on the command.
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| mekit::Error::io(path, e))
            .invalid()?;
        serde_json::from_str(&text)
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
            .invalid()
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.eval.validate().invalid()?;
        self.train.validate().invalid()?;
        if self.threads == Some(0) {
            return Err(Failure::invalid("threads must be at least 1"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Options every command accepts.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    pub print_config: bool,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    #[arg(long, value_parser = parse_decoder)]
    pub decoder: Option<DecoderKind>,
    /// Duration prior in frames; derived from fps when unset.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub theta_low: Option<f64>,
    #[arg(long)]
    pub theta_high: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub min_peak_height: Option<f64>,
    #[arg(long)]
    pub nms_iou: Option<f64>,
    #[arg(long, value_parser = parse_penalty)]
    pub penalty: Option<PenaltyMode>,
    /// Comma-separated class weights for the custom penalty.
    #[arg(long, value_delimiter = ',')]
    pub penalty_weights: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_averaging)]
    pub averaging: Option<Averaging>,
}

impl EvalArgs {
    pub fn apply(&self, c: &mut EvalConfig) {
        set(&mut c.decoder, self.decoder);
        if self.k.is_some() {
            c.k = self.k;
        }
        set(&mut c.theta_low, self.theta_low);
        set(&mut c.theta_high, self.theta_high);
        set(&mut c.patience, self.patience);
        set(&mut c.min_peak_height, self.min_peak_height);
        set(&mut c.nms_iou, self.nms_iou);
        set(&mut c.penalty.mode, self.penalty);
        if let Some(w) = &self.penalty_weights {
            c.penalty.weights = Some(w.clone());
        }
        set(&mut c.averaging, self.averaging);
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub segment_len: Option<usize>,
    #[arg(long)]
    pub neg_pos_ratio: Option<f64>,
    #[arg(long, value_parser = parse_optimizer)]
    pub optimizer: Option<Optimizer>,
    /// Segments per update, 0 for the whole training set.
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub holdout: Option<usize>,
    #[arg(long)]
    pub soft_targets: bool,
}

impl TrainArgs {
    pub fn apply(&self, c: &mut TrainConfig) {
        set(&mut c.lr, self.lr);
        set(&mut c.epochs, self.epochs);
        set(&mut c.seed, self.seed);
        set(&mut c.segment_len, self.segment_len);
        set(&mut c.neg_pos_ratio, self.neg_pos_ratio);
        set(&mut c.optimizer, self.optimizer);
        set(&mut c.batch_size, self.batch_size);
        set(&mut c.hidden, self.hidden);
        set(&mut c.window, self.window);
        set(&mut c.holdout, self.holdout);
        if self.soft_targets {
            c.encoding = TargetEncoding::Triangular;
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Parses a lowercase enum name through its serde representation.
fn parse_named<T: for<'de> Deserialize<'de>>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_decoder(s: &str) -> Result<DecoderKind, String> {
    parse_named(s)
}

fn parse_penalty(s: &str) -> Result<PenaltyMode, String> {
    parse_named(s)
}

fn parse_averaging(s: &str) -> Result<Averaging, String> {
    parse_named(s)
}

fn parse_optimizer(s: &str) -> Result<Optimizer, String> {
    parse_named(s)
}
