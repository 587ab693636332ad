//! `key=value` run configuration with command-line overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use kgwalk::{Baseline, Exec, RankMode, SynthConfig, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub graph: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub mode: ModeName,
    pub budget: usize,
    pub top_k: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeName {
    Sampling,
    Exact,
}

impl FromStr for ModeName {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sampling" => Ok(ModeName::Sampling),
            "exact" => Ok(ModeName::Exact),
            other => bail!("unknown mode '{other}' (expected sampling or exact)"),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            graph: None,
            data: None,
            checkpoint: None,
            out: None,
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            mode: ModeName::Sampling,
            budget: 1000,
            top_k: 5,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| anyhow!("invalid value '{value}' for '{key}'"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => bail!("invalid value '{value}' for '{key}' (expected true or false)"),
    }
}

impl RunConfig {
    pub fn rank_mode(&self) -> RankMode {
        match self.mode {
            ModeName::Sampling => RankMode::Sampling { budget: self.budget },
            ModeName::Exact => RankMode::Exact,
        }
    }

    /// Applies one setting. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        let s = &mut self.synth;
        match key {
            "graph" => self.graph = Some(value.into()),
            "data" => self.data = Some(value.into()),
            "checkpoint" => self.checkpoint = Some(value.into()),
            "out" => self.out = Some(value.into()),
            "seed" => t.seed = parse(key, value)?,
            "horizon" => {
                t.horizon = parse(key, value)?;
                s.horizon = t.horizon;
            }
            "updates" => t.updates = parse(key, value)?,
            "batch" => t.batch = parse(key, value)?,
            "lr" => t.lr = parse(key, value)?,
            "dim" => t.dim = parse(key, value)?,
            "entropy_weight" => t.entropy_weight = parse(key, value)?,
            "baseline" => {
                t.baseline = match value {
                    "none" => Baseline::None,
                    "moving_average" => Baseline::MovingAverage { decay: 0.9 },
                    _ => bail!("invalid value '{value}' for 'baseline' (expected none or moving_average)"),
                }
            }
            "baseline_decay" => match &mut t.baseline {
                Baseline::MovingAverage { decay } => *decay = parse(key, value)?,
                Baseline::None => bail!("'baseline_decay' requires baseline=moving_average"),
            },
            "checkpoint_every" => t.checkpoint_every = parse(key, value)?,
            "parallel" => {
                t.exec = if parse_bool(key, value)? {
                    Exec::Parallel
                } else {
                    Exec::Sequential
                }
            }
            "timing" => t.record_timing = parse_bool(key, value)?,
            "mode" => self.mode = parse(key, value)?,
            "budget" => self.budget = parse(key, value)?,
            "top_k" => self.top_k = parse(key, value)?,
            "entities" => s.entities = parse(key, value)?,
            "relations" => s.relations = parse(key, value)?,
            "mean_out_degree" => s.mean_out_degree = parse(key, value)?,
            "train_conversations" => s.train_conversations = parse(key, value)?,
            "test_conversations" => s.test_conversations = parse(key, value)?,
            "turns" => s.turns = parse(key, value)?,
            "max_path_len" => s.max_path_len = parse(key, value)?,
            "distractors" => s.distractors = parse(key, value)?,
            _ => bail!("unknown config key '{key}'"),
        }
        Ok(())
    }

    /// Reads `key=value` lines. `#` starts a comment; blank lines are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{origin}:{}: expected key=value", n + 1))?;
            self.set(key.trim(), value.trim())
                .with_context(|| format!("{origin}:{}", n + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        self.apply_text(&text, &path.display().to_string())
    }
}

pub fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value.as_deref().ok_or_else(|| anyhow!("missing --{flag}"))
}

pub fn require_file<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    let path = require(value, flag)?;
    if !path.is_file() {
        bail!("{flag} file not found: {}", path.display());
    }
    Ok(path)
}
