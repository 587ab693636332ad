//! Command implementations for the `kgwalk` binary.

pub mod config;
mod repl;

use std::fs::{self, File};
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use kgwalk::dataset::{load_conversations_file, write_conversations};
use kgwalk::eval::{compute_metrics, rank_all};
use kgwalk::trainer::write_stats_csv;
use kgwalk::{generate_synthetic, Graph, Model, Trainer};

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "kgwalk", version, about = "Policy-gradient knowledge-graph walker for conversational QA")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic graph plus train/test conversations into --out.
    Synth,
    /// Train a policy on --data over --graph and write --checkpoint.
    Train,
    /// Rank answers for every turn in --data and report P@1, Hit@5, MRR.
    Eval,
    /// Interactive session: `entity<TAB>question` per line.
    Repl,
    /// Print entity, relation and edge counts for --graph.
    GraphStats,
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// `key=value` config file; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Graph TSV: `head<TAB>relation<TAB>tail` per line.
    #[arg(long, global = true, value_name = "PATH")]
    pub graph: Option<PathBuf>,
    /// Conversations, one JSON object per line.
    #[arg(long, global = true, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// Model checkpoint to write (train) or read (eval, repl).
    #[arg(long, global = true, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Output directory for generated data, stats and metrics.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Base seed for data generation, initialisation, training and sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Walk length H.
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    /// Number of SGD updates.
    #[arg(long, global = true)]
    pub updates: Option<usize>,
    /// Rollouts per update.
    #[arg(long, global = true)]
    pub batch: Option<usize>,
    /// Learning rate.
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    /// Answer ranking: sampled walks or exhaustive path enumeration.
    #[arg(long, global = true, value_name = "sampling|exact")]
    pub mode: Option<String>,
    /// Walks sampled per turn in sampling mode.
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Extra `key=value` settings, as in a config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Flags {
    /// Config file first, then flags on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let paths = [
            ("graph", &self.graph),
            ("data", &self.data),
            ("checkpoint", &self.checkpoint),
            ("out", &self.out),
        ];
        for (key, value) in paths {
            if let Some(p) = value {
                cfg.set(key, &p.to_string_lossy())?;
            }
        }
        let scalars = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("horizon", self.horizon.map(|v| v.to_string())),
            ("updates", self.updates.map(|v| v.to_string())),
            ("batch", self.batch.map(|v| v.to_string())),
            ("lr", self.lr.map(|v| v.to_string())),
            ("mode", self.mode.clone()),
            ("budget", self.budget.map(|v| v.to_string())),
        ];
        for (key, value) in scalars {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        for kv in &self.set {
            cfg.apply_text(kv, "--set")?;
        }
        Ok(cfg)
    }
}

pub fn run<R: BufRead, W: Write>(cli: &Cli, input: R, out: &mut W) -> Result<()> {
    let cfg = cli.flags.resolve()?;
    match cli.command {
        Command::Synth => cmd_synth(&cfg, out),
        Command::Train => cmd_train(&cfg, out),
        Command::Eval => cmd_eval(&cfg, out),
        Command::Repl => repl::cmd_repl(&cfg, input, out),
        Command::GraphStats => {
            let graph = Graph::load(config::require_file(&cfg.graph, "graph")?)?;
            writeln!(out, "{}", graph.stats())?;
            Ok(())
        }
    }
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create directory {}", dir.display()))
}

pub fn cmd_synth<W: Write>(cfg: &RunConfig, out: &mut W) -> Result<()> {
    let dir = config::require(&cfg.out, "out")?;
    cfg.synth.validate()?;
    ensure_dir(dir)?;
    let data = generate_synthetic(&cfg.synth, cfg.train.seed)?;
    let mut g = create_file(&dir.join("graph.tsv"))?;
    data.graph.write_tsv(&mut g)?;
    g.flush()?;
    for (name, convs) in [("train.jsonl", &data.train), ("test.jsonl", &data.test)] {
        let mut w = create_file(&dir.join(name))?;
        write_conversations(&mut w, &data.graph, convs)?;
        w.flush()?;
    }
    writeln!(
        out,
        "entities={} relations={} triples={} train={} test={} turns={}",
        data.graph.num_entities(),
        data.graph.num_relations() - 1,
        data.graph.num_source_triples(),
        data.train.len(),
        data.test.len(),
        cfg.synth.turns
    )?;
    Ok(())
}

/// Stats go to `--out/stats.csv`, or next to the checkpoint without `--out`.
fn stats_path(cfg: &RunConfig, checkpoint: &Path) -> PathBuf {
    match &cfg.out {
        Some(dir) => dir.join("stats.csv"),
        None => checkpoint.with_extension("stats.csv"),
    }
}

pub fn cmd_train<W: Write>(cfg: &RunConfig, out: &mut W) -> Result<()> {
    let graph_path = config::require_file(&cfg.graph, "graph")?;
    let data_path = config::require_file(&cfg.data, "data")?;
    let checkpoint = config::require(&cfg.checkpoint, "checkpoint")?;
    cfg.train.validate()?;
    if let Some(parent) = checkpoint.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    if let Some(dir) = &cfg.out {
        ensure_dir(dir)?;
    }
    let graph = Graph::load(graph_path)?;
    let convs = load_conversations_file(data_path, &graph)?;
    let trainer = Trainer::new(&graph, &convs, cfg.train.clone())?;
    let outcome = trainer.run(|_, model| model.save(checkpoint))?;
    outcome.model.save(checkpoint)?;
    let mut stats = create_file(&stats_path(cfg, checkpoint))?;
    write_stats_csv(&mut stats, &outcome.stats)?;
    stats.flush()?;
    let tail = &outcome.stats[outcome.stats.len().saturating_sub(100)..];
    let trailing = if tail.is_empty() {
        0.0
    } else {
        tail.iter().map(|s| s.mean_reward).sum::<f64>() / tail.len() as f64
    };
    writeln!(
        out,
        "updates={} trailing_reward={:.4} checkpoint={}",
        outcome.stats.len(),
        trailing,
        checkpoint.display()
    )?;
    Ok(())
}

pub fn load_model(cfg: &RunConfig) -> Result<(Graph, Model)> {
    let graph = Graph::load(config::require_file(&cfg.graph, "graph")?)?;
    let path = config::require_file(&cfg.checkpoint, "checkpoint")?;
    let model = Model::load(path)?;
    model
        .check_graph(&graph)
        .with_context(|| format!("checkpoint {} does not match the graph", path.display()))?;
    Ok((graph, model))
}

pub fn cmd_eval<W: Write>(cfg: &RunConfig, out: &mut W) -> Result<()> {
    let data_path = config::require_file(&cfg.data, "data")?;
    if let Some(dir) = &cfg.out {
        ensure_dir(dir)?;
    }
    let (graph, model) = load_model(cfg)?;
    let convs = load_conversations_file(data_path, &graph)?;
    if convs.is_empty() {
        bail!("no conversations in {}", data_path.display());
    }
    let ranked = rank_all(
        &model,
        &graph,
        &convs,
        cfg.rank_mode(),
        cfg.train.horizon,
        cfg.train.seed,
        cfg.train.exec,
    )?;
    let report = compute_metrics(&ranked, cfg.top_k)?;
    writeln!(out, "{report}")?;
    writeln!(out, "{}", report.to_json())?;
    if let Some(dir) = &cfg.out {
        fs::write(dir.join("metrics.json"), report.to_json() + "\n")
            .with_context(|| format!("cannot write metrics to {}", dir.display()))?;
    }
    Ok(())
}
