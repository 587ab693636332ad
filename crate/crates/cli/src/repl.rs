//! Line-oriented interactive session over a trained checkpoint.

use std::io::{BufRead, Write};

use anyhow::{anyhow, Result};
use kgwalk::eval::rank_from_query;
use kgwalk::seed::derive_seed;
use kgwalk::{EntityId, Environment, EpisodeConfig, Graph, Model};

use crate::config::RunConfig;
use crate::load_model;

const PROMPT: &str = "> ";

struct Session<'a> {
    graph: &'a Graph,
    model: &'a Model,
    env: Environment<'a>,
    cfg: &'a RunConfig,
    history: Vec<Vec<usize>>,
    last_top: Option<EntityId>,
    turns: u64,
}

impl Session<'_> {
    fn reset(&mut self) {
        self.history.clear();
        self.last_top = None;
    }

    /// `entity<TAB>question`, or just `question` to continue from the
    /// previous top answer.
    fn turn(&mut self, line: &str) -> Result<Vec<(String, f64)>> {
        let (entity, question) = match line.split_once('\t') {
            Some((e, q)) if !e.trim().is_empty() => (Some(e.trim()), q),
            Some((_, q)) => (None, q),
            None => (None, line),
        };
        let central = match entity {
            Some(name) => self.graph.entity_id(name).map_err(|_| anyhow!("unknown entity '{name}'"))?,
            None => self
                .last_top
                .ok_or_else(|| anyhow!("no central entity given and no previous answer"))?,
        };
        let tokens = self.model.vocab.tokenize(question)?;
        let mut questions = self.history.clone();
        questions.push(tokens);
        let query = self.model.query_embedding(&questions)?;
        let seed = derive_seed(self.cfg.train.seed, self.turns, 0);
        let ranked = rank_from_query(self.model, &self.env, &query, central, self.cfg.rank_mode(), seed)?;
        self.history = questions;
        self.last_top = ranked.top();
        self.turns += 1;
        ranked
            .entities
            .iter()
            .zip(&ranked.scores)
            .take(self.cfg.top_k)
            .map(|(&e, &s)| Ok((self.graph.entity_name(e)?.to_string(), s)))
            .collect()
    }
}

pub fn cmd_repl<R: BufRead, W: Write>(cfg: &RunConfig, input: R, out: &mut W) -> Result<()> {
    let (graph, model) = load_model(cfg)?;
    let mut session = Session {
        graph: &graph,
        model: &model,
        env: Environment::new(&graph, EpisodeConfig::new(cfg.train.horizon)?),
        cfg,
        history: Vec::new(),
        last_top: None,
        turns: 0,
    };
    write!(out, "{PROMPT}")?;
    out.flush()?;
    for line in input.lines() {
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        match trimmed.trim() {
            ":quit" => {
                writeln!(out)?;
                return Ok(());
            }
            ":reset" => {
                session.reset();
                writeln!(out, "history cleared")?;
            }
            "" => {}
            _ => match session.turn(trimmed) {
                Ok(answers) => {
                    for (i, (name, score)) in answers.iter().enumerate() {
                        writeln!(out, "{}\t{name}\t{score:.4}", i + 1)?;
                    }
                }
                Err(e) => writeln!(out, "error: {e:#}")?,
            },
        }
        write!(out, "{PROMPT}")?;
        out.flush()?;
    }
    writeln!(out)?;
    Ok(())
}
