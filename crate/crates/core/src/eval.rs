//! Answer ranking and the P@1 / Hit@k / MRR metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Conversation;
use crate::env::{Environment, EpisodeConfig};
use crate::error::{Error, Result};
use crate::graph::{EntityId, Graph};
use crate::model::Model;
use crate::par::{map_slice, Exec};
use crate::policy::{rollout_from_query, TurnContext};
use crate::seed::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankMode {
    /// Score terminals by the summed probability of the distinct paths seen
    /// in `budget` rollouts.
    Sampling { budget: usize },
    /// Score terminals by their exact path-probability mass.
    Exact,
}

impl RankMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            RankMode::Sampling { budget: 0 } => Err(Error::Config("sampling budget must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

/// Best first. Scores are non-increasing; ties go to the lower entity id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RankedAnswers {
    pub entities: Vec<EntityId>,
    pub scores: Vec<f64>,
}

impl RankedAnswers {
    pub fn from_scores(mass: BTreeMap<EntityId, f64>) -> Self {
        let mut pairs: Vec<(EntityId, f64)> = mass.into_iter().collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let (entities, scores) = pairs.into_iter().unzip();
        RankedAnswers { entities, scores }
    }

    pub fn top(&self) -> Option<EntityId> {
        self.entities.first().copied()
    }

    /// 1-based rank of the first entity in `gold`.
    pub fn first_hit(&self, gold: &[EntityId]) -> Option<usize> {
        self.entities.iter().position(|e| gold.contains(e)).map(|i| i + 1)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }
}

pub fn rank_answers(
    model: &Model,
    env: &Environment<'_>,
    ctx: &TurnContext,
    mode: RankMode,
    seed: u64,
) -> Result<RankedAnswers> {
    let query = model.query_embedding(&ctx.questions)?;
    rank_from_query(model, env, &query, ctx.central, mode, seed)
}

/// Ranking for an already-encoded query, as used by the REPL.
pub fn rank_from_query(
    model: &Model,
    env: &Environment<'_>,
    query: &[f64],
    central: EntityId,
    mode: RankMode,
    seed: u64,
) -> Result<RankedAnswers> {
    mode.validate()?;
    let mut mass = BTreeMap::new();
    match mode {
        RankMode::Exact => {
            for p in model.policy.enumerate_paths(&model.params, env, central, query)? {
                *mass.entry(p.terminal).or_insert(0.0) += p.prob;
            }
        }
        RankMode::Sampling { budget } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut seen = BTreeSet::new();
            for _ in 0..budget {
                let ep = rollout_from_query(model, env, query, central, &[], &mut rng)?;
                if seen.insert(ep.action_indices()) {
                    *mass.entry(ep.terminal).or_insert(0.0) += ep.log_prob().exp();
                }
            }
        }
    }
    Ok(RankedAnswers::from_scores(mass))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub p_at_1: f64,
    #[serde(rename = "hit_at_5")]
    pub hit_at_k: f64,
    pub mrr: f64,
    pub turns: usize,
    #[serde(skip, default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    5
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "p_at_1": self.p_at_1,
            format!("hit_at_{}", self.k): self.hit_at_k,
            "mrr": self.mrr,
            "turns": self.turns,
        })
        .to_string()
    }
}

/// Aligned two-line table: a header row and a value row with three decimals.
impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hit = format!("Hit@{}", self.k);
        writeln!(f, "{:>6} {:>6} {:>6} {:>6}", "P@1", hit, "MRR", "turns")?;
        write!(f, "{:>6.3} {:>6.3} {:>6.3} {:>6}", self.p_at_1, self.hit_at_k, self.mrr, self.turns)
    }
}

pub fn compute_metrics(turns: &[(RankedAnswers, Vec<EntityId>)], k: usize) -> Result<MetricsReport> {
    if turns.is_empty() {
        return Err(Error::Config("no turns to evaluate".into()));
    }
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let (mut p1, mut hit, mut rr) = (0.0, 0.0, 0.0);
    for (ranked, gold) in turns {
        if let Some(r) = ranked.first_hit(gold) {
            p1 += (r == 1) as u8 as f64;
            hit += (r <= k) as u8 as f64;
            rr += 1.0 / r as f64;
        }
    }
    let n = turns.len() as f64;
    Ok(MetricsReport {
        p_at_1: p1 / n,
        hit_at_k: hit / n,
        mrr: rr / n,
        turns: turns.len(),
        k,
    })
}

/// Ranks every turn of every conversation. Turn `i` (in flattened order)
/// samples with seed `derive_seed(seed, i, 0)`.
pub fn rank_all(
    model: &Model,
    graph: &Graph,
    convs: &[Conversation],
    mode: RankMode,
    horizon: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<(RankedAnswers, Vec<EntityId>)>> {
    model.check_graph(graph)?;
    mode.validate()?;
    let env = Environment::new(graph, EpisodeConfig::new(horizon)?);
    let contexts = TurnContext::all(&model.vocab, convs)?;
    map_slice(exec, &contexts, |i, ctx| {
        let ranked = rank_answers(model, &env, ctx, mode, derive_seed(seed, i as u64, 0))?;
        Ok((ranked, ctx.answers.clone()))
    })
    .into_iter()
    .collect()
}

pub fn evaluate(
    model: &Model,
    graph: &Graph,
    convs: &[Conversation],
    mode: RankMode,
    horizon: usize,
    seed: u64,
    exec: Exec,
) -> Result<MetricsReport> {
    compute_metrics(&rank_all(model, graph, convs, mode, horizon, seed, exec)?, 5)
}
