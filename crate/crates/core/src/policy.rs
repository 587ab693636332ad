//! The search policy: embeddings, search-history LSTM, action scoring,
//! sampling, and episode rollout.
//!
//! An action is embedded as `[relation ‖ edge ‖ tail]` (width `3d`). The
//! history starts as one LSTM step from zero on `[e_central ‖ l_q ‖ 0]` and
//! advances on each taken action's embedding. Action scores are
//! `A_t · FFN([e_node ‖ l_q ‖ g_t])`, normalised with a softmax.

use std::sync::Arc;

use rand::Rng;

use crate::dataset::Conversation;
use crate::encoder::Vocab;
use crate::env::{Environment, State};
use crate::error::{Error, Result};
use crate::graph::{EdgeAction, EntityId, Graph};
use crate::model::Model;
use crate::numeric::{FfnParams, LstmParams, ParamId, ParamStore, Tape, Var};

/// Upper bound on the number of paths any exhaustive enumeration will visit.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PolicyParams {
    pub entity_embedding: ParamId,
    pub relation_embedding: ParamId,
    pub edge_embedding: ParamId,
    pub history: LstmParams,
    pub score: FfnParams,
    pub dim: usize,
}

/// Everything a walk needs to know about one conversational turn.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TurnContext {
    /// Token ids of every question up to and including the current one.
    pub questions: Vec<Vec<usize>>,
    pub central: EntityId,
    pub answers: Vec<EntityId>,
}

impl TurnContext {
    pub fn from_conversation(vocab: &Vocab, conv: &Conversation, turn: usize) -> Result<Self> {
        let questions = conv.turns[..=turn]
            .iter()
            .map(|t| vocab.tokenize_words(&t.question))
            .collect::<Result<Vec<_>>>()?;
        let t = &conv.turns[turn];
        Ok(TurnContext {
            questions,
            central: t.central_entity,
            answers: t.answers.clone(),
        })
    }

    /// One context per (conversation, turn) pair, in order.
    pub fn all(vocab: &Vocab, convs: &[Conversation]) -> Result<Vec<Self>> {
        convs
            .iter()
            .flat_map(|c| (0..c.turns.len()).map(move |t| (c, t)))
            .map(|(c, t)| Self::from_conversation(vocab, c, t))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub node: EntityId,
    pub action: EdgeAction,
    pub action_index: usize,
    pub num_actions: usize,
    pub log_prob: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub steps: Vec<StepRecord>,
    pub terminal: EntityId,
    pub reward: f64,
}

impl Episode {
    pub fn log_prob(&self) -> f64 {
        self.steps.iter().map(|s| s.log_prob).sum()
    }

    pub fn action_indices(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.action_index).collect()
    }
}

/// A walk recorded on a tape, with handles for building a loss.
pub struct TapeWalk {
    pub episode: Episode,
    /// `log π(a_t | s_t)` of each chosen action.
    pub log_probs: Vec<Var>,
    /// Entropy of each step's action distribution (empty unless requested).
    pub entropies: Vec<Var>,
}

/// Value-level walk position: environment state plus history LSTM state.
#[derive(Clone, Debug)]
pub struct Cursor {
    pub state: State,
    g: Vec<f64>,
    c: Vec<f64>,
}

impl Cursor {
    pub fn history(&self) -> &[f64] {
        &self.g
    }
}

/// One complete path with its exact probability.
#[derive(Clone, Debug, PartialEq)]
pub struct PathProb {
    pub actions: Vec<usize>,
    pub terminal: EntityId,
    /// Product of the step probabilities.
    pub prob: f64,
}

/// Categorical draw by inverse CDF over the fixed action order.
pub fn sample_action<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left u above the final partial sum: take the last action with mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

impl PolicyParams {
    pub fn register<R: Rng>(store: &mut ParamStore, graph: &Graph, dim: usize, bound: f64, rng: &mut R) -> Result<Self> {
        Ok(PolicyParams {
            entity_embedding: store.add_uniform("policy.entity_embedding", &[graph.num_entities(), dim], bound, rng)?,
            relation_embedding: store.add_uniform("policy.relation_embedding", &[graph.num_relations(), dim], bound, rng)?,
            edge_embedding: store.add_uniform("policy.edge_embedding", &[graph.num_edges(), dim], bound, rng)?,
            history: LstmParams::register(store, "policy.history", 3 * dim, dim, bound, rng)?,
            score: FfnParams::register(store, "policy.score", 3 * dim, dim, 3 * dim, bound, rng)?,
            dim,
        })
    }

    pub fn lookup(store: &ParamStore) -> Result<Self> {
        let get = |n: &str| store.id(n).ok_or_else(|| Error::Checkpoint(format!("missing {n}")));
        let entity_embedding = get("policy.entity_embedding")?;
        let dim = store.get(entity_embedding).cols();
        let p = PolicyParams {
            entity_embedding,
            relation_embedding: get("policy.relation_embedding")?,
            edge_embedding: get("policy.edge_embedding")?,
            history: LstmParams::lookup(store, "policy.history")?,
            score: FfnParams::lookup(store, "policy.score")?,
            dim,
        };
        let ok = store.get(p.relation_embedding).cols() == dim
            && store.get(p.edge_embedding).cols() == dim
            && p.history.input == 3 * dim
            && p.history.hidden == dim
            && p.score.input_dim(store) == 3 * dim
            && p.score.output_dim(store) == 3 * dim;
        if !ok {
            return Err(Error::Checkpoint(format!("policy shapes disagree with dim {dim}")));
        }
        Ok(p)
    }

    /// Fails unless the embedding tables have one row per graph entity,
    /// relation, and edge.
    pub fn check_graph(&self, store: &ParamStore, graph: &Graph) -> Result<()> {
        let pairs = [
            ("entities", self.entity_embedding, graph.num_entities()),
            ("relations", self.relation_embedding, graph.num_relations()),
            ("edges", self.edge_embedding, graph.num_edges()),
        ];
        for (what, id, n) in pairs {
            let rows = store.get(id).rows();
            if rows != n {
                return Err(Error::Checkpoint(format!(
                    "checkpoint was trained on a graph with {rows} {what}, this graph has {n}"
                )));
            }
        }
        Ok(())
    }

    /// `[r ‖ u ‖ e_tail]`
    pub fn action_embedding(&self, tape: &mut Tape<'_>, action: EdgeAction) -> Result<Var> {
        let r = tape.gather(self.relation_embedding, action.relation)?;
        let u = tape.gather(self.edge_embedding, action.edge)?;
        let e = tape.gather(self.entity_embedding, action.tail)?;
        tape.concat(&[r, u, e])
    }

    /// `g_0`: one step from zero state on `[e_v ‖ l_q ‖ 0]`. Returns `(g, c)`.
    pub fn init_history(&self, tape: &mut Tape<'_>, entity: Var, query: Var) -> Result<(Var, Var)> {
        let (el, ql) = (tape.value(entity).len(), tape.value(query).len());
        if el != self.dim || ql != self.dim {
            return Err(Error::shape(
                format!("entity[{}] and query[{}]", self.dim, self.dim),
                format!("entity[{el}] and query[{ql}]"),
            ));
        }
        let pad = tape.zeros(self.dim);
        let x = tape.concat(&[entity, query, pad])?;
        let h0 = tape.zeros(self.dim);
        let c0 = tape.zeros(self.dim);
        self.history.step(tape, x, h0, c0)
    }

    /// `g_t = LSTM(g_{t-1}, a_{t-1})`
    pub fn update_history(&self, tape: &mut Tape<'_>, g: Var, c: Var, action: Var) -> Result<(Var, Var)> {
        self.history.step(tape, action, g, c)
    }

    /// Raw scores `A_t · FFN([e_node ‖ l_q ‖ g])`, one per action, plus the
    /// stacked action embeddings.
    pub fn action_scores(
        &self,
        tape: &mut Tape<'_>,
        node: EntityId,
        query: Var,
        g: Var,
        actions: &[EdgeAction],
    ) -> Result<(Var, Vec<Var>)> {
        if actions.is_empty() {
            return Err(Error::EmptyScores);
        }
        let embs = actions
            .iter()
            .map(|&a| self.action_embedding(tape, a))
            .collect::<Result<Vec<_>>>()?;
        let stacked = tape.stack_rows(&embs)?;
        let e = tape.gather(self.entity_embedding, node)?;
        let ctx = tape.concat(&[e, query, g])?;
        let f = self.score.forward(tape, ctx)?;
        Ok((tape.matvec(stacked, f)?, embs))
    }

    /// `π(· | s)` as log-probabilities.
    pub fn score_actions(&self, tape: &mut Tape<'_>, node: EntityId, query: Var, g: Var, actions: &[EdgeAction]) -> Result<Var> {
        let (scores, _) = self.action_scores(tape, node, query, g, actions)?;
        tape.log_softmax(scores)
    }

    /// Runs a full episode on `tape`. `choose` picks the action index at each
    /// step from the current probabilities.
    #[allow(clippy::too_many_arguments)]
    pub fn walk<F>(
        &self,
        tape: &mut Tape<'_>,
        env: &Environment<'_>,
        central: EntityId,
        answers: &[EntityId],
        query: Var,
        with_entropy: bool,
        mut choose: F,
    ) -> Result<TapeWalk>
    where
        F: FnMut(usize, &[f64]) -> Result<usize>,
    {
        let horizon = env.horizon();
        let mut state = env.reset(central, Arc::from(tape.value(query)))?;
        let e_v = tape.gather(self.entity_embedding, central)?;
        let (mut g, mut c) = self.init_history(tape, e_v, query)?;
        let mut steps = Vec::with_capacity(horizon);
        let mut log_probs = Vec::with_capacity(horizon);
        let mut entropies = Vec::new();
        for t in 0..horizon {
            let actions = env.valid_actions(&state)?;
            let (scores, embs) = self.action_scores(tape, state.node, query, g, actions)?;
            let lp = tape.log_softmax(scores)?;
            let probs: Vec<f64> = tape.value(lp).iter().map(|x| x.exp()).collect();
            let idx = choose(t, &probs)?;
            if idx >= actions.len() {
                return Err(Error::shape(format!("action index < {}", actions.len()), idx));
            }
            let chosen = tape.pick(lp, idx)?;
            if with_entropy {
                let p = tape.softmax(scores)?;
                let plogp = tape.dot(p, lp)?;
                entropies.push(tape.scale(plogp, -1.0)?);
            }
            steps.push(StepRecord {
                node: state.node,
                action: actions[idx],
                action_index: idx,
                num_actions: actions.len(),
                log_prob: tape.scalar(chosen),
            });
            log_probs.push(chosen);
            state = env.step(&state, actions[idx])?;
            if t + 1 < horizon {
                (g, c) = self.update_history(tape, g, c, embs[idx])?;
            }
        }
        let reward = env.terminal_reward(&state, answers)?;
        Ok(TapeWalk {
            episode: Episode {
                steps,
                terminal: state.node,
                reward,
            },
            log_probs,
            entropies,
        })
    }

    pub fn start(&self, store: &ParamStore, env: &Environment<'_>, central: EntityId, query: &[f64]) -> Result<Cursor> {
        let state = env.reset(central, Arc::from(query))?;
        let mut tape = Tape::new(store);
        let e_v = tape.gather(self.entity_embedding, central)?;
        let q = tape.input(query.to_vec());
        let (g, c) = self.init_history(&mut tape, e_v, q)?;
        Ok(Cursor {
            state,
            g: tape.value(g).to_vec(),
            c: tape.value(c).to_vec(),
        })
    }

    /// Action probabilities at `cursor`, in `valid_actions` order.
    pub fn probabilities(&self, store: &ParamStore, env: &Environment<'_>, cursor: &Cursor) -> Result<Vec<f64>> {
        let actions = env.valid_actions(&cursor.state)?;
        let mut tape = Tape::new(store);
        let q = tape.input(cursor.state.query.to_vec());
        let g = tape.input(cursor.g.clone());
        let lp = self.score_actions(&mut tape, cursor.state.node, q, g, actions)?;
        Ok(tape.value(lp).iter().map(|x| x.exp()).collect())
    }

    pub fn advance(&self, store: &ParamStore, env: &Environment<'_>, cursor: &Cursor, index: usize) -> Result<Cursor> {
        let actions = env.valid_actions(&cursor.state)?;
        let action = *actions
            .get(index)
            .ok_or_else(|| Error::shape(format!("action index < {}", actions.len()), index))?;
        let state = env.step(&cursor.state, action)?;
        let mut tape = Tape::new(store);
        let a = self.action_embedding(&mut tape, action)?;
        let g = tape.input(cursor.g.clone());
        let c = tape.input(cursor.c.clone());
        let (g, c) = self.update_history(&mut tape, g, c, a)?;
        Ok(Cursor {
            state,
            g: tape.value(g).to_vec(),
            c: tape.value(c).to_vec(),
        })
    }

    /// Every length-H path from `central` with its exact probability, by
    /// depth-first enumeration in action order.
    pub fn enumerate_paths(
        &self,
        store: &ParamStore,
        env: &Environment<'_>,
        central: EntityId,
        query: &[f64],
    ) -> Result<Vec<PathProb>> {
        let paths = env.graph().count_paths(central, env.horizon())?;
        if paths > ENUMERATION_LIMIT {
            return Err(Error::EnumerationBound {
                paths,
                limit: ENUMERATION_LIMIT,
            });
        }
        let mut out = Vec::with_capacity(paths as usize);
        let root = self.start(store, env, central, query)?;
        let mut prefix = Vec::with_capacity(env.horizon());
        self.dfs(store, env, &root, 1.0, &mut prefix, &mut out)?;
        Ok(out)
    }

    fn dfs(
        &self,
        store: &ParamStore,
        env: &Environment<'_>,
        cursor: &Cursor,
        prob: f64,
        prefix: &mut Vec<usize>,
        out: &mut Vec<PathProb>,
    ) -> Result<()> {
        if env.is_terminal(&cursor.state) {
            out.push(PathProb {
                actions: prefix.clone(),
                terminal: cursor.state.node,
                prob,
            });
            return Ok(());
        }
        let probs = self.probabilities(store, env, cursor)?;
        let last = cursor.state.step + 1 == env.horizon();
        for (i, p) in probs.iter().enumerate() {
            prefix.push(i);
            if last {
                let action = env.valid_actions(&cursor.state)?[i];
                out.push(PathProb {
                    actions: prefix.clone(),
                    terminal: action.tail,
                    prob: prob * p,
                });
            } else {
                let next = self.advance(store, env, cursor, i)?;
                self.dfs(store, env, &next, prob * p, prefix, out)?;
            }
            prefix.pop();
        }
        Ok(())
    }
}

/// Samples one episode for `ctx` under the model's current parameters.
pub fn rollout<R: Rng + ?Sized>(model: &Model, env: &Environment<'_>, ctx: &TurnContext, rng: &mut R) -> Result<Episode> {
    let mut tape = Tape::new(&model.params);
    let query = model.encoder.encode_dialogue(&mut tape, &ctx.questions)?;
    let walk = model
        .policy
        .walk(&mut tape, env, ctx.central, &ctx.answers, query, false, |_, p| Ok(sample_action(p, rng)))?;
    Ok(walk.episode)
}

/// Samples one episode from a precomputed query embedding.
pub fn rollout_from_query<R: Rng + ?Sized>(
    model: &Model,
    env: &Environment<'_>,
    query: &[f64],
    central: EntityId,
    answers: &[EntityId],
    rng: &mut R,
) -> Result<Episode> {
    let mut tape = Tape::new(&model.params);
    let q = tape.input(query.to_vec());
    let walk = model
        .policy
        .walk(&mut tape, env, central, answers, q, false, |_, p| Ok(sample_action(p, rng)))?;
    Ok(walk.episode)
}

/// Re-runs a fixed action sequence on `tape`, with the encoder recorded too,
/// so a loss built from the result differentiates every parameter.
pub fn replay<'p>(
    tape: &mut Tape<'p>,
    model: &Model,
    env: &Environment<'_>,
    ctx: &TurnContext,
    actions: &[usize],
    with_entropy: bool,
) -> Result<TapeWalk> {
    if actions.len() != env.horizon() {
        return Err(Error::shape(format!("{} actions", env.horizon()), actions.len()));
    }
    let query = model.encoder.encode_dialogue(tape, &ctx.questions)?;
    model
        .policy
        .walk(tape, env, ctx.central, &ctx.answers, query, with_entropy, |t, _| Ok(actions[t]))
}
