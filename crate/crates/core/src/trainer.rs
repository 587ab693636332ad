//! REINFORCE training and the exhaustive expected-reward oracle.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Conversation;
use crate::encoder::Vocab;
use crate::env::{Environment, EpisodeConfig};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{Model, DEFAULT_DIM};
use crate::numeric::{Gradients, Tape};
use crate::par::{map_range, map_slice, Exec};
use crate::policy::{replay, rollout, Episode, PathProb, TurnContext};
use crate::seed::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Baseline {
    None,
    /// `b ← decay·b + (1 − decay)·mean_batch_reward`, applied after each update.
    MovingAverage { decay: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch: usize,
    pub lr: f64,
    pub updates: usize,
    pub horizon: usize,
    pub baseline: Baseline,
    pub entropy_weight: f64,
    pub seed: u64,
    pub dim: usize,
    /// Invoke the checkpoint callback every this many updates; 0 disables it.
    pub checkpoint_every: usize,
    pub exec: Exec,
    /// Record wall-clock seconds in the stats; off keeps output reproducible.
    pub record_timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch: 16,
            lr: 0.05,
            updates: 3000,
            horizon: 3,
            baseline: Baseline::MovingAverage { decay: 0.9 },
            entropy_weight: 0.01,
            seed: 0,
            dim: DEFAULT_DIM,
            checkpoint_every: 0,
            exec: Exec::default(),
            record_timing: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch < 1 {
            return fail("batch must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail("learning rate must be positive");
        }
        if self.horizon < 1 {
            return fail("horizon must be at least 1");
        }
        if self.dim < 1 {
            return fail("dimension must be at least 1");
        }
        if self.entropy_weight.is_nan() || self.entropy_weight < 0.0 {
            return fail("entropy weight must be non-negative");
        }
        if let Baseline::MovingAverage { decay } = self.baseline {
            if !(0.0..1.0).contains(&decay) {
                return fail("baseline decay must lie in [0, 1)");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UpdateStats {
    pub update: usize,
    pub mean_reward: f64,
    pub loss: f64,
    pub mean_log_prob: f64,
    pub grad_norm: f64,
    pub seconds: f64,
}

/// One REINFORCE step on a batch of episodes sampled under the current
/// parameters:
///
/// `loss = −(1/B) Σ_b [(R_b − baseline) Σ_t log π(a_t|s_t) + λ Σ_t H(π(·|s_t))]`
///
/// Per-episode gradients are computed independently, summed in batch order,
/// and applied with one plain SGD step.
pub fn reinforce_update(
    model: &mut Model,
    env: &Environment<'_>,
    batch: &[(&TurnContext, Episode)],
    baseline: f64,
    cfg: &TrainConfig,
    update: usize,
) -> Result<UpdateStats> {
    if batch.is_empty() {
        return Err(Error::Config("empty episode batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let frozen: &Model = model;
    let results = map_slice(cfg.exec, batch, |_, (ctx, ep)| -> Result<(Gradients, f64, f64)> {
        let mut grads = Gradients::zeros_like(&frozen.params);
        let mut tape = Tape::new(&frozen.params);
        let walk = replay(&mut tape, frozen, env, ctx, &ep.action_indices(), cfg.entropy_weight > 0.0)?;
        let log_prob = tape.add_all(&walk.log_probs)?;
        let advantage = ep.reward - baseline;
        let mut loss = tape.scale(log_prob, -advantage * scale)?;
        if cfg.entropy_weight > 0.0 {
            let entropy = tape.add_all(&walk.entropies)?;
            let bonus = tape.scale(entropy, -cfg.entropy_weight * scale)?;
            loss = tape.add(loss, bonus)?;
        }
        let value = tape.scalar(loss);
        if !value.is_finite() {
            return Err(Error::NonFinite {
                update,
                episode: format!("{ep:?}"),
            });
        }
        tape.backward(loss, &mut grads)?;
        if !grads.is_finite() {
            return Err(Error::NonFinite {
                update,
                episode: format!("{ep:?}"),
            });
        }
        Ok((grads, value, tape.scalar(log_prob)))
    });

    let mut total = Gradients::zeros_like(&model.params);
    let mut loss = 0.0;
    let mut log_prob = 0.0;
    for r in results {
        let (g, l, lp) = r?;
        total.add_assign(&g);
        loss += l;
        log_prob += lp;
    }
    model.params.zero_grad();
    model.params.accumulate(&total);
    model.params.sgd_step(cfg.lr);
    Ok(UpdateStats {
        update,
        mean_reward: batch.iter().map(|(_, e)| e.reward).sum::<f64>() * scale,
        loss,
        mean_log_prob: log_prob * scale,
        grad_norm: total.l2_norm(),
        seconds: 0.0,
    })
}

pub struct TrainOutcome {
    pub model: Model,
    pub stats: Vec<UpdateStats>,
}

pub struct Trainer<'g> {
    env: Environment<'g>,
    contexts: Vec<TurnContext>,
    model: Model,
    cfg: TrainConfig,
    baseline: f64,
    rng: ChaCha8Rng,
    update: usize,
    started: Instant,
}

impl<'g> Trainer<'g> {
    /// Builds the vocab from `convs` and a freshly initialised model.
    pub fn new(graph: &'g Graph, convs: &[Conversation], cfg: TrainConfig) -> Result<Self> {
        let vocab = Vocab::from_conversations(convs);
        let model = Model::new(graph, vocab, cfg.dim, cfg.seed)?;
        let contexts = TurnContext::all(&model.vocab, convs)?;
        Self::with_model(graph, model, contexts, cfg)
    }

    pub fn with_model(graph: &'g Graph, model: Model, contexts: Vec<TurnContext>, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if contexts.is_empty() {
            return Err(Error::Config("no training turns".into()));
        }
        model.check_graph(graph)?;
        let env = Environment::new(graph, EpisodeConfig::new(cfg.horizon)?);
        let rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1, 0));
        Ok(Trainer {
            env,
            contexts,
            model,
            cfg,
            baseline: 0.0,
            rng,
            update: 0,
            started: Instant::now(),
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    /// Samples a turn uniformly, rolls out a batch on it, and applies one update.
    pub fn step(&mut self) -> Result<UpdateStats> {
        let k = self.rng.gen_range(0..self.contexts.len());
        let ctx = &self.contexts[k];
        let (model, env, cfg, update) = (&self.model, &self.env, &self.cfg, self.update);
        let episodes = map_range(cfg.exec, cfg.batch, |b| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 2 + update as u64, b as u64));
            rollout(model, env, ctx, &mut rng)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let batch: Vec<(&TurnContext, Episode)> = episodes.into_iter().map(|e| (ctx, e)).collect();
        let baseline = match self.cfg.baseline {
            Baseline::None => 0.0,
            Baseline::MovingAverage { .. } => self.baseline,
        };
        let mut stats = reinforce_update(&mut self.model, &self.env, &batch, baseline, &self.cfg, self.update)?;
        if let Baseline::MovingAverage { decay } = self.cfg.baseline {
            self.baseline = decay * self.baseline + (1.0 - decay) * stats.mean_reward;
        }
        if self.cfg.record_timing {
            stats.seconds = self.started.elapsed().as_secs_f64();
        }
        self.update += 1;
        Ok(stats)
    }

    /// Runs `cfg.updates` steps, calling `on_checkpoint(update, model)` every
    /// `cfg.checkpoint_every` updates.
    pub fn run<F>(mut self, mut on_checkpoint: F) -> Result<TrainOutcome>
    where
        F: FnMut(usize, &Model) -> Result<()>,
    {
        let mut stats = Vec::with_capacity(self.cfg.updates);
        for _ in 0..self.cfg.updates {
            let s = self.step()?;
            stats.push(s);
            if self.cfg.checkpoint_every > 0 && self.update.is_multiple_of(self.cfg.checkpoint_every) {
                on_checkpoint(self.update, &self.model)?;
            }
        }
        Ok(TrainOutcome {
            model: self.model,
            stats,
        })
    }
}

pub fn train(graph: &Graph, convs: &[Conversation], cfg: TrainConfig) -> Result<TrainOutcome> {
    Trainer::new(graph, convs, cfg)?.run(|_, _| Ok(()))
}

/// `update,mean_reward,loss,grad_norm,seconds`
pub fn write_stats_csv<W: Write>(mut w: W, stats: &[UpdateStats]) -> Result<()> {
    writeln!(w, "update,mean_reward,loss,grad_norm,seconds")?;
    for s in stats {
        writeln!(w, "{},{},{},{},{:.6}", s.update, s.mean_reward, s.loss, s.grad_norm, s.seconds)?;
    }
    Ok(())
}

/// All length-H paths for `ctx` with their exact probabilities.
pub fn enumerate_turn(model: &Model, env: &Environment<'_>, ctx: &TurnContext) -> Result<Vec<PathProb>> {
    let query = model.query_embedding(&ctx.questions)?;
    model.policy.enumerate_paths(&model.params, env, ctx.central, &query)
}

/// `Σ_paths P(path) · R(path)`: the policy's exact success probability.
pub fn exact_expected_reward(model: &Model, env: &Environment<'_>, ctx: &TurnContext) -> Result<f64> {
    Ok(enumerate_turn(model, env, ctx)?
        .iter()
        .filter(|p| ctx.answers.contains(&p.terminal))
        .map(|p| p.prob)
        .sum())
}

/// `Σ_paths P(path) · w(path, R) · ∇ log P(path)`, by replaying every path.
pub fn exact_weighted_gradient<F>(model: &Model, env: &Environment<'_>, ctx: &TurnContext, weight: F) -> Result<Gradients>
where
    F: Fn(&PathProb, f64) -> f64,
{
    let mut total = Gradients::zeros_like(&model.params);
    for path in enumerate_turn(model, env, ctx)? {
        let reward = if ctx.answers.contains(&path.terminal) { 1.0 } else { 0.0 };
        let w = path.prob * weight(&path, reward);
        if w == 0.0 {
            continue;
        }
        let mut tape = Tape::new(&model.params);
        let walk = replay(&mut tape, model, env, ctx, &path.actions, false)?;
        let lp = tape.add_all(&walk.log_probs)?;
        let scaled = tape.scale(lp, w)?;
        tape.backward(scaled, &mut total)?;
    }
    Ok(total)
}

/// Mean and sample standard deviation of the reward over `n` independent
/// rollouts seeded from `seed`.
pub fn monte_carlo_reward(
    model: &Model,
    env: &Environment<'_>,
    ctx: &TurnContext,
    n: usize,
    seed: u64,
    exec: Exec,
) -> Result<(f64, f64)> {
    let query = model.query_embedding(&ctx.questions)?;
    let rewards = map_range(exec, n, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, i as u64));
        crate::policy::rollout_from_query(model, env, &query, ctx.central, &ctx.answers, &mut rng).map(|e| e.reward)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mean = rewards.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Ok((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bandit() -> (Graph, Vec<Conversation>) {
        // S has two actions: its self-loop (index 0) and S→T. Only staying pays.
        let g = Graph::from_tsv("S\tgo\tT\n".as_bytes()).unwrap();
        let conv = Conversation {
            id: "bandit".into(),
            turns: vec![crate::dataset::Turn {
                question: vec!["stay".into()],
                central_entity: g.entity_id("S").unwrap(),
                answers: vec![g.entity_id("S").unwrap()],
                gold_relation: None,
            }],
        };
        (g, vec![conv])
    }

    fn prob_of_stay(model: &Model, g: &Graph) -> f64 {
        let env = Environment::new(g, EpisodeConfig::new(1).unwrap());
        let ctx = TurnContext::from_conversation(&model.vocab, &bandit().1[0], 0).unwrap();
        exact_expected_reward(model, &env, &ctx).unwrap()
    }

    #[test]
    fn zero_updates_leave_initialisation() {
        let (g, convs) = bandit();
        let cfg = TrainConfig {
            updates: 0,
            dim: 4,
            ..TrainConfig::default()
        };
        let out = train(&g, &convs, cfg.clone()).unwrap();
        let fresh = Model::new(&g, Vocab::from_conversations(&convs), 4, cfg.seed).unwrap();
        assert_eq!(out.model, fresh);
        assert!(out.stats.is_empty());
    }

    #[test]
    fn zero_rewards_without_baseline_change_nothing() {
        let (g, mut convs) = bandit();
        // T's only move is its self-loop, so S is never reached.
        convs[0].turns[0].central_entity = g.entity_id("T").unwrap();
        convs[0].turns[0].answers = vec![g.entity_id("S").unwrap()];
        let cfg = TrainConfig {
            updates: 5,
            horizon: 1,
            dim: 4,
            baseline: Baseline::None,
            entropy_weight: 0.0,
            ..TrainConfig::default()
        };
        let vocab = Vocab::from_conversations(&convs);
        let model = Model::new(&g, vocab, 4, 0).unwrap();
        let before = model.clone();
        let ctxs = TurnContext::all(&model.vocab, &convs).unwrap();
        let out = Trainer::with_model(&g, model, ctxs, cfg).unwrap().run(|_, _| Ok(())).unwrap();
        assert!(out.stats.iter().all(|s| s.mean_reward == 0.0 && s.grad_norm == 0.0));
        assert_eq!(out.model, before);
    }

    #[test]
    fn single_rewarded_episode_gradient_is_negative_log_prob_gradient() {
        let g = Graph::from_tsv("A\tr\tB\nB\tr\tC\nA\ts\tC\n".as_bytes()).unwrap();
        let mut model = Model::new(&g, Vocab::from_tokens(["q"]), 4, 9).unwrap();
        let env = Environment::new(&g, EpisodeConfig::new(2).unwrap());
        let ctx = TurnContext {
            questions: vec![vec![1]],
            central: 0,
            answers: vec![2],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ep = loop {
            let ep = rollout(&model, &env, &ctx, &mut rng).unwrap();
            if ep.reward == 1.0 {
                break ep;
            }
        };
        let mut expect = Gradients::zeros_like(&model.params);
        {
            let mut tape = Tape::new(&model.params);
            let walk = replay(&mut tape, &model, &env, &ctx, &ep.action_indices(), false).unwrap();
            let lp = tape.add_all(&walk.log_probs).unwrap();
            let neg = tape.scale(lp, -1.0).unwrap();
            tape.backward(neg, &mut expect).unwrap();
        }
        let cfg = TrainConfig {
            baseline: Baseline::None,
            entropy_weight: 0.0,
            ..TrainConfig::default()
        };
        reinforce_update(&mut model, &env, &[(&ctx, ep)], 0.0, &cfg, 0).unwrap();
        assert!(model.params.grads().max_abs_diff(&expect) < 1e-15);
    }

    /// Exact-gradient softmax bandit with two logits, independent of the model.
    fn reference_bandit(lr: f64, updates: usize) -> f64 {
        let mut z = [0.0f64, 0.0];
        for _ in 0..updates {
            let p0 = 1.0 / (1.0 + (z[1] - z[0]).exp());
            // d E[R] / d z0 = p0 (1 - p0) for reward on action 0.
            let g = p0 * (1.0 - p0);
            z[0] += lr * g;
            z[1] -= lr * g;
        }
        1.0 / (1.0 + (z[1] - z[0]).exp())
    }

    #[test]
    fn reference_bandit_ascent_converges() {
        assert!(reference_bandit(1.0, 500) > 0.95);
    }

    #[test]
    fn bandit_learns_to_stay() {
        let (g, convs) = bandit();
        let cfg = TrainConfig {
            updates: 500,
            horizon: 1,
            ..TrainConfig::default()
        };
        let out = train(&g, &convs, cfg).unwrap();
        let p = prob_of_stay(&out.model, &g);
        assert!(p > 0.95, "π(stay) = {p}");
    }

    #[test]
    fn same_seed_same_checkpoint() {
        let (g, convs) = bandit();
        let cfg = TrainConfig {
            updates: 20,
            horizon: 1,
            dim: 6,
            seed: 4,
            ..TrainConfig::default()
        };
        let a = train(&g, &convs, cfg.clone()).unwrap();
        let b = train(&g, &convs, TrainConfig { exec: Exec::Sequential, ..cfg }).unwrap();
        assert_eq!(a.model.to_bytes().unwrap(), b.model.to_bytes().unwrap());
        assert_eq!(a.stats, b.stats);
    }

    #[test]
    fn uniform_star_expected_reward() {
        let k = 4;
        let lines: String = (0..k).map(|i| format!("hub\tr\tleaf{i}\n")).collect();
        let g = Graph::from_tsv(lines.as_bytes()).unwrap();
        let mut model = Model::new(&g, Vocab::from_tokens(["q"]), 3, 1).unwrap();
        // Identical embeddings make every action score equal.
        for id in [model.policy.entity_embedding, model.policy.relation_embedding, model.policy.edge_embedding] {
            model.params.data_mut(id).iter_mut().for_each(|x| *x = 0.25);
        }
        let env = Environment::new(&g, EpisodeConfig::new(1).unwrap());
        let ctx = TurnContext {
            questions: vec![vec![1]],
            central: g.entity_id("hub").unwrap(),
            answers: vec![g.entity_id("leaf2").unwrap()],
        };
        let p = exact_expected_reward(&model, &env, &ctx).unwrap();
        assert!((p - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn stats_csv_header() {
        let mut buf = Vec::new();
        let s = UpdateStats {
            update: 0,
            mean_reward: 0.5,
            loss: -0.25,
            mean_log_prob: -1.0,
            grad_norm: 2.0,
            seconds: 0.0,
        };
        write_stats_csv(&mut buf, &[s]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "update,mean_reward,loss,grad_norm,seconds\n0,0.5,-0.25,2,0.000000\n");
    }
}
