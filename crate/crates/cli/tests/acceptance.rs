//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use kgwalk::eval::{compute_metrics, rank_answers, RankMode, RankedAnswers};
use kgwalk::numeric::{finite_diff_check, Gradients, Tape};
use kgwalk::policy::{replay, rollout, TurnContext};
use kgwalk::trainer::{exact_expected_reward, exact_weighted_gradient, monte_carlo_reward, Trainer};
use kgwalk::{generate_synthetic, Environment, EpisodeConfig, Exec, Graph, Model, SynthConfig, TrainConfig, Vocab};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use kgwalk_oracle::{Dd, Real, Reference};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Random graph with `entities` nodes, per-node out-degree in `0..=max_degree`.
fn random_graph(rng: &mut ChaCha8Rng, entities: usize, relations: usize, max_degree: usize) -> Graph {
    let names: Vec<String> = (0..entities).map(|i| format!("e{i}")).collect();
    let rels: Vec<String> = (0..relations).map(|i| format!("r{i}")).collect();
    let mut triples = Vec::new();
    for h in 0..entities {
        for _ in 0..rng.gen_range(0..=max_degree) {
            let t = rng.gen_range(0..entities);
            let r = rng.gen_range(0..relations);
            triples.push((names[h].as_str(), rels[r].as_str(), names[t].as_str()));
        }
    }
    if triples.is_empty() {
        triples.push((names[0].as_str(), rels[0].as_str(), names[entities - 1].as_str()));
    }
    Graph::from_triples(triples).expect("graph")
}

/// A 10-node instance: graph, model with random parameters, and a
/// two-turn context. The central entity has a branching choice and the gold
/// answers are a proper subset of what is reachable in three steps, so the
/// terminal reward is never constant.
struct Instance {
    graph: Graph,
    model: Model,
    ctx: TurnContext,
}

fn reachable(graph: &Graph, start: usize, horizon: usize) -> Vec<usize> {
    let mut frontier = std::collections::BTreeSet::from([start]);
    for _ in 0..horizon {
        frontier = frontier.iter().flat_map(|&n| graph.outgoing(n).unwrap().iter().map(|a| a.tail)).collect();
    }
    frontier.into_iter().collect()
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let graph = random_graph(&mut rng, 10, 3, 3);
        let central = rng.gen_range(0..graph.num_entities());
        let reach = reachable(&graph, central, 3);
        if graph.outgoing(central).unwrap().len() < 2 || reach.len() < 2 {
            continue;
        }
        let mut answers: Vec<usize> = (0..reach.len() / 2).map(|_| reach[rng.gen_range(0..reach.len())]).collect();
        answers.sort();
        answers.dedup();
        let vocab = Vocab::from_tokens(["who", "what", "r0", "r1", "r2", "it"]);
        let model = Model::new(&graph, vocab, 8, seed).expect("model");
        let q = |rng: &mut ChaCha8Rng| (0..rng.gen_range(1..4)).map(|_| rng.gen_range(0..7)).collect::<Vec<_>>();
        let questions = vec![q(&mut rng), q(&mut rng)];
        return Instance {
            graph,
            model,
            ctx: TurnContext {
                questions,
                central,
                answers,
            },
        };
    }
}

fn criterion_1_gradient() -> Outcome {
    let start = Instant::now();
    let cfg = SynthConfig {
        entities: 10,
        relations: 3,
        mean_out_degree: 2.0,
        train_conversations: 3,
        test_conversations: 0,
        turns: 3,
        max_path_len: 2,
        horizon: 2,
        distractors: 1,
    };
    let data = generate_synthetic(&cfg, 5).map_err(|e| e.to_string())?;
    let mut model = Model::new(&data.graph, Vocab::from_conversations(&data.train), 8, 5).map_err(|e| e.to_string())?;
    let env = Environment::new(&data.graph, EpisodeConfig::new(2).unwrap());
    let ctx = TurnContext::from_conversation(&model.vocab, &data.train[0], 2).unwrap();
    let ep = rollout(&model, &env, &ctx, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let actions = ep.action_indices();

    let mut analytic = Gradients::zeros_like(&model.params);
    let tape_value = {
        let mut tape = Tape::new(&model.params);
        let walk = replay(&mut tape, &model, &env, &ctx, &actions, false).unwrap();
        let lp = tape.add_all(&walk.log_probs).unwrap();
        tape.backward(lp, &mut analytic).unwrap();
        tape.scalar(lp)
    };
    let reference = |store: &kgwalk::numeric::ParamStore| -> Dd {
        Reference {
            store,
            graph: &data.graph,
            dim: 8,
        }
        .walk::<Dd>(&ctx.questions, ctx.central, &actions, 0.0)
    };
    let base = reference(&model.params);
    let forward_gap = (base.to_f64() - tape_value).abs();
    // Differences are taken in double-double and only then rounded, so the
    // central difference is not swamped by f64 cancellation. A power-of-two
    // step keeps theta +/- eps exact.
    let eps = (-20f64).exp2();
    let report = finite_diff_check(&mut model.params, &analytic, eps, |s| Ok((reference(s) - base).to_f64()))
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(
        report.max_relative_error < 1e-6 && forward_gap < 1e-12 && elapsed < Duration::from_secs(30),
        format!(
            "eps 2^-20: max relative error {:.2e} over {} parameters (worst {:?}), forward gap {:.1e}, {:.1}s",
            report.max_relative_error,
            report.checked,
            report.worst,
            forward_gap,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2_normalisation() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = rng.gen_range(2..=12);
        let graph = random_graph(&mut rng, n, 3, 4);
        let model = Model::new(&graph, Vocab::from_tokens(["q"]), 6, seed).unwrap();
        let env = Environment::new(&graph, EpisodeConfig::new(2).unwrap());
        let query: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for start in 0..graph.num_entities() {
            let paths = model.policy.enumerate_paths(&model.params, &env, start, &query).unwrap();
            let total: f64 = paths.iter().map(|p| p.prob).sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    check(worst <= 1e-9, format!("20 graphs, every start entity: max |sum - 1| = {worst:.2e}"))
}

fn criterion_3_monte_carlo() -> Outcome {
    let n = 20_000;
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 0..10u64 {
        let inst = instance(seed);
        let env = Environment::new(&inst.graph, EpisodeConfig::new(3).unwrap());
        let exact = exact_expected_reward(&inst.model, &env, &inst.ctx).unwrap();
        let (mean, sd) = monte_carlo_reward(&inst.model, &env, &inst.ctx, n, 77 + seed, Exec::default()).unwrap();
        let tol = 3.0 * sd / (n as f64).sqrt();
        ok &= (mean - exact).abs() <= tol;
        lines.push(format!("{:.2}σ", (mean - exact).abs() / (sd / (n as f64).sqrt()).max(f64::MIN_POSITIVE)));
    }
    check(ok, format!("10 instances, deviation in standard errors: {}", lines.join(" ")))
}

fn criterion_4_score_identity() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_baseline = 0.0f64;
    for seed in 0..10u64 {
        let inst = instance(seed);
        let env = Environment::new(&inst.graph, EpisodeConfig::new(3).unwrap());
        let zero = exact_weighted_gradient(&inst.model, &env, &inst.ctx, |_, _| 1.0).unwrap();
        worst = worst.max(zero.max_abs());
        let plain = exact_weighted_gradient(&inst.model, &env, &inst.ctx, |_, r| r).unwrap();
        let shifted = exact_weighted_gradient(&inst.model, &env, &inst.ctx, |_, r| r - 0.37).unwrap();
        worst_baseline = worst_baseline.max(plain.max_abs_diff(&shifted));
    }
    check(
        worst <= 1e-8 && worst_baseline <= 1e-8,
        format!("max |E[grad log pi]| = {worst:.2e}; baseline shift changes expected gradient by {worst_baseline:.2e}"),
    )
}

fn criterion_5_learning() -> Outcome {
    let start = Instant::now();
    let data = generate_synthetic(&SynthConfig::default(), 0).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        exec: Exec::Sequential,
        ..TrainConfig::default()
    };
    let updates = cfg.updates;
    let mut trainer = Trainer::new(&data.graph, &data.train, cfg).map_err(|e| e.to_string())?;
    let window = 100;
    let mut rewards = Vec::with_capacity(updates);
    let mut reached = None;
    for u in 0..updates {
        rewards.push(trainer.step().map_err(|e| e.to_string())?.mean_reward);
        if rewards.len() >= window {
            let mean = rewards[rewards.len() - window..].iter().sum::<f64>() / window as f64;
            if mean >= 0.9 && reached.is_none() {
                reached = Some(u + 1);
            }
        }
    }
    let trained = Instant::now() - start;
    let report = kgwalk::evaluate(trainer.model(), &data.graph, &data.test, RankMode::Exact, 3, 0, Exec::Sequential)
        .map_err(|e| e.to_string())?;
    let final_mean = rewards[updates - window..].iter().sum::<f64>() / window as f64;
    check(
        reached.is_some() && report.p_at_1 >= 0.7 && trained < Duration::from_secs(300),
        format!(
            "reward over {window} updates first >= 0.9 at {reached:?}, final {final_mean:.3}; held-out P@1 {:.3}; training {:.0}s",
            report.p_at_1,
            trained.as_secs_f64()
        ),
    )
}

fn criterion_6_metrics() -> Outcome {
    let at_rank = |r: usize| {
        let mut entities: Vec<usize> = (0..5).collect();
        entities.insert(r - 1, 42);
        let scores = (0..entities.len()).rev().map(|s| s as f64).collect();
        (RankedAnswers { entities, scores }, vec![42])
    };
    let m = compute_metrics(&[at_rank(1), at_rank(2), at_rank(4)], 5).unwrap();
    let expect_mrr = (1.0 + 0.5 + 0.25) / 3.0;
    check(
        m.p_at_1 == 1.0 / 3.0 && (m.mrr - expect_mrr).abs() < 1e-15 && m.hit_at_k == 1.0,
        format!("P@1 {} MRR {} Hit@5 {}", m.p_at_1, m.mrr, m.hit_at_k),
    )
}

fn cli(args: &[&str], dir: &Path) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_kgwalk"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    Ok(out.stdout)
}

fn pipeline(dir: &Path) -> Result<Vec<Vec<u8>>, String> {
    let common = ["--seed", "3", "--set", "train_conversations=40", "--set", "test_conversations=10"];
    let with = |extra: &[&'static str]| -> Vec<&str> { extra.iter().copied().chain(common).collect() };
    let synth = cli(&with(&["synth", "--out", "data"]), dir)?;
    let train = cli(
        &with(&[
            "train",
            "--graph",
            "data/graph.tsv",
            "--data",
            "data/train.jsonl",
            "--checkpoint",
            "run/model.ckpt",
            "--out",
            "run",
            "--updates",
            "60",
        ]),
        dir,
    )?;
    let eval = cli(
        &with(&[
            "eval",
            "--graph",
            "data/graph.tsv",
            "--data",
            "data/test.jsonl",
            "--checkpoint",
            "run/model.ckpt",
            "--out",
            "run",
            "--budget",
            "200",
        ]),
        dir,
    )?;
    let mut files = vec![synth, train, eval];
    for f in ["data/graph.tsv", "data/train.jsonl", "data/test.jsonl", "run/model.ckpt", "run/stats.csv", "run/metrics.json"] {
        files.push(std::fs::read(dir.join(f)).map_err(|e| format!("{f}: {e}"))?);
    }
    Ok(files)
}

fn criterion_7_determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = pipeline(a.path())?;
    let second = pipeline(b.path())?;
    let same = first.iter().zip(&second).filter(|(x, y)| x == y).count();
    check(
        first == second,
        format!("{same}/{} outputs byte-identical (stdout x3, graph, train, test, checkpoint, stats, metrics)", first.len()),
    )
}

fn criterion_8_ranking() -> Outcome {
    let mut agree = 0;
    let mut total = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed);
        let graph = random_graph(&mut rng, 10, 3, 3);
        let model = Model::new(&graph, Vocab::from_tokens(["q", "r0"]), 8, seed).unwrap();
        let env = Environment::new(&graph, EpisodeConfig::new(2).unwrap());
        let ctx = TurnContext {
            questions: vec![vec![1, 2]],
            central: rng.gen_range(0..graph.num_entities()),
            answers: vec![],
        };
        let exact = rank_answers(&model, &env, &ctx, RankMode::Exact, 0).unwrap();
        let sampled = rank_answers(&model, &env, &ctx, RankMode::Sampling { budget: 2000 }, seed).unwrap();
        total += 1;
        agree += (exact.top() == sampled.top()) as usize;
    }
    check(agree * 100 >= 95 * total, format!("top-1 agreement {agree}/{total}"))
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 8] = [
        ("1 gradient check", criterion_1_gradient),
        ("2 path-measure normalisation", criterion_2_normalisation),
        ("3 Monte-Carlo vs exact reward", criterion_3_monte_carlo),
        ("4 score-function identity", criterion_4_score_identity),
        ("5 learning to criterion", criterion_5_learning),
        ("6 metric fixture", criterion_6_metrics),
        ("7 CLI determinism", criterion_7_determinism),
        ("8 sampling vs exact ranking", criterion_8_ranking),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {name}: {detail} [{:.1}s]", start.elapsed().as_secs_f64());
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
