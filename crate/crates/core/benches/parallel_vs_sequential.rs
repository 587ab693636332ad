use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kgwalk::eval::rank_all;
use kgwalk::trainer::monte_carlo_reward;
use kgwalk::{generate_synthetic, Environment, EpisodeConfig, Exec, Model, RankMode, SynthConfig, TrainConfig, Trainer, TurnContext, Vocab};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn fixture() -> (kgwalk::SynthData, Model) {
    let cfg = SynthConfig {
        train_conversations: 20,
        test_conversations: 10,
        ..SynthConfig::default()
    };
    let data = generate_synthetic(&cfg, 1).expect("synthetic data");
    let model = Model::new(&data.graph, Vocab::from_conversations(&data.train), 32, 1).expect("model");
    (data, model)
}

fn training_steps(c: &mut Criterion) {
    let (data, _) = fixture();
    let mut group = c.benchmark_group("train_10_updates");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let cfg = TrainConfig {
                    updates: 10,
                    batch: 32,
                    dim: 32,
                    exec,
                    ..TrainConfig::default()
                };
                let mut t = Trainer::new(&data.graph, &data.train, cfg).expect("trainer");
                for _ in 0..10 {
                    t.step().expect("update");
                }
            })
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let (data, model) = fixture();
    let env = Environment::new(&data.graph, EpisodeConfig::new(3).expect("horizon"));
    let ctx = TurnContext::from_conversation(&model.vocab, &data.train[0], 0).expect("context");
    let mut group = c.benchmark_group("monte_carlo_2000_rollouts");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| monte_carlo_reward(&model, &env, &ctx, 2000, 7, exec).expect("rollouts"))
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let (data, model) = fixture();
    let mut group = c.benchmark_group("rank_test_set_budget_200");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                rank_all(&model, &data.graph, &data.test, RankMode::Sampling { budget: 200 }, 3, 0, exec).expect("ranking")
            })
        });
    }
    group.finish();
}

criterion_group!(benches, training_steps, monte_carlo, evaluation);
criterion_main!(benches);
