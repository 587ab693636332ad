use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Conversation, Turn};
use crate::error::{Error, Result};
use crate::graph::{EntityId, Graph, RelationId};

const RELATION_WORDS: &[&str] = &[
    "born_in",
    "capital_of",
    "author_of",
    "member_of",
    "located_in",
    "spouse_of",
    "founded_by",
    "part_of",
    "award",
    "genre",
    "employer",
    "language",
];

const OPENERS: &[&[&str]] = &[
    &["what", "is", "the"],
    &["which"],
    &["and", "the"],
    &["tell", "me", "the"],
    &["what", "about"],
    &["now", "the"],
];

const FILLER: &[&str] = &["it", "that", "one", "please", "then", "so", "again", "there", "its", "this"];

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub entities: usize,
    pub relations: usize,
    pub mean_out_degree: f64,
    pub train_conversations: usize,
    pub test_conversations: usize,
    pub turns: usize,
    /// Longest relation chain a question may ask for.
    pub max_path_len: usize,
    pub horizon: usize,
    /// Noise tokens mixed into every question.
    pub distractors: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            entities: 30,
            relations: 6,
            mean_out_degree: 3.0,
            train_conversations: 200,
            test_conversations: 50,
            turns: 5,
            max_path_len: 1,
            horizon: 3,
            distractors: 2,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.entities < 2 {
            return fail(format!("need at least 2 entities, got {}", self.entities));
        }
        if self.relations < 1 {
            return fail("need at least 1 relation".into());
        }
        if self.mean_out_degree.is_nan() || self.mean_out_degree < 1.0 {
            return fail(format!("mean out-degree must be >= 1, got {}", self.mean_out_degree));
        }
        let max_degree = self.mean_out_degree.ceil() as usize;
        if max_degree > self.entities - 1 {
            return fail(format!(
                "mean out-degree {} exceeds entities - 1 = {}",
                self.mean_out_degree,
                self.entities - 1
            ));
        }
        if max_degree > self.relations * (self.entities - 1) {
            return fail(format!("mean out-degree {} cannot be realised without duplicate edges", self.mean_out_degree));
        }
        if self.turns < 1 || self.train_conversations < 1 {
            return fail("need at least one training conversation with one turn".into());
        }
        if self.max_path_len < 1 || self.max_path_len > self.horizon {
            return fail(format!(
                "max path length {} must lie in 1..={} (the horizon)",
                self.max_path_len, self.horizon
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthData {
    pub graph: Graph,
    pub train: Vec<Conversation>,
    pub test: Vec<Conversation>,
}

fn relation_name(k: usize) -> String {
    RELATION_WORDS
        .get(k)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("relation_{k}"))
}

/// Builds a random graph plus train/test conversations whose answers are
/// reachable from the central entity along the relations each question names.
/// Follow-up turns start from the previous turn's answer.
pub fn generate_synthetic(cfg: &SynthConfig, seed: u64) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = (cfg.entities - 1).to_string().len().max(2);
    let names: Vec<String> = (0..cfg.entities).map(|i| format!("ent_{i:0width$}")).collect();
    let rel_names: Vec<String> = (0..cfg.relations).map(relation_name).collect();

    // Degree per entity: floor(mean) each, remainder spread over distinct entities.
    let base = cfg.mean_out_degree.floor() as usize;
    let total = (cfg.entities as f64 * cfg.mean_out_degree).round() as usize;
    let mut degree = vec![base; cfg.entities];
    let mut order: Vec<usize> = (0..cfg.entities).collect();
    order.shuffle(&mut rng);
    for &e in order.iter().take(total.saturating_sub(base * cfg.entities)) {
        degree[e] += 1;
    }

    let mut triples: Vec<(usize, usize, usize)> = Vec::new();
    for (head, &deg) in degree.iter().enumerate() {
        let mut used = BTreeSet::new();
        let mut rels: Vec<usize> = (0..cfg.relations).collect();
        rels.shuffle(&mut rng);
        for j in 0..deg {
            // Distinct relations per head while they last.
            loop {
                let r = rels.get(j).copied().unwrap_or_else(|| rng.gen_range(0..cfg.relations));
                let mut tail = rng.gen_range(0..cfg.entities - 1);
                if tail >= head {
                    tail += 1;
                }
                if used.insert((r, tail)) {
                    triples.push((head, r, tail));
                    break;
                }
            }
        }
    }
    let graph = Graph::from_triples(
        triples
            .iter()
            .map(|&(h, r, t)| (names[h].as_str(), rel_names[r].as_str(), names[t].as_str())),
    )?;

    let make = |prefix: &str, count: usize, rng: &mut ChaCha8Rng| -> Result<Vec<Conversation>> {
        let width = count.to_string().len().max(4);
        (0..count)
            .map(|i| {
                let id = format!("{prefix}-{i:0width$}");
                conversation(&graph, cfg, id, rng)
            })
            .collect()
    };
    let train = make("train", cfg.train_conversations, &mut rng)?;
    let test = make("test", cfg.test_conversations, &mut rng)?;
    Ok(SynthData { graph, train, test })
}

fn conversation(graph: &Graph, cfg: &SynthConfig, id: String, rng: &mut ChaCha8Rng) -> Result<Conversation> {
    let mut central: EntityId = rng.gen_range(0..graph.num_entities());
    let mut turns = Vec::with_capacity(cfg.turns);
    for _ in 0..cfg.turns {
        let hops = rng.gen_range(1..=cfg.max_path_len);
        let mut node = central;
        let mut chain: Vec<RelationId> = Vec::with_capacity(hops);
        for _ in 0..hops {
            let moves: Vec<_> = graph.outgoing(node)?.iter().filter(|a| !a.is_self_loop()).collect();
            let a = moves
                .choose(rng)
                .ok_or_else(|| Error::Config(format!("entity {node} has no outgoing edges")))?;
            chain.push(a.relation);
            node = a.tail;
        }
        let answers = follow(graph, central, &chain)?;
        let names: Vec<String> = chain
            .iter()
            .map(|&r| graph.relation_name(r).unwrap_or_default().to_string())
            .collect();
        turns.push(Turn {
            question: question(&names, cfg.distractors, rng),
            central_entity: central,
            answers,
            gold_relation: names.last().cloned(),
        });
        central = node;
    }
    Ok(Conversation { id, turns })
}

/// Every entity reached from `start` by following `chain` exactly.
fn follow(graph: &Graph, start: EntityId, chain: &[RelationId]) -> Result<Vec<EntityId>> {
    let mut frontier = BTreeSet::from([start]);
    for &r in chain {
        let mut next = BTreeSet::new();
        for &n in &frontier {
            next.extend(graph.outgoing(n)?.iter().filter(|a| a.relation == r).map(|a| a.tail));
        }
        frontier = next;
    }
    Ok(frontier.into_iter().collect())
}

fn question(relations: &[String], distractors: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut words: Vec<String> = OPENERS.choose(rng).expect("openers").iter().map(|s| s.to_string()).collect();
    for (i, r) in relations.iter().rev().enumerate() {
        if i > 0 {
            words.push("of".into());
        }
        words.push(r.clone());
    }
    for _ in 0..distractors {
        let pos = rng.gen_range(0..=words.len());
        words.insert(pos, FILLER.choose(rng).expect("filler").to_string());
    }
    words
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_follow_config() {
        let cfg = SynthConfig::default();
        let data = generate_synthetic(&cfg, 7).unwrap();
        assert_eq!(data.train.len(), 200);
        assert_eq!(data.test.len(), 50);
        assert!(data.train.iter().all(|c| c.turns.len() == 5));
        assert_eq!(data.graph.num_entities(), 30);
        assert_eq!(data.graph.num_source_triples(), 90);
    }

    #[test]
    fn follow_up_turns_start_at_a_previous_answer() {
        let data = generate_synthetic(&SynthConfig::default(), 3).unwrap();
        for c in &data.train {
            for w in c.turns.windows(2) {
                assert!(w[0].answers.contains(&w[1].central_entity));
            }
        }
    }

    #[test]
    fn question_mentions_gold_relation() {
        let data = generate_synthetic(&SynthConfig::default(), 11).unwrap();
        for t in data.train.iter().flat_map(|c| &c.turns) {
            let gold = t.gold_relation.as_ref().unwrap();
            assert!(t.question.contains(gold));
            let noise = t.question.iter().filter(|w| FILLER.contains(&w.as_str())).count();
            assert!(noise >= 2);
        }
    }

    #[test]
    fn unsatisfiable_configs_rejected() {
        let too_dense = SynthConfig {
            entities: 4,
            mean_out_degree: 4.0,
            ..SynthConfig::default()
        };
        assert!(matches!(generate_synthetic(&too_dense, 0), Err(Error::Config(_))));
        let too_long = SynthConfig {
            max_path_len: 4,
            ..SynthConfig::default()
        };
        assert!(generate_synthetic(&too_long, 0).is_err());
    }
}
