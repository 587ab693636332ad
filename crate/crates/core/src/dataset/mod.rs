//! Conversations, the JSONL interchange format, and a seeded synthetic task
//! generator.

mod synth;

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityId, Graph};

pub use synth::{generate_synthetic, SynthConfig, SynthData};

/// One question/answer exchange with entity references resolved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Turn {
    /// Whitespace-separated words, original casing.
    pub question: Vec<String>,
    pub central_entity: EntityId,
    /// Sorted, deduplicated, non-empty.
    pub answers: Vec<EntityId>,
    pub gold_relation: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Conversation {
    pub id: String,
    pub turns: Vec<Turn>,
}

#[derive(Serialize, Deserialize)]
struct TurnRecord {
    question: String,
    central_entity: String,
    answers: Vec<String>,
    #[serde(default)]
    gold_relation: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct ConversationRecord {
    id: String,
    turns: Vec<TurnRecord>,
}

/// Reads one conversation per non-blank line and resolves every entity name
/// against `graph`.
pub fn load_conversations<R: BufRead>(reader: R, graph: &Graph) -> Result<Vec<Conversation>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ConversationRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(resolve(rec, graph)?);
    }
    Ok(out)
}

pub fn load_conversations_file(path: impl AsRef<Path>, graph: &Graph) -> Result<Vec<Conversation>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    load_conversations(std::io::BufReader::new(f), graph)
}

fn resolve(rec: ConversationRecord, graph: &Graph) -> Result<Conversation> {
    let id = rec.id;
    let invalid = |turn: usize, message: String| Error::InvalidTurn {
        conversation: id.clone(),
        turn,
        message,
    };
    if rec.turns.is_empty() {
        return Err(invalid(0, "conversation has no turns".into()));
    }
    let mut turns = Vec::with_capacity(rec.turns.len());
    for (t, tr) in rec.turns.into_iter().enumerate() {
        let question: Vec<String> = tr.question.split_whitespace().map(str::to_string).collect();
        if question.is_empty() {
            return Err(invalid(t, "empty question".into()));
        }
        if tr.answers.is_empty() {
            return Err(invalid(t, "empty answers".into()));
        }
        let lookup = |name: &str| {
            graph
                .entity_id(name)
                .map_err(|_| invalid(t, format!("unknown entity {name:?}")))
        };
        let central_entity = lookup(&tr.central_entity)?;
        let mut answers = tr.answers.iter().map(|a| lookup(a)).collect::<Result<Vec<_>>>()?;
        answers.sort_unstable();
        answers.dedup();
        turns.push(Turn {
            question,
            central_entity,
            answers,
            gold_relation: tr.gold_relation,
        });
    }
    Ok(Conversation { id, turns })
}

pub fn write_conversations<W: Write>(mut w: W, graph: &Graph, convs: &[Conversation]) -> Result<()> {
    for c in convs {
        let turns = c
            .turns
            .iter()
            .map(|t| {
                Ok(TurnRecord {
                    question: t.question.join(" "),
                    central_entity: graph.entity_name(t.central_entity)?.to_string(),
                    answers: t
                        .answers
                        .iter()
                        .map(|&a| graph.entity_name(a).map(str::to_string))
                        .collect::<Result<_>>()?,
                    gold_relation: t.gold_relation.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let rec = ConversationRecord { id: c.id.clone(), turns };
        let line = serde_json::to_string(&rec).map_err(|e| Error::Io(e.into()))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}
