//! Policy-gradient knowledge-graph walker for conversational question
//! answering.
//!
//! An agent starts at a turn's central entity and takes a fixed number of
//! hops through the graph. Its choices depend on an LSTM encoding of the
//! conversation so far and on its own search history. Training uses
//! REINFORCE with a terminal 0/1 reward; evaluation ranks terminal entities
//! by aggregated path probability.

pub mod dataset;
pub mod encoder;
pub mod env;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod numeric;
pub mod par;
pub mod policy;
pub mod seed;
pub mod trainer;

pub use dataset::{generate_synthetic, Conversation, SynthConfig, SynthData, Turn};
pub use encoder::{EncoderParams, Vocab};
pub use env::{Environment, EpisodeConfig, State};
pub use error::{Error, Result};
pub use eval::{compute_metrics, evaluate, rank_answers, MetricsReport, RankMode, RankedAnswers};
pub use graph::{EdgeAction, EntityId, Graph, RelationId};
pub use model::Model;
pub use par::Exec;
pub use policy::{rollout, Episode, PolicyParams, TurnContext};
pub use trainer::{train, Baseline, TrainConfig, Trainer, UpdateStats};
