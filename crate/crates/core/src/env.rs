//! Deterministic fixed-horizon graph walk with a terminal 0/1 reward.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{EdgeAction, EntityId, Graph};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeConfig {
    horizon: usize,
}

impl EpisodeConfig {
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        Ok(EpisodeConfig { horizon })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Always 1: the only reward arrives at the final step.
    pub fn discount(&self) -> f64 {
        1.0
    }
}

/// Walk position. The policy keeps the search-history embedding alongside.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub node: EntityId,
    pub query: Arc<[f64]>,
    pub step: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct Environment<'g> {
    graph: &'g Graph,
    config: EpisodeConfig,
}

impl<'g> Environment<'g> {
    pub fn new(graph: &'g Graph, config: EpisodeConfig) -> Self {
        Environment { graph, config }
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    pub fn reset(&self, central: EntityId, query: Arc<[f64]>) -> Result<State> {
        self.graph.outgoing(central)?;
        Ok(State {
            node: central,
            query,
            step: 0,
        })
    }

    pub fn valid_actions(&self, state: &State) -> Result<&'g [EdgeAction]> {
        self.graph.outgoing(state.node)
    }

    pub fn step(&self, state: &State, action: EdgeAction) -> Result<State> {
        if state.step >= self.config.horizon {
            return Err(Error::HorizonExceeded {
                step: state.step,
                horizon: self.config.horizon,
            });
        }
        if !self.valid_actions(state)?.contains(&action) {
            return Err(Error::IllegalAction {
                node: state.node,
                relation: action.relation,
                edge: action.edge,
                tail: action.tail,
            });
        }
        Ok(State {
            node: action.tail,
            query: Arc::clone(&state.query),
            step: state.step + 1,
        })
    }

    pub fn is_terminal(&self, state: &State) -> bool {
        state.step == self.config.horizon
    }

    /// 1.0 when the walk ended on any of `answers`, else 0.0. Only defined at
    /// the horizon.
    pub fn terminal_reward(&self, state: &State, answers: &[EntityId]) -> Result<f64> {
        if !self.is_terminal(state) {
            return Err(Error::NotTerminal {
                step: state.step,
                horizon: self.config.horizon,
            });
        }
        Ok(if answers.contains(&state.node) { 1.0 } else { 0.0 })
    }
}
