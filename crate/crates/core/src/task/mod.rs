//! Reasoning level: action library, Action-State table, decision trees and
//! the online cooperation loop.

mod action;
mod coop;
mod event;
mod table;
mod transcript;
mod tree;

use std::mem;

use thiserror::Error;

pub use action::{parse_actions, write_actions, ActionLibrary, ActionSpec, AgentSpec};
pub use coop::{run_cooperation, RunOptions};
pub use event::{
    parse_trace, write_trace, Alternative, Event, EventSource, Expectation, InteractiveSource,
    Prompt, SimulatedSource, TimedEvent, TraceSource,
};
pub use table::{ActionStateTable, Binding, Row};
pub use transcript::{Entry, Outcome, Transcript};
pub use tree::{
    assignments, evaluate_decision_tree, generate_decision_tree, row_groundings,
    update_optimal_state, Branch, Constraint, Decision,
};

use crate::fol::Substitution;
use crate::graph::{AndOrGraph, ArcIx, Item, NodeIx, Status};
use crate::world::WorldError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TaskError {
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("no grounding for variable `?{0}`")]
    NoGrounding(String),
    #[error("row is not grounded")]
    NotGrounded,
    #[error(transparent)]
    World(#[from] WorldError),
}

/// A row of the table: an item of some graph instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowRef {
    pub instance: usize,
    pub item: Item,
}

/// One suggestion as seen by the task manager.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub row: RowRef,
    /// `<instance>::<item>`; used for display and tie-breaking.
    pub label: String,
    /// Id of the designed graph holding the item.
    pub graph: String,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    Solved,
    Failed,
    Suggestions(Vec<Candidate>),
}

/// What the cooperation loop needs from a task representation.
pub trait TaskModel {
    fn describe(&self) -> String;
    /// Applies pending completions and returns the online-phase result.
    fn query(&mut self) -> Query;
    fn actions(&self, row: RowRef) -> &[String];
    fn active_processes(&self, row: RowRef) -> Vec<String>;
    fn deactivate(&mut self, row: RowRef, process: &str) -> bool;
    fn action_done(&mut self, row: RowRef, index: usize);
    /// Queues the item as met or solved for the next query.
    fn complete(&mut self, row: RowRef);
    fn block(&mut self, row: RowRef);
    /// Constants the row's variables are tied to by the model itself.
    fn bindings(&self, _row: RowRef) -> Substitution {
        Substitution::new()
    }
}

/// A single-layer graph driven by the task manager.
#[derive(Debug, Clone)]
pub struct FlatModel {
    graph: AndOrGraph,
    met: Vec<NodeIx>,
    solved: Vec<ArcIx>,
}

impl FlatModel {
    pub fn new(graph: AndOrGraph) -> Self {
        FlatModel {
            graph,
            met: Vec::new(),
            solved: Vec::new(),
        }
    }

    pub fn graph(&self) -> &AndOrGraph {
        &self.graph
    }
}

impl TaskModel for FlatModel {
    fn describe(&self) -> String {
        self.graph.id().to_string()
    }

    fn query(&mut self) -> Query {
        let met = mem::take(&mut self.met);
        let solved = mem::take(&mut self.solved);
        match self.graph.online_phase(&met, &solved) {
            Status::Solved => Query::Solved,
            Status::Failed => Query::Failed,
            Status::Suggestions(s) => Query::Suggestions(
                s.into_iter()
                    .map(|s| Candidate {
                        row: RowRef {
                            instance: 0,
                            item: s.item,
                        },
                        label: format!("{}::{}", self.graph.id(), s.id),
                        graph: self.graph.id().to_string(),
                        cost: s.cost,
                    })
                    .collect(),
            ),
        }
    }

    fn actions(&self, row: RowRef) -> &[String] {
        match row.item {
            Item::Arc(h) => &self.graph.arc(h).actions,
            Item::Node(_) => &[],
        }
    }

    fn active_processes(&self, row: RowRef) -> Vec<String> {
        match row.item {
            Item::Node(n) => active(&self.graph, n),
            Item::Arc(_) => Vec::new(),
        }
    }

    fn deactivate(&mut self, row: RowRef, process: &str) -> bool {
        match row.item {
            Item::Node(n) => self.graph.deactivate_process(n, process),
            Item::Arc(_) => false,
        }
    }

    fn action_done(&mut self, row: RowRef, index: usize) {
        if let Item::Arc(h) = row.item {
            self.graph.record_action_done(h, index);
        }
    }

    fn complete(&mut self, row: RowRef) {
        match row.item {
            Item::Node(n) => self.met.push(n),
            Item::Arc(h) => self.solved.push(h),
        }
    }

    fn block(&mut self, row: RowRef) {
        self.graph.block(row.item);
    }
}

pub(crate) fn active(g: &AndOrGraph, n: NodeIx) -> Vec<String> {
    g.node(n)
        .processes
        .iter()
        .filter(|p| p.active)
        .map(|p| p.name.clone())
        .collect()
}
