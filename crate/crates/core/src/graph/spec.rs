//! Static description of a single-layer graph, as loaded from a file or
//! built by a generator, and its structural validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::fol::{ArityTable, FolError, State};

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub id: String,
    pub weight: f64,
    pub state: State,
    pub processes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArcSpec {
    pub id: String,
    pub weight: f64,
    pub children: Vec<String>,
    pub parent: String,
    pub actions: Vec<String>,
}

/// A graph description. `lines` records source line numbers of items when
/// the description came from a file; it is ignored by equality.
#[derive(Debug, Clone, Default)]
pub struct GraphSpec {
    pub id: String,
    pub nodes: Vec<NodeSpec>,
    pub arcs: Vec<ArcSpec>,
    pub lines: BTreeMap<String, usize>,
}

impl PartialEq for GraphSpec {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.nodes == other.nodes && self.arcs == other.arcs
    }
}

impl NodeSpec {
    pub fn new(id: &str, weight: f64, state: State) -> Self {
        NodeSpec {
            id: id.to_string(),
            weight,
            state,
            processes: Vec::new(),
        }
    }
}

impl ArcSpec {
    pub fn new(id: &str, weight: f64, children: &[&str], parent: &str, actions: &[&str]) -> Self {
        ArcSpec {
            id: id.to_string(),
            weight,
            children: children.iter().map(|s| s.to_string()).collect(),
            parent: parent.to_string(),
            actions: actions.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoRoot,
    MultipleRoots(Vec<String>),
    SelfLoop { arc: String },
    Cycle { node: String },
    UnknownNode { arc: String, node: String },
    NegativeWeight { item: String },
    DuplicateId(String),
    EmptyChildren { arc: String },
    ContradictoryState { node: String },
    Literal { node: String, error: FolError },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoRoot => write!(f, "no root node"),
            Violation::MultipleRoots(ids) => write!(f, "multiple roots: {}", ids.join(", ")),
            Violation::SelfLoop { arc } => write!(f, "hyper-arc `{arc}` has its parent among its children"),
            Violation::Cycle { node } => write!(f, "cycle through node `{node}`"),
            Violation::UnknownNode { arc, node } => {
                write!(f, "hyper-arc `{arc}` references unknown node `{node}`")
            }
            Violation::NegativeWeight { item } => write!(f, "`{item}` has a negative weight"),
            Violation::DuplicateId(id) => write!(f, "duplicate id `{id}`"),
            Violation::EmptyChildren { arc } => write!(f, "hyper-arc `{arc}` has no children"),
            Violation::ContradictoryState { node } => {
                write!(f, "state of `{node}` holds a literal with both polarities")
            }
            Violation::Literal { node, error } => write!(f, "node `{node}`: {error}"),
        }
    }
}

impl GraphSpec {
    pub fn new(id: &str) -> Self {
        GraphSpec {
            id: id.to_string(),
            ..GraphSpec::default()
        }
    }

    pub fn node(&self, id: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn arc(&self, id: &str) -> Option<&ArcSpec> {
        self.arcs.iter().find(|a| a.id == id)
    }

    pub fn arc_mut(&mut self, id: &str) -> Option<&mut ArcSpec> {
        self.arcs.iter_mut().find(|a| a.id == id)
    }

    /// Nodes that are the parent of no hyper-arc.
    pub fn leaves(&self) -> Vec<&str> {
        let parents: BTreeSet<&str> = self.arcs.iter().map(|a| a.parent.as_str()).collect();
        self.nodes
            .iter()
            .map(|n| n.id.as_str())
            .filter(|id| !parents.contains(id))
            .collect()
    }

    /// Nodes that are the child of no hyper-arc.
    pub fn roots(&self) -> Vec<&str> {
        let children: BTreeSet<&str> = self
            .arcs
            .iter()
            .flat_map(|a| a.children.iter().map(String::as_str))
            .collect();
        self.nodes
            .iter()
            .map(|n| n.id.as_str())
            .filter(|id| !children.contains(id))
            .collect()
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for id in self.nodes.iter().map(|n| &n.id).chain(self.arcs.iter().map(|a| &a.id)) {
            if !seen.insert(id.as_str()) {
                out.push(Violation::DuplicateId(id.clone()));
            }
        }
        let node_ids: BTreeSet<&str> = self.nodes.iter().map(|n| n.id.as_str()).collect();

        let mut arities = ArityTable::new();
        for n in &self.nodes {
            if n.weight < 0.0 || n.weight.is_nan() {
                out.push(Violation::NegativeWeight { item: n.id.clone() });
            }
            if !n.state.contradictions().is_empty() {
                out.push(Violation::ContradictoryState { node: n.id.clone() });
            }
            if let Err(error) = arities.check_all(n.state.literals()) {
                out.push(Violation::Literal {
                    node: n.id.clone(),
                    error,
                });
            }
        }
        for a in &self.arcs {
            if a.weight < 0.0 || a.weight.is_nan() {
                out.push(Violation::NegativeWeight { item: a.id.clone() });
            }
            if a.children.is_empty() {
                out.push(Violation::EmptyChildren { arc: a.id.clone() });
            }
            if a.children.contains(&a.parent) {
                out.push(Violation::SelfLoop { arc: a.id.clone() });
            }
            for n in a.children.iter().chain(std::iter::once(&a.parent)) {
                if !node_ids.contains(n.as_str()) {
                    out.push(Violation::UnknownNode {
                        arc: a.id.clone(),
                        node: n.clone(),
                    });
                }
            }
        }

        let roots = self.roots();
        match roots.len() {
            0 => out.push(Violation::NoRoot),
            1 => {}
            _ => out.push(Violation::MultipleRoots(
                roots.iter().map(|s| s.to_string()).collect(),
            )),
        }
        if let Some(node) = self.find_cycle() {
            out.push(Violation::Cycle { node });
        }
        out
    }

    /// Kahn's algorithm on the child → parent relation; returns some node
    /// left with unresolved predecessors when the relation is cyclic.
    fn find_cycle(&self) -> Option<String> {
        let mut indegree: BTreeMap<&str, usize> =
            self.nodes.iter().map(|n| (n.id.as_str(), 0)).collect();
        let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for a in &self.arcs {
            if a.children.contains(&a.parent) {
                continue;
            }
            for c in &a.children {
                if indegree.contains_key(c.as_str()) && indegree.contains_key(a.parent.as_str()) {
                    succ.entry(c.as_str()).or_default().push(a.parent.as_str());
                    *indegree.get_mut(a.parent.as_str()).unwrap() += 1;
                }
            }
        }
        let mut queue: Vec<&str> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(n, _)| *n)
            .collect();
        while let Some(n) = queue.pop() {
            for p in succ.get(n).into_iter().flatten() {
                let d = indegree.get_mut(p).unwrap();
                *d -= 1;
                if *d == 0 {
                    queue.push(p);
                }
            }
        }
        indegree
            .into_iter()
            .find(|(_, d)| *d > 0)
            .map(|(n, _)| n.to_string())
    }
}
