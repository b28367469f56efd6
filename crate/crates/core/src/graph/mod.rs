//! Single-layer AND/OR graphs: met/solved/feasible bookkeeping, cooperation
//! paths and suggestions.

mod parse;
mod paths;
mod spec;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

pub use parse::{parse_graph, write_graph, ParseError, ParsedGraph, TransitionDecl};
pub use paths::{PathCosts, PathIndex, Topology};
pub use spec::{ArcSpec, GraphSpec, NodeSpec, Violation};

use crate::fol::State;

pub const DEFAULT_PATH_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown hyper-arc `{0}`")]
    UnknownHyperarc(String),
    #[error("graph `{graph}` is invalid: {}", list_violations(.violations))]
    Invalid {
        graph: String,
        violations: Vec<Violation>,
    },
    #[error("graph `{graph}` has more than {cap} cooperation paths")]
    ModelTooLarge { graph: String, cap: usize },
}

fn list_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeIx(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArcIx(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Item {
    Node(NodeIx),
    Arc(ArcIx),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Process {
    pub name: String,
    pub active: bool,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: String,
    pub state: State,
    pub processes: Vec<Process>,
    pub weight: f64,
    pub met: bool,
    pub feasible: bool,
    /// Forced infeasible from outside (failed execution); never re-enabled.
    pub blocked: bool,
}

#[derive(Debug, Clone)]
pub struct HyperArc {
    pub id: String,
    pub children: Vec<NodeIx>,
    pub parent: NodeIx,
    pub actions: Vec<String>,
    pub weight: f64,
    pub solved: bool,
    pub feasible: bool,
    pub blocked: bool,
    /// Indices of actions in the order they were reported done.
    pub completed: Vec<usize>,
}

impl HyperArc {
    pub fn done_in_order(&self) -> bool {
        self.completed.iter().copied().eq(0..self.actions.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub item: Item,
    pub id: String,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Solved,
    Failed,
    Suggestions(Vec<Suggestion>),
}

/// Cooperation path expressed with ids, for inspection and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct CooperationPath {
    pub nodes: BTreeSet<String>,
    pub hyperarcs: BTreeSet<String>,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy)]
enum Pending {
    Completed { item: usize, weight: f64 },
    Killed(usize),
}

#[derive(Debug, Clone)]
pub struct AndOrGraph {
    id: String,
    nodes: Vec<Node>,
    arcs: Vec<HyperArc>,
    index: Arc<BTreeMap<String, Item>>,
    arcs_into: Arc<Vec<Vec<usize>>>,
    arcs_from: Arc<Vec<Vec<usize>>>,
    root: NodeIx,
    n_f: BTreeSet<NodeIx>,
    h_f: BTreeSet<ArcIx>,
    paths: Arc<PathIndex>,
    costs: PathCosts,
    pending: Vec<Pending>,
    active: bool,
}

impl AndOrGraph {
    pub fn from_spec(spec: &GraphSpec) -> Result<Self, GraphError> {
        Self::with_path_cap(spec, DEFAULT_PATH_CAP)
    }

    /// Validates the description, enumerates `CP(G)` and computes initial
    /// feasibility.
    pub fn with_path_cap(spec: &GraphSpec, cap: usize) -> Result<Self, GraphError> {
        let violations = spec.validate();
        if !violations.is_empty() {
            return Err(GraphError::Invalid {
                graph: spec.id.clone(),
                violations,
            });
        }
        let mut index = BTreeMap::new();
        let nodes: Vec<Node> = spec
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                index.insert(n.id.clone(), Item::Node(NodeIx(i)));
                Node {
                    id: n.id.clone(),
                    state: n.state.clone(),
                    processes: n
                        .processes
                        .iter()
                        .map(|p| Process {
                            name: p.clone(),
                            active: true,
                        })
                        .collect(),
                    weight: n.weight,
                    met: false,
                    feasible: false,
                    blocked: false,
                }
            })
            .collect();
        let node_map: BTreeMap<&str, usize> = spec
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        let node_ix = |id: &str| NodeIx(node_map[id]);
        let arcs: Vec<HyperArc> = spec
            .arcs
            .iter()
            .map(|a| {
                let mut children: Vec<NodeIx> = a.children.iter().map(|c| node_ix(c)).collect();
                children.sort();
                children.dedup();
                HyperArc {
                    id: a.id.clone(),
                    children,
                    parent: node_ix(&a.parent),
                    actions: a.actions.clone(),
                    weight: a.weight,
                    solved: false,
                    feasible: false,
                    blocked: false,
                    completed: Vec::new(),
                }
            })
            .collect();
        for (j, a) in spec.arcs.iter().enumerate() {
            index.insert(a.id.clone(), Item::Arc(ArcIx(j)));
        }
        let mut arcs_into = vec![Vec::new(); nodes.len()];
        let mut arcs_from = vec![Vec::new(); nodes.len()];
        for (j, a) in arcs.iter().enumerate() {
            arcs_into[a.parent.0].push(j);
            for c in &a.children {
                arcs_from[c.0].push(j);
            }
        }
        let root = node_ix(spec.roots()[0]);
        let children: Vec<Vec<usize>> = arcs
            .iter()
            .map(|a| a.children.iter().map(|c| c.0).collect())
            .collect();
        let topo = Topology {
            arcs_into: &arcs_into,
            children: &children,
            root: root.0,
        };
        let paths = PathIndex::enumerate(&topo, cap).map_err(|_| GraphError::ModelTooLarge {
            graph: spec.id.clone(),
            cap,
        })?;
        let weights: Vec<f64> = nodes
            .iter()
            .map(|n| n.weight)
            .chain(arcs.iter().map(|a| a.weight))
            .collect();
        let costs = PathCosts::new(&paths, &weights);
        let mut g = AndOrGraph {
            id: spec.id.clone(),
            nodes,
            arcs,
            index: Arc::new(index),
            arcs_into: Arc::new(arcs_into),
            arcs_from: Arc::new(arcs_from),
            root,
            n_f: BTreeSet::new(),
            h_f: BTreeSet::new(),
            paths: Arc::new(paths),
            costs,
            pending: Vec::new(),
            active: false,
        };
        g.activate();
        Ok(g)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[HyperArc] {
        &self.arcs
    }

    pub fn node(&self, n: NodeIx) -> &Node {
        &self.nodes[n.0]
    }

    pub fn arc(&self, h: ArcIx) -> &HyperArc {
        &self.arcs[h.0]
    }

    pub fn root(&self) -> NodeIx {
        self.root
    }

    pub fn item(&self, id: &str) -> Option<Item> {
        self.index.get(id).copied()
    }

    pub fn node_ix(&self, id: &str) -> Result<NodeIx, GraphError> {
        match self.item(id) {
            Some(Item::Node(n)) => Ok(n),
            _ => Err(GraphError::UnknownNode(id.to_string())),
        }
    }

    pub fn arc_ix(&self, id: &str) -> Result<ArcIx, GraphError> {
        match self.item(id) {
            Some(Item::Arc(h)) => Ok(h),
            _ => Err(GraphError::UnknownHyperarc(id.to_string())),
        }
    }

    pub fn item_id(&self, item: Item) -> &str {
        match item {
            Item::Node(n) => &self.nodes[n.0].id,
            Item::Arc(h) => &self.arcs[h.0].id,
        }
    }

    pub fn is_leaf(&self, n: NodeIx) -> bool {
        self.arcs_into[n.0].is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeIx> + '_ {
        (0..self.nodes.len()).map(NodeIx).filter(|&n| self.is_leaf(n))
    }

    /// Hyper-arcs having `n` among their children.
    pub fn arcs_from(&self, n: NodeIx) -> impl Iterator<Item = ArcIx> + '_ {
        self.arcs_from[n.0].iter().map(|&j| ArcIx(j))
    }

    /// Hyper-arcs having `n` as parent.
    pub fn arcs_into(&self, n: NodeIx) -> impl Iterator<Item = ArcIx> + '_ {
        self.arcs_into[n.0].iter().map(|&j| ArcIx(j))
    }

    pub fn feasible_nodes(&self) -> &BTreeSet<NodeIx> {
        &self.n_f
    }

    pub fn feasible_arcs(&self) -> &BTreeSet<ArcIx> {
        &self.h_f
    }

    pub fn is_feasible(&self, item: Item) -> bool {
        match item {
            Item::Node(n) => self.nodes[n.0].feasible,
            Item::Arc(h) => self.arcs[h.0].feasible,
        }
    }

    pub fn is_done(&self, item: Item) -> bool {
        match item {
            Item::Node(n) => self.nodes[n.0].met,
            Item::Arc(h) => self.arcs[h.0].solved,
        }
    }

    pub fn is_solved(&self) -> bool {
        self.nodes[self.root.0].met
    }

    /// At least one feasible node or hyper-arc.
    pub fn has_feasible(&self) -> bool {
        !self.n_f.is_empty() || !self.h_f.is_empty()
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn path_index(&self) -> &PathIndex {
        &self.paths
    }

    pub fn path_costs(&self) -> &PathCosts {
        &self.costs
    }

    fn dense(&self, item: Item) -> usize {
        match item {
            Item::Node(n) => n.0,
            Item::Arc(h) => self.nodes.len() + h.0,
        }
    }

    fn undense(&self, i: usize) -> Item {
        if i < self.nodes.len() {
            Item::Node(NodeIx(i))
        } else {
            Item::Arc(ArcIx(i - self.nodes.len()))
        }
    }

    pub fn weight(&self, item: Item) -> f64 {
        match item {
            Item::Node(n) => self.nodes[n.0].weight,
            Item::Arc(h) => self.arcs[h.0].weight,
        }
    }

    /// Computes feasibility of every item from the current flags.
    pub fn activate(&mut self) {
        self.active = true;
        for n in 0..self.nodes.len() {
            self.update_node_feasibility(NodeIx(n));
        }
        for h in 0..self.arcs.len() {
            if !self.arcs[h].solved {
                self.update_hyperarc_feasibility(ArcIx(h));
            }
        }
    }

    /// Makes every item infeasible until the next [`activate`](Self::activate).
    pub fn suspend(&mut self) {
        self.active = false;
        for &n in &self.n_f {
            self.nodes[n.0].feasible = false;
        }
        for &h in &self.h_f {
            self.arcs[h.0].feasible = false;
        }
        self.n_f.clear();
        self.h_f.clear();
    }

    fn set_node_feasible(&mut self, n: NodeIx, value: bool) {
        let value = value && self.active && !self.nodes[n.0].blocked && !self.nodes[n.0].met;
        self.nodes[n.0].feasible = value;
        if value {
            self.n_f.insert(n);
        } else {
            self.n_f.remove(&n);
        }
    }

    fn set_arc_feasible(&mut self, h: ArcIx, value: bool) {
        let value = value && self.active && !self.arcs[h.0].blocked && !self.arcs[h.0].solved;
        self.arcs[h.0].feasible = value;
        if value {
            self.h_f.insert(h);
        } else {
            self.h_f.remove(&h);
        }
    }

    /// Some other solved hyper-arc shares a child with `h`.
    fn solved_sibling(&self, h: ArcIx) -> bool {
        self.arcs[h.0].children.iter().any(|c| {
            self.arcs_from[c.0]
                .iter()
                .any(|&j| j != h.0 && self.arcs[j].solved)
        })
    }

    fn all_children_met(&self, h: ArcIx) -> bool {
        self.arcs[h.0].children.iter().all(|c| self.nodes[c.0].met)
    }

    /// Node feasibility update, followed by the hyper-arcs leaving a met node.
    pub fn update_node_feasibility(&mut self, n: NodeIx) {
        self.set_node_feasible(n, false);
        if self.nodes[n.0].met {
            for k in 0..self.arcs_from[n.0].len() {
                let h = ArcIx(self.arcs_from[n.0][k]);
                if self.arcs[h.0].solved {
                    self.set_arc_feasible(h, false);
                } else {
                    let ok = self.all_children_met(h) && !self.solved_sibling(h);
                    self.set_arc_feasible(h, ok);
                }
            }
        } else {
            let ok = self.is_leaf(n)
                || self.arcs_into[n.0].iter().any(|&j| self.arcs[j].solved);
            self.set_node_feasible(n, ok);
        }
    }

    /// Hyper-arc feasibility update. A solved hyper-arc enables its parent
    /// and disables every hyper-arc sharing one of its children.
    pub fn update_hyperarc_feasibility(&mut self, h: ArcIx) {
        self.set_arc_feasible(h, false);
        if self.arcs[h.0].solved {
            let parent = self.arcs[h.0].parent;
            if !self.nodes[parent.0].met {
                self.set_node_feasible(parent, true);
            }
            for c in 0..self.arcs[h.0].children.len() {
                let child = self.arcs[h.0].children[c];
                for k in 0..self.arcs_from[child.0].len() {
                    let other = ArcIx(self.arcs_from[child.0][k]);
                    self.set_arc_feasible(other, false);
                }
            }
        } else {
            let ok = self.all_children_met(h) && !self.solved_sibling(h);
            self.set_arc_feasible(h, ok);
        }
    }

    /// Marks a feasible node met once all its processes are deactivated.
    pub fn mark_node_met(&mut self, n: NodeIx) -> bool {
        let node = &self.nodes[n.0];
        if !node.feasible || node.processes.iter().any(|p| p.active) {
            return false;
        }
        let weight = node.weight;
        self.nodes[n.0].met = true;
        self.set_node_feasible(n, false);
        self.pending.push(Pending::Completed {
            item: n.0,
            weight,
        });
        true
    }

    /// Marks a feasible hyper-arc solved when all its actions were reported
    /// done in list order.
    pub fn mark_hyperarc_solved(&mut self, h: ArcIx) -> bool {
        let arc = &self.arcs[h.0];
        if !arc.feasible || !arc.done_in_order() {
            return false;
        }
        self.force_solve(h);
        true
    }

    /// Solves a hyper-arc regardless of its action bookkeeping. Used when the
    /// completion is established elsewhere (a lower-layer graph).
    pub fn force_solve(&mut self, h: ArcIx) {
        if self.arcs[h.0].solved {
            return;
        }
        let weight = self.arcs[h.0].weight;
        self.arcs[h.0].solved = true;
        self.set_arc_feasible(h, false);
        self.pending.push(Pending::Completed {
            item: self.nodes.len() + h.0,
            weight,
        });
    }

    /// Records that action `idx` of `h` has been carried out.
    pub fn record_action_done(&mut self, h: ArcIx, idx: usize) -> bool {
        let arc = &mut self.arcs[h.0];
        if idx >= arc.actions.len() || arc.completed.contains(&idx) || arc.solved {
            return false;
        }
        arc.completed.push(idx);
        true
    }

    /// Deactivates `process` of `n`; processes go down in list order.
    pub fn deactivate_process(&mut self, n: NodeIx, process: &str) -> bool {
        match self.nodes[n.0].processes.iter_mut().find(|p| p.active) {
            Some(p) if p.name == process => {
                p.active = false;
                true
            }
            _ => false,
        }
    }

    /// Forces an item infeasible for the rest of the run and discards every
    /// cooperation path through it.
    pub fn block(&mut self, item: Item) {
        match item {
            Item::Node(n) => {
                self.nodes[n.0].blocked = true;
                self.set_node_feasible(n, false);
            }
            Item::Arc(h) => {
                self.arcs[h.0].blocked = true;
                self.set_arc_feasible(h, false);
            }
        }
        let d = self.dense(item);
        self.pending.push(Pending::Killed(d));
    }

    pub fn is_blocked(&self, item: Item) -> bool {
        match item {
            Item::Node(n) => self.nodes[n.0].blocked,
            Item::Arc(h) => self.arcs[h.0].blocked,
        }
    }

    /// Changes a hyper-arc weight, keeping path costs consistent.
    pub fn set_arc_weight(&mut self, h: ArcIx, weight: f64) {
        let old = self.arcs[h.0].weight;
        self.arcs[h.0].weight = weight;
        if !self.arcs[h.0].solved {
            let d = self.nodes.len() + h.0;
            self.costs.add(&self.paths, d, weight - old);
        }
    }

    /// Applies pending completions and blocks to the path costs.
    pub fn update_all_paths(&mut self) {
        let pending = std::mem::take(&mut self.pending);
        for change in pending {
            match change {
                Pending::Completed { item, weight } => {
                    self.costs.add(&self.paths, item, -weight);
                    if let Item::Arc(h) = self.undense(item) {
                        let mut siblings = BTreeSet::new();
                        for c in &self.arcs[h.0].children {
                            siblings.extend(self.arcs_from[c.0].iter().copied());
                        }
                        siblings.remove(&h.0);
                        for j in siblings {
                            self.costs.kill(&self.paths, self.nodes.len() + j);
                        }
                    }
                }
                Pending::Killed(item) => self.costs.kill(&self.paths, item),
            }
        }
    }

    pub fn has_pending_updates(&self) -> bool {
        !self.pending.is_empty()
    }

    /// Minimum current cost over live paths containing `item`, or infinity
    /// when no live path contains it.
    pub fn item_cost(&self, item: Item) -> f64 {
        self.costs
            .min_with(&self.paths, self.dense(item))
            .unwrap_or(f64::INFINITY)
    }

    /// Cost of the cheapest live cooperation path.
    pub fn min_path_cost(&self) -> f64 {
        self.costs.min().unwrap_or(f64::INFINITY)
    }

    /// One suggestion per feasible node and hyper-arc, ordered by cost and
    /// then by id.
    pub fn find_suggestions(&self) -> Vec<Suggestion> {
        let items = self
            .n_f
            .iter()
            .map(|&n| Item::Node(n))
            .chain(self.h_f.iter().map(|&h| Item::Arc(h)));
        let mut out: Vec<Suggestion> = items
            .map(|item| Suggestion {
                item,
                id: self.item_id(item).to_string(),
                cost: self.item_cost(item),
            })
            .collect();
        sort_suggestions(&mut out);
        out
    }

    /// One query of the online phase: apply met nodes then solved hyper-arcs,
    /// report termination, otherwise refresh costs and suggest.
    pub fn online_phase(&mut self, met: &[NodeIx], solved: &[ArcIx]) -> Status {
        for &n in met {
            if self.mark_node_met(n) {
                self.update_node_feasibility(n);
            }
        }
        for &h in solved {
            if self.mark_hyperarc_solved(h) {
                self.update_hyperarc_feasibility(h);
            }
        }
        if self.is_solved() {
            return Status::Solved;
        }
        if !self.has_feasible() {
            return Status::Failed;
        }
        self.update_all_paths();
        Status::Suggestions(self.find_suggestions())
    }

    /// Id-based convenience wrapper around [`online_phase`](Self::online_phase).
    pub fn online_phase_ids(&mut self, met: &[&str], solved: &[&str]) -> Result<Status, GraphError> {
        let met = met
            .iter()
            .map(|id| self.node_ix(id))
            .collect::<Result<Vec<_>, _>>()?;
        let solved = solved
            .iter()
            .map(|id| self.arc_ix(id))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.online_phase(&met, &solved))
    }

    /// All cooperation paths with their current costs (pending updates are
    /// not applied).
    pub fn cooperation_paths(&self) -> Vec<CooperationPath> {
        (0..self.paths.len())
            .map(|p| {
                let mut nodes = BTreeSet::new();
                let mut hyperarcs = BTreeSet::new();
                for i in self.paths.members(p) {
                    match self.undense(i) {
                        Item::Node(n) => nodes.insert(self.nodes[n.0].id.clone()),
                        Item::Arc(h) => hyperarcs.insert(self.arcs[h.0].id.clone()),
                    };
                }
                CooperationPath {
                    nodes,
                    hyperarcs,
                    cost: self.costs.cost(p),
                }
            })
            .collect()
    }

    /// Cost of a path recomputed from the current flags: weights of members
    /// that are not met or solved.
    pub fn path_cost(&self, cp: &CooperationPath) -> f64 {
        let n: f64 = cp
            .nodes
            .iter()
            .filter_map(|id| self.node_ix(id).ok())
            .filter(|n| !self.nodes[n.0].met)
            .map(|n| self.nodes[n.0].weight)
            .sum();
        let h: f64 = cp
            .hyperarcs
            .iter()
            .filter_map(|id| self.arc_ix(id).ok())
            .filter(|h| !self.arcs[h.0].solved)
            .map(|h| self.arcs[h.0].weight)
            .sum();
        n + h
    }

    /// Whether live path `p` (by index) is still completable.
    pub fn path_alive(&self, p: usize) -> bool {
        self.costs.is_alive(p)
    }
}

pub fn sort_suggestions(s: &mut [Suggestion]) {
    s.sort_by(|a, b| a.cost.total_cmp(&b.cost).then_with(|| a.id.cmp(&b.id)));
}
