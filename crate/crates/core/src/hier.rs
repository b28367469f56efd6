//! Hierarchical AND/OR graphs.
//!
//! A hyper-arc of one graph may be refined by a whole lower graph. Designs
//! are shared, but every use of a design gets its own runtime instance, so
//! two hyper-arcs refined by the same design progress independently.
//! Instances form a tree rooted at the instance of the root design.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::mem;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::fol::{semantically_equivalent, unify_with, Correspondence, Literal, State, Substitution};
use crate::graph::{
    AndOrGraph, ArcIx, ArcSpec, GraphError, GraphSpec, Item, NodeIx, NodeSpec, ParseError,
    ParsedGraph, TransitionDecl,
};
use crate::task::{Candidate, Query, RowRef, TaskModel};

/// File extension of graph descriptions; lower graphs are looked up as
/// `<dir>/<graph-id>.andor` next to the root file.
pub const GRAPH_EXT: &str = "andor";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HierError {
    #[error("{file}: {error}")]
    Parse { file: PathBuf, error: ParseError },
    #[error("{file}: {message}")]
    Io { file: PathBuf, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("graph `{0}` is not defined")]
    MissingGraph(String),
    #[error("transition {transition}: {message}")]
    MappingViolation { transition: String, message: String },
    #[error("graphs refine each other: {}", .0.join(" -> "))]
    CycleAcrossLayers(Vec<String>),
    #[error("graph `{graph}` is used at depths {first} and {second}")]
    DepthMismatch {
        graph: String,
        first: usize,
        second: usize,
    },
    #[error("hyper-arc `{0}` has no transition")]
    NoTransition(String),
}

/// A validated transition, in index form.
#[derive(Debug, Clone)]
struct Transition {
    lower: String,
    leaf_map: Vec<(NodeIx, Vec<NodeIx>)>,
    root_map: (NodeIx, NodeIx),
}

#[derive(Debug, Clone)]
struct Design {
    template: AndOrGraph,
    spec: GraphSpec,
    transitions: BTreeMap<ArcIx, Transition>,
    depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Waiting for the upper hyper-arc to become feasible.
    Dormant,
    Active,
    Solved,
    /// Failed, or made pointless because the upper hyper-arc was lost.
    Closed,
}

#[derive(Debug, Clone)]
pub struct Instance {
    /// Path of hyper-arc ids from the root, e.g. `table/fix_1`.
    pub id: String,
    pub design: String,
    pub graph: AndOrGraph,
    pub parent: Option<(usize, ArcIx)>,
    pub depth: usize,
    /// Constants fixed by the upper node states through the mappings.
    pub bindings: Substitution,
    pub phase: Phase,
    /// Optimistic weight given to the upper hyper-arc when spawned.
    pub initial_weight: f64,
    children: BTreeMap<ArcIx, usize>,
    /// Refined hyper-arcs whose lower instance is active.
    live: BTreeSet<ArcIx>,
    met: Vec<NodeIx>,
    solved: Vec<ArcIx>,
    forced: Vec<ArcIx>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierSuggestion {
    pub instance: usize,
    pub item: Item,
    pub id: String,
    pub cost: f64,
    /// Designed graph the item belongs to.
    pub graph: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HierStatus {
    Solved,
    Failed,
    Suggestions(Vec<HierSuggestion>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HierStats {
    pub graphs: usize,
    pub layers: usize,
    pub designed_nodes: usize,
    pub designed_arcs: usize,
    pub spawned_nodes: usize,
    pub spawned_arcs: usize,
}

#[derive(Debug, Clone)]
pub struct HierModel {
    root: String,
    designs: BTreeMap<String, Design>,
    instances: Vec<Instance>,
    touched: BTreeSet<usize>,
}

fn violation(t: &TransitionDecl, message: impl Into<String>) -> HierError {
    HierError::MappingViolation {
        transition: format!("{}.{}", t.graph, t.arc),
        message: message.into(),
    }
}

/// Reads the root file and every graph it refines, transitively.
pub fn load_designs(root_file: &Path) -> Result<(String, BTreeMap<String, ParsedGraph>), HierError> {
    let dir = root_file.parent().unwrap_or(Path::new("."));
    let read = |file: &Path| -> Result<ParsedGraph, HierError> {
        let text = fs::read_to_string(file).map_err(|e| HierError::Io {
            file: file.to_path_buf(),
            message: e.to_string(),
        })?;
        crate::graph::parse_graph(&text).map_err(|error| HierError::Parse {
            file: file.to_path_buf(),
            error,
        })
    };
    let root = read(root_file)?;
    let root_id = root.spec.id.clone();
    let mut out = BTreeMap::new();
    let mut queue = vec![root];
    while let Some(g) = queue.pop() {
        for t in &g.transitions {
            if !out.contains_key(&t.lower) && !queue.iter().any(|q| q.spec.id == t.lower) && t.lower != g.spec.id {
                let file = dir.join(format!("{}.{GRAPH_EXT}", t.lower));
                let lower = read(&file)?;
                if lower.spec.id != t.lower {
                    return Err(HierError::Parse {
                        file,
                        error: ParseError::new(1, format!("expected graph `{}`", t.lower)),
                    });
                }
                queue.push(lower);
            }
        }
        out.insert(g.spec.id.clone(), g);
    }
    Ok((root_id, out))
}

fn state_of(spec: &GraphSpec, ix: NodeIx) -> &State {
    &spec.nodes[ix.0].state
}

/// Depth of every design reachable from `root`, rejecting cycles and
/// designs reached at two different depths.
fn layer_depths(
    root: &str,
    graphs: &BTreeMap<String, ParsedGraph>,
) -> Result<BTreeMap<String, usize>, HierError> {
    fn visit(
        id: &str,
        depth: usize,
        graphs: &BTreeMap<String, ParsedGraph>,
        stack: &mut Vec<String>,
        depths: &mut BTreeMap<String, usize>,
    ) -> Result<(), HierError> {
        if let Some(at) = stack.iter().position(|s| s == id) {
            let mut cycle = stack[at..].to_vec();
            cycle.push(id.to_string());
            return Err(HierError::CycleAcrossLayers(cycle));
        }
        match depths.get(id) {
            Some(&d) if d != depth => {
                return Err(HierError::DepthMismatch {
                    graph: id.to_string(),
                    first: d,
                    second: depth,
                })
            }
            Some(_) => return Ok(()),
            None => {}
        }
        let g = graphs
            .get(id)
            .ok_or_else(|| HierError::MissingGraph(id.to_string()))?;
        stack.push(id.to_string());
        for t in &g.transitions {
            visit(&t.lower, depth + 1, graphs, stack, depths)?;
        }
        stack.pop();
        depths.insert(id.to_string(), depth);
        Ok(())
    }
    let mut depths = BTreeMap::new();
    visit(root, 0, graphs, &mut Vec::new(), &mut depths)?;
    Ok(depths)
}

fn check_transition(
    t: &TransitionDecl,
    upper: &AndOrGraph,
    upper_spec: &GraphSpec,
    lower: &AndOrGraph,
    lower_spec: &GraphSpec,
) -> Result<(ArcIx, Transition), HierError> {
    let h = upper
        .arc_ix(&t.arc)
        .map_err(|_| violation(t, format!("no hyper-arc `{}` in `{}`", t.arc, t.graph)))?;
    let arc = upper.arc(h);
    let mut leaf_map = Vec::new();
    let mut covered = BTreeSet::new();
    for (u, lows) in &t.leaf_map {
        let un = upper
            .node_ix(u)
            .map_err(|_| violation(t, format!("unknown upper node `{u}`")))?;
        if !arc.children.contains(&un) {
            return Err(violation(t, format!("`{u}` is not a child of `{}`", t.arc)));
        }
        if leaf_map.iter().any(|(x, _)| *x == un) {
            return Err(violation(t, format!("`{u}` is mapped twice")));
        }
        let mut ls = Vec::new();
        for l in lows {
            let ln = lower
                .node_ix(l)
                .map_err(|_| violation(t, format!("unknown lower node `{l}`")))?;
            if !lower.is_leaf(ln) {
                return Err(violation(t, format!("`{l}` is not a leaf of `{}`", t.lower)));
            }
            covered.insert(ln);
            ls.push(ln);
        }
        leaf_map.push((un, ls));
    }
    if let Some(c) = arc.children.iter().find(|c| !leaf_map.iter().any(|(u, _)| u == *c)) {
        return Err(violation(t, format!("child `{}` has no MAPLEAF", upper.node(*c).id)));
    }
    if let Some(l) = lower.leaves().find(|l| !covered.contains(l)) {
        return Err(violation(t, format!("lower leaf `{}` is not mapped", lower.node(l).id)));
    }
    let root_map = match t.root_map.as_slice() {
        [] => return Err(violation(t, "missing MAPROOT")),
        [(u, l)] => {
            let un = upper
                .node_ix(u)
                .map_err(|_| violation(t, format!("unknown upper node `{u}`")))?;
            let ln = lower
                .node_ix(l)
                .map_err(|_| violation(t, format!("unknown lower node `{l}`")))?;
            if un != arc.parent {
                return Err(violation(t, format!("`{u}` is not the parent of `{}`", t.arc)));
            }
            if ln != lower.root() {
                return Err(violation(t, format!("`{l}` is not the root of `{}`", t.lower)));
            }
            (un, ln)
        }
        _ => return Err(violation(t, "more than one MAPROOT")),
    };
    let pairs = leaf_map
        .iter()
        .map(|(u, ls)| (vec![*u], ls.clone()))
        .chain(std::iter::once((vec![root_map.0], vec![root_map.1])));
    for (us, ls) in pairs {
        let up: Vec<State> = us.iter().map(|u| state_of(upper_spec, *u).clone()).collect();
        let low: Vec<State> = ls.iter().map(|l| state_of(lower_spec, *l).clone()).collect();
        let mapping: Vec<Correspondence> = t
            .literal_map
            .iter()
            .filter(|(u, _)| up.iter().any(|s| s.contains(u)))
            .map(|(u, l)| Correspondence {
                upper: u.clone(),
                lower: l.clone(),
            })
            .collect();
        let names = |g: &AndOrGraph, xs: &[NodeIx]| {
            xs.iter().map(|x| g.node(*x).id.clone()).collect::<Vec<_>>().join(",")
        };
        match semantically_equivalent(&up, &low, &mapping) {
            Ok(true) => {}
            Ok(false) => {
                return Err(violation(
                    t,
                    format!(
                        "`{}` and `{}` are not equivalent",
                        names(upper, &us),
                        names(lower, &ls)
                    ),
                ))
            }
            Err(e) => return Err(violation(t, e.to_string())),
        }
    }
    Ok((
        h,
        Transition {
            lower: t.lower.clone(),
            leaf_map,
            root_map,
        },
    ))
}

/// Binds lower-state variables against grounded upper-state literals.
fn derive_bindings(upper: &[Literal], lower: &[Literal], mut sigma: Substitution) -> Substitution {
    for l in lower {
        for u in upper.iter().filter(|u| u.same_signature(l)) {
            if let Some(s) = unify_with(l, u, &sigma) {
                sigma = s;
                break;
            }
        }
    }
    sigma
}

impl HierModel {
    /// Loads the root file and its lower graphs from the same directory.
    pub fn load(root_file: &Path) -> Result<Self, HierError> {
        let (root, graphs) = load_designs(root_file)?;
        Self::from_designs(&root, &graphs)
    }

    /// Validates every design and transition and spawns one instance per
    /// use of each design.
    pub fn from_designs(root: &str, graphs: &BTreeMap<String, ParsedGraph>) -> Result<Self, HierError> {
        let depths = layer_depths(root, graphs)?;
        let mut designs: BTreeMap<String, Design> = BTreeMap::new();
        for (id, depth) in &depths {
            let g = &graphs[id];
            designs.insert(
                id.clone(),
                Design {
                    template: AndOrGraph::from_spec(&g.spec)?,
                    spec: g.spec.clone(),
                    transitions: BTreeMap::new(),
                    depth: *depth,
                },
            );
        }
        for id in depths.keys() {
            let g = &graphs[id];
            let mut transitions = BTreeMap::new();
            for t in &g.transitions {
                if t.graph != *id {
                    return Err(violation(t, format!("declared in graph `{id}`")));
                }
                let up = &designs[id];
                let low = &designs[&t.lower];
                let (h, tr) = check_transition(t, &up.template, &up.spec, &low.template, &low.spec)?;
                if transitions.insert(h, tr).is_some() {
                    return Err(violation(t, "hyper-arc has two transitions"));
                }
            }
            designs.get_mut(id).unwrap().transitions = transitions;
        }
        let mut model = HierModel {
            root: root.to_string(),
            designs,
            instances: Vec::new(),
            touched: BTreeSet::new(),
        };
        model.spawn(root, root.to_string(), None, Substitution::new());
        model.initial_weights();
        model.touched.insert(0);
        Ok(model)
    }

    fn spawn(&mut self, design: &str, id: String, parent: Option<(usize, ArcIx)>, bindings: Substitution) -> usize {
        let d = &self.designs[design];
        let mut graph = d.template.clone();
        if parent.is_some() {
            graph.suspend();
        }
        let depth = d.depth;
        let uses: Vec<(ArcIx, Transition)> = d.transitions.iter().map(|(h, t)| (*h, t.clone())).collect();
        let upper_spec = d.spec.clone();
        let me = self.instances.len();
        self.instances.push(Instance {
            id: id.clone(),
            design: design.to_string(),
            graph,
            parent,
            depth,
            bindings: bindings.clone(),
            phase: if parent.is_some() { Phase::Dormant } else { Phase::Active },
            initial_weight: 0.0,
            children: BTreeMap::new(),
            live: BTreeSet::new(),
            met: Vec::new(),
            solved: Vec::new(),
            forced: Vec::new(),
        });
        for (h, t) in uses {
            let lower_spec = &self.designs[&t.lower].spec;
            let mut sigma = Substitution::new();
            let pairs = t
                .leaf_map
                .iter()
                .flat_map(|(u, ls)| ls.iter().map(move |l| (*u, *l)))
                .chain(std::iter::once(t.root_map));
            for (u, l) in pairs {
                let up: Vec<Literal> = state_of(&upper_spec, u).apply(&bindings).literals().cloned().collect();
                let low: Vec<Literal> = state_of(lower_spec, l).literals().cloned().collect();
                sigma = derive_bindings(&up, &low, sigma);
            }
            let child_id = format!("{id}/{}", upper_spec.arcs[h.0].id);
            let c = self.spawn(&t.lower.clone(), child_id, Some((me, h)), sigma);
            self.instances[me].children.insert(h, c);
        }
        me
    }

    /// Bottom-up optimistic weights for every refined hyper-arc.
    fn initial_weights(&mut self) {
        let mut order: Vec<usize> = (0..self.instances.len()).collect();
        order.sort_by_key(|&i| Reverse(self.instances[i].depth));
        for i in order {
            let w = self.instances[i].graph.min_path_cost();
            self.instances[i].initial_weight = w;
            if let Some((p, h)) = self.instances[i].parent {
                if w.is_finite() {
                    self.instances[p].graph.set_arc_weight(h, w);
                }
            }
        }
    }

    pub fn root_id(&self) -> &str {
        &self.root
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn instance(&self, i: usize) -> &Instance {
        &self.instances[i]
    }

    pub fn instance_by_id(&self, id: &str) -> Option<usize> {
        self.instances.iter().position(|x| x.id == id)
    }

    /// Designed graph ids in depth order.
    pub fn graph_ids(&self) -> Vec<&str> {
        let mut ids: Vec<(&usize, &str)> = self
            .designs
            .iter()
            .map(|(k, d)| (&d.depth, k.as_str()))
            .collect();
        ids.sort();
        ids.into_iter().map(|(_, k)| k).collect()
    }

    pub fn design(&self, id: &str) -> Option<&GraphSpec> {
        self.designs.get(id).map(|d| &d.spec)
    }

    pub fn depth(&self, id: &str) -> Option<usize> {
        self.designs.get(id).map(|d| d.depth)
    }

    /// Target of the transition declared on `graph.arc`.
    pub fn lower_graph(&self, graph: &str, arc: &str) -> Option<&str> {
        let d = self.designs.get(graph)?;
        let h = d.template.arc_ix(arc).ok()?;
        d.transitions.get(&h).map(|t| t.lower.as_str())
    }

    /// Every `(graph, arc)` refined by `lower`, in graph id order.
    pub fn upper_hyperarcs(&self, lower: &str) -> Vec<(&str, &str)> {
        self.designs
            .iter()
            .flat_map(|(g, d)| {
                d.transitions
                    .iter()
                    .filter(|(_, t)| t.lower == lower)
                    .map(move |(h, _)| (g.as_str(), d.template.arc(*h).id.as_str()))
            })
            .collect()
    }

    /// First hyper-arc refined by `lower`; absent for the root graph.
    pub fn upper_hyperarc(&self, lower: &str) -> Option<(&str, &str)> {
        self.upper_hyperarcs(lower).into_iter().next()
    }

    pub fn stats(&self) -> HierStats {
        HierStats {
            graphs: self.designs.len(),
            layers: self.designs.values().map(|d| d.depth + 1).max().unwrap_or(0),
            designed_nodes: self.designs.values().map(|d| d.spec.nodes.len()).sum(),
            designed_arcs: self.designs.values().map(|d| d.spec.arcs.len()).sum(),
            spawned_nodes: self.instances.iter().map(|x| x.graph.nodes().len()).sum(),
            spawned_arcs: self.instances.iter().map(|x| x.graph.arcs().len()).sum(),
        }
    }

    fn child_of(&self, i: usize, h: ArcIx) -> Option<usize> {
        self.instances[i].children.get(&h).copied()
    }

    /// Current weight of a refined hyper-arc of instance `i`.
    pub fn hier_weight(&self, i: usize, arc: &str) -> Result<f64, HierError> {
        let g = &self.instances[i].graph;
        let h = g.arc_ix(arc)?;
        let c = self
            .child_of(i, h)
            .ok_or_else(|| HierError::NoTransition(arc.to_string()))?;
        let lower = &self.instances[c].graph;
        Ok(if lower.is_solved() { 0.0 } else { lower.min_path_cost() })
    }

    pub fn mark_met(&mut self, i: usize, n: NodeIx) {
        self.instances[i].met.push(n);
        self.touched.insert(i);
    }

    pub fn mark_solved(&mut self, i: usize, h: ArcIx) {
        self.instances[i].solved.push(h);
        self.touched.insert(i);
    }

    pub fn record_action_done(&mut self, i: usize, h: ArcIx, k: usize) {
        self.instances[i].graph.record_action_done(h, k);
    }

    pub fn block(&mut self, i: usize, item: Item) {
        self.instances[i].graph.block(item);
        self.touched.insert(i);
    }

    pub fn deactivate_process(&mut self, i: usize, n: NodeIx, p: &str) -> bool {
        self.instances[i].graph.deactivate_process(n, p)
    }

    /// Applies queued met/solved items layer by layer, deepest first, then
    /// refreshes path costs and optimistic weights of touched instances.
    pub fn online_phase(&mut self) -> HierStatus {
        let depth = |m: &Self, i: usize| (Reverse(m.instances[i].depth), i);
        let mut work: BTreeSet<(Reverse<usize>, usize)> =
            mem::take(&mut self.touched).into_iter().map(|i| depth(self, i)).collect();
        let mut dirty = BTreeSet::new();
        while let Some((_, i)) = work.pop_first() {
            dirty.insert(depth(self, i));
            let inst = &mut self.instances[i];
            let g = &mut inst.graph;
            for n in mem::take(&mut inst.met) {
                if g.mark_node_met(n) {
                    g.update_node_feasibility(n);
                }
            }
            for h in mem::take(&mut inst.forced) {
                if !g.arc(h).solved {
                    g.force_solve(h);
                    g.update_hyperarc_feasibility(h);
                }
            }
            for h in mem::take(&mut inst.solved) {
                if g.mark_hyperarc_solved(h) {
                    g.update_hyperarc_feasibility(h);
                }
            }
            // Only feasible or live refined arcs can change phase.
            let inst = &self.instances[i];
            let mut check: BTreeSet<ArcIx> = inst.live.clone();
            check.extend(inst.graph.feasible_arcs().iter().filter(|h| inst.children.contains_key(h)));
            for h in check {
                let c = self.instances[i].children[&h];
                let up = &self.instances[i].graph;
                let feasible = up.is_feasible(Item::Arc(h));
                let solved = up.arc(h).solved;
                let child = &mut self.instances[c];
                match child.phase {
                    Phase::Dormant if feasible => {
                        child.phase = Phase::Active;
                        child.graph.activate();
                        dirty.insert((Reverse(child.depth), c));
                        self.instances[i].live.insert(h);
                    }
                    Phase::Active if !feasible && !solved => {
                        child.phase = Phase::Closed;
                        child.graph.suspend();
                        self.instances[i].live.remove(&h);
                    }
                    _ => {}
                }
            }
            let inst = &mut self.instances[i];
            if let (Some((p, h)), Phase::Active) = (inst.parent, inst.phase) {
                if inst.graph.is_solved() {
                    inst.phase = Phase::Solved;
                    self.instances[p].forced.push(h);
                    self.instances[p].live.remove(&h);
                    work.insert(depth(self, p));
                } else if !inst.graph.has_feasible() {
                    inst.phase = Phase::Closed;
                    self.instances[p].graph.block(Item::Arc(h));
                    self.instances[p].live.remove(&h);
                    work.insert(depth(self, p));
                }
            }
        }
        while let Some((_, i)) = dirty.pop_first() {
            self.instances[i].graph.update_all_paths();
            let Some((p, h)) = self.instances[i].parent else { continue };
            if self.instances[i].phase == Phase::Closed {
                continue;
            }
            let w = self.instances[i].graph.min_path_cost();
            let upper = &mut self.instances[p].graph;
            if w.is_finite() && w != upper.arc(h).weight && !upper.arc(h).solved {
                upper.set_arc_weight(h, w);
                dirty.insert(depth(self, p));
            }
        }
        let root = &self.instances[0].graph;
        if root.is_solved() {
            return HierStatus::Solved;
        }
        if !root.has_feasible() {
            return HierStatus::Failed;
        }
        let mut out = self.suggest(0);
        out.sort_by(|a, b| a.cost.total_cmp(&b.cost).then_with(|| a.label.cmp(&b.label)));
        HierStatus::Suggestions(out)
    }

    /// Suggestions of instance `i`; refined hyper-arcs are replaced by the
    /// suggestions of their lower instance, with the cost of the upper path
    /// in place of the optimistic weight.
    fn suggest(&self, i: usize) -> Vec<HierSuggestion> {
        let inst = &self.instances[i];
        let mut out = Vec::new();
        for s in inst.graph.find_suggestions() {
            if let Item::Arc(h) = s.item {
                if let Some(c) = self.child_of(i, h) {
                    if self.instances[c].phase == Phase::Active {
                        let w = inst.graph.arc(h).weight;
                        out.extend(self.suggest(c).into_iter().map(|mut x| {
                            x.cost += s.cost - w;
                            x
                        }));
                    }
                    continue;
                }
            }
            out.push(HierSuggestion {
                instance: i,
                item: s.item,
                label: format!("{}::{}", inst.id, s.id),
                id: s.id,
                cost: s.cost,
                graph: inst.design.clone(),
            });
        }
        out
    }

    /// Both cross-layer biconditionals for every refined hyper-arc; returns
    /// a description of each violation.
    pub fn coherence_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (c, inst) in self.instances.iter().enumerate() {
            let Some((p, h)) = inst.parent else { continue };
            let up = &self.instances[p].graph;
            let label = format!("{} / {}", self.instances[p].id, up.arc(h).id);
            if inst.graph.has_feasible() != up.is_feasible(Item::Arc(h)) {
                out.push(format!(
                    "{label}: lower feasible {} but upper feasible {}",
                    inst.graph.has_feasible(),
                    up.is_feasible(Item::Arc(h))
                ));
            }
            if inst.graph.is_solved() != up.arc(h).solved {
                out.push(format!(
                    "{label}: lower solved {} but upper solved {} (instance {c})",
                    inst.graph.is_solved(),
                    up.arc(h).solved
                ));
            }
        }
        out
    }

    /// Id of an item in the graph produced by [`flatten`](Self::flatten).
    pub fn flat_id(&self, i: usize, item: Item) -> String {
        let inst = &self.instances[i];
        match (inst.parent, item) {
            (Some((p, h)), Item::Node(n)) => {
                let t = &self.designs[&self.instances[p].design].transitions[&h];
                if t.root_map.1 == n {
                    return self.flat_id(p, Item::Node(t.root_map.0));
                }
                if let Some((u, _)) = t.leaf_map.iter().find(|(_, ls)| ls.contains(&n)) {
                    return self.flat_id(p, Item::Node(*u));
                }
                format!("{}.{}", inst.id.replace('/', "."), inst.graph.item_id(item))
            }
            (None, _) => inst.graph.item_id(item).to_string(),
            (Some(_), Item::Arc(_)) => {
                format!("{}.{}", inst.id.replace('/', "."), inst.graph.item_id(item))
            }
        }
    }

    /// Single-layer graph equivalent to the hierarchy: every refined
    /// hyper-arc is replaced by the hyper-arcs of its lower instance, lower
    /// leaves and roots being identified with the upper nodes they map to.
    pub fn flatten(&self) -> GraphSpec {
        let mut g = GraphSpec::new(&format!("{}_flat", self.root));
        for (i, inst) in self.instances.iter().enumerate() {
            for (n, node) in inst.graph.nodes().iter().enumerate() {
                let id = self.flat_id(i, Item::Node(NodeIx(n)));
                if !g.nodes.iter().any(|x| x.id == id) {
                    let mut spec = NodeSpec::new(&id, node.weight, node.state.apply(&inst.bindings));
                    spec.processes = node.processes.iter().map(|p| p.name.clone()).collect();
                    g.nodes.push(spec);
                }
            }
            for (a, arc) in inst.graph.arcs().iter().enumerate() {
                if self.child_of(i, ArcIx(a)).is_some() {
                    continue;
                }
                let children: Vec<String> = arc
                    .children
                    .iter()
                    .map(|c| self.flat_id(i, Item::Node(*c)))
                    .collect();
                let children: Vec<&str> = children.iter().map(String::as_str).collect();
                let actions: Vec<&str> = arc.actions.iter().map(String::as_str).collect();
                let weight = self.designs[&inst.design].spec.arcs[a].weight;
                g.arcs.push(ArcSpec::new(
                    &self.flat_id(i, Item::Arc(ArcIx(a))),
                    weight,
                    &children,
                    &self.flat_id(i, Item::Node(arc.parent)),
                    &actions,
                ));
            }
        }
        g
    }
}

impl TaskModel for HierModel {
    fn describe(&self) -> String {
        self.root.clone()
    }

    fn query(&mut self) -> Query {
        match self.online_phase() {
            HierStatus::Solved => Query::Solved,
            HierStatus::Failed => Query::Failed,
            HierStatus::Suggestions(s) => Query::Suggestions(
                s.into_iter()
                    .map(|s| Candidate {
                        row: RowRef {
                            instance: s.instance,
                            item: s.item,
                        },
                        label: s.label,
                        graph: s.graph,
                        cost: s.cost,
                    })
                    .collect(),
            ),
        }
    }

    fn actions(&self, row: RowRef) -> &[String] {
        match row.item {
            Item::Arc(h) => &self.instances[row.instance].graph.arc(h).actions,
            Item::Node(_) => &[],
        }
    }

    fn active_processes(&self, row: RowRef) -> Vec<String> {
        match row.item {
            Item::Node(n) => crate::task::active(&self.instances[row.instance].graph, n),
            Item::Arc(_) => Vec::new(),
        }
    }

    fn deactivate(&mut self, row: RowRef, process: &str) -> bool {
        match row.item {
            Item::Node(n) => self.deactivate_process(row.instance, n, process),
            Item::Arc(_) => false,
        }
    }

    fn action_done(&mut self, row: RowRef, index: usize) {
        if let Item::Arc(h) = row.item {
            self.record_action_done(row.instance, h, index);
        }
    }

    fn complete(&mut self, row: RowRef) {
        match row.item {
            Item::Node(n) => self.mark_met(row.instance, n),
            Item::Arc(h) => self.mark_solved(row.instance, h),
        }
    }

    fn block(&mut self, row: RowRef) {
        HierModel::block(self, row.instance, row.item);
    }

    fn bindings(&self, row: RowRef) -> Substitution {
        self.instances[row.instance].bindings.clone()
    }
}
