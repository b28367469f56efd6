#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

use hrc_core::fol::State;
use hrc_core::graph::{parse_graph, AndOrGraph, ArcSpec, GraphSpec, NodeSpec};
use hrc_core::task::{
    parse_actions, parse_trace, run_cooperation, ActionLibrary, FlatModel, RunOptions,
    TraceSource, Transcript,
};
use hrc_core::world::{parse_agents, parse_world, Agents, WorldState};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

pub fn read(rel: &str) -> String {
    fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub struct Leg1 {
    pub graph: AndOrGraph,
    pub lib: ActionLibrary,
    pub world: WorldState,
    pub agents: Agents,
}

pub fn leg1() -> Leg1 {
    let parsed = parse_graph(&read("leg1/leg.andor")).unwrap();
    Leg1 {
        graph: AndOrGraph::from_spec(&parsed.spec).unwrap(),
        lib: parse_actions(&read("leg1/actions.txt")).unwrap(),
        world: parse_world(&read("leg1/world.txt")).unwrap(),
        agents: parse_agents(&read("leg1/agents.txt")).unwrap(),
    }
}

pub fn replay_leg1(trace: &str) -> (Transcript, WorldState) {
    let mut f = leg1();
    let mut model = FlatModel::new(f.graph);
    let mut source = TraceSource::new(parse_trace(&read(trace)).unwrap());
    let t = run_cooperation(
        &mut model,
        &f.lib,
        &f.agents,
        &mut f.world,
        &mut source,
        &RunOptions::default(),
    )
    .unwrap();
    (t, f.world)
}

/// A random acyclic graph with a single root `n0`: arcs only point from
/// higher-numbered children to lower-numbered parents.
pub fn random_graph(rng: &mut impl rand::Rng, max_nodes: usize, max_arcs: usize) -> GraphSpec {
    loop {
        let n = rng.gen_range(2..=max_nodes);
        let m = rng.gen_range(1..=max_arcs);
        let mut arcs: Vec<(usize, Vec<usize>)> = Vec::new();
        for k in 0..m {
            let p = if k == 0 { 0 } else { rng.gen_range(0..n - 1) };
            let mut children: Vec<usize> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(p + 1..n)).collect();
            children.sort_unstable();
            children.dedup();
            arcs.push((p, children));
        }
        for v in 1..n {
            if arcs.iter().any(|(_, c)| c.contains(&v)) {
                continue;
            }
            let hosts: Vec<usize> = (0..arcs.len()).filter(|&j| arcs[j].0 < v).collect();
            let j = hosts[rng.gen_range(0..hosts.len())];
            arcs[j].1.push(v);
        }
        let mut g = GraphSpec::new("random");
        for v in 0..n {
            g.nodes.push(NodeSpec::new(&format!("n{v}"), f64::from(rng.gen_range(0..10u8)), State::new()));
        }
        for (j, (p, c)) in arcs.iter().enumerate() {
            let children: Vec<String> = c.iter().map(|v| format!("n{v}")).collect();
            let children: Vec<&str> = children.iter().map(String::as_str).collect();
            g.arcs.push(ArcSpec::new(&format!("h{j}"), f64::from(rng.gen_range(0..10u8)), &children, &format!("n{p}"), &[]));
        }
        if g.validate().is_empty() {
            return g;
        }
    }
}

/// Cooperation paths by exhaustive search over arc subsets: a subset is a
/// path when the root and every child it reaches is produced by exactly
/// one chosen arc, leaves by none, and every chosen arc's parent is
/// reached. Returns (nodes, arcs) index sets.
pub fn brute_force_paths(g: &GraphSpec) -> Vec<(BTreeSet<usize>, BTreeSet<usize>)> {
    let node = |id: &str| g.nodes.iter().position(|n| n.id == id).unwrap();
    let root = node(g.roots()[0]);
    let parents: Vec<usize> = g.arcs.iter().map(|a| node(&a.parent)).collect();
    let children: Vec<Vec<usize>> = g.arcs.iter().map(|a| a.children.iter().map(|c| node(c)).collect()).collect();
    let has_arcs: Vec<bool> = (0..g.nodes.len()).map(|v| parents.contains(&v)).collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << g.arcs.len()) {
        let arcs: BTreeSet<usize> = (0..g.arcs.len()).filter(|j| mask & (1 << j) != 0).collect();
        let mut nodes: BTreeSet<usize> = arcs.iter().flat_map(|&j| children[j].iter().copied()).collect();
        nodes.insert(root);
        let producers = |v: usize| arcs.iter().filter(|&&j| parents[j] == v).count();
        let ok = nodes.iter().all(|&v| producers(v) == usize::from(has_arcs[v]))
            && arcs.iter().all(|&j| nodes.contains(&parents[j]));
        if ok {
            out.push((nodes, arcs));
        }
    }
    out
}
