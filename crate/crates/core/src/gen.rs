//! Model generators: the N-leg table in three encodings and a synthetic
//! kitchen-scale hierarchy.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::fol::{parse_literal_list, Literal, State};
use crate::graph::{write_graph, ArcSpec, GraphSpec, NodeSpec, ParsedGraph, TransitionDecl};
use crate::bundle::MANIFEST;
use crate::hier::GRAPH_EXT;

pub const MAX_LEGS: usize = 9;
/// The standard encoding enumerates every placement order; beyond five
/// legs its path set no longer fits in memory.
pub const MAX_STANDARD_LEGS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Encoding {
    /// Legs as distinct constants, one node per subset of connected legs.
    Standard,
    /// One layer, legs described by `Leg(?y)` predicates.
    Fol,
    /// Two layers: the table plus one leg subgraph per leg.
    Hierarchical,
}

impl Encoding {
    pub const ALL: [Encoding; 3] = [Encoding::Standard, Encoding::Fol, Encoding::Hierarchical];

    pub fn max_legs(self) -> usize {
        match self {
            Encoding::Standard => MAX_STANDARD_LEGS,
            _ => MAX_LEGS,
        }
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Encoding::Standard => "standard",
            Encoding::Fol => "fol",
            Encoding::Hierarchical => "hierarchical",
        })
    }
}

impl FromStr for Encoding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Encoding::Standard),
            "fol" => Ok(Encoding::Fol),
            "hierarchical" | "hier" => Ok(Encoding::Hierarchical),
            _ => Err(format!("unknown encoding `{s}` (standard, fol, hierarchical)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("{encoding} encoding supports 1 to {max} legs, got {legs}")]
    Legs {
        encoding: Encoding,
        legs: usize,
        max: usize,
    },
}

/// A generated model: graph descriptions keyed by id, plus the root id.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFiles {
    pub root: String,
    pub graphs: BTreeMap<String, ParsedGraph>,
}

impl ModelFiles {
    fn single(spec: GraphSpec) -> Self {
        ModelFiles {
            root: spec.id.clone(),
            graphs: BTreeMap::from([(
                spec.id.clone(),
                ParsedGraph {
                    spec,
                    transitions: Vec::new(),
                },
            )]),
        }
    }

    pub fn designed_counts(&self) -> (usize, usize) {
        self.graphs.values().fold((0, 0), |(n, a), g| {
            (n + g.spec.nodes.len(), a + g.spec.arcs.len())
        })
    }

    pub fn is_hierarchical(&self) -> bool {
        self.graphs.values().any(|g| !g.transitions.is_empty())
    }

    /// Writes one `<id>.andor` file per graph and returns the root file.
    pub fn write(&self, dir: &Path) -> io::Result<std::path::PathBuf> {
        fs::create_dir_all(dir)?;
        for (id, g) in &self.graphs {
            fs::write(dir.join(format!("{id}.{GRAPH_EXT}")), write_graph(g))?;
        }
        Ok(dir.join(format!("{}.{GRAPH_EXT}", self.root)))
    }
}

fn st(s: &str) -> State {
    parse_literal_list(s)
        .expect("generator literals are well formed")
        .into_iter()
        .collect()
}

fn lit(s: &str) -> Literal {
    s.parse().expect("generator literals are well formed")
}

fn node(id: &str, state: &str) -> NodeSpec {
    NodeSpec::new(id, 0.0, st(state))
}

/// The leg-connection graph: the robot alone (`hB`), the human alone
/// (`hR`), or a handover at a midpoint (`h1` then `h2` or `h3`).
pub fn leg_graph() -> GraphSpec {
    let mut g = GraphSpec::new("leg");
    g.nodes = vec![
        node("n_leg", "Leg(?y)"),
        node("n_tt", "Tabletop(?x)"),
        node("n_mid", "AtPose(?y,MP)"),
        node("n_conn", "Connected(?y,?x)"),
    ];
    add_leg_arcs(&mut g, "", "n_leg", "n_tt", "n_mid", "n_conn");
    g
}

const ROBOT_ALONE: [&str; 4] = ["approach", "grasp", "transport_tt", "screw"];
const HUMAN_ALONE: [&str; 2] = ["pickup", "screw_h"];
const HANDOVER: [&str; 4] = ["approach", "grasp", "transport_mp", "ungrasp"];
const ROBOT_FROM_MID: [&str; 3] = ["grasp", "transport_tt", "screw"];

fn add_leg_arcs(g: &mut GraphSpec, suffix: &str, leg: &str, top: &str, mid: &str, conn: &str) {
    let id = |base: &str| format!("{base}{suffix}");
    g.arcs.extend([
        ArcSpec::new(&id("hB"), 1.0, &[leg, top], conn, &ROBOT_ALONE),
        ArcSpec::new(&id("hR"), 2.0, &[leg, top], conn, &HUMAN_ALONE),
        ArcSpec::new(&id("h1"), 1.0, &[leg], mid, &HANDOVER),
        ArcSpec::new(&id("h2"), 1.0, &[mid, top], conn, &ROBOT_FROM_MID),
        ArcSpec::new(&id("h3"), 2.0, &[mid, top], conn, &HUMAN_ALONE),
    ]);
}

fn check_legs(legs: usize, encoding: Encoding) -> Result<(), GenError> {
    if legs == 0 || legs > encoding.max_legs() {
        return Err(GenError::Legs {
            encoding,
            legs,
            max: encoding.max_legs(),
        });
    }
    Ok(())
}

pub fn table_model(legs: usize, encoding: Encoding) -> Result<ModelFiles, GenError> {
    check_legs(legs, encoding)?;
    Ok(match encoding {
        Encoding::Standard => ModelFiles::single(standard_table(legs)),
        Encoding::Fol => ModelFiles::single(fol_table(legs)),
        Encoding::Hierarchical => hierarchical_table(legs),
    })
}

fn frame(g: &mut GraphSpec, first: &str, last: &str, parts: &str, done: &str) {
    g.nodes.push(node("n_parts", parts));
    g.nodes.push(node("n_done", done));
    g.arcs.push(ArcSpec::new("place_top", 1.0, &["n_parts"], first, &["place_top"]));
    g.arcs.push(ArcSpec::new("finish", 0.0, &[last], "n_done", &[]));
}

/// Nodes for every subset of connected legs and every (subset, next leg)
/// handover point. Leg `i` is the `i`-th character of the subset id.
fn standard_table(legs: usize) -> GraphSpec {
    let mut g = GraphSpec::new("table_std");
    let bits = |s: usize| -> String {
        (0..legs)
            .map(|i| if s & (1 << i) != 0 { '1' } else { '0' })
            .collect()
    };
    for s in 0..(1usize << legs) {
        let mut state = vec!["Tabletop(T)".to_string()];
        state.extend(
            (0..legs)
                .filter(|i| s & (1 << i) != 0)
                .map(|i| format!("Connected(L{},T)", i + 1)),
        );
        g.nodes.push(node(&format!("s_{}", bits(s)), &state.join(",")));
    }
    for i in 0..legs {
        g.nodes.push(node(&format!("n_leg_{}", i + 1), &format!("Leg(L{})", i + 1)));
    }
    for s in 0..(1usize << legs) {
        for i in (0..legs).filter(|i| s & (1 << i) == 0) {
            let mid = format!("m_{}_{}", bits(s), i + 1);
            g.nodes.push(node(&mid, &format!("AtPose(L{},MP)", i + 1)));
            let from = format!("s_{}", bits(s));
            let to = format!("s_{}", bits(s | (1 << i)));
            let leg = format!("n_leg_{}", i + 1);
            add_leg_arcs(&mut g, &format!("_{}_{}", bits(s), i + 1), &leg, &from, &mid, &to);
        }
    }
    let full = format!("s_{}", bits((1 << legs) - 1));
    frame(&mut g, &format!("s_{}", bits(0)), &full, "Parts(T)", "Assembled(T)");
    g
}

/// Legs connected one after the other; every step offers the four ways of
/// the leg graph.
fn fol_table(legs: usize) -> GraphSpec {
    let mut g = GraphSpec::new("table_fol");
    g.nodes.push(node("s_0", "Tabletop(?x)"));
    for i in 1..=legs {
        g.nodes.push(node(&format!("s_{i}"), "Connected(?y,?x)"));
        g.nodes.push(node(&format!("n_leg_{i}"), "Leg(?y)"));
        g.nodes.push(node(&format!("n_mid_{i}"), "AtPose(?y,MP)"));
    }
    for i in 1..=legs {
        add_leg_arcs(
            &mut g,
            &format!("_{i}"),
            &format!("n_leg_{i}"),
            &format!("s_{}", i - 1),
            &format!("n_mid_{i}"),
            &format!("s_{i}"),
        );
    }
    frame(&mut g, "s_0", &format!("s_{legs}"), "Parts(?x)", "Assembled(?x)");
    g
}

/// The upper graph chains one `fix_i` hyper-arc per leg, each refined by
/// its own instance of the leg graph.
fn hierarchical_table(legs: usize) -> ModelFiles {
    let mut g = GraphSpec::new("table");
    g.nodes.push(node("n_top", "Tabletop(T)"));
    for i in 1..=legs {
        g.nodes.push(node(&format!("n_leg_{i}"), &format!("Leg(L{i})")));
        g.nodes.push(node(&format!("n_fixed_{i}"), &format!("Connected(L{i},T)")));
    }
    let step = |i: usize| {
        if i == 0 {
            "n_top".to_string()
        } else {
            format!("n_fixed_{i}")
        }
    };
    let mut transitions = Vec::new();
    for i in 1..=legs {
        let arc = format!("fix_{i}");
        let leg = format!("n_leg_{i}");
        g.arcs.push(ArcSpec::new(&arc, 1.0, &[&step(i - 1), &leg], &step(i), &[]));
        let mut literal_map = Vec::new();
        if i > 1 {
            literal_map.push((lit(&format!("Connected(L{},T)", i - 1)), vec![lit("Tabletop(?x)")]));
        }
        transitions.push(TransitionDecl {
            line: 0,
            graph: "table".into(),
            arc,
            lower: "leg".into(),
            leaf_map: vec![
                (step(i - 1), vec!["n_tt".into()]),
                (leg, vec!["n_leg".into()]),
            ],
            root_map: vec![(step(i), "n_conn".into())],
            literal_map,
        });
    }
    frame(&mut g, "n_top", &step(legs), "Parts(T)", "Assembled(T)");
    ModelFiles {
        root: "table".into(),
        graphs: BTreeMap::from([
            ("table".into(), ParsedGraph { spec: g, transitions }),
            (
                "leg".into(),
                ParsedGraph {
                    spec: leg_graph(),
                    transitions: Vec::new(),
                },
            ),
        ]),
    }
}

pub const TABLE_ACTIONS: &str = "\
ACTION place_top PARAMS ?x AGENTS any(R1,R2,H) PRE Tabletop(?x) ADD Placed(?x)
ACTION approach PARAMS ?y,?x AGENTS any(R1,R2) PRE Leg(?y),Tabletop(?x),!Connected(?y,?x),!AtTable(?y,?x)
ACTION grasp PARAMS ?y AGENTS any(R1,R2) PRE Leg(?y) ADD Held(?y)
ACTION transport_tt PARAMS ?y,?x AGENTS any(R1,R2) PRE Held(?y),Tabletop(?x) ADD AtTable(?y,?x)
ACTION transport_mp PARAMS ?y AGENTS any(R1,R2) PRE Held(?y) ADD AtPose(?y,MP)
ACTION ungrasp PARAMS ?y AGENTS any(R1,R2) PRE Held(?y) DEL Held(?y)
ACTION screw PARAMS ?y,?x AGENTS any(R1,R2) PRE AtTable(?y,?x) ADD Connected(?y,?x) DEL Held(?y)
ACTION pickup PARAMS ?y,?x AGENTS only(H) PRE Leg(?y),Tabletop(?x),!Connected(?y,?x) ADD AtTable(?y,?x)
ACTION screw_h PARAMS ?y,?x AGENTS only(H) PRE AtTable(?y,?x) ADD Connected(?y,?x)
";

pub const TABLE_AGENTS: &str = "\
AGENT R1 KIND robot TIMEOUT 30
DUR place_top 1.0
DUR approach 0.8 PERM 0.4
DUR grasp 0.5
DUR transport_tt 1.0 PERM 1.0
DUR transport_mp 0.8
DUR ungrasp 0.3
DUR screw 2.0
AGENT R2 KIND robot TIMEOUT 30
DUR place_top 1.5
DUR approach 1.2 PERM 0.6
DUR grasp 0.7
DUR transport_tt 1.5 PERM 1.5
DUR transport_mp 1.2
DUR ungrasp 0.4
DUR screw 3.0
AGENT H KIND human TIMEOUT 60
DUR place_top 2.0
DUR pickup 1.5 PERM 1.0
DUR screw_h 4.0
";

/// Tabletop `T` at the origin and legs `L1..Ln` on a circle around it.
pub fn table_world(legs: usize) -> String {
    let mut out = String::from("OBJ T TYPE Tabletop POSE 0 0 0\n");
    for i in 1..=legs {
        let a = std::f64::consts::TAU * (i - 1) as f64 / legs as f64;
        out.push_str(&format!(
            "OBJ L{i} TYPE Leg POSE {:.3} {:.3} 0\n",
            0.5 * a.cos(),
            0.5 * a.sin()
        ));
    }
    out
}

fn manifest(root: &str) -> String {
    format!(
        "root = \"{root}.{GRAPH_EXT}\"\nactions = \"actions.txt\"\nworld = \"world.txt\"\nagents = \"agents.txt\"\n"
    )
}

/// Writes a runnable bundle: graphs, actions, world, agents and manifest.
pub fn write_table_bundle(dir: &Path, legs: usize, encoding: Encoding) -> io::Result<()> {
    let model = table_model(legs, encoding).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    model.write(dir)?;
    fs::write(dir.join("actions.txt"), TABLE_ACTIONS)?;
    fs::write(dir.join("agents.txt"), TABLE_AGENTS)?;
    fs::write(dir.join("world.txt"), table_world(legs))?;
    fs::write(dir.join(MANIFEST), manifest(&model.root))
}

/// Shape of one synthetic kitchen graph.
struct Part {
    id: &'static str,
    nodes: usize,
    arcs: usize,
    /// Lower graphs refining the first hyper-arcs, in order.
    lower: &'static [&'static str],
}

const KITCHEN: &[Part] = &[
    Part { id: "kitchen", nodes: 9, arcs: 5, lower: &["wall_cabinet", "wall_cabinet", "base_cabinet", "countertop", "appliance_bay"] },
    Part { id: "wall_cabinet", nodes: 41, arcs: 14, lower: &["cabinet_door", "cabinet_door"] },
    Part { id: "cabinet_door", nodes: 43, arcs: 19, lower: &["door_hinge", "door_hinge"] },
    Part { id: "door_hinge", nodes: 30, arcs: 11, lower: &["hinge_screw", "hinge_screw"] },
    Part { id: "hinge_screw", nodes: 12, arcs: 8, lower: &[] },
    Part { id: "base_cabinet", nodes: 14, arcs: 6, lower: &["drawer_unit", "sink_unit", "plinth"] },
    Part { id: "countertop", nodes: 13, arcs: 5, lower: &["worktop", "backsplash", "edge_trim"] },
    Part { id: "appliance_bay", nodes: 15, arcs: 7, lower: &["oven_housing", "fridge_housing"] },
    Part { id: "drawer_unit", nodes: 12, arcs: 4, lower: &["drawer_box", "drawer_front"] },
    Part { id: "sink_unit", nodes: 16, arcs: 8, lower: &["sink_frame", "tap_mount"] },
    Part { id: "plinth", nodes: 13, arcs: 5, lower: &[] },
    Part { id: "worktop", nodes: 14, arcs: 6, lower: &["worktop_joint", "worktop_brace"] },
    Part { id: "backsplash", nodes: 12, arcs: 5, lower: &["tile_row"] },
    Part { id: "edge_trim", nodes: 15, arcs: 6, lower: &[] },
    Part { id: "oven_housing", nodes: 14, arcs: 6, lower: &["oven_rail"] },
    Part { id: "fridge_housing", nodes: 13, arcs: 5, lower: &[] },
    Part { id: "drawer_box", nodes: 16, arcs: 7, lower: &["drawer_slide"] },
    Part { id: "drawer_front", nodes: 12, arcs: 4, lower: &["front_handle"] },
    Part { id: "sink_frame", nodes: 14, arcs: 6, lower: &["frame_bracket"] },
    Part { id: "tap_mount", nodes: 15, arcs: 7, lower: &["tap_fitting"] },
    Part { id: "worktop_joint", nodes: 13, arcs: 5, lower: &["joint_clamp"] },
    Part { id: "worktop_brace", nodes: 14, arcs: 6, lower: &["brace_plate"] },
    Part { id: "tile_row", nodes: 12, arcs: 4, lower: &["tile_spacer"] },
    Part { id: "oven_rail", nodes: 16, arcs: 7, lower: &["rail_stop"] },
    Part { id: "drawer_slide", nodes: 13, arcs: 5, lower: &[] },
    Part { id: "front_handle", nodes: 15, arcs: 6, lower: &[] },
    Part { id: "frame_bracket", nodes: 14, arcs: 6, lower: &[] },
    Part { id: "tap_fitting", nodes: 12, arcs: 4, lower: &[] },
    Part { id: "joint_clamp", nodes: 13, arcs: 5, lower: &[] },
    Part { id: "brace_plate", nodes: 14, arcs: 6, lower: &[] },
    Part { id: "tile_spacer", nodes: 15, arcs: 6, lower: &[] },
    Part { id: "rail_stop", nodes: 14, arcs: 11, lower: &[] },
];

/// A chain of `c` assembly steps over `nodes - c` part leaves. Step `j`
/// joins the result of step `j - 1` with its share of the leaves; arcs
/// beyond `c` are alternatives for the last step.
fn chain_graph(p: &Part) -> GraphSpec {
    let c = p.arcs.min(p.nodes - 1);
    let leaves = p.nodes - c;
    let mut g = GraphSpec::new(p.id);
    let leaf = |k: usize| format!("{}_part{}", p.id, k + 1);
    let step = |j: usize| format!("{}_step{}", p.id, j + 1);
    for k in 0..leaves {
        g.nodes.push(node(&leaf(k), &format!("Ready({})", leaf(k))));
    }
    for j in 0..c {
        g.nodes.push(node(&step(j), &format!("Ready({})", step(j))));
    }
    let mut share: Vec<Vec<String>> = vec![Vec::new(); c];
    for k in 0..leaves {
        share[k % c].push(leaf(k));
    }
    for j in 0..c {
        let mut children: Vec<String> = share[j].clone();
        if j > 0 {
            children.insert(0, step(j - 1));
        }
        let refined = j < p.lower.len();
        let children: Vec<&str> = children.iter().map(String::as_str).collect();
        let actions: &[&str] = if refined { &[] } else { &["assemble"] };
        g.arcs.push(ArcSpec::new(&format!("h{}", j + 1), 1.0 + (j % 3) as f64, &children, &step(j), actions));
    }
    for e in 0..p.arcs - c {
        let last = &g.arcs[c - 1];
        let children: Vec<&str> = last.children.iter().map(String::as_str).collect();
        let alt = ArcSpec::new(&format!("h{}", c + e + 1), 2.0 + e as f64, &children, &step(c - 1), &["assemble"]);
        g.arcs.push(alt);
    }
    g
}

/// Leaf and root mappings of `upper.arc` onto `lower`: the arc's children
/// take the lower leaves in order, the last child taking the remainder.
fn chain_transition(upper: &GraphSpec, arc: &ArcSpec, lower: &GraphSpec) -> TransitionDecl {
    let lower_leaves = lower.leaves();
    let m = arc.children.len();
    let mut leaf_map: Vec<(String, Vec<String>)> =
        arc.children.iter().map(|c| (c.clone(), Vec::new())).collect();
    for (k, l) in lower_leaves.iter().enumerate() {
        leaf_map[k.min(m - 1)].1.push(l.to_string());
    }
    let lower_root = lower.roots()[0].to_string();
    let ready = |id: &str| lit(&format!("Ready({id})"));
    let mut literal_map: Vec<(Literal, Vec<Literal>)> = leaf_map
        .iter()
        .map(|(u, ls)| (ready(u), ls.iter().map(|l| ready(l)).collect()))
        .collect();
    literal_map.push((ready(&arc.parent), vec![ready(&lower_root)]));
    TransitionDecl {
        line: 0,
        graph: upper.id.clone(),
        arc: arc.id.clone(),
        lower: lower.id.clone(),
        leaf_map,
        root_map: vec![(arc.parent.clone(), lower_root)],
        literal_map,
    }
}

/// Five layers of cabinets, doors, hinges and fittings. The two wall
/// cabinets share one design, as do the doors of a cabinet, the hinges of a
/// door and the screws of a hinge.
pub fn kitchen_model() -> ModelFiles {
    let specs: BTreeMap<&str, GraphSpec> = KITCHEN.iter().map(|p| (p.id, chain_graph(p))).collect();
    let mut graphs = BTreeMap::new();
    for p in KITCHEN {
        let upper = &specs[p.id];
        let transitions = p
            .lower
            .iter()
            .zip(&upper.arcs)
            .map(|(lower, arc)| chain_transition(upper, arc, &specs[lower]))
            .collect();
        graphs.insert(
            p.id.to_string(),
            ParsedGraph {
                spec: upper.clone(),
                transitions,
            },
        );
    }
    ModelFiles {
        root: "kitchen".into(),
        graphs,
    }
}

pub const KITCHEN_ACTIONS: &str = "ACTION assemble PARAMS - AGENTS any(R1,H)\n";

pub const KITCHEN_AGENTS: &str = "\
AGENT R1 KIND robot TIMEOUT 30
DUR assemble 2.0
AGENT H KIND human TIMEOUT 60
DUR assemble 3.0
";

/// Writes the kitchen hierarchy as a runnable bundle.
pub fn write_kitchen_bundle(dir: &Path) -> io::Result<()> {
    let model = kitchen_model();
    model.write(dir)?;
    fs::write(dir.join("actions.txt"), KITCHEN_ACTIONS)?;
    fs::write(dir.join("agents.txt"), KITCHEN_AGENTS)?;
    fs::write(dir.join("world.txt"), "")?;
    fs::write(dir.join(MANIFEST), manifest(&model.root))
}
