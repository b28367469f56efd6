//! Line-oriented graph description files.
//!
//! ```text
//! GRAPH leg
//! NODE n_leg WEIGHT 0 STATE Leg(?y)
//! ARC hB WEIGHT 1 CHILDREN n_leg,n_tt PARENT n_conn ACTIONS approach,grasp
//! ```
//!
//! Hierarchical models add `TRANSITION`, `MAPLEAF`, `MAPROOT` and `MAPLIT`
//! lines; the mapping lines attach to the closest preceding `TRANSITION`.

use std::fmt::Write as _;

use thiserror::Error;

use super::spec::{ArcSpec, GraphSpec, NodeSpec};
use crate::fol::{format_literal_list, is_identifier, parse_literal_list, Literal};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            message: message.into(),
        }
    }
}

/// A declared layer transition; `line` is ignored by equality.
#[derive(Debug, Clone)]
pub struct TransitionDecl {
    pub line: usize,
    /// Graph id qualifying the hyper-arc (`<graph>.<arc>`).
    pub graph: String,
    pub arc: String,
    pub lower: String,
    pub leaf_map: Vec<(String, Vec<String>)>,
    pub root_map: Vec<(String, String)>,
    pub literal_map: Vec<(Literal, Vec<Literal>)>,
}

impl PartialEq for TransitionDecl {
    fn eq(&self, o: &Self) -> bool {
        self.graph == o.graph
            && self.arc == o.arc
            && self.lower == o.lower
            && self.leaf_map == o.leaf_map
            && self.root_map == o.root_map
            && self.literal_map == o.literal_map
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedGraph {
    pub spec: GraphSpec,
    pub transitions: Vec<TransitionDecl>,
}

fn list(s: &str) -> Vec<String> {
    if s == "-" {
        Vec::new()
    } else {
        s.split(',').map(|x| x.trim().to_string()).collect()
    }
}

fn ident(line: usize, s: &str, what: &str) -> Result<String, ParseError> {
    if is_identifier(s) {
        Ok(s.to_string())
    } else {
        Err(ParseError::new(line, format!("invalid {what} `{s}`")))
    }
}

fn weight(line: usize, s: &str) -> Result<f64, ParseError> {
    s.parse::<f64>()
        .ok()
        .filter(|w| w.is_finite())
        .ok_or_else(|| ParseError::new(line, format!("invalid weight `{s}`")))
}

fn ident_list(line: usize, s: &str, what: &str) -> Result<Vec<String>, ParseError> {
    list(s).into_iter().map(|x| ident(line, &x, what)).collect()
}

/// Reads keyword/value pairs after the leading `KIND <id>` tokens.
fn pairs<'a>(
    line: usize,
    tokens: &[&'a str],
    allowed: &[&str],
) -> Result<Vec<(&'a str, &'a str)>, ParseError> {
    if !tokens.len().is_multiple_of(2) {
        return Err(ParseError::new(line, "expected keyword/value pairs"));
    }
    let mut out: Vec<(&str, &str)> = Vec::new();
    for pair in tokens.chunks(2) {
        if !allowed.contains(&pair[0]) {
            return Err(ParseError::new(line, format!("unexpected keyword `{}`", pair[0])));
        }
        if out.iter().any(|(k, _)| *k == pair[0]) {
            return Err(ParseError::new(line, format!("repeated keyword `{}`", pair[0])));
        }
        out.push((pair[0], pair[1]));
    }
    Ok(out)
}

fn required<'a>(line: usize, pairs: &[(&str, &'a str)], key: &str) -> Result<&'a str, ParseError> {
    pairs
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| ParseError::new(line, format!("missing {key}")))
}

fn optional<'a>(pairs: &[(&str, &'a str)], key: &str) -> Option<&'a str> {
    pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

pub fn parse_graph(text: &str) -> Result<ParsedGraph, ParseError> {
    let mut spec: Option<GraphSpec> = None;
    let mut transitions: Vec<TransitionDecl> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let keyword = tokens[0];
        if keyword != "GRAPH" && spec.is_none() {
            return Err(ParseError::new(line, "expected GRAPH header first"));
        }
        match keyword {
            "GRAPH" => {
                if spec.is_some() {
                    return Err(ParseError::new(line, "second GRAPH header"));
                }
                if tokens.len() != 2 {
                    return Err(ParseError::new(line, "expected `GRAPH <id>`"));
                }
                spec = Some(GraphSpec::new(&ident(line, tokens[1], "graph id")?));
            }
            "NODE" => {
                let id = ident(line, tokens.get(1).copied().unwrap_or(""), "node id")?;
                let kv = pairs(line, &tokens[2..], &["WEIGHT", "STATE", "PROCESS"])?;
                let state = parse_literal_list(required(line, &kv, "STATE")?)
                    .map_err(|e| ParseError::new(line, e.to_string()))?
                    .into_iter()
                    .collect();
                let processes = match optional(&kv, "PROCESS") {
                    Some(p) => ident_list(line, p, "process name")?,
                    None => Vec::new(),
                };
                let g = spec.as_mut().unwrap();
                g.lines.insert(id.clone(), line);
                g.nodes.push(NodeSpec {
                    id,
                    weight: weight(line, required(line, &kv, "WEIGHT")?)?,
                    state,
                    processes,
                });
            }
            "ARC" => {
                let id = ident(line, tokens.get(1).copied().unwrap_or(""), "hyper-arc id")?;
                let kv = pairs(
                    line,
                    &tokens[2..],
                    &["WEIGHT", "CHILDREN", "PARENT", "ACTIONS"],
                )?;
                let arc = ArcSpec {
                    weight: weight(line, required(line, &kv, "WEIGHT")?)?,
                    children: ident_list(line, required(line, &kv, "CHILDREN")?, "node id")?,
                    parent: ident(line, required(line, &kv, "PARENT")?, "node id")?,
                    actions: ident_list(line, required(line, &kv, "ACTIONS")?, "action name")?,
                    id,
                };
                let g = spec.as_mut().unwrap();
                g.lines.insert(arc.id.clone(), line);
                g.arcs.push(arc);
            }
            "TRANSITION" => {
                if tokens.len() != 5 || tokens[1] != "ARC" || tokens[3] != "LOWER" {
                    return Err(ParseError::new(
                        line,
                        "expected `TRANSITION ARC <graph>.<arc> LOWER <graph-id>`",
                    ));
                }
                let (graph, arc) = tokens[2]
                    .split_once('.')
                    .ok_or_else(|| ParseError::new(line, "expected `<graph>.<arc>`"))?;
                transitions.push(TransitionDecl {
                    line,
                    graph: ident(line, graph, "graph id")?,
                    arc: ident(line, arc, "hyper-arc id")?,
                    lower: ident(line, tokens[4], "graph id")?,
                    leaf_map: Vec::new(),
                    root_map: Vec::new(),
                    literal_map: Vec::new(),
                });
            }
            "MAPLEAF" | "MAPROOT" | "MAPLIT" => {
                let t = transitions
                    .last_mut()
                    .ok_or_else(|| ParseError::new(line, format!("{keyword} before any TRANSITION")))?;
                let rest = content[keyword.len()..].trim();
                let (lhs, rhs) = rest
                    .split_once("->")
                    .ok_or_else(|| ParseError::new(line, "expected `<upper> -> <lower>`"))?;
                let (lhs, rhs) = (lhs.trim(), rhs.trim().replace(' ', ""));
                match keyword {
                    "MAPLEAF" => t.leaf_map.push((
                        ident(line, lhs, "node id")?,
                        ident_list(line, &rhs, "node id")?,
                    )),
                    "MAPROOT" => t.root_map.push((
                        ident(line, lhs, "node id")?,
                        ident(line, &rhs, "node id")?,
                    )),
                    _ => {
                        let upper: Literal = lhs
                            .parse()
                            .map_err(|e: crate::fol::FolError| ParseError::new(line, e.to_string()))?;
                        let lower = parse_literal_list(&rhs)
                            .map_err(|e| ParseError::new(line, e.to_string()))?;
                        t.literal_map.push((upper, lower));
                    }
                }
            }
            other => return Err(ParseError::new(line, format!("unknown directive `{other}`"))),
        }
    }
    let spec = spec.ok_or_else(|| ParseError::new(1, "missing GRAPH header"))?;
    Ok(ParsedGraph { spec, transitions })
}

fn fmt_weight(w: f64) -> String {
    format!("{w}")
}

fn fmt_list(items: &[String]) -> String {
    if items.is_empty() {
        "-".to_string()
    } else {
        items.join(",")
    }
}

pub fn write_graph(g: &ParsedGraph) -> String {
    let mut out = String::new();
    let spec = &g.spec;
    writeln!(out, "GRAPH {}", spec.id).unwrap();
    for n in &spec.nodes {
        write!(
            out,
            "NODE {} WEIGHT {} STATE {}",
            n.id,
            fmt_weight(n.weight),
            format_literal_list(n.state.literals())
        )
        .unwrap();
        if !n.processes.is_empty() {
            write!(out, " PROCESS {}", n.processes.join(",")).unwrap();
        }
        out.push('\n');
    }
    for a in &spec.arcs {
        writeln!(
            out,
            "ARC {} WEIGHT {} CHILDREN {} PARENT {} ACTIONS {}",
            a.id,
            fmt_weight(a.weight),
            fmt_list(&a.children),
            a.parent,
            fmt_list(&a.actions)
        )
        .unwrap();
    }
    for t in &g.transitions {
        writeln!(out, "TRANSITION ARC {}.{} LOWER {}", t.graph, t.arc, t.lower).unwrap();
        for (u, l) in &t.leaf_map {
            writeln!(out, "MAPLEAF {u} -> {}", l.join(",")).unwrap();
        }
        for (u, l) in &t.root_map {
            writeln!(out, "MAPROOT {u} -> {l}").unwrap();
        }
        for (u, l) in &t.literal_map {
            writeln!(out, "MAPLIT {u} -> {}", format_literal_list(l)).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# single leg
GRAPH leg
NODE n_leg WEIGHT 0 STATE Leg(?y)
NODE n_conn WEIGHT 0.5 STATE Connected(?y,?x) PROCESS hold,check
ARC hB WEIGHT 1 CHILDREN n_leg PARENT n_conn ACTIONS approach,screw   # trailing
TRANSITION ARC leg.hB LOWER other
MAPLEAF n_leg -> a,b
MAPROOT n_conn -> r
MAPLIT Leg(?y) -> Ready(?y),Here(?y)
";

    #[test]
    fn parses_and_round_trips() {
        let g = parse_graph(SAMPLE).unwrap();
        assert_eq!(g.spec.nodes.len(), 2);
        assert_eq!(g.spec.nodes[1].processes, vec!["hold", "check"]);
        assert_eq!(g.spec.arcs[0].actions, vec!["approach", "screw"]);
        assert_eq!(g.spec.lines["hB"], 5);
        assert_eq!(g.transitions[0].leaf_map[0].1, vec!["a", "b"]);
        assert_eq!(g.transitions[0].literal_map[0].1.len(), 2);
        let again = parse_graph(&write_graph(&g)).unwrap();
        assert_eq!(again, g);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_graph("GRAPH g\nNODE a WEIGHT x STATE A\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_graph("GRAPH g\n\nARC h WEIGHT 1 PARENT a ACTIONS -\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = parse_graph("NODE a WEIGHT 1 STATE A\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_graph("GRAPH g\nMAPLEAF a -> b\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_graph("GRAPH g\nNODE a WEIGHT 1 STATE Leg(\n").unwrap_err();
        assert_eq!(e.line, 2);
    }
}
