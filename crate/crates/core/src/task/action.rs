//! STRIPS-style action definitions and the action library file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::fol::{format_literal_list, is_identifier, parse_literal_list, State, Substitution};
use crate::graph::ParseError;
use crate::world::GroundAction;

/// Who may execute an action.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgentSpec {
    /// Exactly one agent out of the set, chosen per branch.
    Any(Vec<String>),
    Only(String),
    /// All listed agents together.
    Joint(Vec<String>),
}

impl AgentSpec {
    pub fn agents(&self) -> Vec<&str> {
        match self {
            AgentSpec::Any(v) | AgentSpec::Joint(v) => v.iter().map(String::as_str).collect(),
            AgentSpec::Only(a) => vec![a.as_str()],
        }
    }

    pub fn permits(&self, agent: &str) -> bool {
        self.agents().contains(&agent)
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentSpec::Any(v) => write!(f, "any({})", v.join(",")),
            AgentSpec::Only(a) => write!(f, "only({a})"),
            AgentSpec::Joint(v) => write!(f, "joint({})", v.join(",")),
        }
    }
}

impl std::str::FromStr for AgentSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s
            .split_once('(')
            .ok_or_else(|| format!("malformed agent spec `{s}`"))?;
        let inner = rest
            .strip_suffix(')')
            .ok_or_else(|| format!("malformed agent spec `{s}`"))?;
        let names: Vec<String> = inner.split(',').map(|x| x.trim().to_string()).collect();
        if names.iter().any(|n| !is_identifier(n)) {
            return Err(format!("malformed agent spec `{s}`"));
        }
        match (kind, names.len()) {
            ("any", _) => Ok(AgentSpec::Any(names)),
            ("joint", _) => Ok(AgentSpec::Joint(names)),
            ("only", 1) => Ok(AgentSpec::Only(names.into_iter().next().unwrap())),
            _ => Err(format!("malformed agent spec `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpec {
    pub name: String,
    pub params: Vec<String>,
    pub agents: AgentSpec,
    pub pre: State,
    pub add: State,
    pub del: State,
}

impl ActionSpec {
    /// Checks parameter coverage and that no literal is both added and
    /// deleted.
    pub fn check(&self) -> Result<(), String> {
        let params: BTreeSet<&str> = self.params.iter().map(String::as_str).collect();
        for s in [&self.pre, &self.add, &self.del] {
            for v in s.variables() {
                if !params.contains(v.as_str()) {
                    return Err(format!("variable `?{v}` of `{}` is not a parameter", self.name));
                }
            }
        }
        if let Some(l) = self.add.literals().find(|l| self.del.contains(l)) {
            return Err(format!("`{}` both adds and deletes `{l}`", self.name));
        }
        Ok(())
    }

    /// Binds the parameters; `None` when some parameter is unbound.
    pub fn ground(&self, sigma: &Substitution) -> Option<GroundAction> {
        let args = self
            .params
            .iter()
            .map(|p| sigma.get(p).map(str::to_string))
            .collect::<Option<Vec<_>>>()?;
        Some(GroundAction {
            name: self.name.clone(),
            args,
            pre: self.pre.apply(sigma),
            add: self.add.apply(sigma),
            del: self.del.apply(sigma),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActionLibrary {
    actions: BTreeMap<String, ActionSpec>,
}

impl ActionLibrary {
    pub fn new() -> Self {
        ActionLibrary::default()
    }

    pub fn insert(&mut self, a: ActionSpec) {
        self.actions.insert(a.name.clone(), a);
    }

    pub fn get(&self, name: &str) -> Option<&ActionSpec> {
        self.actions.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ActionSpec> {
        self.actions.values()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

fn params(line: usize, s: &str) -> Result<Vec<String>, ParseError> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|p| match p.trim().strip_prefix('?') {
            Some(v) if is_identifier(v) => Ok(v.to_string()),
            _ => Err(ParseError::new(line, format!("invalid parameter `{p}`"))),
        })
        .collect()
}

fn lits(line: usize, s: &str) -> Result<State, ParseError> {
    Ok(parse_literal_list(s)
        .map_err(|e| ParseError::new(line, e.to_string()))?
        .into_iter()
        .collect())
}

/// `ACTION <name> PARAMS ?x,?y AGENTS <spec> PRE <lits> ADD <lits> DEL <lits>`;
/// `PRE`, `ADD` and `DEL` are optional and `-` stands for an empty list.
pub fn parse_actions(text: &str) -> Result<ActionLibrary, ParseError> {
    let mut lib = ActionLibrary::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let t: Vec<&str> = content.split_whitespace().collect();
        if t[0] != "ACTION" {
            return Err(ParseError::new(line, format!("unknown directive `{}`", t[0])));
        }
        if t.len() < 2 || !is_identifier(t[1]) || !t.len().is_multiple_of(2) {
            return Err(ParseError::new(line, "malformed ACTION line"));
        }
        if lib.get(t[1]).is_some() {
            return Err(ParseError::new(line, format!("duplicate action `{}`", t[1])));
        }
        let mut a = ActionSpec {
            name: t[1].to_string(),
            params: Vec::new(),
            agents: AgentSpec::Any(Vec::new()),
            pre: State::new(),
            add: State::new(),
            del: State::new(),
        };
        let mut seen = BTreeSet::new();
        for kv in t[2..].chunks(2) {
            if !seen.insert(kv[0]) {
                return Err(ParseError::new(line, format!("repeated keyword `{}`", kv[0])));
            }
            match kv[0] {
                "PARAMS" => a.params = params(line, kv[1])?,
                "AGENTS" => a.agents = kv[1].parse().map_err(|e| ParseError::new(line, e))?,
                "PRE" => a.pre = lits(line, kv[1])?,
                "ADD" => a.add = lits(line, kv[1])?,
                "DEL" => a.del = lits(line, kv[1])?,
                k => return Err(ParseError::new(line, format!("unexpected keyword `{k}`"))),
            }
        }
        if !seen.contains("AGENTS") {
            return Err(ParseError::new(line, "missing AGENTS"));
        }
        a.check().map_err(|e| ParseError::new(line, e))?;
        lib.insert(a);
    }
    Ok(lib)
}

pub fn write_actions(lib: &ActionLibrary) -> String {
    let mut out = String::new();
    for a in lib.iter() {
        let params = if a.params.is_empty() {
            "-".to_string()
        } else {
            a.params.iter().map(|p| format!("?{p}")).collect::<Vec<_>>().join(",")
        };
        out.push_str(&format!(
            "ACTION {} PARAMS {} AGENTS {} PRE {} ADD {} DEL {}\n",
            a.name,
            params,
            a.agents,
            format_literal_list(a.pre.literals()),
            format_literal_list(a.add.literals()),
            format_literal_list(a.del.literals()),
        ));
    }
    out
}
