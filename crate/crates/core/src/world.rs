//! Knowledge base and deterministic action simulator.
//!
//! The world is a closed set of grounded facts plus object records. Agent
//! models give each action a duration of `base + per_m * distance`, where the
//! distance runs through the poses of the action's arguments in order.
//! Durations are kept in integer milliseconds so outcomes compare exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::fol::{is_identifier, unify_with, Literal, State, Substitution, Term};
use crate::graph::ParseError;

pub const DEFAULT_TIMEOUT_S: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("precondition `{literal}` of `{action}` does not hold")]
    PreconditionViolation { action: String, literal: Literal },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectInfo {
    pub kind: String,
    pub pose: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorldState {
    facts: BTreeSet<Literal>,
    objects: BTreeMap<String, ObjectInfo>,
}

/// An action with every parameter bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub pre: State,
    pub add: State,
    pub del: State,
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Consistency {
    Consistent,
    Inconsistent(Vec<Literal>),
}

impl WorldState {
    pub fn new() -> Self {
        WorldState::default()
    }

    pub fn facts(&self) -> impl Iterator<Item = &Literal> {
        self.facts.iter()
    }

    pub fn objects(&self) -> &BTreeMap<String, ObjectInfo> {
        &self.objects
    }

    pub fn add_object(&mut self, name: &str, kind: &str, pose: Option<[f64; 3]>) {
        self.objects.insert(
            name.to_string(),
            ObjectInfo {
                kind: kind.to_string(),
                pose,
            },
        );
        self.facts
            .insert(Literal::new(kind, vec![Term::constant(name)]));
    }

    /// Adds a positive grounded fact; returns false for anything else.
    pub fn assert_fact(&mut self, lit: Literal) -> bool {
        if lit.negated || !lit.is_grounded() {
            return false;
        }
        self.facts.insert(lit);
        true
    }

    /// Closed-world truth of a grounded literal.
    pub fn holds(&self, lit: &Literal) -> bool {
        if lit.negated {
            !self.facts.contains(&lit.complement())
        } else {
            self.facts.contains(lit)
        }
    }

    pub fn pose(&self, object: &str) -> Option<[f64; 3]> {
        self.objects.get(object).and_then(|o| o.pose)
    }

    /// All substitutions turning `pattern` into a fact, in fact order.
    pub fn query_groundings(&self, pattern: &Literal) -> Vec<Substitution> {
        self.query_with(pattern, &Substitution::new())
    }

    /// Like [`query_groundings`](Self::query_groundings), extending `base`.
    pub fn query_with(&self, pattern: &Literal, base: &Substitution) -> Vec<Substitution> {
        if pattern.negated {
            return Vec::new();
        }
        self.facts
            .iter()
            .filter(|f| f.predicate == pattern.predicate)
            .filter_map(|f| unify_with(pattern, f, base))
            .collect()
    }

    /// `(facts ∖ del) ∪ add`, provided every precondition holds.
    pub fn apply_effects(&self, a: &GroundAction) -> Result<WorldState, WorldError> {
        if let Some(l) = a.pre.literals().find(|l| !self.holds(l)) {
            return Err(WorldError::PreconditionViolation {
                action: a.to_string(),
                literal: l.clone(),
            });
        }
        let mut next = self.clone();
        for l in a.del.literals() {
            next.facts.remove(l);
        }
        for l in a.add.literals() {
            next.facts.insert(l.clone());
        }
        Ok(next)
    }

    /// Applies add and delete lists regardless of preconditions. Used for
    /// the live world, where completion has already been reported.
    pub fn force_effects(&mut self, a: &GroundAction) {
        for l in a.del.literals() {
            self.facts.remove(l);
        }
        for l in a.add.literals() {
            self.facts.insert(l.clone());
        }
    }

    /// A percept conflicts with the world when it negates a fact.
    pub fn check_consistency(&self, percept: &[Literal]) -> Consistency {
        let conflicts: Vec<Literal> = percept
            .iter()
            .filter(|l| l.negated && self.facts.contains(&l.complement()))
            .map(Literal::complement)
            .collect();
        if conflicts.is_empty() {
            Consistency::Consistent
        } else {
            Consistency::Inconsistent(conflicts)
        }
    }

    /// Checks a percept and, when consistent, merges its positive literals.
    pub fn absorb(&mut self, percept: &[Literal]) -> Consistency {
        let c = self.check_consistency(percept);
        if c == Consistency::Consistent {
            for l in percept.iter().filter(|l| !l.negated && l.is_grounded()) {
                self.facts.insert(l.clone());
            }
        }
        c
    }

    /// Sum of distances between consecutive posed objects among `args`.
    pub fn path_length(&self, args: &[String]) -> f64 {
        let poses: Vec<[f64; 3]> = args.iter().filter_map(|a| self.pose(a)).collect();
        poses
            .windows(2)
            .map(|w| {
                let d: f64 = (0..3).map(|i| (w[0][i] - w[1][i]).powi(2)).sum();
                d.sqrt()
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AgentKind {
    Human,
    Robot,
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentKind::Human => "human",
            AgentKind::Robot => "robot",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Duration {
    pub base_s: f64,
    pub per_m: f64,
    pub timeout_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FailPattern {
    Any,
    /// Fails when every listed binding appears in the action's grounding.
    Bindings(Substitution),
}

impl FailPattern {
    pub fn matches(&self, sigma: &Substitution) -> bool {
        match self {
            FailPattern::Any => true,
            FailPattern::Bindings(b) => b.is_subset_of(sigma),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel {
    pub id: String,
    pub kind: AgentKind,
    pub timeout_s: f64,
    pub durations: BTreeMap<String, Duration>,
    pub failures: Vec<(String, FailPattern)>,
}

impl AgentModel {
    pub fn new(id: &str, kind: AgentKind) -> Self {
        AgentModel {
            id: id.to_string(),
            kind,
            timeout_s: DEFAULT_TIMEOUT_S,
            durations: BTreeMap::new(),
            failures: Vec::new(),
        }
    }

    pub fn with_duration(mut self, action: &str, base_s: f64, per_m: f64) -> Self {
        self.durations.insert(
            action.to_string(),
            Duration {
                base_s,
                per_m,
                timeout_s: None,
            },
        );
        self
    }

    pub fn with_failure(mut self, action: &str, pattern: FailPattern) -> Self {
        self.failures.push((action.to_string(), pattern));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub success: bool,
    pub millis: u64,
}

impl Outcome {
    pub const FAILED: Outcome = Outcome {
        success: false,
        millis: 0,
    };

    pub fn seconds(&self) -> f64 {
        self.millis as f64 / 1000.0
    }
}

fn to_millis(s: f64) -> u64 {
    (s * 1000.0).round().max(0.0) as u64
}

/// The agent roster, in declaration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Agents {
    models: Vec<AgentModel>,
}

impl Agents {
    pub fn new(models: Vec<AgentModel>) -> Self {
        Agents { models }
    }

    pub fn get(&self, id: &str) -> Option<&AgentModel> {
        self.models.iter().find(|m| m.id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &AgentModel> {
        self.models.iter()
    }

    pub fn kind(&self, id: &str) -> Option<AgentKind> {
        self.get(id).map(|m| m.kind)
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Simulates one grounded action executed jointly by `agents`. The
    /// action takes as long as its slowest participant and succeeds only if
    /// every participant does. Missing duration entries count as failures.
    pub fn simulate(
        &self,
        action: &GroundAction,
        sigma: &Substitution,
        agents: &[String],
        world: &WorldState,
    ) -> Result<Outcome, WorldError> {
        let models = agents
            .iter()
            .map(|a| self.get(a).ok_or_else(|| WorldError::UnknownAgent(a.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        if action.pre.literals().any(|l| !world.holds(l)) {
            return Ok(Outcome::FAILED);
        }
        let distance = world.path_length(&action.args);
        let mut longest = 0;
        for m in models {
            let fails = m
                .failures
                .iter()
                .any(|(name, p)| *name == action.name && p.matches(sigma));
            let Some(d) = m.durations.get(&action.name) else {
                return Ok(Outcome::FAILED);
            };
            if fails {
                return Ok(Outcome::FAILED);
            }
            let millis = to_millis(d.base_s) + to_millis(d.per_m * distance);
            if millis > to_millis(d.timeout_s.unwrap_or(m.timeout_s)) {
                return Ok(Outcome::FAILED);
            }
            longest = longest.max(millis);
        }
        Ok(Outcome {
            success: true,
            millis: longest,
        })
    }
}

fn number(line: usize, s: &str) -> Result<f64, ParseError> {
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ParseError::new(line, format!("invalid number `{s}`")))
}

fn strip_comment(raw: &str) -> &str {
    raw.split('#').next().unwrap_or("").trim()
}

/// `OBJ <const> TYPE <pred> [POSE x y z]` and `FACT <literal>` lines.
pub fn parse_world(text: &str) -> Result<WorldState, ParseError> {
    let mut w = WorldState::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = strip_comment(raw);
        if content.is_empty() {
            continue;
        }
        let t: Vec<&str> = content.split_whitespace().collect();
        match t[0] {
            "OBJ" => {
                let ok = (t.len() == 4 || t.len() == 8)
                    && t[2] == "TYPE"
                    && (t.len() == 4 || t[4] == "POSE")
                    && is_identifier(t[1])
                    && is_identifier(t[3]);
                if !ok {
                    return Err(ParseError::new(
                        line,
                        "expected `OBJ <const> TYPE <pred> [POSE x y z]`",
                    ));
                }
                let pose = if t.len() == 8 {
                    Some([number(line, t[5])?, number(line, t[6])?, number(line, t[7])?])
                } else {
                    None
                };
                w.add_object(t[1], t[3], pose);
            }
            "FACT" => {
                let lit: Literal = content[4..]
                    .trim()
                    .parse()
                    .map_err(|e: crate::fol::FolError| ParseError::new(line, e.to_string()))?;
                if !w.assert_fact(lit) {
                    return Err(ParseError::new(line, "facts must be positive and grounded"));
                }
            }
            other => return Err(ParseError::new(line, format!("unknown directive `{other}`"))),
        }
    }
    Ok(w)
}

pub fn write_world(w: &WorldState) -> String {
    let mut out = String::new();
    let mut typed = BTreeSet::new();
    for (name, o) in &w.objects {
        out.push_str(&format!("OBJ {name} TYPE {}", o.kind));
        if let Some([x, y, z]) = o.pose {
            out.push_str(&format!(" POSE {x} {y} {z}"));
        }
        out.push('\n');
        typed.insert(Literal::new(&o.kind, vec![Term::constant(name)]));
    }
    for f in w.facts.iter().filter(|f| !typed.contains(*f)) {
        out.push_str(&format!("FACT {f}\n"));
    }
    out
}

/// `AGENT`, `DUR` and `FAILS` lines; the latter two refer to the closest
/// preceding `AGENT`.
pub fn parse_agents(text: &str) -> Result<Agents, ParseError> {
    let mut models: Vec<AgentModel> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = strip_comment(raw);
        if content.is_empty() {
            continue;
        }
        let t: Vec<&str> = content.split_whitespace().collect();
        if t[0] != "AGENT" && models.is_empty() {
            return Err(ParseError::new(line, format!("{} before any AGENT", t[0])));
        }
        match t[0] {
            "AGENT" => {
                if !(t.len() == 4 || t.len() == 6) || t[2] != "KIND" || !is_identifier(t[1]) {
                    return Err(ParseError::new(
                        line,
                        "expected `AGENT <id> KIND <human|robot> [TIMEOUT s]`",
                    ));
                }
                if models.iter().any(|m| m.id == t[1]) {
                    return Err(ParseError::new(line, format!("duplicate agent `{}`", t[1])));
                }
                let kind = match t[3] {
                    "human" => AgentKind::Human,
                    "robot" => AgentKind::Robot,
                    k => return Err(ParseError::new(line, format!("unknown agent kind `{k}`"))),
                };
                let mut m = AgentModel::new(t[1], kind);
                if t.len() == 6 {
                    if t[4] != "TIMEOUT" {
                        return Err(ParseError::new(line, format!("unexpected `{}`", t[4])));
                    }
                    m.timeout_s = number(line, t[5])?;
                }
                models.push(m);
            }
            "DUR" => {
                if t.len() < 3 || t.len() % 2 != 1 || !is_identifier(t[1]) {
                    return Err(ParseError::new(
                        line,
                        "expected `DUR <action> <base-s> [PERM k] [TIMEOUT s]`",
                    ));
                }
                let base_s = number(line, t[2])?;
                if base_s <= 0.0 {
                    return Err(ParseError::new(line, "base duration must be positive"));
                }
                let mut d = Duration {
                    base_s,
                    per_m: 0.0,
                    timeout_s: None,
                };
                for kv in t[3..].chunks(2) {
                    match kv[0] {
                        "PERM" => d.per_m = number(line, kv[1])?,
                        "TIMEOUT" => d.timeout_s = Some(number(line, kv[1])?),
                        k => return Err(ParseError::new(line, format!("unexpected `{k}`"))),
                    }
                }
                models.last_mut().unwrap().durations.insert(t[1].to_string(), d);
            }
            "FAILS" => {
                if t.len() != 3 || !is_identifier(t[1]) {
                    return Err(ParseError::new(line, "expected `FAILS <action> <pattern>`"));
                }
                let pattern = if t[2] == "*" {
                    FailPattern::Any
                } else {
                    FailPattern::Bindings(
                        t[2].parse()
                            .map_err(|e: crate::fol::FolError| ParseError::new(line, e.to_string()))?,
                    )
                };
                models
                    .last_mut()
                    .unwrap()
                    .failures
                    .push((t[1].to_string(), pattern));
            }
            other => return Err(ParseError::new(line, format!("unknown directive `{other}`"))),
        }
    }
    Ok(Agents::new(models))
}

pub fn write_agents(a: &Agents) -> String {
    let mut out = String::new();
    for m in a.iter() {
        out.push_str(&format!("AGENT {} KIND {} TIMEOUT {}\n", m.id, m.kind, m.timeout_s));
        for (name, d) in &m.durations {
            out.push_str(&format!("DUR {name} {}", d.base_s));
            if d.per_m != 0.0 {
                out.push_str(&format!(" PERM {}", d.per_m));
            }
            if let Some(t) = d.timeout_s {
                out.push_str(&format!(" TIMEOUT {t}"));
            }
            out.push('\n');
        }
        for (name, p) in &m.failures {
            match p {
                FailPattern::Any => out.push_str(&format!("FAILS {name} *\n")),
                FailPattern::Bindings(s) => out.push_str(&format!("FAILS {name} {s}\n")),
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fol::parse_literal_list;

    fn lit(s: &str) -> Literal {
        s.parse().unwrap()
    }

    fn st(s: &str) -> State {
        parse_literal_list(s).unwrap().into_iter().collect()
    }

    fn choice_world() -> WorldState {
        parse_world(
            "OBJ T TYPE Tabletop POSE 0 0 0\nOBJ A TYPE Leg POSE 0.5 0 0\nOBJ B TYPE Leg POSE 0.2 0 0\n",
        )
        .unwrap()
    }

    #[test]
    fn groundings_follow_fact_order() {
        let w = choice_world();
        let g = w.query_groundings(&lit("Leg(?y)"));
        assert_eq!(g, vec!["?y=A".parse().unwrap(), "?y=B".parse().unwrap()]);
        assert_eq!(w.query_groundings(&lit("Tabletop(?x)")).len(), 1);
        assert!(w.query_groundings(&lit("Screwed(?x)")).is_empty());
    }

    fn transport(args: &[&str]) -> GroundAction {
        GroundAction {
            name: "transport".into(),
            args: args.iter().map(|s| s.to_string()).collect(),
            pre: State::new(),
            add: State::new(),
            del: State::new(),
        }
    }

    #[test]
    fn durations_base_plus_distance() {
        let w = choice_world();
        let agents = Agents::new(vec![
            AgentModel::new("R1", AgentKind::Robot).with_duration("transport", 0.2, 0.0),
            AgentModel::new("R2", AgentKind::Robot).with_duration("transport", 0.1, 1.0),
        ]);
        let s: Substitution = "?y=B,?x=T".parse().unwrap();
        let o = agents.simulate(&transport(&["B", "T"]), &s, &["R1".into()], &w).unwrap();
        assert_eq!(o, Outcome { success: true, millis: 200 });
        let o = agents.simulate(&transport(&["B", "T"]), &s, &["R2".into()], &w).unwrap();
        assert_eq!(o.millis, 300);
        let o = agents
            .simulate(&transport(&["B", "T"]), &s, &["R1".into(), "R2".into()], &w)
            .unwrap();
        assert_eq!(o.millis, 300);
        assert!(matches!(
            agents.simulate(&transport(&["B"]), &s, &["R9".into()], &w),
            Err(WorldError::UnknownAgent(_))
        ));
    }

    #[test]
    fn failures_and_timeouts() {
        let w = choice_world();
        let mut slow = AgentModel::new("R1", AgentKind::Robot)
            .with_duration("transport", 31.0, 0.0)
            .with_duration("grasp", 1.0, 0.0)
            .with_failure("grasp", FailPattern::Bindings("?y=A".parse().unwrap()));
        slow.timeout_s = 30.0;
        let agents = Agents::new(vec![slow]);
        let r1 = ["R1".to_string()];
        let mut grasp = transport(&["A"]);
        grasp.name = "grasp".into();
        let a: Substitution = "?y=A".parse().unwrap();
        let b: Substitution = "?y=B".parse().unwrap();
        assert!(!agents.simulate(&grasp, &a, &r1, &w).unwrap().success);
        assert!(agents.simulate(&grasp, &b, &r1, &w).unwrap().success);
        assert!(!agents.simulate(&transport(&["A"]), &a, &r1, &w).unwrap().success);
        let mut unknown = grasp.clone();
        unknown.name = "weld".into();
        assert_eq!(agents.simulate(&unknown, &a, &r1, &w).unwrap(), Outcome::FAILED);
    }

    #[test]
    fn effects_are_set_algebra() {
        let mut w = WorldState::new();
        w.assert_fact(lit("OnTable(A)"));
        w.assert_fact(lit("Free(T)"));
        let pick = GroundAction {
            name: "pick".into(),
            args: vec!["A".into()],
            pre: st("OnTable(A)"),
            add: st("Held(A)"),
            del: st("OnTable(A)"),
        };
        let next = w.apply_effects(&pick).unwrap();
        assert!(next.holds(&lit("Held(A)")));
        assert!(!next.holds(&lit("OnTable(A)")));
        assert!(next.holds(&lit("Free(T)")));
        assert!(matches!(
            next.apply_effects(&pick),
            Err(WorldError::PreconditionViolation { .. })
        ));
        let noop = GroundAction {
            pre: State::new(),
            add: State::new(),
            del: State::new(),
            ..pick
        };
        assert_eq!(w.apply_effects(&noop).unwrap(), w);
    }

    #[test]
    fn consistency_checks() {
        let mut w = WorldState::new();
        w.assert_fact(lit("OnTable(A)"));
        assert_eq!(w.check_consistency(&[lit("OnTable(A)")]), Consistency::Consistent);
        assert_eq!(
            w.check_consistency(&[lit("!OnTable(A)")]),
            Consistency::Inconsistent(vec![lit("OnTable(A)")])
        );
        let before = w.clone();
        w.absorb(&[lit("!OnTable(A)"), lit("Leg(C)")]);
        assert_eq!(w, before);
        assert_eq!(w.absorb(&[lit("Leg(C)")]), Consistency::Consistent);
        assert!(w.holds(&lit("Leg(C)")));
    }

    #[test]
    fn files_round_trip() {
        let w = choice_world();
        assert_eq!(parse_world(&write_world(&w)).unwrap(), w);
        let text = "AGENT R1 KIND robot TIMEOUT 20\nDUR transport 0.1 PERM 1 TIMEOUT 5\nFAILS screw *\nFAILS grasp ?y=A\nAGENT H KIND human\nDUR pickup 2\n";
        let a = parse_agents(text).unwrap();
        assert_eq!(a.get("H").unwrap().timeout_s, DEFAULT_TIMEOUT_S);
        assert_eq!(parse_agents(&write_agents(&a)).unwrap(), a);
        assert_eq!(parse_agents("DUR x 1\n").unwrap_err().line, 1);
        assert_eq!(parse_agents("AGENT R KIND robot\nDUR x 0\n").unwrap_err().line, 2);
        assert_eq!(parse_world("OBJ A TYPE\n").unwrap_err().line, 1);
        assert_eq!(parse_world("FACT !A(B)\n").unwrap_err().line, 1);
    }
}
