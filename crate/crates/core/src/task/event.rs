//! Online events, trace files and event sources.

use std::fmt;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fol::{format_literal_list, is_identifier, parse_literal_list, Literal, Substitution};
use crate::graph::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Ack(bool),
    Human {
        action: String,
        bindings: Substitution,
    },
    Deact(String),
    Percept(Vec<Literal>),
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Ack(true) => write!(f, "ACK ok"),
            Event::Ack(false) => write!(f, "ACK fail"),
            Event::Human { action, bindings } => write!(f, "HUMAN {action} {bindings}"),
            Event::Deact(p) => write!(f, "DEACT {p}"),
            Event::Percept(l) => write!(f, "PERCEPT {}", format_literal_list(l)),
        }
    }
}

fn parse_event_body(body: &str) -> Result<Event, String> {
    let t: Vec<&str> = body.split_whitespace().collect();
    if t.first() == Some(&"HUMAN") && !t.get(1).is_some_and(|a| is_identifier(a)) {
        return Err(format!("malformed event `{body}`"));
    }
    match t.as_slice() {
        ["ACK", "ok"] => Ok(Event::Ack(true)),
        ["ACK", "fail"] => Ok(Event::Ack(false)),
        ["HUMAN", action] => Ok(Event::Human {
            action: action.to_string(),
            bindings: Substitution::new(),
        }),
        ["HUMAN", action, sigma] => Ok(Event::Human {
            action: action.to_string(),
            bindings: sigma.parse().map_err(|e: crate::fol::FolError| e.to_string())?,
        }),
        ["DEACT", p] => Ok(Event::Deact(p.to_string())),
        ["PERCEPT", lits] => Ok(Event::Percept(
            parse_literal_list(lits).map_err(|e| e.to_string())?,
        )),
        _ => Err(format!("malformed event `{body}`")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedEvent {
    pub time: f64,
    pub event: Event,
}

/// One event per line: `T=<sim-time> <event>`. Times must not decrease.
pub fn parse_trace(text: &str) -> Result<Vec<TimedEvent>, ParseError> {
    let mut out: Vec<TimedEvent> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (stamp, body) = content
            .split_once(char::is_whitespace)
            .ok_or_else(|| ParseError::new(line, "expected `T=<time> <event>`"))?;
        let time = stamp
            .strip_prefix("T=")
            .and_then(|t| t.parse::<f64>().ok())
            .filter(|t| t.is_finite())
            .ok_or_else(|| ParseError::new(line, format!("invalid time stamp `{stamp}`")))?;
        if out.last().is_some_and(|e| e.time > time) {
            return Err(ParseError::new(line, "time stamps must not decrease"));
        }
        let event = parse_event_body(body).map_err(|m| ParseError::new(line, m))?;
        out.push(TimedEvent { time, event });
    }
    Ok(out)
}

pub fn write_trace(events: &[TimedEvent]) -> String {
    events
        .iter()
        .map(|e| format!("T={} {}\n", e.time, e.event))
        .collect()
}

/// What the engine is waiting for when it asks for the next event.
#[derive(Debug, Clone, PartialEq)]
pub enum Expectation {
    /// A robot was dispatched an action and awaits acknowledgement.
    Robot { action: String, agents: Vec<String> },
    /// A human was assigned the action.
    Human {
        name: String,
        action: String,
        bindings: Substitution,
    },
    Process { process: String },
}

/// Another row a human could start right now.
#[derive(Debug, Clone, PartialEq)]
pub struct Alternative {
    pub label: String,
    pub action: String,
    pub bindings: Substitution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prompt {
    pub suggestions: Vec<(String, f64)>,
    pub expectation: Expectation,
    pub alternatives: Vec<Alternative>,
}

pub trait EventSource {
    /// Next event, or `None` when the source is exhausted.
    fn next_event(&mut self, prompt: &Prompt) -> Option<Event>;
}

pub struct TraceSource {
    events: std::vec::IntoIter<TimedEvent>,
}

impl TraceSource {
    pub fn new(events: Vec<TimedEvent>) -> Self {
        TraceSource {
            events: events.into_iter(),
        }
    }
}

impl EventSource for TraceSource {
    fn next_event(&mut self, _: &Prompt) -> Option<Event> {
        self.events.next().map(|e| e.event)
    }
}

/// Line-oriented prompt: `pass` acknowledges the robot, `fail` reports a
/// robot failure, `<action> [?x=C,...]` reports a human action, `deact <p>`
/// and `percept <lits>` pass the corresponding events, `quit` stops.
pub struct InteractiveSource<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> InteractiveSource<R, W> {
    pub fn new(input: R, output: W) -> Self {
        InteractiveSource { input, output }
    }

    fn show(&mut self, prompt: &Prompt) -> std::io::Result<()> {
        writeln!(self.output, "suggestions:")?;
        for (label, cost) in &prompt.suggestions {
            writeln!(self.output, "  {label} cost={cost}")?;
        }
        match &prompt.expectation {
            Expectation::Robot { action, agents } => {
                writeln!(self.output, "robot {} executes {action}", agents.join("+"))?
            }
            Expectation::Human { name, action, .. } => {
                writeln!(self.output, "waiting for {name} to perform {action}")?
            }
            Expectation::Process { process } => {
                writeln!(self.output, "waiting for process {process} to end")?
            }
        }
        write!(self.output, "> ")?;
        self.output.flush()
    }
}

impl<R: BufRead, W: Write> EventSource for InteractiveSource<R, W> {
    fn next_event(&mut self, prompt: &Prompt) -> Option<Event> {
        loop {
            self.show(prompt).ok()?;
            let mut line = String::new();
            if self.input.read_line(&mut line).ok()? == 0 {
                return None;
            }
            let line = line.trim();
            let parsed = match line.split_once(' ').unwrap_or((line, "")) {
                ("pass", "") => Ok(Event::Ack(true)),
                ("fail", "") => Ok(Event::Ack(false)),
                ("quit", "") => return None,
                ("deact", p) if !p.is_empty() => Ok(Event::Deact(p.trim().to_string())),
                ("percept", l) => parse_literal_list(l)
                    .map(Event::Percept)
                    .map_err(|e| e.to_string()),
                ("", _) => Err("empty input".to_string()),
                (action, sigma) => parse_event_body(&format!("HUMAN {action} {sigma}")),
            };
            match parsed {
                Ok(e) => return Some(e),
                Err(m) => {
                    let _ = writeln!(self.output, "? {m}");
                }
            }
        }
    }
}

/// Seeded stand-in for an operator: acknowledges robot actions, performs
/// its own assignments and occasionally takes over another row.
pub struct SimulatedSource {
    rng: ChaCha8Rng,
    intervene: f64,
    fail: f64,
    remaining: usize,
}

impl SimulatedSource {
    pub fn new(seed: u64) -> Self {
        SimulatedSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
            intervene: 0.25,
            fail: 0.05,
            remaining: 10_000,
        }
    }

    pub fn with_rates(mut self, intervene: f64, fail: f64) -> Self {
        self.intervene = intervene;
        self.fail = fail;
        self
    }
}

impl EventSource for SimulatedSource {
    fn next_event(&mut self, prompt: &Prompt) -> Option<Event> {
        self.remaining = self.remaining.checked_sub(1)?;
        if !prompt.alternatives.is_empty() && self.rng.gen_bool(self.intervene) {
            let k = self.rng.gen_range(0..prompt.alternatives.len());
            let alt = &prompt.alternatives[k];
            return Some(Event::Human {
                action: alt.action.clone(),
                bindings: alt.bindings.clone(),
            });
        }
        Some(match &prompt.expectation {
            Expectation::Robot { .. } => Event::Ack(!self.rng.gen_bool(self.fail)),
            Expectation::Human {
                action, bindings, ..
            } => Event::Human {
                action: action.clone(),
                bindings: bindings.clone(),
            },
            Expectation::Process { process } => Event::Deact(process.clone()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_round_trip_and_errors() {
        let text = "T=0 ACK ok\nT=0.5 HUMAN pickup ?y=A,?x=T\n# note\nT=1 DEACT hold\nT=2 PERCEPT !OnTable(A)\nT=2 ACK fail\n";
        let t = parse_trace(text).unwrap();
        assert_eq!(t.len(), 5);
        assert_eq!(parse_trace(&write_trace(&t)).unwrap(), t);
        assert_eq!(parse_trace("T=1 ACK ok\nT=0 ACK ok\n").unwrap_err().line, 2);
        assert_eq!(parse_trace("T=1 ACK maybe\n").unwrap_err().line, 1);
        assert_eq!(parse_trace("ACK ok\n").unwrap_err().line, 1);
    }

    #[test]
    fn interactive_parses_commands() {
        let prompt = Prompt {
            suggestions: vec![("g::h".into(), 1.0)],
            expectation: Expectation::Process {
                process: "p".into(),
            },
            alternatives: Vec::new(),
        };
        let input = b"bogus(\npass\npickup ?y=A\ndeact p\n" as &[u8];
        let mut out = Vec::new();
        let mut src = InteractiveSource::new(input, &mut out);
        assert_eq!(src.next_event(&prompt), Some(Event::Ack(true)));
        assert!(matches!(src.next_event(&prompt), Some(Event::Human { .. })));
        assert_eq!(src.next_event(&prompt), Some(Event::Deact("p".into())));
        assert_eq!(src.next_event(&prompt), None);
        let shown = String::from_utf8(out).unwrap();
        assert!(shown.contains("g::h cost=1"));
        assert!(shown.contains("? "));
    }
}
