//! Ordered record of one cooperation run.

use std::fmt;

use super::event::Event;
use crate::fol::{Literal, Substitution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Solved,
    Failed,
    /// The event source ran dry before the task ended.
    Incomplete,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Solved => "Solved",
            Outcome::Failed => "Failed",
            Outcome::Incomplete => "Incomplete",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Header { model: String, seed: Option<u64> },
    Query(usize),
    Suggest { label: String, cost: f64 },
    AutoMet { label: String },
    Select { label: String, cost: f64 },
    Branch {
        label: String,
        index: usize,
        grounding: Substitution,
        agents: Vec<String>,
        millis: u64,
        utility: f64,
    },
    Ground { label: String, grounding: Substitution, utility: f64 },
    NoGrounding { label: String, variable: String },
    RowInfeasible { label: String },
    Dispatch { label: String, action: String, agents: Vec<String> },
    AwaitProcess { label: String, process: String },
    Event(Event),
    Done { label: String, action: String, by: String },
    Completed { label: String },
    TerminateRobot,
    GoToRest,
    Switch { from: Option<String>, to: String },
    Deactivated { label: String, process: String },
    Stale,
    Inconsistent(Vec<Literal>),
    Paused,
    Resumed,
    End(Outcome),
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entry::Header { model, seed } => match seed {
                Some(s) => write!(f, "# model {model} seed {s}"),
                None => write!(f, "# model {model}"),
            },
            Entry::Query(n) => write!(f, "query {n}"),
            Entry::Suggest { label, cost } => write!(f, "  suggest {label} cost={cost}"),
            Entry::AutoMet { label } => write!(f, "met {label}"),
            Entry::Select { label, cost } => write!(f, "select {label} cost={cost}"),
            Entry::Branch {
                label,
                index,
                grounding,
                agents,
                millis,
                utility,
            } => write!(
                f,
                "  branch {label} #{index} {grounding} agents={} t={}s J={utility}",
                agents.join(","),
                *millis as f64 / 1000.0
            ),
            Entry::Ground {
                label,
                grounding,
                utility,
            } => write!(f, "ground {label} {grounding} J={utility}"),
            Entry::NoGrounding { label, variable } => {
                write!(f, "no-grounding {label} ?{variable}")
            }
            Entry::RowInfeasible { label } => write!(f, "row-infeasible {label}"),
            Entry::Dispatch {
                label,
                action,
                agents,
            } => write!(f, "dispatch {label} {action} -> {}", agents.join("+")),
            Entry::AwaitProcess { label, process } => write!(f, "await {label} process {process}"),
            Entry::Event(e) => write!(f, "event {e}"),
            Entry::Done { label, action, by } => write!(f, "done {label} {action} by {by}"),
            Entry::Completed { label } => write!(f, "completed {label}"),
            Entry::TerminateRobot => write!(f, "directive TerminateRobot"),
            Entry::GoToRest => write!(f, "directive GoToRest"),
            Entry::Switch { from, to } => match from {
                Some(from) => write!(f, "switch {from} -> {to}"),
                None => write!(f, "switch -> {to}"),
            },
            Entry::Deactivated { label, process } => write!(f, "deactivated {label} {process}"),
            Entry::Stale => write!(f, "stale"),
            Entry::Inconsistent(l) => write!(
                f,
                "inconsistent {}",
                l.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
            ),
            Entry::Paused => write!(f, "paused"),
            Entry::Resumed => write!(f, "resumed"),
            Entry::End(o) => write!(f, "end {o}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    pub entries: Vec<Entry>,
}

impl Transcript {
    pub fn push(&mut self, e: Entry) {
        self.entries.push(e);
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.entries.iter().rev().find_map(|e| match e {
            Entry::End(o) => Some(*o),
            _ => None,
        })
    }

    pub fn dispatches(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().filter_map(|e| match e {
            Entry::Dispatch { label, action, .. } => Some((label.as_str(), action.as_str())),
            _ => None,
        })
    }

    pub fn switches(&self) -> impl Iterator<Item = (Option<&str>, &str)> {
        self.entries.iter().filter_map(|e| match e {
            Entry::Switch { from, to } => Some((from.as_deref(), to.as_str())),
            _ => None,
        })
    }

    pub fn contains(&self, e: &Entry) -> bool {
        self.entries.contains(e)
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}
