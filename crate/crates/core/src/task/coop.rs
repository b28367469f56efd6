//! The online cooperation loop.
//!
//! Each cycle queries the task model, rebuilds the Action-State table,
//! picks a row, grounds it through its decision tree and dispatches the next
//! action. Events from the source then either advance the row, block it,
//! or report that the human took over another row.

use std::collections::BTreeSet;

use super::action::{ActionLibrary, ActionSpec, AgentSpec};
use super::event::{Alternative, Event, EventSource, Expectation, Prompt};
use super::table::{ActionStateTable, Binding};
use super::transcript::{Entry, Outcome, Transcript};
use super::tree::{evaluate_decision_tree, generate_decision_tree, row_groundings};
use super::tree::{update_optimal_state, Constraint, Decision};
use super::{Query, RowRef, TaskError, TaskModel};
use crate::fol::Substitution;
use crate::graph::Item;
use crate::world::{AgentKind, Agents, Consistency, WorldState};

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Recorded in the transcript header.
    pub seed: Option<u64>,
    /// Upper bound on model queries before the run is cut off.
    pub max_queries: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: None,
            max_queries: 100_000,
        }
    }
}

/// Runs the task to completion, failure or exhaustion of `source`. The live
/// `world` is updated with the effects of every completed action.
pub fn run_cooperation<M: TaskModel>(
    model: &mut M,
    lib: &ActionLibrary,
    agents: &Agents,
    world: &mut WorldState,
    source: &mut dyn EventSource,
    opts: &RunOptions,
) -> Result<Transcript, TaskError> {
    let mut run = Run {
        model,
        lib,
        agents,
        world,
        table: ActionStateTable::default(),
        current: None,
        dispatched: None,
        abandoned: BTreeSet::new(),
        paused: false,
        log: Transcript::default(),
    };
    run.log.push(Entry::Header {
        model: run.model.describe(),
        seed: opts.seed,
    });
    for q in 1..=opts.max_queries {
        run.log.push(Entry::Query(q));
        if let Some(outcome) = run.cycle(source)? {
            run.log.push(Entry::End(outcome));
            return Ok(run.log);
        }
    }
    run.log.push(Entry::End(Outcome::Incomplete));
    Ok(run.log)
}

struct Run<'a, M> {
    model: &'a mut M,
    lib: &'a ActionLibrary,
    agents: &'a Agents,
    world: &'a mut WorldState,
    table: ActionStateTable,
    current: Option<RowRef>,
    dispatched: Option<(RowRef, usize)>,
    /// Rows the human walked away from; chosen again only as a last resort.
    abandoned: BTreeSet<RowRef>,
    paused: bool,
    log: Transcript,
}

enum Step {
    Requery,
    Wait(Expectation, Option<usize>),
}

impl<'a, M: TaskModel> Run<'a, M> {
    /// One query and whatever events it takes to change the model.
    fn cycle(&mut self, source: &mut dyn EventSource) -> Result<Option<Outcome>, TaskError> {
        let candidates = match self.model.query() {
            Query::Solved => return Ok(Some(Outcome::Solved)),
            Query::Failed => return Ok(Some(Outcome::Failed)),
            Query::Suggestions(c) => c,
        };
        for c in &candidates {
            self.log.push(Entry::Suggest {
                label: c.label.clone(),
                cost: c.cost,
            });
        }
        let model = &*self.model;
        let mut next = ActionStateTable::build(&candidates, self.lib, |r| model.actions(r))?;
        next.carry_over(&self.table);
        self.table = next;

        let met: Vec<RowRef> = self
            .table
            .rows()
            .iter()
            .filter(|r| matches!(r.row.item, Item::Node(_)))
            .filter(|r| self.model.active_processes(r.row).is_empty())
            .map(|r| r.row)
            .collect();
        if !met.is_empty() {
            for r in met {
                self.model.complete(r);
                let label = self.label(r);
                self.log.push(Entry::AutoMet { label });
            }
            return Ok(None);
        }

        let Some(row) = self.select() else {
            return Ok(Some(Outcome::Failed));
        };
        let step = self.prepare(row)?;
        let Step::Wait(expectation, k) = step else {
            return Ok(None);
        };
        loop {
            let prompt = self.prompt(row, &expectation);
            let Some(event) = source.next_event(&prompt) else {
                return Ok(Some(Outcome::Incomplete));
            };
            self.log.push(Entry::Event(event.clone()));
            if self.handle(row, k, &expectation, event)? {
                return Ok(None);
            }
        }
    }

    fn label(&self, r: RowRef) -> String {
        self.table.get(r).map(|x| x.label.clone()).unwrap_or_default()
    }

    fn select(&mut self) -> Option<RowRef> {
        let sticky = self.current.filter(|r| {
            self.table
                .get(*r)
                .is_some_and(|x| !x.infeasible && x.binding.is_some())
        });
        let chosen = sticky.or_else(|| {
            self.table
                .select_where(|r| !self.abandoned.contains(&r.row))
                .or_else(|| self.table.select_optimal())
                .map(|r| r.row)
        })?;
        if self.current != Some(chosen) {
            let r = self.table.get(chosen)?;
            self.log.push(Entry::Select {
                label: r.label.clone(),
                cost: r.cost,
            });
            self.current = Some(chosen);
        }
        Some(chosen)
    }

    fn specs(&self, row: RowRef) -> Vec<&'a ActionSpec> {
        let lib = self.lib;
        self.table
            .get(row)
            .map(|r| r.actions.iter().filter_map(|a| lib.get(a)).collect())
            .unwrap_or_default()
    }

    /// Grounds the row if needed and dispatches its next action.
    fn prepare(&mut self, row: RowRef) -> Result<Step, TaskError> {
        if let Item::Node(_) = row.item {
            let process = self.model.active_processes(row).remove(0);
            if self.dispatched != Some((row, 0)) {
                self.log.push(Entry::AwaitProcess {
                    label: self.label(row),
                    process: process.clone(),
                });
                self.dispatched = Some((row, 0));
            }
            return Ok(Step::Wait(Expectation::Process { process }, None));
        }
        if self.table.get(row).is_some_and(|r| r.actions.is_empty()) {
            self.finish_row(row);
            return Ok(Step::Requery);
        }
        let fixed = Constraint {
            bindings: self.model.bindings(row),
            forced: None,
        };
        if self.table.get(row).is_some_and(|r| r.binding.is_none())
            && !self.ground(row, &fixed, false)?
        {
            self.fail_row(row);
            return Ok(Step::Requery);
        }
        let (k, assigned) = match self.table.find_next_action(row)? {
            Some((k, a)) => (k, a.to_vec()),
            None => {
                self.finish_row(row);
                return Ok(Step::Requery);
            }
        };
        let spec = self.specs(row)[k];
        let grounding = self.grounding(row);
        let shown = self.shown(spec, &grounding);
        if self.dispatched != Some((row, k)) {
            self.log.push(Entry::Dispatch {
                label: self.label(row),
                action: shown.clone(),
                agents: assigned.clone(),
            });
            self.dispatched = Some((row, k));
        }
        let human = assigned
            .iter()
            .find(|a| self.agents.kind(a) == Some(AgentKind::Human));
        let expectation = match human {
            Some(name) => Expectation::Human {
                name: name.clone(),
                action: spec.name.clone(),
                bindings: grounding.restrict(spec.params.iter().map(String::as_str)),
            },
            None => Expectation::Robot {
                action: shown,
                agents: assigned,
            },
        };
        Ok(Step::Wait(expectation, Some(k)))
    }

    fn grounding(&self, row: RowRef) -> Substitution {
        self.table
            .get(row)
            .and_then(|r| r.binding.as_ref())
            .map(|b| b.grounding.clone())
            .unwrap_or_default()
    }

    fn shown(&self, spec: &ActionSpec, grounding: &Substitution) -> String {
        spec.ground(grounding)
            .map_or_else(|| spec.name.clone(), |g| g.to_string())
    }

    /// Builds and evaluates the row's decision tree. With `take_any`, a row
    /// whose every branch fails keeps its first branch anyway; a human has
    /// already started it.
    fn ground(&mut self, row: RowRef, c: &Constraint, take_any: bool) -> Result<bool, TaskError> {
        let label = self.label(row);
        let specs = self.specs(row);
        let mut branches = match generate_decision_tree(&specs, self.world, c) {
            Ok(b) => b,
            Err(TaskError::NoGrounding(variable)) => {
                self.log.push(Entry::NoGrounding { label, variable });
                return Ok(false);
            }
            Err(e) => return Err(e),
        };
        evaluate_decision_tree(&mut branches, &specs, self.agents, self.world)?;
        for (index, b) in branches.iter().enumerate() {
            let mut agents: Vec<String> = b.assignment.iter().flatten().cloned().collect();
            agents.dedup();
            self.log.push(Entry::Branch {
                label: label.clone(),
                index,
                grounding: b.grounding.clone(),
                agents,
                millis: b.total_millis(),
                utility: b.utility,
            });
        }
        let chosen = match update_optimal_state(&branches) {
            Decision::Grounded(i) => i,
            Decision::RowInfeasible if take_any && !branches.is_empty() => 0,
            Decision::RowInfeasible => return Ok(false),
        };
        let b = branches.swap_remove(chosen);
        self.log.push(Entry::Ground {
            label,
            grounding: b.grounding.clone(),
            utility: b.utility,
        });
        if let Some(r) = self.table.get_mut(row) {
            r.binding = Some(Binding {
                grounding: b.grounding,
                assignment: b.assignment,
                utility: b.utility,
            });
        }
        Ok(true)
    }

    fn fail_row(&mut self, row: RowRef) {
        let label = self.label(row);
        self.log.push(Entry::RowInfeasible { label });
        if let Some(r) = self.table.get_mut(row) {
            r.infeasible = true;
        }
        self.model.block(row);
        self.current = None;
        self.dispatched = None;
    }

    fn finish_row(&mut self, row: RowRef) {
        let label = self.label(row);
        self.log.push(Entry::Completed { label });
        self.model.complete(row);
        self.current = None;
        self.dispatched = None;
    }

    /// Records action `k` of `row` as done and applies it to the world.
    fn finish_action(&mut self, row: RowRef, k: usize, by: String) {
        let spec = self.specs(row)[k];
        let grounding = self.grounding(row);
        if let Some(g) = spec.ground(&grounding) {
            self.world.force_effects(&g);
        }
        self.log.push(Entry::Done {
            label: self.label(row),
            action: self.shown(spec, &grounding),
            by,
        });
        self.table.mark_done(row, k);
        self.model.action_done(row, k);
        if self.table.get(row).is_some_and(|r| r.is_complete()) {
            self.finish_row(row);
        }
    }

    fn first_human(&self, spec: &AgentSpec) -> Option<String> {
        spec.agents()
            .into_iter()
            .find(|a| self.agents.kind(a) == Some(AgentKind::Human))
            .map(str::to_string)
    }

    /// Rows other than `current` whose next action a human may start.
    fn takeovers(&self, current: RowRef) -> impl Iterator<Item = (RowRef, usize, &'a ActionSpec)> + '_ {
        let lib = self.lib;
        self.table
            .rows()
            .iter()
            .filter(move |r| r.row != current && !r.infeasible)
            .filter(|r| matches!(r.row.item, Item::Arc(_)))
            .filter_map(move |r| {
                let k = r.next_undone()?;
                let spec = lib.get(&r.actions[k])?;
                self.first_human(&spec.agents)?;
                Some((r.row, k, spec))
            })
    }

    fn prompt(&self, row: RowRef, expectation: &Expectation) -> Prompt {
        let alternatives = self
            .takeovers(row)
            .filter_map(|(r, _, spec)| {
                let bindings = match self.table.get(r)?.binding.as_ref() {
                    Some(b) => b.grounding.clone(),
                    None => row_groundings(&self.specs(r), self.world, &self.model.bindings(r))
                        .ok()?
                        .into_iter()
                        .next()?,
                };
                Some(Alternative {
                    label: self.label(r),
                    action: spec.name.clone(),
                    bindings: bindings.restrict(spec.params.iter().map(String::as_str)),
                })
            })
            .collect();
        Prompt {
            suggestions: self
                .table
                .rows()
                .iter()
                .map(|r| (r.label.clone(), r.cost))
                .collect(),
            expectation: expectation.clone(),
            alternatives,
        }
    }

    /// Returns true when the model changed and must be queried again.
    fn handle(
        &mut self,
        row: RowRef,
        k: Option<usize>,
        expectation: &Expectation,
        event: Event,
    ) -> Result<bool, TaskError> {
        if self.paused && !matches!(event, Event::Percept(_)) {
            self.log.push(Entry::Stale);
            return Ok(false);
        }
        match event {
            Event::Percept(lits) => {
                match self.world.absorb(&lits) {
                    Consistency::Inconsistent(c) => {
                        self.log.push(Entry::Inconsistent(c));
                        if !self.paused {
                            self.paused = true;
                            self.log.push(Entry::Paused);
                        }
                    }
                    Consistency::Consistent if self.paused => {
                        self.paused = false;
                        self.log.push(Entry::Resumed);
                    }
                    Consistency::Consistent => {}
                }
                Ok(false)
            }
            Event::Ack(ok) => {
                let (Expectation::Robot { agents, .. }, Some(k)) = (expectation, k) else {
                    self.log.push(Entry::Stale);
                    return Ok(false);
                };
                if ok {
                    self.finish_action(row, k, agents.join("+"));
                } else {
                    self.fail_row(row);
                }
                Ok(true)
            }
            Event::Deact(p) => {
                let target = std::iter::once(row)
                    .chain(self.table.rows().iter().map(|r| r.row))
                    .find(|r| {
                        matches!(r.item, Item::Node(_))
                            && self.model.active_processes(*r).first() == Some(&p)
                    });
                match target {
                    Some(r) if self.model.deactivate(r, &p) => {
                        let label = self.label(r);
                        self.log.push(Entry::Deactivated { label, process: p });
                        if r == row {
                            self.dispatched = None;
                        }
                        Ok(true)
                    }
                    _ => {
                        self.log.push(Entry::Stale);
                        Ok(false)
                    }
                }
            }
            Event::Human { action, bindings } => self.human(row, k, expectation, action, bindings),
        }
    }

    fn human(
        &mut self,
        row: RowRef,
        k: Option<usize>,
        expectation: &Expectation,
        action: String,
        bindings: Substitution,
    ) -> Result<bool, TaskError> {
        if let Some(k) = k {
            let spec = self.specs(row)[k];
            let grounding = self.grounding(row);
            if spec.name == action && grounding.merge(&bindings).is_some() {
                if let Some(by) = self.first_human(&spec.agents) {
                    if matches!(expectation, Expectation::Robot { .. }) {
                        self.log.push(Entry::TerminateRobot);
                        self.log.push(Entry::GoToRest);
                    }
                    self.finish_action(row, k, by);
                    return Ok(true);
                }
            }
        }
        let mut options: Vec<(f64, String, RowRef, usize, String)> = self
            .takeovers(row)
            .filter(|(_, _, spec)| spec.name == action)
            .filter(|(r, _, _)| self.grounding(*r).merge(&bindings).is_some())
            .filter(|(r, _, _)| self.model.bindings(*r).merge(&bindings).is_some())
            .filter_map(|(r, j, spec)| {
                let x = self.table.get(r)?;
                Some((x.cost, x.label.clone(), r, j, self.first_human(&spec.agents)?))
            })
            .collect();
        options.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        for (_, label, target, j, human) in options {
            let rebind = self
                .table
                .get(target)
                .is_some_and(|x| x.binding.as_ref().is_none_or(|b| b.assignment[j] != [human.clone()]));
            if rebind {
                let forced = match self.specs(target)[j].agents {
                    AgentSpec::Joint(_) => None,
                    _ => Some((j, human.clone())),
                };
                let fixed = self.model.bindings(target).merge(&self.grounding(target));
                let Some(base) = fixed.and_then(|f| f.merge(&bindings)) else {
                    continue;
                };
                let c = Constraint {
                    bindings: base,
                    forced,
                };
                if !self.ground(target, &c, true)? {
                    continue;
                }
            }
            self.log.push(Entry::TerminateRobot);
            self.log.push(Entry::GoToRest);
            self.log.push(Entry::Switch {
                from: self.table.get(row).map(|x| x.label.clone()),
                to: label,
            });
            if self.table.get(row).is_some_and(|x| !x.is_complete()) {
                self.abandoned.insert(row);
            }
            self.current = Some(target);
            self.dispatched = None;
            self.finish_action(target, j, human);
            return Ok(true);
        }
        self.log.push(Entry::Stale);
        Ok(false)
    }
}
