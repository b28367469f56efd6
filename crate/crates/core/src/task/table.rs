//! The Action-State table: one row per current suggestion.

use super::action::ActionLibrary;
use super::{Candidate, RowRef, TaskError};
use crate::fol::Substitution;

#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub grounding: Substitution,
    pub assignment: Vec<Vec<String>>,
    pub utility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub row: RowRef,
    pub label: String,
    pub graph: String,
    pub cost: f64,
    pub actions: Vec<String>,
    pub done: Vec<bool>,
    pub binding: Option<Binding>,
    pub infeasible: bool,
}

impl Row {
    pub fn next_undone(&self) -> Option<usize> {
        self.done.iter().position(|d| !d)
    }

    pub fn is_complete(&self) -> bool {
        self.done.iter().all(|d| *d)
    }

    pub fn started(&self) -> bool {
        self.done.iter().any(|d| *d)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActionStateTable {
    rows: Vec<Row>,
}

impl ActionStateTable {
    /// Rows for `candidates`, all actions undone. `actions_of` yields the
    /// ordered action names of a row (empty for nodes).
    pub fn build<'a>(
        candidates: &[Candidate],
        lib: &ActionLibrary,
        actions_of: impl Fn(RowRef) -> &'a [String],
    ) -> Result<Self, TaskError> {
        let mut rows = Vec::with_capacity(candidates.len());
        for c in candidates {
            let actions = actions_of(c.row).to_vec();
            if let Some(a) = actions.iter().find(|a| lib.get(a).is_none()) {
                return Err(TaskError::UnknownAction(a.clone()));
            }
            rows.push(Row {
                row: c.row,
                label: c.label.clone(),
                graph: c.graph.clone(),
                cost: c.cost,
                done: vec![false; actions.len()],
                actions,
                binding: None,
                infeasible: false,
            });
        }
        Ok(ActionStateTable { rows })
    }

    /// Keeps done flags and bindings of rows that persist from `previous`.
    pub fn carry_over(&mut self, previous: &ActionStateTable) {
        for r in &mut self.rows {
            if let Some(old) = previous.get(r.row) {
                r.done.clone_from(&old.done);
                r.binding.clone_from(&old.binding);
                r.infeasible = old.infeasible;
            }
        }
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, r: RowRef) -> Option<&Row> {
        self.rows.iter().find(|x| x.row == r)
    }

    pub fn get_mut(&mut self, r: RowRef) -> Option<&mut Row> {
        self.rows.iter_mut().find(|x| x.row == r)
    }

    /// Feasible row of minimum cost, ties broken by label.
    pub fn select_optimal(&self) -> Option<&Row> {
        self.select_where(|_| true)
    }

    pub fn select_where(&self, keep: impl Fn(&Row) -> bool) -> Option<&Row> {
        self.rows
            .iter()
            .filter(|r| !r.infeasible && keep(r))
            .min_by(|a, b| a.cost.total_cmp(&b.cost).then_with(|| a.label.cmp(&b.label)))
    }

    /// First undone action of a grounded row, with its agents.
    pub fn find_next_action(&self, r: RowRef) -> Result<Option<(usize, &[String])>, TaskError> {
        let row = self.get(r).ok_or(TaskError::NotGrounded)?;
        let binding = row.binding.as_ref().ok_or(TaskError::NotGrounded)?;
        Ok(row
            .next_undone()
            .map(|k| (k, binding.assignment[k].as_slice())))
    }

    pub fn mark_done(&mut self, r: RowRef, k: usize) {
        if let Some(row) = self.get_mut(r) {
            row.done[k] = true;
        }
    }
}
