//! Decision trees over groundings and agent assignments of one row.

use std::collections::BTreeSet;

use super::action::{ActionSpec, AgentSpec};
use super::TaskError;
use crate::fol::Substitution;
use crate::world::{Agents, Outcome, WorldState};

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub grounding: Substitution,
    /// Agents responsible for each action of the row, by action index.
    pub assignment: Vec<Vec<String>>,
    /// Simulated outcomes, up to and including the first failure.
    pub results: Vec<Outcome>,
    pub utility: f64,
}

impl Branch {
    pub fn total_millis(&self) -> u64 {
        self.results.iter().map(|o| o.millis).sum()
    }

    pub fn succeeded(&self) -> bool {
        self.utility > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Grounded(usize),
    RowInfeasible,
}

/// Restrictions imposed when a human has already started a row.
#[derive(Debug, Clone, Default)]
pub struct Constraint {
    pub bindings: Substitution,
    pub forced: Option<(usize, String)>,
}

/// Every grounding of the row's variables that is consistent with the
/// current world. Preconditions produced by an earlier action of the row
/// are left to the simulation, since they cannot hold yet.
pub fn row_groundings(
    actions: &[&ActionSpec],
    world: &WorldState,
    fixed: &Substitution,
) -> Result<Vec<Substitution>, TaskError> {
    let mut produced = BTreeSet::new();
    let mut removed = BTreeSet::new();
    let mut partial = vec![fixed.clone()];
    let mut negatives = Vec::new();
    let mut vars = BTreeSet::new();
    for a in actions {
        vars.extend(a.params.iter().cloned());
        for l in a.pre.literals() {
            if l.negated {
                if !removed.contains(&(l.predicate.clone(), l.arity())) {
                    negatives.push(l.clone());
                }
                continue;
            }
            if produced.contains(&(l.predicate.clone(), l.arity())) {
                continue;
            }
            partial = partial
                .iter()
                .flat_map(|s| world.query_with(l, s))
                .collect();
        }
        for l in a.add.literals() {
            produced.insert((l.predicate.clone(), l.arity()));
        }
        for l in a.del.literals() {
            removed.insert((l.predicate.clone(), l.arity()));
        }
    }
    for v in &vars {
        if partial.iter().all(|s| s.get(v).is_none()) {
            return Err(TaskError::NoGrounding(v.clone()));
        }
    }
    let mut out: Vec<Substitution> = partial
        .into_iter()
        .filter(|s| {
            negatives
                .iter()
                .all(|l| !l.apply(s).is_grounded() || world.holds(&l.apply(s)))
        })
        .map(|s| s.restrict(vars.iter().map(String::as_str)))
        .collect();
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(TaskError::NoGrounding(
            vars.into_iter().next().unwrap_or_default(),
        ));
    }
    Ok(out)
}

/// Agent assignments for the row. A choice set shared by several actions
/// is decided once, so the same agent carries all of them.
pub fn assignments(actions: &[&ActionSpec]) -> Vec<Vec<Vec<String>>> {
    let mut sets: Vec<&Vec<String>> = Vec::new();
    for a in actions {
        if let AgentSpec::Any(v) = &a.agents {
            if !sets.contains(&v) {
                sets.push(v);
            }
        }
    }
    let mut combos: Vec<Vec<&str>> = vec![Vec::new()];
    for set in &sets {
        combos = combos
            .iter()
            .flat_map(|c| {
                set.iter().map(move |agent| {
                    let mut next = c.clone();
                    next.push(agent.as_str());
                    next
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .map(|choice| {
            actions
                .iter()
                .map(|a| match &a.agents {
                    AgentSpec::Any(v) => {
                        let k = sets.iter().position(|s| *s == v).unwrap();
                        vec![choice[k].to_string()]
                    }
                    AgentSpec::Only(x) => vec![x.clone()],
                    AgentSpec::Joint(v) => v.clone(),
                })
                .collect()
        })
        .collect()
}

/// Cartesian product of assignments (outer) and groundings (inner).
pub fn generate_decision_tree(
    actions: &[&ActionSpec],
    world: &WorldState,
    constraint: &Constraint,
) -> Result<Vec<Branch>, TaskError> {
    let groundings = row_groundings(actions, world, &constraint.bindings)?;
    let mut out = Vec::new();
    for assignment in assignments(actions) {
        if let Some((idx, agent)) = &constraint.forced {
            if assignment.get(*idx).is_some_and(|a| a != std::slice::from_ref(agent)) {
                continue;
            }
        }
        for g in &groundings {
            out.push(Branch {
                grounding: g.clone(),
                assignment: assignment.clone(),
                results: Vec::new(),
                utility: 0.0,
            });
        }
    }
    Ok(out)
}

/// Simulates all branches level by level: the k-th action of every live
/// branch runs before any (k+1)-th action. A branch stops at its first
/// failure; surviving branches score `1 / total seconds`.
pub fn evaluate_decision_tree(
    branches: &mut [Branch],
    actions: &[&ActionSpec],
    agents: &Agents,
    world: &WorldState,
) -> Result<(), TaskError> {
    let mut worlds: Vec<Option<WorldState>> = vec![Some(world.clone()); branches.len()];
    for b in branches.iter_mut() {
        b.results.clear();
        b.utility = 0.0;
    }
    for (k, action) in actions.iter().enumerate() {
        for (b, branch) in branches.iter_mut().enumerate() {
            let Some(w) = worlds[b].as_ref() else { continue };
            let ground = action.ground(&branch.grounding);
            let outcome = match &ground {
                Some(g) => agents.simulate(g, &branch.grounding, &branch.assignment[k], w)?,
                None => Outcome::FAILED,
            };
            branch.results.push(outcome);
            worlds[b] = match (outcome.success, ground) {
                (true, Some(g)) => w.apply_effects(&g).ok(),
                _ => None,
            };
        }
    }
    for (b, branch) in branches.iter_mut().enumerate() {
        let total = branch.total_millis();
        if worlds[b].is_some() && total > 0 {
            branch.utility = 1000.0 / total as f64;
        }
    }
    Ok(())
}

/// The first branch of maximal positive utility, or `RowInfeasible`.
pub fn update_optimal_state(branches: &[Branch]) -> Decision {
    let mut best: Option<usize> = None;
    for (i, b) in branches.iter().enumerate() {
        if b.utility > 0.0 && best.is_none_or(|j| b.utility > branches[j].utility) {
            best = Some(i);
        }
    }
    best.map_or(Decision::RowInfeasible, Decision::Grounded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::action::parse_actions;
    use crate::world::{parse_agents, parse_world};

    fn setup() -> (crate::task::ActionLibrary, WorldState, Agents) {
        let lib = parse_actions(
            "ACTION approach PARAMS ?y AGENTS any(R1,R2) PRE Leg(?y)\n\
             ACTION transport PARAMS ?y,?x AGENTS any(R1,R2) PRE Leg(?y),Tabletop(?x) ADD Placed(?y,?x)\n",
        )
        .unwrap();
        let world = parse_world(
            "OBJ T TYPE Tabletop POSE 0 0 0\nOBJ A TYPE Leg POSE 0.5 0 0\nOBJ B TYPE Leg POSE 0.2 0 0\n",
        )
        .unwrap();
        let agents = parse_agents(
            "AGENT R1 KIND robot\nDUR approach 0.1\nDUR transport 0.1 PERM 1.0\n\
             AGENT R2 KIND robot\nDUR approach 0.2\nDUR transport 0.2 PERM 1.0\n",
        )
        .unwrap();
        (lib, world, agents)
    }

    #[test]
    fn four_branches_and_best_is_b_with_r1() {
        let (lib, world, agents) = setup();
        let actions = [lib.get("approach").unwrap(), lib.get("transport").unwrap()];
        let mut tree = generate_decision_tree(&actions, &world, &Constraint::default()).unwrap();
        assert_eq!(tree.len(), 4);
        evaluate_decision_tree(&mut tree, &actions, &agents, &world).unwrap();
        let totals: Vec<u64> = tree.iter().map(Branch::total_millis).collect();
        assert_eq!(totals, vec![700, 400, 900, 600]);
        assert_eq!(update_optimal_state(&tree), Decision::Grounded(1));
        assert_eq!(tree[1].grounding.get("y"), Some("B"));
        assert_eq!(tree[1].assignment[0], vec!["R1"]);
        assert_eq!(tree[1].utility, 2.5);
    }

    #[test]
    fn product_counts() {
        let (lib, mut world, _) = setup();
        world.add_object("C", "Leg", None);
        let actions = [lib.get("approach").unwrap(), lib.get("transport").unwrap()];
        let tree = generate_decision_tree(&actions, &world, &Constraint::default()).unwrap();
        assert_eq!(tree.len(), 6);
        let single = parse_actions("ACTION s PARAMS ?x AGENTS only(H) PRE Tabletop(?x)\n").unwrap();
        let a = [single.get("s").unwrap()];
        assert_eq!(generate_decision_tree(&a, &world, &Constraint::default()).unwrap().len(), 1);
    }

    #[test]
    fn missing_candidates_is_no_grounding() {
        let (_, world, _) = setup();
        let lib = parse_actions("ACTION s PARAMS ?x AGENTS only(H) PRE Screw(?x)\n").unwrap();
        let a = [lib.get("s").unwrap()];
        assert!(matches!(
            generate_decision_tree(&a, &world, &Constraint::default()),
            Err(TaskError::NoGrounding(_))
        ));
    }

    #[test]
    fn all_failing_is_row_infeasible() {
        let (lib, world, _) = setup();
        let agents = parse_agents("AGENT R1 KIND robot\nFAILS approach *\nDUR approach 1\nAGENT R2 KIND robot\n").unwrap();
        let actions = [lib.get("approach").unwrap(), lib.get("transport").unwrap()];
        let mut tree = generate_decision_tree(&actions, &world, &Constraint::default()).unwrap();
        evaluate_decision_tree(&mut tree, &actions, &agents, &world).unwrap();
        assert!(tree.iter().all(|b| b.utility == 0.0 && b.results.len() == 1));
        assert_eq!(update_optimal_state(&tree), Decision::RowInfeasible);
    }

    #[test]
    fn constraints_filter_branches() {
        let (lib, world, _) = setup();
        let actions = [lib.get("approach").unwrap(), lib.get("transport").unwrap()];
        let c = Constraint {
            bindings: "?y=A".parse().unwrap(),
            forced: Some((0, "R2".into())),
        };
        let tree = generate_decision_tree(&actions, &world, &c).unwrap();
        assert_eq!(tree.len(), 1);
        assert_eq!(tree[0].assignment[1], vec!["R2"]);
    }
}
