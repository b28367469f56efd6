//! Scenario bundles: a `bundle.toml` manifest naming the model files,
//! action library, world, agents and an optional trace.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::fol::Substitution;
use crate::graph::{AndOrGraph, ParseError, ParsedGraph};
use crate::hier::{load_designs, HierError, HierModel};
use crate::task::{
    parse_actions, parse_trace, run_cooperation, ActionLibrary, EventSource, FlatModel, Query,
    RowRef, RunOptions, TaskError, TaskModel, TimedEvent, Transcript,
};
use crate::world::{parse_agents, parse_world, Agents, WorldState};

pub const MANIFEST: &str = "bundle.toml";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BundleError {
    #[error("{file}: {message}")]
    Io { file: PathBuf, message: String },
    #[error("{file}: {message}")]
    Manifest { file: PathBuf, message: String },
    #[error("{file}: {error}")]
    Parse { file: PathBuf, error: ParseError },
    #[error(transparent)]
    Hier(#[from] HierError),
    #[error("{file}: line {line}: hyper-arc `{arc}` uses unknown action `{action}`")]
    UnknownAction {
        file: PathBuf,
        line: usize,
        arc: String,
        action: String,
    },
    #[error("action `{action}` names unknown agent `{agent}`")]
    UnknownAgent { action: String, agent: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    root: PathBuf,
    actions: PathBuf,
    world: PathBuf,
    agents: PathBuf,
    trace: Option<PathBuf>,
}

/// A fully cross-checked scenario. Models are rebuilt per run so a bundle
/// can be replayed any number of times.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub dir: PathBuf,
    pub root_file: PathBuf,
    pub root: String,
    pub graphs: BTreeMap<String, ParsedGraph>,
    pub lib: ActionLibrary,
    pub world: WorldState,
    pub agents: Agents,
    pub trace: Option<Vec<TimedEvent>>,
}

fn read(file: &Path) -> Result<String, BundleError> {
    fs::read_to_string(file).map_err(|e| BundleError::Io {
        file: file.to_path_buf(),
        message: e.to_string(),
    })
}

fn parsed<T>(file: &Path, r: Result<T, ParseError>) -> Result<T, BundleError> {
    r.map_err(|error| BundleError::Parse {
        file: file.to_path_buf(),
        error,
    })
}

/// Loads a bundle from its manifest or from the directory holding it.
pub fn parse_bundle(path: &Path) -> Result<Bundle, BundleError> {
    let manifest_file = if path.is_dir() {
        path.join(MANIFEST)
    } else {
        path.to_path_buf()
    };
    let dir = manifest_file.parent().unwrap_or(Path::new(".")).to_path_buf();
    let manifest: Manifest =
        toml::from_str(&read(&manifest_file)?).map_err(|e| BundleError::Manifest {
            file: manifest_file.clone(),
            message: e.message().to_string(),
        })?;

    let root_file = dir.join(&manifest.root);
    let (root, graphs) = load_designs(&root_file)?;
    let actions_file = dir.join(&manifest.actions);
    let lib = parsed(&actions_file, parse_actions(&read(&actions_file)?))?;
    let world_file = dir.join(&manifest.world);
    let world = parsed(&world_file, parse_world(&read(&world_file)?))?;
    let agents_file = dir.join(&manifest.agents);
    let agents = parsed(&agents_file, parse_agents(&read(&agents_file)?))?;
    let trace = match &manifest.trace {
        Some(t) => {
            let file = dir.join(t);
            Some(parsed(&file, parse_trace(&read(&file)?))?)
        }
        None => None,
    };

    let bundle = Bundle {
        root_file,
        dir,
        root,
        graphs,
        lib,
        world,
        agents,
        trace,
    };
    bundle.cross_check()?;
    bundle.model()?;
    Ok(bundle)
}

impl Bundle {
    pub fn is_hierarchical(&self) -> bool {
        self.graphs.values().any(|g| !g.transitions.is_empty())
    }

    fn graph_file(&self, id: &str) -> PathBuf {
        if id == self.root {
            self.root_file.clone()
        } else {
            self.root_file.with_file_name(format!("{id}.{}", crate::hier::GRAPH_EXT))
        }
    }

    fn cross_check(&self) -> Result<(), BundleError> {
        for (id, g) in &self.graphs {
            for arc in &g.spec.arcs {
                if let Some(action) = arc.actions.iter().find(|a| self.lib.get(a).is_none()) {
                    return Err(BundleError::UnknownAction {
                        file: self.graph_file(id),
                        line: g.spec.lines.get(&arc.id).copied().unwrap_or(0),
                        arc: arc.id.clone(),
                        action: action.clone(),
                    });
                }
            }
        }
        for a in self.lib.iter() {
            if let Some(agent) = a.agents.agents().into_iter().find(|x| self.agents.get(x).is_none()) {
                return Err(BundleError::UnknownAgent {
                    action: a.name.clone(),
                    agent: agent.to_string(),
                });
            }
        }
        Ok(())
    }

    /// A fresh runtime model in its initial state.
    pub fn model(&self) -> Result<ScenarioModel, BundleError> {
        Ok(if self.is_hierarchical() {
            ScenarioModel::Hier(Box::new(HierModel::from_designs(&self.root, &self.graphs)?))
        } else {
            let g = AndOrGraph::from_spec(&self.graphs[&self.root].spec).map_err(HierError::from)?;
            ScenarioModel::Flat(FlatModel::new(g))
        })
    }

    /// Runs the scenario against `source` on a copy of the initial world.
    pub fn run(&self, source: &mut dyn EventSource, opts: &RunOptions) -> Result<Transcript, TaskError> {
        let mut model = self.model().expect("validated at load");
        let mut world = self.world.clone();
        run_cooperation(&mut model, &self.lib, &self.agents, &mut world, source, opts)
    }
}

/// Either kind of task representation behind one type.
#[derive(Debug, Clone)]
pub enum ScenarioModel {
    Flat(FlatModel),
    Hier(Box<HierModel>),
}

macro_rules! delegate {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            ScenarioModel::Flat($m) => $e,
            ScenarioModel::Hier($m) => $e,
        }
    };
}

impl TaskModel for ScenarioModel {
    fn describe(&self) -> String {
        delegate!(self, m => m.describe())
    }

    fn query(&mut self) -> Query {
        delegate!(self, m => m.query())
    }

    fn actions(&self, row: RowRef) -> &[String] {
        delegate!(self, m => m.actions(row))
    }

    fn active_processes(&self, row: RowRef) -> Vec<String> {
        delegate!(self, m => m.active_processes(row))
    }

    fn deactivate(&mut self, row: RowRef, process: &str) -> bool {
        delegate!(self, m => m.deactivate(row, process))
    }

    fn action_done(&mut self, row: RowRef, index: usize) {
        delegate!(self, m => m.action_done(row, index))
    }

    fn complete(&mut self, row: RowRef) {
        delegate!(self, m => m.complete(row))
    }

    fn block(&mut self, row: RowRef) {
        match self {
            ScenarioModel::Flat(m) => m.block(row),
            ScenarioModel::Hier(m) => TaskModel::block(m.as_mut(), row),
        }
    }

    fn bindings(&self, row: RowRef) -> Substitution {
        delegate!(self, m => m.bindings(row))
    }
}
