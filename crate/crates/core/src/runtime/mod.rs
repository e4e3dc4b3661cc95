//! Master-worker parallel search.
//!
//! The master owns the tree, the state buffer and the generator. Expansion and
//! simulation run on two worker pools. Every dispatched simulation is counted
//! in the `in_flight` statistic of its path until its return arrives, and
//! selection scores add those counts to the visit counts.

mod master;
pub mod pool;
pub mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{ActionId, EnvError, Environment};
use crate::policy::{choose_expansion_action, select_path, PolicyConfig, PolicyError, ScoreMode, Selection, StopReason};
use crate::tree::{NodeId, PathRecord, SearchTree, TreeError, TreeLimits};

pub use master::{Event, EventKind, RuntimeMode, WuUctPlanner};
pub use pool::{
    expansion_worker_loop, simulation_worker_loop, ExpansionResult, ExpansionTask, SimulationResult,
    SimulationTask, TaskFailure, WorkerPool,
};
pub use report::{ConfigEcho, Occupancy, PhaseTimes, RunReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("worker task failed: {0}")]
    Task(#[from] TaskFailure),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
}

/// Settings shared by every planner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    /// Rollout budget per planning call.
    pub t_max: u64,
    pub policy: PolicyConfig,
    pub limits: TreeLimits,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self { t_max: 128, policy: PolicyConfig::default(), limits: TreeLimits::default() }
    }
}

impl PlanConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.t_max == 0 {
            return Err(PlanError::Config("t_max must be >= 1".into()));
        }
        if self.limits.max_children == 0 {
            return Err(PlanError::Config("max_children must be >= 1".into()));
        }
        self.policy.validate()?;
        Ok(())
    }
}

/// Result of one planning call.
#[derive(Clone, Debug)]
pub struct PlanOutcome {
    /// `None` when the root is terminal.
    pub best_action: Option<ActionId>,
    pub report: RunReport,
    pub tree: SearchTree,
}

pub trait Planner<E: Environment> {
    fn name(&self) -> &'static str;
    fn config(&self) -> &PlanConfig;
    fn config_mut(&mut self) -> &mut PlanConfig;
    fn plan(&mut self, state: &E::State) -> Result<PlanOutcome, PlanError>;
}

/// Performs `k` consecutive selections on a tree whose statistics never
/// receive a completion, applying the dispatch bookkeeping the runtime would:
/// an expansion claims its action, and with `track_in_flight` every dispatched
/// path gets its in-flight counts raised.
pub fn frozen_selections<R: rand::Rng + ?Sized>(
    tree: &mut SearchTree,
    k: usize,
    track_in_flight: bool,
    cfg: &PolicyConfig,
    rng: &mut R,
) -> Result<Vec<Selection>, PlanError> {
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let sel = select_path(tree, ScoreMode::WuUct, cfg, rng);
        match sel.stop {
            StopReason::Expand => {
                let a = choose_expansion_action(tree, sel.leaf(), rng)
                    .ok_or_else(|| PlanError::Internal("expandable node without open actions".into()))?;
                tree.reserve(sel.leaf(), a)?;
            }
            StopReason::Simulate | StopReason::Terminal => {
                if track_in_flight {
                    tree.incomplete_update(&PathRecord::new(sel.nodes.clone(), i as u64));
                }
            }
            StopReason::Stall => {}
        }
        out.push(sel);
    }
    Ok(out)
}

/// Root child of `tree` reached by the best root action and its value.
pub(crate) fn best_of(tree: &SearchTree) -> (Option<ActionId>, f64) {
    let a = tree.best_root_action();
    let v = a.and_then(|a| tree.child(tree.root(), a)).map_or(0.0, |c: NodeId| tree.stats(c).value);
    (a, v)
}

/// Workers and extra knobs echoed into a report.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct EchoExtras {
    pub n_exp: usize,
    pub n_sim: usize,
    pub r_vl: Option<f64>,
    pub n_vl: Option<f64>,
}

pub(crate) fn build_report(
    name: &str,
    cfg: &PlanConfig,
    tree: &SearchTree,
    wall: std::time::Duration,
    phase_ms: PhaseTimes,
    occupancy: Occupancy,
    extras: EchoExtras,
) -> (Option<ActionId>, RunReport) {
    let (best_action, value) = best_of(tree);
    let report = RunReport {
        planner: name.to_string(),
        best_action: best_action.map(|a| a.0),
        value,
        rollouts: tree.stats(tree.root()).visits,
        wall_ms: report::ms(wall),
        phase_ms,
        occupancy,
        seed: cfg.policy.rng_seed,
        config: ConfigEcho {
            t_max: cfg.t_max,
            n_exp: extras.n_exp,
            n_sim: extras.n_sim,
            policy: cfg.policy,
            limits: cfg.limits,
            serialize: false,
            r_vl: extras.r_vl,
            n_vl: extras.n_vl,
        },
        max_root_in_flight: 0,
    };
    (best_action, report)
}
