//! Environment and planner construction from a [`BenchConfig`].

use std::sync::Arc;

use wuuct_core::env::{ActionId, DelayWrapper, EnvError, Environment, StepOutcome, SyntheticState, TileState};
use wuuct_core::runtime::{PlanConfig, Planner, RuntimeMode, WuUctPlanner};
use wuuct_core::{
    LeafPPlanner, RootPPlanner, SequentialPlanner, SyntheticTreeEnv, TilePuzzleEnv, TreePConfig, TreePPlanner,
};

use crate::config::{BenchConfig, EnvParams, PlannerKind};
use crate::BenchError;

/// Either benchmark environment behind one type, so planners can be boxed.
#[derive(Clone, Debug)]
pub enum BenchEnv {
    Synthetic(SyntheticTreeEnv),
    Tile(TilePuzzleEnv),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BenchState {
    Synthetic(SyntheticState),
    Tile(TileState),
}

fn mismatch() -> EnvError {
    EnvError::Params("state does not belong to this environment".into())
}

impl Environment for BenchEnv {
    type State = BenchState;

    fn name(&self) -> &str {
        match self {
            BenchEnv::Synthetic(e) => e.name(),
            BenchEnv::Tile(e) => e.name(),
        }
    }

    fn action_count(&self) -> usize {
        match self {
            BenchEnv::Synthetic(e) => e.action_count(),
            BenchEnv::Tile(e) => e.action_count(),
        }
    }

    fn initial_state(&self) -> BenchState {
        match self {
            BenchEnv::Synthetic(e) => BenchState::Synthetic(e.initial_state()),
            BenchEnv::Tile(e) => BenchState::Tile(e.initial_state()),
        }
    }

    fn is_terminal(&self, state: &BenchState) -> bool {
        match (self, state) {
            (BenchEnv::Synthetic(e), BenchState::Synthetic(s)) => e.is_terminal(s),
            (BenchEnv::Tile(e), BenchState::Tile(s)) => e.is_terminal(s),
            _ => true,
        }
    }

    fn step(&self, state: &BenchState, action: ActionId) -> Result<StepOutcome<BenchState>, EnvError> {
        match (self, state) {
            (BenchEnv::Synthetic(e), BenchState::Synthetic(s)) => {
                e.step(s, action).map(|o| wrap(o, BenchState::Synthetic))
            }
            (BenchEnv::Tile(e), BenchState::Tile(s)) => e.step(s, action).map(|o| wrap(o, BenchState::Tile)),
            _ => Err(mismatch()),
        }
    }

    fn encode_state(&self, state: &BenchState) -> Vec<u8> {
        match (self, state) {
            (BenchEnv::Synthetic(e), BenchState::Synthetic(s)) => e.encode_state(s),
            (BenchEnv::Tile(e), BenchState::Tile(s)) => e.encode_state(s),
            _ => Vec::new(),
        }
    }

    fn decode_state(&self, bytes: &[u8]) -> Result<BenchState, EnvError> {
        match self {
            BenchEnv::Synthetic(e) => e.decode_state(bytes).map(BenchState::Synthetic),
            BenchEnv::Tile(e) => e.decode_state(bytes).map(BenchState::Tile),
        }
    }
}

fn wrap<S>(o: StepOutcome<S>, f: fn(S) -> BenchState) -> StepOutcome<BenchState> {
    StepOutcome { next_state: f(o.next_state), reward: o.reward, terminal: o.terminal }
}

pub type Env = DelayWrapper<BenchEnv>;
pub type BoxedPlanner = Box<dyn Planner<Env>>;

pub fn build_env(cfg: &BenchConfig) -> Result<Arc<Env>, BenchError> {
    let inner = match cfg.env {
        EnvParams::Synthetic { branching, depth, seed } => {
            BenchEnv::Synthetic(SyntheticTreeEnv::new(branching, depth, seed).map_err(config_err)?)
        }
        EnvParams::Tile { width, height, colors, step_budget, goal, seed } => BenchEnv::Tile(
            TilePuzzleEnv::generate(width, height, colors, step_budget, goal, seed).map_err(config_err)?,
        ),
    };
    Ok(Arc::new(DelayWrapper::new(inner, cfg.step_delay()).with_mode(cfg.delay_mode.into())))
}

fn config_err(e: EnvError) -> BenchError {
    BenchError::Config(format!("env: {e}"))
}

/// Worker threads a planner would start for a grid cell.
pub fn thread_count(kind: PlannerKind, n_exp: usize, n_sim: usize) -> usize {
    match kind {
        PlannerKind::Sequential => 0,
        PlannerKind::WuUct | PlannerKind::Naive => n_exp + n_sim,
        _ => n_sim,
    }
}

/// Upper bound on worker threads from `WUUCT_THREADS_CAP`, if set.
pub fn threads_cap() -> Option<usize> {
    std::env::var("WUUCT_THREADS_CAP").ok().and_then(|v| v.trim().parse().ok())
}

/// Planner for one grid cell. Baselines without an expansion pool ignore
/// `n_exp` and use `n_sim` as their worker count.
pub fn build_planner(
    kind: PlannerKind,
    env: &Arc<Env>,
    plan: PlanConfig,
    n_exp: usize,
    n_sim: usize,
    r_vl: f64,
    n_vl: Option<f64>,
) -> Result<BoxedPlanner, BenchError> {
    let env = Arc::clone(env);
    let p: BoxedPlanner = match kind {
        PlannerKind::Sequential => Box::new(SequentialPlanner::new(env, plan)?),
        PlannerKind::WuUct => Box::new(WuUctPlanner::new(env, plan, n_exp, n_sim)?),
        PlannerKind::Naive => {
            let mode = RuntimeMode { naive: true, ..Default::default() };
            Box::new(WuUctPlanner::with_mode(env, plan, n_exp, n_sim, mode)?)
        }
        PlannerKind::Leafp => Box::new(LeafPPlanner::new(env, plan, n_sim)?),
        PlannerKind::Treep => Box::new(TreePPlanner::new(env, plan, TreePConfig { workers: n_sim, r_vl, n_vl: None })?),
        PlannerKind::TreepPc => {
            let n_vl = n_vl.unwrap_or(1.0);
            Box::new(TreePPlanner::new(env, plan, TreePConfig { workers: n_sim, r_vl, n_vl: Some(n_vl) })?)
        }
        PlannerKind::Rootp => Box::new(RootPPlanner::new(env, plan, n_sim)?),
    };
    Ok(p)
}
