use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::policy::{
    choose_expansion_action, master_rng, rollout, rollout_rng, select_path, simulation_seed, ScoreMode, StopReason,
};
use crate::runtime::report::PhaseClock;
use crate::runtime::{build_report, EchoExtras, Occupancy, PlanConfig, PlanError, PlanOutcome, Planner};
use crate::tree::{PathRecord, SearchTree, StateBuffer};

/// Virtual-loss settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreePConfig {
    pub workers: usize,
    pub r_vl: f64,
    /// Pseudo-count added per pending traversal; `None` for plain virtual loss.
    pub n_vl: Option<f64>,
}

impl Default for TreePConfig {
    fn default() -> Self {
        Self { workers: 1, r_vl: 1.0, n_vl: None }
    }
}

/// Tree parallelization: workers share one tree behind a single lock and
/// repel each other with virtual loss.
///
/// The loss is not subtracted from the stored values. A node's in-flight
/// count holds the number of traversals currently pending below it, and
/// selection reads each child's value with that many losses applied. Removing
/// a traversal's loss is therefore exact and leaves no residue in `V`.
pub struct TreePPlanner<E> {
    env: Arc<E>,
    cfg: PlanConfig,
    tp: TreePConfig,
    record_log: bool,
    log: Vec<(PathRecord, f64)>,
}

struct Shared<S> {
    tree: SearchTree,
    states: StateBuffer<S>,
    rng: ChaCha8Rng,
    tau: u64,
    log: Option<Vec<(PathRecord, f64)>>,
    failed: Option<PlanError>,
}

#[derive(Default)]
struct WorkerStats {
    clock: PhaseClock,
    busy: Duration,
}

impl<E: Environment> TreePPlanner<E> {
    pub fn new(env: Arc<E>, cfg: PlanConfig, tp: TreePConfig) -> Result<Self, PlanError> {
        cfg.validate()?;
        if tp.workers == 0 {
            return Err(PlanError::Config("workers must be >= 1".into()));
        }
        if !(tp.r_vl >= 0.0) || tp.n_vl.is_some_and(|n| !(n >= 0.0)) {
            return Err(PlanError::Config("virtual loss parameters must be >= 0".into()));
        }
        Ok(Self { env, cfg, tp, record_log: false, log: Vec::new() })
    }

    /// Keep the (path, return) sequence of completions of the next runs.
    pub fn record_log(mut self, on: bool) -> Self {
        self.record_log = on;
        self
    }

    /// Completions of the last run in the order they were applied.
    pub fn log(&self) -> &[(PathRecord, f64)] {
        &self.log
    }

    fn score_mode(&self) -> ScoreMode {
        ScoreMode::TreeP { r_vl: self.tp.r_vl, n_vl: self.tp.n_vl }
    }
}

fn lock<S>(m: &Mutex<Shared<S>>) -> MutexGuard<'_, Shared<S>> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl<E: Environment> Planner<E> for TreePPlanner<E> {
    fn name(&self) -> &'static str {
        if self.tp.n_vl.is_some() {
            "treep-pc"
        } else {
            "treep"
        }
    }

    fn config(&self) -> &PlanConfig {
        &self.cfg
    }

    fn config_mut(&mut self) -> &mut PlanConfig {
        &mut self.cfg
    }

    fn plan(&mut self, state: &E::State) -> Result<PlanOutcome, PlanError> {
        self.cfg.validate()?;
        let cfg = self.cfg;
        let env = self.env.as_ref();
        let mode = self.score_mode();
        let start = Instant::now();
        let shared = Mutex::new(Shared {
            tree: SearchTree::new(env.action_count(), cfg.limits, env.is_terminal(state)),
            states: StateBuffer::new(state.clone()),
            rng: master_rng(cfg.policy.rng_seed),
            tau: 0,
            log: self.record_log.then(Vec::new),
            failed: None,
        });
        let attached = Condvar::new();
        let stats: Vec<WorkerStats> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..self.tp.workers)
                .map(|_| s.spawn(|| worker(env, &cfg, mode, &shared, &attached)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("tree-parallel worker panicked")).collect()
        });
        let wall = start.elapsed();
        let shared = shared.into_inner().unwrap_or_else(|p| p.into_inner());
        self.log = shared.log.unwrap_or_default();
        if let Some(e) = shared.failed {
            return Err(e);
        }
        let workers = self.tp.workers as f64;
        let mut clock = PhaseClock::default();
        let mut busy = Duration::ZERO;
        for w in &stats {
            clock.selection += w.clock.selection;
            clock.expansion += w.clock.expansion;
            clock.simulation += w.clock.simulation;
            clock.backprop += w.clock.backprop;
            clock.communication += w.clock.communication;
            busy += w.busy;
        }
        let occupancy = Occupancy {
            expansion: 0.0,
            simulation: busy.as_secs_f64() / (workers * wall.as_secs_f64().max(f64::MIN_POSITIVE)),
        };
        let extras = EchoExtras { n_exp: 0, n_sim: self.tp.workers, r_vl: Some(self.tp.r_vl), n_vl: self.tp.n_vl };
        let phases = clock.times().scaled(1.0 / workers);
        let (best_action, report) = build_report(self.name(), &cfg, &shared.tree, wall, phases, occupancy, extras);
        Ok(PlanOutcome { best_action, report, tree: shared.tree })
    }
}

fn worker<E: Environment>(
    env: &E,
    cfg: &PlanConfig,
    mode: ScoreMode,
    shared: &Mutex<Shared<E::State>>,
    attached: &Condvar,
) -> WorkerStats {
    let mut stats = WorkerStats::default();
    if let Err(e) = worker_loop(env, cfg, mode, shared, attached, &mut stats) {
        let mut g = lock(shared);
        g.failed.get_or_insert(e);
        attached.notify_all();
    }
    stats
}

fn worker_loop<E: Environment>(
    env: &E,
    cfg: &PlanConfig,
    mode: ScoreMode,
    shared: &Mutex<Shared<E::State>>,
    attached: &Condvar,
    stats: &mut WorkerStats,
) -> Result<(), PlanError> {
    let policy = cfg.policy;
    let missing = || PlanError::Internal("missing state".into());
    loop {
        let t = Instant::now();
        let mut g = lock(shared);
        stats.clock.communication += t.elapsed();
        let t = Instant::now();
        let (sel, action) = loop {
            if g.failed.is_some() || g.tau >= cfg.t_max {
                return Ok(());
            }
            let Shared { tree, rng, .. } = &mut *g;
            let sel = select_path(tree, mode, &policy, rng);
            if sel.stop == StopReason::Stall {
                g = attached.wait(g).unwrap_or_else(|p| p.into_inner());
                continue;
            }
            let action = match sel.stop {
                StopReason::Expand => Some(
                    choose_expansion_action(tree, sel.leaf(), rng)
                        .ok_or_else(|| PlanError::Internal("expandable node without open actions".into()))?,
                ),
                _ => None,
            };
            break (sel, action);
        };
        let task = g.tau;
        g.tau += 1;
        let mut path = PathRecord::new(sel.nodes, task);
        g.tree.incomplete_update(&path);
        stats.clock.selection += t.elapsed();

        if let Some(action) = action {
            let leaf = path.leaf();
            g.tree.reserve(leaf, action)?;
            let state = g.states.duplicate(leaf).ok_or_else(missing)?;
            drop(g);
            let t = Instant::now();
            let out = env.step(&state, action)?;
            stats.clock.expansion += t.elapsed();
            g = lock(shared);
            let child = g.tree.expand_attach(leaf, action, out.reward, out.terminal)?;
            g.states.insert(child, out.next_state);
            g.tree.incomplete_update(&PathRecord::new(vec![child], task));
            path.nodes.push(child);
            attached.notify_all();
        }

        let leaf = path.leaf();
        let ret = if g.tree.stats(leaf).terminal {
            0.0
        } else {
            let state = g.states.duplicate(leaf).ok_or_else(missing)?;
            drop(g);
            let t = Instant::now();
            let r = rollout(env, &state, &policy, &mut rollout_rng(simulation_seed(policy.rng_seed, task)))?;
            let took = t.elapsed();
            stats.clock.simulation += took;
            stats.busy += took;
            let t = Instant::now();
            g = lock(shared);
            stats.clock.communication += t.elapsed();
            r
        };
        let t = Instant::now();
        g.tree.complete_update(&path, ret, policy.gamma)?;
        if let Some(log) = g.log.as_mut() {
            log.push((path, ret));
        }
        stats.clock.backprop += t.elapsed();
        drop(g);
    }
}
