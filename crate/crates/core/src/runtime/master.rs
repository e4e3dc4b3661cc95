use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crossbeam_channel::select;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pool::{expansion_pool, simulation_pool, ExpansionPool, ExpansionResult, SimulationPool, SimulationResult};
use super::report::{ms, PhaseClock};
use super::{best_of, ConfigEcho, Occupancy, PlanConfig, PlanError, PlanOutcome, Planner, RunReport};
use crate::env::Environment;
use crate::policy::{choose_expansion_action, master_rng, select_path, simulation_seed, ScoreMode, StopReason};
use crate::runtime::pool::{ExpansionTask, SimulationTask};
use crate::tree::{NodeId, PathRecord, SearchTree, StateBuffer};

/// Variants of the master loop.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuntimeMode {
    /// At most one task in flight at any time.
    pub serialize: bool,
    /// Skip in-flight tracking: concurrent selections only see completed
    /// statistics.
    pub naive: bool,
    /// Keep a log of every in-flight increment and completion.
    pub record_events: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Incomplete,
    Complete,
}

/// One in-flight bookkeeping step and the path's counts right after it.
#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub nodes: Vec<NodeId>,
    pub in_flight_after: Vec<u64>,
}

struct Pools<S> {
    exp: ExpansionPool<S>,
    sim: SimulationPool<S>,
}

/// WU-UCT planner; with [`RuntimeMode::naive`] the same runtime without
/// in-flight tracking.
pub struct WuUctPlanner<E: Environment> {
    env: Arc<E>,
    cfg: PlanConfig,
    n_exp: usize,
    n_sim: usize,
    mode: RuntimeMode,
    pools: Option<Pools<E::State>>,
    events: Vec<Event>,
}

impl<E: Environment> WuUctPlanner<E> {
    pub fn new(env: Arc<E>, cfg: PlanConfig, n_exp: usize, n_sim: usize) -> Result<Self, PlanError> {
        Self::with_mode(env, cfg, n_exp, n_sim, RuntimeMode::default())
    }

    pub fn with_mode(
        env: Arc<E>,
        cfg: PlanConfig,
        n_exp: usize,
        n_sim: usize,
        mode: RuntimeMode,
    ) -> Result<Self, PlanError> {
        if n_exp == 0 || n_sim == 0 {
            return Err(PlanError::Config(format!("worker counts must be >= 1, got n_exp={n_exp} n_sim={n_sim}")));
        }
        cfg.validate()?;
        Ok(Self { env, cfg, n_exp, n_sim, mode, pools: None, events: Vec::new() })
    }

    pub fn mode(&self) -> RuntimeMode {
        self.mode
    }

    /// Event log of the last run (empty unless recording was enabled).
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    fn pools(&mut self) -> &Pools<E::State> {
        let (env, n_exp, n_sim) = (&self.env, self.n_exp, self.n_sim);
        self.pools.get_or_insert_with(|| Pools {
            exp: expansion_pool(Arc::clone(env), n_exp),
            sim: simulation_pool(Arc::clone(env), n_sim),
        })
    }
}

impl<E: Environment> Planner<E> for WuUctPlanner<E> {
    fn name(&self) -> &'static str {
        if self.mode.naive {
            "naive"
        } else {
            "wu-uct"
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
        let mode = self.mode;
        let (n_exp, n_sim) = (self.n_exp, self.n_sim);
        let env = Arc::clone(&self.env);
        let name = self.name();
        self.pools();
        let pools = self.pools.as_ref().expect("pools spawned");
        let mut run = Run {
            cfg,
            mode,
            n_exp,
            n_sim,
            pools,
            tree: SearchTree::new(env.action_count(), cfg.limits, env.is_terminal(state)),
            states: StateBuffer::new(state.clone()),
            rng: master_rng(cfg.policy.rng_seed),
            pending_exp: HashMap::new(),
            pending_sim: HashMap::new(),
            tau: 0,
            t_complete: 0,
            clock: PhaseClock::default(),
            busy_exp: Duration::ZERO,
            busy_sim: Duration::ZERO,
            max_root_in_flight: 0,
            events: Vec::new(),
        };
        let start = Instant::now();
        let result = run.execute();
        let wall = start.elapsed();
        let Run { tree, events, clock, busy_exp, busy_sim, t_complete, max_root_in_flight, .. } = run;
        self.events = events;
        if let Err(e) = result {
            // Results of abandoned tasks must not leak into the next run.
            self.pools = None;
            return Err(e);
        }
        let (best_action, value) = best_of(&tree);
        let wall_s = wall.as_secs_f64().max(f64::MIN_POSITIVE);
        let report = RunReport {
            planner: name.to_string(),
            best_action: best_action.map(|a| a.0),
            value,
            rollouts: t_complete,
            wall_ms: ms(wall),
            phase_ms: clock.times(),
            occupancy: Occupancy {
                expansion: busy_exp.as_secs_f64() / (n_exp as f64 * wall_s),
                simulation: busy_sim.as_secs_f64() / (n_sim as f64 * wall_s),
            },
            seed: cfg.policy.rng_seed,
            config: ConfigEcho {
                t_max: cfg.t_max,
                n_exp,
                n_sim,
                policy: cfg.policy,
                limits: cfg.limits,
                serialize: mode.serialize,
                r_vl: None,
                n_vl: None,
            },
            max_root_in_flight,
        };
        Ok(PlanOutcome { best_action, report, tree })
    }
}

enum Want {
    Expansion,
    Simulation,
    Any,
}

enum Message<S> {
    Expansion(ExpansionResult<S>),
    Simulation(SimulationResult),
}

struct Run<'p, S> {
    cfg: PlanConfig,
    mode: RuntimeMode,
    n_exp: usize,
    n_sim: usize,
    pools: &'p Pools<S>,
    tree: SearchTree,
    states: StateBuffer<S>,
    rng: ChaCha8Rng,
    pending_exp: HashMap<u64, PathRecord>,
    pending_sim: HashMap<u64, PathRecord>,
    /// Next task index to hand out.
    tau: u64,
    t_complete: u64,
    clock: PhaseClock,
    busy_exp: Duration,
    busy_sim: Duration,
    max_root_in_flight: u64,
    events: Vec<Event>,
}

impl<S: Clone + Send + 'static> Run<'_, S> {
    fn in_flight(&self) -> usize {
        self.pending_exp.len() + self.pending_sim.len()
    }

    fn execute(&mut self) -> Result<(), PlanError> {
        let t_max = self.cfg.t_max;
        loop {
            let draining = self.tau >= t_max;
            let busy = self.in_flight();
            if draining && busy == 0 {
                break;
            }
            let exp_full = self.pending_exp.len() >= self.n_exp;
            let sim_full = self.pending_sim.len() >= self.n_sim;
            let may_dispatch = !draining && !exp_full && !sim_full && !(self.mode.serialize && busy > 0);
            if may_dispatch && self.dispatch()? {
                continue;
            }
            let want = if exp_full {
                Want::Expansion
            } else if sim_full {
                Want::Simulation
            } else {
                Want::Any
            };
            self.wait(want)?;
        }
        if self.t_complete != t_max || self.in_flight() != 0 {
            return Err(PlanError::Internal(format!(
                "run ended with {} completions and {} tasks in flight",
                self.t_complete,
                self.in_flight()
            )));
        }
        Ok(())
    }

    /// Selects one path and acts on it. Returns false when the selection
    /// stalled on in-flight expansions and the master has to wait instead.
    fn dispatch(&mut self) -> Result<bool, PlanError> {
        let policy = self.cfg.policy;
        let t = Instant::now();
        let sel = select_path(&self.tree, ScoreMode::WuUct, &policy, &mut self.rng);
        let action = match sel.stop {
            StopReason::Expand => choose_expansion_action(&self.tree, sel.leaf(), &mut self.rng),
            _ => None,
        };
        self.clock.selection += t.elapsed();
        match sel.stop {
            StopReason::Stall => {
                if self.pending_exp.is_empty() {
                    return Err(PlanError::Internal("selection stalled with no expansion in flight".into()));
                }
                Ok(false)
            }
            StopReason::Terminal => {
                let path = PathRecord::new(sel.nodes, self.take_tau());
                self.shortcut(&path)?;
                Ok(true)
            }
            StopReason::Simulate => {
                let path = PathRecord::new(sel.nodes, self.take_tau());
                self.dispatch_simulation(path)?;
                Ok(true)
            }
            StopReason::Expand => {
                let action = action.ok_or_else(|| PlanError::Internal("expandable node without open actions".into()))?;
                let leaf = sel.leaf();
                self.tree.reserve(leaf, action)?;
                let task = self.take_tau();
                let state = self.state_of(leaf)?;
                let t = Instant::now();
                self.pools.exp.send(ExpansionTask { task, node: leaf, action, state }).map_err(PlanError::Transport)?;
                self.clock.communication += t.elapsed();
                self.pending_exp.insert(task, PathRecord::new(sel.nodes, task));
                Ok(true)
            }
        }
    }

    fn take_tau(&mut self) -> u64 {
        let t = self.tau;
        self.tau += 1;
        t
    }

    fn state_of(&self, node: NodeId) -> Result<S, PlanError> {
        self.states.duplicate(node).ok_or_else(|| PlanError::Internal(format!("no state stored for {node:?}")))
    }

    fn dispatch_simulation(&mut self, path: PathRecord) -> Result<(), PlanError> {
        let state = self.state_of(path.leaf())?;
        let task = SimulationTask {
            task: path.task,
            state,
            seed: simulation_seed(self.cfg.policy.rng_seed, path.task),
            policy: self.cfg.policy,
        };
        let t = Instant::now();
        self.pools.sim.send(task).map_err(PlanError::Transport)?;
        self.clock.communication += t.elapsed();
        let t = Instant::now();
        self.incomplete(&path);
        self.clock.backprop += t.elapsed();
        self.pending_sim.insert(path.task, path);
        Ok(())
    }

    /// A path ending in a terminal node completes at once with return 0.
    fn shortcut(&mut self, path: &PathRecord) -> Result<(), PlanError> {
        let t = Instant::now();
        self.incomplete(path);
        let r = self.complete(path, 0.0);
        self.clock.backprop += t.elapsed();
        r
    }

    fn incomplete(&mut self, path: &PathRecord) {
        if self.mode.naive {
            return;
        }
        self.tree.incomplete_update(path);
        self.max_root_in_flight = self.max_root_in_flight.max(self.tree.stats(self.tree.root()).in_flight);
        self.log(EventKind::Incomplete, path);
    }

    fn complete(&mut self, path: &PathRecord, ret: f64) -> Result<(), PlanError> {
        let gamma = self.cfg.policy.gamma;
        if self.mode.naive {
            self.tree.backpropagate(path, ret, gamma);
        } else {
            self.tree.complete_update(path, ret, gamma)?;
            self.log(EventKind::Complete, path);
        }
        self.t_complete += 1;
        Ok(())
    }

    fn log(&mut self, kind: EventKind, path: &PathRecord) {
        if self.mode.record_events {
            let in_flight_after = path.nodes.iter().map(|&n| self.tree.stats(n).in_flight).collect();
            self.events.push(Event { kind, nodes: path.nodes.clone(), in_flight_after });
        }
    }

    /// Blocks for one result and processes it. Time until the worker finished
    /// counts as the worker's phase, the rest as communication.
    fn wait(&mut self, want: Want) -> Result<(), PlanError> {
        let closed = |_| PlanError::Transport("result queue closed".into());
        let exp_rx = self.pools.exp.results();
        let sim_rx = self.pools.sim.results();
        let b0 = Instant::now();
        let msg = match want {
            Want::Expansion => Message::Expansion(exp_rx.recv().map_err(closed)?),
            Want::Simulation => Message::Simulation(sim_rx.recv().map_err(closed)?),
            Want::Any => select! {
                recv(exp_rx) -> r => Message::Expansion(r.map_err(closed)?),
                recv(sim_rx) -> r => Message::Simulation(r.map_err(closed)?),
            },
        };
        let b1 = Instant::now();
        let finished = match &msg {
            Message::Expansion(r) => r.finished,
            Message::Simulation(r) => r.finished,
        }
        .clamp(b0, b1);
        let worker_part = finished - b0;
        self.clock.communication += b1 - finished;
        match msg {
            Message::Expansion(r) => {
                self.clock.expansion += worker_part;
                self.on_expansion(r)
            }
            Message::Simulation(r) => {
                self.clock.simulation += worker_part;
                self.on_simulation(r)
            }
        }
    }

    fn on_expansion(&mut self, r: ExpansionResult<S>) -> Result<(), PlanError> {
        let mut path = self
            .pending_exp
            .remove(&r.task)
            .ok_or_else(|| PlanError::Internal(format!("unknown expansion task {}", r.task)))?;
        self.busy_exp += r.finished.saturating_duration_since(r.started);
        let out = r.outcome?;
        let t = Instant::now();
        let child = self.tree.expand_attach(r.node, r.action, out.reward, out.terminal)?;
        self.states.insert(child, out.next_state);
        path.nodes.push(child);
        self.clock.expansion += t.elapsed();
        if out.terminal {
            self.shortcut(&path)
        } else {
            self.dispatch_simulation(path)
        }
    }

    fn on_simulation(&mut self, r: SimulationResult) -> Result<(), PlanError> {
        let path = self
            .pending_sim
            .remove(&r.task)
            .ok_or_else(|| PlanError::Internal(format!("unknown simulation task {}", r.task)))?;
        self.busy_sim += r.finished.saturating_duration_since(r.started);
        let ret = r.outcome?;
        let t = Instant::now();
        let out = self.complete(&path, ret);
        self.clock.backprop += t.elapsed();
        out
    }
}
