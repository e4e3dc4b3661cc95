use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::env::Environment;
use crate::policy::{choose_expansion_action, master_rng, select_path, simulation_seed, ScoreMode, StopReason};
use crate::runtime::pool::{simulation_pool, SimulationPool, SimulationTask};
use crate::runtime::report::PhaseClock;
use crate::runtime::{build_report, EchoExtras, Occupancy, PlanConfig, PlanError, PlanOutcome, Planner};
use crate::tree::{PathRecord, SearchTree, StateBuffer};

/// Leaf parallelization: each iteration selects and expands one node on the
/// master, then runs a batch of rollouts from it on the simulation workers.
///
/// The last batch is cut to the remaining budget so the root ends with exactly
/// `t_max` visits.
pub struct LeafPPlanner<E: Environment> {
    env: Arc<E>,
    cfg: PlanConfig,
    n_sim: usize,
    pool: Option<SimulationPool<E::State>>,
    iterations: u64,
}

impl<E: Environment> LeafPPlanner<E> {
    pub fn new(env: Arc<E>, cfg: PlanConfig, n_sim: usize) -> Result<Self, PlanError> {
        if n_sim == 0 {
            return Err(PlanError::Config("n_sim must be >= 1".into()));
        }
        cfg.validate()?;
        Ok(Self { env, cfg, n_sim, pool: None, iterations: 0 })
    }

    /// Selection iterations of the last run.
    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    fn run(
        &mut self,
        tree: &mut SearchTree,
        states: &mut StateBuffer<E::State>,
        clock: &mut PhaseClock,
        busy: &mut Duration,
    ) -> Result<(), PlanError> {
        let cfg = self.cfg;
        let policy = cfg.policy;
        let env = Arc::clone(&self.env);
        let n_sim = self.n_sim;
        let pool = self.pool.get_or_insert_with(|| simulation_pool(Arc::clone(&env), n_sim));
        let mut rng = master_rng(policy.rng_seed);
        let mut t_complete = 0u64;
        self.iterations = 0;
        while t_complete < cfg.t_max {
            self.iterations += 1;
            let batch = (cfg.t_max - t_complete).min(n_sim as u64);
            let sel = clock.time(|c| &mut c.selection, || select_path(tree, ScoreMode::Uct, &policy, &mut rng));
            let mut path = PathRecord::new(sel.nodes, t_complete);
            match sel.stop {
                StopReason::Stall => return Err(PlanError::Internal("selection stalled".into())),
                StopReason::Expand => {
                    let leaf = path.leaf();
                    let action = choose_expansion_action(tree, leaf, &mut rng)
                        .ok_or_else(|| PlanError::Internal("expandable node without open actions".into()))?;
                    let state = states.get(leaf).ok_or_else(|| PlanError::Internal("missing state".into()))?;
                    let out = clock.time(|c| &mut c.expansion, || env.step(state, action))?;
                    let child = tree.expand_attach(leaf, action, out.reward, out.terminal)?;
                    states.insert(child, out.next_state);
                    path.nodes.push(child);
                }
                StopReason::Simulate | StopReason::Terminal => {}
            }
            let leaf = path.leaf();
            let mut returns = vec![0.0; batch as usize];
            if !tree.stats(leaf).terminal {
                let state = states.get(leaf).ok_or_else(|| PlanError::Internal("missing state".into()))?;
                let t = Instant::now();
                for i in 0..batch {
                    let task = t_complete + i;
                    let seed = simulation_seed(policy.rng_seed, task);
                    pool.send(SimulationTask { task, state: state.clone(), seed, policy }).map_err(PlanError::Transport)?;
                }
                clock.communication += t.elapsed();
                let b0 = Instant::now();
                let mut last_finish = b0;
                for _ in 0..batch {
                    let r = pool.results().recv().map_err(|_| PlanError::Transport("result queue closed".into()))?;
                    *busy += r.finished.saturating_duration_since(r.started);
                    last_finish = last_finish.max(r.finished);
                    returns[(r.task - t_complete) as usize] = r.outcome?;
                }
                let b1 = Instant::now();
                let last_finish = last_finish.clamp(b0, b1);
                clock.simulation += last_finish - b0;
                clock.communication += b1 - last_finish;
            }
            clock.time(
                |c| &mut c.backprop,
                || returns.iter().for_each(|&r| tree.backpropagate(&path, r, policy.gamma)),
            );
            t_complete += batch;
        }
        Ok(())
    }
}

impl<E: Environment> Planner<E> for LeafPPlanner<E> {
    fn name(&self) -> &'static str {
        "leafp"
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
        let start = Instant::now();
        let mut tree = SearchTree::new(self.env.action_count(), cfg.limits, self.env.is_terminal(state));
        let mut states = StateBuffer::new(state.clone());
        let mut clock = PhaseClock::default();
        let mut busy = Duration::ZERO;
        if let Err(e) = self.run(&mut tree, &mut states, &mut clock, &mut busy) {
            self.pool = None;
            return Err(e);
        }
        let wall = start.elapsed();
        let occupancy = Occupancy {
            expansion: 0.0,
            simulation: busy.as_secs_f64() / (self.n_sim as f64 * wall.as_secs_f64().max(f64::MIN_POSITIVE)),
        };
        let extras = EchoExtras { n_exp: 0, n_sim: self.n_sim, ..Default::default() };
        let (best_action, report) = build_report(self.name(), &cfg, &tree, wall, clock.times(), occupancy, extras);
        Ok(PlanOutcome { best_action, report, tree })
    }
}
