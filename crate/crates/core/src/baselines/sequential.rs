use std::sync::Arc;
use std::time::Instant;

use super::sequential_rollouts;
use crate::env::Environment;
use crate::policy::master_rng;
use crate::runtime::report::PhaseClock;
use crate::runtime::{build_report, EchoExtras, Occupancy, PlanConfig, PlanError, PlanOutcome, Planner};
use crate::tree::{SearchTree, StateBuffer};

/// Single-threaded UCT.
pub struct SequentialPlanner<E> {
    env: Arc<E>,
    cfg: PlanConfig,
}

impl<E: Environment> SequentialPlanner<E> {
    pub fn new(env: Arc<E>, cfg: PlanConfig) -> Result<Self, PlanError> {
        cfg.validate()?;
        Ok(Self { env, cfg })
    }
}

impl<E: Environment> Planner<E> for SequentialPlanner<E> {
    fn name(&self) -> &'static str {
        "sequential"
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
        let start = Instant::now();
        let mut tree = SearchTree::new(env.action_count(), cfg.limits, env.is_terminal(state));
        let mut states = StateBuffer::new(state.clone());
        let mut rng = master_rng(cfg.policy.rng_seed);
        let mut clock = PhaseClock::default();
        let seed = cfg.policy.rng_seed;
        sequential_rollouts(env, &cfg.policy, &mut tree, &mut states, &mut rng, seed, 0, cfg.t_max, &mut clock)?;
        let wall = start.elapsed();
        let wall_s = wall.as_secs_f64().max(f64::MIN_POSITIVE);
        let occupancy = Occupancy {
            expansion: clock.expansion.as_secs_f64() / wall_s,
            simulation: clock.simulation.as_secs_f64() / wall_s,
        };
        let extras = EchoExtras { n_exp: 1, n_sim: 1, ..Default::default() };
        let (best_action, report) = build_report(self.name(), &cfg, &tree, wall, clock.times(), occupancy, extras);
        Ok(PlanOutcome { best_action, report, tree })
    }
}
