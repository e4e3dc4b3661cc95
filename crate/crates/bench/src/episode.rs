use wuuct_core::env::{splitmix64, Environment};
use wuuct_core::runtime::{Planner, RunReport};

use crate::planners::Env;
use crate::BenchError;

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    /// Undiscounted sum of environment rewards.
    pub total_return: f64,
    pub steps: usize,
    /// One report per planning call.
    pub reports: Vec<RunReport>,
    /// Stopped by the step cap rather than a terminal state.
    pub truncated: bool,
}

/// Planner seed for move `step` of an episode seeded with `seed`.
pub fn step_seed(seed: u64, step: usize) -> u64 {
    splitmix64(seed ^ splitmix64(step as u64))
}

/// Plays one episode from the initial state, planning every move from a
/// fresh tree. A terminal initial state gives return 0 after 0 steps.
pub fn run_episode(
    planner: &mut dyn Planner<Env>,
    env: &Env,
    seed: u64,
    max_steps: usize,
) -> Result<EpisodeResult, BenchError> {
    let mut state = env.initial_state();
    let mut out = EpisodeResult { total_return: 0.0, steps: 0, reports: Vec::new(), truncated: false };
    while !env.is_terminal(&state) {
        if out.steps >= max_steps {
            out.truncated = true;
            break;
        }
        planner.config_mut().policy.rng_seed = step_seed(seed, out.steps);
        let plan = planner.plan(&state)?;
        let action = plan
            .best_action
            .ok_or_else(|| BenchError::Runtime("planner returned no action for a live state".into()))?;
        let step = env.step(&state, action).map_err(|e| BenchError::Runtime(e.to_string()))?;
        out.total_return += step.reward;
        out.steps += 1;
        out.reports.push(plan.report);
        state = step.next_state;
    }
    Ok(out)
}
