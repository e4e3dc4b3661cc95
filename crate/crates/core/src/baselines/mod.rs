//! Sequential UCT and the classical parallel schemes: leaf parallelization,
//! tree parallelization with virtual loss and root parallelization.

mod leafp;
mod rootp;
mod sequential;
mod treep;

use rand_chacha::ChaCha8Rng;

use crate::env::Environment;
use crate::policy::{choose_expansion_action, rollout, rollout_rng, select_path, simulation_seed, PolicyConfig, ScoreMode, StopReason};
use crate::runtime::report::PhaseClock;
use crate::runtime::PlanError;
use crate::tree::{PathRecord, SearchTree, StateBuffer};

pub use leafp::LeafPPlanner;
pub use rootp::{rootp_budget, RootPPlanner};
pub use sequential::SequentialPlanner;
pub use treep::{TreePConfig, TreePPlanner};

/// `count` strictly sequential rollouts on `tree`; rollout `i` uses task index
/// `first_task + i` for its simulation seed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sequential_rollouts<E: Environment>(
    env: &E,
    policy: &PolicyConfig,
    tree: &mut SearchTree,
    states: &mut StateBuffer<E::State>,
    rng: &mut ChaCha8Rng,
    seed: u64,
    first_task: u64,
    count: u64,
    clock: &mut PhaseClock,
) -> Result<(), PlanError> {
    for task in first_task..first_task + count {
        let sel = clock.time(|c| &mut c.selection, || select_path(tree, ScoreMode::Uct, policy, rng));
        let mut path = PathRecord::new(sel.nodes, task);
        let ret = match sel.stop {
            StopReason::Terminal => 0.0,
            StopReason::Stall => return Err(PlanError::Internal("sequential selection stalled".into())),
            StopReason::Simulate | StopReason::Expand => {
                if sel.stop == StopReason::Expand {
                    let leaf = path.leaf();
                    let action = choose_expansion_action(tree, leaf, rng)
                        .ok_or_else(|| PlanError::Internal("expandable node without open actions".into()))?;
                    let state = states.get(leaf).ok_or_else(|| PlanError::Internal("missing state".into()))?;
                    let out = clock.time(|c| &mut c.expansion, || env.step(state, action))?;
                    let child = tree.expand_attach(leaf, action, out.reward, out.terminal)?;
                    states.insert(child, out.next_state);
                    path.nodes.push(child);
                }
                let leaf = path.leaf();
                if tree.stats(leaf).terminal {
                    0.0
                } else {
                    let state = states.get(leaf).ok_or_else(|| PlanError::Internal("missing state".into()))?;
                    let mut r = rollout_rng(simulation_seed(seed, task));
                    clock.time(|c| &mut c.simulation, || rollout(env, state, policy, &mut r))?
                }
            }
        };
        clock.time(|c| &mut c.backprop, || tree.backpropagate(&path, ret, policy.gamma));
    }
    Ok(())
}
