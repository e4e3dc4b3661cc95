use std::sync::Arc;
use std::time::Duration;

use wuuct_core::env::{ActionId, DelayWrapper, EnvError, Environment, StepOutcome, SyntheticTreeEnv};
use wuuct_core::policy::{score, PolicyConfig, ScoreMode};
use wuuct_core::runtime::{PlanConfig, Planner};
use wuuct_core::tree::{NodeStats, SearchTree};
use wuuct_core::{LeafPPlanner, RootPPlanner, SequentialPlanner, TreePConfig, TreePPlanner};

fn cfg(t_max: u64, seed: u64) -> PlanConfig {
    PlanConfig { t_max, policy: PolicyConfig { rng_seed: seed, ..Default::default() }, ..Default::default() }
}

fn assert_same_tree(a: &SearchTree, b: &SearchTree) {
    assert_eq!(a.len(), b.len());
    for id in a.node_ids() {
        assert_eq!(a.action_into(id), b.action_into(id));
        assert_eq!(a.stats(id).visits, b.stats(id).visits, "{id:?}");
        assert!((a.stats(id).value - b.stats(id).value).abs() <= 1e-12, "{id:?}");
    }
}

#[test]
fn sequential_finds_the_exhaustive_optimum() {
    let env = Arc::new(SyntheticTreeEnv::new(2, 2, 7).unwrap());
    let (_, best) = env.optimal_plan(1.0).unwrap();
    for seed in 0..10 {
        let c = PlanConfig { t_max: 64, policy: PolicyConfig { gamma: 1.0, rng_seed: seed, ..Default::default() }, ..Default::default() };
        let mut p = SequentialPlanner::new(Arc::clone(&env), c).unwrap();
        assert_eq!(p.plan(&env.initial_state()).unwrap().best_action, Some(best));
    }
}

#[test]
fn sequential_single_rollout_and_determinism() {
    let env = Arc::new(SyntheticTreeEnv::new(4, 6, 3).unwrap());
    let mut p = SequentialPlanner::new(Arc::clone(&env), cfg(1, 0)).unwrap();
    let out = p.plan(&env.initial_state()).unwrap();
    assert_eq!(out.tree.len(), 2);
    assert_eq!(out.tree.stats(out.tree.root()).visits, 1);

    let mut p = SequentialPlanner::new(Arc::clone(&env), cfg(100, 4)).unwrap();
    let a = p.plan(&env.initial_state()).unwrap();
    let b = p.plan(&env.initial_state()).unwrap();
    assert_eq!(a.tree.snapshot(), b.tree.snapshot());
    assert_eq!(a.best_action, b.best_action);
}

#[test]
fn degenerate_baselines_match_sequential() {
    let env = Arc::new(SyntheticTreeEnv::new(4, 6, 5).unwrap());
    for seed in 0..5 {
        let s = env.initial_state();
        let seq = SequentialPlanner::new(Arc::clone(&env), cfg(128, seed)).unwrap().plan(&s).unwrap();
        let leaf = LeafPPlanner::new(Arc::clone(&env), cfg(128, seed), 1).unwrap().plan(&s).unwrap();
        let tp = TreePConfig { workers: 1, r_vl: 0.0, n_vl: None };
        let tree = TreePPlanner::new(Arc::clone(&env), cfg(128, seed), tp).unwrap().plan(&s).unwrap();
        assert_same_tree(&seq.tree, &leaf.tree);
        assert_same_tree(&seq.tree, &tree.tree);
    }
}

#[test]
fn leafp_iteration_count() {
    let env = Arc::new(SyntheticTreeEnv::new(4, 6, 1).unwrap());
    let mut p = LeafPPlanner::new(Arc::clone(&env), cfg(128, 0), 8).unwrap();
    let out = p.plan(&env.initial_state()).unwrap();
    assert_eq!(p.iterations(), 16);
    assert_eq!(out.tree.stats(out.tree.root()).visits, 128);

    let mut p = LeafPPlanner::new(Arc::clone(&env), cfg(100, 0), 8).unwrap();
    let out = p.plan(&env.initial_state()).unwrap();
    assert_eq!(p.iterations(), 13);
    assert_eq!(out.tree.stats(out.tree.root()).visits, 100);
    assert!(out.tree.visit_conservation_check());
}

/// Chain of `len` steps with reward 1 each whatever the action.
#[derive(Clone, Debug)]
struct Corridor {
    len: u32,
}

impl Environment for Corridor {
    type State = u32;
    fn name(&self) -> &str {
        "corridor"
    }
    fn action_count(&self) -> usize {
        3
    }
    fn initial_state(&self) -> u32 {
        0
    }
    fn is_terminal(&self, s: &u32) -> bool {
        *s >= self.len
    }
    fn step(&self, s: &u32, a: ActionId) -> Result<StepOutcome<u32>, EnvError> {
        if a.0 >= 3 {
            return Err(EnvError::InvalidAction { action: a.0, count: 3 });
        }
        Ok(StepOutcome { next_state: s + 1, reward: 1.0, terminal: s + 1 >= self.len })
    }
    fn encode_state(&self, s: &u32) -> Vec<u8> {
        s.to_le_bytes().to_vec()
    }
    fn decode_state(&self, b: &[u8]) -> Result<u32, EnvError> {
        Ok(u32::from_le_bytes(b.try_into().map_err(|_| EnvError::Decode("length".into()))?))
    }
}

#[test]
fn leafp_batch_returns_agree_on_deterministic_env() {
    let env = Arc::new(Corridor { len: 5 });
    let c = PlanConfig { t_max: 8, policy: PolicyConfig { gamma: 0.5, ..Default::default() }, ..Default::default() };
    let mut p = LeafPPlanner::new(Arc::clone(&env), c, 8).unwrap();
    let out = p.plan(&0).unwrap();
    assert_eq!(p.iterations(), 1);
    let child = out.tree.children(out.tree.root())[0].1;
    // the child's value is 1 + 0.5 * (rollout of the remaining 4 rewards)
    let rollout = 1.0 + 0.5 + 0.25 + 0.125;
    assert_eq!(out.tree.stats(child).visits, 8);
    assert_eq!(out.tree.stats(child).value, 1.0 + 0.5 * rollout);
}

#[test]
fn treep_values_carry_no_residual_loss() {
    let env = Arc::new(DelayWrapper::new(SyntheticTreeEnv::new(3, 7, 2).unwrap(), Duration::from_micros(100)));
    for (r_vl, n_vl) in [(1.0, None), (5.0, None), (1.0, Some(1.0)), (3.0, Some(3.0))] {
        let tp = TreePConfig { workers: 4, r_vl, n_vl };
        let mut p = TreePPlanner::new(Arc::clone(&env), cfg(96, 1), tp).unwrap().record_log(true);
        let out = p.plan(&env.initial_state()).unwrap();
        let tree = &out.tree;
        assert_eq!(tree.stats(tree.root()).visits, 96);
        assert!(tree.node_ids().all(|id| tree.stats(id).in_flight == 0));
        assert!(tree.visit_conservation_check());

        let mut replay = tree.cleared();
        for (path, ret) in p.log() {
            replay.backpropagate(path, *ret, 0.99);
        }
        for id in tree.node_ids() {
            assert_eq!(tree.stats(id).value.to_bits(), replay.stats(id).value.to_bits(), "{id:?}");
        }
    }
}

#[test]
fn pseudocount_mode_adjusts_the_read_only() {
    let parent = NodeStats { visits: 10, in_flight: 1, ..NodeStats::fresh(0.0, false, 0) };
    let child = NodeStats { value: 1.0, visits: 4, in_flight: 1, ..NodeStats::fresh(0.0, false, 1) };
    let s = score(ScoreMode::TreeP { r_vl: 1.0, n_vl: Some(1.0) }, &parent, &child, 0.0);
    assert!((s - 0.6).abs() < 1e-15);
    assert_eq!(child.value, 1.0);
}

#[test]
fn rootp_budgets() {
    let env = Arc::new(Corridor { len: 4 });
    let mut p = RootPPlanner::new(Arc::clone(&env), cfg(30, 0), 1).unwrap();
    let out = p.plan(&0).unwrap();
    let root = out.tree.root();
    assert_eq!(out.tree.stats(root).visits, 30);
    assert_eq!(out.tree.children(root).len(), 3);
    for &(_, c) in out.tree.children(root) {
        assert_eq!(out.tree.stats(c).visits, 10);
    }
    assert!(out.tree.visit_conservation_check());

    let env = Arc::new(SyntheticTreeEnv::new(4, 5, 0).unwrap());
    let mut p = RootPPlanner::new(Arc::clone(&env), cfg(100, 3), 4).unwrap();
    let out = p.plan(&env.initial_state()).unwrap();
    assert_eq!(out.report.rollouts, 100);
    let mut p = RootPPlanner::new(Arc::clone(&env), cfg(101, 3), 4).unwrap();
    assert_eq!(p.plan(&env.initial_state()).unwrap().report.rollouts, 4 * 26);
}
