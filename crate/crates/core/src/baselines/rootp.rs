use std::sync::Arc;
use std::time::Instant;

use super::sequential_rollouts;
use crate::env::{splitmix64, Environment};
use crate::policy::{choose_expansion_action, master_rng};
use crate::runtime::report::PhaseClock;
use crate::runtime::{build_report, EchoExtras, Occupancy, PlanConfig, PlanError, PlanOutcome, Planner};
use crate::tree::{NodeId, SearchTree, StateBuffer};

/// Rollouts per root child: `ceil(t_max / children)`.
pub fn rootp_budget(t_max: u64, children: usize) -> u64 {
    t_max.div_ceil(children.max(1) as u64)
}

/// Root parallelization: all root children are expanded up front, each gets
/// the same rollout budget, and workers search their share of the children in
/// private trees that are merged at the end.
///
/// The total rollout count is `children · ceil(t_max / children)`, which
/// exceeds `t_max` unless it is a multiple of the child count.
pub struct RootPPlanner<E> {
    env: Arc<E>,
    cfg: PlanConfig,
    workers: usize,
}

/// `budget` rollouts below root child `child`, run by `worker`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Unit {
    child: usize,
    worker: usize,
    budget: u64,
}

/// Spreads `children · t_avg` rollouts over the workers. With at least as
/// many workers as children every child is split over its own workers;
/// otherwise whole children are dealt round-robin.
fn assign(children: usize, workers: usize, t_avg: u64) -> Vec<Unit> {
    let mut units = Vec::new();
    if workers >= children {
        for child in 0..children {
            let mine: Vec<usize> = (0..workers).filter(|w| w % children == child).collect();
            let k = mine.len() as u64;
            for (j, &worker) in mine.iter().enumerate() {
                let budget = t_avg / k + u64::from((j as u64) < t_avg % k);
                if budget > 0 {
                    units.push(Unit { child, worker, budget });
                }
            }
        }
    } else {
        for child in 0..children {
            units.push(Unit { child, worker: child % workers, budget: t_avg });
        }
    }
    units
}

impl<E: Environment> RootPPlanner<E> {
    pub fn new(env: Arc<E>, cfg: PlanConfig, workers: usize) -> Result<Self, PlanError> {
        cfg.validate()?;
        if workers == 0 {
            return Err(PlanError::Config("workers must be >= 1".into()));
        }
        Ok(Self { env, cfg, workers })
    }
}

impl<E: Environment> Planner<E> for RootPPlanner<E> {
    fn name(&self) -> &'static str {
        "rootp"
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
        let policy = cfg.policy;
        let env = self.env.as_ref();
        let start = Instant::now();
        let mut clock = PhaseClock::default();
        let mut tree = SearchTree::new(env.action_count(), cfg.limits, env.is_terminal(state));
        let mut states = StateBuffer::new(state.clone());
        let mut rng = master_rng(policy.rng_seed);
        let extras = EchoExtras { n_exp: 0, n_sim: self.workers, ..Default::default() };

        if tree.stats(tree.root()).terminal {
            sequential_rollouts(env, &policy, &mut tree, &mut states, &mut rng, policy.rng_seed, 0, cfg.t_max, &mut clock)?;
            let (best_action, report) =
                build_report(self.name(), &cfg, &tree, start.elapsed(), clock.times(), Occupancy::default(), extras);
            return Ok(PlanOutcome { best_action, report, tree });
        }

        let root = tree.root();
        let t = Instant::now();
        while let Some(a) = choose_expansion_action(&tree, root, &mut rng).filter(|_| tree.can_expand(root)) {
            let out = env.step(state, a)?;
            let child = tree.expand_attach(root, a, out.reward, out.terminal)?;
            states.insert(child, out.next_state);
        }
        clock.expansion += t.elapsed();

        let children: Vec<NodeId> = tree.children(root).iter().map(|&(_, c)| c).collect();
        let t_avg = rootp_budget(cfg.t_max, children.len());
        let units = assign(children.len(), self.workers, t_avg);
        let prepared: Vec<(Unit, E::State)> = units
            .iter()
            .map(|u| states.duplicate(children[u.child]).map(|s| (*u, s)))
            .collect::<Option<_>>()
            .ok_or_else(|| PlanError::Internal("missing root child state".into()))?;
        let child_stats: Vec<_> = children.iter().map(|&c| *tree.stats(c)).collect();

        let mut batches: Vec<Vec<(usize, Unit, E::State)>> = (0..self.workers).map(|_| Vec::new()).collect();
        for (i, (u, st)) in prepared.iter().enumerate() {
            batches[u.worker].push((i, *u, st.clone()));
        }
        let mut results: Vec<Option<Result<(SearchTree, PhaseClock), PlanError>>> = vec![None; prepared.len()];
        std::thread::scope(|s| {
            let child_stats = &child_stats;
            let handles: Vec<_> = batches
                .into_iter()
                .map(|batch| {
                    s.spawn(move || {
                        batch
                            .into_iter()
                            .map(|(i, u, st)| {
                                let mut c = PhaseClock::default();
                                let seed = splitmix64(policy.rng_seed ^ splitmix64(((u.child as u64) << 32) | u.worker as u64));
                                let mut private = SearchTree::with_root(env.action_count(), cfg.limits, child_stats[u.child]);
                                let mut private_states = StateBuffer::new(st);
                                let mut r = master_rng(seed);
                                let run = sequential_rollouts(env, &policy, &mut private, &mut private_states, &mut r, seed, 0, u.budget, &mut c);
                                (i, run.map(|_| (private, c)))
                            })
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("root-parallel worker panicked") {
                    results[i] = Some(r);
                }
            }
        });

        let mut busy = std::time::Duration::ZERO;
        let mut worker_clock = PhaseClock::default();
        for ((u, _), res) in prepared.iter().zip(results) {
            let (private, c) = res.ok_or_else(|| PlanError::Internal("unit without result".into()))??;
            tree.merge_subtree(children[u.child], &private, private.root())?;
            worker_clock.selection += c.selection;
            worker_clock.expansion += c.expansion;
            worker_clock.simulation += c.simulation;
            worker_clock.backprop += c.backprop;
            busy += c.simulation;
        }
        let t = Instant::now();
        tree.aggregate_from_children(root, policy.gamma);
        clock.backprop += t.elapsed();
        let wall = start.elapsed();
        let workers = self.workers as f64;
        let mut phases = clock.times();
        phases.add(&worker_clock.times().scaled(1.0 / workers));
        let occupancy = Occupancy {
            expansion: 0.0,
            simulation: busy.as_secs_f64() / (workers * wall.as_secs_f64().max(f64::MIN_POSITIVE)),
        };
        let (best_action, report) = build_report(self.name(), &cfg, &tree, wall, phases, occupancy, extras);
        Ok(PlanOutcome { best_action, report, tree })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ActionId, SyntheticTreeEnv};
    use crate::tree::{NodeStats, PathRecord, TreeLimits};

    #[test]
    fn budget_arithmetic() {
        assert_eq!(rootp_budget(100, 4), 25);
        assert_eq!(rootp_budget(101, 4), 26);
        assert_eq!(rootp_budget(5, 20), 1);
    }

    #[test]
    fn assignment_conserves_budget() {
        for children in 1..6 {
            for workers in 1..10 {
                for t_avg in [1u64, 7, 25] {
                    let units = assign(children, workers, t_avg);
                    for c in 0..children {
                        let total: u64 = units.iter().filter(|u| u.child == c).map(|u| u.budget).sum();
                        assert_eq!(total, t_avg, "children={children} workers={workers}");
                    }
                    assert!(units.iter().all(|u| u.worker < workers && u.budget > 0));
                }
            }
        }
    }

    #[test]
    fn merge_is_visit_weighted() {
        let limits = TreeLimits::default();
        let mut main = SearchTree::new(2, limits, false);
        let child = main.expand_attach(main.root(), ActionId(0), 0.0, false).unwrap();
        let from = |visits, value| {
            SearchTree::with_root(2, limits, NodeStats { visits, value, ..NodeStats::fresh(0.0, false, 1) })
        };
        let a = from(3, 1.0);
        let b = from(1, 0.2);
        main.merge_subtree(child, &a, a.root()).unwrap();
        main.merge_subtree(child, &b, b.root()).unwrap();
        assert_eq!(main.stats(child).visits, 4);
        assert!((main.stats(child).value - 0.8).abs() < 1e-15);
    }

    #[test]
    fn merge_respects_the_width_cap() {
        let limits = TreeLimits { max_depth: 10, max_children: 1 };
        let mut main = SearchTree::new(3, limits, false);
        let child = main.expand_attach(main.root(), ActionId(0), 0.0, false).unwrap();
        for a in [1, 2] {
            let mut private = SearchTree::with_root(3, limits, NodeStats::fresh(0.0, false, 1));
            let leaf = private.expand_attach(private.root(), ActionId(a), 0.0, false).unwrap();
            for _ in 0..2 {
                private.backpropagate(&PathRecord::new(vec![private.root(), leaf], 0), 1.0, 1.0);
            }
            main.merge_subtree(child, &private, private.root()).unwrap();
        }
        main.stats_mut(main.root()).visits = 4;
        assert_eq!(main.children(child).len(), 1);
        assert_eq!(main.stats(child).visits, 4);
        assert!(main.visit_conservation_check());
    }

    #[test]
    fn total_rollouts_are_children_times_budget() {
        let env = Arc::new(SyntheticTreeEnv::new(4, 5, 2).unwrap());
        for workers in [1, 3, 4, 8] {
            let cfg = PlanConfig { t_max: 100, ..Default::default() };
            let mut p = RootPPlanner::new(Arc::clone(&env), cfg, workers).unwrap();
            let out = p.plan(&env.initial_state()).unwrap();
            assert_eq!(out.tree.stats(out.tree.root()).visits, 100);
            for &(_, c) in out.tree.children(out.tree.root()) {
                assert_eq!(out.tree.stats(c).visits, 25);
            }
            assert!(out.tree.visit_conservation_check());
            assert!(out.tree.mean_consistency_error() < 1e-9);
        }
    }
}
