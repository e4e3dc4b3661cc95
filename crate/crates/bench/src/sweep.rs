//! Worker-grid sweeps.

use serde::{Deserialize, Serialize};
use wuuct_core::env::splitmix64;
use wuuct_core::runtime::{PhaseTimes, RunReport};

use crate::config::{BenchConfig, PlannerKind};
use crate::episode::run_episode;
use crate::planners::{build_env, build_planner, thread_count, threads_cap};
use crate::BenchError;

/// One row of the sweep table. Timings are means per planning call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub planner: String,
    pub n_exp: usize,
    pub n_sim: usize,
    pub seed: u64,
    pub return_mean: f64,
    pub return_std: f64,
    pub steps_mean: f64,
    pub wall_ms_per_plan: f64,
    /// Baseline wall time per plan over this cell's; 0 when either is 0.
    pub speedup: f64,
    pub sel_ms: f64,
    pub exp_ms: f64,
    pub sim_ms: f64,
    pub bp_ms: f64,
    pub comm_ms: f64,
}

impl CellResult {
    pub fn phase_total_ms(&self) -> f64 {
        self.sel_ms + self.exp_ms + self.sim_ms + self.bp_ms + self.comm_ms
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub planner: String,
    pub n_exp: usize,
    pub n_sim: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
    /// Report of the last planning call in each cell, in `cells` order.
    pub reports: Vec<Option<RunReport>>,
}

/// Grid cells for `kind`, smallest first so the speedup baseline runs before
/// the cells that are measured against it. Planners without an expansion
/// pool only get `n_exp = 1`; the sequential planner only `(1, 1)`.
pub fn grid(cfg: &BenchConfig, kind: PlannerKind) -> Vec<(usize, usize)> {
    if kind == PlannerKind::Sequential {
        return vec![(1, 1)];
    }
    let exps: Vec<usize> = if kind.uses_expansion_workers() { cfg.n_exp.clone() } else { vec![1] };
    let mut cells: Vec<(usize, usize)> =
        exps.iter().flat_map(|&e| cfg.n_sim.iter().map(move |&s| (e, s))).collect();
    cells.sort_by_key(|&(e, s)| (e + s, e, s));
    cells.dedup();
    cells
}

/// Seed of episode `i` in a cell seeded with `seed`. The warm-up uses `None`.
pub fn episode_seed(seed: u64, i: Option<usize>) -> u64 {
    match i {
        Some(i) => splitmix64(seed.wrapping_add(i as u64)),
        None => splitmix64(!seed),
    }
}

struct Measured {
    returns: Vec<f64>,
    steps: Vec<f64>,
    plans: usize,
    wall_ms: f64,
    phases: PhaseTimes,
    last: Option<RunReport>,
}

fn measure(cfg: &BenchConfig, kind: PlannerKind, n_exp: usize, n_sim: usize, seed: u64) -> Result<Measured, BenchError> {
    let env = build_env(cfg)?;
    let mut planner = build_planner(kind, &env, cfg.plan, n_exp, n_sim, cfg.r_vl, cfg.n_vl)?;
    if cfg.warmup {
        run_episode(planner.as_mut(), &env, episode_seed(seed, None), cfg.max_steps)?;
    }
    let mut m = Measured {
        returns: Vec::new(),
        steps: Vec::new(),
        plans: 0,
        wall_ms: 0.0,
        phases: PhaseTimes::default(),
        last: None,
    };
    for i in 0..cfg.episodes {
        let ep = run_episode(planner.as_mut(), &env, episode_seed(seed, Some(i)), cfg.max_steps)?;
        m.returns.push(ep.total_return);
        m.steps.push(ep.steps as f64);
        for r in ep.reports {
            m.plans += 1;
            m.wall_ms += r.wall_ms;
            m.phases.add(&r.phase_ms);
            m.last = Some(r);
        }
    }
    Ok(m)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Runs every planner over the worker grid for every seed. Each finished
/// cell is handed to `on_cell` before the next one starts; a failing cell is
/// recorded and the sweep moves on.
pub fn sweep(
    cfg: &BenchConfig,
    planners: &[PlannerKind],
    mut on_cell: impl FnMut(&CellResult) -> Result<(), BenchError>,
) -> Result<SweepResult, BenchError> {
    cfg.validate()?;
    let cap = threads_cap();
    let mut out = SweepResult::default();
    for &kind in planners {
        for &seed in &cfg.seeds {
            let mut baseline: Option<f64> = None;
            for (n_exp, n_sim) in grid(cfg, kind) {
                let fail = |error: String| CellFailure { planner: kind.to_string(), n_exp, n_sim, seed, error };
                if let Some(cap) = cap.filter(|&c| thread_count(kind, n_exp, n_sim) > c) {
                    out.failures.push(fail(format!("skipped: needs more than WUUCT_THREADS_CAP={cap} threads")));
                    continue;
                }
                let m = match measure(cfg, kind, n_exp, n_sim, seed) {
                    Ok(m) => m,
                    Err(BenchError::Io(e)) => return Err(BenchError::Io(e)),
                    Err(e) => {
                        eprintln!("{kind} n_exp={n_exp} n_sim={n_sim} seed={seed}: {e}");
                        out.failures.push(fail(e.to_string()));
                        continue;
                    }
                };
                let plans = m.plans.max(1) as f64;
                let wall = m.wall_ms / plans;
                let base = *baseline.get_or_insert(wall);
                let ph = m.phases.scaled(1.0 / plans);
                let cell = CellResult {
                    planner: kind.to_string(),
                    n_exp,
                    n_sim,
                    seed,
                    return_mean: mean(&m.returns),
                    return_std: std_dev(&m.returns),
                    steps_mean: mean(&m.steps),
                    wall_ms_per_plan: wall,
                    speedup: if wall > 0.0 && base > 0.0 { base / wall } else { 0.0 },
                    sel_ms: ph.selection,
                    exp_ms: ph.expansion,
                    sim_ms: ph.simulation,
                    bp_ms: ph.backprop,
                    comm_ms: ph.communication,
                };
                on_cell(&cell)?;
                out.cells.push(cell);
                out.reports.push(m.last);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_orders_baseline_first() {
        let cfg = BenchConfig { n_exp: vec![4, 1], n_sim: vec![16, 1, 4], ..BenchConfig::default() };
        let g = grid(&cfg, PlannerKind::WuUct);
        assert_eq!(g[0], (1, 1));
        assert_eq!(g.len(), 6);
        assert_eq!(grid(&cfg, PlannerKind::Leafp), vec![(1, 1), (1, 4), (1, 16)]);
    }

    #[test]
    fn std_dev_of_small_samples() {
        assert_eq!(std_dev(&[3.0]), 0.0);
        assert!((std_dev(&[1.0, 3.0]) - 2f64.sqrt()).abs() < 1e-15);
    }
}
