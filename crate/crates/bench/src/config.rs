//! Benchmark configuration: INI file, bundled presets and CLI overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use ini::Ini;
use serde::{Deserialize, Serialize};
use wuuct_core::env::DelayMode;
use wuuct_core::policy::PolicyConfig;
use wuuct_core::runtime::PlanConfig;
use wuuct_core::tree::TreeLimits;

use crate::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    Sequential,
    WuUct,
    Naive,
    Leafp,
    Treep,
    TreepPc,
    Rootp,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 7] = [
        PlannerKind::Sequential,
        PlannerKind::WuUct,
        PlannerKind::Naive,
        PlannerKind::Leafp,
        PlannerKind::Treep,
        PlannerKind::TreepPc,
        PlannerKind::Rootp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlannerKind::Sequential => "sequential",
            PlannerKind::WuUct => "wu-uct",
            PlannerKind::Naive => "naive",
            PlannerKind::Leafp => "leafp",
            PlannerKind::Treep => "treep",
            PlannerKind::TreepPc => "treep-pc",
            PlannerKind::Rootp => "rootp",
        }
    }

    /// Whether the planner has a separate expansion pool.
    pub fn uses_expansion_workers(self) -> bool {
        matches!(self, PlannerKind::WuUct | PlannerKind::Naive)
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlannerKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| BenchError::Config(format!("unknown planner '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum EnvParams {
    Synthetic { branching: usize, depth: u32, seed: u64 },
    Tile { width: usize, height: usize, colors: u8, step_budget: u32, goal: u32, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub planner: PlannerKind,
    pub env: EnvParams,
    /// Per-step delay added to the environment, in milliseconds.
    pub step_delay_ms: f64,
    pub delay_mode: DelayModeName,
    pub plan: PlanConfig,
    pub n_exp: Vec<usize>,
    pub n_sim: Vec<usize>,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    /// Environment steps per episode before it is cut off.
    pub max_steps: usize,
    pub r_vl: f64,
    pub n_vl: Option<f64>,
    pub out_dir: PathBuf,
    /// Run one unrecorded episode before each cell.
    pub warmup: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayModeName {
    Sleep,
    Spin,
}

impl From<DelayModeName> for DelayMode {
    fn from(m: DelayModeName) -> Self {
        match m {
            DelayModeName::Sleep => DelayMode::Sleep,
            DelayModeName::Spin => DelayMode::Spin,
        }
    }
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            planner: PlannerKind::WuUct,
            env: EnvParams::Synthetic { branching: 4, depth: 8, seed: 0 },
            step_delay_ms: 0.0,
            delay_mode: DelayModeName::Sleep,
            plan: PlanConfig::default(),
            n_exp: vec![1],
            n_sim: vec![1],
            episodes: 1,
            seeds: vec![0],
            max_steps: 1000,
            r_vl: 1.0,
            n_vl: None,
            out_dir: PathBuf::from("bench-out"),
            warmup: true,
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub planner: Option<PlannerKind>,
    pub n_sim: Option<Vec<usize>>,
    pub t_max: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

pub const PRESETS: [&str; 2] = ["joycity-desk", "atari-desk"];

impl BenchConfig {
    /// Bundled starting points. `joycity-desk` is the tile puzzle with 500
    /// rollouts per move; `atari-desk` a synthetic tree behind a 10 ms step
    /// delay with 128 rollouts, depth limit 100 and width 20.
    pub fn preset(name: &str) -> Result<Self, BenchError> {
        let base = Self::default();
        match name {
            "joycity-desk" => Ok(Self {
                planner: PlannerKind::WuUct,
                env: EnvParams::Tile { width: 6, height: 6, colors: 4, step_budget: 10, goal: 21, seed: 3 },
                plan: PlanConfig { t_max: 500, ..PlanConfig::default() },
                n_exp: vec![1],
                n_sim: vec![1, 4, 16],
                episodes: 10,
                max_steps: 100,
                ..base
            }),
            "atari-desk" => Ok(Self {
                planner: PlannerKind::WuUct,
                env: EnvParams::Synthetic { branching: 4, depth: 16, seed: 1 },
                step_delay_ms: 10.0,
                plan: PlanConfig {
                    t_max: 128,
                    limits: TreeLimits { max_depth: 100, max_children: 20 },
                    ..PlanConfig::default()
                },
                n_exp: vec![1],
                n_sim: vec![1, 2, 4, 8, 16],
                episodes: 1,
                max_steps: 1,
                ..base
            }),
            other => Err(BenchError::Config(format!("unknown preset '{other}' (known: {})", PRESETS.join(", ")))),
        }
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_ini_str(&text)
    }

    pub fn from_ini_str(text: &str) -> Result<Self, BenchError> {
        let ini = Ini::load_from_str(text).map_err(|e| BenchError::Config(format!("malformed config: {e}")))?;
        let get = |section: &str, key: &str| ini.section(Some(section)).and_then(|s| s.get(key)).map(str::trim);
        let mut cfg = match get("run", "preset") {
            Some(p) => Self::preset(p)?,
            None => Self::default(),
        };

        if let Some(v) = get("run", "planner") {
            cfg.planner = v.parse()?;
        }
        set(&mut cfg.plan.t_max, get("run", "t_max"), "run.t_max")?;
        set(&mut cfg.episodes, get("run", "episodes"), "run.episodes")?;
        set(&mut cfg.max_steps, get("run", "max_steps"), "run.max_steps")?;
        set(&mut cfg.warmup, get("run", "warmup"), "run.warmup")?;
        if let Some(v) = get("run", "seeds").or(get("run", "seed")) {
            cfg.seeds = list(v, "run.seeds")?;
        }

        if let Some(name) = get("env", "name") {
            cfg.env = match name {
                "synthetic" => EnvParams::Synthetic { branching: 4, depth: 8, seed: 0 },
                "tile" => EnvParams::Tile { width: 6, height: 6, colors: 4, step_budget: 10, goal: 21, seed: 0 },
                other => return Err(BenchError::Config(format!("unknown env '{other}'"))),
            };
        }
        match &mut cfg.env {
            EnvParams::Synthetic { branching, depth, seed } => {
                set(branching, get("env", "branching"), "env.branching")?;
                set(depth, get("env", "depth"), "env.depth")?;
                set(seed, get("env", "seed"), "env.seed")?;
            }
            EnvParams::Tile { width, height, colors, step_budget, goal, seed } => {
                set(width, get("env", "width"), "env.width")?;
                set(height, get("env", "height"), "env.height")?;
                set(colors, get("env", "colors"), "env.colors")?;
                set(step_budget, get("env", "step_budget"), "env.step_budget")?;
                set(goal, get("env", "goal"), "env.goal")?;
                set(seed, get("env", "seed"), "env.seed")?;
            }
        }
        set(&mut cfg.step_delay_ms, get("env", "step_delay_ms"), "env.step_delay_ms")?;
        if let Some(v) = get("env", "delay_mode") {
            cfg.delay_mode = match v {
                "sleep" => DelayModeName::Sleep,
                "spin" => DelayModeName::Spin,
                other => return Err(BenchError::Config(format!("env.delay_mode: unknown mode '{other}'"))),
            };
        }

        let p = &mut cfg.plan.policy;
        set(&mut p.beta, get("policy", "beta"), "policy.beta")?;
        set(&mut p.gamma, get("policy", "gamma"), "policy.gamma")?;
        set(&mut p.expand_stop_prob, get("policy", "expand_stop_prob"), "policy.expand_stop_prob")?;
        set(&mut p.value_blend, get("policy", "value_blend"), "policy.value_blend")?;
        if let Some(v) = get("policy", "rollout_horizon") {
            p.rollout_horizon = match v {
                "none" | "unbounded" => None,
                v => Some(parse(v, "policy.rollout_horizon")?),
            };
        }
        set(&mut cfg.plan.limits.max_depth, get("policy", "max_depth"), "policy.max_depth")?;
        set(&mut cfg.plan.limits.max_children, get("policy", "max_children"), "policy.max_children")?;

        if let Some(v) = get("workers", "n_exp") {
            cfg.n_exp = list(v, "workers.n_exp")?;
        }
        if let Some(v) = get("workers", "n_sim") {
            cfg.n_sim = list(v, "workers.n_sim")?;
        }
        set(&mut cfg.r_vl, get("treep", "r_vl"), "treep.r_vl")?;
        if let Some(v) = get("treep", "n_vl") {
            cfg.n_vl = Some(parse(v, "treep.n_vl")?);
        }
        if let Some(v) = get("output", "dir") {
            cfg.out_dir = PathBuf::from(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), BenchError> {
        if let Some(p) = o.planner {
            self.planner = p;
        }
        if let Some(n) = &o.n_sim {
            self.n_sim = n.clone();
        }
        if let Some(t) = o.t_max {
            self.plan.t_max = t;
        }
        if let Some(s) = o.seed {
            self.seeds = vec![s];
        }
        if let Some(out) = &o.out {
            self.out_dir = out.clone();
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.n_exp.is_empty() || self.n_sim.is_empty() || self.seeds.is_empty() {
            return bad("worker grids and seed list must be non-empty");
        }
        if self.n_exp.contains(&0) || self.n_sim.contains(&0) {
            return bad("worker counts must be >= 1");
        }
        if self.episodes == 0 {
            return bad("episodes must be >= 1");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be >= 1");
        }
        if !(self.step_delay_ms >= 0.0 && self.step_delay_ms.is_finite()) {
            return bad("step_delay_ms must be >= 0");
        }
        let negative = |x: f64| x.is_nan() || x < 0.0;
        if negative(self.r_vl) || self.n_vl.is_some_and(negative) {
            return bad("virtual loss parameters must be >= 0");
        }
        self.plan.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        self.build_check()
    }

    fn build_check(&self) -> Result<(), BenchError> {
        match &self.env {
            EnvParams::Synthetic { branching, depth, seed } => {
                wuuct_core::SyntheticTreeEnv::new(*branching, *depth, *seed).map(|_| ())
            }
            EnvParams::Tile { width, height, colors, step_budget, goal, seed } => {
                wuuct_core::TilePuzzleEnv::generate(*width, *height, *colors, *step_budget, *goal, *seed).map(|_| ())
            }
        }
        .map_err(|e| BenchError::Config(format!("env: {e}")))
    }

    pub fn step_delay(&self) -> Duration {
        Duration::from_secs_f64(self.step_delay_ms / 1e3)
    }

    pub fn policy(&self) -> PolicyConfig {
        self.plan.policy
    }
}

fn parse<T: FromStr>(v: &str, key: &str) -> Result<T, BenchError> {
    v.trim().parse().map_err(|_| BenchError::Config(format!("{key}: cannot parse '{v}'")))
}

fn set<T: FromStr>(slot: &mut T, v: Option<&str>, key: &str) -> Result<(), BenchError> {
    if let Some(v) = v {
        *slot = parse(v, key)?;
    }
    Ok(())
}

/// Comma-separated list.
pub fn list<T: FromStr>(v: &str, key: &str) -> Result<Vec<T>, BenchError> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(s, key)).collect()
}
